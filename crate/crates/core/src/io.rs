//! Matrix Market files and system manifests.
//!
//! Supported headers: `%%MatrixMarket matrix coordinate|array real|integer
//! general|symmetric`. Symmetric storage is expanded on read. Writing always
//! uses `array real general` with 17 significant digits, which round-trips
//! bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result};
use crate::linalg::Matrix;
use crate::system::StateSpaceSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> MorError {
    MorError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses Matrix Market text; `path` is only used in error messages.
pub fn parse_matrix_market(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, hline, "missing '%%MatrixMarket matrix' header"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(path, hline, format!("unsupported format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(path, hline, format!("unsupported field '{other}'"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => {
            return Err(parse_err(path, hline, format!("unsupported symmetry '{other}'")))
        }
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (sline, size) = data
        .next()
        .ok_or_else(|| parse_err(path, hline + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, sline, format!("bad size line: {e}")))?;

    let parse_value = |line: usize, tok: &str| -> Result<f64> {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value '{tok}'")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(parse_err(path, line, format!("non-finite value '{tok}'")))
        }
    };

    match layout {
        Layout::Coordinate => {
            if dims.len() != 3 {
                return Err(parse_err(path, sline, "coordinate size line needs 'rows cols nnz'"));
            }
            let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
            if symmetry == Symmetry::Symmetric && rows != cols {
                return Err(parse_err(path, sline, "symmetric matrix must be square"));
            }
            let mut m = Matrix::zeros(rows, cols);
            let mut count = 0;
            for (line, entry) in data {
                let toks: Vec<&str> = entry.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, line, "expected 'row col value'"));
                }
                let i: usize = toks[0]
                    .parse()
                    .map_err(|_| parse_err(path, line, "bad row index"))?;
                let j: usize = toks[1]
                    .parse()
                    .map_err(|_| parse_err(path, line, "bad column index"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(
                        path,
                        line,
                        format!("index ({i}, {j}) outside {rows}x{cols}"),
                    ));
                }
                let v = parse_value(line, toks[2])?;
                m[(i - 1, j - 1)] = v;
                if symmetry == Symmetry::Symmetric {
                    m[(j - 1, i - 1)] = v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(parse_err(
                    path,
                    sline,
                    format!("header announces {nnz} entries, found {count}"),
                ));
            }
            Ok(m)
        }
        Layout::Array => {
            if dims.len() != 2 {
                return Err(parse_err(path, sline, "array size line needs 'rows cols'"));
            }
            let (rows, cols) = (dims[0], dims[1]);
            if symmetry == Symmetry::Symmetric && rows != cols {
                return Err(parse_err(path, sline, "symmetric matrix must be square"));
            }
            let mut values = Vec::new();
            let mut last_line = sline;
            for (line, entry) in data {
                for tok in entry.split_whitespace() {
                    values.push(parse_value(line, tok)?);
                }
                last_line = line;
            }
            let mut m = Matrix::zeros(rows, cols);
            match symmetry {
                Symmetry::General => {
                    if values.len() != rows * cols {
                        return Err(parse_err(
                            path,
                            last_line,
                            format!("expected {} values, found {}", rows * cols, values.len()),
                        ));
                    }
                    m.as_mut_slice().copy_from_slice(&values);
                }
                Symmetry::Symmetric => {
                    let want = rows * (rows + 1) / 2;
                    if values.len() != want {
                        return Err(parse_err(
                            path,
                            last_line,
                            format!("expected {want} values, found {}", values.len()),
                        ));
                    }
                    let mut it = values.into_iter();
                    for j in 0..cols {
                        for i in j..rows {
                            let v = it.next().unwrap_or_default();
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                }
            }
            Ok(m)
        }
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MorError::io(path, e))?;
    parse_matrix_market(&text, path)
}

/// `array real general`, column-major, 17 significant digits.
pub fn format_matrix_market(m: &Matrix) -> String {
    let mut out = String::with_capacity(32 + 25 * m.len());
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    for v in m.iter() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| MorError::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| MorError::io(&tmp, e))?;
    f.sync_all().map_err(|e| MorError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| MorError::io(path, e))
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    write_atomic(path, format_matrix_market(m).as_bytes())
}

/// Paths of the matrices making up a system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemPaths {
    #[serde(rename = "A")]
    pub a: PathBuf,
    #[serde(rename = "B")]
    pub b: PathBuf,
    #[serde(rename = "C")]
    pub c: PathBuf,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

pub fn load_system(paths: &SystemPaths) -> Result<StateSpaceSystem> {
    let a = read_matrix_market(&paths.a)?;
    let b = read_matrix_market(&paths.b)?;
    let c = read_matrix_market(&paths.c)?;
    let e = paths.e.as_ref().map(read_matrix_market).transpose()?;
    let name = paths.name.clone().unwrap_or_else(|| {
        paths
            .a
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "system".into())
    });
    StateSpaceSystem::new(name, a, b, c, e)
}

/// Reads a JSON manifest `{"A": path, "B": path, "C": path, "E": optional}`.
/// Relative paths are resolved against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<StateSpaceSystem> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MorError::io(path, e))?;
    let raw: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| MorError::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    for key in raw.keys() {
        if !matches!(key.as_str(), "A" | "B" | "C" | "E" | "name") {
            return Err(MorError::Manifest {
                path: path.to_path_buf(),
                msg: format!("unknown role '{key}'"),
            });
        }
    }
    let mut paths: SystemPaths = serde_json::from_value(serde_json::to_value(raw).unwrap_or_default())
        .map_err(|e| MorError::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
    paths.a = resolve(&paths.a);
    paths.b = resolve(&paths.b);
    paths.c = resolve(&paths.c);
    paths.e = paths.e.as_ref().map(resolve);
    load_system(&paths)
}

/// Writes `A.mtx`, `B.mtx`, `C.mtx` (and `E.mtx`) plus `manifest.json` into `dir`.
pub fn save_system(sys: &StateSpaceSystem, dir: impl AsRef<Path>) -> Result<PathBuf> {
    use crate::system::LinearModel;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| MorError::io(dir, e))?;
    write_matrix_market(dir.join("A.mtx"), sys.a())?;
    write_matrix_market(dir.join("B.mtx"), sys.b())?;
    write_matrix_market(dir.join("C.mtx"), sys.c())?;
    if let Some(e) = sys.e() {
        write_matrix_market(dir.join("E.mtx"), e)?;
    }
    let manifest = SystemPaths {
        a: "A.mtx".into(),
        b: "B.mtx".into(),
        c: "C.mtx".into(),
        e: sys.e().map(|_| "E.mtx".into()),
        name: Some(sys.name.clone()),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).unwrap_or_default();
    write_atomic(&path, json.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Matrix> {
        parse_matrix_market(text, Path::new("mem.mtx"))
    }

    #[test]
    fn coordinate_keeps_explicit_zero_and_header_dims() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real general\n% comment\n3 2 2\n1 1 0.0\n3 2 -4.5\n",
        )
        .unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m[(0, 0)], 0.0);
        assert_eq!(m[(2, 1)], -4.5);
    }

    #[test]
    fn symmetric_storage_is_expanded() {
        let m = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2\n2 1 3\n")
            .unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[2.0, 3.0, 3.0, 0.0]));

        let m = parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
    }

    #[test]
    fn array_is_column_major() {
        let m = parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n").unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0]));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1\n")
            .unwrap_err();
        match err {
            MorError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let err = parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n")
            .unwrap_err();
        assert!(matches!(err, MorError::Parse { line: 3, .. }));
        assert!(matches!(
            parse("garbage\n"),
            Err(MorError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn loads_smallest_system_from_manifest() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a", "b", "c"] {
            let v = if name == "a" { "-1" } else { "1" };
            fs::write(
                dir.path().join(format!("{name}.mtx")),
                format!("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 {v}\n"),
            )
            .unwrap();
        }
        fs::write(
            dir.path().join("sys.json"),
            r#"{"A": "a.mtx", "B": "b.mtx", "C": "c.mtx"}"#,
        )
        .unwrap();
        let sys = load_manifest(dir.path().join("sys.json")).unwrap();
        assert_eq!((sys.n(), sys.m(), sys.p()), (1, 1, 1));
    }

    #[test]
    fn mismatched_b_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, m: &Matrix| write_matrix_market(dir.path().join(name), m).unwrap();
        write("A.mtx", &(-Matrix::identity(2, 2)));
        write("B.mtx", &Matrix::zeros(3, 1));
        write("C.mtx", &Matrix::zeros(1, 2));
        let paths = SystemPaths {
            a: dir.path().join("A.mtx"),
            b: dir.path().join("B.mtx"),
            c: dir.path().join("C.mtx"),
            e: None,
            name: None,
        };
        let err = load_system(&paths).unwrap_err();
        assert!(err.to_string().contains("B"), "{err}");
    }

    #[test]
    fn save_and_reload_system() {
        let sys = crate::system::generate_heat_model(5, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_system(&sys, dir.path()).unwrap();
        assert_eq!(load_manifest(manifest).unwrap(), sys);
    }

    #[test]
    fn manifest_rejects_unknown_roles() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, r#"{"A": "a", "B": "b", "C": "c", "D": "d"}"#).unwrap();
        assert!(matches!(load_manifest(&p), Err(MorError::Manifest { .. })));
    }
}
