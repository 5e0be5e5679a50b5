use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tlbt::bounds::remainder_diagnostics;
use tlbt::io::{save_system, write_atomic, write_matrix_market};
use tlbt::simulation::{input_l2_norm, output_error};
use tlbt::{
    balance, balance_all, generate_heat_model, infinite_gramians, select_order, simulate,
    time_limited_gramians, tlbt_h2_bound, tlbt_h2_bound_alt, BalancingResult, GramianSet,
    InputSignal, ReducedModel, StateSpaceSystem,
};

use crate::config::{ExperimentConfig, Reduction};
use crate::CliError;

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    Ok(write_atomic(path, text.as_bytes())?)
}

fn save_config(cfg: &ExperimentConfig) -> Result<(), CliError> {
    Ok(write_atomic(cfg.out.join("config.json"), cfg.to_json().as_bytes())?)
}

/// Writes the heat model's matrices and manifest into `out`; returns the manifest path.
pub fn cmd_gen_model(n: usize, m: usize, p: usize, out: &Path) -> Result<PathBuf, CliError> {
    let sys = generate_heat_model(n, m, p)?;
    Ok(save_system(&sys, out)?)
}

/// Balances with respect to `gramians` and truncates according to `reduction`.
pub fn reduce_with(
    sys: &StateSpaceSystem,
    gramians: &GramianSet,
    reduction: Reduction,
) -> Result<(BalancingResult, ReducedModel), CliError> {
    let r = match reduction {
        Reduction::Order(r) => r,
        Reduction::Tol(tau) => select_order(&balance_all(gramians, sys)?.singular_values, tau)?,
    };
    let bal = balance(gramians, sys, r)?;
    let rom = tlbt::truncate(sys, &bal)?;
    Ok((bal, rom))
}

struct Pipeline {
    sys: StateSpaceSystem,
    gramians: GramianSet,
    bal: BalancingResult,
    rom: ReducedModel,
}

fn run_pipeline(cfg: &ExperimentConfig) -> Result<Pipeline, CliError> {
    cfg.validate()?;
    let sys = cfg.model.load()?;
    let gramians = time_limited_gramians(&sys, cfg.tbar)?;
    let (bal, rom) = reduce_with(&sys, &gramians, cfg.reduction)?;
    Ok(Pipeline {
        sys,
        gramians,
        bal,
        rom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceSummary {
    pub model: String,
    pub n: usize,
    pub r: usize,
    pub tbar: f64,
    /// Number of numerically nonzero singular values.
    pub available_order: usize,
    pub sigma_tail_sum: f64,
}

/// Writes `rom_A.mtx`, `rom_B.mtx`, `rom_C.mtx`, `sigma.csv` and `summary.json`.
pub fn cmd_reduce(cfg: &ExperimentConfig) -> Result<ReduceSummary, CliError> {
    let pl = run_pipeline(cfg)?;
    prepare_out(&cfg.out)?;
    write_matrix_market(cfg.out.join("rom_A.mtx"), &pl.rom.a11)?;
    write_matrix_market(cfg.out.join("rom_B.mtx"), &pl.rom.b1)?;
    write_matrix_market(cfg.out.join("rom_C.mtx"), &pl.rom.c1)?;
    let mut sigma = String::from("i,sigma\n");
    for (i, s) in pl.bal.singular_values.iter().enumerate() {
        sigma.push_str(&format!("{},{s:.16e}\n", i + 1));
    }
    write_atomic(cfg.out.join("sigma.csv"), sigma.as_bytes())?;
    let summary = ReduceSummary {
        model: pl.sys.name.clone(),
        n: pl.sys.n(),
        r: pl.rom.r,
        tbar: cfg.tbar,
        available_order: pl.bal.available_order(),
        sigma_tail_sum: pl.bal.tail_sum(),
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    save_config(cfg)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub eps2_alt: f64,
    pub alt_leading: f64,
    pub alt_remainder: f64,
    pub alt_last: f64,
    /// Upper estimate of `|alt_remainder|` from norms of its factors.
    pub remainder_bound: f64,
    /// `|eps2_alt - radicand|`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOutput {
    pub n: usize,
    pub r: usize,
    pub tbar: f64,
    pub epsilon: f64,
    pub term_cpc: f64,
    pub term_cprc: f64,
    pub term_cpmc: f64,
    pub radicand: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
}

/// Writes `bound.json`; `verify` adds the balanced-coordinate representation.
pub fn cmd_bound(cfg: &ExperimentConfig, verify: bool) -> Result<BoundOutput, CliError> {
    let pl = run_pipeline(cfg)?;
    let rep = tlbt_h2_bound(&pl.sys, &pl.rom, &pl.gramians.p, cfg.tbar)?;
    let verification = if verify {
        let alt = tlbt_h2_bound_alt(&pl.sys, &pl.gramians, pl.rom.r, cfg.tbar)?;
        let diag = remainder_diagnostics(&pl.sys, &pl.gramians, pl.rom.r, cfg.tbar)?;
        let eps2_alt = alt
            .alt_epsilon_squared()
            .expect("alternative path fills every term");
        Some(Verification {
            eps2_alt,
            alt_leading: alt.alt_leading.unwrap_or_default(),
            alt_remainder: alt.alt_remainder.unwrap_or_default(),
            alt_last: alt.alt_last.unwrap_or_default(),
            remainder_bound: diag.remainder_bound,
            discrepancy: (eps2_alt - rep.radicand).abs(),
        })
    } else {
        None
    };
    let out = BoundOutput {
        n: pl.sys.n(),
        r: pl.rom.r,
        tbar: cfg.tbar,
        epsilon: rep.epsilon,
        term_cpc: rep.term_cpc,
        term_cprc: rep.term_cprc,
        term_cpmc: rep.term_cpmc,
        radicand: rep.radicand,
        verification,
    };
    prepare_out(&cfg.out)?;
    write_json(&cfg.out.join("bound.json"), &out)?;
    save_config(cfg)?;
    Ok(out)
}

/// `||u||_{L²(0,T)}`, exact where the signal allows it.
fn input_norm(u: &InputSignal, tbar: f64, dt: f64) -> Result<f64, CliError> {
    match u.exact_l2_norm(tbar) {
        Some(v) => Ok(v),
        None => Ok(input_l2_norm(u, tbar, dt)?),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub r: usize,
    pub tbar: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub input_norm: f64,
    /// `ε ||u||_{L²(0,T)}`.
    pub bound_level: f64,
    pub max_error_horizon: f64,
    pub max_error_overall: f64,
}

/// Writes `y_full.csv`, `y_reduced.csv`, `error.csv` and `max_error.json`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary, CliError> {
    let pl = run_pipeline(cfg)?;
    let u = cfg.input.resolve(pl.sys.m(), cfg.tbar, cfg.seed)?;
    let rep = tlbt_h2_bound(&pl.sys, &pl.rom, &pl.gramians.p, cfg.tbar)?;
    let input_norm = input_norm(&u, cfg.tbar, cfg.dt)?;
    let bound_level = rep.epsilon * input_norm;
    let full = simulate(&pl.sys, &u, cfg.t_end, cfg.dt)?;
    let reduced = simulate(&pl.rom, &u, cfg.t_end, cfg.dt)?;
    let err = output_error(&full, &reduced, cfg.tbar)?;

    prepare_out(&cfg.out)?;
    full.write_csv(cfg.out.join("y_full.csv"))?;
    reduced.write_csv(cfg.out.join("y_reduced.csv"))?;
    let mut csv = String::from("t,err,bound_level\n");
    for (t, e) in full.times.iter().zip(&err.series) {
        csv.push_str(&format!("{t:.16e},{e:.16e},{bound_level:.16e}\n"));
    }
    write_atomic(cfg.out.join("error.csv"), csv.as_bytes())?;
    let summary = SimulateSummary {
        r: pl.rom.r,
        tbar: cfg.tbar,
        t_end: cfg.t_end,
        epsilon: rep.epsilon,
        input_norm,
        bound_level,
        max_error_horizon: err.max_on_horizon,
        max_error_overall: err.max_overall,
    };
    write_json(&cfg.out.join("max_error.json"), &summary)?;
    save_config(cfg)?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Reduced order.
    R,
    Tbar,
    /// Tolerance on the discarded singular values.
    Tau,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::R => "r",
            SweepAxis::Tbar => "tbar",
            SweepAxis::Tau => "tau",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "r" => Ok(SweepAxis::R),
            "tbar" => Ok(SweepAxis::Tbar),
            "tau" => Ok(SweepAxis::Tau),
            _ => Err(CliError::Usage(format!("unknown sweep axis '{s}' (r, tbar or tau)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Infinite-horizon balanced truncation.
    BT,
    TLBT,
}

/// One CSV row of a sweep. Failed points keep whatever was computed and
/// carry the first error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub method: Method,
    pub r: Option<usize>,
    pub max_error: Option<f64>,
    pub bound_level: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn empty(value: f64, method: Method) -> Self {
        SweepRow {
            value,
            method,
            r: None,
            max_error: None,
            bound_level: None,
            error: None,
        }
    }
}

/// Runs one method at one sweep point; fills `row` as far as it gets.
#[allow(clippy::too_many_arguments)]
fn sweep_method(
    row: &mut SweepRow,
    sys: &StateSpaceSystem,
    gramians: &GramianSet,
    reduction: Reduction,
    u: &InputSignal,
    full: &tlbt::Trajectory,
    tbar: f64,
    dt: f64,
    unorm: f64,
) -> Result<(), CliError> {
    let (_, rom) = reduce_with(sys, gramians, reduction)?;
    row.r = Some(rom.r);
    let reduced = simulate(&rom, u, tbar, dt)?;
    row.max_error = Some(output_error(full, &reduced, tbar)?.max_on_horizon);
    if row.method == Method::TLBT {
        let rep = tlbt_h2_bound(sys, &rom, &gramians.p, tbar)?;
        row.bound_level = Some(rep.epsilon * unorm);
    }
    Ok(())
}

fn sweep_point(
    cfg: &ExperimentConfig,
    sys: &StateSpaceSystem,
    axis: SweepAxis,
    value: f64,
    tl_fixed: Option<&Result<GramianSet, String>>,
    bt: &Result<GramianSet, String>,
) -> [SweepRow; 2] {
    let mut rows = [
        SweepRow::empty(value, Method::BT),
        SweepRow::empty(value, Method::TLBT),
    ];
    let fail_all = |rows: &mut [SweepRow; 2], msg: String| {
        for row in rows.iter_mut() {
            row.error.get_or_insert_with(|| msg.clone());
        }
    };
    let reduction = match axis {
        SweepAxis::R if value >= 1.0 && value.fract() == 0.0 => Reduction::Order(value as usize),
        SweepAxis::R => {
            fail_all(&mut rows, format!("order {value} is not a positive integer"));
            return rows;
        }
        SweepAxis::Tau => Reduction::Tol(value),
        SweepAxis::Tbar => cfg.reduction,
    };
    let tbar = if axis == SweepAxis::Tbar { value } else { cfg.tbar };
    let common = (|| -> Result<_, CliError> {
        let u = cfg.input.resolve(sys.m(), tbar, cfg.seed)?;
        let unorm = input_norm(&u, tbar, cfg.dt)?;
        let full = simulate(sys, &u, tbar, cfg.dt)?;
        Ok((u, unorm, full))
    })();
    let (u, unorm, full) = match common {
        Ok(c) => c,
        Err(e) => {
            fail_all(&mut rows, e.to_string());
            return rows;
        }
    };
    let tl_own;
    let tl = match tl_fixed {
        Some(g) => g,
        None => {
            tl_own = time_limited_gramians(sys, tbar).map_err(|e| e.to_string());
            &tl_own
        }
    };
    for (row, gramians) in rows.iter_mut().zip([bt, tl]) {
        let res = match gramians {
            Ok(g) => sweep_method(row, sys, g, reduction, &u, &full, tbar, cfg.dt, unorm),
            Err(msg) => Err(CliError::Usage(msg.clone())),
        };
        if let Err(e) = res {
            row.error = Some(e.to_string());
        }
    }
    rows
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:.16e}"))
}

/// CSV with columns `axis_value,method,r,max_error,bound_level,error`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["axis_value", "method", "r", "max_error", "bound_level", "error"];
    w.write_record(header).expect("in-memory write");
    for row in rows {
        let method = match row.method {
            Method::BT => "BT",
            Method::TLBT => "TLBT",
        };
        w.write_record([
            row.value.to_string(),
            method.to_string(),
            opt(row.r),
            opt_f64(row.max_error),
            opt_f64(row.bound_level),
            row.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Evaluates BT and TLBT at every value of `axis` and writes `sweep_<axis>.csv`.
/// Points run on up to `jobs` threads (`0` lets the pool decide); rows keep
/// the order of `values`.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    jobs: usize,
) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("sweep values must be finite".into()));
    }
    cfg.validate()?;
    let sys = cfg.model.load()?;
    let bt = infinite_gramians(&sys).map_err(|e| e.to_string());
    let tl_fixed = match axis {
        SweepAxis::Tbar => None,
        _ => Some(time_limited_gramians(&sys, cfg.tbar).map_err(|e| e.to_string())),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        values
            .par_iter()
            .flat_map_iter(|&v| sweep_point(cfg, &sys, axis, v, tl_fixed.as_ref(), &bt))
            .collect()
    });
    prepare_out(&cfg.out)?;
    write_atomic(
        cfg.out.join(format!("sweep_{}.csv", axis.name())),
        sweep_csv(&rows).as_bytes(),
    )?;
    save_config(cfg)?;
    Ok(rows)
}
