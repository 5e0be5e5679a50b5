//! Input signals `u(t)`.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MorError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    /// A fixed vector for all `t`.
    Constant { value: Vec<f64> },
    /// The seven-channel test signal
    /// `[sin(4πt/100), cos(πt/100), 3, e^{-2t}, cos(t/100) e^{-t}, 1/(1+t²), 1/(1+√t)]`.
    Star,
    Zero { dim: usize },
    /// Samples `values[k]` at `times[k]`, linearly interpolated and held
    /// constant outside the table.
    Table {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    /// `values[k]` on `[breaks[k], breaks[k+1])`, zero from `breaks.last()` on.
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl InputSignal {
    /// `c · 1_m`.
    pub fn constant(c: f64, m: usize) -> Self {
        InputSignal::Constant { value: vec![c; m] }
    }

    pub fn table(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(MorError::InvalidArgument(format!(
                "input table needs matching nonempty times/values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MorError::InvalidArgument(
                "input table time stamps must be strictly increasing".into(),
            ));
        }
        check_rows(&values)?;
        if times.iter().any(|t| !t.is_finite()) {
            return Err(MorError::NonFinite("input table times".into()));
        }
        Ok(InputSignal::Table { times, values })
    }

    pub fn piecewise_constant(breaks: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(MorError::InvalidArgument(
                "piecewise-constant input needs one more break than pieces".into(),
            ));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) || breaks[0] != 0.0 {
            return Err(MorError::InvalidArgument(
                "piecewise-constant breaks must start at 0 and increase strictly".into(),
            ));
        }
        check_rows(&values)?;
        Ok(InputSignal::PiecewiseConstant { breaks, values })
    }

    /// Piecewise-constant signal on `[0, horizon]` with `pieces` equal pieces,
    /// entries uniform on `[-1, 1]`, scaled to unit L² norm on `[0, horizon]`.
    pub fn random_piecewise_constant<R: Rng + ?Sized>(
        m: usize,
        horizon: f64,
        pieces: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if m == 0 || pieces == 0 || !(horizon > 0.0) {
            return Err(MorError::InvalidArgument(
                "random input needs m, pieces >= 1 and a positive horizon".into(),
            ));
        }
        let width = horizon / pieces as f64;
        let mut values: Vec<Vec<f64>> = (0..pieces)
            .map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let energy: f64 = values
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>() * width)
            .sum();
        if energy == 0.0 {
            return Err(MorError::InvalidArgument("random input drew all zeros".into()));
        }
        let scale = energy.sqrt().recip();
        for v in &mut values {
            for x in v.iter_mut() {
                *x *= scale;
            }
        }
        let mut breaks: Vec<f64> = (0..pieces).map(|k| k as f64 * width).collect();
        breaks.push(horizon);
        Self::piecewise_constant(breaks, values)
    }

    pub fn dim(&self) -> usize {
        match self {
            InputSignal::Constant { value } => value.len(),
            InputSignal::Star => 7,
            InputSignal::Zero { dim } => *dim,
            InputSignal::Table { values, .. } | InputSignal::PiecewiseConstant { values, .. } => {
                values.first().map_or(0, Vec::len)
            }
        }
    }

    /// Exact L² norm on `[0, horizon]` for piecewise-constant signals.
    pub fn exact_l2_norm(&self, horizon: f64) -> Option<f64> {
        match self {
            InputSignal::Zero { .. } => Some(0.0),
            InputSignal::Constant { value } => {
                Some((value.iter().map(|x| x * x).sum::<f64>() * horizon).sqrt())
            }
            InputSignal::PiecewiseConstant { breaks, values } => {
                let mut acc = 0.0;
                for (k, v) in values.iter().enumerate() {
                    let lo = breaks[k].min(horizon);
                    let hi = breaks[k + 1].min(horizon);
                    acc += v.iter().map(|x| x * x).sum::<f64>() * (hi - lo);
                }
                Some(acc.sqrt())
            }
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(MorError::InvalidArgument(format!(
                "input evaluated at invalid time {t}"
            )));
        }
        let out = match self {
            InputSignal::Constant { value } => DVector::from_column_slice(value),
            InputSignal::Zero { dim } => DVector::zeros(*dim),
            InputSignal::Star => {
                use std::f64::consts::PI;
                DVector::from_vec(vec![
                    (4.0 * t * PI / 100.0).sin(),
                    (t * PI / 100.0).cos(),
                    3.0,
                    (-2.0 * t).exp(),
                    (t / 100.0).cos() * (-t).exp(),
                    1.0 / (1.0 + t * t),
                    1.0 / (1.0 + t.sqrt()),
                ])
            }
            InputSignal::Table { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    DVector::from_column_slice(&values[0])
                } else if k == times.len() {
                    DVector::from_column_slice(&values[k - 1])
                } else {
                    let (t0, t1) = (times[k - 1], times[k]);
                    let w = (t - t0) / (t1 - t0);
                    let lo = DVector::from_column_slice(&values[k - 1]);
                    let hi = DVector::from_column_slice(&values[k]);
                    lo * (1.0 - w) + hi * w
                }
            }
            InputSignal::PiecewiseConstant { breaks, values } => {
                let k = breaks.partition_point(|&s| s <= t);
                if k == 0 || k > values.len() {
                    DVector::zeros(values[0].len())
                } else {
                    DVector::from_column_slice(&values[k - 1])
                }
            }
        };
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(MorError::NonFinite(format!("input value at t = {t}")))
        }
    }
}

fn check_rows(values: &[Vec<f64>]) -> Result<()> {
    let m = values.first().map_or(0, Vec::len);
    if m == 0 || values.iter().any(|v| v.len() != m) {
        return Err(MorError::InvalidArgument(
            "input samples must all have the same nonzero length".into(),
        ));
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MorError::NonFinite("input samples".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn star_at_zero() {
        let u = InputSignal::Star.eval(0.0).unwrap();
        assert_eq!(u.as_slice(), &[0.0, 1.0, 3.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_fifty() {
        let u = InputSignal::constant(50.0, 7).eval(123.4).unwrap();
        assert_eq!(u.len(), 7);
        assert!(u.iter().all(|&v| v == 50.0));
    }

    #[test]
    fn zero_signal() {
        assert_eq!(InputSignal::Zero { dim: 3 }.eval(1.0).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn negative_time_rejected() {
        assert!(InputSignal::Star.eval(-1.0).is_err());
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let u = InputSignal::table(vec![1.0, 3.0], vec![vec![0.0], vec![4.0]]).unwrap();
        assert_eq!(u.eval(0.0).unwrap()[0], 0.0);
        assert_eq!(u.eval(2.0).unwrap()[0], 2.0);
        assert_eq!(u.eval(10.0).unwrap()[0], 4.0);
        assert!(InputSignal::table(vec![1.0, 1.0], vec![vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn random_input_has_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = InputSignal::random_piecewise_constant(3, 10.0, 8, &mut rng).unwrap();
        assert!((u.exact_l2_norm(10.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(u.eval(10.5).unwrap(), DVector::zeros(3));
        assert_eq!(u.dim(), 3);
    }
}
