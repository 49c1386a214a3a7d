//! Named curves for data generation and demos.

use crate::dataio::CurveSpec;
use crate::error::{Error, Result};
use crate::fourier::{FourierCurve, MultiIndex};

pub const PRESET_NAMES: &[&str] = &["rabbit", "circle", "ellipse", "two-circles", "two-ellipses"];

/// One or more curves sharing a default noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePreset {
    pub name: &'static str,
    pub curves: Vec<FourierCurve>,
    pub sigma: f64,
}

impl CurvePreset {
    /// Splits `count` points as evenly as possible across the curves,
    /// earlier curves taking the remainder.
    pub fn specs(&self, sigma: f64, count: usize) -> Vec<CurveSpec> {
        let m = self.curves.len();
        self.curves
            .iter()
            .enumerate()
            .map(|(i, c)| CurveSpec {
                curve: c.clone(),
                sigma,
                count: count / m + usize::from(i < count % m),
            })
            .collect()
    }
}

/// Order-5 rabbit outline: `(cos, sin)` coefficient pairs per frequency.
pub fn rabbit() -> FourierCurve {
    const X: [(f64, f64); 5] = [(1.0, 0.5), (0.5, 0.25), (0.0, 0.0), (-0.125, 0.25), (0.125, -0.125)];
    const Y: [(f64, f64); 5] = [(0.25, 1.0), (0.0, 0.5), (-0.125, 0.25), (0.0, 0.0), (0.125, 0.125)];
    let mut curve = FourierCurve::zeros(2, 1, 5);
    for (i, table) in [X, Y].iter().enumerate() {
        for (f, &(c, s)) in table.iter().enumerate() {
            let l = f as i32 + 1;
            curve.set_coeff(i, &MultiIndex::new(vec![-l]), c);
            curve.set_coeff(i, &MultiIndex::new(vec![l]), s);
        }
    }
    curve
}

pub fn preset(name: &str) -> Result<CurvePreset> {
    let (name, curves, sigma) = match name {
        "rabbit" => ("rabbit", vec![rabbit()], 0.05),
        "circle" => ("circle", vec![FourierCurve::circle([0.0, 0.0], 1.0)], 0.05),
        "ellipse" => ("ellipse", vec![FourierCurve::ellipse([0.0, 0.0], 2.0, 1.0)], 0.05),
        "two-circles" => (
            "two-circles",
            vec![
                FourierCurve::circle([-1.5, 0.0], 1.0),
                FourierCurve::circle([1.5, 0.0], 1.0),
            ],
            0.05,
        ),
        "two-ellipses" => (
            "two-ellipses",
            vec![
                FourierCurve::ellipse([0.0, 0.0], 2.0, 0.7),
                FourierCurve::ellipse([0.5, 0.2], 0.8, 1.8),
            ],
            0.05,
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset {other:?}; known: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(CurvePreset { name, curves, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn direct(s: f64) -> (f64, f64) {
        let w = 2.0 * PI * s;
        let x = (w).cos() + 0.5 * (w).sin() + 0.5 * (2.0 * w).cos() + 0.25 * (2.0 * w).sin()
            - 0.125 * (4.0 * w).cos()
            + 0.25 * (4.0 * w).sin()
            + 0.125 * (5.0 * w).cos()
            - 0.125 * (5.0 * w).sin();
        let y = 0.25 * (w).cos() + (w).sin() + 0.5 * (2.0 * w).sin() - 0.125 * (3.0 * w).cos()
            + 0.25 * (3.0 * w).sin()
            + 0.125 * (5.0 * w).cos()
            + 0.125 * (5.0 * w).sin();
        (x, y)
    }

    #[test]
    fn rabbit_matches_formulas() {
        let r = rabbit();
        let p0 = r.eval(&[0.0]);
        assert!((p0[0] - 1.5).abs() < 1e-12 && (p0[1] - 0.25).abs() < 1e-12);
        for s in [0.0, 0.25, 0.5, 0.75] {
            let p = r.eval(&[s]);
            let (x, y) = direct(s);
            assert!((p[0] - x).abs() < 1e-12 && (p[1] - y).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn split_counts() {
        let p = preset("two-circles").unwrap();
        let specs = p.specs(0.1, 5);
        assert_eq!(specs.iter().map(|s| s.count).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn unknown_preset() {
        assert!(preset("dragon").is_err());
    }
}
