//! Truncated multidimensional Fourier series describing closed curves
//! (`d = 1`) and tori (`d >= 2`) embedded in `R^n`, together with the
//! elementary trigonometric integrals the closed forms are built from.
//!
//! # Trig convention
//!
//! A multiindex entry `l` selects the basis function on its axis:
//!
//! | `l`     | basis                 |
//! |---------|-----------------------|
//! | `l < 0` | `cos(-2π l s)`        |
//! | `l = 0` | `1`                   |
//! | `l > 0` | `sin(2π l s)`         |
//!
//! The basis function of a full multiindex is the product over axes.
//! The sign of the cosine argument is irrelevant numerically but it is part
//! of the serialized model format (see [`TRIG_CONVENTION`]).
//!
//! # Index order
//!
//! Multiindices are enumerated lexicographically with the first axis most
//! significant, i.e. `(-k,-k), (-k,-k+1), ..., (k,k)` for `d = 2`. The same
//! order is used for segment indices `{0..K-1}^d`. Coefficients are stored
//! row-major as `coeffs[i * (2k+1)^d + rank(l)]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tag written into model files to pin the basis convention.
pub const TRIG_CONVENTION: &str = "neg:cos(-2pi*l*s),zero:1,pos:sin(2pi*l*s)";

/// An integer tuple indexing either a Fourier basis function or a segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<i32>);

impl MultiIndex {
    pub fn new(entries: Vec<i32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn entries(&self) -> &[i32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Lexicographic rank within the box `{lo..=hi}^d`.
    pub fn rank(&self, lo: i32, hi: i32) -> usize {
        let base = (hi - lo + 1) as usize;
        self.0
            .iter()
            .fold(0usize, |acc, &e| acc * base + (e - lo) as usize)
    }

    /// Inverse of [`MultiIndex::rank`].
    pub fn from_rank(mut rank: usize, lo: i32, hi: i32, dim: usize) -> Self {
        let base = (hi - lo + 1) as usize;
        let mut entries = vec![0; dim];
        for e in entries.iter_mut().rev() {
            *e = lo + (rank % base) as i32;
            rank /= base;
        }
        MultiIndex(entries)
    }
}

impl From<Vec<i32>> for MultiIndex {
    fn from(v: Vec<i32>) -> Self {
        MultiIndex(v)
    }
}

/// Iterates `{lo..=hi}^dim` in lexicographic order.
pub fn multi_indices(lo: i32, hi: i32, dim: usize) -> impl Iterator<Item = MultiIndex> {
    let base = (hi - lo + 1).max(0) as usize;
    let count = base.pow(dim as u32);
    (0..count).map(move |r| MultiIndex::from_rank(r, lo, hi, dim))
}

/// Number of basis functions `(2k+1)^d`.
pub fn basis_len(order: usize, intrinsic_dim: usize) -> usize {
    (2 * order + 1).pow(intrinsic_dim as u32)
}

/// One-axis basis function.
#[inline]
pub fn trig(l: i32, s: f64) -> f64 {
    match l.signum() {
        -1 => (-2.0 * PI * l as f64 * s).cos(),
        0 => 1.0,
        _ => (2.0 * PI * l as f64 * s).sin(),
    }
}

/// `∫_{j/K}^{(j+1)/K} trig(l, s) ds`.
pub fn axis_single(l: i32, j: i32, segments: usize) -> f64 {
    let (a, b) = axis_bounds(j, segments);
    let antiderivative = |s: f64| -> f64 {
        let lf = l as f64;
        match l.signum() {
            -1 => -(-2.0 * PI * lf * s).sin() / (2.0 * PI * lf),
            0 => s,
            _ => -(2.0 * PI * lf * s).cos() / (2.0 * PI * lf),
        }
    };
    antiderivative(b) - antiderivative(a)
}

/// `∫_{j/K}^{(j+1)/K} trig(l1, s) trig(l2, s) ds`, evaluated with the
/// per-sign-pattern antiderivatives. The `l1 = ±l2` sub-branches avoid the
/// removable singularities of the product-to-sum forms.
pub fn axis_pair(l1: i32, l2: i32, j: i32, segments: usize) -> f64 {
    use std::cmp::Ordering::*;

    let (a, b) = axis_bounds(j, segments);
    let p = l1 as f64;
    let q = l2 as f64;
    let sum = p + q;
    let dif = p - q;
    let f = |s: f64| -> f64 {
        match (l1.cmp(&0), l2.cmp(&0)) {
            (Less, Less) => {
                let first = -(-2.0 * PI * s * sum).sin() / (4.0 * PI * sum);
                if l1 != l2 {
                    first - (-2.0 * PI * s * dif).sin() / (4.0 * PI * dif)
                } else {
                    first + s / 2.0
                }
            }
            (Less, Equal) => -(-2.0 * PI * p * s).sin() / (2.0 * PI * p),
            (Less, Greater) => {
                let first = (-2.0 * PI * s * dif).cos() / (4.0 * PI * dif);
                if l1 != -l2 {
                    first - (-2.0 * PI * s * sum).cos() / (4.0 * PI * sum)
                } else {
                    first
                }
            }
            (Equal, Less) => -(-2.0 * PI * q * s).sin() / (2.0 * PI * q),
            (Equal, Equal) => s,
            (Equal, Greater) => -(2.0 * PI * q * s).cos() / (2.0 * PI * q),
            (Greater, Less) => {
                let first = -(2.0 * PI * s * dif).cos() / (4.0 * PI * dif);
                if l1 != -l2 {
                    first - (2.0 * PI * s * sum).cos() / (4.0 * PI * sum)
                } else {
                    first
                }
            }
            (Greater, Equal) => -(2.0 * PI * p * s).cos() / (2.0 * PI * p),
            (Greater, Greater) => {
                let last = -(2.0 * PI * s * sum).sin() / (4.0 * PI * sum);
                if l1 != l2 {
                    (2.0 * PI * s * dif).sin() / (4.0 * PI * dif) + last
                } else {
                    s / 2.0 + last
                }
            }
        }
    };
    f(b) - f(a)
}

fn axis_bounds(j: i32, segments: usize) -> (f64, f64) {
    let k = segments as f64;
    (j as f64 / k, (j + 1) as f64 / k)
}

/// Integral of the basis function `l` over the segment `j` of a `K^d` grid.
pub fn g_single(j: &MultiIndex, l: &MultiIndex, segments: usize) -> f64 {
    debug_assert_eq!(j.dim(), l.dim());
    j.entries()
        .iter()
        .zip(l.entries())
        .map(|(&jm, &lm)| axis_single(lm, jm, segments))
        .product()
}

/// Integral of the product of basis functions `l1` and `l2` over segment `j`.
pub fn g_pair(j: &MultiIndex, l1: &MultiIndex, l2: &MultiIndex, segments: usize) -> f64 {
    debug_assert_eq!(j.dim(), l1.dim());
    debug_assert_eq!(j.dim(), l2.dim());
    j.entries()
        .iter()
        .zip(l1.entries().iter().zip(l2.entries()))
        .map(|(&jm, (&a, &b))| axis_pair(a, b, jm, segments))
        .product()
}

/// A truncated Fourier series map `[0,1]^d -> R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCurve {
    ambient_dim: usize,
    intrinsic_dim: usize,
    order: usize,
    coeffs: Vec<f64>,
}

impl FourierCurve {
    pub fn new(
        ambient_dim: usize,
        intrinsic_dim: usize,
        order: usize,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        if ambient_dim == 0 || intrinsic_dim == 0 {
            return Err(Error::InvalidCurve(
                "ambient and intrinsic dimensions must be positive".into(),
            ));
        }
        let expected = ambient_dim * basis_len(order, intrinsic_dim);
        if coeffs.len() != expected {
            return Err(Error::InvalidCurve(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        if let Some(pos) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidCurve(format!(
                "coefficient {pos} is not finite"
            )));
        }
        Ok(FourierCurve {
            ambient_dim,
            intrinsic_dim,
            order,
            coeffs,
        })
    }

    pub fn zeros(ambient_dim: usize, intrinsic_dim: usize, order: usize) -> Self {
        let len = ambient_dim * basis_len(order, intrinsic_dim);
        FourierCurve {
            ambient_dim: ambient_dim.max(1),
            intrinsic_dim: intrinsic_dim.max(1),
            order,
            coeffs: vec![0.0; len],
        }
    }

    /// The degenerate curve sitting at `point`.
    pub fn constant(point: &[f64], intrinsic_dim: usize, order: usize) -> Self {
        let mut curve = Self::zeros(point.len(), intrinsic_dim, order);
        let zero = MultiIndex::zeros(intrinsic_dim);
        for (i, &p) in point.iter().enumerate() {
            curve.set_coeff(i, &zero, p);
        }
        curve
    }

    /// `s ↦ (cx + a cos 2πs, cy + b sin 2πs)`.
    pub fn ellipse(center: [f64; 2], a: f64, b: f64) -> Self {
        let mut curve = Self::constant(&center, 1, 1);
        curve.set_coeff(0, &MultiIndex::new(vec![-1]), a);
        curve.set_coeff(1, &MultiIndex::new(vec![1]), b);
        curve
    }

    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        Self::ellipse(center, radius, radius)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn basis_len(&self) -> usize {
        basis_len(self.order, self.intrinsic_dim)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Replaces the coefficient vector, keeping the layout.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.ambient_dim, self.intrinsic_dim, self.order, coeffs)
    }

    fn flat_index(&self, i: usize, l: &MultiIndex) -> usize {
        let k = self.order as i32;
        assert!(i < self.ambient_dim, "coordinate {i} out of range");
        assert_eq!(l.dim(), self.intrinsic_dim, "multiindex dimension");
        assert!(
            l.entries().iter().all(|e| e.abs() <= k),
            "multiindex {l:?} outside order {k}"
        );
        i * self.basis_len() + l.rank(-k, k)
    }

    pub fn coeff(&self, i: usize, l: &MultiIndex) -> f64 {
        self.coeffs[self.flat_index(i, l)]
    }

    pub fn set_coeff(&mut self, i: usize, l: &MultiIndex, value: f64) {
        let idx = self.flat_index(i, l);
        self.coeffs[idx] = value;
    }

    /// Values of every basis function at `s`, in rank order.
    pub fn basis_values(&self, s: &[f64]) -> Vec<f64> {
        assert_eq!(s.len(), self.intrinsic_dim, "parameter dimension");
        let k = self.order as i32;
        // per-axis values for l in -k..=k
        let width = 2 * self.order + 1;
        let axis: Vec<Vec<f64>> = s
            .iter()
            .map(|&sm| (-k..=k).map(|l| trig(l, sm)).collect())
            .collect();
        (0..self.basis_len())
            .map(|r| {
                let mut rem = r;
                let mut v = 1.0;
                for m in (0..self.intrinsic_dim).rev() {
                    v *= axis[m][rem % width];
                    rem /= width;
                }
                v
            })
            .collect()
    }

    pub fn eval(&self, s: &[f64]) -> Vec<f64> {
        let basis = self.basis_values(s);
        self.coeffs
            .chunks_exact(self.basis_len())
            .map(|row| row.iter().zip(&basis).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Translates the curve by `t`.
    pub fn translated(&self, t: &[f64]) -> Self {
        assert_eq!(t.len(), self.ambient_dim);
        let mut out = self.clone();
        let zero = MultiIndex::zeros(self.intrinsic_dim);
        for (i, &ti) in t.iter().enumerate() {
            let v = out.coeff(i, &zero);
            out.set_coeff(i, &zero, v + ti);
        }
        out
    }

    /// The reparametrized curve `s ↦ φ(s + shift)`.
    pub fn phase_shifted(&self, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), self.intrinsic_dim);
        let k = self.order as i32;
        let width = 2 * self.order + 1;
        let stride = |m: usize| width.pow((self.intrinsic_dim - 1 - m) as u32);
        let mut coeffs = self.coeffs.clone();
        for (m, &c) in shift.iter().enumerate() {
            let st = stride(m);
            let mut next = coeffs.clone();
            for row in 0..self.ambient_dim {
                let base = row * self.basis_len();
                for r in 0..self.basis_len() {
                    let lm = ((r / st) % width) as i32 - k;
                    if lm <= 0 {
                        continue;
                    }
                    // rank of the partner index with l_m -> -l_m
                    let partner = r - (2 * lm as usize) * st;
                    let theta = 2.0 * PI * lm as f64 * c;
                    let (sn, cs) = theta.sin_cos();
                    let a_cos = coeffs[base + partner];
                    let a_sin = coeffs[base + r];
                    // a_c cos(x+θ) + a_s sin(x+θ)
                    next[base + partner] = a_cos * cs + a_sin * sn;
                    next[base + r] = a_sin * cs - a_cos * sn;
                }
            }
            coeffs = next;
        }
        FourierCurve {
            coeffs,
            ..self.clone()
        }
    }
}
