//! Closed-form first and second moments of a Fourier curve restricted to the
//! cells of a `K^d` partition of the parameter domain, and a quadrature
//! oracle for the same quantities.

use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fourier::{axis_pair, axis_single, basis_len, multi_indices, FourierCurve, MultiIndex};
use crate::gaussian::Gaussian;

/// Per-segment Gaussian `N(μ_j, Σ_j)`.
pub type SegmentGaussian = Gaussian;

/// Precomputed `g(j, l)` and `g(j, l1, l2)` for every segment and basis
/// pair at fixed `(d, k, K)`. Independent of the coefficients, so one table
/// serves every model with the same layout.
#[derive(Debug, Clone)]
pub struct IntegralTable {
    intrinsic_dim: usize,
    order: usize,
    segments: usize,
    basis: usize,
    single: Vec<f64>,
    pair: Vec<f64>,
}

impl IntegralTable {
    pub fn new(intrinsic_dim: usize, order: usize, segments: usize) -> Self {
        assert!(segments > 0 && intrinsic_dim > 0);
        let k = order as i32;
        let width = 2 * order + 1;
        let cells = segments.pow(intrinsic_dim as u32);
        let basis = basis_len(order, intrinsic_dim);

        // per-axis tables: [j][l] and [j][l1][l2]
        let axis1: Vec<f64> = (0..segments as i32)
            .flat_map(|j| (-k..=k).map(move |l| axis_single(l, j, segments)))
            .collect();
        let axis2: Vec<f64> = (0..segments as i32)
            .flat_map(|j| {
                (-k..=k).flat_map(move |l1| (-k..=k).map(move |l2| axis_pair(l1, l2, j, segments)))
            })
            .collect();

        let mut single = vec![0.0; cells * basis];
        let mut pair = vec![0.0; cells * basis * basis];
        for (cell, j) in multi_indices(0, segments as i32 - 1, intrinsic_dim).enumerate() {
            let ls: Vec<MultiIndex> = multi_indices(-k, k, intrinsic_dim).collect();
            for (c1, l1) in ls.iter().enumerate() {
                let mut v = 1.0;
                for m in 0..intrinsic_dim {
                    let jm = j.entries()[m] as usize;
                    v *= axis1[jm * width + (l1.entries()[m] + k) as usize];
                }
                single[cell * basis + c1] = v;
                for (c2, l2) in ls.iter().enumerate().skip(c1) {
                    let mut w = 1.0;
                    for m in 0..intrinsic_dim {
                        let jm = j.entries()[m] as usize;
                        let a = (l1.entries()[m] + k) as usize;
                        let b = (l2.entries()[m] + k) as usize;
                        w *= axis2[(jm * width + a) * width + b];
                    }
                    pair[(cell * basis + c1) * basis + c2] = w;
                    pair[(cell * basis + c2) * basis + c1] = w;
                }
            }
        }
        IntegralTable {
            intrinsic_dim,
            order,
            segments,
            basis,
            single,
            pair,
        }
    }

    pub fn shared(intrinsic_dim: usize, order: usize, segments: usize) -> Arc<Self> {
        Arc::new(Self::new(intrinsic_dim, order, segments))
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// `K^d`.
    pub fn cells(&self) -> usize {
        self.segments.pow(self.intrinsic_dim as u32)
    }

    pub fn basis_len(&self) -> usize {
        self.basis
    }

    /// `g(j, ·)` for segment rank `cell`, indexed by basis rank.
    pub fn single(&self, cell: usize) -> &[f64] {
        &self.single[cell * self.basis..(cell + 1) * self.basis]
    }

    /// Row `c1` of `g(j, ·, ·)` for segment rank `cell`.
    pub fn pair_row(&self, cell: usize, c1: usize) -> &[f64] {
        let start = (cell * self.basis + c1) * self.basis;
        &self.pair[start..start + self.basis]
    }

    pub fn matches(&self, curve: &FourierCurve, segments: usize) -> bool {
        self.intrinsic_dim == curve.intrinsic_dim()
            && self.order == curve.order()
            && self.segments == segments
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

fn check_segment(curve: &FourierCurve, j: &MultiIndex, segments: usize) -> Result<usize> {
    if segments == 0 {
        return Err(Error::InvalidArgument("segment count must be positive".into()));
    }
    if j.dim() != curve.intrinsic_dim()
        || j.entries().iter().any(|&e| e < 0 || e as usize >= segments)
    {
        return Err(Error::InvalidArgument(format!(
            "segment index {:?} outside {{0..{}}}^{}",
            j.entries(),
            segments - 1,
            curve.intrinsic_dim()
        )));
    }
    Ok(j.rank(0, segments as i32 - 1))
}

/// Means of every segment, `K^d` rows in segment rank order.
pub(crate) fn means_with(table: &IntegralTable, curve: &FourierCurve) -> Vec<DVector<f64>> {
    let n = curve.ambient_dim();
    let basis = table.basis_len();
    let scale = table.cells() as f64;
    (0..table.cells())
        .map(|cell| {
            let g = table.single(cell);
            DVector::from_iterator(
                n,
                curve
                    .coeffs()
                    .chunks_exact(basis)
                    .map(|row| scale * row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()),
            )
        })
        .collect()
}

/// `Σ_{c2} a^{(i)}_{c2} g(j, c1, c2)` for every `(c1, i)`, row-major `[c1][i]`.
pub(crate) fn pair_projections(table: &IntegralTable, curve: &FourierCurve, cell: usize) -> Vec<f64> {
    let n = curve.ambient_dim();
    let basis = table.basis_len();
    let mut out = vec![0.0; basis * n];
    for c1 in 0..basis {
        let row = table.pair_row(cell, c1);
        for (i, coeffs) in curve.coeffs().chunks_exact(basis).enumerate() {
            out[c1 * n + i] = row.iter().zip(coeffs).map(|(g, a)| g * a).sum();
        }
    }
    out
}

fn cov_with(
    table: &IntegralTable,
    curve: &FourierCurve,
    sigma: f64,
    cell: usize,
    mean: &DVector<f64>,
) -> DMatrix<f64> {
    let n = curve.ambient_dim();
    let basis = table.basis_len();
    let scale = table.cells() as f64;
    let proj = pair_projections(table, curve, cell);
    let mut cov = DMatrix::zeros(n, n);
    for i1 in 0..n {
        let row1 = &curve.coeffs()[i1 * basis..(i1 + 1) * basis];
        for i2 in i1..n {
            let second: f64 = (0..basis).map(|c1| row1[c1] * proj[c1 * n + i2]).sum();
            let mut v = scale * second - mean[i1] * mean[i2];
            if i1 == i2 {
                v += sigma * sigma;
            }
            cov[(i1, i2)] = v;
            cov[(i2, i1)] = v;
        }
    }
    cov
}

/// Closed-form mean `μ_j = K^d Σ_l a_l g(j, l)`.
pub fn segment_mean(curve: &FourierCurve, j: &MultiIndex, segments: usize) -> Result<DVector<f64>> {
    check_segment(curve, j, segments)?;
    let scale = (segments as f64).powi(curve.intrinsic_dim() as i32);
    let k = curve.order() as i32;
    let ls: Vec<MultiIndex> = multi_indices(-k, k, curve.intrinsic_dim()).collect();
    let g: Vec<f64> = ls
        .iter()
        .map(|l| crate::fourier::g_single(j, l, segments))
        .collect();
    Ok(DVector::from_iterator(
        curve.ambient_dim(),
        curve
            .coeffs()
            .chunks_exact(curve.basis_len())
            .map(|row| scale * row.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()),
    ))
}

/// Closed-form covariance
/// `Σ_j = σ² I + K^d Σ_{l1,l2} a_{l1} a_{l2}ᵀ g(j,l1,l2) − μ_j μ_jᵀ`.
pub fn segment_cov(
    curve: &FourierCurve,
    sigma: f64,
    j: &MultiIndex,
    segments: usize,
) -> Result<DMatrix<f64>> {
    check_sigma(sigma)?;
    check_segment(curve, j, segments)?;
    let mean = segment_mean(curve, j, segments)?;
    let n = curve.ambient_dim();
    let basis = curve.basis_len();
    let scale = (segments as f64).powi(curve.intrinsic_dim() as i32);
    let k = curve.order() as i32;
    let ls: Vec<MultiIndex> = multi_indices(-k, k, curve.intrinsic_dim()).collect();
    let g: Vec<Vec<f64>> = ls
        .iter()
        .map(|l1| {
            ls.iter()
                .map(|l2| crate::fourier::g_pair(j, l1, l2, segments))
                .collect()
        })
        .collect();
    let row = |i: usize| &curve.coeffs()[i * basis..(i + 1) * basis];
    let mut cov = DMatrix::zeros(n, n);
    for i1 in 0..n {
        for i2 in i1..n {
            let mut second = 0.0;
            for (c1, a1) in row(i1).iter().enumerate() {
                for (c2, a2) in row(i2).iter().enumerate() {
                    second += a1 * a2 * g[c1][c2];
                }
            }
            let mut v = scale * second - mean[i1] * mean[i2];
            if i1 == i2 {
                v += sigma * sigma;
            }
            cov[(i1, i2)] = v;
            cov[(i2, i1)] = v;
        }
    }
    Ok(cov)
}

/// Every segment Gaussian, in lexicographic order of `j`.
pub fn all_segments(curve: &FourierCurve, sigma: f64, segments: usize) -> Result<Vec<SegmentGaussian>> {
    let table = IntegralTable::new(curve.intrinsic_dim(), curve.order(), segments);
    all_segments_with(&table, curve, sigma)
}

/// [`all_segments`] against a prebuilt table.
pub fn all_segments_with(
    table: &IntegralTable,
    curve: &FourierCurve,
    sigma: f64,
) -> Result<Vec<SegmentGaussian>> {
    check_sigma(sigma)?;
    if !table.matches(curve, table.segments()) {
        return Err(Error::InvalidArgument(
            "integral table does not match curve layout".into(),
        ));
    }
    means_with(table, curve)
        .into_iter()
        .enumerate()
        .map(|(cell, mean)| {
            let cov = cov_with(table, curve, sigma, cell, &mean);
            Gaussian::new(mean, cov)
        })
        .collect()
}

/// Tensor-product Gauss–Legendre nodes and weights on the cell `j`.
pub(crate) fn cell_quadrature(
    j: &MultiIndex,
    segments: usize,
    points_per_axis: usize,
) -> Vec<(Vec<f64>, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(points_per_axis).expect("positive"));
    let h = 1.0 / segments as f64;
    let axis: Vec<Vec<(f64, f64)>> = j
        .entries()
        .iter()
        .map(|&jm| {
            let a = jm as f64 * h;
            rule.as_node_weight_pairs()
                .iter()
                .map(|&(x, w)| (a + 0.5 * h * (x + 1.0), 0.5 * h * w))
                .collect()
        })
        .collect();
    let d = j.dim();
    multi_indices(0, points_per_axis as i32 - 1, d)
        .map(|idx| {
            let mut s = Vec::with_capacity(d);
            let mut w = 1.0;
            for (m, &e) in idx.entries().iter().enumerate() {
                let (x, wm) = axis[m][e as usize];
                s.push(x);
                w *= wm;
            }
            (s, w)
        })
        .collect()
}

/// Segment mean and covariance by direct quadrature of the defining
/// integrals. Independent of the closed forms; used to validate them.
pub fn segment_stats_oracle(
    curve: &FourierCurve,
    sigma: f64,
    j: &MultiIndex,
    segments: usize,
    quad_points: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_sigma(sigma)?;
    check_segment(curve, j, segments)?;
    if quad_points < 8 {
        return Err(Error::InvalidArgument("quad_points must be at least 8".into()));
    }
    let n = curve.ambient_dim();
    let scale = (segments as f64).powi(curve.intrinsic_dim() as i32);
    let nodes = cell_quadrature(j, segments, quad_points);
    let values: Vec<(DVector<f64>, f64)> = nodes
        .iter()
        .map(|(s, w)| (DVector::from_vec(curve.eval(s)), *w))
        .collect();
    let mut mean = DVector::zeros(n);
    for (p, w) in &values {
        mean += p * *w;
    }
    mean *= scale;
    let mut cov = DMatrix::zeros(n, n);
    for (p, w) in &values {
        let d = p - &mean;
        cov += &d * d.transpose() * *w;
    }
    cov *= scale;
    for i in 0..n {
        cov[(i, i)] += sigma * sigma;
    }
    Ok((mean, cov))
}
