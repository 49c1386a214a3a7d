use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::dataio::Dataset;
use crate::density::{sample_curve, Noise};
use crate::error::{Error, Result};
use crate::fourier::FourierCurve;

/// One curve to sample from. `sigma = 0` samples exactly on the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSpec {
    pub curve: FourierCurve,
    pub sigma: f64,
    pub count: usize,
}

/// ChaCha20 seeded with `seed`, stream `index`. Curve `i` always draws from
/// stream `i`, so appending a curve leaves earlier samples untouched.
pub fn curve_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Concatenated samples labelled by curve index.
pub fn generate(curves: &[CurveSpec], seed: u64) -> Result<Dataset> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidArgument("no curves to sample".into()))?;
    let dim = first.curve.ambient_dim();
    for (i, spec) in curves.iter().enumerate() {
        if spec.count == 0 {
            return Err(Error::InvalidArgument(format!("curve {i}: count must be at least 1")));
        }
        if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
            return Err(Error::InvalidSigma(spec.sigma));
        }
        if spec.curve.ambient_dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: spec.curve.ambient_dim(),
            });
        }
    }
    let parts: Vec<Dataset> = curves
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let noise = if spec.sigma == 0.0 {
                Noise::None
            } else {
                Noise::Isotropic(spec.sigma)
            };
            sample_curve(&spec.curve, noise, spec.count, &mut curve_rng(seed, i))
        })
        .collect();
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        coords.extend_from_slice(part.coords());
        labels.extend(std::iter::repeat_n(i, part.len()));
    }
    Dataset::new(dim, coords, Some(labels))
}
