//! Finite-difference gradient checking.
//!
//! Central differences per coordinate against an analytically computed
//! gradient; coordinates are subsampled deterministically for large tensors.
//! Only meaningful in double precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::numerics::graph::{Gradients, ParamId, ParamSet};

/// Relative error between analytic and numeric values.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Report for one parameter tensor.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
}

/// Check `analytic` against central differences of `loss` for every
/// parameter. At most `max_coords` coordinates per tensor are probed,
/// chosen by a seeded RNG when the tensor is larger than that.
pub fn grad_check(
    loss: &mut dyn FnMut(&ParamSet) -> f64,
    params: &mut ParamSet,
    analytic: &Gradients,
    step: f64,
    max_coords: usize,
    seed: u64,
) -> Vec<GradCheckReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let n = params.get(id).len();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            (0..max_coords).map(|_| rng.gen_range(0..n)).collect()
        };
        let grad = analytic.get_or_zeros(id, params);
        let mut max_err: f64 = 0.0;
        for &c in &coords {
            let orig = params.get(id).data()[c];
            params.get_mut(id).data_mut()[c] = orig + step;
            let up = loss(params);
            params.get_mut(id).data_mut()[c] = orig - step;
            let down = loss(params);
            params.get_mut(id).data_mut()[c] = orig;
            let numeric = (up - down) / (2.0 * step);
            max_err = max_err.max(relative_error(grad.data()[c], numeric));
        }
        reports.push(GradCheckReport {
            name: params.name(id).to_string(),
            coords_checked: coords.len(),
            max_rel_error: max_err,
        });
    }
    reports
}

/// Largest relative error across all parameters.
pub fn max_error(reports: &[GradCheckReport]) -> f64 {
    reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max)
}
