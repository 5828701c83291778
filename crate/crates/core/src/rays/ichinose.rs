use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{Advance, Flow, FlowOptions, FrozenMetric};
use crate::coefficients::{CoefficientModel, StateSample};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IchinoseReport {
    /// max over samples and R of |Im ∫₀^R b₁(X)·Ξ ds|.
    pub value: f64,
    /// Per-sample maximum over R (NaN for excluded samples).
    pub per_sample: Vec<f64>,
    /// Samples whose ray failed; they do not enter `value`.
    pub excluded: Vec<usize>,
}

/// Evaluates sup |Im ∫₀^R b₁(X(s; x, ω))·Ξ(s; x, ω) ds| over the given starts and radii, with the
/// line integral carried as an extra error-controlled component of the ray state.
pub fn ichinose_functional(
    model: &CoefficientModel,
    samples: &[(Vec<f64>, Vec<f64>)],
    r_values: &[f64],
    tol: f64,
) -> Result<IchinoseReport> {
    if r_values.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Domain("R values must be nonnegative".into()));
    }
    let n = model.dim();
    let mut radii = r_values.to_vec();
    radii.sort_by(f64::total_cmp);
    let metric = FrozenMetric::new(model, 0.0);
    let integrand = |x: &[f64], xi: &[f64]| -> Complex64 {
        let b = model.b1(x, 0.0, &StateSample::ZERO);
        (0..n).map(|j| b[j] * xi[j]).sum()
    };
    let per: Vec<Option<f64>> = samples
        .par_iter()
        .map(|(x, omega)| {
            let flow = Flow::new(&metric, Some(&integrand), FlowOptions { tol, ..Default::default() });
            let mut st = flow.start(x, omega);
            let mut best = 0.0f64;
            for &r in &radii {
                match flow.advance(&mut st, r, &mut |_| false, &mut |_| {}) {
                    Advance::Reached => best = best.max(st.integral(n).im.abs()),
                    _ => return None,
                }
            }
            Some(best)
        })
        .collect();
    let mut value = 0.0f64;
    let mut excluded = vec![];
    let per_sample = per
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(v) => {
                value = value.max(*v);
                *v
            }
            None => {
                excluded.push(i);
                f64::NAN
            }
        })
        .collect();
    Ok(IchinoseReport { value, per_sample, excluded })
}
