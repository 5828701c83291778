//! Unnormalized multidimensional FFTs on row-major grids, with a process-wide plan cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanKey = (usize, bool);

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
            FftPlanner::new().plan_fft(len, dir)
        })
        .clone()
}

/// In-place n-dimensional DFT (no scaling): forward uses e^{−2πi jk/M}, inverse e^{+2πi jk/M}.
pub fn transform(data: &mut [Complex64], dim: usize, m: usize, inverse: bool) {
    debug_assert_eq!(data.len(), m.pow(dim as u32));
    let fft = plan(m, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // Contiguous last axis.
    fft.process_with_scratch(data, &mut scratch);
    if dim == 1 {
        return;
    }
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..dim - 1 {
        let stride = m.pow((dim - 1 - axis) as u32);
        let block = stride * m;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}
