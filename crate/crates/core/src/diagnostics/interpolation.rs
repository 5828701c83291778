use super::EstimateReport;
use crate::field::ComplexField;
use crate::grid::MAX_DIM;

/// ‖∇v‖₂ / (‖v‖₂^{1/2}‖Δv‖₂^{1/2}) from lattice coefficients; 0 for v = 0 or constant v.
pub fn interpolation_ratio(v: &ComplexField) -> f64 {
    let grid = v.grid();
    let (mut m0, mut m2, mut m4) = (0.0, 0.0, 0.0);
    let mut xi = [0.0; MAX_DIM];
    for (i, c) in v.spectrum().iter().enumerate() {
        grid.frequency(i, &mut xi);
        let k2: f64 = xi.iter().map(|x| x * x).sum();
        let w = c.norm_sqr();
        m0 += w;
        m2 += k2 * w;
        m4 += k2 * k2 * w;
    }
    let denom = (m0 * m4).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (m2 / denom).sqrt()
    }
}

/// Checks ‖∇v‖₂ ≤ ‖v‖₂^{1/2}‖Δv‖₂^{1/2} (hence ‖∇v‖₂‖Δv‖₂ ≤ ‖v‖₂^{1/2}‖Δv‖₂^{3/2}) on every field.
pub fn interpolation_check(fields: &[ComplexField]) -> EstimateReport {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for v in fields {
        let r = interpolation_ratio(v);
        if r >= worst.0 {
            let lhs = r * (v.l2_norm() * laplacian_norm(v)).sqrt();
            worst = (r, lhs, (v.l2_norm() * laplacian_norm(v)).sqrt());
        }
    }
    let (ratio, lhs, rhs) = worst;
    let mut report = EstimateReport::new("interpolation", lhs, rhs, ratio <= 1.0 + 1e-12);
    report.ratio = ratio;
    report.with("samples", fields.len() as f64).with("constant", 1.0)
}

fn laplacian_norm(v: &ComplexField) -> f64 {
    let mut xi = [0.0; MAX_DIM];
    v.spectrum()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            v.grid().frequency(i, &mut xi);
            let k2: f64 = xi.iter().map(|x| x * x).sum();
            k2 * k2 * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}
