//! Acceptance gate at desk scale (n = 2, signature (1,1), M = 128, L = 20). Every criterion prints
//! one PASS/FAIL line; the test fails if any criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uhs_core::diagnostics::{interpolation_ratio, smoothing_estimate_check, SmoothingRhs};
use uhs_core::hypotheses::{proportionality_check, Proportionality};
use uhs_core::rays::{
    classify_trapping, escape_function_flat, garding_margin, ichinose_functional, integrate_ray, FrozenMetric,
    GardingOptions, PhasePoint, Trapping,
};
use uhs_core::solver::{
    flat_plane_wave_factor, solve_linear, solve_quasilinear, LinearProblem, Observers, QuasilinearProblem, RunRecord,
    Scheme, SolverConfig,
};
use uhs_core::symbols::{
    truncate, ApplyMode, B1Variant, ConstantSymbol, ErOperator, FnSymbol, IntegratingFactor, QuantizationPlan,
    RaySymbol, RaySymbolOptions, RayTable, SymbolRef,
};
use uhs_core::{CoefficientModel, ComplexField, Grid, ModelSpec, PrincipalSpec, Signature, VectorSpec};

const L: f64 = 20.0;
const M: usize = 128;

fn sig() -> Signature {
    Signature::new(2, 1).unwrap()
}

fn grid() -> Grid {
    Grid::new(2, L, M).unwrap()
}

fn build(spec: ModelSpec) -> CoefficientModel {
    spec.build(L).unwrap()
}

fn flat() -> CoefficientModel {
    build(ModelSpec::flat(sig()))
}

fn bump(amplitude: f64) -> CoefficientModel {
    build(ModelSpec::new(sig(), PrincipalSpec::GaussianBump { amplitude, width: 1.5, time_drift: 0.0 }))
}

fn ring_well() -> CoefficientModel {
    build(ModelSpec::new(Signature::new(2, 2).unwrap(), PrincipalSpec::RingWell { depth: 0.9, radius: 3.0, width: 1.0 }))
}

fn gaussian(grid: Grid, amp: f64, width: f64, center: [f64; 2]) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
        Complex64::new(amp * (-r2 / (width * width)).exp(), 0.0)
    })
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> ComplexField {
    let f = ComplexField::from_fn(grid, |_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let n = f.l2_norm();
    f.scale(Complex64::new(1.0 / n, 0.0))
}

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let el = start.elapsed();
    if el <= limit {
        Ok(())
    } else {
        Err(format!("{what} took {:.1}s, limit {}s", el.as_secs_f64(), limit.as_secs()))
    }
}

fn flow_exactness() -> Outcome {
    let start = Instant::now();
    let m = flat();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut worst_drift = 0.0f64;
    for _ in 0..100 {
        let x0 = vec![10.0 * (rng.random::<f64>() - 0.5), 10.0 * (rng.random::<f64>() - 0.5)];
        let th = std::f64::consts::TAU * rng.random::<f64>();
        let r = 0.5 + 2.0 * rng.random::<f64>();
        let xi0 = vec![r * th.cos(), r * th.sin()];
        let traj = integrate_ray(&m, &PhasePoint::new(x0.clone(), xi0.clone()).unwrap(), 10.0, 1e9, 1e-11).unwrap();
        for smp in &traj.samples {
            let ex = [x0[0] + 2.0 * smp.s * xi0[0], x0[1] - 2.0 * smp.s * xi0[1]];
            worst = worst.max((smp.x[0] - ex[0]).abs()).max((smp.x[1] - ex[1]).abs());
            worst = worst.max((smp.xi[0] - xi0[0]).abs()).max((smp.xi[1] - xi0[1]).abs());
        }
        if (traj.end().s - 10.0).abs() > 1e-12 {
            return Err(format!("ray stopped at s = {}", traj.end().s));
        }
        worst_drift = worst_drift.max(traj.h_drift_max);
    }
    let models = [
        bump(0.5),
        build(ModelSpec::new(sig(), PrincipalSpec::RationalDecay { amplitude: 0.3, exponent: 8.0 })),
        ring_well(),
        build(ModelSpec::new(sig(), PrincipalSpec::RingWell { depth: 0.5, radius: 3.0, width: 1.0 })),
    ];
    for m in &models {
        for _ in 0..25 {
            let x0 = vec![6.0 * (rng.random::<f64>() - 0.5), 6.0 * (rng.random::<f64>() - 0.5)];
            let th = std::f64::consts::TAU * rng.random::<f64>();
            let traj = integrate_ray(m, &PhasePoint::new(x0, vec![th.cos(), th.sin()]).unwrap(), 10.0, 1e9, 1e-11).unwrap();
            worst_drift = worst_drift.max(traj.h_drift_max);
        }
    }
    within(start, Duration::from_secs(10), "flow exactness")?;
    check(
        worst <= 1e-8 && worst_drift <= 1e-8,
        format!("max flat deviation {worst:.2e}, max h drift {worst_drift:.2e}, {:.2}s", start.elapsed().as_secs_f64()),
    )
}

fn non_trapping() -> Outcome {
    let start = Instant::now();
    let rho = 0.9 * L;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seeds: Vec<PhasePoint> = (0..100)
        .map(|_| {
            let th = std::f64::consts::TAU * rng.random::<f64>();
            PhasePoint::new(vec![8.0 * (rng.random::<f64>() - 0.5), 8.0 * (rng.random::<f64>() - 0.5)], vec![th.cos(), th.sin()])
                .unwrap()
        })
        .collect();
    let mut escaped_counts = Vec::new();
    for m in [flat(), bump(0.1)] {
        let v = classify_trapping(&FrozenMetric::new(&m, 0.0), &seeds, 1e3, rho, 1e-10).map_err(|e| e.to_string())?;
        escaped_counts.push(v.iter().filter(|r| matches!(r.verdict, Trapping::Escaped { .. })).count());
    }
    // Stable circular orbit of h = c(r)|ξ|²: r c'(r) = 2c(r) with c = 1 − 0.9e^{−(r−3)²}.
    let c = |r: f64| 1.0 - 0.9 * (-(r - 3.0) * (r - 3.0)).exp();
    let dc = |r: f64| 1.8 * (r - 3.0) * (-(r - 3.0) * (r - 3.0)).exp();
    let (mut lo, mut hi) = (3.0, 3.5);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid * dc(mid) - 2.0 * c(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_star = 0.5 * (lo + hi);
    let ring = ring_well();
    let mut ring_seeds = vec![PhasePoint::new(vec![r_star, 0.0], vec![0.0, 1.0]).unwrap()];
    for k in 0..8 {
        let th = std::f64::consts::TAU * k as f64 / 8.0;
        let (c, s) = (th.cos(), th.sin());
        ring_seeds.push(PhasePoint::new(vec![2.0 * c, 2.0 * s], vec![c, s]).unwrap());
        ring_seeds.push(PhasePoint::new(vec![4.0 * c, 4.0 * s], vec![-c, -s]).unwrap());
    }
    let v = classify_trapping(&FrozenMetric::new(&ring, 0.0), &ring_seeds, 1e3, rho, 1e-10).map_err(|e| e.to_string())?;
    let tangential_undecided = matches!(v[0].verdict, Trapping::Undecided);
    let radial_escaped = v[1..].iter().all(|r| matches!(r.verdict, Trapping::Escaped { .. }));
    within(start, Duration::from_secs(30), "non-trapping")?;
    check(
        escaped_counts == [100, 100] && tangential_undecided && radial_escaped,
        format!(
            "flat {}/100 escaped, bump {}/100 escaped, ring tangential seed (r* = {r_star:.4}) {}, {} radial seeds escaped, {:.2}s",
            escaped_counts[0],
            escaped_counts[1],
            if tangential_undecided { "undecided" } else { "decided" },
            v[1..].iter().filter(|r| matches!(r.verdict, Trapping::Escaped { .. })).count(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn ichinose_closed_form() -> Outcome {
    let m = build(ModelSpec::flat(sig()).with_b1(VectorSpec::gaussian(1.0, vec![0.0, 0.0], vec![1.0, 0.0])));
    let r = ichinose_functional(&m, &[(vec![0.0, 0.0], vec![1.0, 0.0])], &[2.0, 4.0, 8.0], 1e-11).map_err(|e| e.to_string())?;
    let exact = std::f64::consts::PI.sqrt() / 4.0;
    let err = (r.value - exact).abs();
    check(err <= 1e-6, format!("functional {:.12}, closed form {exact:.12}, error {err:.2e}", r.value))
}

fn pairing_residual(plan: &QuantizationPlan, us: &[ComplexField], vs: &[ComplexField]) -> f64 {
    let pu = plan.apply_many(us).unwrap();
    let pv = plan.adjoint_many(vs).unwrap();
    (0..us.len())
        .map(|i| {
            let lhs = pu[i].inner(&vs[i]);
            let rhs = us[i].inner(&pv[i]);
            (lhs - rhs).norm() / (us[i].l2_norm() * vs[i].l2_norm())
        })
        .fold(0.0, f64::max)
}

fn operator_identities() -> Outcome {
    let start = Instant::now();
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_field(g, &mut rng);
    let identity = QuantizationPlan::new(g, Arc::new(ConstantSymbol(Complex64::new(1.0, 0.0))), ApplyMode::Dense).unwrap();
    let id_err = identity.apply(&u).unwrap().sub(&u).max_abs();
    let band = ComplexField::plane_wave(g, &[3, -5])
        .unwrap()
        .add(&ComplexField::plane_wave(g, &[-20, 7]).unwrap().scale(Complex64::new(0.5, -1.0)));
    let deriv: SymbolRef = Arc::new(FnSymbol::multiplier(1.0, |xi| Complex64::new(0.0, xi[0])));
    let dplan = QuantizationPlan::new(g, deriv, ApplyMode::Dense).unwrap();
    let mult_err = dplan.apply(&band).unwrap().sub(&band.derivative(0)).max_abs() / band.derivative(0).max_abs();

    let model = build(
        ModelSpec::new(sig(), PrincipalSpec::GaussianBump { amplitude: 0.2, width: 1.5, time_drift: 0.0 })
            .with_b1(VectorSpec::gaussian(1.5, vec![0.05, 0.0], vec![0.1, -0.05])),
    );
    let sym = RaySymbol::new(truncate(&model, 4.0).unwrap(), B1Variant::OrderZero, RaySymbolOptions::default());
    let t_table = Instant::now();
    let table = Arc::new(RayTable::build(&sym, &g, 16, 1).map_err(|e| e.to_string())?);
    let table_secs = t_table.elapsed().as_secs_f64();
    let factor = IntegratingFactor::from_table(table, true);
    let kplan = QuantizationPlan::new(g, factor.k_plus.clone(), ApplyMode::Dense).unwrap();
    let us: Vec<ComplexField> = (0..100).map(|_| random_field(g, &mut rng)).collect();
    let vs: Vec<ComplexField> = (0..100).map(|_| random_field(g, &mut rng)).collect();
    let adj = pairing_residual(&kplan, &us, &vs);

    let chunked = QuantizationPlan::new(g, factor.k_plus.clone(), ApplyMode::Chunked { chunk_size: 1000 }).unwrap();
    let dense_out = kplan.apply(&us[0]).unwrap();
    let chunk_out = chunked.apply(&us[0]).unwrap();
    let dc = dense_out.sub(&chunk_out).max_abs() / dense_out.max_abs();

    let no_b1 = bump(0.2);
    let zero_sym = RaySymbol::new(truncate(&no_b1, 4.0).unwrap(), B1Variant::OrderZero, RaySymbolOptions::default());
    let zero_factor = IntegratingFactor::from_table(Arc::new(RayTable::build(&zero_sym, &g, 16, 1).unwrap()), true);
    let er = ErOperator::from_factor(&zero_factor, g, ApplyMode::Dense).unwrap();
    let er_norm = er.norm_estimate(5, 9).unwrap();

    within(start, Duration::from_secs(120), "operator identities")?;
    check(
        id_err <= 1e-12 && mult_err <= 1e-12 && adj <= 1e-10 && dc <= 1e-12 && er_norm <= 1e-10,
        format!(
            "identity {id_err:.1e}, multiplier {mult_err:.1e}, adjoint pairing {adj:.1e} (100 pairs), dense/chunked {dc:.1e}, ‖E^R‖ at b1=0 {er_norm:.1e}, table {table_secs:.1}s, total {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn escape_positivity() -> Outcome {
    let p = escape_function_flat(sig(), 2.0).unwrap();
    let opts = GardingOptions::for_grid(&grid());
    let flat_margin = garding_margin(&flat(), &p, 0.0, 10_000, 0.0, &opts).map_err(|e| e.to_string())?;
    let mut ok = flat_margin.value > 0.0;
    let mut msg = format!("flat margin {:.3e}", flat_margin.value);
    for amp in [1e-4, 1e-3] {
        let m = garding_margin(&bump(amp), &p, 0.0, 10_000, 0.0, &opts).map_err(|e| e.to_string())?;
        ok &= m.value > 0.0;
        msg.push_str(&format!(", bump {amp:e} margin {:.3e}", m.value));
    }
    check(ok, msg)
}

fn self_adjointness() -> Outcome {
    let g = grid();
    let mut worst = 0.0f64;
    let mut rows = 0;
    let u0 = gaussian(g, 1.0, 2.0, [1.0, -0.5]);
    for model in [flat(), bump(0.3), build(ModelSpec::new(sig(), PrincipalSpec::RationalDecay { amplitude: 0.2, exponent: 8.0 }))] {
        let cfg = SolverConfig { track_self_adjoint: true, ..SolverConfig::new(1e-3, 2e-3, 0.1, Scheme::ImexRk2, g).unwrap() };
        let rec = solve_linear(&LinearProblem::new(model, u0.clone()).unwrap(), &cfg, Observers::default()).map_err(|e| e.to_string())?;
        for r in &rec.rows {
            worst = worst.max(r.self_adjoint_residual.unwrap());
            rows += 1;
        }
    }
    let cubic = build(ModelSpec::new(sig(), PrincipalSpec::QuasilinearCubic { alpha: 0.1, beta: [0.0, 0.0], gamma: [0.0, 0.0] }));
    let cfg = SolverConfig { track_self_adjoint: true, ..SolverConfig::new(1e-3, 2e-3, 0.1, Scheme::ExponentialLawson, g).unwrap() };
    let rec = solve_quasilinear(&QuasilinearProblem::new(cubic, u0.scale(Complex64::new(0.5, 0.0))).unwrap(), &cfg, Observers::default())
        .map_err(|e| e.to_string())?;
    for r in &rec.rows {
        worst = worst.max(r.self_adjoint_residual.unwrap());
        rows += 1;
    }
    check(worst <= 1e-10, format!("max residual {worst:.2e} over {rows} steps (flat, bump, rational, quasilinear)"))
}

fn plane_wave_error(k: [i64; 2], dt: f64, eps: f64, scheme: Scheme) -> f64 {
    let g = grid();
    let u0 = ComplexField::plane_wave(g, &k).unwrap();
    let steps = (1.0 / dt).round() as usize;
    let cfg = SolverConfig {
        record_every: steps,
        snapshot_every: Some(steps),
        ..SolverConfig::new(eps, dt, 1.0, scheme, g).unwrap()
    };
    let rec = solve_linear(&LinearProblem::new(flat(), u0.clone()).unwrap(), &cfg, Observers::default()).unwrap();
    let mut xi = [0.0; 3];
    g.frequency(g.slot_of_wavenumbers(&k).unwrap(), &mut xi);
    let h2 = sig().quadratic(&xi[..2]);
    let exact = u0.scale(flat_plane_wave_factor(h2, &xi, eps, 1.0));
    let last = rec.snapshots.last().unwrap();
    assert!((last.t - 1.0).abs() < 1e-12);
    last.field.sub(&exact).max_abs()
}

fn solver_exactness() -> Outcome {
    let k = [4, 1];
    let eps = 1e-2;
    let exact_err = plane_wave_error(k, 5e-4, eps, Scheme::ImexRk2);
    let mut msg = format!("error at t=1 {exact_err:.2e}");
    let mut ok = exact_err <= 1e-8;
    for scheme in [Scheme::ImexRk2, Scheme::ExponentialLawson] {
        let errs: Vec<f64> = [2e-3, 1e-3].iter().map(|&dt| plane_wave_error(k, dt, eps, scheme)).collect();
        let order = (errs[0] / errs[1]).log2();
        ok &= order >= 1.9;
        msg.push_str(&format!(", {scheme:?} dt-order {order:.3}"));
    }
    check(ok, msg)
}

fn smoothing_uniformity() -> Outcome {
    let start = Instant::now();
    let g = grid();
    let model = build(
        ModelSpec::new(sig(), PrincipalSpec::GaussianBump { amplitude: 0.05, width: 1.5, time_drift: 0.0 })
            .with_b1(VectorSpec::gaussian(1.5, vec![0.05, 0.0], vec![0.02, 0.02])),
    );
    let problem = LinearProblem::new(model, gaussian(g, 1.0, 2.0, [0.0, 0.0])).map_err(|e| e.to_string())?;
    let configs: Vec<SolverConfig> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| SolverConfig { record_every: 4, ..SolverConfig::new(e, 2.5e-3, 1.0, Scheme::ImexRk2, g).unwrap() })
        .collect();
    let r = smoothing_estimate_check(&problem, &configs, 0.5, SmoothingRhs::Forcing).map_err(|e| e.to_string())?;
    within(start, Duration::from_secs(600), "smoothing sweep")?;
    check(
        r.verdict.is_bounded(),
        format!(
            "ratio {:.6}, variation {:.2e} across ε, {:.1}s",
            r.ratio,
            r.parameters["variation"],
            start.elapsed().as_secs_f64()
        ),
    )
}

fn interpolation() -> Outcome {
    let g = grid();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        // Alternate white noise with smooth random superpositions.
        let v = if i % 2 == 0 {
            random_field(g, &mut rng)
        } else {
            let modes: Vec<([i64; 2], Complex64)> = (0..5)
                .map(|_| {
                    ([rng.random_range(-20..=20), rng.random_range(-20..=20)], Complex64::new(rng.random(), rng.random()))
                })
                .collect();
            let grid = g;
            let xi = |k: i64| std::f64::consts::PI / L * k as f64;
            ComplexField::from_fn(grid, |x| {
                modes.iter().map(|(k, a)| a * Complex64::from_polar(1.0, xi(k[0]) * x[0] + xi(k[1]) * x[1])).sum()
            })
        };
        worst = worst.max(interpolation_ratio(&v));
    }
    let mut eq = 0.0f64;
    for k in [[1i64, 0], [3, -7], [-40, 22], [63, 63], [-64, 5]] {
        eq = eq.max((interpolation_ratio(&ComplexField::plane_wave(g, &k).unwrap()) - 1.0).abs());
    }
    check(worst <= 1.0 && eq <= 1e-10, format!("max ratio {worst:.6} over 10^4 fields, single-frequency deviation {eq:.1e}"))
}

fn proportionality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut prop_ok = 0;
    let mut witness_ok = 0;
    let random_a = |rng: &mut ChaCha8Rng| loop {
        let (p, q, r) = (rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
        // Indefinite and non-degenerate: det < 0 away from zero.
        if p * r - q * q < -0.05 {
            return DMatrix::from_row_slice(2, 2, &[p, q, q, r]);
        }
    };
    for _ in 0..10_000 {
        let a = random_a(&mut rng);
        let lambda = Complex64::new(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
        let b = a.map(|v| lambda * v);
        if let Ok(Proportionality::Proportional(l)) = proportionality_check(&a, &b, 1e-10) {
            if (l - lambda).norm() <= 1e-10 * lambda.norm().max(1.0) {
                prop_ok += 1;
            }
        }
    }
    for _ in 0..10_000 {
        let a = random_a(&mut rng);
        let mut c = || Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
        let (p, q, r) = (c(), c(), c());
        let b = DMatrix::from_row_slice(2, 2, &[p, q, q, r]);
        if let Ok(Proportionality::Witness(xi)) = proportionality_check(&a, &b, 1e-10) {
            let qa: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] * xi[i] * xi[j]).sum();
            let qb: Complex64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| b[(i, j)] * xi[i] * xi[j]).sum();
            if qa.abs() <= 1e-10 && qb.norm() > 1e-10 {
                witness_ok += 1;
            }
        }
    }
    check(
        prop_ok == 10_000 && witness_ok == 10_000,
        format!("{prop_ok}/10000 proportional pairs recovered, {witness_ok}/10000 verified null-cone witnesses"),
    )
}

fn sup_difference(a: &RunRecord, b: &RunRecord) -> f64 {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(p, q)| {
            assert!((p.t - q.t).abs() < 1e-12);
            p.field.sub(&q.field).l2_norm()
        })
        .fold(0.0, f64::max)
}

fn quasilinear_limits() -> Outcome {
    let g = grid();
    let cubic = build(ModelSpec::new(sig(), PrincipalSpec::QuasilinearCubic { alpha: 0.5, beta: [0.3, 0.1], gamma: [0.2, 0.4] }));
    let profile = gaussian(g, 1.0, 2.0, [0.5, 0.0]);
    let cfg = SolverConfig { snapshot_every: Some(40), ..SolverConfig::new(1e-3, 2.5e-3, 0.1, Scheme::ImexRk2, g).unwrap() };
    let mut diffs = Vec::new();
    let etas = [1e-3, 1e-2];
    for &eta in &etas {
        let u0 = profile.scale(Complex64::new(eta, 0.0));
        let q = solve_quasilinear(&QuasilinearProblem::new(cubic.clone(), u0.clone()).unwrap(), &cfg, Observers::default())
            .map_err(|e| e.to_string())?;
        let l = solve_linear(&LinearProblem::new(flat(), u0).unwrap(), &cfg, Observers::default()).map_err(|e| e.to_string())?;
        let (a, b) = (q.snapshots.last().unwrap(), l.snapshots.last().unwrap());
        diffs.push(a.field.sub(&b.field).l2_norm());
    }
    let order = (diffs[1] / diffs[0]).ln() / (etas[1] / etas[0]).ln();

    let u0 = profile.scale(Complex64::new(0.5, 0.0));
    let mut runs = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let c = SolverConfig { epsilon: eps, snapshot_every: Some(10), ..cfg.clone() };
        runs.push(
            solve_quasilinear(&QuasilinearProblem::new(cubic.clone(), u0.clone()).unwrap(), &c, Observers::default())
                .map_err(|e| e.to_string())?,
        );
    }
    let d12 = sup_difference(&runs[0], &runs[1]);
    let d23 = sup_difference(&runs[1], &runs[2]);
    check(
        order >= 1.9 && d23 < d12,
        format!("linearization order {order:.3} (differences {:.2e}, {:.2e}); viscosity differences {d12:.3e} > {d23:.3e}", diffs[0], diffs[1]),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("flow exactness", flow_exactness),
        ("non-trapping discrimination", non_trapping),
        ("Ichinose closed form", ichinose_closed_form),
        ("operator identities", operator_identities),
        ("escape-function positivity", escape_positivity),
        ("self-adjointness energy identity", self_adjointness),
        ("constant-coefficient solver exactness", solver_exactness),
        ("epsilon-uniform smoothing ratio", smoothing_uniformity),
        ("interpolation estimate", interpolation),
        ("proportionality property suite", proportionality),
        ("quasilinear linearization order", quasilinear_limits),
    ];
    let mut failures = Vec::new();
    let _ = writeln!(std::io::stderr().lock());
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        // Written to the process stderr directly so the lines survive the harness capture.
        let line = match outcome {
            Ok(msg) => format!("PASS {:>2} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failures.push(i + 1);
                format!("FAIL {:>2} {name}: {msg} [{secs:.1}s]", i + 1)
            }
        };
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
