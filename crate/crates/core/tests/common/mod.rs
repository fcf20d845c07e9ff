#![allow(dead_code)]

use dpd_aircomp::channel::{
    aggregate, db_to_linear, expected_participants, participation_distribution, transmit_signal,
    AirCompChannel, FadingParams,
};
use dpd_aircomp::optim::problem::checks;
use dpd_aircomp::optim::{dual_update, DualSetSchedule, ProblemSpec, StepSchedule};
use dpd_aircomp::usecases::{
    project_capacity_simplex, BandwidthSharing, FdmaParams, FdmaProblem, SmartGridParams,
    SmartGridProblem,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Projection onto `{u >= 0, sum(u) <= c}` from its KKT conditions:
/// `u = max(v - tau, 0)` with `tau = 0` if that is already feasible, otherwise
/// the unique `tau > 0` making the sum equal `c`. `tau` is located by
/// bisection and then recomputed exactly from the resulting support.
pub fn capacity_projection_oracle(v: &[f64], c: f64) -> Vec<f64> {
    let clipped_sum: f64 = v.iter().map(|x| x.max(0.0)).sum();
    if clipped_sum <= c {
        return v.iter().map(|x| x.max(0.0)).collect();
    }
    let total = |tau: f64| v.iter().map(|x| (x - tau).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, v.iter().cloned().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau_guess = 0.5 * (lo + hi);
    let support: Vec<f64> = v.iter().cloned().filter(|&x| x > tau_guess).collect();
    let tau = (support.iter().sum::<f64>() - c) / support.len() as f64;
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

pub fn random_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn table_fading(rng: &mut impl Rng, n: usize) -> Vec<FadingParams> {
    (0..n)
        .map(|_| {
            FadingParams::new(db_to_linear(-25.0), rng.random_range(10.0..20.0), 2.2, 10.0).unwrap()
        })
        .collect()
}

pub fn random_smart_grid(rng: &mut impl Rng, n: usize, price: f64) -> SmartGridParams {
    SmartGridParams::new(
        random_vec(rng, n, 35.0, 65.0),
        random_vec(rng, n, 1.0, 2.0),
        rng.random_range(0.5..1.5) * 5.0 * n as f64,
        price,
    )
    .unwrap()
}

pub fn random_fdma(rng: &mut impl Rng, users: usize, bands: usize) -> FdmaProblem {
    let fading = table_fading(rng, users);
    let mut gains = Vec::new();
    for f in &fading {
        for _ in 0..bands {
            gains.push(f.sample_magnitude(rng));
        }
    }
    FdmaProblem::new(FdmaParams {
        users,
        bands,
        bandwidth_hz: 1e6,
        n0: dpd_aircomp::channel::dbm_to_watts(-174.0),
        power: 1.0,
        rate_threshold: 2.85e6,
        gains,
        rate_scale: 1e6,
        sharing: BandwidthSharing::PerBand,
    })
    .unwrap()
}

/// A point of the smart-grid `X` with demands scattered around `[0, 2C/N]`.
pub fn smart_grid_point(rng: &mut impl Rng, params: &SmartGridParams) -> Vec<f64> {
    let n = params.num_devices();
    let hi = 2.0 * params.capacity / n as f64;
    let mut x = project_capacity_simplex(&random_vec(rng, n, 0.0, hi), params.capacity);
    x.extend(random_vec(rng, n, -50.0, 300.0));
    x
}

/// An interior point of the FDMA `X` (strictly positive power and bandwidth).
pub fn fdma_point(rng: &mut impl Rng, problem: &FdmaProblem) -> Vec<f64> {
    let base = problem.params().uniform_allocation();
    let x: Vec<f64> = base
        .iter()
        .map(|v| v * rng.random_range(0.5..1.5))
        .collect();
    let mut p = problem.projected(&x);
    // keep away from the kink of the rate at zero bandwidth
    for v in p.iter_mut() {
        *v = v.max(1e-6);
    }
    p
}

/// One trajectory entry of the reference loop.
#[derive(Debug, Clone)]
pub struct ReferenceRound {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub violation: f64,
    pub objective: f64,
}

/// Straight-line centralized primal-dual iteration:
/// `x <- P_X[x - a_k (g0(x) + sum_i lambda_i g_i(x))]`,
/// `lambda_i <- clamp(lambda_i + a_k f_i(x), 0, bound)`, both evaluated at the
/// old `(x, lambda)`, with metrics at the step-weighted average of `x^0..x^k`.
pub fn reference_primal_dual(
    problem: &impl ProblemSpec,
    x0: &[f64],
    steps: &StepSchedule,
    dual_set: &DualSetSchedule,
    rounds: usize,
) -> Vec<ReferenceRound> {
    let n = problem.num_constraints();
    let d = problem.dim();
    let mut x = x0.to_vec();
    let mut lambda = vec![0.0; n];
    let mut weighted = vec![0.0; d];
    let mut z = 0.0;
    let mut out = Vec::with_capacity(rounds);
    for k in 0..rounds {
        let a = steps.step(k);
        let mut direction = problem.objective_subgradient(&x);
        for i in 0..n {
            let g = problem.constraint_subgradient(i, &x);
            for j in 0..d {
                direction[j] += lambda[i] * g[j];
            }
        }
        let bound = dual_set.bound(k + 1, z + a);
        let new_lambda: Vec<f64> = (0..n)
            .map(|i| {
                let v = lambda[i] + a * problem.constraint(i, &x);
                v.max(0.0).min(bound)
            })
            .collect();
        for j in 0..d {
            weighted[j] += a * x[j];
        }
        z += a;
        let mut next: Vec<f64> = (0..d).map(|j| x[j] - a * direction[j]).collect();
        problem.project(&mut next);
        x = next;
        lambda = new_lambda;
        let x_hat: Vec<f64> = weighted.iter().map(|w| w / z).collect();
        out.push(ReferenceRound {
            x: x.clone(),
            lambda: lambda.clone(),
            violation: problem.violation(&x_hat),
            objective: problem.objective(&x_hat),
        });
    }
    out
}

/// Noise-free AirComp uplink with every device forced to participate.
pub fn noiseless_aircomp(fading: Vec<FadingParams>, duration: f64) -> AirCompChannel {
    AirCompChannel::new(fading, 1e6, 0.0, 1.0, duration)
        .unwrap()
        .with_full_participation()
}

// Invariant checks shared by the property tests and the acceptance run. Each
// returns a description of the first failure.

/// For fixed fading draws, raising beta never removes a participant.
pub fn check_participation_monotone(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(1..30);
    let dim = r.random_range(1..8);
    let fading = table_fading(&mut r, n);
    let h: Vec<f64> = fading.iter().map(|f| f.sample_magnitude(&mut r)).collect();
    let signals: Vec<Vec<f64>> = (0..n)
        .map(|_| random_vec(&mut r, dim, -5.0, 5.0))
        .collect();
    let b1 = 10f64.powf(r.random_range(2.0..10.0));
    let b2 = b1 * 10f64.powf(r.random_range(0.0..3.0));
    let ch1 = AirCompChannel::new(fading.clone(), b1, 1e-12, 1.0, 1.0).unwrap();
    let ch2 = AirCompChannel::new(fading, b2, 1e-12, 1.0, 1.0).unwrap();
    let a1 = ch1.participants(&signals, &h);
    let a2 = ch2.participants(&signals, &h);
    if let Some(i) = a1.iter().find(|i| !a2.contains(i)) {
        return Err(format!("device {i} participates at beta {b1:e} but not at {b2:e}"));
    }
    for (s, &hi) in signals.iter().zip(&h) {
        if let Some(w) = transmit_signal(s, hi, b1, 1.0) {
            let p: f64 = w.iter().map(|v| v * v).sum();
            if p > 1.0 * (1.0 + 1e-12) {
                return Err(format!("emitted power {p} above budget"));
            }
        }
    }
    Ok(())
}

/// The dual update stays in `[0, bound]` and equals the clamped step.
pub fn check_dual_clamping(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let bound = r.random_range(0.0..20.0);
    let lambda = r.random_range(0.0..=bound);
    let a = r.random_range(1e-6..2.0);
    let f = r.random_range(-100.0..100.0);
    let out = dual_update(lambda, a, f, bound);
    if !(0.0..=bound).contains(&out) {
        return Err(format!("{out} outside [0, {bound}]"));
    }
    let expected = (lambda + a * f).max(0.0).min(bound);
    if out != expected {
        return Err(format!("dual update {out} != {expected}"));
    }
    Ok(())
}

fn check_projection(
    name: &str,
    problem: &impl ProblemSpec,
    u: &[f64],
    v: &[f64],
) -> Result<(), String> {
    let pu = problem.projected(u);
    let pv = problem.projected(v);
    let ppu = problem.projected(&pu);
    let idem = max_abs_diff(&pu, &ppu);
    if idem > 1e-12 * (1.0 + pu.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
        return Err(format!("{name}: projection not idempotent ({idem:e})"));
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let (dp, d) = (dist(&pu, &pv), dist(u, v));
    if dp > d * (1.0 + 1e-12) + 1e-12 {
        return Err(format!("{name}: projection expands distance {d} -> {dp}"));
    }
    Ok(())
}

/// Idempotence and nonexpansiveness of both use-case projections.
pub fn check_projections(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(1..30);
    let sg = SmartGridProblem::new(random_smart_grid(&mut r, n, 40.0));
    let u = random_vec(&mut r, 2 * n, -20.0, 40.0);
    let v = random_vec(&mut r, 2 * n, -20.0, 40.0);
    check_projection("smart grid", &sg, &u, &v)?;

    let users = r.random_range(1..6);
    let bands = r.random_range(1..6);
    let fdma = random_fdma(&mut r, users, bands);
    let dim = fdma.dim();
    let u = random_vec(&mut r, dim, -1.0, 1.0);
    let v = random_vec(&mut r, dim, -1.0, 1.0);
    check_projection("fdma", &fdma, &u, &v)
}

/// Subgradient inequality and convexity spot checks for every function of
/// both use cases on random pairs in `X`.
pub fn check_subgradients(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(1..12);
    let price = r.random_range(20.0..50.0);
    let sg = SmartGridProblem::new(random_smart_grid(&mut r, n, price));
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|_| (smart_grid_point(&mut r, sg.params()), smart_grid_point(&mut r, sg.params())))
        .collect();
    check_problem_subgradients("smart grid", &sg, &pairs)?;

    let (users, bands) = (r.random_range(1..5), r.random_range(1..5));
    let fdma = random_fdma(&mut r, users, bands);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|_| (fdma_point(&mut r, &fdma), fdma_point(&mut r, &fdma)))
        .collect();
    check_problem_subgradients("fdma", &fdma, &pairs)
}

fn check_problem_subgradients(
    name: &str,
    problem: &impl ProblemSpec,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<(), String> {
    for (x, y) in pairs {
        let scale = 1.0 + problem.objective(x).abs() + problem.objective(y).abs();
        let pair = [(x.clone(), y.clone()), (y.clone(), x.clone())];
        let gap = checks::subgradient_gap(
            |v| problem.objective(v),
            |v| problem.objective_subgradient(v),
            &pair,
        );
        if gap > 1e-9 * scale {
            return Err(format!("{name}: objective subgradient inequality off by {gap:e}"));
        }
        for i in 0..problem.num_constraints() {
            let gap = checks::subgradient_gap(
                |v| problem.constraint(i, v),
                |v| problem.constraint_subgradient(i, v),
                &pair,
            );
            let scale = 1.0 + problem.constraint(i, x).abs() + problem.constraint(i, y).abs();
            if gap > 1e-9 * scale {
                return Err(format!("{name}: f_{i} subgradient inequality off by {gap:e}"));
            }
            let conv = checks::convexity_gap(|v| problem.constraint(i, v), &pair[..1], 0.3);
            if conv > 1e-9 * scale {
                return Err(format!("{name}: f_{i} convexity violated by {conv:e}"));
            }
        }
    }
    Ok(())
}

/// Analytic gradients of every use-case function against central differences
/// (relative 1e-5).
pub fn check_finite_differences(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(1..8);
    let price = r.random_range(20.0..50.0);
    let sg = SmartGridProblem::new(random_smart_grid(&mut r, n, price));
    let x = smart_grid_point(&mut r, sg.params());
    compare_gradients("smart grid", &sg, &x, 1e-5)?;

    let (users, bands) = (r.random_range(1..4), r.random_range(1..4));
    let fdma = random_fdma(&mut r, users, bands);
    let x = fdma_point(&mut r, &fdma);
    compare_gradients("fdma", &fdma, &x, 1e-8)
}

fn compare_gradients(
    name: &str,
    problem: &impl ProblemSpec,
    x: &[f64],
    h: f64,
) -> Result<(), String> {
    let close = |analytic: &[f64], numeric: &[f64]| -> Option<f64> {
        let scale = analytic
            .iter()
            .chain(numeric)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-12);
        let err = max_abs_diff(analytic, numeric) / scale;
        (err > 1e-5).then_some(err)
    };
    let numeric = checks::central_difference(|v| problem.objective(v), x, h);
    if let Some(err) = close(&problem.objective_subgradient(x), &numeric) {
        return Err(format!("{name}: objective gradient relative error {err:e}"));
    }
    for i in 0..problem.num_constraints() {
        let numeric = checks::central_difference(|v| problem.constraint(i, v), x, h);
        if let Some(err) = close(&problem.constraint_subgradient(i, x), &numeric) {
            return Err(format!("{name}: f_{i} gradient relative error {err:e}"));
        }
    }
    Ok(())
}

/// `aggregate` is linear in each transmitted signal (noise-free).
pub fn check_aggregate_linearity(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let dim = r.random_range(1..10);
    let a = random_vec(&mut r, dim, -3.0, 3.0);
    let b = random_vec(&mut r, dim, -3.0, 3.0);
    let c: f64 = r.random_range(-4.0..4.0);
    let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
    let mut sink = rng(0);
    let lhs = aggregate([ca.as_slice(), b.as_slice()], dim, 1e6, 0.0, &mut sink as &mut dyn RngCore)
        .map_err(|e| e.to_string())?;
    let rhs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + y).collect();
    let err = max_abs_diff(&lhs, &rhs);
    if err > 1e-12 {
        return Err(format!("aggregate not linear ({err:e})"));
    }
    Ok(())
}

/// Poisson-binomial count distribution by the one-device-at-a-time recursion.
pub fn poisson_binomial(gammas: &[f64]) -> Vec<f64> {
    let mut dist = vec![1.0];
    for &g in gammas {
        let mut next = vec![0.0; dist.len() + 1];
        for (a, &p) in dist.iter().enumerate() {
            next[a] += p * (1.0 - g);
            next[a + 1] += p * g;
        }
        dist = next;
    }
    dist
}

/// Subset enumeration sums to one, has mean `Σ γ_i` and matches the
/// recursion.
pub fn check_enumeration_identity(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(0..=12);
    let gammas = random_vec(&mut r, n, 0.0, 1.0);
    let dist = participation_distribution(&gammas).map_err(|e| e.to_string())?;
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(format!("distribution sums to {total}"));
    }
    let mean: f64 = dist.iter().enumerate().map(|(a, p)| a as f64 * p).sum();
    let expected = expected_participants(&gammas);
    if (mean - expected).abs() > 1e-12 * (1.0 + expected) {
        return Err(format!("mean {mean} != sum of gammas {expected}"));
    }
    let err = max_abs_diff(&dist, &poisson_binomial(&gammas));
    if err > 1e-12 {
        return Err(format!("enumeration differs from recursion by {err:e}"));
    }
    Ok(())
}
