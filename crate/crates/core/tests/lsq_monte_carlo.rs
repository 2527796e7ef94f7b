//! The reported 1σ should match the actual scatter of fitted values.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinres::fit::{least_squares, LsqOptions};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u = |r: &mut ChaCha8Rng| (r.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let (u1, u2) = (1.0 - u(rng), u(rng));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[test]
fn reported_sigma_matches_monte_carlo_scatter() {
    // Lorentzian peak with three free parameters, 0.02 absolute noise
    let truth = [1.0, 0.3, 0.5];
    let x: Vec<f64> = (0..81).map(|i| -2.0 + 0.05 * i as f64).collect();
    let model = |p: &[f64], x: f64| p[0] / (1.0 + ((x - p[1]) / p[2]).powi(2));
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let trials = 400;
    let mut vals = vec![Vec::new(); 3];
    let mut sig = [0.0; 3];
    for _ in 0..trials {
        let y: Vec<f64> = x.iter().map(|&xi| model(&truth, xi) + 0.02 * normal(&mut rng)).collect();
        let r = least_squares(
            &["a", "x0", "w"],
            &[0.8, 0.0, 0.7],
            x.len(),
            |p, out| {
                for i in 0..x.len() {
                    out[i] = model(p, x[i]) - y[i];
                }
            },
            &LsqOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        for k in 0..3 {
            vals[k].push(r.params[k]);
            sig[k] += r.sigma[k] / trials as f64;
        }
    }
    for k in 0..3 {
        let m = vals[k].iter().sum::<f64>() / trials as f64;
        let sd = (vals[k].iter().map(|v| (v - m).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
        assert!((sd / sig[k] - 1.0).abs() < 0.2, "param {k}: scatter {sd} vs reported {}", sig[k]);
        assert!((m - truth[k]).abs() < 4.0 * sd / (trials as f64).sqrt() + 1e-3);
    }
}

#[test]
fn cost_is_monotone_in_iteration_budget() {
    let mut costs = Vec::new();
    let r = least_squares(
        &["x", "y"],
        &[-1.2, 1.0],
        2,
        |p, out| {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
        },
        &LsqOptions::default(),
    );
    // the engine is deterministic, so truncating after k iterations exposes
    // the cost of the k-th accepted iterate
    let r = r.unwrap_or_else(|e| panic!("{e}"));
    assert!((r.params[0] - 1.0).abs() < 1e-8 && (r.params[1] - 1.0).abs() < 1e-8);
    for iters in 1..=20 {
        let opts = LsqOptions { max_iter: iters, ..LsqOptions::default() };
        let c = least_squares(
            &["x", "y"],
            &[-1.2, 1.0],
            2,
            |p, out| {
                out[0] = 10.0 * (p[1] - p[0] * p[0]);
                out[1] = 1.0 - p[0];
            },
            &opts,
        )
        .map(|r| r.residual_norm)
        .unwrap_or(f64::NAN);
        costs.push(c);
    }
    for w in costs.windows(2) {
        if w[0].is_finite() && w[1].is_finite() {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{costs:?}");
        }
    }
}
