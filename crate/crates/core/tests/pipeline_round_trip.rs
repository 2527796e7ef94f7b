use spinres::dataio::report::Provenance;
use spinres::dataio::ScenarioConfig;
use spinres::fit::{extract_peaks, fit_coupled_crossings, PeakOptions};
use spinres::pipeline::{analyze_sweep, peak_options};
use spinres::simulate::simulate_sweep;

const FIG2A: &str = include_str!("../../../scenarios/fig2a.toml");
const FIG2C: &str = include_str!("../../../scenarios/fig2c.toml");
const BARE: &str = include_str!("../../../scenarios/bare.toml");

fn cfg(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(text, "scenario").unwrap()
}

fn value(summary: &[(String, f64, f64)], key: &str) -> (f64, f64) {
    summary
        .iter()
        .find(|s| s.0 == key)
        .map(|s| (s.1, s.2))
        .unwrap_or_else(|| panic!("missing {key}"))
}

#[test]
fn fig2a_recovers_couplings_and_splittings() {
    let c = cfg(FIG2A);
    let sweep = simulate_sweep(&c.sweep_config().unwrap()).unwrap();
    let a = analyze_sweep(&sweep, &c).unwrap();
    assert!(a.coupled_converged);
    let s = a.summary();
    for (key, truth) in [("g1", 2.50e6), ("D1", 2.01e6), ("g2", 1.34e6), ("D2", 39.76e6)] {
        let (v, sig) = value(&s, key);
        assert!((v / truth - 1.0).abs() < 0.05, "{key} = {v}");
        assert!(sig > 0.0 && sig.is_finite());
    }
    let r = a.report(&Provenance {
        config_sha256: "0".repeat(64),
        seed: c.seed,
        code_version: "test".into(),
    });
    for key in ["g1", "D1", "g2", "D2"] {
        assert!(r.get("summary", key).is_some(), "{key}");
    }
    assert_eq!(r.n_fits(), 4);
}

#[test]
fn fig2c_recovers_three_crossings() {
    let c = cfg(FIG2C);
    let sweep = simulate_sweep(&c.sweep_config().unwrap()).unwrap();
    let a = analyze_sweep(&sweep, &c).unwrap();
    let s = a.summary();
    for (key, truth) in [
        ("g3", 0.37e6),
        ("D3", -31.85e6),
        ("g1", 0.96e6),
        ("D1", 5.08e6),
        ("g2", 0.41e6),
        ("D2", 41.55e6),
    ] {
        let (v, _) = value(&s, key);
        assert!((v / truth - 1.0).abs() < 0.10, "{key} = {v}");
    }
    // the middle window sees both neighbours
    assert_eq!(a.crossings[1].neighbours.len(), 2);
}

#[test]
fn isolated_fits_are_biased_before_correction() {
    let c = cfg(FIG2A);
    let mut sc = c.sweep_config().unwrap();
    sc.noise_sigma = 0.0;
    let sweep = simulate_sweep(&sc).unwrap();
    let trace = extract_peaks(&sweep, &peak_options(&c)).unwrap();
    let fit = fit_coupled_crossings(&trace, &c.windows(), &c.crossing_options()).unwrap();
    // the isolated second crossing sees the bare ωc instead of the first
    // crossing's lower polariton
    let g2_ind = fit.independent[1].value("g");
    let g2_cor = fit.fits[1].result.value("g");
    let ind_err = (g2_ind / 1.34e6 - 1.0).abs();
    let cor_err = (g2_cor / 1.34e6 - 1.0).abs();
    assert!(cor_err < ind_err, "isolated {g2_ind}, corrected {g2_cor}");
    let d1_ind = fit.independent[0].value("D");
    let sig = fit.independent[0].get("D").unwrap().1;
    assert!((d1_ind - 2.01e6).abs() > 3.0 * sig, "isolated D1 {d1_ind} ± {sig}");
}

#[test]
fn zero_field_slice_gives_bare_q() {
    let mut c = cfg(FIG2A);
    c.grid.b_min = 0.0;
    c.grid.b_max = 0.001;
    c.grid.n_b = 2;
    let sweep = simulate_sweep(&c.sweep_config().unwrap()).unwrap();
    let trace = extract_peaks(&sweep, &PeakOptions::default()).unwrap();
    let r = trace.primary().next().unwrap();
    assert!((r.f0 - 12.593_45e9).abs() < 2e3, "{}", r.f0);
    assert!((r.q / 57_243.0 - 1.0).abs() < 0.005, "Q = {}", r.q);
    assert!((r.q / 57_232.0 - 1.0).abs() < 0.01);
}

#[test]
fn masked_q_fit_never_looks_inside_the_band() {
    let c = cfg(FIG2A);
    let sweep = simulate_sweep(&c.sweep_config().unwrap()).unwrap();
    let a = analyze_sweep(&sweep, &c).unwrap();
    for (spec, q) in &a.qdips {
        let q = q.as_ref().unwrap();
        assert!(q.min_evaluated_detuning >= spec.mask, "{} < {}", q.min_evaluated_detuning, spec.mask);
        assert!(!q.used_b.is_empty());
    }
}

#[test]
fn bare_scenario_has_no_crossings() {
    let c = cfg(BARE);
    let sweep = simulate_sweep(&c.sweep_config().unwrap()).unwrap();
    let e = analyze_sweep(&sweep, &c).unwrap_err();
    assert!(e.to_string().contains("no crossings found"), "{e}");
}
