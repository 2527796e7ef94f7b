use spinres::dataio::sweep_file::format_sweep;
use spinres::dataio::ScenarioConfig;
use spinres::fit::{extract_peaks, PeakOptions};
use spinres::simulate::simulate_sweep;

const FIG2A: &str = include_str!("../../../scenarios/fig2a.toml");

fn small_cfg() -> ScenarioConfig {
    let mut c = ScenarioConfig::from_toml_str(FIG2A, "fig2a").unwrap();
    c.grid.n_b = 21;
    c.grid.n_f = 401;
    c
}

fn run_in_pool(threads: usize, cfg: &ScenarioConfig) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let sc = cfg.sweep_config().unwrap();
    pool.install(|| format_sweep(&simulate_sweep(&sc).unwrap()).unwrap())
}

#[test]
fn output_is_byte_identical_across_thread_counts() {
    let cfg = small_cfg();
    let one = run_in_pool(1, &cfg);
    for n in [2, 3, 8] {
        assert_eq!(run_in_pool(n, &cfg), one, "{n} threads");
    }
}

#[test]
fn peak_extraction_is_thread_independent() {
    let cfg = small_cfg();
    let sweep = simulate_sweep(&cfg.sweep_config().unwrap()).unwrap();
    let opts = PeakOptions { secondary: true, ..PeakOptions::default() };
    let run = |n: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| extract_peaks(&sweep, &opts).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn removing_a_species_removes_its_crossing() {
    let mut cfg = small_cfg();
    cfg.noise_sigma = 0.0;
    cfg.species.retain(|s| s.label != "V2");
    let sc = cfg.sweep_config().unwrap();
    let sweep = simulate_sweep(&sc).unwrap();
    let trace = extract_peaks(&sweep, &PeakOptions::default()).unwrap();
    // above the first crossing only the cavity remains, slightly pulled by V1
    let wc = cfg.cavity.omega_c;
    for r in trace.primary().filter(|r| r.b > 0.4530) {
        assert!((r.f0 - wc).abs() < 1.5e6, "B={} f0={}", r.b, r.f0);
        assert!(r.q > 0.5 * wc / cfg.cavity.kappa);
    }
}

#[test]
fn different_seeds_differ_only_in_noise() {
    let mut a = small_cfg();
    let mut b = small_cfg();
    a.seed = 1;
    b.seed = 2;
    let (sa, sb) = (
        simulate_sweep(&a.sweep_config().unwrap()).unwrap(),
        simulate_sweep(&b.sweep_config().unwrap()).unwrap(),
    );
    assert_ne!(sa.s21, sb.s21);
    a.noise_sigma = 0.0;
    b.noise_sigma = 0.0;
    let (ca, cb) = (
        simulate_sweep(&a.sweep_config().unwrap()).unwrap(),
        simulate_sweep(&b.sweep_config().unwrap()).unwrap(),
    );
    assert_eq!(ca.s21, cb.s21);
}
