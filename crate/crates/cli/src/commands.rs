use std::path::{Path, PathBuf};

use spinres::dataio::config::config_hash;
use spinres::dataio::report::Provenance;
use spinres::dataio::sweep_file::format_sweep;
use spinres::dataio::{atomic_write, format_trace, load_sweep, Report, ScenarioConfig};
use spinres::fit::{extract_peaks, PeakOptions};
use spinres::pipeline::{analyze_trace, peak_options};
use spinres::simulate::simulate_sweep;
use spinres::spinphys::{
    effective_spin_temperature, ensemble_spin_count, optical_pump_rate, single_spin_coupling,
    PhysicalConstants,
};
use spinres::{Error, CODE_VERSION};

use crate::plot;
use crate::{
    AnalyzeArgs, Cli, Command, EstimateCommand, Failure, Format, PeaksArgs, PumpArgs, ReportArgs,
    SimulateArgs, SpinsArgs, TemperatureArgs, OUT_DIR_ENV,
};

type Outcome = std::result::Result<(), Failure>;

const BUILTINS: [(&str, &str); 3] = [
    ("fig2a", include_str!("../../../scenarios/fig2a.toml")),
    ("fig2c", include_str!("../../../scenarios/fig2c.toml")),
    ("bare", include_str!("../../../scenarios/bare.toml")),
];

pub fn run(cli: &Cli) -> Outcome {
    let hz = if cli.mhz { 1e6 } else { 1.0 };
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Peaks(a) => peaks(a),
        Command::Analyze(a) => analyze(a),
        Command::Estimate(EstimateCommand::Spins(a)) => spins(a, hz),
        Command::Estimate(EstimateCommand::Pump(a)) => pump(a),
        Command::Estimate(EstimateCommand::Temperature(a)) => temperature(a, hz),
        Command::Report(a) => report(a),
    }
}

/// A loaded scenario with its name (file stem or builtin name) and raw text.
struct Scenario {
    name: String,
    cfg: ScenarioConfig,
    text: String,
}

fn load_scenario(spec: &str) -> Result<Scenario, Failure> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let (_, text) = BUILTINS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let known: Vec<&str> = BUILTINS.iter().map(|b| b.0).collect();
            Failure::Usage(format!("unknown builtin scenario {name:?}; known: {}", known.join(", ")))
        })?;
        let cfg = ScenarioConfig::from_toml_str(text, spec)?;
        return Ok(Scenario {
            name: name.to_string(),
            cfg,
            text: text.to_string(),
        });
    }
    let path = Path::new(spec);
    let (cfg, text) = ScenarioConfig::load(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    Ok(Scenario { name, cfg, text })
}

fn out_dir(flag: &Option<PathBuf>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    if let Some(d) = flag {
        return d.clone();
    }
    if let Some(d) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(d);
    }
    if let Some(d) = cfg.and_then(|c| c.output.dir.as_ref()) {
        return PathBuf::from(d);
    }
    PathBuf::from("spinres-out")
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|source| {
        Failure::Core(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(p)?;
    }
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Outcome {
    let mut sc = load_scenario(&a.config)?;
    if let Some(s) = a.seed {
        sc.cfg.seed = s;
    }
    if let Some(n) = a.noise {
        sc.cfg.noise_sigma = n;
    }
    let sweep = simulate_sweep(&sc.cfg.sweep_config()?)?;
    let text = format_sweep(&sweep)?;
    let path = a
        .out
        .clone()
        .unwrap_or_else(|| out_dir(&a.out_dir, Some(&sc.cfg)).join(format!("{}.sweep", sc.name)));
    write(&path, &text)?;
    let (b, f) = (&sweep.b_axis, &sweep.f_axis);
    eprintln!("wrote {}", path.display());
    eprintln!(
        "  B: {} points, {:.6} .. {:.6} T",
        b.len(),
        b[0],
        b[b.len() - 1]
    );
    eprintln!(
        "  f: {} points, {:.6} .. {:.6} GHz",
        f.len(),
        f[0] / 1e9,
        f[f.len() - 1] / 1e9
    );
    eprintln!(
        "  species: {}, seed {}, noise sigma {}",
        sc.cfg.species.len(),
        sc.cfg.seed,
        sc.cfg.noise_sigma
    );
    eprintln!("  sha256 {}", config_hash(&text));
    Ok(())
}

fn peaks(a: &PeaksArgs) -> Outcome {
    let sweep = load_sweep(&a.sweep)?;
    let opts = PeakOptions {
        secondary: !a.primary_only,
        ..PeakOptions::default()
    };
    let trace = extract_peaks(&sweep, &opts)?;
    let path = a
        .out
        .clone()
        .unwrap_or_else(|| out_dir(&a.out_dir, None).join("peaks.tsv"));
    write(&path, &format_trace(&trace))?;
    let ok = trace.ok().count();
    eprintln!("wrote {}", path.display());
    eprintln!(
        "  {} records over {} fields, {} usable, {} flagged",
        trace.records.len(),
        sweep.n_b(),
        ok,
        trace.records.len() - ok
    );
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Outcome {
    let sc = load_scenario(&a.config)?;
    let sweep = load_sweep(&a.sweep)?;
    let dir = out_dir(&a.out_dir, Some(&sc.cfg));
    create_dir(&dir)?;
    let prov = Provenance {
        config_sha256: config_hash(&sc.text),
        seed: sc.cfg.seed,
        code_version: CODE_VERSION.to_string(),
    };

    let trace = extract_peaks(&sweep, &peak_options(&sc.cfg))?;
    write(&dir.join("peaks.tsv"), &format_trace(&trace))?;

    let analysis = match analyze_trace(trace.clone(), &sc.cfg) {
        Ok(x) => x,
        Err(e) => {
            // the report still records what went wrong
            let mut r = Report::new(&prov);
            let ok = trace.ok().count();
            r.add_diagnostic(
                "peaks",
                serde_json::json!({ "records": trace.records.len(), "flagged": trace.records.len() - ok }),
            );
            r.add_diagnostic("error", serde_json::json!({ "message": e.to_string() }));
            write(&dir.join("report.json"), &r.to_json())?;
            write(&dir.join("report.tsv"), &r.to_tsv())?;
            eprintln!("wrote {}", dir.display());
            return Err(Failure::Core(e));
        }
    };

    let report = analysis.report(&prov);
    write(&dir.join("report.json"), &report.to_json())?;
    write(&dir.join("report.tsv"), &report.to_tsv())?;
    let figures = plot::series(&analysis, &sweep);
    for s in &figures.series {
        write(&dir.join(&s.file), &s.to_tsv())?;
    }
    write(&dir.join("legend.json"), &figures.legend())?;
    if !a.no_svg {
        write(&dir.join("amplitude.svg"), &plot::amplitude_svg(&sweep, &figures))?;
        write(&dir.join("q.svg"), &plot::q_svg(&figures))?;
    }

    eprintln!("wrote {}", dir.display());
    for (k, v, s) in analysis.summary() {
        let scale = if k.starts_with("gamma_e") { 1e9 } else { 1e6 };
        let unit = if k.starts_with("gamma_e") { "GHz/T" } else { "MHz" };
        eprintln!("  {k:<14} {:>12.4} +- {:.4} {unit}", v / scale, s / scale);
    }
    let bad = analysis.unconverged();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!(
            "fits did not converge: {}",
            bad.join(", ")
        )))
    }
}

fn spins(a: &SpinsArgs, hz: f64) -> Outcome {
    let (g, wc) = (a.g * hz, a.omega_c * hz);
    let consts = PhysicalConstants::with_ge(a.ge)?;
    let g0 = single_spin_coupling(wc, a.volume, a.element, &consts)?;
    let n = ensemble_spin_count(g, g0)?;
    println!("inputs:");
    println!("  g        = {g:e} Hz ({} MHz)", g / 1e6);
    println!("  omega_c  = {wc:e} Hz ({} GHz)", wc / 1e9);
    println!("  volume   = {:e} m^3", a.volume);
    println!("  element  = {}", a.element);
    println!("  ge       = {}", a.ge);
    println!("formula: N = (g/g0)^2, g0 = ge*muB*B0*element/h, B0 = sqrt(mu0*hbar*2*pi*omega_c/(2V))");
    println!("g0 = {g0:.6} Hz");
    println!("N  = {n:.4e} spins");
    Ok(())
}

fn pump(a: &PumpArgs) -> Outcome {
    let rate = optical_pump_rate(a.sigma, a.power, a.wavelength, a.area)?;
    println!("inputs:");
    println!("  sigma      = {:e} m^2", a.sigma);
    println!("  power      = {:e} W", a.power);
    println!("  wavelength = {:e} m", a.wavelength);
    println!("  area       = {:e} m^2", a.area);
    println!("formula: Lambda = sigma*P*lambda/(h*c*A)");
    println!("Lambda = {rate:.6e} Hz");
    if let Some(r) = a.relaxation {
        if !(r > 0.0) {
            return Err(Failure::Core(Error::Domain(format!(
                "relaxation rate must be > 0, got {r}"
            ))));
        }
        println!("relaxation/pump = {:.4}", r / rate);
    }
    Ok(())
}

fn temperature(a: &TemperatureArgs, hz: f64) -> Outcome {
    let wc = a.omega_c * hz;
    let d = match (a.d, &a.config) {
        (Some(d), _) => d * hz,
        (None, Some(c)) => {
            let sc = load_scenario(c)?;
            sc.cfg.thermal.as_ref().map(|t| t.d).ok_or_else(|| {
                Failure::Core(Error::Config(format!("{c}: no [thermal] section with D")))
            })?
        }
        (None, None) => return Err(Failure::Usage("--d or --config is required".into())),
    };
    let t = effective_spin_temperature(a.ratio, wc, d)?;
    println!("inputs:");
    println!("  ratio   = {}", a.ratio);
    println!("  omega_c = {wc:e} Hz ({} GHz)", wc / 1e9);
    println!("  D       = {d:e} Hz ({} MHz)", d / 1e6);
    println!("formula: ratio = sqrt(Boltzmann population difference of the lowest pair over the thermal pair), solved for T");
    if t.at_lower_bound {
        println!("T <= {:.4} K (ratio reached at the lower bracket bound)", t.kelvin);
    } else {
        println!("T = {:.4} K", t.kelvin);
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.input).map_err(|source| {
        Failure::Core(Error::Io {
            path: a.input.clone(),
            source,
        })
    })?;
    let r = Report::from_json(&text).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Failure::Core(Error::Parse {
            path: a.input.display().to_string(),
            line,
            msg,
        }),
        other => Failure::Core(other),
    })?;
    let out = match a.format {
        Format::Json => r.to_json(),
        Format::Tsv => r.to_tsv(),
        Format::Summary => summary_table(&r),
    };
    match &a.out {
        Some(p) => write(p, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn summary_table(r: &Report) -> String {
    let mut s = String::from("parameter\tvalue\tsigma\n");
    for (k, v) in r.entries("summary").into_iter().flatten() {
        let f = |x: &str| v.get(x).map(|x| x.to_string()).unwrap_or_else(|| "null".into());
        s.push_str(&format!("{k}\t{}\t{}\n", f("value"), f("sigma")));
    }
    s
}
