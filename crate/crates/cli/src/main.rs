//! `emisim`: batch frontend for simulation, scenarios, fitting and HFED I/O.
//!
//! Exit codes: 0 success, 1 domain failure (failed assertion, failed fit,
//! disjoint spectra), 2 usage or validation error. Every error is printed as
//! a human-readable line followed by a single JSON line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use emisim_core::engine::{run_transient, SimConfig, TimeStep, MIN_STEPS_PER_PERIOD};
use emisim_core::fitting::{fit_appliance, FitConfig};
use emisim_core::hfedio::{catalog, catalog_entry, import_dataset, read_trace};
use emisim_core::netlist::{buck_template, parse_netlist, parse_value, BuckParams};
use emisim_core::plot::spectrum_svg;
use emisim_core::scenarios::{run_scenario, run_suite, Overrides, ScenarioResult, SCENARIO_NAMES};
use emisim_core::spectral::{compare_spectra, spectrum, Spectrum, SpectrumConfig, Window};

#[derive(Parser)]
#[command(
    name = "emisim",
    version,
    about = "Conducted EMI simulation of switched-mode supplies"
)]
struct Cli {
    /// Output directory for written artifacts.
    #[arg(long, global = true, env = "EMISIM_OUT", default_value = "emisim-out")]
    out: PathBuf,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a transient simulation and write waveforms and a spectrum.
    Simulate(SimulateArgs),
    /// Run a named experiment and check its assertions.
    Scenario(ScenarioArgs),
    /// Fit buck parameters to a measured spectrum.
    Fit(FitArgs),
    /// Compare two spectra over a band.
    Compare(CompareArgs),
    /// Convert a raw dataset directory into canonical trace files.
    Import(ImportArgs),
    /// Print the appliance catalog as JSON.
    Catalog(CatalogArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Template {
    Buck,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    Hann,
    Rectangular,
}

fn si(text: &str) -> Result<f64, String> {
    parse_value(text)
        .ok_or_else(|| format!("`{text}` is not a number (SI suffixes p n u m k M allowed)"))
}

fn steps(text: &str) -> Result<usize, String> {
    let n: usize = text
        .parse()
        .map_err(|_| format!("`{text}` is not a whole number"))?;
    if n < MIN_STEPS_PER_PERIOD {
        return Err(format!("must be at least {MIN_STEPS_PER_PERIOD}"));
    }
    Ok(n)
}

fn band(text: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = text.split_once(':').ok_or("expected LO:HI, e.g. 60k:2M")?;
    let (lo, hi) = (si(lo)?, si(hi)?);
    if !(lo >= 0.0 && hi > lo) {
        return Err(format!("band {lo}:{hi} must satisfy 0 <= LO < HI"));
    }
    Ok((lo, hi))
}

#[derive(Args)]
struct SimulateArgs {
    /// Netlist file.
    #[arg(
        long,
        conflicts_with = "template",
        required_unless_present = "template"
    )]
    netlist: Option<PathBuf>,
    /// Built-in circuit; its parameters are given with the flags below.
    #[arg(long, value_enum)]
    template: Option<Template>,
    #[arg(long, value_parser = si, required_if_eq("template", "buck"))]
    vsupply: Option<f64>,
    #[arg(long, value_parser = si, required_if_eq("template", "buck"))]
    fsw: Option<f64>,
    #[arg(long, value_parser = si, required_if_eq("template", "buck"))]
    duty: Option<f64>,
    /// Inductance in henries.
    #[arg(long, value_parser = si, required_if_eq("template", "buck"))]
    l: Option<f64>,
    /// Capacitance in farads.
    #[arg(long, value_parser = si, required_if_eq("template", "buck"))]
    c: Option<f64>,
    /// Load resistance in ohms.
    #[arg(long, value_parser = si, required_if_eq("template", "buck"))]
    r: Option<f64>,
    #[arg(long, value_parser = si, default_value = "0")]
    esr_l: f64,
    #[arg(long, value_parser = si, default_value = "0")]
    esr_c: f64,
    #[arg(long, value_parser = si, default_value = "0")]
    line_resistance: f64,
    /// Maximum number of fastest-switch periods to simulate.
    #[arg(long, default_value_t = SimConfig::default().total_cycles)]
    cycles: usize,
    /// Time steps per period of the fastest switch (at least 64).
    #[arg(long, value_parser = steps, conflicts_with = "dt")]
    steps_per_period: Option<usize>,
    /// Fixed time step in seconds instead of --steps-per-period.
    #[arg(long, value_parser = si)]
    dt: Option<f64>,
    /// Steady-state periods kept in the output.
    #[arg(long, default_value_t = SimConfig::default().capture_cycles)]
    capture_cycles: usize,
    /// Probe whose spectrum is written (default: i_supply, else the first probe).
    #[arg(long)]
    signal: Option<String>,
    #[arg(long, value_enum, default_value = "rectangular")]
    window: WindowArg,
    /// Also write spectrum.svg.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario to run.
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    name: Option<String>,
    /// Run every scenario, each into its own subdirectory.
    #[arg(long)]
    all: bool,
    /// JSON file with overrides.
    #[arg(long = "override")]
    overrides: Option<PathBuf>,
    /// Skip SVG output.
    #[arg(long)]
    no_plot: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Target spectrum: a canonical trace or a spectrum CSV.
    #[arg(long)]
    target: PathBuf,
    /// JSON fit configuration; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write overlay.svg.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Reference spectrum (trace or spectrum CSV).
    #[arg(long)]
    a: PathBuf,
    /// Spectrum compared against the reference.
    #[arg(long)]
    b: PathBuf,
    /// Band as LO:HI with SI suffixes, e.g. 60k:2M.
    #[arg(long, value_parser = band, default_value = "10k:5M")]
    band: (f64, f64),
}

#[derive(Args)]
struct ImportArgs {
    /// Directory holding the raw dataset.
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct CatalogArgs {
    /// Print only this appliance.
    #[arg(long)]
    name: Option<String>,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage",
            message: message.into(),
        }
    }

    fn domain(kind: &'static str, message: impl ToString) -> Self {
        Failure {
            code: 1,
            kind,
            message: message.to_string(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: 2,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }

    fn report(&self) {
        eprintln!("error: {}", self.message);
        eprintln!("{}", self.to_json());
    }

    fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            kind: &'a str,
            exit_code: u8,
        }
        let body = Body {
            error: &self.message,
            kind: self.kind,
            exit_code: self.code,
        };
        serde_json::to_string(&body).expect("plain struct")
    }
}

type Outcome = Result<ExitCode, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| Failure::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Canonical traces carry instrument metadata; anything else must be a
/// plain spectrum CSV.
fn load_spectrum(path: &Path) -> Result<Spectrum, Failure> {
    let text = read(path)?;
    match Spectrum::from_csv(&text) {
        Ok(s) => Ok(s),
        Err(csv_err) => read_trace(&text).map(|t| t.spectrum).map_err(|trace_err| {
            Failure::usage(format!(
                "{}: neither a spectrum CSV ({csv_err}) nor a trace ({trace_err})",
                path.display()
            ))
        }),
    }
}

fn simulate(args: SimulateArgs, out: &Path) -> Outcome {
    let netlist = match (&args.netlist, args.template) {
        (Some(path), _) => parse_netlist(&read(path)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        (None, Some(Template::Buck)) => {
            let params = BuckParams {
                vsupply: args.vsupply.expect("required by clap"),
                duty: args.duty.expect("required by clap"),
                fsw: args.fsw.expect("required by clap"),
                inductance: args.l.expect("required by clap"),
                capacitance: args.c.expect("required by clap"),
                load_resistance: args.r.expect("required by clap"),
                esr_l: args.esr_l,
                esr_c: args.esr_c,
                line_resistance: args.line_resistance,
            };
            buck_template(&params, "sup").map_err(|e| Failure::usage(e.to_string()))?
        }
        (None, None) => return Err(Failure::usage("one of --netlist or --template is required")),
    };
    let defaults = SimConfig::default();
    let cfg = SimConfig {
        time_step: match (args.dt, args.steps_per_period) {
            (Some(dt), _) => TimeStep::Fixed(dt),
            (None, Some(n)) => TimeStep::StepsPerPeriod(n),
            (None, None) => defaults.time_step,
        },
        total_cycles: args.cycles,
        capture_cycles: args.capture_cycles,
        ..defaults
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let result = run_transient(&netlist, &cfg).map_err(|e| Failure::domain("simulation", e))?;
    if let Some(w) = &result.report.warning {
        log::warn!("{w}");
    }
    let waves = &result.waveforms;
    let signal = match &args.signal {
        Some(s) => s.clone(),
        None if waves.signal("i_supply").is_some() => "i_supply".into(),
        None => waves
            .signals
            .keys()
            .next()
            .cloned()
            .ok_or_else(|| Failure::usage("netlist has no probes"))?,
    };
    let samples = waves.signal(&signal).ok_or_else(|| {
        let known: Vec<&str> = waves.signals.keys().map(String::as_str).collect();
        Failure::usage(format!(
            "unknown signal `{signal}`; probes: {}",
            known.join(", ")
        ))
    })?;
    let spec_cfg = SpectrumConfig {
        window: match args.window {
            WindowArg::Hann => Window::Hann,
            WindowArg::Rectangular => Window::Rectangular,
        },
        ..SpectrumConfig::default()
    };
    let spec =
        spectrum(samples, waves.dt, &spec_cfg).map_err(|e| Failure::domain("spectrum", e))?;
    write(&out.join("waveforms.csv"), waves.to_csv())?;
    write(&out.join("spectrum.csv"), spec.to_csv())?;
    write(&out.join("report.json"), json(&result.report))?;
    if args.plot {
        let hi = spec.f_max().min(5e6);
        write(
            &out.join("spectrum.svg"),
            spectrum_svg(&signal, &[(&signal, &spec)], (spec.df_hz, hi)),
        )?;
    }
    println!(
        "simulated {} cycles (settled at {:?}), spectrum of {signal}: {} bins at {} Hz",
        result.report.cycles_simulated,
        result.report.settled_cycle,
        spec.len(),
        spec.df_hz
    );
    Ok(ExitCode::SUCCESS)
}

fn print_result(r: &ScenarioResult) {
    println!("{}: {}", r.name, if r.passed { "PASS" } else { "FAIL" });
    for a in &r.assertions {
        let measured = a.measured.map_or("-".to_string(), |m| format!("{m:.4}"));
        println!(
            "  [{}] {} measured {measured} ({})",
            if a.passed { "pass" } else { "FAIL" },
            a.name,
            a.threshold
        );
    }
}

fn scenario(args: ScenarioArgs, out: &Path) -> Outcome {
    let overrides = match &args.overrides {
        Some(path) => {
            Overrides::from_json(&read(path)?).map_err(|e| Failure::usage(e.to_string()))?
        }
        None => Overrides::default(),
    };
    let results = match &args.name {
        Some(name) if !SCENARIO_NAMES.contains(&name.as_str()) => {
            return Err(Failure::usage(format!(
                "unknown scenario `{name}`; known scenarios: {}",
                SCENARIO_NAMES.join(", ")
            )))
        }
        Some(name) => vec![run_scenario(name, &overrides)],
        None => match run_suite(&overrides) {
            Ok(all) => all.into_iter().map(Ok).collect(),
            Err(e) => vec![Err(e)],
        },
    };
    let mut all_passed = true;
    for r in results {
        let r = r.map_err(|e| Failure::domain("scenario", e))?;
        let dir = if args.all {
            out.join(&r.name)
        } else {
            out.to_path_buf()
        };
        r.write_to(&dir, !args.no_plot)
            .map_err(|e| Failure::io(&dir, e))?;
        log::info!("{} finished in {:.2} s", r.name, r.runtime.as_secs_f64());
        print_result(&r);
        all_passed &= r.passed;
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn fit(args: FitArgs, out: &Path) -> Outcome {
    let target = load_spectrum(&args.target)?;
    let cfg: FitConfig = match &args.config {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
        None => FitConfig::default(),
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let report = fit_appliance(&target, &cfg).map_err(|e| Failure::domain("fit", e))?;
    write(&out.join("fit_report.json"), json(&report))?;
    let target_band = target
        .crop(cfg.band_hz.0, cfg.band_hz.1)
        .map_err(|e| Failure::domain("fit", e))?;
    write(&out.join("target.csv"), target_band.to_csv())?;
    if let Some(fitted) = &report.fitted_spectrum {
        write(&out.join("fitted.csv"), fitted.to_csv())?;
        if args.plot {
            let svg = spectrum_svg(
                "fit",
                &[("target", &target_band), ("fitted", fitted)],
                cfg.band_hz,
            );
            write(&out.join("overlay.svg"), svg)?;
        }
    }
    println!(
        "fsw {:.1} Hz, loss {:.3} dB (start {}), {} evaluations",
        report.fsw_hz,
        report.loss_db,
        report
            .initial_loss_db
            .map_or("n/a".into(), |l| format!("{l:.3} dB")),
        report.evaluations
    );
    Ok(ExitCode::SUCCESS)
}

fn compare(args: CompareArgs) -> Outcome {
    let a = load_spectrum(&args.a)?;
    let b = load_spectrum(&args.b)?;
    let cmp = compare_spectra(&a, &b, args.band).map_err(|e| Failure::domain("compare", e))?;
    print!("{}", json(&cmp));
    Ok(ExitCode::SUCCESS)
}

fn import(args: ImportArgs, out: &Path) -> Outcome {
    let report = import_dataset(&args.dataset, out).map_err(|e| Failure::usage(e.to_string()))?;
    write(&out.join("import_report.json"), json(&report))?;
    println!(
        "imported {} files, skipped {}",
        report.imported.len(),
        report.skipped.len()
    );
    if report.imported.is_empty() && !report.skipped.is_empty() {
        return Err(Failure::domain("import", "no file could be imported"));
    }
    Ok(ExitCode::SUCCESS)
}

fn show_catalog(args: CatalogArgs) -> Outcome {
    match &args.name {
        Some(name) => {
            let entry = catalog_entry(name)
                .ok_or_else(|| Failure::usage(format!("no appliance named `{name}`")))?;
            print!("{}", json(&entry));
        }
        None => print!("{}", json(&catalog())),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            // The message is everything before clap's usage/help trailer.
            let rendered = e.render().to_string();
            let message: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            let failure = Failure::usage(message.join(" ").trim_start_matches("error: "));
            eprintln!("{}", failure.to_json());
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    let out = cli.out;
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a, &out),
        Command::Scenario(a) => scenario(a, &out),
        Command::Fit(a) => fit(a, &out),
        Command::Compare(a) => compare(a),
        Command::Import(a) => import(a, &out),
        Command::Catalog(a) => show_catalog(a),
    };
    outcome.unwrap_or_else(|f| {
        f.report();
        ExitCode::from(f.code)
    })
}
