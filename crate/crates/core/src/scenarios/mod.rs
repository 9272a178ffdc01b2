//! End-to-end experiments: single appliance, line impedance, and two
//! appliances coupled through a shared supply, each with built-in checks.
//!
//! Every scenario simulates one or more circuits, takes the spectrum of the
//! supply current over the 10 kHz to 5 MHz analysis band, and evaluates named
//! assertions. A failed assertion never stops the others.
//!
//! The coupling experiments share a DC source behind a source resistance.
//! Appliance 1 switches at 100 kHz, appliance 2 at 40 kHz. Case 1 connects
//! both directly; case 2 puts a 1 kHz EMI filter in front of appliance 2;
//! case 3 additionally separates the two taps by a line resistance.

mod chain;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::engine::{run_transient, EngineError, SimConfig, SimReport, TimeStep};
use crate::hfedio::{read_trace_file, HfedError};
use crate::netlist::{
    buck_template, bus_compose, emi_filter_template, with_front_end_filter, BuckParams,
    FilterParams, Netlist, NetlistError, DEFAULT_FILTER_IMPEDANCE_OHMS,
};
use crate::plot::spectrum_svg;
use crate::spectral::{
    compare_spectra, find_peaks, harmonic_families, spectrum, SpectralError, Spectrum,
    SpectrumConfig, DEFAULT_FLOOR_DBM, DEFAULT_MIN_PROMINENCE_DB,
};
pub use chain::{
    add_background, apply_highpass, apply_sensing_chain, highpass_gain_db, Background,
    DEFAULT_BACKGROUND_DBM, SENSING_CUTOFF_HZ,
};

pub const ANALYSIS_BAND_HZ: (f64, f64) = (10e3, 5e6);
pub const DEFAULT_SOURCE_RESISTANCE_OHMS: f64 = 4.0;
pub const DEFAULT_LINE_LENGTH_M: f64 = 10.0;
/// 10 m of line modelled as 2 Ω.
pub const DEFAULT_LINE_OHMS_PER_METER: f64 = 0.2;
pub const DEFAULT_FILTER_CUTOFF_HZ: f64 = 1e3;
pub const APPLIANCE2_FSW_HZ: f64 = 40e3;
const SUPPLY_PROBE: &str = "i_supply";
const SUPPLY_NODE: &str = "sup";

pub const SCENARIO_NAMES: [&str; 6] = [
    "router_solo",
    "line_impedance",
    "coupling_case1",
    "coupling_case2",
    "coupling_case3",
    "router_background",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{name}`; known scenarios: {}", SCENARIO_NAMES.join(", "))]
    Unknown { name: String },
    #[error("invalid overrides: {0}")]
    InvalidOverrides(String),
    #[error("scenario {scenario}, {case}: {source}")]
    Engine {
        scenario: String,
        case: String,
        #[source]
        source: EngineError,
    },
    #[error("scenario {scenario}: {source}")]
    Netlist {
        scenario: String,
        #[source]
        source: NetlistError,
    },
    #[error("scenario {scenario}: {source}")]
    Spectral {
        scenario: String,
        #[source]
        source: SpectralError,
    },
    #[error("scenario {scenario}: background trace: {source}")]
    Background {
        scenario: String,
        #[source]
        source: HfedError,
    },
}

/// Optional knobs, read from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    pub steps_per_period: Option<usize>,
    pub total_cycles: Option<usize>,
    pub capture_cycles: Option<usize>,
    pub settle_tolerance: Option<f64>,
    /// The router, or appliance 1 in the coupling cases.
    pub appliance: Option<BuckParams>,
    pub appliance2: Option<BuckParams>,
    pub source_resistance_ohms: Option<f64>,
    pub line_length_m: Option<f64>,
    pub line_ohms_per_meter: Option<f64>,
    pub filter_cutoff_hz: Option<f64>,
    pub filter_impedance_ohms: Option<f64>,
    pub background_floor_dbm: Option<f64>,
    /// Measured background trace for `router_background`.
    pub background_trace: Option<PathBuf>,
}

impl Overrides {
    pub fn from_json(text: &str) -> Result<Overrides, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::InvalidOverrides(e.to_string()))
    }

    pub fn sim_config(&self) -> Result<SimConfig, ScenarioError> {
        let d = SimConfig::default();
        let cfg = SimConfig {
            time_step: self
                .steps_per_period
                .map_or(d.time_step, TimeStep::StepsPerPeriod),
            total_cycles: self.total_cycles.unwrap_or(d.total_cycles),
            capture_cycles: self.capture_cycles.unwrap_or(d.capture_cycles),
            settle_tolerance: self.settle_tolerance.unwrap_or(d.settle_tolerance),
            ..d
        };
        cfg.validate()
            .map_err(|e| ScenarioError::InvalidOverrides(e.to_string()))?;
        Ok(cfg)
    }

    pub fn appliance1(&self) -> BuckParams {
        self.appliance.unwrap_or_else(BuckParams::router)
    }

    pub fn appliance2(&self) -> BuckParams {
        self.appliance2.unwrap_or(BuckParams {
            fsw: APPLIANCE2_FSW_HZ,
            ..BuckParams::router()
        })
    }

    pub fn line_resistance_ohms(&self) -> f64 {
        self.line_length_m.unwrap_or(DEFAULT_LINE_LENGTH_M)
            * self
                .line_ohms_per_meter
                .unwrap_or(DEFAULT_LINE_OHMS_PER_METER)
    }

    fn filter(&self) -> FilterParams {
        FilterParams {
            cutoff_hz: self.filter_cutoff_hz.unwrap_or(DEFAULT_FILTER_CUTOFF_HZ),
            characteristic_impedance_ohms: self
                .filter_impedance_ohms
                .unwrap_or(DEFAULT_FILTER_IMPEDANCE_OHMS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub threshold: String,
}

fn check(
    name: &str,
    measured: Option<f64>,
    threshold: &str,
    ok: impl Fn(f64) -> bool,
) -> Assertion {
    Assertion {
        name: name.to_string(),
        passed: measured.is_some_and(|m| m.is_finite() && ok(m)),
        measured: measured.filter(|m| m.is_finite()),
        threshold: threshold.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Table {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

fn spectrum_names<S: Serializer>(m: &BTreeMap<String, Spectrum>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.keys())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub band_hz: (f64, f64),
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub tables: BTreeMap<String, Table>,
    pub simulations: BTreeMap<String, SimReport>,
    /// Written as separate CSV files; only the names go into JSON.
    #[serde(serialize_with = "spectrum_names")]
    pub spectra: BTreeMap<String, Spectrum>,
    /// Wall-clock time; left out of JSON so that outputs are reproducible.
    #[serde(skip)]
    pub runtime: Duration,
}

impl ScenarioResult {
    /// Writes `result.json`, one `<spectrum>.csv` per spectrum and, with
    /// `plot`, one SVG per spectrum plus `overlay.svg` when there are several.
    pub fn write_to(&self, dir: &Path, plot: bool) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> std::io::Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            written.push(path);
            Ok(())
        };
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        put("result.json".into(), json + "\n")?;
        for (name, s) in &self.spectra {
            put(format!("{name}.csv"), s.to_csv())?;
            if plot {
                put(
                    format!("{name}.svg"),
                    spectrum_svg(
                        &format!("{} / {name}", self.name),
                        &[(name, s)],
                        self.band_hz,
                    ),
                )?;
            }
        }
        if plot && self.spectra.len() > 1 {
            let series: Vec<(&str, &Spectrum)> =
                self.spectra.iter().map(|(n, s)| (n.as_str(), s)).collect();
            put(
                "overlay.svg".into(),
                spectrum_svg(&self.name, &series, self.band_hz),
            )?;
        }
        Ok(written)
    }
}

struct Ctx<'a> {
    name: &'a str,
    ov: &'a Overrides,
    cfg: SimConfig,
    spectra: BTreeMap<String, Spectrum>,
    simulations: BTreeMap<String, SimReport>,
    assertions: Vec<Assertion>,
    tables: BTreeMap<String, Table>,
}

impl<'a> Ctx<'a> {
    fn netlist_err(&self, source: NetlistError) -> ScenarioError {
        ScenarioError::Netlist {
            scenario: self.name.to_string(),
            source,
        }
    }

    fn spectral_err(&self, source: SpectralError) -> ScenarioError {
        ScenarioError::Spectral {
            scenario: self.name.to_string(),
            source,
        }
    }

    /// Simulates the named circuits in parallel and stores their supply
    /// current spectra, cropped to the analysis band.
    fn simulate(&mut self, cases: Vec<(&str, Netlist)>) -> Result<(), ScenarioError> {
        let cfg = self.cfg;
        let results: Vec<Result<(Spectrum, SimReport), ScenarioError>> = cases
            .par_iter()
            .map(|(case, netlist)| {
                let engine_err = |source| ScenarioError::Engine {
                    scenario: self.name.to_string(),
                    case: case.to_string(),
                    source,
                };
                let t = run_transient(netlist, &cfg).map_err(engine_err)?;
                let w = &t.waveforms;
                let current = w.signal(SUPPLY_PROBE).expect("templates probe the supply");
                let full = spectrum(current, w.dt, &SpectrumConfig::default())
                    .and_then(|s| s.crop(ANALYSIS_BAND_HZ.0, ANALYSIS_BAND_HZ.1))
                    .map_err(|e| self.spectral_err(e))?;
                Ok((full, t.report))
            })
            .collect();
        for ((case, _), r) in cases.iter().zip(results) {
            let (s, report) = r?;
            if let Some(w) = &report.warning {
                log::warn!("{} / {case}: {w}", self.name);
            }
            self.spectra.insert(case.to_string(), s);
            self.simulations.insert(case.to_string(), report);
        }
        Ok(())
    }

    fn spec(&self, case: &str) -> &Spectrum {
        &self.spectra[case]
    }

    fn finish(self, started: Instant) -> ScenarioResult {
        ScenarioResult {
            name: self.name.to_string(),
            band_hz: ANALYSIS_BAND_HZ,
            passed: self.assertions.iter().all(|a| a.passed),
            assertions: self.assertions,
            tables: self.tables,
            simulations: self.simulations,
            spectra: self.spectra,
            runtime: started.elapsed(),
        }
    }
}

/// Power in the bin nearest `freq_hz`.
fn power_at(spec: &Spectrum, freq_hz: f64) -> f64 {
    spec.power_dbm[spec.bin_of(freq_hz)]
}

fn peaks_of(spec: &Spectrum) -> Vec<crate::spectral::Peak> {
    find_peaks(spec, DEFAULT_FLOOR_DBM, DEFAULT_MIN_PROMINENCE_DB)
}

fn router_solo(ctx: &mut Ctx) -> Result<(), ScenarioError> {
    let p = ctx.ov.appliance1();
    let n = buck_template(&p, SUPPLY_NODE).map_err(|e| ctx.netlist_err(e))?;
    ctx.simulate(vec![("router", n)])?;
    let s = ctx.spec("router").clone();
    let peaks = peaks_of(&s);
    let dominant = peaks
        .iter()
        .max_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm))
        .map(|pk| (pk.freq_hz - p.fsw).abs());
    let df = s.df_hz;
    let mut found = 0;
    let mut table = Table::new(&["harmonic", "freq_hz", "power_dbm", "detected"]);
    for h in 1..=10 {
        let f = h as f64 * p.fsw;
        let hit = peaks.iter().any(|pk| (pk.freq_hz - f).abs() <= 0.5 * df);
        found += hit as usize;
        table
            .rows
            .push(vec![h as f64, f, power_at(&s, f), hit as u8 as f64]);
    }
    let fundamental = power_at(&s, p.fsw);
    let drop = (6..=10)
        .map(|h| fundamental - power_at(&s, h as f64 * p.fsw))
        .fold(f64::INFINITY, f64::min);
    ctx.assertions.push(check(
        "dominant_peak_offset_hz",
        dominant,
        "<= one bin",
        |m| m <= df * (1.0 + 1e-9),
    ));
    ctx.assertions.push(check(
        "harmonics_1_to_10_detected",
        Some(found as f64),
        "== 10",
        |m| m == 10.0,
    ));
    ctx.assertions.push(check(
        "harmonics_6_to_10_below_fundamental_db",
        Some(drop),
        ">= 10",
        |m| m >= 10.0,
    ));
    ctx.tables.insert("harmonics".into(), table);
    Ok(())
}

fn line_impedance(ctx: &mut Ctx) -> Result<(), ScenarioError> {
    let p = ctx.ov.appliance1();
    let r_line = ctx.ov.line_resistance_ohms();
    let near = buck_template(
        &BuckParams {
            line_resistance: 0.0,
            ..p
        },
        SUPPLY_NODE,
    )
    .map_err(|e| ctx.netlist_err(e))?;
    let far = buck_template(
        &BuckParams {
            line_resistance: r_line,
            ..p
        },
        SUPPLY_NODE,
    )
    .map_err(|e| ctx.netlist_err(e))?;
    ctx.simulate(vec![("near", near), ("far", far)])?;
    let (a, b) = (ctx.spec("near"), ctx.spec("far"));
    let cmp = compare_spectra(a, b, ANALYSIS_BAND_HZ).map_err(|e| ctx.spectral_err(e))?;
    let mut table = Table::new(&[
        "harmonic",
        "freq_hz",
        "near_dbm",
        "far_dbm",
        "attenuation_db",
    ]);
    let mut atten = Vec::new();
    for d in &cmp.per_peak {
        let h = d.freq_hz / p.fsw;
        if (h - h.round()).abs() * p.fsw > 0.5 * a.df_hz {
            continue;
        }
        table
            .rows
            .push(vec![h.round(), d.freq_hz, d.a_dbm, d.b_dbm, -d.delta_db]);
        atten.push(-d.delta_db);
    }
    let min = atten.iter().copied().reduce(f64::min);
    let max = atten.iter().copied().reduce(f64::max);
    ctx.assertions.push(check(
        "matched_harmonics",
        Some(atten.len() as f64),
        ">= 10",
        |m| m >= 10.0,
    ));
    ctx.assertions
        .push(check("min_attenuation_db", min, ">= 0", |m| m >= 0.0));
    ctx.assertions
        .push(check("max_attenuation_db", max, "in (0, 10]", |m| {
            m > 0.0 && m <= 10.0
        }));
    ctx.tables.insert("attenuation".into(), table);
    Ok(())
}

fn coupling_netlists(
    ctx: &Ctx,
    cases: &[u8],
) -> Result<Vec<(&'static str, Netlist)>, ScenarioError> {
    let nerr = |e| ctx.netlist_err(e);
    let a1 = buck_template(&ctx.ov.appliance1(), SUPPLY_NODE).map_err(nerr)?;
    let a2 = buck_template(&ctx.ov.appliance2(), SUPPLY_NODE).map_err(nerr)?;
    let filter = emi_filter_template(&ctx.ov.filter()).map_err(nerr)?;
    let a2f = with_front_end_filter(&a2, &filter).map_err(nerr)?;
    let rs = ctx
        .ov
        .source_resistance_ohms
        .unwrap_or(DEFAULT_SOURCE_RESISTANCE_OHMS);
    let rl = ctx.ov.line_resistance_ohms();
    cases
        .iter()
        .map(|c| {
            let (name, n) = match c {
                1 => ("case1", bus_compose(&[a1.clone(), a2.clone()], &[rs])),
                2 => ("case2", bus_compose(&[a1.clone(), a2f.clone()], &[rs])),
                _ => ("case3", bus_compose(&[a1.clone(), a2f.clone()], &[rs, rl])),
            };
            Ok((name, n.map_err(nerr)?))
        })
        .collect()
}

fn coupling_case1(ctx: &mut Ctx) -> Result<(), ScenarioError> {
    let cases = coupling_netlists(ctx, &[1])?;
    ctx.simulate(cases)?;
    let (f1, f2) = (ctx.ov.appliance1().fsw, ctx.ov.appliance2().fsw);
    let s = ctx.spec("case1");
    let labels = harmonic_families(&peaks_of(s), &[f1, f2], 5, s.df_hz);
    let mut table = Table::new(&["m", "n", "freq_hz", "power_dbm"]);
    for l in &labels {
        table.rows.push(vec![
            l.m as f64,
            l.n as f64,
            l.peak.freq_hz,
            l.peak.power_dbm,
        ]);
    }
    let find = |m, n| {
        labels
            .iter()
            .find(|l| (l.m, l.n) == (m, n))
            .map(|l| l.peak.freq_hz)
    };
    for (name, m, n) in [
        ("fundamental_1_0_hz", 1, 0),
        ("fundamental_0_1_hz", 0, 1),
        ("inter_harmonic_1_-1_hz", 1, -1),
        ("inter_harmonic_1_1_hz", 1, 1),
    ] {
        ctx.assertions
            .push(check(name, find(m, n), "labelled peak present", |_| true));
    }
    ctx.tables.insert("labels".into(), table);
    Ok(())
}

/// `n * f2` for n = 1..=10, skipping frequencies shared with the `f1` comb.
fn exclusive_family(f1: f64, f2: f64) -> Vec<f64> {
    (1..=10)
        .map(|n| n as f64 * f2)
        .filter(|f| {
            let r = f / f1;
            (r - r.round()).abs() > 1e-9
        })
        .collect()
}

fn coupling_case2(ctx: &mut Ctx) -> Result<(), ScenarioError> {
    let cases = coupling_netlists(ctx, &[1, 2])?;
    ctx.simulate(cases)?;
    let (f1, f2) = (ctx.ov.appliance1().fsw, ctx.ov.appliance2().fsw);
    let (c1, c2) = (ctx.spec("case1"), ctx.spec("case2"));
    let p100 = power_at(c1, f1) - power_at(c2, f1);
    let fam = exclusive_family(f1, f2)
        .into_iter()
        .map(|f| power_at(c1, f) - power_at(c2, f))
        .reduce(f64::min);
    ctx.assertions.push(check(
        "fundamental_suppression_db",
        Some(p100),
        ">= 6",
        |m| m >= 6.0,
    ));
    ctx.assertions.push(check(
        "neighbour_family_suppression_db",
        fam,
        ">= 10",
        |m| m >= 10.0,
    ));
    Ok(())
}

fn coupling_case3(ctx: &mut Ctx) -> Result<(), ScenarioError> {
    let cases = coupling_netlists(ctx, &[1, 2, 3])?;
    ctx.simulate(cases)?;
    let f1 = ctx.ov.appliance1().fsw;
    let p: Vec<f64> = ["case1", "case2", "case3"]
        .iter()
        .map(|c| power_at(ctx.spec(c), f1))
        .collect();
    let mut table = Table::new(&["case", "fundamental_dbm"]);
    for (k, v) in p.iter().enumerate() {
        table.rows.push(vec![(k + 1) as f64, *v]);
    }
    ctx.tables.insert("fundamental_power".into(), table);
    ctx.assertions.push(check(
        "case3_minus_case2_db",
        Some(p[2] - p[1]),
        ">= 6",
        |m| m >= 6.0,
    ));
    ctx.assertions.push(check(
        "case1_minus_case3_db",
        Some(p[0] - p[2]),
        ">= 0",
        |m| m >= 0.0,
    ));
    ctx.assertions.push(check(
        "strict_ordering_margin_db",
        Some((p[2] - p[1]).min(p[0] - p[2])),
        "> 0",
        |m| m > 0.0,
    ));
    Ok(())
}

fn router_background(ctx: &mut Ctx) -> Result<(), ScenarioError> {
    let p = ctx.ov.appliance1();
    let n = buck_template(&p, SUPPLY_NODE).map_err(|e| ctx.netlist_err(e))?;
    ctx.simulate(vec![("router", n)])?;
    let background = match &ctx.ov.background_trace {
        Some(path) => Background::Trace(
            read_trace_file(path)
                .map_err(|source| ScenarioError::Background {
                    scenario: ctx.name.to_string(),
                    source,
                })?
                .spectrum,
        ),
        None => Background::WhiteFloor(
            ctx.ov
                .background_floor_dbm
                .unwrap_or(DEFAULT_BACKGROUND_DBM),
        ),
    };
    let chained = apply_sensing_chain(ctx.spec("router"));
    let sensed = add_background(&chained, &background).map_err(|e| ctx.spectral_err(e))?;
    let level = |f: f64| match &background {
        Background::WhiteFloor(l) => Some(*l),
        Background::Trace(t) => t.value_at(f).ok(),
    };
    let sensed_peaks = peaks_of(&sensed);
    let matched = |f: f64| {
        sensed_peaks
            .iter()
            .any(|pk| (pk.freq_hz - f).abs() <= 0.5 * sensed.df_hz)
    };
    let (mut strong, mut strong_hit, mut buried, mut buried_miss) = (0, 0, 0, 0);
    let mut table = Table::new(&["freq_hz", "signal_dbm", "background_dbm", "matched"]);
    for pk in peaks_of(&chained) {
        let Some(bg) = level(pk.freq_hz) else {
            continue;
        };
        let hit = matched(pk.freq_hz);
        table
            .rows
            .push(vec![pk.freq_hz, pk.power_dbm, bg, hit as u8 as f64]);
        if pk.power_dbm >= bg + 10.0 {
            strong += 1;
            strong_hit += hit as usize;
        } else if pk.power_dbm <= bg - 3.0 {
            buried += 1;
            buried_miss += !hit as usize;
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    ctx.assertions.push(check(
        "strong_peaks_kept_fraction",
        Some(frac(strong_hit, strong)),
        "== 1",
        |m| m == 1.0,
    ));
    ctx.assertions.push(check(
        "buried_peaks_lost_fraction",
        Some(frac(buried_miss, buried)),
        "== 1",
        |m| m == 1.0,
    ));
    ctx.tables.insert("peaks".into(), table);
    ctx.spectra.insert("router_sensed".into(), sensed);
    Ok(())
}

/// Runs a registered scenario.
pub fn run_scenario(name: &str, overrides: &Overrides) -> Result<ScenarioResult, ScenarioError> {
    let started = Instant::now();
    let run: fn(&mut Ctx) -> Result<(), ScenarioError> = match name {
        "router_solo" => router_solo,
        "line_impedance" => line_impedance,
        "coupling_case1" => coupling_case1,
        "coupling_case2" => coupling_case2,
        "coupling_case3" => coupling_case3,
        "router_background" => router_background,
        _ => {
            return Err(ScenarioError::Unknown {
                name: name.to_string(),
            })
        }
    };
    let mut ctx = Ctx {
        name,
        ov: overrides,
        cfg: overrides.sim_config()?,
        spectra: BTreeMap::new(),
        simulations: BTreeMap::new(),
        assertions: Vec::new(),
        tables: BTreeMap::new(),
    };
    run(&mut ctx)?;
    Ok(ctx.finish(started))
}

/// Runs every registered scenario, in registry order.
pub fn run_suite(overrides: &Overrides) -> Result<Vec<ScenarioResult>, ScenarioError> {
    SCENARIO_NAMES
        .par_iter()
        .map(|n| run_scenario(n, overrides))
        .collect()
}
