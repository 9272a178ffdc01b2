//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Numbers are recomputed here from raw spectra and waveforms rather than
//! read back from scenario assertions.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use emisim_core::engine::{run_transient, SimConfig, TimeStep};
use emisim_core::fitting::{fit_appliance, FitConfig};
use emisim_core::hfedio::{
    catalog, instrument_grid, read_trace, write_trace, Category, HfedError, Instrument, Location,
    MeasuredTrace, Setup,
};
use emisim_core::netlist::{buck_template, BuckParams};
use emisim_core::scenarios::{run_scenario, run_suite, Overrides, ANALYSIS_BAND_HZ};
use emisim_core::spectral::{
    dbm_to_watts, find_peaks, harmonic_families, spectrum, Peak, Spectrum, SpectrumConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn peaks(s: &Spectrum) -> Vec<Peak> {
    find_peaks(s, -180.0, 6.0)
        .into_iter()
        .filter(|p| p.freq_hz >= ANALYSIS_BAND_HZ.0 && p.freq_hz <= ANALYSIS_BAND_HZ.1)
        .collect()
}

fn at(s: &Spectrum, f: f64) -> f64 {
    s.max_in(f - 0.5 * s.df_hz, f + 0.5 * s.df_hz)
}

fn supply_spectrum(params: &BuckParams, cfg: &SimConfig) -> Spectrum {
    let t = run_transient(&buck_template(params, "sup").unwrap(), cfg).unwrap();
    let w = &t.waveforms;
    spectrum(
        w.signal("i_supply").unwrap(),
        w.dt,
        &SpectrumConfig::default(),
    )
    .unwrap()
}

fn router_scenario() -> Outcome {
    let r = run_scenario("router_solo", &Overrides::default()).map_err(|e| e.to_string())?;
    let s = &r.spectra["router"];
    let ps = peaks(s);
    let dom = ps
        .iter()
        .max_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm))
        .ok_or("no peaks")?;
    let detected = (1..=10)
        .filter(|n| {
            ps.iter()
                .any(|p| (p.freq_hz - *n as f64 * 100e3).abs() <= 0.5 * s.df_hz)
        })
        .count();
    let fund = at(s, 100e3);
    let drop = (6..=10)
        .map(|n| fund - at(s, n as f64 * 100e3))
        .fold(f64::INFINITY, f64::min);
    let secs = r.runtime.as_secs_f64();
    ensure(
        (dom.freq_hz - 100e3).abs() <= s.df_hz && detected == 10 && drop >= 10.0 && secs < 10.0,
        format!(
            "dominant {:.0} Hz, {detected}/10 harmonics, h6-10 >= {drop:.2} dB below fundamental, {secs:.2} s",
            dom.freq_hz
        ),
    )
}

fn ccm_oracle() -> Outcome {
    let params = BuckParams {
        vsupply: 10.0,
        duty: 0.5,
        fsw: 100e3,
        inductance: 100e-6,
        capacitance: 100e-6,
        load_resistance: 5.0,
        esr_l: 0.0,
        esr_c: 0.0,
        line_resistance: 0.0,
    };
    let t = run_transient(
        &buck_template(&params, "sup").unwrap(),
        &SimConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let v = t.waveforms.signal("v_vload").unwrap();
    let i = t.waveforms.signal("i_l").unwrap();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let ripple =
        i.iter().copied().fold(f64::MIN, f64::max) - i.iter().copied().fold(f64::MAX, f64::min);
    // Vo = D Vin; ripple = (Vin - Vo) D / (L fsw)
    let want_ripple = (10.0 - 5.0) * 0.5 / (100e-6 * 100e3);
    ensure(
        (mean - 5.0).abs() <= 0.05 && (ripple - want_ripple).abs() <= 0.02 * want_ripple,
        format!("mean Vload {mean:.4} V (5 +/- 1%), ripple {ripple:.4} A (0.25 +/- 2%)"),
    )
}

fn dcm_handling() -> Outcome {
    let t = run_transient(
        &buck_template(&BuckParams::router(), "sup").unwrap(),
        &SimConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let i = t.waveforms.signal("i_l").unwrap();
    let per = t.report.steps_per_common_period;
    let peak = i.iter().copied().fold(0.0, |a: f64, b| a.max(b.abs()));
    let min_zero_frac = i
        .chunks(per)
        .map(|c| c.iter().filter(|x| x.abs() <= 1e-9 * peak).count() as f64 / c.len() as f64)
        .fold(1.0, f64::min);
    let residual = t.report.max_complementarity_residual;
    ensure(
        min_zero_frac > 0.0 && residual < 1e-9,
        format!(
            "zero-current share per period >= {:.1}%, residual {residual:.1e}, max diode flips per step {}",
            100.0 * min_zero_frac,
            t.report.max_diode_flips
        ),
    )
}

fn line_impedance() -> Outcome {
    let r = run_scenario("line_impedance", &Overrides::default()).map_err(|e| e.to_string())?;
    let (near, far) = (&r.spectra["near"], &r.spectra["far"]);
    let att: Vec<f64> = peaks(near)
        .iter()
        .filter(|p| {
            let h = p.freq_hz / 100e3;
            (h - h.round()).abs() * 100e3 <= 0.5 * near.df_hz
        })
        .map(|p| p.power_dbm - at(far, p.freq_hz))
        .collect();
    let min = att.iter().copied().fold(f64::INFINITY, f64::min);
    let max = att.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(
        !att.is_empty() && min >= 0.0 && max > 0.0 && max <= 10.0,
        format!("{} harmonics, attenuation {min:.3}..{max:.3} dB", att.len()),
    )
}

fn coupling_cases() -> Outcome {
    let r = run_scenario("coupling_case3", &Overrides::default()).map_err(|e| e.to_string())?;
    let (c1, c2, c3) = (
        &r.spectra["case1"],
        &r.spectra["case2"],
        &r.spectra["case3"],
    );
    let labels = harmonic_families(&peaks(c1), &[100e3, 40e3], 5, c1.df_hz);
    let labelled = |f: f64| {
        labels
            .iter()
            .any(|l| (l.peak.freq_hz - f).abs() <= c1.df_hz)
    };
    let (p1, p2, p3) = (at(c1, 100e3), at(c2, 100e3), at(c3, 100e3));
    let family = (1..=10)
        .map(|n| n as f64 * 40e3)
        .filter(|f| (f / 100e3).fract().abs() > 1e-9)
        .map(|f| at(c1, f) - at(c2, f))
        .fold(f64::INFINITY, f64::min);
    ensure(
        labelled(60e3) && labelled(140e3) && p2 + 6.0 <= p3 && p3 <= p1 && family >= 10.0,
        format!(
            "60k/140k labelled {}/{}, P100k case1 {p1:.2} case2 {p2:.2} case3 {p3:.2} dBm, 40k family >= {family:.1} dB down",
            labelled(60e3),
            labelled(140e3)
        ),
    )
}

fn spectral_correctness() -> Outcome {
    let rect = SpectrumConfig::default();
    let z = rect.ref_impedance_ohms;

    // Parseval on an arbitrary deterministic signal.
    let n = 4096;
    let x: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64;
            0.3 + (0.013 * t).sin()
                + 0.5 * (0.41 * t + 1.0).cos()
                + 0.2 * ((k * 7919) % 101) as f64 / 101.0
        })
        .collect();
    let s = spectrum(&x, 1e-6, &rect).unwrap();
    let total: f64 = s.power_dbm.iter().map(|p| dbm_to_watts(*p)).sum();
    let ms = x.iter().map(|v| v * v).sum::<f64>() / n as f64 / z;
    let parseval = (total - ms).abs() / ms;

    // 0 dBm into 50 ohm, on a bin.
    let amp = (2.0 * 0.001 * z).sqrt();
    let tone: Vec<f64> = (0..1024)
        .map(|k| amp * (2.0 * PI * 64.0 * k as f64 / 1024.0).sin())
        .collect();
    let cal = spectrum(&tone, 1e-6, &rect).unwrap().power_dbm[64];

    // Square wave against a brute-force DFT and the 1/n law.
    let per = 512;
    let sq: Vec<f64> = (0..8 * per)
        .map(|k| if k % per < per / 2 { 1.0 } else { -1.0 })
        .collect();
    let sp = spectrum(&sq, 1.0 / (100e3 * per as f64), &rect).unwrap();
    let dft = |bin: usize| {
        let (re, im) = sq.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, v)| {
            let ph = -2.0 * PI * (bin * k) as f64 / sq.len() as f64;
            (re + v * ph.cos(), im + v * ph.sin())
        });
        let a = 2.0 * (re * re + im * im).sqrt() / sq.len() as f64;
        10.0 * (a * a / (2.0 * z) / 1e-3).log10()
    };
    let mut oracle_err: f64 = 0.0;
    let mut law_err: f64 = 0.0;
    let fund = sp.power_dbm[8];
    for h in [1usize, 3, 5, 7, 9] {
        let got = sp.power_dbm[8 * h];
        oracle_err = oracle_err.max((got - dft(8 * h)).abs());
        law_err = law_err.max((got - fund + 20.0 * (h as f64).log10()).abs());
    }
    let even_rel = [2usize, 4, 6, 8]
        .iter()
        .map(|h| sp.power_dbm[8 * h] - fund)
        .fold(f64::MIN, f64::max);
    ensure(
        parseval < 1e-3 && cal.abs() < 0.01 && law_err < 0.2 && oracle_err < 0.01 && even_rel < -100.0,
        format!(
            "Parseval error {:.2e}, calibration {cal:+.4} dBm, 1/n law error {law_err:.3} dB, DFT error {oracle_err:.1e} dB, even harmonics {even_rel:.0} dB",
            parseval
        ),
    )
}

fn grid_convergence() -> Outcome {
    let cfg = |n| SimConfig {
        time_step: TimeStep::StepsPerPeriod(n),
        ..SimConfig::default()
    };
    let coarse = supply_spectrum(&BuckParams::router(), &cfg(512));
    let fine = supply_spectrum(&BuckParams::router(), &cfg(1024));
    let ps = peaks(&coarse);
    let worst = ps
        .iter()
        .map(|p| (p.power_dbm - at(&fine, p.freq_hz)).abs())
        .fold(0.0, f64::max);
    ensure(
        !ps.is_empty() && worst < 0.5,
        format!(
            "{} peaks, largest change {worst:.4} dB when dt halves",
            ps.len()
        ),
    )
}

fn fit_round_trip() -> Outcome {
    let target = supply_spectrum(&BuckParams::router(), &SimConfig::default());
    let mut cfg = FitConfig::default();
    cfg.initial.vsupply = 0.01;
    cfg.initial.load_resistance = 3000.0;
    let started = Instant::now();
    let r = fit_appliance(&target, &cfg).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    ensure(
        (r.fsw_hz - 100e3).abs() <= target.df_hz
            && r.loss_db <= 3.0
            && secs < 60.0
            && cfg.band_hz == (60e3, 2e6),
        format!(
            "fsw {:.1} Hz, loss {:.2e} dB over 60k-2M, {secs:.2} s",
            r.fsw_hz, r.loss_db
        ),
    )
}

/// The appliance list in its published grouped form: comma lists and
/// bracketed brand indices, expanded independently of the catalog code.
const APPLIANCE_TABLE: &str = "\
CFL1, 2, 3, 4 | Crompton Greaves [1], Bajaj [2, 3, 4] | SMPS | 18, 15, 15, 5 | L, R
LED Lamp-1, 2, 3 | Genre India [1], Unbranded [2], Crompton Greaves [3] | SMPS | 5, 3, 0.5 | L, R
Laptop Charger-1, 2 | Dell [1], HP [2] | SMPS | 90, 65 | L, R
Phone Charger-1, 2, 3 | Samsung [1], Asus [2], LG [3] | SMPS | 5, 7, 6 | L, R
LCD Monitor | HP P191 | SMPS | 20 | L, R
Printer | HP P1007 | SMPS | 5 | L, R
Speakers | Harman Kardon | SMPS | 24 | L, R
Modem | Asus Router | SMPS | 18 | L, R
Induction Cooktop -1, 2 | Philips [1], Maharaja Whiteline [2] | SMPS | [500,1300], [600,1000] | L, R
Microwave | Kenstar | - | 1250 | R
Refrigerator | LG | NON SMPS | 1020 | R
Blender | Inalsa | NON SMPS | 180 | L, R
Iron | Philips | NON SMPS | 535 | L
Room Heater | North Star | NON SMPS | 1500 | L
Television | LG | SMPS | 60 | R";

fn split_top(s: &str) -> Vec<String> {
    let (mut out, mut cur, mut depth) = (Vec::new(), String::new(), 0);
    for c in s.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur.trim().to_string());
    out
}

type Row = (String, String, Category, Vec<f64>, Vec<Location>);

fn expand_table() -> Vec<Row> {
    let mut rows = Vec::new();
    for line in APPLIANCE_TABLE.lines() {
        let cols: Vec<&str> = line.split('|').map(str::trim).collect();
        let names = split_top(&cols[0].replace(" -", "-"));
        let stem = names[0]
            .trim_end_matches(|c: char| c.is_ascii_digit())
            .to_string();
        let names: Vec<String> = names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if i == 0 {
                    n.clone()
                } else {
                    format!("{stem}{n}")
                }
            })
            .collect();
        let mut brands = vec![cols[1].to_string(); names.len()];
        for part in cols[1].split(']').filter(|p| p.contains('[')) {
            let (brand, idx) = part.split_once('[').unwrap();
            for i in idx.split(',') {
                brands[i.trim().parse::<usize>().unwrap() - 1] =
                    brand.trim_matches([',', ' ']).to_string();
            }
        }
        let category = match cols[2] {
            "SMPS" => Category::Smps,
            "NON SMPS" => Category::NonSmps,
            _ => Category::Unknown,
        };
        let powers: Vec<Vec<f64>> = split_top(cols[3])
            .iter()
            .map(|p| {
                p.trim_matches(['[', ']'])
                    .split(',')
                    .map(|v| v.trim().parse().unwrap())
                    .collect()
            })
            .collect();
        let locations: Vec<Location> = cols[4]
            .split(',')
            .map(|l| {
                if l.trim() == "L" {
                    Location::Lab
                } else {
                    Location::Home
                }
            })
            .collect();
        for (i, name) in names.into_iter().enumerate() {
            rows.push((
                name,
                brands[i].clone(),
                category,
                powers[i].clone(),
                locations.clone(),
            ));
        }
    }
    rows
}

fn hfed_io() -> Outcome {
    let mut round_trips = 0;
    for (inst, setup) in [
        (Instrument::SignalAnalyzer, Setup::LabSetup2),
        (Instrument::Usrp, Setup::HomeSetup1),
    ] {
        let (f0, df, n) = instrument_grid(inst);
        let power = (0..n)
            .map(|k| -120.0 + ((k * 2654435761) % 100_003) as f64 * 1.234567e-4)
            .collect();
        let spec = Spectrum::measured(f0, df, power).unwrap();
        let trace = MeasuredTrace::new(
            spec,
            inst,
            setup,
            Some("CFL1".into()),
            Some("2016-05-01T10:00:00".into()),
        )
        .map_err(|e| e.to_string())?;
        let text = write_trace(&trace);
        let back = read_trace(&text).map_err(|e| e.to_string())?;
        if back != trace || write_trace(&back) != text {
            return Err(format!("{} trace does not round-trip", inst.keyword()));
        }
        round_trips += 1;
    }
    let (f0, df, _) = instrument_grid(Instrument::SignalAnalyzer);
    let short =
        Spectrum::measured(f0, df, vec![-100.0; Instrument::SignalAnalyzer.points()]).unwrap();
    let built = MeasuredTrace::new(
        short.clone(),
        Instrument::Usrp,
        Setup::LabSetup1,
        None,
        None,
    );
    let text = write_trace(
        &MeasuredTrace::new(
            short,
            Instrument::SignalAnalyzer,
            Setup::LabSetup1,
            None,
            None,
        )
        .unwrap(),
    )
    .replacen(
        Instrument::SignalAnalyzer.keyword(),
        Instrument::Usrp.keyword(),
        1,
    );
    let parsed = read_trace(&text);
    let rejected = matches!(built, Err(HfedError::PointCountMismatch { .. }))
        && matches!(parsed, Err(HfedError::PointCountMismatch { .. }));

    let expected = expand_table();
    let got: Vec<Row> = catalog()
        .into_iter()
        .map(|e| {
            (
                e.name.to_string(),
                e.brand.to_string(),
                e.category,
                e.power_watts,
                e.locations,
            )
        })
        .collect();
    let mut missing = Vec::new();
    for row in &expected {
        if !got.contains(row) {
            missing.push(row.0.clone());
        }
    }
    ensure(
        round_trips == 2 && rejected && got.len() == 24 && expected.len() == 24 && missing.is_empty(),
        format!(
            "{round_trips}/2 round-trips, mismatched point counts rejected: {rejected}, catalog {} entries, mismatches {missing:?}",
            got.len()
        ),
    )
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let root = tmp.path().join(run);
        for r in run_suite(&Overrides::default()).map_err(|e| e.to_string())? {
            r.write_to(&root.join(&r.name), true)
                .map_err(|e| e.to_string())?;
        }
        trees.push(tree(&root));
    }
    let bytes: usize = trees[0].values().map(Vec::len).sum();
    ensure(
        trees[0] == trees[1] && !trees[0].is_empty(),
        format!(
            "{} files, {bytes} bytes, identical: {}",
            trees[0].len(),
            trees[0] == trees[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("router spectrum", router_scenario),
        ("CCM analytic oracle", ccm_oracle),
        ("DCM handling", dcm_handling),
        ("line impedance", line_impedance),
        ("coupling cases", coupling_cases),
        ("spectral correctness", spectral_correctness),
        ("grid convergence", grid_convergence),
        ("fit round-trip", fit_round_trip),
        ("HFED I/O and catalog", hfed_io),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {status} {name}: {detail}", i + 1);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
