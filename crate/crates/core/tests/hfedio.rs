use std::path::Path;

use emisim_core::hfedio::{
    catalog, catalog_entry, import_dataset, instrument_grid, read_trace, read_trace_file, resample,
    write_trace, Category, HfedError, Instrument, MeasuredTrace, Setup,
};
use emisim_core::spectral::Spectrum;
use proptest::prelude::*;

const SETUPS: [Setup; 5] = [
    Setup::LabSetup1,
    Setup::LabSetup2,
    Setup::LabSetup3,
    Setup::LabSetup4,
    Setup::HomeSetup1,
];

fn trace(inst: Instrument, setup: Setup, seed: u64, label: Option<String>) -> MeasuredTrace {
    let (f0, df, n) = instrument_grid(inst);
    let mut state = seed | 1;
    let power = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            -150.0 + (state % 1_000_000) as f64 * 1.1e-4
        })
        .collect();
    let spec = Spectrum::measured(f0, df, power).unwrap();
    MeasuredTrace::new(spec, inst, setup, label, None).unwrap()
}

fn raw_csv(points: usize, mhz: bool) -> String {
    let df = (5e6 - 10e3) / (points - 1) as f64;
    let scale = if mhz { 1e-6 } else { 1.0 };
    let mut s = String::from("Frequency,Amplitude\n");
    for k in 0..points {
        s.push_str(&format!(
            "{},{}\n",
            (10e3 + k as f64 * df) * scale,
            -100.0 + (k % 3) as f64
        ));
    }
    s
}

fn put(root: &Path, rel: &str, body: &str) {
    let p = root.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, body).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn write_read_identity(
        usrp in any::<bool>(),
        setup in 0usize..5,
        seed in any::<u64>(),
        label in proptest::option::of("[A-Za-z0-9-]([A-Za-z0-9 -]{0,18}[A-Za-z0-9-])?"),
    ) {
        let inst = if usrp { Instrument::Usrp } else { Instrument::SignalAnalyzer };
        let t = trace(inst, SETUPS[setup], seed, label);
        let text = write_trace(&t);
        let back = read_trace(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(write_trace(&back), text);
    }
}

#[test]
fn declared_instrument_must_match_rows() {
    let t = trace(Instrument::Usrp, Setup::HomeSetup1, 7, None);
    let text = write_trace(&t).replacen(
        &format!("#instrument={}", Instrument::Usrp),
        &format!("#instrument={}", Instrument::SignalAnalyzer),
        1,
    );
    match read_trace(&text) {
        Err(HfedError::PointCountMismatch {
            expected, found, ..
        }) => {
            assert_eq!((expected, found), (32768, 100000));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn trace_files_and_resampling() {
    let dir = tempfile::tempdir().unwrap();
    let t = trace(Instrument::Usrp, Setup::LabSetup4, 3, Some("Modem".into()));
    let path = dir.path().join("modem.csv");
    std::fs::write(&path, write_trace(&t)).unwrap();
    assert_eq!(read_trace_file(&path).unwrap(), t);
    assert!(matches!(
        read_trace_file(&dir.path().join("missing.csv")),
        Err(HfedError::Io { .. })
    ));
    let (f0, df, n) = instrument_grid(Instrument::SignalAnalyzer);
    let r = resample(&t.spectrum, f0, df, n).unwrap();
    assert_eq!(r.len(), 32768);
    assert!((r.f_max() - 5e6).abs() < 1e-3);
}

#[test]
fn import_fixture_tree() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    put(&raw, "home/Television_on.csv", &raw_csv(100000, false));
    put(
        &raw,
        "lab/setup3/phone charger-2.csv",
        &raw_csv(32768, true),
    );
    put(&raw, "lab/setup1/odd.csv", &raw_csv(1000, false));
    put(&raw, "misc/Blender.csv", &raw_csv(32768, false));
    put(&raw, "lab/setup1/notes.txt", "ignored");
    let out = dir.path().join("out");
    let report = import_dataset(&raw, &out).unwrap();
    assert_eq!(report.imported.len(), 2, "{report:?}");
    assert_eq!(report.skipped.len(), 2);

    let tv = read_trace_file(&out.join("home/Television_on.csv")).unwrap();
    assert_eq!(tv.instrument, Instrument::Usrp);
    assert_eq!(tv.setup, Setup::HomeSetup1);
    assert_eq!(tv.appliance_label.as_deref(), Some("Television"));

    let phone = read_trace_file(&out.join("lab/setup3/phone charger-2.csv")).unwrap();
    assert_eq!(phone.instrument, Instrument::SignalAnalyzer);
    assert_eq!(phone.setup, Setup::LabSetup3);
    assert_eq!(phone.appliance_label.as_deref(), Some("Phone Charger-2"));
    assert!((phone.spectrum.f0_hz - 10e3).abs() < 1e-6);

    let reasons: Vec<&str> = report.skipped.iter().map(|s| s.reason.as_str()).collect();
    assert!(reasons.iter().any(|r| r.contains("1000 points")));
    assert!(reasons.iter().any(|r| r.contains("setup")));
}

#[test]
fn catalog_shape() {
    let c = catalog();
    assert_eq!(c.len(), 24);
    let count = |cat| c.iter().filter(|e| e.category == cat).count();
    assert_eq!(
        (
            count(Category::Smps),
            count(Category::NonSmps),
            count(Category::Unknown)
        ),
        (19, 4, 1)
    );
    let cooktop = catalog_entry("Induction Cooktop-2").unwrap();
    assert_eq!(cooktop.power_watts, vec![600.0, 1000.0]);
    assert!(catalog_entry("Toaster").is_none());
    let json = serde_json::to_value(&c).unwrap();
    assert_eq!(json[10]["category"], "SMPS");
    assert_eq!(json[18]["category"], "unknown");
}

#[test]
fn padded_labels_are_rejected() {
    let (f0, df, n) = instrument_grid(Instrument::Usrp);
    let spec = Spectrum::measured(f0, df, vec![-90.0; n]).unwrap();
    for bad in ["", " CFL1", "CFL1 ", "a\nb"] {
        let r = MeasuredTrace::new(
            spec.clone(),
            Instrument::Usrp,
            Setup::LabSetup1,
            Some(bad.into()),
            None,
        );
        assert!(matches!(r, Err(HfedError::Malformed { .. })), "{bad:?}");
    }
}
