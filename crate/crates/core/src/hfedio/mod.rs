//! Measured EMI traces in the canonical CSV layout, plus the appliance catalog.
//!
//! A trace file looks like
//!
//! ```text
//! #instrument=signal_analyzer
//! #setup=lab_setup1
//! #appliance=CFL1
//! #timestamp=2016-03-01T10:00:00
//! #f0_hz=10000
//! #df_hz=152.28736228522596
//! freq_hz,power_dbm
//! 10000,-81.5
//! ...
//! ```
//!
//! `appliance` and `timestamp` are optional. Floats are written in Rust's
//! shortest round-trip form, so reading a written trace gives back exactly
//! the same values.

mod catalog;
mod import;

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{check_uniform_grid, SpectralError, Spectrum};
pub use catalog::{catalog, catalog_entry, ApplianceCatalogEntry, Category, Location};
pub use import::{import_dataset, ImportReport, ImportedFile, SkippedFile};

pub const MIN_FREQ_HZ: f64 = 10e3;
pub const MAX_FREQ_HZ: f64 = 5e6;
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HfedError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing `#{0}=` metadata")]
    MissingMetadata(&'static str),
    #[error("{instrument} traces have {expected} points, found {found}")]
    PointCountMismatch {
        instrument: Instrument,
        expected: usize,
        found: usize,
    },
    #[error("frequency {freq_hz} Hz outside the measured range [10 kHz, 5 MHz]")]
    OutOfRange { freq_hz: f64 },
    #[error("frequency column not increasing at line {line}")]
    NonMonotone { line: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    SignalAnalyzer,
    Usrp,
}

impl Instrument {
    pub const ALL: [Instrument; 2] = [Instrument::SignalAnalyzer, Instrument::Usrp];

    pub fn keyword(self) -> &'static str {
        match self {
            Instrument::SignalAnalyzer => "signal_analyzer",
            Instrument::Usrp => "usrp",
        }
    }

    /// FFT points per trace.
    pub fn points(self) -> usize {
        match self {
            Instrument::SignalAnalyzer => 32768,
            Instrument::Usrp => 100_000,
        }
    }

    pub fn from_points(n: usize) -> Option<Instrument> {
        Self::ALL.into_iter().find(|i| i.points() == n)
    }
}

impl std::fmt::Display for Instrument {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for Instrument {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|i| i.keyword() == s)
            .ok_or_else(|| format!("unknown instrument `{s}` (expected signal_analyzer or usrp)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setup {
    LabSetup1,
    LabSetup2,
    LabSetup3,
    LabSetup4,
    HomeSetup1,
}

impl Setup {
    pub const ALL: [Setup; 5] = [
        Setup::LabSetup1,
        Setup::LabSetup2,
        Setup::LabSetup3,
        Setup::LabSetup4,
        Setup::HomeSetup1,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Setup::LabSetup1 => "lab_setup1",
            Setup::LabSetup2 => "lab_setup2",
            Setup::LabSetup3 => "lab_setup3",
            Setup::LabSetup4 => "lab_setup4",
            Setup::HomeSetup1 => "home_setup1",
        }
    }
}

impl std::fmt::Display for Setup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for Setup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|i| i.keyword() == s)
            .ok_or_else(|| format!("unknown setup `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredTrace {
    pub spectrum: Spectrum,
    pub instrument: Instrument,
    pub setup: Setup,
    pub appliance_label: Option<String>,
    pub timestamp: Option<String>,
}

impl MeasuredTrace {
    /// Builds a trace, enforcing the instrument point count and the
    /// frequency range.
    pub fn new(
        spectrum: Spectrum,
        instrument: Instrument,
        setup: Setup,
        appliance_label: Option<String>,
        timestamp: Option<String>,
    ) -> Result<MeasuredTrace, HfedError> {
        spectrum.validate()?;
        if spectrum.len() != instrument.points() {
            return Err(HfedError::PointCountMismatch {
                instrument,
                expected: instrument.points(),
                found: spectrum.len(),
            });
        }
        check_range(spectrum.f0_hz)?;
        check_range(spectrum.f_max())?;
        for v in [&appliance_label, &timestamp].into_iter().flatten() {
            if v.contains(['\n', '\r']) || v.is_empty() || v.trim() != v {
                return Err(HfedError::Malformed {
                    line: 0,
                    message: format!(
                        "metadata value `{v}` must be a non-empty single line without surrounding spaces"
                    ),
                });
            }
        }
        Ok(MeasuredTrace {
            spectrum,
            instrument,
            setup,
            appliance_label,
            timestamp,
        })
    }
}

fn check_range(freq_hz: f64) -> Result<(), HfedError> {
    if !(MIN_FREQ_HZ * (1.0 - RANGE_SLACK)..=MAX_FREQ_HZ * (1.0 + RANGE_SLACK)).contains(&freq_hz) {
        return Err(HfedError::OutOfRange { freq_hz });
    }
    Ok(())
}

/// Parses a canonical trace.
pub fn read_trace(text: &str) -> Result<MeasuredTrace, HfedError> {
    let mut instrument = None;
    let mut setup = None;
    let mut appliance = None;
    let mut timestamp = None;
    let mut f0 = None;
    let mut df = None;
    let mut header_seen = false;
    let mut freqs = Vec::new();
    let mut power = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let malformed = |message: String| HfedError::Malformed { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            let Some((key, value)) = rest.split_once('=') else {
                continue;
            };
            let value = value.trim();
            let number = || {
                value
                    .parse::<f64>()
                    .map_err(|_| malformed(format!("`{key}` is not a number: `{value}`")))
            };
            match key.trim() {
                "instrument" => instrument = Some(value.parse::<Instrument>().map_err(malformed)?),
                "setup" => setup = Some(value.parse::<Setup>().map_err(malformed)?),
                "appliance" => appliance = Some(value.to_string()),
                "timestamp" => timestamp = Some(value.to_string()),
                "f0_hz" => f0 = Some(number()?),
                "df_hz" => df = Some(number()?),
                _ => {}
            }
            continue;
        }
        if !header_seen {
            if trimmed.replace(' ', "") != "freq_hz,power_dbm" {
                return Err(malformed(format!(
                    "expected header `freq_hz,power_dbm`, got `{trimmed}`"
                )));
            }
            header_seen = true;
            continue;
        }
        let mut cols = trimmed.split(',');
        let (Some(f), Some(p), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(malformed("expected 2 columns".into()));
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("bad number `{}`", s.trim())))
        };
        let f = num(f)?;
        if let Some(&prev) = freqs.last() {
            if f <= prev {
                return Err(HfedError::NonMonotone { line });
            }
        }
        check_range(f)?;
        freqs.push(f);
        power.push(num(p)?);
    }
    let instrument = instrument.ok_or(HfedError::MissingMetadata("instrument"))?;
    let setup = setup.ok_or(HfedError::MissingMetadata("setup"))?;
    if power.len() != instrument.points() {
        return Err(HfedError::PointCountMismatch {
            instrument,
            expected: instrument.points(),
            found: power.len(),
        });
    }
    let (g0, gdf) = check_uniform_grid(&freqs)?;
    let mut spectrum = Spectrum::measured(f0.unwrap_or(g0), df.unwrap_or(gdf), power)?;
    spectrum.n_fft = instrument.points();
    MeasuredTrace::new(spectrum, instrument, setup, appliance, timestamp)
}

pub fn read_trace_file(path: &Path) -> Result<MeasuredTrace, HfedError> {
    let text = std::fs::read_to_string(path).map_err(|source| HfedError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_trace(&text)
}

/// Canonical serialisation; `read_trace(&write_trace(t)) == t`.
pub fn write_trace(trace: &MeasuredTrace) -> String {
    let s = &trace.spectrum;
    let mut out = String::with_capacity(24 * s.len() + 200);
    let _ = writeln!(out, "#instrument={}", trace.instrument);
    let _ = writeln!(out, "#setup={}", trace.setup);
    if let Some(a) = &trace.appliance_label {
        let _ = writeln!(out, "#appliance={a}");
    }
    if let Some(t) = &trace.timestamp {
        let _ = writeln!(out, "#timestamp={t}");
    }
    let _ = writeln!(out, "#f0_hz={}", s.f0_hz);
    let _ = writeln!(out, "#df_hz={}", s.df_hz);
    out.push_str("freq_hz,power_dbm\n");
    for (k, p) in s.power_dbm.iter().enumerate() {
        let _ = writeln!(out, "{},{}", s.freq(k), p);
    }
    out
}

/// Linear-in-dB resampling onto `f0_hz + k * df_hz`, `k < n`; see
/// [`Spectrum::resample`].
pub fn resample(
    spec: &Spectrum,
    f0_hz: f64,
    df_hz: f64,
    n: usize,
) -> Result<Spectrum, SpectralError> {
    spec.resample(f0_hz, df_hz, n)
}

/// Uniform grid spanning the full measured range with the instrument's
/// point count.
pub fn instrument_grid(instrument: Instrument) -> (f64, f64, usize) {
    let n = instrument.points();
    (MIN_FREQ_HZ, (MAX_FREQ_HZ - MIN_FREQ_HZ) / (n - 1) as f64, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn synthetic(instrument: Instrument) -> MeasuredTrace {
        let (f0, df, n) = instrument_grid(instrument);
        let p = (0..n)
            .map(|k| {
                -90.0
                    + 30.0 * (-(((f0 + k as f64 * df) - 100e3) / 2e3).powi(2)).exp()
                    + (k % 7) as f64 * 0.1
            })
            .collect();
        let mut s = Spectrum::measured(f0, df, p).unwrap();
        s.n_fft = n;
        MeasuredTrace::new(
            s,
            instrument,
            Setup::LabSetup4,
            Some("Modem".into()),
            Some("2016-03-01T10:00:00".into()),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_both_instruments() {
        for inst in Instrument::ALL {
            let t = synthetic(inst);
            let text = write_trace(&t);
            let back = read_trace(&text).unwrap();
            assert_eq!(back, t);
            assert_eq!(write_trace(&back), text);
            assert!(text.contains("#appliance=Modem\n"));
        }
    }

    #[test]
    fn point_count_mismatch() {
        let t = synthetic(Instrument::SignalAnalyzer);
        let text = write_trace(&t).replace("#instrument=signal_analyzer", "#instrument=usrp");
        match read_trace(&text) {
            Err(HfedError::PointCountMismatch {
                expected, found, ..
            }) => {
                assert_eq!((expected, found), (100_000, 32768))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_bin() {
        let t = synthetic(Instrument::SignalAnalyzer);
        let mut text = write_trace(&t);
        let last = text.trim_end().rsplit('\n').next().unwrap().to_string();
        text = text.replace(&format!("{last}\n"), "6000000,-90\n");
        assert!(
            matches!(read_trace(&text), Err(HfedError::OutOfRange { freq_hz }) if freq_hz == 6e6)
        );
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            read_trace("#setup=lab_setup1\nfreq_hz,power_dbm\n10000,1\n"),
            Err(HfedError::MissingMetadata("instrument"))
        ));
        assert!(matches!(
            read_trace(
                "#instrument=usrp\n#setup=lab_setup1\nfreq_hz,power_dbm\n20000,1\n10000,1\n"
            ),
            Err(HfedError::NonMonotone { line: 5 })
        ));
        assert!(matches!(
            read_trace("#instrument=usrp\n#setup=lab_setup1\nfreq_hz,power_dbm\n20000;1\n"),
            Err(HfedError::Malformed { line: 4, .. })
        ));
        assert!(matches!(
            read_trace("#instrument=scope\n"),
            Err(HfedError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn resample_usrp_to_analyzer_grid() {
        let t = synthetic(Instrument::Usrp);
        let (f0, df, n) = instrument_grid(Instrument::SignalAnalyzer);
        let r = resample(&t.spectrum, f0, df, n).unwrap();
        assert_eq!(r.len(), 32768);
        assert_eq!(r.power_dbm[0], t.spectrum.power_dbm[0]);
        assert_eq!(r.power_dbm[n - 1], t.spectrum.power_dbm[99_999]);
        let own = resample(
            &t.spectrum,
            t.spectrum.f0_hz,
            t.spectrum.df_hz,
            t.spectrum.len(),
        )
        .unwrap();
        assert_eq!(own.power_dbm, t.spectrum.power_dbm);
        assert!(resample(&t.spectrum, 9e3, df, n).is_err());
    }
}
