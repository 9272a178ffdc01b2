//! Calibrated power spectra and their analysis.
//!
//! A [`Spectrum`] is a uniform one-sided frequency grid of bin powers in dBm.
//! Each bin holds the power a sinusoid with the bin's amplitude would
//! dissipate in the reference impedance, so a current waveform is treated
//! as if it drove that impedance (I²·Z/2 per tone).

mod compare;
mod peaks;

use std::fmt::Write as _;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{compare_spectra, Comparison, PeakDelta};
pub use peaks::{find_peaks, harmonic_families, HarmonicLabel, Peak, DEFAULT_MIN_PROMINENCE_DB};

pub const DEFAULT_REF_IMPEDANCE_OHMS: f64 = 50.0;
/// Bins with zero power are clamped here.
pub const DEFAULT_FLOOR_DBM: f64 = -200.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("n_fft {n_fft} exceeds the {available} available samples")]
    NfftTooLarge { n_fft: usize, available: usize },
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("invalid spectrum: {0}")]
    Invalid(String),
    #[error("disjoint frequency coverage")]
    DisjointBands,
    #[error("resampling would extrapolate: {freq_hz} Hz is outside [{lo_hz}, {hi_hz}] Hz")]
    Extrapolation {
        freq_hz: f64,
        lo_hz: f64,
        hi_hz: f64,
    },
    #[error("spectrum CSV line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Simulated,
    Measured,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $kw:literal),* }) => {
        impl $ty {
            pub fn keyword(self) -> &'static str {
                match self { $($ty::$variant => $kw),* }
            }
        }
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($kw => Ok($ty::$variant),)*
                    _ => Err(format!("unknown {} `{s}`", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

keyword_enum!(Window { Rectangular => "rectangular", Hann => "hann" });
keyword_enum!(SpectrumSource { Simulated => "simulated", Measured => "measured" });

/// One-sided power spectrum on the grid `f0_hz + k * df_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub f0_hz: f64,
    pub df_hz: f64,
    pub power_dbm: Vec<f64>,
    pub window: Window,
    pub ref_impedance_ohms: f64,
    pub source: SpectrumSource,
    /// FFT length behind the spectrum; for measured data, the point count.
    pub n_fft: usize,
}

/// Options for [`spectrum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub window: Window,
    /// Defaults to all samples.
    pub n_fft: Option<usize>,
    pub ref_impedance_ohms: f64,
    pub floor_dbm: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            window: Window::Rectangular,
            n_fft: None,
            ref_impedance_ohms: DEFAULT_REF_IMPEDANCE_OHMS,
            floor_dbm: DEFAULT_FLOOR_DBM,
        }
    }
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Spectrum of the first `n_fft` samples of a uniformly sampled waveform.
///
/// Bin 0 is DC and is reported with its plain power A²/Z; the last bin of an
/// even-length transform is Nyquist and is treated the same way. All other
/// bins are sinusoid powers A²/(2Z). Amplitudes are corrected for the
/// window's coherent gain, so a bin-centred tone reads the same under every
/// window, and with a rectangular window the bin powers sum to the mean
/// power of the signal.
pub fn spectrum(samples: &[f64], dt: f64, cfg: &SpectrumConfig) -> Result<Spectrum, SpectralError> {
    let n = cfg.n_fft.unwrap_or(samples.len());
    if n > samples.len() {
        return Err(SpectralError::NfftTooLarge {
            n_fft: n,
            available: samples.len(),
        });
    }
    if n < 2 {
        return Err(SpectralError::TooShort(n));
    }
    if let Some(index) = samples[..n].iter().position(|v| !v.is_finite()) {
        return Err(SpectralError::NonFinite { index });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SpectralError::Invalid(format!("dt must be > 0, got {dt}")));
    }
    if !(cfg.ref_impedance_ohms > 0.0) {
        return Err(SpectralError::Invalid(
            "reference impedance must be > 0".into(),
        ));
    }

    let weights: Vec<f64> = match cfg.window {
        Window::Rectangular => vec![1.0; n],
        // Periodic Hann, so a bin-centred tone sees exactly the main lobe.
        Window::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
    };
    let gain: f64 = weights.iter().sum();
    let mut buf: Vec<Complex<f64>> = samples[..n]
        .iter()
        .zip(&weights)
        .map(|(x, w)| Complex::new(x * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bins = n / 2 + 1;
    let z = cfg.ref_impedance_ohms;
    let power_dbm = buf[..bins]
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let amplitude = x.norm() / gain;
            let watts = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                amplitude * amplitude / z
            } else {
                2.0 * amplitude * amplitude / z
            };
            let dbm = watts_to_dbm(watts);
            if dbm.is_finite() {
                dbm.max(cfg.floor_dbm)
            } else {
                cfg.floor_dbm
            }
        })
        .collect();
    Ok(Spectrum {
        f0_hz: 0.0,
        df_hz: 1.0 / (n as f64 * dt),
        power_dbm,
        window: cfg.window,
        ref_impedance_ohms: z,
        source: SpectrumSource::Simulated,
        n_fft: n,
    })
}

/// Relative position tolerance, in bins, under which a frequency counts as
/// sitting exactly on a grid point.
const COINCIDENT_BINS: f64 = 1e-9;

impl Spectrum {
    /// A measured spectrum on the given grid.
    pub fn measured(
        f0_hz: f64,
        df_hz: f64,
        power_dbm: Vec<f64>,
    ) -> Result<Spectrum, SpectralError> {
        let s = Spectrum {
            f0_hz,
            df_hz,
            n_fft: power_dbm.len(),
            power_dbm,
            window: Window::Hann,
            ref_impedance_ohms: DEFAULT_REF_IMPEDANCE_OHMS,
            source: SpectrumSource::Measured,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        let bad = |m: String| Err(SpectralError::Invalid(m));
        if !(self.df_hz.is_finite() && self.df_hz > 0.0) {
            return bad(format!("df_hz must be > 0, got {}", self.df_hz));
        }
        if !self.f0_hz.is_finite() || self.f0_hz < 0.0 {
            return bad(format!("f0_hz must be >= 0, got {}", self.f0_hz));
        }
        if self.power_dbm.is_empty() {
            return bad("spectrum has no bins".into());
        }
        if let Some(i) = self.power_dbm.iter().position(|p| !p.is_finite()) {
            return bad(format!("bin {i} is not finite"));
        }
        if !(self.ref_impedance_ohms > 0.0) {
            return bad("reference impedance must be > 0".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.power_dbm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_dbm.is_empty()
    }

    pub fn freq(&self, bin: usize) -> f64 {
        self.f0_hz + bin as f64 * self.df_hz
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.freq(k))
    }

    pub fn f_max(&self) -> f64 {
        self.freq(self.len() - 1)
    }

    /// Nearest bin to `freq_hz`, clamped to the grid.
    pub fn bin_of(&self, freq_hz: f64) -> usize {
        let pos = ((freq_hz - self.f0_hz) / self.df_hz).round();
        pos.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Bins whose frequency lies in `[lo_hz, hi_hz]`.
    pub fn bins_in(&self, lo_hz: f64, hi_hz: f64) -> std::ops::Range<usize> {
        let eps = COINCIDENT_BINS;
        let lo = ((lo_hz - self.f0_hz) / self.df_hz - eps).ceil().max(0.0) as usize;
        let hi = ((hi_hz - self.f0_hz) / self.df_hz + eps).floor();
        if hi < 0.0 {
            return 0..0;
        }
        let hi = (hi as usize + 1).min(self.len());
        lo.min(hi)..hi
    }

    /// The bins within `[lo_hz, hi_hz]` as a spectrum of their own.
    pub fn crop(&self, lo_hz: f64, hi_hz: f64) -> Result<Spectrum, SpectralError> {
        let r = self.bins_in(lo_hz, hi_hz);
        if r.is_empty() {
            return Err(SpectralError::DisjointBands);
        }
        Ok(Spectrum {
            f0_hz: self.freq(r.start),
            power_dbm: self.power_dbm[r].to_vec(),
            ..self.clone()
        })
    }

    /// Largest bin power within `[lo_hz, hi_hz]`, or the nearest bin when
    /// the interval holds none.
    pub fn max_in(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let r = self.bins_in(lo_hz, hi_hz);
        if r.is_empty() {
            return self.power_dbm[self.bin_of(0.5 * (lo_hz + hi_hz))];
        }
        self.power_dbm[r]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Power at `freq_hz`, linearly interpolated in dB. Exact at grid points.
    pub fn value_at(&self, freq_hz: f64) -> Result<f64, SpectralError> {
        let pos = (freq_hz - self.f0_hz) / self.df_hz;
        let last = (self.len() - 1) as f64;
        let nearest = pos.round();
        if (pos - nearest).abs() < COINCIDENT_BINS && (0.0..=last).contains(&nearest) {
            return Ok(self.power_dbm[nearest as usize]);
        }
        if !(0.0..=last).contains(&pos) {
            return Err(SpectralError::Extrapolation {
                freq_hz,
                lo_hz: self.f0_hz,
                hi_hz: self.f_max(),
            });
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let a = self.power_dbm[i];
        let b = self.power_dbm[(i + 1).min(self.len() - 1)];
        Ok(a + (b - a) * frac)
    }

    /// This spectrum on the grid `f0_hz + k * df_hz`, `k < n`, by linear
    /// interpolation in dB. The grid must lie within the current coverage.
    pub fn resample(&self, f0_hz: f64, df_hz: f64, n: usize) -> Result<Spectrum, SpectralError> {
        if !(df_hz > 0.0) || n == 0 {
            return Err(SpectralError::Invalid(format!(
                "target grid needs df > 0 and n > 0, got df={df_hz}, n={n}"
            )));
        }
        let power_dbm = (0..n)
            .map(|k| self.value_at(f0_hz + k as f64 * df_hz))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Spectrum {
            f0_hz,
            df_hz,
            power_dbm,
            n_fft: n,
            ..self.clone()
        })
    }

    /// `#key=value` metadata followed by `freq_hz,power_dbm` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#window={}", self.window.keyword());
        let _ = writeln!(out, "#n_fft={}", self.n_fft);
        let _ = writeln!(out, "#ref_impedance_ohms={}", self.ref_impedance_ohms);
        let _ = writeln!(out, "#source={}", self.source.keyword());
        let _ = writeln!(out, "#f0_hz={}", self.f0_hz);
        let _ = writeln!(out, "#df_hz={}", self.df_hz);
        out.push_str("freq_hz,power_dbm\n");
        for (k, p) in self.power_dbm.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.freq(k), p);
        }
        out
    }

    /// Parses [`Spectrum::to_csv`] output. Metadata lines are optional; the
    /// grid is then inferred from the frequency column, which must be uniform.
    pub fn from_csv(text: &str) -> Result<Spectrum, SpectralError> {
        let mut meta = std::collections::BTreeMap::new();
        let mut freqs = Vec::new();
        let mut power = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| SpectralError::Csv {
                line: line_no,
                message,
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !header_seen {
                if line.replace(' ', "") != "freq_hz,power_dbm" {
                    return Err(err(format!(
                        "expected header `freq_hz,power_dbm`, got `{line}`"
                    )));
                }
                header_seen = true;
                continue;
            }
            let mut cols = line.split(',');
            let (Some(f), Some(p), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(err("expected two columns".into()));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad number `{}`", s.trim())))
            };
            freqs.push(parse(f)?);
            power.push(parse(p)?);
        }
        if power.is_empty() {
            return Err(SpectralError::Invalid("no data rows".into()));
        }
        let (f0, df) = check_uniform_grid(&freqs)?;
        let get = |k: &str| meta.get(k).map(String::as_str);
        let parse_meta = |k: &str, v: &str| -> Result<f64, SpectralError> {
            v.parse().map_err(|_| {
                SpectralError::Invalid(format!("metadata `{k}` is not a number: `{v}`"))
            })
        };
        let f0_hz = match get("f0_hz") {
            Some(v) => parse_meta("f0_hz", v)?,
            None => f0,
        };
        let df_hz = match get("df_hz") {
            Some(v) => parse_meta("df_hz", v)?,
            None => df,
        };
        let s = Spectrum {
            f0_hz,
            df_hz,
            n_fft: match get("n_fft") {
                Some(v) => parse_meta("n_fft", v)? as usize,
                None => power.len(),
            },
            power_dbm: power,
            window: match get("window") {
                Some(v) => v.parse().map_err(SpectralError::Invalid)?,
                None => Window::Hann,
            },
            ref_impedance_ohms: match get("ref_impedance_ohms") {
                Some(v) => parse_meta("ref_impedance_ohms", v)?,
                None => DEFAULT_REF_IMPEDANCE_OHMS,
            },
            source: match get("source") {
                Some(v) => v.parse().map_err(SpectralError::Invalid)?,
                None => SpectrumSource::Measured,
            },
        };
        s.validate()?;
        Ok(s)
    }
}

/// Origin and spacing of a strictly increasing, uniform frequency column.
/// A single point gets spacing 1 Hz.
pub fn check_uniform_grid(freqs: &[f64]) -> Result<(f64, f64), SpectralError> {
    let Some(&f0) = freqs.first() else {
        return Err(SpectralError::Invalid("empty frequency column".into()));
    };
    if freqs.len() == 1 {
        return Ok((f0, 1.0));
    }
    let df = (freqs[freqs.len() - 1] - f0) / (freqs.len() - 1) as f64;
    for (k, w) in freqs.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(SpectralError::Invalid(format!(
                "frequency column not strictly increasing at row {}",
                k + 2
            )));
        }
    }
    for (k, f) in freqs.iter().enumerate() {
        let expected = f0 + k as f64 * df;
        if (f - expected).abs() > 1e-3 * df {
            return Err(SpectralError::Invalid(format!(
                "frequency column not uniform at row {}: {f} Hz, expected {expected} Hz",
                k + 1
            )));
        }
    }
    Ok((f0, df))
}
