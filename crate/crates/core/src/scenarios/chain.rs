//! Measurement-chain models applied to spectra.

use crate::spectral::{dbm_to_watts, watts_to_dbm, SpectralError, Spectrum, DEFAULT_FLOOR_DBM};

/// Cutoff of the differential high-pass in front of the instruments.
pub const SENSING_CUTOFF_HZ: f64 = 60e3;
/// Default white background level per bin.
pub const DEFAULT_BACKGROUND_DBM: f64 = -90.0;

/// Power gain in dB of a second-order Butterworth high-pass,
/// |H|² = (f/fc)⁴ / (1 + (f/fc)⁴).
pub fn highpass_gain_db(freq_hz: f64, cutoff_hz: f64) -> f64 {
    if freq_hz <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let x4 = (freq_hz / cutoff_hz).powi(4);
    -10.0 * (1.0 + 1.0 / x4).log10()
}

/// Applies the 60 kHz sensing high-pass to every bin. Bins never gain power,
/// and nothing drops below the −200 dBm floor.
pub fn apply_sensing_chain(spec: &Spectrum) -> Spectrum {
    apply_highpass(spec, SENSING_CUTOFF_HZ)
}

pub fn apply_highpass(spec: &Spectrum, cutoff_hz: f64) -> Spectrum {
    let mut out = spec.clone();
    for (k, p) in out.power_dbm.iter_mut().enumerate() {
        let g = highpass_gain_db(spec.freq(k), cutoff_hz);
        *p = (*p + g).max(DEFAULT_FLOOR_DBM.min(*p));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    /// Same level in every bin, in dBm.
    WhiteFloor(f64),
    /// A measured background spectrum, resampled onto the signal grid where
    /// the two overlap.
    Trace(Spectrum),
}

fn add_dbm(a: f64, b: f64) -> f64 {
    let w = |p: f64| {
        if p <= DEFAULT_FLOOR_DBM {
            0.0
        } else {
            dbm_to_watts(p)
        }
    };
    let total = w(a) + w(b);
    if total == 0.0 {
        a.max(b)
    } else {
        watts_to_dbm(total)
    }
}

/// Adds background noise in the power domain. Values at or below −200 dBm
/// count as zero power. A measured background only affects bins it covers;
/// it is an error when it covers none.
pub fn add_background(spec: &Spectrum, noise: &Background) -> Result<Spectrum, SpectralError> {
    let mut out = spec.clone();
    match noise {
        Background::WhiteFloor(level) => {
            out.power_dbm
                .iter_mut()
                .for_each(|p| *p = add_dbm(*p, *level));
        }
        Background::Trace(bg) => {
            let covered = spec.bins_in(bg.f0_hz, bg.f_max());
            if covered.is_empty() {
                return Err(SpectralError::DisjointBands);
            }
            for k in covered {
                let level = bg.value_at(spec.freq(k))?;
                out.power_dbm[k] = add_dbm(out.power_dbm[k], level);
            }
        }
    }
    Ok(out)
}
