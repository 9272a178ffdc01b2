//! Distance between two spectra.

use serde::Serialize;

use super::{find_peaks, SpectralError, Spectrum, DEFAULT_MIN_PROMINENCE_DB};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakDelta {
    pub freq_hz: f64,
    pub a_dbm: f64,
    pub b_dbm: f64,
    /// `b - a`.
    pub delta_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub band_hz: (f64, f64),
    /// RMS of the bin-wise dB difference over the common band.
    pub log_spectral_distance_db: f64,
    /// Share of `a`'s in-band peaks that have a peak in `b` within half a
    /// bin; 1 when `a` has none.
    pub peak_match_fraction: f64,
    pub peaks_in_a: usize,
    pub per_peak: Vec<PeakDelta>,
}

/// Compares `b` against `a` over `band_hz`.
///
/// Both spectra are evaluated on the finer of the two grids (linear
/// interpolation in dB), restricted to the band and to the frequencies both
/// cover, which makes the distance symmetric in `a` and `b`.
pub fn compare_spectra(
    a: &Spectrum,
    b: &Spectrum,
    band_hz: (f64, f64),
) -> Result<Comparison, SpectralError> {
    let lo = band_hz.0.max(a.f0_hz).max(b.f0_hz);
    let hi = band_hz.1.min(a.f_max()).min(b.f_max());
    if !(lo <= hi) {
        return Err(SpectralError::DisjointBands);
    }
    let grid = match a
        .df_hz
        .total_cmp(&b.df_hz)
        .then(a.f0_hz.total_cmp(&b.f0_hz))
    {
        std::cmp::Ordering::Greater => b,
        _ => a,
    };
    let bins = grid.bins_in(lo, hi);
    if bins.is_empty() {
        return Err(SpectralError::DisjointBands);
    }
    let mut sum_sq = 0.0;
    for k in bins.clone() {
        let f = grid.freq(k);
        let d = b.value_at(f)? - a.value_at(f)?;
        sum_sq += d * d;
    }
    let distance = (sum_sq / bins.len() as f64).sqrt();

    let in_band = |s: &Spectrum| {
        find_peaks(s, f64::NEG_INFINITY, DEFAULT_MIN_PROMINENCE_DB)
            .into_iter()
            .filter(|p| p.freq_hz >= lo && p.freq_hz <= hi)
            .collect::<Vec<_>>()
    };
    let peaks_a = in_band(a);
    let peaks_b = in_band(b);
    let tolerance = 0.5 * a.df_hz.max(b.df_hz);
    let per_peak: Vec<PeakDelta> = peaks_a
        .iter()
        .filter_map(|pa| {
            let pb = peaks_b
                .iter()
                .filter(|pb| (pb.freq_hz - pa.freq_hz).abs() <= tolerance)
                .min_by(|x, y| {
                    (x.freq_hz - pa.freq_hz)
                        .abs()
                        .total_cmp(&(y.freq_hz - pa.freq_hz).abs())
                })?;
            Some(PeakDelta {
                freq_hz: pa.freq_hz,
                a_dbm: pa.power_dbm,
                b_dbm: pb.power_dbm,
                delta_db: pb.power_dbm - pa.power_dbm,
            })
        })
        .collect();
    let fraction = if peaks_a.is_empty() {
        1.0
    } else {
        per_peak.len() as f64 / peaks_a.len() as f64
    };
    Ok(Comparison {
        band_hz: (lo, hi),
        log_spectral_distance_db: distance,
        peak_match_fraction: fraction,
        peaks_in_a: peaks_a.len(),
        per_peak,
    })
}
