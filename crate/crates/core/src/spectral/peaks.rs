//! Peak picking and harmonic/inter-harmonic labelling.

use serde::Serialize;

use super::Spectrum;

pub const DEFAULT_MIN_PROMINENCE_DB: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub power_dbm: f64,
    pub bin_index: usize,
    pub prominence_db: f64,
}

/// A peak explained as `|m * f1 + n * f2|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicLabel {
    pub peak: Peak,
    pub m: i32,
    pub n: i32,
}

/// Local maxima above `floor_dbm` whose topographic prominence is at least
/// `min_prominence_db`, sorted by frequency.
///
/// Prominence is the drop from the peak to the higher of the two lowest
/// points separating it from taller terrain (or the spectrum edge) on each
/// side. A flat run of equal maxima counts as one peak at its centre. The
/// first and last bins are never peaks.
pub fn find_peaks(spec: &Spectrum, floor_dbm: f64, min_prominence_db: f64) -> Vec<Peak> {
    let p = &spec.power_dbm;
    let n = p.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if p[i] <= p[i - 1] {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < n && p[j + 1] == p[i] {
            j += 1;
        }
        if j + 1 >= n || p[j + 1] > p[i] {
            i = j + 1;
            continue;
        }
        let height = p[i];
        let left_base = p[..i]
            .iter()
            .rev()
            .take_while(|v| **v <= height)
            .fold(height, |m, v| m.min(*v));
        let right_base = p[j + 1..]
            .iter()
            .take_while(|v| **v <= height)
            .fold(height, |m, v| m.min(*v));
        let prominence = height - left_base.max(right_base);
        if height > floor_dbm && prominence >= min_prominence_db {
            let bin = (i + j) / 2;
            peaks.push(Peak {
                freq_hz: spec.freq(bin),
                power_dbm: height,
                bin_index: bin,
                prominence_db: prominence,
            });
        }
        i = j + 1;
    }
    peaks
}

/// Labels each peak with the `(m, n)` of smallest `|m| + |n|` such that
/// `|m * f1 + n * f2|` lies within half a bin of it, with `|m|, |n| <=
/// max_order`. With one base frequency `n` is always 0. Unexplained peaks
/// are left out. Signs are canonical: the first nonzero of `(m, n)` is
/// positive. The result is sorted by frequency and does not depend on the
/// order of `peaks`.
pub fn harmonic_families(
    peaks: &[Peak],
    base_freqs: &[f64],
    max_order: u32,
    df_hz: f64,
) -> Vec<HarmonicLabel> {
    assert!(
        (1..=2).contains(&base_freqs.len()) && base_freqs.iter().all(|f| *f > 0.0),
        "one or two positive base frequencies required"
    );
    let f1 = base_freqs[0];
    let f2 = base_freqs.get(1).copied();
    let m_max = max_order as i32;
    let n_max = if f2.is_some() { m_max } else { 0 };

    let mut candidates: Vec<(i32, i32, f64)> = Vec::new();
    for m in 0..=m_max {
        for n in -n_max..=n_max {
            if m == 0 && n <= 0 {
                continue;
            }
            let f = (m as f64 * f1 + n as f64 * f2.unwrap_or(0.0)).abs();
            candidates.push((m, n, f));
        }
    }
    // Order of preference: fewest terms, then lexicographic (m, n).
    candidates.sort_by_key(|&(m, n, _)| (m.abs() + n.abs(), m, n));

    let mut labels: Vec<HarmonicLabel> = peaks
        .iter()
        .filter_map(|peak| {
            let best = candidates
                .iter()
                .filter(|(_, _, f)| (f - peak.freq_hz).abs() <= 0.5 * df_hz)
                .min_by(|a, b| {
                    let order = |c: &(i32, i32, f64)| c.0.abs() + c.1.abs();
                    order(a).cmp(&order(b)).then(
                        (a.2 - peak.freq_hz)
                            .abs()
                            .total_cmp(&(b.2 - peak.freq_hz).abs()),
                    )
                })?;
            Some(HarmonicLabel {
                peak: peak.clone(),
                m: best.0,
                n: best.1,
            })
        })
        .collect();
    labels.sort_by(|a, b| {
        a.peak
            .freq_hz
            .total_cmp(&b.peak.freq_hz)
            .then(a.peak.bin_index.cmp(&b.peak.bin_index))
    });
    labels
}
