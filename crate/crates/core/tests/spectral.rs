use std::f64::consts::PI;

use emisim_core::spectral::{
    compare_spectra, dbm_to_watts, find_peaks, harmonic_families, spectrum, Peak, Spectrum,
    SpectrumConfig, Window,
};
use proptest::prelude::*;

/// Textbook O(N^2) DFT, one-sided, same calibration as the library.
fn dft_dbm(x: &[f64], k: usize, z: f64) -> f64 {
    let n = x.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let ph = -2.0 * PI * (k * i) as f64 / n as f64;
        re += v * ph.cos();
        im += v * ph.sin();
    }
    let a = (re * re + im * im).sqrt() / n as f64;
    10.0 * (2.0 * a * a / z / 1e-3).log10()
}

#[test]
fn square_wave_odd_harmonics() {
    // 100 kHz +-1 square wave, 512 samples per period, 8 periods.
    let per = 512;
    let x: Vec<f64> = (0..per * 8)
        .map(|i| if i % per < per / 2 { 1.0 } else { -1.0 })
        .collect();
    let dt = 10e-6 / per as f64;
    let s = spectrum(&x, dt, &SpectrumConfig::default()).unwrap();
    let fund = s.bin_of(100e3);
    assert_eq!(fund, 8);
    for h in 1..=9 {
        let k = fund * h;
        let oracle = dft_dbm(&x, k, 50.0);
        if h % 2 == 1 {
            assert!((s.power_dbm[k] - oracle).abs() < 1e-9);
            // 1/n amplitude law relative to the fundamental.
            let law = s.power_dbm[fund] - 20.0 * (h as f64).log10();
            assert!((s.power_dbm[k] - law).abs() < 0.2, "h={h}");
        } else {
            assert!(s.power_dbm[k] < s.power_dbm[fund] - 100.0, "h={h}");
        }
    }
}

#[test]
fn hann_leakage_is_bounded() {
    let n = 4096;
    let x: Vec<f64> = (0..n)
        .map(|i| (2.0 * PI * 200.5 * i as f64 / n as f64).sin())
        .collect();
    let cfg = SpectrumConfig {
        window: Window::Hann,
        ..SpectrumConfig::default()
    };
    let s = spectrum(&x, 1e-6, &cfg).unwrap();
    let far = s.power_dbm[400];
    assert!(far < s.power_dbm[200] - 60.0);
}

fn arb_spectrum() -> impl Strategy<Value = Spectrum> {
    (1.0f64..100.0, prop::collection::vec(-150.0f64..0.0, 8..64))
        .prop_map(|(df, p)| Spectrum::measured(0.0, df, p).unwrap())
}

proptest! {
    #[test]
    fn parseval_holds(x in prop::collection::vec(-10.0f64..10.0, 2..300)) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let s = spectrum(&x, 1e-6, &SpectrumConfig::default()).unwrap();
        let total: f64 = s.power_dbm.iter().map(|p| dbm_to_watts(*p)).sum();
        let mean_sq = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64 / 50.0;
        prop_assert!((total / mean_sq - 1.0).abs() < 1e-3);
    }

    #[test]
    fn distance_is_symmetric(a in arb_spectrum(), b in arb_spectrum(), lo in 0.0f64..200.0) {
        let band = (lo, lo + 500.0);
        match (compare_spectra(&a, &b, band), compare_spectra(&b, &a, band)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x.log_spectral_distance_db, y.log_spectral_distance_db),
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn self_distance_zero(a in arb_spectrum(), shift in -20.0f64..20.0) {
        let c = compare_spectra(&a, &a, (0.0, 1e6)).unwrap();
        prop_assert_eq!(c.log_spectral_distance_db, 0.0);
        prop_assert_eq!(c.peak_match_fraction, 1.0);
        let mut b = a.clone();
        b.power_dbm.iter_mut().for_each(|p| *p += shift);
        let c = compare_spectra(&a, &b, (0.0, 1e6)).unwrap();
        prop_assert!((c.log_spectral_distance_db - shift.abs()).abs() < 1e-9);
    }

    #[test]
    fn prominence_non_negative_and_peaks_sorted(a in arb_spectrum()) {
        let peaks = find_peaks(&a, -200.0, 0.0);
        prop_assert!(peaks.iter().all(|p| p.prominence_db >= 0.0));
        prop_assert!(peaks.windows(2).all(|w| w[0].freq_hz < w[1].freq_hz));
    }

    #[test]
    fn labels_ignore_order(
        freqs in prop::collection::vec(1u32..60, 1..12),
        seed in any::<u64>(),
    ) {
        let peaks: Vec<Peak> = freqs.iter().map(|k| Peak {
            freq_hz: *k as f64 * 10e3,
            power_dbm: 0.0,
            bin_index: *k as usize,
            prominence_db: 10.0,
        }).collect();
        let mut shuffled = peaks.clone();
        let len = shuffled.len();
        shuffled.rotate_left((seed as usize) % len);
        shuffled.reverse();
        let a = harmonic_families(&peaks, &[100e3, 40e3], 5, 10e3);
        let b = harmonic_families(&shuffled, &[100e3, 40e3], 5, 10e3);
        prop_assert_eq!(a.iter().map(|l| (l.peak.bin_index, l.m, l.n)).collect::<Vec<_>>(),
                        b.iter().map(|l| (l.peak.bin_index, l.m, l.n)).collect::<Vec<_>>());
        for l in &a {
            prop_assert!((l.m, l.n) != (0, 0));
            let f = (l.m as f64 * 100e3 + l.n as f64 * 40e3).abs();
            prop_assert!((f - l.peak.freq_hz).abs() <= 5e3);
        }
    }

    #[test]
    fn csv_round_trip(a in arb_spectrum()) {
        prop_assert_eq!(Spectrum::from_csv(&a.to_csv()).unwrap(), a);
    }
}
