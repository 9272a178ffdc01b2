//! Cycle-to-cycle convergence measure used to detect periodic steady state.

/// Largest per-variable relative RMS difference between two cycles.
///
/// Each cycle holds one sample vector per state variable (inductor currents,
/// capacitor voltages). Variables are normalised separately so that amps and
/// volts do not mix. A variable that is identically zero in both cycles
/// contributes zero.
pub fn cycle_difference(previous: &[Vec<f64>], current: &[Vec<f64>]) -> f64 {
    previous
        .iter()
        .zip(current)
        .map(|(prev, cur)| {
            let (diff, norm) = prev.iter().zip(cur).fold((0.0, 0.0), |(d, n), (p, c)| {
                (d + (c - p) * (c - p), n + c * c)
            });
            if diff == 0.0 {
                0.0
            } else if norm == 0.0 {
                f64::INFINITY
            } else {
                (diff / norm).sqrt()
            }
        })
        .fold(0.0, f64::max)
}

/// Index of the first cycle `k >= 1` whose difference to cycle `k - 1` is
/// strictly below `tolerance`.
pub fn detect_steady_state(cycles: &[Vec<Vec<f64>>], tolerance: f64) -> Option<usize> {
    (1..cycles.len()).find(|&k| cycle_difference(&cycles[k - 1], &cycles[k]) < tolerance)
}
