//! Recovers buck-model parameters from a measured spectrum.
//!
//! The pipeline has three stages:
//!
//! 1. the switching frequency comes from the strongest harmonic comb in the
//!    target ([`estimate_fsw`]);
//! 2. L and C follow from the buck design equations for the assumed
//!    current and voltage ripple ratios, recomputed whenever R changes;
//! 3. coordinate descent over supply voltage, load resistance and the two
//!    series resistances, each on a log grid that narrows every sweep.
//!
//! Each candidate is scored by simulating it and comparing its supply
//! current spectrum with the target at the target's peaks plus a sparse set
//! of baseline bins. Candidates of one grid run in parallel; the descent
//! itself is sequential and fully deterministic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_transient, SimConfig, TimeStep};
use crate::netlist::{buck_template, BuckParams};
use crate::spectral::{
    find_peaks, spectrum, Spectrum, SpectrumConfig, SpectrumSource, Window,
    DEFAULT_MIN_PROMINENCE_DB,
};

const MAX_RESISTANCE_OHMS: f64 = 1e6;
const L_RANGE: (f64, f64) = (1e-9, 1.0);
const C_RANGE: (f64, f64) = (1e-12, 1.0);
/// Grid half-width below which a stalled sweep ends the descent.
const FINE_SPAN: f64 = 1.1;
const OFFSET_SCAN_DB: f64 = 0.5;
const OFFSET_SCAN_STEPS: i32 = 160;
const VSUPPLY_RANGE: (f64, f64) = (1e-6, 1e3);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("no harmonic comb found: best comb mean {best_dbm:.1} dBm vs floor {floor_dbm:.1} dBm (needs +{required_db} dB)")]
    NoCombFound {
        best_dbm: f64,
        floor_dbm: f64,
        required_db: f64,
    },
    #[error("target spectrum does not cover the band {lo_hz} to {hi_hz} Hz")]
    NoCoverage { lo_hz: f64, hi_hz: f64 },
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
    #[error("every candidate simulation failed; last error: {0}")]
    AllCandidatesFailed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub fsw_search_band_hz: (f64, f64),
    /// Harmonics per comb score.
    pub comb_harmonics: usize,
    /// Comb mean must beat the median bin by this much.
    pub comb_significance_db: f64,
    pub band_hz: (f64, f64),
    pub duty: f64,
    /// Peak-to-peak inductor ripple over mean load current.
    pub current_ripple_ratio: f64,
    /// Peak-to-peak output ripple over mean output voltage.
    pub voltage_ripple_ratio: f64,
    /// Grid points per parameter per sweep (odd, ≥ 3).
    pub grid_points: usize,
    /// Initial grid half-width as a multiplicative factor.
    pub initial_span: f64,
    /// Exponent applied to the span after every sweep.
    pub span_shrink: f64,
    pub max_iterations: usize,
    pub convergence_tol_db: f64,
    /// Evenly spaced baseline bins added to the peak bins in the loss.
    pub baseline_bins: usize,
    /// Both spectra are floored at max(target median, this) before comparing.
    pub loss_floor_dbm: f64,
    pub steps_per_period: usize,
    pub total_cycles: usize,
    pub capture_cycles: usize,
    /// Re-level every candidate through the supply voltage before scoring.
    pub rescale_supply: bool,
    /// Starting point for supply voltage, load and series resistances.
    pub initial: BuckParams,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            fsw_search_band_hz: (20e3, 500e3),
            comb_harmonics: 8,
            comb_significance_db: 10.0,
            band_hz: (60e3, 2e6),
            duty: 0.5,
            current_ripple_ratio: 2000.0,
            voltage_ripple_ratio: 0.5,
            grid_points: 9,
            initial_span: 10.0,
            span_shrink: 0.5,
            max_iterations: 6,
            convergence_tol_db: 0.01,
            baseline_bins: 32,
            loss_floor_dbm: -140.0,
            steps_per_period: 512,
            total_cycles: 2000,
            capture_cycles: 10,
            rescale_supply: true,
            initial: BuckParams::router(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::InvalidConfig(m.to_string()));
        let band_ok = |b: (f64, f64)| b.0 >= 0.0 && b.1 > b.0;
        if !band_ok(self.fsw_search_band_hz) || self.fsw_search_band_hz.0 <= 0.0 {
            return bad("fsw_search_band_hz must be an increasing positive range");
        }
        if !band_ok(self.band_hz) {
            return bad("band_hz must be an increasing range");
        }
        if self.comb_harmonics < 1 {
            return bad("comb_harmonics must be >= 1");
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return bad("duty must be in (0, 1)");
        }
        if !(self.current_ripple_ratio > 0.0 && self.voltage_ripple_ratio > 0.0) {
            return bad("ripple ratios must be > 0");
        }
        if self.grid_points < 3 || self.grid_points.is_multiple_of(2) {
            return bad("grid_points must be odd and >= 3");
        }
        if !(self.initial_span > 1.0) || !(self.span_shrink > 0.0 && self.span_shrink <= 1.0) {
            return bad("initial_span must be > 1 and span_shrink in (0, 1]");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1");
        }
        self.sim_config()
            .validate()
            .map_err(|e| FitError::InvalidConfig(e.to_string()))?;
        self.initial
            .validate()
            .map_err(|e| FitError::InvalidConfig(e.to_string()))
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            time_step: TimeStep::StepsPerPeriod(self.steps_per_period),
            total_cycles: self.total_cycles,
            capture_cycles: self.capture_cycles,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub stage: String,
    pub params: BuckParams,
    /// Best loss so far, so the sequence never increases.
    pub loss_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedPeak {
    pub freq_hz: f64,
    pub target_dbm: f64,
    pub fitted_dbm: f64,
    pub delta_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub params: BuckParams,
    pub fsw_hz: f64,
    pub loss_db: f64,
    pub initial_loss_db: Option<f64>,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub trace: Vec<TraceEntry>,
    pub matched_peaks: Vec<MatchedPeak>,
    /// Spectrum of the fitted model over the loss band; exported separately.
    #[serde(skip)]
    pub fitted_spectrum: Option<Spectrum>,
}

/// Mean power at `n * f`, n = 1..=N, where each term is the largest of the
/// nearest bin and its two neighbours. Terms beyond the spectrum are dropped.
fn comb_score(spec: &Spectrum, f: f64, harmonics: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0;
    for n in 1..=harmonics {
        let fh = n as f64 * f;
        if fh > spec.f_max() + 0.5 * spec.df_hz {
            break;
        }
        let k = spec.bin_of(fh);
        let lo = k.saturating_sub(1);
        let hi = (k + 1).min(spec.len() - 1);
        sum += spec.power_dbm[lo..=hi]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

fn check_covered(spec: &Spectrum, (lo, hi): (f64, f64)) -> Result<(), FitError> {
    let tol = 0.5 * spec.df_hz;
    if lo < spec.f0_hz - tol || hi > spec.f_max() + tol {
        return Err(FitError::NoCoverage {
            lo_hz: lo,
            hi_hz: hi,
        });
    }
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Switching frequency from the best harmonic comb in the search band.
///
/// Candidates are the bin frequencies inside the band; the winner is refined
/// by a parabola through its score and its neighbours' scores (at most half
/// a bin). Fails with [`FitError::NoCombFound`] unless the winning comb mean
/// beats the median bin by `comb_significance_db`.
pub fn estimate_fsw(spec: &Spectrum, cfg: &FitConfig) -> Result<f64, FitError> {
    check_covered(spec, cfg.fsw_search_band_hz)?;
    let (lo, hi) = cfg.fsw_search_band_hz;
    let bins = spec.bins_in(lo, hi);
    if bins.is_empty() {
        return Err(FitError::NoCoverage {
            lo_hz: lo,
            hi_hz: hi,
        });
    }
    let scores: Vec<(usize, f64)> = bins
        .filter_map(|k| Some((k, comb_score(spec, spec.freq(k), cfg.comb_harmonics)?)))
        .collect();
    let &(best_bin, best) = scores
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .ok_or(FitError::NoCoverage {
            lo_hz: lo,
            hi_hz: hi,
        })?;
    let floor = median(&spec.power_dbm);
    if best < floor + cfg.comb_significance_db {
        return Err(FitError::NoCombFound {
            best_dbm: best,
            floor_dbm: floor,
            required_db: cfg.comb_significance_db,
        });
    }
    let score_at = |k: usize| scores.iter().find(|(b, _)| *b == k).map(|(_, s)| *s);
    let offset = match (
        best_bin.checked_sub(1).and_then(score_at),
        score_at(best_bin + 1),
    ) {
        (Some(l), Some(r)) => {
            let denom = l - 2.0 * best + r;
            if denom < 0.0 {
                (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
        _ => 0.0,
    };
    Ok(spec.freq(best_bin) + offset * spec.df_hz)
}

/// L and C from the ripple assumptions.
pub fn design_lc(load_resistance: f64, fsw: f64, cfg: &FitConfig) -> (f64, f64) {
    let l = load_resistance * (1.0 - cfg.duty) / (cfg.current_ripple_ratio * fsw);
    let c = cfg.current_ripple_ratio / (8.0 * fsw * cfg.voltage_ripple_ratio * load_resistance);
    (l.clamp(L_RANGE.0, L_RANGE.1), c.clamp(C_RANGE.0, C_RANGE.1))
}

/// Bins of the target that enter the loss, and the floor both sides are
/// clipped to.
struct LossPlan {
    freqs: Vec<f64>,
    target: Vec<f64>,
    floor: f64,
    target_df: f64,
    /// Window for candidate spectra: the target's own when it was simulated,
    /// rectangular for measurements (their fine grid hides the difference).
    window: Window,
}

impl LossPlan {
    fn new(target: &Spectrum, cfg: &FitConfig) -> Result<LossPlan, FitError> {
        check_covered(target, cfg.band_hz)?;
        let (lo, hi) = cfg.band_hz;
        let band = target.bins_in(lo, hi);
        if band.is_empty() {
            return Err(FitError::NoCoverage {
                lo_hz: lo,
                hi_hz: hi,
            });
        }
        let floor = median(&target.power_dbm[band.clone()]).max(cfg.loss_floor_dbm);
        let mut bins: Vec<usize> = find_peaks(target, f64::NEG_INFINITY, DEFAULT_MIN_PROMINENCE_DB)
            .into_iter()
            .map(|p| p.bin_index)
            .filter(|k| band.contains(k))
            .collect();
        let span = band.len();
        let k_base = cfg.baseline_bins.min(span);
        for j in 0..k_base {
            bins.push(band.start + (j * span + span / 2) / k_base.max(1));
        }
        bins.sort_unstable();
        bins.dedup();
        Ok(LossPlan {
            freqs: bins.iter().map(|&k| target.freq(k)).collect(),
            target: bins
                .iter()
                .map(|&k| target.power_dbm[k].max(floor))
                .collect(),
            floor,
            target_df: target.df_hz,
            window: match target.source {
                SpectrumSource::Simulated => target.window,
                SpectrumSource::Measured => Window::Rectangular,
            },
        })
    }

    fn simulated_at(&self, sim: &Spectrum, f: f64) -> f64 {
        self.raw_at(sim, f).max(self.floor)
    }

    fn raw_at(&self, sim: &Spectrum, f: f64) -> f64 {
        let half = 0.5 * self.target_df.max(sim.df_hz);
        sim.max_in(f - half, f + half)
    }

    fn loss_of(&self, raw: &[f64], offset_db: f64) -> f64 {
        let sum: f64 = raw
            .iter()
            .zip(&self.target)
            .map(|(s, t)| {
                let d = (s + offset_db).max(self.floor) - t;
                d * d
            })
            .sum();
        (sum / raw.len() as f64).sqrt()
    }

    fn loss(&self, sim: &Spectrum) -> f64 {
        let raw: Vec<f64> = self.freqs.iter().map(|f| self.raw_at(sim, *f)).collect();
        self.loss_of(&raw, 0.0)
    }

    /// Uniform dB shift of `sim` that best matches the target: a coarse scan
    /// followed by golden-section refinement.
    fn best_offset(&self, sim: &Spectrum) -> f64 {
        let raw: Vec<f64> = self.freqs.iter().map(|f| self.raw_at(sim, *f)).collect();
        let f = |o: f64| self.loss_of(&raw, o);
        let mut best = (0.0, f(0.0));
        for j in -OFFSET_SCAN_STEPS..=OFFSET_SCAN_STEPS {
            let o = j as f64 * OFFSET_SCAN_DB;
            let l = f(o);
            if l < best.1 {
                best = (o, l);
            }
        }
        let (mut a, mut b) = (best.0 - OFFSET_SCAN_DB, best.0 + OFFSET_SCAN_DB);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..40 {
            let (x1, x2) = (b - r * (b - a), a + r * (b - a));
            if f(x1) <= f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        let o = 0.5 * (a + b);
        if f(o) < best.1 {
            o
        } else {
            best.0
        }
    }
}

fn simulate(params: &BuckParams, cfg: &FitConfig, window: Window) -> Result<Spectrum, String> {
    let netlist = buck_template(params, "sup").map_err(|e| e.to_string())?;
    let t = run_transient(&netlist, &cfg.sim_config()).map_err(|e| e.to_string())?;
    let w = &t.waveforms;
    let spec_cfg = SpectrumConfig {
        window,
        ..SpectrumConfig::default()
    };
    spectrum(
        w.signal("i_supply").expect("template probe"),
        w.dt,
        &spec_cfg,
    )
    .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Knob {
    Vsupply,
    Load,
    EsrL,
    EsrC,
}

impl Knob {
    const ALL: [Knob; 4] = [Knob::Vsupply, Knob::Load, Knob::EsrL, Knob::EsrC];

    fn name(self) -> &'static str {
        match self {
            Knob::Vsupply => "vsupply",
            Knob::Load => "load_resistance",
            Knob::EsrL => "esr_l",
            Knob::EsrC => "esr_c",
        }
    }

    fn get(self, p: &BuckParams) -> f64 {
        match self {
            Knob::Vsupply => p.vsupply,
            Knob::Load => p.load_resistance,
            Knob::EsrL => p.esr_l,
            Knob::EsrC => p.esr_c,
        }
    }

    fn set(self, p: &BuckParams, v: f64, cfg: &FitConfig) -> BuckParams {
        let mut q = *p;
        match self {
            Knob::Vsupply => q.vsupply = v.clamp(VSUPPLY_RANGE.0, VSUPPLY_RANGE.1),
            Knob::Load => {
                q.load_resistance = v.clamp(1e-3, MAX_RESISTANCE_OHMS);
                (q.inductance, q.capacitance) = design_lc(q.load_resistance, q.fsw, cfg);
            }
            Knob::EsrL => q.esr_l = v.clamp(0.0, MAX_RESISTANCE_OHMS),
            Knob::EsrC => q.esr_c = v.clamp(0.0, MAX_RESISTANCE_OHMS),
        }
        q
    }

    /// Candidate values around `center`; series resistances also try zero.
    fn grid(self, center: f64, span: f64, points: usize, p: &BuckParams) -> Vec<f64> {
        let half = (points / 2) as i32;
        let esr = matches!(self, Knob::EsrL | Knob::EsrC);
        // A zero ESR has no scale; search around a small fraction of the load.
        let base = if esr && center <= 0.0 {
            1e-3 * p.load_resistance
        } else {
            center
        };
        let mut v: Vec<f64> = (-half..=half)
            .map(|j| base * span.powf(j as f64 / half as f64))
            .collect();
        if esr {
            v.insert(0, 0.0);
        }
        v
    }
}

struct Search<'a> {
    cfg: &'a FitConfig,
    plan: LossPlan,
    evaluations: usize,
    failures: usize,
    last_error: Option<String>,
}

impl Search<'_> {
    /// Scores the candidates in order; failed simulations score infinity.
    /// With supply rescaling on, each candidate's supply voltage is first
    /// moved so that its spectrum sits at the best uniform offset, then it is
    /// simulated again, so every reported loss comes from a real simulation.
    fn evaluate(&mut self, candidates: &[BuckParams]) -> Vec<(BuckParams, f64)> {
        let cfg = self.cfg;
        let plan = &self.plan;
        let results: Vec<Result<(BuckParams, Spectrum), String>> = candidates
            .par_iter()
            .map(|p| {
                let s = simulate(p, cfg, plan.window)?;
                if !cfg.rescale_supply {
                    return Ok((*p, s));
                }
                let scale = 10f64.powf(plan.best_offset(&s) / 20.0);
                let q = Knob::Vsupply.set(p, p.vsupply * scale, cfg);
                if q == *p {
                    return Ok((q, s));
                }
                Ok((q, simulate(&q, cfg, plan.window)?))
            })
            .collect();
        self.evaluations += candidates.len();
        results
            .into_iter()
            .zip(candidates)
            .map(|(r, p)| match r {
                Ok((q, s)) => (q, self.plan.loss(&s)),
                Err(e) => {
                    log::debug!("candidate {p:?} failed: {e}");
                    self.failures += 1;
                    self.last_error = Some(e);
                    (*p, f64::INFINITY)
                }
            })
            .collect()
    }
}

/// Fits the buck model to `target`.
pub fn fit_appliance(target: &Spectrum, cfg: &FitConfig) -> Result<FitReport, FitError> {
    cfg.validate()?;
    let fsw = estimate_fsw(target, cfg)?;
    let plan = LossPlan::new(target, cfg)?;
    let mut search = Search {
        cfg,
        plan,
        evaluations: 0,
        failures: 0,
        last_error: None,
    };

    let mut best = BuckParams {
        fsw,
        duty: cfg.duty,
        line_resistance: 0.0,
        ..cfg.initial
    };
    (best.inductance, best.capacitance) = design_lc(best.load_resistance, fsw, cfg);
    let finite = |l: f64| l.is_finite().then_some(l);
    let mut best_loss = match simulate(&best, cfg, search.plan.window) {
        Ok(s) => search.plan.loss(&s),
        Err(e) => {
            log::debug!("initial params failed: {e}");
            f64::INFINITY
        }
    };
    search.evaluations += 1;
    let initial_loss = finite(best_loss);
    let mut trace = vec![TraceEntry {
        stage: "design".into(),
        params: best,
        loss_db: initial_loss,
    }];
    if cfg.rescale_supply {
        let (q, l) = search.evaluate(&[best])[0];
        if l < best_loss {
            (best, best_loss) = (q, l);
        }
        trace.push(TraceEntry {
            stage: "supply level".into(),
            params: best,
            loss_db: finite(best_loss),
        });
    }

    let mut span = cfg.initial_span;
    for iteration in 1..=cfg.max_iterations {
        let sweep_start = best_loss;
        for knob in Knob::ALL {
            let values = knob.grid(knob.get(&best), span, cfg.grid_points, &best);
            let candidates: Vec<BuckParams> =
                values.iter().map(|v| knob.set(&best, *v, cfg)).collect();
            // First strict improvement wins ties, so the result is order-stable.
            for (c, l) in search.evaluate(&candidates) {
                if l < best_loss {
                    best_loss = l;
                    best = c;
                }
            }
            trace.push(TraceEntry {
                stage: format!("sweep {iteration}: {}", knob.name()),
                params: best,
                loss_db: finite(best_loss),
            });
        }
        // A coarse sweep that finds nothing says little; only fine ones may stop early.
        let fine = span <= FINE_SPAN;
        span = span.powf(cfg.span_shrink);
        if fine && sweep_start.is_finite() && sweep_start - best_loss < cfg.convergence_tol_db {
            break;
        }
    }
    if !best_loss.is_finite() {
        return Err(FitError::AllCandidatesFailed(
            search
                .last_error
                .unwrap_or_else(|| "no candidates evaluated".into()),
        ));
    }

    let fitted = simulate(&best, cfg, search.plan.window).map_err(FitError::AllCandidatesFailed)?;
    let (lo, hi) = cfg.band_hz;
    let matched_peaks = find_peaks(target, f64::NEG_INFINITY, DEFAULT_MIN_PROMINENCE_DB)
        .into_iter()
        .filter(|p| p.freq_hz >= lo && p.freq_hz <= hi)
        .map(|p| {
            let fitted_dbm = search.plan.simulated_at(&fitted, p.freq_hz);
            let target_dbm = p.power_dbm.max(search.plan.floor);
            MatchedPeak {
                freq_hz: p.freq_hz,
                target_dbm,
                fitted_dbm,
                delta_db: fitted_dbm - target_dbm,
            }
        })
        .collect();
    Ok(FitReport {
        params: best,
        fsw_hz: fsw,
        loss_db: best_loss,
        initial_loss_db: initial_loss,
        evaluations: search.evaluations,
        failed_evaluations: search.failures,
        trace,
        matched_peaks,
        fitted_spectrum: fitted.crop(lo, hi).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_equations_reproduce_router() {
        let (l, c) = design_lc(1000.0, 100e3, &FitConfig::default());
        assert!((l - 2.5e-6).abs() < 1e-18);
        assert!((c - 5e-6).abs() < 1e-18);
    }

    #[test]
    fn comb_on_synthetic_lines() {
        let mut p = vec![-120.0; 1000];
        for n in 1..=9 {
            p[n * 73] = -40.0 - n as f64;
        }
        let s = Spectrum::measured(0.0, 1e3, p).unwrap();
        let f = estimate_fsw(&s, &FitConfig::default()).unwrap();
        assert!((f - 73e3).abs() <= 1e3, "{f}");
        // Uniform offsets do not move the estimate.
        let mut shifted = s.clone();
        shifted.power_dbm.iter_mut().for_each(|v| *v += 6.0);
        assert_eq!(estimate_fsw(&shifted, &FitConfig::default()).unwrap(), f);
    }

    #[test]
    fn flat_spectrum_has_no_comb() {
        let p: Vec<f64> = (0..2000)
            .map(|k| -90.0 + ((k * 37) % 11) as f64 * 0.3)
            .collect();
        let s = Spectrum::measured(0.0, 500.0, p).unwrap();
        assert!(matches!(
            estimate_fsw(&s, &FitConfig::default()),
            Err(FitError::NoCombFound { .. })
        ));
    }

    #[test]
    fn config_checks() {
        let c = FitConfig {
            grid_points: 4,
            ..FitConfig::default()
        };
        assert!(c.validate().is_err());
        let c = FitConfig {
            steps_per_period: 8,
            ..FitConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(FitConfig::default().validate().is_ok());
    }

    #[test]
    fn esr_grid_includes_zero() {
        let p = BuckParams::router();
        let g = Knob::EsrL.grid(0.0, 10.0, 5, &p);
        assert_eq!(g[0], 0.0);
        assert_eq!(g.len(), 6);
        assert!((g[3] - 1.0).abs() < 1e-12);
    }
}
