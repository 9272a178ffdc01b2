//! Fixed-step transient simulation of piecewise-linear switched circuits.
//!
//! The circuit is written in modified nodal form. Voltage sources, inductors,
//! capacitors, switches and diodes each carry a branch-current unknown, so
//! ideal switches and diodes are exact: a closed switch or conducting diode
//! pins its terminal voltages together, an open one pins its current to zero.
//! Every (switch, diode, integration rule) combination is a linear system that
//! is factored once and cached.
//!
//! Inductors and capacitors use trapezoidal companion models. Steps that
//! contain a switch or diode transition, and a configurable number of steps
//! after one, fall back to backward Euler, which damps the spurious
//! alternation trapezoidal integration shows after a discontinuity.
//!
//! Diode states are resolved inside every step by flipping the most violated
//! diode until the complementarity conditions hold:
//! conducting ⇒ current ≥ 0, blocking ⇒ forward voltage ≤ 0.
//!
//! Switch edges sit exactly on the time grid: the fastest switching period is
//! split into `steps_per_period` steps and every other switch period must be
//! an integer number of steps.

mod lu;
mod period;
mod steady;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{ComponentKind, Netlist, ProbeKind};
use lu::Lu;
pub use period::{common_period, RATIO_TOLERANCE};
pub use steady::{cycle_difference, detect_steady_state};

/// Smallest supported grid resolution per fastest switching period.
pub const MIN_STEPS_PER_PERIOD: usize = 64;
pub const DEFAULT_STEPS_PER_PERIOD: usize = 512;
/// Tolerance used for the diode complementarity conditions (A and V).
pub const COMPLEMENTARITY_EPS: f64 = 1e-9;
const MAX_STEPS_PER_COMMON_PERIOD: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("netlist has no PWM switch, so no switching period is defined")]
    NoSwitch,
    #[error("switch frequencies {fastest_hz} Hz and {other_hz} Hz are incommensurate")]
    Incommensurate { fastest_hz: f64, other_hz: f64 },
    #[error("switch `{id}` period is not an integer number of time steps ({steps} steps)")]
    OffGrid { id: String, steps: f64 },
    #[error("common period needs {0} steps, which is too long to simulate")]
    CommonPeriodTooLong(u128),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("singular circuit matrix at t = {time_s} s (switch/diode state leaves the circuit undetermined)")]
    Singular { time_s: f64 },
    #[error("diode states did not converge within {flips} flips at t = {time_s} s")]
    DiodeOscillation { time_s: f64, flips: usize },
}

/// How the time step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeStep {
    /// Divide the fastest switching period into this many steps.
    StepsPerPeriod(usize),
    /// Explicit step in seconds; every switch period must be a whole number of steps.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub time_step: TimeStep,
    /// Upper bound on simulated common periods, settling included.
    pub total_cycles: usize,
    pub settle_tolerance: f64,
    /// Common periods recorded once steady state is reached.
    pub capture_cycles: usize,
    pub max_diode_flips_per_step: usize,
    /// Backward-Euler steps taken from each switching event onwards (≥ 1).
    pub be_steps_after_event: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            time_step: TimeStep::StepsPerPeriod(DEFAULT_STEPS_PER_PERIOD),
            total_cycles: 5000,
            settle_tolerance: 1e-6,
            capture_cycles: 10,
            max_diode_flips_per_step: 4,
            be_steps_after_event: 2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        match self.time_step {
            TimeStep::StepsPerPeriod(n) if n < MIN_STEPS_PER_PERIOD => {
                return bad(format!(
                    "steps_per_period must be >= {MIN_STEPS_PER_PERIOD}, got {n}"
                ))
            }
            TimeStep::Fixed(dt) if !(dt.is_finite() && dt > 0.0) => {
                return bad(format!("dt must be > 0, got {dt}"))
            }
            _ => {}
        }
        if self.capture_cycles < 1 {
            return bad("capture_cycles must be >= 1".into());
        }
        if self.total_cycles < self.capture_cycles {
            return bad(format!(
                "total_cycles ({}) must be >= capture_cycles ({})",
                self.total_cycles, self.capture_cycles
            ));
        }
        if !(self.settle_tolerance >= 0.0) {
            return bad("settle_tolerance must be >= 0".into());
        }
        if self.be_steps_after_event < 1 {
            return bad("be_steps_after_event must be >= 1".into());
        }
        Ok(())
    }
}

/// Uniformly sampled probe signals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waveforms {
    pub dt: f64,
    /// Time of the first sample.
    pub t0: f64,
    /// Fastest switching period.
    pub switch_period: f64,
    pub common_period: f64,
    pub signals: BTreeMap<String, Vec<f64>>,
}

impl Waveforms {
    pub fn len(&self) -> usize {
        self.signals.values().next().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn signal(&self, name: &str) -> Option<&[f64]> {
        self.signals.get(name).map(Vec::as_slice)
    }

    /// `t_s,<probe>...` with one row per sample, columns sorted by probe name.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s");
        for name in self.signals.keys() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        let columns: Vec<&Vec<f64>> = self.signals.values().collect();
        for i in 0..self.len() {
            let _ = write!(out, "{:e}", self.t0 + i as f64 * self.dt);
            for col in &columns {
                let _ = write!(out, ",{:e}", col[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Diagnostics of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub dt: f64,
    pub steps_per_common_period: usize,
    pub cycles_simulated: usize,
    /// First common period whose change from the previous one fell below the
    /// settle tolerance; `None` when the run ended unsettled.
    pub settled_cycle: Option<usize>,
    pub final_cycle_difference: f64,
    /// Largest |on_steps / period_steps - duty| over all switches.
    pub duty_quantization_error: f64,
    /// Largest complementarity violation over every accepted step.
    pub max_complementarity_residual: f64,
    pub max_diode_flips: usize,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transient {
    pub waveforms: Waveforms,
    pub report: SimReport,
}

#[derive(Debug, Clone, Copy)]
struct Schedule {
    period_steps: usize,
    on_steps: usize,
    phase_steps: usize,
}

impl Schedule {
    fn is_on(&self, step: usize) -> bool {
        let p = self.period_steps;
        (step % p + p - self.phase_steps) % p < self.on_steps
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Resistor { g: f64 },
    Source { volts: f64 },
    Inductor { l: f64, r: f64 },
    Capacitor { c: f64, r: f64 },
    Switch { slot: usize },
    Diode { slot: usize },
}

#[derive(Debug, Clone, Copy)]
struct Element {
    a: Option<usize>,
    b: Option<usize>,
    branch: Option<usize>,
    kind: Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Rule {
    BackwardEuler,
    Trapezoidal,
}

#[derive(Debug, Clone, Copy)]
enum ProbeSource {
    Node(Option<usize>),
    Branch(usize),
    Resistor(usize),
    SwitchState(usize),
    DiodeState(usize),
}

/// Netlist lowered to index form.
struct Circuit {
    n: usize,
    elements: Vec<Element>,
    schedules: Vec<Schedule>,
    diodes: Vec<usize>,
    reactive: Vec<usize>,
    probes: Vec<(String, ProbeSource)>,
}

impl Circuit {
    fn lower(netlist: &Netlist, schedules: Vec<Schedule>) -> Circuit {
        let node_index: BTreeMap<&str, usize> = netlist
            .nodes()
            .into_iter()
            .filter(|n| *n != netlist.ground())
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect();
        let n_nodes = node_index.len();
        let mut n_branches = 0;
        let mut n_switches = 0;
        let mut diodes = Vec::new();
        let mut reactive = Vec::new();
        let mut elements = Vec::new();
        for (idx, c) in netlist.components().iter().enumerate() {
            let mut branch = || {
                n_branches += 1;
                Some(n_branches - 1)
            };
            let (kind, branch) = match c.kind {
                ComponentKind::Resistor { ohms } => (Kind::Resistor { g: 1.0 / ohms }, None),
                ComponentKind::DcSource { volts } => (Kind::Source { volts }, branch()),
                ComponentKind::Inductor {
                    henries,
                    series_resistance_ohms,
                } => {
                    reactive.push(idx);
                    (
                        Kind::Inductor {
                            l: henries,
                            r: series_resistance_ohms,
                        },
                        branch(),
                    )
                }
                ComponentKind::Capacitor {
                    farads,
                    series_resistance_ohms,
                } => {
                    reactive.push(idx);
                    (
                        Kind::Capacitor {
                            c: farads,
                            r: series_resistance_ohms,
                        },
                        branch(),
                    )
                }
                ComponentKind::PwmSwitch { .. } => {
                    n_switches += 1;
                    (
                        Kind::Switch {
                            slot: n_switches - 1,
                        },
                        branch(),
                    )
                }
                ComponentKind::IdealDiode => {
                    diodes.push(idx);
                    (
                        Kind::Diode {
                            slot: diodes.len() - 1,
                        },
                        branch(),
                    )
                }
            };
            elements.push(Element {
                a: node_index.get(c.node_a.as_str()).copied(),
                b: node_index.get(c.node_b.as_str()).copied(),
                branch: branch.map(|b| n_nodes + b),
                kind,
            });
        }
        let probes = netlist
            .probes()
            .iter()
            .map(|p| {
                let source = match p.kind {
                    ProbeKind::Voltage => {
                        ProbeSource::Node(node_index.get(p.target.as_str()).copied())
                    }
                    ProbeKind::Current | ProbeKind::State => {
                        let idx = netlist
                            .components()
                            .iter()
                            .position(|c| c.id == p.target)
                            .expect("validated probe target");
                        let e = elements[idx];
                        match (p.kind, e.kind) {
                            (ProbeKind::State, Kind::Switch { slot }) => {
                                ProbeSource::SwitchState(slot)
                            }
                            (ProbeKind::State, Kind::Diode { slot }) => {
                                ProbeSource::DiodeState(slot)
                            }
                            (_, Kind::Resistor { .. }) => ProbeSource::Resistor(idx),
                            _ => ProbeSource::Branch(e.branch.expect("branch element")),
                        }
                    }
                };
                (p.name.clone(), source)
            })
            .collect();
        Circuit {
            n: n_nodes + n_branches,
            elements,
            schedules,
            diodes,
            reactive,
            probes,
        }
    }

    fn matrix(&self, switches: u64, diodes: u64, rule: Rule, dt: f64) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        let mut add = |r: Option<usize>, c: Option<usize>, v: f64| {
            if let (Some(r), Some(c)) = (r, c) {
                a[r * n + c] += v;
            }
        };
        for e in &self.elements {
            if let Kind::Resistor { g } = e.kind {
                add(e.a, e.a, g);
                add(e.b, e.b, g);
                add(e.a, e.b, -g);
                add(e.b, e.a, -g);
                continue;
            }
            let k = e.branch;
            add(e.a, k, 1.0);
            add(e.b, k, -1.0);
            let conducting = match e.kind {
                Kind::Switch { slot } => switches >> slot & 1 == 1,
                Kind::Diode { slot } => diodes >> slot & 1 == 1,
                _ => true,
            };
            if !conducting {
                add(k, k, 1.0);
                continue;
            }
            add(k, e.a, 1.0);
            add(k, e.b, -1.0);
            let z = match (e.kind, rule) {
                (Kind::Inductor { l, r }, Rule::BackwardEuler) => r + l / dt,
                (Kind::Inductor { l, r }, Rule::Trapezoidal) => r + 2.0 * l / dt,
                (Kind::Capacitor { c, r }, Rule::BackwardEuler) => r + dt / c,
                (Kind::Capacitor { c, r }, Rule::Trapezoidal) => r + dt / (2.0 * c),
                _ => 0.0,
            };
            add(k, k, -z);
        }
        a
    }
}

/// Per reactive element: branch current and the voltage across the ideal
/// L or C part at the last accepted step.
#[derive(Debug, Clone, Copy, Default)]
struct History {
    current: f64,
    voltage: f64,
}

struct Stepper<'a> {
    circuit: &'a Circuit,
    cfg: &'a SimConfig,
    dt: f64,
    cache: HashMap<(u64, u64, Rule), Option<Lu>>,
    history: Vec<History>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    diodes: u64,
    max_residual: f64,
    max_flips: usize,
}

impl<'a> Stepper<'a> {
    fn node_voltage(&self, node: Option<usize>) -> f64 {
        node.map_or(0.0, |i| self.x[i])
    }

    fn fill_rhs(&mut self, switches: u64, diodes: u64, rule: Rule) {
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
        let dt = self.dt;
        let mut hist = self.history.iter();
        for e in &self.circuit.elements {
            let Some(k) = e.branch else { continue };
            let conducting = match e.kind {
                Kind::Switch { slot } => switches >> slot & 1 == 1,
                Kind::Diode { slot } => diodes >> slot & 1 == 1,
                _ => true,
            };
            let value = match e.kind {
                Kind::Source { volts } => volts,
                Kind::Inductor { l, .. } => {
                    let h = hist.next().expect("history");
                    match rule {
                        Rule::BackwardEuler => -(l / dt) * h.current,
                        Rule::Trapezoidal => -(2.0 * l / dt) * h.current - h.voltage,
                    }
                }
                Kind::Capacitor { c, .. } => {
                    let h = hist.next().expect("history");
                    match rule {
                        Rule::BackwardEuler => h.voltage,
                        Rule::Trapezoidal => h.voltage + dt / (2.0 * c) * h.current,
                    }
                }
                _ => 0.0,
            };
            self.rhs[k] = if conducting { value } else { 0.0 };
        }
    }

    /// Solves one step for the given switch state, resolving diode states.
    /// Returns the accepted diode state.
    fn solve(&mut self, switches: u64, rule: Rule, time_s: f64) -> Result<u64, EngineError> {
        let mut diodes = self.diodes;
        let mut reset_tried = false;
        let mut flips = 0;
        loop {
            let key = (switches, diodes, rule);
            if !self.cache.contains_key(&key) {
                let m = self.circuit.matrix(switches, diodes, rule, self.dt);
                self.cache.insert(key, Lu::factor(m, self.circuit.n));
            }
            self.fill_rhs(switches, diodes, rule);
            let lu = self.cache[&key].as_ref();
            let Some(lu) = lu else {
                // A conducting diode can short a just-closed switch; retry from all-blocking.
                if reset_tried || diodes == 0 {
                    return Err(EngineError::Singular { time_s });
                }
                reset_tried = true;
                diodes = 0;
                flips += 1;
                continue;
            };
            lu.solve(&self.rhs, &mut self.x);

            let mut worst: Option<(usize, f64)> = None;
            let mut residual: f64 = 0.0;
            for (slot, &idx) in self.circuit.diodes.iter().enumerate() {
                let e = &self.circuit.elements[idx];
                let violation = if diodes >> slot & 1 == 1 {
                    -self.x[e.branch.expect("diode branch")]
                } else {
                    self.node_voltage(e.a) - self.node_voltage(e.b)
                };
                residual = residual.max(violation);
                if violation > COMPLEMENTARITY_EPS && worst.is_none_or(|(_, w)| violation > w) {
                    worst = Some((slot, violation));
                }
            }
            match worst {
                None => {
                    self.max_residual = self.max_residual.max(residual);
                    self.max_flips = self.max_flips.max(flips);
                    return Ok(diodes);
                }
                Some((slot, _)) => {
                    if flips >= self.cfg.max_diode_flips_per_step {
                        return Err(EngineError::DiodeOscillation { time_s, flips });
                    }
                    diodes ^= 1 << slot;
                    flips += 1;
                }
            }
        }
    }

    fn commit(&mut self) {
        for (h, &idx) in self.history.iter_mut().zip(&self.circuit.reactive) {
            let e = &self.circuit.elements[idx];
            let i = self.x[e.branch.expect("reactive branch")];
            let v = node(&self.x, e.a) - node(&self.x, e.b);
            let r = match e.kind {
                Kind::Inductor { r, .. } | Kind::Capacitor { r, .. } => r,
                _ => 0.0,
            };
            h.current = i;
            h.voltage = v - r * i;
        }
    }

    /// Inductor currents and capacitor voltages, in element order.
    fn state(&self) -> impl Iterator<Item = f64> + '_ {
        self.history
            .iter()
            .zip(&self.circuit.reactive)
            .map(|(h, &idx)| match self.circuit.elements[idx].kind {
                Kind::Inductor { .. } => h.current,
                _ => h.voltage,
            })
    }

    fn probe(&self, source: ProbeSource, switches: u64) -> f64 {
        match source {
            ProbeSource::Node(n) => self.node_voltage(n),
            ProbeSource::Branch(k) => self.x[k],
            ProbeSource::Resistor(idx) => {
                let e = &self.circuit.elements[idx];
                let Kind::Resistor { g } = e.kind else {
                    unreachable!()
                };
                g * (self.node_voltage(e.a) - self.node_voltage(e.b))
            }
            ProbeSource::SwitchState(slot) => (switches >> slot & 1) as f64,
            ProbeSource::DiodeState(slot) => (self.diodes >> slot & 1) as f64,
        }
    }
}

fn node(x: &[f64], n: Option<usize>) -> f64 {
    n.map_or(0.0, |i| x[i])
}

struct Grid {
    dt: f64,
    fastest_period: f64,
    common_steps: usize,
    schedules: Vec<Schedule>,
    duty_error: f64,
}

fn build_grid(netlist: &Netlist, time_step: TimeStep) -> Result<Grid, EngineError> {
    let (fastest, ratios) = period::period_ratios(netlist)?;
    let fastest_period = 1.0 / fastest;
    let dt = match time_step {
        TimeStep::StepsPerPeriod(n) => fastest_period / n as f64,
        TimeStep::Fixed(dt) => dt,
    };
    let switches = netlist
        .components()
        .iter()
        .filter(|c| matches!(c.kind, ComponentKind::PwmSwitch { .. }));
    let mut schedules = Vec::new();
    let mut duty_error: f64 = 0.0;
    let mut period_steps_all = Vec::new();
    for (c, ratio) in switches.zip(&ratios) {
        let ComponentKind::PwmSwitch {
            duty_fraction,
            phase_fraction,
            ..
        } = c.kind
        else {
            unreachable!()
        };
        let exact = match time_step {
            TimeStep::StepsPerPeriod(n) => {
                (n as u128 * ratio.num as u128) as f64 / ratio.den as f64
            }
            TimeStep::Fixed(dt) => fastest_period * ratio.num as f64 / ratio.den as f64 / dt,
        };
        let steps = exact.round();
        if steps < 2.0 || (exact - steps).abs() > 1e-6 * exact.max(1.0) {
            return Err(EngineError::OffGrid {
                id: c.id.clone(),
                steps: exact,
            });
        }
        let p = steps as usize;
        let on = ((duty_fraction * p as f64).round() as usize).clamp(1, p - 1);
        let phase = (phase_fraction * p as f64).round() as usize % p;
        duty_error = duty_error.max((on as f64 / p as f64 - duty_fraction).abs());
        schedules.push(Schedule {
            period_steps: p,
            on_steps: on,
            phase_steps: phase,
        });
        period_steps_all.push(p as u128);
    }
    let common = period_steps_all.iter().fold(1u128, |acc, &p| {
        let (mut a, mut b) = (acc, p);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        acc / a * p
    });
    if common > MAX_STEPS_PER_COMMON_PERIOD as u128 {
        return Err(EngineError::CommonPeriodTooLong(common));
    }
    Ok(Grid {
        dt,
        fastest_period,
        common_steps: common as usize,
        schedules,
        duty_error,
    })
}

/// Runs the circuit from a cold start (all states zero) until the
/// cycle-to-cycle change over one common switching period drops below
/// `settle_tolerance`, then records `capture_cycles` further common periods
/// (the settled one included).
///
/// If `total_cycles` is exhausted first, the last `capture_cycles` periods
/// are returned and [`SimReport::warning`] is set.
pub fn run_transient(netlist: &Netlist, cfg: &SimConfig) -> Result<Transient, EngineError> {
    cfg.validate()?;
    let grid = build_grid(netlist, cfg.time_step)?;
    let circuit = Circuit::lower(netlist, grid.schedules.clone());
    let n_steps = grid.common_steps;
    let mut stepper = Stepper {
        circuit: &circuit,
        cfg,
        dt: grid.dt,
        cache: HashMap::new(),
        history: vec![History::default(); circuit.reactive.len()],
        rhs: vec![0.0; circuit.n],
        x: vec![0.0; circuit.n],
        diodes: 0,
        max_residual: 0.0,
        max_flips: 0,
    };
    let n_probes = circuit.probes.len();
    let n_states = circuit.reactive.len();

    let mut captured: VecDeque<Vec<Vec<f64>>> = VecDeque::with_capacity(cfg.capture_cycles + 1);
    let mut previous_states: Option<Vec<Vec<f64>>> = None;
    let mut settled: Option<usize> = None;
    let mut last_difference = f64::INFINITY;
    let mut prev_switches: Option<u64> = None;
    let mut be_remaining = 0usize;
    let mut cycles = 0;

    for cycle in 0..cfg.total_cycles {
        let mut probes = vec![Vec::with_capacity(n_steps); n_probes];
        let mut states = vec![Vec::with_capacity(n_steps); n_states];
        for s in 0..n_steps {
            let step = cycle * n_steps + s;
            let time_s = (step + 1) as f64 * grid.dt;
            let switches = circuit
                .schedules
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, sch)| acc | (sch.is_on(s) as u64) << i);

            let switch_event = prev_switches != Some(switches);
            let rule = if switch_event || be_remaining > 0 {
                Rule::BackwardEuler
            } else {
                Rule::Trapezoidal
            };
            let mut diodes = stepper.solve(switches, rule, time_s)?;
            let mut event = switch_event;
            if diodes != stepper.diodes {
                event = true;
                if rule == Rule::Trapezoidal {
                    diodes = stepper.solve(switches, Rule::BackwardEuler, time_s)?;
                }
            }
            if event {
                be_remaining = cfg.be_steps_after_event - 1;
            } else {
                be_remaining = be_remaining.saturating_sub(1);
            }
            stepper.diodes = diodes;
            stepper.commit();
            prev_switches = Some(switches);

            for (buf, (_, src)) in probes.iter_mut().zip(&circuit.probes) {
                buf.push(stepper.probe(*src, switches));
            }
            for (buf, v) in states.iter_mut().zip(stepper.state()) {
                buf.push(v);
            }
        }
        cycles = cycle + 1;

        if captured.len() == cfg.capture_cycles {
            captured.pop_front();
        }
        captured.push_back(probes);

        if settled.is_none() {
            if let Some(prev) = &previous_states {
                last_difference = cycle_difference(prev, &states);
                if last_difference < cfg.settle_tolerance {
                    settled = Some(cycle);
                }
            }
            previous_states = Some(states);
        }
        if let Some(s) = settled {
            if cycle + 1 >= s + cfg.capture_cycles {
                break;
            }
        }
    }

    let warning = match settled {
        Some(_) => None,
        None => Some(format!(
            "steady state not reached within {} cycles (last cycle difference {:.3e}, tolerance {:.1e})",
            cfg.total_cycles, last_difference, cfg.settle_tolerance
        )),
    };
    if let Some(w) = &warning {
        log::warn!("{w}");
    }

    let first_cycle = cycles - captured.len();
    let mut signals = BTreeMap::new();
    for (p, (name, _)) in circuit.probes.iter().enumerate() {
        let samples: Vec<f64> = captured.iter().flat_map(|c| c[p].iter().copied()).collect();
        signals.insert(name.clone(), samples);
    }
    let waveforms = Waveforms {
        dt: grid.dt,
        t0: (first_cycle * n_steps + 1) as f64 * grid.dt,
        switch_period: grid.fastest_period,
        common_period: n_steps as f64 * grid.dt,
        signals,
    };
    let report = SimReport {
        dt: grid.dt,
        steps_per_common_period: n_steps,
        cycles_simulated: cycles,
        settled_cycle: settled,
        final_cycle_difference: last_difference,
        duty_quantization_error: grid.duty_error,
        max_complementarity_residual: stepper.max_residual,
        max_diode_flips: stepper.max_flips,
        warning,
    };
    Ok(Transient { waveforms, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{buck_template, parse_netlist, BuckParams};

    fn quick() -> SimConfig {
        SimConfig {
            time_step: TimeStep::StepsPerPeriod(64),
            total_cycles: 50,
            capture_cycles: 2,
            ..SimConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        let c = SimConfig {
            time_step: TimeStep::StepsPerPeriod(8),
            ..SimConfig::default()
        };
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("steps_per_period"));
        for c in [
            SimConfig {
                capture_cycles: 0,
                ..SimConfig::default()
            },
            SimConfig {
                total_cycles: 3,
                ..SimConfig::default()
            },
            SimConfig {
                time_step: TimeStep::Fixed(-1.0),
                ..SimConfig::default()
            },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn resistive_divider_with_switch() {
        // Switch chops 10 V into a 1:1 divider: 5 V while on, 0 while off.
        let n = parse_netlist(
            ".ground 0\nV V1 a 0 v=10\nSW S1 a b f=1k duty=0.25\nR R1 b c r=1k\nR R2 c 0 r=1k\n\
             .probe vc v c\n.probe s state S1\n.probe i i R1\n",
        )
        .unwrap();
        let t = run_transient(&n, &quick()).unwrap();
        let vc = t.waveforms.signal("vc").unwrap();
        let s = t.waveforms.signal("s").unwrap();
        assert_eq!(vc.len(), 128);
        assert_eq!(s.iter().filter(|v| **v == 1.0).count(), 32);
        for (v, on) in vc.iter().zip(s) {
            assert!((v - 5.0 * on).abs() < 1e-12);
        }
        assert_eq!(t.report.settled_cycle, Some(1));
    }

    #[test]
    fn rc_charging_matches_exponential() {
        // Switch always effectively on for the first steps; compare the
        // first cycle of an RC charge against 1 - exp(-t/RC).
        let n = parse_netlist(
            ".ground 0\nV V1 a 0 v=1\nSW S1 a b f=100 duty=0.99\nR R1 b c r=1k\nC C1 c 0 c=1u\n.probe vc v c\n",
        )
        .unwrap();
        let cfg = SimConfig {
            time_step: TimeStep::StepsPerPeriod(1000),
            total_cycles: 1,
            capture_cycles: 1,
            ..SimConfig::default()
        };
        let t = run_transient(&n, &cfg).unwrap();
        let vc = t.waveforms.signal("vc").unwrap();
        let dt = t.waveforms.dt;
        for k in [100usize, 500, 900] {
            let time = (k + 1) as f64 * dt;
            let exact = 1.0 - (-time / 1e-3).exp();
            assert!((vc[k] - exact).abs() < 1e-4, "k={k}: {} vs {exact}", vc[k]);
        }
    }

    #[test]
    fn zero_source_settles_at_first_comparison() {
        let mut p = BuckParams::router();
        p.vsupply = 1.0;
        let text = crate::netlist::serialize_netlist(&buck_template(&p, "sup").unwrap())
            .replace("v=1e0", "v=0e0");
        let n = parse_netlist(&text).unwrap();
        let t = run_transient(&n, &quick()).unwrap();
        assert_eq!(t.report.settled_cycle, Some(1));
        let mut cfg = quick();
        cfg.settle_tolerance = 0.0;
        let t = run_transient(&n, &cfg).unwrap();
        assert_eq!(t.report.settled_cycle, None);
        assert!(t.report.warning.is_some());
        assert_eq!(t.report.cycles_simulated, 50);
    }

    #[test]
    fn rejects_off_grid_switch() {
        let n = parse_netlist(
            ".ground 0\nV V1 a 0 v=1\nSW S1 a b f=100k duty=0.5\nSW S2 a c f=30k duty=0.5\n\
             R R1 b 0 r=1\nR R2 c 0 r=1\n.probe i i V1\n",
        )
        .unwrap();
        // 30 kHz period = 10/3 fast periods: not a whole number of 64-step grids.
        assert!(matches!(
            run_transient(&n, &quick()),
            Err(EngineError::OffGrid { .. })
        ));
        let cfg = SimConfig {
            time_step: TimeStep::StepsPerPeriod(96),
            ..quick()
        };
        assert!(run_transient(&n, &cfg).is_ok());
    }

    #[test]
    fn deterministic_bits() {
        let n = buck_template(&BuckParams::router(), "sup").unwrap();
        let a = run_transient(&n, &quick()).unwrap();
        let b = run_transient(&n, &quick()).unwrap();
        assert_eq!(a, b);
    }
}
