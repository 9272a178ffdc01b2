//! Circuit data model for the appliance simulations.
//!
//! A [`Netlist`] is a flat list of two-terminal components connected between
//! named nodes, a single ground node and a list of named probes. Netlists are
//! validated on construction and immutable afterwards, so any `Netlist` value
//! in hand is simulatable.
//!
//! The textual format (see [`parse_netlist`]) is line oriented:
//!
//! ```text
//! # router appliance
//! .ground 0
//! V  Vsupply sup 0 v=0.05
//! SW S1 sup vdiode f=100k duty=0.5 phase=0
//! D  D1 0 vdiode
//! L  L1 vdiode vload l=2.5u esr=0
//! C  C1 vload 0 c=5u esr=0
//! R  Rload vload 0 r=1k
//! .probe i_supply i Vsupply
//! .probe v_vload v vload
//! ```

mod parse;
mod templates;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_netlist, parse_value, serialize_netlist};
pub use templates::{
    buck_template, bus_compose, emi_filter_template, with_front_end_filter, BuckParams,
    FilterFragment, FilterParams, DEFAULT_FILTER_IMPEDANCE_OHMS,
};

/// Electrical behaviour of a component. Values are SI base units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ComponentKind {
    Resistor {
        ohms: f64,
    },
    Inductor {
        henries: f64,
        series_resistance_ohms: f64,
    },
    Capacitor {
        farads: f64,
        series_resistance_ohms: f64,
    },
    /// Ideal voltage source, `node_a` is the positive terminal.
    DcSource {
        volts: f64,
    },
    /// Ideal bidirectional switch driven by a free-running PWM signal.
    PwmSwitch {
        frequency_hz: f64,
        duty_fraction: f64,
        phase_fraction: f64,
    },
    /// Ideal diode, `node_a` is the anode.
    IdealDiode,
}

impl ComponentKind {
    /// Netlist keyword for this kind.
    pub fn keyword(&self) -> &'static str {
        match self {
            ComponentKind::Resistor { .. } => "R",
            ComponentKind::Inductor { .. } => "L",
            ComponentKind::Capacitor { .. } => "C",
            ComponentKind::DcSource { .. } => "V",
            ComponentKind::PwmSwitch { .. } => "SW",
            ComponentKind::IdealDiode => "D",
        }
    }

    fn validate(&self) -> Result<(), String> {
        fn positive(name: &str, v: f64) -> Result<(), String> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be finite and > 0, got {v}"))
            }
        }
        fn non_negative(name: &str, v: f64) -> Result<(), String> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be finite and >= 0, got {v}"))
            }
        }
        match *self {
            ComponentKind::Resistor { ohms } => positive("resistance", ohms),
            ComponentKind::Inductor {
                henries,
                series_resistance_ohms,
            } => {
                positive("inductance", henries)?;
                non_negative("series resistance", series_resistance_ohms)
            }
            ComponentKind::Capacitor {
                farads,
                series_resistance_ohms,
            } => {
                positive("capacitance", farads)?;
                non_negative("series resistance", series_resistance_ohms)
            }
            // A 0 V source is allowed so that quiescent circuits can be built.
            ComponentKind::DcSource { volts } => non_negative("source voltage", volts),
            ComponentKind::PwmSwitch {
                frequency_hz,
                duty_fraction,
                phase_fraction,
            } => {
                positive("switching frequency", frequency_hz)?;
                if !(duty_fraction > 0.0 && duty_fraction < 1.0) {
                    return Err(format!("duty must lie in (0, 1), got {duty_fraction}"));
                }
                if !(0.0..1.0).contains(&phase_fraction) {
                    return Err(format!("phase must lie in [0, 1), got {phase_fraction}"));
                }
                Ok(())
            }
            ComponentKind::IdealDiode => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    pub node_a: String,
    pub node_b: String,
}

impl Component {
    pub fn new(
        id: impl Into<String>,
        kind: ComponentKind,
        node_a: impl Into<String>,
        node_b: impl Into<String>,
    ) -> Self {
        Component {
            id: id.into(),
            kind,
            node_a: node_a.into(),
            node_b: node_b.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeKind {
    /// Branch current through a component, flowing from `node_a` to `node_b`.
    Current,
    /// Node voltage relative to ground.
    Voltage,
    /// Conduction state (1 or 0) of a switch or diode.
    State,
}

impl ProbeKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            ProbeKind::Current => "i",
            ProbeKind::Voltage => "v",
            ProbeKind::State => "state",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub kind: ProbeKind,
    pub target: String,
}

impl Probe {
    pub fn new(name: impl Into<String>, kind: ProbeKind, target: impl Into<String>) -> Self {
        Probe {
            name: name.into(),
            kind,
            target: target.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown component kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("duplicate component id `{0}`")]
    DuplicateId(String),
    #[error("duplicate probe name `{0}`")]
    DuplicateProbe(String),
    #[error("degenerate component `{0}`: both terminals on the same node")]
    DegenerateComponent(String),
    #[error("invalid value for component `{id}`: {message}")]
    InvalidValue { id: String, message: String },
    #[error("floating node `{0}`: not connected to ground")]
    FloatingNode(String),
    #[error("missing ground node declaration")]
    MissingGround,
    #[error("more than one ground node declared")]
    MultipleGround,
    #[error("netlist declares no probe")]
    MissingProbe,
    #[error("netlist contains no DC source")]
    MissingSource,
    #[error("probe `{probe}` refers to unknown target `{target}`")]
    UnknownProbeTarget { probe: String, target: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A validated circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Netlist {
    components: Vec<Component>,
    ground: String,
    probes: Vec<Probe>,
}

impl Netlist {
    pub fn new(
        components: Vec<Component>,
        ground: impl Into<String>,
        probes: Vec<Probe>,
    ) -> Result<Self, NetlistError> {
        let netlist = Netlist {
            components,
            ground: ground.into(),
            probes,
        };
        netlist.validate()?;
        Ok(netlist)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn ground(&self) -> &str {
        &self.ground
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    /// All node names, ground included, in sorted order.
    pub fn nodes(&self) -> BTreeSet<&str> {
        let mut nodes: BTreeSet<&str> = self
            .components
            .iter()
            .flat_map(|c| [c.node_a.as_str(), c.node_b.as_str()])
            .collect();
        nodes.insert(self.ground.as_str());
        nodes
    }

    /// Number of components of each keyword, e.g. `{"R": 1, "SW": 1, ..}`.
    pub fn kind_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        for c in &self.components {
            *counts.entry(c.kind.keyword()).or_insert(0) += 1;
        }
        counts
    }

    pub fn switch_frequencies(&self) -> Vec<f64> {
        self.components
            .iter()
            .filter_map(|c| match c.kind {
                ComponentKind::PwmSwitch { frequency_hz, .. } => Some(frequency_hz),
                _ => None,
            })
            .collect()
    }

    fn validate(&self) -> Result<(), NetlistError> {
        if self.ground.is_empty() {
            return Err(NetlistError::MissingGround);
        }
        let mut ids = HashSet::new();
        for c in &self.components {
            if !ids.insert(c.id.as_str()) {
                return Err(NetlistError::DuplicateId(c.id.clone()));
            }
            if c.node_a == c.node_b {
                return Err(NetlistError::DegenerateComponent(c.id.clone()));
            }
            c.kind
                .validate()
                .map_err(|message| NetlistError::InvalidValue {
                    id: c.id.clone(),
                    message,
                })?;
        }
        if !self
            .components
            .iter()
            .any(|c| matches!(c.kind, ComponentKind::DcSource { .. }))
        {
            return Err(NetlistError::MissingSource);
        }
        self.check_connectivity()?;

        if self.probes.is_empty() {
            return Err(NetlistError::MissingProbe);
        }
        let nodes = self.nodes();
        let mut names = HashSet::new();
        for p in &self.probes {
            if !names.insert(p.name.as_str()) {
                return Err(NetlistError::DuplicateProbe(p.name.clone()));
            }
            let ok = match p.kind {
                ProbeKind::Voltage => nodes.contains(p.target.as_str()),
                ProbeKind::Current => self.component(&p.target).is_some(),
                ProbeKind::State => matches!(
                    self.component(&p.target).map(|c| c.kind),
                    Some(ComponentKind::PwmSwitch { .. }) | Some(ComponentKind::IdealDiode)
                ),
            };
            if !ok {
                return Err(NetlistError::UnknownProbeTarget {
                    probe: p.name.clone(),
                    target: p.target.clone(),
                });
            }
        }
        Ok(())
    }

    fn check_connectivity(&self) -> Result<(), NetlistError> {
        let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for c in &self.components {
            adjacency.entry(&c.node_a).or_default().push(&c.node_b);
            adjacency.entry(&c.node_b).or_default().push(&c.node_a);
        }
        if !adjacency.contains_key(self.ground.as_str()) {
            return Err(NetlistError::FloatingNode(self.ground.clone()));
        }
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([self.ground.as_str()]);
        seen.insert(self.ground.as_str());
        while let Some(node) = queue.pop_front() {
            for &next in &adjacency[node] {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        match adjacency.keys().find(|n| !seen.contains(*n)) {
            Some(n) => Err(NetlistError::FloatingNode(n.to_string())),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_netlist(self))
    }
}
