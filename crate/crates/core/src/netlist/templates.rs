//! Parameterized circuits: the buck-converter appliance, the front-end EMI
//! filter and the shared power-line bus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Component, ComponentKind, Netlist, NetlistError, Probe, ProbeKind};

pub const GROUND: &str = "0";
pub const DEFAULT_FILTER_IMPEDANCE_OHMS: f64 = 50.0;

/// Parameters of the simplified buck-converter appliance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuckParams {
    pub vsupply: f64,
    pub duty: f64,
    pub fsw: f64,
    pub inductance: f64,
    pub capacitance: f64,
    pub load_resistance: f64,
    #[serde(default)]
    pub esr_l: f64,
    #[serde(default)]
    pub esr_c: f64,
    #[serde(default)]
    pub line_resistance: f64,
}

impl BuckParams {
    /// The router model: 0.05 V supply, 50 % duty at 100 kHz,
    /// L = 2.5 µH, C = 5 µF, R = 1 kΩ.
    pub fn router() -> Self {
        BuckParams {
            vsupply: 0.05,
            duty: 0.5,
            fsw: 100e3,
            inductance: 2.5e-6,
            capacitance: 5e-6,
            load_resistance: 1000.0,
            esr_l: 0.0,
            esr_c: 0.0,
            line_resistance: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NetlistError> {
        let positive = [
            ("vsupply", self.vsupply),
            ("fsw", self.fsw),
            ("inductance", self.inductance),
            ("capacitance", self.capacitance),
            ("load_resistance", self.load_resistance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(NetlistError::InvalidParams(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("esr_l", self.esr_l),
            ("esr_c", self.esr_c),
            ("line_resistance", self.line_resistance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(NetlistError::InvalidParams(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(NetlistError::InvalidParams(format!(
                "duty must lie in (0, 1), got {}",
                self.duty
            )));
        }
        Ok(())
    }
}

/// Builds one appliance: supply → line resistance → S1 → vdiode → L → vload,
/// with a freewheel diode from ground to vdiode and C, R from vload to ground.
///
/// Probes: `i_supply` (source branch current, SPICE sign convention, so
/// current drawn from the supply is negative), `i_l`, `v_vdiode`, `v_vload`.
pub fn buck_template(params: &BuckParams, supply_node: &str) -> Result<Netlist, NetlistError> {
    params.validate()?;
    if [GROUND, "line", "vdiode", "vload", ""].contains(&supply_node) {
        return Err(NetlistError::InvalidParams(format!(
            "supply node name `{supply_node}` is reserved"
        )));
    }
    let mut components = vec![Component::new(
        "Vsupply",
        ComponentKind::DcSource {
            volts: params.vsupply,
        },
        supply_node,
        GROUND,
    )];
    let switch_in = if params.line_resistance > 0.0 {
        components.push(Component::new(
            "Rline",
            ComponentKind::Resistor {
                ohms: params.line_resistance,
            },
            supply_node,
            "line",
        ));
        "line"
    } else {
        supply_node
    };
    components.extend([
        Component::new(
            "S1",
            ComponentKind::PwmSwitch {
                frequency_hz: params.fsw,
                duty_fraction: params.duty,
                phase_fraction: 0.0,
            },
            switch_in,
            "vdiode",
        ),
        Component::new("D1", ComponentKind::IdealDiode, GROUND, "vdiode"),
        Component::new(
            "L1",
            ComponentKind::Inductor {
                henries: params.inductance,
                series_resistance_ohms: params.esr_l,
            },
            "vdiode",
            "vload",
        ),
        Component::new(
            "C1",
            ComponentKind::Capacitor {
                farads: params.capacitance,
                series_resistance_ohms: params.esr_c,
            },
            "vload",
            GROUND,
        ),
        Component::new(
            "Rload",
            ComponentKind::Resistor {
                ohms: params.load_resistance,
            },
            "vload",
            GROUND,
        ),
    ]);
    let probes = vec![
        Probe::new("i_supply", ProbeKind::Current, "Vsupply"),
        Probe::new("i_l", ProbeKind::Current, "L1"),
        Probe::new("v_vdiode", ProbeKind::Voltage, "vdiode"),
        Probe::new("v_vload", ProbeKind::Voltage, "vload"),
    ];
    Netlist::new(components, GROUND, probes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub cutoff_hz: f64,
    pub characteristic_impedance_ohms: f64,
}

impl FilterParams {
    pub fn new(cutoff_hz: f64) -> Self {
        FilterParams {
            cutoff_hz,
            characteristic_impedance_ohms: DEFAULT_FILTER_IMPEDANCE_OHMS,
        }
    }
}

/// Low-pass two-port built from one series inductor and a shunt capacitor of
/// the same value at each port, so it filters in both directions.
///
/// Terminals are the node names `line`, `device` and ground `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFragment {
    pub inductance: f64,
    pub capacitance: f64,
    pub components: Vec<Component>,
}

impl FilterFragment {
    pub const LINE: &'static str = "line";
    pub const DEVICE: &'static str = "device";

    pub fn cutoff_hz(&self) -> f64 {
        1.0 / (2.0 * PI * (self.inductance * self.capacitance).sqrt())
    }

    pub fn characteristic_impedance_ohms(&self) -> f64 {
        (self.inductance / self.capacitance).sqrt()
    }
}

/// Solves `1/(2π√(LC)) = fc` and `√(L/C) = Z0` for the filter elements.
pub fn emi_filter_template(params: &FilterParams) -> Result<FilterFragment, NetlistError> {
    let (fc, z0) = (params.cutoff_hz, params.characteristic_impedance_ohms);
    if !(fc.is_finite() && fc > 0.0 && z0.is_finite() && z0 > 0.0) {
        return Err(NetlistError::InvalidParams(format!(
            "filter cutoff and impedance must be > 0, got {fc} Hz, {z0} ohm"
        )));
    }
    let omega = 2.0 * PI * fc;
    let inductance = z0 / omega;
    let capacitance = 1.0 / (omega * z0);
    let cap = |id: &str, node: &str| {
        Component::new(
            id,
            ComponentKind::Capacitor {
                farads: capacitance,
                series_resistance_ohms: 0.0,
            },
            node,
            GROUND,
        )
    };
    let components = vec![
        cap("Cf_line", FilterFragment::LINE),
        Component::new(
            "Lf",
            ComponentKind::Inductor {
                henries: inductance,
                series_resistance_ohms: 0.0,
            },
            FilterFragment::LINE,
            FilterFragment::DEVICE,
        ),
        cap("Cf_dev", FilterFragment::DEVICE),
    ];
    Ok(FilterFragment {
        inductance,
        capacitance,
        components,
    })
}

fn single_source(netlist: &Netlist) -> Result<&Component, NetlistError> {
    let mut sources = netlist
        .components()
        .iter()
        .filter(|c| matches!(c.kind, ComponentKind::DcSource { .. }));
    match (sources.next(), sources.next()) {
        (Some(s), None) if s.node_b == netlist.ground() => Ok(s),
        _ => Err(NetlistError::InvalidParams(
            "appliance must contain exactly one DC source referenced to ground".into(),
        )),
    }
}

/// Inserts `filter` between an appliance's DC source and the rest of the
/// appliance. The source keeps its node; the appliance moves to `filter_out`.
pub fn with_front_end_filter(
    appliance: &Netlist,
    filter: &FilterFragment,
) -> Result<Netlist, NetlistError> {
    const DEVICE_NODE: &str = "filter_out";
    let source = single_source(appliance)?;
    let supply = source.node_a.clone();
    if appliance.nodes().contains(DEVICE_NODE) {
        return Err(NetlistError::InvalidParams(format!(
            "appliance already uses node `{DEVICE_NODE}`"
        )));
    }
    let ground = appliance.ground().to_string();
    let map_filter_node = |n: &str| match n {
        FilterFragment::LINE => supply.clone(),
        FilterFragment::DEVICE => DEVICE_NODE.to_string(),
        _ => ground.clone(),
    };
    let mut components = Vec::new();
    for c in appliance.components() {
        if c.id == source.id {
            components.push(c.clone());
            continue;
        }
        let remap = |n: &String| {
            if *n == supply {
                DEVICE_NODE.to_string()
            } else {
                n.clone()
            }
        };
        components.push(Component::new(
            c.id.clone(),
            c.kind,
            remap(&c.node_a),
            remap(&c.node_b),
        ));
    }
    for c in &filter.components {
        if appliance.component(&c.id).is_some() {
            return Err(NetlistError::DuplicateId(c.id.clone()));
        }
        components.push(Component::new(
            c.id.clone(),
            c.kind,
            map_filter_node(&c.node_a),
            map_filter_node(&c.node_b),
        ));
    }
    let probes = appliance
        .probes()
        .iter()
        .map(|p| {
            let target = if p.kind == ProbeKind::Voltage && p.target == supply {
                DEVICE_NODE.to_string()
            } else {
                p.target.clone()
            };
            Probe::new(p.name.clone(), p.kind, target)
        })
        .collect();
    Netlist::new(components, ground, probes)
}

/// Connects appliances to one shared DC source through a resistive bus.
///
/// `bus_resistances[0]` sits between the source and the first tap,
/// `bus_resistances[k]` between tap `k` and tap `k + 1`. Missing or zero
/// entries connect directly. Appliance `N` (1-based) has its nodes and ids
/// prefixed with `appN.`; its own source is replaced by the shared one,
/// whose voltage is taken from the first appliance.
pub fn bus_compose(
    appliances: &[Netlist],
    bus_resistances: &[f64],
) -> Result<Netlist, NetlistError> {
    if appliances.is_empty() {
        return Err(NetlistError::InvalidParams(
            "bus needs at least one appliance".into(),
        ));
    }
    if bus_resistances.len() > appliances.len() {
        return Err(NetlistError::InvalidParams(format!(
            "{} bus resistances given for {} appliances",
            bus_resistances.len(),
            appliances.len()
        )));
    }
    if let Some(r) = bus_resistances
        .iter()
        .find(|r| !(r.is_finite() && **r >= 0.0))
    {
        return Err(NetlistError::InvalidParams(format!(
            "bus resistance must be >= 0, got {r}"
        )));
    }
    let volts = match single_source(&appliances[0])?.kind {
        ComponentKind::DcSource { volts } => volts,
        _ => unreachable!(),
    };

    const SUPPLY: &str = "sup";
    let mut components = vec![Component::new(
        "Vsupply",
        ComponentKind::DcSource { volts },
        SUPPLY,
        GROUND,
    )];
    let mut probes = vec![Probe::new("i_supply", ProbeKind::Current, "Vsupply")];

    let mut tap = SUPPLY.to_string();
    for (k, appliance) in appliances.iter().enumerate() {
        let index = k + 1;
        let r = bus_resistances.get(k).copied().unwrap_or(0.0);
        if r > 0.0 {
            let next = format!("tap{index}");
            components.push(Component::new(
                format!("Rbus{index}"),
                ComponentKind::Resistor { ohms: r },
                tap.clone(),
                next.clone(),
            ));
            tap = next;
        }

        let source = single_source(appliance)?;
        if let ComponentKind::DcSource { volts: v } = source.kind {
            if v != volts {
                log::warn!("appliance {index} source of {v} V replaced by shared {volts} V source");
            }
        }
        let prefix = format!("app{index}.");
        let rename = |node: &str| {
            if node == appliance.ground() {
                GROUND.to_string()
            } else if node == source.node_a {
                tap.clone()
            } else {
                format!("{prefix}{node}")
            }
        };
        for c in appliance.components().iter().filter(|c| c.id != source.id) {
            components.push(Component::new(
                format!("{prefix}{}", c.id),
                c.kind,
                rename(&c.node_a),
                rename(&c.node_b),
            ));
        }
        for p in appliance.probes().iter().filter(|p| p.target != source.id) {
            let target = match p.kind {
                ProbeKind::Voltage => rename(&p.target),
                _ => format!("{prefix}{}", p.target),
            };
            probes.push(Probe::new(format!("{prefix}{}", p.name), p.kind, target));
        }
    }
    Netlist::new(components, GROUND, probes)
}
