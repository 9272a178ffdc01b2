//! Text format reader and writer.
//!
//! Grammar, one statement per line, `#` starts a comment:
//!
//! ```text
//! .ground NODE
//! .probe NAME (i|v|state) TARGET
//! R  ID A B r=VALUE
//! L  ID A B l=VALUE [esr=VALUE]
//! C  ID A B c=VALUE [esr=VALUE]
//! V  ID A B v=VALUE                      # A is the positive terminal
//! SW ID A B f=VALUE duty=VALUE [phase=VALUE]
//! D  ID A B                              # A is the anode
//! ```
//!
//! Values are decimal floats with an optional SI suffix:
//! `p n u m k M` (pico through mega).

use std::collections::BTreeMap;

use super::{Component, ComponentKind, Netlist, NetlistError, Probe, ProbeKind};

/// Parses a number with an optional SI suffix, e.g. `2.5u`, `100k`, `1e3`.
pub fn parse_value(text: &str) -> Option<f64> {
    if let Ok(v) = text.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let (body, last) = text.split_at(text.len().checked_sub(1)?);
    let exponent = match last {
        "p" => -12,
        "n" => -9,
        "u" => -6,
        "m" => -3,
        "k" => 3,
        "M" => 6,
        _ => return None,
    };
    if body.is_empty() || body.contains(['e', 'E']) {
        return None;
    }
    // Scale through the exponent so `2.5u` parses to exactly the same double as `2.5e-6`.
    let v = format!("{body}e{exponent}").parse::<f64>().ok()?;
    v.is_finite().then_some(v)
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let content = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &content[s..i],
                    column: s + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &content[s..],
            column: s + 1,
        });
    }
    tokens
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> NetlistError {
    NetlistError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

struct Params<'a> {
    line: usize,
    end_column: usize,
    values: BTreeMap<&'a str, (f64, usize)>,
}

impl<'a> Params<'a> {
    fn parse(line: usize, tokens: &[Token<'a>], allowed: &[&str]) -> Result<Self, NetlistError> {
        let mut values = BTreeMap::new();
        for tok in tokens {
            let (key, raw) = tok.text.split_once('=').ok_or_else(|| {
                syntax(
                    line,
                    tok.column,
                    format!("expected key=value, found `{}`", tok.text),
                )
            })?;
            if !allowed.contains(&key) {
                return Err(syntax(
                    line,
                    tok.column,
                    format!("unknown parameter `{key}`"),
                ));
            }
            let value = parse_value(raw).ok_or_else(|| {
                syntax(
                    line,
                    tok.column + key.len() + 1,
                    format!("invalid number `{raw}`"),
                )
            })?;
            if values.insert(key, (value, tok.column)).is_some() {
                return Err(syntax(
                    line,
                    tok.column,
                    format!("parameter `{key}` given twice"),
                ));
            }
        }
        let end_column = tokens.last().map_or(1, |t| t.column + t.text.len());
        Ok(Params {
            line,
            end_column,
            values,
        })
    }

    fn required(&self, key: &str) -> Result<f64, NetlistError> {
        self.values.get(key).map(|(v, _)| *v).ok_or_else(|| {
            syntax(
                self.line,
                self.end_column,
                format!("missing parameter `{key}`"),
            )
        })
    }

    fn optional(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).map_or(default, |(v, _)| *v)
    }
}

/// Parses and validates a netlist.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut components: Vec<Component> = Vec::new();
    let mut ground: Option<String> = None;
    let mut probes = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let tokens = tokenize(raw);
        let Some(head) = tokens.first() else { continue };

        if let Some(directive) = head.text.strip_prefix('.') {
            match directive {
                "ground" => {
                    if tokens.len() != 2 {
                        return Err(syntax(line, head.column, "expected `.ground NODE`"));
                    }
                    if ground.replace(tokens[1].text.to_string()).is_some() {
                        return Err(NetlistError::MultipleGround);
                    }
                }
                "probe" => {
                    if tokens.len() != 4 {
                        return Err(syntax(
                            line,
                            head.column,
                            "expected `.probe NAME KIND TARGET`",
                        ));
                    }
                    let kind = match tokens[2].text {
                        "i" => ProbeKind::Current,
                        "v" => ProbeKind::Voltage,
                        "state" => ProbeKind::State,
                        other => {
                            return Err(syntax(
                                line,
                                tokens[2].column,
                                format!("unknown probe kind `{other}` (expected i, v or state)"),
                            ))
                        }
                    };
                    probes.push(Probe::new(tokens[1].text, kind, tokens[3].text));
                }
                other => {
                    return Err(syntax(
                        line,
                        head.column,
                        format!("unknown directive `.{other}`"),
                    ))
                }
            }
            continue;
        }

        if tokens.len() < 4 {
            let column = tokens.last().map_or(1, |t| t.column + t.text.len());
            return Err(syntax(
                line,
                column,
                "expected `KIND ID NODE_A NODE_B [key=value ...]`",
            ));
        }
        let (id, node_a, node_b) = (tokens[1].text, tokens[2].text, tokens[3].text);
        let rest = &tokens[4..];
        let kind = match head.text {
            "R" => {
                let p = Params::parse(line, rest, &["r"])?;
                ComponentKind::Resistor {
                    ohms: p.required("r")?,
                }
            }
            "L" => {
                let p = Params::parse(line, rest, &["l", "esr"])?;
                ComponentKind::Inductor {
                    henries: p.required("l")?,
                    series_resistance_ohms: p.optional("esr", 0.0),
                }
            }
            "C" => {
                let p = Params::parse(line, rest, &["c", "esr"])?;
                ComponentKind::Capacitor {
                    farads: p.required("c")?,
                    series_resistance_ohms: p.optional("esr", 0.0),
                }
            }
            "V" => {
                let p = Params::parse(line, rest, &["v"])?;
                ComponentKind::DcSource {
                    volts: p.required("v")?,
                }
            }
            "SW" => {
                let p = Params::parse(line, rest, &["f", "duty", "phase"])?;
                ComponentKind::PwmSwitch {
                    frequency_hz: p.required("f")?,
                    duty_fraction: p.required("duty")?,
                    phase_fraction: p.optional("phase", 0.0),
                }
            }
            "D" => {
                Params::parse(line, rest, &[])?;
                ComponentKind::IdealDiode
            }
            other => {
                return Err(NetlistError::UnknownKind {
                    line,
                    kind: other.to_string(),
                })
            }
        };
        if components.iter().any(|c| c.id == id) {
            return Err(NetlistError::DuplicateId(id.to_string()));
        }
        components.push(Component::new(id, kind, node_a, node_b));
    }

    let ground = ground.ok_or(NetlistError::MissingGround)?;
    Netlist::new(components, ground, probes)
}

/// Canonical text form. Every optional parameter is written explicitly and
/// numbers use the shortest representation that parses back exactly.
pub fn serialize_netlist(netlist: &Netlist) -> String {
    let mut out = String::new();
    out.push_str(&format!(".ground {}\n", netlist.ground()));
    for c in netlist.components() {
        let params = match c.kind {
            ComponentKind::Resistor { ohms } => format!(" r={ohms:e}"),
            ComponentKind::Inductor {
                henries,
                series_resistance_ohms,
            } => format!(" l={henries:e} esr={series_resistance_ohms:e}"),
            ComponentKind::Capacitor {
                farads,
                series_resistance_ohms,
            } => format!(" c={farads:e} esr={series_resistance_ohms:e}"),
            ComponentKind::DcSource { volts } => format!(" v={volts:e}"),
            ComponentKind::PwmSwitch {
                frequency_hz,
                duty_fraction,
                phase_fraction,
            } => format!(" f={frequency_hz:e} duty={duty_fraction:e} phase={phase_fraction:e}"),
            ComponentKind::IdealDiode => String::new(),
        };
        out.push_str(&format!(
            "{} {} {} {}{}\n",
            c.kind.keyword(),
            c.id,
            c.node_a,
            c.node_b,
            params
        ));
    }
    for p in netlist.probes() {
        out.push_str(&format!(
            ".probe {} {} {}\n",
            p.name,
            p.kind.keyword(),
            p.target
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_with_suffixes() {
        assert_eq!(parse_value("2.5u"), Some(2.5e-6));
        assert_eq!(parse_value("100k"), Some(100e3));
        assert_eq!(parse_value("1e3"), Some(1000.0));
        assert_eq!(parse_value("3M"), Some(3e6));
        assert_eq!(parse_value("5m"), Some(5e-3));
        assert_eq!(parse_value("7p"), Some(7e-12));
        assert_eq!(parse_value("1x"), None);
        assert_eq!(parse_value(""), None);
        assert_eq!(parse_value("inf"), None);
    }

    const ROUTER: &str = "\
# router appliance
.ground 0
V  Vsupply sup 0 v=0.05
SW S1 sup vdiode f=100k duty=0.5
D  D1 0 vdiode
L  L1 vdiode vload l=2.5u   # no esr
C  C1 vload 0 c=5u esr=0
R  Rload vload 0 r=1000
.probe i_supply i Vsupply
.probe v_vload v vload
";

    #[test]
    fn parses_router_netlist() {
        let n = parse_netlist(ROUTER).unwrap();
        assert_eq!(n.components().len(), 6);
        assert_eq!(
            n.component("S1").unwrap().kind,
            ComponentKind::PwmSwitch {
                frequency_hz: 100e3,
                duty_fraction: 0.5,
                phase_fraction: 0.0
            }
        );
        assert_eq!(
            n.component("L1").unwrap().kind,
            ComponentKind::Inductor {
                henries: 2.5e-6,
                series_resistance_ohms: 0.0
            }
        );
        assert_eq!(n.probes().len(), 2);
    }

    #[test]
    fn round_trips_through_text() {
        let n = parse_netlist(ROUTER).unwrap();
        let text = serialize_netlist(&n);
        assert_eq!(parse_netlist(&text).unwrap(), n);
        assert_eq!(serialize_netlist(&parse_netlist(&text).unwrap()), text);
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_netlist(".ground 0\nR R1 a 0 r=1q\n").unwrap_err();
        assert_eq!(
            err,
            NetlistError::Syntax {
                line: 2,
                column: 12,
                message: "invalid number `1q`".into()
            }
        );
        let err = parse_netlist(".ground 0\nR R1 a 0 x=1\n").unwrap_err();
        assert!(matches!(
            err,
            NetlistError::Syntax {
                line: 2,
                column: 10,
                ..
            }
        ));
        let err = parse_netlist(".ground 0\nR R1 a\n").unwrap_err();
        assert!(matches!(err, NetlistError::Syntax { line: 2, .. }));
        let err = parse_netlist(".ground 0\nL L1 a 0 esr=1\n").unwrap_err();
        assert!(err.to_string().contains("missing parameter `l`"));
    }

    #[test]
    fn reports_structural_errors() {
        assert_eq!(
            parse_netlist(".ground 0\nQ Q1 a 0\n"),
            Err(NetlistError::UnknownKind {
                line: 2,
                kind: "Q".into()
            })
        );
        assert_eq!(
            parse_netlist("V V1 a 0 v=1\n.probe x v a\n"),
            Err(NetlistError::MissingGround)
        );
        assert_eq!(
            parse_netlist(".ground 0\n.ground 1\n"),
            Err(NetlistError::MultipleGround)
        );
        assert_eq!(
            parse_netlist(".ground 0\nV V1 a 0 v=1\nR V1 a 0 r=1\n.probe x v a\n"),
            Err(NetlistError::DuplicateId("V1".into()))
        );
        assert_eq!(
            parse_netlist(".ground 0\nV V1 a 0 v=1\nR R1 a a r=1\n.probe x v a\n"),
            Err(NetlistError::DegenerateComponent("R1".into()))
        );
        assert_eq!(
            parse_netlist(".ground 0\nV V1 a 0 v=1\nR R1 b c r=1\n.probe x v a\n"),
            Err(NetlistError::FloatingNode("b".into()))
        );
        assert_eq!(
            parse_netlist(".ground 0\nV V1 a 0 v=1\n"),
            Err(NetlistError::MissingProbe)
        );
        assert!(matches!(
            parse_netlist(".ground 0\nV V1 a 0 v=1\n.probe x i R9\n"),
            Err(NetlistError::UnknownProbeTarget { .. })
        ));
    }
}
