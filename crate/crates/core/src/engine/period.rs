//! Common period of several PWM switches.

use super::EngineError;
use crate::netlist::Netlist;

/// Relative tolerance when matching frequency ratios to small rationals.
pub const RATIO_TOLERANCE: f64 = 1e-9;
const MAX_DENOMINATOR: u64 = 10_000;

/// A switch period as a rational multiple `num/den` of the fastest period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PeriodRatio {
    pub num: u64,
    pub den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn rational(ratio: f64) -> Option<PeriodRatio> {
    (1..=MAX_DENOMINATOR).find_map(|den| {
        let num = (ratio * den as f64).round();
        let err = (num / den as f64 - ratio).abs() / ratio;
        (num >= 1.0 && err <= RATIO_TOLERANCE).then(|| {
            let num = num as u64;
            let g = gcd(num, den);
            PeriodRatio {
                num: num / g,
                den: den / g,
            }
        })
    })
}

/// Fastest switching frequency and the period ratio of every switch, in
/// netlist order.
pub(crate) fn period_ratios(netlist: &Netlist) -> Result<(f64, Vec<PeriodRatio>), EngineError> {
    let freqs = netlist.switch_frequencies();
    let fastest = freqs.iter().copied().fold(f64::NAN, f64::max);
    if freqs.is_empty() {
        return Err(EngineError::NoSwitch);
    }
    let ratios = freqs
        .iter()
        .map(|&f| {
            rational(fastest / f).ok_or(EngineError::Incommensurate {
                fastest_hz: fastest,
                other_hz: f,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((fastest, ratios))
}

/// Common period as a rational multiple of the fastest switch period.
pub(crate) fn common_ratio(ratios: &[PeriodRatio]) -> PeriodRatio {
    let num = ratios.iter().fold(1, |acc, r| lcm(acc, r.num));
    let den = ratios.iter().fold(0, |acc, r| gcd(acc, r.den));
    PeriodRatio { num, den }
}

/// Least common multiple of all switch periods in the netlist.
///
/// Frequencies whose ratio matches a rational with denominator up to 10 000
/// within 1e-9 relative error are treated as commensurate; anything else is
/// rejected.
pub fn common_period(netlist: &Netlist) -> Result<f64, EngineError> {
    let (fastest, ratios) = period_ratios(netlist)?;
    let common = common_ratio(&ratios);
    Ok(common.num as f64 / common.den as f64 / fastest)
}
