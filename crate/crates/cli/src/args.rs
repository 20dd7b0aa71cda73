//! Parsers for the small argument languages of `design` and `simulate`.

use std::str::FromStr;

use polyconsensus::filter::{cap_filter, robustness_caps, AMode, QuadFilter};
use polyconsensus::graph::Edge;
use polyconsensus::sim::{default_initial_states, FailureMode, LinkFailure, ResonantPhase};

use crate::{CliError, CliResult};

/// `unit`, `balanced` or a positive gain.
pub fn parse_a_mode(s: &str) -> Result<AMode, String> {
    match s {
        "unit" => Ok(AMode::Unit),
        "balanced" => Ok(AMode::Balanced),
        other => match other.parse::<f64>() {
            Ok(a) if a > 0.0 && a.is_finite() => Ok(AMode::Custom(a)),
            _ => Err(format!("expected unit, balanced or a positive number, got '{other}'")),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cap {
    /// Safe when any single link may stay down.
    Permanent,
    /// Safe when a link fails on every second step.
    Resonant,
    None,
}

impl FromStr for Cap {
    type Err = String;

    fn from_str(s: &str) -> Result<Cap, String> {
        match s {
            "permanent" => Ok(Cap::Permanent),
            "resonant" => Ok(Cap::Resonant),
            "none" => Ok(Cap::None),
            other => Err(format!("expected permanent, resonant or none, got '{other}'")),
        }
    }
}

/// Apply the robustness cap for a matrix with SLEM `mu`.
pub fn capped(f: &QuadFilter, cap: Cap, mu: f64) -> CliResult<QuadFilter> {
    let caps = robustness_caps(mu)?;
    Ok(match cap {
        Cap::Permanent => cap_filter(f, caps.z_permanent)?,
        Cap::Resonant => cap_filter(f, caps.z_resonant)?,
        Cap::None => *f,
    })
}

/// `i-j` pairs separated by commas.
pub fn parse_edges(s: &str) -> Result<Vec<Edge>, String> {
    s.split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (i, j) = t
                .split_once('-')
                .ok_or_else(|| format!("edge '{t}' is not of the form i-j"))?;
            let i = i.trim().parse().map_err(|_| format!("bad node index in '{t}'"))?;
            let j = j.trim().parse().map_err(|_| format!("bad node index in '{t}'"))?;
            Ok((i, j))
        })
        .collect()
}

/// `edges=0-1,2-3 mode=permanent|resonant|resonant-minus|random:<p>`.
/// Random failures draw from `seed`.
pub fn parse_failure(s: &str, seed: u64) -> Result<LinkFailure, String> {
    let mut edges = None;
    let mut mode = None;
    for part in s.split_whitespace() {
        match part.split_once('=') {
            Some(("edges", v)) => edges = Some(parse_edges(v)?),
            Some(("mode", "permanent")) => mode = Some(FailureMode::Permanent),
            Some(("mode", "resonant")) => mode = Some(FailureMode::Resonant(ResonantPhase::Plus)),
            Some(("mode", "resonant-minus")) => {
                mode = Some(FailureMode::Resonant(ResonantPhase::Minus))
            }
            Some(("mode", m)) if m.starts_with("random:") => {
                let prob: f64 = m["random:".len()..]
                    .parse()
                    .map_err(|_| format!("bad probability in '{m}'"))?;
                if !(0.0..=1.0).contains(&prob) {
                    return Err(format!("probability {prob} outside [0, 1]"));
                }
                mode = Some(FailureMode::Random { prob, seed })
            }
            _ => return Err(format!("unrecognized failure field '{part}'")),
        }
    }
    Ok(LinkFailure {
        edges: edges.ok_or("failure needs edges=...")?,
        mode: mode.unwrap_or(FailureMode::Permanent),
    })
}

/// `e1`, `random:<seed>` or an explicit comma-separated vector.
pub fn parse_initial_state(s: &str, n: usize) -> CliResult<Vec<f64>> {
    let x = if s == "e1" {
        default_initial_states(n, 0).swap_remove(0)
    } else if let Some(seed) = s.strip_prefix("random:") {
        let seed = seed
            .parse()
            .map_err(|_| CliError::Usage(format!("bad seed in '{s}'")))?;
        default_initial_states(n, seed).swap_remove(1)
    } else {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad initial value '{v}'")))
            })
            .collect::<CliResult<Vec<_>>>()?
    };
    if x.len() != n {
        return Err(CliError::Usage(format!("initial state has {} entries, graph has {n} nodes", x.len())));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gains() {
        assert_eq!(parse_a_mode("unit"), Ok(AMode::Unit));
        assert_eq!(parse_a_mode("balanced"), Ok(AMode::Balanced));
        assert_eq!(parse_a_mode("0.5"), Ok(AMode::Custom(0.5)));
        assert!(parse_a_mode("-1").is_err());
        assert!(parse_a_mode("fast").is_err());
    }

    #[test]
    fn failures() {
        let f = parse_failure("edges=0-1,2-3 mode=resonant", 0).unwrap();
        assert_eq!(f.edges, vec![(0, 1), (2, 3)]);
        assert_eq!(f.mode, FailureMode::Resonant(ResonantPhase::Plus));
        let r = parse_failure("mode=random:0.25 edges=4-1", 9).unwrap();
        assert_eq!(r.mode, FailureMode::Random { prob: 0.25, seed: 9 });
        assert_eq!(parse_failure("edges=0-1", 0).unwrap().mode, FailureMode::Permanent);
        assert!(parse_failure("mode=permanent", 0).is_err());
        assert!(parse_failure("edges=0:1", 0).is_err());
        assert!(parse_failure("edges=0-1 mode=random:2", 0).is_err());
    }

    #[test]
    fn initial_states() {
        assert_eq!(parse_initial_state("e1", 3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(parse_initial_state("1,2,3", 3).unwrap(), vec![1.0, 2.0, 3.0]);
        let a = parse_initial_state("random:4", 5).unwrap();
        assert_eq!(a, parse_initial_state("random:4", 5).unwrap());
        assert!(parse_initial_state("1,2", 3).is_err());
    }
}
