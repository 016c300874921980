//! Environment specs: `DIST/RESPONSE`, or a named preset.
//!
//! ```text
//! DIST     := uniform | power:K | empirical:PATH[:MAX]
//! RESPONSE := perfect:G | eps:G:E | equilibrium:N | none:G | mixture:G:P
//! ```
//!
//! Presets: `perfect`, `equilibrium`, `eps-bounded`, `mixture`, `no-response`.

use std::fmt;
use std::path::Path;

use rpo_core::market::{Market, ResponseModel, ValueDistribution};

use crate::error::{HarnessError, Result};
use crate::formats::load_empirical;

pub const PRESETS: [(&str, &str); 5] = [
    ("perfect", "uniform/perfect:0.4"),
    ("equilibrium", "power:2/equilibrium:2"),
    ("eps-bounded", "uniform/eps:0.4:0.05"),
    ("mixture", "uniform/mixture:0.4:0.9"),
    ("no-response", "uniform/none:0.4"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// The spec as written by the user.
    pub spec: String,
    pub market: Market,
    /// Values loaded from a file rather than a synthetic law.
    pub empirical: bool,
}

impl Environment {
    pub fn parse(spec: &str) -> Result<Self> {
        let expanded = PRESETS.iter().find(|(name, _)| *name == spec).map_or(spec, |(_, s)| s);
        let (dist, response) = expanded
            .rsplit_once('/')
            .ok_or_else(|| bad(spec, "expected DIST/RESPONSE or a preset name"))?;
        let (values, empirical) = parse_dist(dist, spec)?;
        let response = parse_response(response, spec)?;
        Ok(Environment { spec: spec.to_string(), market: Market::new(values, response), empirical })
    }

    pub fn is_no_response(&self) -> bool {
        matches!(self.market.response, ResponseModel::NoResponse { .. })
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

fn bad(spec: &str, msg: &str) -> HarnessError {
    HarnessError::Config(format!("invalid environment {spec:?}: {msg}"))
}

fn num(s: &str, spec: &str) -> Result<f64> {
    s.parse().map_err(|_| bad(spec, &format!("not a number: {s:?}")))
}

fn parse_dist(dist: &str, spec: &str) -> Result<(ValueDistribution, bool)> {
    if dist == "uniform" {
        return Ok((ValueDistribution::Uniform01, false));
    }
    if let Some(k) = dist.strip_prefix("power:") {
        return Ok((ValueDistribution::power(num(k, spec)?)?, false));
    }
    if let Some(rest) = dist.strip_prefix("empirical:") {
        // a trailing ":MAX" is taken as the declared maximum when it parses
        let (path, max) = match rest.rsplit_once(':') {
            Some((p, m)) if m.parse::<f64>().is_ok() => (p, Some(num(m, spec)?)),
            _ => (rest, None),
        };
        return Ok((load_empirical(Path::new(path), max)?, true));
    }
    Err(bad(spec, &format!("unknown distribution {dist:?}")))
}

fn parse_response(response: &str, spec: &str) -> Result<ResponseModel> {
    let parts: Vec<&str> = response.split(':').collect();
    let model = match parts.as_slice() {
        ["perfect", g] => ResponseModel::perfect(num(g, spec)?)?,
        ["eps", g, e] => ResponseModel::eps_bounded(num(g, spec)?, num(e, spec)?)?,
        ["equilibrium", n] => {
            let n: u32 = n.parse().map_err(|_| bad(spec, "bidder count must be a positive integer"))?;
            ResponseModel::equilibrium(n)?
        }
        ["none", g] => ResponseModel::no_response(num(g, spec)?)?,
        ["mixture", g, p] => ResponseModel::mixture(num(g, spec)?, num(p, spec)?)?,
        _ => return Err(bad(spec, &format!("unknown response {response:?}"))),
    };
    Ok(model)
}
