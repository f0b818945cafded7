//! The single-qubit Pauli error channel: configuration sampling, state
//! application and closed-form string-order attenuation factors.
//!
//! Errors model state preparation noise and act once, before the
//! disentangling circuit; the channel is represented by trajectories
//! (sampled Pauli products), which is exact for Pauli noise.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::groundstate::StateVector;
use crate::model::{Pauli, PauliString, SopKind, SopSpec};
use crate::{circuits, Error, Result};

/// Per-site probabilities of X, Y and Z errors; the identity keeps the
/// remaining weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSpec {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl ChannelSpec {
    pub fn new(px: f64, py: f64, pz: f64) -> Result<Self> {
        let c = ChannelSpec { px, py, pz };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("x", self.px), ("y", self.py), ("z", self.pz)] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::input(format!("p_{name} = {p} outside [0, 1]")));
            }
        }
        if self.px + self.py + self.pz > 1.0 + 1e-12 {
            return Err(Error::input(format!(
                "error probabilities sum to {} > 1",
                self.px + self.py + self.pz
            )));
        }
        Ok(())
    }

    /// Depolarizing setting: `p_X = p_Y = p_Z = p`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        Self::new(p, p, p)
    }

    pub fn pure_z(p: f64) -> Result<Self> {
        Self::new(0.0, 0.0, p)
    }

    pub fn pure_x(p: f64) -> Result<Self> {
        Self::new(p, 0.0, 0.0)
    }

    pub fn is_trivial(&self) -> bool {
        self.px == 0.0 && self.py == 0.0 && self.pz == 0.0
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.px == self.py && self.py == self.pz {
            return write!(f, "depol:{}", self.px);
        }
        let mut parts = Vec::new();
        if self.px != 0.0 {
            parts.push(format!("x:{}", self.px));
        }
        if self.py != 0.0 {
            parts.push(format!("y:{}", self.py));
        }
        if self.pz != 0.0 {
            parts.push(format!("z:{}", self.pz));
        }
        if parts.is_empty() {
            parts.push("x:0".into());
        }
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for ChannelSpec {
    type Err = Error;

    /// Parses `"x:0.1,y:0.1,z:0.1"` (missing letters default to 0) or
    /// `"depol:0.015"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(v) = s.strip_prefix("depol:") {
            let p: f64 = v
                .parse()
                .map_err(|_| Error::input(format!("bad probability in channel '{s}'")))?;
            return Self::depolarizing(p);
        }
        let (mut px, mut py, mut pz) = (0.0, 0.0, 0.0);
        for part in s.split(',') {
            let (key, val) = part
                .split_once(':')
                .ok_or_else(|| Error::input(format!("bad channel component '{part}'")))?;
            let p: f64 = val
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("bad probability '{val}'")))?;
            match key.trim() {
                "x" => px = p,
                "y" => py = p,
                "z" => pz = p,
                other => return Err(Error::input(format!("unknown error letter '{other}'"))),
            }
        }
        Self::new(px, py, pz)
    }
}

/// One sampled Kraus branch: at most one error event per site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorConfig {
    pub n: u32,
    pub events: Vec<(u32, Pauli)>,
}

impl ErrorConfig {
    pub fn empty(n: u32) -> Self {
        ErrorConfig {
            n,
            events: Vec::new(),
        }
    }

    /// The configuration as a Pauli product (exact phases included).
    pub fn as_pauli(&self) -> PauliString {
        PauliString::from_letters(self.events.iter().copied())
    }
}

/// Counter-based per-shot random stream: reproducible and order-independent
/// across threads.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// Draws an error configuration with independent per-site letters.
pub fn sample_error_config(ch: &ChannelSpec, n: u32, rng: &mut impl Rng) -> ErrorConfig {
    let tx = ch.px;
    let txy = ch.px + ch.py;
    let txyz = ch.px + ch.py + ch.pz;
    let mut events = Vec::new();
    for site in 1..=n {
        let u: f64 = rng.gen();
        if u < txyz {
            let letter = if u < tx {
                Pauli::X
            } else if u < txy {
                Pauli::Y
            } else {
                Pauli::Z
            };
            events.push((site, letter));
        }
    }
    ErrorConfig { n, events }
}

/// Applies the error configuration to a state; norm preserved.
pub fn apply_error_config(cfg: &ErrorConfig, state: &StateVector) -> Result<StateVector> {
    if cfg.n != state.n() {
        return Err(Error::input(format!(
            "config on {} sites, state on {}",
            cfg.n,
            state.n()
        )));
    }
    if let Some(&(site, _)) = cfg.events.iter().find(|(s, _)| *s < 1 || *s > cfg.n) {
        return Err(Error::input(format!("error event on site {site} out of range")));
    }
    Ok(circuits::apply_pauli(&cfg.as_pauli(), state))
}

/// Closed-form attenuation of a ZXZ string order parameter under pure-X or
/// pure-Z noise: `(1-2p_X)^2` or `(1-2p_Z)^{(L-1)/2}`.
pub fn sop_attenuation(ch: &ChannelSpec, spec: &SopSpec) -> Result<f64> {
    if spec.kind != SopKind::Zxz {
        return Err(Error::Unsupported(
            "attenuation closed form covers the ZXZ family only".into(),
        ));
    }
    let pure_x = ch.py == 0.0 && ch.pz == 0.0;
    let pure_z = ch.px == 0.0 && ch.py == 0.0;
    if pure_x {
        Ok((1.0 - 2.0 * ch.px).powi(2))
    } else if pure_z {
        let half = (spec.len() - 1) / 2;
        Ok((1.0 - 2.0 * ch.pz).powi(half as i32))
    } else {
        Err(Error::Unsupported(
            "mixed channels have no closed-form attenuation; use Monte-Carlo estimation".into(),
        ))
    }
}
