//! Binary policy artifact: a self-describing header plus one fixed-width
//! record per lattice node, so a solved policy can be reloaded byte-exactly
//! and checked against the model it was solved for.
//!
//! Layout:
//!   - 8-byte magic `LOBMMPA1`
//!   - u32 little-endian header length
//!   - JSON header: model fingerprint, grid geometry, scheme parameters,
//!     tie-break version
//!   - 7 bytes per node, row-major over [time, spread state, inventory,
//!     price]: kind u8, bid level u8, ask level u8, bid size i16 LE (lots;
//!     the signed market-order size for take records), ask size i16 LE.

use serde::{Deserialize, Serialize};

use super::{Action, PolicyTensor, SchemeParams, StateGrid, TIE_BREAK_VERSION};
use crate::error::{Error, Result};
use crate::model::Level;

pub const MAGIC: &[u8; 8] = b"LOBMMPA1";
const RECORD_LEN: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_steps: usize,
    pub n_states: usize,
    pub y_min: i64,
    pub y_max: i64,
    pub lot: i64,
    pub p_min_ticks: i64,
    pub p_step_ticks: i64,
    pub n_p: usize,
    pub tick: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn from_grid(grid: &StateGrid) -> GridSpec {
        GridSpec {
            n_steps: grid.n_steps,
            n_states: grid.n_states,
            y_min: grid.y_levels[0],
            y_max: *grid.y_levels.last().unwrap(),
            lot: grid.lot,
            p_min_ticks: grid.p_ticks[0],
            p_step_ticks: if grid.p_ticks.len() > 1 {
                grid.p_ticks[1] - grid.p_ticks[0]
            } else {
                1
            },
            n_p: grid.p_ticks.len(),
            tick: grid.tick,
            step: grid.step,
        }
    }

    pub fn to_grid(&self) -> StateGrid {
        let y_levels: Vec<i64> = (self.y_min..=self.y_max).step_by(self.lot as usize).collect();
        let p_ticks: Vec<i64> = (0..self.n_p)
            .map(|j| self.p_min_ticks + j as i64 * self.p_step_ticks)
            .collect();
        StateGrid {
            n_steps: self.n_steps,
            n_states: self.n_states,
            y_levels,
            p_ticks,
            tick: self.tick,
            step: self.step,
            lot: self.lot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    /// SHA-256 of the canonical JSON of the model the policy was solved for.
    pub model_fingerprint: String,
    pub grid: GridSpec,
    pub scheme: SchemeParams,
    pub tie_break_version: u32,
}

#[derive(Debug, Clone)]
pub struct PolicyArtifact {
    pub header: ArtifactHeader,
    pub policy: PolicyTensor,
}

impl PolicyArtifact {
    pub fn grid(&self) -> StateGrid {
        self.header.grid.to_grid()
    }
}

fn level_code(level: Level) -> u8 {
    match level {
        Level::Minus => 0,
        Level::Best => 1,
        Level::Plus => 2,
    }
}

fn level_from_code(code: u8) -> Result<Level> {
    match code {
        0 => Ok(Level::Minus),
        1 => Ok(Level::Best),
        2 => Ok(Level::Plus),
        other => Err(Error::Artifact(format!("bad quote level code {other}"))),
    }
}

fn lots(size: i64, lot: i64, what: &str) -> Result<i16> {
    if size % lot != 0 {
        return Err(Error::Artifact(format!("{what} {size} is not a lot multiple of {lot}")));
    }
    let k = size / lot;
    i16::try_from(k).map_err(|_| Error::Artifact(format!("{what} {size} overflows the record")))
}

pub fn encode_policy(header: &ArtifactHeader, policy: &PolicyTensor) -> Result<Vec<u8>> {
    let grid = header.grid.to_grid();
    let expected = (grid.n_steps + 1) * grid.slice_len();
    if policy.data.len() != expected {
        return Err(Error::Artifact(format!(
            "policy has {} records, grid describes {expected}",
            policy.data.len()
        )));
    }
    let header_json =
        serde_json::to_vec(header).map_err(|e| Error::Artifact(format!("header encode: {e}")))?;
    let mut out = Vec::with_capacity(12 + header_json.len() + RECORD_LEN * expected);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for action in &policy.data {
        match *action {
            Action::Make { bid, ask, bid_size, ask_size } => {
                out.push(0);
                out.push(level_code(bid));
                out.push(level_code(ask));
                out.extend_from_slice(&lots(bid_size, grid.lot, "bid size")?.to_le_bytes());
                out.extend_from_slice(&lots(ask_size, grid.lot, "ask size")?.to_le_bytes());
            }
            Action::Take { size } => {
                out.push(1);
                out.push(0);
                out.push(0);
                out.extend_from_slice(&lots(size, grid.lot, "market order size")?.to_le_bytes());
                out.extend_from_slice(&0i16.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_policy(bytes: &[u8]) -> Result<PolicyArtifact> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Artifact("missing or wrong magic".into()));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body_start = 12 + header_len;
    if bytes.len() < body_start {
        return Err(Error::Artifact("truncated header".into()));
    }
    let header: ArtifactHeader = serde_json::from_slice(&bytes[12..body_start])
        .map_err(|e| Error::Artifact(format!("header decode: {e}")))?;
    if header.tie_break_version != TIE_BREAK_VERSION {
        return Err(Error::Artifact(format!(
            "tie-break version {} unsupported (this build speaks {TIE_BREAK_VERSION})",
            header.tie_break_version
        )));
    }
    let grid = header.grid.to_grid();
    let expected = (grid.n_steps + 1) * grid.slice_len();
    let body = &bytes[body_start..];
    if body.len() != RECORD_LEN * expected {
        return Err(Error::Artifact(format!(
            "body holds {} bytes, grid describes {expected} records of {RECORD_LEN} bytes",
            body.len()
        )));
    }
    let lot = grid.lot;
    let mut data = Vec::with_capacity(expected);
    for rec in body.chunks_exact(RECORD_LEN) {
        let op3 = i16::from_le_bytes([rec[3], rec[4]]) as i64 * lot;
        let op4 = i16::from_le_bytes([rec[5], rec[6]]) as i64 * lot;
        let action = match rec[0] {
            0 => Action::Make {
                bid: level_from_code(rec[1])?,
                ask: level_from_code(rec[2])?,
                bid_size: op3,
                ask_size: op4,
            },
            1 => Action::Take { size: op3 },
            other => return Err(Error::Artifact(format!("bad action kind {other}"))),
        };
        data.push(action);
    }
    Ok(PolicyArtifact {
        header,
        policy: PolicyTensor { n_steps: grid.n_steps, slice_len: grid.slice_len(), data },
    })
}
