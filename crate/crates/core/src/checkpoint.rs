//! Controller checkpoints.
//!
//! A checkpoint is a little-endian binary file holding the networks, plus a
//! JSON sidecar (`<file>.json`) with training metadata. The binary layout is
//!
//! ```text
//! "GBCK" | u32 version | u32 network count
//! per network: u8 role | u32 input | u32 hidden | u32 output | u8 log_std
//!              | u64 param count | f64 params...
//! ```
//!
//! The checkpoint identity is the SHA-256 of the binary payload, so two
//! checkpoints with the same parameters share an id regardless of metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::biped::BipedModel;
use crate::controller::{blind_arch, residual_arch, Controller};
use crate::error::{Error, Result};
use crate::nn::{Arch, Network};

pub const MAGIC: &[u8; 4] = b"GBCK";
pub const VERSION: u32 = 1;

/// Which training phase produced a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Blind,
    Visual,
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blind" => Ok(Phase::Blind),
            "visual" => Ok(Phase::Visual),
            _ => Err(Error::Config(format!("unknown phase `{s}` (expected blind or visual)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub phase: Phase,
    pub regimen: String,
    pub iterations: u64,
    pub seed: u64,
    /// Hash of the blind parameters, used to verify they stay frozen.
    pub blind_hash: String,
    /// Id of the checkpoint training resumed from, if any.
    pub parent: Option<String>,
    pub model: BipedModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub blind: Network,
    pub residual: Option<Network>,
    /// Value network of the phase that produced the checkpoint.
    pub critic: Option<Network>,
    pub meta: CheckpointMeta,
}

#[derive(Clone, Copy)]
enum Role {
    Blind = 0,
    Residual = 1,
    Critic = 2,
}

/// Hex SHA-256 of a parameter vector.
pub fn params_hash(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sidecar path for a checkpoint file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Checkpoint {
    /// A blind-only checkpoint wrapping `blind`.
    pub fn blind(blind: Network, critic: Option<Network>, meta: CheckpointMeta) -> Self {
        Checkpoint {
            blind,
            residual: None,
            critic,
            meta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check(&self.blind, blind_arch(), "blind")?;
        if let Some(r) = &self.residual {
            check(r, residual_arch(), "residual")?;
        }
        if self.meta.blind_hash != params_hash(&self.blind.params) {
            return Err(Error::Contract("blind hash does not match blind parameters".into()));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut nets: Vec<(Role, &Network)> = vec![(Role::Blind, &self.blind)];
        if let Some(r) = &self.residual {
            nets.push((Role::Residual, r));
        }
        if let Some(c) = &self.critic {
            nets.push((Role::Critic, c));
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(nets.len() as u32).to_le_bytes());
        for (role, net) in nets {
            out.push(role as u8);
            for d in [net.arch.input, net.arch.hidden, net.arch.output] {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            out.push(u8::from(net.arch.log_std));
            out.extend_from_slice(&(net.params.len() as u64).to_le_bytes());
            for p in &net.params {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    /// Identity of the controller: hash of the encoded networks, 16 hex digits.
    pub fn id(&self) -> String {
        hex_string(&Sha256::digest(self.encode()))[..16].to_string()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))?;
        let side = sidecar_path(path);
        let json = serde_json::to_string_pretty(&self.meta)?;
        fs::write(&side, json).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let nets = decode(&bytes).map_err(|m| Error::format(path, m))?;
        let side = sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: CheckpointMeta =
            serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?;
        let mut blind = None;
        let mut residual = None;
        let mut critic = None;
        for (role, net) in nets {
            let slot = match role {
                0 => &mut blind,
                1 => &mut residual,
                2 => &mut critic,
                r => return Err(Error::format(path, format!("unknown network role {r}"))),
            };
            if slot.replace(net).is_some() {
                return Err(Error::format(path, format!("duplicate network role {role}")));
            }
        }
        let ck = Checkpoint {
            blind: blind.ok_or_else(|| Error::format(path, "no blind network"))?,
            residual,
            critic,
            meta,
        };
        ck.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(ck)
    }

    /// Deterministic evaluation controller for this checkpoint.
    pub fn controller(&self) -> Controller<'_> {
        Controller::new(&self.blind, self.residual.as_ref(), &self.meta.model)
    }
}

fn check(net: &Network, arch: Arch, role: &str) -> Result<()> {
    if net.arch != arch || net.params.len() != arch.param_count() {
        return Err(Error::Contract(format!("{role} network has an unexpected architecture")));
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.at))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Vec<(u8, Network)>, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u32()?;
    let mut nets = Vec::new();
    for _ in 0..count {
        let role = r.u8()?;
        let arch = Arch {
            input: r.u32()? as usize,
            hidden: r.u32()? as usize,
            output: r.u32()? as usize,
            log_std: r.u8()? != 0,
        };
        let len = r.u64()? as usize;
        if len != arch.param_count() {
            return Err(format!("parameter count {len} does not match architecture"));
        }
        let raw = r.take(len.checked_mul(8).ok_or("parameter count overflow")?)?;
        let params = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        nets.push((role, Network { arch, params }));
    }
    if r.at != bytes.len() {
        return Err("trailing bytes".into());
    }
    Ok(nets)
}
