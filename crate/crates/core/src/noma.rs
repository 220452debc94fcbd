//! Power-domain NOMA on msg3 resource blocks.
//!
//! Devices sharing a block transmit at one of `A` discrete receive powers
//! `a_i = γ(γ+1)^(A-i)`, normalized to unit noise. With at most one device
//! per level every SIC stage lands exactly on SINR = γ.

use crate::error::{Error, Result};
use crate::signal::DeviceId;

/// Slack on the `SINR >= γ` test; the ladder puts every stage exactly at γ.
pub const SINR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLevelSet {
    gamma: f64,
    levels: Vec<f64>,
}

/// Receive-power ladder for target SINR `gamma` and `count` levels.
pub fn power_levels(gamma: f64, count: usize) -> Result<PowerLevelSet> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("target SINR must be positive, got {gamma}")));
    }
    if count == 0 {
        return Err(Error::Domain("at least one power level is required".into()));
    }
    let levels = (1..=count)
        .map(|i| gamma * (gamma + 1.0).powi((count - i) as i32))
        .collect();
    Ok(PowerLevelSet { gamma, levels })
}

impl PowerLevelSet {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn count(&self) -> usize {
        self.levels.len()
    }

    /// Power of 1-based level `i` (1 is the strongest).
    pub fn power(&self, i: usize) -> Option<f64> {
        i.checked_sub(1).and_then(|k| self.levels.get(k)).copied()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UplinkMessage {
    pub device_id: DeviceId,
    pub resource_block: usize,
    /// 1-based power level.
    pub power_level: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SicResult {
    /// Decoded devices in decode order.
    pub decoded: Vec<DeviceId>,
    pub failed: Vec<DeviceId>,
}

/// What the canceller does once a level cannot be decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SicPolicy {
    /// Stop at the first undecodable level; it and everything weaker fail.
    #[default]
    Abort,
    /// Leave the undecodable level in place as interference and keep going.
    SkipAndContinue,
}

/// Decodes one resource block strongest-first.
pub fn sic_decode(messages: &[UplinkMessage], levels: &PowerLevelSet) -> Result<SicResult> {
    sic_decode_with(messages, levels, SicPolicy::Abort)
}

pub fn sic_decode_with(messages: &[UplinkMessage], levels: &PowerLevelSet, policy: SicPolicy) -> Result<SicResult> {
    if let Some(first) = messages.first() {
        if let Some(m) = messages.iter().find(|m| m.resource_block != first.resource_block) {
            return Err(Error::Domain(format!(
                "SIC input mixes resource blocks {} and {}",
                first.resource_block, m.resource_block
            )));
        }
    }
    let mut occupancy = vec![Vec::new(); levels.count()];
    for (idx, m) in messages.iter().enumerate() {
        if m.power_level == 0 || m.power_level > levels.count() {
            return Err(Error::Domain(format!(
                "power level {} outside 1..={}",
                m.power_level,
                levels.count()
            )));
        }
        occupancy[m.power_level - 1].push(idx);
    }

    // true while the message is still present in the superposition
    let mut pending = vec![true; messages.len()];
    let mut outcome = vec![false; messages.len()];
    let mut decoded = Vec::new();

    for (k, at_level) in occupancy.iter().enumerate() {
        if at_level.is_empty() {
            continue;
        }
        let decodable = at_level.len() == 1 && {
            let me = at_level[0];
            let interference: f64 = messages
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != me && pending[i])
                .map(|(_, m)| levels.levels[m.power_level - 1])
                .sum();
            levels.levels[k] / (interference + 1.0) + SINR_TOLERANCE >= levels.gamma
        };
        if decodable {
            let me = at_level[0];
            pending[me] = false;
            outcome[me] = true;
            decoded.push(messages[me].device_id);
        } else if policy == SicPolicy::Abort {
            break;
        }
    }

    let failed = messages
        .iter()
        .zip(&outcome)
        .filter(|(_, ok)| !**ok)
        .map(|(m, _)| m.device_id)
        .collect();
    Ok(SicResult { decoded, failed })
}
