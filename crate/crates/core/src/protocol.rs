//! One random-access cycle per slot.
//!
//! Two engines share the device model: the conventional 4-step contention
//! procedure, where any preamble picked twice is lost, and the hybrid scheme,
//! where the base station resolves preambles per TA annulus, grants a
//! dedicated block per singly-occupied `(preamble, annulus)` cell and lets
//! the remaining contenders share those blocks through power-domain NOMA.
//! Latency-critical devices bypass both via reserved preambles.

use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{AnnulusIndex, CellGeometry};
use crate::noma::{sic_decode_with, PowerLevelSet, SicPolicy, UplinkMessage};
use crate::signal::{
    correlate_all, synthesize_received, Detection, Detector, DeviceId, NoiseModel, PreambleSet, PreambleTransmission,
};

/// Reserved contention-free preambles (64 PRACH preambles minus 54 for contention).
pub const DEFAULT_RESERVED_PREAMBLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceClass {
    Massive,
    Urllc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceState {
    Idle,
    Active,
    Msg1Sent,
    Msg3Sent,
    Connected,
    Failed,
    Deferred,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub id: DeviceId,
    pub distance_m: f64,
    pub annulus: AnnulusIndex,
    pub class: DeviceClass,
    /// Small-scale fading magnitude h in [0, 1].
    pub fading: f64,
    pub state: DeviceState,
}

impl Device {
    pub fn new(id: DeviceId, distance_m: f64, annulus: AnnulusIndex, class: DeviceClass, fading: f64) -> Self {
        Device {
            id,
            distance_m,
            annulus,
            class,
            fading,
            state: DeviceState::Active,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessPath {
    /// Reserved preamble, two-message exchange.
    ContentionFree,
    /// Unique preamble in the 4-step baseline.
    FourStep,
    /// Own `(s, j)` RAR, sole occupant of its block at the top power level.
    TaMatched,
    /// Borrowed block of another annulus at a random power level.
    MultiUser,
}

impl AccessPath {
    /// Messages exchanged until the device is connected.
    pub fn latency_messages(self) -> u8 {
        match self {
            AccessPath::ContentionFree => 2,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureCause {
    PreambleCollision,
    /// Preamble not granted any RAR (missed detection or dropped grant).
    NoRar,
    SicFailure,
    /// Decoded, but the broadcast MCS was provisioned for too few devices.
    PredictionShortfall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Connected(AccessPath),
    Failed(FailureCause),
    Deferred,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotOutcome {
    pub slot: usize,
    pub n_active: usize,
    pub n_success: usize,
    /// Devices whose preamble choice was shared (per preamble for the
    /// baseline, per `(preamble, annulus)` cell for the hybrid scheme).
    pub n_preamble_collisions: usize,
    /// Devices that sent msg3 but were not decoded.
    pub n_sic_failures: usize,
    pub n_urllc_success: usize,
    pub n_deferred: usize,
    pub predicted_active: Option<usize>,
    pub dispositions: Vec<(DeviceId, Disposition)>,
}

impl SlotOutcome {
    fn record(&mut self, id: DeviceId, d: Disposition) {
        match d {
            Disposition::Connected(path) => {
                self.n_success += 1;
                if path == AccessPath::ContentionFree {
                    self.n_urllc_success += 1;
                }
            }
            Disposition::Deferred => self.n_deferred += 1,
            Disposition::Failed(FailureCause::SicFailure) => self.n_sic_failures += 1,
            Disposition::Failed(_) => {}
        }
        self.dispositions.push((id, d));
    }

    pub fn n_failed(&self) -> usize {
        self.dispositions
            .iter()
            .filter(|(_, d)| matches!(d, Disposition::Failed(_)))
            .count()
    }

    /// Every active device ended in exactly one terminal disposition.
    pub fn is_conserved(&self) -> bool {
        let mut ids: Vec<DeviceId> = self.dispositions.iter().map(|(id, _)| *id).collect();
        ids.sort();
        ids.dedup();
        ids.len() == self.n_active
            && self.dispositions.len() == self.n_active
            && self.n_success + self.n_failed() + self.n_deferred == self.n_active
    }
}

/// MCS provisioning derived from the predicted load; an abstract gate, not a
/// real modulation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McsTag {
    pub provisioned_for: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionParams {
    pub power_levels: usize,
    pub mcs: McsTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rar {
    pub preamble: usize,
    pub ta_index: AnnulusIndex,
    pub resource_block: usize,
    pub predicted_active: usize,
    pub detection: DetectionParams,
}

/// Hands out msg3 resource blocks for one slot.
#[derive(Debug, Clone, Default)]
pub struct ResourceAllocator {
    budget: Option<usize>,
    next: usize,
    dropped: usize,
}

impl ResourceAllocator {
    pub fn new(budget: Option<usize>) -> Self {
        ResourceAllocator {
            budget,
            next: 0,
            dropped: 0,
        }
    }

    pub fn allocate(&mut self) -> Option<usize> {
        if self.budget.is_some_and(|b| self.next >= b) {
            self.dropped += 1;
            return None;
        }
        self.next += 1;
        Some(self.next - 1)
    }

    pub fn allocated(&self) -> usize {
        self.next
    }

    /// Grants refused for lack of blocks.
    pub fn dropped(&self) -> usize {
        self.dropped
    }
}

/// One RAR per cell with exactly one estimated transmitter.
pub fn build_rars(
    occupancy: &[Detection],
    predicted_active: usize,
    power_levels: usize,
    allocator: &mut ResourceAllocator,
) -> Vec<Rar> {
    let detection = DetectionParams {
        power_levels,
        mcs: McsTag {
            provisioned_for: predicted_active,
        },
    };
    occupancy
        .iter()
        .filter(|o| o.multiplicity == 1)
        .filter_map(|o| {
            allocator.allocate().map(|resource_block| Rar {
                preamble: o.preamble,
                ta_index: o.annulus,
                resource_block,
                predicted_active,
                detection,
            })
        })
        .collect()
}

/// Serves latency-critical devices from the reserved pool.
///
/// Devices beyond the pool size are deferred, not dropped.
pub fn contention_free_access<R: Rng + ?Sized>(
    devices: &mut [&mut Device],
    reserved_preambles: usize,
    rng: &mut R,
) -> Vec<(DeviceId, Disposition)> {
    let served = devices.len().min(reserved_preambles);
    let mut assigned = vec![None; devices.len()];
    if served > 0 {
        // each served device gets a distinct reserved preamble
        for (slot, pre) in sample(rng, reserved_preambles, served).into_iter().enumerate() {
            assigned[slot] = Some(pre);
        }
    }
    devices
        .iter_mut()
        .zip(assigned)
        .map(|(d, pre)| {
            let disp = match pre {
                Some(_) => {
                    d.state = DeviceState::Connected;
                    Disposition::Connected(AccessPath::ContentionFree)
                }
                None => {
                    d.state = DeviceState::Deferred;
                    Disposition::Deferred
                }
            };
            (d.id, disp)
        })
        .collect()
}

fn split_classes(devices: &mut [Device]) -> (Vec<&mut Device>, Vec<&mut Device>) {
    devices.iter_mut().partition(|d| d.class == DeviceClass::Urllc)
}

/// Conventional 4-step contention RA over `preamble_count` preambles.
pub fn run_slot_conventional<R: Rng + ?Sized>(
    slot: usize,
    devices: &mut [Device],
    preamble_count: usize,
    reserved_preambles: usize,
    rng: &mut R,
) -> Result<SlotOutcome> {
    if preamble_count == 0 {
        return Err(Error::Domain("at least one preamble is required".into()));
    }
    let mut out = SlotOutcome {
        slot,
        n_active: devices.len(),
        ..SlotOutcome::default()
    };
    let (mut urllc, mut massive) = split_classes(devices);
    for (id, d) in contention_free_access(&mut urllc, reserved_preambles, rng) {
        out.record(id, d);
    }

    let picks: Vec<usize> = massive.iter().map(|_| rng.random_range(0..preamble_count)).collect();
    let mut load = vec![0u32; preamble_count];
    for &p in &picks {
        load[p] += 1;
    }
    for (dev, &p) in massive.iter_mut().zip(&picks) {
        let disp = if load[p] == 1 {
            dev.state = DeviceState::Connected;
            Disposition::Connected(AccessPath::FourStep)
        } else {
            out.n_preamble_collisions += 1;
            dev.state = DeviceState::Failed;
            Disposition::Failed(FailureCause::PreambleCollision)
        };
        out.record(dev.id, disp);
    }
    Ok(out)
}

/// How the base station learns `(preamble, annulus)` occupancy.
#[derive(Debug, Clone)]
pub enum DetectionMode {
    /// True occupancy.
    Ideal,
    /// Synthesized PRACH, correlation and threshold detection.
    Signal {
        preambles: PreambleSet,
        noise: NoiseModel,
        detector: Detector,
    },
}

impl DetectionMode {
    /// Signal chain with `D_p`-length ZC preambles, default threshold and `h̄`.
    pub fn signal(preamble_count: usize, sequence_length: usize, noise: NoiseModel, mean_gain: f64) -> Result<Self> {
        Ok(DetectionMode::Signal {
            preambles: PreambleSet::new(preamble_count, sequence_length, 0)?,
            noise,
            detector: Detector::with_default_threshold(sequence_length, mean_gain)?,
        })
    }
}

/// Which decoded messages the predicted-load gate applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionFailureRule {
    /// Only messages that went through the random-power branch.
    #[default]
    MultiUserOnly,
    AllMessages,
}

#[derive(Debug, Clone)]
pub struct ShraConfig {
    pub preamble_count: usize,
    pub detection: DetectionMode,
    pub sic_policy: SicPolicy,
    pub prediction_rule: PredictionFailureRule,
    pub resource_budget: Option<usize>,
    pub reserved_preambles: usize,
}

impl ShraConfig {
    pub fn ideal(preamble_count: usize) -> Self {
        ShraConfig {
            preamble_count,
            detection: DetectionMode::Ideal,
            sic_policy: SicPolicy::Abort,
            prediction_rule: PredictionFailureRule::MultiUserOnly,
            resource_budget: None,
            reserved_preambles: DEFAULT_RESERVED_PREAMBLES,
        }
    }
}

/// Hybrid scheme engine for one cell.
#[derive(Debug, Clone)]
pub struct ShraEngine {
    geometry: CellGeometry,
    levels: PowerLevelSet,
    config: ShraConfig,
}

impl ShraEngine {
    pub fn new(geometry: CellGeometry, levels: PowerLevelSet, config: ShraConfig) -> Result<Self> {
        if config.preamble_count == 0 {
            return Err(Error::Domain("at least one preamble is required".into()));
        }
        if let DetectionMode::Signal { preambles, .. } = &config.detection {
            if preambles.count() != config.preamble_count {
                return Err(Error::Shape {
                    what: "signal-mode preamble set",
                    expected: config.preamble_count,
                    got: preambles.count(),
                });
            }
        }
        Ok(ShraEngine {
            geometry,
            levels,
            config,
        })
    }

    pub fn geometry(&self) -> &CellGeometry {
        &self.geometry
    }

    pub fn levels(&self) -> &PowerLevelSet {
        &self.levels
    }

    fn cell(&self, preamble: usize, annulus: AnnulusIndex) -> usize {
        (preamble - 1) * self.geometry.annulus_count() + annulus.offset()
    }

    /// Runs steps 1-4 for one slot. `predicted_active` is the load forecast
    /// broadcast in every RAR.
    pub fn run_slot<R: Rng + ?Sized>(
        &self,
        slot: usize,
        devices: &mut [Device],
        predicted_active: usize,
        rng: &mut R,
    ) -> Result<SlotOutcome> {
        let g = self.config.preamble_count;
        let eta = self.geometry.annulus_count();
        let n_active = devices.len();
        let mut out = SlotOutcome {
            slot,
            n_active,
            predicted_active: Some(predicted_active),
            ..SlotOutcome::default()
        };
        let (mut urllc, mut massive) = split_classes(devices);
        for (id, d) in contention_free_access(&mut urllc, self.config.reserved_preambles, rng) {
            out.record(id, d);
        }

        // step 1: preamble choice, sent on the annulus subcarrier
        let picks: Vec<usize> = massive.iter().map(|_| rng.random_range(1..=g)).collect();
        let mut truth = vec![0usize; g * eta];
        for (dev, &s) in massive.iter_mut().zip(&picks) {
            if dev.annulus.get() > eta {
                return Err(Error::InvalidAnnulus {
                    index: dev.annulus.get(),
                    count: eta,
                });
            }
            truth[self.cell(s, dev.annulus)] += 1;
            dev.state = DeviceState::Msg1Sent;
        }

        // step 2: occupancy estimate and RARs
        let occupancy = match &self.config.detection {
            DetectionMode::Ideal => occupancy_from_counts(&truth, eta),
            DetectionMode::Signal {
                preambles,
                noise,
                detector,
            } => {
                let txs: Vec<PreambleTransmission> = massive
                    .iter()
                    .zip(&picks)
                    .map(|(d, &s)| PreambleTransmission::normalized(d.id, s, d.annulus, d.fading))
                    .collect();
                let rx = synthesize_received(&txs, preambles, &self.geometry, *noise, rng)?;
                detector.detect(&correlate_all(&rx, preambles)?)
            }
        };
        let mut allocator = ResourceAllocator::new(self.config.resource_budget);
        let rars = build_rars(&occupancy, predicted_active, self.levels.count(), &mut allocator);
        let mut grant_for_cell: Vec<Option<usize>> = vec![None; g * eta];
        let mut blocks_for_preamble: Vec<Vec<usize>> = vec![Vec::new(); g];
        for rar in &rars {
            grant_for_cell[self.cell(rar.preamble, rar.ta_index)] = Some(rar.resource_block);
            blocks_for_preamble[rar.preamble - 1].push(rar.resource_block);
        }

        // step 3: msg3 on the own grant at top power, otherwise a borrowed
        // block of the same preamble at a random level
        let mut per_block: Vec<Vec<UplinkMessage>> = vec![Vec::new(); allocator.allocated()];
        let mut verdict: Vec<Option<Disposition>> = vec![None; massive.len()];
        let mut path_of: Vec<AccessPath> = vec![AccessPath::TaMatched; massive.len()];
        for (k, (dev, &s)) in massive.iter_mut().zip(&picks).enumerate() {
            let cell = self.cell(s, dev.annulus);
            let collided = truth[cell] > 1;
            if collided {
                out.n_preamble_collisions += 1;
            }
            let pool = &blocks_for_preamble[s - 1];
            let (block, level, path) = if let Some(b) = grant_for_cell[cell] {
                (b, 1, AccessPath::TaMatched)
            } else if !pool.is_empty() {
                let b = pool[rng.random_range(0..pool.len())];
                (b, rng.random_range(1..=self.levels.count()), AccessPath::MultiUser)
            } else {
                let cause = if collided {
                    FailureCause::PreambleCollision
                } else {
                    FailureCause::NoRar
                };
                verdict[k] = Some(Disposition::Failed(cause));
                continue;
            };
            dev.state = DeviceState::Msg3Sent;
            path_of[k] = path;
            per_block[block].push(UplinkMessage {
                // local index; mapped back to the device below
                device_id: DeviceId(k as u32),
                resource_block: block,
                power_level: level,
            });
        }

        // step 4: SIC per block, then the MCS gate
        let shortfall = predicted_active < n_active;
        for msgs in per_block.iter().filter(|m| !m.is_empty()) {
            let sic = sic_decode_with(msgs, &self.levels, self.config.sic_policy)?;
            for DeviceId(k) in sic.decoded {
                let path = path_of[k as usize];
                let gated = shortfall
                    && (self.config.prediction_rule == PredictionFailureRule::AllMessages
                        || path == AccessPath::MultiUser);
                verdict[k as usize] = Some(if gated {
                    Disposition::Failed(FailureCause::PredictionShortfall)
                } else {
                    Disposition::Connected(path)
                });
            }
            for DeviceId(k) in sic.failed {
                verdict[k as usize] = Some(Disposition::Failed(FailureCause::SicFailure));
            }
        }
        for (dev, d) in massive.iter_mut().zip(verdict) {
            let d = d.expect("every contention device receives a verdict");
            dev.state = match d {
                Disposition::Connected(_) => DeviceState::Connected,
                Disposition::Deferred => DeviceState::Deferred,
                Disposition::Failed(_) => DeviceState::Failed,
            };
            out.record(dev.id, d);
        }
        Ok(out)
    }
}

/// Sorted `(s, j, k)` list of every occupied cell of a `G × η` count table.
pub fn occupancy_from_counts(counts: &[usize], annulus_count: usize) -> Vec<Detection> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0)
        .map(|(cell, &k)| Detection {
            preamble: cell / annulus_count + 1,
            annulus: AnnulusIndex::from_offset(cell % annulus_count),
            multiplicity: k,
        })
        .collect()
}

/// One row of the per-slot outcome stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRecord {
    pub slot: usize,
    pub n_active: usize,
    pub n_success_shra: usize,
    pub n_success_conv: usize,
    /// Hybrid-scheme cell collisions.
    pub collisions: usize,
    pub sic_failures: usize,
    pub predicted_active: usize,
}

impl SlotRecord {
    pub const CSV_HEADER: &'static str =
        "slot,n_active,n_success_shra,n_success_conv,collisions,sic_failures,predictor_n_hat";

    pub fn from_outcomes(shra: &SlotOutcome, conventional: &SlotOutcome) -> Self {
        SlotRecord {
            slot: shra.slot,
            n_active: shra.n_active,
            n_success_shra: shra.n_success,
            n_success_conv: conventional.n_success,
            collisions: shra.n_preamble_collisions,
            sic_failures: shra.n_sic_failures,
            predicted_active: shra.predicted_active.unwrap_or(0),
        }
    }
}

pub fn write_slot_csv<W: Write>(mut out: W, records: &[SlotRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", SlotRecord::CSV_HEADER)?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.slot, r.n_active, r.n_success_shra, r.n_success_conv, r.collisions, r.sic_failures, r.predicted_active
        )?;
    }
    Ok(())
}
