//! Built-in self-check run by the `validate` subcommand.
//!
//! Each check recomputes a property from first principles and compares it
//! with the library. The suite is small enough to finish in a few seconds.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{ta_index, AnnulusIndex, CellGeometry};
use crate::noma::{power_levels, sic_decode, UplinkMessage};
use crate::predictor::{gradient_check, ModelShape, PredictorModel};
use crate::protocol::{occupancy_from_counts, run_slot_conventional, ShraConfig, ShraEngine};
use crate::signal::{
    correlate_all, synthesize_received, zadoff_chu, Detector, DeviceId, NoiseModel, PreambleSet, PreambleTransmission,
};
use crate::traffic::{sample_active, TrafficConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn report(name: &'static str, passed: bool, detail: String) -> CheckReport {
    CheckReport { name, passed, detail }
}

/// Runs every check with the given seed.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_ladder()?,
        check_sic()?,
        check_zadoff_chu()?,
        check_detection(seed)?,
        check_ta_monotone()?,
        check_conservation(seed)?,
        check_gradients(seed)?,
    ])
}

fn check_ladder() -> Result<CheckReport> {
    let mut worst = 0.0f64;
    for gamma in [0.5, 1.0, 2.0, 5.0] {
        for a in 1..=8 {
            let set = power_levels(gamma, a)?;
            let p = set.levels();
            for i in 0..a {
                let weaker: f64 = p[i + 1..].iter().sum();
                worst = worst.max((p[i] / (1.0 + weaker) - gamma).abs());
            }
        }
    }
    Ok(report(
        "power ladder",
        worst <= 1e-9,
        format!("max |SINR - gamma| = {worst:.3e}"),
    ))
}

/// Decoded set under abort: the longest run of singly-occupied levels from
/// the top, each clearing `gamma` against everything weaker.
fn sic_oracle(levels_of: &[usize], powers: &[f64], gamma: f64) -> Vec<bool> {
    let mut ok = vec![false; levels_of.len()];
    for level in 1..=powers.len() {
        let here: Vec<usize> = (0..levels_of.len()).filter(|&i| levels_of[i] == level).collect();
        if here.is_empty() {
            continue;
        }
        let below: f64 = levels_of.iter().filter(|&&l| l > level).map(|&l| powers[l - 1]).sum();
        if here.len() != 1 || powers[level - 1] / (1.0 + below) + 1e-9 < gamma {
            break;
        }
        ok[here[0]] = true;
    }
    ok
}

fn check_sic() -> Result<CheckReport> {
    let mut cases = 0usize;
    let mut mismatches = 0usize;
    for a in 1..=4usize {
        let set = power_levels(1.0, a)?;
        for m in 0..=5u32 {
            for code in 0..a.pow(m) {
                let mut c = code;
                let levels_of: Vec<usize> = (0..m)
                    .map(|_| {
                        let l = c % a + 1;
                        c /= a;
                        l
                    })
                    .collect();
                let msgs: Vec<UplinkMessage> = levels_of
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| UplinkMessage {
                        device_id: DeviceId(i as u32),
                        resource_block: 0,
                        power_level: l,
                    })
                    .collect();
                let got = sic_decode(&msgs, &set)?;
                let want = sic_oracle(&levels_of, set.levels(), 1.0);
                let agree = (0..levels_of.len()).all(|i| got.decoded.contains(&DeviceId(i as u32)) == want[i])
                    && got.decoded.len() + got.failed.len() == levels_of.len();
                cases += 1;
                mismatches += usize::from(!agree);
            }
        }
    }
    Ok(report(
        "SIC decoding",
        mismatches == 0,
        format!("{mismatches} mismatches over {cases} level assignments"),
    ))
}

fn check_zadoff_chu() -> Result<CheckReport> {
    let mut amp_err = 0.0f64;
    let mut auto_max = 0.0f64;
    let mut cross_err = 0.0f64;
    for len in [139usize, 839] {
        let a = zadoff_chu(1, len)?;
        let b = zadoff_chu(2, len)?;
        for s in a.samples() {
            amp_err = amp_err.max((s.norm() - 1.0).abs());
        }
        for shift in 1..len {
            auto_max = auto_max.max(a.cyclic_correlation(&a, shift)?.norm());
        }
        for shift in [0, 1, len / 2] {
            cross_err = cross_err.max((a.cyclic_correlation(&b, shift)?.norm() - (len as f64).sqrt()).abs());
        }
    }
    let passed = amp_err <= 1e-12 && auto_max < 1e-9 && cross_err <= 1e-6;
    Ok(report(
        "Zadoff-Chu",
        passed,
        format!("amplitude {amp_err:.1e}, off-peak autocorrelation {auto_max:.1e}, cross-root {cross_err:.1e}"),
    ))
}

fn check_detection(seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = CellGeometry::with_radius(800.0)?;
    let eta = geometry.annulus_count();
    let g = 10;
    let preambles = PreambleSet::new(g, 139, 0)?;
    let detector = Detector::with_default_threshold(139, 1.0)?;
    let trials = 100;
    let mut wrong = 0;
    for t in 0..trials {
        let n = t % 21;
        let mut counts = vec![0usize; g * eta];
        let txs: Vec<PreambleTransmission> = (0..n)
            .map(|i| {
                let s = rng.random_range(1..=g);
                let j = rng.random_range(1..=eta);
                counts[(s - 1) * eta + j - 1] += 1;
                PreambleTransmission::normalized(DeviceId(i as u32), s, AnnulusIndex::new(j, &geometry).unwrap(), 1.0)
            })
            .collect();
        let rx = synthesize_received(&txs, &preambles, &geometry, NoiseModel::noiseless(), &mut rng)?;
        let found = detector.detect(&correlate_all(&rx, &preambles)?);
        wrong += usize::from(found != occupancy_from_counts(&counts, eta));
    }
    Ok(report(
        "noiseless detection",
        wrong == 0,
        format!("{wrong} of {trials} instances misdetected"),
    ))
}

fn check_ta_monotone() -> Result<CheckReport> {
    let geometry = CellGeometry::with_radius(800.0)?;
    let mut prev = 0;
    let mut ok = true;
    for cm in 0..=80_000u32 {
        let j = ta_index(f64::from(cm) / 100.0, &geometry)?.get();
        ok &= j == prev || j == prev + 1;
        prev = j;
    }
    ok &= prev == geometry.annulus_count();
    Ok(report(
        "TA index monotone",
        ok,
        format!("{} annuli over 0..800 m at 1 cm steps", geometry.annulus_count()),
    ))
}

fn check_conservation(seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let geometry = CellGeometry::with_radius(800.0)?;
    let engine = ShraEngine::new(geometry, power_levels(1.0, 3)?, ShraConfig::ideal(20))?;
    let mut broken = 0;
    let slots = 300;
    for slot in 0..slots {
        let traffic = TrafficConfig {
            urllc_fraction: 0.1,
            ..TrafficConfig::fixed(slot % 60)
        };
        let devices = sample_active(&traffic, &geometry, slot, &mut rng)?;
        let predicted = rng.random_range(0..=devices.len() + 5);
        let shra = engine.run_slot(slot, &mut devices.clone(), predicted, &mut rng)?;
        let conv = run_slot_conventional(slot, &mut devices.clone(), 20, 10, &mut rng)?;
        broken += usize::from(!shra.is_conserved()) + usize::from(!conv.is_conserved());
    }
    Ok(report(
        "device conservation",
        broken == 0,
        format!("{broken} of {} slot outcomes lost or duplicated devices", 2 * slots),
    ))
}

fn check_gradients(seed: u64) -> Result<CheckReport> {
    let shape = ModelShape {
        hidden1: 4,
        attention: 4,
        hidden2: 4,
        window: 5,
        ..ModelShape::default()
    };
    let mut model = PredictorModel::random(shape, seed);
    for t in model.tensors_mut() {
        for w in t.iter_mut() {
            *w *= 10.0;
        }
    }
    let history = [0.1, 0.4, 0.2, 0.9, 0.5];
    let check = gradient_check(&model, &history, 0.3)?;
    Ok(report(
        "predictor gradients",
        check.max_relative_error < 1e-4,
        format!(
            "max relative error {:.2e} over {} parameters",
            check.max_relative_error,
            model.param_count()
        ),
    ))
}
