//! Property tests for geometry, sequences, detection and SIC.

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shra::geometry::{ta_index, AnnulusIndex, CellGeometry};
use shra::noma::{power_levels, sic_decode, UplinkMessage};
use shra::protocol::occupancy_from_counts;
use shra::signal::{
    correlate, correlate_all, synthesize_received, zadoff_chu, ComplexSequence, Detector, DeviceId, NoiseModel,
    PreambleSet, PreambleTransmission,
};

/// Stage-by-stage SIC written out directly: stop at the first level that is
/// shared or whose SINR against all still-present messages misses gamma.
fn brute_force_sic(levels_of: &[usize], gamma: f64, a: usize) -> Vec<bool> {
    let power = |l: usize| gamma * (gamma + 1.0).powi((a - l) as i32);
    let mut present = vec![true; levels_of.len()];
    let mut decoded = vec![false; levels_of.len()];
    for level in 1..=a {
        let at: Vec<usize> = (0..levels_of.len()).filter(|&i| levels_of[i] == level).collect();
        if at.is_empty() {
            continue;
        }
        if at.len() > 1 {
            break;
        }
        let me = at[0];
        let interference: f64 = (0..levels_of.len())
            .filter(|&i| i != me && present[i])
            .map(|i| power(levels_of[i]))
            .sum();
        if power(level) / (interference + 1.0) + 1e-9 < gamma {
            break;
        }
        present[me] = false;
        decoded[me] = true;
    }
    decoded
}

fn messages(levels_of: &[usize]) -> Vec<UplinkMessage> {
    levels_of
        .iter()
        .enumerate()
        .map(|(i, &l)| UplinkMessage {
            device_id: DeviceId(i as u32),
            resource_block: 3,
            power_level: l,
        })
        .collect()
}

fn decoded_flags(levels_of: &[usize], a: usize, gamma: f64) -> Vec<bool> {
    let r = sic_decode(&messages(levels_of), &power_levels(gamma, a).unwrap()).unwrap();
    (0..levels_of.len())
        .map(|i| r.decoded.contains(&DeviceId(i as u32)))
        .collect()
}

/// Every level assignment of up to `max_msgs` messages over `a` levels.
fn assignments(a: usize, max_msgs: u32) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for m in 0..=max_msgs {
        for code in 0..a.pow(m) {
            let mut c = code;
            out.push(
                (0..m)
                    .map(|_| {
                        let l = c % a + 1;
                        c /= a;
                        l
                    })
                    .collect(),
            );
        }
    }
    out
}

#[test]
fn sic_matches_brute_force_exhaustively() {
    for a in 1..=4 {
        for gamma in [0.5, 1.0, 2.0] {
            for lv in assignments(a, 5) {
                assert_eq!(
                    decoded_flags(&lv, a, gamma),
                    brute_force_sic(&lv, gamma, a),
                    "levels {lv:?}"
                );
            }
        }
    }
}

#[test]
fn sic_partition_is_exact() {
    for lv in assignments(3, 5) {
        let r = sic_decode(&messages(&lv), &power_levels(1.0, 3).unwrap()).unwrap();
        let mut all: Vec<DeviceId> = r.decoded.iter().chain(&r.failed).copied().collect();
        all.sort();
        assert_eq!(all, (0..lv.len() as u32).map(DeviceId).collect::<Vec<_>>());
    }
}

#[test]
fn adding_on_empty_level_keeps_distinct_assignments_decodable() {
    for a in 1..=4 {
        for lv in assignments(a, 4) {
            let mut seen = lv.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != lv.len() {
                continue;
            }
            let before = decoded_flags(&lv, a, 1.0);
            assert!(before.iter().all(|&d| d), "distinct levels {lv:?}");
            for extra in (1..=a).filter(|l| !lv.contains(l)) {
                let mut grown = lv.clone();
                grown.push(extra);
                let after = decoded_flags(&grown, a, 1.0);
                assert!(before.iter().zip(&after).all(|(b, a)| !b || *a), "{lv:?} + {extra}");
            }
        }
    }
}

#[test]
fn adding_below_decoded_levels_can_undecode() {
    // level 1 decodes against {3, 3}, not against {2, 3, 3}
    assert_eq!(decoded_flags(&[1, 3, 3], 3, 1.0), vec![true, false, false]);
    assert_eq!(decoded_flags(&[1, 3, 3, 2], 3, 1.0), vec![false; 4]);
}

proptest! {
    #[test]
    fn ta_index_is_monotone(r in 100.0f64..3000.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let g = CellGeometry::with_radius(r).unwrap();
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let a = ta_index(lo * r, &g).unwrap().get();
        let b = ta_index(hi * r, &g).unwrap().get();
        prop_assert!(1 <= a && a <= b && b <= g.annulus_count());
        let (inner, outer) = g.annulus_bounds(AnnulusIndex::new(a, &g).unwrap());
        prop_assert!(inner <= lo * r + 1e-9 && lo * r <= outer + 1e-9);
    }

    #[test]
    fn zadoff_chu_unit_amplitude(root in 1usize..139) {
        let z = zadoff_chu(root, 139).unwrap();
        for s in z.samples() {
            prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        }
        prop_assert!((z.norm() - 139f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn distinct_roots_correlate_at_sqrt_length(u in 1usize..139, v in 1usize..139, shift in 0usize..139) {
        prop_assume!(u != v);
        let c = zadoff_chu(u, 139).unwrap().cyclic_correlation(&zadoff_chu(v, 139).unwrap(), shift).unwrap();
        prop_assert!((c.norm() - 139f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn correlation_is_linear(
        xs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 31),
        ys in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 31),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        root in 1usize..31,
    ) {
        let to_seq = |v: &[(f64, f64)]| ComplexSequence::new(v.iter().map(|&(r, i)| Complex64::new(r, i)).collect());
        let (x, y) = (to_seq(&xs), to_seq(&ys));
        let z = zadoff_chu(root, 31).unwrap();
        let mut mix = ComplexSequence::zeros(31);
        mix.add_scaled(&x, a);
        mix.add_scaled(&y, b);
        let lhs = correlate(&mix, &z).unwrap();
        let rhs = correlate(&x, &z).unwrap() * a + correlate(&y, &z).unwrap() * b;
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn noiseless_detection_recovers_occupancy(
        g in 1usize..12,
        picks in proptest::collection::vec((0usize..1000, 0usize..1000), 0..=20),
        seed in any::<u64>(),
    ) {
        let geom = CellGeometry::with_radius(800.0).unwrap();
        let eta = geom.annulus_count();
        let preambles = PreambleSet::new(g, 139, 0).unwrap();
        let mut counts = vec![0usize; g * eta];
        let txs: Vec<PreambleTransmission> = picks
            .iter()
            .enumerate()
            .map(|(i, &(s, j))| {
                let (s, j) = (s % g + 1, j % eta + 1);
                counts[(s - 1) * eta + (j - 1)] += 1;
                PreambleTransmission::normalized(DeviceId(i as u32), s, AnnulusIndex::new(j, &geom).unwrap(), 1.0)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rx = synthesize_received(&txs, &preambles, &geom, NoiseModel::noiseless(), &mut rng).unwrap();
        let found = Detector::with_default_threshold(139, 1.0).unwrap().detect(&correlate_all(&rx, &preambles).unwrap());
        let total: usize = found.iter().map(|d| d.multiplicity).sum();
        prop_assert_eq!(total, picks.len());
        prop_assert_eq!(found, occupancy_from_counts(&counts, eta));
    }

    #[test]
    fn ladder_stages_sit_at_gamma(gamma in 0.05f64..20.0, a in 1usize..9) {
        let p = power_levels(gamma, a).unwrap();
        for i in 0..a {
            let rest: f64 = p.levels()[i + 1..].iter().sum();
            prop_assert!((p.levels()[i] / (rest + 1.0) - gamma).abs() <= 1e-9 * gamma.max(1.0));
        }
    }
}
