//! Acceptance criteria AC1-AC10. Each test prints one `ACn PASS|FAIL` line.
//!
//! The lines go straight to stderr, bypassing libtest capture, so they show
//! up in a plain `cargo test` run.

use std::f64::consts::PI;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shra::geometry::{AnnulusIndex, CellGeometry};
use shra::harness::stats::spearman;
use shra::harness::{run_experiment, Preset, RunMetrics};
use shra::noma::{power_levels, sic_decode, UplinkMessage};
use shra::predictor::{dataset_rmse, gradient_check, train, ModelShape, PredictorModel, TrainingConfig};
use shra::protocol::run_slot_conventional;
use shra::signal::{
    correlate_all, synthesize_received, zadoff_chu, Detector, DeviceId, NoiseModel, PreambleSet, PreambleTransmission,
};
use shra::traffic::{sample_active, sliding_pairs, TrafficConfig};

fn verdict(id: &str, passed: bool, detail: String) {
    let line = format!("{id} {} {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "{id} failed: {detail}");
}

#[test]
fn ac1_power_ladder_sinr_identity() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for a in 1..=8 {
        for gamma in [0.5, 1.0, 2.0, 5.0] {
            let p = power_levels(gamma, a).unwrap();
            // a_i = γ(γ+1)^(A-i) written independently
            for i in 1..=a {
                let expected = gamma * (gamma + 1.0).powi((a - i) as i32);
                worst = worst.max((p.levels()[i - 1] - expected).abs() / expected);
                let weaker: f64 = p.levels()[i..].iter().sum();
                worst = worst.max((p.levels()[i - 1] / (weaker + 1.0) - gamma).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "AC1",
        worst <= 1e-9 && secs < 1.0,
        format!("max deviation {worst:.2e}, {secs:.3} s"),
    );
}

/// Stage-by-stage canceller over explicit received powers.
fn sic_brute_force(levels_of: &[usize], a: usize) -> Vec<bool> {
    let gamma: f64 = 1.0;
    let power = |l: usize| gamma * (gamma + 1.0).powi((a - l) as i32);
    let mut remaining: Vec<usize> = (0..levels_of.len()).collect();
    let mut decoded = vec![false; levels_of.len()];
    for level in 1..=a {
        let here: Vec<usize> = remaining.iter().copied().filter(|&i| levels_of[i] == level).collect();
        match here.len() {
            0 => continue,
            1 => {
                let me = here[0];
                let interference: f64 = remaining
                    .iter()
                    .filter(|&&i| i != me)
                    .map(|&i| power(levels_of[i]))
                    .sum();
                if power(level) / (interference + 1.0) < gamma - 1e-9 {
                    break;
                }
                decoded[me] = true;
                remaining.retain(|&i| i != me);
            }
            _ => break,
        }
    }
    decoded
}

/// All multisets of `m` levels from `1..=a`, as non-decreasing vectors.
fn multisets(a: usize, m: usize, from: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == m {
        out.push(prefix.clone());
        return;
    }
    for l in from..=a {
        prefix.push(l);
        multisets(a, m, l, prefix, out);
        prefix.pop();
    }
}

#[test]
fn ac2_sic_matches_exhaustive_oracle() {
    let start = Instant::now();
    let mut cases = 0;
    let mut mismatches = 0;
    for a in 1..=4 {
        let set = power_levels(1.0, a).unwrap();
        for m in 0..=5 {
            let mut all = Vec::new();
            multisets(a, m, 1, &mut Vec::new(), &mut all);
            for lv in all {
                let msgs: Vec<UplinkMessage> = lv
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| UplinkMessage {
                        device_id: DeviceId(i as u32),
                        resource_block: 0,
                        power_level: l,
                    })
                    .collect();
                let got = sic_decode(&msgs, &set).unwrap();
                let want = sic_brute_force(&lv, a);
                let same = (0..lv.len()).all(|i| got.decoded.contains(&DeviceId(i as u32)) == want[i])
                    && got.decoded.len() + got.failed.len() == lv.len();
                cases += 1;
                mismatches += usize::from(!same);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "AC2",
        mismatches == 0 && secs < 10.0,
        format!("{mismatches} mismatches over {cases} multisets, {secs:.3} s"),
    );
}

#[test]
fn ac3_zadoff_chu_identities() {
    let start = Instant::now();
    let (mut amp, mut auto, mut cross) = (0.0f64, 0.0f64, 0.0f64);
    for len in [139usize, 839] {
        let roots = [1usize, 2, 25, len - 1];
        for &u in &roots {
            let z = zadoff_chu(u, len).unwrap();
            // reference samples from the textbook formula exp(-iπ u n(n+1)/N)
            for (n, s) in z.samples().iter().enumerate() {
                amp = amp.max((s.norm() - 1.0).abs());
                let phase = -PI * u as f64 * ((n * (n + 1)) % (2 * len)) as f64 / len as f64;
                assert!((s - Complex64::from_polar(1.0, phase)).norm() < 1e-9);
            }
            let x = z.samples();
            for shift in 1..len {
                let c: Complex64 = (0..len).map(|n| x[n] * x[(n + shift) % len].conj()).sum();
                auto = auto.max(c.norm());
            }
            for &v in roots.iter().filter(|&&v| v != u) {
                let y = zadoff_chu(v, len).unwrap();
                for shift in [0, 1, 7, len / 2] {
                    let c: Complex64 = (0..len).map(|n| x[n] * y.samples()[(n + shift) % len].conj()).sum();
                    cross = cross.max((c.norm() - (len as f64).sqrt()).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "AC3",
        amp <= 1e-12 && auto < 1e-9 && cross <= 1e-6 && secs < 30.0,
        format!("amplitude {amp:.1e}, autocorrelation {auto:.1e}, cross-root {cross:.1e}, {secs:.2} s"),
    );
}

#[test]
fn ac4_noiseless_detection_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let geom = CellGeometry::with_radius(800.0).unwrap();
    let eta = geom.annulus_count();
    let mut wrong = 0;
    let trials = 1000;
    for _ in 0..trials {
        let g = rng.random_range(1..=54);
        let n = rng.random_range(0..=20);
        let preambles = PreambleSet::new(g, 839, 0).unwrap();
        let mut truth = std::collections::BTreeMap::new();
        let txs: Vec<PreambleTransmission> = (0..n)
            .map(|i| {
                let (s, j) = (rng.random_range(1..=g), rng.random_range(1..=eta));
                *truth.entry((s, j)).or_insert(0usize) += 1;
                PreambleTransmission::normalized(DeviceId(i), s, AnnulusIndex::new(j, &geom).unwrap(), 1.0)
            })
            .collect();
        let rx = synthesize_received(&txs, &preambles, &geom, NoiseModel::noiseless(), &mut rng).unwrap();
        let found: std::collections::BTreeMap<(usize, usize), usize> = Detector::with_default_threshold(839, 1.0)
            .unwrap()
            .detect(&correlate_all(&rx, &preambles).unwrap())
            .into_iter()
            .map(|d| ((d.preamble, d.annulus.get()), d.multiplicity))
            .collect();
        wrong += usize::from(found != truth);
    }
    verdict(
        "AC4",
        wrong == 0,
        format!("{wrong} of {trials} instances differ from true occupancy"),
    );
}

#[test]
fn ac5_conventional_matches_singleton_probability() {
    let (n, g, slots) = (35usize, 54usize, 10_000);
    let expected = n as f64 * ((g - 1) as f64 / g as f64).powi(n as i32 - 1);
    let geom = CellGeometry::with_radius(800.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut total = 0usize;
    for slot in 0..slots {
        let mut devices = sample_active(&TrafficConfig::fixed(n), &geom, slot, &mut rng).unwrap();
        total += run_slot_conventional(slot, &mut devices, g, 10, &mut rng)
            .unwrap()
            .n_success;
    }
    let mean = total as f64 / slots as f64;
    verdict(
        "AC5",
        (mean - expected).abs() <= 0.5,
        format!("mean {mean:.3}, closed form {expected:.3}"),
    );
}

fn preset_run(preset: Preset) -> (RunMetrics, f64) {
    let start = Instant::now();
    let mut cfg = preset.config();
    cfg.seed = 42;
    let m = run_experiment(&cfg).unwrap();
    (m, start.elapsed().as_secs_f64())
}

#[test]
fn ac6_fig2_trend() {
    let (m, secs) = preset_run(Preset::Fig2);
    let mut ok = secs < 300.0;
    let mut notes = Vec::new();
    for r in ["600", "800"] {
        let shra = m.series(&format!("shra@R{r}"));
        let conv = m.series(&format!("conventional@R{r}"));
        let xs: Vec<f64> = shra.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = shra.iter().map(|p| p.1).collect();
        let rho = spearman(&xs, &ys).unwrap_or(0.0);
        let beats = shra
            .iter()
            .zip(&conv)
            .filter(|(s, _)| s.0 >= 20)
            .all(|(s, c)| s.1 > c.1);
        ok &= rho > 0.95 && beats;
        notes.push(format!("R={r}: rho {rho:.3}, beats baseline for G>=20 {beats}"));
    }
    verdict("AC6", ok, format!("{}; {secs:.1} s", notes.join("; ")));
}

#[test]
fn ac7_fig3_ordering() {
    let (m, secs) = preset_run(Preset::Fig3);
    let s800 = m.series("shra@R800");
    let s600 = m.series("shra@R600");
    let conv = m.series("conventional@R800");
    let bad: Vec<usize> = s800
        .iter()
        .zip(&s600)
        .zip(&conv)
        .filter(|((a, b), c)| !(a.1 >= b.1 && b.1 >= c.1))
        .map(|((a, _), _)| a.0)
        .collect();
    let at35 = s800.iter().find(|p| p.0 == 35).map(|p| p.1 / 35.0).unwrap_or(0.0);
    verdict(
        "AC7",
        bad.is_empty() && at35 >= 0.8,
        format!("ordering violated at N={bad:?}; success fraction at N=35, R=800: {at35:.3}; {secs:.1} s"),
    );
}

#[test]
fn ac8_gradient_check() {
    let shape = ModelShape {
        hidden1: 4,
        attention: 4,
        hidden2: 4,
        window: 6,
        ..ModelShape::default()
    };
    let mut worst = 0.0f64;
    let mut params = 0;
    for seed in 0..20u64 {
        let mut model = PredictorModel::random(shape, seed);
        // push activations away from the near-linear regime
        for t in model.tensors_mut() {
            t.iter_mut().for_each(|w| *w *= 10.0);
        }
        params = model.param_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let history: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let check = gradient_check(&model, &history, rng.random()).unwrap();
        worst = worst.max(check.max_relative_error);
    }
    verdict(
        "AC8",
        worst < 1e-4 && params <= 500,
        format!("max relative error {worst:.2e} over 20 seeds, {params} parameters"),
    );
}

#[test]
fn ac9_predictor_training() {
    let cfg = TrainingConfig::default();
    let window = ModelShape::default().window;

    let constant = sliding_pairs(&[4usize; 110], window);
    let (model, _) = train(PredictorModel::random(ModelShape::default(), 1), &constant, &cfg).unwrap();
    let const_rmse = dataset_rmse(&model, &constant).unwrap();

    let pattern = [0usize, 2, 4, 6, 8, 6, 4, 2];
    let counts: Vec<usize> = (0..500 + window).map(|t| pattern[t % pattern.len()]).collect();
    let periodic = sliding_pairs(&counts, window);
    let targets: Vec<f64> = periodic.iter().map(|p| p.1).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let best_constant = (targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / targets.len() as f64).sqrt();
    let (model, _) = train(PredictorModel::random(ModelShape::default(), 2), &periodic, &cfg).unwrap();
    let periodic_rmse = dataset_rmse(&model, &periodic).unwrap();

    verdict(
        "AC9",
        const_rmse < 0.1 && periodic_rmse <= 0.5 * best_constant,
        format!(
            "constant trace RMSE {const_rmse:.4}; periodic trace RMSE {periodic_rmse:.4} vs best constant {best_constant:.4}"
        ),
    );
}

#[test]
fn ac10_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_shra"))
            .args(["sweep", "fig3", "--seed", "42", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("metrics.csv")).unwrap()
    };
    let (a, b) = (run("first"), run("second"));
    verdict(
        "AC10",
        a == b && !a.is_empty(),
        format!("{} bytes, identical: {}", a.len(), a == b),
    );
}
