//! Monte-Carlo driver for sweeps and single runs.
//!
//! Work is split into `(radius, axis point, replication)` units. Each unit
//! owns three generators derived from the run seed, the point index and the
//! replication index: one for traffic, one per scheme. Radii share seeds, so
//! the two cell sizes see the same arrival draws. Units are executed in
//! parallel and reduced in index order.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{
    ArrivalChoice, DetectionChoice, ExperimentConfig, FadingChoice, PredictionRuleChoice, PredictorChoice,
    SicPolicyChoice, SweepAxis,
};
use crate::error::{Error, Result};
use crate::geometry::CellGeometry;
use crate::noma::{power_levels, SicPolicy};
use crate::predictor::{load_model, predict_active, PredictorModel};
use crate::protocol::{
    run_slot_conventional, DetectionMode, PredictionFailureRule, ShraConfig, ShraEngine, SlotOutcome, SlotRecord,
};
use crate::signal::NoiseModel;
use crate::traffic::{sample_active, ArrivalModel, FadingModel, TrafficConfig};

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub axis_value: usize,
    /// `shra@R800`, `conventional@R600`, ...
    pub scheme: String,
    pub mean_success: f64,
    pub std: f64,
    /// Mean colliding devices per slot.
    pub collisions: f64,
    /// Mean msg3 decoding failures per slot.
    pub sic_failures: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub axis: SweepAxis,
    pub rows: Vec<MetricsRow>,
    pub runtime: Duration,
}

impl RunMetrics {
    /// `(axis_value, mean_success)` for one series label, in axis order.
    pub fn series(&self, scheme: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (r.axis_value, r.mean_success))
            .collect()
    }

    /// Distinct series labels in first-seen order.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.scheme) {
                out.push(r.scheme.clone());
            }
        }
        out
    }
}

pub fn series_label(scheme: &str, radius_m: f64) -> String {
    format!("{scheme}@R{radius_m}")
}

/// Where the per-slot load forecast comes from.
#[derive(Debug, Clone)]
pub enum LoadForecaster {
    Oracle,
    Zero,
    Model(Arc<PredictorModel>),
}

impl LoadForecaster {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        Ok(match config.predictor {
            PredictorChoice::Oracle => LoadForecaster::Oracle,
            PredictorChoice::None => LoadForecaster::Zero,
            PredictorChoice::Trained => {
                let path = config
                    .model
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig(vec!["trained predictor needs a model path".into()]))?;
                LoadForecaster::Model(Arc::new(load_model(path)?))
            }
        })
    }

    fn history_len(&self) -> usize {
        match self {
            LoadForecaster::Model(m) => m.window,
            _ => 0,
        }
    }

    /// Forecast for a slot whose true count is `actual`, given past counts.
    pub fn forecast(&self, history: &VecDeque<usize>, actual: usize) -> Result<usize> {
        match self {
            LoadForecaster::Oracle => Ok(actual),
            LoadForecaster::Zero => Ok(0),
            LoadForecaster::Model(m) => {
                // left-pad with zeros until a full window has been observed
                let mut window = vec![0; m.window.saturating_sub(history.len())];
                window.extend(history.iter().copied());
                predict_active(m, &window)
            }
        }
    }
}

/// Mixes run seed and unit coordinates into an independent stream seed.
pub fn derive_seed(base: u64, point: usize, replication: usize, stream: u64) -> u64 {
    let mut z = base
        ^ (point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (replication as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ stream.wrapping_mul(0x1656_67B1_9E37_79F9);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Engines and traffic for one `(radius, axis point)` pair.
struct PointSetup {
    geometry: CellGeometry,
    engine: ShraEngine,
    preambles: usize,
    traffic: TrafficConfig,
}

fn point_setup(config: &ExperimentConfig, radius_m: f64, axis_value: usize) -> Result<PointSetup> {
    let geometry = CellGeometry::new(radius_m, config.quantization_unit_m)?;
    let (preambles, fixed_n) = match config.axis {
        SweepAxis::Preambles => (axis_value, config.active_devices),
        SweepAxis::ActiveDevices => (config.preambles, axis_value),
    };
    let detection = match config.detection {
        DetectionChoice::Ideal => DetectionMode::Ideal,
        DetectionChoice::Signal => {
            let mean_gain = match config.fading {
                FadingChoice::Constant => 1.0,
                FadingChoice::Uniform01 => 0.5,
            };
            DetectionMode::signal(
                preambles,
                config.sequence_length,
                NoiseModel::new(config.noise_variance)?,
                mean_gain,
            )?
        }
    };
    let shra = ShraConfig {
        preamble_count: preambles,
        detection,
        sic_policy: match config.sic_policy {
            SicPolicyChoice::Abort => SicPolicy::Abort,
            SicPolicyChoice::Skip => SicPolicy::SkipAndContinue,
        },
        prediction_rule: match config.prediction_rule {
            PredictionRuleChoice::MultiUser => PredictionFailureRule::MultiUserOnly,
            PredictionRuleChoice::All => PredictionFailureRule::AllMessages,
        },
        resource_budget: config.resource_budget,
        reserved_preambles: config.reserved_preambles,
    };
    let engine = ShraEngine::new(geometry, power_levels(config.gamma, config.power_levels)?, shra)?;
    let arrivals = match config.arrivals {
        ArrivalChoice::Fixed => ArrivalModel::Fixed { count: fixed_n },
        ArrivalChoice::Poisson => ArrivalModel::Poisson {
            lambda: config.poisson_mean,
        },
        ArrivalChoice::Trace => {
            let path: PathBuf = config
                .trace
                .clone()
                .ok_or_else(|| Error::InvalidConfig(vec!["trace arrivals need a trace path".into()]))?;
            ArrivalModel::from_trace_file(path)?
        }
    };
    let traffic = TrafficConfig {
        arrivals,
        population: None,
        urllc_fraction: config.urllc_fraction,
        fading: match config.fading {
            FadingChoice::Constant => FadingModel::Constant,
            FadingChoice::Uniform01 => FadingModel::Uniform01,
        },
        seed: config.seed,
    };
    Ok(PointSetup {
        geometry,
        engine,
        preambles,
        traffic,
    })
}

/// Outcomes of one slot under each scheme that was run.
#[derive(Debug, Clone)]
pub struct SlotPair {
    pub shra: Option<SlotOutcome>,
    pub conventional: Option<SlotOutcome>,
}

/// Runs `slots` consecutive slots of one unit, handing every pair to `sink`.
fn run_unit(
    config: &ExperimentConfig,
    setup: &PointSetup,
    forecaster: &LoadForecaster,
    point: usize,
    replication: usize,
    mut sink: impl FnMut(SlotPair),
) -> Result<()> {
    let mut traffic_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, point, replication, 0));
    let mut shra_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, point, replication, 1));
    let mut conv_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, point, replication, 2));
    let keep = forecaster.history_len();
    let mut history: VecDeque<usize> = VecDeque::with_capacity(keep + 1);

    for slot in 0..config.slots {
        let devices = sample_active(&setup.traffic, &setup.geometry, slot, &mut traffic_rng)?;
        let n = devices.len();
        let shra = if config.scheme.runs_shra() {
            let predicted = forecaster.forecast(&history, n)?;
            let mut devs = devices.clone();
            Some(setup.engine.run_slot(slot, &mut devs, predicted, &mut shra_rng)?)
        } else {
            None
        };
        let conventional = if config.scheme.runs_conventional() {
            let mut devs = devices;
            Some(run_slot_conventional(
                slot,
                &mut devs,
                setup.preambles,
                config.reserved_preambles,
                &mut conv_rng,
            )?)
        } else {
            None
        };
        if keep > 0 {
            history.push_back(n);
            if history.len() > keep {
                history.pop_front();
            }
        }
        sink(SlotPair { shra, conventional });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    count: f64,
    sum: f64,
    sum_sq: f64,
    collisions: f64,
    sic_failures: f64,
}

impl Accumulator {
    fn push(&mut self, o: &SlotOutcome) {
        let s = o.n_success as f64;
        self.count += 1.0;
        self.sum += s;
        self.sum_sq += s * s;
        self.collisions += o.n_preamble_collisions as f64;
        self.sic_failures += o.n_sic_failures as f64;
    }

    fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.collisions += other.collisions;
        self.sic_failures += other.sic_failures;
    }

    fn row(&self, axis_value: usize, scheme: String) -> MetricsRow {
        let n = self.count.max(1.0);
        let mean = self.sum / n;
        let var = if self.count > 1.0 {
            ((self.sum_sq - self.sum * mean) / (self.count - 1.0)).max(0.0)
        } else {
            0.0
        };
        MetricsRow {
            axis_value,
            scheme,
            mean_success: mean,
            std: var.sqrt(),
            collisions: self.collisions / n,
            sic_failures: self.sic_failures / n,
        }
    }
}

/// Runs every `(radius, point, replication)` unit and aggregates per series.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunMetrics> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    let started = Instant::now();
    let forecaster = LoadForecaster::from_config(config)?;

    let mut setups = Vec::new();
    for &radius in &config.radii_m {
        for (p, &value) in config.values.iter().enumerate() {
            setups.push((radius, p, value, point_setup(config, radius, value)?));
        }
    }
    let units: Vec<(usize, usize)> = (0..setups.len())
        .flat_map(|s| (0..config.replications).map(move |r| (s, r)))
        .collect();
    let results: Vec<Result<(Accumulator, Accumulator)>> = units
        .par_iter()
        .map(|&(s, rep)| {
            let (_, point, _, setup) = &setups[s];
            let mut shra = Accumulator::default();
            let mut conv = Accumulator::default();
            run_unit(config, setup, &forecaster, *point, rep, |pair| {
                if let Some(o) = &pair.shra {
                    shra.push(o);
                }
                if let Some(o) = &pair.conventional {
                    conv.push(o);
                }
            })?;
            Ok((shra, conv))
        })
        .collect();

    let mut totals = vec![(Accumulator::default(), Accumulator::default()); setups.len()];
    for (&(s, _), result) in units.iter().zip(results) {
        let (a, b) = result?;
        totals[s].0.merge(&a);
        totals[s].1.merge(&b);
    }

    let mut rows = Vec::new();
    for (radius_idx, &radius) in config.radii_m.iter().enumerate() {
        let block = &totals[radius_idx * config.values.len()..(radius_idx + 1) * config.values.len()];
        if config.scheme.runs_shra() {
            for (value, (acc, _)) in config.values.iter().zip(block) {
                rows.push(acc.row(*value, series_label("shra", radius)));
            }
        }
        if config.scheme.runs_conventional() {
            for (value, (_, acc)) in config.values.iter().zip(block) {
                rows.push(acc.row(*value, series_label("conventional", radius)));
            }
        }
    }
    Ok(RunMetrics {
        axis: config.axis,
        rows,
        runtime: started.elapsed(),
    })
}

/// Per-slot stream of replication 0 at the first radius and axis point.
pub fn slot_stream(config: &ExperimentConfig) -> Result<Vec<SlotRecord>> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidConfig(problems));
    }
    let forecaster = LoadForecaster::from_config(config)?;
    let setup = point_setup(config, config.radii_m[0], config.values[0])?;
    let mut records = Vec::with_capacity(config.slots);
    run_unit(config, &setup, &forecaster, 0, 0, |pair| {
        let empty = SlotOutcome::default();
        let shra = pair.shra.as_ref().unwrap_or(&empty);
        let conv = pair.conventional.as_ref().unwrap_or(&empty);
        let mut rec = SlotRecord::from_outcomes(shra, conv);
        rec.slot = shra.slot.max(conv.slot);
        rec.n_active = shra.n_active.max(conv.n_active);
        records.push(rec);
    })?;
    Ok(records)
}
