//! Device populations and activation processes.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::geometry::{ta_index, CellGeometry};
use crate::protocol::{Device, DeviceClass};
use crate::signal::DeviceId;

/// How many devices wake up in a slot.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalModel {
    Poisson {
        lambda: f64,
    },
    Fixed {
        count: usize,
    },
    /// Recorded per-slot counts, read from a file with one integer per line.
    Trace {
        source: PathBuf,
        counts: Vec<usize>,
    },
}

impl ArrivalModel {
    pub fn from_trace_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let counts = parse_trace(&text).map_err(|m| Error::parse(path, m))?;
        Ok(ArrivalModel::Trace {
            source: path.to_path_buf(),
            counts,
        })
    }
}

/// Parses a trace body: one non-negative integer per non-blank line.
pub fn parse_trace(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse::<usize>().map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn write_trace(path: impl AsRef<Path>, counts: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut body = String::with_capacity(counts.len() * 3);
    for c in counts {
        body.push_str(&c.to_string());
        body.push('\n');
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Small-scale fading magnitude per device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FadingModel {
    Uniform01,
    /// h = 1 for everyone (equal received power).
    #[default]
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub arrivals: ArrivalModel,
    /// Upper bound on simultaneously active devices; `None` leaves it open.
    pub population: Option<usize>,
    pub urllc_fraction: f64,
    pub fading: FadingModel,
    pub seed: u64,
}

impl TrafficConfig {
    pub fn fixed(count: usize) -> Self {
        TrafficConfig {
            arrivals: ArrivalModel::Fixed { count },
            population: None,
            urllc_fraction: 0.0,
            fading: FadingModel::Constant,
            seed: 0,
        }
    }

    pub fn poisson(lambda: f64) -> Self {
        TrafficConfig {
            arrivals: ArrivalModel::Poisson { lambda },
            ..Self::fixed(0)
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if let ArrivalModel::Poisson { lambda } = self.arrivals {
            if !(lambda > 0.0 && lambda.is_finite()) {
                problems.push(format!("poisson arrival rate must be > 0, got {lambda}"));
            }
        }
        if !(0.0..=1.0).contains(&self.urllc_fraction) {
            problems.push(format!(
                "urllc_fraction must lie in [0, 1], got {}",
                self.urllc_fraction
            ));
        }
        problems
    }
}

/// Number of devices active in `slot`.
pub fn sample_count<R: Rng + ?Sized>(config: &TrafficConfig, slot: usize, rng: &mut R) -> Result<usize> {
    let n = match &config.arrivals {
        ArrivalModel::Fixed { count } => *count,
        ArrivalModel::Poisson { lambda } => {
            let dist = Poisson::new(*lambda).map_err(|e| Error::Domain(format!("poisson({lambda}): {e}")))?;
            dist.sample(rng) as usize
        }
        ArrivalModel::Trace { counts, .. } => *counts.get(slot).ok_or(Error::TraceExhausted {
            slot,
            len: counts.len(),
        })?,
    };
    Ok(config.population.map_or(n, |cap| n.min(cap)))
}

/// Draws the active devices for `slot`: uniform-by-area positions, TA annuli,
/// service class and fading.
pub fn sample_active<R: Rng + ?Sized>(
    config: &TrafficConfig,
    geometry: &CellGeometry,
    slot: usize,
    rng: &mut R,
) -> Result<Vec<Device>> {
    let n = sample_count(config, slot, rng)?;
    (0..n)
        .map(|i| {
            // inverse CDF of the radial law 2r/R² on [0, R]
            let distance_m = geometry.radius_m() * rng.random::<f64>().sqrt();
            let class = if config.urllc_fraction > 0.0 && rng.random::<f64>() < config.urllc_fraction {
                DeviceClass::Urllc
            } else {
                DeviceClass::Massive
            };
            let fading = match config.fading {
                FadingModel::Constant => 1.0,
                FadingModel::Uniform01 => rng.random::<f64>(),
            };
            Ok(Device::new(
                DeviceId(i as u32),
                distance_m,
                ta_index(distance_m, geometry)?,
                class,
                fading,
            ))
        })
        .collect()
}

/// Per-slot counts plus the sliding `(window, next)` pairs used to fit the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    pub counts: Vec<usize>,
    pub pairs: Vec<(Vec<f64>, f64)>,
}

/// Every window of `window` consecutive counts paired with the count after it.
pub fn sliding_pairs(counts: &[usize], window: usize) -> Vec<(Vec<f64>, f64)> {
    if window == 0 || counts.len() <= window {
        return Vec::new();
    }
    counts
        .windows(window + 1)
        .map(|w| {
            let history = w[..window].iter().map(|&c| c as f64).collect();
            (history, w[window] as f64)
        })
        .collect()
}

pub fn generate_training_traces<R: Rng + ?Sized>(
    config: &TrafficConfig,
    n_slots: usize,
    window: usize,
    rng: &mut R,
) -> Result<TrainingTrace> {
    if n_slots <= window {
        return Err(Error::Domain(format!(
            "a trace of {n_slots} slots holds no window of length {window}"
        )));
    }
    let counts = (0..n_slots)
        .map(|slot| sample_count(config, slot, rng))
        .collect::<Result<Vec<_>>>()?;
    let pairs = sliding_pairs(&counts, window);
    Ok(TrainingTrace { counts, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_count_every_slot() {
        let g = CellGeometry::with_radius(800.0).unwrap();
        let cfg = TrafficConfig::fixed(80);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for slot in 0..20 {
            let devs = sample_active(&cfg, &g, slot, &mut rng).unwrap();
            assert_eq!(devs.len(), 80);
            for d in &devs {
                assert!(d.distance_m <= 800.0);
                assert_eq!(d.annulus, ta_index(d.distance_m, &g).unwrap());
                assert_eq!(d.class, DeviceClass::Massive);
            }
        }
    }

    #[test]
    fn poisson_moments() {
        let cfg = TrafficConfig::poisson(3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..100_000)
            .map(|s| sample_count(&cfg, s, &mut rng).unwrap() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
        assert!((var - 3.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn inner_half_radius_holds_a_quarter() {
        let g = CellGeometry::with_radius(800.0).unwrap();
        let cfg = TrafficConfig::fixed(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut inner = 0;
        for slot in 0..100 {
            inner += sample_active(&cfg, &g, slot, &mut rng)
                .unwrap()
                .iter()
                .filter(|d| d.distance_m <= 400.0)
                .count();
        }
        let frac = inner as f64 / 100_000.0;
        assert!((frac - 0.25).abs() < 0.01, "{frac}");
    }

    #[test]
    fn uniform_fading_stays_in_unit_interval() {
        let g = CellGeometry::with_radius(600.0).unwrap();
        let cfg = TrafficConfig {
            fading: FadingModel::Uniform01,
            ..TrafficConfig::fixed(500)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let devs = sample_active(&cfg, &g, 0, &mut rng).unwrap();
        assert!(devs.iter().all(|d| (0.0..=1.0).contains(&d.fading)));
    }

    #[test]
    fn urllc_fraction_is_respected() {
        let g = CellGeometry::with_radius(600.0).unwrap();
        let cfg = TrafficConfig {
            urllc_fraction: 0.2,
            ..TrafficConfig::fixed(10_000)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let devs = sample_active(&cfg, &g, 0, &mut rng).unwrap();
        let share = devs.iter().filter(|d| d.class == DeviceClass::Urllc).count() as f64 / 10_000.0;
        assert!((share - 0.2).abs() < 0.02);
    }

    #[test]
    fn population_caps_arrivals() {
        let cfg = TrafficConfig {
            population: Some(4),
            ..TrafficConfig::fixed(10)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_count(&cfg, 0, &mut rng).unwrap(), 4);
    }

    #[test]
    fn trace_exhaustion_is_reported() {
        let cfg = TrafficConfig {
            arrivals: ArrivalModel::Trace {
                source: PathBuf::from("mem"),
                counts: vec![1, 2],
            },
            ..TrafficConfig::fixed(0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_count(&cfg, 1, &mut rng).unwrap(), 2);
        assert!(matches!(
            sample_count(&cfg, 2, &mut rng),
            Err(Error::TraceExhausted { slot: 2, len: 2 })
        ));
    }

    #[test]
    fn window_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = generate_training_traces(&TrafficConfig::fixed(5), 11, 10, &mut rng).unwrap();
        assert_eq!(t.pairs, vec![(vec![5.0; 10], 5.0)]);
        let t = generate_training_traces(&TrafficConfig::poisson(3.0), 10_000, 10, &mut rng).unwrap();
        assert_eq!(t.pairs.len(), 10_000 - 10);
        assert_eq!(t.counts.len(), 10_000);
        assert!(generate_training_traces(&TrafficConfig::fixed(5), 10, 10, &mut rng).is_err());
    }

    #[test]
    fn trace_parsing() {
        assert_eq!(parse_trace("3\n 4 \n\n5\n").unwrap(), vec![3, 4, 5]);
        assert!(parse_trace("3\nx\n").unwrap_err().contains("line 2"));
    }

    #[test]
    fn validation_messages() {
        let mut cfg = TrafficConfig::poisson(0.0);
        cfg.urllc_fraction = 1.5;
        assert_eq!(cfg.validate().len(), 2);
    }
}
