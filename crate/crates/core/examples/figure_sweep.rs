//! A reduced version of the active-device sweep, written to `./sweep-demo`.

use std::path::Path;

use shra::harness::output::emit_outputs;
use shra::harness::{run_experiment, Preset};

fn main() -> shra::Result<()> {
    let mut cfg = Preset::Fig3.config();
    cfg.replications = 2;
    cfg.slots = 200;
    let metrics = run_experiment(&cfg)?;
    for label in metrics.labels() {
        let points: Vec<String> = metrics
            .series(&label)
            .iter()
            .map(|(n, s)| format!("{n}:{s:.1}"))
            .collect();
        println!("{label:<20} {}", points.join(" "));
    }
    for path in emit_outputs(&metrics, Path::new("sweep-demo"))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
