//! Runs both access schemes over the same device draws, slot by slot.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shra::geometry::CellGeometry;
use shra::noma::power_levels;
use shra::protocol::{run_slot_conventional, ShraConfig, ShraEngine, SlotRecord};
use shra::traffic::{sample_active, TrafficConfig};

fn main() -> shra::Result<()> {
    let cell = CellGeometry::with_radius(800.0)?;
    let engine = ShraEngine::new(cell, power_levels(1.0, 3)?, ShraConfig::ideal(54))?;
    let traffic = TrafficConfig {
        urllc_fraction: 0.05,
        ..TrafficConfig::fixed(35)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let mut records = Vec::new();
    for slot in 0..10 {
        let devices = sample_active(&traffic, &cell, slot, &mut rng)?;
        let n = devices.len();
        let shra = engine.run_slot(slot, &mut devices.clone(), n, &mut rng)?;
        let conv = run_slot_conventional(slot, &mut devices.clone(), 54, 10, &mut rng)?;
        records.push(SlotRecord::from_outcomes(&shra, &conv));
    }
    shra::protocol::write_slot_csv(std::io::stdout().lock(), &records).expect("stdout");
    Ok(())
}
