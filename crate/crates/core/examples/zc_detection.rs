//! Synthesizes one PRACH occasion and recovers occupancy by correlation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shra::geometry::{AnnulusIndex, CellGeometry};
use shra::signal::{
    correlate_all, synthesize_received, Detector, DeviceId, NoiseModel, PreambleSet, PreambleTransmission,
};

fn main() -> shra::Result<()> {
    let cell = CellGeometry::with_radius(800.0)?;
    let preambles = PreambleSet::new(8, 839, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // (preamble, annulus): two devices share (3, 5); (3, 9) is a different annulus
    let picks = [(1, 2), (3, 5), (3, 5), (3, 9), (8, 11)];
    let txs: Vec<PreambleTransmission> = picks
        .iter()
        .enumerate()
        .map(|(i, &(s, j))| {
            Ok(PreambleTransmission::normalized(
                DeviceId(i as u32),
                s,
                AnnulusIndex::new(j, &cell)?,
                1.0,
            ))
        })
        .collect::<shra::Result<_>>()?;

    for variance in [0.0, 10.0] {
        let rx = synthesize_received(&txs, &preambles, &cell, NoiseModel::new(variance)?, &mut rng)?;
        let detector = Detector::with_default_threshold(preambles.sequence_length(), 1.0)?;
        println!("noise variance {variance} (threshold {:.2}):", detector.threshold());
        for d in detector.detect(&correlate_all(&rx, &preambles)?) {
            println!(
                "  preamble {} annulus {:>2}: {} device(s)",
                d.preamble,
                d.annulus.get(),
                d.multiplicity
            );
        }
    }
    Ok(())
}
