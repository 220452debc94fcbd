//! Prints the TA annuli of two cell sizes and where a few devices land.

use shra::geometry::{subcarrier_for_annulus, ta_index, CellGeometry};

fn main() -> shra::Result<()> {
    for radius in [600.0, 800.0] {
        let cell = CellGeometry::with_radius(radius)?;
        println!(
            "R = {radius} m: {} annuli of {} m",
            cell.annulus_count(),
            cell.annulus_width_m()
        );
        for j in cell.annuli() {
            let (inner, outer) = cell.annulus_bounds(j);
            println!(
                "  annulus {:>2}  [{inner:>6.1}, {outer:>6.1}) m  subcarrier {}  area {:.3}",
                j.get(),
                subcarrier_for_annulus(j),
                cell.annulus_area_fraction(j)
            );
        }
    }
    let cell = CellGeometry::with_radius(800.0)?;
    for d in [0.0, 78.4, 78.5, 400.0, 799.9] {
        println!("device at {d:>5} m -> annulus {}", ta_index(d, &cell)?.get());
    }
    Ok(())
}
