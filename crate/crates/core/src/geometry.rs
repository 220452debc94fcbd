//! Timing-advance annuli.
//!
//! The cell is cut into rings of equal radial width `quantization_unit_m / 2`
//! (the round-trip TA resolution). Ring `j` (1-based) covers distances
//! `[(j-1)·w, j·w)`; the outermost ring is clipped at the cell edge.

use crate::error::{Error, Result};

/// Subcarrier offset used by annulus `j`: devices in ring `j` send on `262 + j`.
pub const BASE_SUBCARRIER: usize = 262;

/// Default TA quantization unit (round trip), in meters.
pub const DEFAULT_QUANTIZATION_UNIT_M: f64 = 157.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    radius_m: f64,
    quantization_unit_m: f64,
    base_subcarrier: usize,
}

/// 1-based ring index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnulusIndex(usize);

impl AnnulusIndex {
    /// Validates `j` against a geometry's annulus count.
    pub fn new(j: usize, geometry: &CellGeometry) -> Result<Self> {
        let count = geometry.annulus_count();
        if j == 0 || j > count {
            return Err(Error::InvalidAnnulus { index: j, count });
        }
        Ok(AnnulusIndex(j))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Zero-based position, handy for indexing per-annulus tables.
    pub fn offset(self) -> usize {
        self.0 - 1
    }

    /// Inverse of [`offset`](Self::offset); callers index tables sized by
    /// `annulus_count()`.
    pub(crate) fn from_offset(offset: usize) -> Self {
        AnnulusIndex(offset + 1)
    }
}

impl CellGeometry {
    pub fn new(radius_m: f64, quantization_unit_m: f64) -> Result<Self> {
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(Error::Domain(format!("cell radius must be positive, got {radius_m}")));
        }
        if !(quantization_unit_m > 0.0 && quantization_unit_m.is_finite()) {
            return Err(Error::Domain(format!(
                "quantization unit must be positive, got {quantization_unit_m}"
            )));
        }
        Ok(CellGeometry {
            radius_m,
            quantization_unit_m,
            base_subcarrier: BASE_SUBCARRIER,
        })
    }

    /// Geometry with the default 157 m quantization unit.
    pub fn with_radius(radius_m: f64) -> Result<Self> {
        Self::new(radius_m, DEFAULT_QUANTIZATION_UNIT_M)
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn quantization_unit_m(&self) -> f64 {
        self.quantization_unit_m
    }

    pub fn base_subcarrier(&self) -> usize {
        self.base_subcarrier
    }

    /// Radial width of every annulus but possibly the last.
    pub fn annulus_width_m(&self) -> f64 {
        self.quantization_unit_m / 2.0
    }

    /// η = floor(2R / unit) + 1.
    pub fn annulus_count(&self) -> usize {
        (2.0 * self.radius_m / self.quantization_unit_m).floor() as usize + 1
    }

    /// Inner and outer radius of ring `j`, clipped to the cell.
    pub fn annulus_bounds(&self, j: AnnulusIndex) -> (f64, f64) {
        let w = self.annulus_width_m();
        let inner = (j.offset() as f64 * w).min(self.radius_m);
        let outer = (j.get() as f64 * w).min(self.radius_m);
        (inner, outer)
    }

    /// Share of the disk area covered by ring `j`.
    pub fn annulus_area_fraction(&self, j: AnnulusIndex) -> f64 {
        let (inner, outer) = self.annulus_bounds(j);
        (outer * outer - inner * inner) / (self.radius_m * self.radius_m)
    }

    pub fn annuli(&self) -> impl Iterator<Item = AnnulusIndex> {
        (1..=self.annulus_count()).map(AnnulusIndex)
    }
}

/// TA index of a device at `distance_m` from the base station.
pub fn ta_index(distance_m: f64, geometry: &CellGeometry) -> Result<AnnulusIndex> {
    if !(0.0..=geometry.radius_m).contains(&distance_m) {
        return Err(Error::OutOfCell {
            distance_m,
            radius_m: geometry.radius_m,
        });
    }
    let j = (2.0 * distance_m / geometry.quantization_unit_m).floor() as usize + 1;
    // distance == radius lands in ring η by the same formula, so this never clips
    Ok(AnnulusIndex(j.min(geometry.annulus_count())))
}

/// Subcarrier carrying preambles from ring `j`.
pub fn subcarrier_for_annulus(j: AnnulusIndex) -> usize {
    BASE_SUBCARRIER + j.get()
}

/// Unvalidated variant of [`subcarrier_for_annulus`] for raw indices.
pub fn subcarrier_for_raw(j: usize) -> Result<usize> {
    if j == 0 {
        return Err(Error::InvalidAnnulus { index: 0, count: 0 });
    }
    Ok(BASE_SUBCARRIER + j)
}
