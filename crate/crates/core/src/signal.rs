//! Zadoff-Chu preambles and the PRACH receive chain.
//!
//! Every annulus signals on its own subcarrier, so the received PRACH is a
//! set of independent per-annulus superpositions. The base station correlates
//! each of them against every preamble and turns the correlation magnitudes
//! into `(preamble, annulus, multiplicity)` occupancy estimates.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{subcarrier_for_annulus, AnnulusIndex, CellGeometry};

/// Long PRACH sequence length.
pub const DEFAULT_SEQUENCE_LENGTH: usize = 839;

/// Ordered list of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSequence {
    samples: Vec<Complex64>,
}

impl ComplexSequence {
    pub fn new(samples: Vec<Complex64>) -> Self {
        ComplexSequence { samples }
    }

    pub fn zeros(len: usize) -> Self {
        ComplexSequence {
            samples: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ComplexSequence, scale: f64) {
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += b * scale;
        }
    }

    /// Cyclic cross-correlation at lag `shift`: Σ a[n]·conj(b[(n+shift) mod N]).
    pub fn cyclic_correlation(&self, other: &ComplexSequence, shift: usize) -> Result<Complex64> {
        check_lengths(self.len(), other.len())?;
        let n = self.len();
        Ok(self
            .samples
            .iter()
            .enumerate()
            .map(|(i, a)| a * other.samples[(i + shift) % n].conj())
            .sum())
    }

    /// Writes `real,imag` rows under a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "real,imag")?;
        for s in &self.samples {
            writeln!(out, "{},{}", s.re, s.im)?;
        }
        Ok(())
    }
}

fn check_lengths(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape {
            what: "sequence length",
            expected,
            got,
        });
    }
    Ok(())
}

fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Zadoff-Chu sequence `x[n] = exp(-iπ·u·n(n+1)/N)` for odd prime `N`.
pub fn zadoff_chu(root: usize, length: usize) -> Result<ComplexSequence> {
    if length == 2 || !is_prime(length) {
        return Err(Error::Domain(format!(
            "Zadoff-Chu length must be an odd prime, got {length}"
        )));
    }
    if root == 0 || root >= length {
        return Err(Error::Domain(format!(
            "Zadoff-Chu root must lie in 1..{length}, got {root}"
        )));
    }
    // n(n+1) is always even, so reduce u·n(n+1)/2 modulo N in integers
    // and only then convert to an angle.
    let n_len = length as u64;
    let u = root as u64;
    let samples = (0..n_len)
        .map(|n| {
            let tri = (n * (n + 1) / 2) % n_len;
            let k = (u * tri) % n_len;
            if k == 0 {
                return Complex64::new(1.0, 0.0);
            }
            let angle = -2.0 * std::f64::consts::PI * k as f64 / n_len as f64;
            Complex64::from_polar(1.0, angle)
        })
        .collect();
    Ok(ComplexSequence { samples })
}

/// The G contention preambles. Preamble `i` (1-based) uses ZC root `i`.
#[derive(Debug, Clone)]
pub struct PreambleSet {
    sequences: Vec<ComplexSequence>,
    roots: Vec<usize>,
    cp_length: usize,
}

impl PreambleSet {
    pub fn new(count: usize, length: usize, cp_length: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Domain("preamble set needs at least one sequence".into()));
        }
        if count >= length {
            return Err(Error::Domain(format!(
                "{count} distinct roots do not fit a length-{length} sequence"
            )));
        }
        let roots: Vec<usize> = (1..=count).collect();
        let sequences = roots.iter().map(|&u| zadoff_chu(u, length)).collect::<Result<_>>()?;
        Ok(PreambleSet {
            sequences,
            roots,
            cp_length,
        })
    }

    pub fn count(&self) -> usize {
        self.sequences.len()
    }

    pub fn sequence_length(&self) -> usize {
        self.sequences[0].len()
    }

    pub fn cp_length(&self) -> usize {
        self.cp_length
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Sequence for 1-based preamble index `s`.
    pub fn get(&self, s: usize) -> Option<&ComplexSequence> {
        s.checked_sub(1).and_then(|i| self.sequences.get(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &ComplexSequence)> {
        self.sequences.iter().enumerate().map(|(i, s)| (i + 1, s))
    }

    /// Preamble `s` with its cyclic prefix (the last `cp_length` samples) prepended.
    pub fn with_cyclic_prefix(&self, s: usize) -> Option<ComplexSequence> {
        let seq = self.get(s)?;
        let n = seq.len();
        let cp = self.cp_length.min(n);
        let mut samples = Vec::with_capacity(n + cp);
        samples.extend_from_slice(&seq.samples[n - cp..]);
        samples.extend_from_slice(&seq.samples);
        Some(ComplexSequence::new(samples))
    }
}

/// Opaque device identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId(pub u32);

impl std::fmt::Display for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "dev{}", self.0)
    }
}

/// One device's msg1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreambleTransmission {
    pub device_id: DeviceId,
    /// 1-based preamble index u(f).
    pub preamble: usize,
    pub annulus: AnnulusIndex,
    pub tx_power: f64,
    pub large_scale_fading: f64,
    /// Small-scale fading magnitude in [0, 1].
    pub small_scale_fading: f64,
}

impl PreambleTransmission {
    /// Transmission under the equal-received-power normalization `sqrt(β·ψ) = 1`.
    pub fn normalized(device_id: DeviceId, preamble: usize, annulus: AnnulusIndex, h: f64) -> Self {
        PreambleTransmission {
            device_id,
            preamble,
            annulus,
            tx_power: 1.0,
            large_scale_fading: 1.0,
            small_scale_fading: h,
        }
    }

    /// Received amplitude `sqrt(β·ψ)·h`.
    pub fn amplitude(&self) -> f64 {
        (self.tx_power * self.large_scale_fading).sqrt() * self.small_scale_fading
    }
}

/// Complex AWGN with per-sample variance σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    variance: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::Domain(format!("noise variance must be >= 0, got {variance}")));
        }
        Ok(NoiseModel { variance })
    }

    pub fn noiseless() -> Self {
        NoiseModel { variance: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Received PRACH, one sequence per annulus subcarrier.
#[derive(Debug, Clone)]
pub struct ReceivedPrach {
    per_annulus: Vec<ComplexSequence>,
}

impl ReceivedPrach {
    pub fn annulus(&self, j: AnnulusIndex) -> &ComplexSequence {
        &self.per_annulus[j.offset()]
    }

    pub fn annulus_count(&self) -> usize {
        self.per_annulus.len()
    }

    /// `(subcarrier, annulus, signal)` triples in annulus order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, AnnulusIndex, &ComplexSequence)> {
        self.per_annulus.iter().enumerate().map(|(i, seq)| {
            let j = AnnulusIndex::from_offset(i);
            (subcarrier_for_annulus(j), j, seq)
        })
    }
}

/// Superposes every transmission on its annulus subcarrier and adds noise.
pub fn synthesize_received<R: Rng + ?Sized>(
    transmissions: &[PreambleTransmission],
    preambles: &PreambleSet,
    geometry: &CellGeometry,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<ReceivedPrach> {
    let len = preambles.sequence_length();
    let mut per_annulus = vec![ComplexSequence::zeros(len); geometry.annulus_count()];
    for tx in transmissions {
        let j = AnnulusIndex::new(tx.annulus.get(), geometry)?;
        let seq = preambles.get(tx.preamble).ok_or_else(|| {
            Error::Domain(format!(
                "preamble index {} outside 1..={}",
                tx.preamble,
                preambles.count()
            ))
        })?;
        per_annulus[j.offset()].add_scaled(seq, tx.amplitude());
    }
    if noise.variance > 0.0 {
        let sd = (noise.variance / 2.0).sqrt();
        for sig in &mut per_annulus {
            for s in &mut sig.samples {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *s += Complex64::new(re * sd, im * sd);
            }
        }
    }
    Ok(ReceivedPrach { per_annulus })
}

/// Correlation of one annulus signal against one preamble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationOutput {
    pub value: Complex64,
    pub preamble: usize,
    pub annulus: AnnulusIndex,
}

/// `<received, ζ> / ‖ζ‖`.
pub fn correlate(received: &ComplexSequence, preamble: &ComplexSequence) -> Result<Complex64> {
    check_lengths(preamble.len(), received.len())?;
    let norm = preamble.norm();
    if norm == 0.0 {
        return Err(Error::Domain("cannot correlate against an all-zero preamble".into()));
    }
    let dot: Complex64 = received
        .samples
        .iter()
        .zip(&preamble.samples)
        .map(|(r, z)| r * z.conj())
        .sum();
    Ok(dot / norm)
}

/// Correlates every annulus signal against every preamble.
pub fn correlate_all(received: &ReceivedPrach, preambles: &PreambleSet) -> Result<Vec<CorrelationOutput>> {
    let mut out = Vec::with_capacity(received.annulus_count() * preambles.count());
    for (_, j, sig) in received.iter() {
        for (s, seq) in preambles.iter() {
            out.push(CorrelationOutput {
                value: correlate(sig, seq)?,
                preamble: s,
                annulus: j,
            });
        }
    }
    Ok(out)
}

/// Active `(s, j)` pair and its estimated number of transmitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Detection {
    pub preamble: usize,
    pub annulus: AnnulusIndex,
    pub multiplicity: usize,
}

/// Amplitude-threshold detector.
///
/// Under equal received power each transmitter contributes `sqrt(D_p)·h̄` to
/// the correlation magnitude, so the multiplicity estimate is that magnitude
/// divided by the per-device contribution, rounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detector {
    threshold: f64,
    unit_amplitude: f64,
}

impl Detector {
    pub fn new(threshold: f64, sequence_length: usize, mean_gain: f64) -> Result<Self> {
        if threshold.is_nan() || threshold <= 0.0 {
            return Err(Error::Domain(format!(
                "detection threshold must be > 0, got {threshold}"
            )));
        }
        if mean_gain.is_nan() || mean_gain <= 0.0 {
            return Err(Error::Domain(format!("mean channel gain must be > 0, got {mean_gain}")));
        }
        Ok(Detector {
            threshold,
            unit_amplitude: (sequence_length as f64).sqrt() * mean_gain,
        })
    }

    /// Threshold `0.5·sqrt(D_p)·h̄`.
    pub fn with_default_threshold(sequence_length: usize, mean_gain: f64) -> Result<Self> {
        let threshold = 0.5 * (sequence_length as f64).sqrt() * mean_gain;
        Self::new(threshold, sequence_length, mean_gain)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn detect(&self, correlations: &[CorrelationOutput]) -> Vec<Detection> {
        let mut found: Vec<Detection> = correlations
            .iter()
            .filter(|c| c.value.norm() >= self.threshold)
            .map(|c| Detection {
                preamble: c.preamble,
                annulus: c.annulus,
                multiplicity: ((c.value.norm() / self.unit_amplitude).round() as usize).max(1),
            })
            .collect();
        found.sort();
        found
    }
}
