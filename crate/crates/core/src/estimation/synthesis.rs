use crate::circle::grid_angle;
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64};
use crate::random::{complex_normal, seeded};
use crate::spectrum::SpectralDensity;

use super::Sample;

pub const DEFAULT_TAPS: usize = 64;

/// Two-sided FIR approximation of the Hermitian square-root factor of a
/// target spectrum, driven by unit complex Gaussian white noise.
///
/// Tap `h_τ = (1/K) Σ_k Φ_k^{1/2} e^{jθ_k τ}` for `τ = -T/2 .. T/2-1`, so the
/// frequency response `Σ_τ h_τ e^{-jθτ}` approximates `Φ^{1/2}`.
#[derive(Clone, Debug)]
pub struct ProcessSynthesizer {
    m: usize,
    taps: Vec<CMat>,
}

impl ProcessSynthesizer {
    pub fn new(phi: &SpectralDensity, taps: usize) -> Result<Self> {
        let k = phi.grid_len();
        if taps == 0 || !taps.is_multiple_of(2) || taps > k {
            return Err(Error::DimensionMismatch(format!(
                "tap count {taps} must be even, positive and at most the grid size {k}"
            )));
        }
        let m = phi.dim();
        let root = phi.hermitian_factor();
        let half = (taps / 2) as i64;
        let taps = (-half..half)
            .map(|tau| {
                let mut acc = CMat::zeros(m, m);
                for (idx, r) in root.samples().iter().enumerate() {
                    // reduce kτ mod K so the angle stays on the grid
                    let phase = (idx as i64 * tau).rem_euclid(k as i64) as usize;
                    acc += r * C64::from_polar(1.0, grid_angle(phase, k));
                }
                acc.unscale(k as f64)
            })
            .collect();
        Ok(Self { m, taps })
    }

    pub fn taps(&self) -> &[CMat] {
        &self.taps
    }

    /// `count` output samples. The first `T` noise draws only fill the
    /// filter window and are not emitted.
    pub fn generate(&self, count: usize, seed: u64) -> Vec<Sample> {
        let t = self.taps.len();
        let mut rng = seeded(seed);
        let noise: Vec<Sample> = (0..count + t)
            .map(|_| Sample::from_iterator(self.m, (0..self.m).map(|_| complex_normal(&mut rng))))
            .collect();
        (0..count)
            .map(|s| {
                let mut y = Sample::from_element(self.m, c(0.0, 0.0));
                for (i, h) in self.taps.iter().enumerate() {
                    y += h * &noise[s + t - i];
                }
                y
            })
            .collect()
    }
}

/// `N` samples of a zero-mean process with spectrum close to `phi`.
pub fn generate_process(phi: &SpectralDensity, count: usize, seed: u64) -> Result<Vec<Sample>> {
    Ok(ProcessSynthesizer::new(phi, DEFAULT_TAPS)?.generate(count, seed))
}
