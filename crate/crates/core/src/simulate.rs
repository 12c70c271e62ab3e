//! Toy spectroscopic survey: one Gaussian emission line per spectrum on a
//! flat, noisy continuum, plus signal-free null surveys.
//!
//! Every spectrum has its own ChaCha stream, so spectrum `i` does not depend
//! on how many others are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{predict, Dataset, PhysicalParams};

/// Stream offset separating null spectra from line spectra.
const NULL_STREAM: u64 = 1 << 48;

#[derive(Debug, Clone, PartialEq)]
pub struct SurveySpec {
    pub n_datasets: usize,
    pub wavelength_min: f64,
    pub wavelength_max: f64,
    pub pixel_width: f64,
    /// Rest-frame line centre; observed lines are shifted into
    /// `[location_min, location_max]`.
    pub line_rest: f64,
    pub line_width_true: f64,
    /// Power-law index of the amplitude density `p(A) ∝ A^-index`.
    pub amplitude_index: f64,
    pub amplitude_min: f64,
    pub noise_sigma: f64,
    pub location_min: f64,
    pub location_max: f64,
    pub seed: u64,
}

impl Default for SurveySpec {
    fn default() -> Self {
        Self {
            n_datasets: 100,
            wavelength_min: 400.0,
            wavelength_max: 800.0,
            pixel_width: 1.0,
            line_rest: 654.0,
            line_width_true: 0.5,
            amplitude_index: 3.0,
            amplitude_min: 2.0,
            noise_sigma: 1.0,
            location_min: 620.0,
            location_max: 780.0,
            seed: 1,
        }
    }
}

/// True line parameters of one simulated spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub dataset_id: u64,
    pub amplitude: f64,
    pub width: f64,
    pub location: f64,
}

impl TruthRow {
    pub fn params(&self) -> PhysicalParams {
        PhysicalParams {
            amplitude: self.amplitude,
            width: self.width,
            location: self.location,
        }
    }
}

impl SurveySpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.wavelength_min,
            self.wavelength_max,
            self.pixel_width,
            self.line_rest,
            self.line_width_true,
            self.amplitude_index,
            self.amplitude_min,
            self.noise_sigma,
            self.location_min,
            self.location_max,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("survey parameters must be finite".into()));
        }
        if self.n_datasets == 0 {
            return Err(Error::Config("n_datasets must be positive".into()));
        }
        if self.wavelength_max <= self.wavelength_min || self.pixel_width <= 0.0 {
            return Err(Error::Config(
                "need wavelength_min < wavelength_max and a positive pixel width".into(),
            ));
        }
        if self.n_pixels() < 2 {
            return Err(Error::Config("the grid needs at least two pixels".into()));
        }
        if self.amplitude_min < 0.0 || self.amplitude_index <= 1.0 {
            return Err(Error::Config(
                "amplitude_min must be non-negative and amplitude_index above 1".into(),
            ));
        }
        if self.line_width_true <= 0.0 || self.noise_sigma <= 0.0 {
            return Err(Error::Config(
                "line width and noise must be positive".into(),
            ));
        }
        if self.location_max < self.location_min {
            return Err(Error::Config("location_max below location_min".into()));
        }
        Ok(())
    }

    pub fn n_pixels(&self) -> usize {
        ((self.wavelength_max - self.wavelength_min) / self.pixel_width).round() as usize
    }

    /// Pixel centres covering `[wavelength_min, wavelength_max]`.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.n_pixels())
            .map(|i| self.wavelength_min + (i as f64 + 0.5) * self.pixel_width)
            .collect()
    }

    /// Inverse CDF of the amplitude power law.
    pub fn amplitude_from_uniform(&self, u: f64) -> f64 {
        self.amplitude_min * (1.0 - u).powf(-1.0 / (self.amplitude_index - 1.0))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn noisy(&self, id: u64, grid: &[f64], signal: &[f64], rng: &mut ChaCha8Rng) -> Dataset {
        let flux = signal
            .iter()
            .map(|m| m + self.noise_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Dataset::new(id, grid.to_vec(), flux, vec![self.noise_sigma; grid.len()])
            .expect("generated spectra are well formed")
    }
}

/// Simulates spectra with one line each and returns them with their truths.
pub fn generate_survey(spec: &SurveySpec) -> Result<(Vec<Dataset>, Vec<TruthRow>)> {
    spec.validate()?;
    let grid = spec.grid();
    Ok((0..spec.n_datasets as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = spec.rng(id);
            let u: f64 = rng.random();
            let truth = TruthRow {
                dataset_id: id,
                amplitude: spec.amplitude_from_uniform(u),
                width: spec.line_width_true,
                location: rng.random_range(spec.location_min..=spec.location_max),
            };
            let signal = predict(&truth.params(), &grid);
            (spec.noisy(id, &grid, &signal, &mut rng), truth)
        })
        .unzip())
}

/// Simulates signal-free spectra on the same grid.
pub fn generate_null(spec: &SurveySpec) -> Result<Vec<Dataset>> {
    spec.validate()?;
    let grid = spec.grid();
    let zero = vec![0.0; grid.len()];
    Ok((0..spec.n_datasets as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = spec.rng(NULL_STREAM + id);
            spec.noisy(id, &grid, &zero, &mut rng)
        })
        .collect())
}
