//! The single-Gaussian-line spectral model.
//!
//! A line is described by an amplitude (in units of the noise standard
//! deviation), a width and a centre, both in nm. The prior is log-uniform in
//! amplitude over `[1, 100]`, log-uniform in width over `[0.15, 15]` nm and
//! uniform in location over `[600, 1000]` nm.
//!
//! The [`Model`] trait is what the sampler drives: a slow
//! [`predict`](Model::predict) evaluated once per parameter vector and a fast
//! [`log_likelihood`](Model::log_likelihood) evaluated once per data set.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const AMPLITUDE_MIN: f64 = 1.0;
pub const AMPLITUDE_MAX: f64 = 100.0;
pub const WIDTH_MIN: f64 = 0.15;
pub const WIDTH_MAX: f64 = 15.0;
pub const LOCATION_MIN: f64 = 600.0;
pub const LOCATION_MAX: f64 = 1000.0;

/// Beyond this many widths from the centre `exp(-x²/2)` underflows to exactly
/// zero in `f64`, so truncating the prediction there is lossless.
const TAIL_WIDTHS: f64 = 40.0;

/// A point in the unit hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoint(Vec<f64>);

impl UnitPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((axis, c)) = coords
            .iter()
            .enumerate()
            .find(|(_, c)| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::Domain(format!(
                "unit coordinate {axis} = {c} lies outside [0, 1]"
            )));
        }
        Ok(Self(coords))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for UnitPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Physical parameters of one Gaussian emission line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Peak flux, in multiples of the noise standard deviation.
    pub amplitude: f64,
    /// Gaussian standard deviation in nm.
    pub width: f64,
    /// Line centre in nm.
    pub location: f64,
}

impl PhysicalParams {
    pub fn to_array(self) -> [f64; 3] {
        [self.amplitude, self.width, self.location]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match *v {
            [amplitude, width, location] => Ok(Self {
                amplitude,
                width,
                location,
            }),
            _ => Err(Error::Structural(format!(
                "expected 3 line parameters, got {}",
                v.len()
            ))),
        }
    }

    /// Whether the parameters lie inside the prior box.
    pub fn in_prior_support(&self) -> bool {
        (AMPLITUDE_MIN..=AMPLITUDE_MAX).contains(&self.amplitude)
            && (WIDTH_MIN..=WIDTH_MAX).contains(&self.width)
            && (LOCATION_MIN..=LOCATION_MAX).contains(&self.location)
    }
}

/// Maps the unit cube onto the line prior box.
pub fn prior_transform(u: &UnitPoint) -> Result<PhysicalParams> {
    let c = u.as_slice();
    if c.len() != 3 {
        return Err(Error::Structural(format!(
            "line prior is 3-dimensional, got {} coordinates",
            c.len()
        )));
    }
    Ok(transform_unchecked(c))
}

fn transform_unchecked(c: &[f64]) -> PhysicalParams {
    PhysicalParams {
        amplitude: AMPLITUDE_MIN * (AMPLITUDE_MAX / AMPLITUDE_MIN).powf(c[0]),
        width: WIDTH_MIN * (WIDTH_MAX / WIDTH_MIN).powf(c[1]),
        location: LOCATION_MIN + (LOCATION_MAX - LOCATION_MIN) * c[2],
    }
}

/// Inverse of [`prior_transform`].
pub fn inverse_prior_transform(p: &PhysicalParams) -> Result<UnitPoint> {
    if !p.in_prior_support() {
        return Err(Error::Domain(format!("{p:?} lies outside the prior box")));
    }
    let coords = vec![
        (p.amplitude / AMPLITUDE_MIN).ln() / (AMPLITUDE_MAX / AMPLITUDE_MIN).ln(),
        (p.width / WIDTH_MIN).ln() / (WIDTH_MAX / WIDTH_MIN).ln(),
        (p.location - LOCATION_MIN) / (LOCATION_MAX - LOCATION_MIN),
    ];
    // rounding can push a boundary value a hair outside the cube
    UnitPoint::new(coords.into_iter().map(|c| c.clamp(0.0, 1.0)).collect())
}

/// Evaluates the line profile on a wavelength grid.
pub fn predict(p: &PhysicalParams, wavelengths: &[f64]) -> Vec<f64> {
    let inv = 1.0 / (2.0 * p.width * p.width);
    wavelengths
        .iter()
        .map(|&lam| {
            let dx = lam - p.location;
            p.amplitude * (-dx * dx * inv).exp()
        })
        .collect()
}

/// One observed spectrum with per-pixel Gaussian errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id: u64,
    wavelengths: Vec<f64>,
    flux: Vec<f64>,
    flux_err: Vec<f64>,
    inv_var: Vec<f64>,
    null_loglike: f64,
}

impl Dataset {
    pub fn new(id: u64, wavelengths: Vec<f64>, flux: Vec<f64>, flux_err: Vec<f64>) -> Result<Self> {
        let n = wavelengths.len();
        if flux.len() != n || flux_err.len() != n {
            return Err(Error::Structural(format!(
                "dataset {id}: wavelength/flux/error lengths differ ({n}, {}, {})",
                flux.len(),
                flux_err.len()
            )));
        }
        if n < 2 {
            return Err(Error::Structural(format!(
                "dataset {id}: need at least 2 pixels, got {n}"
            )));
        }
        if !wavelengths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain(format!(
                "dataset {id}: wavelengths must be strictly increasing"
            )));
        }
        if let Some(e) = flux_err.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Domain(format!(
                "dataset {id}: flux errors must be positive and finite, found {e}"
            )));
        }
        if flux.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("dataset {id}: non-finite flux")));
        }
        let inv_var = flux_err.iter().map(|s| 1.0 / (s * s)).collect();
        let null_loglike = gaussian_loglike_sum(flux.iter().copied(), &flux_err);
        Ok(Self {
            id,
            wavelengths,
            flux,
            flux_err,
            inv_var,
            null_loglike,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    pub fn flux_err(&self) -> &[f64] {
        &self.flux_err
    }

    pub fn len(&self) -> usize {
        self.flux.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flux.is_empty()
    }
}

/// `-1/2 Σ [(rᵢ/σᵢ)² + ln 2πσᵢ²]` over residuals `rᵢ`.
fn gaussian_loglike_sum(residuals: impl Iterator<Item = f64>, sigma: &[f64]) -> f64 {
    -0.5 * residuals
        .zip(sigma)
        .map(|(r, &s)| {
            let z = r / s;
            z * z + (2.0 * PI * s * s).ln()
        })
        .sum::<f64>()
}

/// Normalised Gaussian log-likelihood of a dense prediction.
pub fn log_likelihood(prediction: &[f64], d: &Dataset) -> Result<f64> {
    if prediction.len() != d.len() {
        return Err(Error::Structural(format!(
            "prediction has {} pixels, dataset {} has {}",
            prediction.len(),
            d.id,
            d.len()
        )));
    }
    Ok(gaussian_loglike_sum(
        d.flux.iter().zip(prediction).map(|(x, m)| x - m),
        &d.flux_err,
    ))
}

/// Exact evidence of the no-line model, which has no free parameters.
pub fn null_log_evidence(d: &Dataset) -> f64 {
    d.null_loglike
}

/// A likelihood split into an expensive prediction and a cheap comparison.
///
/// `predict` runs once per sampled point; `log_likelihood` runs once per
/// (point, data set) pair and must be pure.
pub trait Model: Sync {
    type Data: Sync;
    type Prediction: Send + Sync;

    fn ndim(&self) -> usize;

    /// Unit cube to physical coordinates.
    fn transform(&self, unit: &[f64]) -> Vec<f64>;

    fn predict(&self, physical: &[f64]) -> Self::Prediction;

    fn log_likelihood(&self, prediction: &Self::Prediction, data: &Self::Data) -> f64;
}

/// Line profile restricted to the pixels where it is non-zero.
#[derive(Debug, Clone)]
pub struct LinePrediction {
    start: usize,
    values: Vec<f64>,
}

impl LinePrediction {
    /// Expands to the full grid.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        out[self.start..self.start + self.values.len()].copy_from_slice(&self.values);
        out
    }
}

/// The line model bound to one wavelength grid shared by all data sets.
#[derive(Debug, Clone)]
pub struct LineModel {
    grid: Vec<f64>,
}

impl LineModel {
    pub fn new(grid: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain(
                "wavelength grid must be strictly increasing with at least 2 pixels".into(),
            ));
        }
        Ok(Self { grid })
    }

    /// Builds the model from the common grid of `datasets`.
    pub fn for_datasets(datasets: &[Dataset]) -> Result<Self> {
        let first = datasets
            .first()
            .ok_or_else(|| Error::Precondition("no datasets".into()))?;
        if let Some(d) = datasets.iter().find(|d| d.wavelengths != first.wavelengths) {
            return Err(Error::Structural(format!(
                "dataset {} does not share the wavelength grid of dataset {}",
                d.id, first.id
            )));
        }
        Self::new(first.wavelengths.clone())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

impl Model for LineModel {
    type Data = Dataset;
    type Prediction = LinePrediction;

    fn ndim(&self) -> usize {
        3
    }

    fn transform(&self, unit: &[f64]) -> Vec<f64> {
        transform_unchecked(unit).to_array().to_vec()
    }

    fn predict(&self, physical: &[f64]) -> LinePrediction {
        let (amp, width, loc) = (physical[0], physical[1], physical[2]);
        let reach = TAIL_WIDTHS * width;
        let start = self.grid.partition_point(|&l| l < loc - reach);
        let end = self.grid.partition_point(|&l| l <= loc + reach);
        let inv = 1.0 / (2.0 * width * width);
        let values = self.grid[start..end]
            .iter()
            .map(|&lam| {
                let dx = lam - loc;
                amp * (-dx * dx * inv).exp()
            })
            .collect();
        LinePrediction { start, values }
    }

    fn log_likelihood(&self, prediction: &LinePrediction, data: &Dataset) -> f64 {
        // -1/2 Σ (x-m)²/σ² = -1/2 Σ x²/σ² + Σ (x m - m²/2)/σ²; m is zero off the window
        let range = prediction.start..prediction.start + prediction.values.len();
        let gain: f64 = prediction
            .values
            .iter()
            .zip(&data.flux[range.clone()])
            .zip(&data.inv_var[range])
            .map(|((&m, &x), &w)| (x * m - 0.5 * m * m) * w)
            .sum();
        data.null_loglike + gain
    }
}
