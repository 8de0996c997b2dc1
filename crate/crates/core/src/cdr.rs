//! Coherent-to-diffuse ratio estimators.
//!
//! All estimators invert the mixing model
//! `gamma_x = (cdr * gamma_coh + gamma_diff) / (cdr + 1)` for the CDR. The directional
//! ones (`schwarz1`, `schwarz2`) need the coherence of the direct component and hence a
//! DOA; the blind ones (`thiergart2`, `schwarz3`) use only the diffuse model.

use num_complex::Complex64;

use crate::coherence::CoherenceTrack;
use crate::config::{DiffuseModel, Estimator, FieldModel, PipelineConfig};
use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::spatial::{desired_coherence, diffuse_coherence, Geometry};

pub const DEFAULT_CAP_DB: f64 = 40.0;

const DENOMINATOR_GUARD: f64 = 1e-12;
const MAX_BLIND_MAGNITUDE: f64 = 1.0 - 1e-9;
/// Above this CDR the mixture is numerically the direct-path coherence.
const COHERENT_LIMIT: f64 = 1e12;

/// A CDR floored at zero and capped.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct CdrValue {
    linear: f64,
}

impl CdrValue {
    /// Floors negative estimates at 0 and caps at `cap`; NaN and `+inf` map to the cap.
    pub fn from_raw(raw: f64, cap: f64) -> Self {
        let linear = if raw.is_nan() {
            cap
        } else {
            raw.clamp(0.0, cap)
        };
        Self { linear }
    }

    pub fn linear(self) -> f64 {
        self.linear
    }

    /// `10 log10(linear)`; `-inf` for a floored estimate.
    pub fn db(self) -> f64 {
        10.0 * self.linear.log10()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Coherences fed to one estimator evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorInputs {
    /// Estimated coherence of the observed mixture.
    pub gamma_x: Complex64,
    /// Model coherence of the direct component (directional estimators only).
    pub gamma_coh: Complex64,
    /// Model coherence of the diffuse component.
    pub gamma_diff: f64,
}

/// Coherence of a mixture with the given CDR.
pub fn mix_coherence(cdr: f64, gamma_coh: Complex64, gamma_diff: f64) -> Complex64 {
    if cdr > COHERENT_LIMIT {
        return gamma_coh;
    }
    (gamma_coh * cdr + gamma_diff) / (cdr + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionalMethod {
    Schwarz1,
    Schwarz2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlindMethod {
    Thiergart2,
    Schwarz3,
}

/// Unfloored, uncapped directional estimate; `None` when the denominator vanishes.
pub fn directional_raw(method: DirectionalMethod, inputs: &EstimatorInputs) -> Option<f64> {
    let rotated = inputs.gamma_coh.conj();
    let numerator = rotated * (inputs.gamma_diff - inputs.gamma_x);
    let denominator = (rotated * inputs.gamma_x).re - 1.0;
    if denominator.abs() < DENOMINATOR_GUARD {
        return None;
    }
    Some(match method {
        DirectionalMethod::Schwarz1 => numerator.re / denominator,
        DirectionalMethod::Schwarz2 => numerator.norm() / denominator.abs(),
    })
}

pub fn estimate_cdr_directional(
    method: DirectionalMethod,
    inputs: &EstimatorInputs,
    cap: f64,
) -> CdrValue {
    CdrValue::from_raw(
        directional_raw(method, inputs).unwrap_or(f64::INFINITY),
        cap,
    )
}

/// Unfloored, uncapped blind estimate. `|gamma_x|` is clamped below 1 first.
pub fn blind_raw(method: BlindMethod, inputs: &EstimatorInputs) -> f64 {
    let mut gx = inputs.gamma_x;
    let mag = gx.norm();
    if mag > MAX_BLIND_MAGNITUDE {
        gx *= MAX_BLIND_MAGNITUDE / mag;
    }
    let gd = inputs.gamma_diff;
    match method {
        BlindMethod::Thiergart2 => {
            let unit = Complex64::from_polar(1.0, gx.arg());
            ((gd - gx) / (gx - unit)).re
        }
        BlindMethod::Schwarz3 => {
            let re = gx.re;
            let m2 = gx.norm_sqr();
            let gd2 = gd * gd;
            let radicand = gd2 * re * re - gd2 * m2 + gd2 - 2.0 * gd * re + m2;
            (gd * re - m2 - radicand.max(0.0).sqrt()) / (m2 - 1.0)
        }
    }
}

pub fn estimate_cdr_blind(method: BlindMethod, inputs: &EstimatorInputs, cap: f64) -> CdrValue {
    CdrValue::from_raw(blind_raw(method, inputs), cap)
}

/// Dispatches on the configured estimator. Blind estimators ignore `gamma_coh`.
pub fn estimate_cdr(estimator: Estimator, inputs: &EstimatorInputs, cap: f64) -> CdrValue {
    match estimator {
        Estimator::Schwarz1 => estimate_cdr_directional(DirectionalMethod::Schwarz1, inputs, cap),
        Estimator::Schwarz2 => estimate_cdr_directional(DirectionalMethod::Schwarz2, inputs, cap),
        Estimator::Thiergart2 => estimate_cdr_blind(BlindMethod::Thiergart2, inputs, cap),
        Estimator::Schwarz3 => estimate_cdr_blind(BlindMethod::Schwarz3, inputs, cap),
    }
}

/// Model coherences evaluated once per frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinModels {
    pub gamma_coh: Vec<Complex64>,
    pub gamma_diff: Vec<f64>,
}

impl BinModels {
    pub fn new(
        freqs: &[f64],
        doa: Option<f64>,
        geo: &Geometry,
        field: FieldModel,
        diffuse: DiffuseModel,
    ) -> Self {
        Self {
            gamma_coh: freqs
                .iter()
                .map(|&f| match doa {
                    Some(theta) => desired_coherence(theta, f, geo, field),
                    None => Complex64::new(1.0, 0.0),
                })
                .collect(),
            gamma_diff: freqs
                .iter()
                .map(|&f| diffuse_coherence(f, geo, diffuse))
                .collect(),
        }
    }
}

/// Applies the configured estimator to every frame and bin of `track`.
pub fn cdr_grid(track: &CoherenceTrack, config: &PipelineConfig) -> Result<TfGrid<CdrValue>> {
    if config.estimator.is_directional() && config.doa_rad.is_none() {
        return Err(Error::MissingDoa(config.estimator.name()));
    }
    let geo = config.geometry()?;
    let models = BinModels::new(
        &track.bin_freqs,
        config.doa_rad,
        &geo,
        config.field_model,
        config.diffuse_model,
    );
    let cap = config.cdr_cap();
    let n_bins = track.n_bins();
    let mut out = Vec::with_capacity(track.n_frames() * n_bins);
    for frame in track.gamma.frames() {
        out.extend(frame.iter().enumerate().map(|(b, &gamma_x)| {
            estimate_cdr(
                config.estimator,
                &EstimatorInputs {
                    gamma_x,
                    gamma_coh: models.gamma_coh[b],
                    gamma_diff: models.gamma_diff[b],
                },
                cap,
            )
        }));
    }
    TfGrid::from_vec(track.n_frames(), n_bins, out)
}
