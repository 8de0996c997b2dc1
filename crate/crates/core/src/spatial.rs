//! Closed-form spatial models: free-field TDOA, frequency-dependent head ITD and the
//! coherence of the direct and diffuse sound components.
//!
//! Angles follow the head convention: `theta = 0` is the frontal median plane,
//! `theta = +-pi` the rear one, positive angles towards the right ear. A positive
//! delay means the right channel lags the left one, and coherences are
//! `E{X_l X_r^*}`, so a lagging right channel gives a positive phase.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::config::{DiffuseModel, FieldModel};
use crate::error::{Error, Result};

/// Upper edge of the low-frequency ITD regime (Hz).
pub const ITD_F_LOW: f64 = 500.0;
/// Lower edge of the high-frequency ITD regime (Hz).
pub const ITD_F_HIGH: f64 = 2000.0;
/// Argument scaling of the sinc term of the binaural diffuse coherence.
pub const BINAURAL_ALPHA: f64 = 2.2;
/// Low-pass scaling of the binaural diffuse coherence.
pub const BINAURAL_BETA: f64 = 0.5;

/// Sensor spacing and speed of sound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub distance_m: f64,
    pub speed_of_sound: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            distance_m: 0.17,
            speed_of_sound: 343.0,
        }
    }
}

impl Geometry {
    pub fn new(distance_m: f64, speed_of_sound: f64) -> Result<Self> {
        if !(distance_m > 0.0 && distance_m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "distance {distance_m} m must be positive"
            )));
        }
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "speed of sound {speed_of_sound} m/s must be positive"
            )));
        }
        Ok(Self {
            distance_m,
            speed_of_sound,
        })
    }

    /// `d / c` in seconds.
    fn transit(&self) -> f64 {
        self.distance_m / self.speed_of_sound
    }

    /// Dimensionless `2 pi f d / c`.
    pub fn wavenumber_distance(&self, freq: f64) -> f64 {
        2.0 * PI * freq * self.transit()
    }
}

/// Free-field time difference of arrival, `d sin(theta) / c`.
pub fn tdoa_free_field(theta: f64, geo: &Geometry) -> f64 {
    geo.transit() * theta.sin()
}

/// Low-frequency (f <= 500 Hz) head ITD.
pub fn itd_low(theta: f64, geo: &Geometry) -> f64 {
    1.5 * tdoa_free_field(theta, geo)
}

/// High-frequency (f >= 2 kHz) head ITD; one branch per front/rear quadrant.
pub fn itd_high(theta: f64, geo: &Geometry) -> f64 {
    let path = if theta < -FRAC_PI_2 {
        theta.sin() - (PI + theta)
    } else if theta > FRAC_PI_2 {
        theta.sin() + (PI - theta)
    } else {
        theta.sin() + theta
    };
    0.5 * geo.transit() * path
}

/// Frequency-dependent head ITD, linearly interpolated between the low and high regimes.
pub fn itd_binaural(theta: f64, freq: f64, geo: &Geometry) -> f64 {
    if freq <= ITD_F_LOW {
        itd_low(theta, geo)
    } else if freq >= ITD_F_HIGH {
        itd_high(theta, geo)
    } else {
        itd_transition(theta, freq, geo)
    }
}

/// The transition-band interpolation, valid for any `freq`; it equals [`itd_low`] at
/// 500 Hz and [`itd_high`] at 2 kHz exactly.
pub fn itd_transition(theta: f64, freq: f64, geo: &Geometry) -> f64 {
    let w = (freq - ITD_F_LOW) / (ITD_F_HIGH - ITD_F_LOW);
    (1.0 - w) * itd_low(theta, geo) + w * itd_high(theta, geo)
}

/// Delay of the direct component under the given field model.
pub fn direct_delay(theta: f64, freq: f64, geo: &Geometry, model: FieldModel) -> f64 {
    match model {
        FieldModel::FreeField => tdoa_free_field(theta, geo),
        FieldModel::Binaural => itd_binaural(theta, freq, geo),
    }
}

/// Unit-modulus coherence `exp(j 2 pi f tau)` of a plane wave from `theta`.
pub fn desired_coherence(theta: f64, freq: f64, geo: &Geometry, model: FieldModel) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * freq * direct_delay(theta, freq, geo, model))
}

/// Real coherence of a diffuse field.
pub fn diffuse_coherence(freq: f64, geo: &Geometry, model: DiffuseModel) -> f64 {
    let x = geo.wavenumber_distance(freq);
    match model {
        DiffuseModel::Sinc => sinc(x),
        DiffuseModel::Bessel2d => bessel_j0(x),
        DiffuseModel::Binaural => {
            sinc(BINAURAL_ALPHA * x) / (1.0 + (BINAURAL_BETA * x).powi(4)).sqrt()
        }
    }
}

/// Unnormalized sinc, `sin(x)/x` with the value 1 at 0.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Bessel function of the first kind, order zero, from the integral
/// `J0(x) = (1/pi) int_0^pi cos(x sin t) dt`. The integrand is smooth and periodic, so
/// the midpoint rule converges geometrically once the node count exceeds `|x|`.
pub fn bessel_j0(x: f64) -> f64 {
    let n = 32 + 2 * x.abs().ceil() as usize;
    let h = PI / n as f64;
    (0..n)
        .map(|i| (x * ((i as f64 + 0.5) * h).sin()).cos())
        .sum::<f64>()
        / n as f64
}
