//! Pipeline configuration and the flat `key = value` config file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::Geometry;

/// CDR estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Schwarz1,
    Schwarz2,
    Thiergart2,
    Schwarz3,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Schwarz1,
        Estimator::Schwarz2,
        Estimator::Thiergart2,
        Estimator::Schwarz3,
    ];

    /// Whether the estimator needs a model of the desired-signal coherence (and thus a DOA).
    pub fn is_directional(self) -> bool {
        matches!(self, Estimator::Schwarz1 | Estimator::Schwarz2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Schwarz1 => "schwarz1",
            Estimator::Schwarz2 => "schwarz2",
            Estimator::Thiergart2 => "thiergart2",
            Estimator::Schwarz3 => "schwarz3",
        }
    }
}

/// Coherence model of the desired (direct) component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldModel {
    FreeField,
    Binaural,
}

impl FieldModel {
    pub fn name(self) -> &'static str {
        match self {
            FieldModel::FreeField => "free_field",
            FieldModel::Binaural => "binaural",
        }
    }
}

/// Coherence model of the diffuse component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffuseModel {
    /// Spherically isotropic field between unobstructed microphones.
    Sinc,
    /// Cylindrically isotropic field.
    Bessel2d,
    /// Spherically isotropic field at the ears of a head.
    Binaural,
}

impl DiffuseModel {
    pub fn name(self) -> &'static str {
        match self {
            DiffuseModel::Sinc => "sinc",
            DiffuseModel::Bessel2d => "bessel_2d",
            DiffuseModel::Binaural => "binaural",
        }
    }
}

macro_rules! impl_str_enum {
    ($ty:ty, $what:literal, [$($variant:expr),+]) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                let s = s.trim().to_ascii_lowercase().replace('-', "_");
                [$($variant),+]
                    .into_iter()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| Error::InvalidConfig(format!(concat!("unknown ", $what, " '{}'"), s)))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

impl_str_enum!(
    Estimator,
    "estimator",
    [
        Estimator::Schwarz1,
        Estimator::Schwarz2,
        Estimator::Thiergart2,
        Estimator::Schwarz3
    ]
);
impl_str_enum!(
    FieldModel,
    "field model",
    [FieldModel::FreeField, FieldModel::Binaural]
);
impl_str_enum!(
    DiffuseModel,
    "diffuse model",
    [
        DiffuseModel::Sinc,
        DiffuseModel::Bessel2d,
        DiffuseModel::Binaural
    ]
);

/// All parameters of the dereverberation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mic_distance_m: f64,
    pub speed_of_sound: f64,
    /// Direction of arrival in radians; only needed by directional estimators.
    pub doa_rad: Option<f64>,
    pub estimator: Estimator,
    pub field_model: FieldModel,
    pub diffuse_model: DiffuseModel,
    pub frame_len: usize,
    pub hop: usize,
    /// Forgetting factor of the recursive spectral averaging.
    pub forgetting: f64,
    /// Overestimation factor of the gain rule.
    pub mu: f64,
    pub gmin: f64,
    pub cdr_cap_db: f64,
    /// Optional first-order recursive smoothing of the gain over frames; `None` disables it.
    pub gain_smoothing: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mic_distance_m: 0.17,
            speed_of_sound: 343.0,
            doa_rad: None,
            estimator: Estimator::Schwarz3,
            field_model: FieldModel::Binaural,
            diffuse_model: DiffuseModel::Binaural,
            frame_len: 512,
            hop: 128,
            forgetting: 0.68,
            mu: 1.3,
            gmin: 0.1,
            cdr_cap_db: 40.0,
            gain_smoothing: None,
        }
    }
}

impl PipelineConfig {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.mic_distance_m, self.speed_of_sound)
    }

    pub fn cdr_cap(&self) -> f64 {
        10f64.powf(self.cdr_cap_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.geometry()?;
        if let Some(theta) = self.doa_rad {
            if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&theta) {
                return bad(format!("doa_rad {theta} outside [-pi, pi]"));
            }
        }
        if self.frame_len < 2 || !self.frame_len.is_multiple_of(2) {
            return bad(format!(
                "frame_len {} must be even and >= 2",
                self.frame_len
            ));
        }
        if self.hop == 0 || !self.frame_len.is_multiple_of(self.hop) {
            return bad(format!(
                "hop {} must divide frame_len {}",
                self.hop, self.frame_len
            ));
        }
        if !(self.forgetting > 0.0 && self.forgetting < 1.0) {
            return bad(format!("forgetting {} outside (0, 1)", self.forgetting));
        }
        if !(self.mu >= 1.0) {
            return bad(format!("mu {} must be >= 1", self.mu));
        }
        if !(self.gmin > 0.0 && self.gmin < 1.0) {
            return bad(format!("gmin {} outside (0, 1)", self.gmin));
        }
        if !self.cdr_cap_db.is_finite() {
            return bad("cdr_cap_db must be finite".into());
        }
        if let Some(a) = self.gain_smoothing {
            if !(0.0..1.0).contains(&a) {
                return bad(format!("gain_smoothing {a} outside [0, 1)"));
            }
        }
        if self.estimator.is_directional() && self.doa_rad.is_none() {
            return Err(Error::MissingDoa(self.estimator.name()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Keys are the field names of this struct.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value '{value}' for {key}")))
        }
        match key {
            "mic_distance_m" => self.mic_distance_m = num(key, value)?,
            "speed_of_sound" => self.speed_of_sound = num(key, value)?,
            "doa_rad" => self.doa_rad = Some(num(key, value)?),
            "estimator" => self.estimator = value.parse()?,
            "field_model" => self.field_model = value.parse()?,
            "diffuse_model" => self.diffuse_model = value.parse()?,
            "frame_len" => self.frame_len = num(key, value)?,
            "hop" => self.hop = num(key, value)?,
            "forgetting" => self.forgetting = num(key, value)?,
            "mu" => self.mu = num(key, value)?,
            "gmin" => self.gmin = num(key, value)?,
            "cdr_cap_db" => self.cdr_cap_db = num(key, value)?,
            "gain_smoothing" => self.gain_smoothing = Some(num(key, value)?),
            _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses a config file body on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::default();
        config.apply_str(&text)?;
        Ok(config)
    }
}
