//! Synthetic binaural sound fields with known ground truth: plane waves with model
//! delays, diffuse noise with a target coherence, and calibrated mixtures.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{DiffuseModel, FieldModel};
use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::signal_io::StereoSignal;
use crate::spatial::{diffuse_coherence, direct_delay, Geometry};
use crate::stft::{analyze, analyze_padded, synthesize_padded, Spectrogram};

/// Filterbank used to impose plane-wave delays.
const DELAY_FRAME_LEN: usize = 1024;
const DELAY_HOP: usize = 256;
/// Filterbank in which diffuse noise is decorrelated and mixed.
const DIFFUSE_FRAME_LEN: usize = 1024;
const DIFFUSE_HOP: usize = 256;
/// Resolution of the PSD estimate used for per-bin calibration.
const PSD_FRAME_LEN: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    PlaneWave,
    Diffuse,
    Mixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub theta: f64,
    pub cdr_db: f64,
    pub field_model: FieldModel,
    pub diffuse_model: DiffuseModel,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// RMS level of generated noise (sources and diffuse fields).
    pub level: f64,
    /// Shape the diffuse spectrum after the coherent one so the CDR holds per bin,
    /// not only broadband.
    pub per_bin_calibration: bool,
    /// Rate of a sin^2 envelope on the source (Hz), a crude stand-in for the syllabic
    /// on/off structure of speech. `None` gives a stationary source.
    pub source_modulation_hz: Option<f64>,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            kind: FieldKind::Mixture,
            theta: 0.0,
            cdr_db: 0.0,
            field_model: FieldModel::Binaural,
            diffuse_model: DiffuseModel::Binaural,
            duration_s: 1.0,
            sample_rate: 16_000,
            seed: 0,
            level: 0.1,
            per_bin_calibration: false,
            source_modulation_hz: None,
        }
    }
}

impl FieldSpec {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) || self.n_samples() == 0 {
            return Err(Error::InvalidConfig(format!(
                "duration {} s must be positive",
                self.duration_s
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if !(-PI..=PI).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!(
                "theta {} outside [-pi, pi]",
                self.theta
            )));
        }
        if !self.cdr_db.is_finite() {
            return Err(Error::InvalidConfig("cdr_db must be finite".into()));
        }
        if let Some(rate) = self.source_modulation_hz {
            if !(rate > 0.0 && rate < self.sample_rate as f64 / 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "source modulation {rate} Hz outside (0, fs/2)"
                )));
            }
        }
        if !(self.level > 0.0 && self.level.is_finite()) {
            return Err(Error::InvalidConfig("level must be positive".into()));
        }
        Ok(())
    }
}

/// Standard-normal samples scaled to `level` RMS, deterministic in `seed`.
pub fn white_noise(len: usize, level: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            level * z
        })
        .collect()
}

/// White noise under a `sin^2(pi rate t)` envelope, rescaled to `level` RMS.
pub fn modulated_noise(
    len: usize,
    level: f64,
    seed: u64,
    rate_hz: f64,
    sample_rate: u32,
) -> Vec<f64> {
    let w = PI * rate_hz / sample_rate as f64;
    // the power envelope sin^4 averages to 3/8
    let scale = (8.0f64 / 3.0).sqrt();
    white_noise(len, level, seed)
        .into_iter()
        .enumerate()
        .map(|(i, x)| scale * x * (w * i as f64).sin().powi(2))
        .collect()
}

/// Left channel is `source`; right channel is `source` delayed by the model delay
/// (per-bin phase `-2 pi f tau(theta, f)`, applied frame by frame).
pub fn gen_plane_wave(
    source: &[f64],
    sample_rate: u32,
    theta: f64,
    geo: &Geometry,
    field_model: FieldModel,
) -> Result<StereoSignal> {
    if source.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSignal("non-finite source sample".into()));
    }
    let (spec, padding) = analyze_padded(source, sample_rate, DELAY_FRAME_LEN, DELAY_HOP)?;
    let shifts: Vec<Complex64> = spec
        .bin_freqs()
        .iter()
        .map(|&f| {
            Complex64::from_polar(
                1.0,
                -2.0 * PI * f * direct_delay(theta, f, geo, field_model),
            )
        })
        .collect();
    let n_bins = spec.n_bins();
    let data = spec
        .bins
        .iter()
        .enumerate()
        .map(|(i, x)| x * shifts[i % n_bins])
        .collect();
    let delayed = Spectrogram {
        bins: TfGrid::from_vec(spec.n_frames(), n_bins, data)?,
        ..spec
    };
    let right = synthesize_padded(&delayed, padding, source.len())?;
    StereoSignal::new(source.to_vec(), right, sample_rate)
}

/// Symmetric square root `[[a, b], [b, a]]` of the coherence matrix `[[1, g], [g, 1]]`.
fn coherence_matrix_sqrt(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma.abs() <= 1.0 + 1e-12) {
        return Err(Error::NotPositiveSemidefinite(gamma));
    }
    let plus = (1.0 + gamma).max(0.0).sqrt();
    let minus = (1.0 - gamma).max(0.0).sqrt();
    Ok((0.5 * (plus + minus), 0.5 * (plus - minus)))
}

/// Two noise channels whose coherence at every frequency equals the diffuse model.
///
/// Independent noises are decorrelated per bin over the whole signal before mixing, so
/// the long-term coherence matches the target without finite-sample leakage.
pub fn gen_diffuse(spec: &FieldSpec, geo: &Geometry) -> Result<StereoSignal> {
    gen_diffuse_shaped(spec, geo, None)
}

/// Like [`gen_diffuse`], optionally colouring both channels by the amplitude response
/// `shape(f)`; colouring both channels alike leaves the coherence unchanged.
pub fn gen_diffuse_shaped(
    spec: &FieldSpec,
    geo: &Geometry,
    shape: Option<&dyn Fn(f64) -> f64>,
) -> Result<StereoSignal> {
    spec.validate()?;
    let len = spec.n_samples();
    let sr = spec.sample_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = || -> Vec<f64> {
        (0..len)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect::<Vec<f64>>()
    };
    let (n1, n2) = (draw(), draw());
    let (s1, padding) = analyze_padded(&n1, sr, DIFFUSE_FRAME_LEN, DIFFUSE_HOP)?;
    let (s2, _) = analyze_padded(&n2, sr, DIFFUSE_FRAME_LEN, DIFFUSE_HOP)?;
    let n_frames = s1.bins.n_frames();
    let mut out1 = s1.bins.clone();
    let mut out2 = s2.bins.clone();
    let freqs = s1.bin_freqs();
    for (b, &freq) in freqs.iter().enumerate() {
        let (mut p11, mut p22) = (0.0, 0.0);
        let mut p21 = Complex64::default();
        for k in 0..n_frames {
            let (x1, x2) = (s1.bins.get(k, b), s2.bins.get(k, b));
            p11 += x1.norm_sqr();
            p22 += x2.norm_sqr();
            p21 += x2 * x1.conj();
        }
        if !(p11 > 0.0 && p22 > 0.0) {
            continue;
        }
        // Gram-Schmidt: remove the sample projection of channel 2 onto channel 1.
        let proj = p21 / p11;
        let residual = (p22 - p21.norm_sqr() / p11).max(f64::MIN_POSITIVE);
        let norm1 = (n_frames as f64 / p11).sqrt();
        let norm2 = (n_frames as f64 / residual).sqrt();
        let (a, c) = coherence_matrix_sqrt(diffuse_coherence(freq, geo, spec.diffuse_model))?;
        let gain = shape.map_or(1.0, |s| s(freq));
        for k in 0..n_frames {
            let x1 = *s1.bins.get(k, b);
            let z1 = x1 * norm1;
            let z2 = (s2.bins.get(k, b) - proj * x1) * norm2;
            *out1.get_mut(k, b) = (z1 * a + z2 * c) * gain;
            *out2.get_mut(k, b) = (z1 * c + z2 * a) * gain;
        }
    }
    let rebuild = |bins| Spectrogram { bins, ..s1.clone() };
    let scale = |x: Vec<f64>| x.into_iter().map(|v| v * spec.level).collect();
    StereoSignal::new(
        scale(synthesize_padded(&rebuild(out1), padding, len)?),
        scale(synthesize_padded(&rebuild(out2), padding, len)?),
        sr,
    )
}

/// A mixture and its two known components; `mixture == coherent + diffuse` sample-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub mixture: StereoSignal,
    pub coherent: StereoSignal,
    pub diffuse: StereoSignal,
}

pub fn mean_power(signal: &StereoSignal) -> f64 {
    signal
        .left
        .iter()
        .chain(&signal.right)
        .map(|x| x * x)
        .sum::<f64>()
        / (2 * signal.len()).max(1) as f64
}

/// Plane wave from `source` plus diffuse noise scaled to the requested broadband CDR.
pub fn gen_mixture(source: &[f64], spec: &FieldSpec, geo: &Geometry) -> Result<Mixture> {
    spec.validate()?;
    let coherent = gen_plane_wave(source, spec.sample_rate, spec.theta, geo, spec.field_model)?;
    let coherent_power = mean_power(&coherent);
    if !(coherent_power > 0.0) {
        return Err(Error::ZeroPowerSource);
    }
    let diffuse_spec = FieldSpec {
        duration_s: source.len() as f64 / spec.sample_rate as f64,
        ..spec.clone()
    };
    let raw = if spec.per_bin_calibration {
        let psd = Psd::of(&coherent.left, spec.sample_rate)?;
        gen_diffuse_shaped(&diffuse_spec, geo, Some(&|f| psd.amplitude_at(f)))?
    } else {
        gen_diffuse(&diffuse_spec, geo)?
    };
    let raw_power = mean_power(&raw);
    let target = coherent_power / 10f64.powf(spec.cdr_db / 10.0);
    let g = (target / raw_power).sqrt();
    let diffuse = StereoSignal::new(
        raw.left.iter().map(|x| x * g).collect(),
        raw.right.iter().map(|x| x * g).collect(),
        spec.sample_rate,
    )?;
    let mixture = StereoSignal::new(
        coherent
            .left
            .iter()
            .zip(&diffuse.left)
            .map(|(a, b)| a + b)
            .collect(),
        coherent
            .right
            .iter()
            .zip(&diffuse.right)
            .map(|(a, b)| a + b)
            .collect(),
        spec.sample_rate,
    )?;
    Ok(Mixture {
        mixture,
        coherent,
        diffuse,
    })
}

/// Generates the field described by `spec` with a white-noise source.
pub fn gen_field(spec: &FieldSpec, geo: &Geometry) -> Result<Mixture> {
    spec.validate()?;
    // the source draws from a different stream than the diffuse noise
    let seed = spec.seed ^ 0x5eed_5eed_5eed_5eed;
    let source = match spec.source_modulation_hz {
        Some(rate) => modulated_noise(spec.n_samples(), spec.level, seed, rate, spec.sample_rate),
        None => white_noise(spec.n_samples(), spec.level, seed),
    };
    match spec.kind {
        FieldKind::Mixture => gen_mixture(&source, spec, geo),
        FieldKind::PlaneWave => {
            let coherent =
                gen_plane_wave(&source, spec.sample_rate, spec.theta, geo, spec.field_model)?;
            let diffuse = StereoSignal::silent(coherent.len(), spec.sample_rate);
            Ok(Mixture {
                mixture: coherent.clone(),
                coherent,
                diffuse,
            })
        }
        FieldKind::Diffuse => {
            let diffuse = gen_diffuse(spec, geo)?;
            let coherent = StereoSignal::silent(diffuse.len(), spec.sample_rate);
            Ok(Mixture {
                mixture: diffuse.clone(),
                coherent,
                diffuse,
            })
        }
    }
}

/// Averaged periodogram with linear interpolation between bins.
struct Psd {
    bin_hz: f64,
    amplitude: Vec<f64>,
}

impl Psd {
    fn of(signal: &[f64], sample_rate: u32) -> Result<Self> {
        let padded;
        let signal = if signal.len() < PSD_FRAME_LEN {
            padded = [signal, &vec![0.0; PSD_FRAME_LEN - signal.len()]].concat();
            &padded[..]
        } else {
            signal
        };
        let spec = analyze(signal, sample_rate, PSD_FRAME_LEN, PSD_FRAME_LEN / 4)?;
        let mut power = vec![0.0; spec.n_bins()];
        for frame in spec.bins.frames() {
            for (p, x) in power.iter_mut().zip(frame) {
                *p += x.norm_sqr();
            }
        }
        Ok(Self {
            bin_hz: sample_rate as f64 / PSD_FRAME_LEN as f64,
            amplitude: power.iter().map(|p| p.sqrt()).collect(),
        })
    }

    fn amplitude_at(&self, f: f64) -> f64 {
        let pos = (f / self.bin_hz).max(0.0);
        let i = (pos.floor() as usize).min(self.amplitude.len() - 1);
        let j = (i + 1).min(self.amplitude.len() - 1);
        let t = pos - i as f64;
        self.amplitude[i] * (1.0 - t.min(1.0)) + self.amplitude[j] * t.min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::long_term_coherence;
    use crate::spatial::{desired_coherence, tdoa_free_field};
    use std::f64::consts::FRAC_PI_2;

    const GEO: Geometry = Geometry {
        distance_m: 0.17,
        speed_of_sound: 343.0,
    };

    #[test]
    fn frontal_plane_wave_has_identical_channels() {
        let src = white_noise(8000, 0.1, 1);
        for m in [FieldModel::FreeField, FieldModel::Binaural] {
            let s = gen_plane_wave(&src, 16_000, 0.0, &GEO, m).unwrap();
            assert_eq!(s.left, src);
            for (a, b) in s.left.iter().zip(&s.right) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_field_delay_matches_cross_correlation_peak() {
        // Oracle: brute-force cross-correlation over lags -20..=20.
        let src = white_noise(16_000, 0.1, 2);
        let s = gen_plane_wave(&src, 16_000, FRAC_PI_2, &GEO, FieldModel::FreeField).unwrap();
        let xcorr = |lag: i64| -> f64 {
            (100..s.len() - 100)
                .map(|n| s.left[n] * s.right[(n as i64 + lag) as usize])
                .sum()
        };
        let peak = (-20..=20)
            .max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b)))
            .unwrap();
        let expected = (16_000.0 * tdoa_free_field(FRAC_PI_2, &GEO)).round() as i64;
        assert_eq!(expected, 8);
        assert_eq!(peak, expected);
    }

    #[test]
    fn modulated_source_keeps_level_and_has_gaps() {
        let x = modulated_noise(160_000, 0.1, 4, 4.0, 16_000);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - 0.1).abs() < 0.002, "{rms}");
        // envelope zeros at multiples of 1/4 s
        assert!(x[3990..4010].iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn coherence_matrix_factorization() {
        for g in [-1.0, -0.4, 0.0, 0.3, 1.0] {
            let (a, b) = coherence_matrix_sqrt(g).unwrap();
            assert!((a * a + b * b - 1.0).abs() < 1e-15);
            assert!((2.0 * a * b - g).abs() < 1e-15);
        }
        assert!(coherence_matrix_sqrt(1.5).is_err());
    }

    #[test]
    fn unit_target_coherence_gives_identical_channels() {
        // d tiny => model coherence 1 everywhere below Nyquist, to first order
        let geo = Geometry::new(1e-12, 343.0).unwrap();
        let spec = FieldSpec {
            duration_s: 0.25,
            ..Default::default()
        };
        let s = gen_diffuse(&spec, &geo).unwrap();
        for (a, b) in s.left.iter().zip(&s.right) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = FieldSpec {
            duration_s: 0.2,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(
            gen_field(&spec, &GEO).unwrap(),
            gen_field(&spec, &GEO).unwrap()
        );
        let other = FieldSpec {
            seed: 10,
            ..spec.clone()
        };
        assert_ne!(
            gen_field(&spec, &GEO).unwrap(),
            gen_field(&other, &GEO).unwrap()
        );
    }

    #[test]
    fn mixture_is_sum_of_parts_and_calibrated() {
        for per_bin in [false, true] {
            let spec = FieldSpec {
                duration_s: 1.0,
                cdr_db: 0.0,
                theta: 0.6,
                per_bin_calibration: per_bin,
                ..Default::default()
            };
            let m = gen_field(&spec, &GEO).unwrap();
            for ch in 0..2 {
                let (x, c, d) = (
                    m.mixture.channels()[ch],
                    m.coherent.channels()[ch],
                    m.diffuse.channels()[ch],
                );
                assert!(x.iter().zip(c.iter().zip(d)).all(|(x, (c, d))| *x == c + d));
                let pc: f64 = c.iter().map(|v| v * v).sum();
                let pd: f64 = d.iter().map(|v| v * v).sum();
                assert!(
                    (10.0 * (pc / pd).log10()).abs() <= 0.1,
                    "ch {ch}: {}",
                    10.0 * (pc / pd).log10()
                );
            }
        }
    }

    #[test]
    fn zero_source_is_rejected() {
        let spec = FieldSpec::default();
        assert!(matches!(
            gen_mixture(&vec![0.0; 16_000], &spec, &GEO),
            Err(Error::ZeroPowerSource)
        ));
    }

    #[test]
    fn extreme_cdr_mixtures_follow_their_dominant_model() {
        for (cdr_db, coherent) in [(60.0, true), (-60.0, false)] {
            let spec = FieldSpec {
                duration_s: 10.0,
                cdr_db,
                theta: 0.5,
                seed: 3,
                ..Default::default()
            };
            let m = gen_field(&spec, &GEO).unwrap();
            let l = analyze(&m.mixture.left, 16_000, 512, 128).unwrap();
            let r = analyze(&m.mixture.right, 16_000, 512, 128).unwrap();
            let g = long_term_coherence(&l, &r).unwrap();
            for (b, &f) in l.bin_freqs().iter().enumerate() {
                if !(200.0..=6000.0).contains(&f) {
                    continue;
                }
                let model = if coherent {
                    desired_coherence(0.5, f, &GEO, FieldModel::Binaural)
                } else {
                    Complex64::new(diffuse_coherence(f, &GEO, DiffuseModel::Binaural), 0.0)
                };
                assert!(
                    (g[b] - model).norm() < 0.05,
                    "cdr {cdr_db} f {f}: {} vs {}",
                    g[b],
                    model
                );
            }
        }
    }
}
