//! CDR-driven postfilter: gain rule, cue-preserving stereo gain application and the
//! end-to-end pipeline.

use crate::cdr::{cdr_grid, CdrValue};
use crate::coherence::estimate_coherence;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::signal_io::StereoSignal;
use crate::stft::{analyze_padded, synthesize_padded, Spectrogram};

/// Real gains in `[gmin, 1]`, shared by both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMask {
    pub gains: TfGrid<f64>,
    pub gmin: f64,
}

impl GainMask {
    pub fn uniform(n_frames: usize, n_bins: usize, gain: f64) -> Self {
        Self {
            gains: TfGrid::filled(n_frames, n_bins, gain),
            gmin: gain.min(1.0),
        }
    }
}

/// `max(gmin, 1 - sqrt(mu / (cdr + 1)))`.
pub fn gain_from_cdr(cdr: CdrValue, mu: f64, gmin: f64) -> f64 {
    (1.0 - (mu / (cdr.linear() + 1.0)).sqrt()).clamp(gmin, 1.0)
}

/// Maps a CDR grid to gains, with optional first-order smoothing over frames.
pub fn gain_mask(cdr: &TfGrid<CdrValue>, config: &PipelineConfig) -> GainMask {
    let mut gains = cdr.map(|&c| gain_from_cdr(c, config.mu, config.gmin));
    if let Some(a) = config.gain_smoothing {
        for k in 1..gains.n_frames() {
            for b in 0..gains.n_bins() {
                let prev = *gains.get(k - 1, b);
                let g = gains.get_mut(k, b);
                *g = a * prev + (1.0 - a) * *g;
            }
        }
    }
    GainMask {
        gains,
        gmin: config.gmin,
    }
}

/// Multiplies both channels by the same real gain, leaving interaural phase and level
/// differences untouched.
pub fn apply_gain_stereo(
    left: &Spectrogram,
    right: &Spectrogram,
    mask: &GainMask,
) -> Result<(Spectrogram, Spectrogram)> {
    if !left.same_layout(right) || left.bins.shape() != mask.gains.shape() {
        return Err(Error::ShapeMismatch(format!(
            "left {:?}, right {:?}, mask {:?}",
            left.bins.shape(),
            right.bins.shape(),
            mask.gains.shape()
        )));
    }
    let scale = |spec: &Spectrogram| {
        let data = spec
            .bins
            .iter()
            .zip(mask.gains.iter())
            .map(|(x, &g)| x * g)
            .collect();
        Spectrogram {
            bins: TfGrid::from_vec(spec.n_frames(), spec.n_bins(), data)
                .expect("shape checked above"),
            ..spec.clone()
        }
    };
    Ok((scale(left), scale(right)))
}

/// Everything the pipeline computed for one signal.
#[derive(Debug, Clone)]
pub struct Processed {
    pub output: StereoSignal,
    pub cdr: TfGrid<CdrValue>,
    pub mask: GainMask,
    pub bin_freqs: Vec<f64>,
}

/// analyze -> coherence -> CDR -> gain -> apply -> synthesize.
pub fn process(signal: &StereoSignal, config: &PipelineConfig) -> Result<StereoSignal> {
    Ok(process_detailed(signal, config)?.output)
}

pub fn process_detailed(signal: &StereoSignal, config: &PipelineConfig) -> Result<Processed> {
    signal.validate()?;
    config.validate()?;
    let sr = signal.sample_rate;
    let (spec_l, padding) = analyze_padded(&signal.left, sr, config.frame_len, config.hop)?;
    let (spec_r, _) = analyze_padded(&signal.right, sr, config.frame_len, config.hop)?;
    let track = estimate_coherence(&spec_l, &spec_r, config.forgetting)?;
    let cdr = cdr_grid(&track, config)?;
    let mask = gain_mask(&cdr, config);
    let (out_l, out_r) = apply_gain_stereo(&spec_l, &spec_r, &mask)?;
    let output = StereoSignal::new(
        synthesize_padded(&out_l, padding, signal.len())?,
        synthesize_padded(&out_r, padding, signal.len())?,
        sr,
    )?;
    Ok(Processed {
        output,
        cdr,
        mask,
        bin_freqs: track.bin_freqs,
    })
}

/// Applies a precomputed mask to another signal of the same length, e.g. one known
/// component of a mixture.
pub fn apply_mask(
    signal: &StereoSignal,
    mask: &GainMask,
    config: &PipelineConfig,
) -> Result<StereoSignal> {
    let sr = signal.sample_rate;
    let (spec_l, padding) = analyze_padded(&signal.left, sr, config.frame_len, config.hop)?;
    let (spec_r, _) = analyze_padded(&signal.right, sr, config.frame_len, config.hop)?;
    let (out_l, out_r) = apply_gain_stereo(&spec_l, &spec_r, mask)?;
    StereoSignal::new(
        synthesize_padded(&out_l, padding, signal.len())?,
        synthesize_padded(&out_r, padding, signal.len())?,
        sr,
    )
}
