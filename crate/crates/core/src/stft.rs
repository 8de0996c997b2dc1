//! Short-time Fourier analysis and weighted overlap-add synthesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::TfGrid;

pub const DEFAULT_FRAME_LEN: usize = 512;
pub const DEFAULT_HOP: usize = 128;

/// Window-sum values below this are treated as uncovered samples and produce zeros.
const MIN_WINDOW_SUM: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    /// Periodic Hann.
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

/// One channel in the short-time spectral domain: `n_frames x (frame_len/2 + 1)` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: TfGrid<Complex64>,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
    pub window: Window,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.bins.n_frames()
    }

    pub fn n_bins(&self) -> usize {
        self.bins.n_bins()
    }

    pub fn bin_freq(&self, bin: usize) -> f64 {
        bin_frequency(bin, self.sample_rate, self.frame_len)
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|b| self.bin_freq(b)).collect()
    }

    pub fn same_layout(&self, other: &Spectrogram) -> bool {
        self.bins.shape() == other.bins.shape()
            && self.frame_len == other.frame_len
            && self.hop == other.hop
            && self.sample_rate == other.sample_rate
            && self.window == other.window
    }
}

pub fn bin_frequency(bin: usize, sample_rate: u32, frame_len: usize) -> f64 {
    bin as f64 * sample_rate as f64 / frame_len as f64
}

fn check_layout(frame_len: usize, hop: usize) -> Result<()> {
    if frame_len < 2 || !frame_len.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "frame_len {frame_len} must be even and >= 2"
        )));
    }
    if hop == 0 || hop > frame_len {
        return Err(Error::InvalidConfig(format!(
            "hop {hop} must be in 1..={frame_len}"
        )));
    }
    Ok(())
}

/// Analysis with the default periodic Hann window.
pub fn analyze(
    signal: &[f64],
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
) -> Result<Spectrogram> {
    analyze_with_window(signal, sample_rate, frame_len, hop, Window::Hann)
}

/// Frames `signal` into `1 + (len - frame_len) / hop` windowed segments and transforms each.
pub fn analyze_with_window(
    signal: &[f64],
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
    window: Window,
) -> Result<Spectrogram> {
    check_layout(frame_len, hop)?;
    if signal.len() < frame_len {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            frame_len,
        });
    }
    let n_frames = 1 + (signal.len() - frame_len) / hop;
    let n_bins = frame_len / 2 + 1;
    let win = window.coefficients(frame_len);
    let fft = FftPlanner::new().plan_fft_forward(frame_len);
    let mut buf = vec![Complex64::default(); frame_len];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(n_frames * n_bins);
    for k in 0..n_frames {
        let segment = &signal[k * hop..k * hop + frame_len];
        for ((b, &x), &w) in buf.iter_mut().zip(segment).zip(&win) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram {
        bins: TfGrid::from_vec(n_frames, n_bins, data)?,
        frame_len,
        hop,
        sample_rate,
        window,
    })
}

/// Weighted overlap-add, normalized by the summed squared window.
/// Output length is `(n_frames - 1) * hop + frame_len`.
pub fn synthesize(spec: &Spectrogram) -> Result<Vec<f64>> {
    let (frame_len, hop) = (spec.frame_len, spec.hop);
    check_layout(frame_len, hop)?;
    let n_bins = frame_len / 2 + 1;
    if spec.n_bins() != n_bins {
        return Err(Error::ShapeMismatch(format!(
            "{} bins for frame_len {frame_len}",
            spec.n_bins()
        )));
    }
    let n_frames = spec.n_frames();
    if n_frames == 0 {
        return Ok(Vec::new());
    }
    let out_len = (n_frames - 1) * hop + frame_len;
    let win = spec.window.coefficients(frame_len);
    let ifft = FftPlanner::new().plan_fft_inverse(frame_len);
    let mut buf = vec![Complex64::default(); frame_len];
    let mut scratch = vec![Complex64::default(); ifft.get_inplace_scratch_len()];
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    let scale = 1.0 / frame_len as f64;
    for k in 0..n_frames {
        let frame = spec.bins.frame(k);
        buf[..n_bins].copy_from_slice(frame);
        // DC and Nyquist of a real signal are real.
        buf[0].im = 0.0;
        buf[n_bins - 1].im = 0.0;
        for b in 1..n_bins - 1 {
            buf[frame_len - b] = frame[b].conj();
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = k * hop;
        for (n, (&w, y)) in win.iter().zip(&buf).enumerate() {
            out[start + n] += w * y.re * scale;
            norm[start + n] += w * w;
        }
    }
    for (y, &s) in out.iter_mut().zip(&norm) {
        *y = if s > MIN_WINDOW_SUM { *y / s } else { 0.0 };
    }
    Ok(out)
}

/// Zero padding that makes every input sample fully overlapped and processes the tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Padding {
    pub front: usize,
    pub total_len: usize,
}

impl Padding {
    pub fn for_signal(len: usize, frame_len: usize, hop: usize) -> Self {
        let front = frame_len - hop;
        let last = front + len.max(1) - 1;
        let total_len = (last / hop) * hop + frame_len;
        Self { front, total_len }
    }

    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        let mut padded = vec![0.0; self.total_len];
        padded[self.front..self.front + signal.len()].copy_from_slice(signal);
        padded
    }

    pub fn strip(&self, padded: &[f64], len: usize) -> Vec<f64> {
        padded[self.front..self.front + len].to_vec()
    }
}

/// Analysis of an arbitrary-length signal with front and tail zero padding.
pub fn analyze_padded(
    signal: &[f64],
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
) -> Result<(Spectrogram, Padding)> {
    check_layout(frame_len, hop)?;
    let padding = Padding::for_signal(signal.len(), frame_len, hop);
    let spec = analyze(&padding.apply(signal), sample_rate, frame_len, hop)?;
    Ok((spec, padding))
}

/// Inverse of [`analyze_padded`]; returns exactly `len` samples.
pub fn synthesize_padded(spec: &Spectrogram, padding: Padding, len: usize) -> Result<Vec<f64>> {
    let full = synthesize(spec)?;
    if full.len() < padding.front + len {
        return Err(Error::ShapeMismatch(format!(
            "synthesized {} samples, need {}",
            full.len(),
            padding.front + len
        )));
    }
    Ok(padding.strip(&full, len))
}
