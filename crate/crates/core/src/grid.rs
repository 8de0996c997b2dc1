//! Dense frame-by-bin grid used for spectra, coherence tracks, CDR values and masks.

use crate::error::{Error, Result};

/// Row-major `n_frames x n_bins` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid<T> {
    n_frames: usize,
    n_bins: usize,
    data: Vec<T>,
}

impl<T: Clone> TfGrid<T> {
    pub fn filled(n_frames: usize, n_bins: usize, value: T) -> Self {
        Self {
            n_frames,
            n_bins,
            data: vec![value; n_frames * n_bins],
        }
    }
}

impl<T> TfGrid<T> {
    pub fn from_vec(n_frames: usize, n_bins: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_frames * n_bins {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n_frames}x{n_bins} grid",
                data.len()
            )));
        }
        Ok(Self {
            n_frames,
            n_bins,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_frames, self.n_bins)
    }

    pub fn get(&self, frame: usize, bin: usize) -> &T {
        &self.data[frame * self.n_bins + bin]
    }

    pub fn get_mut(&mut self, frame: usize, bin: usize) -> &mut T {
        &mut self.data[frame * self.n_bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[T] {
        &self.data[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    pub fn frame_mut(&mut self, frame: usize) -> &mut [T] {
        &mut self.data[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.n_bins.max(1))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> TfGrid<U> {
        TfGrid {
            n_frames: self.n_frames,
            n_bins: self.n_bins,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Values of one bin across all frames.
    pub fn bin_track(&self, bin: usize) -> impl Iterator<Item = &T> {
        self.data.iter().skip(bin).step_by(self.n_bins.max(1))
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }
}
