//! Recursive short-time estimation of auto/cross power spectra and the complex coherence.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::TfGrid;
use crate::stft::Spectrogram;

pub const DEFAULT_FORGETTING: f64 = 0.68;

/// Below this value of `phi_ll * phi_rr` a bin is treated as silent and its coherence is 0.
const MIN_POWER_PRODUCT: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceTrack {
    pub gamma: TfGrid<Complex64>,
    pub phi_ll: TfGrid<f64>,
    pub phi_rr: TfGrid<f64>,
    pub phi_lr: TfGrid<Complex64>,
    /// Centre frequency of every bin (Hz).
    pub bin_freqs: Vec<f64>,
}

impl CoherenceTrack {
    pub fn n_frames(&self) -> usize {
        self.gamma.n_frames()
    }

    pub fn n_bins(&self) -> usize {
        self.gamma.n_bins()
    }
}

/// Normalized coherence with the zero-power rule and magnitude clamp.
pub fn normalized_coherence(phi_lr: Complex64, phi_ll: f64, phi_rr: f64) -> Complex64 {
    let p = phi_ll * phi_rr;
    if !(p >= MIN_POWER_PRODUCT) {
        return Complex64::default();
    }
    let g = phi_lr / p.sqrt();
    let mag = g.norm();
    if mag > 1.0 {
        g / mag
    } else {
        g
    }
}

/// First-order recursive averaging with forgetting factor `forgetting`, initialized
/// from the first frame's instantaneous spectra.
pub fn estimate_coherence(
    left: &Spectrogram,
    right: &Spectrogram,
    forgetting: f64,
) -> Result<CoherenceTrack> {
    if !left.same_layout(right) {
        return Err(Error::ShapeMismatch(format!(
            "left {:?} vs right {:?}",
            left.bins.shape(),
            right.bins.shape()
        )));
    }
    if !(forgetting > 0.0 && forgetting < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "forgetting factor {forgetting} outside (0, 1)"
        )));
    }
    let (n_frames, n_bins) = left.bins.shape();
    let mut phi_ll = TfGrid::filled(n_frames, n_bins, 0.0);
    let mut phi_rr = TfGrid::filled(n_frames, n_bins, 0.0);
    let mut phi_lr = TfGrid::filled(n_frames, n_bins, Complex64::default());
    let mut gamma = TfGrid::filled(n_frames, n_bins, Complex64::default());
    let a = forgetting;
    let mut ll = vec![0.0; n_bins];
    let mut rr = vec![0.0; n_bins];
    let mut lr = vec![Complex64::default(); n_bins];
    for k in 0..n_frames {
        let (xl, xr) = (left.bins.frame(k), right.bins.frame(k));
        for b in 0..n_bins {
            let inst_ll = xl[b].norm_sqr();
            let inst_rr = xr[b].norm_sqr();
            let inst_lr = xl[b] * xr[b].conj();
            if k == 0 {
                ll[b] = inst_ll;
                rr[b] = inst_rr;
                lr[b] = inst_lr;
            } else {
                ll[b] = a * ll[b] + (1.0 - a) * inst_ll;
                rr[b] = a * rr[b] + (1.0 - a) * inst_rr;
                lr[b] = lr[b] * a + inst_lr * (1.0 - a);
            }
        }
        phi_ll.frame_mut(k).copy_from_slice(&ll);
        phi_rr.frame_mut(k).copy_from_slice(&rr);
        phi_lr.frame_mut(k).copy_from_slice(&lr);
        for (b, g) in gamma.frame_mut(k).iter_mut().enumerate() {
            *g = normalized_coherence(lr[b], ll[b], rr[b]);
        }
    }
    Ok(CoherenceTrack {
        gamma,
        phi_ll,
        phi_rr,
        phi_lr,
        bin_freqs: left.bin_freqs(),
    })
}

/// Coherence per bin from spectra averaged over the whole signal.
pub fn long_term_coherence(left: &Spectrogram, right: &Spectrogram) -> Result<Vec<Complex64>> {
    if !left.same_layout(right) {
        return Err(Error::ShapeMismatch("spectrogram layouts differ".into()));
    }
    let n_bins = left.n_bins();
    let mut ll = vec![0.0; n_bins];
    let mut rr = vec![0.0; n_bins];
    let mut lr = vec![Complex64::default(); n_bins];
    for (xl, xr) in left.bins.frames().zip(right.bins.frames()) {
        for b in 0..n_bins {
            ll[b] += xl[b].norm_sqr();
            rr[b] += xr[b].norm_sqr();
            lr[b] += xl[b] * xr[b].conj();
        }
    }
    Ok((0..n_bins)
        .map(|b| normalized_coherence(lr[b], ll[b], rr[b]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::analyze;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn spec(x: &[f64]) -> Spectrogram {
        analyze(x, 16_000, 512, 128).unwrap()
    }

    #[test]
    fn identical_channels_are_fully_coherent() {
        let x = noise(8000, 1);
        let t = estimate_coherence(&spec(&x), &spec(&x), 0.68).unwrap();
        for (g, p) in t.gamma.iter().zip(t.phi_ll.iter()) {
            if *p > 0.0 {
                assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-12, "{g}");
            }
        }
    }

    #[test]
    fn negated_channel_gives_minus_one() {
        let x = noise(8000, 2);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let t = estimate_coherence(&spec(&x), &spec(&y), 0.68).unwrap();
        assert!(t
            .gamma
            .iter()
            .all(|g| (g - Complex64::new(-1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn silent_bins_are_incoherent() {
        let z = vec![0.0; 2048];
        let t = estimate_coherence(&spec(&z), &spec(&z), 0.5).unwrap();
        assert!(t.gamma.iter().all(|g| *g == Complex64::default()));
    }

    #[test]
    fn initialized_from_first_frame() {
        let x = noise(1024, 3);
        let y = noise(1024, 4);
        let (sl, sr) = (spec(&x), spec(&y));
        let t = estimate_coherence(&sl, &sr, 0.9).unwrap();
        for b in 0..sl.n_bins() {
            assert_eq!(*t.phi_ll.get(0, b), sl.bins.get(0, b).norm_sqr());
            let expect = 0.9 * sl.bins.get(0, b).norm_sqr() + 0.1 * sl.bins.get(1, b).norm_sqr();
            assert!((t.phi_ll.get(1, b) - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = spec(&noise(2048, 5));
        let b = spec(&noise(4096, 6));
        assert!(matches!(
            estimate_coherence(&a, &b, 0.68),
            Err(Error::ShapeMismatch(_))
        ));
    }

    fn median_magnitude_above_500_hz(track: &CoherenceTrack) -> f64 {
        let mut worst: f64 = 0.0;
        for (b, &f) in track.bin_freqs.iter().enumerate() {
            if f <= 500.0 {
                continue;
            }
            let mut mags: Vec<f64> = track.gamma.bin_track(b).map(|g| g.norm()).collect();
            mags.sort_by(f64::total_cmp);
            worst = worst.max(mags[mags.len() / 2]);
        }
        worst
    }

    #[test]
    fn independent_noise_coherence_shrinks_with_longer_averaging() {
        // 10 s of independent white noise, fixed seed. The default factor averages only a
        // handful of overlapping frames, so short-time |gamma| stays well above zero.
        let x = noise(160_000, 10);
        let y = noise(160_000, 11);
        let (sl, sr) = (spec(&x), spec(&y));
        let medians: Vec<f64> = [DEFAULT_FORGETTING, 0.9, 0.99]
            .iter()
            .map(|&l| median_magnitude_above_500_hz(&estimate_coherence(&sl, &sr, l).unwrap()))
            .collect();
        assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
        assert!(medians[0] < 0.6, "{medians:?}");
        assert!(medians[2] < 0.2, "{medians:?}");
    }

    #[test]
    fn long_term_average_of_independent_noise() {
        let x = noise(160_000, 12);
        let y = noise(160_000, 13);
        let g = long_term_coherence(&spec(&x), &spec(&y)).unwrap();
        let mean = g[1..].iter().map(|c| c.norm()).sum::<f64>() / (g.len() - 1) as f64;
        assert!(mean < 0.05, "{mean}");
    }

    proptest! {
        #[test]
        fn bounded_scale_invariant_and_conjugate_on_swap(
            seed in 0u64..500,
            scale in 1e-3f64..1e3,
            lambda in 0.05f64..0.95,
        ) {
            let x = noise(1536, seed);
            let y: Vec<f64> = noise(1536, seed + 1000)
                .iter()
                .zip(&x)
                .map(|(n, s)| 0.5 * n + s)
                .collect();
            let (sl, sr) = (spec(&x), spec(&y));
            let t = estimate_coherence(&sl, &sr, lambda).unwrap();
            prop_assert!(t.gamma.iter().all(|g| g.norm() <= 1.0 + 1e-12));
            for (ll, (rr, lr)) in t.phi_ll.iter().zip(t.phi_rr.iter().zip(t.phi_lr.iter())) {
                prop_assert!(lr.norm_sqr() <= ll * rr * (1.0 + 1e-9) + 1e-300);
            }

            let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
            let ts = estimate_coherence(&spec(&xs), &spec(&ys), lambda).unwrap();
            for (a, b) in t.gamma.iter().zip(ts.gamma.iter()) {
                prop_assert!((a - b).norm() < 1e-9);
            }

            let swapped = estimate_coherence(&sr, &sl, lambda).unwrap();
            for (a, b) in t.gamma.iter().zip(swapped.gamma.iter()) {
                prop_assert!((a.conj() - b).norm() < 1e-12);
            }
        }
    }
}
