//! Acceptance suite (custom harness). Prints exactly one `criterion N ... PASS|FAIL` line
//! per criterion and exits non-zero if any criterion is not met.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bincdr::analysis::{default_freq_grid, default_theta_grid, robustness_surface};
use bincdr::cdr::{
    blind_raw, db_to_linear, directional_raw, mix_coherence, BlindMethod, DirectionalMethod,
    EstimatorInputs,
};
use bincdr::coherence::long_term_coherence;
use bincdr::dereverb::{apply_gain_stereo, apply_mask, process, process_detailed};
use bincdr::spatial::{
    desired_coherence, diffuse_coherence, itd_binaural, itd_high, itd_low, itd_transition,
    tdoa_free_field,
};
use bincdr::stft::{analyze, synthesize};
use bincdr::synth::{gen_field, white_noise, FieldKind, FieldSpec};
use bincdr::{DiffuseModel, Estimator, FieldModel, GainMask, Geometry, PipelineConfig, TfGrid};

const GEO: Geometry = Geometry {
    distance_m: 0.17,
    speed_of_sound: 343.0,
};
const FS: u32 = 16_000;

struct Outcome {
    pass: bool,
    line: String,
}

fn report(n: u32, name: &str, pass: bool, detail: String) -> Outcome {
    Outcome {
        pass,
        line: format!(
            "criterion {n} {name}: {} ({detail})",
            if pass { "PASS" } else { "FAIL" }
        ),
    }
}

fn main() {
    let criteria: [fn() -> Outcome; 8] = [
        criterion_1_stft_reconstruction,
        criterion_2_matched_model_inversion,
        criterion_3_thiergart2_zero_noise_exactness,
        criterion_4_free_field_error_surface,
        criterion_5_itd_model,
        criterion_6_synthetic_field_fidelity,
        criterion_7_end_to_end_suppression,
        criterion_8_cue_preservation,
    ];
    let mut failed = 0;
    for criterion in criteria {
        let outcome = criterion();
        println!("{}", outcome.line);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

fn degrees(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|i| (i as f64 * step).to_radians()).collect()
}

fn criterion_1_stft_reconstruction() -> Outcome {
    let x = white_noise(3 * FS as usize, 1.0, 101);
    let start = Instant::now();
    let spec = analyze(&x, FS, 512, 128).unwrap();
    let y = synthesize(&spec).unwrap();
    let elapsed = start.elapsed();
    // interior: samples covered by a full set of overlapping frames
    let (lo, hi) = (512, y.len().min(x.len()) - 512);
    let err: Vec<f64> = (lo..hi).map(|n| x[n] - y[n]).collect();
    let snr = 10.0 * (power(&x[lo..hi]) / power(&err).max(1e-300)).log10();
    report(
        1,
        "stft reconstruction",
        snr >= 50.0 && elapsed < Duration::from_secs(1),
        format!("interior SNR {snr:.1} dB >= 50, runtime {elapsed:.2?} < 1 s"),
    )
}

/// Raw estimate on matched models; `None` for a guarded (singular) cell.
fn matched_estimate(est: Estimator, inputs: &EstimatorInputs) -> Option<f64> {
    match est {
        Estimator::Schwarz1 => directional_raw(DirectionalMethod::Schwarz1, inputs),
        Estimator::Schwarz2 => directional_raw(DirectionalMethod::Schwarz2, inputs),
        Estimator::Thiergart2 => Some(blind_raw(BlindMethod::Thiergart2, inputs)),
        Estimator::Schwarz3 => {
            // the blind estimators clamp |gamma_x| just below 1
            (inputs.gamma_x.norm() < 1.0 - 1e-9).then(|| blind_raw(BlindMethod::Schwarz3, inputs))
        }
    }
}

fn criterion_2_matched_model_inversion() -> Outcome {
    let etas: Vec<f64> = (-4..=4).map(|i| 5.0 * i as f64).collect();
    let thetas = degrees(15.0, 90.0);
    let freqs = default_freq_grid();
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for est in [
        Estimator::Schwarz1,
        Estimator::Schwarz2,
        Estimator::Schwarz3,
    ] {
        let (mut worst, mut guarded, mut total) = (0.0f64, 0usize, 0usize);
        for &eta_db in &etas {
            for &theta in &thetas {
                for &f in &freqs {
                    total += 1;
                    let gamma_coh = desired_coherence(theta, f, &GEO, FieldModel::Binaural);
                    let gamma_diff = diffuse_coherence(f, &GEO, DiffuseModel::Binaural);
                    let inputs = EstimatorInputs {
                        gamma_x: mix_coherence(db_to_linear(eta_db), gamma_coh, gamma_diff),
                        gamma_coh,
                        gamma_diff,
                    };
                    match matched_estimate(est, &inputs) {
                        Some(raw) => {
                            let err = (10.0 * raw.log10() - eta_db).abs();
                            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
                        }
                        None => guarded += 1,
                    }
                }
            }
        }
        let guarded_frac = guarded as f64 / total as f64;
        let ok = worst <= 1e-6 && guarded_frac < 0.02;
        pass &= ok;
        details.push(format!(
            "{est} max|err| {worst:.3e} dB, guarded {:.1}%",
            100.0 * guarded_frac
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    report(
        2,
        "matched-model inversion",
        pass,
        format!(
            "{}; tol 1e-6 dB; runtime {elapsed:.2?} < 1 s",
            details.join("; ")
        ),
    )
}

fn criterion_3_thiergart2_zero_noise_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..=8 {
        let phi = k as f64 * PI / 8.0;
        for eta in [0.1, 1.0, 10.0] {
            let gamma_coh = Complex64::from_polar(1.0, phi);
            let inputs = EstimatorInputs {
                gamma_x: mix_coherence(eta, gamma_coh, 0.0),
                gamma_coh,
                gamma_diff: 0.0,
            };
            let est = blind_raw(BlindMethod::Thiergart2, &inputs);
            worst = worst.max(((est - eta) / eta).abs());
        }
    }
    report(
        3,
        "thiergart2 zero-noise exactness",
        worst <= 1e-9,
        format!("max relative error {worst:.3e} <= 1e-9"),
    )
}

fn criterion_4_free_field_error_surface() -> Outcome {
    let thetas = default_theta_grid();
    let freqs = default_freq_grid();
    let surface = |eta, est_field| {
        robustness_surface(eta, &thetas, &freqs, &GEO, Estimator::Schwarz2, est_field).unwrap()
    };
    let low = surface(-20.0, FieldModel::FreeField);
    let high = surface(20.0, FieldModel::FreeField);
    let at_90_2k = high.nearest(FRAC_PI_2, 2000.0).unwrap();
    let matched = [-20.0, 20.0]
        .map(|eta| surface(eta, FieldModel::Binaural).max_abs())
        .into_iter()
        .fold(0.0, f64::max);
    let a = low.mean() >= 0.0;
    let b = at_90_2k <= -5.0;
    let c = matched <= 1e-6;
    report(
        4,
        "free-field error surface",
        a && b && c,
        format!(
            "(a) mean delta at -20 dB {:.2} >= 0 [{}]; (b) delta at 90 deg/2 kHz, +20 dB {at_90_2k:.2} <= -5 [{}]; \
             binaural schwarz2 max|delta| {matched:.3e} <= 1e-6 [{}]",
            low.mean(),
            ok(a),
            ok(b),
            ok(c)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "violated"
    }
}

fn next_up(x: f64) -> f64 {
    if x >= 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

fn criterion_5_itd_model() -> Outcome {
    let mut freq_cont = true;
    let mut low_factor = true;
    let mut thetas: Vec<f64> = (-36..=36).map(|i| (5.0 * i as f64).to_radians()).collect();
    thetas.extend([FRAC_PI_2, -FRAC_PI_2, 0.3, -2.9]);
    for &theta in &thetas {
        freq_cont &= itd_transition(theta, 500.0, &GEO) == itd_low(theta, &GEO)
            && itd_transition(theta, 2000.0, &GEO) == itd_high(theta, &GEO)
            && itd_binaural(theta, 500.0, &GEO) == itd_low(theta, &GEO)
            && itd_binaural(theta, 2000.0, &GEO) == itd_high(theta, &GEO);
        for f in [0.0, 100.0, 250.0, 500.0] {
            let tdoa = tdoa_free_field(theta, &GEO);
            low_factor &= itd_binaural(theta, f, &GEO) == 1.5 * tdoa;
        }
    }
    // front and rear branch expressions, written out independently, agree exactly at
    // +-pi/2, and the implementation steps by no more than an ulp-sized amount there
    let t = GEO.distance_m / GEO.speed_of_sound;
    let front = |th: f64| 0.5 * t * (th.sin() + th);
    let rear_pos = |th: f64| 0.5 * t * (th.sin() + (PI - th));
    let rear_neg = |th: f64| 0.5 * t * (th.sin() - (PI + th));
    let mut branch = front(FRAC_PI_2) == rear_pos(FRAC_PI_2)
        && front(-FRAC_PI_2) == rear_neg(-FRAC_PI_2)
        && itd_high(FRAC_PI_2, &GEO) == front(FRAC_PI_2)
        && itd_high(-FRAC_PI_2, &GEO) == front(-FRAC_PI_2);
    let mut worst_step = 0.0f64;
    for b in [FRAC_PI_2, -FRAC_PI_2] {
        worst_step =
            worst_step.max((itd_high(next_up(b), &GEO) - itd_high(next_down(b), &GEO)).abs());
    }
    branch &= worst_step < 1e-18;
    report(
        5,
        "itd model",
        freq_cont && branch && low_factor,
        format!(
            "continuity at 500/2000 Hz exact [{}]; branches at +-pi/2 exact, step across {worst_step:.1e} s [{}]; \
             low-frequency ITD == 1.5 x TDOA [{}]",
            ok(freq_cont),
            ok(branch),
            ok(low_factor)
        ),
    )
}

fn criterion_6_synthetic_field_fidelity() -> Outcome {
    let diffuse = gen_field(
        &FieldSpec {
            kind: FieldKind::Diffuse,
            duration_s: 10.0,
            seed: 61,
            ..Default::default()
        },
        &GEO,
    )
    .unwrap()
    .mixture;
    let theta = PI / 4.0;
    let plane = gen_field(
        &FieldSpec {
            kind: FieldKind::PlaneWave,
            theta,
            duration_s: 10.0,
            seed: 62,
            ..Default::default()
        },
        &GEO,
    )
    .unwrap()
    .mixture;
    let measure = |s: &bincdr::StereoSignal| {
        let l = analyze(&s.left, FS, 512, 128).unwrap();
        let r = analyze(&s.right, FS, 512, 128).unwrap();
        (l.bin_freqs(), long_term_coherence(&l, &r).unwrap())
    };
    let (freqs, g_diff) = measure(&diffuse);
    let (_, g_plane) = measure(&plane);
    let (mut worst_d, mut worst_p) = (0.0f64, 0.0f64);
    for (b, &f) in freqs.iter().enumerate() {
        if !(100.0..=6000.0).contains(&f) {
            continue;
        }
        let model = diffuse_coherence(f, &GEO, DiffuseModel::Binaural);
        worst_d = worst_d.max((g_diff[b] - model).norm());
        let want = desired_coherence(theta, f, &GEO, FieldModel::Binaural);
        worst_p = worst_p.max((g_plane[b] - want).norm());
    }
    report(
        6,
        "synthetic field fidelity",
        worst_d < 0.05 && worst_p < 0.05,
        format!(
            "diffuse max|err| {worst_d:.4}, plane wave at 45 deg max|err| {worst_p:.4}, both < 0.05 over 100-6000 Hz"
        ),
    )
}

fn criterion_7_end_to_end_suppression() -> Outcome {
    let geo = GEO;
    let seconds = 10.0;
    let config = PipelineConfig {
        estimator: Estimator::Schwarz2,
        field_model: FieldModel::Binaural,
        diffuse_model: DiffuseModel::Binaural,
        doa_rad: Some(0.0),
        ..Default::default()
    };
    let spec = |kind, seed| FieldSpec {
        kind,
        duration_s: seconds,
        seed,
        ..Default::default()
    };

    let diffuse = gen_field(&spec(FieldKind::Diffuse, 71), &geo)
        .unwrap()
        .mixture;
    let start = Instant::now();
    let out = process(&diffuse, &config).unwrap();
    let runtime = start.elapsed();
    // steady state: skip the first half second of recursive-average start-up
    let skip = FS as usize / 2;
    let diffuse_ratio = (power(&out.left[skip..]) + power(&out.right[skip..]))
        / (power(&diffuse.left[skip..]) + power(&diffuse.right[skip..]));
    let diffuse_limit = config.gmin * config.gmin + 0.05;

    let plane = gen_field(&spec(FieldKind::PlaneWave, 72), &geo)
        .unwrap()
        .mixture;
    let out = process(&plane, &config).unwrap();
    let plane_ratio =
        (power(&out.left) + power(&out.right)) / (power(&plane.left) + power(&plane.right));

    // speech-like source: white noise under a 4 Hz sin^2 envelope
    let theta = PI / 4.0;
    let m = gen_field(
        &FieldSpec {
            theta,
            cdr_db: 0.0,
            source_modulation_hz: Some(4.0),
            ..spec(FieldKind::Mixture, 73)
        },
        &geo,
    )
    .unwrap();
    let mix_config = PipelineConfig {
        doa_rad: Some(theta),
        ..config.clone()
    };
    let p = process_detailed(&m.mixture, &mix_config).unwrap();
    let coherent = apply_mask(&m.coherent, &p.mask, &mix_config).unwrap();
    let diffuse_out = apply_mask(&m.diffuse, &p.mask, &mix_config).unwrap();
    let ratio = |c: &bincdr::StereoSignal, d: &bincdr::StereoSignal| {
        10.0 * ((power(&c.left) + power(&c.right)) / (power(&d.left) + power(&d.right))).log10()
    };
    let improvement = ratio(&coherent, &diffuse_out) - ratio(&m.coherent, &m.diffuse);

    let a = diffuse_ratio <= diffuse_limit;
    let b = plane_ratio >= 0.8;
    let c = improvement >= 3.0;
    let d = runtime < Duration::from_secs(5);
    report(
        7,
        "end-to-end suppression",
        a && b && c && d,
        format!(
            "diffuse out/in {diffuse_ratio:.4} <= {diffuse_limit:.2} [{}]; frontal plane wave out/in {plane_ratio:.3} >= 0.8 [{}]; \
             0 dB mixture CDR improvement {improvement:.2} dB >= 3 [{}]; runtime {runtime:.2?} for 10 s < 5 s [{}]",
            ok(a),
            ok(b),
            ok(c),
            ok(d)
        ),
    )
}

fn criterion_8_cue_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let (mut scaled_exact, mut worst_ipd, mut worst_ild) = (true, 0.0f64, 0.0f64);
    for trial in 0..20 {
        let l = analyze(&white_noise(4096, 1.0, 800 + trial), FS, 512, 128).unwrap();
        let r = analyze(&white_noise(4096, 1.0, 900 + trial), FS, 512, 128).unwrap();
        let (n, b) = l.bins.shape();
        let gains = (0..n * b).map(|_| rng.random_range(0.1..=1.0)).collect();
        let mask = GainMask {
            gains: TfGrid::from_vec(n, b, gains).unwrap(),
            gmin: 0.1,
        };
        let (ol, or) = apply_gain_stereo(&l, &r, &mask).unwrap();
        for i in 0..n * b {
            let g = mask.gains.as_slice()[i];
            let (xl, xr) = (l.bins.as_slice()[i], r.bins.as_slice()[i]);
            let (yl, yr) = (ol.bins.as_slice()[i], or.bins.as_slice()[i]);
            // both channels carry the same real factor, bit for bit
            scaled_exact &= yl == xl * g && yr == xr * g;
            if xl.norm() > 0.0 && xr.norm() > 0.0 {
                let ipd = ((yl * yr.conj()).arg() - (xl * xr.conj()).arg()).abs();
                worst_ipd = worst_ipd.max(ipd.min(2.0 * PI - ipd));
                let ild = (20.0 * (yl.norm() / yr.norm()).log10()
                    - 20.0 * (xl.norm() / xr.norm()).log10())
                .abs();
                worst_ild = worst_ild.max(ild);
            }
        }
    }
    report(
        8,
        "cue preservation",
        scaled_exact && worst_ipd <= 1e-12 && worst_ild <= 1e-12,
        format!(
            "identical real gain on both channels bit-exact [{}]; recomputed IPD diff {worst_ipd:.1e} rad, ILD diff {worst_ild:.1e} dB (rounding only)",
            ok(scaled_exact)
        ),
    )
}
