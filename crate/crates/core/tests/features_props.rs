mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{band_limited, rel_l2};
use vsense::features::fft::{hamming, FftFeatureExtractor};
use vsense::features::scattering::{build_filterbank, FilterBank, ScatteringConfig};

fn small_bank() -> FilterBank {
    build_filterbank(&ScatteringConfig::new(4, 4, 512)).unwrap()
}

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn full_cascade_does_not_expand_energy() {
    for cfg in [ScatteringConfig::new(4, 4, 512), ScatteringConfig::new(5, 6, 4096)] {
        let bank = build_filterbank(&cfg).unwrap();
        for seed in 0..3 {
            let out = bank.scatter_full(&noise(seed, cfg.l_seq)).unwrap();
            let ratio = (out.output_energy() / out.input_energy()).sqrt();
            assert!(ratio <= 1.0 + 2e-2, "{cfg:?}: norm ratio {ratio}");
        }
    }
}

#[test]
fn band_pass_filters_have_zero_mean() {
    let bank = build_filterbank(&ScatteringConfig::new(5, 6, 4096)).unwrap();
    for b in bank.layer1.iter().chain(&bank.layer2) {
        assert!(b.response[0].abs() < 1e-12, "xi {} dc {}", b.xi, b.response[0]);
    }
}

#[test]
fn constant_input_is_carried_by_order_zero() {
    let bank = small_bank();
    let c = -42.5;
    let s = bank.scatter(&[c; 512]).unwrap();
    for v in &s.s0 {
        assert!((v - c * bank.lowpass[0]).abs() <= 1e-9 * c.abs());
    }
    assert!(s.s1.iter().chain(&s.s2).all(|v| v.abs() <= 1e-6 * c.abs()));
}

#[test]
fn small_shifts_barely_move_coefficients() {
    let cfg = ScatteringConfig::new(5, 4, 1024);
    let bank = build_filterbank(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x = band_limited(&mut rng, 1024, 0.01, 0.3);
        for shift in 1..=cfg.averaging_support() / 8 {
            let mut y = x.clone();
            y.rotate_right(shift);
            let d = rel_l2(
                &bank.scatter(&y).unwrap().flatten(),
                &bank.scatter(&x).unwrap().flatten(),
            );
            assert!(d <= 0.2, "shift {shift}: {d}");
        }
    }
}

#[test]
fn distance_grows_along_the_warp_ladder() {
    let bank = build_filterbank(&ScatteringConfig::new(5, 6, 2048)).unwrap();
    let f0 = 0.04;
    let tone = |eps: f64| -> Vec<f64> {
        (0..2048)
            .map(|t| (2.0 * std::f64::consts::PI * f0 * t as f64 * (1.0 + eps)).sin())
            .collect()
    };
    let base = bank.scatter(&tone(0.0)).unwrap().flatten();
    let dist: Vec<f64> = [0.01, 0.03, 0.09]
        .iter()
        .map(|&e| rel_l2(&bank.scatter(&tone(e)).unwrap().flatten(), &base))
        .collect();
    assert!(dist[0] < dist[1] && dist[1] < dist[2], "{dist:?}");
}

#[test]
fn layout_of_default_configuration() {
    let bank = build_filterbank(&ScatteringConfig::new(5, 6, 4096)).unwrap();
    assert_eq!(bank.layer1.len(), 30);
    assert_eq!(bank.layer2.len(), 5);
    assert_eq!(bank.paths().len(), 70);
    assert_eq!(bank.n_times(), 128);
    assert_eq!(bank.vector_len(), 101 * 128);
    assert!(bank.paths().iter().all(|&(i, j)| bank.layer2[j].xi < bank.layer1[i].xi));
}

#[test]
fn fft_parseval() {
    let l = 1024;
    let x = noise(9, l);
    let ext = FftFeatureExtractor::new(l).unwrap();
    let mags = ext.features(&x).unwrap();
    let w = hamming(l);
    let time: f64 = x.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
    // one-sided magnitudes of a real signal: interior bins count twice
    let freq: f64 = mags
        .iter()
        .enumerate()
        .map(|(k, m)| if k == 0 || k == l / 2 { m * m } else { 2.0 * m * m })
        .sum::<f64>()
        / l as f64;
    assert!((time - freq).abs() <= 1e-6 * time);
}

#[test]
fn hamming_is_symmetric_with_known_ends() {
    let w = hamming(64);
    assert!((w[0] - 0.08).abs() < 1e-12);
    for i in 0..64 {
        assert!((w[i] - w[63 - i]).abs() < 1e-12);
        let want = 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / 63.0).cos();
        assert!((w[i] - want).abs() < 1e-12);
    }
}

#[test]
fn fft_magnitudes_move_under_circular_shift() {
    let l = 256;
    let x: Vec<f64> = (0..l).map(|t| (0.3 * t as f64).sin()).collect();
    let mut y = x.clone();
    y.rotate_right(7);
    let ext = FftFeatureExtractor::new(l).unwrap();
    assert!(rel_l2(&ext.features(&y).unwrap(), &ext.features(&x).unwrap()) > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn higher_orders_are_non_negative(seed: u64, scale in 1e-3f64..1e3) {
        let bank = small_bank();
        let x: Vec<f64> = noise(seed, 512).iter().map(|v| v * scale).collect();
        let s = bank.scatter(&x).unwrap();
        prop_assert!(s.s1.iter().chain(&s.s2).all(|&v| v >= 0.0));
    }

    #[test]
    fn scattering_is_positively_homogeneous(seed: u64, c in 0.01f64..100.0) {
        let bank = small_bank();
        let x = noise(seed, 512);
        let cx: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = bank.scatter(&cx).unwrap().flatten();
        let b: Vec<f64> = bank.scatter(&x).unwrap().flatten().iter().map(|v| v * c).collect();
        prop_assert!(rel_l2(&a, &b) < 1e-10);
    }
}

/// Maximizer of a unimodal function on `[lo, hi]` by golden-section search.
fn argmax(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-15 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    (lo + hi) / 2.0
}

#[test]
fn response_peaks_sit_on_the_dilation_lattice() {
    let cfg = ScatteringConfig::new(5, 6, 4096);
    let bank = build_filterbank(&cfg).unwrap();
    let f_max = bank.layer1[0].xi;
    for (k, b) in bank.layer1.iter().enumerate() {
        let lattice = f_max * 2f64.powf(-(k as f64) / 6.0);
        let peak = argmax(|w| b.eval(w), 0.5 * lattice, (1.5 * lattice).min(0.5));
        assert!(((peak - lattice) / lattice).abs() < 1e-9, "k {k}: {peak} vs {lattice}");
    }
}

#[test]
fn tone_at_a_center_frequency_wins_its_path() {
    let bank = build_filterbank(&ScatteringConfig::new(3, 2, 256)).unwrap();
    for (i, b) in bank.layer1.iter().enumerate() {
        let x: Vec<f64> = (0..256)
            .map(|t| (2.0 * std::f64::consts::PI * b.xi * t as f64).sin())
            .collect();
        let means = bank.scatter(&x).unwrap().s1_path_means();
        let best = (0..means.len())
            .max_by(|&a, &c| means[a].total_cmp(&means[c]))
            .unwrap();
        assert_eq!(best, i, "{means:?}");
    }
}
