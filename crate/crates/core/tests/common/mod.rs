//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Local extrema by direct comparison with the previous kept point.
pub fn reference_turning_points(x: &[f64]) -> Vec<f64> {
    let mut dedup: Vec<f64> = Vec::new();
    for &v in x {
        if dedup.last() != Some(&v) {
            dedup.push(v);
        }
    }
    if dedup.len() < 3 {
        return dedup;
    }
    let mut out = vec![dedup[0]];
    for i in 1..dedup.len() - 1 {
        let (a, b, c) = (dedup[i - 1], dedup[i], dedup[i + 1]);
        if (b > a && b > c) || (b < a && b < c) {
            out.push(b);
        }
    }
    out.push(*dedup.last().unwrap());
    out
}

/// `(amplitude, mean, second_pass)` triples.
pub type RefCycle = (f64, f64, bool);

/// Rescans from the front after every closed cycle.
fn reference_pass(points: &[f64], second: bool) -> (Vec<RefCycle>, Vec<f64>) {
    let mut v = points.to_vec();
    let mut cycles = Vec::new();
    'scan: loop {
        for i in 0..v.len().saturating_sub(3) {
            let inner = (v[i + 1] - v[i + 2]).abs();
            if inner <= (v[i] - v[i + 1]).abs() && inner <= (v[i + 2] - v[i + 3]).abs() {
                cycles.push((inner / 2.0, (v[i + 1] + v[i + 2]) / 2.0, second));
                v.drain(i + 1..i + 3);
                continue 'scan;
            }
        }
        break;
    }
    (cycles, v)
}

pub fn reference_rainflow(series: &[f64]) -> Vec<RefCycle> {
    let (mut cycles, residue) = reference_pass(&reference_turning_points(series), false);
    if residue.len() >= 2 {
        let doubled: Vec<f64> = residue.iter().chain(&residue).copied().collect();
        let (more, _) = reference_pass(&reference_turning_points(&doubled), true);
        cycles.extend(more);
    }
    cycles.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    cycles
}

/// Palmgren-Miner sum written out from the curve definition.
pub fn reference_damage(cycles: &[RefCycle], k: f64, capacity: f64) -> f64 {
    cycles
        .iter()
        .filter(|c| c.0 > 0.0)
        .map(|c| 1.0 / (capacity * c.0.powf(-k)))
        .sum()
}

/// Reflect padding to twice the length, half the input on the left, edge
/// samples not repeated.
pub fn reference_reflect_pad(x: &[f64]) -> Vec<f64> {
    let len = x.len() as isize;
    let left = len / 2;
    (0..2 * len)
        .map(|n| {
            let mut i = n - left;
            loop {
                if i < 0 {
                    i = -i;
                } else if i >= len {
                    i = 2 * (len - 1) - i;
                } else {
                    break;
                }
            }
            x[i as usize]
        })
        .collect()
}

/// Impulse response of a frequency response by a direct inverse DFT.
pub fn impulse_response(h: &[f64]) -> Vec<Complex<f64>> {
    let n = h.len();
    (0..n)
        .map(|t| {
            h.iter()
                .enumerate()
                .map(|(k, &v)| {
                    let ang = 2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    Complex::from_polar(v, ang)
                })
                .sum::<Complex<f64>>()
                / n as f64
        })
        .collect()
}

/// Circular convolution by the defining sum.
pub fn circular_convolve(x: &[Complex<f64>], h: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let n = x.len();
    (0..n)
        .map(|t| (0..n).map(|m| x[m] * h[(t + n - m) % n]).sum())
        .collect()
}

/// Gaussian noise band-limited to `[lo, hi]` cycles/sample, unit variance.
pub fn band_limited<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 / n as f64;
        if f < lo || f > hi {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let m = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    x.iter().map(|v| (v - m) / sd).collect()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Least-squares coefficients and their covariance factor `(XᵀX)⁻¹` from the
/// normal equations.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let m = rows[0].len();
    let x = nalgebra::DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let xtx = x.transpose() * &x;
    let inv = xtx.clone().try_inverse().expect("full rank design");
    let beta = &inv * (x.transpose() * nalgebra::DVector::from_column_slice(y));
    (beta.iter().copied().collect(), inv)
}

/// `[1, h_i, h_i h_j (i ≤ j)]`.
pub fn quadratic_row(h: &[f64]) -> Vec<f64> {
    let mut r = vec![1.0];
    r.extend_from_slice(h);
    for i in 0..h.len() {
        for j in i..h.len() {
            r.push(h[i] * h[j]);
        }
    }
    r
}
