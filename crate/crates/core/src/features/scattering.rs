//! Two-layer 1-D wavelet scattering with Morlet filter banks.
//!
//! Filters live in the frequency domain on a grid of `2 * l_seq` points (the
//! reflect-padded signal length). Frequencies are in cycles per sample.
//!
//! For a channel `x` the transform returns
//!
//! ```text
//! S0      = x ⋆ φ
//! S1[i]   = |x ⋆ ψ1_i| ⋆ φ
//! S2[i,j] = ||x ⋆ ψ1_i| ⋆ ψ2_j| ⋆ φ      (only paths with ξ2_j < ξ1_i)
//! ```
//!
//! each sampled every `T` samples over the unpadded support.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Segment;

/// Scattering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScatteringConfig {
    /// Largest wavelet scale is `2^j` samples.
    pub j: u32,
    /// Wavelets per octave, first layer.
    pub q1: u32,
    /// Wavelets per octave, second layer.
    pub q2: u32,
    /// Averaging support in samples; `2^j` when unset.
    pub t: Option<usize>,
    pub l_seq: usize,
}

impl ScatteringConfig {
    pub fn new(j: u32, q1: u32, l_seq: usize) -> Self {
        Self {
            j,
            q1,
            q2: 1,
            t: None,
            l_seq,
        }
    }

    pub fn averaging_support(&self) -> usize {
        self.t.unwrap_or(1usize << self.j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 || self.j >= usize::BITS - 1 || (1usize << self.j) > self.l_seq {
            return Err(Error::InvalidScale {
                j: self.j,
                l_seq: self.l_seq,
            });
        }
        if self.q1 == 0 || self.q2 == 0 {
            return Err(Error::InvalidConfig(
                "wavelets per octave must be at least 1".into(),
            ));
        }
        let t = self.averaging_support();
        if t == 0 || t > self.l_seq {
            return Err(Error::InvalidConfig(format!(
                "averaging support {t} must lie in 1..={}",
                self.l_seq
            )));
        }
        Ok(())
    }

    /// Number of averaged time positions per path.
    pub fn n_times(&self) -> usize {
        self.l_seq / self.averaging_support()
    }
}

/// Highest center frequency for `q` wavelets per octave.
pub fn max_center_frequency(q: u32) -> f64 {
    (1.0 / (1.0 + 2f64.powf(3.0 / q as f64))).max(0.35)
}

/// Gaussian in frequency, periodized over unit period.
fn periodic_gauss(omega: f64, center: f64, sigma: f64) -> f64 {
    (-3..=3)
        .map(|m| {
            let d = omega - center + m as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .sum()
}

/// A Morlet band-pass filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPass {
    pub xi: f64,
    pub sigma: f64,
    /// Zero-mean correction weight.
    pub beta: f64,
    /// Normalization applied to the Gaussian shape.
    pub scale: f64,
    /// Real frequency response on the padded grid.
    pub response: Vec<f64>,
}

impl BandPass {
    fn new(xi: f64, q: u32, n: usize) -> Self {
        // adjacent filters cross at -3 dB
        let spacing = xi * (1.0 - 2f64.powf(-1.0 / q as f64));
        let sigma = spacing / (2.0 * std::f64::consts::LN_2.sqrt());
        let beta = periodic_gauss(0.0, xi, sigma) / periodic_gauss(0.0, 0.0, sigma);
        let mut bp = Self {
            xi,
            sigma,
            beta,
            scale: 1.0,
            response: Vec::new(),
        };
        bp.response = (0..n).map(|k| bp.eval(k as f64 / n as f64)).collect();
        bp
    }

    /// Continuous frequency response at `omega` (cycles/sample).
    pub fn eval(&self, omega: f64) -> f64 {
        self.scale
            * (periodic_gauss(omega, self.xi, self.sigma)
                - self.beta * periodic_gauss(omega, 0.0, self.sigma))
    }

    fn rescale(&mut self, factor: f64) {
        self.scale *= factor;
        for v in &mut self.response {
            *v *= factor;
        }
    }
}

/// Filters for both layers plus the low-pass, with cached FFT plans.
#[derive(Clone)]
pub struct FilterBank {
    cfg: ScatteringConfig,
    n_padded: usize,
    pub layer1: Vec<BandPass>,
    pub layer2: Vec<BandPass>,
    pub lowpass: Vec<f64>,
    pub lowpass_sigma: f64,
    paths: Vec<(usize, usize)>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Nonzero low-pass bins, phase-shifted to the first output position.
    lp_taps: Vec<(usize, Complex<f64>)>,
    /// Inverse plan of length `n / T` when `T` divides the padded length.
    fold: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FilterBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FilterBank")
            .field("cfg", &self.cfg)
            .field("layer1", &self.layer1.len())
            .field("layer2", &self.layer2.len())
            .field("paths", &self.paths.len())
            .finish()
    }
}

/// Littlewood–Paley sum of a layer for real inputs:
/// `|φ(ω)|² + ½ Σ (|ψ(ω)|² + |ψ(-ω)|²)`.
pub fn littlewood_paley(filters: &[BandPass], lowpass: &[f64]) -> Vec<f64> {
    let n = lowpass.len();
    (0..n)
        .map(|k| {
            let mirror = (n - k) % n;
            let band: f64 = filters
                .iter()
                .map(|f| f.response[k].powi(2) + f.response[mirror].powi(2))
                .sum();
            lowpass[k].powi(2) + 0.5 * band
        })
        .collect()
}

fn band_energy_max(filters: &[BandPass], n: usize) -> f64 {
    let zero = vec![0.0; n];
    littlewood_paley(filters, &zero)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Builds the filter bank for `cfg`.
///
/// Layer `l` holds `j * q_l` Morlet filters with centers
/// `ξ_max · 2^(-k/q_l)`. Band-pass filters are scaled so their summed energy
/// peaks at one; if the low-pass then pushes the Littlewood–Paley sum above
/// one anywhere, every filter is scaled down so the bank is non-expansive.
pub fn build_filterbank(cfg: &ScatteringConfig) -> Result<FilterBank> {
    cfg.validate()?;
    let n = 2 * cfg.l_seq;
    let make_layer = |q: u32| -> Vec<BandPass> {
        let xi_max = max_center_frequency(q);
        (0..cfg.j * q)
            .map(|k| BandPass::new(xi_max * 2f64.powf(-(k as f64) / q as f64), q, n))
            .collect()
    };
    let mut layer1 = make_layer(cfg.q1);
    let mut layer2 = make_layer(cfg.q2);

    let lowpass_sigma = 0.1 / cfg.averaging_support() as f64;
    let mut lowpass: Vec<f64> = (0..n)
        .map(|k| periodic_gauss(k as f64 / n as f64, 0.0, lowpass_sigma))
        .collect();
    // exact DC gain of one
    let dc = lowpass[0];
    lowpass.iter_mut().for_each(|v| *v /= dc);

    for layer in [&mut layer1, &mut layer2] {
        let peak = band_energy_max(layer, n);
        let f = 1.0 / peak.sqrt();
        layer.iter_mut().for_each(|b| b.rescale(f));
    }
    let worst = littlewood_paley(&layer1, &lowpass)
        .into_iter()
        .chain(littlewood_paley(&layer2, &lowpass))
        .fold(0.0, f64::max);
    if worst > 1.0 {
        let f = 1.0 / worst.sqrt();
        layer1.iter_mut().for_each(|b| b.rescale(f));
        layer2.iter_mut().for_each(|b| b.rescale(f));
        lowpass.iter_mut().for_each(|v| *v *= f);
    }

    let mut paths = Vec::new();
    for (i, b1) in layer1.iter().enumerate() {
        for (j, b2) in layer2.iter().enumerate() {
            if b2.xi < b1.xi {
                paths.push((i, j));
            }
        }
    }

    let left = cfg.l_seq / 2;
    let lp_taps = lowpass
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(k, &v)| {
            let phase = 2.0 * PI * ((k * left) % n) as f64 / n as f64;
            (k, Complex::from_polar(v, phase))
        })
        .collect();
    let t = cfg.averaging_support();
    let mut planner = FftPlanner::new();
    let fold = n.is_multiple_of(t).then(|| planner.plan_fft_inverse(n / t));
    Ok(FilterBank {
        cfg: *cfg,
        n_padded: n,
        layer1,
        layer2,
        lowpass,
        lowpass_sigma,
        paths,
        fwd: planner.plan_fft_forward(n),
        inv: planner.plan_fft_inverse(n),
        lp_taps,
        fold,
    })
}

/// Scattering coefficients of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringVector {
    /// `n_times` values.
    pub s0: Vec<f64>,
    /// `layer1.len() * n_times`, path-major.
    pub s1: Vec<f64>,
    /// `paths.len() * n_times`, path-major.
    pub s2: Vec<f64>,
}

impl ScatteringVector {
    pub fn len(&self) -> usize {
        self.s0.len() + self.s1.len() + self.s2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `S0 | S1 | S2` as one vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.s0);
        out.extend_from_slice(&self.s1);
        out.extend_from_slice(&self.s2);
        out
    }

    /// Time average of every first-order path.
    pub fn s1_path_means(&self) -> Vec<f64> {
        let nt = self.s0.len().max(1);
        self.s1.chunks(nt).map(|c| c.iter().sum::<f64>() / nt as f64).collect()
    }
}

/// Unsubsampled outputs over the padded support, for energy checks.
#[derive(Debug, Clone)]
pub struct FullOutputs {
    pub padded_input: Vec<f64>,
    pub s0: Vec<f64>,
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
}

impl FullOutputs {
    pub fn output_energy(&self) -> f64 {
        let sq = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
        sq(&self.s0) + self.s1.iter().map(sq).sum::<f64>() + self.s2.iter().map(sq).sum::<f64>()
    }

    pub fn input_energy(&self) -> f64 {
        self.padded_input.iter().map(|x| x * x).sum()
    }
}

/// Reflect padding (edge sample not repeated) from `len` to `2 * len`,
/// `len / 2` samples on the left.
pub fn reflect_pad(x: &[f64]) -> Vec<f64> {
    let len = x.len();
    let left = len / 2;
    let right = len - left;
    let mut out = Vec::with_capacity(2 * len);
    for i in (0..left).rev() {
        out.push(x[reflect_index(i as isize + 1, len)]);
    }
    out.extend_from_slice(x);
    for i in 0..right {
        out.push(x[reflect_index(len as isize - 2 - i as isize, len)]);
    }
    out
}

fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

impl FilterBank {
    pub fn config(&self) -> &ScatteringConfig {
        &self.cfg
    }

    pub fn n_padded(&self) -> usize {
        self.n_padded
    }

    /// Second-order paths `(i, j)` kept after pruning.
    pub fn paths(&self) -> &[(usize, usize)] {
        &self.paths
    }

    pub fn center_frequencies(&self) -> Vec<f64> {
        self.layer1.iter().map(|b| b.xi).collect()
    }

    pub fn n_times(&self) -> usize {
        self.cfg.n_times()
    }

    /// Coefficients per channel.
    pub fn vector_len(&self) -> usize {
        (1 + self.layer1.len() + self.paths.len()) * self.n_times()
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    /// `ifft(spec · filter)`, normalized.
    fn filtered(&self, spec: &[Complex<f64>], filter: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = spec.iter().zip(filter).map(|(s, &h)| s * h).collect();
        self.inv.process(&mut buf);
        let norm = 1.0 / self.n_padded as f64;
        buf.iter_mut().for_each(|c| *c *= norm);
        buf
    }

    fn modulus(&self, spec: &[Complex<f64>], filter: &[f64]) -> Vec<f64> {
        self.filtered(spec, filter).iter().map(|c| c.norm_sqr().sqrt()).collect()
    }

    fn average(&self, spec: &[Complex<f64>]) -> Vec<f64> {
        self.filtered(spec, &self.lowpass).iter().map(|c| c.re).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.cfg.l_seq {
            return Err(Error::ShapeError {
                expected: self.cfg.l_seq,
                found: x.len(),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                file: String::new(),
                channel: String::new(),
                index,
            });
        }
        Ok(())
    }

    /// Low-pass output at the sampled positions `left + p·T`, from the
    /// spectrum of the signal. Only the nonzero low-pass bins contribute; when
    /// `T` divides the grid they are folded onto a short inverse FFT.
    fn sampled_average(&self, spec: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = self.n_padded;
        let nt = self.n_times();
        let norm = 1.0 / n as f64;
        match &self.fold {
            Some(plan) => {
                let m = plan.len();
                let mut z = vec![Complex::new(0.0, 0.0); m];
                for &(k, w) in &self.lp_taps {
                    z[k % m] += spec[k] * w;
                }
                plan.process(&mut z);
                z.truncate(nt);
                z.iter_mut().for_each(|c| *c *= norm);
                z
            }
            None => {
                let t = self.cfg.averaging_support();
                (0..nt)
                    .map(|p| {
                        let sum: Complex<f64> = self
                            .lp_taps
                            .iter()
                            .map(|&(k, w)| {
                                let phase = 2.0 * PI * ((k * p * t) % n) as f64 / n as f64;
                                spec[k] * w * Complex::from_polar(1.0, phase)
                            })
                            .sum();
                        sum * norm
                    })
                    .collect()
            }
        }
    }

    /// Spectrum of `a + i·b` for two real signals of the padded length.
    fn packed_spectrum(&self, a: &[f64], b: Option<&[f64]>) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = match b {
            Some(b) => a.iter().zip(b).map(|(&x, &y)| Complex::new(x, y)).collect(),
            None => a.iter().map(|&x| Complex::new(x, 0.0)).collect(),
        };
        self.fwd.process(&mut buf);
        buf
    }

    /// Splits the spectrum of `a + i·b` into the spectra of `a` and `b`.
    fn unpack(z: &[Complex<f64>]) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        let n = z.len();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for k in 0..n {
            let zk = z[k];
            let zm = z[(n - k) % n].conj();
            a.push((zk + zm) * 0.5);
            b.push((zk - zm) * Complex::new(0.0, -0.5));
        }
        (a, b)
    }

    /// Scattering coefficients of one channel.
    pub fn scatter(&self, x: &[f64]) -> Result<ScatteringVector> {
        self.check_input(x)?;
        let spec = self.spectrum(&reflect_pad(x));
        let s0 = self
            .sampled_average(&spec)
            .iter()
            .map(|c| c.re)
            .collect();

        // Averaging is linear and the low-pass is real and even, so two real
        // moduli packed as a + i·b average to avg(a) + i·avg(b).
        let nt = self.n_times();
        let mut s1 = vec![0.0; self.layer1.len() * nt];
        let mut u1_specs: Vec<Vec<Complex<f64>>> = Vec::with_capacity(self.layer1.len());
        for (pair_idx, pair) in self.layer1.chunks(2).enumerate() {
            let a = self.modulus(&spec, &pair[0].response);
            let b = pair.get(1).map(|f| self.modulus(&spec, &f.response));
            let z = self.packed_spectrum(&a, b.as_deref());
            let avg = self.sampled_average(&z);
            let i = 2 * pair_idx;
            for (p, c) in avg.iter().enumerate() {
                s1[i * nt + p] = c.re.max(0.0);
                if b.is_some() {
                    s1[(i + 1) * nt + p] = c.im.max(0.0);
                }
            }
            if b.is_some() {
                let (za, zb) = Self::unpack(&z);
                u1_specs.push(za);
                u1_specs.push(zb);
            } else {
                u1_specs.push(z);
            }
        }

        let mut s2 = vec![0.0; self.paths.len() * nt];
        for (pair_idx, pair) in self.paths.chunks(2).enumerate() {
            let (i, j) = pair[0];
            let a = self.modulus(&u1_specs[i], &self.layer2[j].response);
            let b = pair
                .get(1)
                .map(|&(i, j)| self.modulus(&u1_specs[i], &self.layer2[j].response));
            let avg = self.sampled_average(&self.packed_spectrum(&a, b.as_deref()));
            let r = 2 * pair_idx;
            for (p, c) in avg.iter().enumerate() {
                s2[r * nt + p] = c.re.max(0.0);
                if b.is_some() {
                    s2[(r + 1) * nt + p] = c.im.max(0.0);
                }
            }
        }
        Ok(ScatteringVector { s0, s1, s2 })
    }

    /// Same cascade without subsampling or cropping.
    pub fn scatter_full(&self, x: &[f64]) -> Result<FullOutputs> {
        self.check_input(x)?;
        let padded = reflect_pad(x);
        let spec = self.spectrum(&padded);
        let s0 = self.average(&spec);
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for (i, b1) in self.layer1.iter().enumerate() {
            let u1 = self.modulus(&spec, &b1.response);
            let u1_spec = self.spectrum(&u1);
            s1.push(self.average(&u1_spec));
            for &(_, j) in self.paths.iter().filter(|(pi, _)| *pi == i) {
                let u2 = self.modulus(&u1_spec, &self.layer2[j].response);
                s2.push(self.average(&self.spectrum(&u2)));
            }
        }
        Ok(FullOutputs {
            padded_input: padded,
            s0,
            s1,
            s2,
        })
    }

    /// Per-channel scattering vectors of a segment, flattened `S0|S1|S2` in
    /// channel order.
    pub fn assemble(&self, segment: &Segment) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(segment.acc_data.len() * self.vector_len());
        for (c, ch) in segment.acc_data.iter().enumerate() {
            let sv = self
                .scatter(ch)
                .map_err(|e| super::fft::locate(e, segment, c))?;
            out.extend(sv.flatten());
        }
        Ok(out)
    }
}

/// Flattened scattering vectors of every acceleration channel.
pub fn assemble_scattering_vector(segment: &Segment, bank: &FilterBank) -> Result<Vec<f64>> {
    bank.assemble(segment)
}
