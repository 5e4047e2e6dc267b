//! Synthetic fleet data with known ground truth.
//!
//! Accelerations are band-limited Gaussian noise whose band depends on the
//! underground and scales with speed; their amplitude grows with speed and
//! rider weight. Strain channels are a static offset plus a band-passed linear
//! combination of the accelerations plus white noise, so damage is
//! predictable from acceleration features by construction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{format_speed, Channel, FileRole, Labels, Location, TimeSeriesFile, Underground};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiderSpec {
    pub id: String,
    /// Amplitude factor relative to the lightest rider.
    pub weight_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndergroundSpec {
    pub underground: Underground,
    /// Excitation band at the reference speed, Hz.
    pub band_hz: (f64, f64),
    /// Excitation power relative to unit-variance noise.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainSpec {
    pub name: String,
    /// Static strain, µm/m.
    pub offset: f64,
    /// Gain per acceleration channel, µm/m per acceleration unit.
    pub gains: Vec<f64>,
    /// Pass band applied to the combined acceleration, Hz.
    pub band_hz: (f64, f64),
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub riders: Vec<RiderSpec>,
    pub undergrounds: Vec<UndergroundSpec>,
    pub speeds_kmh: Vec<f64>,
    /// Speed at which underground bands are specified.
    pub reference_speed_kmh: f64,
    /// Usage rides per rider × underground × speed cell.
    pub files_per_class: usize,
    /// Additional maneuver rides per cell, held out for classifier testing.
    pub maneuver_files_per_class: usize,
    pub n_acc: usize,
    pub acc_noise_std: f64,
    /// Std of the log excitation envelope; rides alternate between rougher
    /// and smoother stretches.
    pub envelope_std: f64,
    /// Upper band edge of the log envelope, Hz.
    pub envelope_cutoff_hz: f64,
    pub strain: Vec<StrainSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let n_acc = 5;
        Self {
            seed: 2024,
            sample_rate_hz: 1200.0,
            duration_s: 60.0,
            riders: vec![
                RiderSpec {
                    id: "rider1".into(),
                    weight_factor: 1.0,
                },
                RiderSpec {
                    id: "rider2".into(),
                    weight_factor: 1.1,
                },
                RiderSpec {
                    id: "rider3".into(),
                    weight_factor: 1.2,
                },
            ],
            undergrounds: vec![
                UndergroundSpec {
                    underground: Underground::Even,
                    band_hz: (2.0, 15.0),
                    power: 1.0,
                },
                UndergroundSpec {
                    underground: Underground::Cobble,
                    band_hz: (40.0, 100.0),
                    power: 2.0,
                },
            ],
            speeds_kmh: vec![10.0, 15.0, 20.0],
            reference_speed_kmh: 15.0,
            files_per_class: 2,
            maneuver_files_per_class: 0,
            n_acc,
            acc_noise_std: 0.05,
            envelope_std: 0.2,
            envelope_cutoff_hz: 0.1,
            strain: vec![
                StrainSpec {
                    name: "S1".into(),
                    offset: 320.0,
                    gains: vec![18.0, 6.0, 0.0, 4.0, 0.0],
                    band_hz: (0.5, 150.0),
                    noise_std: 2.0,
                },
                StrainSpec {
                    name: "S2".into(),
                    offset: -260.0,
                    gains: vec![0.0, 12.0, 10.0, 0.0, 3.0],
                    band_hz: (5.0, 200.0),
                    noise_std: 2.0,
                },
                StrainSpec {
                    name: "S3".into(),
                    offset: 410.0,
                    gains: vec![5.0, 0.0, 0.0, 15.0, 8.0],
                    band_hz: (0.5, 40.0),
                    noise_std: 2.0,
                },
                StrainSpec {
                    name: "S4".into(),
                    offset: 35.0,
                    gains: vec![0.0; n_acc],
                    band_hz: (0.5, 150.0),
                    noise_std: 3.0,
                },
            ],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.riders.is_empty() || self.undergrounds.is_empty() || self.speeds_kmh.is_empty() {
            return bad("riders, undergrounds and speeds must all be non-empty");
        }
        if !(self.envelope_std >= 0.0 && self.envelope_cutoff_hz > 0.0) {
            return bad("envelope std must be non-negative and its cutoff positive");
        }
        if self.files_per_class == 0 || self.n_acc == 0 {
            return bad("files_per_class and n_acc must be positive");
        }
        if !(self.sample_rate_hz > 0.0 && self.duration_s > 0.0 && self.reference_speed_kmh > 0.0)
        {
            return bad("sample rate, duration and reference speed must be positive");
        }
        if self.speeds_kmh.iter().any(|&s| !(s > 0.0)) {
            return bad("speeds must be positive");
        }
        let nyquist = self.sample_rate_hz / 2.0;
        let max_rate = self.speeds_kmh.iter().fold(0.0f64, |a, &b| a.max(b)) / self.reference_speed_kmh;
        for (i, u) in self.undergrounds.iter().enumerate() {
            let (lo, hi) = u.band_hz;
            if !(lo >= 0.0 && hi > lo && hi * max_rate < nyquist && u.power > 0.0) {
                return bad("underground bands must satisfy 0 <= lo < hi < Nyquist at every speed");
            }
            if self.undergrounds[..i]
                .iter()
                .any(|o| o.underground == u.underground || (o.band_hz == u.band_hz && o.power == u.power))
            {
                return bad("undergrounds must be distinct, with distinct spectral shapes");
            }
        }
        for s in &self.strain {
            if s.gains.len() != self.n_acc {
                return bad("every strain channel needs one gain per acceleration channel");
            }
            if !(s.band_hz.1 > s.band_hz.0 && s.noise_std >= 0.0) {
                return bad("strain pass band must be non-empty");
            }
        }
        if self
            .strain
            .iter()
            .all(|s| s.gains.iter().all(|&g| g == 0.0))
        {
            log::warn!("no strain channel is coupled to the accelerations");
        }
        Ok(())
    }

    pub fn n_files(&self) -> usize {
        self.riders.len()
            * self.undergrounds.len()
            * self.speeds_kmh.len()
            * (self.files_per_class + self.maneuver_files_per_class)
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// Raised-cosine band mask with edges `taper_hz` wide.
fn band_mask(freq: f64, lo: f64, hi: f64, taper_hz: f64) -> f64 {
    let f = freq.abs();
    if f < lo - taper_hz || f > hi + taper_hz {
        0.0
    } else if f < lo {
        0.5 * (1.0 + (PI * (lo - f) / taper_hz).cos())
    } else if f > hi {
        0.5 * (1.0 + (PI * (f - hi) / taper_hz).cos())
    } else {
        1.0
    }
}

struct Spectral {
    n: usize,
    fs: f64,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Spectral {
    fn new(n: usize, fs: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fs,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn freq(&self, k: usize) -> f64 {
        let k = if k <= self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        k * self.fs / self.n as f64
    }

    fn mask(&self, lo: f64, hi: f64) -> Vec<f64> {
        let taper = ((hi - lo) * 0.1).clamp(0.2, 5.0);
        (0..self.n).map(|k| band_mask(self.freq(k), lo, hi, taper)).collect()
    }

    /// Filters `x` with a zero-phase mask.
    fn filter(&self, x: &[f64], mask: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        for (c, m) in buf.iter_mut().zip(mask) {
            *c *= m;
        }
        self.inv.process(&mut buf);
        let norm = 1.0 / self.n as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }

    /// Unit-variance (in expectation) band-limited Gaussian noise.
    fn band_noise(&self, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
        let mask = self.mask(lo, hi);
        let power = mask.iter().map(|m| m * m).sum::<f64>() / self.n as f64;
        let white = white_noise(rng, self.n);
        let scale = 1.0 / power.sqrt();
        self.filter(&white, &mask).into_iter().map(|v| v * scale).collect()
    }
}

fn white_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// One generated ride and its ground truth.
#[derive(Debug, Clone, Copy)]
struct FilePlan<'a> {
    index: usize,
    rider: &'a RiderSpec,
    ground: &'a UndergroundSpec,
    speed: f64,
    replicate: usize,
}

/// Generates the labeled corpus.
///
/// Every rider × underground × speed cell gets `files_per_class` usage rides
/// followed by `maneuver_files_per_class` maneuver rides.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<TimeSeriesFile>> {
    cfg.validate()?;
    let mut plans = Vec::with_capacity(cfg.n_files());
    for rider in &cfg.riders {
        for ground in &cfg.undergrounds {
            for &speed in &cfg.speeds_kmh {
                for replicate in 0..cfg.files_per_class + cfg.maneuver_files_per_class {
                    plans.push(FilePlan {
                        index: plans.len(),
                        rider,
                        ground,
                        speed,
                        replicate,
                    });
                }
            }
        }
    }
    let spectral = Spectral::new(cfg.n_samples(), cfg.sample_rate_hz);
    plans
        .par_iter()
        .map(|plan| generate_file(cfg, &spectral, plan))
        .collect()
}

fn generate_file(cfg: &SynthConfig, sp: &Spectral, plan: &FilePlan) -> Result<TimeSeriesFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(plan.index as u64);

    let rate = plan.speed / cfg.reference_speed_kmh;
    let amp = plan.ground.power.sqrt() * rate * plan.rider.weight_factor;
    let (lo, hi) = (plan.ground.band_hz.0 * rate, plan.ground.band_hz.1 * rate);

    // two latent excitation paths (e.g. front and rear wheel)
    let envelope: Vec<f64> = sp
        .band_noise(&mut rng, 0.0, cfg.envelope_cutoff_hz)
        .into_iter()
        .map(|v| (cfg.envelope_std * v).exp())
        .collect();
    let latent = [sp.band_noise(&mut rng, lo, hi), sp.band_noise(&mut rng, lo, hi)]
        .map(|z| z.iter().zip(&envelope).map(|(a, g)| a * g).collect::<Vec<f64>>());
    let n = sp.n;
    let acc: Vec<Vec<f64>> = (0..cfg.n_acc)
        .map(|c| {
            let theta = PI * c as f64 / cfg.n_acc as f64;
            let (w0, w1) = (theta.cos(), theta.sin());
            let gain = 1.0 + 0.2 * c as f64;
            (0..n)
                .map(|i| {
                    amp * gain * (w0 * latent[0][i] + w1 * latent[1][i])
                        + cfg.acc_noise_std * rng.sample::<f64, _>(StandardNormal)
                })
                .collect()
        })
        .collect();

    let strain: Vec<Channel> = cfg
        .strain
        .iter()
        .map(|s| {
            let mut combined = vec![0.0; n];
            for (g, a) in s.gains.iter().zip(&acc) {
                if *g != 0.0 {
                    for (dst, v) in combined.iter_mut().zip(a) {
                        *dst += g * v;
                    }
                }
            }
            let dynamic = sp.filter(&combined, &sp.mask(s.band_hz.0, s.band_hz.1));
            let samples = dynamic
                .into_iter()
                .map(|v| s.offset + v + s.noise_std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Channel::new(s.name.clone(), samples)
        })
        .collect();

    let acc_channels = acc
        .into_iter()
        .enumerate()
        .map(|(c, samples)| Channel::new(format!("A{}", c + 1), samples))
        .collect();
    let labels = Labels {
        rider_id: plan.rider.id.clone(),
        underground: plan.ground.underground,
        speed_kmh: plan.speed,
    };
    let file_id = format!(
        "{}_{}_{}kmh_{}",
        plan.rider.id,
        plan.ground.underground.as_str(),
        format_speed(plan.speed),
        plan.replicate
    );
    let (role, location) = if plan.replicate < cfg.files_per_class {
        (FileRole::Usage, None)
    } else {
        (FileRole::Maneuver, Some(Location::Test))
    };
    Ok(TimeSeriesFile::new(
        file_id,
        cfg.sample_rate_hz,
        acc_channels,
        strain,
        Some(labels),
    )?
    .with_role(role, location)
    .with_rider(Some(plan.rider.id.clone())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            duration_s: 8.0,
            riders: SynthConfig::default().riders[..1].to_vec(),
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_corpus_size() {
        let cfg = SynthConfig::default();
        assert_eq!(cfg.n_files(), 36);
        assert_eq!(cfg.n_samples(), 72_000);
    }

    #[test]
    fn mask_shape() {
        assert_eq!(band_mask(10.0, 5.0, 20.0, 1.0), 1.0);
        assert_eq!(band_mask(3.0, 5.0, 20.0, 1.0), 0.0);
        assert!((band_mask(4.5, 5.0, 20.0, 1.0) - 0.5).abs() < 1e-12);
        assert!((band_mask(20.5, 5.0, 20.0, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(band_mask(-10.0, 5.0, 20.0, 1.0), 1.0);
    }

    #[test]
    fn deterministic() {
        let a = generate_dataset(&small()).unwrap();
        let b = generate_dataset(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a[0].acc_channels[0].samples, c[0].acc_channels[0].samples);
        assert_eq!(a[0].acc_names(), c[0].acc_names());
    }

    #[test]
    fn roles_follow_replicates() {
        let cfg = SynthConfig {
            files_per_class: 1,
            maneuver_files_per_class: 1,
            ..small()
        };
        let files = generate_dataset(&cfg).unwrap();
        assert_eq!(files.len(), 12);
        for f in &files {
            let maneuver = f.file_id.ends_with("_1");
            assert_eq!(f.role == FileRole::Maneuver, maneuver);
            assert!(f.labels.is_some());
        }
    }

    #[test]
    fn rejects_empty_classes() {
        let cfg = SynthConfig {
            speeds_kmh: vec![],
            ..SynthConfig::default()
        };
        assert!(matches!(generate_dataset(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = SynthConfig::default();
        cfg.undergrounds[1].band_hz = cfg.undergrounds[0].band_hz;
        cfg.undergrounds[1].power = cfg.undergrounds[0].power;
        assert!(cfg.validate().is_err());
    }
}
