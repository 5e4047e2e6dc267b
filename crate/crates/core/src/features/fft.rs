//! Hamming-windowed magnitude spectra, the baseline feature extractor.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::ingest::Segment;

/// Symmetric Hamming window, `w[n] = 0.54 - 0.46 cos(2πn / (len - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect()
}

/// Windowed one-sided magnitude spectrum for a fixed segment length.
#[derive(Clone)]
pub struct FftFeatureExtractor {
    l_seq: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftFeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftFeatureExtractor")
            .field("l_seq", &self.l_seq)
            .finish()
    }
}

impl FftFeatureExtractor {
    pub fn new(l_seq: usize) -> Result<Self> {
        if l_seq < 2 || !l_seq.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "FFT segment length must be a power of two >= 2, got {l_seq}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(l_seq);
        Ok(Self {
            l_seq,
            window: hamming(l_seq),
            fft,
        })
    }

    pub fn l_seq(&self) -> usize {
        self.l_seq
    }

    /// Bins per channel: DC through Nyquist.
    pub fn n_bins(&self) -> usize {
        self.l_seq / 2 + 1
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Magnitudes `|X_k|`, `k = 0..=l_seq/2`, of the windowed input.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.l_seq {
            return Err(Error::ShapeError {
                expected: self.l_seq,
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
        let mut buf: Vec<Complex<f64>> = x
            .iter()
            .zip(&self.window)
            .map(|(&v, &w)| Complex::new(v * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        Ok(buf[..self.n_bins()].iter().map(|c| c.norm()).collect())
    }

    /// Concatenated per-channel spectra of a segment's acceleration channels.
    pub fn assemble(&self, segment: &Segment) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(segment.acc_data.len() * self.n_bins());
        for (c, ch) in segment.acc_data.iter().enumerate() {
            let spec = self.features(ch).map_err(|e| locate(e, segment, c))?;
            out.extend(spec);
        }
        Ok(out)
    }
}

pub(crate) fn locate(e: Error, segment: &Segment, channel: usize) -> Error {
    match e {
        Error::NonFiniteSample { index, .. } => Error::NonFiniteSample {
            file: segment.file_id.clone(),
            channel: format!("acc[{channel}] segment {}", segment.index),
            index,
        },
        other => other,
    }
}

/// One-off spectrum of a single channel. Plans a fresh FFT on every call.
pub fn fft_features(x: &[f64]) -> Result<Vec<f64>> {
    FftFeatureExtractor::new(x.len())?.features(x)
}

/// Concatenated spectra of every acceleration channel of `segment`.
pub fn assemble_fft_vector(segment: &Segment) -> Result<Vec<f64>> {
    FftFeatureExtractor::new(segment.len())?.assemble(segment)
}
