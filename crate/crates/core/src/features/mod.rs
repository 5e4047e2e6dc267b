//! Feature extraction: windowed FFT magnitudes or scattering coefficients,
//! plus the layout table describing every coefficient position.

pub mod fft;
pub mod scattering;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::Segment;

pub use fft::{assemble_fft_vector, fft_features, hamming, FftFeatureExtractor};
pub use scattering::{
    assemble_scattering_vector, build_filterbank, FilterBank, ScatteringConfig, ScatteringVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    Scattering,
    Fft,
}

/// Per-channel block structure of a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlockLayout {
    Fft {
        l_seq: usize,
        /// DC through Nyquist.
        bins: usize,
    },
    Scattering {
        config: ScatteringConfig,
        n_times: usize,
        layer1_xi: Vec<f64>,
        layer2_xi: Vec<f64>,
        paths: Vec<(usize, usize)>,
    },
}

impl BlockLayout {
    pub fn block_len(&self) -> usize {
        match self {
            BlockLayout::Fft { bins, .. } => *bins,
            BlockLayout::Scattering {
                n_times,
                layer1_xi,
                paths,
                ..
            } => (1 + layer1_xi.len() + paths.len()) * n_times,
        }
    }

    /// Standardization groups inside one channel block.
    pub fn groups_per_channel(&self) -> usize {
        match self {
            BlockLayout::Fft { .. } => 1,
            BlockLayout::Scattering { .. } => 3,
        }
    }

    fn order_of(&self, offset: usize) -> usize {
        match self {
            BlockLayout::Fft { .. } => 0,
            BlockLayout::Scattering {
                n_times, layer1_xi, ..
            } => {
                let s1_end = (1 + layer1_xi.len()) * n_times;
                if offset < *n_times {
                    0
                } else if offset < s1_end {
                    1
                } else {
                    2
                }
            }
        }
    }
}

/// Describes what every position of a feature vector means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub channels: Vec<String>,
    pub block: BlockLayout,
}

/// One row of the exported layout table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub position: usize,
    pub channel: String,
    /// Scattering order (0, 1, 2); 0 for FFT bins.
    pub order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin: Option<usize>,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        self.channels.len() * self.block.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Group id of every position: channel for FFT, channel × order for
    /// scattering.
    pub fn group_map(&self) -> Vec<usize> {
        let block = self.block.block_len();
        let per = self.block.groups_per_channel();
        (0..self.len())
            .map(|p| (p / block) * per + self.block.order_of(p % block))
            .collect()
    }

    pub fn n_groups(&self) -> usize {
        self.channels.len() * self.block.groups_per_channel()
    }

    pub fn describe(&self, position: usize) -> LayoutEntry {
        let block = self.block.block_len();
        let channel = self.channels[position / block].clone();
        let offset = position % block;
        match &self.block {
            BlockLayout::Fft { .. } => LayoutEntry {
                position,
                channel,
                order: 0,
                lambda1: None,
                lambda2: None,
                time: None,
                bin: Some(offset),
            },
            BlockLayout::Scattering {
                n_times,
                layer1_xi,
                paths,
                ..
            } => {
                let row = offset / n_times;
                let time = Some(offset % n_times);
                let (order, l1, l2) = if row == 0 {
                    (0, None, None)
                } else if row <= layer1_xi.len() {
                    (1, Some(row - 1), None)
                } else {
                    let (i, j) = paths[row - 1 - layer1_xi.len()];
                    (2, Some(i), Some(j))
                };
                LayoutEntry {
                    position,
                    channel,
                    order,
                    lambda1: l1,
                    lambda2: l2,
                    time,
                    bin: None,
                }
            }
        }
    }

    pub fn table(&self) -> Vec<LayoutEntry> {
        (0..self.len()).map(|p| self.describe(p)).collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("layout serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A configured feature transform.
#[derive(Debug, Clone)]
pub enum Transform {
    Fft(FftFeatureExtractor),
    Scattering(Box<FilterBank>),
}

impl Transform {
    pub fn fft(l_seq: usize) -> Result<Self> {
        Ok(Transform::Fft(FftFeatureExtractor::new(l_seq)?))
    }

    pub fn scattering(cfg: &ScatteringConfig) -> Result<Self> {
        Ok(Transform::Scattering(Box::new(build_filterbank(cfg)?)))
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::Fft(_) => TransformKind::Fft,
            Transform::Scattering(_) => TransformKind::Scattering,
        }
    }

    pub fn l_seq(&self) -> usize {
        match self {
            Transform::Fft(f) => f.l_seq(),
            Transform::Scattering(b) => b.config().l_seq,
        }
    }

    pub fn layout(&self, channels: &[String]) -> FeatureLayout {
        let block = match self {
            Transform::Fft(f) => BlockLayout::Fft {
                l_seq: f.l_seq(),
                bins: f.n_bins(),
            },
            Transform::Scattering(b) => BlockLayout::Scattering {
                config: *b.config(),
                n_times: b.n_times(),
                layer1_xi: b.layer1.iter().map(|f| f.xi).collect(),
                layer2_xi: b.layer2.iter().map(|f| f.xi).collect(),
                paths: b.paths().to_vec(),
            },
        };
        FeatureLayout {
            channels: channels.to_vec(),
            block,
        }
    }

    /// Feature vector of a segment's acceleration channels.
    pub fn extract(&self, segment: &Segment) -> Result<Vec<f64>> {
        if segment.len() != self.l_seq() {
            return Err(Error::ShapeError {
                expected: self.l_seq(),
                found: segment.len(),
            });
        }
        match self {
            Transform::Fft(f) => f.assemble(segment),
            Transform::Scattering(b) => b.assemble(segment),
        }
    }
}
