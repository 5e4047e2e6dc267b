//! Fictitious fatigue damage from strain histories: turning points, 4-point
//! rainflow counting with a second pass over the doubled residue, a
//! single-slope Wöhler curve and elementary Palmgren–Miner accumulation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default slope exponent of the fictitious Wöhler curve.
pub const DEFAULT_WOEHLER_K: f64 = 5.0;
/// Default capacity constant of the fictitious Wöhler curve.
pub const DEFAULT_WOEHLER_CAPACITY: f64 = 1e7;

/// Strictly alternating local extrema of `series`.
///
/// Runs of equal samples collapse to one point; the first and last samples
/// are kept as they start and end the alternation. A constant series yields
/// a single point.
pub fn turning_points(series: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &v in series {
        match out.len() {
            0 => out.push(v),
            1 => {
                if v != out[0] {
                    out.push(v);
                }
            }
            n => {
                let (a, b) = (out[n - 2], out[n - 1]);
                if v == b {
                    continue;
                }
                // still moving in the same direction: extend the excursion
                if (b > a && v > b) || (b < a && v < b) {
                    out[n - 1] = v;
                } else {
                    out.push(v);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    /// Half the strain range, µm/m.
    pub amplitude: f64,
    pub mean: f64,
    pub count: f64,
    /// Closed while processing the doubled residue.
    pub residue_closed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleList {
    pub cycles: Vec<Cycle>,
}

impl CycleList {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn extend(&mut self, other: &CycleList) {
        self.cycles.extend_from_slice(&other.cycles);
    }
}

/// Runs the 4-point rule over `points`, returning closed cycles and the
/// residue.
fn four_point(points: &[f64], residue_closed: bool) -> (Vec<Cycle>, Vec<f64>) {
    let mut stack: Vec<f64> = Vec::with_capacity(points.len());
    let mut cycles = Vec::new();
    for &p in points {
        stack.push(p);
        while stack.len() >= 4 {
            let n = stack.len();
            let (s1, s2, s3, s4) = (stack[n - 4], stack[n - 3], stack[n - 2], stack[n - 1]);
            let inner = (s2 - s3).abs();
            if inner <= (s1 - s2).abs() && inner <= (s3 - s4).abs() {
                cycles.push(Cycle {
                    amplitude: inner / 2.0,
                    mean: (s2 + s3) / 2.0,
                    count: 1.0,
                    residue_closed,
                });
                stack.truncate(n - 3);
                stack.push(s4);
            } else {
                break;
            }
        }
    }
    (cycles, stack)
}

/// Rainflow count of alternating turning points.
///
/// The first pass applies the 4-point rule and leaves a residue. The second
/// pass runs the same rule on the residue concatenated with itself, which
/// closes every residue cycle exactly once, so only full cycles remain.
pub fn rainflow_count(tp: &[f64]) -> CycleList {
    let (mut cycles, residue) = four_point(tp, false);
    if residue.len() >= 2 {
        let mut doubled = residue.clone();
        doubled.extend_from_slice(&residue);
        let (closed, _) = four_point(&turning_points(&doubled), true);
        cycles.extend(closed);
    }
    CycleList { cycles }
}

/// Rainflow count straight from a sample series.
pub fn rainflow_series(series: &[f64]) -> CycleList {
    rainflow_count(&turning_points(series))
}

/// Single-slope S-N curve `N = K · ε_a^(-k)`, amplitudes in µm/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WoehlerCurve {
    pub k: f64,
    #[serde(rename = "K")]
    pub capacity: f64,
}

impl Default for WoehlerCurve {
    fn default() -> Self {
        Self {
            k: DEFAULT_WOEHLER_K,
            capacity: DEFAULT_WOEHLER_CAPACITY,
        }
    }
}

impl WoehlerCurve {
    pub fn new(k: f64, capacity: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite() && capacity > 0.0 && capacity.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "Wöhler curve needs k > 0 and K > 0, got k={k}, K={capacity}"
            )));
        }
        Ok(Self { k, capacity })
    }

    /// Endurable cycles at amplitude `eps_a`.
    pub fn cycles_to_failure(&self, eps_a: f64) -> f64 {
        self.capacity * eps_a.powf(-self.k)
    }
}

/// Elementary Palmgren–Miner sum: `Σ n_i / N(ε_a,i)` with no endurance limit
/// or knee. Zero-amplitude cycles contribute nothing.
pub fn damage_sum(cycles: &CycleList, curve: &WoehlerCurve) -> f64 {
    cycles
        .cycles
        .iter()
        .filter(|c| c.amplitude > 0.0)
        .map(|c| c.count * c.amplitude.powf(curve.k) / curve.capacity)
        .sum()
}

/// Damage of one strain channel in one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageRecord {
    pub file_id: String,
    pub segment: usize,
    pub channel: String,
    pub damage: f64,
    /// `log10(damage)`; absent when the damage is zero.
    pub lg_damage: Option<f64>,
}

impl DamageRecord {
    pub fn new(file_id: &str, segment: usize, channel: &str, damage: f64) -> Self {
        Self {
            file_id: file_id.to_string(),
            segment,
            channel: channel.to_string(),
            damage,
            lg_damage: (damage > 0.0).then(|| damage.log10()),
        }
    }
}

/// Damage of a strain series under `curve`.
pub fn segment_damage(series: &[f64], curve: &WoehlerCurve) -> f64 {
    damage_sum(&rainflow_series(series), curve)
}

/// Writes `file_id,segment,channel,D,lgD` rows; lgD is empty for D = 0.
pub fn write_damage_csv<W: Write>(records: &[DamageRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["file_id", "segment", "channel", "D", "lgD"])?;
    for r in records {
        w.write_record([
            r.file_id.clone(),
            r.segment.to_string(),
            r.channel.clone(),
            format!("{:e}", r.damage),
            r.lg_damage.map_or(String::new(), |v| format!("{v}")),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<damage csv>", e))?;
    Ok(())
}

/// Binned amplitude × mean view of a cycle list. Diagnostic only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RainflowMatrix {
    pub amplitude_edges: Vec<f64>,
    pub mean_edges: Vec<f64>,
    /// `counts[amplitude_bin][mean_bin]`.
    pub counts: Vec<Vec<f64>>,
}

pub const RAINFLOW_MATRIX_BINS: usize = 64;

impl RainflowMatrix {
    pub fn from_cycles(cycles: &CycleList, bins: usize) -> Self {
        let bins = bins.max(1);
        let range = |f: fn(&Cycle) -> f64| {
            let lo = cycles.cycles.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = cycles.cycles.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                (lo, if hi > lo { hi } else { lo + 1.0 })
            } else {
                (0.0, 1.0)
            }
        };
        let (a_lo, a_hi) = range(|c| c.amplitude);
        let (m_lo, m_hi) = range(|c| c.mean);
        let edges = |lo: f64, hi: f64| -> Vec<f64> {
            (0..=bins)
                .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
                .collect()
        };
        let bin = |v: f64, lo: f64, hi: f64| -> usize {
            (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
        };
        let mut counts = vec![vec![0.0; bins]; bins];
        for c in &cycles.cycles {
            counts[bin(c.amplitude, a_lo, a_hi)][bin(c.mean, m_lo, m_hi)] += c.count;
        }
        Self {
            amplitude_edges: edges(a_lo, a_hi),
            mean_edges: edges(m_lo, m_hi),
            counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turning_point_examples() {
        assert_eq!(turning_points(&[0.0, 1.0, 2.0, 1.0, 0.0]), vec![0.0, 2.0, 0.0]);
        assert_eq!(turning_points(&[0.0, 1.0, 2.0, 3.0]), vec![0.0, 3.0]);
        assert_eq!(turning_points(&[4.0, 4.0, 4.0]), vec![4.0]);
        assert!(turning_points(&[]).is_empty());
        assert_eq!(
            turning_points(&[1.0, 1.0, 3.0, 3.0, 2.0, 2.0, 5.0]),
            vec![1.0, 3.0, 2.0, 5.0]
        );
    }

    #[test]
    fn ramp_residue_closes_one_cycle() {
        let c = rainflow_count(&[0.0, 10.0]);
        assert_eq!(c.len(), 1);
        assert_eq!((c.cycles[0].amplitude, c.cycles[0].mean), (5.0, 5.0));
        assert!(c.cycles[0].residue_closed);
    }

    #[test]
    fn hill_closes_in_second_pass() {
        let tp = turning_points(&[0.0, 1.0, 2.0, 1.0, 0.0]);
        let (first, residue) = four_point(&tp, false);
        assert!(first.is_empty());
        assert_eq!(residue, tp);
        let c = rainflow_count(&tp);
        assert_eq!(c.len(), 1);
        assert_eq!((c.cycles[0].amplitude, c.cycles[0].mean), (1.0, 1.0));
    }

    #[test]
    fn classic_sequence_first_pass() {
        let tp = [-2.0, 1.0, -3.0, 5.0, -1.0, 3.0, -4.0, 4.0, -2.0];
        let (cycles, residue) = four_point(&tp, false);
        // hand trace: only (5,-1,3,-4) satisfies the rule, closing -1/3
        let got: Vec<(f64, f64)> = cycles.iter().map(|c| (c.amplitude, c.mean)).collect();
        assert_eq!(got, vec![(2.0, 1.0)]);
        assert_eq!(residue, vec![-2.0, 1.0, -3.0, 5.0, -4.0, 4.0, -2.0]);
        // all nine points end up in four full cycles
        assert_eq!(rainflow_count(&tp).len(), 4);
    }

    #[test]
    fn damage_examples() {
        let curve = WoehlerCurve::default();
        assert_eq!(damage_sum(&CycleList::default(), &curve), 0.0);

        // N(ε) = 1 at ε = K^(1/k)
        let eps = curve.capacity.powf(1.0 / curve.k);
        let one = CycleList {
            cycles: vec![Cycle {
                amplitude: eps,
                mean: 0.0,
                count: 1.0,
                residue_closed: false,
            }],
        };
        assert!((damage_sum(&one, &curve) - 1.0).abs() < 1e-12);

        let zero = CycleList {
            cycles: vec![Cycle {
                amplitude: 0.0,
                mean: 1.0,
                count: 1.0,
                residue_closed: false,
            }],
        };
        assert_eq!(damage_sum(&zero, &curve), 0.0);
    }

    #[test]
    fn doubling_amplitudes_scales_by_32() {
        let series: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
        let doubled: Vec<f64> = series.iter().map(|v| 2.0 * v).collect();
        let curve = WoehlerCurve::default();
        let (a, b) = (segment_damage(&series, &curve), segment_damage(&doubled, &curve));
        assert!((b / a - 32.0).abs() < 1e-9 * 32.0);
    }

    #[test]
    fn invalid_curve() {
        assert!(WoehlerCurve::new(0.0, 1e7).is_err());
        assert!(WoehlerCurve::new(5.0, -1.0).is_err());
    }

    #[test]
    fn damage_record_log() {
        let r = DamageRecord::new("f", 0, "s1", 100.0);
        assert_eq!(r.lg_damage, Some(2.0));
        assert_eq!(DamageRecord::new("f", 0, "s1", 0.0).lg_damage, None);
    }

    #[test]
    fn csv_export() {
        let recs = vec![
            DamageRecord::new("f", 0, "s1", 1000.0),
            DamageRecord::new("f", 1, "s1", 0.0),
        ];
        let mut buf = Vec::new();
        write_damage_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "file_id,segment,channel,D,lgD\nf,0,s1,1e3,3\nf,1,s1,0e0,\n");
    }

    #[test]
    fn matrix_counts_all_cycles() {
        let c = rainflow_series(&[0.0, 5.0, 1.0, 4.0, -3.0, 2.0, 0.0]);
        let m = RainflowMatrix::from_cycles(&c, RAINFLOW_MATRIX_BINS);
        let total: f64 = m.counts.iter().flatten().sum();
        assert_eq!(total, c.len() as f64);
        assert_eq!(m.amplitude_edges.len(), 65);
    }
}
