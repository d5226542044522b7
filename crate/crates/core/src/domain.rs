//! Shared domain types: encoder presets, the (preset, bitrate) operating grid
//! and the rate/time budgets a plan must respect.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// x264-style speed preset. Variants are declared fastest first, so the derived
/// `Ord` agrees with [`Preset::speed_rank`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ultrafast,
    Veryfast,
    Fast,
    Slow,
    Veryslow,
}

impl Preset {
    /// All presets, fastest first.
    pub const ALL: [Preset; 5] = [
        Preset::Ultrafast,
        Preset::Veryfast,
        Preset::Fast,
        Preset::Slow,
        Preset::Veryslow,
    ];

    /// 0 for ultrafast up to 4 for veryslow.
    pub fn speed_rank(self) -> u8 {
        self as u8
    }

    pub fn from_speed_rank(rank: u8) -> Option<Preset> {
        Preset::ALL.get(rank as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ultrafast => "ultrafast",
            Preset::Veryfast => "veryfast",
            Preset::Fast => "fast",
            Preset::Slow => "slow",
            Preset::Veryslow => "veryslow",
        }
    }

    /// The five presets, slowest first.
    pub fn slowest_first() -> Vec<Preset> {
        vec![
            Preset::Veryslow,
            Preset::Slow,
            Preset::Fast,
            Preset::Veryfast,
            Preset::Ultrafast,
        ]
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown preset `{s}`")))
    }
}

/// Default bitrate ladder in kbps.
pub const DEFAULT_BITRATES_KBPS: [u32; 10] = [200, 400, 600, 800, 1000, 2000, 3000, 4000, 5000, 6000];

/// One (preset, bitrate) pair together with its position in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub preset: Preset,
    pub bitrate_kbps: u32,
    pub index: usize,
}

/// All operating points for a preset list and a bitrate ladder, in
/// preset-major order: `index = preset_pos * bitrates.len() + bitrate_pos`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatingGrid {
    presets: Vec<Preset>,
    bitrates_kbps: Vec<u32>,
    points: Vec<OperatingPoint>,
}

impl OperatingGrid {
    pub fn new(presets: &[Preset], bitrates_kbps: &[u32]) -> Result<Self> {
        build_operating_grid(presets, bitrates_kbps)
    }

    /// 5 presets x 10 bitrates, M = 50.
    pub fn standard() -> Self {
        build_operating_grid(&Preset::slowest_first(), &DEFAULT_BITRATES_KBPS)
            .expect("default grid is valid")
    }

    pub fn presets(&self) -> &[Preset] {
        &self.presets
    }

    pub fn bitrates_kbps(&self) -> &[u32] {
        &self.bitrates_kbps
    }

    pub fn points(&self) -> &[OperatingPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> Option<&OperatingPoint> {
        self.points.get(index)
    }

    pub fn index_of(&self, preset: Preset, bitrate_kbps: u32) -> Option<usize> {
        let p = self.presets.iter().position(|&q| q == preset)?;
        let b = self.bitrates_kbps.iter().position(|&r| r == bitrate_kbps)?;
        Some(p * self.bitrates_kbps.len() + b)
    }
}

pub fn build_operating_grid(presets: &[Preset], bitrates_kbps: &[u32]) -> Result<OperatingGrid> {
    if presets.is_empty() || bitrates_kbps.is_empty() {
        return Err(Error::invalid("operating grid needs at least one preset and one bitrate"));
    }
    if presets.iter().collect::<BTreeSet<_>>().len() != presets.len() {
        return Err(Error::invalid("duplicate preset in operating grid"));
    }
    if bitrates_kbps.iter().collect::<BTreeSet<_>>().len() != bitrates_kbps.len() {
        return Err(Error::invalid("duplicate bitrate in operating grid"));
    }
    if bitrates_kbps.contains(&0) {
        return Err(Error::invalid("bitrates must be positive"));
    }
    let points = presets
        .iter()
        .flat_map(|&preset| bitrates_kbps.iter().map(move |&bitrate_kbps| (preset, bitrate_kbps)))
        .enumerate()
        .map(|(index, (preset, bitrate_kbps))| OperatingPoint {
            preset,
            bitrate_kbps,
            index,
        })
        .collect();
    Ok(OperatingGrid {
        presets: presets.to_vec(),
        bitrates_kbps: bitrates_kbps.to_vec(),
        points,
    })
}

/// Total-rate (kbps) and total-time (s) limits. Both bounds are inclusive and
/// may be `f64::INFINITY` to leave a resource unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub rate_threshold_kbps: f64,
    pub time_threshold_s: f64,
}

impl Budgets {
    pub fn new(rate_threshold_kbps: f64, time_threshold_s: f64) -> Result<Self> {
        for (name, v) in [("rate", rate_threshold_kbps), ("time", time_threshold_s)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::invalid(format!("{name} budget must be positive, got {v}")));
            }
        }
        Ok(Budgets {
            rate_threshold_kbps,
            time_threshold_s,
        })
    }

    pub fn unconstrained() -> Self {
        Budgets {
            rate_threshold_kbps: f64::INFINITY,
            time_threshold_s: f64::INFINITY,
        }
    }

    /// R_th = 30000 kbps, T_th = 11 s.
    pub fn standard() -> Self {
        Budgets {
            rate_threshold_kbps: 30_000.0,
            time_threshold_s: 11.0,
        }
    }
}

/// Wall-clock time available for transcoding a window of segments once the
/// per-segment prediction and optimisation overhead has been paid.
pub fn derive_time_threshold(num_segments: usize, segment_duration_s: f64, overhead_s: f64) -> Result<f64> {
    if num_segments == 0 {
        return Err(Error::invalid("num_segments must be positive"));
    }
    if !(segment_duration_s > 0.0) || !(overhead_s >= 0.0) {
        return Err(Error::invalid("segment duration must be positive and overhead non-negative"));
    }
    if overhead_s >= segment_duration_s {
        return Err(Error::invalid(format!(
            "overhead {overhead_s} s leaves no transcoding time in a {segment_duration_s} s segment"
        )));
    }
    Ok(num_segments as f64 * (segment_duration_s - overhead_s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid_has_fifty_points() {
        let grid = OperatingGrid::standard();
        assert_eq!(grid.len(), 50);
        assert_eq!(grid.point(0).unwrap().preset, Preset::Veryslow);
        assert_eq!(grid.point(49).unwrap().bitrate_kbps, 6000);
    }

    #[test]
    fn singleton_grid() {
        let grid = build_operating_grid(&[Preset::Fast], &[1000]).unwrap();
        assert_eq!(
            grid.points(),
            &[OperatingPoint {
                preset: Preset::Fast,
                bitrate_kbps: 1000,
                index: 0
            }]
        );
    }

    #[test]
    fn row_major_ordering() {
        let presets = [Preset::Slow, Preset::Ultrafast];
        let grid = build_operating_grid(&presets, &[300, 500, 700]).unwrap();
        assert_eq!(grid.len(), 6);
        let p4 = grid.point(4).unwrap();
        assert_eq!((p4.preset, p4.bitrate_kbps), (Preset::Ultrafast, 500));
        for (j, p) in grid.points().iter().enumerate() {
            assert_eq!(p.index, j);
        }
    }

    #[test]
    fn duplicates_rejected() {
        assert!(build_operating_grid(&[Preset::Fast, Preset::Fast], &[1]).is_err());
        assert!(build_operating_grid(&[Preset::Fast], &[1, 1]).is_err());
        assert!(build_operating_grid(&[], &[1]).is_err());
    }

    #[test]
    fn time_threshold_examples() {
        let t = derive_time_threshold(6, 2.0, 0.04).unwrap();
        assert!((t - 11.76).abs() < 1e-12);
        assert_eq!(derive_time_threshold(1, 2.0, 0.0).unwrap(), 2.0);
        assert!(derive_time_threshold(6, 2.0, 2.0).is_err());
    }

    #[test]
    fn preset_rank_bijection() {
        for (rank, p) in Preset::ALL.iter().enumerate() {
            assert_eq!(p.speed_rank() as usize, rank);
            assert_eq!(Preset::from_speed_rank(rank as u8), Some(*p));
            assert_eq!(p.name().parse::<Preset>().unwrap(), *p);
        }
        assert!(Preset::Ultrafast < Preset::Veryslow);
    }

    #[test]
    fn budgets_must_be_positive() {
        assert!(Budgets::new(0.0, 1.0).is_err());
        assert!(Budgets::new(1.0, f64::NAN).is_err());
        assert!(Budgets::new(f64::INFINITY, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn grid_index_round_trips(np in 1usize..=5, bitrates in proptest::collection::btree_set(1u32..20_000, 1..12)) {
            let presets: Vec<Preset> = Preset::ALL[..np].to_vec();
            let bitrates: Vec<u32> = bitrates.into_iter().collect();
            let grid = build_operating_grid(&presets, &bitrates).unwrap();
            prop_assert_eq!(grid.len(), np * bitrates.len());
            for p in grid.points() {
                prop_assert_eq!(grid.index_of(p.preset, p.bitrate_kbps), Some(p.index));
            }
        }
    }
}
