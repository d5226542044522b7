//! Deterministic synthetic corpus: segment features, true R-D curves and
//! true transcoding times for every preset on a grid.
//!
//! Each segment draws a latent complexity in [0, 1] from its archetype's band.
//! Complexity drives the features (monotonically for `mv_mean`), lowers the
//! R-D curve and raises the encode time. Slower presets are both better and
//! slower at every bitrate.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{OperatingGrid, Preset};
use crate::error::{Error, Result};
use crate::features::{color_codes, SegmentFeatures};
use crate::pipeline::RDRecord;
use crate::predictors::TimeRow;
use crate::rdmodel::{LogCurve, RDCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    Lecture,
    NewsClip,
    LyricVideo,
    HowTo,
    Vlog,
    Animation,
    CoverSong,
    LiveMusic,
    Gaming,
    Hdr,
    Sports,
}

impl Archetype {
    pub const ALL: [Archetype; 11] = [
        Archetype::Lecture,
        Archetype::NewsClip,
        Archetype::LyricVideo,
        Archetype::HowTo,
        Archetype::Vlog,
        Archetype::Animation,
        Archetype::CoverSong,
        Archetype::LiveMusic,
        Archetype::Gaming,
        Archetype::Hdr,
        Archetype::Sports,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::Lecture => "lecture",
            Archetype::NewsClip => "news_clip",
            Archetype::LyricVideo => "lyric_video",
            Archetype::HowTo => "how_to",
            Archetype::Vlog => "vlog",
            Archetype::Animation => "animation",
            Archetype::CoverSong => "cover_song",
            Archetype::LiveMusic => "live_music",
            Archetype::Gaming => "gaming",
            Archetype::Hdr => "hdr",
            Archetype::Sports => "sports",
        }
    }

    /// Complexity interval the archetype draws from.
    pub fn band(self) -> (f64, f64) {
        match self {
            Archetype::Lecture => (0.0, 0.15),
            Archetype::NewsClip => (0.1, 0.3),
            Archetype::LyricVideo => (0.15, 0.35),
            Archetype::HowTo => (0.2, 0.4),
            Archetype::Vlog => (0.3, 0.55),
            Archetype::Animation => (0.35, 0.6),
            Archetype::CoverSong => (0.4, 0.6),
            Archetype::LiveMusic => (0.55, 0.8),
            Archetype::Gaming => (0.6, 0.85),
            Archetype::Hdr => (0.65, 0.9),
            Archetype::Sports => (0.85, 1.0),
        }
    }

    /// Weights over 360p, 720p, 1080p.
    fn resolution_weights(self) -> [f64; 3] {
        match self {
            Archetype::Lecture | Archetype::LyricVideo => [0.4, 0.5, 0.1],
            Archetype::Sports => [0.0, 0.2, 0.8],
            Archetype::Hdr | Archetype::Gaming => [0.0, 0.3, 0.7],
            _ => [0.2, 0.4, 0.4],
        }
    }
}

impl std::str::FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown archetype {s:?}")))
    }
}

impl std::fmt::Display for Archetype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub num_segments: usize,
    /// Relative archetype weights; archetypes absent from the list never occur.
    pub mix: Vec<(Archetype, f64)>,
    /// Adds a per-segment concave perturbation to every true R-D curve.
    pub hard_mode: bool,
}

impl SynthParams {
    /// All eleven archetypes with equal weight.
    pub fn new(seed: u64, num_segments: usize) -> Self {
        SynthParams {
            seed,
            num_segments,
            mix: Archetype::ALL.iter().map(|&a| (a, 1.0)).collect(),
            hard_mode: false,
        }
    }

    pub fn only(seed: u64, num_segments: usize, archetype: Archetype) -> Self {
        SynthParams {
            mix: vec![(archetype, 1.0)],
            ..SynthParams::new(seed, num_segments)
        }
    }
}

/// time(r) = base_s + per_kbps_s * r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeCoefficients {
    pub base_s: f64,
    pub per_kbps_s: f64,
}

impl TimeCoefficients {
    pub fn eval(&self, bitrate_kbps: f64) -> f64 {
        self.base_s + self.per_kbps_s * bitrate_kbps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSegment {
    pub features: SegmentFeatures,
    pub archetype: Archetype,
    pub complexity: f64,
    pub true_curves: BTreeMap<Preset, LogCurve>,
    /// Hard-mode curvature: PSNR gains -curvature * (ln r - ln 1095)^2.
    pub curvature: f64,
    /// Measurement noise added to sampled PSNR, one value per grid bitrate,
    /// shared by all presets.
    pub psnr_noise_db: Vec<f64>,
    pub time: BTreeMap<Preset, TimeCoefficients>,
}

/// Centre of the curvature term, the geometric middle of 200..6000 kbps.
const CURVATURE_CENTER_LN: f64 = 6.998_509_7;
const PSNR_NOISE_DB: f64 = 0.15;
const TIME_NOISE: f64 = 0.03;

impl SyntheticSegment {
    /// Sampled PSNR under `preset` at `bitrate_kbps`, the value written to R-D tables.
    pub fn measured_psnr(&self, preset: Preset, bitrate_index: usize, bitrate_kbps: f64) -> f64 {
        let x = bitrate_kbps.ln();
        let curve = &self.true_curves[&preset];
        curve.a * x + curve.b - self.curvature * (x - CURVATURE_CENTER_LN).powi(2)
            + self.psnr_noise_db.get(bitrate_index).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub segments: Vec<SyntheticSegment>,
    /// One row per (segment, preset, bitrate), segment-major.
    pub time_rows: Vec<TimeRow>,
    /// One record per (segment, preset), segment-major.
    pub rd_records: Vec<RDRecord>,
}

impl SyntheticCorpus {
    pub fn features(&self) -> Vec<SegmentFeatures> {
        self.segments.iter().map(|s| s.features.clone()).collect()
    }
}

/// Quality offset of a preset relative to veryslow, scaled by complexity.
fn preset_offset(preset: Preset) -> f64 {
    match preset {
        Preset::Ultrafast => -3.0,
        Preset::Veryfast => -1.2,
        Preset::Fast => -0.6,
        Preset::Slow => -0.2,
        Preset::Veryslow => 0.0,
    }
}

fn preset_time_multiplier(preset: Preset) -> f64 {
    match preset {
        Preset::Ultrafast => 0.45,
        Preset::Veryfast => 0.6,
        Preset::Fast => 0.85,
        Preset::Slow => 1.35,
        Preset::Veryslow => 2.2,
    }
}

const FRAMES: f64 = 60.0;
const RESOLUTIONS: [(u32, u32); 3] = [(640, 360), (1280, 720), (1920, 1080)];

fn gen_features(id: String, archetype: Archetype, c: f64, rng: &mut ChaCha8Rng) -> SegmentFeatures {
    let res = WeightedIndex::new(archetype.resolution_weights()).expect("static weights");
    let (width, height) = RESOLUTIONS[res.sample(rng)];
    let mut noise = |scale: f64| rng.gen_range(-scale..scale);
    let mbs = f64::from(width * height) / 256.0 * FRAMES;
    let p_frames = (20.0 + 20.0 * c) * (1.0 + noise(0.05));
    let b_frames = FRAMES - 2.0 - p_frames;
    let intra = (0.02 + 0.1 * c) * (1.0 + noise(0.1));
    let skip = (0.55 * (1.0 - c)) * (1.0 + noise(0.1));
    let fine = c * (1.0 + noise(0.1));
    let hdr = archetype == Archetype::Hdr;
    SegmentFeatures {
        segment_id: id,
        duration_s: 2.0,
        pict_type_b: b_frames.round(),
        pict_type_p: p_frames.round(),
        i_mb: (mbs * intra).round(),
        p_mb: (mbs * (1.0 - intra - skip) * 0.6).round(),
        b_mb: (mbs * (1.0 - intra - skip) * 0.4).round(),
        s_mb: (mbs * skip).round(),
        mb_16x16: (mbs * (0.7 - 0.5 * fine).max(0.05)).round(),
        mb_16x8: (mbs * 0.08 * (1.0 + fine)).round(),
        mb_8x16: (mbs * 0.08 * (1.0 + fine)).round(),
        mb_8x8: (mbs * (0.1 + 0.2 * fine)).round(),
        mb_4x4: (mbs * 0.15 * fine).round(),
        sar: 1.0,
        skip_ratio_b: (0.85 - 0.6 * c + noise(0.05)).clamp(0.0, 1.0),
        skip_ratio_p: (0.75 - 0.6 * c + noise(0.05)).clamp(0.0, 1.0),
        avg_qp_y_p: 22.0 + 12.0 * c + noise(1.0),
        avg_qp_y_b: 24.0 + 12.0 * c + noise(1.0),
        avg_qp_y_i: 20.0 + 10.0 * c + noise(1.0),
        mv_count: (mbs * (0.3 + 0.6 * c) * (1.0 + noise(0.05))).round(),
        mv_mean: 40_000.0 + 760_000.0 * c,
        color_range: color_codes::RANGE_TV,
        color_space: if hdr { color_codes::BT2020 } else { color_codes::BT709 },
        color_primaries: if hdr { color_codes::BT2020 } else { color_codes::BT709 },
        color_transfer: if hdr { color_codes::TRANSFER_SMPTE2084 } else { color_codes::BT709 },
        width,
        height,
    }
}

/// Generates `params.num_segments` segments and their measurements on `grid`.
/// The output is a pure function of `params` and `grid`.
pub fn gen_corpus(params: &SynthParams, grid: &OperatingGrid) -> Result<SyntheticCorpus> {
    if params.num_segments == 0 {
        return Err(Error::invalid("corpus needs at least one segment"));
    }
    if params.mix.is_empty() || params.mix.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("archetype weights must be finite and non-negative"));
    }
    let pick = WeightedIndex::new(params.mix.iter().map(|(_, w)| *w))
        .map_err(|e| Error::invalid(format!("archetype weights: {e}")))?;
    let bitrates: Vec<f64> = grid.bitrates_kbps().iter().map(|&b| f64::from(b)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counts: BTreeMap<Archetype, usize> = BTreeMap::new();
    let mut corpus = SyntheticCorpus {
        segments: Vec::with_capacity(params.num_segments),
        time_rows: Vec::new(),
        rd_records: Vec::new(),
    };
    for _ in 0..params.num_segments {
        let archetype = params.mix[pick.sample(&mut rng)].0;
        let (lo, hi) = archetype.band();
        let c = rng.gen_range(lo..=hi);
        let n = counts.entry(archetype).or_insert(0);
        let id = format!("{}-{:04}", archetype.name(), *n);
        *n += 1;
        let features = gen_features(id, archetype, c, &mut rng);

        // Anchor the veryslow curve at 200 and 6000 kbps, then shift others down.
        let lo_psnr = 34.0 - 12.0 * c + rng.gen_range(-0.5..0.5);
        let hi_psnr = 48.0 - 8.0 * c + rng.gen_range(-0.5..0.5);
        let a = (hi_psnr - lo_psnr) / (6000f64 / 200.0).ln();
        let b = lo_psnr - a * 200f64.ln();
        let spread = 0.6 + 0.8 * c;
        let true_curves: BTreeMap<Preset, LogCurve> = grid
            .presets()
            .iter()
            .map(|&p| (p, LogCurve { a, b: b + preset_offset(p) * spread }))
            .collect();
        let curvature = if params.hard_mode { rng.gen_range(0.0..0.4) } else { 0.0 };
        let psnr_noise_db: Vec<f64> = bitrates.iter().map(|_| rng.gen_range(-PSNR_NOISE_DB..PSNR_NOISE_DB)).collect();

        let pixels = f64::from(features.width * features.height);
        let work = (0.55 + 0.45 * pixels / 2_073_600.0) * (0.4 + c);
        let time: BTreeMap<Preset, TimeCoefficients> = grid
            .presets()
            .iter()
            .map(|&p| {
                let base = preset_time_multiplier(p) * work * (1.0 + rng.gen_range(-TIME_NOISE..TIME_NOISE));
                (
                    p,
                    TimeCoefficients {
                        base_s: base,
                        per_kbps_s: base * 0.25 / 6000.0,
                    },
                )
            })
            .collect();

        let seg = SyntheticSegment {
            features,
            archetype,
            complexity: c,
            true_curves,
            curvature,
            psnr_noise_db,
            time,
        };
        for &p in grid.presets() {
            for &r in grid.bitrates_kbps() {
                corpus.time_rows.push(TimeRow {
                    features: seg.features.clone(),
                    preset: p,
                    target_bitrate_kbps: r,
                    transcode_time_s: seg.time[&p].eval(f64::from(r)),
                });
            }
            let psnr = bitrates.iter().enumerate().map(|(k, &r)| seg.measured_psnr(p, k, r)).collect();
            corpus.rd_records.push(RDRecord {
                features: seg.features.clone(),
                preset: p,
                curve: RDCurve::new(grid.bitrates_kbps().to_vec(), psnr)?,
            });
        }
        corpus.segments.push(seg);
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_segment_row_counts() {
        let c = gen_corpus(&SynthParams::new(7, 1), &OperatingGrid::standard()).unwrap();
        assert_eq!(c.time_rows.len(), 50);
        assert_eq!(c.rd_records.len(), 5);
    }

    #[test]
    fn deterministic() {
        let grid = OperatingGrid::standard();
        let mut p = SynthParams::new(3, 40);
        p.hard_mode = true;
        assert_eq!(gen_corpus(&p, &grid).unwrap(), gen_corpus(&p, &grid).unwrap());
        let q = SynthParams::new(4, 40);
        assert_ne!(gen_corpus(&p, &grid).unwrap(), gen_corpus(&q, &grid).unwrap());
    }

    #[test]
    fn invariants_hold() {
        let grid = OperatingGrid::standard();
        for hard in [false, true] {
            let mut p = SynthParams::new(11, 300);
            p.hard_mode = hard;
            let corpus = gen_corpus(&p, &grid).unwrap();
            for (s, seg) in corpus.segments.iter().enumerate() {
                seg.features.validate().unwrap();
                let recs = &corpus.rd_records[s * 5..(s + 1) * 5];
                let times = &corpus.time_rows[s * 50..(s + 1) * 50];
                let psnr = |p: Preset, k: usize| recs.iter().find(|r| r.preset == p).unwrap().curve.psnr_db()[k];
                let time = |p: Preset, k: usize| {
                    times.iter().find(|t| t.preset == p && t.target_bitrate_kbps == grid.bitrates_kbps()[k]).unwrap().transcode_time_s
                };
                for k in 0..10 {
                    for w in Preset::ALL.windows(2) {
                        // ALL runs fastest to slowest.
                        assert!(psnr(w[1], k) >= psnr(w[0], k));
                        assert!(time(w[1], k) > time(w[0], k));
                    }
                }
                for rec in recs {
                    assert!(rec.curve.psnr_db().windows(2).all(|w| w[1] > w[0]));
                }
                for t in times {
                    assert!(t.transcode_time_s > 0.0 && t.transcode_time_s <= 4.0, "{}", t.transcode_time_s);
                }
                assert!(times.chunks(10).all(|c| c.windows(2).all(|w| w[1].transcode_time_s >= w[0].transcode_time_s)));
                assert!(seg.true_curves.values().all(|c| c.a > 0.0));
            }
        }
    }

    #[test]
    fn mv_mean_tracks_complexity() {
        let grid = OperatingGrid::standard();
        let corpus = gen_corpus(&SynthParams::new(5, 200), &grid).unwrap();
        let mut segs: Vec<&SyntheticSegment> = corpus.segments.iter().collect();
        segs.sort_by(|a, b| a.complexity.total_cmp(&b.complexity));
        assert!(segs.windows(2).all(|w| w[1].features.mv_mean >= w[0].features.mv_mean));
        let lo = segs.iter().find(|s| s.complexity < 0.15).unwrap();
        let hi = segs.iter().find(|s| s.complexity > 0.85).unwrap();
        assert!(hi.features.mv_mean > lo.features.mv_mean);
    }

    #[test]
    fn mix_and_ids() {
        let grid = OperatingGrid::standard();
        let corpus = gen_corpus(&SynthParams::only(1, 5, Archetype::Sports), &grid).unwrap();
        assert!(corpus.segments.iter().all(|s| s.archetype == Archetype::Sports));
        assert_eq!(corpus.segments[3].features.segment_id, "sports-0003");
        assert!(gen_corpus(&SynthParams::new(1, 0), &grid).is_err());
        assert_eq!("live_music".parse::<Archetype>().unwrap(), Archetype::LiveMusic);
    }
}
