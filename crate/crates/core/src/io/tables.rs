//! Strict CSV readers and matching writers.
//!
//! Headers must name every required column exactly once and nothing else.
//! Errors carry the 1-based file line (the header is line 1) and column.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use crate::domain::Preset;
use crate::error::{Error, Result};
use crate::features::{SegmentFeatures, FEATURE_NAMES, NUM_FEATURES};
use crate::pipeline::RDRecord;
use crate::predictors::TimeRow;
use crate::rdmodel::RDCurve;

const PSNR_PREFIX: &str = "psnr_at_";

struct Table {
    path: String,
    columns: HashMap<String, usize>,
    headers: Vec<String>,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn schema(path: &str, line: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut columns = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(schema(&name, 1, h, "empty column name"));
        }
        if columns.insert(h.clone(), i).is_some() {
            return Err(schema(&name, 1, h, "duplicate column"));
        }
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            schema(&name, line, "", e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }
    Ok(Table {
        path: name,
        columns,
        headers,
        rows,
    })
}

impl Table {
    /// Rejects missing required columns and any column not accepted by `extra`.
    fn expect_columns(&self, required: &[&str], extra: impl Fn(&str) -> bool) -> Result<()> {
        for h in &self.headers {
            if !required.contains(&h.as_str()) && !extra(h) {
                return Err(schema(&self.path, 1, h, "unknown column"));
            }
        }
        for r in required {
            if !self.columns.contains_key(*r) {
                return Err(schema(&self.path, 1, r, "missing column"));
            }
        }
        Ok(())
    }

    fn cell<'r>(&self, line: usize, rec: &'r csv::StringRecord, column: &str) -> Result<&'r str> {
        let v = rec.get(self.columns[column]).unwrap_or("");
        if v.is_empty() {
            return Err(schema(&self.path, line, column, "missing value"));
        }
        Ok(v)
    }

    fn parse<T: std::str::FromStr>(&self, line: usize, rec: &csv::StringRecord, column: &str) -> Result<T> {
        let v = self.cell(line, rec, column)?;
        v.parse()
            .map_err(|_| schema(&self.path, line, column, format!("cannot parse {v:?}")))
    }

    fn features(&self, line: usize, rec: &csv::StringRecord) -> Result<SegmentFeatures> {
        let id = self.cell(line, rec, "segment_id")?.to_string();
        let duration: f64 = self.parse(line, rec, "duration_s")?;
        let mut v = [0.0; NUM_FEATURES];
        for (slot, name) in v.iter_mut().zip(FEATURE_NAMES) {
            *slot = self.parse(line, rec, name)?;
        }
        SegmentFeatures::from_values(id, duration, &v).map_err(|e| {
            let msg = match e {
                Error::Invalid(m) => m,
                other => other.to_string(),
            };
            let column = if msg.starts_with("duration_s") {
                "duration_s"
            } else {
                FEATURE_NAMES
                    .iter()
                    .find(|n| msg.starts_with(&format!("{n} ")))
                    .copied()
                    .unwrap_or("")
            };
            schema(&self.path, line, column, msg)
        })
    }
}

fn feature_columns() -> Vec<&'static str> {
    let mut cols = vec!["segment_id", "duration_s"];
    cols.extend(FEATURE_NAMES);
    cols
}

/// Reads a per-(segment, preset, bitrate) transcoding-time table.
pub fn load_time_table(path: impl AsRef<Path>) -> Result<Vec<TimeRow>> {
    let t = read_table(path.as_ref())?;
    let mut required = feature_columns();
    required.extend(["preset", "target_bitrate_kbps", "transcode_time_s"]);
    t.expect_columns(&required, |_| false)?;
    t.rows
        .iter()
        .map(|(line, rec)| {
            let row = TimeRow {
                features: t.features(*line, rec)?,
                preset: t.parse(*line, rec, "preset")?,
                target_bitrate_kbps: t.parse(*line, rec, "target_bitrate_kbps")?,
                transcode_time_s: t.parse(*line, rec, "transcode_time_s")?,
            };
            if row.target_bitrate_kbps == 0 {
                return Err(schema(&t.path, *line, "target_bitrate_kbps", "must be positive"));
            }
            if !(row.transcode_time_s > 0.0 && row.transcode_time_s.is_finite()) {
                return Err(schema(&t.path, *line, "transcode_time_s", "must be positive"));
            }
            Ok(row)
        })
        .collect()
}

/// Reads an R-D table: one row per (segment, preset) with a `psnr_at_<kbps>`
/// column per bitrate, in strictly increasing bitrate order.
pub fn load_rd_table(path: impl AsRef<Path>) -> Result<Vec<RDRecord>> {
    let t = read_table(path.as_ref())?;
    let mut required = feature_columns();
    required.push("preset");
    t.expect_columns(&required, |h| h.starts_with(PSNR_PREFIX))?;
    let mut psnr_cols: Vec<(String, u32)> = Vec::new();
    for h in t.headers.iter().filter(|h| h.starts_with(PSNR_PREFIX)) {
        let rate: u32 = h[PSNR_PREFIX.len()..]
            .parse()
            .map_err(|_| schema(&t.path, 1, h, "bitrate suffix is not an integer"))?;
        if psnr_cols.last().is_some_and(|(_, prev)| rate <= *prev) {
            return Err(schema(&t.path, 1, h, "bitrate columns must be strictly increasing"));
        }
        psnr_cols.push((h.clone(), rate));
    }
    if psnr_cols.len() < 2 {
        return Err(schema(&t.path, 1, PSNR_PREFIX, "at least two psnr_at_<kbps> columns are required"));
    }
    let bitrates: Vec<u32> = psnr_cols.iter().map(|(_, r)| *r).collect();
    t.rows
        .iter()
        .map(|(line, rec)| {
            let features = t.features(*line, rec)?;
            let preset: Preset = t.parse(*line, rec, "preset")?;
            let psnr = psnr_cols
                .iter()
                .map(|(c, _)| t.parse::<f64>(*line, rec, c))
                .collect::<Result<Vec<_>>>()?;
            let curve = RDCurve::new(bitrates.clone(), psnr).map_err(|e| schema(&t.path, *line, PSNR_PREFIX, e.to_string()))?;
            Ok(RDRecord { features, preset, curve })
        })
        .collect()
}

/// Reads a table of segment features: `segment_id`, `duration_s` and the 25 feature columns.
pub fn load_features_table(path: impl AsRef<Path>) -> Result<Vec<SegmentFeatures>> {
    let t = read_table(path.as_ref())?;
    t.expect_columns(&feature_columns(), |_| false)?;
    t.rows.iter().map(|(line, rec)| t.features(*line, rec)).collect()
}

/// Reads a two-column `bitrate_kbps,psnr_db` curve.
pub fn load_curve_table(path: impl AsRef<Path>) -> Result<RDCurve> {
    let t = read_table(path.as_ref())?;
    t.expect_columns(&["bitrate_kbps", "psnr_db"], |_| false)?;
    let mut rates = Vec::new();
    let mut psnr = Vec::new();
    for (line, rec) in &t.rows {
        rates.push(t.parse::<u32>(*line, rec, "bitrate_kbps")?);
        psnr.push(t.parse::<f64>(*line, rec, "psnr_db")?);
    }
    RDCurve::new(rates, psnr).map_err(|e| schema(&t.path, 0, "bitrate_kbps", e.to_string()))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn feature_fields(f: &SegmentFeatures) -> Vec<String> {
    let mut out = vec![f.segment_id.clone(), f.duration_s.to_string()];
    out.extend(f.values().iter().map(f64::to_string));
    out
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_time_table(path: impl AsRef<Path>, rows: &[TimeRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = feature_columns();
    header.extend(["preset", "target_bitrate_kbps", "transcode_time_s"]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = feature_fields(&r.features);
        rec.push(r.preset.to_string());
        rec.push(r.target_bitrate_kbps.to_string());
        rec.push(r.transcode_time_s.to_string());
        w.write_record(&rec)?;
    }
    finish(w, path)
}

/// All records must share one bitrate list.
pub fn write_rd_table(path: impl AsRef<Path>, records: &[RDRecord]) -> Result<()> {
    let path = path.as_ref();
    let bitrates = records
        .first()
        .map(|r| r.curve.bitrates_kbps().to_vec())
        .ok_or_else(|| Error::invalid("no R-D records to write"))?;
    if records.iter().any(|r| r.curve.bitrates_kbps() != bitrates.as_slice()) {
        return Err(Error::invalid("R-D records use different bitrate lists"));
    }
    let mut w = writer(path)?;
    let mut header: Vec<String> = feature_columns().iter().map(|s| s.to_string()).collect();
    header.push("preset".into());
    header.extend(bitrates.iter().map(|b| format!("{PSNR_PREFIX}{b}")));
    w.write_record(&header)?;
    for r in records {
        let mut rec = feature_fields(&r.features);
        rec.push(r.preset.to_string());
        rec.extend(r.curve.psnr_db().iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    finish(w, path)
}

pub fn write_features_table(path: impl AsRef<Path>, features: &[SegmentFeatures]) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(feature_columns())?;
    for f in features {
        w.write_record(feature_fields(f))?;
    }
    finish(w, path)
}

pub fn write_curve_table(path: impl AsRef<Path>, curve: &RDCurve) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["bitrate_kbps", "psnr_db"])?;
    for (b, p) in curve.bitrates_kbps().iter().zip(curve.psnr_db()) {
        w.write_record([b.to_string(), p.to_string()])?;
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::OperatingGrid;
    use crate::synth::{gen_corpus, SynthParams};
    use std::io::Write;

    fn corpus() -> crate::synth::SyntheticCorpus {
        gen_corpus(&SynthParams::new(2, 3), &OperatingGrid::standard()).unwrap()
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let c = corpus();
        let tp = dir.path().join("time.csv");
        write_time_table(&tp, &c.time_rows).unwrap();
        assert_eq!(load_time_table(&tp).unwrap(), c.time_rows);
        let rp = dir.path().join("rd.csv");
        write_rd_table(&rp, &c.rd_records).unwrap();
        assert_eq!(load_rd_table(&rp).unwrap(), c.rd_records);
        assert_eq!(load_rd_table(&rp).unwrap().len(), 15);
        let fp = dir.path().join("f.csv");
        write_features_table(&fp, &c.features()).unwrap();
        assert_eq!(load_features_table(&fp).unwrap(), c.features());
        let cp = dir.path().join("curve.csv");
        write_curve_table(&cp, &c.rd_records[0].curve).unwrap();
        assert_eq!(load_curve_table(&cp).unwrap(), c.rd_records[0].curve);
    }

    fn rewrite(path: &Path, f: impl Fn(String) -> String) {
        let s = std::fs::read_to_string(path).unwrap();
        std::fs::File::create(path).unwrap().write_all(f(s).as_bytes()).unwrap();
    }

    /// Replaces cell `col` of file line `line` (0-based, header is line 0).
    fn set_cell(path: &Path, line: usize, col: usize, value: &str) {
        rewrite(path, |s| {
            let mut lines: Vec<String> = s.lines().map(str::to_string).collect();
            let mut cells: Vec<String> = lines[line].split(',').map(str::to_string).collect();
            cells[col] = value.to_string();
            lines[line] = cells.join(",");
            lines.join("\n") + "\n"
        });
    }

    fn schema_of(e: Error) -> (usize, String) {
        match e {
            Error::Schema { line, column, .. } => (line, column),
            other => panic!("expected a schema error, got {other}"),
        }
    }

    #[test]
    fn three_rows_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("time.csv");
        let c = corpus();
        write_time_table(&p, &c.time_rows[..3]).unwrap();
        assert_eq!(load_time_table(&p).unwrap().len(), 3);

        // Negative time on the third data row (file line 4).
        set_cell(&p, 3, 29, "-0.5");
        assert_eq!(schema_of(load_time_table(&p).unwrap_err()), (4, "transcode_time_s".into()));
    }

    #[test]
    fn strict_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("time.csv");
        let c = corpus();
        write_time_table(&p, &c.time_rows[..2]).unwrap();
        rewrite(&p, |s| s.replacen("mv_mean", "mv_avg", 1));
        assert_eq!(schema_of(load_time_table(&p).unwrap_err()), (1, "mv_avg".into()));

        let r = dir.path().join("rd.csv");
        write_rd_table(&r, &c.rd_records[..1]).unwrap();
        rewrite(&r, |s| s.replacen("psnr_at_400", "psnr_at_150", 1));
        assert_eq!(schema_of(load_rd_table(&r).unwrap_err()), (1, "psnr_at_150".into()));

        write_rd_table(&r, &c.rd_records[..1]).unwrap();
        set_cell(&r, 1, 25, "");
        let (line, column) = schema_of(load_rd_table(&r).unwrap_err());
        assert_eq!((line, column.as_str()), (2, "width"));
        assert!(load_time_table(dir.path().join("nope.csv")).is_err());
    }
}
