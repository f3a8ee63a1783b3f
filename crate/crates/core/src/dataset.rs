//! Multi-rate log assembly: resampling onto the EIT frame clock, column
//! alignment, train/test partitioning and z-scoring with training statistics.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled multichannel signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub rate_hz: f64,
    pub t0_s: f64,
    /// samples x dims
    pub values: Array2<f64>,
    pub dim_names: Vec<String>,
}

impl TimeSeries {
    pub fn new(rate_hz: f64, t0_s: f64, values: Array2<f64>, dim_names: Vec<String>) -> Result<Self> {
        if !(rate_hz > 0.0) {
            return Err(Error::Config(format!("sample rate {rate_hz}")));
        }
        if values.ncols() != dim_names.len() {
            return Err(Error::Shape(format!(
                "{} columns but {} names",
                values.ncols(),
                dim_names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series value".into()));
        }
        Ok(Self {
            rate_hz,
            t0_s,
            values,
            dim_names,
        })
    }

    /// Single-column series.
    pub fn from_column(rate_hz: f64, t0_s: f64, name: &str, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let values = Array2::from_shape_vec((n, 1), values).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(rate_hz, t0_s, values, vec![name.to_string()])
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }
}

/// Linear interpolation onto a `dst_hz` grid starting at the source `t0_s`.
/// Grid points past the last source sample take the last value.
pub fn resample(s: &TimeSeries, dst_hz: f64) -> Result<TimeSeries> {
    if s.is_empty() {
        return Err(Error::Shape("cannot resample an empty series".into()));
    }
    if !(dst_hz > 0.0) {
        return Err(Error::Config(format!("destination rate {dst_hz}")));
    }
    let n_src = s.len();
    let n_dst = (n_src as f64 * dst_hz / s.rate_hz + 1e-9).floor() as usize;
    let step = s.rate_hz / dst_hz;
    let mut out = Array2::zeros((n_dst, s.values.ncols()));
    for (k, mut row) in out.outer_iter_mut().enumerate() {
        let x = k as f64 * step;
        let i = x.floor() as usize;
        if i + 1 >= n_src {
            row.assign(&s.values.row(n_src - 1));
            continue;
        }
        let frac = x - i as f64;
        let (a, b) = (s.values.row(i), s.values.row(i + 1));
        row.zip_mut_with(&a, |r, &av| *r = av);
        if frac > 0.0 {
            row.zip_mut_with(&b, |r, &bv| *r += frac * (bv - *r));
        }
    }
    TimeSeries::new(dst_hz, s.t0_s, out, s.dim_names.clone())
}

/// Column-concatenated block of several equally clocked series.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub values: Array2<f64>,
    pub names: Vec<String>,
    pub rate_hz: f64,
    pub t0_s: f64,
}

/// Truncates to the shortest series and concatenates columns in the given order.
pub fn align(series: &[TimeSeries]) -> Result<Aligned> {
    let first = series
        .first()
        .ok_or_else(|| Error::Shape("nothing to align".into()))?;
    for s in &series[1..] {
        if (s.rate_hz - first.rate_hz).abs() > 1e-12 * first.rate_hz {
            return Err(Error::Shape(format!(
                "rate mismatch: {} Hz vs {} Hz",
                s.rate_hz, first.rate_hz
            )));
        }
        if (s.t0_s - first.t0_s).abs() > 1e-12 {
            return Err(Error::Shape("start time mismatch".into()));
        }
    }
    let t = series.iter().map(TimeSeries::len).min().unwrap_or(0);
    let views: Vec<_> = series.iter().map(|s| s.values.slice(s![..t, ..])).collect();
    let values = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Shape(e.to_string()))?;
    let names = series.iter().flat_map(|s| s.dim_names.iter().cloned()).collect();
    Ok(Aligned {
        values,
        names,
        rate_hz: first.rate_hz,
        t0_s: first.t0_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub std: f64,
}

impl ColumnStats {
    pub fn of(column: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = column.into_iter().collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Final `ratio * T` contiguous rows form the test split.
    ChronologicalTail,
    /// Test split is a tail of complete actuation cycles; `cycle_starts` are
    /// the row indices where each cycle begins.
    WholeCycles { cycle_starts: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// Aligned, z-scored features and targets with a train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub time_s: Vec<f64>,
    /// Normalised features, `T x F`.
    pub features: Array2<f64>,
    /// Normalised targets, `T x D`.
    pub targets: Array2<f64>,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub feature_stats: Vec<ColumnStats>,
    pub target_stats: Vec<ColumnStats>,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Constant training columns removed before normalisation.
    pub dropped_features: Vec<String>,
}

pub const MIN_ROWS: usize = 10;

/// Partitions rows and z-scores every column with training-split statistics.
pub fn split_and_normalize(
    features: &Aligned,
    targets: &Aligned,
    ratio: f64,
    mode: &SplitMode,
) -> Result<SequenceDataset> {
    let t = features.values.nrows().min(targets.values.nrows());
    if t < MIN_ROWS {
        return Err(Error::Shape(format!("{t} rows, need at least {MIN_ROWS}")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("test ratio {ratio}")));
    }
    let cut = match mode {
        SplitMode::ChronologicalTail => t - (ratio * t as f64).round() as usize,
        SplitMode::WholeCycles { cycle_starts } => {
            let ideal = t as f64 * (1.0 - ratio);
            cycle_starts
                .iter()
                .copied()
                .filter(|&c| c > 0 && c < t)
                .min_by(|&a, &b| (a as f64 - ideal).abs().total_cmp(&(b as f64 - ideal).abs()))
                .ok_or_else(|| Error::Config("no usable cycle boundary".into()))?
        }
    };
    if cut < 2 || cut >= t {
        return Err(Error::Shape("degenerate split".into()));
    }
    let train_rows: Vec<usize> = (0..cut).collect();
    let test_rows: Vec<usize> = (cut..t).collect();

    let fx = features.values.slice(s![..t, ..]);
    let ty = targets.values.slice(s![..t, ..]);

    let mut keep = Vec::new();
    let mut dropped_features = Vec::new();
    let mut feature_stats = Vec::new();
    for (j, name) in features.names.iter().enumerate() {
        let st = ColumnStats::of(fx.slice(s![..cut, j]).iter().copied());
        if st.std > 0.0 && st.std.is_finite() {
            keep.push(j);
            feature_stats.push(st);
        } else {
            log::warn!("dropping constant feature column {name}");
            dropped_features.push(name.clone());
        }
    }
    if keep.is_empty() {
        return Err(Error::Shape("every feature column is constant".into()));
    }
    let target_stats: Vec<ColumnStats> = (0..ty.ncols())
        .map(|j| ColumnStats::of(ty.slice(s![..cut, j]).iter().copied()))
        .collect();
    if let Some(j) = target_stats.iter().position(|st| !(st.std > 0.0)) {
        return Err(Error::Shape(format!(
            "target column {} is constant on the training split",
            targets.names[j]
        )));
    }

    let mut fnorm = Array2::zeros((t, keep.len()));
    for (k, (&j, st)) in keep.iter().zip(&feature_stats).enumerate() {
        fnorm
            .column_mut(k)
            .zip_mut_with(&fx.column(j), |o, &x| *o = st.normalize(x));
    }
    let mut tnorm = Array2::zeros((t, ty.ncols()));
    for (j, st) in target_stats.iter().enumerate() {
        tnorm
            .column_mut(j)
            .zip_mut_with(&ty.column(j), |o, &x| *o = st.normalize(x));
    }
    let time_s = (0..t)
        .map(|k| features.t0_s + k as f64 / features.rate_hz)
        .collect();
    Ok(SequenceDataset {
        time_s,
        features: fnorm,
        targets: tnorm,
        feature_names: keep.iter().map(|&j| features.names[j].clone()).collect(),
        target_names: targets.names.clone(),
        feature_stats,
        target_stats,
        train_rows,
        test_rows,
        dropped_features,
    })
}

impl SequenceDataset {
    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    pub fn rows(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train_rows,
            Split::Test => &self.test_rows,
        }
    }

    /// Maximal runs of consecutive rows within a split, as `(start, len)`.
    pub fn segments(&self, split: Split) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &r in self.rows(split) {
            match out.last_mut() {
                Some((start, len)) if *start + *len == r => *len += 1,
                _ => out.push((r, 1)),
            }
        }
        out
    }

    /// Targets in physical units.
    pub fn raw_targets(&self) -> Array2<f64> {
        self.denormalize_targets(&self.targets)
    }

    pub fn raw_features(&self) -> Array2<f64> {
        let mut out = self.features.clone();
        for (mut col, st) in out.columns_mut().into_iter().zip(&self.feature_stats) {
            col.mapv_inplace(|z| st.denormalize(z));
        }
        out
    }

    pub fn denormalize_targets(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut out = z.clone();
        for (mut col, st) in out.columns_mut().into_iter().zip(&self.target_stats) {
            col.mapv_inplace(|v| st.denormalize(v));
        }
        out
    }

    pub fn normalize_targets(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut out = y.clone();
        for (mut col, st) in out.columns_mut().into_iter().zip(&self.target_stats) {
            col.mapv_inplace(|v| st.normalize(v));
        }
        out
    }

    pub fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
        m.select(Axis(0), rows)
    }

    /// Writes `features.csv`, `targets.csv` (physical units), `norm_stats.csv`
    /// and `split.csv` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_matrix(&dir.join("features.csv"), &self.time_s, &self.feature_names, &self.raw_features())?;
        write_matrix(&dir.join("targets.csv"), &self.time_s, &self.target_names, &self.raw_targets())?;

        let path = dir.join("norm_stats.csv");
        let mut w = csv_writer(&path)?;
        let mut rows = vec![vec!["column".into(), "role".into(), "mean".into(), "std".into()]];
        for (n, st) in self.feature_names.iter().zip(&self.feature_stats) {
            rows.push(vec![n.clone(), "feature".into(), st.mean.to_string(), st.std.to_string()]);
        }
        for (n, st) in self.target_names.iter().zip(&self.target_stats) {
            rows.push(vec![n.clone(), "target".into(), st.mean.to_string(), st.std.to_string()]);
        }
        for r in rows {
            w.write_record(&r).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("split.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["row", "split"]).map_err(|e| csv_err(&path, e))?;
        let mut labelled: Vec<(usize, &str)> = self
            .train_rows
            .iter()
            .map(|&r| (r, "train"))
            .chain(self.test_rows.iter().map(|&r| (r, "test")))
            .collect();
        labelled.sort_unstable();
        for (r, label) in labelled {
            w.write_record([r.to_string(), label.to_string()])
                .map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn read_bundle(dir: &Path) -> Result<Self> {
        let (time_s, feature_names, raw_f) = read_matrix(&dir.join("features.csv"))?;
        let (_, target_names, raw_t) = read_matrix(&dir.join("targets.csv"))?;

        let path = dir.join("norm_stats.csv");
        let mut feature_stats = Vec::new();
        let mut target_stats = Vec::new();
        for (i, rec) in csv_reader(&path)?.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(&path, e))?;
            let num = |k: usize| parse_f64(rec.get(k).unwrap_or(""), i + 2);
            let st = ColumnStats { mean: num(2)?, std: num(3)? };
            match rec.get(1) {
                Some("feature") => feature_stats.push(st),
                Some("target") => target_stats.push(st),
                other => return Err(Error::Parse { line: i + 2, msg: format!("role {other:?}") }),
            }
        }
        if feature_stats.len() != feature_names.len() || target_stats.len() != target_names.len() {
            return Err(Error::Shape("norm_stats.csv does not match column headers".into()));
        }

        let path = dir.join("split.csv");
        let mut train_rows = Vec::new();
        let mut test_rows = Vec::new();
        for (i, rec) in csv_reader(&path)?.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(&path, e))?;
            let row: usize = rec
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|e| Error::Parse { line: i + 2, msg: format!("{e}") })?;
            match rec.get(1) {
                Some("train") => train_rows.push(row),
                Some("test") => test_rows.push(row),
                other => return Err(Error::Parse { line: i + 2, msg: format!("split {other:?}") }),
            }
        }

        let mut features = raw_f;
        for (mut col, st) in features.columns_mut().into_iter().zip(&feature_stats) {
            col.mapv_inplace(|v| st.normalize(v));
        }
        let mut targets = raw_t;
        for (mut col, st) in targets.columns_mut().into_iter().zip(&target_stats) {
            col.mapv_inplace(|v| st.normalize(v));
        }
        Ok(Self {
            time_s,
            features,
            targets,
            feature_names,
            target_names,
            feature_stats,
            target_stats,
            train_rows,
            test_rows,
            dropped_features: Vec::new(),
        })
    }
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::Reader::from_path(path).map_err(|e| csv_err(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line: 0,
            msg: format!("{}: {other:?}", path.display()),
        },
    }
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        msg: format!("{s:?}: {e}"),
    })
}

/// `t_s,<names...>` with one row per sample.
pub fn write_matrix(path: &Path, time_s: &[f64], names: &[String], m: &Array2<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t_s".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (t, row) in time_s.iter().zip(m.outer_iter()) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<(Vec<f64>, Vec<String>, Array2<f64>)> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut time = Vec::new();
    let mut flat = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != names.len() + 1 {
            return Err(Error::Parse { line: i + 2, msg: "wrong field count".into() });
        }
        time.push(parse_f64(&rec[0], i + 2)?);
        for field in rec.iter().skip(1) {
            flat.push(parse_f64(field, i + 2)?);
        }
    }
    let m = Array2::from_shape_vec((time.len(), names.len()), flat)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok((time, names, m))
}

/// Column means of `m`, used by tests and reports.
pub fn column_means(m: &Array2<f64>) -> Array1<f64> {
    m.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(m.ncols()))
}
