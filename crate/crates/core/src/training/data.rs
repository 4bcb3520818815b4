use std::io::Read;
use std::ops::Range;
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FrednError, Result};

/// A multivariate series, `rows x channels`, read from a CSV whose first
/// column is a timestamp kept verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<String>,
    pub timestamps: Option<Vec<String>>,
    pub values: Array2<f64>,
}

impl Dataset {
    pub fn from_values(name: impl Into<String>, values: Array2<f64>) -> Self {
        let columns = (0..values.ncols()).map(|c| format!("ch{c}")).collect();
        Dataset {
            name: name.into(),
            columns,
            timestamps: None,
            values,
        }
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file =
            std::fs::File::open(path).map_err(|e| FrednError::Data(format!("cannot open {}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".into());
        Self::from_csv_reader(file, name)
    }

    /// Parses `timestamp,ch0,ch1,...` with a header row. Errors carry the
    /// 1-based line number of the offending record.
    pub fn from_csv_reader<R: Read>(reader: R, name: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(FrednError::Parse {
                line: 1,
                message: "expected a timestamp column followed by at least one numeric column".into(),
            });
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let width = columns.len();
        let mut timestamps = Vec::new();
        let mut flat = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                FrednError::Parse {
                    line,
                    message: e.to_string(),
                }
            })?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != width + 1 {
                return Err(FrednError::Parse {
                    line,
                    message: format!("expected {} fields, found {}", width + 1, record.len()),
                });
            }
            timestamps.push(record[0].to_string());
            for (j, cell) in record.iter().skip(1).enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| FrednError::Parse {
                    line,
                    message: format!("column '{}': cannot parse '{cell}' as a number", columns[j]),
                })?;
                if !v.is_finite() {
                    return Err(FrednError::Parse {
                        line,
                        message: format!("column '{}': non-finite value '{cell}'", columns[j]),
                    });
                }
                flat.push(v);
            }
        }
        if timestamps.is_empty() {
            return Err(FrednError::Data("CSV has a header but no data rows".into()));
        }
        let values = Array2::from_shape_vec((timestamps.len(), width), flat).expect("rectangular records");
        Ok(Dataset {
            name: name.into(),
            columns,
            timestamps: Some(timestamps),
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    /// Keeps the first `rows` rows.
    pub fn truncate(&mut self, rows: usize) {
        if rows < self.rows() {
            self.values = self.values.slice(s![..rows, ..]).to_owned();
            if let Some(ts) = &mut self.timestamps {
                ts.truncate(rows);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const ETT: SplitRatios = SplitRatios {
        train: 0.6,
        val: 0.2,
        test: 0.2,
    };
    pub const DEFAULT: SplitRatios = SplitRatios {
        train: 0.7,
        val: 0.1,
        test: 0.2,
    };

    pub fn for_family(ett: bool) -> Self {
        if ett {
            Self::ETT
        } else {
            Self::DEFAULT
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Contiguous train/val/test row ranges in time order. Train and test sizes
/// are `floor(rows * ratio)`; validation takes the remainder.
pub fn chronological_split(rows: usize, ratios: SplitRatios) -> Result<SplitRanges> {
    let sum = ratios.train + ratios.val + ratios.test;
    if (sum - 1.0).abs() > 1e-9 || ratios.train <= 0.0 || ratios.val < 0.0 || ratios.test < 0.0 {
        return Err(FrednError::config(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let n_train = (rows as f64 * ratios.train + 1e-9).floor() as usize;
    let n_test = (rows as f64 * ratios.test + 1e-9).floor() as usize;
    let n_val = rows - n_train - n_test;
    Ok(SplitRanges {
        train: 0..n_train,
        val: n_train..n_train + n_val,
        test: n_train + n_val..rows,
    })
}

/// Per-column z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics of `values`; zero spread maps to 1.
    pub fn fit(values: ArrayView2<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(FrednError::EmptyInput);
        }
        let mean = values.mean_axis(Axis(0)).expect("non-empty");
        let std = values.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        Ok(Standardizer {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    pub fn identity(channels: usize) -> Self {
        Standardizer {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn transform(&self, values: ArrayView2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        (&values - &mean) / &std
    }

    pub fn inverse(&self, values: ArrayView2<f64>) -> Array2<f64> {
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        &values * &std + &mean
    }
}

/// Stride-1 sliding windows over a `rows x channels` block: window `i` has
/// input rows `i..i+L` and target rows `i+L..i+L+tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    series: Array2<f64>,
    pub lookback: usize,
    pub horizon: usize,
}

pub fn make_windows(series: ArrayView2<f64>, lookback: usize, horizon: usize) -> Result<WindowSet> {
    if lookback == 0 || horizon == 0 {
        return Err(FrednError::config("lookback and horizon must be positive"));
    }
    if series.nrows() < lookback + horizon {
        return Err(FrednError::Data(format!(
            "split of {} rows is shorter than lookback {lookback} + horizon {horizon}",
            series.nrows()
        )));
    }
    Ok(WindowSet {
        series: series.to_owned(),
        lookback,
        horizon,
    })
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.series.nrows() - self.lookback - self.horizon + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.series.ncols()
    }

    /// Window `i` as `(channels x L, channels x tau)`.
    pub fn get(&self, i: usize) -> (Array2<f64>, Array2<f64>) {
        let x = self.series.slice(s![i..i + self.lookback, ..]).t().to_owned();
        let y = self
            .series
            .slice(s![i + self.lookback..i + self.lookback + self.horizon, ..])
            .t()
            .to_owned();
        (x, y)
    }

    /// Stacks the given windows into `batch x channels x L` and
    /// `batch x channels x tau`.
    pub fn batch(&self, indices: &[usize]) -> (Array3<f64>, Array3<f64>) {
        let c = self.channels();
        let mut x = Array3::zeros((indices.len(), c, self.lookback));
        let mut y = Array3::zeros((indices.len(), c, self.horizon));
        for (b, &i) in indices.iter().enumerate() {
            x.index_axis_mut(Axis(0), b)
                .assign(&self.series.slice(s![i..i + self.lookback, ..]).t());
            y.index_axis_mut(Axis(0), b).assign(
                &self
                    .series
                    .slice(s![i + self.lookback..i + self.lookback + self.horizon, ..])
                    .t(),
            );
        }
        (x, y)
    }
}

/// Windows for all three splits. Validation and test windows borrow the
/// `lookback` rows preceding their split as input context, so every target
/// row lies inside its own split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub ranges: SplitRanges,
    pub standardizer: Standardizer,
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
}

pub fn prepare(
    dataset: &Dataset,
    ratios: SplitRatios,
    lookback: usize,
    horizon: usize,
    standardize: bool,
) -> Result<PreparedData> {
    let ranges = chronological_split(dataset.rows(), ratios)?;
    let train_rows = dataset.values.slice(s![ranges.train.clone(), ..]);
    let standardizer = if standardize {
        Standardizer::fit(train_rows)?
    } else {
        Standardizer::identity(dataset.channels())
    };
    let scaled = standardizer.transform(dataset.values.view());
    let with_context = |r: &Range<usize>| r.start.saturating_sub(lookback)..r.end;
    let split = |name: &str, r: Range<usize>| {
        make_windows(scaled.slice(s![r, ..]), lookback, horizon)
            .map_err(|e| FrednError::Data(format!("{name} split: {e}")))
    };
    Ok(PreparedData {
        train: split("train", ranges.train.clone())?,
        val: split("validation", with_context(&ranges.val))?,
        test: split("test", with_context(&ranges.test))?,
        ranges,
        standardizer,
    })
}
