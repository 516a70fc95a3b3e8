//! Samples, datasets and the resampling protocol (hold-out split, k-fold
//! cross-validation, bootstrap).
//!
//! All resampling is a pure function of the input and an explicit seed; the
//! outputs are copies of input rows, never new or altered samples.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("test split of {fraction} over {n} samples is empty")]
    EmptyTestSplit { fraction: f64, n: usize },
    #[error("training split of {fraction} over {n} samples is empty")]
    EmptyTrainSplit { fraction: f64, n: usize },
    #[error("fraction {0} outside its valid range")]
    InvalidFraction(f64),
    #[error("invalid fold count k={k} for {n} samples")]
    InvalidK { k: usize, n: usize },
    #[error("invalid sample {index}: {reason}")]
    InvalidSample { index: usize, reason: String },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Optimization goal of the implementation run: raw throughput or
/// throughput per LUT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Goal {
    #[serde(rename = "TP")]
    Tp,
    #[serde(rename = "TPA")]
    Tpa,
}

impl Goal {
    pub const ALL: [Goal; 2] = [Goal::Tp, Goal::Tpa];

    pub fn name(self) -> &'static str {
        match self {
            Goal::Tp => "TP",
            Goal::Tpa => "TPA",
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Goal {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TP" => Ok(Goal::Tp),
            "TPA" => Ok(Goal::Tpa),
            _ => Err(format!("unknown goal `{s}` (expected TP or TPA)")),
        }
    }
}

/// One of the five regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Lut,
    Ff,
    Dsp,
    Bram,
    Fmax,
}

impl Target {
    pub const ALL: [Target; 5] = [Target::Lut, Target::Ff, Target::Dsp, Target::Bram, Target::Fmax];

    pub fn name(self) -> &'static str {
        match self {
            Target::Lut => "lut",
            Target::Ff => "ff",
            Target::Dsp => "dsp",
            Target::Bram => "bram",
            Target::Fmax => "fmax",
        }
    }

    pub fn is_resource(self) -> bool {
        self != Target::Fmax
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown target `{s}`"))
    }
}

/// Benchmark application domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "ML")]
    Ml,
    #[serde(rename = "image/video")]
    ImageVideo,
    #[serde(rename = "cryptography")]
    Crypto,
    #[serde(rename = "mathematical")]
    Math,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Ml, Category::ImageVideo, Category::Crypto, Category::Math];

    pub fn name(self) -> &'static str {
        match self {
            Category::Ml => "ML",
            Category::ImageVideo => "image/video",
            Category::Crypto => "cryptography",
            Category::Math => "mathematical",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// Post-implementation results (MHz for `fmax`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub lut: f64,
    pub ff: f64,
    pub dsp: f64,
    pub bram: f64,
    pub fmax: f64,
}

impl Targets {
    pub fn get(&self, t: Target) -> f64 {
        match t {
            Target::Lut => self.lut,
            Target::Ff => self.ff,
            Target::Dsp => self.dsp,
            Target::Bram => self.bram,
            Target::Fmax => self.fmax,
        }
    }

    pub fn set(&mut self, t: Target, v: f64) {
        match t {
            Target::Lut => self.lut = v,
            Target::Ff => self.ff = v,
            Target::Dsp => self.dsp = v,
            Target::Bram => self.bram = v,
            Target::Fmax => self.fmax = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub targets: Targets,
    pub goal: Goal,
    pub device_id: String,
    pub requested_period: f64,
    /// Design name; empty when unknown.
    #[serde(default)]
    pub design: String,
    #[serde(default)]
    pub category: Option<Category>,
}

impl Sample {
    pub fn validate(&self) -> Result<(), String> {
        for t in Target::ALL {
            let v = self.targets.get(t);
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("target {t} = {v}"));
            }
        }
        if self.targets.fmax <= 0.0 {
            return Err(format!("fmax = {} must be positive", self.targets.fmax));
        }
        if !(self.requested_period.is_finite() && self.requested_period > 0.0) {
            return Err(format!("requested period {}", self.requested_period));
        }
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err("non-finite feature".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub split_seed: u64,
    pub feature_space_id: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, feature_space_id: impl Into<String>) -> Result<Self, DatasetError> {
        let ds = Self {
            samples,
            split_seed: 0,
            feature_space_id: feature_space_id.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let dim = self.samples.first().map_or(0, |s| s.features.len());
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(DatasetError::Inconsistent(format!(
                    "sample {i} has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            s.validate()
                .map_err(|reason| DatasetError::InvalidSample { index: i, reason })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature dimension (0 for an empty dataset).
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// Rows selected by `indices`, duplicates allowed.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            split_seed: self.split_seed,
            feature_space_id: self.feature_space_id.clone(),
        }
    }

    pub fn filter_goal(&self, goal: Goal) -> Dataset {
        Dataset {
            samples: self.samples.iter().filter(|s| s.goal == goal).cloned().collect(),
            split_seed: self.split_seed,
            feature_space_id: self.feature_space_id.clone(),
        }
    }

    pub fn features(&self) -> Array2<f64> {
        let (n, d) = (self.len(), self.dim());
        let mut x = Array2::zeros((n, d));
        for (mut row, s) in x.rows_mut().into_iter().zip(&self.samples) {
            row.assign(&ndarray::ArrayView1::from(&s.features[..]));
        }
        x
    }

    pub fn target(&self, t: Target) -> Array1<f64> {
        self.samples.iter().map(|s| s.targets.get(t)).collect()
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.features[j]).collect()
    }

    /// Hold-out split: `round(test_fraction * N)` rows go to the test set.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
        let (train, test) = split_indices(self.len(), test_fraction, seed)?;
        let mut a = self.subset(&train);
        let mut b = self.subset(&test);
        a.split_seed = seed;
        b.split_seed = seed;
        Ok((a, b))
    }

    /// `ceil(fraction * N)` rows drawn with replacement.
    pub fn bootstrap(&self, fraction: f64, seed: u64) -> Result<Dataset, DatasetError> {
        Ok(self.subset(&bootstrap_indices(self.len(), fraction, seed)?))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(w);
        let dim = self.dim();
        let mut header: Vec<String> = (0..dim).map(|j| format!("f_{j:03}")).collect();
        header.extend(
            ["lut", "ff", "dsp", "bram", "fmax", "goal", "device", "period_ns", "design", "category"]
                .map(String::from),
        );
        wtr.write_record(&header)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
            for t in Target::ALL {
                rec.push(s.targets.get(t).to_string());
            }
            rec.push(s.goal.name().to_string());
            rec.push(s.device_id.clone());
            rec.push(s.requested_period.to_string());
            rec.push(s.design.clone());
            rec.push(s.category.map(|c| c.name().to_string()).unwrap_or_default());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads the dataset CSV. The trailing `design` and `category` columns
    /// are optional.
    pub fn read_csv<R: Read>(r: R, feature_space_id: impl Into<String>) -> Result<Self, DatasetError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let dim = header.iter().take_while(|h| h.starts_with("f_")).count();
        for (j, h) in header.iter().take(dim).enumerate() {
            if h != format!("f_{j:03}") {
                return Err(DatasetError::Inconsistent(format!("feature column {j} is named `{h}`")));
            }
        }
        let rest: Vec<&str> = header.iter().skip(dim).collect();
        let fixed = ["lut", "ff", "dsp", "bram", "fmax", "goal", "device", "period_ns"];
        if rest.len() < fixed.len() || rest[..fixed.len()] != fixed {
            return Err(DatasetError::Inconsistent(format!(
                "expected columns {} after the features",
                fixed.join(",")
            )));
        }
        let design_col = rest.iter().position(|h| *h == "design").map(|p| p + dim);
        let category_col = rest.iter().position(|h| *h == "category").map(|p| p + dim);

        let mut samples = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |reason: String| DatasetError::InvalidSample { index: i, reason };
            let num = |j: usize| -> Result<f64, DatasetError> {
                rec[j].trim().parse::<f64>().map_err(|_| bad(format!("column {j}: `{}`", &rec[j])))
            };
            let features = (0..dim).map(num).collect::<Result<Vec<_>, _>>()?;
            let mut targets = Targets {
                lut: 0.0,
                ff: 0.0,
                dsp: 0.0,
                bram: 0.0,
                fmax: 0.0,
            };
            for (k, t) in Target::ALL.into_iter().enumerate() {
                targets.set(t, num(dim + k)?);
            }
            let goal = rec[dim + 5].parse().map_err(bad)?;
            let category = match category_col.map(|j| rec[j].trim()) {
                None | Some("") => None,
                Some(c) => Some(c.parse().map_err(bad)?),
            };
            samples.push(Sample {
                features,
                targets,
                goal,
                device_id: rec[dim + 6].to_string(),
                requested_period: num(dim + 7)?,
                design: design_col.map(|j| rec[j].to_string()).unwrap_or_default(),
                category,
            });
        }
        Dataset::new(samples, feature_space_id)
    }
}

/// Index form of [`Dataset::split`]: `(train, test)`, each ascending.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    if n == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 {
        return Err(DatasetError::EmptyTestSplit { fraction: test_fraction, n });
    }
    if n_test >= n {
        return Err(DatasetError::EmptyTrainSplit { fraction: test_fraction, n });
    }
    let perm = SeededRng::new(seed).permutation(n);
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// One cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Shuffled k-fold partition of `0..n`; fold sizes differ by at most one.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>, DatasetError> {
    if k < 2 || n < k {
        return Err(DatasetError::InvalidK { k, n });
    }
    let perm = SeededRng::new(seed).permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut assignment = vec![0usize; n];
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &perm[start..start + size] {
            assignment[i] = f;
        }
        start += size;
    }
    Ok((0..k)
        .map(|f| Fold {
            train: (0..n).filter(|&i| assignment[i] != f).collect(),
            validation: (0..n).filter(|&i| assignment[i] == f).collect(),
        })
        .collect())
}

/// Index form of [`Dataset::bootstrap`].
pub fn bootstrap_indices(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>, DatasetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    if n == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    // Guard against 0.2 * 100 landing a hair above 20.
    let m = ((fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut rng = SeededRng::new(seed);
    Ok((0..m).map(|_| rng.below(n)).collect())
}
