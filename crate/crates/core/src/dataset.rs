//! Randomized-trial samples, CSV ingestion and dataset diagnostics.
//!
//! Treatment levels are dense and 0-based internally. Ingestion re-indexes
//! whatever numeric treatment values a file carries onto `0..L` in ascending
//! order and keeps the original values in a level map.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One randomized-trial observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RctSample {
    pub features: Vec<f64>,
    /// Dense treatment level in `0..n_levels`.
    pub treatment: usize,
    pub reward: f64,
    pub cost: f64,
}

/// A validated collection of randomized-trial samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RctDataset {
    samples: Vec<RctSample>,
    n_levels: usize,
    feature_dim: usize,
    counts: Vec<usize>,
    feature_names: Vec<String>,
    level_values: Vec<f64>,
}

impl RctDataset {
    /// Builds a dataset, checking every sample invariant.
    ///
    /// Empty treatment levels are allowed here; losses and metrics that need
    /// a level check for it themselves.
    pub fn new(samples: Vec<RctSample>, n_levels: usize, feature_dim: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 treatment levels, got {n_levels}"
            )));
        }
        if feature_dim == 0 {
            return Err(Error::InvalidDataset("feature dimension must be >= 1".into()));
        }
        let mut counts = vec![0usize; n_levels];
        for (row, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::InvalidDataset(format!(
                    "sample {row} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("sample {row} has a non-finite feature")));
            }
            if s.treatment >= n_levels {
                return Err(Error::InvalidDataset(format!(
                    "sample {row} has treatment {} outside 0..{n_levels}",
                    s.treatment
                )));
            }
            for (name, v) in [("reward", s.reward), ("cost", s.cost)] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDataset(format!(
                        "sample {row} has invalid {name} {v}"
                    )));
                }
            }
            counts[s.treatment] += 1;
        }
        Ok(Self {
            samples,
            n_levels,
            feature_dim,
            counts,
            feature_names: (0..feature_dim).map(|k| format!("f{k}")).collect(),
            level_values: (0..n_levels).map(|j| j as f64).collect(),
        })
    }

    pub fn samples(&self) -> &[RctSample] {
        &self.samples
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// `counts()[j]` is the number of samples assigned level `j`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Original treatment value for each dense level.
    pub fn level_values(&self) -> &[f64] {
        &self.level_values
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.feature_dim {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for dimension {}",
                names.len(),
                self.feature_dim
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn with_level_values(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.n_levels || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset(
                "level map must list one strictly increasing value per level".into(),
            ));
        }
        self.level_values = values;
        Ok(self)
    }

    /// Dataset restricted to `indices`, keeping level count and names.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let samples: Vec<RctSample> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let mut counts = vec![0usize; self.n_levels];
        for s in &samples {
            counts[s.treatment] += 1;
        }
        Self {
            samples,
            counts,
            n_levels: self.n_levels,
            feature_dim: self.feature_dim,
            feature_names: self.feature_names.clone(),
            level_values: self.level_values.clone(),
        }
    }

    /// Seeded random partition into `(train, test)` with `test_fraction` of the
    /// samples held out.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!(
                "test fraction must lie in [0, 1), got {test_fraction}"
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (self.len() as f64 * test_fraction).round() as usize;
        let (test, train) = order.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }

    /// Writes the dataset as CSV (`<features>,treatment,reward,cost`), with
    /// treatment written as its original level value. Floats use the
    /// shortest representation that parses back to the same bits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut header = self.feature_names.join(",");
        header.push_str(",treatment,reward,cost\n");
        w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
        let mut line = String::new();
        for s in &self.samples {
            line.clear();
            for v in &s.features {
                line.push_str(&format!("{v},"));
            }
            line.push_str(&format!(
                "{},{},{}\n",
                self.level_values[s.treatment], s.reward, s.cost
            ));
            w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Column layout of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub feature_columns: Vec<String>,
    pub treatment_column: String,
    pub reward_column: String,
    /// Absent means cost-unaware data: cost is zero everywhere.
    #[serde(default)]
    pub cost_column: Option<String>,
}

impl SchemaConfig {
    /// Layout written by [`RctDataset::write_csv`] for `d` features.
    pub fn standard(d: usize) -> Self {
        Self {
            feature_columns: (0..d).map(|k| format!("f{k}")).collect(),
            treatment_column: "treatment".into(),
            reward_column: "reward".into(),
            cost_column: Some("cost".into()),
        }
    }

    /// CRITEO-UPLIFT v2: twelve features, conversion as reward, visit as cost.
    pub fn criteo() -> Self {
        Self {
            feature_columns: (0..12).map(|k| format!("f{k}")).collect(),
            treatment_column: "treatment".into(),
            reward_column: "conversion".into(),
            cost_column: Some("visit".into()),
        }
    }

    fn columns(&self) -> impl Iterator<Item = &String> {
        self.feature_columns
            .iter()
            .chain([&self.treatment_column, &self.reward_column])
            .chain(self.cost_column.iter())
    }

    fn check(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(Error::Schema("at least one feature column is required".into()));
        }
        let mut seen = HashSet::new();
        for c in self.columns() {
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema(format!("column `{c}` named more than once")));
            }
        }
        Ok(())
    }
}

/// Reads a headered CSV into a dataset. Any invalid row aborts ingestion.
pub fn ingest_csv(path: &Path, schema: &SchemaConfig) -> Result<RctDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema)
}

/// [`ingest_csv`] over any reader.
pub fn ingest_reader<R: std::io::Read>(reader: R, schema: &SchemaConfig) -> Result<RctDataset> {
    schema.check()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| position(c))
        .collect::<Result<Vec<_>>>()?;
    let treat_idx = position(&schema.treatment_column)?;
    let reward_idx = position(&schema.reward_column)?;
    let cost_idx = schema.cost_column.as_deref().map(position).transpose()?;

    let mut raw: Vec<(Vec<f64>, f64, f64, f64)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // 1-based file line: header is line 1.
        let row = i + 2;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let text = rec.get(idx).ok_or_else(|| Error::Data {
                row,
                column: name.to_string(),
                message: "missing cell".into(),
            })?;
            let v: f64 = text.parse().map_err(|_| Error::Data {
                row,
                column: name.to_string(),
                message: format!("`{text}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    row,
                    column: name.to_string(),
                    message: format!("`{text}` is not finite"),
                });
            }
            Ok(v)
        };
        let features = feature_idx
            .iter()
            .zip(&schema.feature_columns)
            .map(|(&idx, name)| cell(idx, name))
            .collect::<Result<Vec<_>>>()?;
        let treatment = cell(treat_idx, &schema.treatment_column)?;
        let reward = cell(reward_idx, &schema.reward_column)?;
        let cost = match (cost_idx, &schema.cost_column) {
            (Some(idx), Some(name)) => cell(idx, name)?,
            _ => 0.0,
        };
        for (name, v) in [(&schema.reward_column, reward)]
            .into_iter()
            .chain(schema.cost_column.as_ref().map(|c| (c, cost)))
        {
            if v < 0.0 {
                return Err(Error::Data {
                    row,
                    column: name.clone(),
                    message: format!("negative value {v}"),
                });
            }
        }
        raw.push((features, treatment, reward, cost));
    }
    if raw.is_empty() {
        return Err(Error::Data {
            row: 1,
            column: schema.treatment_column.clone(),
            message: "file has no data rows".into(),
        });
    }

    let mut levels: Vec<f64> = raw.iter().map(|r| r.1).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let samples = raw
        .into_iter()
        .map(|(features, t, reward, cost)| RctSample {
            features,
            treatment: levels
                .binary_search_by(|v| v.total_cmp(&t))
                .expect("level collected above"),
            reward,
            cost,
        })
        .collect();
    let n_levels = levels.len();
    if n_levels < 2 {
        return Err(Error::InvalidDataset(format!(
            "treatment column `{}` has a single value; an RCT needs at least two arms",
            schema.treatment_column
        )));
    }
    RctDataset::new(samples, n_levels, schema.feature_columns.len())?
        .with_feature_names(schema.feature_columns.clone())?
        .with_level_values(levels)
}

/// Report produced by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub level_map: Vec<f64>,
    pub counts: Vec<usize>,
    /// `None` for empty levels.
    pub reward_means: Vec<Option<f64>>,
    pub cost_means: Vec<Option<f64>>,
    pub flags: BTreeMap<String, bool>,
}

pub const FLAG_NO_EMPTY_LEVEL: &str = "no_empty_treatment_group";
pub const FLAG_FEATURES_FINITE: &str = "features_finite";
pub const FLAG_OUTCOMES_NON_NEGATIVE: &str = "outcomes_non_negative";
pub const FLAG_COUNTS_CONSISTENT: &str = "counts_consistent";
pub const FLAG_COST_INCREASING: &str = "cost_mean_increasing_in_level";

impl Diagnostics {
    /// True when some treatment level has no samples.
    pub fn empty_treatment_group(&self) -> bool {
        !self.flags[FLAG_NO_EMPTY_LEVEL]
    }
}

/// Summarizes per-level counts and outcome means and checks each invariant.
pub fn validate_dataset(ds: &RctDataset) -> Diagnostics {
    let l = ds.n_levels();
    let mut reward_sum = vec![0.0; l];
    let mut cost_sum = vec![0.0; l];
    let mut counts = vec![0usize; l];
    let mut features_finite = true;
    let mut non_negative = true;
    for s in ds.samples() {
        counts[s.treatment] += 1;
        reward_sum[s.treatment] += s.reward;
        cost_sum[s.treatment] += s.cost;
        features_finite &= s.features.iter().all(|v| v.is_finite());
        non_negative &= s.reward >= 0.0 && s.cost >= 0.0;
    }
    let mean = |sum: &[f64]| -> Vec<Option<f64>> {
        sum.iter()
            .zip(&counts)
            .map(|(s, &n)| (n > 0).then(|| s / n as f64))
            .collect()
    };
    let reward_means = mean(&reward_sum);
    let cost_means = mean(&cost_sum);
    let cost_increasing = cost_means
        .windows(2)
        .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a < b));

    let mut flags = BTreeMap::new();
    flags.insert(FLAG_NO_EMPTY_LEVEL.to_string(), counts.iter().all(|&n| n > 0));
    flags.insert(FLAG_FEATURES_FINITE.to_string(), features_finite);
    flags.insert(FLAG_OUTCOMES_NON_NEGATIVE.to_string(), non_negative);
    flags.insert(
        FLAG_COUNTS_CONSISTENT.to_string(),
        counts == ds.counts() && counts.iter().sum::<usize>() == ds.total(),
    );
    flags.insert(FLAG_COST_INCREASING.to_string(), cost_increasing);

    Diagnostics {
        level_map: ds.level_values().to_vec(),
        counts,
        reward_means,
        cost_means,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(features: Vec<f64>, treatment: usize, reward: f64) -> RctSample {
        RctSample {
            features,
            treatment,
            reward,
            cost: 0.0,
        }
    }

    #[test]
    fn absent_cost_column_means_zero_cost() {
        let csv = "f0,f1,treatment,reward\n0.5,1.0,0,1\n-0.25,2.0,1,0\n";
        let schema = SchemaConfig {
            feature_columns: vec!["f0".into(), "f1".into()],
            treatment_column: "treatment".into(),
            reward_column: "reward".into(),
            cost_column: None,
        };
        let ds = ingest_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(ds.n_levels(), 2);
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.counts(), &[1, 1]);
        assert!(ds.samples().iter().all(|s| s.cost == 0.0));
    }

    #[test]
    fn criteo_layout() {
        let mut header: Vec<String> = (0..12).map(|k| format!("f{k}")).collect();
        header.extend(["treatment", "conversion", "visit", "exposure"].map(String::from));
        let mut text = header.join(",") + "\n";
        for (t, conv, visit) in [(1, 0, 1), (0, 0, 0), (1, 1, 1)] {
            let feats: Vec<String> = (0..12).map(|k| format!("{}.5", k)).collect();
            text.push_str(&format!("{},{t},{conv},{visit},0\n", feats.join(",")));
        }
        let ds = ingest_reader(text.as_bytes(), &SchemaConfig::criteo()).unwrap();
        assert_eq!(ds.n_levels(), 2);
        assert_eq!(ds.feature_dim(), 12);
        assert_eq!(ds.samples()[2].reward, 1.0);
        assert_eq!(ds.samples()[0].cost, 1.0);
    }

    #[test]
    fn sparse_levels_are_remapped_in_order() {
        let csv = "f0,treatment,reward\n0,5,1\n0,1,1\n0,3,1\n0,5,2\n";
        let schema = SchemaConfig {
            feature_columns: vec!["f0".into()],
            treatment_column: "treatment".into(),
            reward_column: "reward".into(),
            cost_column: None,
        };
        let ds = ingest_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(ds.n_levels(), 3);
        assert_eq!(ds.level_values(), &[1.0, 3.0, 5.0]);
        let levels: Vec<usize> = ds.samples().iter().map(|s| s.treatment).collect();
        assert_eq!(levels, vec![2, 0, 1, 2]);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "f0,treatment\n0,1\n";
        let schema = SchemaConfig::standard(1);
        assert!(matches!(
            ingest_reader(csv.as_bytes(), &schema),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn duplicate_schema_column_rejected() {
        let schema = SchemaConfig {
            feature_columns: vec!["a".into(), "a".into()],
            treatment_column: "t".into(),
            reward_column: "r".into(),
            cost_column: None,
        };
        assert!(matches!(
            ingest_reader("a,t,r\n".as_bytes(), &schema),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn bad_cells_name_row_and_column() {
        let schema = SchemaConfig::standard(1);
        let err = ingest_reader(
            "f0,treatment,reward,cost\n1,0,1,1\n1,1,abc,1\n".as_bytes(),
            &schema,
        )
        .unwrap_err();
        match err {
            Error::Data { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "reward");
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = ingest_reader("f0,treatment,reward,cost\n1,0,1,-2\n".as_bytes(), &schema)
            .unwrap_err();
        assert!(matches!(err, Error::Data { ref column, .. } if column == "cost"));
        let err = ingest_reader("f0,treatment,reward,cost\n".as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::Data { .. }));
    }

    #[test]
    fn balanced_dataset_passes_all_flags() {
        let samples = (0..10)
            .map(|i| RctSample {
                features: vec![i as f64],
                treatment: i % 2,
                reward: 1.0,
                cost: 1.0 + (i % 2) as f64,
            })
            .collect();
        let ds = RctDataset::new(samples, 2, 1).unwrap();
        let diag = validate_dataset(&ds);
        assert_eq!(diag.counts, vec![5, 5]);
        assert!(diag.flags.values().all(|&f| f));
    }

    #[test]
    fn empty_group_is_flagged() {
        let ds = RctDataset::new(vec![sample(vec![0.0], 0, 1.0)], 2, 1).unwrap();
        let diag = validate_dataset(&ds);
        assert!(diag.empty_treatment_group());
        assert_eq!(diag.reward_means[1], None);
    }

    #[test]
    fn constructor_rejects_bad_samples() {
        assert!(RctDataset::new(vec![sample(vec![0.0], 2, 1.0)], 2, 1).is_err());
        assert!(RctDataset::new(vec![sample(vec![f64::NAN], 0, 1.0)], 2, 1).is_err());
        assert!(RctDataset::new(vec![sample(vec![0.0], 0, -1.0)], 2, 1).is_err());
        assert!(RctDataset::new(vec![sample(vec![0.0, 1.0], 0, 1.0)], 2, 1).is_err());
        assert!(RctDataset::new(vec![], 1, 1).is_err());
    }
}
