//! Synthetic randomized trials with known ground truth.
//!
//! Every individual gets a response matrix `r[j]`, `c[j]` over treatment
//! levels built as cumulative sums of positive cost increments `Δc[j]` and
//! reward increments `ℓ[j]·Δc[j]`, where the marginal utilities `ℓ[j]` are
//! strictly decreasing in `j` and confined to a configurable range. Each
//! ingredient is a softplus or sigmoid of its own random linear projection of
//! the features, frozen by the seed.
//!
//! With two levels this is the binary problem: `τ^c = Δc[0]`,
//! `τ^r = ℓ[0]·Δc[0]`, so the ROI `τ^r/τ^c` stays inside the utility range.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{RctDataset, RctSample};
use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

/// How treatment levels are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    /// Each sample independently draws a level from the propensity vector.
    #[default]
    Bernoulli,
    /// Complete randomization within each stratum (vocabulary key, or the
    /// whole population): level quotas follow the propensity exactly and are
    /// shuffled inside the stratum.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    pub n_levels: usize,
    pub noise_scale: f64,
    pub propensity: Vec<f64>,
    pub seed: u64,
    /// Draw features from this many distinct vectors instead of continuously.
    #[serde(default)]
    pub vocabulary: Option<usize>,
    #[serde(default)]
    pub assignment: Assignment,
    /// Open interval that every marginal utility falls in.
    #[serde(default = "default_utility_range")]
    pub utility_range: (f64, f64),
}

fn default_utility_range() -> (f64, f64) {
    (0.05, 0.95)
}

impl SynthConfig {
    /// Uniform propensity over `n_levels`, continuous features.
    pub fn new(n: usize, d: usize, n_levels: usize, noise_scale: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            n_levels,
            noise_scale,
            propensity: vec![1.0 / n_levels as f64; n_levels],
            seed,
            vocabulary: None,
            assignment: Assignment::Bernoulli,
            utility_range: default_utility_range(),
        }
    }

    /// Finite vocabulary of `keys` feature vectors with stratified assignment,
    /// so every key sees every level equally often when `n` divides evenly.
    pub fn balanced_vocabulary(mut self, keys: usize) -> Self {
        self.vocabulary = Some(keys);
        self.assignment = Assignment::Stratified;
        self
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("sample count n must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("feature dimension d must be positive".into()));
        }
        if self.n_levels < 2 {
            return Err(Error::Config("need at least two treatment levels".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config(format!("invalid noise scale {}", self.noise_scale)));
        }
        if self.propensity.len() != self.n_levels
            || self.propensity.iter().any(|&p| !(p > 0.0))
            || (self.propensity.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!(
                "propensity must hold {} positive entries summing to 1, got {:?}",
                self.n_levels, self.propensity
            )));
        }
        let (lo, hi) = self.utility_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid utility range ({lo}, {hi})")));
        }
        match (self.vocabulary, self.assignment) {
            (Some(0), _) => Err(Error::Config("vocabulary must hold at least one key".into())),
            (Some(k), Assignment::Stratified) if !self.n.is_multiple_of(k) => Err(Error::Config(format!(
                "stratified vocabulary needs n divisible by {k}, got {}",
                self.n
            ))),
            _ => Ok(()),
        }
    }
}

/// Known treatment effects behind a synthetic dataset, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `r[L-1] - r[0]`; the CATE of reward in the binary case.
    pub cate_r: Vec<f64>,
    /// `c[L-1] - c[0]`.
    pub cate_c: Vec<f64>,
    pub response_r: Vec<Vec<f64>>,
    pub response_c: Vec<Vec<f64>>,
    /// `(r[j+1]-r[j]) / (c[j+1]-c[j])`, strictly decreasing in `j`.
    pub marginal: Vec<Vec<f64>>,
    /// Vocabulary key of each sample in finite-vocabulary mode.
    pub keys: Option<Vec<usize>>,
}

impl GroundTruth {
    pub fn n_levels(&self) -> usize {
        self.response_r.first().map_or(0, Vec::len)
    }

    /// True ROI `τ^r/τ^c` per sample (binary case).
    pub fn roi(&self) -> Vec<f64> {
        self.cate_r.iter().zip(&self.cate_c).map(|(r, c)| r / c).collect()
    }

    /// Writes `cate_r,cate_c` for two levels, otherwise
    /// `r_0..r_{L-1},c_0..c_{L-1},l_0..l_{L-2}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let l = self.n_levels();
        let header = if l == 2 {
            "cate_r,cate_c".to_string()
        } else {
            let cols: Vec<String> = (0..l)
                .map(|j| format!("r_{j}"))
                .chain((0..l).map(|j| format!("c_{j}")))
                .chain((0..l - 1).map(|j| format!("l_{j}")))
                .collect();
            cols.join(",")
        };
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for i in 0..self.cate_r.len() {
            let row: Vec<String> = if l == 2 {
                vec![self.cate_r[i].to_string(), self.cate_c[i].to_string()]
            } else {
                self.response_r[i]
                    .iter()
                    .chain(&self.response_c[i])
                    .chain(&self.marginal[i])
                    .map(|v| v.to_string())
                    .collect()
            };
            writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `x ↦ bias + w·x` with `w` drawn once per seed.
#[derive(Debug, Clone)]
struct Projection {
    w: Vec<f64>,
    bias: f64,
}

impl Projection {
    fn draw(rng: &mut ChaCha8Rng, d: usize, scale: f64, bias: f64) -> Self {
        let s = scale / (d as f64).sqrt();
        let w = (0..d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut *rng);
                s * z
            })
            .collect();
        Self { w, bias }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.bias + self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// The seed-frozen response surfaces.
#[derive(Debug, Clone)]
struct Surface {
    base_reward: Projection,
    base_cost: Projection,
    cost_step: Projection,
    utility: Projection,
    decay: Projection,
    utility_range: (f64, f64),
}

impl Surface {
    fn draw(seed: u64, d: usize, utility_range: (f64, f64)) -> Self {
        let mut rng = stream(seed, 0);
        Self {
            base_reward: Projection::draw(&mut rng, d, 1.0, 0.5),
            base_cost: Projection::draw(&mut rng, d, 1.0, -0.5),
            cost_step: Projection::draw(&mut rng, d, 1.0, 0.0),
            utility: Projection::draw(&mut rng, d, 2.0, 0.0),
            decay: Projection::draw(&mut rng, d, 1.0, 1.0),
            utility_range,
        }
    }

    /// Response matrices `(r, c)` over `levels` for features `x`.
    fn responses(&self, x: &[f64], levels: usize) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.utility_range;
        let decay = sigmoid(self.decay.eval(x));
        let step = softplus(self.cost_step.eval(x));
        let mut r = Vec::with_capacity(levels);
        let mut c = Vec::with_capacity(levels);
        r.push(softplus(self.base_reward.eval(x)));
        c.push(0.25 * softplus(self.base_cost.eval(x)));
        let mut v = sigmoid(self.utility.eval(x));
        for j in 0..levels - 1 {
            let dc = 0.2 + step * (1.0 + 0.25 * j as f64);
            let ell = lo + (hi - lo) * v;
            r.push(r[j] + ell * dc);
            c.push(c[j] + dc);
            v *= decay;
        }
        (r, c)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Level quotas for `m` samples via largest remainders.
fn quotas(m: usize, propensity: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = propensity.iter().map(|p| p * m as f64).collect();
    let mut q: Vec<usize> = raw.iter().map(|v| v.floor() as usize).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    let missing = m - q.iter().sum::<usize>();
    for &j in order.iter().take(missing) {
        q[j] += 1;
    }
    q
}

fn draw_level(rng: &mut ChaCha8Rng, propensity: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in propensity.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    propensity.len() - 1
}

/// Binary-treatment dataset; `cfg.n_levels` must be 2.
pub fn gen_btap_dataset(cfg: &SynthConfig) -> Result<(RctDataset, GroundTruth)> {
    if cfg.n_levels != 2 {
        return Err(Error::Config(format!(
            "binary generator needs n_levels = 2, got {}",
            cfg.n_levels
        )));
    }
    generate(cfg)
}

/// Multi-level dataset satisfying diminishing marginal utility strictly.
pub fn gen_mtbap_dataset(cfg: &SynthConfig) -> Result<(RctDataset, GroundTruth)> {
    generate(cfg)
}

fn generate(cfg: &SynthConfig) -> Result<(RctDataset, GroundTruth)> {
    cfg.check()?;
    let surface = Surface::draw(cfg.seed, cfg.d, cfg.utility_range);
    let mut feat_rng = stream(cfg.seed, 1);
    let mut assign_rng = stream(cfg.seed, 2);
    let mut noise_rng = stream(cfg.seed, 3);
    let l = cfg.n_levels;

    let draw_x = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..cfg.d).map(|_| StandardNormal.sample(&mut *rng)).collect()
    };
    let (features, keys): (Vec<Vec<f64>>, Option<Vec<usize>>) = match cfg.vocabulary {
        Some(k) => {
            let vocab: Vec<Vec<f64>> = (0..k).map(|_| draw_x(&mut feat_rng)).collect();
            let keys: Vec<usize> = match cfg.assignment {
                Assignment::Stratified => (0..cfg.n).map(|i| i % k).collect(),
                Assignment::Bernoulli => (0..cfg.n).map(|_| feat_rng.random_range(0..k)).collect(),
            };
            (keys.iter().map(|&key| vocab[key].clone()).collect(), Some(keys))
        }
        None => ((0..cfg.n).map(|_| draw_x(&mut feat_rng)).collect(), None),
    };

    let treatments: Vec<usize> = match cfg.assignment {
        Assignment::Bernoulli => (0..cfg.n)
            .map(|_| draw_level(&mut assign_rng, &cfg.propensity))
            .collect(),
        Assignment::Stratified => {
            let strata: Vec<Vec<usize>> = match (&keys, cfg.vocabulary) {
                (Some(keys), Some(k)) => {
                    let mut s = vec![Vec::new(); k];
                    for (i, &key) in keys.iter().enumerate() {
                        s[key].push(i);
                    }
                    s
                }
                _ => vec![(0..cfg.n).collect()],
            };
            let mut t = vec![0usize; cfg.n];
            for members in strata {
                let mut levels: Vec<usize> = quotas(members.len(), &cfg.propensity)
                    .into_iter()
                    .enumerate()
                    .flat_map(|(j, q)| std::iter::repeat_n(j, q))
                    .collect();
                levels.shuffle(&mut assign_rng);
                for (i, level) in members.into_iter().zip(levels) {
                    t[i] = level;
                }
            }
            t
        }
    };

    let n = cfg.n;
    let mut truth = GroundTruth {
        cate_r: Vec::with_capacity(n),
        cate_c: Vec::with_capacity(n),
        response_r: Vec::with_capacity(n),
        response_c: Vec::with_capacity(n),
        marginal: Vec::with_capacity(n),
        keys,
    };
    let mut samples = Vec::with_capacity(n);
    for (x, t) in features.into_iter().zip(treatments) {
        let (r, c) = surface.responses(&x, l);
        let marginal: Vec<f64> = (0..l - 1)
            .map(|j| (r[j + 1] - r[j]) / (c[j + 1] - c[j]))
            .collect();
        let mut observe = |mean: f64| -> f64 {
            if cfg.noise_scale == 0.0 {
                mean
            } else {
                let eps: f64 = StandardNormal.sample(&mut noise_rng);
                (mean + cfg.noise_scale * eps).max(0.0)
            }
        };
        let reward = observe(r[t]);
        let cost = observe(c[t]);
        truth.cate_r.push(r[l - 1] - r[0]);
        truth.cate_c.push(c[l - 1] - c[0]);
        truth.marginal.push(marginal);
        truth.response_r.push(r);
        truth.response_c.push(c);
        samples.push(RctSample {
            features: x,
            treatment: t,
            reward,
            cost,
        });
    }
    Ok((RctDataset::new(samples, l, cfg.d)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{validate_dataset, FLAG_COST_INCREASING};

    #[test]
    fn zero_noise_reward_is_base_plus_effect() {
        let cfg = SynthConfig::new(4, 3, 2, 0.0, 11);
        let (ds, truth) = gen_btap_dataset(&cfg).unwrap();
        for (i, s) in ds.samples().iter().enumerate() {
            let base = truth.response_r[i][0];
            assert_eq!(s.reward - base, s.treatment as f64 * truth.cate_r[i]);
            assert!(truth.cate_r[i] > 0.0 && truth.cate_c[i] > 0.0);
        }
    }

    #[test]
    fn zero_noise_observations_match_responses() {
        let cfg = SynthConfig::new(3, 2, 3, 0.0, 5);
        let (ds, truth) = gen_mtbap_dataset(&cfg).unwrap();
        for (i, s) in ds.samples().iter().enumerate() {
            assert_eq!(s.reward, truth.response_r[i][s.treatment]);
            assert_eq!(s.cost, truth.response_c[i][s.treatment]);
        }
    }

    #[test]
    fn marginals_strictly_decreasing_and_in_range() {
        let cfg = SynthConfig::new(500, 4, 5, 0.1, 3);
        let (_, truth) = gen_mtbap_dataset(&cfg).unwrap();
        for (row, (r, c)) in truth.marginal.iter().zip(truth.response_r.iter().zip(&truth.response_c)) {
            assert!(row.windows(2).all(|w| w[1] < w[0]));
            assert!(row.iter().all(|&l| l > 0.05 && l < 0.95));
            assert!(r.windows(2).all(|w| w[0] < w[1]));
            assert!(c.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn two_levels_reduce_to_binary_semantics() {
        let cfg = SynthConfig::new(50, 3, 2, 0.0, 9);
        let (a, ta) = gen_mtbap_dataset(&cfg).unwrap();
        let (b, tb) = gen_btap_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        for i in 0..50 {
            assert_eq!(ta.cate_r[i], tb.response_r[i][1] - tb.response_r[i][0]);
        }
    }

    #[test]
    fn deterministic_for_identical_config() {
        let cfg = SynthConfig::new(200, 3, 3, 0.3, 42);
        assert_eq!(gen_mtbap_dataset(&cfg).unwrap(), gen_mtbap_dataset(&cfg).unwrap());
        let other = SynthConfig { seed: 43, ..cfg.clone() };
        assert_ne!(gen_mtbap_dataset(&other).unwrap().0, gen_mtbap_dataset(&cfg).unwrap().0);
    }

    #[test]
    fn balanced_propensity_counts() {
        let cfg = SynthConfig::new(10_000, 2, 2, 0.1, 1);
        let (ds, _) = gen_btap_dataset(&cfg).unwrap();
        let frac = ds.counts()[1] as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "treated fraction {frac}");
    }

    #[test]
    fn stratified_vocabulary_is_exactly_balanced() {
        let cfg = SynthConfig::new(4 * 3 * 10, 2, 3, 0.0, 8).balanced_vocabulary(4);
        let (ds, truth) = gen_mtbap_dataset(&cfg).unwrap();
        let keys = truth.keys.unwrap();
        let mut cell = [[0usize; 3]; 4];
        for (s, &k) in ds.samples().iter().zip(&keys) {
            cell[k][s.treatment] += 1;
        }
        assert!(cell.iter().all(|c| c == &[10, 10, 10]));
    }

    #[test]
    fn multi_level_cost_means_increase() {
        let cfg = SynthConfig::new(3000, 3, 3, 0.05, 21);
        let (ds, _) = gen_mtbap_dataset(&cfg).unwrap();
        assert!(validate_dataset(&ds).flags[FLAG_COST_INCREASING]);
    }

    #[test]
    fn rejects_bad_configs() {
        let ok = SynthConfig::new(10, 2, 2, 0.0, 0);
        assert!(gen_btap_dataset(&SynthConfig { n: 0, ..ok.clone() }).is_err());
        assert!(gen_btap_dataset(&SynthConfig { propensity: vec![0.7, 0.7], ..ok.clone() }).is_err());
        assert!(gen_btap_dataset(&SynthConfig { propensity: vec![1.0, 0.0], ..ok.clone() }).is_err());
        assert!(gen_btap_dataset(&SynthConfig::new(10, 2, 3, 0.0, 0)).is_err());
        assert!(gen_mtbap_dataset(&ok.clone().balanced_vocabulary(3)).is_err());
    }

    #[test]
    fn quotas_follow_largest_remainder() {
        assert_eq!(quotas(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(quotas(10, &[1.0 / 3.0; 3]).iter().sum::<usize>(), 10);
        assert_eq!(quotas(7, &[0.2, 0.8]), vec![1, 6]);
    }
}
