use serde::{Deserialize, Serialize};

use crate::dataset::RctDataset;
use crate::error::{Error, Result};

/// Above this many quintuples the curve keeps at most one point per percent
/// of the sorted list.
pub const EXACT_CURVE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// `T̃`, the set playing the treated role.
    Treated,
    /// `C̃`, the set playing the control role.
    Control,
}

/// One weighted, scored sample of the reshaped trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quintuple {
    /// Position of the underlying sample in the dataset.
    pub sample: usize,
    pub treatment: usize,
    pub weight: f64,
    pub weighted_cost: f64,
    pub weighted_reward: f64,
    pub score: f64,
    pub group: Group,
}

fn level_weights(ds: &RctDataset) -> Result<Vec<f64>> {
    if let Some(j) = ds.counts().iter().position(|&c| c == 0) {
        return Err(Error::MetricDomain(format!("treatment level {j} has no samples")));
    }
    let n = ds.total() as f64;
    Ok(ds.counts().iter().map(|&c| n / c as f64).collect())
}

fn quintuple(ds: &RctDataset, i: usize, w: &[f64], score: f64, group: Group) -> Quintuple {
    let s = &ds.samples()[i];
    let weight = w[s.treatment];
    Quintuple {
        sample: i,
        treatment: s.treatment,
        weight,
        weighted_cost: weight * s.cost,
        weighted_reward: weight * s.reward,
        score,
        group,
    }
}

/// Reshapes a multi-level trial for a per-level scorer. `scores` is row-major
/// `n × (L−1)`. A sample below the top level joins `T̃` scored at its own
/// level head; a sample above level 0 joins `C̃` scored at the head below.
pub fn build_quintuples(ds: &RctDataset, scores: &[f64]) -> Result<Vec<Quintuple>> {
    let heads = ds.n_levels() - 1;
    if scores.len() != ds.len() * heads {
        return Err(Error::Contract(format!(
            "expected {} scores ({} samples × {heads} heads), got {}",
            ds.len() * heads,
            ds.len(),
            scores.len()
        )));
    }
    let w = level_weights(ds)?;
    let top = ds.n_levels() - 1;
    let mut out = Vec::with_capacity(ds.len() * 2);
    for (i, s) in ds.samples().iter().enumerate() {
        let t = s.treatment;
        if t < top {
            out.push(quintuple(ds, i, &w, scores[i * heads + t], Group::Treated));
        }
        if t > 0 {
            out.push(quintuple(ds, i, &w, scores[i * heads + t - 1], Group::Control));
        }
    }
    Ok(out)
}

/// Binary trial with the treated samples as `T̃` and controls as `C̃`.
pub fn binary_quintuples(ds: &RctDataset, scores: &[f64]) -> Result<Vec<Quintuple>> {
    if ds.n_levels() != 2 {
        return Err(Error::MetricDomain(format!(
            "binary metrics need two levels, got {}",
            ds.n_levels()
        )));
    }
    if scores.len() != ds.len() {
        return Err(Error::Contract(format!(
            "expected {} scores, got {}",
            ds.len(),
            scores.len()
        )));
    }
    let w = level_weights(ds)?;
    Ok(ds
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let g = if s.treatment == 1 { Group::Treated } else { Group::Control };
            quintuple(ds, i, &w, scores[i], g)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    /// `(x, y)` in order of increasing `k`.
    pub points: Vec<(f64, f64)>,
    /// Prefix size `k` of every point.
    pub ks: Vec<usize>,
    pub endpoint: (f64, f64),
    pub area_model: f64,
    pub area_random: f64,
    pub normalized: bool,
}

impl CostCurve {
    fn from_points(points: Vec<(f64, f64)>, ks: Vec<usize>) -> Self {
        let endpoint = *points.last().expect("curve has at least its endpoint");
        // Trapezoids from the origin in k order.
        let mut area = 0.0;
        let mut prev = (0.0, 0.0);
        for &p in &points {
            area += (p.0 - prev.0) * (p.1 + prev.1) / 2.0;
            prev = p;
        }
        Self {
            points,
            ks,
            endpoint,
            area_model: area,
            area_random: endpoint.0 * endpoint.1 / 2.0,
            normalized: false,
        }
    }

    /// Both axes divided by the endpoint, so the curve ends at `(1, 1)`.
    pub fn normalize(&self) -> Result<CostCurve> {
        let (ex, ey) = self.endpoint;
        if ex == 0.0 || ey == 0.0 {
            return Err(Error::MetricDomain("cannot normalise a curve ending on an axis".into()));
        }
        let points = self.points.iter().map(|&(x, y)| (x / ex, y / ey)).collect();
        let mut c = CostCurve::from_points(points, self.ks.clone());
        c.normalized = true;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy)]
struct Prefix {
    k: usize,
    n_t: usize,
    n_c: usize,
    cost_t: f64,
    cost_c: f64,
    reward_t: f64,
    reward_c: f64,
}

impl Prefix {
    fn delta(&self, n: usize) -> (f64, f64) {
        let scale = self.k as f64 / n as f64;
        let (nt, nc) = (self.n_t as f64, self.n_c as f64);
        (
            scale * (self.cost_t / nt - self.cost_c / nc),
            scale * (self.reward_t / nt - self.reward_c / nc),
        )
    }
}

/// Prefixes at the end of every tie block (both groups non-empty), thinned to
/// a percent grid for large inputs.
fn prefixes(q: &[Quintuple]) -> Result<Vec<Prefix>> {
    if !q.iter().any(|x| x.group == Group::Treated) || !q.iter().any(|x| x.group == Group::Control) {
        return Err(Error::MetricDomain("both curve groups need at least one member".into()));
    }
    if let Some(x) = q.iter().find(|x| !x.score.is_finite()) {
        return Err(Error::MetricDomain(format!("sample {} has a non-finite score", x.sample)));
    }
    let n = q.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| q[b].score.total_cmp(&q[a].score));
    let grid = n > EXACT_CURVE_LIMIT;
    let mut next_mark = 1usize;
    let mark = |p: usize| (p * n).div_ceil(100);

    let mut out = Vec::new();
    let mut acc = Prefix {
        k: 0,
        n_t: 0,
        n_c: 0,
        cost_t: 0.0,
        cost_c: 0.0,
        reward_t: 0.0,
        reward_c: 0.0,
    };
    for (pos, &idx) in order.iter().enumerate() {
        let x = &q[idx];
        match x.group {
            Group::Treated => {
                acc.n_t += 1;
                acc.cost_t += x.weighted_cost;
                acc.reward_t += x.weighted_reward;
            }
            Group::Control => {
                acc.n_c += 1;
                acc.cost_c += x.weighted_cost;
                acc.reward_c += x.weighted_reward;
            }
        }
        acc.k = pos + 1;
        let block_end = pos + 1 == n || q[order[pos + 1]].score != x.score;
        if !block_end || acc.n_t == 0 || acc.n_c == 0 {
            continue;
        }
        if grid {
            if acc.k < mark(next_mark) {
                continue;
            }
            while next_mark <= 100 && mark(next_mark) <= acc.k {
                next_mark += 1;
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// `(ΔY^c(k), ΔY^r(k))` over the score-sorted quintuples.
pub fn mt_cost_curve(q: &[Quintuple]) -> Result<CostCurve> {
    let n = q.len();
    let pre = prefixes(q)?;
    let ks = pre.iter().map(|p| p.k).collect();
    Ok(CostCurve::from_points(pre.iter().map(|p| p.delta(n)).collect(), ks))
}

/// `(k/n, ΔY^r(k))` over the score-sorted quintuples.
pub fn uplift_curve(q: &[Quintuple]) -> Result<CostCurve> {
    let n = q.len();
    let pre = prefixes(q)?;
    let ks = pre.iter().map(|p| p.k).collect();
    let points = pre.iter().map(|p| (p.k as f64 / n as f64, p.delta(n).1)).collect();
    Ok(CostCurve::from_points(points, ks))
}

/// `A_M / (2·A_R)`. Not clamped: a curve that dips below the axis or far
/// above the chord reports that honestly.
pub fn mt_aucc(curve: &CostCurve) -> Result<f64> {
    if !(curve.area_random > 0.0) {
        return Err(Error::MetricDomain(format!(
            "random-benchmark area is {} (total uplift is not positive)",
            curve.area_random
        )));
    }
    Ok(curve.area_model / (2.0 * curve.area_random))
}

/// Area ratio of the cost curve for ROI scores on a binary trial.
pub fn aucc(ds: &RctDataset, roi_scores: &[f64]) -> Result<f64> {
    mt_aucc(&mt_cost_curve(&binary_quintuples(ds, roi_scores)?)?)
}

/// Area ratio of the uplift curve for CATE scores on a binary trial.
pub fn auuc(ds: &RctDataset, uplift_scores: &[f64]) -> Result<f64> {
    mt_aucc(&uplift_curve(&binary_quintuples(ds, uplift_scores)?)?)
}
