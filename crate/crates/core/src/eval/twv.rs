//! Term-weighted value over item-level trials.
//!
//! Each (query, item) pair is one trial. For a threshold `theta` a pair is a
//! detection when its score is `>= theta`. Per query, the miss rate is taken
//! over the items that contain it and the false-alarm rate over the items
//! that do not; the pooled rates are unweighted means over queries with at
//! least one true occurrence, and
//! `twv = 1 - p_miss - beta * p_fa`, `beta = (c_fa / c_miss) (1 / p_target - 1)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::GoldLabelSet;
use crate::dtw::DetectionScore;
use crate::{Error, Result};

/// How the per-query values fed to significance tests are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PerQueryThreshold {
    /// Each query is swept over its own thresholds.
    #[default]
    QueryOptimal,
    /// Each query is evaluated at the pooled optimal threshold.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    pub cost_fa: f64,
    pub cost_miss: f64,
    pub p_target: f64,
    pub per_query_threshold: PerQueryThreshold,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cost_fa: 1.0,
            cost_miss: 10.0,
            p_target: 0.0278,
            per_query_threshold: PerQueryThreshold::QueryOptimal,
        }
    }
}

impl EvalConfig {
    pub fn beta(&self) -> f64 {
        (self.cost_fa / self.cost_miss) * (1.0 / self.p_target - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_target > 0.0 && self.p_target < 1.0) {
            return Err(Error::Config(format!("p_target must lie in (0, 1), got {}", self.p_target)));
        }
        if !(self.cost_fa > 0.0 && self.cost_miss > 0.0) {
            return Err(Error::Config("detection costs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwvPoint {
    pub threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
    pub twv: f64,
}

impl TwvPoint {
    fn new(threshold: f64, p_miss: f64, p_fa: f64, beta: f64) -> Self {
        Self {
            threshold,
            p_miss,
            p_fa,
            twv: 1.0 - p_miss - beta * p_fa,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MtwvResult {
    /// Maximum pooled TWV, clamped at 0 (the value of detecting nothing).
    pub mtwv: f64,
    /// Smallest threshold attaining the maximum unclamped TWV.
    pub optimal_threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
    pub beta: f64,
    pub per_query_threshold: PerQueryThreshold,
    /// Curve points in ascending threshold order.
    pub curve: Vec<TwvPoint>,
    /// Per-query MTWV in gold query order, for queries with a true occurrence.
    pub per_query_mtwv: Vec<(String, f64)>,
    /// Queries left out of the pooled rates because they occur nowhere.
    pub excluded_queries: Vec<String>,
}

/// Scores laid out on the gold grid, with per-query occurrence counts.
struct Trials {
    scores: Vec<f64>,
    items: usize,
    n_true: Vec<usize>,
    included: Vec<usize>,
}

impl Trials {
    fn new(scores: &[DetectionScore], gold: &GoldLabelSet) -> Result<Self> {
        let items = gold.item_ids().len();
        if scores.len() != gold.len() {
            return Err(Error::Shape(format!(
                "{} scores for a gold grid of {} pairs",
                scores.len(),
                gold.len()
            )));
        }
        let mut grid = vec![f64::NAN; gold.len()];
        for s in scores {
            let (q, i) = match (gold.query_position(&s.query_id), gold.item_position(&s.item_id)) {
                (Some(q), Some(i)) => (q, i),
                _ => {
                    return Err(Error::Shape(format!(
                        "scored pair ({}, {}) has no gold label",
                        s.query_id, s.item_id
                    )))
                }
            };
            let cell = &mut grid[q * items + i];
            if !cell.is_nan() {
                return Err(Error::Shape(format!("pair ({}, {}) scored twice", s.query_id, s.item_id)));
            }
            if !s.score.is_finite() {
                return Err(Error::Precondition(format!(
                    "pair ({}, {}) has non-finite score",
                    s.query_id, s.item_id
                )));
            }
            *cell = s.score;
        }
        let n_true = gold.true_counts();
        let included: Vec<usize> = (0..n_true.len()).filter(|&q| n_true[q] > 0).collect();
        if included.is_empty() {
            return Err(Error::EvaluationUndefined("no query has a true occurrence".into()));
        }
        Ok(Self {
            scores: grid,
            items,
            n_true,
            included,
        })
    }

    /// Pooled (p_miss, p_fa) from per-query detection counts.
    fn pooled(&self, hits: &[usize], false_alarms: &[usize]) -> (f64, f64) {
        let mut miss_sum = 0.0;
        let mut fa_sum = 0.0;
        let mut fa_queries = 0usize;
        for &q in &self.included {
            let nt = self.n_true[q];
            miss_sum += (nt - hits[q]) as f64 / nt as f64;
            let non_targets = self.items - nt;
            if non_targets > 0 {
                fa_sum += false_alarms[q] as f64 / non_targets as f64;
                fa_queries += 1;
            }
        }
        let p_fa = if fa_queries > 0 { fa_sum / fa_queries as f64 } else { 0.0 };
        (miss_sum / self.included.len() as f64, p_fa)
    }

    fn query_twv(&self, q: usize, hits: usize, false_alarms: usize, beta: f64) -> f64 {
        let nt = self.n_true[q];
        let non_targets = self.items - nt;
        let p_fa = if non_targets > 0 { false_alarms as f64 / non_targets as f64 } else { 0.0 };
        1.0 - (nt - hits) as f64 / nt as f64 - beta * p_fa
    }
}

/// Pooled TWV at an arbitrary threshold, computed directly from counts.
pub fn twv_point(scores: &[DetectionScore], gold: &GoldLabelSet, cfg: &EvalConfig, threshold: f64) -> Result<TwvPoint> {
    cfg.validate()?;
    let trials = Trials::new(scores, gold)?;
    let queries = gold.query_ids().len();
    let mut hits = vec![0; queries];
    let mut fas = vec![0; queries];
    for q in 0..queries {
        for i in 0..trials.items {
            if trials.scores[q * trials.items + i] >= threshold {
                if gold.label_at(q, i) {
                    hits[q] += 1;
                } else {
                    fas[q] += 1;
                }
            }
        }
    }
    let (p_miss, p_fa) = trials.pooled(&hits, &fas);
    Ok(TwvPoint::new(threshold, p_miss, p_fa, cfg.beta()))
}

/// TWV at every distinct observed score, in ascending threshold order.
pub fn twv_curve(scores: &[DetectionScore], gold: &GoldLabelSet, cfg: &EvalConfig) -> Result<Vec<TwvPoint>> {
    cfg.validate()?;
    let trials = Trials::new(scores, gold)?;
    Ok(sweep(&trials, gold, cfg.beta()))
}

fn sweep(trials: &Trials, gold: &GoldLabelSet, beta: f64) -> Vec<TwvPoint> {
    let mut order: Vec<usize> = (0..trials.scores.len()).collect();
    order.sort_by(|&a, &b| trials.scores[b].total_cmp(&trials.scores[a]));
    let queries = gold.query_ids().len();
    let mut hits = vec![0; queries];
    let mut fas = vec![0; queries];
    let mut curve = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let theta = trials.scores[order[k]];
        while k < order.len() && trials.scores[order[k]] == theta {
            let cell = order[k];
            let (q, i) = (cell / trials.items, cell % trials.items);
            if gold.label_at(q, i) {
                hits[q] += 1;
            } else {
                fas[q] += 1;
            }
            k += 1;
        }
        let (p_miss, p_fa) = trials.pooled(&hits, &fas);
        curve.push(TwvPoint::new(theta, p_miss, p_fa, beta));
    }
    curve.reverse();
    curve
}

/// Best TWV of one query over its own thresholds, clamped at 0.
fn query_optimal(trials: &Trials, gold: &GoldLabelSet, q: usize, beta: f64) -> f64 {
    let row = &trials.scores[q * trials.items..(q + 1) * trials.items];
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    let (mut hits, mut fas, mut best) = (0, 0, 0.0f64);
    let mut k = 0;
    while k < order.len() {
        let theta = row[order[k]];
        while k < order.len() && row[order[k]] == theta {
            if gold.label_at(q, order[k]) {
                hits += 1;
            } else {
                fas += 1;
            }
            k += 1;
        }
        best = best.max(trials.query_twv(q, hits, fas, beta));
    }
    best
}

fn query_at(trials: &Trials, gold: &GoldLabelSet, q: usize, theta: f64, beta: f64) -> f64 {
    let row = &trials.scores[q * trials.items..(q + 1) * trials.items];
    let (mut hits, mut fas) = (0, 0);
    for (i, &s) in row.iter().enumerate() {
        if s >= theta {
            if gold.label_at(q, i) {
                hits += 1;
            } else {
                fas += 1;
            }
        }
    }
    trials.query_twv(q, hits, fas, beta).max(0.0)
}

/// Reduces a curve to the MTWV summary and computes per-query values.
pub fn mtwv(curve: &[TwvPoint], scores: &[DetectionScore], gold: &GoldLabelSet, cfg: &EvalConfig) -> Result<MtwvResult> {
    cfg.validate()?;
    let best = curve
        .iter()
        .copied()
        .reduce(|best, p| {
            if p.twv > best.twv || (p.twv == best.twv && p.threshold < best.threshold) {
                p
            } else {
                best
            }
        })
        .ok_or_else(|| Error::EvaluationUndefined("empty TWV curve".into()))?;
    let trials = Trials::new(scores, gold)?;
    let beta = cfg.beta();
    let per_query_mtwv = trials
        .included
        .iter()
        .map(|&q| {
            let v = match cfg.per_query_threshold {
                PerQueryThreshold::QueryOptimal => query_optimal(&trials, gold, q, beta),
                PerQueryThreshold::Global => query_at(&trials, gold, q, best.threshold, beta),
            };
            (gold.query_ids()[q].clone(), v)
        })
        .collect();
    let excluded_queries = (0..trials.n_true.len())
        .filter(|&q| trials.n_true[q] == 0)
        .map(|q| gold.query_ids()[q].clone())
        .collect();
    Ok(MtwvResult {
        mtwv: best.twv.max(0.0),
        optimal_threshold: best.threshold,
        p_miss: best.p_miss,
        p_fa: best.p_fa,
        beta,
        per_query_threshold: cfg.per_query_threshold,
        curve: curve.to_vec(),
        per_query_mtwv,
        excluded_queries,
    })
}

/// `twv_curve` followed by `mtwv`.
pub fn evaluate(scores: &[DetectionScore], gold: &GoldLabelSet, cfg: &EvalConfig) -> Result<MtwvResult> {
    let curve = twv_curve(scores, gold, cfg)?;
    mtwv(&curve, scores, gold, cfg)
}
