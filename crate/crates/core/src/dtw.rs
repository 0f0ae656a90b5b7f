//! Detection stage: frame distances, range normalization and the sliding
//! query-sized DTW window.
//!
//! For one (query, item) pair the item is scanned with a window of about the
//! query's length. Inside each window the DTW cost is the minimum, over
//! monotone paths from the top-left to the bottom-right cell with steps
//! (1,1), (1,0) and (0,1), of the *mean* cell cost along the path. The pair
//! score is one minus the smallest window cost.
//!
//! A mean-cost objective is a ratio of two path functionals, which ordinary
//! DTW recursion cannot minimize exactly. It is solved here with Dinkelbach
//! iteration: for a trial ratio `r`, a standard DTW pass over costs `c - r`
//! returns the path minimizing `sum(c) - r * len`; if that path has a mean
//! below `r` it becomes the new trial, otherwise `r` is optimal. Each pass
//! strictly lowers `r` and there are finitely many paths, so the loop ends on
//! the exact optimum. While scanning windows the running best cost is used as
//! the first trial, so a window that cannot improve on it is dismissed after
//! a single pass.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, FeatureMatrix, Result};

/// Upper bound on Dinkelbach passes per window; convergence normally takes 2-4.
const MAX_PASSES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SearchConfig {
    pub window_stride_frames: usize,
    /// Window length is `round(window_scale * query_frames)`.
    pub window_scale: f64,
    pub variance_floor: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            window_stride_frames: 1,
            window_scale: 1.0,
            variance_floor: 1e-8,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_stride_frames == 0 {
            return Err(Error::Config("window_stride_frames must be at least 1".into()));
        }
        if !(self.window_scale > 0.0 && self.window_scale.is_finite()) {
            return Err(Error::Config(format!(
                "window_scale must be positive, got {}",
                self.window_scale
            )));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::Config(format!(
                "variance_floor must be positive, got {}",
                self.variance_floor
            )));
        }
        Ok(())
    }
}

/// Query-by-item frame distances, row-major with one row per query frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    normalized: bool,
}

impl DistanceMatrix {
    /// Wraps raw values; every value must be finite and nonnegative.
    pub fn from_values(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values do not form a nonempty {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Precondition(format!(
                "distances must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            values,
            rows,
            cols,
            normalized: false,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            values.extend((0..self.rows).map(|i| self.get(i, j)));
        }
        Self {
            values,
            rows: self.cols,
            cols: self.rows,
            normalized: self.normalized,
        }
    }

    pub fn view(&self) -> Window<'_> {
        self.window(0, self.cols)
    }

    /// Columns `start..start + width` of every row.
    pub fn window(&self, start: usize, width: usize) -> Window<'_> {
        assert!(width > 0 && start + width <= self.cols, "window out of range");
        Window {
            values: &self.values,
            rows: self.rows,
            cols: width,
            stride: self.cols,
            offset: start,
        }
    }
}

/// Borrowed rectangular sub-matrix of a [`DistanceMatrix`].
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    values: &'a [f64],
    rows: usize,
    cols: usize,
    stride: usize,
    offset: usize,
}

impl<'a> Window<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        let start = i * self.stride + self.offset;
        &self.values[start..start + self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionScore {
    pub query_id: String,
    pub item_id: String,
    pub score: f64,
    pub best_window_start_frame: usize,
    pub best_window_end_frame: usize,
}

/// Per-dimension population variance over the union of both matrices'
/// frames, floored at `floor`.
pub fn pooled_variances(q: &FeatureMatrix, t: &FeatureMatrix, floor: f64) -> Result<Vec<f64>> {
    check_dims(q, t)?;
    let dims = q.num_dims();
    let n = (q.num_frames() + t.num_frames()) as f64;
    let mut mean = vec![0.0; dims];
    for frame in q.frames().chain(t.frames()) {
        for (m, &v) in mean.iter_mut().zip(frame) {
            *m += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dims];
    for frame in q.frames().chain(t.frames()) {
        for ((s, &v), m) in var.iter_mut().zip(frame).zip(&mean) {
            let d = f64::from(v) - m;
            *s += d * d;
        }
    }
    Ok(var.into_iter().map(|s| (s / n).max(floor)).collect())
}

/// Standardized Euclidean distance between every query and item frame.
pub fn distance_matrix(q: &FeatureMatrix, t: &FeatureMatrix, variances: &[f64]) -> Result<DistanceMatrix> {
    check_dims(q, t)?;
    if variances.len() != q.num_dims() {
        return Err(Error::Shape(format!(
            "{} variances for {}-dimensional features",
            variances.len(),
            q.num_dims()
        )));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Precondition(format!("variances must be positive, found {v}")));
    }
    let inv: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let item: Vec<f64> = t.data().iter().map(|&v| f64::from(v)).collect();
    let dims = q.num_dims();
    let mut values = Vec::with_capacity(q.num_frames() * t.num_frames());
    for qf in q.frames() {
        let qf: Vec<f64> = qf.iter().map(|&v| f64::from(v)).collect();
        for tf in item.chunks_exact(dims) {
            let mut acc = 0.0;
            for d in 0..dims {
                let diff = qf[d] - tf[d];
                acc += diff * diff * inv[d];
            }
            values.push(libm::sqrt(acc));
        }
    }
    Ok(DistanceMatrix {
        values,
        rows: q.num_frames(),
        cols: t.num_frames(),
        normalized: false,
    })
}

/// Affine rescale to [0, 1] over the whole matrix. A constant matrix maps to
/// all zeros.
pub fn range_normalize(mut d: DistanceMatrix) -> DistanceMatrix {
    let (min, max) = d
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = max - min;
    if span > 0.0 {
        for v in &mut d.values {
            *v = ((*v - min) / span).clamp(0.0, 1.0);
        }
    } else {
        d.values.iter_mut().for_each(|v| *v = 0.0);
    }
    d.normalized = true;
    d
}

/// Reusable DTW row buffers.
#[derive(Debug, Default, Clone)]
pub struct DtwScratch {
    adjusted: Vec<f64>,
    sum: Vec<f64>,
    len: Vec<u32>,
    passes: u64,
}

impl DtwScratch {
    /// Total DTW passes run through this scratch.
    pub fn passes(&self) -> u64 {
        self.passes
    }

    /// One DTW pass over costs `c - lambda`; returns (sum of `c`, cell
    /// count) of the optimal path. Ties prefer diagonal, then vertical,
    /// then horizontal predecessors.
    fn best_path(&mut self, w: &Window<'_>, lambda: f64) -> (f64, u32) {
        self.passes += 1;
        let cols = w.cols();
        self.adjusted.clear();
        self.adjusted.resize(cols, 0.0);
        self.sum.clear();
        self.sum.resize(cols, 0.0);
        self.len.clear();
        self.len.resize(cols, 0);
        let (adj, sum, len) = (&mut self.adjusted[..], &mut self.sum[..], &mut self.len[..]);

        let first = w.row(0);
        adj[0] = first[0] - lambda;
        sum[0] = first[0];
        len[0] = 1;
        for j in 1..cols {
            let c = first[j];
            adj[j] = adj[j - 1] + (c - lambda);
            sum[j] = sum[j - 1] + c;
            len[j] = len[j - 1] + 1;
        }
        for i in 1..w.rows() {
            let row = w.row(i);
            let (mut diag_a, mut diag_s, mut diag_l) = (adj[0], sum[0], len[0]);
            let c = row[0];
            adj[0] += c - lambda;
            sum[0] += c;
            len[0] += 1;
            for j in 1..cols {
                let (up_a, up_s, up_l) = (adj[j], sum[j], len[j]);
                let (mut ba, mut bs, mut bl) = (diag_a, diag_s, diag_l);
                if up_a < ba {
                    (ba, bs, bl) = (up_a, up_s, up_l);
                }
                if adj[j - 1] < ba {
                    (ba, bs, bl) = (adj[j - 1], sum[j - 1], len[j - 1]);
                }
                let c = row[j];
                adj[j] = ba + (c - lambda);
                sum[j] = bs + c;
                len[j] = bl + 1;
                (diag_a, diag_s, diag_l) = (up_a, up_s, up_l);
            }
        }
        (sum[cols - 1], len[cols - 1])
    }

    /// Exact minimum mean path cost of the window, or `None` if it is not
    /// strictly below `bound`. Pass `f64::INFINITY` for an unconditional
    /// answer.
    pub fn window_cost_below(&mut self, w: &Window<'_>, bound: f64) -> Option<f64> {
        let mut best = if bound.is_finite() {
            let (s, l) = self.best_path(w, bound);
            let r = s / f64::from(l);
            if r >= bound {
                return None;
            }
            r
        } else {
            let (s, l) = self.best_path(w, 0.0);
            s / f64::from(l)
        };
        for _ in 0..MAX_PASSES {
            let (s, l) = self.best_path(w, best);
            let r = s / f64::from(l);
            if r < best {
                best = r;
            } else {
                break;
            }
        }
        Some(best)
    }
}

/// Minimum over monotone corner-to-corner paths of the mean cell cost.
pub fn dtw_window_cost(w: &Window<'_>) -> f64 {
    DtwScratch::default()
        .window_cost_below(w, f64::INFINITY)
        .expect("unbounded search always yields a cost")
}

/// Window start frames for an item of `item_frames` frames: every stride
/// step, plus the final right-aligned start.
pub fn window_starts(item_frames: usize, window: usize, stride: usize) -> impl Iterator<Item = usize> {
    let last = item_frames - window;
    (0..=last)
        .step_by(stride)
        .chain(core::iter::once(last).filter(move |l| l % stride != 0))
}

/// Window length used for a query of `query_frames` against an item of
/// `item_frames` frames.
pub fn window_length(query_frames: usize, item_frames: usize, scale: f64) -> usize {
    let scaled = libm::round(scale * query_frames as f64) as usize;
    scaled.clamp(1, item_frames)
}

/// Outcome of scoring one pair, with work counters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub score: f64,
    pub best_window_start_frame: usize,
    pub best_window_end_frame: usize,
    pub windows_evaluated: u64,
}

/// Scores one pair, reusing `scratch` across calls.
pub fn score_pair(q: &FeatureMatrix, t: &FeatureMatrix, cfg: &SearchConfig, scratch: &mut DtwScratch) -> Result<PairScore> {
    cfg.validate()?;
    let variances = pooled_variances(q, t, cfg.variance_floor)?;
    let dist = range_normalize(distance_matrix(q, t, &variances)?);
    let width = window_length(q.num_frames(), t.num_frames(), cfg.window_scale);
    let mut best_cost = f64::INFINITY;
    let mut best_start = 0;
    let mut windows = 0;
    for start in window_starts(t.num_frames(), width, cfg.window_stride_frames) {
        windows += 1;
        if let Some(cost) = scratch.window_cost_below(&dist.window(start, width), best_cost) {
            best_cost = cost;
            best_start = start;
        }
    }
    Ok(PairScore {
        score: (1.0 - best_cost).clamp(0.0, 1.0),
        best_window_start_frame: best_start,
        best_window_end_frame: best_start + width - 1,
        windows_evaluated: windows,
    })
}

/// Detection score of `q` in `t`, labelled with the matrices' source ids.
pub fn detection_score(q: &FeatureMatrix, t: &FeatureMatrix, cfg: &SearchConfig) -> Result<DetectionScore> {
    let s = score_pair(q, t, cfg, &mut DtwScratch::default())?;
    Ok(DetectionScore {
        query_id: q.source_id.clone(),
        item_id: t.source_id.clone(),
        score: s.score,
        best_window_start_frame: s.best_window_start_frame,
        best_window_end_frame: s.best_window_end_frame,
    })
}

/// Sequential scan of every (query, item) pair, sorted by (query, item).
/// The `qbestd` crate provides the multi-threaded equivalent.
pub fn search_corpus(queries: &[FeatureMatrix], items: &[FeatureMatrix], cfg: &SearchConfig) -> Result<Vec<DetectionScore>> {
    let mut scratch = DtwScratch::default();
    let mut out = Vec::with_capacity(queries.len() * items.len());
    for q in queries {
        for t in items {
            let s = score_pair(q, t, cfg, &mut scratch).map_err(|e| name_pair(e, q, t))?;
            out.push(DetectionScore {
                query_id: q.source_id.clone(),
                item_id: t.source_id.clone(),
                score: s.score,
                best_window_start_frame: s.best_window_start_frame,
                best_window_end_frame: s.best_window_end_frame,
            });
        }
    }
    sort_scores(&mut out);
    Ok(out)
}

pub fn sort_scores(scores: &mut [DetectionScore]) {
    scores.sort_by(|a, b| (&a.query_id, &a.item_id).cmp(&(&b.query_id, &b.item_id)));
}

/// Prefixes an error with the pair it came from.
pub fn name_pair(err: Error, q: &FeatureMatrix, t: &FeatureMatrix) -> Error {
    match err {
        Error::Shape(msg) => Error::Shape(format!(
            "query {} ({}) vs item {} ({}): {msg}",
            q.source_id, q.extractor_tag, t.source_id, t.extractor_tag
        )),
        other => other,
    }
}

fn check_dims(q: &FeatureMatrix, t: &FeatureMatrix) -> Result<()> {
    if q.num_dims() != t.num_dims() {
        return Err(Error::Shape(format!(
            "query has {} dims, item has {}",
            q.num_dims(),
            t.num_dims()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive enumeration of monotone paths; returns the minimum mean
    /// cost. Only feasible for small windows.
    fn brute_force_cost(w: &Window<'_>) -> f64 {
        fn walk(w: &Window<'_>, i: usize, j: usize, sum: f64, len: u32, best: &mut f64) {
            let sum = sum + w.get(i, j);
            let len = len + 1;
            if i + 1 == w.rows() && j + 1 == w.cols() {
                *best = best.min(sum / f64::from(len));
                return;
            }
            if i + 1 < w.rows() && j + 1 < w.cols() {
                walk(w, i + 1, j + 1, sum, len, best);
            }
            if i + 1 < w.rows() {
                walk(w, i + 1, j, sum, len, best);
            }
            if j + 1 < w.cols() {
                walk(w, i, j + 1, sum, len, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(w, 0, 0, 0.0, 0, &mut best);
        best
    }

    fn random_features(rng: &mut ChaCha8Rng, frames: usize, dims: usize) -> FeatureMatrix {
        let data = (0..frames * dims).map(|_| rng.random_range(-2.0..2.0)).collect();
        FeatureMatrix::new(data, frames, dims, 10.0, 25.0).unwrap()
    }

    fn matrix(rows: &[&[f64]]) -> DistanceMatrix {
        let cols = rows[0].len();
        DistanceMatrix::from_values(rows.iter().flat_map(|r| r.iter().copied()).collect(), rows.len(), cols).unwrap()
    }

    #[test]
    fn pooled_variance_cases() {
        let c = FeatureMatrix::new(vec![1.5; 6], 3, 2, 10.0, 25.0).unwrap();
        assert_eq!(pooled_variances(&c, &c, 1e-8).unwrap(), vec![1e-8, 1e-8]);
        let q = FeatureMatrix::new(vec![0.0], 1, 1, 10.0, 25.0).unwrap();
        let t = FeatureMatrix::new(vec![2.0], 1, 1, 10.0, 25.0).unwrap();
        assert_eq!(pooled_variances(&q, &t, 1e-8).unwrap(), vec![1.0]);
        let bad = FeatureMatrix::new(vec![0.0; 2], 1, 2, 10.0, 25.0).unwrap();
        assert!(matches!(pooled_variances(&q, &bad, 1e-8), Err(Error::Shape(_))));
    }

    #[test]
    fn pooled_variance_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = random_features(&mut rng, 5, 3);
        let t = random_features(&mut rng, 7, 3);
        let got = pooled_variances(&q, &t, 1e-8).unwrap();
        for d in 0..3 {
            let vals: Vec<f64> = (0..5)
                .map(|i| f64::from(q.get(i, d)))
                .chain((0..7).map(|i| f64::from(t.get(i, d))))
                .collect();
            let mean = vals.iter().sum::<f64>() / 12.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 12.0;
            assert!((got[d] - var).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_cases() {
        let q = FeatureMatrix::new(vec![1.0, 0.0, 2.0, 3.0], 2, 2, 10.0, 25.0).unwrap();
        let t = FeatureMatrix::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0], 3, 2, 10.0, 25.0).unwrap();
        let d = distance_matrix(&q, &t, &[1.0, 1.0]).unwrap();
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(0, 2), 0.0);
        let d = distance_matrix(&q, &t, &[4.0, 1.0]).unwrap();
        assert!((d.get(1, 1) - libm::sqrt(5.0)).abs() < 1e-15);
        assert!(matches!(distance_matrix(&q, &t, &[0.0, 1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn distance_is_symmetric_under_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_features(&mut rng, 6, 4);
        let t = random_features(&mut rng, 9, 4);
        let var = pooled_variances(&q, &t, 1e-8).unwrap();
        let a = distance_matrix(&q, &t, &var).unwrap();
        let b = distance_matrix(&t, &q, &var).unwrap();
        assert_eq!(a.transpose(), b);
    }

    #[test]
    fn range_normalize_cases() {
        let d = range_normalize(matrix(&[&[1.0, 3.0], &[5.0, 9.0]]));
        assert_eq!(d.values(), &[0.0, 0.25, 0.5, 1.0]);
        assert!(d.is_normalized());
        let d = range_normalize(matrix(&[&[2.0, 2.0], &[2.0, 2.0]]));
        assert_eq!(d.values(), &[0.0; 4]);
        let unit = matrix(&[&[0.0, 0.5], &[1.0, 0.25]]);
        assert_eq!(range_normalize(unit.clone()).values(), unit.values());
    }

    #[test]
    fn window_cost_cases() {
        let zero = matrix(&[&[0.0; 3], &[0.0; 3]]);
        assert_eq!(dtw_window_cost(&zero.view()), 0.0);
        let anti = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(dtw_window_cost(&anti.view()), 0.0);
        // a longer path with a lower mean beats the short one
        let m = matrix(&[&[0.5, 0.0, 0.0], &[1.0, 1.0, 0.0]]);
        let got = dtw_window_cost(&m.view());
        assert_eq!(got, brute_force_cost(&m.view()));
        assert_eq!(got, 0.125);
    }

    #[test]
    fn window_cost_matches_enumeration_on_random_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (r, c) = (rng.random_range(1..=5), rng.random_range(1..=5));
            let v = (0..r * c).map(|_| rng.random_range(0.0..1.0)).collect();
            let m = DistanceMatrix::from_values(v, r, c).unwrap();
            assert!((dtw_window_cost(&m.view()) - brute_force_cost(&m.view())).abs() <= 1e-12);
        }
    }

    #[test]
    fn bounded_search_prunes_only_non_improving_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut scratch = DtwScratch::default();
        for _ in 0..200 {
            let v = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
            let m = DistanceMatrix::from_values(v, 4, 4).unwrap();
            let exact = dtw_window_cost(&m.view());
            let bound = rng.random_range(0.0..1.0);
            match scratch.window_cost_below(&m.view(), bound) {
                Some(c) => assert!(c < bound && (c - exact).abs() < 1e-12),
                None => assert!(exact >= bound - 1e-12),
            }
        }
    }

    #[test]
    fn window_starts_cover_last_position() {
        let s: Vec<usize> = window_starts(10, 4, 1).collect();
        assert_eq!(s, (0..=6).collect::<Vec<_>>());
        let s: Vec<usize> = window_starts(10, 4, 4).collect();
        assert_eq!(s, vec![0, 4, 6]);
        let s: Vec<usize> = window_starts(10, 4, 3).collect();
        assert_eq!(s, vec![0, 3, 6]);
        let s: Vec<usize> = window_starts(5, 5, 2).collect();
        assert_eq!(s, vec![0]);
        assert_eq!(window_length(50, 30, 1.0), 30);
        assert_eq!(window_length(10, 30, 1.26), 13);
    }

    #[test]
    fn exact_copy_scores_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_features(&mut rng, 8, 5).with_ids("q", "rand");
        let mut rows: Vec<Vec<f32>> = random_features(&mut rng, 30, 5).frames().map(|f| f.to_vec()).collect();
        for (i, f) in q.frames().enumerate() {
            rows[12 + i] = f.to_vec();
        }
        let t = FeatureMatrix::from_rows(&rows, 10.0, 25.0).unwrap().with_ids("t", "rand");
        let s = detection_score(&q, &t, &SearchConfig::default()).unwrap();
        assert_eq!(s.score, 1.0);
        assert_eq!((s.best_window_start_frame, s.best_window_end_frame), (12, 19));
        assert_eq!((s.query_id.as_str(), s.item_id.as_str()), ("q", "t"));
    }

    #[test]
    fn equal_lengths_reduce_to_one_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_features(&mut rng, 6, 3);
        let t = random_features(&mut rng, 6, 3);
        let s = detection_score(&q, &t, &SearchConfig::default()).unwrap();
        let var = pooled_variances(&q, &t, 1e-8).unwrap();
        let d = range_normalize(distance_matrix(&q, &t, &var).unwrap());
        assert_eq!(s.score, 1.0 - dtw_window_cost(&d.view()));
        assert!(s.score > 0.0 && s.score < 1.0);
    }

    #[test]
    fn long_query_uses_whole_item() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = random_features(&mut rng, 12, 3);
        let t = random_features(&mut rng, 5, 3);
        let s = detection_score(&q, &t, &SearchConfig::default()).unwrap();
        assert_eq!((s.best_window_start_frame, s.best_window_end_frame), (0, 4));
    }

    #[test]
    fn corpus_scan_is_sorted_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let queries: Vec<_> = ["qb", "qa"]
            .iter()
            .map(|id| random_features(&mut rng, 4, 3).with_ids(*id, "r"))
            .collect();
        let items: Vec<_> = ["i3", "i1", "i2"]
            .iter()
            .map(|id| random_features(&mut rng, 10, 3).with_ids(*id, "r"))
            .collect();
        let scores = search_corpus(&queries, &items, &SearchConfig::default()).unwrap();
        assert_eq!(scores.len(), 6);
        let ids: Vec<_> = scores.iter().map(|s| (s.query_id.as_str(), s.item_id.as_str())).collect();
        assert_eq!(ids[0], ("qa", "i1"));
        assert_eq!(ids[5], ("qb", "i3"));

        let odd = random_features(&mut rng, 10, 4).with_ids("bad", "other");
        let err = search_corpus(&queries, &[odd], &SearchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Shape(ref m) if m.contains("bad") && m.contains("other")));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dtw_equals_enumeration(r in 1usize..=5, c in 1usize..=5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = (0..r * c).map(|_| rng.random_range(0.0..1.0)).collect();
            let m = DistanceMatrix::from_values(v, r, c).unwrap();
            let got = dtw_window_cost(&m.view());
            prop_assert!((got - brute_force_cost(&m.view())).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&got));
        }

        #[test]
        fn stride_one_never_loses(seed in any::<u64>(), stride in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_features(&mut rng, 5, 3);
            let t = random_features(&mut rng, 23, 3);
            let fine = detection_score(&q, &t, &SearchConfig::default()).unwrap();
            let coarse = detection_score(&q, &t, &SearchConfig { window_stride_frames: stride, ..SearchConfig::default() }).unwrap();
            prop_assert!(fine.score >= coarse.score);
            prop_assert!((0.0..=1.0).contains(&fine.score));
            prop_assert!(fine.best_window_start_frame <= fine.best_window_end_frame);
            prop_assert!(fine.best_window_end_frame < 23);
        }
    }
}
