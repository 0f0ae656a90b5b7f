//! Multi-threaded corpus scan and the scores TSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use qbestd_core::dtw::{name_pair, score_pair, sort_scores, DetectionScore, DtwScratch, SearchConfig};
use qbestd_core::FeatureMatrix;
use rayon::prelude::*;

use crate::{Error, Result};

/// Scores plus the work counters behind the throughput report.
#[derive(Debug, Clone)]
pub struct SearchReport {
    pub scores: Vec<DetectionScore>,
    pub pairs: u64,
    pub windows: u64,
    pub elapsed: Duration,
    pub workers: usize,
}

impl SearchReport {
    /// Cores that could actually run concurrently.
    pub fn effective_cores(&self) -> usize {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        self.workers.min(available).max(1)
    }

    pub fn windows_per_minute_per_core(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64().max(1e-9);
        self.windows as f64 / secs * 60.0 / self.effective_cores() as f64
    }

    pub fn pairs_per_second(&self) -> f64 {
        self.pairs as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }

    pub fn summary(&self) -> String {
        format!(
            "searched {} pairs ({} DTW windows) in {:.3} s with {} worker(s): {:.1} pairs/s, {:.0} windows/min/core",
            self.pairs,
            self.windows,
            self.elapsed.as_secs_f64(),
            self.workers,
            self.pairs_per_second(),
            self.windows_per_minute_per_core()
        )
    }
}

/// Called with (query id, queries finished, total queries).
pub type ProgressFn<'a> = &'a (dyn Fn(&str, usize, usize) + Sync);

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Scores every (query, item) pair on `workers` threads.
///
/// Pairs are independent and each is computed sequentially, so the sorted
/// result is identical for any worker count. `on_query_done` is called once
/// per query when its last item finishes, from whichever thread finished it.
pub fn search_corpus(
    queries: &[FeatureMatrix],
    items: &[FeatureMatrix],
    cfg: &SearchConfig,
    workers: usize,
    on_query_done: Option<ProgressFn<'_>>,
) -> Result<SearchReport> {
    cfg.validate()?;
    if queries.is_empty() {
        return Err(Error::Invalid("no queries".into()));
    }
    if items.is_empty() {
        return Err(Error::Invalid("no items".into()));
    }
    check_dims(queries, items)?;
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start {workers} workers: {e}")))?;

    let n_items = items.len();
    let remaining: Vec<AtomicUsize> = queries.iter().map(|_| AtomicUsize::new(n_items)).collect();
    let finished = AtomicUsize::new(0);
    let start = Instant::now();
    let results: Vec<qbestd_core::Result<(DetectionScore, u64)>> = pool.install(|| {
        (0..queries.len() * n_items)
            .into_par_iter()
            .map_init(DtwScratch::default, |scratch, pair| {
                let (q, t) = (&queries[pair / n_items], &items[pair % n_items]);
                let s = score_pair(q, t, cfg, scratch).map_err(|e| name_pair(e, q, t))?;
                if remaining[pair / n_items].fetch_sub(1, Ordering::AcqRel) == 1 {
                    let done = finished.fetch_add(1, Ordering::AcqRel) + 1;
                    if let Some(cb) = on_query_done {
                        cb(&q.source_id, done, queries.len());
                    }
                }
                Ok((
                    DetectionScore {
                        query_id: q.source_id.clone(),
                        item_id: t.source_id.clone(),
                        score: s.score,
                        best_window_start_frame: s.best_window_start_frame,
                        best_window_end_frame: s.best_window_end_frame,
                    },
                    s.windows_evaluated,
                ))
            })
            .collect()
    });
    let elapsed = start.elapsed();

    let mut scores = Vec::with_capacity(results.len());
    let mut windows = 0;
    for r in results {
        let (s, w) = r?;
        windows += w;
        scores.push(s);
    }
    sort_scores(&mut scores);
    Ok(SearchReport {
        pairs: scores.len() as u64,
        scores,
        windows,
        elapsed,
        workers,
    })
}

fn check_dims(queries: &[FeatureMatrix], items: &[FeatureMatrix]) -> Result<()> {
    let dims = queries[0].num_dims();
    let odd: Vec<&FeatureMatrix> = queries.iter().chain(items).filter(|m| m.num_dims() != dims).collect();
    if odd.is_empty() {
        return Ok(());
    }
    let mut tags: Vec<String> = queries
        .iter()
        .chain(items)
        .map(|m| format!("{} ({} dims)", m.extractor_tag, m.num_dims()))
        .collect();
    tags.sort();
    tags.dedup();
    Err(Error::Invalid(format!(
        "mixed feature dimensionalities: {}; first mismatch is {} with {} dims vs {dims}",
        tags.join(", "),
        odd[0].source_id,
        odd[0].num_dims()
    )))
}

pub const SCORES_HEADER: &str = "query\titem\tscore\tstart_frame\tend_frame";

pub fn format_scores(scores: &[DetectionScore]) -> String {
    let mut out = String::with_capacity(scores.len() * 32);
    out.push_str(SCORES_HEADER);
    out.push('\n');
    for s in scores {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{}\t{}",
            s.query_id, s.item_id, s.score, s.best_window_start_frame, s.best_window_end_frame
        );
    }
    out
}

pub fn write_scores(scores: &[DetectionScore], path: &Path) -> Result<()> {
    fs::write(path, format_scores(scores)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_scores(path: &Path) -> Result<Vec<DetectionScore>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scores(&text, path)
}

pub fn parse_scores(text: &str, path: &Path) -> Result<Vec<DetectionScore>> {
    let corrupt = |msg: String| Error::Corrupt {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim_end() == SCORES_HEADER => {}
        other => {
            return Err(corrupt(format!(
                "expected header {SCORES_HEADER:?}, found {:?}",
                other.map(|(_, h)| h)
            )))
        }
    }
    lines
        .map(|(n, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(corrupt(format!("line {}: expected 5 columns, found {}", n + 1, f.len())));
            }
            let num = |s: &str, what: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| corrupt(format!("line {}: bad {what} {s:?}", n + 1)))
            };
            let idx = |s: &str, what: &str| -> Result<usize> {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| corrupt(format!("line {}: bad {what} {s:?}", n + 1)))
            };
            Ok(DetectionScore {
                query_id: f[0].to_string(),
                item_id: f[1].to_string(),
                score: num(f[2], "score")?,
                best_window_start_frame: idx(f[3], "start frame")?,
                best_window_end_frame: idx(f[4], "end frame")?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, id: &str, frames: usize, dims: usize) -> FeatureMatrix {
        let data = (0..frames * dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureMatrix::new(data, frames, dims, 10.0, 25.0).unwrap().with_ids(id, "rand")
    }

    #[test]
    fn parallel_matches_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let qs: Vec<_> = (0..3).map(|i| random(&mut rng, &format!("q{i}"), 6, 4)).collect();
        let ts: Vec<_> = (0..5).map(|i| random(&mut rng, &format!("t{i}"), 20, 4)).collect();
        let cfg = SearchConfig::default();
        let seq = qbestd_core::dtw::search_corpus(&qs, &ts, &cfg).unwrap();
        for workers in [1, 3, 8] {
            let par = search_corpus(&qs, &ts, &cfg, workers, None).unwrap();
            assert_eq!(par.scores, seq);
            assert_eq!(par.pairs, 15);
            assert_eq!(par.windows, 15 * 15);
        }
    }

    #[test]
    fn progress_fires_once_per_query() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let qs: Vec<_> = (0..4).map(|i| random(&mut rng, &format!("q{i}"), 5, 2)).collect();
        let ts: Vec<_> = (0..3).map(|i| random(&mut rng, &format!("t{i}"), 9, 2)).collect();
        let calls = AtomicUsize::new(0);
        let cb = |_: &str, _: usize, total: usize| {
            assert_eq!(total, 4);
            calls.fetch_add(1, Ordering::SeqCst);
        };
        search_corpus(&qs, &ts, &SearchConfig::default(), 2, Some(&cb)).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn rejects_empty_and_mixed_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random(&mut rng, "q", 5, 3);
        let t = random(&mut rng, "t", 9, 3);
        let err = search_corpus(&[], std::slice::from_ref(&t), &SearchConfig::default(), 1, None).unwrap_err();
        assert_eq!(err.to_string(), "no queries");
        let odd = random(&mut rng, "w", 9, 7).with_ids("w", "ls960-t11");
        let err = search_corpus(&[q], &[t, odd], &SearchConfig::default(), 1, None).unwrap_err().to_string();
        assert!(err.contains("rand (3 dims)") && err.contains("ls960-t11 (7 dims)"), "{err}");
    }

    #[test]
    fn scores_tsv_round_trip() {
        let s = vec![DetectionScore {
            query_id: "q".into(),
            item_id: "i".into(),
            score: 0.123_456_7,
            best_window_start_frame: 3,
            best_window_end_frame: 9,
        }];
        let text = format_scores(&s);
        assert_eq!(text, "query\titem\tscore\tstart_frame\tend_frame\nq\ti\t0.123457\t3\t9\n");
        let back = parse_scores(&text, Path::new("s.tsv")).unwrap();
        assert_eq!(back[0].score, 0.123457);
        assert!(parse_scores("bad\n", Path::new("s.tsv")).is_err());
    }
}
