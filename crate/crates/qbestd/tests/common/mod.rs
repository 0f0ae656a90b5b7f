//! Synthetic corpora shared by the integration and acceptance tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::{Path, PathBuf};

use qbestd::featio::{write_feature_file, write_manifest, ManifestEntry};
use qbestd_core::eval::GoldLabelSet;
use qbestd_core::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DIMS: usize = 39;
const RHO: f64 = 0.85;

/// Stationary standard deviation of dimension `d`; decays like cepstra.
pub fn dim_sd(d: usize) -> f64 {
    1.0 / (1.0 + d as f64 / 8.0)
}

/// Temporally smooth Gaussian frames: AR(1) per dimension with stationary
/// sd `dim_sd(d)`.
pub fn mfcc_like(rng: &mut ChaCha8Rng, frames: usize) -> Vec<Vec<f64>> {
    let innov = (1.0 - RHO * RHO).sqrt();
    let mut x: Vec<f64> = (0..DIMS).map(|d| dim_sd(d) * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        out.push(x.clone());
        for (d, v) in x.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(rng);
            *v = RHO * *v + innov * dim_sd(d) * e;
        }
    }
    out
}

/// Linear-interpolation resampling of a frame sequence to `len` frames.
pub fn stretch(frames: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    let n = frames.len();
    (0..len)
        .map(|i| {
            let pos = if len == 1 { 0.0 } else { i as f64 * (n - 1) as f64 / (len - 1) as f64 };
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let f = pos - lo as f64;
            frames[lo].iter().zip(&frames[hi]).map(|(a, b)| a + f * (b - a)).collect()
        })
        .collect()
}

pub fn to_matrix(frames: &[Vec<f64>], id: &str) -> FeatureMatrix {
    let data: Vec<f32> = frames.iter().flatten().map(|&v| v as f32).collect();
    FeatureMatrix::new(data, frames.len(), DIMS, 10.0, 25.0).unwrap().with_ids(id, "synthetic")
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub queries: usize,
    pub items: usize,
    pub query_frames: (usize, usize),
    pub item_frames: (usize, usize),
    /// Noise sd as a fraction of each dimension's sd; applied to whole items.
    pub noise: f64,
    /// Maximum relative time-stretch of the embedded query copy.
    pub stretch: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn exact(queries: usize, items: usize) -> Self {
        Self {
            queries,
            items,
            query_frames: (20, 40),
            item_frames: (80, 140),
            noise: 0.0,
            stretch: 0.0,
            seed: 7,
        }
    }

    pub fn noisy(queries: usize, items: usize) -> Self {
        Self {
            noise: 0.1,
            stretch: 0.2,
            seed: 11,
            ..Self::exact(queries, items)
        }
    }
}

pub struct Corpus {
    pub queries: Vec<FeatureMatrix>,
    pub items: Vec<FeatureMatrix>,
    /// Item index holding query `i`'s copy.
    pub host: Vec<usize>,
}

pub fn query_id(i: usize) -> String {
    format!("q{i:03}")
}

pub fn item_id(i: usize) -> String {
    format!("t{i:03}")
}

/// Query `i` is copied into item `i` (so `items >= queries`) at a random
/// offset, optionally time-stretched, and items get additive noise.
pub fn build_corpus(spec: &CorpusSpec) -> Corpus {
    assert!(spec.items >= spec.queries);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let queries: Vec<Vec<Vec<f64>>> = (0..spec.queries)
        .map(|_| {
            let n = rng.random_range(spec.query_frames.0..=spec.query_frames.1);
            mfcc_like(&mut rng, n)
        })
        .collect();
    let mut items = Vec::with_capacity(spec.items);
    for i in 0..spec.items {
        let n = rng.random_range(spec.item_frames.0..=spec.item_frames.1);
        let mut frames = mfcc_like(&mut rng, n);
        if i < spec.queries {
            let factor = 1.0 + rng.random_range(-spec.stretch..=spec.stretch);
            let len = ((queries[i].len() as f64 * factor).round() as usize).max(1);
            let copy = if len == queries[i].len() { queries[i].clone() } else { stretch(&queries[i], len) };
            assert!(copy.len() < frames.len());
            let at = rng.random_range(0..=frames.len() - copy.len());
            frames.splice(at..at + copy.len(), copy);
        }
        if spec.noise > 0.0 {
            for f in &mut frames {
                for (d, v) in f.iter_mut().enumerate() {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *v += spec.noise * dim_sd(d) * e;
                }
            }
        }
        items.push(frames);
    }
    Corpus {
        queries: queries.iter().enumerate().map(|(i, f)| to_matrix(f, &query_id(i))).collect(),
        items: items.iter().enumerate().map(|(i, f)| to_matrix(f, &item_id(i))).collect(),
        host: (0..spec.queries).collect(),
    }
}

impl Corpus {
    pub fn gold(&self) -> GoldLabelSet {
        let qids: Vec<String> = self.queries.iter().map(|q| q.source_id.clone()).collect();
        let iids: Vec<String> = self.items.iter().map(|t| t.source_id.clone()).collect();
        let mut triples = Vec::new();
        for (qi, q) in qids.iter().enumerate() {
            for (ii, t) in iids.iter().enumerate() {
                triples.push((q.as_str(), t.as_str(), self.host[qi] == ii));
            }
        }
        GoldLabelSet::from_triples(triples).unwrap()
    }

    /// Query transcription: a unique word. Item transcriptions contain the
    /// word of the query they host, between filler words.
    pub fn transcriptions(&self) -> (Vec<String>, Vec<String>) {
        let q = (0..self.queries.len()).map(|i| format!("word{i}")).collect();
        let t = (0..self.items.len())
            .map(|i| match self.host.iter().position(|&h| h == i) {
                Some(qi) => format!("some filler word{qi} more filler"),
                None => "only filler here".to_string(),
            })
            .collect();
        (q, t)
    }

    /// Writes `.qf` files and `queries.tsv` / `items.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> (PathBuf, PathBuf) {
        let (qt, tt) = self.transcriptions();
        let write_role = |mats: &[FeatureMatrix], texts: &[String], name: &str| {
            let entries: Vec<ManifestEntry> = mats
                .iter()
                .zip(texts)
                .map(|(m, text)| {
                    let file = PathBuf::from(format!("{}.qf", m.source_id));
                    write_feature_file(m, &dir.join(&file)).unwrap();
                    ManifestEntry {
                        id: m.source_id.clone(),
                        path: file,
                        transcription: text.clone(),
                        extractor: Some("synthetic".into()),
                    }
                })
                .collect();
            let path = dir.join(name);
            write_manifest(&entries, &path).unwrap();
            path
        };
        let q = write_role(&self.queries, &qt, "queries.tsv");
        let t = write_role(&self.items, &tt, "items.tsv");
        (q, t)
    }
}
