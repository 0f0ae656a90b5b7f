//! Run configuration file.
//!
//! JSON, every key optional; omitted keys take the defaults shown:
//!
//! ```json
//! {
//!   "search": { "window_stride_frames": 1, "window_scale": 1.0, "variance_floor": 1e-8 },
//!   "eval":   { "cost_fa": 1.0, "cost_miss": 10.0, "p_target": 0.0278,
//!               "per_query_threshold": "query_optimal" },
//!   "mfcc":   { "sample_rate_hz": 8000, "frame_length_ms": 25.0, "frame_shift_ms": 10.0,
//!               "num_mel_filters": 23, "num_cepstra": 13, "low_freq_hz": 20.0,
//!               "high_freq_hz": null, "pre_emphasis": 0.97, "delta_window": 2 },
//!   "queries": null, "items": null, "out": null,
//!   "system_tag": null, "dataset_id": "default", "decimate": true
//! }
//! ```
//!
//! Relative paths are taken relative to the config file. Command-line flags
//! override the file.

use std::fs;
use std::path::{Path, PathBuf};

use qbestd_core::dtw::SearchConfig;
use qbestd_core::eval::EvalConfig;
use qbestd_core::mfcc::MfccConfig;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub search: SearchConfig,
    pub eval: EvalConfig,
    pub mfcc: MfccConfig,
    pub queries: Option<PathBuf>,
    pub items: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub system_tag: Option<String>,
    pub dataset_id: String,
    /// Halve 16 kHz audio before MFCC extraction.
    pub decimate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            eval: EvalConfig::default(),
            mfcc: MfccConfig::default(),
            queries: None,
            items: None,
            out: None,
            system_tag: None,
            dataset_id: "default".into(),
            decimate: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.queries, &mut cfg.items, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.eval.validate()?;
        self.mfcc.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.eval.cost_fa, c.eval.cost_miss, c.eval.p_target), (1.0, 10.0, 0.0278));
        assert_eq!((c.search.window_stride_frames, c.search.window_scale), (1, 1.0));
        assert!(c.decimate);
    }

    #[test]
    fn partial_sections_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(
            &path,
            r#"{"search": {"window_stride_frames": 3}, "eval": {"per_query_threshold": "global"}, "queries": "q.tsv"}"#,
        )
        .unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.search.window_stride_frames, 3);
        assert_eq!(c.search.window_scale, 1.0);
        assert_eq!(c.eval.per_query_threshold, qbestd_core::eval::PerQueryThreshold::Global);
        assert_eq!(c.queries.unwrap(), dir.path().join("q.tsv"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"serch": {}}"#).unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Json { .. })));
        fs::write(&path, r#"{"eval": {"p_target": 2.0}}"#).unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Core(_))));
    }
}
