//! Evaluation reports: JSON for machines, CSV summaries laid out like the
//! usual "mean (sd), t, p" comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qbestd_core::eval::{paired_t_test_one_sided, EvalConfig, MtwvResult, PerQueryThreshold, TwvPoint};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const TRIAL_DEFINITION: &str = "Trials are item-level: each (query, item) pair is one trial, labelled true when \
the query's words occur contiguously in the item's transcription. P_miss is taken per query over target items and \
P_fa per query over non-target items (not over speech duration); both are averaged without weighting over queries \
with at least one target item. MTWV is clamped at 0, the value of returning nothing.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemResult {
    pub system: String,
    pub dataset: String,
    pub n_queries: usize,
    pub mtwv: f64,
    pub optimal_threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
    pub beta: f64,
    pub cost_fa: f64,
    pub cost_miss: f64,
    pub p_target: f64,
    pub per_query_threshold: PerQueryThreshold,
    pub per_query_mtwv: BTreeMap<String, f64>,
    pub excluded_queries: Vec<String>,
    pub curve: Vec<TwvPoint>,
}

impl SystemResult {
    pub fn new(system: &str, dataset: &str, cfg: &EvalConfig, r: &MtwvResult) -> Self {
        Self {
            system: system.to_string(),
            dataset: dataset.to_string(),
            n_queries: r.per_query_mtwv.len(),
            mtwv: r.mtwv,
            optimal_threshold: r.optimal_threshold,
            p_miss: r.p_miss,
            p_fa: r.p_fa,
            beta: r.beta,
            cost_fa: cfg.cost_fa,
            cost_miss: cfg.cost_miss,
            p_target: cfg.p_target,
            per_query_threshold: r.per_query_threshold,
            per_query_mtwv: r.per_query_mtwv.iter().cloned().collect(),
            excluded_queries: r.excluded_queries.clone(),
            curve: r.curve.clone(),
        }
    }

    /// Mean and sample standard deviation of the per-query values.
    pub fn per_query_summary(&self) -> (f64, f64) {
        mean_sd(self.per_query_mtwv.values().copied())
    }
}

fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// One-sided paired t-tests between two systems, in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset: String,
    pub n_queries: usize,
    pub system_a: String,
    pub mean_a: f64,
    pub sd_a: f64,
    pub system_b: String,
    pub mean_b: f64,
    pub sd_b: f64,
    pub t_b_gt_a: f64,
    pub p_b_gt_a: f64,
    pub t_a_gt_b: f64,
    pub p_a_gt_b: f64,
    pub df: usize,
}

impl Comparison {
    /// Pairs the two systems' per-query MTWVs by query id. The query sets must
    /// match exactly.
    pub fn between(a: &SystemResult, b: &SystemResult) -> Result<Self> {
        let ka: BTreeSet<&String> = a.per_query_mtwv.keys().collect();
        let kb: BTreeSet<&String> = b.per_query_mtwv.keys().collect();
        if ka != kb {
            let only_a: Vec<&str> = ka.difference(&kb).map(|s| s.as_str()).collect();
            let only_b: Vec<&str> = kb.difference(&ka).map(|s| s.as_str()).collect();
            return Err(Error::Invalid(format!(
                "query sets differ between {} and {}: only in {}: [{}]; only in {}: [{}]",
                a.system,
                b.system,
                a.system,
                only_a.join(", "),
                b.system,
                only_b.join(", ")
            )));
        }
        let va: Vec<f64> = a.per_query_mtwv.values().copied().collect();
        let vb: Vec<f64> = b.per_query_mtwv.values().copied().collect();
        let b_gt_a = paired_t_test_one_sided(&vb, &va)?;
        let a_gt_b = paired_t_test_one_sided(&va, &vb)?;
        let (mean_a, sd_a) = a.per_query_summary();
        let (mean_b, sd_b) = b.per_query_summary();
        let dataset = if a.dataset == b.dataset {
            a.dataset.clone()
        } else {
            format!("{}|{}", a.dataset, b.dataset)
        };
        Ok(Self {
            dataset,
            n_queries: va.len(),
            system_a: a.system.clone(),
            mean_a,
            sd_a,
            system_b: b.system.clone(),
            mean_b,
            sd_b,
            t_b_gt_a: b_gt_a.t_value,
            p_b_gt_a: b_gt_a.p_value_one_sided,
            t_a_gt_b: a_gt_b.t_value,
            p_a_gt_b: a_gt_b.p_value_one_sided,
            df: b_gt_a.degrees_of_freedom,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub trial_definition: String,
    pub systems: Vec<SystemResult>,
    pub comparisons: Vec<Comparison>,
}

impl Report {
    /// Builds a report and compares every pair of systems evaluated on the
    /// same dataset, in input order.
    pub fn new(systems: Vec<SystemResult>) -> Result<Self> {
        if systems.is_empty() {
            return Err(Error::Invalid("a report needs at least one system".into()));
        }
        let mut comparisons = Vec::new();
        for (i, a) in systems.iter().enumerate() {
            for b in &systems[i + 1..] {
                if a.dataset == b.dataset {
                    comparisons.push(Comparison::between(a, b)?);
                }
            }
        }
        Ok(Self {
            trial_definition: TRIAL_DEFINITION.to_string(),
            systems,
            comparisons,
        })
    }

    pub fn system(&self, tag: &str) -> Option<&SystemResult> {
        self.systems.iter().find(|s| s.system == tag)
    }
}

fn f6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

pub const SUMMARY_HEADER: &str = "kind,system,baseline,dataset,n_queries,mtwv,mean,sd,t,p,df";

/// One `system` row per system and, per comparison, one `comparison` row per
/// direction (`system` > `baseline`).
pub fn format_summary_csv(report: &Report) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in &report.systems {
        let (mean, sd) = s.per_query_summary();
        let _ = writeln!(
            out,
            "system,{},,{},{},{},{},{},,,",
            csv_field(&s.system),
            csv_field(&s.dataset),
            s.n_queries,
            f6(s.mtwv),
            f6(mean),
            f6(sd)
        );
    }
    for c in &report.comparisons {
        let mtwv_of = |tag: &str| report.system(tag).map_or(f64::NAN, |s| s.mtwv);
        for (sys, base, mean, sd, t, p) in [
            (&c.system_b, &c.system_a, c.mean_b, c.sd_b, c.t_b_gt_a, c.p_b_gt_a),
            (&c.system_a, &c.system_b, c.mean_a, c.sd_a, c.t_a_gt_b, c.p_a_gt_b),
        ] {
            let _ = writeln!(
                out,
                "comparison,{},{},{},{},{},{},{},{},{},{}",
                csv_field(sys),
                csv_field(base),
                csv_field(&c.dataset),
                c.n_queries,
                f6(mtwv_of(sys)),
                f6(mean),
                f6(sd),
                f6(t),
                f6(p),
                c.df
            );
        }
    }
    out
}

pub const COMPARE_HEADER: &str =
    "dataset,n_queries,system_a,mean_a,sd_a,system_b,mean_b,sd_b,t_b_gt_a,p_b_gt_a,t_a_gt_b,p_a_gt_b,df";

pub fn format_compare_csv(comparisons: &[Comparison]) -> String {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    for c in comparisons {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&c.dataset),
            c.n_queries,
            csv_field(&c.system_a),
            f6(c.mean_a),
            f6(c.sd_a),
            csv_field(&c.system_b),
            f6(c.mean_b),
            f6(c.sd_b),
            f6(c.t_b_gt_a),
            f6(c.p_b_gt_a),
            f6(c.t_a_gt_b),
            f6(c.p_a_gt_b),
            c.df
        );
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report values serialize");
    s.push('\n');
    s
}

pub fn write_report(report: &Report, json_path: &Path, csv_path: &Path) -> Result<()> {
    write_text(json_path, &to_json(report))?;
    write_text(csv_path, &format_summary_csv(report))
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}
