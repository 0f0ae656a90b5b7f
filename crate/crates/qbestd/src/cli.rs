//! The `qbestd` command line.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use qbestd_core::analysis::{average_segment_features, class_distance_matrix, classical_mds, Interval};
use qbestd_core::dtw::DetectionScore;
use qbestd_core::eval::{evaluate, make_gold, GoldLabelSet, LabeledText, PerQueryThreshold};
use qbestd_core::mfcc::extract_mfcc_with_deltas;
use qbestd_core::resample::decimate_2x;
use qbestd_core::AudioBuffer;

use crate::config::RunConfig;
use crate::featio::{
    load_features, load_manifest, read_feature_file, read_wav, validate_dataset, validate_manifest, write_feature_file,
    write_manifest, DatasetManifest, Manifest, ManifestEntry,
};
use crate::mdsout::{class_ellipses, emit_mds_outputs, MdsMetadata};
use crate::report::{format_compare_csv, read_report, write_report, write_text, Comparison, Report, SystemResult};
use crate::search::{default_workers, read_scores, search_corpus, write_scores};

#[derive(Debug, Parser)]
#[command(name = "qbestd", version, about = "Query-by-example spoken term detection: extract, search, evaluate, compare, mds")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for `search` (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory (default: config `out`, else the current directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// WAV manifest -> 39-dim MFCC feature files plus a feature manifest.
    Extract(ExtractArgs),
    /// Score every query against every item.
    Search(SearchArgs),
    /// MTWV report from one or more scores files.
    Evaluate(EvaluateArgs),
    /// One-sided paired t-tests between two reports.
    Compare(CompareArgs),
    /// MDS of labelled segments with 95% data ellipses.
    Mds(MdsArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Manifest whose paths are WAV files.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Extract 16 kHz audio at its own rate instead of decimating to 8 kHz.
    #[arg(long)]
    pub no_decimate: bool,
    /// File name of the emitted manifest (default: the input's name).
    #[arg(long)]
    pub manifest_out: Option<String>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Scores TSV path (default: OUT/scores.tsv).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub window_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Scores TSV; repeat to evaluate several systems on the same trials.
    #[arg(long, required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// System tag per scores file (default: config tag, else file stem).
    #[arg(long)]
    pub system: Vec<String>,
    /// Query manifest whose transcriptions define the gold labels.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Explicit labels (`query<TAB>item<TAB>0|1`) instead of transcriptions.
    #[arg(long, conflicts_with_all = ["queries", "items"])]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// Per-query MTWVs at the pooled optimal threshold.
    #[arg(long)]
    pub global_threshold: bool,
    /// Base name of the report files.
    #[arg(long, default_value = "report")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub report_a: PathBuf,
    pub report_b: PathBuf,
    /// System to take from report A (default: its first).
    #[arg(long)]
    pub system_a: Option<String>,
    #[arg(long)]
    pub system_b: Option<String>,
    #[arg(long, default_value = "compare")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    /// Feature manifest holding the sources named in the intervals.
    #[arg(long)]
    pub features: PathBuf,
    /// `source<TAB>label<TAB>start_ms<TAB>end_ms`; the source column may be
    /// omitted when the manifest has a single entry.
    #[arg(long)]
    pub intervals: PathBuf,
    #[arg(long, default_value = "mds")]
    pub prefix: String,
}

/// Collects warnings and errors; the exit status is nonzero iff any error
/// was recorded.
#[derive(Debug, Default)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn error(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("error: {msg}");
        self.errors.push(msg);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }

    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

struct Ctx {
    cfg: RunConfig,
    workers: usize,
    out: PathBuf,
}

impl Ctx {
    fn new(cli: &Cli) -> anyhow::Result<Self> {
        let cfg = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
        let workers = cli.workers.unwrap_or_else(default_workers);
        if workers == 0 {
            bail!("--workers must be at least 1");
        }
        Ok(Self { cfg, workers, out })
    }

    fn out_dir(&self) -> anyhow::Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("cannot create {}", self.out.display()))?;
        Ok(&self.out)
    }
}

/// Runs one command. `Ok` carries the diagnostics of a run that completed;
/// `Err` is a fatal error that stopped it.
pub fn run(cli: &Cli) -> anyhow::Result<Diagnostics> {
    let ctx = Ctx::new(cli)?;
    let mut diags = Diagnostics::default();
    match &cli.command {
        Command::Extract(a) => cmd_extract(&ctx, a, &mut diags)?,
        Command::Search(a) => cmd_search(&ctx, a, &mut diags)?,
        Command::Evaluate(a) => cmd_evaluate(&ctx, a, &mut diags)?,
        Command::Compare(a) => cmd_compare(&ctx, a)?,
        Command::Mds(a) => cmd_mds(&ctx, a, &mut diags)?,
    }
    Ok(diags)
}

fn cmd_extract(ctx: &Ctx, a: &ExtractArgs, diags: &mut Diagnostics) -> anyhow::Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let decimate = ctx.cfg.decimate && !a.no_decimate;
    let out = ctx.out_dir()?;
    let mut seen = HashSet::new();
    let mut emitted = Vec::new();
    for e in &manifest.entries {
        if e.id.is_empty() || e.id.contains(['/', '\\']) || e.id.starts_with('.') || !seen.insert(e.id.as_str()) {
            diags.error(format!("{}: unusable or duplicate id {:?}", manifest.source.display(), e.id));
            continue;
        }
        let wav = manifest.resolve(e);
        let result = read_wav(&wav)
            .map_err(anyhow::Error::from)
            .and_then(|audio| extract_one(audio, &ctx.cfg, decimate))
            .and_then(|feats| {
                let file = PathBuf::from(format!("{}.qf", e.id));
                write_feature_file(&feats.with_ids(e.id.clone(), "mfcc39"), &out.join(&file))?;
                Ok(file)
            });
        match result {
            Ok(file) => emitted.push(ManifestEntry {
                id: e.id.clone(),
                path: file,
                transcription: e.transcription.clone(),
                extractor: Some("mfcc39".into()),
            }),
            Err(err) => diags.error(format!("{} ({}): {err:#}", wav.display(), e.id)),
        }
    }
    let name = a
        .manifest_out
        .clone()
        .or_else(|| a.manifest.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "manifest.tsv".into());
    let manifest_path = out.join(name);
    if manifest_path == a.manifest {
        bail!("refusing to overwrite the input manifest {}", a.manifest.display());
    }
    write_manifest(&emitted, &manifest_path)?;
    println!(
        "extracted {} of {} files into {}; manifest {}",
        emitted.len(),
        manifest.len(),
        out.display(),
        manifest_path.display()
    );
    Ok(())
}

fn extract_one(audio: AudioBuffer, cfg: &RunConfig, decimate: bool) -> anyhow::Result<qbestd_core::FeatureMatrix> {
    let target = cfg.mfcc.sample_rate_hz;
    let rate = audio.sample_rate_hz();
    let mut mfcc = cfg.mfcc.clone();
    let audio = if rate == target {
        audio
    } else if decimate && rate == 2 * target {
        decimate_2x(&audio)?
    } else if !decimate {
        mfcc.sample_rate_hz = rate;
        audio
    } else {
        bail!("sample rate {rate} Hz cannot be brought to the configured {target} Hz");
    };
    Ok(extract_mfcc_with_deltas(&audio, &mfcc)?)
}

fn manifest_arg(flag: &Option<PathBuf>, cfg: &Option<PathBuf>, what: &str) -> anyhow::Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.clone())
        .ok_or_else(|| anyhow!("no {what} manifest: pass --{what} or set \"{what}\" in the config"))
}

fn cmd_search(ctx: &Ctx, a: &SearchArgs, diags: &mut Diagnostics) -> anyhow::Result<()> {
    let mut search = ctx.cfg.search.clone();
    if let Some(s) = a.stride {
        search.window_stride_frames = s;
    }
    if let Some(w) = a.window_scale {
        search.window_scale = w;
    }
    search.validate()?;
    let dataset = DatasetManifest {
        dataset_id: ctx.cfg.dataset_id.clone(),
        queries: load_manifest(&manifest_arg(&a.queries, &ctx.cfg.queries, "queries")?)?,
        items: load_manifest(&manifest_arg(&a.items, &ctx.cfg.items, "items")?)?,
    };
    if dataset.queries.is_empty() {
        bail!("no queries");
    }
    if dataset.items.is_empty() {
        bail!("no items");
    }
    let problems = validate_dataset(&dataset);
    if !problems.is_empty() {
        for p in &problems {
            diags.error(p.clone());
        }
        bail!("{} manifest problem(s); nothing searched", problems.len());
    }
    let queries = load_features(&dataset.queries)?;
    let items = load_features(&dataset.items)?;
    let progress = |id: &str, done: usize, total: usize| eprintln!("[{done}/{total}] query {id} done");
    let report = search_corpus(&queries, &items, &search, ctx.workers, Some(&progress))?;
    let output = match &a.output {
        Some(p) => p.clone(),
        None => ctx.out_dir()?.join("scores.tsv"),
    };
    write_scores(&report.scores, &output)?;
    println!("{}", report.summary());
    println!("wrote {}", output.display());
    Ok(())
}

fn read_gold_tsv(path: &Path) -> anyhow::Result<GoldLabelSet> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut triples = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (n == 0 && line.starts_with("query\t")) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let label = match f.as_slice() {
            [_, _, "1"] => true,
            [_, _, "0"] => false,
            _ => bail!("{}: line {}: expected query<TAB>item<TAB>0|1", path.display(), n + 1),
        };
        triples.push((f[0], f[1], label));
    }
    GoldLabelSet::from_triples(triples).with_context(|| format!("{}", path.display()))
}

fn texts(m: &Manifest) -> Vec<LabeledText> {
    m.entries.iter().map(|e| LabeledText::new(&e.id, &e.transcription)).collect()
}

/// Every gold pair must be scored exactly once, and nothing else.
fn check_coverage(scores: &[DetectionScore], gold: &GoldLabelSet, source: &Path) -> anyhow::Result<()> {
    let mut seen = HashSet::new();
    let mut unknown = Vec::new();
    for s in scores {
        if gold.label(&s.query_id, &s.item_id).is_none() {
            unknown.push(format!("({}, {})", s.query_id, s.item_id));
        } else if !seen.insert((s.query_id.as_str(), s.item_id.as_str())) {
            bail!("{}: pair ({}, {}) is scored twice", source.display(), s.query_id, s.item_id);
        }
    }
    if !unknown.is_empty() {
        bail!(
            "{}: {} scored pair(s) are not in the gold grid, first {}: {}",
            source.display(),
            unknown.len(),
            unknown.len().min(10),
            unknown[..unknown.len().min(10)].join(", ")
        );
    }
    let mut missing = Vec::new();
    let mut n_missing = 0;
    for q in gold.query_ids() {
        for i in gold.item_ids() {
            if !seen.contains(&(q.as_str(), i.as_str())) {
                n_missing += 1;
                if missing.len() < 10 {
                    missing.push(format!("({q}, {i})"));
                }
            }
        }
    }
    if n_missing > 0 {
        bail!(
            "{}: {n_missing} of {} pairs have no score, first {}: {}",
            source.display(),
            gold.len(),
            missing.len(),
            missing.join(", ")
        );
    }
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, a: &EvaluateArgs, diags: &mut Diagnostics) -> anyhow::Result<()> {
    let mut eval = ctx.cfg.eval.clone();
    if a.global_threshold {
        eval.per_query_threshold = PerQueryThreshold::Global;
    }
    eval.validate()?;
    if !a.system.is_empty() && a.system.len() != a.scores.len() {
        bail!("{} --system tags for {} --scores files", a.system.len(), a.scores.len());
    }
    let gold = match &a.gold {
        Some(p) => read_gold_tsv(p)?,
        None => {
            let queries = load_manifest(&manifest_arg(&a.queries, &ctx.cfg.queries, "queries")?)?;
            let items = load_manifest(&manifest_arg(&a.items, &ctx.cfg.items, "items")?)?;
            make_gold(&texts(&queries), &texts(&items))?
        }
    };
    for d in gold.diagnostics() {
        diags.warn(d.clone());
    }
    let dataset = a.dataset.clone().unwrap_or_else(|| ctx.cfg.dataset_id.clone());
    let mut systems = Vec::new();
    for (k, path) in a.scores.iter().enumerate() {
        let tag = a
            .system
            .get(k)
            .cloned()
            .or_else(|| if a.scores.len() == 1 { ctx.cfg.system_tag.clone() } else { None })
            .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .unwrap_or_else(|| format!("system{}", k + 1));
        let scores = read_scores(path)?;
        check_coverage(&scores, &gold, path)?;
        let result = evaluate(&scores, &gold, &eval)?;
        for q in &result.excluded_queries {
            diags.warn(format!("{tag}: query {q} occurs in no item; excluded from pooled rates"));
        }
        println!(
            "{tag}: MTWV {:.4} at threshold {:.6} (p_miss {:.4}, p_fa {:.4}, beta {:.6})",
            result.mtwv, result.optimal_threshold, result.p_miss, result.p_fa, result.beta
        );
        systems.push(SystemResult::new(&tag, &dataset, &eval, &result));
    }
    let mut tags = BTreeSet::new();
    if let Some(dup) = systems.iter().find(|s| !tags.insert(s.system.as_str())) {
        bail!("system tag {} is used twice; pass distinct --system tags", dup.system);
    }
    let report = Report::new(systems)?;
    let out = ctx.out_dir()?;
    let (json, csv) = (out.join(format!("{}.json", a.name)), out.join(format!("{}.csv", a.name)));
    write_report(&report, &json, &csv)?;
    println!("wrote {} and {}", json.display(), csv.display());
    Ok(())
}

fn pick<'r>(report: &'r Report, tag: &Option<String>, path: &Path) -> anyhow::Result<&'r SystemResult> {
    match tag {
        Some(t) => report.system(t).ok_or_else(|| {
            let have: Vec<&str> = report.systems.iter().map(|s| s.system.as_str()).collect();
            anyhow!("{}: no system {t:?} (have: {})", path.display(), have.join(", "))
        }),
        None => report.systems.first().ok_or_else(|| anyhow!("{}: report has no systems", path.display())),
    }
}

fn cmd_compare(ctx: &Ctx, a: &CompareArgs) -> anyhow::Result<()> {
    let ra = read_report(&a.report_a)?;
    let rb = read_report(&a.report_b)?;
    let sa = pick(&ra, &a.system_a, &a.report_a)?;
    let sb = pick(&rb, &a.system_b, &a.report_b)?;
    let cmp = Comparison::between(sa, sb)?;
    let csv = format_compare_csv(std::slice::from_ref(&cmp));
    let path = ctx.out_dir()?.join(format!("{}.csv", a.name));
    write_text(&path, &csv)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(())
}

/// Intervals grouped by source id, in file order.
fn read_intervals(path: &Path, single_source: Option<&str>) -> anyhow::Result<BTreeMap<String, Vec<Interval>>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out: BTreeMap<String, Vec<Interval>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (n == 0 && (line.starts_with("source\t") || line.starts_with("label\t"))) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        let (source, rest) = match f.len() {
            4 => (f[0].to_string(), &f[1..]),
            3 => match single_source {
                Some(s) => (s.to_string(), &f[..]),
                None => bail!(
                    "{}: line {}: three-column rows need a single-entry feature manifest",
                    path.display(),
                    n + 1
                ),
            },
            k => bail!("{}: line {}: expected 4 columns, found {k}", path.display(), n + 1),
        };
        let ms = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("{}: line {}: bad time {s:?}", path.display(), n + 1))
        };
        out.entry(source).or_default().push(Interval {
            label: rest[0].to_string(),
            start_ms: ms(rest[1])?,
            end_ms: ms(rest[2])?,
        });
    }
    Ok(out)
}

fn cmd_mds(ctx: &Ctx, a: &MdsArgs, diags: &mut Diagnostics) -> anyhow::Result<()> {
    let manifest = load_manifest(&a.features)?;
    let problems = validate_manifest(&manifest, "feature");
    if !problems.is_empty() {
        for p in &problems {
            diags.error(p.clone());
        }
        bail!("{} manifest problem(s)", problems.len());
    }
    let single = (manifest.len() == 1).then(|| manifest.entries[0].id.as_str());
    let by_source = read_intervals(&a.intervals, single)?;
    let mut tokens = Vec::new();
    let mut notes = Vec::new();
    for (source, intervals) in &by_source {
        let entry = manifest
            .entries
            .iter()
            .find(|e| &e.id == source)
            .ok_or_else(|| anyhow!("{}: source {source:?} is not in {}", a.intervals.display(), a.features.display()))?;
        let feats = read_feature_file(&manifest.resolve(entry))?.with_ids(entry.id.clone(), "unknown");
        let (t, d) = average_segment_features(&feats, intervals);
        for msg in d {
            diags.warn(format!("skipped: {msg}"));
            notes.push(msg);
        }
        tokens.extend(t);
    }
    let labels: Vec<String> = tokens.iter().map(|t| t.label.clone()).collect();
    let emb = classical_mds(&class_distance_matrix(&tokens)?, 2)?;
    let (ellipses, ell_notes) = class_ellipses(&labels, &emb);
    for msg in &ell_notes {
        diags.warn(msg.clone());
    }
    notes.extend(ell_notes);
    let meta = MdsMetadata::new(&labels, &emb, notes);
    let paths = emit_mds_outputs(&labels, &emb, &ellipses, &meta, &ctx.out_dir()?.join(&a.prefix))?;
    println!(
        "embedded {} tokens in {} classes (stress {:.3e}); wrote {}",
        labels.len(),
        meta.classes.len(),
        emb.stress,
        paths.svg.display()
    );
    Ok(())
}
