//! One function per subcommand. Each computes everything first and returns
//! the files to write, so the output directory has a single writer.

use std::fmt::Write as _;
use std::fs::File;
use std::path::Path;

use cpshift::diagnostics::{compute_diagnostics, ShiftDiagnostics};
use cpshift::harness::{compare_aci, run_placebo, run_schedules, run_seed_ensemble, DropSummary, PlaceboResult};
use cpshift::importance::{
    exact_shapley, load_profile_csv, permutation_importance, sample_background, write_profile_csv,
    ImportanceMethod, ImportanceProfile, DEFAULT_MAX_FEATURES,
};
use cpshift::learner::Classifier;
use cpshift::report::{sentinel, write_csv_table, write_jsonl};
use cpshift::tabular::{apply_split, generate_scenario, load_table, FeatureTable};
use cpshift::verdict::{decide, Status, Verdict};
use serde::Serialize;

use crate::config::{DataSource, ImportanceChoice, RunConfig};

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl StageError {
    pub fn new(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self {
            stage,
            message: err.to_string(),
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T, E: std::fmt::Display> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|e| StageError::new(stage, e))
    }
}

/// Files produced by a command plus its verdict, if any.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub status: Option<Status>,
    pub summary: String,
}

impl Outcome {
    fn new(cfg: &RunConfig) -> Result<Self, StageError> {
        let config = serde_json::to_vec_pretty(cfg).stage("write_output")?;
        Ok(Self {
            files: vec![("config.json".into(), config)],
            status: None,
            summary: String::new(),
        })
    }

    fn jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<(), StageError> {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, records).stage("write_output")?;
        self.files.push((name.into(), buf));
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), StageError> {
        let mut buf = Vec::new();
        write_csv_table(&mut buf, header, rows).stage("write_output")?;
        self.files.push((name.into(), buf));
        Ok(())
    }

    /// Detail records in the configured format(s).
    fn detail<T: Serialize>(
        &mut self,
        cfg: &RunConfig,
        stem: &str,
        records: &[T],
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), StageError> {
        if cfg.format.jsonl() {
            self.jsonl(&format!("{stem}.jsonl"), records)?;
        }
        if cfg.format.csv() {
            self.csv(&format!("{stem}.csv"), header, rows)?;
        }
        Ok(())
    }

    /// Human-readable report echoing the resolved config.
    fn finish(mut self, cfg: &RunConfig) -> Result<Self, StageError> {
        let config = serde_json::to_string_pretty(cfg).stage("write_output")?;
        let report = format!("cpshift {}\n\nresolved config:\n{config}\n\n{}", cfg.command, self.summary);
        self.files.push(("report.txt".into(), report.into_bytes()));
        Ok(self)
    }
}

/// Writes every file into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), StageError> {
    std::fs::create_dir_all(dir).stage("write_output")?;
    for (name, bytes) in files {
        std::fs::write(dir.join(name), bytes).stage("write_output")?;
    }
    Ok(())
}

fn num(v: f64) -> String {
    sentinel::label(v)
}

fn load(cfg: &RunConfig) -> Result<FeatureTable, StageError> {
    match &cfg.source {
        DataSource::Csv { path, schema } => load_table(Path::new(path), schema).stage("load_table"),
        DataSource::Scenario { spec } => generate_scenario(spec).map(|(t, _)| t).stage("generate_scenario"),
    }
}

pub fn generate(cfg: &RunConfig) -> Result<Outcome, StageError> {
    let DataSource::Scenario { spec } = &cfg.source else {
        return Err(StageError::new("generate_scenario", "generate needs --scenario"));
    };
    let (table, split) = generate_scenario(spec).stage("generate_scenario")?;
    let mut out = Outcome::new(cfg)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv).stage("write_output")?;
    out.files.push(("data.csv".into(), csv));
    let schema = format!(
        "target = \"{}\"\ntimestamp = \"{}\"\n",
        table.target_name(),
        table.timestamp_name()
    );
    out.files.push(("schema.toml".into(), schema.into_bytes()));
    writeln!(
        out.summary,
        "rows: {}\nsplit: train_end {} val_end {}",
        table.n_rows(),
        split.train_end,
        split.val_end
    )
    .ok();
    out.finish(cfg)
}

pub fn ensemble(cfg: &RunConfig) -> Result<Outcome, StageError> {
    let table = load(cfg)?;
    let r = run_seed_ensemble(&table, &cfg.split, &cfg.model, cfg.alpha, &cfg.seeds).stage("ensemble")?;
    let mut out = Outcome::new(cfg)?;
    let s = &r.summary;
    out.csv(
        "summary.csv",
        &[
            "alpha", "n_seeds", "val_mean", "val_std", "val_median", "val_iqr", "test_mean", "test_std",
            "test_median", "test_iqr", "set_size_val_mean", "set_size_test_mean", "drop_pp", "raw_drop_pp",
        ],
        &[vec![
            num(cfg.alpha),
            r.per_seed.len().to_string(),
            num(s.val_coverage.mean),
            num(s.val_coverage.std),
            num(s.val_coverage.median),
            num(s.val_coverage.iqr),
            num(s.test_coverage.mean),
            num(s.test_coverage.std),
            num(s.test_coverage.median),
            num(s.test_coverage.iqr),
            num(s.mean_set_size_val.mean),
            num(s.mean_set_size_test.mean),
            num(r.raw_drop_pp().max(0.0)),
            num(r.raw_drop_pp()),
        ]],
    )?;
    let rows: Vec<Vec<String>> = r
        .per_seed
        .iter()
        .map(|p| {
            vec![
                p.seed.to_string(),
                num(p.val_coverage),
                num(p.test_coverage),
                num(p.mean_set_size_val),
                num(p.mean_set_size_test),
                num(p.threshold),
                p.n_cal.to_string(),
                p.n_val_eval.to_string(),
                p.n_test.to_string(),
            ]
        })
        .collect();
    out.detail(
        cfg,
        "seeds",
        &r.per_seed,
        &[
            "seed", "val_coverage", "test_coverage", "mean_set_size_val", "mean_set_size_test", "threshold",
            "n_cal", "n_val_eval", "n_test",
        ],
        &rows,
    )?;
    writeln!(
        out.summary,
        "seeds: {}\nval coverage: {:.4} (std {:.4})\ntest coverage: {:.4} (std {:.4})\ndrop: {:.2} pp",
        r.per_seed.len(),
        s.val_coverage.mean,
        s.val_coverage.std,
        s.test_coverage.mean,
        s.test_coverage.std,
        r.raw_drop_pp().max(0.0)
    )
    .ok();
    out.finish(cfg)
}

pub fn retrain(cfg: &RunConfig) -> Result<Outcome, StageError> {
    let table = load(cfg)?;
    let results =
        run_schedules(&table, &cfg.cadences, cfg.horizon, &cfg.model, cfg.alpha, cfg.first_seed()).stage("retrain")?;
    let mut out = Outcome::new(cfg)?;
    let summary_rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            let paired = r.paired_vs_baseline.as_ref();
            vec![
                r.cadence.name().to_string(),
                r.retrain_count.to_string(),
                num(r.mean),
                num(r.min),
                num(r.std),
                paired.map_or(String::new(), |p| num(p.statistic)),
                paired.map_or(String::new(), |p| num(p.p_value)),
            ]
        })
        .collect();
    out.csv(
        "schedules.csv",
        &["cadence", "retrain_count", "mean_coverage", "min_coverage", "std_coverage", "wilcoxon_w", "p_vs_none"],
        &summary_rows,
    )?;
    if cfg.format.jsonl() {
        out.jsonl("schedules.jsonl", &results)?;
    }
    #[derive(Serialize)]
    struct TraceRecord<'a> {
        cadence: &'a str,
        index: usize,
        period: i64,
        coverage: f64,
        mean_set_size: f64,
        n_eval: usize,
        retrained: bool,
    }
    let trace: Vec<TraceRecord> = results
        .iter()
        .flat_map(|r| {
            r.trace.iter().map(move |p| TraceRecord {
                cadence: r.cadence.name(),
                index: p.index,
                period: p.period,
                coverage: p.coverage,
                mean_set_size: p.mean_set_size,
                n_eval: p.n_eval,
                retrained: p.retrained,
            })
        })
        .collect();
    let rows: Vec<Vec<String>> = trace
        .iter()
        .map(|t| {
            vec![
                t.cadence.to_string(),
                t.index.to_string(),
                t.period.to_string(),
                num(t.coverage),
                num(t.mean_set_size),
                t.n_eval.to_string(),
                t.retrained.to_string(),
            ]
        })
        .collect();
    out.detail(
        cfg,
        "trace",
        &trace,
        &["cadence", "index", "period", "coverage", "mean_set_size", "n_eval", "retrained"],
        &rows,
    )?;
    for r in &results {
        writeln!(
            out.summary,
            "{:<10} retrains {:>2}  mean {:.4}  min {:.4}  std {:.4}{}",
            r.cadence.name(),
            r.retrain_count,
            r.mean,
            r.min,
            r.std,
            r.paired_vs_baseline
                .as_ref()
                .map_or(String::new(), |p| format!("  p vs NONE {:.4}", p.p_value))
        )
        .ok();
    }
    out.finish(cfg)
}

pub fn placebo(cfg: &RunConfig) -> Result<Outcome, StageError> {
    let table = load(cfg)?;
    let r = run_placebo(&table, &cfg.placebo_split, &cfg.split, &cfg.model, cfg.alpha, &cfg.seeds).stage("placebo")?;
    let mut out = Outcome::new(cfg)?;
    let row = |name: &str, d: &DropSummary| {
        vec![
            name.to_string(),
            d.split.train_end.to_string(),
            d.split.val_end.to_string(),
            num(d.val_mean),
            num(d.test_mean),
            num(d.drop_pp),
            num(d.raw_drop_pp),
        ]
    };
    out.csv(
        "placebo.csv",
        &["run", "train_end", "val_end", "val_mean", "test_mean", "drop_pp", "raw_drop_pp"],
        &[row("placebo", &r.placebo), row("shift", &r.shift)],
    )?;
    out.csv("ratio.csv", &["placebo_over_shift"], &[vec![num(r.ratio)]])?;
    if cfg.format.jsonl() {
        out.jsonl("placebo.jsonl", std::slice::from_ref(&PlaceboRecord::from(&r)))?;
    }
    writeln!(
        out.summary,
        "placebo drop: {:.2} pp\nshift drop: {:.2} pp\nplacebo / shift: {}",
        r.placebo.drop_pp,
        r.shift.drop_pp,
        num(r.ratio)
    )
    .ok();
    out.finish(cfg)
}

#[derive(Serialize)]
struct PlaceboRecord<'a> {
    placebo: &'a DropSummary,
    shift: &'a DropSummary,
    #[serde(with = "sentinel")]
    ratio: f64,
}

impl<'a> From<&'a PlaceboResult> for PlaceboRecord<'a> {
    fn from(r: &'a PlaceboResult) -> Self {
        Self {
            placebo: &r.placebo,
            shift: &r.shift,
            ratio: r.ratio,
        }
    }
}

pub fn aci(cfg: &RunConfig) -> Result<Outcome, StageError> {
    let table = load(cfg)?;
    let rows = compare_aci(&table, &cfg.split, &cfg.model, cfg.alpha, &cfg.gammas, cfg.first_seed()).stage("aci")?;
    let mut out = Outcome::new(cfg)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), num);
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                opt(r.gamma),
                num(r.coverage),
                num(r.mean_set_size),
                r.n_eval.to_string(),
                opt(r.final_alpha),
            ]
        })
        .collect();
    out.csv(
        "aci.csv",
        &["method", "gamma", "coverage", "mean_set_size", "n_eval", "final_alpha"],
        &cells,
    )?;
    if cfg.format.jsonl() {
        out.jsonl("aci.jsonl", &rows)?;
    }
    for r in &rows {
        writeln!(
            out.summary,
            "{:<6} gamma {:<6} coverage {:.4}  set size {:.2}",
            r.method,
            opt(r.gamma),
            r.coverage,
            r.mean_set_size
        )
        .ok();
    }
    out.finish(cfg)
}

fn importance(
    cfg: &RunConfig,
    model: &dyn Classifier,
    train: &FeatureTable,
    val: &FeatureTable,
) -> Result<ImportanceProfile, StageError> {
    let seed = cfg.first_seed();
    match &cfg.importance {
        ImportanceChoice::Permutation { n_repeats } => {
            Ok(permutation_importance(model, val, *n_repeats, seed).stage("importance")?.with_split_tag("val"))
        }
        ImportanceChoice::ExactShapley { background, rows } => {
            let bg = sample_background(train, *background, seed);
            let take: Vec<usize> = (0..val.n_rows().min(*rows)).collect();
            let r = exact_shapley(model, &val.take(&take), &bg, DEFAULT_MAX_FEATURES).stage("importance")?;
            Ok(r.profile.with_split_tag("val"))
        }
        ImportanceChoice::External { path } => {
            let file = File::open(path).stage("importance")?;
            load_profile_csv(file, ImportanceMethod::External, "external").stage("importance")
        }
    }
}

#[derive(Serialize)]
struct DiagnoseRecord<'a> {
    diagnostics: &'a ShiftDiagnostics,
    verdict: &'a Verdict,
}

pub fn diagnose(cfg: &RunConfig) -> Result<Outcome, StageError> {
    let table = load(cfg)?;
    let (train, val, test) = apply_split(&table, &cfg.split).stage("split")?;
    let model = cfg.model.fit(&train, cfg.first_seed()).stage("fit_model")?;
    let profile = importance(cfg, model.as_ref(), &train, &val)?;
    let ensemble = run_seed_ensemble(&table, &cfg.split, &cfg.model, cfg.alpha, &cfg.seeds).stage("ensemble")?;
    let test_cov: Vec<f64> = ensemble.per_seed.iter().map(|r| r.test_coverage).collect();
    let diag = compute_diagnostics(&train, &test, &profile, Some(&test_cov)).stage("diagnostics")?;
    let verdict = decide(&diag).stage("verdict")?;

    let mut out = Outcome::new(cfg)?;
    out.jsonl(
        "diagnosis.jsonl",
        &[DiagnoseRecord {
            diagnostics: &diag,
            verdict: &verdict,
        }],
    )?;
    let mut imp = Vec::new();
    write_profile_csv(&mut imp, &profile).stage("write_output")?;
    out.files.push(("importance.csv".into(), imp));
    let jaccard_rows: Vec<Vec<String>> = diag
        .per_feature_jaccard
        .iter()
        .map(|(f, j)| {
            vec![
                f.clone(),
                num(*j),
                num(diag.importance_shares.get(f).copied().unwrap_or(0.0)),
            ]
        })
        .collect();
    out.csv("features.csv", &["feature", "jaccard", "importance_share"], &jaccard_rows)?;
    let status = json_name(&verdict.status);
    writeln!(out.summary, "verdict: {status}").ok();
    writeln!(out.summary, "recommendation: {}", json_name(&verdict.recommendation)).ok();
    for r in &verdict.triggered_rules {
        writeln!(out.summary, "  rule {}: {} {} {}", r.rule, num(r.observed), r.comparison, num(r.threshold)).ok();
    }
    for n in &verdict.notes {
        writeln!(out.summary, "  note: {n}").ok();
    }
    writeln!(
        out.summary,
        "label entropy: {:.4} bits\ntop class share: {:.4}\nmean top-5 Jaccard: {:.4}\nconcentration: {:.4}\nprimary feature: {} (Jaccard {})\nmean test coverage over {} seeds: {:.4}",
        diag.label_entropy_bits,
        diag.top_class_share,
        diag.mean_top5_jaccard,
        diag.concentration,
        diag.primary_feature,
        num(diag.primary_feature_jaccard),
        test_cov.len(),
        ensemble.summary.test_coverage.mean,
    )
    .ok();
    out.status = Some(verdict.status);
    out.finish(cfg)
}

fn json_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::from("?"),
    }
}
