//! Turns command-line flags into a fully resolved [`RunConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use cpshift::harness::Cadence;
use cpshift::learner::{ModelSpec, TreeConfig};
use cpshift::tabular::{Schema, ShiftScenario, TemporalSplit};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Overrides `--seeds` when set; same syntax.
pub const SEED_ENV: &str = "CPSHIFT_SEEDS";

pub const DEFAULT_SEEDS: &str = "42..91";
pub const DEFAULT_GAMMAS: [f64; 3] = [0.001, 0.01, 0.05];
pub const DEFAULT_HORIZON: usize = 11;
pub const PERMUTATION_REPEATS: usize = 5;
pub const SHAPLEY_BACKGROUND: usize = 50;
pub const SHAPLEY_ROWS: usize = 200;

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// CSV input; requires --schema.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub data: Option<PathBuf>,
    /// Synthetic scenario spec (TOML, or JSON by extension).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Column roles for --data (TOML or JSON).
    #[arg(long, requires = "data")]
    pub schema: Option<PathBuf>,
    /// First validation period; rows with earlier timestamps train.
    #[arg(long)]
    pub train_end: Option<i64>,
    /// First test period.
    #[arg(long)]
    pub val_end: Option<i64>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Inclusive range `a..b` or comma list.
    #[arg(long, default_value = DEFAULT_SEEDS)]
    pub seeds: String,
    /// `bagged_trees`, `frequency`, or a TOML/JSON model spec file.
    #[arg(long, default_value = "bagged_trees")]
    pub model: String,
    /// `permutation`, `shapley`, or a CSV of externally computed importances.
    #[arg(long, default_value = "permutation")]
    pub importance: String,
    /// Retraining cadences to compare (repeatable); all by default.
    #[arg(long, value_enum)]
    pub cadence: Vec<CadenceArg>,
    /// Evaluation periods for the retraining replay.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    pub horizon: usize,
    /// ACI step sizes (repeatable).
    #[arg(long)]
    pub gamma: Vec<f64>,
    /// Placebo split bounds; default to the real split moved back by the
    /// validation length.
    #[arg(long)]
    pub placebo_train_end: Option<i64>,
    #[arg(long)]
    pub placebo_val_end: Option<i64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Jsonl,
    Csv,
    Both,
}

impl Format {
    pub fn jsonl(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Jsonl
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CadenceArg {
    None,
    Monthly,
    Quarterly,
    Biannual,
}

impl From<CadenceArg> for Cadence {
    fn from(c: CadenceArg) -> Self {
        match c {
            CadenceArg::None => Cadence::None,
            CadenceArg::Monthly => Cadence::Monthly,
            CadenceArg::Quarterly => Cadence::Quarterly,
            CadenceArg::Biannual => Cadence::Biannual,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: String, schema: Schema },
    Scenario { spec: ShiftScenario },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImportanceChoice {
    Permutation { n_repeats: usize },
    ExactShapley { background: usize, rows: usize },
    External { path: String },
}

/// Everything a command needs, defaults filled in. The output directory is
/// left out of the serialized form so reruns into different directories
/// produce identical records.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub source: DataSource,
    pub split: TemporalSplit,
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub model: ModelSpec,
    pub importance: ImportanceChoice,
    pub cadences: Vec<Cadence>,
    pub horizon: usize,
    pub gammas: Vec<f64>,
    pub placebo_split: TemporalSplit,
    pub format: Format,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Parses `a..b` (inclusive), `a..=b`, or `a,b,c`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    let bad = || format!("invalid seed list {text:?}");
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let lo: u64 = a.trim().parse().map_err(|_| bad())?;
        let hi: u64 = b.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    let seeds = text
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    } else {
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn parse_model(text: &str) -> Result<ModelSpec, String> {
    match text {
        "bagged_trees" | "trees" => Ok(ModelSpec::BaggedTrees(TreeConfig::default())),
        "frequency" => Ok(ModelSpec::Frequency),
        path => {
            let path = Path::new(path);
            if !path.is_file() {
                return Err(format!("unknown model {text:?}"));
            }
            read_structured(path)
        }
    }
}

fn parse_importance(text: &str) -> Result<ImportanceChoice, String> {
    match text {
        "permutation" => Ok(ImportanceChoice::Permutation {
            n_repeats: PERMUTATION_REPEATS,
        }),
        "shapley" | "exact_shapley" => Ok(ImportanceChoice::ExactShapley {
            background: SHAPLEY_BACKGROUND,
            rows: SHAPLEY_ROWS,
        }),
        path if Path::new(path).is_file() => Ok(ImportanceChoice::External { path: path.to_string() }),
        _ => Err(format!("unknown importance method or missing file {text:?}")),
    }
}

impl RunConfig {
    pub fn resolve(command: &str, args: &RunArgs) -> Result<Self, String> {
        let (source, default_split) = match (&args.data, &args.scenario) {
            (Some(path), None) => {
                let schema_path = args.schema.as_ref().ok_or("--data requires --schema")?;
                let schema: Schema = read_structured(schema_path)?;
                let source = DataSource::Csv {
                    path: path.display().to_string(),
                    schema,
                };
                (source, None)
            }
            (None, Some(path)) => {
                let spec: ShiftScenario = read_structured(path)?;
                let split = spec.split();
                (DataSource::Scenario { spec }, Some(split))
            }
            _ => return Err("exactly one of --data or --scenario is required".into()),
        };
        let split = match (args.train_end, args.val_end, default_split) {
            (Some(t), Some(v), _) => TemporalSplit::new(t, v).map_err(|e| e.to_string())?,
            (t, v, Some(d)) => TemporalSplit::new(t.unwrap_or(d.train_end), v.unwrap_or(d.val_end))
                .map_err(|e| e.to_string())?,
            _ => return Err("--train-end and --val-end are required with --data".into()),
        };
        let width = split.val_end - split.train_end;
        let placebo_split = TemporalSplit::new(
            args.placebo_train_end.unwrap_or(split.train_end - width),
            args.placebo_val_end.unwrap_or(split.train_end),
        )
        .map_err(|e| e.to_string())?;

        if !(args.alpha > 0.0 && args.alpha < 1.0) {
            return Err(format!("alpha must lie in (0, 1), got {}", args.alpha));
        }
        let seed_text = std::env::var(SEED_ENV).unwrap_or_else(|_| args.seeds.clone());
        let seeds = parse_seeds(&seed_text)?;
        let cadences = if args.cadence.is_empty() {
            Cadence::ALL.to_vec()
        } else {
            args.cadence.iter().map(|&c| c.into()).collect()
        };
        let gammas = if args.gamma.is_empty() {
            DEFAULT_GAMMAS.to_vec()
        } else {
            args.gamma.clone()
        };
        if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(format!("gamma must be a non-negative number, got {g}"));
        }
        Ok(Self {
            command: command.to_string(),
            source,
            split,
            alpha: args.alpha,
            seeds,
            model: parse_model(&args.model)?,
            importance: parse_importance(&args.importance)?,
            cadences,
            horizon: args.horizon,
            gammas,
            placebo_split,
            format: args.format,
            out: args.out.clone(),
        })
    }

    /// Seed for single-run commands.
    pub fn first_seed(&self) -> u64 {
        self.seeds[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("42..91").unwrap().len(), 50);
        assert_eq!(parse_seeds("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("5, 7").unwrap(), vec![5, 7]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn named_models() {
        assert_eq!(parse_model("frequency").unwrap(), ModelSpec::Frequency);
        assert_eq!(parse_model("bagged_trees").unwrap(), ModelSpec::default());
        assert!(parse_model("nope").is_err());
    }
}
