//! One flag struct, one resolved config, and one `run` per subcommand.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use waka::attribution::{self_attribution_all, test_attribution, AttributionConfig, Method, Mode};
use waka::experiments::{
    run_minimization, run_onion, run_privacy_correlation, run_tau_sweep, write_curves, Direction, Manifest,
    MinimizationParams, MinimizationSetup, OnionRanking, Ranking,
};
use waka::mia::{Arena, GameConfig, Scorer, DEFAULT_FPR_LEVELS};
use waka::oracle::{check_equivalence, EquivalenceSpec};
use waka::{DataFormat, NeighborIndex, SyntheticKind};

use crate::config::{game_seeds, load_file, parse_metric, resolve, DataConfig, DataFlags};
use crate::CliError;

const DEFAULT_OUT: &str = "waka-out";

/// Collects outputs and writes `manifest.json` when the command finishes.
struct Run {
    out: PathBuf,
    manifest: Manifest,
    start: Instant,
}

impl Run {
    fn start(command: &str, out: &Path, config: &impl Serialize, seeds: Vec<u64>) -> Result<Self, CliError> {
        std::fs::create_dir_all(out)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
        Ok(Run {
            out: out.to_path_buf(),
            manifest: Manifest::new(command, serde_json::to_value(config)?, seeds),
            start: Instant::now(),
        })
    }

    /// Path for an output file, recorded in the manifest.
    fn output(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let path = self.output(name);
        let file = File::create(&path).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        serde_json::to_writer_pretty(BufWriter::new(file), value)?;
        Ok(())
    }

    fn finish(mut self, details: serde_json::Value) -> Result<(), CliError> {
        self.manifest.wall_clock_seconds = self.start.elapsed().as_secs_f64();
        self.manifest.details = details;
        self.manifest.write(&self.out.join("manifest.json"))?;
        eprintln!("wrote {} ({})", self.out.display(), self.manifest.outputs.join(", "));
        Ok(())
    }
}

fn parse_list<T: std::str::FromStr<Err = waka::Error>>(items: &[String]) -> Result<Vec<T>, CliError> {
    items.iter().map(|s| s.parse().map_err(CliError::from)).collect()
}

/// `self-<method>`, `test-<method>`, or a bare method (self mode).
fn parse_mode_method(s: &str) -> Result<(Mode, Method), CliError> {
    if let Some(m) = s.strip_prefix("self-") {
        Ok((Mode::SelfAttribution, m.parse()?))
    } else if let Some(m) = s.strip_prefix("test-") {
        Ok((Mode::TestAggregated, m.parse()?))
    } else {
        Ok((Mode::SelfAttribution, s.parse()?))
    }
}

// ---------------------------------------------------------------- attribute

#[derive(Args, Debug, Default, Serialize)]
pub struct AttributeFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataFlags,
    /// Neighbors used by the classifier.
    #[arg(long)]
    pub k: Option<usize>,
    /// `euclidean` or `cosine`.
    #[arg(long)]
    pub metric: Option<String>,
    /// Ranks considered around each query by the WaKA variants.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Utility threshold of the removal / addition variants.
    #[arg(long)]
    pub tau: Option<f64>,
    /// `[self-|test-]` followed by waka, waka-rem, waka-add, shapley or loo.
    #[arg(long)]
    pub method: Option<String>,
    /// Test set for test-aggregated attribution; without it a seeded share
    /// of the data is held out.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Held-out share when no --test file is given.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Seed for data generation and every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeConfig {
    #[serde(flatten)]
    pub data: DataConfig,
    pub k: usize,
    pub metric: String,
    pub horizon: usize,
    pub tau: f64,
    pub method: String,
    pub test: Option<PathBuf>,
    pub test_fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for AttributeConfig {
    fn default() -> Self {
        AttributeConfig {
            data: DataConfig::default(),
            k: 5,
            metric: "euclidean".into(),
            horizon: waka::DEFAULT_HORIZON,
            tau: waka::attribution::DEFAULT_TAU,
            method: "self-waka".into(),
            test: None,
            test_fraction: 0.2,
            seed: 0,
            out: DEFAULT_OUT.into(),
        }
    }
}

pub fn attribute(flags: &AttributeFlags, config_file: Option<&Path>) -> Result<(), CliError> {
    let cfg: AttributeConfig = resolve(flags, config_file)?;
    let (mode, method) = parse_mode_method(&cfg.method)?;
    let attribution = AttributionConfig {
        metric: parse_metric(&cfg.metric)?,
        horizon: cfg.horizon,
        tau: cfg.tau,
        seed: cfg.seed,
        ..AttributionConfig::new(cfg.k)
    };
    let data = cfg.data.load(cfg.seed)?;
    let mut run = Run::start("attribute", &cfg.out, &cfg, vec![cfg.seed])?;

    let (train, report) = match mode {
        Mode::SelfAttribution => {
            let index = NeighborIndex::build(&data, attribution.metric)?;
            let report = self_attribution_all(&data, &index, method, &attribution)?;
            (data, report)
        }
        Mode::TestAggregated => {
            let (train, test) = match &cfg.test {
                Some(path) => (data, load_file(path, cfg.data.format.as_deref())?),
                None => {
                    let mut parts =
                        data.shuffled_split(&[1.0 - cfg.test_fraction, cfg.test_fraction], cfg.seed)?;
                    let test = parts.pop().expect("two parts");
                    (parts.pop().expect("two parts"), test)
                }
            };
            let index = NeighborIndex::build(&train, attribution.metric)?;
            let report = test_attribution(&train, &index, &test, method, &attribution)?;
            (train, report)
        }
    };
    let csv = run.output("scores.csv");
    let sidecar = run.output("scores.json");
    report.write(&train, &csv, &sidecar)?;
    run.finish(json!({ "points": train.len(), "classes": train.num_classes() }))
}

// ---------------------------------------------------------------- minimize

#[derive(Args, Debug, Default, Serialize)]
pub struct MinimizeFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataFlags,
    /// Neighbors used by the classifier.
    #[arg(long)]
    pub k: Option<usize>,
    /// `euclidean` or `cosine`.
    #[arg(long)]
    pub metric: Option<String>,
    /// Ranks considered around each query by the WaKA variants.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Utility threshold of the removal / addition variants.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Rankings to compare: attribution methods and/or `random`.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// `removal`, `addition` or `both`.
    #[arg(long)]
    pub direction: Option<String>,
    /// Fractions removed (removal) or kept (addition).
    #[arg(long, value_delimiter = ',')]
    pub steps: Option<Vec<f64>>,
    /// Shuffles the train/valuation/test split and generates synthetic data.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeds of the random baseline; defaults to `[seed]`.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Share of the data used to value the training points.
    #[arg(long)]
    pub valuation_fraction: Option<f64>,
    /// Share of the data held out for the metrics.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Also sweep these thresholds for the removal / addition variants.
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeConfig {
    #[serde(flatten)]
    pub data: DataConfig,
    pub k: usize,
    pub metric: String,
    pub horizon: usize,
    pub tau: f64,
    pub methods: Vec<String>,
    pub direction: String,
    pub steps: Vec<f64>,
    pub seed: u64,
    pub seed_list: Option<Vec<u64>>,
    pub valuation_fraction: f64,
    pub test_fraction: f64,
    pub taus: Option<Vec<f64>>,
    pub out: PathBuf,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            data: DataConfig::default(),
            k: 5,
            metric: "euclidean".into(),
            horizon: waka::DEFAULT_HORIZON,
            tau: waka::attribution::DEFAULT_TAU,
            methods: ["waka-rem", "shapley", "loo", "random"].map(String::from).to_vec(),
            direction: "removal".into(),
            steps: waka::experiments::default_steps(),
            seed: 0,
            seed_list: None,
            valuation_fraction: 0.25,
            test_fraction: 0.25,
            taus: None,
            out: DEFAULT_OUT.into(),
        }
    }
}

pub fn minimize(flags: &MinimizeFlags, config_file: Option<&Path>) -> Result<(), CliError> {
    let mut cfg: MinimizeConfig = resolve(flags, config_file)?;
    let seeds = cfg.seed_list.clone().unwrap_or_else(|| vec![cfg.seed]);
    cfg.seed_list = Some(seeds.clone());
    let rankings: Vec<Ranking> = parse_list(&cfg.methods)?;
    let directions = match cfg.direction.as_str() {
        "both" => vec![Direction::Removal, Direction::Addition],
        d => vec![d.parse::<Direction>()?],
    };
    let params = MinimizationParams {
        metric: parse_metric(&cfg.metric)?,
        horizon: cfg.horizon,
        tau: cfg.tau,
        steps: cfg.steps.clone(),
        seeds: seeds.clone(),
        ..MinimizationParams::new(cfg.k)
    };
    let train_fraction = 1.0 - cfg.valuation_fraction - cfg.test_fraction;
    let data = cfg.data.load(cfg.seed)?;
    let parts = data.shuffled_split(&[train_fraction, cfg.valuation_fraction, cfg.test_fraction], cfg.seed)?;
    let setup = MinimizationSetup {
        train: &parts[0],
        valuation: &parts[1],
        test: &parts[2],
    };
    let mut run = Run::start("minimize", &cfg.out, &cfg, seeds)?;

    let mut curves = Vec::new();
    for &ranking in &rankings {
        for &direction in &directions {
            curves.push(run_minimization(&setup, ranking, direction, &params)?);
        }
    }
    let mut warnings: Vec<String> = curves
        .iter()
        .flat_map(|c| c.warnings.iter().map(move |w| format!("{} {}: {w}", c.method, c.direction.name())))
        .collect();
    write_curves(&curves, &run.output("curves.csv"))?;
    if let Some(taus) = &cfg.taus {
        let sweep = run_tau_sweep(&setup, &params, taus)?;
        sweep.write_csv(&run.output("tau_sweep.csv"))?;
        warnings.extend(sweep.warnings);
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let first = &curves[0];
    run.finish(json!({
        "train": setup.train.len(),
        "valuation": setup.valuation.len(),
        "test": setup.test.len(),
        "minority_class": first.minority_class,
        "initial_minority_ratio": first.initial_minority_ratio,
        "warnings": warnings,
    }))
}

// ---------------------------------------------------------------- games

/// Settings shared by every command that plays security games.
#[derive(Args, Debug, Default, Serialize)]
pub struct GameFlags {
    /// Neighbors used by the classifier.
    #[arg(long)]
    pub k: Option<usize>,
    /// `euclidean` or `cosine`.
    #[arg(long)]
    pub metric: Option<String>,
    /// `twaka`, `lira`, `conf`, `conf-calib`, `constant` or `random`.
    #[arg(long)]
    pub scorer: Option<String>,
    /// Number of games; defaults to the seed-list length or 48.
    #[arg(long)]
    pub games: Option<usize>,
    /// Shadow models per game for LiRA.
    #[arg(long)]
    pub shadows: Option<usize>,
    /// Evaluated points per game (half members, half not).
    #[arg(long)]
    pub eval_points: Option<usize>,
    /// Neighbors around each point used by the attack's reference set.
    #[arg(long)]
    pub neighborhood: Option<usize>,
    /// Reference models of the calibrated confidence attack.
    #[arg(long)]
    pub reference_models: Option<usize>,
    /// Generates synthetic data and derives the game seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Explicit game seeds, one per game.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// False-positive rates at which TPR is reported.
    #[arg(long, value_delimiter = ',')]
    pub fpr_levels: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GameSettings {
    pub k: usize,
    pub metric: String,
    pub scorer: String,
    pub games: Option<usize>,
    pub shadows: usize,
    pub eval_points: usize,
    pub neighborhood: usize,
    pub reference_models: usize,
    pub seed: u64,
    pub seed_list: Option<Vec<u64>>,
    pub fpr_levels: Vec<f64>,
}

impl Default for GameSettings {
    fn default() -> Self {
        GameSettings {
            k: 5,
            metric: "euclidean".into(),
            scorer: "twaka".into(),
            games: None,
            shadows: GameConfig::DEFAULT_SHADOWS,
            eval_points: GameConfig::DEFAULT_EVAL_POINTS,
            neighborhood: GameConfig::DEFAULT_NEIGHBORHOOD,
            reference_models: GameConfig::DEFAULT_SHADOWS,
            seed: 0,
            seed_list: None,
            fpr_levels: DEFAULT_FPR_LEVELS.to_vec(),
        }
    }
}

impl GameSettings {
    /// Builds the game configuration and writes the resolved game count
    /// and seeds back so the manifest records them.
    fn game_config(&mut self) -> Result<GameConfig, CliError> {
        let (games, seeds) = game_seeds(self.games, self.seed, &self.seed_list)?;
        self.games = Some(games);
        self.seed_list = Some(seeds.clone());
        let scorer: Scorer = self.scorer.parse()?;
        let config = GameConfig {
            k: self.k,
            games,
            shadows: self.shadows,
            eval_points: self.eval_points,
            neighborhood: self.neighborhood,
            reference_models: self.reference_models,
            seed_list: seeds,
            scorer,
            metric: parse_metric(&self.metric)?,
        };
        config.validate()?;
        Ok(config)
    }
}

// ---------------------------------------------------------------- attack

#[derive(Args, Debug, Default, Serialize)]
pub struct AttackFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub game: GameFlags,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    #[serde(flatten)]
    pub data: DataConfig,
    #[serde(flatten)]
    pub game: GameSettings,
    pub out: PathBuf,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            data: DataConfig::default(),
            game: GameSettings::default(),
            out: DEFAULT_OUT.into(),
        }
    }
}

#[derive(Serialize)]
struct GameSummary {
    game: usize,
    seed: u64,
    auc: f64,
    accuracy: f64,
}

pub fn attack(flags: &AttackFlags, config_file: Option<&Path>) -> Result<(), CliError> {
    let mut cfg: AttackConfig = resolve(flags, config_file)?;
    let game = cfg.game.game_config()?;
    let population = cfg.data.load(cfg.game.seed)?;
    let mut run = Run::start("attack", &cfg.out, &cfg, game.seed_list.clone())?;

    let arena = Arena::new(&population, game.clone())?;
    let batch = arena.play_all()?;
    let fpr = &cfg.game.fpr_levels;
    let mean = batch.mean_roc(fpr)?;
    let per_game = batch
        .results
        .iter()
        .map(|r| {
            Ok(GameSummary {
                game: r.game,
                seed: r.seed,
                auc: r.roc(&[])?.auc,
                accuracy: r.accuracy(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    run.write_json(
        "roc.json",
        &json!({
            "scorer": game.scorer,
            "k": game.k,
            "games": game.games,
            "auc": mean.auc,
            "tpr_at_fpr": mean.tpr_at_fpr,
            "threshold_accuracy": mean.threshold_accuracy,
            "per_game": per_game,
        }),
    )?;
    batch.write_csv(&population, &run.output("games.csv"))?;
    println!("{} k={} games={}: mean AUC {:.4}", game.scorer, game.k, game.games, mean.auc);
    for (level, tpr) in &mean.tpr_at_fpr {
        println!("  TPR @ FPR {level}: {tpr:.4}");
    }
    println!(
        "  scoring {:.3} s, total {:.3} s",
        batch.scoring_seconds, batch.total_seconds
    );
    run.finish(json!({
        "population": population.len(),
        "scoring_seconds": batch.scoring_seconds,
        "total_seconds": batch.total_seconds,
    }))
}

// ---------------------------------------------------------------- audit-onion

#[derive(Args, Debug, Default, Serialize)]
pub struct OnionFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub game: GameFlags,
    /// Share of the population removed, in [0, 0.5].
    #[arg(long)]
    pub fraction: Option<f64>,
    /// What to remove first: an attribution method (self mode), `asr`, or
    /// `random`.
    #[arg(long)]
    pub ranking: Option<String>,
    /// Equal-width ASR histogram bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OnionConfig {
    #[serde(flatten)]
    pub data: DataConfig,
    #[serde(flatten)]
    pub game: GameSettings,
    pub fraction: f64,
    pub ranking: String,
    pub bins: usize,
    pub out: PathBuf,
}

impl Default for OnionConfig {
    fn default() -> Self {
        OnionConfig {
            data: DataConfig::default(),
            game: GameSettings {
                k: 1,
                scorer: "lira".into(),
                ..GameSettings::default()
            },
            fraction: 0.1,
            ranking: "waka".into(),
            bins: 20,
            out: DEFAULT_OUT.into(),
        }
    }
}

pub fn audit_onion(flags: &OnionFlags, config_file: Option<&Path>) -> Result<(), CliError> {
    let mut cfg: OnionConfig = resolve(flags, config_file)?;
    let game = cfg.game.game_config()?;
    if cfg.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let ranking = match cfg.ranking.strip_prefix("self-").unwrap_or(&cfg.ranking).parse()? {
        OnionRanking::Random(_) => OnionRanking::Random(cfg.game.seed),
        r => r,
    };
    let population = cfg.data.load(cfg.game.seed)?;
    let mut run = Run::start("audit-onion", &cfg.out, &cfg, game.seed_list.clone())?;

    let report = run_onion(&population, &game, cfg.fraction, ranking, &cfg.game.fpr_levels)?;
    report.write_points(&population, &run.output("onion_points.csv"))?;
    report.write_histogram(&run.output("onion_histogram.csv"), cfg.bins)?;
    let summary = json!({
        "removal_fraction": report.removal_fraction,
        "ranking": report.ranking,
        "removed": report.removed.len(),
        "survivors": report.survivors.len(),
        "auc_before": report.auc_before,
        "auc_after": report.auc_after,
        "mean_asr_survivors_before": waka::stats::mean(&report.asr_before),
        "mean_asr_survivors_after": waka::stats::mean(&report.asr_after),
        "high_asr_threshold": waka::experiments::HIGH_ASR_THRESHOLD,
        "high_asr_population_before": report.high_asr_population_before,
        "high_asr_survivors_before": report.high_asr_survivors_before,
        "high_asr_survivors_after": report.high_asr_survivors_after,
        "influence_correlation": report.influence_correlation,
        "removed_ids": report.removed.iter().map(|&i| population.point_id(i)).collect::<Vec<_>>(),
    });
    run.write_json("onion.json", &summary)?;
    println!(
        "removed {} of {}: AUC {:.4} -> {:.4}; points with ASR >= {}: {} (population) -> {} (survivors)",
        report.removed.len(),
        population.len(),
        report.auc_before,
        report.auc_after,
        waka::experiments::HIGH_ASR_THRESHOLD,
        report.high_asr_population_before,
        report.high_asr_survivors_after
    );
    if let Some(s) = report.influence_correlation {
        println!("  Spearman(delta ASR, influence) = {:.4} (p = {:.3e})", s.rho, s.p_value);
    }
    run.finish(json!({ "population": population.len() }))
}

// ---------------------------------------------------------------- correlate-privacy

#[derive(Args, Debug, Default, Serialize)]
pub struct CorrelateFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataFlags,
    #[command(flatten)]
    #[serde(flatten)]
    pub game: GameFlags,
    /// Self-attribution methods correlated with per-point ASR.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelateConfig {
    #[serde(flatten)]
    pub data: DataConfig,
    #[serde(flatten)]
    pub game: GameSettings,
    pub methods: Vec<String>,
    pub out: PathBuf,
}

impl Default for CorrelateConfig {
    fn default() -> Self {
        CorrelateConfig {
            data: DataConfig::default(),
            game: GameSettings {
                scorer: "lira".into(),
                ..GameSettings::default()
            },
            methods: ["waka", "shapley", "loo"].map(String::from).to_vec(),
            out: DEFAULT_OUT.into(),
        }
    }
}

pub fn correlate_privacy(flags: &CorrelateFlags, config_file: Option<&Path>) -> Result<(), CliError> {
    let mut cfg: CorrelateConfig = resolve(flags, config_file)?;
    let game = cfg.game.game_config()?;
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .map(|m| m.strip_prefix("self-").unwrap_or(m).parse().map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let population = cfg.data.load(cfg.game.seed)?;
    let mut run = Run::start("correlate-privacy", &cfg.out, &cfg, game.seed_list.clone())?;

    let result = run_privacy_correlation(&population, &game, &methods, &cfg.game.fpr_levels)?;
    result.write_bins(&run.output("privacy_bins.csv"))?;
    result.write_points(&population, &run.output("privacy_points.csv"))?;
    let correlations: Vec<_> = result
        .correlations
        .iter()
        .map(|c| json!({ "method": c.method, "spearman": c.spearman }))
        .collect();
    run.write_json(
        "correlation.json",
        &json!({
            "mean_asr": result.asr.mean_asr(),
            "auc": result.asr.roc.auc,
            "correlations": correlations,
        }),
    )?;
    println!("mean ASR {:.4}, AUC {:.4}", result.asr.mean_asr(), result.asr.roc.auc);
    for c in &result.correlations {
        println!(
            "  {:<9} Spearman {:+.4} (p = {:.3e})",
            c.method.name(),
            c.spearman.rho,
            c.spearman.p_value
        );
    }
    run.finish(json!({
        "population": population.len(),
        "scoring_seconds": result.asr.scoring_seconds,
    }))
}

// ---------------------------------------------------------------- oracle-check

#[derive(Args, Debug, Default, Serialize)]
pub struct OracleFlags {
    /// Random instances to compare.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Smallest instance size.
    #[arg(long)]
    pub min_n: Option<usize>,
    /// Largest instance size (enumeration is exponential in it).
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Neighbor counts, cycled over the trials.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Seed for data generation and every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest accepted deviation.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also write the report and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub trials: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub k: Vec<usize>,
    pub seed: u64,
    pub tolerance: f64,
    pub out: Option<PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            trials: 200,
            min_n: 8,
            max_n: 16,
            k: vec![1, 2, 3, 5],
            seed: 0,
            tolerance: 1e-12,
            out: None,
        }
    }
}

pub fn oracle_check(flags: &OracleFlags, config_file: Option<&Path>) -> Result<(), CliError> {
    let cfg: OracleConfig = resolve(flags, config_file)?;
    let start = Instant::now();
    let report = check_equivalence(&EquivalenceSpec {
        trials: cfg.trials,
        min_n: cfg.min_n,
        max_n: cfg.max_n,
        ks: cfg.k.clone(),
        seed: cfg.seed,
    })?;
    let seconds = start.elapsed().as_secs_f64();
    println!(
        "{} trials, N in [{}, {}]: max per-bin deviation {:.3e}",
        cfg.trials, cfg.min_n, cfg.max_n, report.max_bin_deviation
    );
    for (k, trials, dev) in &report.per_k {
        println!("  k={k}: {trials} trials, max deviation {dev:.3e}");
    }
    println!(
        "  Shapley on {} trials: max deviation {:.3e}",
        report.shapley_trials, report.max_shapley_deviation
    );
    if let Some(out) = &cfg.out {
        let mut run = Run::start("oracle-check", out, &cfg, vec![cfg.seed])?;
        run.write_json("oracle.json", &report)?;
        run.finish(json!({ "check_seconds": seconds }))?;
    }
    let worst = report.max_bin_deviation.max(report.max_shapley_deviation);
    if worst > cfg.tolerance {
        return Err(CliError::Runtime(format!(
            "deviation {worst:.3e} exceeds tolerance {:.1e}",
            cfg.tolerance
        )));
    }
    println!("ok (tolerance {:.1e})", cfg.tolerance);
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Args, Debug, Default, Serialize)]
pub struct SynthFlags {
    /// `two-moons` or `gaussian-blobs`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Number of generated points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Share of generated points in class 1.
    #[arg(long)]
    pub minority_fraction: Option<f64>,
    /// Generator noise level.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Seed for data generation and every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output format: `csv` or `raw-binary`.
    #[arg(long)]
    pub format: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub synthetic: Option<String>,
    pub n: usize,
    pub minority_fraction: f64,
    pub noise: f64,
    pub seed: u64,
    pub format: String,
    pub out: PathBuf,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let data = DataConfig::default();
        SynthConfig {
            synthetic: None,
            n: data.n,
            minority_fraction: data.minority_fraction,
            noise: data.noise,
            seed: 0,
            format: "csv".into(),
            out: DEFAULT_OUT.into(),
        }
    }
}

pub fn synth(flags: &SynthFlags, config_file: Option<&Path>) -> Result<(), CliError> {
    let cfg: SynthConfig = resolve(flags, config_file)?;
    let kind: SyntheticKind = cfg
        .synthetic
        .as_deref()
        .ok_or_else(|| CliError::Usage("--synthetic is required".into()))?
        .parse()?;
    let format: DataFormat = cfg.format.parse()?;
    let data = waka::generate_synthetic(kind, cfg.n, cfg.minority_fraction, cfg.noise, cfg.seed)?;
    let mut run = Run::start("synth", &cfg.out, &cfg, vec![cfg.seed])?;
    match format {
        DataFormat::Csv => data.write_csv(&run.output("data.csv"))?,
        DataFormat::RawBinary => data.write_binary(&run.output("data.bin"))?,
    }
    run.finish(json!({ "points": data.len(), "class_counts": data.class_counts() }))
}
