//! Membership-inference security games over k-NN classifiers.
//!
//! In each game the population is split in half at random; the target k-NN
//! is trained on one half. Evaluated points are drawn from both halves, the
//! target model's loss at each is revealed to the attack, and the attack
//! returns a score where larger means "member" and `0` is the boundary.

mod roc;
mod scorers;

use std::path::Path;
use std::time::Instant;

use rand::seq::{index::sample, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use roc::{level_key, mean_summary, roc_curve, roc_metrics, RocSummary, DEFAULT_FPR_LEVELS};
pub use scorers::{
    conf_score, lira_from_losses, lira_score, reference_neighborhood, self_histogram_bins,
    twaka_score, ShadowBank, TwakaTable, CALIBRATION_EPSILON, LIRA_MAX_ATTEMPTS,
};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::index::NeighborIndex;
use crate::knn::knn_mismatches;
use crate::metric::DistanceMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    Twaka,
    Lira,
    Conf,
    ConfCalib,
    /// Always 0: an uninformative baseline.
    Constant,
    /// Uniform noise in `[-1, 1)`: a chance-level baseline.
    Random,
}

impl Scorer {
    pub fn name(&self) -> &'static str {
        match self {
            Scorer::Twaka => "twaka",
            Scorer::Lira => "lira",
            Scorer::Conf => "conf",
            Scorer::ConfCalib => "conf-calib",
            Scorer::Constant => "constant",
            Scorer::Random => "random",
        }
    }
}

impl std::fmt::Display for Scorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "twaka" | "t-waka" => Ok(Scorer::Twaka),
            "lira" => Ok(Scorer::Lira),
            "conf" => Ok(Scorer::Conf),
            "conf-calib" => Ok(Scorer::ConfCalib),
            "constant" => Ok(Scorer::Constant),
            "random" => Ok(Scorer::Random),
            other => Err(Error::Argument(format!("unknown attack scorer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub k: usize,
    pub games: usize,
    pub shadows: usize,
    pub eval_points: usize,
    pub neighborhood: usize,
    /// Reference models for the calibrated confidence attack.
    pub reference_models: usize,
    pub seed_list: Vec<u64>,
    pub scorer: Scorer,
    pub metric: DistanceMetric,
}

impl GameConfig {
    pub const DEFAULT_GAMES: usize = 48;
    pub const DEFAULT_SHADOWS: usize = 16;
    pub const DEFAULT_EVAL_POINTS: usize = 100;
    pub const DEFAULT_NEIGHBORHOOD: usize = 100;

    /// Defaults with one seed per game derived from `seed`.
    pub fn new(k: usize, scorer: Scorer, seed: u64) -> Self {
        GameConfig {
            k,
            games: Self::DEFAULT_GAMES,
            shadows: Self::DEFAULT_SHADOWS,
            eval_points: Self::DEFAULT_EVAL_POINTS,
            neighborhood: Self::DEFAULT_NEIGHBORHOOD,
            reference_models: Self::DEFAULT_SHADOWS,
            seed_list: derive_seeds(seed, Self::DEFAULT_GAMES),
            scorer,
            metric: DistanceMetric::Euclidean,
        }
    }

    /// Sets the game count and re-derives the seed list from `seed`.
    pub fn with_games(mut self, games: usize, seed: u64) -> Self {
        self.games = games;
        self.seed_list = derive_seeds(seed, games);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if self.games == 0 || self.games != self.seed_list.len() {
            return Err(Error::Argument(format!(
                "{} games need exactly as many seeds (got {})",
                self.games,
                self.seed_list.len()
            )));
        }
        if self.eval_points == 0 || !self.eval_points.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "eval_points must be a positive even number, got {}",
                self.eval_points
            )));
        }
        if self.neighborhood < self.k + 1 {
            return Err(Error::Argument(format!(
                "neighborhood {} must be at least k + 1 = {}",
                self.neighborhood,
                self.k + 1
            )));
        }
        if self.scorer == Scorer::Lira && self.shadows < 2 {
            return Err(Error::Argument("LiRA needs at least two shadow models".into()));
        }
        if self.scorer == Scorer::ConfCalib && self.reference_models == 0 {
            return Err(Error::Argument("need at least one reference model".into()));
        }
        Ok(())
    }
}

/// `count` game seeds drawn from a generator seeded with `seed`.
pub fn derive_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

/// One game's transcript, restricted to the evaluated points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub game: usize,
    pub seed: u64,
    /// Population indices of the evaluated points.
    pub points: Vec<usize>,
    pub membership: Vec<bool>,
    pub scores: Vec<f64>,
    pub target_losses: Vec<f64>,
}

impl GameResult {
    pub fn roc(&self, fpr_levels: &[f64]) -> Result<RocSummary> {
        roc_metrics(&self.scores, &self.membership, fpr_levels)
    }

    /// Fraction of evaluated points where `score > 0` agrees with membership.
    pub fn accuracy(&self) -> f64 {
        let correct = self
            .scores
            .iter()
            .zip(&self.membership)
            .filter(|(s, m)| (**s > 0.0) == **m)
            .count();
        correct as f64 / self.scores.len() as f64
    }
}

/// Several games played against one population, with timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameBatch {
    pub scorer: Scorer,
    pub results: Vec<GameResult>,
    /// Wall-clock seconds spent scoring (including any shared precomputation
    /// and shadow training, excluding the target models).
    pub scoring_seconds: f64,
    pub total_seconds: f64,
}

impl GameBatch {
    pub fn mean_roc(&self, fpr_levels: &[f64]) -> Result<RocSummary> {
        let per_game = self
            .results
            .iter()
            .map(|r| r.roc(fpr_levels))
            .collect::<Result<Vec<_>>>()?;
        mean_summary(&per_game)
    }

    pub fn mean_auc(&self) -> Result<f64> {
        Ok(self.mean_roc(&[])?.auc)
    }

    /// Writes `game,point_id,member,score,target_loss`.
    pub fn write_csv(&self, population: &Dataset, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["game", "point_id", "member", "score", "target_loss"])?;
        for r in &self.results {
            for j in 0..r.points.len() {
                w.write_record([
                    r.game.to_string(),
                    population.point_id(r.points[j]),
                    u8::from(r.membership[j]).to_string(),
                    format!("{:?}", r.scores[j]),
                    format!("{:?}", r.target_losses[j]),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Population-level state shared by all games of one attack.
pub struct Arena<'a> {
    population: &'a Dataset,
    config: GameConfig,
    index: NeighborIndex,
}

impl<'a> Arena<'a> {
    pub fn new(population: &'a Dataset, config: GameConfig) -> Result<Self> {
        config.validate()?;
        if population.len() < 2 * config.k + 2 {
            return Err(Error::Argument(format!(
                "population of {} is too small for {}-NN halves",
                population.len(),
                config.k
            )));
        }
        let index = NeighborIndex::build(population, config.metric)?;
        Ok(Arena {
            population,
            config,
            index,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    /// Seeded half split: the target's training membership over the
    /// population, plus the generator state for the rest of the game.
    fn split(&self, game_seed: u64) -> (Vec<bool>, ChaCha8Rng) {
        let n = self.population.len();
        let mut rng = ChaCha8Rng::seed_from_u64(game_seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut member = vec![false; n];
        for &j in &perm[..n / 2] {
            member[j] = true;
        }
        (member, rng)
    }

    /// Balanced draw of evaluation points, members first.
    fn draw_eval(&self, member: &[bool], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        let half = self.config.eval_points / 2;
        let ins: Vec<usize> = (0..member.len()).filter(|&j| member[j]).collect();
        let outs: Vec<usize> = (0..member.len()).filter(|&j| !member[j]).collect();
        if ins.len() < half || outs.len() < half {
            return Err(Error::Argument(format!(
                "population of {} cannot supply {} members and {} non-members",
                member.len(),
                half,
                half
            )));
        }
        let mut points: Vec<usize> = sample(rng, ins.len(), half).into_iter().map(|p| ins[p]).collect();
        points.extend(sample(rng, outs.len(), half).into_iter().map(|p| outs[p]));
        Ok(points)
    }

    /// Target k-NN losses (as mismatch counts) at `points`.
    fn target_losses(&self, member: &[bool], points: &[usize]) -> Result<Vec<usize>> {
        let rows: Vec<usize> = (0..member.len()).filter(|&j| member[j]).collect();
        let train = self.population.subset(&rows);
        let index = NeighborIndex::build(&train, self.config.metric)?;
        points
            .iter()
            .map(|&z| {
                let order = index.query_sorted(self.population.point(z), self.config.k)?;
                knn_mismatches(&order, train.labels(), self.population.label(z), self.config.k)
            })
            .collect()
    }

    fn game_plans(&self, tracked: Option<&[usize]>) -> Result<Vec<GamePlan>> {
        self.config
            .seed_list
            .par_iter()
            .enumerate()
            .map(|(game, &seed)| {
                let (member, mut rng) = self.split(seed);
                let points = match tracked {
                    Some(t) => t.to_vec(),
                    None => self.draw_eval(&member, &mut rng)?,
                };
                let losses = self.target_losses(&member, &points)?;
                Ok(GamePlan {
                    game,
                    seed,
                    member,
                    points,
                    losses,
                    rng,
                })
            })
            .collect()
    }

    fn score_plans(&self, plans: Vec<GamePlan>) -> Result<(Vec<GameResult>, f64)> {
        let start = Instant::now();
        let k = self.config.k;
        let table = if self.config.scorer == Scorer::Twaka {
            let mut needed: Vec<usize> = plans.iter().flat_map(|p| p.points.iter().copied()).collect();
            needed.sort_unstable();
            needed.dedup();
            Some(TwakaTable::build(
                self.population,
                &self.index,
                k,
                self.config.neighborhood,
                &needed,
            )?)
        } else {
            None
        };
        let results = plans
            .into_par_iter()
            .map(|plan| self.score_game(plan, table.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok((results, start.elapsed().as_secs_f64()))
    }

    fn score_game(&self, plan: GamePlan, table: Option<&TwakaTable>) -> Result<GameResult> {
        let GamePlan {
            game,
            seed,
            member,
            points,
            losses,
            mut rng,
        } = plan;
        let cfg = &self.config;
        let k = cfg.k;
        let bank = if cfg.scorer == Scorer::Lira {
            Some(ShadowBank::train(self.population, cfg.metric, k, cfg.shadows, &mut rng)?)
        } else {
            None
        };
        let mut scores = Vec::with_capacity(points.len());
        for (slot, (&z, &m)) in points.iter().zip(&losses).enumerate() {
            // per-point stream so scores do not depend on evaluation order
            let mut point_rng = rng.clone();
            point_rng.set_stream(slot as u64 + 1);
            let confidence = 1.0 - m as f64 / k as f64;
            let score = match cfg.scorer {
                Scorer::Twaka => table.expect("t-WaKA table").score(z, m)?,
                Scorer::Lira => bank.as_ref().expect("shadow bank").score(self.population, z, m)?,
                Scorer::Conf | Scorer::ConfCalib => conf_score(
                    self.population,
                    &self.index,
                    z,
                    confidence,
                    k,
                    cfg.neighborhood,
                    cfg.scorer == Scorer::ConfCalib,
                    cfg.reference_models,
                    &mut point_rng,
                )?,
                Scorer::Constant => 0.0,
                Scorer::Random => point_rng.random_range(-1.0..1.0),
            };
            scores.push(score);
        }
        Ok(GameResult {
            game,
            seed,
            membership: points.iter().map(|&z| member[z]).collect(),
            target_losses: losses.iter().map(|&m| m as f64 / k as f64).collect(),
            points,
            scores,
        })
    }

    /// Plays every configured game with a balanced evaluation draw.
    pub fn play_all(&self) -> Result<GameBatch> {
        let start = Instant::now();
        let plans = self.game_plans(None)?;
        let (results, scoring_seconds) = self.score_plans(plans)?;
        Ok(GameBatch {
            scorer: self.config.scorer,
            results,
            scoring_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        })
    }

    /// Plays every configured game evaluating all of `points` each time.
    pub fn play_tracked(&self, points: &[usize]) -> Result<GameBatch> {
        if let Some(&bad) = points.iter().find(|&&p| p >= self.population.len()) {
            return Err(Error::Argument(format!(
                "tracked point {bad} outside population of {}",
                self.population.len()
            )));
        }
        let start = Instant::now();
        let plans = self.game_plans(Some(points))?;
        let (results, scoring_seconds) = self.score_plans(plans)?;
        Ok(GameBatch {
            scorer: self.config.scorer,
            results,
            scoring_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

struct GamePlan {
    game: usize,
    seed: u64,
    member: Vec<bool>,
    points: Vec<usize>,
    losses: Vec<usize>,
    rng: ChaCha8Rng,
}

/// A single security game with the given seed.
pub fn play_security_game(population: &Dataset, config: &GameConfig, game_seed: u64) -> Result<GameResult> {
    let config = GameConfig {
        games: 1,
        seed_list: vec![game_seed],
        ..config.clone()
    };
    let arena = Arena::new(population, config)?;
    let mut batch = arena.play_all()?;
    Ok(batch.results.remove(0))
}

/// Per-point attack success rates over the configured games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrReport {
    pub points: Vec<usize>,
    pub asr: Vec<f64>,
    pub games: usize,
    /// Mean over games of the ROC summary on the tracked points.
    pub roc: RocSummary,
    pub scoring_seconds: f64,
}

impl AsrReport {
    pub fn mean_asr(&self) -> f64 {
        crate::stats::mean(&self.asr)
    }
}

/// Every tracked point is evaluated in every game; its ASR is the fraction
/// of games where the decision `score > 0` matched its membership.
pub fn per_point_asr(
    population: &Dataset,
    config: &GameConfig,
    points: &[usize],
    fpr_levels: &[f64],
) -> Result<AsrReport> {
    if config.games < 2 {
        return Err(Error::Argument("per-point ASR needs at least two games".into()));
    }
    if points.is_empty() {
        return Err(Error::Argument("no points to track".into()));
    }
    let arena = Arena::new(population, config.clone())?;
    let batch = arena.play_tracked(points)?;
    let mut correct = vec![0usize; points.len()];
    let mut rocs = Vec::with_capacity(batch.results.len());
    for r in &batch.results {
        for (j, (s, m)) in r.scores.iter().zip(&r.membership).enumerate() {
            if (*s > 0.0) == *m {
                correct[j] += 1;
            }
        }
        // a game whose tracked points all fall on one side has no ROC
        if r.membership.iter().any(|&m| m) && r.membership.iter().any(|&m| !m) {
            rocs.push(r.roc(fpr_levels)?);
        }
    }
    let games = batch.results.len();
    Ok(AsrReport {
        points: points.to_vec(),
        asr: correct.iter().map(|&c| c as f64 / games as f64).collect(),
        games,
        roc: mean_summary(&rocs)?,
        scoring_seconds: batch.scoring_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SyntheticKind};

    fn moons(n: usize) -> Dataset {
        generate_synthetic(SyntheticKind::TwoMoons, n, 0.5, 0.2, 21).unwrap()
    }

    fn small_config(k: usize, scorer: Scorer) -> GameConfig {
        let mut c = GameConfig::new(k, scorer, 5).with_games(4, 5);
        c.eval_points = 40;
        c.shadows = 8;
        c.reference_models = 8;
        c
    }

    #[test]
    fn games_are_balanced_and_deterministic() {
        let pop = moons(300);
        for scorer in [Scorer::Twaka, Scorer::Lira, Scorer::Conf, Scorer::ConfCalib, Scorer::Random] {
            let cfg = small_config(3, scorer);
            let a = play_security_game(&pop, &cfg, 99).unwrap();
            let b = play_security_game(&pop, &cfg, 99).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.membership.iter().filter(|&&m| m).count(), 20);
            assert_eq!(a.points.len(), 40);
            assert!(a.scores.iter().all(|s| s.is_finite()));
        }
    }

    #[test]
    fn constant_scorer_has_chance_auc() {
        let pop = moons(200);
        let r = play_security_game(&pop, &small_config(1, Scorer::Constant), 3).unwrap();
        assert_eq!(r.roc(&[0.05]).unwrap().auc, 0.5);
    }

    #[test]
    fn members_have_zero_loss_at_k1() {
        let pop = moons(200);
        let r = play_security_game(&pop, &small_config(1, Scorer::Twaka), 8).unwrap();
        for (m, l) in r.membership.iter().zip(&r.target_losses) {
            if *m {
                assert_eq!(*l, 0.0);
            }
        }
    }

    #[test]
    fn batch_is_worker_count_invariant() {
        let pop = moons(240);
        let cfg = small_config(3, Scorer::Lira);
        let arena = Arena::new(&pop, cfg).unwrap();
        let a = arena.play_all().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| arena.play_all().unwrap());
        assert_eq!(a.results, b.results);
    }

    #[test]
    fn random_scorer_asr_near_chance() {
        let pop = moons(200);
        let mut cfg = small_config(1, Scorer::Random).with_games(48, 1);
        cfg.eval_points = 2;
        let points: Vec<usize> = (0..200).collect();
        let report = per_point_asr(&pop, &cfg, &points, &[0.05]).unwrap();
        // 200 points x 48 games: the mean of 9600 fair coins
        assert!((report.mean_asr() - 0.5).abs() < 0.03, "{}", report.mean_asr());
        assert!(report.asr.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn config_validation() {
        let mut c = GameConfig::new(1, Scorer::Lira, 0);
        assert!(c.validate().is_ok());
        c.eval_points = 3;
        assert!(c.validate().is_err());
        let mut c = GameConfig::new(1, Scorer::Lira, 0);
        c.seed_list.pop();
        assert!(c.validate().is_err());
        let mut c = GameConfig::new(5, Scorer::Twaka, 0);
        c.neighborhood = 5;
        assert!(c.validate().is_err());
        assert!(play_security_game(&moons(10), &GameConfig::new(1, Scorer::Twaka, 0), 1).is_err());
    }

    #[test]
    fn scorer_names_round_trip() {
        for s in [Scorer::Twaka, Scorer::Lira, Scorer::Conf, Scorer::ConfCalib, Scorer::Constant, Scorer::Random] {
            assert_eq!(s.name().parse::<Scorer>().unwrap(), s);
        }
    }
}
