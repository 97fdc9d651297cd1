//! Genetic algorithm over a single flat decision vector.
//!
//! Under co-design the first two genes are link lengths and the rest are
//! controller weights; under control-only every gene is a controller weight
//! and the morphology stays at the baseline.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, generation, slot)`, so a run is reproducible regardless of how
//! fitness evaluations are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::trajectory_error;
use crate::dynamics::{rollout, LinkBounds, Morphology};
use crate::experiment::Scenario;
use crate::geometry::collision_penalty;
use crate::policy::{Condition, ConditionTag, NetLayout, NeuralController, PolicyError, PolicyNet, MORPH_INPUTS};
use crate::Vec2;

/// Loss assigned to rollouts that blow up numerically.
pub const FAILED_ROLLOUT_LOSS: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("genome has {got} genes, codec expects {expected}")]
    GeneLength { expected: usize, got: usize },
    #[error("codec layout {layout} does not match condition {condition} (needs d_in = {needed})")]
    LayoutMismatch { layout: NetLayout, condition: ConditionTag, needed: usize },
    #[error("target ({}, {}) is not feasible in this scenario", .0.x, .0.y)]
    InfeasibleTarget(Vec2),
    #[error("no targets to optimise for")]
    NoTargets,
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Describes how a flat gene vector maps onto morphology and weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Codec {
    pub condition: Condition,
    /// Projection bounds for the morphology genes (co-design only).
    pub bounds: [LinkBounds; 2],
    pub layout: NetLayout,
    pub torque_limit: f64,
}

impl Codec {
    pub fn new(condition: Condition, bounds: [LinkBounds; 2], layout: NetLayout, torque_limit: f64) -> Result<Self, EvolveError> {
        let needed = condition.input_dim();
        if layout.d_in != needed {
            return Err(EvolveError::LayoutMismatch { layout, condition: condition.tag(), needed });
        }
        Ok(Codec { condition, bounds, layout, torque_limit })
    }

    /// Number of leading genes that encode morphology (0 or 2).
    pub fn morph_genes(&self) -> usize {
        match self.condition {
            Condition::ControlOnly { .. } => 0,
            Condition::CoDesign => MORPH_INPUTS,
        }
    }

    pub fn gene_len(&self) -> usize {
        self.morph_genes() + self.layout.param_count()
    }

    pub fn tag(&self) -> ConditionTag {
        self.condition.tag()
    }

    /// Morphology encoded by `genes`, projected into bounds.
    pub fn morphology(&self, genes: &[f64]) -> Morphology {
        match self.condition {
            Condition::ControlOnly { baseline } => baseline,
            Condition::CoDesign => project_morphology([genes[0], genes[1]], self.bounds),
        }
    }

    pub fn decode(&self, genes: &[f64]) -> Result<(Morphology, PolicyNet), EvolveError> {
        if genes.len() != self.gene_len() {
            return Err(EvolveError::GeneLength { expected: self.gene_len(), got: genes.len() });
        }
        let morph = self.morphology(genes);
        let net = PolicyNet::new(self.layout, genes[self.morph_genes()..].to_vec(), self.torque_limit)?;
        Ok((morph, net))
    }

    pub fn encode(&self, morph: &Morphology, net: &PolicyNet) -> Result<Genome, EvolveError> {
        let mut genes = Vec::with_capacity(self.gene_len());
        if self.morph_genes() > 0 {
            genes.extend_from_slice(&morph.lengths());
        }
        genes.extend_from_slice(net.weights());
        Genome::new(*self, genes)
    }
}

/// Component-wise clamp of raw link lengths into their bounds.
pub fn project_morphology(raw: [f64; 2], bounds: [LinkBounds; 2]) -> Morphology {
    Morphology::projected(raw, bounds)
}

/// A gene vector together with the codec that interprets it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub codec: Codec,
    pub genes: Vec<f64>,
}

impl Genome {
    pub fn new(codec: Codec, genes: Vec<f64>) -> Result<Self, EvolveError> {
        if genes.len() != codec.gene_len() {
            return Err(EvolveError::GeneLength { expected: codec.gene_len(), got: genes.len() });
        }
        Ok(Genome { codec, genes })
    }

    pub fn decode(&self) -> Result<(Morphology, PolicyNet), EvolveError> {
        self.codec.decode(&self.genes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    /// Per-gene probability of a Gaussian perturbation.
    pub mutation_rate: f64,
    pub mutation_sigma_ctrl: f64,
    pub mutation_sigma_morph: f64,
    /// Standard deviation of the initial controller weights.
    pub init_sigma_ctrl: f64,
    pub elitism: usize,
    /// Seed of the run. Batch runs derive it per work item, so it is not read from configs.
    #[serde(skip)]
    pub seed: u64,
    /// Weight of an `l1 + l2` penalty added to the fitness.
    pub length_sum_weight: Option<f64>,
    /// Per-generation bound on how far a child's link lengths may move from its first parent's, m.
    pub morph_step_limit: Option<f64>,
    /// Evaluate fitness on the rayon pool; results are identical either way.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 64,
            generations: 120,
            tournament_k: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma_ctrl: 0.1,
            mutation_sigma_morph: 0.01,
            init_sigma_ctrl: 0.5,
            elitism: 2,
            seed: 0,
            length_sum_weight: None,
            morph_step_limit: None,
            parallel: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: String| Err(EvolveError::InvalidConfig(m));
        if self.population < 2 {
            return bad(format!("population must be >= 2, got {}", self.population));
        }
        if self.elitism >= self.population {
            return bad(format!("elitism {} must be < population {}", self.elitism, self.population));
        }
        if self.tournament_k == 0 {
            return bad("tournament_k must be >= 1".into());
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (name, s) in [
            ("mutation_sigma_ctrl", self.mutation_sigma_ctrl),
            ("mutation_sigma_morph", self.mutation_sigma_morph),
            ("init_sigma_ctrl", self.init_sigma_ctrl),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {s}"));
            }
        }
        if let Some(w) = self.length_sum_weight {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("length_sum_weight must be finite and >= 0, got {w}"));
            }
        }
        if let Some(r) = self.morph_step_limit {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("morph_step_limit must be finite and >= 0, got {r}"));
            }
        }
        Ok(())
    }
}

/// Anything that scores a gene vector; lower is better.
pub trait Objective: Sync {
    fn loss(&self, genes: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn loss(&self, genes: &[f64]) -> f64 {
        self(genes)
    }
}

/// `‖genes‖²`, a smooth test objective with its minimum at the origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticSurrogate;

impl Objective for QuadraticSurrogate {
    fn loss(&self, genes: &[f64]) -> f64 {
        genes.iter().map(|g| g * g).sum()
    }
}

/// Components of the reaching fitness for one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessBreakdown {
    pub task: f64,
    pub collision: f64,
    pub regularizer: f64,
    pub total: f64,
}

/// Reaching loss: mean squared tracking error plus weighted collision cost
/// plus the optional link-length-sum penalty, averaged over the targets.
#[derive(Debug, Clone)]
pub struct ReachingObjective<'a> {
    codec: Codec,
    scenario: &'a Scenario,
    targets: Vec<Vec2>,
    length_sum_weight: Option<f64>,
}

impl<'a> ReachingObjective<'a> {
    pub fn new(codec: Codec, scenario: &'a Scenario, targets: Vec<Vec2>, length_sum_weight: Option<f64>) -> Result<Self, EvolveError> {
        if targets.is_empty() {
            return Err(EvolveError::NoTargets);
        }
        if let Some(t) = targets.iter().find(|t| !scenario.target_is_feasible(**t)) {
            return Err(EvolveError::InfeasibleTarget(*t));
        }
        Ok(ReachingObjective { codec, scenario, targets, length_sum_weight })
    }

    pub fn breakdown(&self, genes: &[f64], target: Vec2) -> FitnessBreakdown {
        let failed = FitnessBreakdown { task: f64::NAN, collision: f64::NAN, regularizer: 0.0, total: FAILED_ROLLOUT_LOSS };
        let Ok((morph, net)) = self.codec.decode(genes) else {
            return failed;
        };
        let controller = NeuralController { net, tag: self.codec.tag() };
        let Ok(traj) = rollout(&controller, &morph, &self.scenario.episode(), target) else {
            return failed;
        };
        let task = trajectory_error(&traj, target);
        let coll = collision_penalty(&traj, &morph, &self.scenario.obstacles, &self.scenario.collision);
        let collision = self.scenario.collision.lambda_coll * coll.penalty;
        let regularizer = self.length_sum_weight.map_or(0.0, |w| w * morph.reach());
        let total = task + collision + regularizer;
        if total.is_finite() {
            FitnessBreakdown { task, collision, regularizer, total }
        } else {
            failed
        }
    }
}

impl Objective for ReachingObjective<'_> {
    fn loss(&self, genes: &[f64]) -> f64 {
        let sum: f64 = self.targets.iter().map(|t| self.breakdown(genes, *t).total).sum();
        sum / self.targets.len() as f64
    }
}

/// Fitness of `genome` on a single target.
pub fn fitness(genome: &Genome, scenario: &Scenario, target: Vec2) -> Result<f64, EvolveError> {
    genome.decode()?;
    let objective = ReachingObjective::new(genome.codec, scenario, vec![target], None)?;
    Ok(objective.loss(&genome.genes))
}

/// Per-generation record of a GA run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    /// Best fitness after each generation; entry 0 is the initial population.
    pub best_loss: Vec<f64>,
    pub best_genome: Genome,
    /// Decoded morphology of each generation's champion.
    pub champion_morphology: Vec<Morphology>,
}

impl GenerationTrace {
    pub fn final_loss(&self) -> f64 {
        *self.best_loss.last().expect("trace holds at least the initial generation")
    }
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<f64>,
    loss: Option<f64>,
}

/// Stream-keyed generator for one (generation, slot) pair.
fn slot_rng(seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

fn sanitize(loss: f64) -> f64 {
    if loss.is_nan() {
        FAILED_ROLLOUT_LOSS
    } else {
        loss.min(FAILED_ROLLOUT_LOSS)
    }
}

/// Runs the GA on an arbitrary objective.
pub fn evolve_with<O: Objective + ?Sized>(cfg: &GaConfig, codec: &Codec, objective: &O) -> Result<GenerationTrace, EvolveError> {
    cfg.validate()?;
    let n_morph = codec.morph_genes();
    let n_genes = codec.gene_len();
    let init_normal = Normal::new(0.0, cfg.init_sigma_ctrl).expect("validated sigma");

    let mut population: Vec<Individual> = (0..cfg.population)
        .map(|slot| {
            let mut rng = slot_rng(cfg.seed, 0, slot);
            let mut genes = Vec::with_capacity(n_genes);
            for b in codec.bounds.iter().take(n_morph) {
                genes.push(rng.random_range(b.min..=b.max));
            }
            genes.extend((n_morph..n_genes).map(|_| init_normal.sample(&mut rng)));
            Individual { genes, loss: None }
        })
        .collect();

    let mut best_loss = Vec::with_capacity(cfg.generations + 1);
    let mut champion_morphology = Vec::with_capacity(cfg.generations + 1);

    for generation in 0..=cfg.generations {
        evaluate(&mut population, objective, cfg.parallel);

        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| {
            let (la, lb) = (population[a].loss.unwrap(), population[b].loss.unwrap());
            la.total_cmp(&lb).then(a.cmp(&b))
        });
        let champion = &population[ranked[0]];
        best_loss.push(champion.loss.unwrap());
        champion_morphology.push(codec.morphology(&champion.genes));

        if generation == cfg.generations {
            let best_genome = Genome::new(*codec, champion.genes.clone())?;
            return Ok(GenerationTrace { best_loss, best_genome, champion_morphology });
        }

        let mut next: Vec<Individual> = ranked[..cfg.elitism].iter().map(|&i| population[i].clone()).collect();
        for slot in cfg.elitism..cfg.population {
            let mut rng = slot_rng(cfg.seed, generation + 1, slot);
            next.push(Individual { genes: offspring(cfg, codec, &population, &mut rng), loss: None });
        }
        population = next;
    }
    unreachable!("loop returns on the final generation")
}

fn evaluate<O: Objective + ?Sized>(population: &mut [Individual], objective: &O, parallel: bool) {
    let score = |ind: &mut Individual| {
        if ind.loss.is_none() {
            ind.loss = Some(sanitize(objective.loss(&ind.genes)));
        }
    };
    if parallel {
        population.par_iter_mut().for_each(score);
    } else {
        population.iter_mut().for_each(score);
    }
}

fn tournament<'p>(population: &'p [Individual], k: usize, rng: &mut ChaCha8Rng) -> &'p Individual {
    let mut best = rng.random_range(0..population.len());
    for _ in 1..k {
        let c = rng.random_range(0..population.len());
        let (lc, lb) = (population[c].loss.unwrap(), population[best].loss.unwrap());
        if lc < lb || (lc == lb && c < best) {
            best = c;
        }
    }
    &population[best]
}

fn offspring(cfg: &GaConfig, codec: &Codec, population: &[Individual], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p1 = tournament(population, cfg.tournament_k, rng);
    let p2 = tournament(population, cfg.tournament_k, rng);

    let mut child = if rng.random::<f64>() < cfg.crossover_rate {
        p1.genes
            .iter()
            .zip(&p2.genes)
            .map(|(a, b)| {
                let w: f64 = rng.random_range(-0.25..=1.25);
                w * a + (1.0 - w) * b
            })
            .collect()
    } else {
        p1.genes.clone()
    };

    let n_morph = codec.morph_genes();
    for (i, g) in child.iter_mut().enumerate() {
        if rng.random::<f64>() < cfg.mutation_rate {
            let sigma = if i < n_morph { cfg.mutation_sigma_morph } else { cfg.mutation_sigma_ctrl };
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            *g += sigma * z;
        }
    }

    for ((g, parent), bounds) in child[..n_morph].iter_mut().zip(&p1.genes).zip(&codec.bounds) {
        if let Some(r) = cfg.morph_step_limit {
            *g = g.clamp(parent - r, parent + r);
        }
        *g = bounds.clamp(*g);
    }
    child
}

/// Runs the GA on the reaching fitness for one target.
pub fn evolve(cfg: &GaConfig, scenario: &Scenario, target: Vec2, codec: &Codec) -> Result<GenerationTrace, EvolveError> {
    let objective = ReachingObjective::new(*codec, scenario, vec![target], cfg.length_sum_weight)?;
    evolve_with(cfg, codec, &objective)
}
