//! Full protocol games: Reality scenarios driving the engine, regret
//! traces, and the verdict calculators for universality and the randomized
//! guarantee.
//!
//! A benchmark rule is a prediction rule constant on level-m quantizer
//! cells; unlike pool experts its values need not lie on the expert grid.
//! The harness plays a scenario against the engine, records everything a
//! later audit needs, and computes:
//!
//! - per-round Lemma 5 bound values against the rule's nearest pool expert;
//! - the analytic universality threshold `N* = ⌈(2(L²e^L + ln 1/q_K)/ε)²⌉`
//!   from the regret chain, alongside the empirical first round after which
//!   the running average regret stays within ε;
//! - for randomized runs, sampled loss paths `λ(g_n, y_n)` with
//!   `g_n ~ γ_n`, and the fraction of paths kept inside the iterated-
//!   logarithm envelope `√(2.01 L² N ln ln N)`.

pub mod scenario;

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{lemma5_bound, lemma9_gap, PredictionValue, RoundRecord, WaaEngine};
use crate::error::{Error, Result};
use crate::experts::ExpertPool;
use crate::losses::LossFunction;
use crate::measures::FiniteMeasure;
use crate::spaces::{ApproximationStructure, Signal};

pub use scenario::{
    parse_replay_csv, AdaptiveReality, RealityScenario, ScenarioKind, SignalSampler,
    WorstCaseSquare,
};

/// A prediction rule constant on the cells of `φ_level`, with arbitrary
/// values in the prediction space.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRule<V> {
    structure: ApproximationStructure,
    level: u32,
    values: Vec<V>,
}

impl<V: PredictionValue> BenchmarkRule<V> {
    /// `values[c]` is the rule's output on the `c`-th point of
    /// `image(φ_level)`.
    pub fn new(structure: &ApproximationStructure, level: u32, values: Vec<V>) -> Result<Self> {
        let cells = structure.cell_count(level)?;
        if values.len() != cells {
            return Err(Error::InvalidArgument(format!(
                "rule table has {} entries, level {level} needs {cells}",
                values.len()
            )));
        }
        Ok(Self { structure: structure.clone(), level, values })
    }

    pub fn constant(structure: &ApproximationStructure, level: u32, v: V) -> Result<Self> {
        let cells = structure.cell_count(level)?;
        Ok(Self { structure: structure.clone(), level, values: vec![v; cells] })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    /// `D(φ_level(x))`.
    pub fn value_at(&self, x: &Signal) -> Result<&V> {
        Ok(&self.values[self.structure.cell_index(self.level, x)?])
    }
}

/// Everything recorded about one deterministic (or in-expectation) run.
#[derive(Debug, Clone)]
pub struct RegretTrace<V> {
    pub scenario_name: String,
    pub structure: ApproximationStructure,
    pub rule_level: u32,
    pub loss_bound: f64,
    pub rounds: Vec<RoundRecord<V>>,
    /// `λ(D(φ_m(x_n)), y_n)` per round.
    pub rule_losses: Vec<f64>,
    pub cumulative_rule_losses: Vec<f64>,
    /// Lemma 5 bound at each `N` for the rule's nearest pool expert.
    pub lemma5_bounds: Vec<f64>,
    /// Nearest pool expert to the rule (1-based) and its worst-cell
    /// loss distance δ.
    pub nearest_expert: usize,
    pub nearest_delta: f64,
    pub nearest_prior: f64,
    pub final_learner_loss: f64,
    pub final_rule_loss: f64,
    pub final_best_expert_loss: f64,
    /// First round from which the running average regret against the rule
    /// stays within `2^{-m}` through the horizon.
    pub first_round_within_tolerance: Option<u64>,
}

impl<V: PredictionValue> RegretTrace<V> {
    pub fn horizon(&self) -> u64 {
        self.rounds.len() as u64
    }

    /// `(L_N − L_N^D)/N` at the `i`-th round (0-based).
    pub fn average_regret(&self, i: usize) -> f64 {
        (self.rounds[i].cumulative_learner_loss - self.cumulative_rule_losses[i])
            / self.rounds[i].n as f64
    }

    /// Writes the per-round CSV. Leading `#` lines carry the metadata pairs;
    /// output is byte-deterministic for identical traces.
    pub fn write_csv<W: Write>(&self, w: &mut W, metadata: &[(&str, String)]) -> io::Result<()> {
        for (k, v) in metadata {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(
            w,
            "n,x,y,gamma_repr,learner_loss,rule_loss,best_expert_loss,lemma5_bound,lemma9_gap"
        )?;
        let space = self.structure.space();
        for (i, rec) in self.rounds.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                rec.n,
                rec.x.describe(space),
                rec.y,
                rec.gamma.describe(),
                rec.learner_loss,
                self.rule_losses[i],
                rec.best_cumulative_loss,
                self.lemma5_bounds[i],
                rec.lemma9_gap
            )?;
        }
        Ok(())
    }
}

/// First index (as a 1-based round) from which every value stays `≤ eps`
/// through the end; `None` if the last value still violates.
fn stable_threshold(values: &[f64], eps: f64) -> Option<u64> {
    let mut first = None;
    for (i, v) in values.iter().enumerate().rev() {
        if *v > eps {
            break;
        }
        first = Some(i as u64 + 1);
    }
    first
}

fn finish_trace<V: PredictionValue>(
    scenario_name: String,
    pool: &ExpertPool<V>,
    loss: &LossFunction,
    rule: &BenchmarkRule<V>,
    rounds: Vec<RoundRecord<V>>,
    rule_losses: Vec<f64>,
) -> Result<RegretTrace<V>> {
    let (nearest_expert, nearest_delta) =
        pool.nearest_expert(rule.level, rule.values(), loss)?;
    let nearest_prior = pool.prior(nearest_expert)?;
    let mut cumulative_rule_losses = Vec::with_capacity(rule_losses.len());
    let mut acc = 0.0;
    for l in &rule_losses {
        acc += l;
        cumulative_rule_losses.push(acc);
    }
    let lemma5_bounds: Vec<f64> = rounds
        .iter()
        .map(|r| lemma5_bound(loss.bound, nearest_prior, r.n))
        .collect::<Result<_>>()?;
    let tolerance = 0.5f64.powi(rule.level as i32);
    let avg_regrets = rounds
        .iter()
        .zip(&cumulative_rule_losses)
        .map(|(r, cr)| (r.cumulative_learner_loss - cr) / r.n as f64)
        .collect::<Vec<_>>();
    let first_round_within_tolerance = stable_threshold(&avg_regrets, tolerance);
    let final_learner_loss = rounds.last().map_or(0.0, |r| r.cumulative_learner_loss);
    let final_rule_loss = *cumulative_rule_losses.last().unwrap_or(&0.0);
    let final_best_expert_loss = rounds.last().map_or(0.0, |r| r.best_cumulative_loss);
    Ok(RegretTrace {
        scenario_name,
        structure: pool.structure().clone(),
        rule_level: rule.level,
        loss_bound: loss.bound,
        rounds,
        rule_losses,
        cumulative_rule_losses,
        lemma5_bounds,
        nearest_expert,
        nearest_delta,
        nearest_prior,
        final_learner_loss,
        final_rule_loss,
        final_best_expert_loss,
        first_round_within_tolerance,
    })
}

/// Plays a full scenario with the engine over `pool` and benchmarks against
/// `rule`. Works for both the deterministic engine (`V = f64`, convex loss)
/// and the in-expectation randomized engine (`V = FiniteMeasure`).
pub fn run_scenario<V: PredictionValue>(
    scenario: &RealityScenario,
    pool: &ExpertPool<V>,
    loss: &LossFunction,
    rule: &BenchmarkRule<V>,
) -> Result<RegretTrace<V>> {
    let pairs = scenario.generate(pool.structure().space(), &loss.observation_space)?;
    let mut engine = WaaEngine::new(pool.clone(), loss.clone())?;
    let mut rounds = Vec::with_capacity(pairs.len());
    let mut rule_losses = Vec::with_capacity(pairs.len());
    for (x, y) in &pairs {
        engine.predict(x)?;
        rule_losses.push(rule.value_at(x)?.loss_against(loss, *y)?);
        rounds.push(engine.update(*y)?);
    }
    finish_trace(scenario.name.clone(), pool, loss, rule, rounds, rule_losses)
}

/// The deterministic protocol of the convex-loss game.
pub fn run_deterministic(
    scenario: &RealityScenario,
    pool: &ExpertPool<f64>,
    loss: &LossFunction,
    rule: &BenchmarkRule<f64>,
) -> Result<RegretTrace<f64>> {
    run_scenario(scenario, pool, loss, rule)
}

/// Plays against a perfect-information adversary who sees `γ_n` before
/// choosing `y_n`.
pub fn run_adaptive<V: PredictionValue, A: AdaptiveReality<V>>(
    adversary: &mut A,
    pool: &ExpertPool<V>,
    loss: &LossFunction,
    rule: &BenchmarkRule<V>,
    horizon: u64,
) -> Result<RegretTrace<V>> {
    let mut engine = WaaEngine::new(pool.clone(), loss.clone())?;
    let mut rounds = Vec::with_capacity(horizon as usize);
    let mut rule_losses = Vec::with_capacity(horizon as usize);
    for n in 1..=horizon {
        let x = adversary.next_signal(n);
        let gamma = engine.predict(&x)?;
        let y = adversary.observe(n, &x, &gamma);
        rule_losses.push(rule.value_at(&x)?.loss_against(loss, y)?);
        rounds.push(engine.update(y)?);
    }
    finish_trace("adaptive".into(), pool, loss, rule, rounds, rule_losses)
}

/// One sampled realization of a randomized run.
#[derive(Debug, Clone)]
pub struct SampledPath {
    pub seed: u64,
    /// `λ(g_n, y_n)` with `g_n ~ γ_n`.
    pub learner_losses: Vec<f64>,
    /// `λ(d_n, y_n)` with `d_n ~ D(φ_m(x_n))`.
    pub rule_losses: Vec<f64>,
}

impl SampledPath {
    /// `sup_{N₀ ≤ N ≤ horizon} (Σ_{n≤N} λ(g_n,y_n) − Σ_{n≤N} λ(d_n,y_n))/N`.
    pub fn sup_average_regret(&self, n0: u64) -> f64 {
        let mut cl = 0.0;
        let mut cr = 0.0;
        let mut sup = f64::NEG_INFINITY;
        for (i, (l, r)) in self.learner_losses.iter().zip(&self.rule_losses).enumerate() {
            cl += l;
            cr += r;
            let n = i as u64 + 1;
            if n >= n0 {
                sup = sup.max((cl - cr) / n as f64);
            }
        }
        sup
    }
}

/// A randomized run: the single in-expectation trace (Reality here is
/// oblivious, so the engine's play does not depend on the sampling) plus
/// independently sampled loss paths.
#[derive(Debug)]
pub struct RandomizedRun {
    pub mean: RegretTrace<FiniteMeasure>,
    pub paths: Vec<SampledPath>,
}

/// Runs the randomized protocol: one engine pass records the in-expectation
/// trace, then each seed independently draws `g_n ~ γ_n` and
/// `d_n ~ D(φ_m(x_n))`.
pub fn run_randomized(
    scenario: &RealityScenario,
    pool: &ExpertPool<FiniteMeasure>,
    loss: &LossFunction,
    rule: &BenchmarkRule<FiniteMeasure>,
    seeds: &[u64],
) -> Result<RandomizedRun> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("randomized run needs at least one seed".into()));
    }
    let mean = run_scenario(scenario, pool, loss, rule)?;
    let rule_measures: Vec<&FiniteMeasure> = mean
        .rounds
        .iter()
        .map(|r| rule.value_at(&r.x))
        .collect::<Result<_>>()?;
    let mut paths = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut learner_losses = Vec::with_capacity(mean.rounds.len());
        let mut rule_losses = Vec::with_capacity(mean.rounds.len());
        for (rec, rm) in mean.rounds.iter().zip(&rule_measures) {
            let g = rec.gamma.sample(&mut rng);
            let d = rm.sample(&mut rng);
            learner_losses.push(loss.evaluate_unchecked(g, rec.y));
            rule_losses.push(loss.evaluate_unchecked(d, rec.y));
        }
        paths.push(SampledPath { seed, learner_losses, rule_losses });
    }
    Ok(RandomizedRun { mean, paths })
}

/// `√(2.01 · L² · N · ln ln N)`, the finitary iterated-logarithm envelope.
pub fn lil_envelope(l: f64, n: u64) -> Result<f64> {
    if !(l >= 0.0) {
        return Err(Error::InvalidArgument(format!("loss bound {l} must be >= 0")));
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "envelope needs N >= 3 (ln ln N > 0), got {n}"
        )));
    }
    let nf = n as f64;
    Ok((2.01 * l * l * nf * nf.ln().ln()).sqrt())
}

/// Fraction of sampled paths whose centered cumulative sums, for the
/// learner pair `(λ(g_n,·), λ(γ_n,·))` and the rule pair
/// `(λ(d_n,·), λ(D,·))`, both stay inside the envelope for every
/// `N ∈ [n0, horizon]`.
pub fn check_lil_envelope(run: &RandomizedRun, l: f64, n0: u64) -> Result<f64> {
    let horizon = run.mean.horizon();
    if n0 < 3 || n0 > horizon {
        return Err(Error::InvalidArgument(format!(
            "N0 must lie in [3, horizon], got {n0}"
        )));
    }
    let envelopes: Vec<f64> = (n0..=horizon)
        .map(|n| lil_envelope(l, n))
        .collect::<Result<_>>()?;
    let mut pass = 0usize;
    for path in &run.paths {
        let mut dev_learner = 0.0f64;
        let mut dev_rule = 0.0f64;
        let mut ok = true;
        for (i, rec) in run.mean.rounds.iter().enumerate() {
            dev_learner += path.learner_losses[i] - rec.learner_loss;
            dev_rule += path.rule_losses[i] - run.mean.rule_losses[i];
            let n = i as u64 + 1;
            if n >= n0 {
                let env = envelopes[(n - n0) as usize];
                if dev_learner.abs() > env || dev_rule.abs() > env {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            pass += 1;
        }
    }
    Ok(pass as f64 / run.paths.len() as f64)
}

/// The two thresholds behind the universality statement for one rule.
#[derive(Debug, Clone, PartialEq)]
pub enum UniversalityVerdict {
    Feasible {
        /// `⌈(2(L²e^L + ln 1/q_K)/ε)²⌉` from the proof chain, or 1 when
        /// `ε ≥ 2L`.
        analytic_threshold: u64,
        /// First round from which the running average regret stays `≤ ε`
        /// through the horizon; `None` if it still violates at the horizon.
        empirical_threshold: Option<u64>,
        /// Worst-cell loss distance to the nearest pool expert.
        delta: f64,
        /// `L²e^L + ln(1/q_K)`.
        constant: f64,
        /// Whether the empirical threshold was reached and is at most the
        /// analytic one.
        analytic_covers_empirical: bool,
    },
    /// The pool's grid cannot bring the rule within `ε/2`; `required_grid`
    /// is the evenly spaced grid size that would (0 when the loss has no
    /// finite Lipschitz constant and the measure catalog must be refined
    /// instead).
    Infeasible {
        delta: f64,
        epsilon: f64,
        required_grid: usize,
    },
}

/// Computes the analytic universality threshold from the regret chain and
/// reads the empirical one off a finished trace.
pub fn universality_verdict<V: PredictionValue>(
    trace: &RegretTrace<V>,
    loss: &LossFunction,
    epsilon: f64,
) -> Result<UniversalityVerdict> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be > 0")));
    }
    let l = loss.bound;
    let delta = trace.nearest_delta;
    let constant = l * l * l.exp() + (1.0 / trace.nearest_prior).ln();
    let analytic_threshold = if epsilon >= 2.0 * l {
        1
    } else if delta > epsilon / 2.0 {
        let required_grid = if loss.lipschitz_constant.is_finite() {
            (loss.lipschitz_constant / epsilon).ceil() as usize + 1
        } else {
            0
        };
        return Ok(UniversalityVerdict::Infeasible { delta, epsilon, required_grid });
    } else {
        (2.0 * constant / epsilon).powi(2).ceil() as u64
    };
    let avg: Vec<f64> = (0..trace.rounds.len()).map(|i| trace.average_regret(i)).collect();
    let empirical_threshold = stable_threshold(&avg, epsilon);
    let analytic_covers_empirical = empirical_threshold
        .map(|e| e <= analytic_threshold)
        .unwrap_or(false);
    Ok(UniversalityVerdict::Feasible {
        analytic_threshold,
        empirical_threshold,
        delta,
        constant,
        analytic_covers_empirical,
    })
}

/// Outcome of the independent post-run audit.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub rounds: u64,
    /// Smallest Lemma 9 gap over the run, per the independent replay, and
    /// the round attaining it.
    pub min_lemma9_gap: f64,
    pub min_lemma9_round: u64,
    pub lemma9_ok: bool,
    /// Largest |engine gap − auditor gap| relative to the round's
    /// cumulative-loss scale (the two routes sum the same terms in
    /// different orders, so agreement is relative, not bitwise).
    pub auditor_max_discrepancy: f64,
    pub auditor_worst_round: u64,
    pub auditor_consistent: bool,
    /// Smallest `bound − regret` over all prior groups and rounds.
    pub worst_lemma5_margin: f64,
    pub worst_lemma5_round: u64,
    pub lemma5_ok: bool,
    /// For convex (point) runs: smallest `Σp·l − l_learner` (must be
    /// ≥ −1e-12). For randomized runs: largest |Σp·l − l_learner| (must be
    /// ≤ 1e-12).
    pub worst_convexity_margin: f64,
    pub worst_convexity_round: u64,
    pub convexity_ok: bool,
}

impl AuditReport {
    pub fn all_ok(&self) -> bool {
        self.lemma9_ok && self.auditor_consistent && self.lemma5_ok && self.convexity_ok
    }
}

/// Re-verifies Lemma 9, Lemma 5 (over every expert, via prior-group
/// minima), and countable convexity from the recorded raw per-round data,
/// recomputing weights from scratch rather than trusting the engine's
/// running sums.
pub fn audit_trace<V: PredictionValue>(
    trace: &RegretTrace<V>,
    pool: &ExpertPool<V>,
    loss: &LossFunction,
) -> Result<AuditReport> {
    let gaps = lemma9_gap(&trace.rounds, pool)?;
    let mut min_gap = f64::INFINITY;
    let mut min_gap_round = 0u64;
    let mut max_disc = 0.0f64;
    let mut max_disc_round = 0u64;
    for (rec, g) in trace.rounds.iter().zip(&gaps) {
        if *g < min_gap {
            min_gap = *g;
            min_gap_round = rec.n;
        }
        let scale = 1.0 + rec.cumulative_learner_loss.abs() + g.abs();
        let disc = (rec.lemma9_gap - g).abs() / scale;
        if disc > max_disc {
            max_disc = disc;
            max_disc_round = rec.n;
        }
    }

    let mut worst_lemma5 = f64::INFINITY;
    let mut worst_lemma5_round = 0u64;
    for rec in &trace.rounds {
        for (g, min_loss) in rec.group_min_losses.iter().enumerate() {
            let q = pool.group_ln_q[g].exp();
            let bound = lemma5_bound(loss.bound, q, rec.n)?;
            let margin = bound - (rec.cumulative_learner_loss - min_loss);
            if margin < worst_lemma5 {
                worst_lemma5 = margin;
                worst_lemma5_round = rec.n;
            }
        }
    }

    let mut worst_convexity = if V::NEEDS_CONVEX_LOSS { f64::INFINITY } else { 0.0 };
    let mut worst_convexity_round = 0u64;
    for rec in &trace.rounds {
        let diff = rec.mean_expert_loss - rec.learner_loss;
        let worse = if V::NEEDS_CONVEX_LOSS {
            diff < worst_convexity
        } else {
            diff.abs() > worst_convexity
        };
        if worse {
            worst_convexity = if V::NEEDS_CONVEX_LOSS { diff } else { diff.abs() };
            worst_convexity_round = rec.n;
        }
    }
    let convexity_ok = if V::NEEDS_CONVEX_LOSS {
        worst_convexity >= -1e-12
    } else {
        worst_convexity <= 1e-12
    };

    Ok(AuditReport {
        rounds: trace.horizon(),
        min_lemma9_gap: min_gap,
        min_lemma9_round: min_gap_round,
        lemma9_ok: min_gap >= -1e-9,
        auditor_max_discrepancy: max_disc,
        auditor_worst_round: max_disc_round,
        auditor_consistent: max_disc < 1e-9,
        worst_lemma5_margin: worst_lemma5,
        worst_lemma5_round,
        lemma5_ok: worst_lemma5 >= -1e-9,
        convexity_ok,
        worst_convexity_margin: worst_convexity,
        worst_convexity_round,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::{enumerate_pool, PredictionGrid, PriorScheme, DEFAULT_POOL_CAP};
    use crate::spaces::SignalSpace;

    fn structure(m: u32) -> ApproximationStructure {
        ApproximationStructure::new(SignalSpace::UnitInterval, m).unwrap()
    }

    fn small_pool() -> ExpertPool<f64> {
        enumerate_pool(
            &structure(2),
            &PredictionGrid::uniform(3).unwrap(),
            2,
            PriorScheme::Hierarchical,
            DEFAULT_POOL_CAP,
        )
        .unwrap()
    }

    fn iid_scenario(horizon: u64, seed: u64, noise: f64) -> RealityScenario {
        RealityScenario {
            name: format!("iid-{seed}"),
            kind: ScenarioKind::IidNoise {
                target: BenchmarkRule::constant(&structure(2), 1, 0.5).unwrap(),
                noise,
            },
            sampler: SignalSampler::UniformIid,
            horizon,
            seed,
        }
    }

    #[test]
    fn lil_envelope_values() {
        assert_eq!(lil_envelope(0.0, 100).unwrap(), 0.0);
        let v = lil_envelope(1.0, 3).unwrap();
        assert!((v - 0.75307).abs() < 1e-4, "got {v}");
        assert!(
            (v - (2.01 * 3.0 * (3f64.ln().ln())).sqrt()).abs() < 1e-12,
            "direct formula"
        );
        assert!(lil_envelope(1.0, 16).unwrap() < lil_envelope(1.0, 100).unwrap());
        assert!(lil_envelope(1.0, 2).is_err());
        assert!(lil_envelope(-1.0, 10).is_err());
    }

    #[test]
    fn benchmark_rule_validates_table() {
        let s = structure(2);
        assert!(BenchmarkRule::new(&s, 1, vec![0.1]).is_err());
        let rule = BenchmarkRule::new(&s, 1, vec![0.1, 0.9]).unwrap();
        assert_eq!(*rule.value_at(&Signal::Scalar(0.2)).unwrap(), 0.1);
        assert_eq!(*rule.value_at(&Signal::Scalar(0.9)).unwrap(), 0.9);
    }

    #[test]
    fn single_constant_expert_tracks_replayed_observations() {
        let pool = enumerate_pool(
            &structure(1),
            &PredictionGrid::uniform(1).unwrap(),
            1,
            PriorScheme::Hierarchical,
            DEFAULT_POOL_CAP,
        )
        .unwrap();
        let loss = LossFunction::square();
        let pairs: Vec<(Signal, f64)> =
            (0..30).map(|i| (Signal::Scalar(0.3), if i % 2 == 0 { 1.0 } else { 0.0 })).collect();
        let sc = RealityScenario {
            name: "replay".into(),
            kind: ScenarioKind::Replay { pairs },
            sampler: SignalSampler::UniformIid,
            horizon: 30,
            seed: 0,
        };
        let rule = BenchmarkRule::constant(&structure(1), 1, 0.5).unwrap();
        let trace = run_deterministic(&sc, &pool, &loss, &rule).unwrap();
        for rec in &trace.rounds {
            assert_eq!(rec.gamma, 0.5, "single expert's constant prediction");
            assert!((rec.learner_loss - 0.25).abs() < 1e-15);
            assert!(rec.lemma9_gap.abs() < 1e-9);
        }
        assert_eq!(trace.final_learner_loss, trace.final_best_expert_loss);
    }

    #[test]
    fn trace_aggregates_equal_sums_of_per_round_fields() {
        let pool = small_pool();
        let loss = LossFunction::absolute();
        let rule = BenchmarkRule::new(&structure(2), 1, vec![0.3, 0.6]).unwrap();
        let trace =
            run_deterministic(&iid_scenario(200, 5, 0.1), &pool, &loss, &rule).unwrap();
        let sum_learner: f64 = trace.rounds.iter().map(|r| r.learner_loss).sum();
        let sum_rule: f64 = trace.rule_losses.iter().sum();
        assert!((sum_learner - trace.final_learner_loss).abs() < 1e-9);
        assert!((sum_rule - trace.final_rule_loss).abs() < 1e-9);
        assert_eq!(
            trace.cumulative_rule_losses.last().copied().unwrap(),
            trace.final_rule_loss
        );
        assert_eq!(trace.horizon(), 200);
    }

    #[test]
    fn audit_passes_on_healthy_run_and_flags_a_corrupted_one() {
        let pool = small_pool();
        let loss = LossFunction::square();
        let rule = BenchmarkRule::constant(&structure(2), 1, 0.5).unwrap();
        let mut trace =
            run_deterministic(&iid_scenario(150, 11, 0.3), &pool, &loss, &rule).unwrap();
        let report = audit_trace(&trace, &pool, &loss).unwrap();
        assert!(report.all_ok(), "{report:?}");
        assert!(report.min_lemma9_gap >= -1e-9);

        // Negative control: inflate one recorded learner loss; the replayed
        // gap must now disagree with the engine's running value.
        trace.rounds[60].learner_loss += 5.0;
        let bad = audit_trace(&trace, &pool, &loss).unwrap();
        assert!(!bad.all_ok(), "auditor must notice the corruption");
    }

    #[test]
    fn csv_is_deterministic_and_carries_metadata() {
        let pool = small_pool();
        let loss = LossFunction::square();
        let rule = BenchmarkRule::constant(&structure(2), 1, 0.5).unwrap();
        let trace =
            run_deterministic(&iid_scenario(25, 3, 0.2), &pool, &loss, &rule).unwrap();
        let mut a = Vec::new();
        trace.write_csv(&mut a, &[("config_hash", "abc".into())]).unwrap();
        let mut b = Vec::new();
        trace.write_csv(&mut b, &[("config_hash", "abc".into())]).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# config_hash=abc\n"));
        assert_eq!(text.lines().count(), 2 + 25);
        assert!(text.lines().nth(1).unwrap().starts_with("n,x,y,gamma_repr"));
    }

    #[test]
    fn universality_trivial_and_scaling_cases() {
        let pool = small_pool();
        let loss = LossFunction::square();
        let rule = BenchmarkRule::constant(&structure(2), 1, 0.5).unwrap();
        let trace =
            run_deterministic(&iid_scenario(300, 21, 0.2), &pool, &loss, &rule).unwrap();

        // ε ≥ 2L: regret per round can never exceed 2L.
        match universality_verdict(&trace, &loss, 2.0).unwrap() {
            UniversalityVerdict::Feasible { analytic_threshold, .. } => {
                assert_eq!(analytic_threshold, 1)
            }
            v => panic!("unexpected {v:?}"),
        }

        // Halving ε quadruples the analytic threshold (on-grid rule, δ=0).
        let t1 = match universality_verdict(&trace, &loss, 0.5).unwrap() {
            UniversalityVerdict::Feasible { analytic_threshold, delta, .. } => {
                assert_eq!(delta, 0.0);
                analytic_threshold
            }
            v => panic!("unexpected {v:?}"),
        };
        let t2 = match universality_verdict(&trace, &loss, 0.25).unwrap() {
            UniversalityVerdict::Feasible { analytic_threshold, .. } => analytic_threshold,
            v => panic!("unexpected {v:?}"),
        };
        assert!((t2 as f64 / t1 as f64 - 4.0).abs() < 0.01, "t1={t1} t2={t2}");
    }

    #[test]
    fn universality_reports_infeasible_grids() {
        // Grid {0, 1} cannot represent a constant-0.5 rule to within ε/2
        // for small ε: δ = ρ(0.5, 0) = 0.5·1.5 = 0.75 under square loss.
        let pool = enumerate_pool(
            &structure(1),
            &PredictionGrid::uniform(2).unwrap(),
            1,
            PriorScheme::Hierarchical,
            DEFAULT_POOL_CAP,
        )
        .unwrap();
        let loss = LossFunction::square();
        let rule = BenchmarkRule::constant(&structure(1), 1, 0.5).unwrap();
        let trace =
            run_deterministic(&iid_scenario(50, 2, 0.2), &pool, &loss, &rule).unwrap();
        match universality_verdict(&trace, &loss, 0.1).unwrap() {
            UniversalityVerdict::Infeasible { delta, required_grid, .. } => {
                assert!((delta - 0.75).abs() < 1e-12);
                assert_eq!(required_grid, 21, "ceil(2/0.1) + 1");
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn randomized_point_mass_paths_collapse_to_mean() {
        let pool = small_pool().lift_to_measures();
        let loss = LossFunction::square();
        let rule = BenchmarkRule::constant(
            &structure(2),
            1,
            FiniteMeasure::point_mass(0.5),
        )
        .unwrap();
        // A point-mass rule against a mixture learner: the learner's γ is a
        // spread measure, so restrict to a single-expert pool for full
        // degeneracy.
        let single = enumerate_pool(
            &structure(1),
            &PredictionGrid::uniform(1).unwrap(),
            1,
            PriorScheme::Hierarchical,
            DEFAULT_POOL_CAP,
        )
        .unwrap()
        .lift_to_measures();
        let sc = iid_scenario(40, 13, 0.25);
        let run = run_randomized(&sc, &single, &loss, &rule, &[1, 2, 3]).unwrap();
        for path in &run.paths {
            for (i, rec) in run.mean.rounds.iter().enumerate() {
                assert_eq!(path.learner_losses[i], rec.learner_loss);
                assert_eq!(path.rule_losses[i], run.mean.rule_losses[i]);
            }
        }
        assert_eq!(check_lil_envelope(&run, 1.0, 3).unwrap(), 1.0);
        let _ = pool;
        assert!(run_randomized(&sc, &single, &loss, &rule, &[]).is_err());
    }

    #[test]
    fn adaptive_adversary_forces_quarter_loss_but_bounds_hold() {
        let pool = small_pool();
        let loss = LossFunction::square();
        let rule = BenchmarkRule::constant(&structure(2), 1, 0.5).unwrap();
        let trace =
            run_adaptive(&mut WorstCaseSquare, &pool, &loss, &rule, 400).unwrap();
        assert!(trace.final_learner_loss >= 0.25 * 400.0 - 1e-9);
        let report = audit_trace(&trace, &pool, &loss).unwrap();
        assert!(report.all_ok(), "{report:?}");
    }

    #[test]
    fn stable_threshold_edges() {
        assert_eq!(stable_threshold(&[0.9, 0.3, 0.2], 0.5), Some(2));
        assert_eq!(stable_threshold(&[0.1, 0.1], 0.5), Some(1));
        assert_eq!(stable_threshold(&[0.1, 0.9], 0.5), None);
        assert_eq!(stable_threshold(&[0.1, 0.9, 0.2, 0.2], 0.5), Some(3));
    }
}
