//! The Weak Aggregating Algorithm and its regret-bound calculators.
//!
//! The WAA (Kalnishkan and Vyugin, "The weak aggregating algorithm and weak
//! mixability", JCSS 2008) is an exponential-weights forecaster whose
//! learning rate decays with the round: at round `n` expert `k` carries
//! weight `w_n^(k) = q_k β_n^{L_{n-1}^(k)}` with `β_n = exp(-1/√n)`, and the
//! prediction is the normalized-weight mixture of the expert predictions.
//!
//! Two bounds are verified numerically against every run:
//!
//! - the per-round aggregation inequality (their Lemma 9): `L_N ≤
//!   Σ_n Σ_k p_n^(k) l_n^(k) − Σ_n log_{β_n} Σ_k p_n^(k) β_n^{l_n^(k)} +
//!   log_{β_N} Σ_k q_k β_N^{L_N^(k)}`, whose right-hand side minus `L_N`
//!   is the "gap" (nonnegative for convex losses);
//! - the regret bound (their Lemma 5):
//!   `L_N ≤ L_N^(K) + (L² e^L + ln(1/q_K)) √N` for every expert `K`.
//!
//! The engine is generic over the prediction value: plain numbers give the
//! deterministic algorithm for convex losses, finite measures give the
//! randomized algorithm whose expected loss is linear, turning the convexity
//! step into an equality.
//!
//! All weights live in log space. On each round the log-weights are rebased
//! from the stored cumulative losses (`ln w_{n+1} = ln q − L_n/√(n+1)`)
//! rather than multiplied incrementally, because `β` changes with `n` and
//! incremental updates would compound rounding error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::ExpertPool;
use crate::losses::LossFunction;
use crate::measures::{self, FiniteMeasure};
use crate::spaces::Signal;

/// A value an expert (and the aggregated learner) can predict.
pub trait PredictionValue: Clone + PartialEq + std::fmt::Debug + Send + Sync {
    /// Whether aggregation by weighted mixture needs a convex loss. Point
    /// predictions do; measure-valued predictions make the (expected) loss
    /// linear in the prediction, so any bounded loss is admissible.
    const NEEDS_CONVEX_LOSS: bool;

    /// Checks the value lies in the loss's prediction space.
    fn validate(&self, loss: &LossFunction) -> Result<()>;

    /// `λ(value, y)` (expected loss for measures), with domain checks.
    fn loss_against(&self, loss: &LossFunction, y: f64) -> Result<f64>;

    /// As [`loss_against`](Self::loss_against) for pre-validated values.
    fn loss_against_unchecked(&self, loss: &LossFunction, y: f64) -> f64;

    /// Weighted mixture `Σ wᵢ vᵢ`; weights form a probability vector.
    fn mixture(weights: &[f64], values: &[&Self]) -> Result<Self>;

    /// `sup_y |λ(self, y) − λ(other, y)|`, the loss pseudo-metric.
    fn sup_loss_distance(&self, other: &Self, loss: &LossFunction) -> Result<f64>;

    /// Embedding into the randomized game.
    fn to_measure(&self) -> FiniteMeasure;

    /// Compact textual form for trace files.
    fn describe(&self) -> String;
}

impl PredictionValue for f64 {
    const NEEDS_CONVEX_LOSS: bool = true;

    fn validate(&self, loss: &LossFunction) -> Result<()> {
        if loss.prediction_space.contains(*self) {
            Ok(())
        } else {
            Err(Error::PredictionOutsideSpace(*self))
        }
    }

    fn loss_against(&self, loss: &LossFunction, y: f64) -> Result<f64> {
        loss.evaluate(*self, y)
    }

    fn loss_against_unchecked(&self, loss: &LossFunction, y: f64) -> f64 {
        loss.evaluate_unchecked(*self, y)
    }

    fn mixture(weights: &[f64], values: &[&Self]) -> Result<Self> {
        if weights.len() != values.len() || weights.is_empty() {
            return Err(Error::InvalidArgument("mixture needs matching nonempty lists".into()));
        }
        let mut acc = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (w, v) in weights.iter().zip(values) {
            acc += w * **v;
            lo = lo.min(**v);
            hi = hi.max(**v);
        }
        // The exact convex combination lies in [lo, hi]; clamping only
        // removes float dust at the edges.
        Ok(acc.clamp(lo, hi))
    }

    fn sup_loss_distance(&self, other: &Self, loss: &LossFunction) -> Result<f64> {
        loss.pseudo_metric(*self, *other)
    }

    fn to_measure(&self) -> FiniteMeasure {
        FiniteMeasure::point_mass(*self)
    }

    fn describe(&self) -> String {
        format!("{self}")
    }
}

impl PredictionValue for FiniteMeasure {
    const NEEDS_CONVEX_LOSS: bool = false;

    fn validate(&self, loss: &LossFunction) -> Result<()> {
        for (g, _) in self.atoms() {
            if !loss.prediction_space.contains(*g) {
                return Err(Error::PredictionOutsideSpace(*g));
            }
        }
        Ok(())
    }

    fn loss_against(&self, loss: &LossFunction, y: f64) -> Result<f64> {
        self.expected_loss(loss, y)
    }

    fn loss_against_unchecked(&self, loss: &LossFunction, y: f64) -> f64 {
        self.expected_loss_unchecked(loss, y)
    }

    fn mixture(weights: &[f64], values: &[&Self]) -> Result<Self> {
        measures::mix(weights, values)
    }

    fn sup_loss_distance(&self, other: &Self, loss: &LossFunction) -> Result<f64> {
        measures::expected_loss_distance(self, other, loss)
    }

    fn to_measure(&self) -> FiniteMeasure {
        self.clone()
    }

    fn describe(&self) -> String {
        FiniteMeasure::describe(self)
    }
}

/// `max + ln Σ exp(x − max)`, `−∞` on an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// `(L² e^L + ln(1/q_K)) √N`, the Lemma 5 regret allowance.
pub fn lemma5_bound(l: f64, q_k: f64, n: u64) -> Result<f64> {
    if !(l >= 0.0) {
        return Err(Error::InvalidArgument(format!("loss bound {l} must be >= 0")));
    }
    if !(q_k > 0.0 && q_k <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "prior {q_k} must lie in (0, 1]"
        )));
    }
    Ok((l * l * l.exp() + (1.0 / q_k).ln()) * (n as f64).sqrt())
}

/// Both sides of the mean-comparison inequality
/// `(Σ q_k x^{L_k})^a ≥ Σ q_k x^{a L_k}` for `x, a ∈ (0, 1)` and subconvex
/// weights `Σ q_k ≤ 1` (the step that drives the Lemma 9 telescoping).
/// Returns `(lhs, rhs)`, computed in log space.
pub fn mean_comparison_sides(
    priors: &[f64],
    losses: &[f64],
    x: f64,
    a: f64,
) -> Result<(f64, f64)> {
    if priors.len() != losses.len() || priors.is_empty() {
        return Err(Error::InvalidArgument("need matching nonempty vectors".into()));
    }
    if priors.iter().any(|q| !(*q > 0.0)) || priors.iter().sum::<f64>() > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(
            "priors must be positive with sum <= 1".into(),
        ));
    }
    if !(0.0 < x && x < 1.0) || !(0.0 < a && a < 1.0) {
        return Err(Error::InvalidArgument("x and a must lie in (0, 1)".into()));
    }
    let ln_x = x.ln();
    let terms_l: Vec<f64> = priors
        .iter()
        .zip(losses)
        .map(|(q, l)| q.ln() + l * ln_x)
        .collect();
    let terms_r: Vec<f64> = priors
        .iter()
        .zip(losses)
        .map(|(q, l)| q.ln() + a * l * ln_x)
        .collect();
    Ok(((a * logsumexp(&terms_l)).exp(), logsumexp(&terms_r).exp()))
}

/// Everything recorded about one completed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord<V> {
    pub n: u64,
    pub x: Signal,
    pub y: f64,
    pub gamma: V,
    /// `l_n = λ(γ_n, y_n)`.
    pub learner_loss: f64,
    pub cumulative_learner_loss: f64,
    /// `Σ_k p_n^(k) l_n^(k)`, the mean expert loss under the round's weights.
    pub mean_expert_loss: f64,
    /// `√n · ln Σ_k p_n^(k) exp(−l_n^(k)/√n)`, this round's term of the
    /// second Lemma 9 sum (nonpositive).
    pub softmin_term: f64,
    /// `−√n · ln Σ_k q_k exp(−L_n^(k)/√n)`, the Lemma 9 tail term at `N = n`.
    pub tail_term: f64,
    /// Lemma 9 right-hand side minus `L_n`, from the engine's running sums.
    pub lemma9_gap: f64,
    /// `min_k L_n^(k)` over the whole pool.
    pub best_cumulative_loss: f64,
    /// `min L_n^(k)` per prior group (see [`ExpertPool`] grouping); with the
    /// group's prior this reproduces the tightest Lemma 5 check over all
    /// experts without storing per-expert data.
    pub group_min_losses: Vec<f64>,
    /// Shannon entropy of `p_n` in nats.
    pub weight_entropy: f64,
    /// Active quantizer cell per pool level block.
    pub cells: Vec<usize>,
    /// `λ(catalog[d], y_n)` per catalog digit; `None` when table retention
    /// is disabled, in which case the independent auditor cannot run.
    pub loss_table: Option<Vec<f64>>,
}

#[derive(Debug)]
struct PendingRound<V> {
    x: Signal,
    cells: Vec<usize>,
    /// Per block, per catalog digit: total normalized weight mass.
    buckets: Vec<Vec<f64>>,
    gamma: V,
    weight_entropy: f64,
}

/// The WAA as a strict predict/update state machine.
#[derive(Debug)]
pub struct WaaEngine<V: PredictionValue> {
    pool: ExpertPool<V>,
    loss: LossFunction,
    /// `L_{n-1}^(k)` per expert.
    cumulative_losses: Vec<f64>,
    /// `ln w_n^(k) = ln q_k − L_{n-1}^(k)/√n` per expert.
    log_weights: Vec<f64>,
    cumulative_learner_loss: f64,
    /// Running `Σ_m Σ_k p_m^(k) l_m^(k)` and `Σ_m √m ln Σ p exp(−l/√m)`.
    running_mean_loss: f64,
    running_softmin: f64,
    /// Next round to play.
    next_round: u64,
    pending: Option<PendingRound<V>>,
    retain_tables: bool,
}

/// The deterministic WAA over point predictions (convex losses only).
pub type DeterministicEngine = WaaEngine<f64>;
/// The randomized WAA over measure-valued predictions (any bounded loss).
pub type RandomizedEngine = WaaEngine<FiniteMeasure>;

impl<V: PredictionValue> WaaEngine<V> {
    pub fn new(pool: ExpertPool<V>, loss: LossFunction) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::InvalidArgument("pool must be nonempty".into()));
        }
        if V::NEEDS_CONVEX_LOSS && !loss.is_convex() {
            return Err(Error::NonConvexLoss);
        }
        for v in pool.catalog() {
            v.validate(&loss)?;
        }
        let k = pool.len();
        let log_weights = pool.ln_priors().to_vec();
        Ok(Self {
            pool,
            loss,
            cumulative_losses: vec![0.0; k],
            log_weights,
            cumulative_learner_loss: 0.0,
            running_mean_loss: 0.0,
            running_softmin: 0.0,
            next_round: 1,
            pending: None,
            retain_tables: true,
        })
    }

    /// Disables per-round loss-table retention (for very long runs); the
    /// independent Lemma 9 auditor then reports insufficient data.
    pub fn with_table_retention(mut self, retain: bool) -> Self {
        self.retain_tables = retain;
        self
    }

    pub fn pool(&self) -> &ExpertPool<V> {
        &self.pool
    }

    pub fn loss(&self) -> &LossFunction {
        &self.loss
    }

    /// The round about to be played (1-based).
    pub fn round(&self) -> u64 {
        self.next_round
    }

    pub fn cumulative_learner_loss(&self) -> f64 {
        self.cumulative_learner_loss
    }

    /// `L_{n-1}^(k)` per expert, index order.
    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative_losses
    }

    /// `ln w_n^(k)` per expert, maintained incrementally.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `ln w_n^(k)` recomputed from the defining formula; the invariant
    /// suite compares this against the incremental state.
    pub fn recomputed_log_weights(&self) -> Vec<f64> {
        let sqrt_n = (self.next_round as f64).sqrt();
        self.pool
            .ln_priors()
            .iter()
            .zip(&self.cumulative_losses)
            .map(|(lq, l)| lq - l / sqrt_n)
            .collect()
    }

    /// `p_n^(k)`: the normalized weights, via log-sum-exp.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let lse = logsumexp(&self.log_weights);
        self.log_weights.iter().map(|lw| (lw - lse).exp()).collect()
    }

    /// Plays Predictor's move for the current round: the `p`-mixture of the
    /// expert predictions at `x`.
    pub fn predict(&mut self, x: &Signal) -> Result<V> {
        if self.pending.is_some() {
            return Err(Error::Sequencing(format!(
                "round {}: update must follow predict before the next predict",
                self.next_round
            )));
        }
        let cells = self.pool.active_cells(x)?;

        // One pass over the pool: accumulate exp-weights into per-(block,
        // digit) buckets. Experts sharing a table digit at the active cell
        // share a prediction, so the mixture needs only bucket masses.
        let mx = self
            .log_weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let c = self.pool.catalog().len();
        let mut buckets: Vec<Vec<f64>> = self
            .pool
            .blocks
            .iter()
            .map(|_| vec![0.0f64; c])
            .collect();
        let mut z = 0.0f64;
        let mut weighted_lw = 0.0f64;
        for (bi, block) in self.pool.blocks.iter().enumerate() {
            let cell = cells[bi];
            let bucket = &mut buckets[bi];
            for e in 0..block.count {
                let k = block.start + e;
                let w = (self.log_weights[k] - mx).exp();
                z += w;
                weighted_lw += w * self.log_weights[k];
                bucket[block.digit(e, cell) as usize] += w;
            }
        }
        for bucket in &mut buckets {
            for b in bucket.iter_mut() {
                *b /= z;
            }
        }
        // H(p) = ln Σw + max − Σ p ln w  with  ln p = ln w − (max + ln Σw).
        let weight_entropy = z.ln() + mx - weighted_lw / z;

        let mut weights = Vec::new();
        let mut values = Vec::new();
        for bucket in &buckets {
            for (d, b) in bucket.iter().enumerate() {
                if *b > 0.0 {
                    weights.push(*b);
                    values.push(&self.pool.catalog()[d]);
                }
            }
        }
        // Bucket masses are p-sums, so they total 1 up to accumulated
        // rounding; renormalize before mixing.
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let gamma = V::mixture(&weights, &values)?;

        self.pending = Some(PendingRound {
            x: x.clone(),
            cells,
            buckets,
            gamma: gamma.clone(),
            weight_entropy,
        });
        Ok(gamma)
    }

    /// Plays Reality's move: charges losses, rebases weights for the next
    /// round, and reports the round record.
    pub fn update(&mut self, y: f64) -> Result<RoundRecord<V>> {
        let pending = self.pending.take().ok_or_else(|| {
            Error::Sequencing(format!(
                "round {}: predict must precede update",
                self.next_round
            ))
        })?;
        let n = self.next_round;
        let sqrt_n = (n as f64).sqrt();
        let sqrt_next = ((n + 1) as f64).sqrt();

        let loss_table: Vec<f64> = self
            .pool
            .catalog()
            .iter()
            .map(|v| v.loss_against(&self.loss, y))
            .collect::<Result<_>>()?;
        let learner_loss = pending.gamma.loss_against(&self.loss, y)?;

        // Σ_k p l and Σ_k p β^l reduce over buckets: the per-expert loss
        // depends only on the expert's digit at the active cell.
        let mut mean_expert_loss = 0.0f64;
        let mut soft = 0.0f64;
        for bucket in &pending.buckets {
            for (d, b) in bucket.iter().enumerate() {
                if *b > 0.0 {
                    mean_expert_loss += b * loss_table[d];
                    soft += b * (-loss_table[d] / sqrt_n).exp();
                }
            }
        }
        let softmin_term = sqrt_n * soft.ln();

        // Single sweep over the pool: charge losses, collect group minima,
        // find the max exponent for the tail log-sum-exp.
        let ln_priors = self.pool.ln_priors();
        let mut group_min = vec![f64::INFINITY; self.pool.group_ln_q.len()];
        let mut best = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for (bi, block) in self.pool.blocks.iter().enumerate() {
            let cell = pending.cells[bi];
            for e in 0..block.count {
                let k = block.start + e;
                let l = self.cumulative_losses[k] + loss_table[block.digit(e, cell) as usize];
                self.cumulative_losses[k] = l;
                let g = self.pool.group_of[k] as usize;
                if l < group_min[g] {
                    group_min[g] = l;
                }
                if l < best {
                    best = l;
                }
                let a = ln_priors[k] - l / sqrt_n;
                if a > mx {
                    mx = a;
                }
            }
        }
        // Second sweep: tail term at N = n and rebase to β_{n+1}.
        let mut tail_z = 0.0f64;
        for ((lw, l), lp) in self
            .log_weights
            .iter_mut()
            .zip(&self.cumulative_losses)
            .zip(ln_priors)
        {
            tail_z += (lp - l / sqrt_n - mx).exp();
            *lw = lp - l / sqrt_next;
        }
        let tail_term = -sqrt_n * (mx + tail_z.ln());

        self.cumulative_learner_loss += learner_loss;
        self.running_mean_loss += mean_expert_loss;
        self.running_softmin += softmin_term;
        let lemma9_gap = self.running_mean_loss + self.running_softmin + tail_term
            - self.cumulative_learner_loss;

        self.next_round += 1;
        Ok(RoundRecord {
            n,
            x: pending.x,
            y,
            gamma: pending.gamma,
            learner_loss,
            cumulative_learner_loss: self.cumulative_learner_loss,
            mean_expert_loss,
            softmin_term,
            tail_term,
            lemma9_gap,
            best_cumulative_loss: best,
            group_min_losses: group_min,
            weight_entropy: pending.weight_entropy,
            cells: pending.cells,
            loss_table: self.retain_tables.then_some(loss_table),
        })
    }
}

/// Independent Lemma 9 auditor: replays the recorded per-round loss tables
/// against the pool's own tables and priors, reconstructing weights and all
/// three right-hand-side terms from scratch, and returns `RHS − L_N` per
/// round. Shares no state with the engine beyond the pool definition.
pub fn lemma9_gap<V: PredictionValue>(
    records: &[RoundRecord<V>],
    pool: &ExpertPool<V>,
) -> Result<Vec<f64>> {
    let k_total = pool.len();
    let ln_priors = pool.ln_priors();
    let mut cum = vec![0.0f64; k_total];
    let mut soft_table = Vec::new();
    let mut t1 = 0.0f64;
    let mut t2 = 0.0f64;
    let mut learner = 0.0f64;
    let mut gaps = Vec::with_capacity(records.len());
    for rec in records {
        let table = rec.loss_table.as_deref().ok_or_else(|| {
            Error::InsufficientData(format!(
                "round {}: per-expert loss table was not retained",
                rec.n
            ))
        })?;
        if rec.cells.len() != pool.blocks.len() {
            return Err(Error::InsufficientData(format!(
                "round {}: missing cell indices",
                rec.n
            )));
        }
        let sqrt_n = (rec.n as f64).sqrt();
        // Loss factors per catalog digit, shared across all experts.
        soft_table.clear();
        soft_table.extend(table.iter().map(|l| (-l / sqrt_n).exp()));
        // Weights before this round's losses.
        let mut mx = f64::NEG_INFINITY;
        for k in 0..k_total {
            let a = ln_priors[k] - cum[k] / sqrt_n;
            if a > mx {
                mx = a;
            }
        }
        let mut z = 0.0f64;
        let mut mean = 0.0f64;
        let mut soft = 0.0f64;
        for (bi, block) in pool.blocks.iter().enumerate() {
            let cell = rec.cells[bi];
            for e in 0..block.count {
                let k = block.start + e;
                let w = (ln_priors[k] - cum[k] / sqrt_n - mx).exp();
                z += w;
                let d = block.digit(e, cell) as usize;
                mean += w * table[d];
                soft += w * soft_table[d];
                cum[k] += table[d];
            }
        }
        t1 += mean / z;
        t2 += sqrt_n * (soft / z).ln();
        learner += rec.learner_loss;
        // Tail log-sum-exp over the updated cumulative losses, in place.
        let mut tail_mx = f64::NEG_INFINITY;
        for k in 0..k_total {
            let a = ln_priors[k] - cum[k] / sqrt_n;
            if a > tail_mx {
                tail_mx = a;
            }
        }
        let mut tail_z = 0.0f64;
        for k in 0..k_total {
            tail_z += (ln_priors[k] - cum[k] / sqrt_n - tail_mx).exp();
        }
        let t3 = -sqrt_n * (tail_mx + tail_z.ln());
        gaps.push(t1 + t2 + t3 - learner);
    }
    Ok(gaps)
}
