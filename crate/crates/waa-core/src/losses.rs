//! Loss functions, their bounds, and the induced pseudo-metric on predictions.
//!
//! A loss `λ: Γ × Y → ℝ` is described by its kind, the prediction space `Γ`,
//! the observation space `Y`, a bound `L ≥ sup |λ|`, and a Lipschitz constant
//! in the prediction argument (uniform over observations, possibly infinite).
//!
//! The pseudo-metric `ρ(g, g') = sup_y |λ(g, y) − λ(g', y)|` is implemented
//! in its symmetric sup-of-absolute-difference form (the form required for a
//! metric, cf. Dudley, "Real Analysis and Probability", 2002, §11.2); the
//! asymmetric sup-of-difference variant coincides with it whenever the sup is
//! taken over both orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The prediction space `Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionSpace {
    /// `Γ = [0, 1]`.
    UnitInterval,
    /// A finite set of prediction values.
    Finite { values: Vec<f64> },
}

impl PredictionSpace {
    pub fn contains(&self, g: f64) -> bool {
        match self {
            PredictionSpace::UnitInterval => (0.0..=1.0).contains(&g),
            PredictionSpace::Finite { values } => values.contains(&g),
        }
    }
}

/// The observation space `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationSpace {
    /// `Y = [0, 1]`.
    UnitInterval,
    /// A finite set of observation values.
    Finite { values: Vec<f64> },
}

impl ObservationSpace {
    pub fn contains(&self, y: f64) -> bool {
        match self {
            ObservationSpace::UnitInterval => (0.0..=1.0).contains(&y),
            ObservationSpace::Finite { values } => values.contains(&y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `λ(γ, y) = (γ − y)²`; convex, Lipschitz constant 2 on `[0,1]²`.
    Square,
    /// `λ(γ, y) = |γ − y|`; convex, Lipschitz constant 1.
    Absolute,
    /// `λ(γ, y) = 1` when `|γ − y| ≥ t`, else 0; discontinuous and
    /// non-convex, so it is admitted only by the randomized engine (on a
    /// finite prediction grid, where continuity requirements are vacuous).
    ZeroOneThreshold { t: f64 },
    /// Explicit table over finite `Γ × Y`, row-major in the declared orders.
    Custom { table: Vec<Vec<f64>> },
}

/// A bounded loss function with its declared spaces and moduli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossFunction {
    pub kind: LossKind,
    pub prediction_space: PredictionSpace,
    pub observation_space: ObservationSpace,
    /// Upper bound on `|λ|`.
    pub bound: f64,
    /// Lipschitz constant in `γ`, uniform over `y`; `f64::INFINITY` for
    /// discontinuous kinds.
    pub lipschitz_constant: f64,
}

impl LossFunction {
    /// Square loss on `Γ = Y = [0, 1]`.
    pub fn square() -> Self {
        Self {
            kind: LossKind::Square,
            prediction_space: PredictionSpace::UnitInterval,
            observation_space: ObservationSpace::UnitInterval,
            bound: 1.0,
            lipschitz_constant: 2.0,
        }
    }

    /// Absolute loss on `Γ = Y = [0, 1]`.
    pub fn absolute() -> Self {
        Self {
            kind: LossKind::Absolute,
            prediction_space: PredictionSpace::UnitInterval,
            observation_space: ObservationSpace::UnitInterval,
            bound: 1.0,
            lipschitz_constant: 1.0,
        }
    }

    /// 0/1 loss at threshold `t` with binary observations `Y = {0, 1}`.
    pub fn zero_one_threshold(t: f64) -> Result<Self> {
        if !(0.0 < t && t <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0, 1], got {t}"
            )));
        }
        Ok(Self {
            kind: LossKind::ZeroOneThreshold { t },
            prediction_space: PredictionSpace::UnitInterval,
            observation_space: ObservationSpace::Finite { values: vec![0.0, 1.0] },
            bound: 1.0,
            lipschitz_constant: f64::INFINITY,
        })
    }

    /// Table loss over finite `Γ × Y`. The bound is `max |table|`; the
    /// Lipschitz constant is the largest difference quotient over prediction
    /// pairs (0 for a single prediction).
    pub fn custom(
        predictions: Vec<f64>,
        observations: Vec<f64>,
        table: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if predictions.is_empty() || observations.is_empty() {
            return Err(Error::InvalidArgument(
                "custom loss needs nonempty prediction and observation sets".into(),
            ));
        }
        if table.len() != predictions.len()
            || table.iter().any(|row| row.len() != observations.len())
        {
            return Err(Error::InvalidArgument(format!(
                "table shape must be {}x{}",
                predictions.len(),
                observations.len()
            )));
        }
        let bound = table
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        let mut lip = 0.0f64;
        for i in 0..predictions.len() {
            for j in i + 1..predictions.len() {
                let dg = (predictions[i] - predictions[j]).abs();
                if dg == 0.0 {
                    return Err(Error::InvalidArgument(
                        "custom loss predictions must be distinct".into(),
                    ));
                }
                for (a, b) in table[i].iter().zip(&table[j]) {
                    lip = lip.max((a - b).abs() / dg);
                }
            }
        }
        Ok(Self {
            kind: LossKind::Custom { table },
            prediction_space: PredictionSpace::Finite { values: predictions },
            observation_space: ObservationSpace::Finite { values: observations },
            bound,
            lipschitz_constant: lip,
        })
    }

    /// Replaces the observation space (e.g. restricts square loss to
    /// binary outcomes). The bound and Lipschitz constant stay valid since
    /// they hold uniformly over the larger space.
    pub fn with_observations(mut self, values: Vec<f64>) -> Result<Self> {
        if matches!(self.kind, LossKind::Custom { .. }) {
            return Err(Error::Unsupported(
                "custom losses fix their observation set at construction".into(),
            ));
        }
        if values.is_empty() || values.iter().any(|y| !(0.0..=1.0).contains(y)) {
            return Err(Error::InvalidArgument(
                "observation values must be nonempty and lie in [0,1]".into(),
            ));
        }
        self.observation_space = ObservationSpace::Finite { values };
        Ok(self)
    }

    /// Whether the deterministic (convex-combination) engine may use this
    /// loss: convex in `γ` for every `y`.
    pub fn is_convex(&self) -> bool {
        matches!(self.kind, LossKind::Square | LossKind::Absolute)
    }

    /// `λ(γ, y)`; both arguments are validated against their spaces.
    pub fn evaluate(&self, gamma: f64, y: f64) -> Result<f64> {
        if !self.prediction_space.contains(gamma) {
            return Err(Error::PredictionOutsideSpace(gamma));
        }
        if !self.observation_space.contains(y) {
            return Err(Error::ObservationOutsideSpace(y));
        }
        Ok(self.evaluate_unchecked(gamma, y))
    }

    /// `λ(γ, y)` without domain checks; used by inner loops that evaluate
    /// over already-validated catalogs.
    pub fn evaluate_unchecked(&self, gamma: f64, y: f64) -> f64 {
        match &self.kind {
            LossKind::Square => (gamma - y) * (gamma - y),
            LossKind::Absolute => (gamma - y).abs(),
            LossKind::ZeroOneThreshold { t } => {
                if (gamma - y).abs() >= *t {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Custom { table } => {
                let gi = self.prediction_index(gamma);
                let yi = self.observation_index(y);
                table[gi][yi]
            }
        }
    }

    fn prediction_index(&self, g: f64) -> usize {
        match &self.prediction_space {
            PredictionSpace::Finite { values } => {
                values.iter().position(|v| *v == g).expect("validated prediction")
            }
            PredictionSpace::UnitInterval => unreachable!("custom losses have finite Γ"),
        }
    }

    fn observation_index(&self, y: f64) -> usize {
        match &self.observation_space {
            ObservationSpace::Finite { values } => {
                values.iter().position(|v| *v == y).expect("validated observation")
            }
            ObservationSpace::UnitInterval => unreachable!("custom losses have finite Y"),
        }
    }

    /// `ρ(g, g') = sup_y |λ(g, y) − λ(g', y)|`.
    ///
    /// Closed forms over `Y = [0, 1]`: for absolute loss the sup is attained
    /// past the smaller of the two predictions and equals `|g − g'|`; for
    /// square loss the difference is affine in `y`, so the sup sits at an
    /// endpoint and equals `|g − g'| · max(g + g', 2 − g − g')`. Finite `Y`
    /// is enumerated.
    pub fn pseudo_metric(&self, g: f64, g2: f64) -> Result<f64> {
        if !self.prediction_space.contains(g) {
            return Err(Error::PredictionOutsideSpace(g));
        }
        if !self.prediction_space.contains(g2) {
            return Err(Error::PredictionOutsideSpace(g2));
        }
        if g == g2 {
            return Ok(0.0);
        }
        if let ObservationSpace::Finite { values } = &self.observation_space {
            return Ok(values
                .iter()
                .map(|y| (self.evaluate_unchecked(g, *y) - self.evaluate_unchecked(g2, *y)).abs())
                .fold(0.0, f64::max));
        }
        match &self.kind {
            LossKind::Absolute => Ok((g - g2).abs()),
            LossKind::Square => {
                let s = g + g2;
                Ok((g - g2).abs() * s.max(2.0 - s))
            }
            _ => Err(Error::Unsupported(
                "pseudo-metric over interval observations needs a closed form (square or absolute)"
                    .into(),
            )),
        }
    }

    /// Upper bound on the bounded-Lipschitz norm `sup_y ‖λ(·, y)‖_BL`,
    /// namely `lipschitz_constant + bound`.
    ///
    /// The Lipschitz part is measured against the native metric of `Γ`
    /// (absolute difference of predictions), not against `ρ`; since
    /// `ρ(g, g') ≤ lipschitz_constant · |g − g'|`, a `ρ`-based seminorm is
    /// bounded by a constant multiple of this one, and only finiteness
    /// enters the regret bounds.
    pub fn bl_norm_bound(&self) -> Result<f64> {
        if !self.lipschitz_constant.is_finite() {
            return Err(Error::Unsupported(
                "bounded-Lipschitz norm is infinite for discontinuous losses".into(),
            ));
        }
        Ok(self.lipschitz_constant + self.bound)
    }

    /// Candidate maximizers of `y ↦ |E_P λ(·,y) − E_Q λ(·,y)|` for measures
    /// supported on `atoms`. Finite `Y` enumerates; over `Y = [0,1]` the
    /// square difference is affine in `y` (endpoints suffice) and the
    /// absolute difference is piecewise linear with breakpoints at the atoms.
    pub fn observation_candidates(&self, atoms: &[f64]) -> Result<Vec<f64>> {
        match &self.observation_space {
            ObservationSpace::Finite { values } => Ok(values.clone()),
            ObservationSpace::UnitInterval => match &self.kind {
                LossKind::Square => Ok(vec![0.0, 1.0]),
                LossKind::Absolute => {
                    let mut c = vec![0.0, 1.0];
                    c.extend_from_slice(atoms);
                    Ok(c)
                }
                _ => Err(Error::Unsupported(
                    "expected-loss sup over interval observations needs a closed form".into(),
                )),
            },
        }
    }

    /// Points of `Γ` to draw sampled checks from.
    pub fn sample_predictions(&self, n: usize) -> Vec<f64> {
        match &self.prediction_space {
            PredictionSpace::UnitInterval => {
                (0..n).map(|i| i as f64 / (n - 1).max(1) as f64).collect()
            }
            PredictionSpace::Finite { values } => values.clone(),
        }
    }

    /// Points of `Y` to draw sampled checks from.
    pub fn sample_observations(&self, n: usize) -> Vec<f64> {
        match &self.observation_space {
            ObservationSpace::UnitInterval => {
                (0..n).map(|i| i as f64 / (n - 1).max(1) as f64).collect()
            }
            ObservationSpace::Finite { values } => values.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_matches_formulas() {
        let sq = LossFunction::square();
        assert_eq!(sq.evaluate(0.5, 1.0).unwrap(), 0.25);
        assert_eq!(sq.evaluate(0.3, 0.3).unwrap(), 0.0);
        let ab = LossFunction::absolute();
        assert!((ab.evaluate(0.2, 0.9).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let sq = LossFunction::square();
        assert!(matches!(
            sq.evaluate(1.5, 0.0),
            Err(Error::PredictionOutsideSpace(_))
        ));
        assert!(matches!(
            sq.evaluate(0.5, -0.1),
            Err(Error::ObservationOutsideSpace(_))
        ));
        let zo = LossFunction::zero_one_threshold(0.5).unwrap();
        assert!(matches!(
            zo.evaluate(0.5, 0.25),
            Err(Error::ObservationOutsideSpace(_))
        ));
    }

    #[test]
    fn zero_one_threshold_is_binary_misclassification() {
        let zo = LossFunction::zero_one_threshold(0.5).unwrap();
        assert_eq!(zo.evaluate(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(zo.evaluate(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(zo.evaluate(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(zo.evaluate(0.6, 1.0).unwrap(), 0.0);
        assert!(!zo.is_convex());
    }

    #[test]
    fn pseudo_metric_examples() {
        let sq01 = LossFunction::square()
            .with_observations(vec![0.0, 1.0])
            .unwrap();
        assert_eq!(sq01.pseudo_metric(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(sq01.pseudo_metric(0.4, 0.4).unwrap(), 0.0);
        let ab = LossFunction::absolute();
        assert!((ab.pseudo_metric(0.3, 0.7).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn square_pseudo_metric_matches_dense_enumeration() {
        let sq = LossFunction::square();
        for i in 0..=20 {
            for j in 0..=20 {
                let (g, g2) = (i as f64 / 20.0, j as f64 / 20.0);
                let closed = sq.pseudo_metric(g, g2).unwrap();
                let brute = (0..=4000)
                    .map(|k| {
                        let y = k as f64 / 4000.0;
                        (sq.evaluate_unchecked(g, y) - sq.evaluate_unchecked(g2, y)).abs()
                    })
                    .fold(0.0, f64::max);
                assert!((closed - brute).abs() < 1e-6, "g={g} g'={g2}");
            }
        }
    }

    #[test]
    fn bl_norm_bounds() {
        assert_eq!(LossFunction::square().bl_norm_bound().unwrap(), 3.0);
        assert_eq!(LossFunction::absolute().bl_norm_bound().unwrap(), 2.0);
        let zero = LossFunction::custom(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(zero.bl_norm_bound().unwrap(), 0.0);
        assert!(matches!(
            LossFunction::zero_one_threshold(0.5).unwrap().bl_norm_bound(),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn bound_holds_on_dense_sample() {
        for loss in [
            LossFunction::square(),
            LossFunction::absolute(),
            LossFunction::zero_one_threshold(0.5).unwrap(),
        ] {
            let gs = loss.sample_predictions(101);
            let ys = loss.sample_observations(101);
            let mut pairs = 0usize;
            for g in &gs {
                for y in &ys {
                    assert!(loss.evaluate(*g, *y).unwrap().abs() <= loss.bound);
                    pairs += 1;
                }
            }
            assert!(pairs >= 200, "dense enough sample");
        }
    }

    #[test]
    fn custom_loss_table_lookup_and_moduli() {
        let loss = LossFunction::custom(
            vec![0.0, 0.5, 1.0],
            vec![0.0, 1.0],
            vec![vec![0.0, 1.0], vec![0.3, 0.3], vec![1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(loss.evaluate(0.5, 1.0).unwrap(), 0.3);
        assert_eq!(loss.bound, 1.0);
        // Steepest quotient: |0.0 - 0.3| / 0.5 vs |0.0 - 1.0| / 1.0 vs ...
        assert!((loss.lipschitz_constant - 1.4).abs() < 1e-12);
        assert!(!loss.is_convex());
        assert!(loss.evaluate(0.25, 1.0).is_err(), "off-grid prediction");
    }

    proptest! {
        #[test]
        fn convexity_of_square_and_absolute(
            g in 0.0f64..=1.0,
            g2 in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
            alpha in 0.0f64..=1.0,
        ) {
            for loss in [LossFunction::square(), LossFunction::absolute()] {
                let mix = alpha * g + (1.0 - alpha) * g2;
                let lhs = loss.evaluate_unchecked(mix.clamp(0.0, 1.0), y);
                let rhs = alpha * loss.evaluate_unchecked(g, y)
                    + (1.0 - alpha) * loss.evaluate_unchecked(g2, y);
                prop_assert!(lhs <= rhs + 1e-12);
            }
        }

        #[test]
        fn pseudo_metric_axioms(
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
            c in 0.0f64..=1.0,
        ) {
            for loss in [LossFunction::square(), LossFunction::absolute()] {
                let ab = loss.pseudo_metric(a, b).unwrap();
                let ba = loss.pseudo_metric(b, a).unwrap();
                let bc = loss.pseudo_metric(b, c).unwrap();
                let ac = loss.pseudo_metric(a, c).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(ab >= 0.0);
                prop_assert!(loss.pseudo_metric(a, a).unwrap() == 0.0);
                prop_assert!(ac <= ab + bc + 1e-12);
            }
        }

        #[test]
        fn pseudo_metric_dominates_pointwise_gap(
            g in 0.0f64..=1.0,
            g2 in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
        ) {
            for loss in [LossFunction::square(), LossFunction::absolute()] {
                let gap = (loss.evaluate_unchecked(g, y) - loss.evaluate_unchecked(g2, y)).abs();
                prop_assert!(gap <= loss.pseudo_metric(g, g2).unwrap() + 1e-12);
            }
        }

        #[test]
        fn lipschitz_modulus(
            g in 0.0f64..=1.0,
            g2 in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
        ) {
            for loss in [LossFunction::square(), LossFunction::absolute()] {
                let gap = (loss.evaluate_unchecked(g, y) - loss.evaluate_unchecked(g2, y)).abs();
                prop_assert!(gap <= loss.lipschitz_constant * (g - g2).abs() + 1e-12);
            }
        }
    }
}
