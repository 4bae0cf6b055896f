//! Reality generators: the adversary's side of the prediction protocol.
//!
//! Scenario kinds are oblivious (the generated sequence depends only on the
//! seed and the round index), which keeps full runs reproducible and lets
//! randomized-engine experiments reuse one signal/observation sequence
//! across sampling seeds. The protocol's perfect-information adversary, who
//! sees the learner's prediction before choosing the observation, is
//! available separately through [`AdaptiveReality`].

use std::io::BufRead;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::ObservationSpace;
use crate::spaces::{Signal, SignalSpace};

use super::BenchmarkRule;

/// How Reality draws signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSampler {
    /// Independent uniform draws from the signal space.
    UniformIid,
    /// Deterministic rotation through a fixed list of points.
    Cycle { points: Vec<Signal> },
}

impl SignalSampler {
    fn draw(&self, space: &SignalSpace, n: u64, rng: &mut ChaCha8Rng) -> Result<Signal> {
        match self {
            SignalSampler::UniformIid => Ok(match space {
                SignalSpace::UnitInterval => Signal::Scalar(rng.gen_range(0.0..=1.0)),
                SignalSpace::UnitCube { dim } => {
                    Signal::Vector((0..*dim).map(|_| rng.gen_range(0.0..=1.0)).collect())
                }
                SignalSpace::FiniteSet { labels } => {
                    Signal::Label(rng.gen_range(0..labels.len()))
                }
            }),
            SignalSampler::Cycle { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidArgument("cycle sampler needs points".into()));
                }
                let x = points[((n - 1) as usize) % points.len()].clone();
                if !space.contains(&x) {
                    return Err(Error::SignalOutsideSpace(format!("{x:?}")));
                }
                Ok(x)
            }
        }
    }
}

/// What Reality plays for observations.
#[derive(Debug, Clone)]
pub enum ScenarioKind {
    /// `y_n = target(x_n)` corrupted by noise: on an interval observation
    /// space the target is shifted by `U[-noise, noise]` and clamped; on a
    /// finite one it is replaced by a uniform element with probability
    /// `noise`.
    IidNoise { target: BenchmarkRule<f64>, noise: f64 },
    /// `y_n = target(x_n)` exactly.
    PiecewiseRule { target: BenchmarkRule<f64> },
    /// The active target switches every `period` rounds, as a function of
    /// the round index only (an oblivious adversary).
    AdversarialSwitch { targets: Vec<BenchmarkRule<f64>>, period: u64 },
    /// Replays a recorded `(x, y)` sequence.
    Replay { pairs: Vec<(Signal, f64)> },
}

/// A complete specification of Reality's play.
#[derive(Debug, Clone)]
pub struct RealityScenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub sampler: SignalSampler,
    pub horizon: u64,
    pub seed: u64,
}

impl RealityScenario {
    /// Materializes the full `(x_n, y_n)` sequence. Deterministic given the
    /// scenario; every pair is validated against the declared spaces.
    pub fn generate(
        &self,
        space: &SignalSpace,
        observations: &ObservationSpace,
    ) -> Result<Vec<(Signal, f64)>> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.horizon as usize);
        for n in 1..=self.horizon {
            let (x, y) = match &self.kind {
                ScenarioKind::Replay { pairs } => {
                    let (x, y) = pairs
                        .get((n - 1) as usize)
                        .ok_or_else(|| {
                            Error::InvalidArgument(format!(
                                "replay has {} rows, horizon needs {}",
                                pairs.len(),
                                self.horizon
                            ))
                        })?
                        .clone();
                    (x, y)
                }
                ScenarioKind::PiecewiseRule { target } => {
                    let x = self.sampler.draw(space, n, &mut rng)?;
                    let y = *target.value_at(&x)?;
                    (x, y)
                }
                ScenarioKind::IidNoise { target, noise } => {
                    let x = self.sampler.draw(space, n, &mut rng)?;
                    let t = *target.value_at(&x)?;
                    let y = match observations {
                        ObservationSpace::UnitInterval => {
                            (t + rng.gen_range(-noise..=*noise)).clamp(0.0, 1.0)
                        }
                        ObservationSpace::Finite { values } => {
                            if rng.gen::<f64>() < *noise {
                                values[rng.gen_range(0..values.len())]
                            } else {
                                t
                            }
                        }
                    };
                    (x, y)
                }
                ScenarioKind::AdversarialSwitch { targets, period } => {
                    if targets.is_empty() || *period == 0 {
                        return Err(Error::InvalidArgument(
                            "switch scenario needs targets and a positive period".into(),
                        ));
                    }
                    let x = self.sampler.draw(space, n, &mut rng)?;
                    let idx = (((n - 1) / period) as usize) % targets.len();
                    let y = *targets[idx].value_at(&x)?;
                    (x, y)
                }
            };
            if !space.contains(&x) {
                return Err(Error::SignalOutsideSpace(format!("round {n}: {x:?}")));
            }
            if !observations.contains(y) {
                return Err(Error::ObservationOutsideSpace(y));
            }
            out.push((x, y));
        }
        Ok(out)
    }
}

/// Parses a replay CSV of `x,y` rows. Signals are scalars, `;`-separated
/// vectors, or `#`-prefixed label indices; blank lines and `#`-comment
/// lines are skipped.
pub fn parse_replay_csv<R: BufRead>(reader: R) -> Result<Vec<(Signal, f64)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidArgument(format!("replay read: {e}")))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "x,y" {
            continue;
        }
        let (xs, ys) = line.split_once(',').ok_or_else(|| {
            Error::InvalidArgument(format!("replay line {}: expected 'x,y'", i + 1))
        })?;
        let xs = xs.trim();
        let x = if let Some(idx) = xs.strip_prefix('@') {
            Signal::Label(idx.parse().map_err(|e| {
                Error::InvalidArgument(format!("replay line {}: label: {e}", i + 1))
            })?)
        } else if xs.contains(';') {
            let coords: std::result::Result<Vec<f64>, _> =
                xs.split(';').map(|c| c.trim().parse::<f64>()).collect();
            Signal::Vector(coords.map_err(|e| {
                Error::InvalidArgument(format!("replay line {}: vector: {e}", i + 1))
            })?)
        } else {
            Signal::Scalar(xs.parse().map_err(|e| {
                Error::InvalidArgument(format!("replay line {}: scalar: {e}", i + 1))
            })?)
        };
        let y: f64 = ys.trim().parse().map_err(|e| {
            Error::InvalidArgument(format!("replay line {}: observation: {e}", i + 1))
        })?;
        out.push((x, y));
    }
    Ok(out)
}

/// The perfect-information adversary: sees the entire history including the
/// learner's current prediction before choosing the observation.
pub trait AdaptiveReality<V> {
    /// Reality's signal for round `n` (1-based), given completed history.
    fn next_signal(&mut self, n: u64) -> Signal;
    /// Reality's observation after seeing the learner's move.
    fn observe(&mut self, n: u64, x: &Signal, gamma: &V) -> f64;
}

/// Against square loss on binary outcomes: always answer on the far side
/// of the prediction, forcing per-round loss at least 1/4.
pub struct WorstCaseSquare;

impl AdaptiveReality<f64> for WorstCaseSquare {
    fn next_signal(&mut self, n: u64) -> Signal {
        Signal::Scalar(((n % 7) as f64) / 7.0)
    }

    fn observe(&mut self, _n: u64, _x: &Signal, gamma: &f64) -> f64 {
        if *gamma >= 0.5 {
            0.0
        } else {
            1.0
        }
    }
}
