//! The TOML experiment configuration: schema, validation with field-level
//! diagnostics, and builders that materialize waa-core objects.
//!
//! See `configs/` at the workspace root for commented examples of both
//! modes. The schema round-trips: parse → serialize → parse is identity.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use waa_core::experts::{
    enumerate_measure_pool, enumerate_pool, ExpertPool, PredictionGrid, PriorScheme,
    DEFAULT_POOL_CAP,
};
use waa_core::harness::{parse_replay_csv, BenchmarkRule, RealityScenario, ScenarioKind, SignalSampler};
use waa_core::losses::LossFunction;
use waa_core::measures::FiniteMeasure;
use waa_core::spaces::{ApproximationStructure, Signal, SignalSpace};

use crate::{build_error, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Point predictions, convex losses.
    Deterministic,
    /// Measure-valued predictions with sampled loss paths.
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    UnitInterval,
    UnitCube { dim: usize },
    FiniteSet { labels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerSpec {
    /// Finest quantizer level; the pool holds every level up to this.
    pub m_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    Square,
    Absolute,
    /// `λ(γ, y) = 1 if |γ − y| ≥ threshold`, binary observations;
    /// randomized mode only (not convex).
    ZeroOneThreshold { threshold: f64 },
}

fn default_denominator() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertsSpec {
    /// Number of evenly spaced grid points the experts may predict.
    pub grid: usize,
    pub prior: PriorScheme,
    /// Randomized mode: catalog measures carry masses in multiples of
    /// `1/denominator` over the grid.
    #[serde(default = "default_denominator")]
    pub denominator: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// One of `iid_noise`, `piecewise`, `switch`, `replay`.
    pub kind: String,
    #[serde(default)]
    pub seed: u64,
    /// Level of the target rule (`iid_noise`, `piecewise`, `switch`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_level: Option<u32>,
    /// Target rule values, one per level cell (`iid_noise`, `piecewise`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    /// Rotating target tables (`switch`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<Vec<f64>>>,
    /// Rounds between switches (`switch`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u64>,
    /// Observation noise (`iid_noise`): interval targets are shifted by
    /// `U[-noise, noise]` and clamped; finite ones are resampled uniformly
    /// with probability `noise`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    /// Replay CSV of `x,y` rows, resolved relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// Deterministic signal rotation instead of uniform IID draws
    /// (unit-interval spaces only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub name: String,
    pub level: u32,
    /// One prediction per cell of `φ_level`; in randomized mode these
    /// become point-mass measures.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeControl {
    None,
    /// Corrupt one recorded round before auditing; the audit must fail.
    CorruptRecord,
    /// Check the iterated-logarithm envelope with the loss bound
    /// understated four-fold; the check must fail (randomized mode).
    UnderstateLilBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub mean_comparison_instances: u32,
    pub metric_triples: u32,
    pub bl_pairs: u32,
    /// First round of the iterated-logarithm envelope check.
    pub lil_n0: u64,
    /// Minimum fraction of sampled paths the envelope must contain.
    pub lil_bar: f64,
    pub rng_seed: u64,
    pub negative_control: NegativeControl,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            mean_comparison_instances: 2000,
            metric_triples: 200,
            bl_pairs: 200,
            lil_n0: 50,
            lil_bar: 0.9,
            rng_seed: 7,
            negative_control: NegativeControl::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Quantizer levels to sweep; empty means the configured `m_max`.
    pub m: Vec<u32>,
    /// Grid sizes to sweep; empty means the configured `experts.grid`.
    pub grid: Vec<usize>,
    /// Horizons to sweep; empty means the configured `horizon`.
    pub horizon: Vec<u64>,
    /// Regret targets ε to sweep; empty means `2^{-m}` per swept level.
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub horizon: u64,
    /// Sampled-path seeds (randomized mode).
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Default output directory; `--out` overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub space: SpaceSpec,
    pub quantizer: QuantizerSpec,
    pub loss: LossSpec,
    pub experts: ExpertsSpec,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default, rename = "rule")]
    pub rules: Vec<RuleSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

/// Parses and validates a config file; returns the config plus the SHA-256
/// hex digest of the raw bytes (embedded in every output).
pub fn load(path: &Path) -> Result<(ExperimentConfig, String), CliError> {
    let raw = fs::read(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(raw.clone())
        .map_err(|e| CliError::config(format!("{} is not UTF-8: {e}", path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    let hash = format!("{:x}", Sha256::digest(&raw));
    Ok((cfg, hash))
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl ExperimentConfig {
    /// Full structural validation. Collects every diagnostic rather than
    /// stopping at the first.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs: Vec<String> = Vec::new();

        if self.horizon == 0 {
            errs.push("horizon: must be >= 1".into());
        }
        if self.scenarios.is_empty() {
            errs.push("scenario: at least one [[scenario]] block is required".into());
        }
        if self.rules.is_empty() {
            errs.push("rule: at least one [[rule]] block is required".into());
        }
        if self.mode == Mode::Randomized && self.seeds.is_empty() {
            errs.push("seeds: randomized mode needs at least one sampled-path seed".into());
        }
        if self.experts.grid == 0 {
            errs.push("experts.grid: must be >= 1".into());
        }
        if self.mode == Mode::Randomized && self.experts.denominator == 0 {
            errs.push("experts.denominator: must be >= 1".into());
        }
        match &self.loss {
            LossSpec::ZeroOneThreshold { threshold } => {
                if self.mode == Mode::Deterministic {
                    errs.push(
                        "loss.kind: the deterministic engine needs a convex loss \
                         (square or absolute); zero_one_threshold runs in randomized mode"
                            .into(),
                    );
                }
                if !(*threshold > 0.0 && *threshold <= 1.0) {
                    errs.push(format!("loss.threshold: {threshold} outside (0, 1]"));
                }
            }
            LossSpec::Square | LossSpec::Absolute => {}
        }
        if !(self.verify.lil_bar > 0.0 && self.verify.lil_bar <= 1.0) {
            errs.push(format!("verify.lil_bar: {} outside (0, 1]", self.verify.lil_bar));
        }
        if self.verify.lil_n0 < 3 {
            errs.push("verify.lil_n0: must be >= 3 (the envelope needs ln ln N > 0)".into());
        }
        if self.verify.negative_control == NegativeControl::UnderstateLilBound
            && self.mode == Mode::Deterministic
        {
            errs.push(
                "verify.negative_control: understate_lil_bound needs randomized mode \
                 (deterministic paths have no sampling deviation)"
                    .into(),
            );
        }

        // Everything past this point needs the structure and loss; if they
        // fail to build, report that and stop.
        let structure = match self.structure() {
            Ok(s) => s,
            Err(e) => {
                errs.push(e.message);
                return Err(invalid(errs));
            }
        };
        let loss = match self.loss() {
            Ok(l) => l,
            Err(e) => {
                errs.push(e.message);
                return Err(invalid(errs));
            }
        };

        let mut seen = std::collections::HashSet::new();
        for (i, sc) in self.scenarios.iter().enumerate() {
            if !valid_name(&sc.name) {
                errs.push(format!(
                    "scenario[{i}].name: {:?} (use [A-Za-z0-9._-], not leading '.')",
                    sc.name
                ));
            } else if !seen.insert(sc.name.clone()) {
                errs.push(format!("scenario[{i}].name: duplicate name {:?}", sc.name));
            }
            match sc.kind.as_str() {
                "iid_noise" => {
                    check_target_table(
                        &mut errs,
                        &structure,
                        &loss,
                        i,
                        "target",
                        sc.target_level,
                        sc.target.as_deref().unwrap_or(&[]),
                        &sc.kind,
                    );
                    match sc.noise {
                        None => errs.push(format!(
                            "scenario[{i}].noise: required for kind \"iid_noise\""
                        )),
                        Some(n) if !(0.0..=1.0).contains(&n) => {
                            errs.push(format!("scenario[{i}].noise: {n} outside [0, 1]"))
                        }
                        _ => {}
                    }
                    forbid(&mut errs, i, &[
                        ("targets", sc.targets.is_some()),
                        ("period", sc.period.is_some()),
                        ("file", sc.file.is_some()),
                    ]);
                }
                "piecewise" => {
                    check_target_table(
                        &mut errs,
                        &structure,
                        &loss,
                        i,
                        "target",
                        sc.target_level,
                        sc.target.as_deref().unwrap_or(&[]),
                        &sc.kind,
                    );
                    forbid(&mut errs, i, &[
                        ("noise", sc.noise.is_some()),
                        ("targets", sc.targets.is_some()),
                        ("period", sc.period.is_some()),
                        ("file", sc.file.is_some()),
                    ]);
                }
                "switch" => {
                    match &sc.targets {
                        None => errs.push(format!(
                            "scenario[{i}].targets: required for kind \"switch\""
                        )),
                        Some(ts) if ts.is_empty() => {
                            errs.push(format!("scenario[{i}].targets: needs at least one table"))
                        }
                        Some(ts) => {
                            for t in ts {
                                check_target_table(
                                    &mut errs,
                                    &structure,
                                    &loss,
                                    i,
                                    "targets",
                                    sc.target_level,
                                    t,
                                    &sc.kind,
                                );
                            }
                        }
                    }
                    match sc.period {
                        None => errs.push(format!(
                            "scenario[{i}].period: required for kind \"switch\""
                        )),
                        Some(0) => errs.push(format!("scenario[{i}].period: must be >= 1")),
                        _ => {}
                    }
                    forbid(&mut errs, i, &[
                        ("target", sc.target.is_some()),
                        ("noise", sc.noise.is_some()),
                        ("file", sc.file.is_some()),
                    ]);
                }
                "replay" => {
                    if sc.file.is_none() {
                        errs.push(format!("scenario[{i}].file: required for kind \"replay\""));
                    }
                    forbid(&mut errs, i, &[
                        ("target", sc.target.is_some()),
                        ("target_level", sc.target_level.is_some()),
                        ("targets", sc.targets.is_some()),
                        ("period", sc.period.is_some()),
                        ("noise", sc.noise.is_some()),
                        ("cycle", sc.cycle.is_some()),
                    ]);
                }
                other => errs.push(format!(
                    "scenario[{i}].kind: unknown kind {other:?} \
                     (iid_noise | piecewise | switch | replay)"
                )),
            }
            if let Some(points) = &sc.cycle {
                if self.space != SpaceSpec::UnitInterval {
                    errs.push(format!(
                        "scenario[{i}].cycle: cycle sampling is only supported on the unit \
                         interval (use a replay file for other spaces)"
                    ));
                } else if points.is_empty() {
                    errs.push(format!("scenario[{i}].cycle: needs at least one point"));
                } else {
                    for (j, p) in points.iter().enumerate() {
                        if !(0.0..=1.0).contains(p) {
                            errs.push(format!("scenario[{i}].cycle[{j}]: {p} outside [0, 1]"));
                        }
                    }
                }
            }
        }

        let level_range = structure.min_level()..=structure.max_level();
        let mut seen = std::collections::HashSet::new();
        for (i, r) in self.rules.iter().enumerate() {
            if !valid_name(&r.name) {
                errs.push(format!(
                    "rule[{i}].name: {:?} (use [A-Za-z0-9._-], not leading '.')",
                    r.name
                ));
            } else if !seen.insert(r.name.clone()) {
                errs.push(format!("rule[{i}].name: duplicate name {:?}", r.name));
            }
            if !level_range.contains(&r.level) {
                errs.push(format!(
                    "rule[{i}].level: level {} outside [{}, {}]",
                    r.level,
                    level_range.start(),
                    level_range.end()
                ));
                continue;
            }
            let cells = structure.cell_count(r.level).expect("level checked");
            if r.values.len() != cells {
                errs.push(format!(
                    "rule[{i}].values: {} values for {cells} level-{} cells",
                    r.values.len(),
                    r.level
                ));
            }
            for (j, v) in r.values.iter().enumerate() {
                if !loss.prediction_space.contains(*v) {
                    errs.push(format!(
                        "rule[{i}].values[{j}]: {v} outside the prediction space"
                    ));
                }
            }
        }

        if let Some(sweep) = &self.sweep {
            let rule_floor = self.rules.first().map_or(0, |r| r.level);
            let scenario_floor = self
                .scenarios
                .first()
                .and_then(|s| s.target_level)
                .unwrap_or(0);
            for (i, m) in sweep.m.iter().enumerate() {
                if let Err(e) = ApproximationStructure::new(self.space_value(), *m) {
                    errs.push(format!("sweep.m[{i}]: {e}"));
                } else if *m < rule_floor.max(scenario_floor) {
                    errs.push(format!(
                        "sweep.m[{i}]: level {m} below the first rule/target level {}",
                        rule_floor.max(scenario_floor)
                    ));
                }
            }
            for (i, g) in sweep.grid.iter().enumerate() {
                if *g == 0 {
                    errs.push(format!("sweep.grid[{i}]: must be >= 1"));
                }
            }
            for (i, h) in sweep.horizon.iter().enumerate() {
                if *h == 0 {
                    errs.push(format!("sweep.horizon[{i}]: must be >= 1"));
                }
            }
            for (i, e) in sweep.epsilon.iter().enumerate() {
                if !(*e > 0.0) {
                    errs.push(format!("sweep.epsilon[{i}]: must be > 0"));
                }
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(invalid(errs))
        }
    }

    fn space_value(&self) -> SignalSpace {
        match &self.space {
            SpaceSpec::UnitInterval => SignalSpace::UnitInterval,
            SpaceSpec::UnitCube { dim } => SignalSpace::UnitCube { dim: *dim },
            SpaceSpec::FiniteSet { labels } => SignalSpace::FiniteSet { labels: labels.clone() },
        }
    }

    pub fn structure(&self) -> Result<ApproximationStructure, CliError> {
        self.structure_at(self.quantizer.m_max)
    }

    /// Structure at an overridden finest level (used by sweeps).
    pub fn structure_at(&self, m_max: u32) -> Result<ApproximationStructure, CliError> {
        ApproximationStructure::new(self.space_value(), m_max)
            .map_err(|e| CliError::config(format!("quantizer.m_max: {e}")))
    }

    pub fn loss(&self) -> Result<LossFunction, CliError> {
        match &self.loss {
            LossSpec::Square => Ok(LossFunction::square()),
            LossSpec::Absolute => Ok(LossFunction::absolute()),
            LossSpec::ZeroOneThreshold { threshold } => {
                LossFunction::zero_one_threshold(*threshold)
                    .map_err(|e| CliError::config(format!("loss.threshold: {e}")))
            }
        }
    }

    pub fn grid(&self, g: usize) -> Result<PredictionGrid, CliError> {
        PredictionGrid::uniform(g).map_err(|e| CliError::config(format!("experts.grid: {e}")))
    }

    pub fn det_pool(
        &self,
        structure: &ApproximationStructure,
        grid_size: usize,
    ) -> Result<ExpertPool<f64>, CliError> {
        enumerate_pool(
            structure,
            &self.grid(grid_size)?,
            structure.max_level(),
            self.experts.prior,
            DEFAULT_POOL_CAP,
        )
        .map_err(|e| build_error("experts", e))
    }

    pub fn rand_pool(
        &self,
        structure: &ApproximationStructure,
        grid_size: usize,
    ) -> Result<ExpertPool<FiniteMeasure>, CliError> {
        enumerate_measure_pool(
            structure,
            &self.grid(grid_size)?,
            self.experts.denominator,
            structure.max_level(),
            self.experts.prior,
            DEFAULT_POOL_CAP,
        )
        .map_err(|e| build_error("experts", e))
    }

    /// Materializes the declared scenarios. `base` resolves replay paths;
    /// `seed_override` replaces every scenario seed when given.
    pub fn scenarios(
        &self,
        structure: &ApproximationStructure,
        base: &Path,
        seed_override: Option<u64>,
        horizon: u64,
    ) -> Result<Vec<RealityScenario>, CliError> {
        let mut out = Vec::with_capacity(self.scenarios.len());
        for (i, sc) in self.scenarios.iter().enumerate() {
            let target = |level: Option<u32>, values: &[f64]| {
                BenchmarkRule::new(structure, level.expect("validated"), values.to_vec())
                    .map_err(|e| CliError::config(format!("scenario[{i}]: {e}")))
            };
            let kind = match sc.kind.as_str() {
                "iid_noise" => ScenarioKind::IidNoise {
                    target: target(sc.target_level, sc.target.as_deref().expect("validated"))?,
                    noise: sc.noise.expect("validated"),
                },
                "piecewise" => ScenarioKind::PiecewiseRule {
                    target: target(sc.target_level, sc.target.as_deref().expect("validated"))?,
                },
                "switch" => ScenarioKind::AdversarialSwitch {
                    targets: sc
                        .targets
                        .as_ref()
                        .expect("validated")
                        .iter()
                        .map(|t| target(sc.target_level, t))
                        .collect::<Result<_, _>>()?,
                    period: sc.period.expect("validated"),
                },
                "replay" => {
                    let rel = Path::new(sc.file.as_deref().expect("validated"));
                    let path = if rel.is_absolute() { rel.into() } else { base.join(rel) };
                    let file = fs::File::open(&path).map_err(|e| {
                        CliError::config(format!(
                            "scenario[{i}].file: cannot read {}: {e}",
                            path.display()
                        ))
                    })?;
                    let pairs = parse_replay_csv(BufReader::new(file))
                        .map_err(|e| CliError::config(format!("scenario[{i}].file: {e}")))?;
                    ScenarioKind::Replay { pairs }
                }
                _ => unreachable!("validated"),
            };
            let sampler = match &sc.cycle {
                Some(points) => SignalSampler::Cycle {
                    points: points.iter().map(|p| Signal::Scalar(*p)).collect(),
                },
                None => SignalSampler::UniformIid,
            };
            out.push(RealityScenario {
                name: sc.name.clone(),
                kind,
                sampler,
                horizon,
                seed: seed_override.unwrap_or(sc.seed),
            });
        }
        Ok(out)
    }

    pub fn det_rules(
        &self,
        structure: &ApproximationStructure,
    ) -> Result<Vec<(String, BenchmarkRule<f64>)>, CliError> {
        self.rules
            .iter()
            .map(|r| {
                BenchmarkRule::new(structure, r.level, r.values.clone())
                    .map(|b| (r.name.clone(), b))
                    .map_err(|e| CliError::config(format!("rule {:?}: {e}", r.name)))
            })
            .collect()
    }

    /// Rules as point-mass measures for the randomized engine.
    pub fn rand_rules(
        &self,
        structure: &ApproximationStructure,
    ) -> Result<Vec<(String, BenchmarkRule<FiniteMeasure>)>, CliError> {
        self.rules
            .iter()
            .map(|r| {
                let values = r.values.iter().map(|v| FiniteMeasure::point_mass(*v)).collect();
                BenchmarkRule::new(structure, r.level, values)
                    .map(|b| (r.name.clone(), b))
                    .map_err(|e| CliError::config(format!("rule {:?}: {e}", r.name)))
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn check_target_table(
    errs: &mut Vec<String>,
    structure: &ApproximationStructure,
    loss: &LossFunction,
    i: usize,
    field: &str,
    level: Option<u32>,
    table: &[f64],
    kind: &str,
) {
    let Some(level) = level else {
        errs.push(format!("scenario[{i}].target_level: required for kind {kind:?}"));
        return;
    };
    let range = structure.min_level()..=structure.max_level();
    if !range.contains(&level) {
        errs.push(format!(
            "scenario[{i}].target_level: level {level} outside [{}, {}]",
            range.start(),
            range.end()
        ));
        return;
    }
    let cells = structure.cell_count(level).expect("level checked");
    if table.len() != cells {
        errs.push(format!(
            "scenario[{i}].{field}: {} values for {cells} level-{level} cells",
            table.len()
        ));
    }
    for (j, y) in table.iter().enumerate() {
        if !loss.observation_space.contains(*y) {
            errs.push(format!(
                "scenario[{i}].{field}[{j}]: {y} outside the observation space"
            ));
        }
    }
}

fn forbid(errs: &mut Vec<String>, i: usize, fields: &[(&str, bool)]) {
    for (name, present) in fields {
        if *present {
            errs.push(format!("scenario[{i}].{name}: not used by this scenario kind"));
        }
    }
}

fn invalid(errs: Vec<String>) -> CliError {
    CliError::config(format!(
        "invalid config:\n  - {}",
        errs.join("\n  - ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_deterministic() -> &'static str {
        r#"
mode = "deterministic"
horizon = 200

[space]
kind = "unit_interval"

[quantizer]
m_max = 2

[loss]
kind = "square"

[experts]
grid = 3
prior = "hierarchical"

[[scenario]]
name = "iid"
kind = "iid_noise"
seed = 7
target_level = 1
target = [0.25, 0.75]
noise = 0.2

[[rule]]
name = "step"
level = 1
values = [0.0, 1.0]
"#
    }

    #[test]
    fn parses_and_validates_the_minimal_config() {
        let cfg: ExperimentConfig = toml::from_str(minimal_deterministic()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.mode, Mode::Deterministic);
        assert_eq!(cfg.experts.denominator, 2, "defaulted");
        assert_eq!(cfg.verify, VerifySpec::default());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg: ExperimentConfig = toml::from_str(minimal_deterministic()).unwrap();
        let serialized = toml::to_string(&cfg).unwrap();
        let reparsed: ExperimentConfig = toml::from_str(&serialized).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = minimal_deterministic().replace("horizon = 200", "horizon = 200\nbogus = 1");
        let e = toml::from_str::<ExperimentConfig>(&bad).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn diagnostics_name_the_offending_fields() {
        let mut cfg: ExperimentConfig = toml::from_str(minimal_deterministic()).unwrap();
        cfg.horizon = 0;
        cfg.scenarios[0].noise = Some(3.0);
        cfg.rules[0].values = vec![0.0, 0.5, 1.0];
        let msg = cfg.validate().unwrap_err().message;
        for needle in ["horizon", "scenario[0].noise", "rule[0].values"] {
            assert!(msg.contains(needle), "missing {needle:?} in:\n{msg}");
        }
    }

    #[test]
    fn nonconvex_loss_rejected_in_deterministic_mode() {
        let bad = minimal_deterministic()
            .replace("kind = \"square\"", "kind = \"zero_one_threshold\"\nthreshold = 0.5");
        let cfg: ExperimentConfig = toml::from_str(&bad).unwrap();
        let msg = cfg.validate().unwrap_err().message;
        assert!(msg.contains("convex"), "{msg}");
        assert_eq!(cfg.validate().unwrap_err().code, crate::EXIT_CONFIG);
    }

    #[test]
    fn empty_scenarios_rejected() {
        let mut cfg: ExperimentConfig = toml::from_str(minimal_deterministic()).unwrap();
        cfg.scenarios.clear();
        let msg = cfg.validate().unwrap_err().message;
        assert!(msg.contains("scenario"), "{msg}");
    }

    #[test]
    fn scenario_builders_honor_seed_override() {
        let cfg: ExperimentConfig = toml::from_str(minimal_deterministic()).unwrap();
        let structure = cfg.structure().unwrap();
        let scenarios = cfg
            .scenarios(&structure, Path::new("."), Some(99), cfg.horizon)
            .unwrap();
        assert_eq!(scenarios[0].seed, 99);
        let scenarios = cfg
            .scenarios(&structure, Path::new("."), None, cfg.horizon)
            .unwrap();
        assert_eq!(scenarios[0].seed, 7);
    }
}
