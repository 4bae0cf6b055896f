//! The three subcommands: `run` (play the configured games and write
//! traces), `verify` (the full inequality battery with a pass/fail table),
//! and `sweep` (analytic vs empirical thresholds across parameter axes).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use waa_core::engine::{mean_comparison_sides, PredictionValue};
use waa_core::experts::ExpertPool;
use waa_core::harness::{
    audit_trace, check_lil_envelope, run_randomized, run_scenario, universality_verdict,
    AuditReport, RandomizedRun, RealityScenario, RegretTrace, UniversalityVerdict,
};
use waa_core::losses::LossFunction;
use waa_core::measures::{expected_loss_distance, fm_distance, FiniteMeasure};

use crate::config::{self, ExperimentConfig, Mode, NegativeControl};
use crate::report::{
    downsample, write_json, write_regret_chart, write_text, AuditSummary, CheckResult,
    RunSummary, SampledSummary, TraceSummary, UniversalitySummary, VerifyReport, TOOL_VERSION,
};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub svg: bool,
    pub seed_override: Option<u64>,
}

struct Ctx {
    cfg: ExperimentConfig,
    hash: String,
    out_dir: PathBuf,
    /// Directory of the config file; replay paths resolve against it.
    base_dir: PathBuf,
    pool: rayon::ThreadPool,
}

fn prepare(opts: &CommonOpts) -> Result<Ctx, CliError> {
    let (cfg, hash) = config::load(&opts.config)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("waa-out"));
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::resource(format!("creating {}: {e}", out_dir.display())))?;
    let base_dir = opts
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::resource(format!("thread pool: {e}")))?;
    Ok(Ctx { cfg, hash, out_dir, base_dir, pool })
}

fn mode_str(mode: Mode) -> &'static str {
    match mode {
        Mode::Deterministic => "deterministic",
        Mode::Randomized => "randomized",
    }
}

// ----------------------------------------------------------------- combos

/// One scenario × rule game, fully played and audited.
struct Combo<V: PredictionValue> {
    scenario: String,
    rule: String,
    seed: u64,
    epsilon: f64,
    trace: RegretTrace<V>,
    report: AuditReport,
    verdict: UniversalityVerdict,
}

fn play_combo<V: PredictionValue>(
    scenario: &RealityScenario,
    pool: &ExpertPool<V>,
    loss: &LossFunction,
    rule_name: &str,
    rule: &waa_core::harness::BenchmarkRule<V>,
) -> Result<Combo<V>, CliError> {
    let label = format!("{} x {}", scenario.name, rule_name);
    let trace = run_scenario(scenario, pool, loss, rule)
        .map_err(|e| CliError::config(format!("{label}: {e}")))?;
    let report = audit_trace(&trace, pool, loss)
        .map_err(|e| CliError::invariant(format!("{label}: audit: {e}")))?;
    let epsilon = 0.5f64.powi(rule.level() as i32);
    let verdict = universality_verdict(&trace, loss, epsilon)
        .map_err(|e| CliError::invariant(format!("{label}: {e}")))?;
    Ok(Combo {
        scenario: scenario.name.clone(),
        rule: rule_name.to_string(),
        seed: scenario.seed,
        epsilon,
        trace,
        report,
        verdict,
    })
}

fn audit_combo<V: PredictionValue>(
    combo: &mut Combo<V>,
    pool: &ExpertPool<V>,
    loss: &LossFunction,
) -> Result<(), CliError> {
    combo.report = audit_trace(&combo.trace, pool, loss)
        .map_err(|e| CliError::invariant(format!("{} x {}: audit: {e}", combo.scenario, combo.rule)))?;
    Ok(())
}

fn build_det_combos(ctx: &Ctx, opts: &CommonOpts) -> Result<Vec<Combo<f64>>, CliError> {
    let cfg = &ctx.cfg;
    let structure = cfg.structure()?;
    let loss = cfg.loss()?;
    let pool = cfg.det_pool(&structure, cfg.experts.grid)?;
    let scenarios = cfg.scenarios(&structure, &ctx.base_dir, opts.seed_override, cfg.horizon)?;
    let rules = cfg.det_rules(&structure)?;
    let work: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..rules.len()).map(move |r| (s, r)))
        .collect();
    ctx.pool.install(|| {
        work.par_iter()
            .map(|&(s, r)| play_combo(&scenarios[s], &pool, &loss, &rules[r].0, &rules[r].1))
            .collect()
    })
}

struct RandCombo {
    combo: Combo<FiniteMeasure>,
    run: RandomizedRun,
}

fn build_rand_combos(ctx: &Ctx, opts: &CommonOpts) -> Result<Vec<RandCombo>, CliError> {
    let cfg = &ctx.cfg;
    let structure = cfg.structure()?;
    let loss = cfg.loss()?;
    let pool = cfg.rand_pool(&structure, cfg.experts.grid)?;
    let scenarios = cfg.scenarios(&structure, &ctx.base_dir, opts.seed_override, cfg.horizon)?;
    let rules = cfg.rand_rules(&structure)?;
    let work: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..rules.len()).map(move |r| (s, r)))
        .collect();
    ctx.pool.install(|| {
        work.par_iter()
            .map(|&(s, r)| {
                let (name, rule) = &rules[r];
                let scenario = &scenarios[s];
                let label = format!("{} x {}", scenario.name, name);
                let run = run_randomized(scenario, &pool, &loss, rule, &cfg.seeds)
                    .map_err(|e| CliError::config(format!("{label}: {e}")))?;
                let report = audit_trace(&run.mean, &pool, &loss)
                    .map_err(|e| CliError::invariant(format!("{label}: audit: {e}")))?;
                let epsilon = 0.5f64.powi(rule.level() as i32);
                let verdict = universality_verdict(&run.mean, &loss, epsilon)
                    .map_err(|e| CliError::invariant(format!("{label}: {e}")))?;
                let mean = run.mean.clone();
                Ok(RandCombo {
                    combo: Combo {
                        scenario: scenario.name.clone(),
                        rule: name.clone(),
                        seed: scenario.seed,
                        epsilon,
                        trace: mean,
                        report,
                        verdict,
                    },
                    run,
                })
            })
            .collect()
    })
}

/// The first audit check that failed, phrased with inequality and round.
fn audit_failure(report: &AuditReport, label: &str) -> Option<String> {
    if !report.lemma9_ok {
        return Some(format!(
            "lemma9-gap: aggregation gap {:.3e} < -1e-9 at round {} ({label})",
            report.min_lemma9_gap, report.min_lemma9_round
        ));
    }
    if !report.auditor_consistent {
        return Some(format!(
            "lemma9-replay-agreement: relative discrepancy {:.3e} >= 1e-9 at round {} ({label})",
            report.auditor_max_discrepancy, report.auditor_worst_round
        ));
    }
    if !report.lemma5_ok {
        return Some(format!(
            "lemma5-regret-bound: margin {:.3e} < -1e-9 at round {} ({label})",
            report.worst_lemma5_margin, report.worst_lemma5_round
        ));
    }
    if !report.convexity_ok {
        return Some(format!(
            "countable-convexity: margin {:.3e} at round {} ({label})",
            report.worst_convexity_margin, report.worst_convexity_round
        ));
    }
    None
}

// -------------------------------------------------------------------- run

pub fn cmd_run(opts: &CommonOpts) -> Result<(), CliError> {
    let ctx = prepare(opts)?;
    let cfg = &ctx.cfg;
    let mode = cfg.mode;
    let horizon = cfg.horizon;
    let loss = cfg.loss()?;

    let mut traces = Vec::new();
    let mut first_violation: Option<String> = None;

    match mode {
        Mode::Deterministic => {
            let combos = build_det_combos(&ctx, opts)?;
            for c in &combos {
                let file = write_trace_files(&ctx, opts, c, None)?;
                note_violation(&mut first_violation, c);
                traces.push(trace_summary(c, file, None));
                println!("{}", run_line(c));
            }
        }
        Mode::Randomized => {
            let combos = build_rand_combos(&ctx, opts)?;
            for rc in &combos {
                let c = &rc.combo;
                let sampled = sampled_summary(cfg, &loss, rc)?;
                let file = write_trace_files(&ctx, opts, c, None)?;
                note_violation(&mut first_violation, c);
                traces.push(trace_summary(c, file, sampled));
                println!("{}", run_line(c));
            }
        }
    }

    let pool_size = match mode {
        Mode::Deterministic => cfg.det_pool(&cfg.structure()?, cfg.experts.grid)?.len(),
        Mode::Randomized => cfg.rand_pool(&cfg.structure()?, cfg.experts.grid)?.len(),
    };
    let summary = RunSummary {
        tool_version: TOOL_VERSION,
        config_hash: ctx.hash.clone(),
        mode: mode_str(mode),
        horizon,
        pool_size,
        loss_bound: loss.bound,
        seed_override: opts.seed_override,
        traces,
    };
    write_json(&ctx.out_dir.join("summary.json"), &summary)?;
    println!("wrote {}", ctx.out_dir.join("summary.json").display());

    match first_violation {
        Some(v) => Err(CliError::invariant(v)),
        None => Ok(()),
    }
}

fn note_violation<V: PredictionValue>(slot: &mut Option<String>, c: &Combo<V>) {
    if slot.is_none() {
        let label = format!("{} x {}", c.scenario, c.rule);
        *slot = audit_failure(&c.report, &label);
    }
}

fn run_line<V: PredictionValue>(c: &Combo<V>) -> String {
    format!(
        "{} x {}: {} rounds, learner {:.4}, rule {:.4}, min gap {:.3e}, audit {}",
        c.scenario,
        c.rule,
        c.trace.horizon(),
        c.trace.final_learner_loss,
        c.trace.final_rule_loss,
        c.report.min_lemma9_gap,
        if c.report.all_ok() { "ok" } else { "FAILED" },
    )
}

fn write_trace_files<V: PredictionValue>(
    ctx: &Ctx,
    opts: &CommonOpts,
    c: &Combo<V>,
    extra_metadata: Option<&[(&str, String)]>,
) -> Result<String, CliError> {
    let stem = format!("trace-{}-{}", c.scenario, c.rule);
    let csv_name = format!("{stem}.csv");
    let path = ctx.out_dir.join(&csv_name);
    // Deliberately no output paths in the metadata: identical config and
    // seed must give byte-identical files whatever `--out` was.
    let mut metadata: Vec<(&str, String)> = vec![
        ("tool_version", TOOL_VERSION.to_string()),
        ("config_hash", ctx.hash.clone()),
        ("mode", mode_str(ctx.cfg.mode).to_string()),
        ("scenario", c.scenario.clone()),
        ("rule", c.rule.clone()),
        ("seed", c.seed.to_string()),
        ("horizon", c.trace.horizon().to_string()),
    ];
    if let Some(extra) = extra_metadata {
        metadata.extend(extra.iter().map(|(k, v)| (*k, v.clone())));
    }
    let file = fs::File::create(&path)
        .map_err(|e| CliError::resource(format!("creating {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    c.trace
        .write_csv(&mut w, &metadata)
        .and_then(|()| w.flush())
        .map_err(|e| CliError::resource(format!("writing {}: {e}", path.display())))?;

    if opts.svg {
        let regret: Vec<(u64, f64)> = c
            .trace
            .rounds
            .iter()
            .zip(&c.trace.cumulative_rule_losses)
            .map(|(r, cr)| (r.n, r.cumulative_learner_loss - cr))
            .collect();
        let bound: Vec<(u64, f64)> = c
            .trace
            .rounds
            .iter()
            .zip(&c.trace.lemma5_bounds)
            .map(|(r, b)| (r.n, b + c.trace.nearest_delta * r.n as f64))
            .collect();
        let svg_path = ctx.out_dir.join(format!("chart-{}-{}.svg", c.scenario, c.rule));
        write_regret_chart(
            &svg_path,
            &format!("{} x {}: cumulative regret", c.scenario, c.rule),
            &downsample(&regret, 1000),
            &downsample(&bound, 1000),
        )?;
    }
    Ok(csv_name)
}

fn trace_summary<V: PredictionValue>(
    c: &Combo<V>,
    file: String,
    sampled: Option<SampledSummary>,
) -> TraceSummary {
    TraceSummary {
        scenario: c.scenario.clone(),
        rule: c.rule.clone(),
        file,
        final_learner_loss: c.trace.final_learner_loss,
        final_rule_loss: c.trace.final_rule_loss,
        final_best_expert_loss: c.trace.final_best_expert_loss,
        nearest_expert: c.trace.nearest_expert,
        nearest_delta: c.trace.nearest_delta,
        nearest_prior: c.trace.nearest_prior,
        first_round_within_tolerance: c.trace.first_round_within_tolerance,
        audit: AuditSummary::from(&c.report),
        universality: UniversalitySummary::from_verdict(&c.verdict, c.epsilon),
        sampled,
    }
}

fn sampled_summary(
    cfg: &ExperimentConfig,
    loss: &LossFunction,
    rc: &RandCombo,
) -> Result<Option<SampledSummary>, CliError> {
    let horizon = rc.combo.trace.horizon();
    let fraction_within_epsilon = match &rc.combo.verdict {
        UniversalityVerdict::Feasible { analytic_threshold, .. }
            if *analytic_threshold <= horizon =>
        {
            let n0 = (*analytic_threshold).max(1);
            let within = rc
                .run
                .paths
                .iter()
                .filter(|p| p.sup_average_regret(n0) <= rc.combo.epsilon)
                .count();
            Some(within as f64 / rc.run.paths.len() as f64)
        }
        _ => None,
    };
    let n0 = cfg.verify.lil_n0;
    let lil_fraction = if horizon >= n0 {
        Some(
            check_lil_envelope(&rc.run, loss.bound, n0)
                .map_err(|e| CliError::invariant(format!("lil envelope: {e}")))?,
        )
    } else {
        None
    };
    Ok(Some(SampledSummary {
        seeds: rc.run.paths.len(),
        epsilon: rc.combo.epsilon,
        fraction_within_epsilon,
        lil_n0: n0,
        lil_fraction,
    }))
}

// ----------------------------------------------------------------- verify

pub fn cmd_verify(opts: &CommonOpts) -> Result<(), CliError> {
    let ctx = prepare(opts)?;
    let cfg = &ctx.cfg;
    let loss = cfg.loss()?;
    let mut checks = Vec::new();

    match cfg.mode {
        Mode::Deterministic => {
            let structure = cfg.structure()?;
            let pool = cfg.det_pool(&structure, cfg.experts.grid)?;
            let mut combos = build_det_combos(&ctx, opts)?;
            if cfg.verify.negative_control == NegativeControl::CorruptRecord {
                corrupt_first(&mut combos);
                for c in combos.iter_mut() {
                    audit_combo(c, &pool, &loss)?;
                }
            }
            checks.extend(audit_checks(&combos, true));
            checks.extend(shared_checks(cfg, &loss));
            checks.push(CheckResult::skip(
                "lil-envelope",
                "deterministic mode has no sampled paths".into(),
            ));
            checks.push(universality_check(&combos));
        }
        Mode::Randomized => {
            let structure = cfg.structure()?;
            let pool = cfg.rand_pool(&structure, cfg.experts.grid)?;
            let mut rand = build_rand_combos(&ctx, opts)?;
            if cfg.verify.negative_control == NegativeControl::CorruptRecord {
                let mut only: Vec<&mut Combo<FiniteMeasure>> =
                    rand.iter_mut().map(|rc| &mut rc.combo).collect();
                if let Some(first) = only.first_mut() {
                    corrupt_combo(first);
                }
                for c in only {
                    audit_combo(c, &pool, &loss)?;
                }
            }
            let combos: Vec<&Combo<FiniteMeasure>> = rand.iter().map(|rc| &rc.combo).collect();
            checks.extend(audit_checks_ref(&combos, false));
            checks.extend(shared_checks(cfg, &loss));
            checks.push(lil_check(cfg, &loss, &rand));
            checks.push(universality_check_ref(&combos));
        }
    }

    let report = VerifyReport {
        tool_version: TOOL_VERSION,
        config_hash: ctx.hash.clone(),
        mode: mode_str(cfg.mode),
        checks,
    };
    print!("{}", report.render());
    write_json(&ctx.out_dir.join("verify.json"), &report)?;

    match report.first_failure() {
        Some(f) => Err(CliError::invariant(format!("{}: {}", f.name, f.detail))),
        None => {
            println!("verify: all checks passed");
            Ok(())
        }
    }
}

fn corrupt_first(combos: &mut [Combo<f64>]) {
    if let Some(c) = combos.first_mut() {
        corrupt_combo(c);
    }
}

/// Plants the negative-control corruption: one recorded per-round loss is
/// inflated mid-trace, which the replay audit must detect.
fn corrupt_combo<V: PredictionValue>(c: &mut Combo<V>) {
    let mid = c.trace.rounds.len() / 2;
    c.trace.rounds[mid].learner_loss += 5.0;
}

fn audit_checks<V: PredictionValue>(combos: &[Combo<V>], convex: bool) -> Vec<CheckResult> {
    let refs: Vec<&Combo<V>> = combos.iter().collect();
    audit_checks_ref(&refs, convex)
}

fn audit_checks_ref<V: PredictionValue>(
    combos: &[&Combo<V>],
    convex: bool,
) -> Vec<CheckResult> {
    let label = |c: &Combo<V>| format!("{} x {}", c.scenario, c.rule);

    let worst_gap = combos
        .iter()
        .min_by(|a, b| a.report.min_lemma9_gap.total_cmp(&b.report.min_lemma9_gap))
        .expect("nonempty");
    let gap_ok = combos.iter().all(|c| c.report.lemma9_ok);

    let worst_disc = combos
        .iter()
        .max_by(|a, b| {
            a.report
                .auditor_max_discrepancy
                .total_cmp(&b.report.auditor_max_discrepancy)
        })
        .expect("nonempty");
    let disc_ok = combos.iter().all(|c| c.report.auditor_consistent);

    let worst_l5 = combos
        .iter()
        .min_by(|a, b| a.report.worst_lemma5_margin.total_cmp(&b.report.worst_lemma5_margin))
        .expect("nonempty");
    let l5_ok = combos.iter().all(|c| c.report.lemma5_ok);

    let worst_cx = combos
        .iter()
        .max_by(|a, b| {
            let am = convexity_badness(&a.report, convex);
            am.total_cmp(&convexity_badness(&b.report, convex))
        })
        .expect("nonempty");
    let cx_ok = combos.iter().all(|c| c.report.convexity_ok);

    vec![
        CheckResult::gate(
            "lemma9-gap",
            gap_ok,
            format!(
                "min gap {:.3e} at round {} ({}), bar -1e-9",
                worst_gap.report.min_lemma9_gap,
                worst_gap.report.min_lemma9_round,
                label(worst_gap)
            ),
        ),
        CheckResult::gate(
            "lemma9-replay-agreement",
            disc_ok,
            format!(
                "max relative discrepancy {:.3e} at round {} ({}), bar 1e-9",
                worst_disc.report.auditor_max_discrepancy,
                worst_disc.report.auditor_worst_round,
                label(worst_disc)
            ),
        ),
        CheckResult::gate(
            "lemma5-regret-bound",
            l5_ok,
            format!(
                "min bound margin {:.3e} at round {} ({}), bar -1e-9",
                worst_l5.report.worst_lemma5_margin,
                worst_l5.report.worst_lemma5_round,
                label(worst_l5)
            ),
        ),
        CheckResult::gate(
            "countable-convexity",
            cx_ok,
            if convex {
                format!(
                    "min (mixture loss - learner loss) {:.3e} at round {} ({}), bar -1e-12",
                    worst_cx.report.worst_convexity_margin,
                    worst_cx.report.worst_convexity_round,
                    label(worst_cx)
                )
            } else {
                format!(
                    "max |mixture loss - learner loss| {:.3e} at round {} ({}), bar 1e-12",
                    worst_cx.report.worst_convexity_margin,
                    worst_cx.report.worst_convexity_round,
                    label(worst_cx)
                )
            },
        ),
    ]
}

fn convexity_badness(report: &AuditReport, convex: bool) -> f64 {
    if convex {
        -report.worst_convexity_margin
    } else {
        report.worst_convexity_margin
    }
}

/// Mode-independent randomized-instance checks: the power-mean inequality,
/// the Fortet–Mourier LP against its two-point closed form, the metric
/// axioms, and the bounded-Lipschitz bound.
fn shared_checks(cfg: &ExperimentConfig, loss: &LossFunction) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.verify.rng_seed);
    let mut out = Vec::new();

    // Power-mean inequality on random subconvex instances.
    let instances = cfg.verify.mean_comparison_instances;
    let mut worst_rel = f64::NEG_INFINITY;
    for _ in 0..instances {
        let k = rng.gen_range(1..=8);
        let mut priors: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = priors.iter().sum();
        let scale = rng.gen_range(0.1..=1.0) / total;
        priors.iter_mut().for_each(|q| *q *= scale);
        let losses: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..=20.0 * loss.bound)).collect();
        let x = rng.gen_range(0.01..1.0);
        let a = rng.gen_range(0.01..1.0);
        let (lhs, rhs) = mean_comparison_sides(&priors, &losses, x, a).expect("valid instance");
        worst_rel = worst_rel.max((rhs - lhs) / rhs.abs().max(lhs.abs()));
    }
    out.push(CheckResult::gate(
        "mean-comparison",
        worst_rel <= 1e-12,
        format!("{instances} instances, worst relative violation {worst_rel:.3e}, bar 1e-12"),
    ));

    // LP vs the closed form 2ρ/(ρ+2) for two point masses.
    let mut worst_lp = 0.0f64;
    for _ in 0..100 {
        let rho = rng.gen_range(f64::EPSILON..=2.0);
        let two_point = LossFunction::custom(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![vec![rho / 2.0, 0.0], vec![-rho / 2.0, 0.0]],
        )
        .expect("valid two-point loss");
        let lp = fm_distance(
            &FiniteMeasure::point_mass(0.0),
            &FiniteMeasure::point_mass(1.0),
            &two_point,
        )
        .expect("two-atom LP");
        worst_lp = worst_lp.max((lp - 2.0 * rho / (rho + 2.0)).abs());
    }
    out.push(CheckResult::gate(
        "fm-closed-form",
        worst_lp <= 1e-9,
        format!("100 two-point instances, worst |LP - closed form| {worst_lp:.3e}, bar 1e-9"),
    ));

    // Metric axioms on random measure triples over the configured loss.
    let support = loss.sample_predictions(5);
    let draw = |rng: &mut ChaCha8Rng| random_measure(rng, &support);
    let triples = cfg.verify.metric_triples;
    let mut worst_axiom = 0.0f64;
    for _ in 0..triples {
        let mu = draw(&mut rng);
        let nu = draw(&mut rng);
        let ka = draw(&mut rng);
        let d_mn = fm_distance(&mu, &nu, loss).expect("LP");
        let d_nm = fm_distance(&nu, &mu, loss).expect("LP");
        let d_nk = fm_distance(&nu, &ka, loss).expect("LP");
        let d_mk = fm_distance(&mu, &ka, loss).expect("LP");
        let self_d = fm_distance(&mu, &mu, loss).expect("LP");
        worst_axiom = worst_axiom
            .max((d_mn - d_nm).abs())
            .max(self_d)
            .max(d_mk - (d_mn + d_nk))
            .max(-d_mn);
    }
    out.push(CheckResult::gate(
        "fm-metric-axioms",
        worst_axiom <= 1e-9,
        format!("{triples} triples, worst axiom violation {worst_axiom:.3e}, bar 1e-9"),
    ));

    // Expected-loss differences against the bounded-Lipschitz bound.
    match loss.bl_norm_bound() {
        Ok(bl) => {
            let pairs = cfg.verify.bl_pairs;
            let mut worst_bl = f64::NEG_INFINITY;
            for _ in 0..pairs {
                let mu = random_measure(&mut rng, &support);
                let nu = random_measure(&mut rng, &support);
                let gap = expected_loss_distance(&mu, &nu, loss).expect("finite");
                let beta = fm_distance(&mu, &nu, loss).expect("LP");
                worst_bl = worst_bl.max(gap - bl * beta);
            }
            out.push(CheckResult::gate(
                "bounded-lipschitz-bound",
                worst_bl <= 1e-9,
                format!("{pairs} pairs, worst excess over {bl:.3} x FM {worst_bl:.3e}, bar 1e-9"),
            ));
        }
        Err(_) => out.push(CheckResult::skip(
            "bounded-lipschitz-bound",
            "loss has no finite Lipschitz constant".into(),
        )),
    }

    out
}

fn random_measure(rng: &mut ChaCha8Rng, support: &[f64]) -> FiniteMeasure {
    let k = rng.gen_range(1..=support.len());
    let mut idx: Vec<usize> = (0..support.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..support.len());
        idx.swap(i, j);
    }
    let masses: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = masses.iter().sum();
    FiniteMeasure::new((0..k).map(|i| (support[idx[i]], masses[i] / total)).collect())
        .expect("valid random measure")
}

fn lil_check(cfg: &ExperimentConfig, loss: &LossFunction, rand: &[RandCombo]) -> CheckResult {
    let n0 = cfg.verify.lil_n0;
    let horizon = cfg.horizon;
    if horizon < n0 {
        return CheckResult::skip(
            "lil-envelope",
            format!("horizon {horizon} shorter than n0 {n0}"),
        );
    }
    // Negative control: understate the loss bound to L/4; the envelope
    // shrinks by 4 and honest paths must now escape it.
    let (l, controlled) = match cfg.verify.negative_control {
        NegativeControl::UnderstateLilBound => (loss.bound / 4.0, true),
        _ => (loss.bound, false),
    };
    let mut worst = f64::INFINITY;
    let mut worst_label = String::new();
    for rc in rand {
        match check_lil_envelope(&rc.run, l, n0) {
            Ok(f) => {
                if f < worst {
                    worst = f;
                    worst_label = format!("{} x {}", rc.combo.scenario, rc.combo.rule);
                }
            }
            Err(e) => return CheckResult::gate("lil-envelope", false, format!("{e}")),
        }
    }
    let bar = cfg.verify.lil_bar;
    let note = if controlled { " [understated bound control]" } else { "" };
    CheckResult::gate(
        "lil-envelope",
        worst >= bar,
        format!(
            "min fraction inside envelope {worst:.3} ({worst_label}), bar {bar}{note}"
        ),
    )
}

fn universality_check<V: PredictionValue>(combos: &[Combo<V>]) -> CheckResult {
    let refs: Vec<&Combo<V>> = combos.iter().collect();
    universality_check_ref(&refs)
}

fn universality_check_ref<V: PredictionValue>(combos: &[&Combo<V>]) -> CheckResult {
    let mut failures = Vec::new();
    let mut skips = Vec::new();
    let mut passes = 0usize;
    for c in combos {
        let label = format!("{} x {}", c.scenario, c.rule);
        match &c.verdict {
            UniversalityVerdict::Feasible { analytic_threshold, empirical_threshold, .. } => {
                let horizon = c.trace.horizon();
                if horizon < *analytic_threshold {
                    skips.push(format!(
                        "{label}: horizon {horizon} < analytic threshold {analytic_threshold}"
                    ));
                } else if empirical_threshold.map(|e| e <= *analytic_threshold).unwrap_or(false) {
                    passes += 1;
                } else {
                    failures.push(format!(
                        "{label}: empirical threshold {} exceeds analytic {}",
                        empirical_threshold
                            .map(|e| e.to_string())
                            .unwrap_or_else(|| "unreached".into()),
                        analytic_threshold
                    ));
                }
            }
            UniversalityVerdict::Infeasible { delta, epsilon, required_grid } => {
                skips.push(format!(
                    "{label}: delta {delta:.3} > epsilon/2 = {:.3}, required grid {required_grid}",
                    epsilon / 2.0
                ));
            }
        }
    }
    if !failures.is_empty() {
        CheckResult::gate("universality-threshold", false, failures.join("; "))
    } else if passes == 0 && !skips.is_empty() {
        CheckResult::skip("universality-threshold", skips.join("; "))
    } else {
        let mut detail = format!("{passes} rule(s) within the analytic threshold");
        if !skips.is_empty() {
            detail.push_str(&format!("; skipped: {}", skips.join("; ")));
        }
        CheckResult::gate("universality-threshold", true, detail)
    }
}

// ------------------------------------------------------------------ sweep

struct SweepRow {
    m: u32,
    grid: usize,
    horizon: u64,
    epsilon: f64,
    verdict: UniversalityVerdict,
}

impl SweepRow {
    fn csv_line(&self) -> String {
        match &self.verdict {
            UniversalityVerdict::Feasible {
                analytic_threshold,
                empirical_threshold,
                delta,
                constant,
                analytic_covers_empirical,
            } => format!(
                "{},{},{},{},feasible,{},{},{},{},{},",
                self.m,
                self.grid,
                self.horizon,
                self.epsilon,
                delta,
                constant,
                analytic_threshold,
                empirical_threshold.map(|e| e.to_string()).unwrap_or_default(),
                analytic_covers_empirical,
            ),
            UniversalityVerdict::Infeasible { delta, required_grid, .. } => format!(
                "{},{},{},{},infeasible,{},,,,,{}",
                self.m, self.grid, self.horizon, self.epsilon, delta, required_grid,
            ),
        }
    }
}

const SWEEP_HEADER: &str =
    "m,grid,horizon,epsilon,status,delta,constant,analytic_threshold,empirical_threshold,covered,required_grid";

pub fn cmd_sweep(opts: &CommonOpts) -> Result<(), CliError> {
    let ctx = prepare(opts)?;
    let cfg = &ctx.cfg;
    let loss = cfg.loss()?;
    let sweep = cfg.sweep.clone().unwrap_or_default();
    let ms = if sweep.m.is_empty() { vec![cfg.quantizer.m_max] } else { sweep.m.clone() };
    let grids = if sweep.grid.is_empty() { vec![cfg.experts.grid] } else { sweep.grid.clone() };
    let horizons =
        if sweep.horizon.is_empty() { vec![cfg.horizon] } else { sweep.horizon.clone() };

    let mut axes = Vec::new();
    for &m in &ms {
        let eps_list: Vec<f64> = if sweep.epsilon.is_empty() {
            vec![0.5f64.powi(m as i32)]
        } else {
            sweep.epsilon.clone()
        };
        for &g in &grids {
            for &h in &horizons {
                for &eps in &eps_list {
                    axes.push((m, g, h, eps));
                }
            }
        }
    }

    let rows: Result<Vec<SweepRow>, CliError> = ctx.pool.install(|| {
        axes.par_iter()
            .map(|&(m, g, h, eps)| {
                let structure = cfg.structure_at(m)?;
                let scenarios = cfg.scenarios(&structure, &ctx.base_dir, opts.seed_override, h)?;
                let scenario = &scenarios[0];
                let verdict = match cfg.mode {
                    Mode::Deterministic => {
                        let pool = cfg.det_pool(&structure, g)?;
                        let rules = cfg.det_rules(&structure)?;
                        let trace = run_scenario(scenario, &pool, &loss, &rules[0].1)
                            .map_err(|e| CliError::config(format!("sweep m={m} grid={g}: {e}")))?;
                        universality_verdict(&trace, &loss, eps)
                    }
                    Mode::Randomized => {
                        let pool = cfg.rand_pool(&structure, g)?;
                        let rules = cfg.rand_rules(&structure)?;
                        let trace = run_scenario(scenario, &pool, &loss, &rules[0].1)
                            .map_err(|e| CliError::config(format!("sweep m={m} grid={g}: {e}")))?;
                        universality_verdict(&trace, &loss, eps)
                    }
                }
                .map_err(|e| CliError::invariant(format!("sweep m={m} grid={g}: {e}")))?;
                Ok(SweepRow { m, grid: g, horizon: h, epsilon: eps, verdict })
            })
            .collect()
    });
    let rows = rows?;

    let mut body = format!(
        "# tool_version={TOOL_VERSION}\n# config_hash={}\n{SWEEP_HEADER}\n",
        ctx.hash
    );
    for row in &rows {
        body.push_str(&row.csv_line());
        body.push('\n');
    }
    print!("{body}");
    let path = ctx.out_dir.join("sweep.csv");
    write_text(&path, &body)?;
    println!("wrote {}", path.display());
    Ok(())
}
