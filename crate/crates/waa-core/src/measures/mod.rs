//! Finite-support probability measures on the prediction space.
//!
//! These realize the randomized game: predictions become elements of `𝒫(Γ)`,
//! the loss becomes the expected loss `λ(μ, y) = Σ mass·λ(g, y)`, and the
//! Fortet–Mourier metric `β(μ, ν) = sup_{‖f‖_BL ≤ 1} |∫ f d(μ − ν)|` (over
//! the loss pseudo-metric `ρ` on `Γ`) makes the space of such measures
//! separable, cf. Dudley, "Real Analysis and Probability" (2002), §11.3.
//! `β` is computed exactly as a small linear program over the union support.

mod simplex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossFunction;

use simplex::solve_lp_max;

/// Predictions closer than this are merged into a single atom.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Largest union support the Fortet–Mourier LP accepts; beyond this the
/// dense tableau (≈ n² rows) stops being cheap.
pub const FM_SUPPORT_CAP: usize = 48;

/// A probability measure with finitely many atoms, sorted by prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl FiniteMeasure {
    /// Builds a measure from `(prediction, mass)` pairs. Atoms within
    /// [`ATOM_MERGE_TOL`] are merged, zero masses dropped; total mass must
    /// be 1 within `1e-12`.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|(g, m)| !g.is_finite() || !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidArgument(
                "atoms need finite predictions and nonnegative masses".into(),
            ));
        }
        let merged = merge_atoms(atoms);
        if merged.is_empty() {
            return Err(Error::InvalidArgument("measure needs positive total mass".into()));
        }
        let total: f64 = merged.iter().map(|(_, m)| m).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "atom masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms: merged })
    }

    /// Point mass at `g`: the embedding of a deterministic prediction.
    pub fn point_mass(g: f64) -> Self {
        Self { atoms: vec![(g, 1.0)] }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `Σ mass · λ(g, y)`; atoms are validated against `Γ`.
    pub fn expected_loss(&self, loss: &LossFunction, y: f64) -> Result<f64> {
        let mut acc = 0.0;
        for (g, m) in &self.atoms {
            acc += m * loss.evaluate(*g, y)?;
        }
        Ok(acc)
    }

    /// Expected loss without domain checks, for validated catalogs.
    pub fn expected_loss_unchecked(&self, loss: &LossFunction, y: f64) -> f64 {
        self.atoms
            .iter()
            .map(|(g, m)| m * loss.evaluate_unchecked(*g, y))
            .sum()
    }

    /// Draws an atom by inverse CDF over the canonical (sorted) order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (g, m) in &self.atoms {
            acc += m;
            if u < acc {
                return *g;
            }
        }
        self.atoms.last().expect("nonempty").0
    }

    /// Compact `g:mass` list for trace files.
    pub fn describe(&self) -> String {
        self.atoms
            .iter()
            .map(|(g, m)| format!("{g}:{m}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.retain(|(_, m)| *m > 0.0);
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite predictions"));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (g, m) in atoms {
        match merged.last_mut() {
            Some((g0, m0)) if (g - *g0).abs() <= ATOM_MERGE_TOL => *m0 += m,
            _ => merged.push((g, m)),
        }
    }
    merged
}

/// Weighted mixture `Σ wᵢ μᵢ`; weights must form a probability vector.
pub fn mix(weights: &[f64], measures: &[&FiniteMeasure]) -> Result<FiniteMeasure> {
    if weights.len() != measures.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} measures",
            weights.len(),
            measures.len()
        )));
    }
    if weights.is_empty() {
        return Err(Error::InvalidArgument("mixture needs at least one component".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mixture weights must be a probability vector (sum {total})"
        )));
    }
    let mut atoms = Vec::new();
    for (w, mu) in weights.iter().zip(measures) {
        if *w > 0.0 {
            atoms.extend(mu.atoms.iter().map(|(g, m)| (*g, w * m)));
        }
    }
    // Mixture of probability measures with probability weights; mass checks
    // in the constructor then hold by construction.
    FiniteMeasure::new(atoms)
}

/// `sup_y |E_μ λ(·, y) − E_ν λ(·, y)|`, the loss-distance between two
/// randomized predictions. The sup runs over finite `Y` exhaustively, or
/// over the kind-specific candidate maximizers on `Y = [0, 1]`.
pub fn expected_loss_distance(
    mu: &FiniteMeasure,
    nu: &FiniteMeasure,
    loss: &LossFunction,
) -> Result<f64> {
    let mut atoms: Vec<f64> = mu.atoms.iter().chain(&nu.atoms).map(|(g, _)| *g).collect();
    atoms.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    atoms.dedup();
    let mut best = 0.0f64;
    for y in loss.observation_candidates(&atoms)? {
        let d = (mu.expected_loss(loss, y)? - nu.expected_loss(loss, y)?).abs();
        best = best.max(d);
    }
    Ok(best)
}

/// The Fortet–Mourier distance `β(μ, ν)` over `(Γ, ρ)`, where `ρ` is the
/// loss pseudo-metric.
///
/// Computed as the exact LP: maximize `Σ dᵢ fᵢ` over `(f, c, s)` subject to
/// `|fᵢ| ≤ s`, `|fᵢ − fⱼ| ≤ c·ρ(gᵢ, gⱼ)`, `c + s ≤ 1`, where `dᵢ` are the
/// signed mass differences on the union support. For two point masses the
/// optimum is `2ρ/(ρ + 2)`, which serves as the solver's oracle.
pub fn fm_distance(mu: &FiniteMeasure, nu: &FiniteMeasure, loss: &LossFunction) -> Result<f64> {
    // Union support with signed differences; atoms within the merge
    // tolerance are identified.
    let mut support: Vec<(f64, f64)> = Vec::new();
    let mut add = |g: f64, d: f64| {
        for (g0, d0) in support.iter_mut() {
            if (g - *g0).abs() <= ATOM_MERGE_TOL {
                *d0 += d;
                return;
            }
        }
        support.push((g, d));
    };
    for (g, m) in &mu.atoms {
        add(*g, *m);
    }
    for (g, m) in &nu.atoms {
        add(*g, -*m);
    }
    support.retain(|(_, d)| d.abs() > 1e-15);
    let n = support.len();
    if n == 0 {
        return Ok(0.0);
    }
    if n > FM_SUPPORT_CAP {
        return Err(Error::Unsupported(format!(
            "Fortet-Mourier LP capped at union supports of {FM_SUPPORT_CAP} atoms, got {n}"
        )));
    }

    let mut rho = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = loss.pseudo_metric(support[i].0, support[j].0)?;
            rho[i][j] = r;
            rho[j][i] = r;
        }
    }

    // Variables: fᵢ = uᵢ − vᵢ with uᵢ, vᵢ ≥ 0, then c, s ≥ 0.
    let nv = 2 * n + 2;
    let (ci, si) = (2 * n, 2 * n + 1);
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for i in 0..n {
        // uᵢ − vᵢ − s ≤ 0 and vᵢ − uᵢ − s ≤ 0, i.e. |fᵢ| ≤ s.
        let mut r1 = vec![0.0; nv];
        r1[2 * i] = 1.0;
        r1[2 * i + 1] = -1.0;
        r1[si] = -1.0;
        let mut r2 = vec![0.0; nv];
        r2[2 * i] = -1.0;
        r2[2 * i + 1] = 1.0;
        r2[si] = -1.0;
        a.push(r1);
        b.push(0.0);
        a.push(r2);
        b.push(0.0);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                // fᵢ − fⱼ − c·ρᵢⱼ ≤ 0.
                let mut r = vec![0.0; nv];
                r[2 * i] = 1.0;
                r[2 * i + 1] = -1.0;
                r[2 * j] = -1.0;
                r[2 * j + 1] = 1.0;
                r[ci] = -rho[i][j];
                a.push(r);
                b.push(0.0);
            }
        }
    }
    let mut cap = vec![0.0; nv];
    cap[ci] = 1.0;
    cap[si] = 1.0;
    a.push(cap);
    b.push(1.0);

    let mut obj = vec![0.0; nv];
    for (i, (_, d)) in support.iter().enumerate() {
        obj[2 * i] = *d;
        obj[2 * i + 1] = -*d;
    }
    Ok(solve_lp_max(&obj, &a, &b))
}

/// All probability measures on `support` whose masses are multiples of
/// `1/denominator`, in lexicographic order of the mass vector. This is the
/// finite slice of the countable dense family "measures concentrated on
/// finite subsets and taking rational values" used by the randomized pool.
pub fn rational_measures(support: &[f64], denominator: u32) -> Result<Vec<FiniteMeasure>> {
    if support.is_empty() || denominator == 0 {
        return Err(Error::InvalidArgument(
            "rational measures need a nonempty support and positive denominator".into(),
        ));
    }
    let mut sorted = support.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    sorted.dedup();
    let mut out = Vec::new();
    let mut counts = vec![0u32; sorted.len()];
    compositions(denominator, 0, &mut counts, &sorted, denominator, &mut out)?;
    Ok(out)
}

fn compositions(
    remaining: u32,
    idx: usize,
    counts: &mut Vec<u32>,
    support: &[f64],
    q: u32,
    out: &mut Vec<FiniteMeasure>,
) -> Result<()> {
    if idx + 1 == support.len() {
        counts[idx] = remaining;
        let atoms: Vec<(f64, f64)> = support
            .iter()
            .zip(counts.iter())
            .filter(|(_, c)| **c > 0)
            .map(|(g, c)| (*g, *c as f64 / q as f64))
            .collect();
        out.push(FiniteMeasure::new(atoms)?);
        return Ok(());
    }
    for c in 0..=remaining {
        counts[idx] = c;
        compositions(remaining - c, idx + 1, counts, support, q, out)?;
    }
    Ok(())
}
