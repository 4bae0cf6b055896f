//! Enumeration of m-elementary experts and their prior weights.
//!
//! An m-elementary expert is a prediction rule that factors through the
//! level-m quantizer: its prediction depends on the signal only via
//! `φ_m(x)`, and its values lie in a finite catalog (a grid of points, or
//! grid-supported rational measures). A pool holds every such expert for
//! levels up to `m_max`, `C^(2^m)` of them per level for a catalog of size
//! `C`, ordered by level then lexicographic table order.
//!
//! Priors follow a hierarchical scheme: level `m` receives mass `2^{-m}/Z`
//! (with `Z` normalizing over the levels present), split uniformly among
//! that level's experts, so `Σ_k q_k = 1` and `ln(1/q_k)` grows like
//! `2^m ln C`. The theory only needs `Σ q_k ≤ 1` and `q_k > 0`; the scheme
//! is isolated behind [`PriorScheme`] so alternatives can be swapped in.

use serde::{Deserialize, Serialize};

use crate::engine::PredictionValue;
use crate::error::{Error, Result};
use crate::losses::LossFunction;
use crate::measures::{rational_measures, FiniteMeasure};
use crate::spaces::{ApproximationStructure, Signal};

/// Default hard cap on pool size; exceeding it is an error, never a silent
/// truncation.
pub const DEFAULT_POOL_CAP: usize = 1_000_000;

/// The finite slice of the dense countable prediction set `Γ*` that experts
/// take values in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionGrid {
    values: Vec<f64>,
}

impl PredictionGrid {
    /// `G` evenly spaced points of `[0, 1]`: `{j/(G−1)}`. A single-point
    /// grid collapses to the midpoint `{0.5}`.
    pub fn uniform(g: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::InvalidArgument("grid needs at least one value".into()));
        }
        let values = if g == 1 {
            vec![0.5]
        } else {
            (0..g).map(|j| j as f64 / (g - 1) as f64).collect()
        };
        Ok(Self { values })
    }

    /// An explicit grid; values must be strictly increasing within `[0, 1]`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one value".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("grid values must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "grid values must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How prior mass is spread over the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScheme {
    /// `q = (2^{-m}/Z) / C^(2^m)` for a level-m expert; favors coarse
    /// levels, `Σ q = 1`.
    Hierarchical,
    /// `q = 1/|pool|` for every expert.
    Uniform,
}

/// One level's worth of experts: `count` tables of `cells` catalog digits,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct LevelBlock {
    pub(crate) level: u32,
    pub(crate) cells: usize,
    /// Global 0-based index of the first expert in this block.
    pub(crate) start: usize,
    pub(crate) count: usize,
    pub(crate) digits: Vec<u16>,
}

impl LevelBlock {
    #[inline]
    pub(crate) fn digit(&self, local: usize, cell: usize) -> u16 {
        self.digits[local * self.cells + cell]
    }
}

/// The full expert pool: catalog of prediction values, per-level tables,
/// and prior weights. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertPool<V> {
    structure: ApproximationStructure,
    catalog: Vec<V>,
    pub(crate) blocks: Vec<LevelBlock>,
    ln_priors: Vec<f64>,
    /// Experts sharing a prior value share a group; per-group loss minima
    /// make the Lemma 5 sweep over all experts tractable.
    pub(crate) group_of: Vec<u16>,
    pub(crate) group_ln_q: Vec<f64>,
}

impl<V: PredictionValue> ExpertPool<V> {
    pub fn len(&self) -> usize {
        self.ln_priors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_priors.is_empty()
    }

    pub fn structure(&self) -> &ApproximationStructure {
        &self.structure
    }

    pub fn catalog(&self) -> &[V] {
        &self.catalog
    }

    /// Levels present, ascending.
    pub fn levels(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.level).collect()
    }

    /// `ln q_k`; `k` is 1-based.
    pub fn ln_prior(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(self.ln_priors[k - 1])
    }

    /// `q_k`; `k` is 1-based.
    pub fn prior(&self, k: usize) -> Result<f64> {
        Ok(self.ln_prior(k)?.exp())
    }

    /// Level of expert `k` (1-based).
    pub fn level_of(&self, k: usize) -> Result<u32> {
        self.check_index(k)?;
        Ok(self.block_of(k - 1).level)
    }

    pub(crate) fn ln_priors(&self) -> &[f64] {
        &self.ln_priors
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidArgument(format!(
                "expert index {k} outside 1..={}",
                self.len()
            )));
        }
        Ok(())
    }

    fn block_of(&self, global: usize) -> &LevelBlock {
        self.blocks
            .iter()
            .find(|b| global >= b.start && global < b.start + b.count)
            .expect("checked index")
    }

    /// Active cell per block for a signal, in block order.
    pub(crate) fn active_cells(&self, x: &Signal) -> Result<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| self.structure.cell_index(b.level, x))
            .collect()
    }

    /// `D_k(x)`: table lookup at the expert's own quantization of `x`;
    /// `k` is 1-based.
    pub fn predict_expert(&self, k: usize, x: &Signal) -> Result<&V> {
        self.check_index(k)?;
        let block = self.block_of(k - 1);
        let cell = self.structure.cell_index(block.level, x)?;
        let digit = block.digit(k - 1 - block.start, cell);
        Ok(&self.catalog[digit as usize])
    }

    /// Nearest level-`level` expert to a benchmark table, in the worst-case
    /// (over cells) loss distance; ties break to the lowest index.
    /// `rule_values[c]` is the rule's value on the `c`-th point of
    /// `image(φ_level)`.
    pub fn nearest_expert(
        &self,
        level: u32,
        rule_values: &[V],
        loss: &LossFunction,
    ) -> Result<(usize, f64)> {
        let block = self
            .blocks
            .iter()
            .find(|b| b.level == level)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("pool has no level-{level} experts"))
            })?;
        if rule_values.len() != block.cells {
            return Err(Error::InvalidArgument(format!(
                "rule table has {} entries, level {} needs {}",
                rule_values.len(),
                level,
                block.cells
            )));
        }
        let mut dist = vec![vec![0.0f64; self.catalog.len()]; block.cells];
        for (c, rv) in rule_values.iter().enumerate() {
            for (d, cv) in self.catalog.iter().enumerate() {
                dist[c][d] = rv.sup_loss_distance(cv, loss)?;
            }
        }
        let mut best = (0usize, f64::INFINITY);
        for e in 0..block.count {
            let mut worst = 0.0f64;
            for c in 0..block.cells {
                worst = worst.max(dist[c][block.digit(e, c) as usize]);
                if worst >= best.1 {
                    break;
                }
            }
            if worst < best.1 {
                best = (block.start + e + 1, worst);
            }
        }
        Ok(best)
    }

    /// Serializes the pool to its canonical JSON form.
    pub fn to_json(&self) -> String
    where
        V: Serialize,
    {
        serde_json::to_string(self).expect("pool serializes")
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        V: for<'de> Deserialize<'de>,
    {
        serde_json::from_str(s)
            .map_err(|e| Error::InvalidArgument(format!("pool JSON: {e}")))
    }

    /// Builds a pool from explicit parts; for hand-crafted test pools.
    /// Experts must be grouped by ascending level; priors must be positive
    /// with `Σ q ≤ 1`.
    pub fn from_parts(
        structure: ApproximationStructure,
        catalog: Vec<V>,
        experts: Vec<(u32, Vec<u16>)>,
        priors: Vec<f64>,
    ) -> Result<Self> {
        if catalog.is_empty() || experts.is_empty() {
            return Err(Error::InvalidArgument(
                "pool needs a nonempty catalog and expert list".into(),
            ));
        }
        if priors.len() != experts.len() {
            return Err(Error::InvalidArgument("one prior per expert required".into()));
        }
        if priors.iter().any(|q| !(*q > 0.0)) {
            return Err(Error::InvalidArgument("priors must be strictly positive".into()));
        }
        let total: f64 = priors.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "priors sum to {total} > 1"
            )));
        }
        let mut blocks: Vec<LevelBlock> = Vec::new();
        for (i, (level, table)) in experts.iter().enumerate() {
            let cells = structure.cell_count(*level)?;
            if table.len() != cells {
                return Err(Error::InvalidArgument(format!(
                    "expert {} table has {} entries, level {} needs {}",
                    i + 1,
                    table.len(),
                    level,
                    cells
                )));
            }
            if table.iter().any(|d| *d as usize >= catalog.len()) {
                return Err(Error::InvalidArgument(format!(
                    "expert {} references a digit outside the catalog",
                    i + 1
                )));
            }
            match blocks.last_mut() {
                Some(b) if b.level == *level => {
                    b.count += 1;
                    b.digits.extend_from_slice(table);
                }
                Some(b) if b.level > *level => {
                    return Err(Error::InvalidArgument(
                        "experts must be sorted by ascending level".into(),
                    ));
                }
                _ => blocks.push(LevelBlock {
                    level: *level,
                    cells,
                    start: i,
                    count: 1,
                    digits: table.clone(),
                }),
            }
        }
        let ln_priors: Vec<f64> = priors.iter().map(|q| q.ln()).collect();
        let (group_of, group_ln_q) = group_priors(&ln_priors)?;
        Ok(Self {
            structure,
            catalog,
            blocks,
            ln_priors,
            group_of,
            group_ln_q,
        })
    }
}

impl ExpertPool<f64> {
    /// Lifts a point-prediction pool into the randomized game: catalog
    /// values become point masses, tables and priors are unchanged.
    pub fn lift_to_measures(&self) -> ExpertPool<FiniteMeasure> {
        ExpertPool {
            structure: self.structure.clone(),
            catalog: self.catalog.iter().map(|g| FiniteMeasure::point_mass(*g)).collect(),
            blocks: self.blocks.clone(),
            ln_priors: self.ln_priors.clone(),
            group_of: self.group_of.clone(),
            group_ln_q: self.group_ln_q.clone(),
        }
    }
}

fn group_priors(ln_priors: &[f64]) -> Result<(Vec<u16>, Vec<f64>)> {
    let mut group_ln_q: Vec<f64> = Vec::new();
    let mut group_of = Vec::with_capacity(ln_priors.len());
    for lq in ln_priors {
        let gid = match group_ln_q.iter().position(|g| g.to_bits() == lq.to_bits()) {
            Some(i) => i,
            None => {
                group_ln_q.push(*lq);
                group_ln_q.len() - 1
            }
        };
        if gid > u16::MAX as usize {
            return Err(Error::InvalidArgument(
                "too many distinct prior values (max 65536)".into(),
            ));
        }
        group_of.push(gid as u16);
    }
    Ok((group_of, group_ln_q))
}

/// All point-prediction experts over `grid` for levels up to `m_max`.
pub fn enumerate_pool(
    structure: &ApproximationStructure,
    grid: &PredictionGrid,
    m_max: u32,
    scheme: PriorScheme,
    cap: usize,
) -> Result<ExpertPool<f64>> {
    enumerate_with_catalog(structure, grid.values().to_vec(), m_max, scheme, cap)
}

/// All measure-valued experts whose cell values are grid-supported measures
/// with masses in multiples of `1/denominator`.
pub fn enumerate_measure_pool(
    structure: &ApproximationStructure,
    grid: &PredictionGrid,
    denominator: u32,
    m_max: u32,
    scheme: PriorScheme,
    cap: usize,
) -> Result<ExpertPool<FiniteMeasure>> {
    let catalog = rational_measures(grid.values(), denominator)?;
    enumerate_with_catalog(structure, catalog, m_max, scheme, cap)
}

fn enumerate_with_catalog<V: PredictionValue>(
    structure: &ApproximationStructure,
    catalog: Vec<V>,
    m_max: u32,
    scheme: PriorScheme,
    cap: usize,
) -> Result<ExpertPool<V>> {
    let c = catalog.len();
    if c == 0 {
        return Err(Error::InvalidArgument("catalog must be nonempty".into()));
    }
    if c > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "catalog of {c} values exceeds the digit encoding (max {})",
            u16::MAX
        )));
    }
    if m_max > structure.max_level() || m_max < structure.min_level() {
        return Err(Error::LevelOutOfRange {
            level: m_max,
            min: structure.min_level(),
            max: structure.max_level(),
        });
    }

    // Sizing pass: fail on the first level whose cumulative count breaks
    // the cap, before allocating anything.
    let mut counts: Vec<(u32, usize, usize)> = Vec::new();
    let mut total = 0usize;
    for m in structure.min_level()..=m_max {
        let cells = structure.cell_count(m)?;
        let level_count = (c as u128).checked_pow(cells as u32);
        let required = level_count
            .and_then(|n| n.checked_add(total as u128))
            .unwrap_or(u128::MAX);
        if required > cap as u128 {
            return Err(Error::PoolSizeExceeded { level: m, required, cap });
        }
        let count = level_count.expect("within cap") as usize;
        total += count;
        counts.push((m, cells, count));
    }

    let mut blocks = Vec::with_capacity(counts.len());
    let mut start = 0usize;
    for (level, cells, count) in &counts {
        let mut digits = Vec::with_capacity(count * cells);
        let mut table = vec![0u16; *cells];
        for _ in 0..*count {
            digits.extend_from_slice(&table);
            // Lexicographic successor: the last cell is least significant.
            for cell in (0..*cells).rev() {
                if (table[cell] as usize) + 1 < c {
                    table[cell] += 1;
                    break;
                }
                table[cell] = 0;
            }
        }
        blocks.push(LevelBlock {
            level: *level,
            cells: *cells,
            start,
            count: *count,
            digits,
        });
        start += count;
    }

    let mut ln_priors = vec![0.0f64; total];
    let mut group_of = vec![0u16; total];
    let mut group_ln_q = Vec::new();
    match scheme {
        PriorScheme::Uniform => {
            let lq = -(total as f64).ln();
            ln_priors.fill(lq);
            group_ln_q.push(lq);
        }
        PriorScheme::Hierarchical => {
            let z: f64 = counts.iter().map(|(m, _, _)| 0.5f64.powi(*m as i32)).sum();
            for (gid, (m, cells, count)) in counts.iter().enumerate() {
                let block = &blocks[gid];
                let lq = -(*m as f64) * std::f64::consts::LN_2 - z.ln()
                    - (*cells as f64) * (c as f64).ln();
                for e in 0..*count {
                    ln_priors[block.start + e] = lq;
                    group_of[block.start + e] = gid as u16;
                }
                group_ln_q.push(lq);
            }
        }
    }

    Ok(ExpertPool {
        structure: structure.clone(),
        catalog,
        blocks,
        ln_priors,
        group_of,
        group_ln_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SignalSpace;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn interval_structure(m_max: u32) -> ApproximationStructure {
        ApproximationStructure::new(SignalSpace::UnitInterval, m_max).unwrap()
    }

    fn pool(m_max: u32, g: usize) -> ExpertPool<f64> {
        enumerate_pool(
            &interval_structure(m_max),
            &PredictionGrid::uniform(g).unwrap(),
            m_max,
            PriorScheme::Hierarchical,
            DEFAULT_POOL_CAP,
        )
        .unwrap()
    }

    #[test]
    fn grid_construction() {
        assert_eq!(PredictionGrid::uniform(1).unwrap().values(), &[0.5]);
        assert_eq!(PredictionGrid::uniform(2).unwrap().values(), &[0.0, 1.0]);
        assert_eq!(
            PredictionGrid::uniform(3).unwrap().values(),
            &[0.0, 0.5, 1.0]
        );
        assert!(PredictionGrid::from_values(vec![0.3, 0.3]).is_err());
        assert!(PredictionGrid::from_values(vec![0.3, 0.1]).is_err());
    }

    #[test]
    fn pool_sizes_match_counting() {
        assert_eq!(pool(1, 2).len(), 4);
        assert_eq!(pool(2, 2).len(), 20);
        assert_eq!(pool(1, 1).len(), 1);
        assert_eq!(pool(3, 2).len(), 4 + 16 + 256);
    }

    #[test]
    fn cap_violation_names_level() {
        let err = enumerate_pool(
            &interval_structure(4),
            &PredictionGrid::uniform(4).unwrap(),
            4,
            PriorScheme::Hierarchical,
            100_000,
        )
        .unwrap_err();
        match err {
            Error::PoolSizeExceeded { level, required, cap } => {
                assert_eq!(level, 4);
                assert!(required > 100_000);
                assert_eq!(cap, 100_000);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn priors_sum_to_one_and_are_level_constant() {
        for scheme in [PriorScheme::Hierarchical, PriorScheme::Uniform] {
            let p = enumerate_with_catalog(
                &interval_structure(3),
                PredictionGrid::uniform(2).unwrap().values().to_vec(),
                3,
                scheme,
                DEFAULT_POOL_CAP,
            )
            .unwrap();
            let total: f64 = (1..=p.len()).map(|k| p.prior(k).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "{scheme:?}: sum {total}");
            for k in 1..=p.len() {
                assert!(p.prior(k).unwrap() > 0.0);
            }
        }
        // Hierarchical: level 1 carries 2^{-1}/Z over 4 experts.
        let p = pool(2, 2);
        let z = 0.5 + 0.25;
        assert!((p.prior(1).unwrap() - 0.5 / z / 4.0).abs() < 1e-15);
        assert!((p.prior(5).unwrap() - 0.25 / z / 16.0).abs() < 1e-15);
        assert_eq!(p.group_ln_q.len(), 2);
    }

    #[test]
    fn enumeration_order_is_lexicographic() {
        let p = pool(1, 2);
        // Level-1 tables over grid {0, 1}: 00, 01, 10, 11.
        let x0 = Signal::Scalar(0.25);
        let x1 = Signal::Scalar(0.75);
        let predict = |k: usize| {
            (
                *p.predict_expert(k, &x0).unwrap(),
                *p.predict_expert(k, &x1).unwrap(),
            )
        };
        assert_eq!(predict(1), (0.0, 0.0));
        assert_eq!(predict(2), (0.0, 1.0));
        assert_eq!(predict(3), (1.0, 0.0));
        assert_eq!(predict(4), (1.0, 1.0));
        assert!(p.predict_expert(5, &x0).is_err());
        assert!(p.predict_expert(0, &x0).is_err());
    }

    #[test]
    fn experts_are_m_elementary() {
        let p = pool(3, 3);
        let structure = p.structure().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sample: Vec<usize> = (0..200).map(|_| rng.gen_range(1..=p.len())).collect();
        for k in sample {
            let m = p.level_of(k).unwrap();
            for _ in 0..5 {
                let x = Signal::Scalar(rng.gen_range(0.0..=1.0));
                let q = structure.quantize(m, &x).unwrap();
                assert_eq!(
                    p.predict_expert(k, &x).unwrap(),
                    p.predict_expert(k, &q).unwrap()
                );
            }
        }
    }

    #[test]
    fn nearest_expert_finds_members_exactly() {
        let p = pool(2, 3);
        let loss = LossFunction::square();
        // Level 1 holds 3² = 9 experts, so the level-2 block starts at
        // index 10; the table (0, 0, 0, 1) over catalog {0, 0.5, 1} is the
        // second level-2 expert, global index 11.
        let rule = vec![0.0, 0.0, 0.0, 0.5];
        let (k, delta) = p.nearest_expert(2, &rule, &loss).unwrap();
        assert_eq!(k, 11);
        assert_eq!(delta, 0.0);
    }

    #[test]
    fn nearest_expert_constant_rule() {
        let p = pool(1, 2);
        let loss = LossFunction::square();
        let (k, delta) = p.nearest_expert(1, &[0.3, 0.3], &loss).unwrap();
        // Constant-0 expert (index 1) at pseudo-metric ρ(0.3, 0) =
        // 0.3·max(0.3, 1.7) = 0.51; the grid value 1 is farther.
        assert_eq!(k, 1);
        assert!((delta - loss.pseudo_metric(0.3, 0.0).unwrap()).abs() < 1e-15);
        assert!(p.nearest_expert(2, &[0.0; 4], &loss).is_err());
    }

    #[test]
    fn nearest_expert_single_grid_forced() {
        let p = pool(1, 1);
        let loss = LossFunction::absolute();
        let (k, delta) = p.nearest_expert(1, &[0.0, 1.0], &loss).unwrap();
        assert_eq!(k, 1);
        assert!((delta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn serialization_round_trips_and_is_deterministic() {
        let p = pool(2, 2);
        let j1 = p.to_json();
        let j2 = pool(2, 2).to_json();
        assert_eq!(j1, j2, "same inputs give byte-identical serialization");
        let back: ExpertPool<f64> = ExpertPool::from_json(&j1).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn measure_pool_catalog_counts() {
        let structure = interval_structure(2);
        let grid = PredictionGrid::uniform(2).unwrap();
        let p = enumerate_measure_pool(
            &structure,
            &grid,
            2,
            2,
            PriorScheme::Hierarchical,
            DEFAULT_POOL_CAP,
        )
        .unwrap();
        // Catalog: 3 rational measures on {0,1}; pool 3² + 3⁴ = 90.
        assert_eq!(p.catalog().len(), 3);
        assert_eq!(p.len(), 90);
        let total: f64 = (1..=p.len()).map(|k| p.prior(k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lifted_pool_predicts_point_masses() {
        let p = pool(1, 2);
        let lifted = p.lift_to_measures();
        let x = Signal::Scalar(0.8);
        for k in 1..=p.len() {
            let g = *p.predict_expert(k, &x).unwrap();
            assert_eq!(
                lifted.predict_expert(k, &x).unwrap(),
                &FiniteMeasure::point_mass(g)
            );
            assert_eq!(lifted.ln_prior(k).unwrap(), p.ln_prior(k).unwrap());
        }
    }

    #[test]
    fn from_parts_validates() {
        let s = interval_structure(1);
        let ok = ExpertPool::from_parts(
            s.clone(),
            vec![0.0, 1.0],
            vec![(1, vec![0, 1]), (1, vec![1, 0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(ok.len(), 2);
        assert!(ExpertPool::from_parts(
            s.clone(),
            vec![0.0, 1.0],
            vec![(1, vec![0, 1])],
            vec![0.0],
        )
        .is_err(), "zero prior");
        assert!(ExpertPool::from_parts(
            s.clone(),
            vec![0.0, 1.0],
            vec![(1, vec![0, 1]), (1, vec![1, 0])],
            vec![0.7, 0.7],
        )
        .is_err(), "priors exceed 1");
        assert!(ExpertPool::from_parts(
            s.clone(),
            vec![0.0, 1.0],
            vec![(1, vec![0, 1, 0])],
            vec![1.0],
        )
        .is_err(), "table length");
        assert!(ExpertPool::from_parts(
            s,
            vec![0.0, 1.0],
            vec![(1, vec![0, 2])],
            vec![1.0],
        )
        .is_err(), "digit outside catalog");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prediction_factors_through_quantizer(v in 0.0f64..=1.0, k in 1usize..=20) {
            let p = pool(2, 2);
            let m = p.level_of(k).unwrap();
            let x = Signal::Scalar(v);
            let q = p.structure().quantize(m, &x).unwrap();
            prop_assert_eq!(
                p.predict_expert(k, &x).unwrap(),
                p.predict_expert(k, &q).unwrap()
            );
        }

        #[test]
        fn nearest_expert_beats_random_candidates(
            r0 in 0.0f64..=1.0, r1 in 0.0f64..=1.0, probe in 0usize..4
        ) {
            let p = pool(1, 2);
            let loss = LossFunction::square();
            let rule = vec![r0, r1];
            let (_, delta) = p.nearest_expert(1, &rule, &loss).unwrap();
            // Any specific expert gives an upper bound on the minimum.
            let k = probe + 1;
            let mut worst = 0.0f64;
            for (c, point) in p.structure().image(1).unwrap().iter().enumerate() {
                let ev = *p.predict_expert(k, point).unwrap();
                worst = worst.max(loss.pseudo_metric(rule[c], ev).unwrap());
            }
            prop_assert!(delta <= worst + 1e-12);
        }
    }
}
