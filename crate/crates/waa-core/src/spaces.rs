//! Signal spaces and approximation structures (quantizers).
//!
//! An approximation structure is a family of idempotent maps `φ_m` on the
//! signal space whose level-`m` image contains exactly `2^m` points; it is
//! the coding-theoretic analogue of sending a signal over an `m`-bit channel.
//! Half the worst-case diameter of a quantization cell upper-bounds the
//! `m`-th Kolmogorov diameter of the space (which infimizes over all such
//! families).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of a signal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Signal {
    /// A point of the unit interval.
    Scalar(f64),
    /// A point of the unit cube.
    Vector(Vec<f64>),
    /// An element of a finite set, by index into the declared labels.
    Label(usize),
}

impl Signal {
    /// Compact textual form used in trace files.
    pub fn describe(&self, space: &SignalSpace) -> String {
        match (self, space) {
            (Signal::Scalar(v), _) => format!("{v}"),
            (Signal::Vector(v), _) => v
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(";"),
            (Signal::Label(i), SignalSpace::FiniteSet { labels }) => labels
                .get(*i)
                .cloned()
                .unwrap_or_else(|| format!("#{i}")),
            (Signal::Label(i), _) => format!("#{i}"),
        }
    }
}

/// The space Reality draws signals from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpace {
    /// `[0, 1]` with the absolute-difference metric.
    UnitInterval,
    /// `[0, 1]^d` with the sup metric.
    UnitCube { dim: usize },
    /// A finite label set with the discrete 0/1 metric.
    FiniteSet { labels: Vec<String> },
}

impl SignalSpace {
    /// Checks membership of a raw point.
    pub fn contains(&self, x: &Signal) -> bool {
        match (self, x) {
            (SignalSpace::UnitInterval, Signal::Scalar(v)) => (0.0..=1.0).contains(v),
            (SignalSpace::UnitCube { dim }, Signal::Vector(v)) => {
                v.len() == *dim && v.iter().all(|c| (0.0..=1.0).contains(c))
            }
            (SignalSpace::FiniteSet { labels }, Signal::Label(i)) => *i < labels.len(),
            _ => false,
        }
    }

    /// Metric of the space: absolute difference on the interval, sup metric
    /// on cubes, discrete 0/1 metric on finite sets.
    pub fn metric(&self, a: &Signal, b: &Signal) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (a, b) {
            (Signal::Scalar(x), Signal::Scalar(y)) => (x - y).abs(),
            (Signal::Vector(x), Signal::Vector(y)) => x
                .iter()
                .zip(y)
                .map(|(u, v)| (u - v).abs())
                .fold(0.0, f64::max),
            (Signal::Label(i), Signal::Label(j)) => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            _ => unreachable!("check() accepts one representation per space"),
        })
    }

    fn check(&self, x: &Signal) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::SignalOutsideSpace(format!(
                "{x:?} not in {self:?}"
            )))
        }
    }
}

/// A family of idempotent quantizers `φ_1, φ_2, …` with `|φ_m(X)| = 2^m`.
///
/// Built-in constructions:
/// - unit interval: keep the first `m` binary digits (the endpoint `x = 1`
///   is clamped into the top cell so the image has exactly `2^m` points);
/// - unit cube: distribute the `m` bits over coordinates, lower-indexed
///   coordinates receiving the extra bit when `d ∤ m`; requires `m ≥ d`.
///   This is one of many possible multidimensional extensions of the
///   binary-truncation quantizer and is not canonical;
/// - finite set: partition the labels, in declared order, into `2^m`
///   contiguous buckets (earlier buckets take the remainder), each bucket
///   represented by its first label; requires `2^m ≤ |labels|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationStructure {
    space: SignalSpace,
    max_level: u32,
}

impl ApproximationStructure {
    pub fn new(space: SignalSpace, max_level: u32) -> Result<Self> {
        if max_level == 0 {
            return Err(Error::InvalidArgument(
                "max_level must be at least 1".into(),
            ));
        }
        match &space {
            SignalSpace::UnitInterval => {
                if max_level > 52 {
                    return Err(Error::InvalidArgument(
                        "max_level above 52 exceeds f64 mantissa resolution".into(),
                    ));
                }
            }
            SignalSpace::UnitCube { dim } => {
                if *dim == 0 {
                    return Err(Error::InvalidArgument("cube dimension must be positive".into()));
                }
                if (max_level as usize) < *dim {
                    return Err(Error::InvalidArgument(format!(
                        "unit cube of dimension {dim} needs max_level >= {dim}"
                    )));
                }
            }
            SignalSpace::FiniteSet { labels } => {
                if labels.is_empty() {
                    return Err(Error::InvalidArgument("finite set needs at least one label".into()));
                }
                let needed = 1usize
                    .checked_shl(max_level)
                    .ok_or_else(|| Error::InvalidArgument("max_level too large".into()))?;
                if needed > labels.len() {
                    return Err(Error::InvalidArgument(format!(
                        "finite set of {} labels supports levels up to {}",
                        labels.len(),
                        (labels.len() as f64).log2().floor() as u32
                    )));
                }
            }
        }
        Ok(Self { space, max_level })
    }

    pub fn space(&self) -> &SignalSpace {
        &self.space
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Lowest usable level: `d` for the `d`-cube (each coordinate needs a
    /// bit), 1 otherwise.
    pub fn min_level(&self) -> u32 {
        match &self.space {
            SignalSpace::UnitCube { dim } => *dim as u32,
            _ => 1,
        }
    }

    fn check_level(&self, m: u32) -> Result<()> {
        if m < self.min_level() || m > self.max_level {
            return Err(Error::LevelOutOfRange {
                level: m,
                min: self.min_level(),
                max: self.max_level,
            });
        }
        Ok(())
    }

    /// Number of quantization cells at level `m`, i.e. `2^m`.
    pub fn cell_count(&self, m: u32) -> Result<usize> {
        self.check_level(m)?;
        Ok(1usize << m)
    }

    /// Bits allocated to each cube coordinate at level `m`.
    fn cube_bits(dim: usize, m: u32) -> Vec<u32> {
        let base = m / dim as u32;
        let extra = (m % dim as u32) as usize;
        (0..dim)
            .map(|i| if i < extra { base + 1 } else { base })
            .collect()
    }

    /// `φ_m(x)`: the level-`m` approximation of `x`.
    pub fn quantize(&self, m: u32, x: &Signal) -> Result<Signal> {
        self.check_level(m)?;
        self.space.check(x)?;
        Ok(match (&self.space, x) {
            (SignalSpace::UnitInterval, Signal::Scalar(v)) => {
                Signal::Scalar(dyadic_floor(*v, m))
            }
            (SignalSpace::UnitCube { dim }, Signal::Vector(v)) => {
                let bits = Self::cube_bits(*dim, m);
                Signal::Vector(
                    v.iter()
                        .zip(&bits)
                        .map(|(c, b)| dyadic_floor(*c, *b))
                        .collect(),
                )
            }
            (SignalSpace::FiniteSet { labels }, Signal::Label(i)) => {
                let (bucket, _) = finite_bucket(labels.len(), m, *i);
                Signal::Label(bucket_start(labels.len(), m, bucket))
            }
            _ => unreachable!(),
        })
    }

    /// Index of the cell containing `x` in the canonical image order.
    pub fn cell_index(&self, m: u32, x: &Signal) -> Result<usize> {
        self.check_level(m)?;
        self.space.check(x)?;
        Ok(match (&self.space, x) {
            (SignalSpace::UnitInterval, Signal::Scalar(v)) => dyadic_index(*v, m),
            (SignalSpace::UnitCube { dim }, Signal::Vector(v)) => {
                let bits = Self::cube_bits(*dim, m);
                let mut idx = 0usize;
                for (c, b) in v.iter().zip(&bits) {
                    idx = (idx << b) | dyadic_index(*c, *b);
                }
                idx
            }
            (SignalSpace::FiniteSet { labels }, Signal::Label(i)) => {
                finite_bucket(labels.len(), m, *i).0
            }
            _ => unreachable!(),
        })
    }

    /// The `2^m` fixed points of `φ_m` in canonical (lexicographic) order.
    /// `image(m)[cell_index(m, x)] == quantize(m, x)` for every `x`.
    pub fn image(&self, m: u32) -> Result<Vec<Signal>> {
        let cells = self.cell_count(m)?;
        Ok(match &self.space {
            SignalSpace::UnitInterval => {
                let w = 0.5f64.powi(m as i32);
                (0..cells).map(|j| Signal::Scalar(j as f64 * w)).collect()
            }
            SignalSpace::UnitCube { dim } => {
                let bits = Self::cube_bits(*dim, m);
                (0..cells)
                    .map(|idx| {
                        let mut rest = idx;
                        let mut coords = vec![0.0; *dim];
                        for (i, b) in bits.iter().enumerate().rev() {
                            let mask = (1usize << b) - 1;
                            coords[i] = (rest & mask) as f64 * 0.5f64.powi(*b as i32);
                            rest >>= b;
                        }
                        Signal::Vector(coords)
                    })
                    .collect()
            }
            SignalSpace::FiniteSet { labels } => (0..cells)
                .map(|b| Signal::Label(bucket_start(labels.len(), m, b)))
                .collect(),
        })
    }

    /// Half the diameter of the largest level-`m` cell under the space's
    /// metric — an upper bound on the `m`-th Kolmogorov diameter of the
    /// space for this particular quantizer family.
    pub fn half_max_cell_diameter(&self, m: u32) -> Result<f64> {
        self.check_level(m)?;
        Ok(match &self.space {
            SignalSpace::UnitInterval => 0.5 * 0.5f64.powi(m as i32),
            SignalSpace::UnitCube { dim } => {
                // Widest coordinate has the fewest bits.
                let min_bits = Self::cube_bits(*dim, m).into_iter().min().unwrap();
                0.5 * 0.5f64.powi(min_bits as i32)
            }
            SignalSpace::FiniteSet { labels } => {
                if labels.len() == 1usize << m {
                    0.0
                } else {
                    0.5
                }
            }
        })
    }
}

/// Truncates `v ∈ [0,1]` to `b` binary digits; `v = 1` falls into the top
/// cell so the image keeps exactly `2^b` elements.
fn dyadic_floor(v: f64, b: u32) -> f64 {
    let scale = (1u64 << b) as f64;
    let idx = dyadic_index(v, b) as f64;
    idx / scale
}

fn dyadic_index(v: f64, b: u32) -> usize {
    let cells = 1usize << b;
    ((v * cells as f64) as usize).min(cells - 1)
}

/// Bucket of label `i` among `2^m` contiguous buckets over `len` labels.
/// Earlier buckets absorb the remainder, so every bucket is non-empty.
fn finite_bucket(len: usize, m: u32, i: usize) -> (usize, usize) {
    let buckets = 1usize << m;
    let base = len / buckets;
    let extra = len % buckets;
    let boundary = extra * (base + 1);
    if i < boundary {
        (i / (base + 1), i % (base + 1))
    } else {
        (extra + (i - boundary) / base, (i - boundary) % base)
    }
}

fn bucket_start(len: usize, m: u32, bucket: usize) -> usize {
    let buckets = 1usize << m;
    let base = len / buckets;
    let extra = len % buckets;
    if bucket < extra {
        bucket * (base + 1)
    } else {
        extra * (base + 1) + (bucket - extra) * base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interval(max_level: u32) -> ApproximationStructure {
        ApproximationStructure::new(SignalSpace::UnitInterval, max_level).unwrap()
    }

    #[test]
    fn quantize_truncates_binary_digits() {
        // floor(0.7 * 4) / 4 = floor(2.8) / 4 = 0.5
        let s = interval(4);
        assert_eq!(s.quantize(2, &Signal::Scalar(0.7)).unwrap(), Signal::Scalar(0.5));
        assert_eq!(s.quantize(3, &Signal::Scalar(0.0)).unwrap(), Signal::Scalar(0.0));
    }

    #[test]
    fn endpoint_clamps_into_top_cell() {
        let s = interval(3);
        assert_eq!(s.quantize(3, &Signal::Scalar(1.0)).unwrap(), Signal::Scalar(0.875));
        assert_eq!(s.cell_index(3, &Signal::Scalar(1.0)).unwrap(), 7);
    }

    #[test]
    fn image_level_one_is_zero_and_half() {
        let s = interval(2);
        assert_eq!(
            s.image(1).unwrap(),
            vec![Signal::Scalar(0.0), Signal::Scalar(0.5)]
        );
        assert_eq!(s.image(2).unwrap().len(), 4);
    }

    #[test]
    fn image_matches_cell_index() {
        let s = interval(5);
        for m in 1..=5 {
            let image = s.image(m).unwrap();
            assert_eq!(image.len(), 1 << m);
            for (j, p) in image.iter().enumerate() {
                assert_eq!(s.cell_index(m, p).unwrap(), j);
                assert_eq!(&s.quantize(m, p).unwrap(), p, "fixed point at m={m}");
            }
        }
    }

    #[test]
    fn half_cell_diameters_are_dyadic() {
        let s = interval(10);
        assert_eq!(s.half_max_cell_diameter(3).unwrap(), 0.0625);
        assert_eq!(s.half_max_cell_diameter(1).unwrap(), 0.25);
        for m in 1..10 {
            assert!(
                s.half_max_cell_diameter(m + 1).unwrap() <= s.half_max_cell_diameter(m).unwrap()
            );
        }
    }

    #[test]
    fn level_out_of_range_rejected() {
        let s = interval(3);
        assert!(matches!(
            s.quantize(4, &Signal::Scalar(0.5)),
            Err(Error::LevelOutOfRange { .. })
        ));
        assert!(matches!(s.image(0), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn signal_outside_space_rejected() {
        let s = interval(2);
        assert!(s.quantize(1, &Signal::Scalar(1.5)).is_err());
        assert!(s.quantize(1, &Signal::Label(0)).is_err());
    }

    #[test]
    fn finite_set_identity_when_sizes_match() {
        let labels: Vec<String> = (0..4).map(|i| format!("l{i}")).collect();
        let s =
            ApproximationStructure::new(SignalSpace::FiniteSet { labels }, 2).unwrap();
        let image = s.image(2).unwrap();
        assert_eq!(image, (0..4).map(Signal::Label).collect::<Vec<_>>());
        assert_eq!(s.half_max_cell_diameter(2).unwrap(), 0.0);
        // Coarser level groups labels and cells stop being singletons.
        assert_eq!(s.half_max_cell_diameter(1).unwrap(), 0.5);
        assert_eq!(s.quantize(1, &Signal::Label(3)).unwrap(), Signal::Label(2));
    }

    #[test]
    fn finite_set_buckets_cover_all_labels() {
        let labels: Vec<String> = (0..11).map(|i| format!("l{i}")).collect();
        let s =
            ApproximationStructure::new(SignalSpace::FiniteSet { labels }, 3).unwrap();
        for m in 1..=3 {
            let image = s.image(m).unwrap();
            assert_eq!(image.len(), 1 << m);
            for i in 0..11 {
                let x = Signal::Label(i);
                let q = s.quantize(m, &x).unwrap();
                assert_eq!(s.quantize(m, &q).unwrap(), q);
                assert_eq!(image[s.cell_index(m, &x).unwrap()], q);
            }
        }
    }

    #[test]
    fn cube_bit_allocation_favors_leading_coordinates() {
        let s = ApproximationStructure::new(SignalSpace::UnitCube { dim: 2 }, 5).unwrap();
        // m = 5, d = 2: coordinate 0 gets 3 bits, coordinate 1 gets 2.
        let q = s
            .quantize(5, &Signal::Vector(vec![0.7, 0.7]))
            .unwrap();
        assert_eq!(q, Signal::Vector(vec![0.625, 0.5]));
        assert_eq!(s.image(5).unwrap().len(), 32);
        assert_eq!(s.half_max_cell_diameter(5).unwrap(), 0.125);
    }

    #[test]
    fn cube_requires_a_bit_per_coordinate() {
        let s = ApproximationStructure::new(SignalSpace::UnitCube { dim: 3 }, 6).unwrap();
        assert!(matches!(
            s.quantize(2, &Signal::Vector(vec![0.1, 0.2, 0.3])),
            Err(Error::LevelOutOfRange { .. })
        ));
    }

    proptest! {
        #[test]
        fn idempotent_on_interval(v in 0.0f64..=1.0, m in 1u32..=10) {
            let s = interval(10);
            let q = s.quantize(m, &Signal::Scalar(v)).unwrap();
            prop_assert_eq!(s.quantize(m, &q).unwrap(), q);
        }

        #[test]
        fn quantization_error_bounded_by_cell_diameter(v in 0.0f64..=1.0, m in 1u32..=10) {
            let s = interval(10);
            let q = s.quantize(m, &Signal::Scalar(v)).unwrap();
            let d = s.space().metric(&Signal::Scalar(v), &q).unwrap();
            prop_assert!(d <= 2.0 * s.half_max_cell_diameter(m).unwrap());
        }

        #[test]
        fn idempotent_on_cube(a in 0.0f64..=1.0, b in 0.0f64..=1.0, m in 2u32..=8) {
            let s = ApproximationStructure::new(SignalSpace::UnitCube { dim: 2 }, 8).unwrap();
            let x = Signal::Vector(vec![a, b]);
            let q = s.quantize(m, &x).unwrap();
            prop_assert_eq!(s.quantize(m, &q).unwrap(), q.clone());
            let d = s.space().metric(&x, &q).unwrap();
            prop_assert!(d <= 2.0 * s.half_max_cell_diameter(m).unwrap());
        }
    }
}
