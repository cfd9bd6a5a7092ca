//! Closed intervals and axis-aligned hyperrectangles over `f32`.
//!
//! Every interval is closed. A strict bound `x > t` is expressed as
//! `x >= succ32(t)`, so splitting a region at a decision threshold yields two
//! closed regions that together hold exactly the representable points of the
//! parent. Infinite bounds are allowed; a split never introduces one.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Smallest `f32` strictly greater than `x`.
///
/// Both zeros map to the smallest positive subnormal, so `succ32(-0.0)`
/// agrees with `succ32(0.0)` under `<=` comparisons.
pub fn succ32(x: f32) -> f32 {
    x.next_up()
}

/// Largest `f32` strictly smaller than `x`.
pub fn pred32(x: f32) -> f32 {
    x.next_down()
}

/// Nearest `f32` at or below `x`.
pub(crate) fn round_down(x: f64) -> f32 {
    let r = x as f32;
    if f64::from(r) > x {
        pred32(r)
    } else {
        r
    }
}

/// Nearest `f32` at or above `x`.
pub(crate) fn round_up(x: f64) -> f32 {
    let r = x as f32;
    if f64::from(r) < x {
        succ32(r)
    } else {
        r
    }
}

/// A closed interval `[lower, upper]`; empty when `lower > upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f32,
    pub upper: f32,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lower: f32::NEG_INFINITY,
        upper: f32::INFINITY,
    };

    pub fn new(lower: f32, upper: f32) -> Self {
        Interval { lower, upper }
    }

    pub fn point(x: f32) -> Self {
        Interval { lower: x, upper: x }
    }

    pub fn is_empty(&self) -> bool {
        // NaN bounds never compare `<=`, so they count as empty too.
        !(self.lower <= self.upper)
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: f32) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval {
            lower: self.lower.max(other.lower),
            upper: self.upper.min(other.upper),
        }
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.is_empty() || (other.lower <= self.lower && self.upper <= other.upper)
    }

    /// The part of the interval with `x <= threshold`.
    pub fn below(&self, threshold: f32) -> Interval {
        Interval {
            lower: self.lower,
            upper: self.upper.min(threshold),
        }
    }

    /// The part of the interval with `x > threshold`.
    pub fn above(&self, threshold: f32) -> Interval {
        Interval {
            lower: self.lower.max(succ32(threshold)),
            upper: self.upper,
        }
    }

    /// Widths of the two slices a split at `threshold` would produce,
    /// clamped at zero. Infinite sides report `+inf`.
    ///
    /// Only meaningful for ordering; computed in `f64` so finite widths
    /// never overflow.
    pub fn side_measure(&self, threshold: f32) -> (f64, f64) {
        let t = f64::from(threshold);
        let left = (t - f64::from(self.lower)).max(0.0);
        let right = (f64::from(self.upper) - t).max(0.0);
        (left, right)
    }

    /// Some finite-if-possible point of a non-empty interval.
    pub fn representative(&self) -> f32 {
        if self.lower.is_finite() {
            self.lower
        } else if self.upper.is_finite() {
            self.upper
        } else if self.lower == self.upper {
            self.lower
        } else {
            0.0
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", fmt_bound(self.lower), fmt_bound(self.upper))
    }
}

fn fmt_bound(x: f32) -> String {
    if x == f32::INFINITY {
        "inf".to_string()
    } else if x == f32::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

/// An axis-aligned hyperrectangle: one closed interval per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub dims: Vec<Interval>,
}

impl Region {
    pub fn new(dims: Vec<Interval>) -> Self {
        Region { dims }
    }

    /// `(-inf, inf)` in every one of `arity` dimensions.
    pub fn unbounded(arity: usize) -> Self {
        Region {
            dims: vec![Interval::UNBOUNDED; arity],
        }
    }

    /// The same interval broadcast to every dimension.
    pub fn uniform(arity: usize, interval: Interval) -> Self {
        Region {
            dims: vec![interval; arity],
        }
    }

    pub fn point(x: &[f32]) -> Self {
        Region {
            dims: x.iter().copied().map(Interval::point).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().any(Interval::is_empty)
    }

    pub fn contains(&self, x: &[f32]) -> Result<bool> {
        if x.len() != self.dims.len() {
            return Err(Error::InputShape {
                expected: self.dims.len(),
                found: x.len(),
            });
        }
        Ok(self.dims.iter().zip(x).all(|(iv, &v)| iv.contains(v)))
    }

    /// Splits along `dim` into the `<= threshold` part and the `> threshold`
    /// part. Either side may come back empty.
    pub fn split(&self, dim: usize, threshold: f32) -> Result<(Region, Region)> {
        if dim >= self.dims.len() {
            return Err(Error::DimensionOutOfRange {
                dim,
                arity: self.dims.len(),
            });
        }
        if !threshold.is_finite() {
            return Err(Error::NonFiniteThreshold(threshold));
        }
        let mut left = self.clone();
        let mut right = self.clone();
        left.dims[dim] = self.dims[dim].below(threshold);
        right.dims[dim] = self.dims[dim].above(threshold);
        Ok((left, right))
    }

    pub fn intersect(&self, other: &Region) -> Result<Region> {
        if other.arity() != self.arity() {
            return Err(Error::InputShape {
                expected: self.arity(),
                found: other.arity(),
            });
        }
        Ok(Region {
            dims: self
                .dims
                .iter()
                .zip(&other.dims)
                .map(|(a, b)| a.intersect(b))
                .collect(),
        })
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.arity() == other.arity()
            && (self.is_empty()
                || self
                    .dims
                    .iter()
                    .zip(&other.dims)
                    .all(|(a, b)| a.is_subset_of(b)))
    }

    /// A point inside a non-empty region, preferring finite coordinates
    /// (the lower corner wherever that is finite).
    pub fn representative(&self) -> Vec<f32> {
        self.dims.iter().map(Interval::representative).collect()
    }

    /// Parses the command-line domain syntax: comma-separated `lo:hi` pairs,
    /// one per dimension, with `-inf`/`inf` accepted. A single pair is
    /// broadcast to all `arity` dimensions.
    pub fn parse_domain(text: &str, arity: usize) -> Result<Region> {
        let dims = text
            .split(',')
            .map(|s| s.trim().parse::<Interval>())
            .collect::<Result<Vec<_>>>()?;
        match dims.len() {
            1 => Ok(Region::uniform(arity, dims[0])),
            k if k == arity => Ok(Region { dims }),
            k => Err(Error::DomainSyntax(format!(
                "expected 1 or {arity} intervals, found {k}"
            ))),
        }
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::DomainSyntax(format!("{s:?} is not of the form lo:hi")))?;
        let parse = |t: &str| -> Result<f32> {
            let v: f32 = t
                .trim()
                .parse()
                .map_err(|_| Error::DomainSyntax(format!("{t:?} is not a number")))?;
            if v.is_nan() {
                return Err(Error::DomainSyntax("NaN bound".into()));
            }
            Ok(v)
        };
        let iv = Interval::new(parse(lo)?, parse(hi)?);
        if iv.is_empty() {
            return Err(Error::DomainSyntax(format!("empty interval {s:?}")));
        }
        Ok(iv)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.dims.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

/// One interval per output dimension. Exact outputs are degenerate intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRange {
    pub dims: Vec<Interval>,
}

impl OutputRange {
    pub fn from_point(y: &[f32]) -> Self {
        OutputRange {
            dims: y.iter().copied().map(Interval::point).collect(),
        }
    }

    pub fn from_bounds(lower: &[f32], upper: &[f32]) -> Self {
        OutputRange {
            dims: lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| Interval::new(l, u))
                .collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn lower(&self) -> Vec<f32> {
        self.dims.iter().map(|iv| iv.lower).collect()
    }

    pub fn upper(&self) -> Vec<f32> {
        self.dims.iter().map(|iv| iv.upper).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.dims.iter().all(Interval::is_point)
    }

    /// Lower bounds, which equal the exact output when the range is a point.
    pub fn point(&self) -> Vec<f32> {
        self.lower()
    }
}

impl fmt::Display for OutputRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, iv) in self.dims.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if iv.is_point() {
                write!(f, "{}", fmt_bound(iv.lower))?;
            } else {
                write!(f, "{iv}")?;
            }
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(l: f32, u: f32) -> Interval {
        Interval::new(l, u)
    }

    #[test]
    fn split_examples() {
        let b = Region::new(vec![iv(0.0, 10.0)]);
        let (l, r) = b.split(0, 5.0).unwrap();
        assert_eq!(l.dims[0], iv(0.0, 5.0));
        assert_eq!(r.dims[0], iv(succ32(5.0), 10.0));

        let (l, r) = b.split(0, 10.0).unwrap();
        assert_eq!(l.dims[0], iv(0.0, 10.0));
        assert!(r.is_empty());

        let b = Region::new(vec![iv(6.0, 10.0)]);
        let (l, r) = b.split(0, 5.0).unwrap();
        assert!(l.is_empty());
        assert_eq!(r.dims[0], iv(6.0, 10.0));
    }

    #[test]
    fn split_rejects_bad_arguments() {
        let b = Region::unbounded(2);
        assert!(matches!(
            b.split(2, 0.0),
            Err(Error::DimensionOutOfRange { dim: 2, arity: 2 })
        ));
        assert!(matches!(
            b.split(0, f32::INFINITY),
            Err(Error::NonFiniteThreshold(_))
        ));
    }

    #[test]
    fn contains_examples() {
        let unit = Region::uniform(2, iv(0.0, 1.0));
        assert!(unit.contains(&[0.5, 1.0]).unwrap());
        assert!(!unit.contains(&[1.0000001, 0.0]).unwrap());
        assert!(Region::unbounded(1).contains(&[-3.0e38]).unwrap());
        assert!(matches!(
            unit.contains(&[0.0]),
            Err(Error::InputShape {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn side_measure_examples() {
        assert_eq!(iv(0.0, 10.0).side_measure(2.0), (2.0, 8.0));
        assert_eq!(iv(0.0, 10.0).side_measure(-1.0), (0.0, 11.0));
        assert_eq!(iv(0.0, f32::INFINITY).side_measure(5.0), (5.0, f64::INFINITY));
    }

    #[test]
    fn emptiness_examples() {
        assert!(Region::new(vec![iv(0.0, 1.0), iv(5.0, 3.0)]).is_empty());
        assert!(!Region::new(vec![iv(0.0, 0.0)]).is_empty());
    }

    #[test]
    fn succ_of_zero_is_smallest_subnormal() {
        assert_eq!(succ32(0.0), f32::from_bits(1));
        assert_eq!(succ32(-0.0), f32::from_bits(1));
        assert_eq!(succ32(1.0), 1.0 + f32::EPSILON);
        assert_eq!(pred32(succ32(7.25)), 7.25);
    }

    #[test]
    fn parse_domain_forms() {
        let d = Region::parse_domain("-inf:inf", 3).unwrap();
        assert_eq!(d, Region::unbounded(3));
        let d = Region::parse_domain("0:1, -1:1", 2).unwrap();
        assert_eq!(d.dims, vec![iv(0.0, 1.0), iv(-1.0, 1.0)]);
        assert!(Region::parse_domain("0:1,0:1", 3).is_err());
        assert!(Region::parse_domain("1:0", 1).is_err());
        assert!(Region::parse_domain("0-1", 1).is_err());
        assert!(Region::parse_domain("nan:1", 1).is_err());
    }

    #[test]
    fn display_uses_inf_keywords() {
        let r = Region::new(vec![iv(f32::NEG_INFINITY, 0.0), iv(1.5, f32::INFINITY)]);
        assert_eq!(r.to_string(), "[-inf, 0] x [1.5, inf]");
        assert_eq!(OutputRange::from_point(&[2.0, 0.5]).to_string(), "(2, 0.5)");
    }

    /// Walks every representable float between two bounds.
    fn floats_between(lo: f32, hi: f32) -> impl Iterator<Item = f32> {
        std::iter::successors(Some(lo), move |&x| {
            let n = succ32(x);
            (n <= hi).then_some(n)
        })
    }

    #[test]
    fn split_is_exhaustive_and_disjoint_on_small_ranges() {
        let parent = Region::new(vec![iv(-1.0e-44, 2.0e-44)]);
        for t in floats_between(-2.0e-44, 3.0e-44) {
            let (l, r) = parent.split(0, t).unwrap();
            for x in floats_between(-1.0e-44, 2.0e-44) {
                let in_l = l.contains(&[x]).unwrap();
                let in_r = r.contains(&[x]).unwrap();
                assert!(in_l ^ in_r, "x={x:e} t={t:e}");
                assert_eq!(in_l, x <= t);
            }
        }
        // across a normal-range grid step
        let parent = Region::new(vec![iv(1.0, 1.0 + 64.0 * f32::EPSILON)]);
        let t = 1.0 + 17.0 * f32::EPSILON;
        let (l, r) = parent.split(0, t).unwrap();
        for x in floats_between(1.0, 1.0 + 64.0 * f32::EPSILON) {
            assert!(l.contains(&[x]).unwrap() ^ r.contains(&[x]).unwrap());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn finite() -> impl Strategy<Value = f32> {
            prop_oneof![-100.0f32..100.0, (-20i32..20).prop_map(|v| v as f32)]
        }

        proptest! {
            #[test]
            fn split_children_are_subsets(lo in finite(), w in 0.0f32..50.0, t in finite(), x in finite()) {
                let parent = Region::new(vec![iv(lo, lo + w), Interval::UNBOUNDED]);
                let (l, r) = parent.split(0, t).unwrap();
                prop_assert!(l.is_subset_of(&parent));
                prop_assert!(r.is_subset_of(&parent));
                let p = [x, 0.0];
                if parent.contains(&p).unwrap() {
                    prop_assert!(l.contains(&p).unwrap() ^ r.contains(&p).unwrap());
                }
            }

            #[test]
            fn zero_left_measure_iff_left_child_empty(lo in finite(), w in 0.0f32..50.0, t in finite()) {
                let interval = iv(lo, lo + w);
                let (left, _) = interval.side_measure(t);
                let (l, _) = Region::new(vec![interval]).split(0, t).unwrap();
                if t < lo {
                    prop_assert_eq!(left, 0.0);
                    prop_assert!(l.is_empty());
                } else {
                    prop_assert!(!l.is_empty());
                }
            }
        }
    }
}
