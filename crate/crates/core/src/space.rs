//! Finite-dimensional normed spaces over the rationals, term and weight
//! sequences, partial sums and weighted averages.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::num::{ceil_log2_recip, ceil_u64, int, pow2, pow_enclosure, Interval, Rat};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormKind {
    /// `max |v_i|`; on the line this is the absolute value.
    Max,
    /// `sum |v_i|`.
    One,
    /// `sqrt(sum v_i^2)`, compared through its square.
    Euclidean,
    /// `(sum |v_i|^r)^(1/r)` for rational `r` in `[1, 2]`, via certified enclosures.
    P(Rat),
}

/// A concrete space: dimension, norm, and the type-p constants `(p, C)` with
/// `E||sum Y_i||^p <= C sum E||Y_i||^p` for independent mean-zero `Y_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceDescriptor {
    dimension: usize,
    norm: NormKind,
    type_exponent: Rat,
    type_constant: Rat,
}

impl SpaceDescriptor {
    pub fn new(dimension: usize, norm: NormKind, type_exponent: Rat, type_constant: Rat) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        let one = Rat::one();
        let two = int(2);
        if type_exponent < one || type_exponent > two {
            return Err(Error::invalid("type exponent must lie in [1, 2]"));
        }
        if !type_constant.is_positive() {
            return Err(Error::invalid("type constant must be positive"));
        }
        if let NormKind::P(r) = &norm {
            if *r < one || *r > two {
                return Err(Error::invalid("norm exponent must lie in [1, 2]"));
            }
        }
        Ok(SpaceDescriptor { dimension, norm, type_exponent, type_constant })
    }

    /// The real line with the absolute value; type 2 with constant 1.
    pub fn reals() -> Self {
        SpaceDescriptor { dimension: 1, norm: NormKind::Max, type_exponent: int(2), type_constant: int(1) }
    }

    /// `R^d` with the max norm. Type 2 with constant `d`, from comparison with
    /// the Euclidean norm.
    pub fn max_norm(d: usize) -> Self {
        SpaceDescriptor { dimension: d.max(1), norm: NormKind::Max, type_exponent: int(2), type_constant: int(d.max(1) as u64) }
    }

    /// `R^d` with the 1-norm; type 1 with constant 1 by the triangle inequality.
    pub fn one_norm(d: usize) -> Self {
        SpaceDescriptor { dimension: d.max(1), norm: NormKind::One, type_exponent: int(1), type_constant: int(1) }
    }

    /// Euclidean `R^d`; type 2 with constant 1.
    pub fn euclidean(d: usize) -> Self {
        SpaceDescriptor { dimension: d.max(1), norm: NormKind::Euclidean, type_exponent: int(2), type_constant: int(1) }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn norm_kind(&self) -> &NormKind {
        &self.norm
    }

    pub fn type_exponent(&self) -> &Rat {
        &self.type_exponent
    }

    pub fn type_constant(&self) -> &Rat {
        &self.type_constant
    }

    pub fn check(&self, v: &Vector) -> Result<()> {
        if v.dim() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, found: v.dim() });
        }
        Ok(())
    }

    pub fn norm(&self, v: &Vector) -> Result<NormValue> {
        self.check(v)?;
        Ok(match &self.norm {
            NormKind::Max => NormValue::Exact(v.0.iter().map(|c| c.abs()).max().unwrap_or_else(Rat::zero)),
            NormKind::One => NormValue::Exact(v.0.iter().map(|c| c.abs()).sum()),
            NormKind::Euclidean => {
                let sq: Rat = v.0.iter().map(|c| c * c).sum();
                if self.dimension == 1 {
                    NormValue::Exact(v.0[0].abs())
                } else {
                    NormValue::Sqrt(sq)
                }
            }
            NormKind::P(r) => {
                if r.is_one() {
                    return Ok(NormValue::Exact(v.0.iter().map(|c| c.abs()).sum()));
                }
                let mut total = Interval::exact(Rat::zero());
                for c in &v.0 {
                    total = total.add(&pow_enclosure(&c.abs(), r)?);
                }
                let inv = r.recip();
                let lo = pow_enclosure(&total.lo, &inv)?.lo;
                let hi = pow_enclosure(&total.hi, &inv)?.hi;
                NormValue::Approx(Interval::new(lo, hi))
            }
        })
    }
}

/// A norm, either exact, as the square root of an exact rational, or as a
/// certified enclosure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NormValue {
    Exact(Rat),
    Sqrt(Rat),
    Approx(Interval),
}

impl NormValue {
    /// Ordering against `x >= 0`, `None` when an enclosure straddles `x`.
    pub fn cmp_rat(&self, x: &Rat) -> Option<Ordering> {
        match self {
            NormValue::Exact(v) => Some(v.cmp(x)),
            NormValue::Sqrt(sq) => {
                if x.is_negative() {
                    Some(Ordering::Greater)
                } else {
                    Some(sq.cmp(&(x * x)))
                }
            }
            NormValue::Approx(i) => i.cmp_rat(x),
        }
    }

    pub fn certainly_lt(&self, x: &Rat) -> bool {
        self.cmp_rat(x) == Some(Ordering::Less)
    }

    pub fn certainly_le(&self, x: &Rat) -> bool {
        matches!(self.cmp_rat(x), Some(Ordering::Less | Ordering::Equal))
    }

    pub fn certainly_gt(&self, x: &Rat) -> bool {
        self.cmp_rat(x) == Some(Ordering::Greater)
    }

    pub fn certainly_ge(&self, x: &Rat) -> bool {
        matches!(self.cmp_rat(x), Some(Ordering::Greater | Ordering::Equal))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NormValue::Exact(v) | NormValue::Sqrt(v) => v.is_zero(),
            NormValue::Approx(i) => i.hi.is_zero(),
        }
    }

    /// An enclosure of the value.
    pub fn enclosure(&self) -> Interval {
        match self {
            NormValue::Exact(v) => Interval::exact(v.clone()),
            NormValue::Sqrt(sq) => crate::num::root_enclosure(sq, 2),
            NormValue::Approx(i) => i.clone(),
        }
    }

    /// An upper bound on the value.
    pub fn upper(&self) -> Rat {
        self.enclosure().hi
    }
}

impl fmt::Display for NormValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormValue::Exact(v) => write!(f, "{v}"),
            NormValue::Sqrt(sq) => match crate::num::exact_root(sq, 2) {
                Some(r) => write!(f, "{r}"),
                None => write!(f, "sqrt({sq})"),
            },
            NormValue::Approx(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Vector(Vec<Rat>);

impl Vector {
    pub fn new(coords: Vec<Rat>) -> Self {
        Vector(coords)
    }

    pub fn scalar(x: Rat) -> Self {
        Vector(vec![x])
    }

    pub fn zero(dim: usize) -> Self {
        Vector(vec![Rat::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Rat] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<Rat> {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: &Rat) -> Vector {
        Vector(self.0.iter().map(|a| a * c).collect())
    }

    pub fn add_assign(&mut self, other: &Vector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, c: &Rat, other: &Vector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

type TermFn = dyn Fn(u64) -> Vector + Send + Sync;

/// A sequence `x_0, x_1, ...` of vectors, evaluable up to `budget`.
#[derive(Clone)]
pub struct VectorSequence {
    dim: usize,
    term: Arc<TermFn>,
    budget: u64,
}

impl VectorSequence {
    pub fn new(dim: usize, term: impl Fn(u64) -> Vector + Send + Sync + 'static, budget: u64) -> Self {
        VectorSequence { dim, term: Arc::new(term), budget }
    }

    pub fn scalar(term: impl Fn(u64) -> Rat + Send + Sync + 'static, budget: u64) -> Self {
        Self::new(1, move |n| Vector::scalar(term(n)), budget)
    }

    /// Terms from a table, zero beyond its end; the budget is unbounded.
    pub fn from_table(dim: usize, table: Vec<Vector>) -> Self {
        let table = Arc::new(table);
        Self::new(dim, move |n| table.get(n as usize).cloned().unwrap_or_else(|| Vector::zero(dim)), u64::MAX)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| Vector::zero(dim), u64::MAX)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn check_index(&self, n: u64) -> Result<()> {
        if n > self.budget {
            return Err(Error::IndexBeyondBudget { index: n, budget: self.budget });
        }
        Ok(())
    }

    pub fn term(&self, n: u64) -> Result<Vector> {
        self.check_index(n)?;
        let v = (self.term)(n);
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.dim() });
        }
        Ok(v)
    }

    /// `x_0, ..., x_n`.
    pub fn prefix(&self, n: u64) -> Result<Vec<Vector>> {
        (0..=n).map(|i| self.term(i)).collect()
    }

    /// The sequence of partial sums `s_n = x_0 + ... + x_n`, recomputed per
    /// index.
    pub fn partial_sums(&self) -> VectorSequence {
        let x = self.clone();
        let dim = self.dim;
        VectorSequence::new(
            dim,
            move |n| partial_sum(&x, n).unwrap_or_else(|_| Vector::zero(dim)),
            self.budget,
        )
    }

    /// `s_0, ..., s_n` computed incrementally.
    pub fn tabulate_partial_sums(&self, n: u64) -> Result<Vec<Vector>> {
        let mut acc = Vector::zero(self.dim);
        let mut out = Vec::with_capacity(n as usize + 1);
        for i in 0..=n {
            acc.add_assign(&self.term(i)?);
            out.push(acc.clone());
        }
        Ok(out)
    }
}

impl fmt::Debug for VectorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorSequence").field("dim", &self.dim).field("budget", &self.budget).finish_non_exhaustive()
    }
}

type WeightFn = dyn Fn(u64) -> Rat + Send + Sync;
type GrowthFn = dyn Fn(&Rat) -> u64 + Send + Sync;

/// Positive nondecreasing unbounded weights `a_n`, with a growth witness
/// `x -> k` claimed to satisfy `a_k >= x`.
#[derive(Clone)]
pub struct WeightSequence {
    weight: Arc<WeightFn>,
    growth: Arc<GrowthFn>,
}

impl WeightSequence {
    pub fn new(
        weight: impl Fn(u64) -> Rat + Send + Sync + 'static,
        growth: impl Fn(&Rat) -> u64 + Send + Sync + 'static,
    ) -> Self {
        WeightSequence { weight: Arc::new(weight), growth: Arc::new(growth) }
    }

    /// `a_n = n + 1`.
    pub fn linear() -> Self {
        Self::new(|n| int(n + 1), |x| ceil_u64(x).unwrap_or(u64::MAX).saturating_sub(1))
    }

    /// `a_n = c (n + 1)` for rational `c > 0`.
    pub fn scaled_linear(c: Rat) -> Self {
        let c2 = c.clone();
        Self::new(
            move |n| &c * int(n + 1),
            move |x| ceil_u64(&(x / &c2)).unwrap_or(u64::MAX).saturating_sub(1),
        )
    }

    /// `a_n = 2^n`.
    pub fn power2() -> Self {
        Self::new(
            |n| pow2(n as i64),
            |x| if x.is_positive() { ceil_log2_recip(&x.recip()) } else { 0 },
        )
    }

    /// `a_n = ceil(sqrt(n + 1))`.
    pub fn sqrt_ceil() -> Self {
        Self::new(
            |n| int(isqrt_ceil(n + 1)),
            |x| {
                let m = ceil_u64(x).unwrap_or(u64::MAX);
                m.saturating_mul(m).saturating_sub(1)
            },
        )
    }

    pub fn weight(&self, n: u64) -> Rat {
        (self.weight)(n)
    }

    pub fn growth(&self, x: &Rat) -> u64 {
        (self.growth)(x)
    }

    /// Checks `0 < a_0 <= a_1 <= ... <= a_n`.
    pub fn check_prefix(&self, n: u64) -> Result<()> {
        let mut prev = Rat::zero();
        for i in 0..=n {
            let a = self.weight(i);
            if a < prev || !a.is_positive() {
                return Err(Error::WeightsNotMonotone(i));
            }
            prev = a;
        }
        Ok(())
    }
}

impl fmt::Debug for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSequence").finish_non_exhaustive()
    }
}

fn isqrt_ceil(m: u64) -> u64 {
    let r = m.isqrt();
    if r * r == m {
        r
    } else {
        r + 1
    }
}

/// `s_n = x_0 + ... + x_n`.
pub fn partial_sum(x: &VectorSequence, n: u64) -> Result<Vector> {
    x.check_index(n)?;
    let mut acc = Vector::zero(x.dim());
    for i in 0..=n {
        acc.add_assign(&x.term(i)?);
    }
    Ok(acc)
}

/// `(1/a_n) sum_{i<=n} a_i x_i`.
pub fn weighted_average(x: &VectorSequence, a: &WeightSequence, n: u64) -> Result<Vector> {
    x.check_index(n)?;
    let mut acc = Vector::zero(x.dim());
    for i in 0..=n {
        acc.add_scaled(&a.weight(i), &x.term(i)?);
    }
    Ok(acc.scale(&a.weight(n).recip()))
}

/// Weighted averages at every index in `[from, to]`, sharing one running sum.
pub fn weighted_averages(x: &VectorSequence, a: &WeightSequence, from: u64, to: u64) -> Result<Vec<Vector>> {
    x.check_index(to)?;
    let mut acc = Vector::zero(x.dim());
    let mut out = Vec::new();
    for i in 0..=to {
        acc.add_scaled(&a.weight(i), &x.term(i)?);
        if i >= from {
            out.push(acc.scale(&a.weight(i).recip()));
        }
    }
    Ok(out)
}

/// Norm of `(1/a_n) sum a_i x_i - (s_n - (1/a_n) sum_{i<n} (a_{i+1} - a_i) s_i)`,
/// which summation by parts makes exactly zero.
pub fn abel_summation_residual(
    space: &SpaceDescriptor,
    x: &VectorSequence,
    a: &WeightSequence,
    n: u64,
) -> Result<NormValue> {
    if n == 0 {
        return Err(Error::invalid("summation by parts needs n >= 1"));
    }
    let lhs = weighted_average(x, a, n)?;
    let sums = x.tabulate_partial_sums(n)?;
    let mut corr = Vector::zero(x.dim());
    for i in 0..n {
        corr.add_scaled(&(a.weight(i + 1) - a.weight(i)), &sums[i as usize]);
    }
    let rhs = sums[n as usize].sub(&corr.scale(&a.weight(n).recip()));
    space.norm(&lhs.sub(&rhs))
}
