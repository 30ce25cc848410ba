//! Rates of convergence and of metastability, deterministic and almost-sure.
//!
//! A rate of metastability `Phi(eps, g)` bounds an index `N <= Phi(eps, g)` whose
//! window `[N, N + g(N)]` is `eps`-stable. Counterfunctions carry an explicit
//! output budget so that iterated compositions fail loudly instead of running away.

use alloc::sync::Arc;

use num_traits::Signed;

use crate::num::{ceil_log2_recip, ceil_u64, floor_u64, int, Rat};
use crate::space::{SpaceDescriptor, VectorSequence};
use crate::{Error, Result};

/// Default maximum admissible counterfunction output.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

type NatFn = dyn Fn(u64) -> Result<u64> + Send + Sync;

/// A function `g: N -> N` handed to a metastability rate.
#[derive(Clone)]
pub struct Counterfunction {
    f: Arc<NatFn>,
    budget: u64,
}

impl Counterfunction {
    pub fn new(f: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Self {
        Self::fallible(move |n| Ok(f(n)))
    }

    pub fn fallible(f: impl Fn(u64) -> Result<u64> + Send + Sync + 'static) -> Self {
        Counterfunction { f: Arc::new(f), budget: DEFAULT_BUDGET }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn eval(&self, n: u64) -> Result<u64> {
        let value = (self.f)(n)?;
        if value > self.budget {
            return Err(Error::CounterfunctionBudget { argument: n, value, budget: self.budget });
        }
        Ok(value)
    }

    /// `n + g(n)`, budget-checked like any other evaluation.
    pub fn eval_tilde(&self, n: u64) -> Result<u64> {
        let v = n.checked_add(self.eval(n)?).ok_or(Error::Overflow("n + g(n)"))?;
        if v > self.budget {
            return Err(Error::CounterfunctionBudget { argument: n, value: v, budget: self.budget });
        }
        Ok(v)
    }

    /// The counterfunction `n -> n + g(n)`.
    pub fn tilde(&self) -> Counterfunction {
        let g = self.clone();
        Counterfunction::fallible(move |n| g.eval_tilde(n)).with_budget(self.budget)
    }

    pub fn identity() -> Self {
        Self::new(|n| n)
    }

    pub fn constant(c: u64) -> Self {
        Self::new(move |_| c)
    }

    pub fn shift(c: u64) -> Self {
        Self::new(move |n| n.saturating_add(c))
    }

    /// `n -> a*n + b`.
    pub fn affine(a: u64, b: u64) -> Self {
        Self::new(move |n| n.saturating_mul(a).saturating_add(b))
    }

    pub fn square() -> Self {
        Self::new(|n| n.saturating_mul(n))
    }
}

impl core::fmt::Debug for Counterfunction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Counterfunction").field("budget", &self.budget).finish_non_exhaustive()
    }
}

type RatFn = dyn Fn(&Rat) -> Result<u64> + Send + Sync;
type MetaFn = dyn Fn(&Rat, &Counterfunction) -> Result<u64> + Send + Sync;
type AsRatFn = dyn Fn(&Rat, &Rat) -> Result<u64> + Send + Sync;
type AsMetaFn = dyn Fn(&Rat, &Rat, &Counterfunction) -> Result<u64> + Send + Sync;

/// `eps -> N` with `|x_n - x_m| < eps` for all `n, m >= N`.
#[derive(Clone)]
pub struct ConvergenceRate(Arc<RatFn>);

impl ConvergenceRate {
    pub fn new(f: impl Fn(&Rat) -> Result<u64> + Send + Sync + 'static) -> Self {
        ConvergenceRate(Arc::new(f))
    }

    pub fn eval(&self, eps: &Rat) -> Result<u64> {
        check_positive(eps, "eps")?;
        (self.0)(eps)
    }

    pub fn constant(c: u64) -> Self {
        Self::new(move |_| Ok(c))
    }

    /// `ceil(c / eps)`.
    pub fn inverse(c: u64) -> Self {
        Self::new(move |eps| ceil_u64(&(int(c) / eps)))
    }

    /// `ceil(log2(1/eps)) + c`.
    pub fn log2_plus(c: u64) -> Self {
        Self::new(move |eps| ceil_log2_recip(eps).checked_add(c).ok_or(Error::Overflow("log rate")))
    }
}

/// `(eps, g) -> N`, optionally declared independent of `g`.
#[derive(Clone)]
pub struct MetastabilityRate {
    f: Arc<MetaFn>,
    function_independent: bool,
}

impl MetastabilityRate {
    pub fn new(f: impl Fn(&Rat, &Counterfunction) -> Result<u64> + Send + Sync + 'static) -> Self {
        MetastabilityRate { f: Arc::new(f), function_independent: false }
    }

    /// Declares that the rate ignores its counterfunction. Tests spot-check this.
    pub fn declared_independent(mut self) -> Self {
        self.function_independent = true;
        self
    }

    pub fn function_independent(&self) -> bool {
        self.function_independent
    }

    pub fn eval(&self, eps: &Rat, g: &Counterfunction) -> Result<u64> {
        check_positive(eps, "eps")?;
        (self.f)(eps, g)
    }

    /// The rate `g^(floor(L/eps))(0)` iterated on `n -> n + g(n)`, which is a
    /// rate of metastability for any nondecreasing sequence in `[0, L]`.
    pub fn monotone(bound: Rat) -> Self {
        MetastabilityRate::new(move |eps, g| monotone_metastability(&bound, eps, &g.tilde()))
    }
}

/// `(eps, lambda) -> N` for almost-sure (almost-uniform) convergence.
#[derive(Clone)]
pub struct AsConvergenceRate(Arc<AsRatFn>);

impl AsConvergenceRate {
    pub fn new(f: impl Fn(&Rat, &Rat) -> Result<u64> + Send + Sync + 'static) -> Self {
        AsConvergenceRate(Arc::new(f))
    }

    pub fn eval(&self, eps: &Rat, lambda: &Rat) -> Result<u64> {
        check_positive(eps, "eps")?;
        check_positive(lambda, "lambda")?;
        (self.0)(eps, lambda)
    }

    pub fn constant(c: u64) -> Self {
        Self::new(move |_, _| Ok(c))
    }

    /// `ceil(c / (eps * lambda))`.
    pub fn inverse_product(c: u64) -> Self {
        Self::new(move |eps, lambda| ceil_u64(&(int(c) / (eps * lambda))))
    }
}

/// `(eps, lambda, K) -> N` for metastable almost-sure convergence.
#[derive(Clone)]
pub struct AsMetastabilityRate {
    f: Arc<AsMetaFn>,
    function_independent: bool,
}

impl AsMetastabilityRate {
    pub fn new(
        f: impl Fn(&Rat, &Rat, &Counterfunction) -> Result<u64> + Send + Sync + 'static,
    ) -> Self {
        AsMetastabilityRate { f: Arc::new(f), function_independent: false }
    }

    pub fn declared_independent(mut self) -> Self {
        self.function_independent = true;
        self
    }

    pub(crate) fn with_independence(mut self, flag: bool) -> Self {
        self.function_independent = flag;
        self
    }

    pub fn function_independent(&self) -> bool {
        self.function_independent
    }

    pub fn eval(&self, eps: &Rat, lambda: &Rat, k: &Counterfunction) -> Result<u64> {
        check_positive(eps, "eps")?;
        check_positive(lambda, "lambda")?;
        (self.f)(eps, lambda, k)
    }
}

fn check_positive(x: &Rat, what: &str) -> Result<()> {
    if x.is_positive() {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!("{what} must be positive, got {x}")))
    }
}

/// A rate of convergence viewed as a rate of metastability that ignores `g`.
pub fn lift_rate_to_metastable(rate: &ConvergenceRate) -> MetastabilityRate {
    let rate = rate.clone();
    MetastabilityRate::new(move |eps, _| rate.eval(eps)).declared_independent()
}

/// Reads a counterfunction-independent metastability rate as a plain rate,
/// evaluating it at the identity counterfunction.
pub fn collapse_metastable(rate: &MetastabilityRate) -> Result<ConvergenceRate> {
    if !rate.function_independent {
        return Err(Error::NotFunctionIndependent);
    }
    let rate = rate.clone();
    let id = Counterfunction::identity();
    Ok(ConvergenceRate::new(move |eps| rate.eval(eps, &id)))
}

pub fn lift_as_rate_to_metastable(rate: &AsConvergenceRate) -> AsMetastabilityRate {
    let rate = rate.clone();
    AsMetastabilityRate::new(move |eps, lambda, _| rate.eval(eps, lambda)).declared_independent()
}

pub fn collapse_as_metastable(rate: &AsMetastabilityRate) -> Result<AsConvergenceRate> {
    if !rate.function_independent {
        return Err(Error::NotFunctionIndependent);
    }
    let rate = rate.clone();
    let id = Counterfunction::identity();
    Ok(AsConvergenceRate::new(move |eps, lambda| rate.eval(eps, lambda, &id)))
}

/// `g^(floor(L/eps))(0)`: the `floor(L/eps)`-fold iterate of `g` from 0.
///
/// For a nondecreasing sequence in `[0, L]` some iterate `N` among the first
/// `floor(L/eps) + 1` has `|x_n - x_m| < eps` on `[N; g(N)]` whenever `g(n) >= n`.
/// Pass `g.tilde()` to obtain windows of the form `[N; N + g(N)]`.
pub fn monotone_metastability(bound: &Rat, eps: &Rat, g: &Counterfunction) -> Result<u64> {
    if !bound.is_positive() {
        return Err(Error::invalid("monotone bound L must be positive"));
    }
    check_positive(eps, "eps")?;
    let iterations = floor_u64(&(bound / eps))?;
    let mut n = 0u64;
    for _ in 0..iterations {
        let next = g.eval(n)?;
        if next == n {
            break;
        }
        n = next;
    }
    Ok(n)
}

/// True iff `||s(n) - s(m)|| < eps` for all `n, m` in `[N, N + g(N)]`.
pub fn verify_metastability_window(
    space: &SpaceDescriptor,
    s: &VectorSequence,
    eps: &Rat,
    g: &Counterfunction,
    start: u64,
) -> Result<bool> {
    let end = g.eval_tilde(start)?;
    stable_on(space, s, eps, start, end)
}

/// True iff some `N <= bound` has an `eps`-stable window `[N, N + g(N)]`, which is
/// what it means for `bound` to witness a rate of metastability at `(eps, g)`.
pub fn verify_metastability_bound(
    space: &SpaceDescriptor,
    s: &VectorSequence,
    eps: &Rat,
    g: &Counterfunction,
    bound: u64,
) -> Result<Option<u64>> {
    for n in 0..=bound {
        if verify_metastability_window(space, s, eps, g, n)? {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// `||s(n) - s(m)|| < eps` for all `n, m` in `[start, end]`.
pub fn stable_on(
    space: &SpaceDescriptor,
    s: &VectorSequence,
    eps: &Rat,
    start: u64,
    end: u64,
) -> Result<bool> {
    s.check_index(end)?;
    if space.dimension() == 1 {
        // On the line the widest pair is (min, max).
        let mut lo: Option<Rat> = None;
        let mut hi: Option<Rat> = None;
        for n in start..=end {
            let v = s.term(n)?.coords()[0].clone();
            if lo.as_ref().is_none_or(|l| v < *l) {
                lo = Some(v.clone());
            }
            if hi.as_ref().is_none_or(|h| v > *h) {
                hi = Some(v);
            }
        }
        let spread = hi.unwrap() - lo.unwrap();
        return Ok(&spread < eps);
    }
    let points = (start..=end).map(|n| s.term(n)).collect::<Result<alloc::vec::Vec<_>>>()?;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            if !space.norm(&p.sub(q))?.certainly_lt(eps) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
