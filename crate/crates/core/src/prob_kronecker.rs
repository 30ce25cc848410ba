//! The finitary probabilistic Kronecker functional `Psi`, the rate `kappa^p`,
//! and bounds built from rates of almost-sure finiteness.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Signed;

use crate::engine::{exact_probabilities, DiscreteDistribution, IndependentProcess, PrefixEvent};
use crate::kronecker::{finitary_gamma, meta_rate_kronecker, weight_index, BoundSequence, PremiseModulus};
use crate::num::{ceil_u64, int, Rat};
use crate::rates::{AsConvergenceRate, AsMetastabilityRate, Counterfunction, MetastabilityRate};
use crate::space::{SpaceDescriptor, WeightSequence};
use crate::{Error, Result};

type LevelFn = dyn Fn(&Rat) -> u64 + Send + Sync;

/// `lambda -> m` with `P(||Y|| >= m) <= lambda`.
#[derive(Clone)]
pub struct FinitenessRate(Arc<LevelFn>);

impl FinitenessRate {
    pub fn new(f: impl Fn(&Rat) -> u64 + Send + Sync + 'static) -> Self {
        FinitenessRate(Arc::new(f))
    }

    /// A variable bounded by `b` surely.
    pub fn bounded(b: u64) -> Self {
        Self::new(move |_| b.saturating_add(1))
    }

    pub fn eval(&self, lambda: &Rat) -> u64 {
        (self.0)(lambda)
    }
}

impl fmt::Debug for FinitenessRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("FinitenessRate").finish_non_exhaustive()
    }
}

/// `R(lambda) = ceil(E / lambda)` for `E >= E||Y||`, by Markov's inequality.
pub fn markov_finiteness_rate(e: u64) -> FinitenessRate {
    FinitenessRate::new(move |lambda| ceil_u64(&(int(e) / lambda)).unwrap_or(u64::MAX))
}

type LeveledFn = dyn Fn(&Rat, u64) -> u64 + Send + Sync;

/// `z_n(lambda)`: nondecreasing in `n` and bounding the partial sums with
/// `P(union_{i<=n} ||Z_i|| >= z_n(lambda)) <= lambda`.
#[derive(Clone)]
pub struct LeveledBoundSequence(Arc<LeveledFn>);

impl LeveledBoundSequence {
    pub fn new(f: impl Fn(&Rat, u64) -> u64 + Send + Sync + 'static) -> Self {
        LeveledBoundSequence(Arc::new(f))
    }

    pub fn constant(c: u64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn eval(&self, lambda: &Rat, n: u64) -> u64 {
        (self.0)(lambda, n)
    }

    /// The deterministic bound sequence `n -> z_n(lambda)`.
    pub fn column(&self, lambda: &Rat) -> BoundSequence {
        let (me, lambda) = (self.clone(), lambda.clone());
        BoundSequence::new(move |n| me.eval(&lambda, n))
    }
}

impl fmt::Debug for LeveledBoundSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("LeveledBoundSequence").finish_non_exhaustive()
    }
}

/// `z_n(lambda) = max_{m<=n} max_{i<=m} R_i(lambda/(m+1))`. Indices past the
/// end of `rates` reuse its last entry.
pub fn bounds_from_finiteness(rates: Vec<FinitenessRate>) -> Result<LeveledBoundSequence> {
    if rates.is_empty() {
        return Err(Error::invalid("at least one finiteness rate is needed"));
    }
    let rates = Arc::new(rates);
    Ok(LeveledBoundSequence::new(move |lambda, n| {
        let last = rates.len() - 1;
        let mut best = 0u64;
        for m in 0..=n {
            let level = lambda / int(m + 1);
            for i in 0..=m {
                best = best.max(rates[(i as usize).min(last)].eval(&level));
            }
        }
        best
    }))
}

/// `z_n(lambda) = R(lambda)` for a modulus of uniform boundedness `R`.
pub fn bounds_from_uniform(rate: FinitenessRate) -> LeveledBoundSequence {
    LeveledBoundSequence::new(move |lambda, _| rate.eval(lambda))
}

type PsiFn = dyn Fn(&Rat, &Rat) -> Result<u64> + Send + Sync;

/// The premise modulus `psi: Q+ x Q+ -> N`.
#[derive(Clone)]
pub struct ProbPremiseModulus(Arc<PsiFn>);

impl ProbPremiseModulus {
    pub fn new(f: impl Fn(&Rat, &Rat) -> Result<u64> + Send + Sync + 'static) -> Self {
        ProbPremiseModulus(Arc::new(f))
    }

    pub fn constant(m: u64) -> Self {
        Self::new(move |_, _| Ok(m))
    }

    pub fn eval(&self, eps: &Rat, lambda: &Rat) -> Result<u64> {
        (self.0)(eps, lambda)
    }

    /// `gamma_lambda(eps) = psi(eps, lambda)`.
    pub fn at_level(&self, lambda: &Rat) -> PremiseModulus {
        let (me, lambda) = (self.clone(), lambda.clone());
        PremiseModulus::new(move |eps| me.eval(eps, &lambda))
    }
}

/// `Psi = Gamma(gamma_{lambda/2}, z(lambda/2), eps)`.
pub fn finitary_psi(
    a: &WeightSequence,
    psi: &ProbPremiseModulus,
    z: &LeveledBoundSequence,
    eps: &Rat,
    lambda: &Rat,
) -> Result<u64> {
    let half = lambda / int(2);
    finitary_gamma(a, &psi.at_level(&half), &z.column(&half), eps)
}

/// `kappa^p(eps, lambda, K)`: the deterministic `kappa` for the rate
/// `(eps, g) -> Phi(eps, lambda/2, g)` and bounds `z(lambda/2)`.
pub fn meta_rate_prob_kronecker(
    phi: &AsMetastabilityRate,
    a: &WeightSequence,
    z: &LeveledBoundSequence,
    eps: &Rat,
    lambda: &Rat,
    k: &Counterfunction,
) -> Result<u64> {
    let half = lambda / int(2);
    let sliced = {
        let (phi, half) = (phi.clone(), half.clone());
        MetastabilityRate::new(move |e, g| phi.eval(e, &half, g))
    };
    meta_rate_kronecker(&sliced, a, &z.column(&half), eps, k)
}

pub fn prob_kronecker_meta_rate(
    phi: &AsMetastabilityRate,
    a: &WeightSequence,
    z: &LeveledBoundSequence,
) -> AsMetastabilityRate {
    let independent = phi.function_independent();
    let (phi, a, z) = (phi.clone(), a.clone(), z.clone());
    AsMetastabilityRate::new(move |e, l, k| meta_rate_prob_kronecker(&phi, &a, &z, e, l, k))
        .with_independence(independent)
}

/// Rate of almost-sure convergence to zero from a plain rate, `Q = Phi(eps/4, lambda/2)`.
pub fn rate_prob_kronecker(
    phi: &AsConvergenceRate,
    a: &WeightSequence,
    z: &LeveledBoundSequence,
) -> AsConvergenceRate {
    let (phi, a, z) = (phi.clone(), a.clone(), z.clone());
    AsConvergenceRate::new(move |eps, lambda| {
        let half = lambda / int(2);
        let q = phi.eval(&(eps / int(4)), &half)?;
        let t = int(4) * a.weight(q) * int(z.eval(&half, q)) / eps;
        Ok(q.max(weight_index(&a, &t)?))
    })
}

/// `P(||Y|| >= R(lambda)) <= lambda`, exactly.
pub fn check_finiteness_rate(
    space: &SpaceDescriptor,
    dist: &DiscreteDistribution,
    rate: &FinitenessRate,
    lambda: &Rat,
) -> Result<bool> {
    let m = int(rate.eval(lambda));
    let mut p = Rat::default();
    for (v, q) in dist.atoms() {
        if !space.norm(v)?.certainly_lt(&m) {
            p += q;
        }
    }
    Ok(p <= *lambda)
}

/// The probability in the bound condition `P(union_{i<=n} ||Z_i|| >= z_n(lambda))`
/// for the partial sums `Z_i` of `process`, and whether it is `<= lambda`.
pub fn check_leveled_bounds(
    process: &IndependentProcess,
    space: &SpaceDescriptor,
    z: &LeveledBoundSequence,
    lambda: &Rat,
    n: u64,
) -> Result<(Rat, bool)> {
    let ev = PrefixEvent::partial_sum_reaches(space, n, int(z.eval(lambda, n)));
    let p = exact_probabilities(process, &[ev])?.remove(0);
    let ok = p <= *lambda;
    Ok((p, ok))
}

/// Exact probabilities behind one instance of the finitary probabilistic lemma.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiInstance {
    pub m: u64,
    pub n: u64,
    /// `P(union_{i<=M} ||Z_i|| >= z_M)`.
    pub bound_failure: Rat,
    /// `P(max_{M<=m<=k} ||Z_M - Z_m|| >= eps/4)`.
    pub fluctuation: Rat,
    /// `P(max_{N<=n<=k} ||(1/a_n) sum a_i Y_i|| >= eps)`.
    pub conclusion: Rat,
    pub premises_hold: bool,
    pub conclusion_holds: bool,
}

/// Evaluates both premises and the conclusion at `N = Psi` by enumeration.
#[allow(clippy::too_many_arguments)]
pub fn verify_psi_instance(
    process: &IndependentProcess,
    space: &SpaceDescriptor,
    a: &WeightSequence,
    psi: &ProbPremiseModulus,
    z: &LeveledBoundSequence,
    eps: &Rat,
    lambda: &Rat,
    k: u64,
) -> Result<PsiInstance> {
    if !eps.is_positive() || !lambda.is_positive() {
        return Err(Error::invalid("eps and lambda must be positive"));
    }
    let half = lambda / int(2);
    let m = psi.eval(&(eps / int(4)), &half)?;
    let n = finitary_psi(a, psi, z, eps, lambda)?;
    let zm = int(z.eval(&half, m));
    let events = [
        PrefixEvent::partial_sum_reaches(space, m, zm),
        PrefixEvent::fluctuation(space, m, k.max(m), eps / int(4), false),
        PrefixEvent::weighted_average_exceeds(space, a, n, k.max(n), eps.clone()),
    ];
    let mut probs = exact_probabilities(process, &events)?;
    let conclusion = if n > k { Rat::default() } else { probs.pop().unwrap() };
    if n > k {
        probs.pop();
    }
    let fluctuation = probs.pop().unwrap();
    let bound_failure = probs.pop().unwrap();
    let premises_hold = bound_failure <= half && fluctuation < half;
    let conclusion_holds = conclusion < *lambda;
    Ok(PsiInstance { m, n, bound_failure, fluctuation, conclusion, premises_hold, conclusion_holds })
}
