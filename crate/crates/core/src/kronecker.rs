//! The finitary Kronecker functional `Gamma` and the metastable rate `kappa`
//! for `(1/a_n) sum a_i x_i -> 0`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Signed;

use crate::num::{int, Rat};
use crate::rates::{ConvergenceRate, Counterfunction, MetastabilityRate};
use crate::space::{weighted_averages, SpaceDescriptor, VectorSequence, WeightSequence};
use crate::{Error, Result};

type NatSeq = dyn Fn(u64) -> u64 + Send + Sync;

/// Natural numbers `z_n`, nondecreasing, bounding `||s_n||`.
#[derive(Clone)]
pub struct BoundSequence(Arc<NatSeq>);

impl BoundSequence {
    pub fn new(z: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Self {
        BoundSequence(Arc::new(z))
    }

    pub fn constant(c: u64) -> Self {
        Self::new(move |_| c)
    }

    /// Table values, repeating the last entry beyond the end.
    pub fn from_table(table: Vec<u64>) -> Self {
        let table = Arc::new(table);
        Self::new(move |n| {
            let i = (n as usize).min(table.len().saturating_sub(1));
            table.get(i).copied().unwrap_or(0)
        })
    }

    /// Running maximum of `ceil(||s_i||)` up to `horizon`, constant afterwards.
    pub fn from_partial_sums(space: &SpaceDescriptor, x: &VectorSequence, horizon: u64) -> Result<Self> {
        let mut best = 0u64;
        let mut table = Vec::with_capacity(horizon as usize + 1);
        for s in x.tabulate_partial_sums(horizon)? {
            let up = crate::num::ceil_u64(&space.norm(&s)?.upper())?;
            best = best.max(up);
            table.push(best);
        }
        Ok(Self::from_table(table))
    }

    pub fn eval(&self, n: u64) -> u64 {
        (self.0)(n)
    }

    pub fn check_prefix(&self, n: u64) -> Result<()> {
        let mut prev = 0;
        for i in 0..=n {
            let z = self.eval(i);
            if z < prev {
                return Err(Error::BoundsNotMonotone(i));
            }
            prev = z;
        }
        Ok(())
    }

    /// True iff `z_n >= ||s_n||` for every `n <= horizon`.
    pub fn dominates(&self, space: &SpaceDescriptor, x: &VectorSequence, horizon: u64) -> Result<bool> {
        for (n, s) in x.tabulate_partial_sums(horizon)?.iter().enumerate() {
            if !space.norm(s)?.certainly_le(&int(self.eval(n as u64))) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Debug for BoundSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("BoundSequence").finish_non_exhaustive()
    }
}

pub type RatToNat = dyn Fn(&Rat) -> Result<u64> + Send + Sync;

/// The premise modulus `gamma: Q+ -> N`.
#[derive(Clone)]
pub struct PremiseModulus(Arc<RatToNat>);

impl PremiseModulus {
    pub fn new(f: impl Fn(&Rat) -> Result<u64> + Send + Sync + 'static) -> Self {
        PremiseModulus(Arc::new(f))
    }

    pub fn constant(m: u64) -> Self {
        Self::new(move |_| Ok(m))
    }

    pub fn eval(&self, eps: &Rat) -> Result<u64> {
        (self.0)(eps)
    }
}

/// Least `n` with `a_n >= x`, located via the growth witness and binary search.
pub fn weight_index(a: &WeightSequence, x: &Rat) -> Result<u64> {
    if !x.is_positive() {
        return Ok(0);
    }
    let hi = a.growth(x);
    if a.weight(hi) < *x {
        return Err(Error::GrowthWitness { index: hi, target: alloc::format!("{x}") });
    }
    let (mut lo, mut hi) = (0u64, hi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if a.weight(mid) >= *x {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// A nondecreasing `f*` dominating `weight_index`, usable in its place.
pub type IndexBound<'a> = &'a dyn Fn(&Rat) -> Result<u64>;

fn threshold(a: &WeightSequence, z: u64, m: u64, eps: &Rat) -> Rat {
    int(4) * a.weight(m) * int(z) / eps
}

/// `Gamma = max{M, f(4 a_M z_M / eps)}` with `M = gamma(eps/4)`.
pub fn finitary_gamma(a: &WeightSequence, gamma: &PremiseModulus, z: &BoundSequence, eps: &Rat) -> Result<u64> {
    finitary_gamma_by(&|x| weight_index(a, x), a, gamma, z, eps)
}

pub fn finitary_gamma_by(
    f: IndexBound<'_>,
    a: &WeightSequence,
    gamma: &PremiseModulus,
    z: &BoundSequence,
    eps: &Rat,
) -> Result<u64> {
    let m = gamma.eval(&(eps / int(4)))?;
    Ok(m.max(f(&threshold(a, z.eval(m), m, eps))?))
}

/// The antecedent of the finitary lemma at `M`: `z_M >= ||s_i||` for `i <= M`
/// and `||s_n - s_M|| < eps/4` for `n` in `[M, w]`.
pub fn kronecker_premises(
    space: &SpaceDescriptor,
    x: &VectorSequence,
    m: u64,
    z: &BoundSequence,
    eps: &Rat,
    w: u64,
) -> Result<bool> {
    let sums = x.tabulate_partial_sums(m.max(w))?;
    let zm = int(z.eval(m));
    for s in &sums[..=m as usize] {
        if !space.norm(s)?.certainly_le(&zm) {
            return Ok(false);
        }
    }
    let quarter = eps / int(4);
    let sm = &sums[m as usize];
    for s in sums.iter().take(w as usize + 1).skip(m as usize) {
        if !space.norm(&s.sub(sm))?.certainly_lt(&quarter) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// True iff `||(1/a_n) sum a_i x_i|| < eps` for every `n` in `[start, w]`.
pub fn kronecker_window_holds(
    space: &SpaceDescriptor,
    x: &VectorSequence,
    a: &WeightSequence,
    eps: &Rat,
    start: u64,
    w: u64,
) -> Result<bool> {
    if start > w {
        return Ok(true);
    }
    for avg in weighted_averages(x, a, start, w)? {
        if !space.norm(&avg)?.certainly_lt(eps) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `kappa(eps, g) = max{Q, f(4 a_Q z_Q / eps)}` with `Q = Phi(eps/4, h)`.
pub fn meta_rate_kronecker(
    phi: &MetastabilityRate,
    a: &WeightSequence,
    z: &BoundSequence,
    eps: &Rat,
    g: &Counterfunction,
) -> Result<u64> {
    let a2 = a.clone();
    meta_rate_kronecker_by(Arc::new(move |x: &Rat| weight_index(&a2, x)), phi, a, z, eps, g)
}

/// As [`meta_rate_kronecker`] with `f` replaced by a dominating `f*`.
pub fn meta_rate_kronecker_by(
    f: Arc<RatToNat>,
    phi: &MetastabilityRate,
    a: &WeightSequence,
    z: &BoundSequence,
    eps: &Rat,
    g: &Counterfunction,
) -> Result<u64> {
    let h = {
        let (f, a, z, g2, eps) = (f.clone(), a.clone(), z.clone(), g.clone(), eps.clone());
        Counterfunction::fallible(move |n| {
            let t = f(&threshold(&a, z.eval(n), n, &eps))?;
            g2.eval_tilde(n.max(t))
        })
        .with_budget(g.budget())
    };
    let q = phi.eval(&(eps / int(4)), &h)?;
    Ok(q.max(f(&threshold(a, z.eval(q), q, eps))?))
}

/// `kappa` packaged as a metastability rate; it ignores `g` exactly when `Phi` does.
pub fn kronecker_meta_rate(phi: &MetastabilityRate, a: &WeightSequence, z: &BoundSequence) -> MetastabilityRate {
    let independent = phi.function_independent();
    let (phi, a, z) = (phi.clone(), a.clone(), z.clone());
    let rate = MetastabilityRate::new(move |eps, g| meta_rate_kronecker(&phi, &a, &z, eps, g));
    if independent {
        rate.declared_independent()
    } else {
        rate
    }
}

/// Rate of convergence to zero from a plain rate `Phi` for the partial sums:
/// the same expression with `Q = Phi(eps/4)`.
pub fn rate_kronecker(phi: &ConvergenceRate, a: &WeightSequence, z: &BoundSequence) -> ConvergenceRate {
    let (phi, a, z) = (phi.clone(), a.clone(), z.clone());
    ConvergenceRate::new(move |eps| {
        let q = phi.eval(&(eps / int(4)))?;
        Ok(q.max(weight_index(&a, &threshold(&a, z.eval(q), q, eps))?))
    })
}
