//! Lifting realizers of a deterministic implication `P -> Q` between
//! `forall exists forall` statements to its almost-uniform analogue, given
//! realizers that are uniformly continuous in the majorant.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::engine::{exact_probabilities, IndependentProcess, PrefixEvent};
use crate::kronecker::weight_index;
use crate::num::{int, pow2, Rat};
use crate::space::{Vector, WeightSequence};
use crate::{Error, Result};

type PredFn = dyn Fn(u64, u64, u64, &[Rat]) -> bool + Send + Sync;
type NeedFn = dyn Fn(u64, u64, u64) -> u64 + Send + Sync;

/// A quantifier-free predicate `P_0(a, b, c, x)` inspecting only the first
/// `need(a, b, c)` terms of `x`.
#[derive(Clone)]
pub struct CheckablePredicate {
    eval: Arc<PredFn>,
    need: Arc<NeedFn>,
}

impl fmt::Debug for CheckablePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CheckablePredicate").finish_non_exhaustive()
    }
}

impl CheckablePredicate {
    pub fn new(
        eval: impl Fn(u64, u64, u64, &[Rat]) -> bool + Send + Sync + 'static,
        need: impl Fn(u64, u64, u64) -> u64 + Send + Sync + 'static,
    ) -> Self {
        CheckablePredicate { eval: Arc::new(eval), need: Arc::new(need) }
    }

    pub fn always() -> Self {
        Self::new(|_, _, _, _| true, |_, _, _| 0)
    }

    pub fn prefix_need(&self, a: u64, b: u64, c: u64) -> u64 {
        (self.need)(a, b, c)
    }

    pub fn holds(&self, a: u64, b: u64, c: u64, x: &[Rat]) -> Result<bool> {
        let need = self.prefix_need(a, b, c) as usize;
        if x.len() < need {
            return Err(Error::IndexBeyondBudget { index: need as u64 - 1, budget: x.len() as u64 });
        }
        Ok((self.eval)(a, b, c, &x[..need]))
    }

    /// Re-evaluates after overwriting every term past the declared prefix with
    /// each of `junk`; true iff the verdict never changes.
    pub fn prefix_locality_audit(&self, a: u64, b: u64, c: u64, x: &[Rat], junk: &[Rat]) -> Result<bool> {
        let base = self.holds(a, b, c, x)?;
        let need = self.prefix_need(a, b, c) as usize;
        for j in junk {
            let mut y = x.to_vec();
            for v in y.iter_mut().skip(need) {
                *v = j.clone();
            }
            y.extend(core::iter::repeat_n(j.clone(), 4));
            if self.holds(a, b, c, &y)? != base {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

type NatFn = dyn Fn(u64) -> u64 + Send + Sync;

/// A nondecreasing natural majorant `tau`.
#[derive(Clone)]
pub struct MajorantSeq(Arc<NatFn>);

impl fmt::Debug for MajorantSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("MajorantSeq").finish_non_exhaustive()
    }
}

impl MajorantSeq {
    pub fn new(tau: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Self {
        MajorantSeq(Arc::new(tau))
    }

    pub fn constant(c: u64) -> Self {
        Self::new(move |_| c)
    }

    /// Running maximum of `ceil|x_n|`, repeating its last value.
    pub fn cumulative_ceiling(x: &[Rat]) -> Result<Self> {
        let mut best = 0u64;
        let mut table = Vec::with_capacity(x.len());
        for v in x {
            best = best.max(crate::num::ceil_u64(&v.abs())?);
            table.push(best);
        }
        Ok(Self::new(move |n| table.get(n as usize).or(table.last()).copied().unwrap_or(0)))
    }

    pub fn eval(&self, n: u64) -> u64 {
        (self.0)(n)
    }
}

/// True iff `tau` is nondecreasing and `tau_n >= |x_n|` for `n <= horizon`.
pub fn majorizes(tau: &MajorantSeq, x: &[Rat], horizon: u64) -> Result<bool> {
    if (x.len() as u64) <= horizon {
        return Err(Error::IndexBeyondBudget { index: horizon, budget: x.len() as u64 });
    }
    let mut prev = 0u64;
    for n in 0..=horizon {
        let t = tau.eval(n);
        if t < prev || int(t) < x[n as usize].abs() {
            return Ok(false);
        }
        prev = t;
    }
    Ok(true)
}

/// `Z(k, p)` with `P(union_{i<=p} |X_i| > Z(k, p)) <= 2^-k`.
#[derive(Clone)]
pub struct TailBoundFunction(Arc<dyn Fn(u64, u64) -> u64 + Send + Sync>);

impl fmt::Debug for TailBoundFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TailBoundFunction").finish_non_exhaustive()
    }
}

impl TailBoundFunction {
    pub fn new(z: impl Fn(u64, u64) -> u64 + Send + Sync + 'static) -> Self {
        TailBoundFunction(Arc::new(z))
    }

    pub fn constant(c: u64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn eval(&self, k: u64, p: u64) -> u64 {
        (self.0)(k, p)
    }

    /// Exact `P(union_{i<=p} |X_i| > Z(k, p))` and whether it is `<= 2^-k`.
    pub fn check(&self, process: &IndependentProcess, k: u64, p: u64) -> Result<(Rat, bool)> {
        let ev = PrefixEvent::term_exceeds(&crate::space::SpaceDescriptor::reals(), p, int(self.eval(k, p)));
        let prob = exact_probabilities(process, &[ev])?.remove(0);
        let ok = prob <= pow2(-(k as i64));
        Ok((prob, ok))
    }
}

/// The single-argument premise counterfunction `B(k, .)` seen by a realizer.
pub type Inner<'a> = &'a dyn Fn(u64) -> u64;
/// The two-argument counterfunction `B: N x N -> N` of the probabilistic statement.
pub type Outer = Arc<dyn Fn(u64, u64) -> u64 + Send + Sync>;

type AcFn = dyn Fn(&MajorantSeq, Inner<'_>, u64, u64) -> Result<u64> + Send + Sync;
type VFn = dyn Fn(&MajorantSeq, Inner<'_>, u64) -> Result<u64> + Send + Sync;
type ModFn = dyn Fn(Inner<'_>, u64, u64) -> u64 + Send + Sync;

/// Realizers `A, C, V` of the deterministic implication with a common modulus
/// of continuity `M(B, u, w)` in the majorant argument.
#[derive(Clone)]
pub struct RealizerTriple {
    pub a: Arc<AcFn>,
    pub c: Arc<AcFn>,
    pub v: Arc<VFn>,
    pub modulus: Arc<ModFn>,
}

impl fmt::Debug for RealizerTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealizerTriple").finish_non_exhaustive()
    }
}

/// `A = u + 2`, `C = w`, `V = max{B(u+2), f(2^(u+2) a_{B(u+2)} sum_{i<=B(u+2)} tau_i)}`,
/// modulus `B(u + 2)`.
pub fn kronecker_realizers(a: &WeightSequence) -> RealizerTriple {
    let weights = a.clone();
    RealizerTriple {
        a: Arc::new(|_, _, u, _| u.checked_add(2).ok_or(Error::Overflow("u + 2"))),
        c: Arc::new(|_, _, _, w| Ok(w)),
        v: Arc::new(move |tau, b, u| {
            let m = b(u + 2);
            let total: u64 = (0..=m).try_fold(0u64, |acc, i| acc.checked_add(tau.eval(i))).ok_or(Error::Overflow("sum of majorant"))?;
            let t = pow2(u as i64 + 2) * weights.weight(m) * int(total);
            Ok(m.max(weight_index(&weights, &t)?))
        }),
        modulus: Arc::new(|b, u, _| b(u + 2)),
    }
}

fn partial_sums(x: &[Rat]) -> Vec<Rat> {
    let mut acc = Rat::zero();
    x.iter().map(|v| {
        acc += v;
        acc.clone()
    }).collect()
}

/// `P_0(alpha, b, c)`: `|s_n - s_m| <= 2^-alpha` on `[b; c]`, and
/// `Q_0(u, v, w)`: `|(1/a_n) sum a_i x_i| <= 2^-u` on `[v; w]`.
pub fn kronecker_predicates(a: &WeightSequence) -> (CheckablePredicate, CheckablePredicate) {
    let p0 = CheckablePredicate::new(
        |alpha, b, c, x| {
            if b > c {
                return true;
            }
            let s = partial_sums(x);
            let window = &s[b as usize..=c as usize];
            let hi = window.iter().max().unwrap();
            let lo = window.iter().min().unwrap();
            hi - lo <= pow2(-(alpha as i64))
        },
        |_, b, c| if b > c { 0 } else { c + 1 },
    );
    let weights = a.clone();
    let q0 = CheckablePredicate::new(
        move |u, v, w, x| {
            let tol = pow2(-(u as i64));
            let mut acc = Rat::zero();
            for (i, xi) in x.iter().enumerate().take_while(|&(i, _)| i as u64 <= w) {
                let ai = weights.weight(i as u64);
                acc += &ai * xi;
                if i as u64 >= v && (&acc / &ai).abs() > tol {
                    return false;
                }
            }
            true
        },
        |_, v, w| if v > w { 0 } else { w + 1 },
    );
    (p0, q0)
}

/// The transferred realizers at `alpha = (B, k, u, w)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferOutput {
    pub a: u64,
    pub c: u64,
    pub v: u64,
    pub modulus: u64,
    /// The constant majorant `Z(k + 1, M)`.
    pub majorant: u64,
}

/// `A' = A(z, B(k,.), u, w)`, `C' = C(z, B(k,.), u, w)`, `V' = V(z, B(k,.), u)` with
/// `z = Z(k+1, M(B(k,.), u, w))`, after auditing continuity at this point.
pub fn transfer(
    r: &RealizerTriple,
    z: &TailBoundFunction,
    b: &Outer,
    k: u64,
    u: u64,
    w: u64,
) -> Result<TransferOutput> {
    let inner = |n: u64| b(k, n);
    let m = (r.modulus)(&inner, u, w);
    let zc = z.eval(k + 1, m);
    let tau = MajorantSeq::constant(zc);
    let a = (r.a)(&tau, &inner, u, w)?;
    let c = (r.c)(&tau, &inner, u, w)?;
    let v = (r.v)(&tau, &inner, u)?;
    continuity_audit(r, &inner, u, w, m, zc, (a, c, v))?;
    Ok(TransferOutput { a, c, v, modulus: m, majorant: zc })
}

/// Perturbs the constant majorant beyond the modulus and requires identical outputs.
fn continuity_audit(
    r: &RealizerTriple,
    inner: Inner<'_>,
    u: u64,
    w: u64,
    m: u64,
    zc: u64,
    expect: (u64, u64, u64),
) -> Result<()> {
    for step in [1u64, 3, 1000, 1 << 20] {
        let tau = MajorantSeq::new(move |n| if n <= m { zc } else { zc.saturating_add(step.saturating_mul(n - m)) });
        let got = ((r.a)(&tau, inner, u, w)?, (r.c)(&tau, inner, u, w)?, (r.v)(&tau, inner, u)?);
        if got != expect {
            return Err(Error::ContinuityViolation { modulus: m });
        }
    }
    Ok(())
}

fn scalar_prefix(xs: &[Vector]) -> Vec<Rat> {
    xs.iter().map(|v| v.coords()[0].clone()).collect()
}

/// Exact probabilities behind one point of the transfer grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransferInstance {
    pub output: TransferOutput,
    /// `P(not P_0(A', B(k, A'), C'))`.
    pub premise_failure: Rat,
    /// `P(not Q_0(u, V', w))`.
    pub conclusion_failure: Rat,
    /// `P(union_{i<=M} |X_i| > Z(k+1, M))`, the event excluded by the tail bound.
    pub tail_failure: Rat,
    pub premise_holds: bool,
    pub conclusion_holds: bool,
}

impl TransferInstance {
    /// The transferred implication at this point.
    pub fn implication_holds(&self) -> bool {
        !self.premise_holds || self.conclusion_holds
    }
}

/// Runs [`transfer`] and evaluates the premise and conclusion failure
/// probabilities of the scalar `process` by enumeration.
#[allow(clippy::too_many_arguments)]
pub fn verify_transfer_instance(
    process: &IndependentProcess,
    r: &RealizerTriple,
    p0: &CheckablePredicate,
    q0: &CheckablePredicate,
    z: &TailBoundFunction,
    b: &Outer,
    k: u64,
    u: u64,
    w: u64,
) -> Result<TransferInstance> {
    if process.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: process.dim() });
    }
    let out = transfer(r, z, b, k, u, w)?;
    let pb = b(k, out.a);
    let p_need = p0.prefix_need(out.a, pb, out.c);
    let q_need = q0.prefix_need(u, out.v, w);
    let (pa, pc) = (out.a, out.c);
    let p0c = p0.clone();
    let q0c = q0.clone();
    let premise = PrefixEvent::new(p_need.saturating_sub(1), move |xs| {
        !p0c.holds(pa, pb, pc, &scalar_prefix(xs)).unwrap_or(false)
    });
    let v = out.v;
    let conclusion = PrefixEvent::new(q_need.saturating_sub(1), move |xs| {
        !q0c.holds(u, v, w, &scalar_prefix(xs)).unwrap_or(false)
    });
    let tail = PrefixEvent::term_exceeds(&crate::space::SpaceDescriptor::reals(), out.modulus, int(out.majorant));
    let mut probs = exact_probabilities(process, &[premise, conclusion, tail])?;
    let tail_failure = probs.pop().unwrap();
    let conclusion_failure = probs.pop().unwrap();
    let premise_failure = probs.pop().unwrap();
    let premise_holds = premise_failure <= pow2(-(k as i64) - 1);
    let conclusion_holds = conclusion_failure <= pow2(-(k as i64));
    Ok(TransferInstance { output: out, premise_failure, conclusion_failure, tail_failure, premise_holds, conclusion_holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DiscreteDistribution;
    use crate::num::rat;
    use alloc::vec;

    #[test]
    fn majorant_examples() {
        let x: Vec<Rat> = (0..20).map(|n| pow2(-n)).collect();
        assert!(majorizes(&MajorantSeq::new(|n| n + 1), &x, 19).unwrap());
        assert!(!majorizes(&MajorantSeq::constant(0), &x, 0).unwrap());
        let y: Vec<Rat> = vec![rat(5, 2), rat(-1, 3), rat(7, 1), rat(0, 1)];
        assert!(majorizes(&MajorantSeq::cumulative_ceiling(&y).unwrap(), &y, 3).unwrap());
        assert!(majorizes(&MajorantSeq::constant(1), &x, 25).is_err());
    }

    #[test]
    fn realizer_examples() {
        let r = kronecker_realizers(&WeightSequence::linear());
        let zero_b = |_: u64| 0u64;
        let tau = MajorantSeq::constant(1);
        assert_eq!((r.v)(&tau, &zero_b, 0).unwrap(), 3);
        assert_eq!((r.v)(&MajorantSeq::constant(0), &|n| n * 2, 1).unwrap(), 6);
        let perturbed = MajorantSeq::new(|n| if n == 0 { 1 } else { 50 });
        assert_eq!((r.v)(&perturbed, &zero_b, 0).unwrap(), 3);
        assert_eq!((r.a)(&tau, &zero_b, 4, 9).unwrap(), 6);
        assert_eq!((r.c)(&tau, &zero_b, 4, 9).unwrap(), 9);
        assert_eq!((r.modulus)(&|n| n + 1, 3, 9), 6);
    }

    #[test]
    fn predicate_examples() {
        let (p0, q0) = kronecker_predicates(&WeightSequence::linear());
        let zeros = vec![Rat::zero(); 12];
        assert!(p0.holds(3, 0, 10, &zeros).unwrap());
        assert!(q0.holds(3, 0, 10, &zeros).unwrap());
        let geo: Vec<Rat> = (0..12).map(|n| pow2(-n)).collect();
        assert!(p0.holds(2, 5, 8, &geo).unwrap());
        assert!(!p0.holds(2, 0, 8, &geo).unwrap());
        let mut big = zeros.clone();
        big[0] = int(2);
        assert!(!q0.holds(0, 0, 0, &big).unwrap());
        let junk = [int(100), rat(-7, 1), rat(1, 3)];
        assert!(p0.prefix_locality_audit(2, 5, 8, &geo, &junk).unwrap());
        assert!(q0.prefix_locality_audit(0, 2, 6, &geo, &junk).unwrap());
    }

    #[test]
    fn misdeclared_modulus_is_caught() {
        let mut r = kronecker_realizers(&WeightSequence::linear());
        r.modulus = Arc::new(|_, _, _| 0);
        let b: Outer = Arc::new(|_, n| n);
        let err = transfer(&r, &TailBoundFunction::constant(1), &b, 0, 0, 5).unwrap_err();
        assert_eq!(err, Error::ContinuityViolation { modulus: 0 });
    }

    #[test]
    fn degenerate_and_zero_instances() {
        let zero = IndependentProcess::from_vec(vec![DiscreteDistribution::point(Vector::scalar(Rat::zero())); 6]).unwrap();
        let r = kronecker_realizers(&WeightSequence::linear());
        let t = CheckablePredicate::always();
        let b: Outer = Arc::new(|_, n| n);
        let inst = verify_transfer_instance(&zero, &r, &t, &t, &TailBoundFunction::constant(0), &b, 1, 1, 5).unwrap();
        assert!(inst.premise_failure.is_zero() && inst.conclusion_failure.is_zero());
        let (p0, q0) = kronecker_predicates(&WeightSequence::linear());
        let inst = verify_transfer_instance(&zero, &r, &p0, &q0, &TailBoundFunction::constant(0), &b, 1, 1, 5).unwrap();
        assert!(inst.implication_holds() && inst.conclusion_failure.is_zero());
        let (prob, ok) = TailBoundFunction::constant(0).check(&zero, 3, 5).unwrap();
        assert!(ok && prob.is_zero());
    }
}
