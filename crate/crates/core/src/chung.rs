//! Rates for Chung's strong law on type-p spaces: `phi_0`, `eps~`, `Delta_Phi`,
//! the reduction through `Gamma_n`, `kappa^P`, and Kolmogorov's inequality as
//! an enumerated check.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::engine::{enumerate, exact_probability, moment_of_sum, term_moment, IndependentProcess, PrefixEvent};
use crate::num::{as_small_natural, exact_root, int, pow2, pow_enclosure, powu, root_enclosure, Interval, Rat};
use crate::prob_kronecker::{meta_rate_prob_kronecker, LeveledBoundSequence};
use crate::rates::{AsMetastabilityRate, Counterfunction, MetastabilityRate};
use crate::space::{NormValue, SpaceDescriptor, WeightSequence};
use crate::{Error, Result};

/// `t^p` on `[0, 1]` and `t` above.
pub fn phi0(p: &Rat, t: &Rat) -> Result<Interval> {
    if t.is_negative() {
        return Err(Error::invalid("phi0 is defined for t >= 0"));
    }
    if *t > Rat::one() {
        return Ok(Interval::exact(t.clone()));
    }
    if t.is_zero() {
        return Ok(Interval::exact(Rat::zero()));
    }
    pow_enclosure(t, p)
}

fn check_exponent(p: &Rat) -> Result<()> {
    if *p < Rat::one() || *p > int(2) {
        return Err(Error::invalid(format!("type exponent {p} outside [1, 2]")));
    }
    Ok(())
}

/// `min{eps lambda / 6, lambda eps^p / (2^(3p-1) 3 C), (lambda eps^p / (2^(2p-1) 3))^(1/p)}`.
///
/// Exact whenever the minimum is rational; otherwise a dyadic lower bound
/// within `2^-60` of it.
pub fn epsilon_tilde(eps: &Rat, lambda: &Rat, p: &Rat, c: &Rat) -> Result<Rat> {
    if !eps.is_positive() || !lambda.is_positive() || !c.is_positive() {
        return Err(Error::invalid("eps, lambda and C must be positive"));
    }
    check_exponent(p)?;
    let first = eps * lambda / int(6);
    if let Some(k) = as_small_natural(p) {
        let ep = powu(eps, k);
        let second = lambda * &ep / (pow2(3 * k as i64 - 1) * int(3) * c);
        let inner = lambda * &ep / (pow2(2 * k as i64 - 1) * int(3));
        let best = if first < second { first } else { second };
        if let Some(third) = exact_root(&inner, k) {
            return Ok(if third < best { third } else { best });
        }
        let enc = root_enclosure(&inner, k);
        return Ok(if enc.lo >= best { best } else { enc.lo });
    }
    // Non-integer exponent: lower-bound every branch.
    let ep = pow_enclosure(eps, p)?.lo;
    let three_p_1 = int(3) * p - Rat::one();
    let two_p_1 = int(2) * p - Rat::one();
    let second = lambda * &ep / (pow_enclosure(&int(2), &three_p_1)?.hi * int(3) * c);
    let inner = lambda * &ep / (pow_enclosure(&int(2), &two_p_1)?.hi * int(3));
    let third = pow_enclosure(&inner, &p.recip())?.lo;
    Ok([first, second, third].into_iter().min().unwrap())
}

/// `Delta_Phi(eps, lambda, K) = Phi(eps~, K)`.
pub fn slln_series_meta_rate(phi: &MetastabilityRate, p: &Rat, c: &Rat) -> Result<AsMetastabilityRate> {
    check_exponent(p)?;
    if !c.is_positive() {
        return Err(Error::invalid("type constant must be positive"));
    }
    let independent = phi.function_independent();
    let (phi, p, c) = (phi.clone(), p.clone(), c.clone());
    Ok(AsMetastabilityRate::new(move |eps, lambda, k| phi.eval(&epsilon_tilde(eps, lambda, &p, &c)?, k))
        .with_independence(independent))
}

/// `kappa^P = kappa^p(Delta_Phi)`.
#[allow(clippy::too_many_arguments)]
pub fn chung_rate(
    phi: &MetastabilityRate,
    a: &WeightSequence,
    z: &LeveledBoundSequence,
    p: &Rat,
    c: &Rat,
    eps: &Rat,
    lambda: &Rat,
    k: &Counterfunction,
) -> Result<u64> {
    meta_rate_prob_kronecker(&slln_series_meta_rate(phi, p, c)?, a, z, eps, lambda, k)
}

type PhiFn = dyn Fn(u64, &Rat) -> Rat + Send + Sync;

/// Functions `phi_n` with `phi_n(t)/t` and `t^p/phi_n(t)` nondecreasing.
#[derive(Clone)]
pub struct ChungFunctionFamily {
    name: String,
    phi: Arc<PhiFn>,
}

impl fmt::Debug for ChungFunctionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChungFunctionFamily").field("name", &self.name).finish_non_exhaustive()
    }
}

impl ChungFunctionFamily {
    pub fn new(name: impl Into<String>, phi: impl Fn(u64, &Rat) -> Rat + Send + Sync + 'static) -> Self {
        ChungFunctionFamily { name: name.into(), phi: Arc::new(phi) }
    }

    /// `phi_n(t) = t^2`, the Kolmogorov case.
    pub fn square() -> Self {
        Self::new("t^2", |_, t| t * t)
    }

    /// `phi_n(t) = t`.
    pub fn linear() -> Self {
        Self::new("t", |_, t| t.clone())
    }

    /// `phi_n(t) = t^2 / (1 + t)`.
    pub fn damped_square() -> Self {
        Self::new("t^2/(1+t)", |_, t| t * t / (Rat::one() + t))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, n: u64, t: &Rat) -> Rat {
        (self.phi)(n, t)
    }

    /// Checks both monotonicity conditions on `grid` for every `n <= n_max`.
    /// Only `p` in `{1, 2}` is supported so that `t^p` stays rational.
    pub fn certify(&self, p: &Rat, n_max: u64, grid: &[Rat]) -> Result<()> {
        let k = exponent_1_or_2(p)?;
        let mut ts: Vec<Rat> = grid.iter().filter(|t| t.is_positive()).cloned().collect();
        ts.sort();
        ts.dedup();
        for n in 0..=n_max {
            let mut prev: Option<(Rat, Rat)> = None;
            for t in &ts {
                let v = self.eval(n, t);
                if !v.is_positive() {
                    return Err(Error::CertificationFailed { n, reason: format!("phi({t}) = {v} is not positive") });
                }
                let ratio = &v / t;
                let dual = powu(t, k) / &v;
                if let Some((r0, d0)) = &prev {
                    if ratio < *r0 {
                        return Err(Error::CertificationFailed { n, reason: format!("phi(t)/t decreases at t = {t}") });
                    }
                    if dual < *d0 {
                        return Err(Error::CertificationFailed { n, reason: format!("t^p/phi(t) decreases at t = {t}") });
                    }
                }
                prev = Some((ratio, dual));
            }
        }
        Ok(())
    }
}

fn exponent_1_or_2(p: &Rat) -> Result<u32> {
    match as_small_natural(p) {
        Some(k @ (1 | 2)) => Ok(k),
        _ => Err(Error::invalid("certification supports p = 1 and p = 2 only")),
    }
}

/// The default certification grid: multiples of `1/16` up to 4, then powers of two.
pub fn default_grid() -> Vec<Rat> {
    let mut g: Vec<Rat> = (1..=64).map(|k| Rat::new(k.into(), 16.into())).collect();
    g.extend((3..=20).map(pow2));
    g.extend((1..=20).map(|j| pow2(-j)));
    g
}

/// Series terms `E phi_k(||X_k||) / phi_k(a_k)` with the domination
/// certificate `Gamma_k(t) = phi_k(a_k t)/phi_k(a_k) >= phi_0(t)` on a grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedSeries {
    pub terms: Vec<Rat>,
    pub grid_points_checked: usize,
}

impl ReducedSeries {
    pub fn partial_sum(&self, n: usize) -> Rat {
        self.terms[..=n].iter().sum()
    }
}

pub fn chung_reduce(
    family: &ChungFunctionFamily,
    a: &WeightSequence,
    moments: impl Fn(u64) -> Result<Rat>,
    p: &Rat,
    horizon: u64,
    grid: &[Rat],
) -> Result<ReducedSeries> {
    family.certify(p, horizon, grid)?;
    let mut checked = 0;
    let mut terms = Vec::with_capacity(horizon as usize + 1);
    for n in 0..=horizon {
        let an = a.weight(n);
        let denom = family.eval(n, &an);
        if family.eval(n, &(&an * Rat::one())) / &denom != Rat::one() {
            return Err(Error::CertificationFailed { n, reason: "Gamma_n(1) != 1".into() });
        }
        for t in grid {
            let gamma = family.eval(n, &(&an * t)) / &denom;
            let lower = phi0(p, t)?;
            if !lower.certainly_le(&gamma) {
                return Err(Error::CertificationFailed { n, reason: format!("Gamma_n({t}) < phi_0({t})") });
            }
            checked += 1;
        }
        terms.push(moments(n)? / denom);
    }
    Ok(ReducedSeries { terms, grid_points_checked: checked })
}

/// `E phi_n(||X_n||)`, exact when norms are rational and an upper bound otherwise.
pub fn phi_moment(process: &IndependentProcess, space: &SpaceDescriptor, family: &ChungFunctionFamily, n: u64) -> Result<Rat> {
    let mut total = Rat::zero();
    for (v, q) in process.dist(n).atoms() {
        let t = match space.norm(v)? {
            NormValue::Exact(t) => t,
            other => other.upper(),
        };
        total += q * family.eval(n, &t);
    }
    Ok(total)
}

/// `E phi_0(||X_n||)`, rounded up when irrational.
pub fn phi0_moment(process: &IndependentProcess, space: &SpaceDescriptor, p: &Rat, n: u64) -> Result<Rat> {
    let mut total = Rat::zero();
    for (v, q) in process.dist(n).atoms() {
        total += q * phi0(p, &space.norm(v)?.upper())?.hi;
    }
    Ok(total)
}

/// One enumerated instance of Kolmogorov's inequality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KolmogorovCheck {
    /// `P(max_{0<=i<=n} ||S_i|| > eps)`.
    pub lhs: Rat,
    /// `E||S_n||^r / eps^r`.
    pub rhs: Interval,
    pub ok: bool,
}

pub fn kolmogorov_inequality_check(
    process: &IndependentProcess,
    space: &SpaceDescriptor,
    n: u64,
    eps: &Rat,
    r: &Rat,
) -> Result<KolmogorovCheck> {
    if !eps.is_positive() || *r < Rat::one() {
        return Err(Error::invalid("need eps > 0 and r >= 1"));
    }
    let lhs = exact_probability(process, &PrefixEvent::max_partial_sum_exceeds(space, n, eps.clone()))?;
    let moment = match as_small_natural(r) {
        Some(k) => moment_of_sum(process, space, n, k)?,
        None => {
            let mut total = Interval::exact(Rat::zero());
            let mut err = None;
            enumerate(process, n, |path, q| {
                let mut s = crate::space::Vector::zero(space.dimension());
                for x in path {
                    s.add_assign(x);
                }
                let res = space.norm(&s).and_then(|v| {
                    let e = v.enclosure();
                    Ok(Interval::new(pow_enclosure(&e.lo, r)?.lo, pow_enclosure(&e.hi, r)?.hi))
                });
                match res {
                    Ok(i) => total = total.add(&i.scale_nonneg(q)),
                    Err(e) => err = Some(e),
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            total
        }
    };
    let er = pow_enclosure(eps, r)?;
    let rhs = Interval::new(&moment.lo / &er.hi, &moment.hi / &er.lo);
    let ok = lhs <= rhs.lo;
    Ok(KolmogorovCheck { lhs, rhs, ok })
}

/// `E||S_n||^p` against `C sum_{i<=n} E||X_i||^p` for natural `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeCheck {
    pub lhs: Interval,
    pub rhs: Interval,
    pub ok: bool,
}

pub fn type_inequality_check(process: &IndependentProcess, space: &SpaceDescriptor, n: u64) -> Result<TypeCheck> {
    let p = as_small_natural(space.type_exponent()).ok_or_else(|| Error::invalid("type exponent must be 1 or 2"))?;
    let lhs = moment_of_sum(process, space, n, p)?;
    let mut sum = Interval::exact(Rat::zero());
    for i in 0..=n {
        sum = sum.add(&term_moment(process, space, i, p)?);
    }
    let rhs = sum.scale_nonneg(space.type_constant());
    let ok = lhs.lo <= rhs.hi;
    Ok(TypeCheck { lhs, rhs, ok })
}

/// One enumerated instance of the series-to-sums rate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaInstance {
    pub delta: u64,
    pub eps_tilde: Rat,
    /// A point `N <= Delta` where the moment series is `eps~`-stable on `[N, N + K(N)]`.
    pub witness: Option<u64>,
    /// `P(max_{N<=n<=N+K(N)} ||S_n - S_N|| > eps)` at the witness.
    pub tail: Option<Rat>,
    pub ok: bool,
}

/// Computes `Delta_Phi(eps, lambda, K)`, finds the point `N <= Delta` promised by
/// `Phi`, and checks the tail bound there by enumeration.
#[allow(clippy::too_many_arguments)]
pub fn verify_delta_instance(
    process: &IndependentProcess,
    space: &SpaceDescriptor,
    phi: &MetastabilityRate,
    eps: &Rat,
    lambda: &Rat,
    k: &Counterfunction,
) -> Result<DeltaInstance> {
    let p = space.type_exponent().clone();
    let c = space.type_constant().clone();
    let eps_tilde = epsilon_tilde(eps, lambda, &p, &c)?;
    let delta = slln_series_meta_rate(phi, &p, &c)?.eval(eps, lambda, k)?;
    let mut witness = None;
    for n in 0..=delta {
        let end = k.eval_tilde(n)?;
        let mut sum = Rat::zero();
        for i in n + 1..=end {
            sum += phi0_moment(process, space, &p, i)?;
        }
        if sum < eps_tilde {
            witness = Some((n, end));
            break;
        }
    }
    let Some((n, end)) = witness else {
        return Ok(DeltaInstance { delta, eps_tilde, witness: None, tail: None, ok: false });
    };
    let tail = exact_probability(process, &PrefixEvent::fluctuation(space, n, end, eps.clone(), true))?;
    let ok = tail <= *lambda;
    Ok(DeltaInstance { delta, eps_tilde, witness: Some(n), tail: Some(tail), ok })
}
