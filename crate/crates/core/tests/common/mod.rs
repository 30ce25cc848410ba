#![allow(dead_code)]

use std::sync::Arc;

use kronrate_core::engine::{DiscreteDistribution, IndependentProcess};
use kronrate_core::num::{int, pow2, rat};
use kronrate_core::rates::{ConvergenceRate, Counterfunction};
use kronrate_core::space::{SpaceDescriptor, Vector, VectorSequence, WeightSequence};
use kronrate_core::Rat;
use num_traits::Zero;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    rng.next_u64() % n
}

/// A finitely supported test sequence with its space and a valid rate for the partial sums.
pub struct SeqCase {
    pub name: &'static str,
    pub space: SpaceDescriptor,
    pub x: VectorSequence,
    pub rate: ConvergenceRate,
}

const UNBOUNDED: u64 = u64::MAX - 1;

fn scalar_case(name: &'static str, rate: ConvergenceRate, f: impl Fn(u64) -> Rat + Send + Sync + 'static) -> SeqCase {
    SeqCase { name, space: SpaceDescriptor::reals(), x: VectorSequence::scalar(f, UNBOUNDED), rate }
}

impl SeqCase {
    /// Partial sums, tabulated past the support and constant afterwards.
    pub fn sums(&self) -> VectorSequence {
        let table = Arc::new(self.x.tabulate_partial_sums(64).unwrap());
        VectorSequence::new(self.x.dim(), move |n| table[(n as usize).min(table.len() - 1)].clone(), UNBOUNDED)
    }
}

pub fn sequence_cases() -> Vec<SeqCase> {
    vec![
        scalar_case("alternating geometric", ConvergenceRate::log2_plus(1), |n| {
            if n < 40 {
                let s = if n % 2 == 0 { 1 } else { -1 };
                Rat::from_integer(s.into()) * pow2(-(n as i64))
            } else {
                Rat::zero()
            }
        }),
        scalar_case("half geometric", ConvergenceRate::log2_plus(1), |n| {
            if n < 40 { pow2(-(n as i64) - 1) } else { Rat::zero() }
        }),
        scalar_case("sparse spikes", ConvergenceRate::constant(8), |n| match n {
            0 => int(1),
            3 => rat(-1, 1),
            7 => rat(1, 2),
            _ => Rat::zero(),
        }),
        scalar_case("telescoping", ConvergenceRate::inverse(1), |n| {
            if n < 30 { Rat::new(1.into(), ((n + 1) * (n + 2)).into()) } else { Rat::zero() }
        }),
        SeqCase {
            name: "euclidean pair",
            space: SpaceDescriptor::euclidean(2),
            x: VectorSequence::new(
                2,
                |n| {
                    if n < 30 {
                        Vector::new(vec![pow2(-(n as i64)), rat(-3, 4) * pow2(-(n as i64))])
                    } else {
                        Vector::zero(2)
                    }
                },
                UNBOUNDED,
            ),
            rate: ConvergenceRate::log2_plus(2),
        },
        SeqCase {
            name: "max-norm triple",
            space: SpaceDescriptor::max_norm(3),
            x: VectorSequence::new(
                3,
                |n| {
                    if n < 20 {
                        let s = if n % 2 == 0 { 1 } else { -1 };
                        Vector::new(vec![pow2(-(n as i64)), Rat::zero(), Rat::from_integer(s.into()) * pow2(-2 * n as i64)])
                    } else {
                        Vector::zero(3)
                    }
                },
                UNBOUNDED,
            ),
            rate: ConvergenceRate::log2_plus(1),
        },
        SeqCase {
            name: "zero",
            space: SpaceDescriptor::reals(),
            x: VectorSequence::zero(1),
            rate: ConvergenceRate::constant(0),
        },
    ]
}

pub fn weight_cases() -> Vec<(&'static str, WeightSequence)> {
    vec![
        ("n+1", WeightSequence::linear()),
        ("2^n", WeightSequence::power2()),
        ("ceil sqrt(n+1)", WeightSequence::sqrt_ceil()),
        ("(n+1)/3", WeightSequence::scaled_linear(rat(1, 3))),
    ]
}

pub fn counterfunction_cases() -> Vec<(&'static str, Counterfunction)> {
    vec![
        ("identity", Counterfunction::identity()),
        ("n+7", Counterfunction::shift(7)),
        ("3n+1", Counterfunction::affine(3, 1)),
        ("0", Counterfunction::constant(0)),
    ]
}

/// A counterfunction drawn from a few families.
pub fn random_counterfunction(rng: &mut ChaCha8Rng) -> Counterfunction {
    match below(rng, 5) {
        0 => Counterfunction::identity(),
        1 => Counterfunction::shift(below(rng, 50)),
        2 => Counterfunction::affine(1 + below(rng, 4), below(rng, 20)),
        3 => Counterfunction::constant(below(rng, 100)),
        _ => Counterfunction::new(|n| n.saturating_mul(n).min(2000)),
    }
}

/// A dyadic rational `j / 2^e` with `1 <= j <= 7`, `0 <= e <= 3`.
pub fn dyadic(rng: &mut ChaCha8Rng) -> Rat {
    int(1 + below(rng, 7)) * pow2(-(below(rng, 4) as i64))
}

/// A mean-zero scalar distribution with dyadic atoms.
pub fn mean_zero_scalar(rng: &mut ChaCha8Rng) -> DiscreteDistribution {
    let c = dyadic(rng);
    match below(rng, 3) {
        0 => DiscreteDistribution::rademacher(c),
        1 => DiscreteDistribution::symmetric_three_point(c, pow2(-(1 + below(rng, 3) as i64))).unwrap(),
        _ => {
            let q = pow2(-(1 + below(rng, 3) as i64));
            let hi = &c * (Rat::from_integer(1.into()) - &q);
            let lo = -(&c * &q);
            DiscreteDistribution::scalar(vec![(hi, q.clone()), (lo, Rat::from_integer(1.into()) - q)]).unwrap()
        }
    }
}

/// The product of two independent scalar laws as a law on the plane.
pub fn product2(a: &DiscreteDistribution, b: &DiscreteDistribution) -> DiscreteDistribution {
    let mut atoms = Vec::new();
    for (x, p) in a.atoms() {
        for (y, q) in b.atoms() {
            atoms.push((Vector::new(vec![x.coords()[0].clone(), y.coords()[0].clone()]), p * q));
        }
    }
    DiscreteDistribution::new(atoms).unwrap()
}

/// A mean-zero process of `len` variables (zero afterwards) whose outcome count stays at most `2^budget_bits`.
pub fn random_process(rng: &mut ChaCha8Rng, len: usize, planar: bool, budget_bits: u32) -> (SpaceDescriptor, IndependentProcess) {
    let mut dists = Vec::new();
    let mut bits = 0f64;
    for _ in 0..len {
        let d = if planar {
            product2(&DiscreteDistribution::rademacher(dyadic(rng)), &mean_zero_scalar(rng))
        } else {
            mean_zero_scalar(rng)
        };
        bits += (d.len() as f64).log2();
        if bits > budget_bits as f64 {
            break;
        }
        dists.push(d);
    }
    let space = if planar { SpaceDescriptor::euclidean(2) } else { SpaceDescriptor::reals() };
    (space, IndependentProcess::from_vec(dists).unwrap())
}

/// The nonnegative numbers `t_i` as a convergence rate for `sum t_i`: least `N`
/// with `sum_{i>N} t_i < eps`.
pub fn tail_rate(terms: Vec<Rat>) -> ConvergenceRate {
    let mut tails = vec![Rat::zero(); terms.len() + 1];
    for i in (0..terms.len()).rev() {
        tails[i] = &tails[i + 1] + &terms[i];
    }
    let tails = Arc::new(tails);
    ConvergenceRate::new(move |eps| Ok((0..tails.len()).find(|&n| tails.get(n + 1).is_none_or(|t| t < eps)).unwrap_or(tails.len()) as u64))
}

/// Mean-zero scalars with scale `2^-i` at index `i`, so partial sums settle quickly.
pub fn decaying_process(rng: &mut ChaCha8Rng, len: usize, budget_bits: u32) -> IndependentProcess {
    let mut dists = Vec::new();
    let mut bits = 0f64;
    for i in 0..len {
        let d = mean_zero_scalar(rng).scaled(&pow2(-(i as i64)));
        bits += (d.len() as f64).log2();
        if bits > budget_bits as f64 {
            break;
        }
        dists.push(d);
    }
    IndependentProcess::from_vec(dists).unwrap()
}

/// A few moderate variables followed by rare large spikes `+-c` of probability `2^-j`.
pub fn spiky_process(rng: &mut ChaCha8Rng) -> IndependentProcess {
    let mut dists = Vec::new();
    for _ in 0..2 + below(rng, 3) {
        dists.push(DiscreteDistribution::rademacher(dyadic(rng) * pow2(-3)));
    }
    for _ in 0..2 + below(rng, 3) {
        let c = rat(5 + below(rng, 4) as i64, 2);
        let q = pow2(-(9 + below(rng, 3) as i64));
        dists.push(DiscreteDistribution::symmetric_three_point(c, q).unwrap());
    }
    IndependentProcess::from_vec(dists).unwrap()
}

/// `sum_i max ||atom||`, rounded up: a sure bound on every partial sum.
pub fn sure_sum_bound(space: &SpaceDescriptor, process: &IndependentProcess, n: u64) -> u64 {
    let mut total = Rat::zero();
    for i in 0..=n {
        let d = process.dist(i);
        let m = d.atoms().iter().map(|(v, _)| space.norm(v).unwrap().upper()).max().unwrap();
        total += m;
    }
    kronrate_core::num::ceil_u64(&total).unwrap()
}
