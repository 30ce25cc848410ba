//! The `rate`, `verify` and `adversary` subcommands.

use std::sync::Arc;

use kronrate_core::adversarial::{
    adversarial_as_schedule, adversarial_schedule, refute_as_rate, refute_rate, slln_moment_check, variance_series_bound,
    AsRateCandidate, AsRefutation, Enumeration, RateCandidate, Refutation,
};
use kronrate_core::chung::{chung_rate, epsilon_tilde, phi0_moment, slln_series_meta_rate};
use kronrate_core::engine::{exact_probability, monte_carlo_estimate, IndependentProcess, PrefixEvent, ProbabilityEstimate, Sampler, ENUMERATION_LIMIT};
use kronrate_core::kronecker::{
    finitary_gamma, kronecker_premises, kronecker_window_holds, meta_rate_kronecker, rate_kronecker, PremiseModulus,
};
use kronrate_core::num::{int, rat};
use kronrate_core::prob_kronecker::{finitary_psi, meta_rate_prob_kronecker, ProbPremiseModulus};
use kronrate_core::rates::{stable_on, verify_metastability_bound, AsMetastabilityRate, ConvergenceRate, Counterfunction, MetastabilityRate};
use kronrate_core::space::{NormValue, SpaceDescriptor, Vector, VectorSequence, WeightSequence};
use kronrate_core::Rat;
use num_traits::Zero;
use rayon::prelude::*;

use crate::config::{
    meta_rate, plain_rate, AdversaryKind, BoundConfig, CandidateConfig, ExperimentConfig, Quantity, RateConfig, ScheduleConfig, Suite,
};
use crate::record::{Probability, Row};
use crate::CliError;

/// Seed and trial count after command-line overrides.
#[derive(Clone, Copy, Debug)]
pub struct RunParams {
    pub seed: u64,
    pub trials: u64,
}

fn core(e: kronrate_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn row(item: &str) -> Row {
    Row { item: item.into(), ..Row::default() }
}

/// Everything a rate formula may consume, built once from the config.
struct Inputs {
    space: SpaceDescriptor,
    a: WeightSequence,
    x: Option<(VectorSequence, Option<u64>)>,
    process: Option<(IndependentProcess, u64)>,
}

impl Inputs {
    fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let space = cfg.space()?;
        let a = cfg.weights()?;
        let x = cfg.sequence.as_ref().map(|_| cfg.sequence(&space)).transpose()?;
        let process = cfg.process.as_ref().map(|_| cfg.process(&space)).transpose()?;
        Ok(Inputs { space, a, x, process })
    }

    fn sequence(&self) -> Result<&VectorSequence, CliError> {
        self.x.as_ref().map(|(x, _)| x).ok_or_else(|| bad("a [sequence] table is required"))
    }

    fn norm_tail(&self) -> Result<Vec<Rat>, CliError> {
        let (x, len) = self.x.as_ref().ok_or_else(|| bad("rate family \"norm_tail\" needs a [sequence]"))?;
        let len = len.ok_or_else(|| bad("rate family \"norm_tail\" needs a finitely supported sequence (set length)"))?;
        (0..len).map(|i| Ok(self.space.norm(&x.term(i).map_err(core)?).map_err(core)?.upper())).collect()
    }

    /// `E||Y_i||^p` over the support of the process.
    fn moment_tail(&self) -> Result<Vec<Rat>, CliError> {
        let (process, len) = self.process.as_ref().ok_or_else(|| bad("rate family \"moment_tail\" needs a [process]"))?;
        let p = self.space.type_exponent();
        (0..*len).map(|i| phi0_moment(process, &self.space, p, i).map_err(core)).collect()
    }

    fn plain(&self, cfg: &RateConfig) -> Result<Option<ConvergenceRate>, CliError> {
        plain_rate(cfg, || self.norm_tail(), || self.moment_tail())
    }

    fn meta(&self, cfg: &RateConfig) -> Result<MetastabilityRate, CliError> {
        meta_rate(cfg, || self.norm_tail(), || self.moment_tail())
    }

    /// Partial sums, tabulated over the support and constant afterwards when it is finite.
    fn sums(&self) -> Result<VectorSequence, CliError> {
        let (x, len) = self.x.as_ref().ok_or_else(|| bad("a [sequence] table is required"))?;
        Ok(match len {
            Some(len) => {
                let table = Arc::new(x.tabulate_partial_sums(*len).map_err(core)?);
                VectorSequence::new(x.dim(), move |n| table[(n as usize).min(table.len() - 1)].clone(), u64::MAX - 1)
            }
            None => x.partial_sums(),
        })
    }
}

fn needs_plain(rate: Option<ConvergenceRate>, what: &str) -> Result<ConvergenceRate, CliError> {
    rate.ok_or_else(|| bad(format!("{what} needs a rate of convergence; \"monotone\" only gives a metastability rate")))
}

/// `cmd_rate`: every requested quantity over its part of the grid.
pub fn rate(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let eps = cfg.eps()?;
    let lambda = cfg.lambda()?;
    let gs = cfg.counterfunctions()?;
    let mut rows = Vec::new();
    if cfg.quantities.is_empty() || eps.is_empty() {
        return Ok(rows);
    }
    let inp = Inputs::new(cfg)?;
    let (p, c) = (inp.space.type_exponent().clone(), inp.space.type_constant().clone());
    let needs_bound = cfg.quantities.iter().any(|q| *q != Quantity::EpsTilde && *q != Quantity::Delta);
    let z = if needs_bound { Some(cfg.bound(&inp.space, inp.sequence().ok())?) } else { None };
    let zl = if needs_bound { Some(cfg.leveled_bound(&inp.space, inp.sequence().ok())?) } else { None };
    for &q in &cfg.quantities {
        let name = q.name();
        let point = |e: &Rat, l: Option<&Rat>, g: Option<&str>, v: String| Row {
            item: name.into(),
            eps: Some(e.to_string()),
            lambda: l.map(Rat::to_string),
            counterfunction: g.map(String::from),
            value: Some(v),
            ..Row::default()
        };
        match q {
            Quantity::EpsTilde => {
                for e in &eps {
                    for l in &lambda {
                        rows.push(point(e, Some(l), None, epsilon_tilde(e, l, &p, &c).map_err(core)?.to_string()));
                    }
                }
                continue;
            }
            Quantity::Gamma | Quantity::RateKronecker | Quantity::Psi => {
                let plain = needs_plain(inp.plain(cfg.rate_config()?)?, name)?;
                let z = z.as_ref().unwrap();
                let zl = zl.as_ref().unwrap();
                for e in &eps {
                    match q {
                        Quantity::Gamma => {
                            let r = plain.clone();
                            let gamma = PremiseModulus::new(move |x| r.eval(x));
                            rows.push(point(e, None, None, finitary_gamma(&inp.a, &gamma, z, e).map_err(core)?.to_string()));
                        }
                        Quantity::RateKronecker => {
                            let v = rate_kronecker(&plain, &inp.a, z).eval(e).map_err(core)?;
                            rows.push(point(e, None, None, v.to_string()));
                        }
                        _ => {
                            for l in &lambda {
                                let r = plain.clone();
                                let psi = ProbPremiseModulus::new(move |x, _| r.eval(x));
                                rows.push(point(e, Some(l), None, finitary_psi(&inp.a, &psi, zl, e, l).map_err(core)?.to_string()));
                            }
                        }
                    }
                }
            }
            Quantity::Kappa | Quantity::KappaP | Quantity::Delta | Quantity::KappaChung => {
                let phi = inp.meta(cfg.rate_config()?)?;
                for e in &eps {
                    for (gname, g) in &gs {
                        if q == Quantity::Kappa {
                            let v = meta_rate_kronecker(&phi, &inp.a, z.as_ref().unwrap(), e, g).map_err(core)?;
                            rows.push(point(e, None, Some(gname), v.to_string()));
                            continue;
                        }
                        for l in &lambda {
                            let v = match q {
                                Quantity::KappaP => {
                                    let phi = phi.clone();
                                    let as_rate = AsMetastabilityRate::new(move |e, _, k| phi.eval(e, k));
                                    meta_rate_prob_kronecker(&as_rate, &inp.a, zl.as_ref().unwrap(), e, l, g)
                                }
                                Quantity::Delta => slln_series_meta_rate(&phi, &p, &c).and_then(|d| d.eval(e, l, g)),
                                _ => chung_rate(&phi, &inp.a, zl.as_ref().unwrap(), &p, &c, e, l, g),
                            }
                            .map_err(core)?;
                            rows.push(point(e, Some(l), Some(gname), v.to_string()));
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// `cmd_verify`: the configured suite, one verdict per check.
pub fn verify(cfg: &ExperimentConfig, run: RunParams) -> Result<Vec<Row>, CliError> {
    let suite = cfg.suite.ok_or_else(|| bad("verify needs `suite`"))?;
    let eps = cfg.eps()?;
    let gs = cfg.counterfunctions()?;
    if eps.is_empty() || gs.is_empty() {
        return Ok(Vec::new());
    }
    let inp = Inputs::new(cfg)?;
    match suite {
        Suite::KroneckerGamma => verify_gamma(cfg, &inp, &eps, &gs),
        Suite::KroneckerKappa => verify_kappa(cfg, &inp, &eps, &gs),
        Suite::Chung => verify_chung(cfg, &inp, &eps, &cfg.lambda()?, &gs, run),
    }
}

fn verify_gamma(cfg: &ExperimentConfig, inp: &Inputs, eps: &[Rat], gs: &[(String, Counterfunction)]) -> Result<Vec<Row>, CliError> {
    let x = inp.sequence()?;
    let z = cfg.bound(&inp.space, Some(x))?;
    let plain = needs_plain(inp.plain(cfg.rate_config()?)?, "suite kronecker_gamma")?;
    let gamma = {
        let r = plain.clone();
        PremiseModulus::new(move |e| r.eval(e))
    };
    let mut rows = Vec::new();
    for e in eps {
        for (gname, g) in gs {
            let m = gamma.eval(&(e / int(4))).map_err(core)?;
            let big = finitary_gamma(&inp.a, &gamma, &z, e).map_err(core)?;
            let w = g.eval_tilde(big).map_err(core)?;
            let mut r = Row { eps: Some(e.to_string()), counterfunction: Some(gname.clone()), value: Some(big.to_string()), ..row("gamma_window") };
            if kronecker_premises(&inp.space, x, m, &z, e, w).map_err(core)? {
                r.passed = Some(kronecker_window_holds(&inp.space, x, &inp.a, e, big, w).map_err(core)?);
                r.detail = Some(format!("M = {m}, window [{big}, {w}]"));
            } else {
                r.detail = Some(format!("premises do not hold at M = {m}, w = {w}"));
            }
            rows.push(r);
        }
    }
    Ok(rows)
}

/// Lazily extended norms of the weighted averages `(1/a_n) sum a_i x_i`.
struct Averages<'a> {
    inp: &'a Inputs,
    x: &'a VectorSequence,
    acc: Vector,
    norms: Vec<NormValue>,
}

impl Averages<'_> {
    fn below(&mut self, n: u64, eps: &Rat) -> Result<bool, CliError> {
        while self.norms.len() as u64 <= n {
            let i = self.norms.len() as u64;
            let w = self.inp.a.weight(i);
            self.acc.add_scaled(&w, &self.x.term(i).map_err(core)?);
            self.norms.push(self.inp.space.norm(&self.acc.scale(&w.recip())).map_err(core)?);
        }
        Ok(self.norms[n as usize].certainly_lt(eps))
    }

    /// Some `N <= bound` with every average on `[N, N + g(N)]` below `eps`.
    fn window_within(&mut self, eps: &Rat, g: &Counterfunction, bound: u64) -> Result<Option<u64>, CliError> {
        'outer: for n in 0..=bound {
            let end = g.eval_tilde(n).map_err(core)?;
            for i in n..=end {
                if !self.below(i, eps)? {
                    continue 'outer;
                }
            }
            return Ok(Some(n));
        }
        Ok(None)
    }
}

fn verify_kappa(cfg: &ExperimentConfig, inp: &Inputs, eps: &[Rat], gs: &[(String, Counterfunction)]) -> Result<Vec<Row>, CliError> {
    let x = inp.sequence()?;
    let z = cfg.bound(&inp.space, Some(x))?;
    let phi = inp.meta(cfg.rate_config()?)?;
    let sums = inp.sums()?;
    let mut avgs = Averages { inp, x, acc: Vector::zero(x.dim()), norms: Vec::new() };
    let mut rows = Vec::new();
    for e in eps {
        for (gname, g) in gs {
            let base = Row { eps: Some(e.to_string()), counterfunction: Some(gname.clone()), ..Row::default() };
            let n_phi = phi.eval(e, g).map_err(core)?;
            let found = verify_metastability_bound(&inp.space, &sums, e, g, n_phi).map_err(core)?;
            rows.push(Row {
                item: "phi_window".into(),
                value: Some(n_phi.to_string()),
                passed: Some(found.is_some()),
                detail: Some(found.map_or_else(|| "no stable window on the partial sums".into(), |n| format!("stable from N = {n}"))),
                ..base.clone()
            });
            let kappa = meta_rate_kronecker(&phi, &inp.a, &z, e, g).map_err(core)?;
            let found = avgs.window_within(e, g, kappa)?;
            rows.push(Row {
                item: "kappa_window".into(),
                value: Some(kappa.to_string()),
                passed: Some(found.is_some()),
                detail: Some(found.map_or_else(|| "no small window on the averages".into(), |n| format!("averages below eps from N = {n}"))),
                ..base
            });
        }
    }
    Ok(rows)
}

fn estimate(process: &IndependentProcess, event: &PrefixEvent, cfg: &ExperimentConfig, run: RunParams) -> Result<ProbabilityEstimate, CliError> {
    if process.outcome_count(event.horizon()) <= ENUMERATION_LIMIT {
        return exact_probability(process, event).map(ProbabilityEstimate::Exact).map_err(core);
    }
    let sampler = Sampler::new(process, event.horizon());
    let hits = (0..run.trials).into_par_iter().filter(|&t| sampler.trial_hits(event, run.seed, t)).count() as u64;
    monte_carlo_estimate(hits, run.trials, run.seed, &cfg.run.confidence.0).map_err(core)
}

fn probability_record(est: &ProbabilityEstimate) -> Probability {
    match est {
        ProbabilityEstimate::Exact(p) => Probability::Exact { value: p.to_string() },
        ProbabilityEstimate::MonteCarlo { trials, seed, confidence, margin, .. } => Probability::Estimate {
            frequency: est.frequency().to_string(),
            margin: format!("{margin:.6}"),
            trials: *trials,
            seed: *seed,
            confidence: confidence.to_string(),
        },
    }
}

fn verify_chung(
    cfg: &ExperimentConfig,
    inp: &Inputs,
    eps: &[Rat],
    lambda: &[Rat],
    gs: &[(String, Counterfunction)],
    run: RunParams,
) -> Result<Vec<Row>, CliError> {
    let (process, len) = inp.process.as_ref().ok_or_else(|| bad("suite chung needs a [process]"))?;
    let z = match cfg.bound.as_ref() {
        Some(BoundConfig::Constant { value }) => *value,
        _ => return Err(bad("suite chung needs a constant [bound]")),
    };
    let rate_cfg = cfg.rate_config()?;
    let phi = inp.meta(rate_cfg)?;
    let plain = inp.plain(rate_cfg)?;
    let (p, c) = (inp.space.type_exponent().clone(), inp.space.type_constant().clone());
    let zl = kronrate_core::prob_kronecker::LeveledBoundSequence::constant(z);
    let mut rows = Vec::new();

    // Every partial sum of the process stays below z surely.
    let mut total = Rat::zero();
    for i in 0..*len {
        let mut m = Rat::zero();
        for (v, _) in process.dist(i).atoms() {
            m = m.max(inp.space.norm(v).map_err(core)?.upper());
        }
        total += m;
    }
    rows.push(Row {
        value: Some(total.to_string()),
        passed: Some(total < int(z)),
        detail: Some(format!("sum of largest atoms against z = {z}")),
        ..row("bound")
    });

    let moments = inp.moment_tail()?;
    let series = Arc::new({
        let mut acc = Rat::zero();
        moments.iter().map(|m| {
            acc += m;
            Vector::scalar(acc.clone())
        }).collect::<Vec<_>>()
    });
    let series_seq = {
        let s = series.clone();
        VectorSequence::new(1, move |n| s.get(n as usize).or(s.last()).cloned().unwrap_or_else(|| Vector::scalar(Rat::zero())), u64::MAX - 1)
    };
    for e in eps {
        for l in lambda {
            let et = epsilon_tilde(&(e / int(4)), &(l / int(2)), &p, &c).map_err(core)?;
            let base = Row { eps: Some(e.to_string()), lambda: Some(l.to_string()), ..Row::default() };
            if let Some(plain) = &plain {
                // The plain rate is checked as a rate of convergence of the moment series at eps~.
                let n = plain.eval(&et).map_err(core)?;
                let end = (*len).max(n);
                let ok = stable_on(&SpaceDescriptor::reals(), &series_seq, &et, n, end).map_err(core)?;
                rows.push(Row {
                    item: "phi_series".into(),
                    value: Some(n.to_string()),
                    passed: Some(ok),
                    detail: Some(format!("eps~ = {et}")),
                    ..base.clone()
                });
            }
            for (gname, g) in gs {
                let n = chung_rate(&phi, &inp.a, &zl, &p, &c, e, l, g).map_err(core)?;
                let end = g.eval_tilde(n).map_err(core)?;
                let event = PrefixEvent::weighted_average_exceeds(&inp.space, &inp.a, n, end, e.clone());
                let est = estimate(process, &event, cfg, run)?;
                rows.push(Row {
                    item: "tail".into(),
                    counterfunction: Some(gname.clone()),
                    value: Some(n.to_string()),
                    passed: Some(est.below(l)),
                    probability: Some(probability_record(&est)),
                    detail: Some(format!("P(max over [{n}, {end}] of |avg| >= eps) < lambda")),
                    ..base.clone()
                });
            }
        }
    }
    Ok(rows)
}

fn candidate(c: &CandidateConfig) -> RateCandidate {
    match *c {
        CandidateConfig::Constant { c } => RateCandidate::constant(c),
        CandidateConfig::Logarithmic { m, c } => RateCandidate::logarithmic(m, c),
        CandidateConfig::Polynomial { c, d } => RateCandidate::polynomial(c, d),
    }
}

fn as_candidate(c: &CandidateConfig) -> AsRateCandidate {
    match *c {
        CandidateConfig::Constant { c } => AsRateCandidate::constant(c),
        CandidateConfig::Logarithmic { m, c } => AsRateCandidate::logarithmic(m, c),
        CandidateConfig::Polynomial { c, d } => AsRateCandidate::polynomial(c, d),
    }
}

fn schedule_preview(e: &Enumeration) -> String {
    let shown: Vec<String> = e.values().iter().take(24).map(u64::to_string).collect();
    let more = if e.len() > 24 { format!(", ... ({} values)", e.len()) } else { String::new() };
    format!("({}{more})", shown.join(", "))
}

/// `cmd_adversary`: witnesses against the candidate rate, target by target.
pub fn adversary(cfg: &ExperimentConfig) -> Result<Vec<Row>, CliError> {
    let adv = cfg.adversary.as_ref().ok_or_else(|| bad("adversary needs an [adversary] table"))?;
    let mut rows = Vec::new();
    match adv.kind {
        AdversaryKind::Specker => {
            let phi = candidate(&adv.candidate);
            let e = match &adv.schedule {
                ScheduleConfig::Values { values } => Enumeration::new(values.clone()),
                ScheduleConfig::Reveals { length, reveals } => Enumeration::from_reveals(*length, reveals),
                ScheduleConfig::Adversarial => adversarial_schedule(&phi, &adv.targets),
            }
            .map_err(|e| bad(e.to_string()))?;
            rows.push(Row { value: Some(schedule_preview(&e)), detail: Some(format!("candidate {}", phi.name())), ..row("schedule") });
            for &k in &adv.targets {
                let base = Row { eps: Some(format!("1/{}", 1u128 << k.min(127))), ..Row::default() };
                rows.push(match refute_rate(&e, &phi, k).map_err(core)? {
                    Refutation::Witness { n, bound, average, .. } => Row {
                        item: "witness".into(),
                        value: Some(average.to_string()),
                        detail: Some(format!("k = {k} listed at n = {n} > phi(2^-{k}) = {bound}; average exceeds 2^-{k}")),
                        ..base
                    },
                    Refutation::EdgeCase { n, bound, average, .. } => Row {
                        item: "edge_case".into(),
                        value: Some(average.to_string()),
                        detail: Some(format!("k = {k} listed at n = {n} <= 1 (bound {bound})")),
                        ..base
                    },
                    Refutation::None => Row {
                        item: "no_witness".into(),
                        detail: Some(format!("k = {k}: no witness within the schedule (phi(2^-{k}) = {})", phi.eval(&kronrate_core::num::pow2(-(k as i64))))),
                        ..base
                    },
                });
            }
        }
        AdversaryKind::StrongLaw => {
            let phi = as_candidate(&adv.candidate);
            let e = match &adv.schedule {
                ScheduleConfig::Values { values } => Enumeration::new(values.clone()),
                ScheduleConfig::Reveals { length, reveals } => Enumeration::from_reveals(*length, reveals),
                ScheduleConfig::Adversarial => adversarial_as_schedule(&phi, &adv.targets),
            }
            .map_err(|e| bad(e.to_string()))?;
            rows.push(Row { value: Some(schedule_preview(&e)), detail: Some(format!("candidate {}", phi.name())), ..row("schedule") });
            let m = slln_moment_check(&e).map_err(core)?;
            rows.push(Row {
                passed: Some(m.means_zero && m.variances_match),
                detail: Some(format!("{} variables: E X_n = 0 and Var(X_n)/n^2 = q_n(1 - q_n)", m.variables)),
                ..row("moments")
            });
            let (sum, ok) = variance_series_bound(&e);
            rows.push(Row { value: Some(sum.to_string()), passed: Some(ok), detail: Some("partial sums of Var(X_n)/n^2 <= 5/12".into()), ..row("variance_sum") });
            for &k in &adv.targets {
                let base = Row { lambda: Some(format!("1/{}", 1u128 << (k + 1).min(127))), eps: Some(rat(1, 2).to_string()), ..Row::default() };
                match refute_as_rate(&e, &phi, k).map_err(core)? {
                    AsRefutation::Witness(w) => {
                        let how = if w.tail_is_exact { "exact" } else { "lower bound" };
                        rows.push(Row {
                            item: "witness".into(),
                            value: Some(w.tail_lower_bound.to_string()),
                            passed: Some(w.refutes()),
                            detail: Some(format!(
                                "a_M = {k} at M = {} >= phi = {}; P(max over [{}, {}] of |S_j/j| > 1/2) ({how}) > 2^-{}",
                                w.m,
                                w.bound,
                                w.m,
                                w.h,
                                k + 1
                            )),
                            ..base.clone()
                        });
                        rows.push(Row {
                            item: "index_bound".into(),
                            value: Some(w.m.to_string()),
                            passed: Some(w.forcing_verified),
                            detail: Some("{|S_M/M| <= 1/2} lies inside {X_M low}".into()),
                            ..base
                        });
                    }
                    AsRefutation::None => rows.push(Row {
                        item: "no_witness".into(),
                        detail: Some(format!("k = {k}: not listed at or beyond phi(1/2, 2^-{}) = {}", k + 1, phi.eval(&rat(1, 2), &kronrate_core::num::pow2(-(k as i64) - 1)))),
                        ..base
                    }),
                }
            }
        }
    }
    Ok(rows)
}
