//! Cross-Kerr parity probes and X-quadrature homodyne detection.
//!
//! A probe is tracked only through the integer multiple of its Kerr phase that
//! each basis term imprints on it, so the joint photon-probe state becomes a
//! finite set of branches keyed by `(p, q)`, the multipliers of `theta` on the
//! first probe and `theta'` on the second. The Gaussian quadrature statistics
//! enter only when a probe is measured.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::csv_f64;
use crate::grid::Span;
use crate::special::erfc;
use crate::state::PureState;

/// Which coherent probe a Kerr rule couples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Probe {
    First,
    Second,
}

/// Per-mode Kerr phase multipliers for one photon register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KerrRule {
    register: String,
    multipliers: Vec<i32>,
}

impl KerrRule {
    /// `multipliers[m]` is the phase multiple imprinted by mode `m`.
    /// Allowed values are `-1, 0, 1, 2`.
    pub fn new(register: impl Into<String>, multipliers: Vec<i32>) -> Result<Self> {
        if let Some(&bad) = multipliers.iter().find(|k| !(-1..=2).contains(*k)) {
            return Err(Error::InvalidParameter(format!("Kerr multiplier {bad} outside -1..=2")));
        }
        Ok(Self { register: register.into(), multipliers })
    }

    /// First probe: modes `0, 1, 2` shift by `-theta, 0, 2 theta`.
    pub fn first_probe(register: &str) -> Self {
        Self { register: register.into(), multipliers: vec![-1, 0, 2] }
    }

    /// Second probe: modes `0, 1, 2` shift by `0, theta', 2 theta'`.
    pub fn second_probe(register: &str) -> Self {
        Self { register: register.into(), multipliers: vec![0, 1, 2] }
    }

    pub fn register(&self) -> &str {
        &self.register
    }

    pub fn multiplier(&self, mode: usize) -> i32 {
        self.multipliers.get(mode).copied().unwrap_or(0)
    }
}

/// Phase multiples `(p, q)` carried by the two probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProbePhasePair {
    pub p: i32,
    pub q: i32,
}

impl ProbePhasePair {
    pub const fn new(p: i32, q: i32) -> Self {
        Self { p, q }
    }
}

impl fmt::Display for ProbePhasePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.p, self.q)
    }
}

/// Joint photon-probe state, one un-normalized photon state per probe branch.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedState {
    branches: BTreeMap<ProbePhasePair, PureState>,
    probed: Vec<String>,
}

impl AnnotatedState {
    /// Both probes untouched: a single `(0, 0)` branch.
    pub fn unprobed(s: PureState) -> Self {
        let mut branches = BTreeMap::new();
        branches.insert(ProbePhasePair::new(0, 0), s);
        Self { branches, probed: Vec::new() }
    }

    pub fn branches(&self) -> &BTreeMap<ProbePhasePair, PureState> {
        &self.branches
    }

    pub fn branch(&self, pair: ProbePhasePair) -> Option<&PureState> {
        self.branches.get(&pair)
    }

    /// Registers that have coupled to at least one probe, in first-use order.
    pub fn probed_registers(&self) -> &[String] {
        &self.probed
    }

    pub fn total_norm_sqr(&self) -> f64 {
        self.branches.values().map(|s| s.norm_sqr()).sum()
    }
}

/// Re-bins every basis term by the phase its mode on `rule.register` imprints.
pub fn kerr_apply(s: &AnnotatedState, rule: &KerrRule, probe: Probe) -> Result<AnnotatedState> {
    let mut out: BTreeMap<ProbePhasePair, Vec<(Vec<usize>, _)>> = BTreeMap::new();
    let mut layouts = BTreeMap::new();
    for (pair, state) in &s.branches {
        let pos = state.position(&rule.register)?;
        for (label, amp) in state.terms() {
            let k = rule.multiplier(label[pos] as usize);
            let target = match probe {
                Probe::First => ProbePhasePair::new(pair.p + k, pair.q),
                Probe::Second => ProbePhasePair::new(pair.p, pair.q + k),
            };
            let label: Vec<usize> = label.iter().map(|&i| i as usize).collect();
            out.entry(target).or_default().push((label, amp));
            layouts.entry(target).or_insert_with(|| state.registers().to_vec());
        }
    }
    let mut branches = BTreeMap::new();
    for (pair, terms) in out {
        let regs = layouts.remove(&pair).expect("layout recorded with terms");
        branches.insert(pair, PureState::new(regs, terms)?);
    }
    let mut probed = s.probed.clone();
    if !probed.iter().any(|r| r == &rule.register) {
        probed.push(rule.register.clone());
    }
    Ok(AnnotatedState { branches, probed })
}

/// One row of the branch ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchRow {
    pub pair: ProbePhasePair,
    pub monomial: String,
    pub norm_sqr: f64,
}

/// Name of the coefficient product `alpha^i beta^j gamma^k`, e.g. `a2b` or `abc`.
pub fn monomial_id(counts: [usize; 3]) -> String {
    let mut s = String::new();
    for (letter, &n) in ['a', 'b', 'c'].iter().zip(&counts) {
        match n {
            0 => {}
            1 => s.push(*letter),
            n => {
                s.push(*letter);
                s.push_str(&n.to_string());
            }
        }
    }
    if s.is_empty() {
        s.push('1');
    }
    s
}

/// Mode counts `(#0, #1, #2)` over the probed registers of one basis label.
fn mode_counts(state: &PureState, probed: &[String], label: &[u8]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    for name in probed {
        if let Ok(pos) = state.position(name) {
            if let Some(c) = counts.get_mut(label[pos] as usize) {
                *c += 1;
            }
        }
    }
    counts
}

/// Nonempty branches with the coefficient monomial they carry and their weight.
pub fn branch_table(s: &AnnotatedState) -> Vec<BranchRow> {
    s.branches
        .iter()
        .filter(|(_, st)| !st.is_empty())
        .map(|(pair, st)| {
            let (label, _) = st.terms().next().expect("nonempty branch");
            BranchRow { pair: *pair, monomial: monomial_id(mode_counts(st, &s.probed, label)), norm_sqr: st.norm_sqr() }
        })
        .collect()
}

/// Mean scale of the X quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QuadratureConvention {
    /// Mean `sqrt 2 alpha e^{-gt/2} cos(k theta)`, variance `(2 - e^{-gt}) / 2`.
    #[default]
    #[serde(rename = "APPENDIX_SQRT2")]
    AppendixSqrt2,
    /// Mean `2 alpha cos(k theta)`, unit variance.
    #[serde(rename = "FIGURE_2X")]
    Figure2x,
}

/// Coherent probe of amplitude `alpha` measured in the X quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomodyneModel {
    pub probe_amp: f64,
    pub theta: f64,
    pub gamma_t: f64,
    pub convention: QuadratureConvention,
}

impl HomodyneModel {
    pub fn new(probe_amp: f64, theta: f64, gamma_t: f64, convention: QuadratureConvention) -> Result<Self> {
        let m = Self { probe_amp, theta, gamma_t, convention };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.probe_amp.is_finite() && self.theta.is_finite() && self.gamma_t.is_finite()) {
            return Err(Error::InvalidParameter("homodyne parameters must be finite".into()));
        }
        if self.probe_amp < 0.0 {
            return Err(Error::InvalidParameter(format!("probe amplitude {} is negative", self.probe_amp)));
        }
        if self.gamma_t < 0.0 {
            return Err(Error::InvalidParameter(format!("decay exposure {} is negative", self.gamma_t)));
        }
        Ok(())
    }
}

/// Normal distribution of an X-quadrature reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianOutcome {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianOutcome {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `P(X > t)`.
    pub fn upper_tail(&self, t: f64) -> f64 {
        0.5 * erfc((t - self.mean) / (self.std_dev() * SQRT_2))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mean, self.std_dev()).expect("positive variance").sample(rng)
    }
}

/// Quadrature statistics when the probe carries phase `k theta`.
pub fn x_distribution(m: &HomodyneModel, k: i32) -> GaussianOutcome {
    let c = (k as f64 * m.theta).cos();
    match m.convention {
        QuadratureConvention::AppendixSqrt2 => GaussianOutcome {
            mean: SQRT_2 * m.probe_amp * (-m.gamma_t / 2.0).exp() * c,
            variance: (2.0 - (-m.gamma_t).exp()) / 2.0,
        },
        QuadratureConvention::Figure2x => GaussianOutcome { mean: 2.0 * m.probe_amp * c, variance: 1.0 },
    }
}

/// Candidates ordered by mean, with later duplicates of a mean dropped.
/// Among equal means the smaller multiplier is kept.
fn decision_order(m: &HomodyneModel, candidates: &[i32]) -> Result<Vec<(i32, f64)>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut v: Vec<(i32, f64)> = candidates.iter().map(|&k| (k, x_distribution(m, k).mean)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v.dedup_by(|later, earlier| later.1 == earlier.1);
    Ok(v)
}

/// Nearest-mean decision; ties go to the smaller multiplier.
pub fn discriminate(m: &HomodyneModel, x: f64, candidates: &[i32]) -> Result<i32> {
    let order = decision_order(m, candidates)?;
    let mut best = order[0];
    let mut best_d = (x - best.1).abs();
    for &(k, mean) in &order[1..] {
        let d = (x - mean).abs();
        if d < best_d || (d == best_d && k < best.0) {
            best = (k, mean);
            best_d = d;
        }
    }
    Ok(best.0)
}

/// `P(decision = decoded | true multiplier = truth)` under nearest-mean
/// discrimination, from the exact Gaussian decision intervals.
pub fn decision_probability(m: &HomodyneModel, truth: i32, decoded: i32, candidates: &[i32]) -> Result<f64> {
    let order = decision_order(m, candidates)?;
    let Some(idx) = order.iter().position(|&(k, _)| k == decoded) else {
        return Ok(0.0);
    };
    let g = x_distribution(m, truth);
    let lo = if idx == 0 { f64::NEG_INFINITY } else { 0.5 * (order[idx - 1].1 + order[idx].1) };
    let hi = if idx + 1 == order.len() { f64::INFINITY } else { 0.5 * (order[idx].1 + order[idx + 1].1) };
    let upper = |t: f64| {
        if t == f64::NEG_INFINITY {
            1.0
        } else if t == f64::INFINITY {
            0.0
        } else {
            g.upper_tail(t)
        }
    };
    Ok((upper(lo) - upper(hi)).max(0.0))
}

/// Probability that a reading from `truth` is decoded as something else.
pub fn misread_probability(m: &HomodyneModel, truth: i32, candidates: &[i32]) -> Result<f64> {
    Ok(1.0 - decision_probability(m, truth, truth, candidates)?)
}

/// Overlap error between two peaks a distance `d` apart with common std dev `sigma`.
pub fn adjacent_error_probability(d: f64, sigma: f64) -> f64 {
    0.5 * erfc(d / (2.0 * SQRT_2 * sigma))
}

/// Argument of erfc in the low-dissipation success probability.
pub fn p_suc_argument(m: &HomodyneModel) -> f64 {
    (-m.gamma_t / 2.0).exp() * m.probe_amp * (1.0 - m.theta.cos()) * FRAC_1_SQRT_2
}

/// Success probability of one X measurement, low-dissipation form.
pub fn p_suc(m: &HomodyneModel) -> f64 {
    1.0 - 0.5 * erfc(p_suc_argument(m))
}

/// Argument of erfc in the full dissipative success probability.
pub fn p_suc_full_argument(m: &HomodyneModel) -> f64 {
    let e = (-m.gamma_t / 2.0).exp();
    m.probe_amp * (e + 1.0 - m.theta.cos()) / (SQRT_2 * (2.0 - (-m.gamma_t).exp()))
}

/// Success probability of one X measurement, full dissipative form.
pub fn p_suc_full(m: &HomodyneModel) -> f64 {
    1.0 - 0.5 * erfc(p_suc_full_argument(m))
}

/// Success probability of the two probe measurements together.
pub fn p_x(m: &HomodyneModel) -> f64 {
    p_suc(m).powi(2)
}

/// One row of a success-probability sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub gamma_t: f64,
    pub theta: f64,
    pub p_suc: f64,
    pub p_suc_full: f64,
    pub p_x: f64,
}

/// Success probabilities over a grid, ordered alpha, then gamma_t, then theta.
pub fn sweep(alpha: &Span, gamma_t: &Span, theta: &Span) -> Result<Vec<SweepRow>> {
    for s in [alpha, gamma_t, theta] {
        s.validate()?;
    }
    let mut rows = Vec::with_capacity(alpha.points * gamma_t.points * theta.points);
    for a in alpha.values() {
        for g in gamma_t.values() {
            for t in theta.values() {
                let m = HomodyneModel::new(a, t, g, QuadratureConvention::AppendixSqrt2)?;
                rows.push(SweepRow {
                    alpha: a,
                    gamma_t: g,
                    theta: t,
                    p_suc: p_suc(&m),
                    p_suc_full: p_suc_full(&m),
                    p_x: p_x(&m),
                });
            }
        }
    }
    Ok(rows)
}

/// CSV with header `alpha,gamma_t,theta,p_suc,p_suc_full,p_x`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,gamma_t,theta,p_suc,p_suc_full,p_x\n");
    for r in rows {
        let cells = [r.alpha, r.gamma_t, r.theta, r.p_suc, r.p_suc_full, r.p_x].map(csv_f64);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::state::{make_pair_state, Register, SchmidtTriple};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn six_photon(t: &SchmidtTriple) -> PureState {
        let q = Register::qutrit;
        let ab = make_pair_state(t, q("a"), q("b")).unwrap();
        let cd = make_pair_state(t, q("c"), q("d")).unwrap();
        let ef = make_pair_state(t, q("e"), q("f")).unwrap();
        ab.tensor(&cd).unwrap().tensor(&ef).unwrap()
    }

    fn probe_both(s: PureState) -> AnnotatedState {
        let mut a = AnnotatedState::unprobed(s);
        for r in ["b", "d", "f"] {
            a = kerr_apply(&a, &KerrRule::first_probe(r), Probe::First).unwrap();
        }
        for r in ["b", "d", "f"] {
            a = kerr_apply(&a, &KerrRule::second_probe(r), Probe::Second).unwrap();
        }
        a
    }

    fn generic() -> SchmidtTriple {
        SchmidtTriple::normalized(C64::new(0.7, 0.0), C64::new(0.5, 0.2), C64::new(0.4, -0.1)).unwrap()
    }

    #[test]
    fn first_probe_isolates_all_zero_term() {
        let t = generic();
        let mut a = AnnotatedState::unprobed(six_photon(&t));
        for r in ["b", "d", "f"] {
            a = kerr_apply(&a, &KerrRule::first_probe(r), Probe::First).unwrap();
        }
        let b = a.branch(ProbePhasePair::new(-3, 0)).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b.amplitude(&[0; 6]) - t.alpha().powi(3)).norm() < 1e-15);
    }

    #[test]
    fn zero_rule_is_identity() {
        let s = six_photon(&generic());
        let a = AnnotatedState::unprobed(s.clone());
        let rule = KerrRule::new("b", vec![0, 0, 0]).unwrap();
        let out = kerr_apply(&a, &rule, Probe::First).unwrap();
        assert_eq!(out.branches().len(), 1);
        assert_eq!(out.branch(ProbePhasePair::new(0, 0)).unwrap(), &s);
    }

    #[test]
    fn rule_rejects_out_of_set_multiplier() {
        assert!(KerrRule::new("b", vec![-2, 0, 2]).is_err());
        let a = AnnotatedState::unprobed(six_photon(&generic()));
        assert!(kerr_apply(&a, &KerrRule::first_probe("z"), Probe::First).is_err());
    }

    #[test]
    fn ten_branches_with_expected_monomials() {
        let a = probe_both(six_photon(&generic()));
        let rows = branch_table(&a);
        let got: Vec<(i32, i32, &str)> = rows.iter().map(|r| (r.pair.p, r.pair.q, r.monomial.as_str())).collect();
        let mut want = vec![
            (-3, 0, "a3"),
            (-2, 1, "a2b"),
            (-1, 2, "ab2"),
            (1, 3, "abc"),
            (0, 2, "a2c"),
            (3, 4, "ac2"),
            (4, 5, "bc2"),
            (2, 4, "b2c"),
            (0, 3, "b3"),
            (6, 6, "c3"),
        ];
        want.sort();
        assert_eq!(got, want);
        let total: f64 = rows.iter().map(|r| r.norm_sqr).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((a.total_norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn branch_one_three_holds_six_terms() {
        let t = generic();
        let a = probe_both(six_photon(&t));
        let b = a.branch(ProbePhasePair::new(1, 3)).unwrap();
        assert_eq!(b.len(), 6);
        let want = t.alpha() * t.beta() * t.gamma();
        for (_, amp) in b.terms() {
            assert!((amp - want).norm() < 1e-15);
        }
        assert!((b.amplitude(&[0, 0, 1, 1, 2, 2]) - want).norm() < 1e-15);
    }

    #[test]
    fn figure_means() {
        let m = HomodyneModel::new(5000.0, 1e-2, 0.0, QuadratureConvention::Figure2x).unwrap();
        assert_eq!(x_distribution(&m, 0).mean, 10000.0);
        assert!((x_distribution(&m, 2).mean - 10000.0 * 0.02f64.cos()).abs() < 1e-9);
        assert!((x_distribution(&m, 2).mean - 9998.0).abs() < 0.01);
        for k in [3, 4] {
            assert!((x_distribution(&m, k).mean - 2.0 * 5000.0 * (k as f64 * 1e-2).cos()).abs() < 1e-9);
        }
        let a = HomodyneModel::new(3.0, 0.35, 0.0, QuadratureConvention::AppendixSqrt2).unwrap();
        let g = x_distribution(&a, 0);
        assert!((g.mean - SQRT_2 * 3.0).abs() < 1e-15);
        assert_eq!(g.variance, 0.5);
    }

    #[test]
    fn discrimination_rules() {
        let m = HomodyneModel::new(10.0, 0.35, 0.0, QuadratureConvention::Figure2x).unwrap();
        let cands = [0, 1, 2, 3];
        for &k in &cands {
            assert_eq!(discriminate(&m, x_distribution(&m, k).mean, &cands).unwrap(), k);
        }
        let mid = 0.5 * (x_distribution(&m, 1).mean + x_distribution(&m, 2).mean);
        assert_eq!(discriminate(&m, mid, &cands).unwrap(), 1);
        assert_eq!(discriminate(&m, 0.0, &[]).unwrap_err(), Error::EmptyCandidates);
        // cos is even, so -1 and 1 share a mean and the smaller wins
        assert_eq!(discriminate(&m, x_distribution(&m, 1).mean, &[1, -1]).unwrap(), -1);
    }

    #[test]
    fn decision_probabilities_sum_to_one() {
        let m = HomodyneModel::new(2.0, 0.35, 0.0, QuadratureConvention::Figure2x).unwrap();
        let cands = [0, 1, 2, 3, 4, 6];
        for &t in &cands {
            let s: f64 = cands.iter().map(|&d| decision_probability(&m, t, d, &cands).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_peak_error_matches_sampling() {
        let m = HomodyneModel::new(5000.0, 0.01, 0.0, QuadratureConvention::Figure2x).unwrap();
        let cands = [0, 2];
        let d = x_distribution(&m, 0).mean - x_distribution(&m, 2).mean;
        let p = adjacent_error_probability(d, 1.0);
        assert!((misread_probability(&m, 0, &cands).unwrap() - p).abs() < 1e-12);
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = x_distribution(&m, 0);
        let errors = (0..n).filter(|_| discriminate(&m, g.sample(&mut rng), &cands).unwrap() != 0).count();
        let rate = errors as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * se, "rate {rate} vs {p}");
    }

    #[test]
    fn zero_amplitude_is_a_coin_flip() {
        let m = HomodyneModel::new(0.0, 0.35, 0.0, QuadratureConvention::AppendixSqrt2).unwrap();
        assert_eq!(p_suc(&m), 0.5);
        assert_eq!(p_x(&m), 0.25);
    }

    #[test]
    fn full_form_at_zero_phase_exceeds_half() {
        let m = HomodyneModel::new(1.0, 0.0, 0.7, QuadratureConvention::AppendixSqrt2).unwrap();
        assert!(p_suc_full_argument(&m) > 0.0);
        assert!(p_suc_full(&m) > 0.5);
    }

    #[test]
    fn success_monotone_on_grid() {
        for i in 0..20 {
            for j in 0..20 {
                let a = i as f64 * 5.0;
                let g = j as f64 * 0.25;
                let m = |a, g| HomodyneModel::new(a, 0.35, g, QuadratureConvention::AppendixSqrt2).unwrap();
                assert!(p_suc(&m(a + 5.0, g)) >= p_suc(&m(a, g)));
                assert!(p_suc(&m(a, g + 0.25)) <= p_suc(&m(a, g)));
                assert!(p_x(&m(a, g)) <= p_suc(&m(a, g)));
            }
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = sweep(&Span::point(50.0), &Span::new(0.0, 1.0, 3).unwrap(), &Span::point(0.35)).unwrap();
        assert_eq!(rows.len(), 3);
        let csv = sweep_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("alpha,gamma_t,theta,p_suc,p_suc_full,p_x"));
        assert!(lines.next().unwrap().starts_with("50,0,0.35,0.998782743617,"));
        assert!(csv.lines().nth(3).unwrap().starts_with("50,1,0.35,0.967014114461,"));
    }

    #[test]
    fn validation() {
        assert!(HomodyneModel::new(-1.0, 0.35, 0.0, QuadratureConvention::AppendixSqrt2).is_err());
        assert!(HomodyneModel::new(1.0, 0.35, -0.1, QuadratureConvention::AppendixSqrt2).is_err());
        assert_eq!(monomial_id([1, 1, 1]), "abc");
        assert_eq!(monomial_id([0, 0, 3]), "c3");
    }
}
