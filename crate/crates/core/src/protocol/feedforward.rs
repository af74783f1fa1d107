//! Fourier-basis measurement of `c, e, d, f` and the phase fix-up on `a`.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use super::classify::{canonical_state, classify_in_branch, diagonal_amplitudes, pair_state, ClassTag, OutcomeClass};
use super::{build_initial, evolve_probes, homodyne_select, MEASURED};
use crate::error::{Error, Result};
use crate::format::csv_f64;
use crate::homodyne::ProbePhasePair;
use crate::linalg::{cis, diag, CMatrix, C64};
use crate::state::{correction_unitaries, fidelity, fourier_matrix, PureState, SchmidtTriple};

/// Tolerance for "the correction reproduces the target".
pub const CORRECTION_TOL: f64 = 1e-10;

/// Detector clicks `(k, l, m, n)` for photons `c, e, d, f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FourierOutcome {
    pub k: u8,
    pub l: u8,
    pub m: u8,
    pub n: u8,
}

impl FourierOutcome {
    pub fn new(k: u8, l: u8, m: u8, n: u8) -> Result<Self> {
        for x in [k, l, m, n] {
            if x > 2 {
                return Err(Error::IndexOutOfRange { index: x as usize, dim: 3 });
            }
        }
        Ok(Self { k, l, m, n })
    }

    /// All 81 outcomes in lexicographic `(k, l, m, n)` order.
    pub fn all() -> impl Iterator<Item = FourierOutcome> {
        (0..81u8).map(Self::from_index)
    }

    pub fn index(&self) -> usize {
        27 * self.k as usize + 9 * self.l as usize + 3 * self.m as usize + self.n as usize
    }

    pub fn from_index(i: u8) -> Self {
        Self { k: i / 27, l: i / 9 % 3, m: i / 3 % 3, n: i % 3 }
    }

    pub fn as_array(&self) -> [u8; 4] {
        [self.k, self.l, self.m, self.n]
    }
}

impl fmt::Display for FourierOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.k, self.l, self.m, self.n)
    }
}

/// A single-qutrit operation applied to photon `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction {
    /// One of the five listed diagonal unitaries `U_0 .. U_4`.
    Listed(usize),
    /// `diag(e^{i p0}, e^{i p1}, e^{i p2})` solved for this outcome.
    Diagonal([f64; 3]),
}

impl Correction {
    pub fn matrix(&self) -> CMatrix {
        match self {
            Correction::Listed(i) => correction_unitaries()[*i].matrix().clone(),
            Correction::Diagonal(p) => diag(&p.map(cis)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Correction::Listed(i) => format!("U{i}"),
            Correction::Diagonal(p) => {
                let parts: Vec<String> = p.iter().map(|&x| phase_label(x)).collect();
                format!("diag({})", parts.join(";"))
            }
        }
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Phase as a multiple of `pi/3` when it is one, else radians.
fn phase_label(x: f64) -> String {
    let x = x.rem_euclid(2.0 * PI);
    let k = x / (PI / 3.0);
    let r = k.round();
    if (k - r).abs() < 1e-9 {
        match r as i64 % 6 {
            0 => "0".into(),
            1 => "pi/3".into(),
            3 => "pi".into(),
            n => format!("{n}pi/3"),
        }
    } else {
        format!("{x:.9}")
    }
}

/// Feed-forward instruction for one branch and one Fourier outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardEntry {
    pub branch: ProbePhasePair,
    pub outcome: FourierOutcome,
    pub correction: Correction,
    pub final_class: OutcomeClass,
    /// Probability of this outcome given the branch.
    pub cond_prob: f64,
    /// Fidelity of the corrected state with `target`.
    pub fidelity: f64,
    /// Set when the listed unitaries do not suffice or the residual has an
    /// unexpected shape.
    pub flagged: bool,
    /// The state the correction produces, `None` for impossible outcomes.
    pub target: Option<PureState>,
}

/// Applies `meas` to each of `c, e, d, f` and keeps detector clicks `outcome`.
///
/// Row `k` of `meas` gives the amplitude of click `k`. Returns the residual on
/// `(a, b)` (un-normalized) and its squared norm.
pub fn measure_with(s: &PureState, outcome: &FourierOutcome, meas: &CMatrix) -> Result<(PureState, f64)> {
    let mut cur = s.clone();
    for (reg, click) in MEASURED.iter().zip(outcome.as_array()) {
        let row: Vec<C64> = (0..3).map(|j| meas[(click as usize, j)].conj()).collect();
        cur = cur.project(reg, &row)?.0;
    }
    let p = cur.norm_sqr();
    Ok((cur, p))
}

/// Ideal Fourier-basis measurement: the photon passes `U_F` and is detected in mode `k`.
pub fn measure_fourier(s: &PureState, outcome: &FourierOutcome) -> Result<(PureState, f64)> {
    measure_with(s, outcome, fourier_matrix().matrix())
}

/// The diagonal that maps `res` onto `target`, mode by mode.
fn phase_fix(res: &[C64; 3], target: &[C64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for x in 0..3 {
        if res[x].norm() > 1e-12 && target[x].norm() > 1e-12 {
            out[x] = (target[x] / res[x]).arg();
        }
    }
    out
}

/// Chooses the correction for a normalized residual of a branch of family `tag`.
///
/// For the maximal family a listed unitary that reproduces the target exactly
/// (global phase included) is preferred, then any listed unitary with unit
/// fidelity, then a solved diagonal, which is flagged.
pub fn solve_correction(res: &PureState, tag: ClassTag) -> (Correction, OutcomeClass, PureState, f64, bool) {
    let class = classify_in_branch(res, tag);
    let Some(amps) = diagonal_amplitudes(res) else {
        return (Correction::Listed(0), class, res.clone(), 0.0, true);
    };
    let target = match canonical_state(&class) {
        Some(t) => t,
        None if class.tag != ClassTag::Unclassifiable => {
            // collapsed qubit output: keep the surviving term with a real phase
            pair_state(amps.map(|a| C64::new(a.norm(), 0.0)))
        }
        None => return (Correction::Listed(0), class, res.clone(), 0.0, true),
    };
    let apply = |c: &Correction| res.apply("a", &c.matrix()).expect("register a present");
    if tag == ClassTag::Maximal {
        let listed: Vec<Correction> = (0..5).map(Correction::Listed).collect();
        for c in &listed {
            if apply(c).max_abs_diff(&target).is_ok_and(|d| d < CORRECTION_TOL) {
                return (*c, class, target, 1.0, false);
            }
        }
        for c in &listed {
            let f = fidelity(&apply(c), &target).unwrap_or(0.0);
            if f > 1.0 - CORRECTION_TOL {
                return (*c, class, target, f, false);
            }
        }
    }
    let target_amps = diagonal_amplitudes(&target).expect("canonical states are diagonal");
    let c = Correction::Diagonal(phase_fix(&amps, &target_amps));
    let f = fidelity(&apply(&c), &target).unwrap_or(0.0);
    let flagged = tag == ClassTag::Maximal || class.tag == ClassTag::Unclassifiable || f < 1.0 - CORRECTION_TOL;
    (c, class, target, f, flagged)
}

/// Feed-forward entries for all 81 outcomes of a normalized branch state.
pub fn entries_for(branch: ProbePhasePair, state: &PureState, tag: ClassTag) -> Result<Vec<FeedForwardEntry>> {
    let uf = fourier_matrix();
    FourierOutcome::all()
        .map(|outcome| {
            let (res, p) = measure_with(state, &outcome, uf.matrix())?;
            if p < 1e-24 {
                return Ok(FeedForwardEntry {
                    branch,
                    outcome,
                    correction: Correction::Listed(0),
                    final_class: OutcomeClass::plain(tag),
                    cond_prob: 0.0,
                    fidelity: 0.0,
                    flagged: false,
                    target: None,
                });
            }
            let res = res.normalize()?;
            let (correction, final_class, target, fid, flagged) = solve_correction(&res, tag);
            Ok(FeedForwardEntry {
                branch,
                outcome,
                correction,
                final_class,
                cond_prob: p,
                fidelity: fid,
                flagged,
                target: Some(target),
            })
        })
        .collect()
}

/// Feed-forward table for one branch.
///
/// Every term of a branch carries the same coefficient product, so the table
/// does not depend on `alpha, beta, gamma` and is derived from the
/// equal-weight input.
pub fn derive_feedforward(branch: ProbePhasePair) -> Result<Vec<FeedForwardEntry>> {
    let evolved = evolve_probes(&build_initial(&SchmidtTriple::balanced()))?;
    let (state, _) = homodyne_select(&evolved, branch)?;
    entries_for(branch, &state, super::branch_class(branch)?)
}

/// CSV with header `branch_p,branch_q,k,l,m,n,correction,class,subpattern,cond_prob`.
pub fn feedforward_csv(entries: &[FeedForwardEntry]) -> String {
    let mut out = String::from("branch_p,branch_q,k,l,m,n,correction,class,subpattern,cond_prob\n");
    for e in entries {
        let o = e.outcome;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            e.branch.p,
            e.branch.q,
            o.k,
            o.l,
            o.m,
            o.n,
            e.correction.label(),
            e.final_class.tag.name(),
            e.final_class.subpattern_name(),
            csv_f64(e.cond_prob)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Subpattern;
    use std::collections::BTreeMap;

    const MAXIMAL: ProbePhasePair = ProbePhasePair::new(1, 3);

    fn o(k: u8, l: u8, m: u8, n: u8) -> FourierOutcome {
        FourierOutcome::new(k, l, m, n).unwrap()
    }

    #[test]
    fn outcome_indexing() {
        let all: Vec<_> = FourierOutcome::all().collect();
        assert_eq!(all.len(), 81);
        assert_eq!(all[0], o(0, 0, 0, 0));
        assert_eq!(all[80], o(2, 2, 2, 2));
        assert!(all.iter().enumerate().all(|(i, x)| x.index() == i));
        assert!(FourierOutcome::new(3, 0, 0, 0).is_err());
    }

    #[test]
    fn maximal_branch_uses_listed_unitaries_only() {
        let table = derive_feedforward(MAXIMAL).unwrap();
        assert_eq!(table.len(), 81);
        let mut counts = BTreeMap::new();
        for e in &table {
            assert!(!e.flagged, "{e:?}");
            assert!(e.fidelity > 1.0 - 1e-10);
            assert_eq!(e.final_class.tag, ClassTag::Maximal);
            let Correction::Listed(i) = e.correction else { panic!("solved diagonal for {}", e.outcome) };
            *counts.entry(i).or_insert(0) += 1;
        }
        assert_eq!(counts.into_iter().collect::<Vec<_>>(), vec![(0, 27), (1, 9), (2, 9), (3, 18), (4, 18)]);
        let total: f64 = table.iter().map(|e| e.cond_prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worked_outcomes() {
        let table = derive_feedforward(MAXIMAL).unwrap();
        let at = |x: FourierOutcome| table[x.index()].correction;
        assert_eq!(at(o(0, 2, 1, 2)), Correction::Listed(1));
        assert_eq!(at(o(1, 0, 1, 2)), Correction::Listed(2));
        assert_eq!(at(o(1, 1, 2, 0)), Correction::Listed(3));
        assert_eq!(at(o(1, 1, 2, 1)), Correction::Listed(4));
        assert_eq!(at(o(2, 2, 1, 2)), Correction::Listed(3));
    }

    #[test]
    fn maximal_conditional_probabilities() {
        let table = derive_feedforward(MAXIMAL).unwrap();
        for e in &table {
            let [k, l, m, n] = e.outcome.as_array();
            let want = if (k + m) % 3 == (l + n) % 3 { 2.0 / 81.0 } else { 1.0 / 162.0 };
            assert!((e.cond_prob - want).abs() < 1e-14, "{}", e.outcome);
        }
    }

    #[test]
    fn qubit_branch_patterns() {
        let table = derive_feedforward(ProbePhasePair::new(-2, 1)).unwrap();
        let mut two = 0;
        for e in &table {
            assert!(!e.flagged);
            assert!(e.fidelity > 1.0 - 1e-10);
            assert_eq!(e.final_class.tag, ClassTag::QubitAB);
            let [k, l, m, n] = e.outcome.as_array();
            let same = (k + m) % 3 == (l + n) % 3;
            let want = if same { Subpattern::Ratio2To1 } else { Subpattern::Ratio1To1 };
            assert_eq!(e.final_class.subpattern, Some(want));
            assert!(matches!(e.correction, Correction::Diagonal(_)));
            two += same as usize;
        }
        assert_eq!(two, 27);
    }

    #[test]
    fn product_branch_is_uniform() {
        let table = derive_feedforward(ProbePhasePair::new(6, 6)).unwrap();
        for e in &table {
            assert!((e.cond_prob - 1.0 / 81.0).abs() < 1e-15);
            assert_eq!(e.final_class.tag, ClassTag::Product2);
            assert!(e.fidelity > 1.0 - 1e-12);
        }
    }

    #[test]
    fn unknown_branch_is_rejected() {
        assert!(derive_feedforward(ProbePhasePair::new(5, 5)).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(Correction::Listed(3).label(), "U3");
        assert_eq!(Correction::Diagonal([0.0, 2.0 * PI / 3.0, -PI / 3.0]).label(), "diag(0;2pi/3;5pi/3)");
        assert_eq!(phase_label(PI), "pi");
        let csv = feedforward_csv(&derive_feedforward(MAXIMAL).unwrap());
        assert!(csv
            .starts_with("branch_p,branch_q,k,l,m,n,correction,class,subpattern,cond_prob\n1,3,0,0,0,0,U0,MAXIMAL,,"));
    }
}
