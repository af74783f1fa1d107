//! Entanglement concentration from three copies of an unknown qutrit pair.
//!
//! Alice holds photons `a, c, e` and Bob holds `b, d, f`. Bob couples his
//! photons to two coherent probes, keeps the branch flagged by the homodyne
//! readings, then `c, d, e, f` are measured in the Fourier basis and a
//! diagonal phase on `a` fixes up what is left on `(a, b)`.

pub mod classify;
pub mod feedforward;
pub mod montecarlo;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::F17;
use crate::homodyne::{branch_table, kerr_apply, AnnotatedState, KerrRule, Probe, ProbePhasePair};
use crate::state::{make_pair_state, PureState, Register, SchmidtTriple};

pub use classify::{canonical_state, classify_in_branch, classify_output, ClassTag, OutcomeClass, Subpattern};
pub use feedforward::{derive_feedforward, measure_fourier, Correction, FeedForwardEntry, FourierOutcome};
pub use montecarlo::{
    predicted_misread_rate, run_csv, run_monte_carlo, run_trial, Detection, MonteCarloConfig, MonteCarloRun,
    MonteCarloSummary, Protocol, TrialRecord, TrialResult,
};

/// Register order of the six-photon state.
pub const REGISTERS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
/// Bob's photons, which couple to the probes.
pub const PROBED: [&str; 3] = ["b", "d", "f"];
/// Photons measured in the Fourier basis, in outcome order `(k, l, m, n)`.
pub const MEASURED: [&str; 4] = ["c", "e", "d", "f"];

/// `|psi>_ab |psi>_cd |psi>_ef`.
pub fn build_initial(coeffs: &SchmidtTriple) -> PureState {
    let pair =
        |x: &str, y: &str| make_pair_state(coeffs, Register::qutrit(x), Register::qutrit(y)).expect("qutrit pair");
    pair("a", "b").tensor(&pair("c", "d")).and_then(|s| s.tensor(&pair("e", "f"))).expect("distinct register names")
}

/// Couples `b, d, f` to both probes.
pub fn evolve_probes(s: &PureState) -> Result<AnnotatedState> {
    let mut a = AnnotatedState::unprobed(s.clone());
    for r in PROBED {
        a = kerr_apply(&a, &KerrRule::first_probe(r), Probe::First)?;
    }
    for r in PROBED {
        a = kerr_apply(&a, &KerrRule::second_probe(r), Probe::Second)?;
    }
    Ok(a)
}

/// Keeps branch `pair`: the normalized photon state and its probability.
pub fn homodyne_select(a: &AnnotatedState, pair: ProbePhasePair) -> Result<(PureState, f64)> {
    let empty = Error::EmptyBranch { p: pair.p, q: pair.q };
    let s = a.branch(pair).ok_or(empty.clone())?;
    let p = s.norm_sqr();
    if p == 0.0 {
        return Err(empty);
    }
    Ok((s.normalize()?, p))
}

/// One branch of the protocol with its probability for given coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchInfo {
    pub pair: ProbePhasePair,
    /// Coefficient product carried by the branch, e.g. `a2b`.
    pub monomial: String,
    /// Powers of `(alpha, beta, gamma)`.
    pub powers: [usize; 3],
    pub probability: f64,
    pub class: ClassTag,
}

fn powers_of(monomial: &str) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut chars = monomial.chars().peekable();
    while let Some(c) = chars.next() {
        let idx = match c {
            'a' => 0,
            'b' => 1,
            'c' => 2,
            _ => continue,
        };
        let n = chars.peek().and_then(|d| d.to_digit(10));
        if n.is_some() {
            chars.next();
        }
        out[idx] += n.unwrap_or(1) as usize;
    }
    out
}

/// The ten branches and their monomials, independent of the coefficients.
pub fn branch_layout() -> Vec<(ProbePhasePair, String)> {
    let a = evolve_probes(&build_initial(&SchmidtTriple::balanced())).expect("template evolves");
    branch_table(&a).into_iter().map(|r| (r.pair, r.monomial)).collect()
}

/// Output family of a monomial id such as `a2b`.
pub fn monomial_class(monomial: &str) -> ClassTag {
    ClassTag::from_monomial(powers_of(monomial))
}

/// Output family of a branch.
pub fn branch_class(pair: ProbePhasePair) -> Result<ClassTag> {
    branch_layout()
        .into_iter()
        .find(|(p, _)| *p == pair)
        .map(|(_, m)| ClassTag::from_monomial(powers_of(&m)))
        .ok_or(Error::EmptyBranch { p: pair.p, q: pair.q })
}

/// Probability and output family of every branch, including empty ones.
pub fn enumerate_branches(coeffs: &SchmidtTriple) -> Result<Vec<BranchInfo>> {
    let evolved = evolve_probes(&build_initial(coeffs))?;
    Ok(branch_layout()
        .into_iter()
        .map(|(pair, monomial)| {
            let powers = powers_of(&monomial);
            BranchInfo {
                pair,
                probability: evolved.branch(pair).map_or(0.0, |s| s.norm_sqr()),
                class: ClassTag::from_monomial(powers),
                monomial,
                powers,
            }
        })
        .collect())
}

/// Closed-form branch probability: multinomial weight times `|monomial|^2`.
pub fn closed_form_probability(powers: [usize; 3], coeffs: &SchmidtTriple) -> f64 {
    let weight = match powers.iter().filter(|&&n| n > 0).count() {
        3 => 6.0,
        2 => 3.0,
        _ => 1.0,
    };
    let mags = coeffs.as_array().map(|c| c.norm_sqr());
    weight * (0..3).map(|i| mags[i].powi(powers[i] as i32)).product::<f64>()
}

#[derive(Serialize)]
struct EnumerateRow<'a> {
    branch: [i32; 2],
    coefficient: &'a str,
    probability: F17,
    class: ClassTag,
}

/// JSON array of `{branch, coefficient, probability, class}`.
pub fn enumerate_json(rows: &[BranchInfo]) -> String {
    let out: Vec<EnumerateRow> = rows
        .iter()
        .map(|r| EnumerateRow {
            branch: [r.pair.p, r.pair.q],
            coefficient: &r.monomial,
            probability: F17(r.probability),
            class: r.class,
        })
        .collect();
    serde_json::to_string_pretty(&out).expect("rows serialize")
}
