//! Concentration when the Schmidt coefficients are known.
//!
//! Photon `a` gets two extra loss modes `0'` and `1'` (register indices 3 and
//! 4). An unbalanced beam splitter on mode 0 with reflectivity `gamma/alpha`
//! and one on mode 1 with `gamma/beta` leave every surviving term with weight
//! `gamma`. No click on the loss modes heralds the maximally entangled state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::F17;
use crate::linalg::{identity, C64};
use crate::optics::ModeTransform;
use crate::state::{fidelity, maximally_entangled, PureState, Register, SchmidtTriple};

/// Dimension of photon `a` with its two loss modes.
pub const EXTENDED_DIM: usize = 5;
/// Loss modes fed by modes 0 and 1.
pub const LOSS_MODES: [usize; 2] = [3, 4];

const PHASE_TOL: f64 = 1e-12;

/// Beam splitter sending `sqrt(1 - r^2)` of `source` into `loss`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UbsSpec {
    pub reflectivity: f64,
    pub source: usize,
    pub loss: usize,
}

impl UbsSpec {
    pub fn new(reflectivity: f64, source: usize, loss: usize) -> Result<Self> {
        if !(reflectivity > 0.0 && reflectivity <= 1.0) {
            return Err(Error::InvalidParameter(format!("reflectivity {reflectivity} outside (0, 1]")));
        }
        if source == loss {
            return Err(Error::InvalidParameter("source and loss modes coincide".into()));
        }
        Ok(Self { reflectivity, source, loss })
    }
}

/// `|source> -> r|source> + t|loss>`, `|loss> -> -t|source> + r|loss>`,
/// identity on the other modes.
pub fn ubs_transform(u: &UbsSpec, dim: usize) -> Result<ModeTransform> {
    for m in [u.source, u.loss] {
        if m >= dim {
            return Err(Error::IndexOutOfRange { index: m, dim });
        }
    }
    let r = u.reflectivity;
    let t = (1.0 - r * r).max(0.0).sqrt();
    let mut m = identity(dim);
    m[(u.source, u.source)] = C64::new(r, 0.0);
    m[(u.loss, u.source)] = C64::new(t, 0.0);
    m[(u.source, u.loss)] = C64::new(-t, 0.0);
    m[(u.loss, u.loss)] = C64::new(r, 0.0);
    ModeTransform::new(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownEcpResult {
    /// Probability that neither loss detector clicks, from the simulated state.
    pub success_prob: f64,
    /// The closed form `|gamma|^2 / 3` quoted for the scheme, kept for comparison.
    pub claimed_prob: f64,
    /// Normalized heralded state on `(a, b)`.
    pub heralded_state: PureState,
    /// Click probabilities of the detectors on `0'` and `1'`.
    pub detector_probs: [f64; 2],
    /// Fidelity of the heralded state with the maximally entangled state.
    pub fidelity: f64,
}

#[derive(Serialize)]
struct KnownJson {
    success_prob: F17,
    paper_claimed: F17,
    detector_probs: [F17; 2],
    fidelity: F17,
}

impl KnownEcpResult {
    /// `{"success_prob", "paper_claimed", "detector_probs", "fidelity"}`.
    pub fn to_json(&self) -> String {
        let j = KnownJson {
            success_prob: F17(self.success_prob),
            paper_claimed: F17(self.claimed_prob),
            detector_probs: self.detector_probs.map(F17),
            fidelity: F17(self.fidelity),
        };
        serde_json::to_string_pretty(&j).expect("result serializes")
    }

    /// Whether the simulated and claimed success probabilities differ.
    pub fn claim_differs(&self) -> bool {
        (self.success_prob - self.claimed_prob).abs() > 1e-12
    }
}

/// Checks `|alpha| >= |beta| >= |gamma| > 0` with a common phase.
fn validate(coeffs: &SchmidtTriple) -> Result<[f64; 3]> {
    let c = coeffs.as_array();
    let mags = c.map(|x| x.norm());
    if mags[2] == 0.0 {
        return Err(Error::DegenerateRank);
    }
    if mags[0] < mags[1] || mags[1] < mags[2] {
        return Err(Error::OrderingViolated);
    }
    let phase = c[0] / mags[0];
    if c.iter().zip(mags).any(|(x, m)| (x / m - phase).norm() > PHASE_TOL) {
        return Err(Error::InvalidParameter("coefficients must share one phase".into()));
    }
    Ok(mags)
}

pub fn run_known(coeffs: &SchmidtTriple) -> Result<KnownEcpResult> {
    let [a, b, g] = validate(coeffs)?;
    let reg_a = Register::new("a", EXTENDED_DIM)?;
    let terms = (0..3).map(|x| ([x, x], coeffs.as_array()[x]));
    let mut s = PureState::new(vec![reg_a, Register::qutrit("b")], terms)?;
    for (source, r) in [(0, g / a), (1, g / b)] {
        let u = ubs_transform(&UbsSpec::new(r, source, LOSS_MODES[source])?, EXTENDED_DIM)?;
        s = s.apply("a", u.matrix())?;
    }
    let click = |mode: usize| -> Result<f64> {
        let mut e = [C64::new(0.0, 0.0); EXTENDED_DIM];
        e[mode] = C64::new(1.0, 0.0);
        Ok(s.project("a", &e)?.1)
    };
    let (d1, d2) = (click(LOSS_MODES[0])?, click(LOSS_MODES[1])?);
    let (kept, p) = s.restrict("a", &[0, 1, 2])?;
    let heralded = kept.normalize()?;
    let target = maximally_entangled(Register::qutrit("a"), Register::qutrit("b"));
    Ok(KnownEcpResult {
        success_prob: p,
        claimed_prob: g * g / 3.0,
        fidelity: fidelity(&heralded, &target)?,
        heralded_state: heralded,
        detector_probs: [d1, d2],
    })
}
