//! Labels for the two-photon states left on `(a, b)`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::Serialize;

use crate::linalg::{C64, ZERO};
use crate::state::{PureState, Register};

/// Magnitude tolerance when matching a state against a canonical form.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// Which of the ten output families a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ClassTag {
    #[serde(rename = "MAXIMAL")]
    Maximal,
    #[serde(rename = "QUBIT_AB")]
    QubitAB,
    #[serde(rename = "QUBIT_BA")]
    QubitBA,
    #[serde(rename = "QUBIT_AC")]
    QubitAC,
    #[serde(rename = "QUBIT_CA")]
    QubitCA,
    #[serde(rename = "QUBIT_BC_minor")]
    QubitBCMinor,
    #[serde(rename = "QUBIT_CB")]
    QubitCB,
    #[serde(rename = "PRODUCT_0")]
    Product0,
    #[serde(rename = "PRODUCT_1")]
    Product1,
    #[serde(rename = "PRODUCT_2")]
    Product2,
    #[serde(rename = "UNCLASSIFIABLE")]
    Unclassifiable,
}

impl ClassTag {
    /// The ten families in output-state order.
    pub const ALL: [ClassTag; 10] = [
        ClassTag::Maximal,
        ClassTag::QubitAB,
        ClassTag::QubitBA,
        ClassTag::QubitAC,
        ClassTag::QubitCA,
        ClassTag::QubitBCMinor,
        ClassTag::QubitCB,
        ClassTag::Product0,
        ClassTag::Product1,
        ClassTag::Product2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClassTag::Maximal => "MAXIMAL",
            ClassTag::QubitAB => "QUBIT_AB",
            ClassTag::QubitBA => "QUBIT_BA",
            ClassTag::QubitAC => "QUBIT_AC",
            ClassTag::QubitCA => "QUBIT_CA",
            ClassTag::QubitBCMinor => "QUBIT_BC_minor",
            ClassTag::QubitCB => "QUBIT_CB",
            ClassTag::Product0 => "PRODUCT_0",
            ClassTag::Product1 => "PRODUCT_1",
            ClassTag::Product2 => "PRODUCT_2",
            ClassTag::Unclassifiable => "UNCLASSIFIABLE",
        }
    }

    /// Output-state number, 40 for the maximal state through 49.
    pub fn psi_index(&self) -> Option<u8> {
        Self::ALL.iter().position(|t| t == self).map(|i| 40 + i as u8)
    }

    /// `(major, minor)` modes of a qubit family: the major term has weight 2/sqrt 5.
    pub fn qubit_modes(&self) -> Option<(usize, usize)> {
        match self {
            ClassTag::QubitAB => Some((0, 1)),
            ClassTag::QubitBA => Some((1, 0)),
            ClassTag::QubitAC => Some((0, 2)),
            ClassTag::QubitCA => Some((2, 0)),
            ClassTag::QubitBCMinor => Some((2, 1)),
            ClassTag::QubitCB => Some((1, 2)),
            _ => None,
        }
    }

    pub fn is_qubit(&self) -> bool {
        self.qubit_modes().is_some()
    }

    /// Family produced by the branch carrying `alpha^i beta^j gamma^k`.
    pub fn from_monomial(counts: [usize; 3]) -> ClassTag {
        match counts {
            [1, 1, 1] => ClassTag::Maximal,
            [3, 0, 0] => ClassTag::Product0,
            [0, 3, 0] => ClassTag::Product1,
            [0, 0, 3] => ClassTag::Product2,
            c => {
                let major = c.iter().position(|&n| n == 2);
                let minor = c.iter().position(|&n| n == 1);
                match (major, minor) {
                    (Some(mj), Some(mn)) => Self::ALL
                        .into_iter()
                        .find(|t| t.qubit_modes() == Some((mj, mn)))
                        .unwrap_or(ClassTag::Unclassifiable),
                    _ => ClassTag::Unclassifiable,
                }
            }
        }
    }

    fn product(mode: usize) -> ClassTag {
        [ClassTag::Product0, ClassTag::Product1, ClassTag::Product2][mode]
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Magnitude pattern of a qubit-family output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Subpattern {
    #[serde(rename = "RATIO_2_1")]
    Ratio2To1,
    #[serde(rename = "RATIO_1_1")]
    Ratio1To1,
    #[serde(rename = "COLLAPSED")]
    Collapsed,
}

impl Subpattern {
    pub fn name(&self) -> &'static str {
        match self {
            Subpattern::Ratio2To1 => "RATIO_2_1",
            Subpattern::Ratio1To1 => "RATIO_1_1",
            Subpattern::Collapsed => "COLLAPSED",
        }
    }
}

/// A family tag plus, for qubit families, the magnitude pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct OutcomeClass {
    pub tag: ClassTag,
    pub subpattern: Option<Subpattern>,
}

impl OutcomeClass {
    pub const UNCLASSIFIABLE: OutcomeClass = OutcomeClass { tag: ClassTag::Unclassifiable, subpattern: None };

    pub fn plain(tag: ClassTag) -> Self {
        Self { tag, subpattern: None }
    }

    pub fn qubit(tag: ClassTag, sub: Subpattern) -> Self {
        Self { tag, subpattern: Some(sub) }
    }

    pub fn subpattern_name(&self) -> &'static str {
        self.subpattern.map_or("", |s| s.name())
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subpattern {
            Some(s) => write!(f, "{}/{}", self.tag, s.name()),
            None => write!(f, "{}", self.tag),
        }
    }
}

/// Amplitudes of `|00>, |11>, |22>` for a normalized two-qutrit state with no
/// off-diagonal support.
pub fn diagonal_amplitudes(s: &PureState) -> Option<[C64; 3]> {
    let regs = s.registers();
    if regs.len() != 2 || regs.iter().any(|r| r.dim() != 3) {
        return None;
    }
    let n = s.norm_sqr().sqrt();
    if n == 0.0 {
        return None;
    }
    let mut out = [ZERO; 3];
    for (label, amp) in s.terms() {
        if label[0] != label[1] {
            if amp.norm() / n > CLASSIFY_TOL {
                return None;
            }
            continue;
        }
        out[label[0] as usize] = amp / n;
    }
    Some(out)
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= CLASSIFY_TOL
}

fn two_to_one(major: f64, minor: f64) -> bool {
    close(major, 2.0 / 5f64.sqrt()) && close(minor, 1.0 / 5f64.sqrt())
}

/// Classifies a state on `(a, b)` by its `|xx>` magnitudes alone.
///
/// An equal-weight pair could come from either qubit family on that mode pair;
/// the lower-numbered family is reported.
pub fn classify_output(s: &PureState) -> OutcomeClass {
    let Some(amps) = diagonal_amplitudes(s) else {
        return OutcomeClass::UNCLASSIFIABLE;
    };
    let mags = amps.map(|a| a.norm());
    let support: Vec<usize> = (0..3).filter(|&x| mags[x] > CLASSIFY_TOL).collect();
    match support.as_slice() {
        [x] => OutcomeClass::plain(ClassTag::product(*x)),
        [x, y] => {
            let (x, y) = (*x, *y);
            let find = |major, minor| {
                ClassTag::ALL
                    .into_iter()
                    .find(|t| t.qubit_modes() == Some((major, minor)))
                    .expect("every ordered mode pair has a family")
            };
            if two_to_one(mags[x], mags[y]) {
                OutcomeClass::qubit(find(x, y), Subpattern::Ratio2To1)
            } else if two_to_one(mags[y], mags[x]) {
                OutcomeClass::qubit(find(y, x), Subpattern::Ratio2To1)
            } else if close(mags[x], FRAC_1_SQRT_2) && close(mags[y], FRAC_1_SQRT_2) {
                let tag = find(x, y).min(find(y, x));
                OutcomeClass::qubit(tag, Subpattern::Ratio1To1)
            } else {
                OutcomeClass::UNCLASSIFIABLE
            }
        }
        [_, _, _] if mags.iter().all(|&m| close(m, 1.0 / 3f64.sqrt())) => OutcomeClass::plain(ClassTag::Maximal),
        _ => OutcomeClass::UNCLASSIFIABLE,
    }
}

/// Classifies a state known to come from the branch of family `branch`.
///
/// For qubit families the tag is the branch's own and only the magnitude
/// pattern is read from the state, so equal-weight outputs keep their origin.
pub fn classify_in_branch(s: &PureState, branch: ClassTag) -> OutcomeClass {
    let Some((major, minor)) = branch.qubit_modes() else {
        let c = classify_output(s);
        return if c.tag == branch { c } else { OutcomeClass::UNCLASSIFIABLE };
    };
    let Some(amps) = diagonal_amplitudes(s) else {
        return OutcomeClass::UNCLASSIFIABLE;
    };
    let mags = amps.map(|a| a.norm());
    let other = 3 - major - minor;
    if mags[other] > CLASSIFY_TOL {
        return OutcomeClass::UNCLASSIFIABLE;
    }
    let (big, small) = (mags[major], mags[minor]);
    let sub = if big <= CLASSIFY_TOL || small <= CLASSIFY_TOL {
        Subpattern::Collapsed
    } else if two_to_one(big, small) {
        Subpattern::Ratio2To1
    } else if close(big, small) {
        Subpattern::Ratio1To1
    } else {
        return OutcomeClass::UNCLASSIFIABLE;
    };
    OutcomeClass::qubit(branch, sub)
}

/// `sum_x c_x |x_a x_b>`.
pub fn pair_state(amps: [C64; 3]) -> PureState {
    let terms = (0..3).map(|x| ([x, x], amps[x]));
    PureState::new(vec![Register::qutrit("a"), Register::qutrit("b")], terms).expect("valid pair layout")
}

/// Real, non-negative representative of a class on `(a, b)`.
///
/// A collapsed qubit output has no fixed representative and yields `None`.
pub fn canonical_state(class: &OutcomeClass) -> Option<PureState> {
    let r = |x: f64| C64::new(x, 0.0);
    match class.tag {
        ClassTag::Maximal => Some(pair_state([r(1.0 / 3f64.sqrt()); 3])),
        ClassTag::Product0 | ClassTag::Product1 | ClassTag::Product2 => {
            let mut a = [ZERO; 3];
            a[class.tag as usize - ClassTag::Product0 as usize] = r(1.0);
            Some(pair_state(a))
        }
        ClassTag::Unclassifiable => None,
        tag => {
            let (major, minor) = tag.qubit_modes().expect("qubit family");
            let (wm, wn) = match class.subpattern.unwrap_or(Subpattern::Ratio2To1) {
                Subpattern::Ratio2To1 => (2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()),
                Subpattern::Ratio1To1 => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
                Subpattern::Collapsed => return None,
            };
            let mut a = [ZERO; 3];
            a[major] = r(wm);
            a[minor] = r(wn);
            Some(pair_state(a))
        }
    }
}
