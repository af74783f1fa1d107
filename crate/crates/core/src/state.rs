//! Pure states over registers of single photons in spatial modes.
//!
//! A [`PureState`] is a sparse map from basis labels (one mode index per
//! register) to complex amplitudes. All operations return new states; nothing
//! is mutated in place. Measured registers are removed from the state rather
//! than collapsed, since the protocol discards them after detection.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::F17;
use crate::linalg::{cis, diag, unitarity_deviation, CMatrix, C64, ONE, ZERO};

/// Tolerance on `sum |amp|^2 = 1`.
pub const NORM_TOL: f64 = 1e-12;
/// Element-wise tolerance on `U^dagger U = I`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Amplitudes with modulus below this are dropped.
pub const PRUNE_TOL: f64 = 1e-15;

pub type Amplitude = C64;

/// A named photon with `dim` spatial modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Register {
    name: String,
    dim: usize,
}

impl Register {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        let name = name.into();
        if !(2..=u8::MAX as usize).contains(&dim) {
            return Err(Error::InvalidDimension { name, dim });
        }
        Ok(Self { name, dim })
    }

    pub fn qutrit(name: impl Into<String>) -> Self {
        Self { name: name.into(), dim: 3 }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Schmidt coefficients `(alpha, beta, gamma)` of `alpha|00> + beta|11> + gamma|22>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchmidtTriple {
    alpha: C64,
    beta: C64,
    gamma: C64,
}

impl SchmidtTriple {
    /// Validates `|alpha|^2 + |beta|^2 + |gamma|^2 = 1` within [`NORM_TOL`].
    pub fn new(alpha: C64, beta: C64, gamma: C64) -> Result<Self> {
        if ![alpha, beta, gamma].iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite("Schmidt coefficients"));
        }
        let norm_sqr = alpha.norm_sqr() + beta.norm_sqr() + gamma.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn from_real(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        Self::new(alpha.into(), beta.into(), gamma.into())
    }

    /// Rescales arbitrary coefficients onto the unit sphere.
    pub fn normalized(alpha: C64, beta: C64, gamma: C64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr() + gamma.norm_sqr()).sqrt();
        if !n.is_finite() {
            return Err(Error::NonFinite("Schmidt coefficients"));
        }
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Self::new(alpha / n, beta / n, gamma / n)
    }

    /// `alpha = beta = gamma = 1/sqrt(3)`.
    pub fn balanced() -> Self {
        let c = C64::new(1.0 / 3f64.sqrt(), 0.0);
        Self { alpha: c, beta: c, gamma: c }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn gamma(&self) -> C64 {
        self.gamma
    }

    pub fn as_array(&self) -> [C64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    /// Multiplies each coefficient by its own unit phase.
    pub fn with_phases(&self, phases: [f64; 3]) -> Self {
        Self {
            alpha: self.alpha * cis(phases[0]),
            beta: self.beta * cis(phases[1]),
            gamma: self.gamma * cis(phases[2]),
        }
    }
}

/// A 3x3 unitary acting on one qutrit register.
#[derive(Debug, Clone, PartialEq)]
pub struct QutritUnitary(CMatrix);

impl QutritUnitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.shape() != (3, 3) {
            return Err(Error::DimensionMismatch { expected: 3, got: m.nrows() });
        }
        let deviation = unitarity_deviation(&m);
        if deviation.is_nan() || deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    /// `diag(e^{i p0}, e^{i p1}, e^{i p2})`.
    pub fn diagonal_phases(phases: [f64; 3]) -> Self {
        Self(diag(&phases.map(cis)))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }
}

impl AsRef<CMatrix> for QutritUnitary {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Sparse pure state over an ordered list of registers.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    registers: Vec<Register>,
    amps: BTreeMap<Vec<u8>, C64>,
}

impl PureState {
    /// Builds a state from `(label, amplitude)` pairs. Repeated labels are summed.
    pub fn new<I, L>(registers: Vec<Register>, amps: I) -> Result<Self>
    where
        I: IntoIterator<Item = (L, C64)>,
        L: AsRef<[usize]>,
    {
        check_layout(&registers)?;
        let mut map: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (label, amp) in amps {
            let label = label.as_ref();
            if label.len() != registers.len() {
                return Err(Error::DimensionMismatch { expected: registers.len(), got: label.len() });
            }
            if !(amp.re.is_finite() && amp.im.is_finite()) {
                return Err(Error::NonFinite("amplitude"));
            }
            let mut key = Vec::with_capacity(label.len());
            for (&idx, reg) in label.iter().zip(&registers) {
                if idx >= reg.dim {
                    return Err(Error::IndexOutOfRange { index: idx, dim: reg.dim });
                }
                key.push(idx as u8);
            }
            *map.entry(key).or_insert(ZERO) += amp;
        }
        Ok(Self::from_map(registers, map))
    }

    fn from_map(registers: Vec<Register>, mut amps: BTreeMap<Vec<u8>, C64>) -> Self {
        amps.retain(|_, a| a.norm() >= PRUNE_TOL);
        Self { registers, amps }
    }

    /// Single-register basis state `|idx>`.
    pub fn basis(reg: Register, idx: usize) -> Result<Self> {
        Self::new(vec![reg], [([idx], ONE)])
    }

    /// Single-register state with the given mode amplitudes.
    pub fn from_vector(reg: Register, amps: &[C64]) -> Result<Self> {
        if amps.len() != reg.dim {
            return Err(Error::DimensionMismatch { expected: reg.dim, got: amps.len() });
        }
        let terms: Vec<_> = amps.iter().enumerate().map(|(i, &a)| ([i], a)).collect();
        Self::new(vec![reg], terms)
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register_names(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.name()).collect()
    }

    /// Position of a register by name.
    pub fn position(&self, name: &str) -> Result<usize> {
        self.registers.iter().position(|r| r.name == name).ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    /// Nonzero terms in label order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], C64)> + '_ {
        self.amps.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn amplitude(&self, label: &[usize]) -> C64 {
        let key: Vec<u8> = label.iter().map(|&i| i as u8).collect();
        self.amps.get(&key).copied().unwrap_or(ZERO)
    }

    /// Number of stored (nonzero) terms.
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let amps = self.amps.iter().map(|(k, &v)| (k.clone(), v * c)).collect();
        Self::from_map(self.registers.clone(), amps)
    }

    /// Tensor product; register names must be disjoint.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let mut registers = self.registers.clone();
        registers.extend(other.registers.iter().cloned());
        check_layout(&registers)?;
        let mut amps = BTreeMap::new();
        for (k1, &a1) in &self.amps {
            for (k2, &a2) in &other.amps {
                let mut key = k1.clone();
                key.extend_from_slice(k2);
                amps.insert(key, a1 * a2);
            }
        }
        Ok(Self::from_map(registers, amps))
    }

    /// Applies a square matrix to one register.
    pub fn apply(&self, reg: &str, m: &CMatrix) -> Result<Self> {
        let pos = self.position(reg)?;
        let dim = self.registers[pos].dim;
        if m.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: m.nrows() });
        }
        let mut amps: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (key, &a) in &self.amps {
            let j = key[pos] as usize;
            for i in 0..dim {
                let coef = m[(i, j)];
                if coef == ZERO {
                    continue;
                }
                let mut out = key.clone();
                out[pos] = i as u8;
                *amps.entry(out).or_insert(ZERO) += coef * a;
            }
        }
        Ok(Self::from_map(self.registers.clone(), amps))
    }

    /// Projects `reg` onto `vec` (amplitude `<vec|psi>`) and removes the register.
    ///
    /// Returns the un-normalized residual and its squared norm, the outcome
    /// probability when `self` is normalized.
    pub fn project(&self, reg: &str, vec: &[C64]) -> Result<(Self, f64)> {
        let pos = self.position(reg)?;
        let dim = self.registers[pos].dim;
        if vec.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: vec.len() });
        }
        let norm_sqr: f64 = vec.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sqr });
        }
        let mut registers = self.registers.clone();
        registers.remove(pos);
        let mut amps: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (key, &a) in &self.amps {
            let bra = vec[key[pos] as usize].conj();
            if bra == ZERO {
                continue;
            }
            let mut out = key.clone();
            out.remove(pos);
            *amps.entry(out).or_insert(ZERO) += bra * a;
        }
        let residual = Self::from_map(registers, amps);
        let p = residual.norm_sqr();
        Ok((residual, p))
    }

    /// Keeps only the listed modes of `reg`, relabelled `0..modes.len()`.
    ///
    /// This is the projector onto a mode subspace; the register stays in the
    /// state with the reduced dimension. Returns the residual and its squared norm.
    pub fn restrict(&self, reg: &str, modes: &[usize]) -> Result<(Self, f64)> {
        let pos = self.position(reg)?;
        let dim = self.registers[pos].dim;
        for &m in modes {
            if m >= dim {
                return Err(Error::IndexOutOfRange { index: m, dim });
            }
        }
        let mut registers = self.registers.clone();
        registers[pos] = Register::new(reg, modes.len())?;
        let mut amps = BTreeMap::new();
        for (key, &a) in &self.amps {
            if let Some(new_idx) = modes.iter().position(|&m| m == key[pos] as usize) {
                let mut out = key.clone();
                out[pos] = new_idx as u8;
                amps.insert(out, a);
            }
        }
        let residual = Self::from_map(registers, amps);
        let p = residual.norm_sqr();
        Ok((residual, p))
    }

    /// `<self|other>`; layouts must match.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.registers != other.registers {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.amps.iter().filter_map(|(k, a)| other.amps.get(k).map(|b| a.conj() * b)).sum())
    }

    /// Largest amplitude difference over the union of supports.
    pub fn max_abs_diff(&self, other: &PureState) -> Result<f64> {
        if self.registers != other.registers {
            return Err(Error::LayoutMismatch);
        }
        let mut worst: f64 = 0.0;
        for (k, a) in &self.amps {
            let b = other.amps.get(k).copied().unwrap_or(ZERO);
            worst = worst.max((a - b).norm());
        }
        for (k, b) in &other.amps {
            if !self.amps.contains_key(k) {
                worst = worst.max(b.norm());
            }
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> String {
        let doc = StateJson {
            registers: self.registers.iter().map(|r| RegisterJson { name: r.name.clone(), dim: r.dim }).collect(),
            amps: self
                .amps
                .iter()
                .map(|(k, a)| AmpJson { idx: k.iter().map(|&i| i as usize).collect(), re: F17(a.re), im: F17(a.im) })
                .collect(),
        };
        serde_json::to_string(&doc).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StateJsonIn = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        let registers = doc.registers.into_iter().map(|r| Register::new(r.name, r.dim)).collect::<Result<Vec<_>>>()?;
        let terms: Vec<_> = doc.amps.into_iter().map(|a| (a.idx, C64::new(a.re, a.im))).collect();
        Self::new(registers, terms)
    }
}

impl fmt::Display for PureState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, a) in &self.amps {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|", a.re, a.im)?;
            for (i, r) in k.iter().zip(&self.registers) {
                write!(f, "{}{}", i, r.name)?;
            }
            write!(f, ">")?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct StateJson {
    registers: Vec<RegisterJson>,
    amps: Vec<AmpJson>,
}

#[derive(Serialize, Deserialize)]
struct RegisterJson {
    name: String,
    dim: usize,
}

#[derive(Serialize)]
struct AmpJson {
    idx: Vec<usize>,
    re: F17,
    im: F17,
}

#[derive(Deserialize)]
struct StateJsonIn {
    registers: Vec<RegisterJson>,
    amps: Vec<AmpJsonIn>,
}

#[derive(Deserialize)]
struct AmpJsonIn {
    idx: Vec<usize>,
    re: f64,
    im: f64,
}

fn check_layout(registers: &[Register]) -> Result<()> {
    for (i, r) in registers.iter().enumerate() {
        if !(2..=u8::MAX as usize).contains(&r.dim) {
            return Err(Error::InvalidDimension { name: r.name.clone(), dim: r.dim });
        }
        if registers[..i].iter().any(|o| o.name == r.name) {
            return Err(Error::DuplicateRegister(r.name.clone()));
        }
    }
    Ok(())
}

/// `alpha|00> + beta|11> + gamma|22>` on `(reg_a, reg_b)`.
pub fn make_pair_state(coeffs: &SchmidtTriple, reg_a: Register, reg_b: Register) -> Result<PureState> {
    for r in [&reg_a, &reg_b] {
        if r.dim < 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: r.dim });
        }
    }
    let terms = coeffs.as_array().into_iter().enumerate().map(|(i, c)| ([i, i], c));
    PureState::new(vec![reg_a, reg_b], terms)
}

pub fn tensor(s1: &PureState, s2: &PureState) -> Result<PureState> {
    s1.tensor(s2)
}

/// Applies a [`QutritUnitary`], a mode transform, or any other square matrix to `reg`.
pub fn apply_unitary<M: AsRef<CMatrix>>(s: &PureState, reg: &str, u: &M) -> Result<PureState> {
    s.apply(reg, u.as_ref())
}

pub fn project(s: &PureState, reg: &str, vec: &[C64]) -> Result<(PureState, f64)> {
    s.project(reg, vec)
}

/// `|<s1|s2>|^2` for normalized states on the same registers.
pub fn fidelity(s1: &PureState, s2: &PureState) -> Result<f64> {
    for s in [s1, s2] {
        if !s.is_normalized() {
            return Err(Error::NotNormalized { norm_sqr: s.norm_sqr() });
        }
    }
    let f = s1.inner(s2)?.norm_sqr();
    Ok(f.min(1.0))
}

/// `omega = e^{i 2 pi / 3}`.
pub fn omega() -> C64 {
    cis(2.0 * PI / 3.0)
}

/// The qutrit Fourier basis `phi_k = (1/sqrt 3) sum_j omega^{jk} |j>`.
pub fn fourier_basis() -> [[C64; 3]; 3] {
    let s = 1.0 / 3f64.sqrt();
    let w = omega();
    let mut out = [[ZERO; 3]; 3];
    for (k, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = w.powi(((j * k) % 3) as i32) * s;
        }
    }
    out
}

/// `U_F`, whose rows are the Fourier basis vectors.
pub fn fourier_matrix() -> QutritUnitary {
    let b = fourier_basis();
    QutritUnitary(CMatrix::from_fn(3, 3, |r, c| b[r][c]))
}

/// Feed-forward corrections `U_0 .. U_4` for the maximally entangled branch.
pub fn correction_unitaries() -> [QutritUnitary; 5] {
    let third = PI / 3.0;
    [
        QutritUnitary(diag(&[ONE, ONE, ONE])),
        QutritUnitary(diag(&[ONE, cis(2.0 * third), cis(4.0 * third)])),
        QutritUnitary(diag(&[ONE, cis(4.0 * third), cis(2.0 * third)])),
        QutritUnitary(diag(&[-ONE, cis(third), cis(5.0 * third)])),
        QutritUnitary(diag(&[-ONE, cis(5.0 * third), cis(third)])),
    ]
}

/// `(1/sqrt 3)(|00> + |11> + |22>)` on the given pair of qutrit registers.
pub fn maximally_entangled(reg_a: Register, reg_b: Register) -> PureState {
    make_pair_state(&SchmidtTriple::balanced(), reg_a, reg_b).expect("qutrit registers")
}
