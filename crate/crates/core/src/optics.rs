//! Beam splitters, phase shifters and the three-block qutrit Fourier network.
//!
//! Two-mode blocks use index 0 for the lower-numbered spatial mode and index 1
//! for the higher one. Matrices act on column vectors of mode amplitudes and
//! products are written right-to-left in the order light meets the elements.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::csv_f64;
use crate::grid::Span;
use crate::linalg::{cis, diag, max_abs_diff, operator_norm, unitarity_deviation, CMatrix, C64, I, ONE};
use crate::state::fourier_matrix;

/// Tolerance for ideal-network equivalence with the Fourier matrix.
pub const EQUIVALENCE_TOL: f64 = 1e-10;
/// Trapezoid nodes used for the average block fidelity.
pub const FIDELITY_NODES: usize = 2048;

/// Output phases of the Fourier network, one per mode.
pub const OUTPUT_PHASES: [f64; 3] = [PI / 2.0, 4.0 * PI / 3.0, 2.0 * PI / 3.0];

/// An `n x n` linear map on photon modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransform(CMatrix);

impl ModeTransform {
    /// Accepts `n in {2, 3, 5}` with operator norm at most `1 + 1e-9`.
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = m.nrows();
        if !m.is_square() || ![2, 3, 5].contains(&n) {
            return Err(Error::DimensionMismatch { expected: 3, got: n });
        }
        if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("mode transform"));
        }
        let norm = operator_norm(&m);
        if norm > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!("mode transform has operator norm {norm}")));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `self * rhs`: `rhs` acts first.
    pub fn then_after(&self, rhs: &ModeTransform) -> Self {
        Self(&self.0 * &rhs.0)
    }

    /// Output amplitudes for the given input amplitudes.
    pub fn apply(&self, input: &[C64]) -> Vec<C64> {
        (0..self.dim()).map(|r| (0..self.dim()).map(|c| self.0[(r, c)] * input[c]).sum()).collect()
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.0)
    }
}

impl AsRef<CMatrix> for ModeTransform {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Angles and mode pair of one variable beam splitter `T_mn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockParams {
    pub phi: f64,
    pub omega: f64,
    pub modes: (usize, usize),
}

impl BlockParams {
    pub fn new(phi: f64, omega: f64, modes: (usize, usize)) -> Result<Self> {
        if !phi.is_finite() || !omega.is_finite() {
            return Err(Error::InvalidParameter("block angles must be finite".into()));
        }
        if modes.0 == modes.1 {
            return Err(Error::InvalidParameter("block modes must differ".into()));
        }
        Ok(Self { phi, omega, modes })
    }

    /// `T_21`, `T_20`, `T_10` in the order light meets them.
    pub fn fourier_network() -> [BlockParams; 3] {
        [
            Self { phi: PI / 3.0, omega: PI / 4.0, modes: (2, 1) },
            Self { phi: 2.0 * PI / 3.0, omega: 2f64.sqrt().atan(), modes: (2, 0) },
            Self { phi: 3.0 * PI / 2.0, omega: PI / 4.0, modes: (1, 0) },
        ]
    }
}

/// Deviations of the physical components from their nominal settings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ImperfectionParams {
    pub eps: f64,
    pub d_omega: f64,
    pub d_phi: f64,
}

impl ImperfectionParams {
    pub fn new(eps: f64, d_omega: f64, d_phi: f64) -> Result<Self> {
        let p = Self { eps, d_omega, d_phi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.d_omega.is_finite() && self.d_phi.is_finite()) {
            return Err(Error::InvalidParameter("imperfections must be finite".into()));
        }
        if self.eps <= -1.0 {
            return Err(Error::InvalidParameter(format!("beam-splitter deviation eps = {} must exceed -1", self.eps)));
        }
        Ok(())
    }
}

/// How a composed 3x3 network relates to the Fourier matrix.
///
/// Output row `i` equals `e^{i phases[i]}` times row `permutation[i]` of `U_F`,
/// up to `residual`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub permutation: [usize; 3],
    pub phases: [f64; 3],
    pub residual: f64,
    pub equivalent: bool,
    /// `max |M - U_F|` with no relabelling at all.
    pub direct_residual: f64,
}

impl EquivalenceReport {
    pub fn is_identity_permutation(&self) -> bool {
        self.permutation == [0, 1, 2]
    }
}

/// 50:50 beam splitter, or the skewed splitter when `imp` is given.
pub fn bs(imp: Option<&ImperfectionParams>) -> Result<ModeTransform> {
    let t = match imp {
        Some(p) => {
            p.validate()?;
            1.0 + p.eps
        }
        None => 1.0,
    };
    let n = (t * t + 1.0).sqrt();
    let d = C64::new(t / n, 0.0);
    let o = I / n;
    Ok(ModeTransform(CMatrix::from_row_slice(2, 2, &[d, o, o, d])))
}

/// `diag(e^{i(phi - delta)}, 1)`.
pub fn phase_shifter(phi: f64, delta: Option<f64>) -> ModeTransform {
    ModeTransform(diag(&[cis(phi - delta.unwrap_or(0.0)), ONE]))
}

/// Mach-Zehnder realisation `BS * P_2omega * BS * P_phi` of a variable beam splitter.
pub fn mzi_block(p: &BlockParams, imp: Option<&ImperfectionParams>) -> Result<ModeTransform> {
    let (d_omega, d_phi) = imp.map_or((0.0, 0.0), |i| (i.d_omega, i.d_phi));
    let splitter = bs(imp)?;
    let p2w = phase_shifter(2.0 * p.omega, Some(2.0 * d_omega));
    let pphi = phase_shifter(p.phi, Some(d_phi));
    Ok(splitter.then_after(&p2w).then_after(&splitter).then_after(&pphi))
}

/// The MZI block with its global phase `i e^{i omega}` removed, so the ideal
/// block is exactly `[[e^{i phi} sin w, cos w], [e^{i phi} cos w, -sin w]]`.
pub fn variable_beam_splitter(p: &BlockParams, imp: Option<&ImperfectionParams>) -> Result<ModeTransform> {
    let m = mzi_block(p, imp)?;
    Ok(ModeTransform(m.0 * (-I * cis(-p.omega))))
}

/// Closed-form 2x2 variable beam splitter, without the interferometer.
pub fn ideal_block_matrix(p: &BlockParams) -> CMatrix {
    let (s, c) = p.omega.sin_cos();
    let e = cis(p.phi);
    CMatrix::from_row_slice(2, 2, &[e * s, C64::new(c, 0.0), e * c, C64::new(-s, 0.0)])
}

/// Places a 2x2 block on modes `(m, n)` of a `dim`-mode identity.
pub fn embed_block(b: &ModeTransform, modes: (usize, usize), dim: usize) -> Result<ModeTransform> {
    if b.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: b.dim() });
    }
    let (m, n) = modes;
    for k in [m, n] {
        if k >= dim {
            return Err(Error::IndexOutOfRange { index: k, dim });
        }
    }
    if m == n {
        return Err(Error::InvalidParameter("block modes must differ".into()));
    }
    let idx = [m.min(n), m.max(n)];
    let mut out = CMatrix::identity(dim, dim);
    for (a, &r) in idx.iter().enumerate() {
        for (c, &col) in idx.iter().enumerate() {
            out[(r, col)] = b.0[(a, c)];
        }
    }
    ModeTransform::new(out)
}

/// Output amplitudes of the ideal block for input `cos chi |0> + sin chi |1>`,
/// written out term by term rather than through matrix products.
pub fn ideal_block_output(chi: f64, omega: f64, phi: f64) -> [C64; 2] {
    let e = cis(2.0 * omega);
    let ep = cis(phi);
    let (s, c) = chi.sin_cos();
    [((e - ONE) * ep * c + I * (e + ONE) * s) * 0.5, (I * (e + ONE) * ep * c + (ONE - e) * s) * 0.5]
}

/// Output amplitudes of the imperfect block for the same input.
pub fn imperfect_block_output(chi: f64, omega: f64, phi: f64, imp: &ImperfectionParams) -> [C64; 2] {
    let e = cis(2.0 * (omega - imp.d_omega));
    let ep = cis(phi - imp.d_phi);
    let t = 1.0 + imp.eps;
    let n = t * t + 1.0;
    let (s, c) = chi.sin_cos();
    [
        ((e * t * t - ONE) * ep * c + I * t * (e + ONE) * s) / n,
        (I * t * (e + ONE) * ep * c + (C64::new(t * t, 0.0) - e) * s) / n,
    ]
}

/// Largest deviation of `mzi_block` from the closed-form output over `samples`
/// random `(chi, omega, phi)` draws.
pub fn mzi_self_test(seed: u64, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let chi = rng.random_range(0.0..2.0 * PI);
        let omega = rng.random_range(0.0..2.0 * PI);
        let phi = rng.random_range(0.0..2.0 * PI);
        let p = BlockParams { phi, omega, modes: (1, 0) };
        let out =
            mzi_block(&p, None).expect("ideal block").apply(&[C64::new(chi.cos(), 0.0), C64::new(chi.sin(), 0.0)]);
        let want = ideal_block_output(chi, omega, phi);
        worst = worst.max((out[0] - want[0]).norm()).max((out[1] - want[1]).norm());
    }
    worst
}

/// Finds the permutation and per-row phases that best map `U_F` onto `m`.
///
/// Phases are read off the first column in which every entry of `m` is nonzero.
pub fn check_equivalence(m: &CMatrix) -> Result<EquivalenceReport> {
    if m.shape() != (3, 3) {
        return Err(Error::DimensionMismatch { expected: 3, got: m.nrows() });
    }
    let uf = fourier_matrix();
    let uf = uf.matrix();
    let direct_residual = max_abs_diff(m, uf);
    let col = (0..3).find(|&c| (0..3).all(|r| m[(r, c)].norm() > 1e-12));
    let mut best = EquivalenceReport {
        permutation: [0, 1, 2],
        phases: [0.0; 3],
        residual: f64::INFINITY,
        equivalent: false,
        direct_residual,
    };
    let Some(col) = col else {
        return Ok(best);
    };
    for perm in PERMUTATIONS {
        let mut phases = [0.0; 3];
        let mut residual: f64 = 0.0;
        for i in 0..3 {
            let d = m[(i, col)] / uf[(perm[i], col)];
            phases[i] = d.arg();
            let unit = cis(phases[i]);
            for j in 0..3 {
                residual = residual.max((m[(i, j)] - unit * uf[(perm[i], j)]).norm());
            }
        }
        if residual < best.residual {
            best.permutation = perm;
            best.phases = phases;
            best.residual = residual;
        }
    }
    best.equivalent = best.residual < EQUIVALENCE_TOL;
    Ok(best)
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Builds `P_theta * T_10 * T_20 * T_21` and relates it to `U_F`.
///
/// The same imperfections are applied to every block; the output phase
/// shifters are taken as ideal.
pub fn compose_fourier(imp: Option<&ImperfectionParams>) -> Result<(ModeTransform, EquivalenceReport)> {
    let mut m = ModeTransform(CMatrix::identity(3, 3));
    for p in BlockParams::fourier_network() {
        let block = embed_block(&variable_beam_splitter(&p, imp)?, p.modes, 3)?;
        m = block.then_after(&m);
    }
    let out = ModeTransform(diag(&OUTPUT_PHASES.map(cis))).then_after(&m);
    let report = check_equivalence(out.matrix())?;
    Ok((out, report))
}

/// Average over `chi` of `|<ideal(chi)|real(chi)>|^2` for one block.
pub fn block_fidelity(p: &BlockParams, imp: &ImperfectionParams) -> Result<f64> {
    let ideal = mzi_block(p, None)?;
    let real = mzi_block(p, Some(imp))?;
    let step = 2.0 * PI / FIDELITY_NODES as f64;
    let total: f64 = (0..FIDELITY_NODES)
        .map(|k| {
            let (s, c) = (k as f64 * step).sin_cos();
            let input = [C64::new(c, 0.0), C64::new(s, 0.0)];
            let a = ideal.apply(&input);
            let b = real.apply(&input);
            (a[0].conj() * b[0] + a[1].conj() * b[1]).norm_sqr()
        })
        .sum();
    Ok((total / FIDELITY_NODES as f64).clamp(0.0, 1.0))
}

/// One cell of a fidelity surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceCell {
    pub eps: f64,
    pub delta: f64,
    pub avg_fidelity: f64,
}

/// Block fidelity over a grid with `d_omega = d_phi = delta`, row-major in `eps`.
pub fn fidelity_surface(eps: &Span, delta: &Span, p: &BlockParams) -> Result<Vec<SurfaceCell>> {
    eps.validate()?;
    delta.validate()?;
    let cells: Vec<(f64, f64)> =
        eps.values().into_iter().flat_map(|e| delta.values().into_iter().map(move |d| (e, d))).collect();
    cells
        .into_par_iter()
        .map(|(e, d)| {
            let imp = ImperfectionParams::new(e, d, d)?;
            Ok(SurfaceCell { eps: e, delta: d, avg_fidelity: block_fidelity(p, &imp)? })
        })
        .collect()
}

/// CSV with header `eps,delta,avg_fidelity`.
pub fn surface_csv(cells: &[SurfaceCell]) -> String {
    let mut out = String::from("eps,delta,avg_fidelity\n");
    for c in cells {
        out.push_str(&format!("{},{},{}\n", csv_f64(c.eps), csv_f64(c.delta), csv_f64(c.avg_fidelity)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    fn t21() -> BlockParams {
        BlockParams::fourier_network()[0]
    }

    #[test]
    fn ideal_components_are_unitary() {
        assert!(bs(None).unwrap().unitarity_deviation() < 1e-15);
        assert!(phase_shifter(1.3, None).unitarity_deviation() < 1e-15);
        for eps in [-0.5, 0.0, 0.1, 3.0] {
            let imp = ImperfectionParams::new(eps, 0.0, 0.0).unwrap();
            assert!(bs(Some(&imp)).unwrap().unitarity_deviation() < 1e-12);
            // eps^2 + 2 eps + 2 = (1 + eps)^2 + 1
            assert!((eps * eps + 2.0 * eps + 2.0 - ((1.0 + eps).powi(2) + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn skewed_splitter_entries() {
        let imp = ImperfectionParams::new(0.1, 0.0, 0.0).unwrap();
        let m = bs(Some(&imp)).unwrap();
        assert!((m.matrix()[(0, 0)].re - 1.1 / 2.21f64.sqrt()).abs() < 1e-15);
        assert!((m.matrix()[(0, 0)].re - 0.739_940_073_395_943_7).abs() < 1e-15);
        let zero = ImperfectionParams::default();
        assert_eq!(bs(Some(&zero)).unwrap(), bs(None).unwrap());
        assert!(ImperfectionParams::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn phase_shifter_cases() {
        assert!(max_abs_diff(phase_shifter(0.0, None).matrix(), &CMatrix::identity(2, 2)) < 1e-16);
        assert!((phase_shifter(PI, None).matrix()[(0, 0)] + ONE).norm() < 1e-15);
        let p = phase_shifter(PI / 3.0, Some(0.05));
        assert!((p.matrix()[(0, 0)].arg() - (PI / 3.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn mzi_reproduces_closed_form() {
        assert!(mzi_self_test(7, 8) < 1e-12);
        let out = mzi_block(&t21(), None).unwrap().apply(&[ONE, ZERO]);
        let want0 = (I - ONE) * 0.5 * cis(PI / 3.0);
        let want1 = I * (I + ONE) * 0.5 * cis(PI / 3.0);
        assert!((out[0] - want0).norm() < 1e-15);
        assert!((out[1] - want1).norm() < 1e-15);
    }

    #[test]
    fn mzi_is_phase_times_block() {
        for p in BlockParams::fourier_network() {
            let m = mzi_block(&p, None).unwrap();
            let scaled = ideal_block_matrix(&p) * (I * cis(p.omega));
            assert!(max_abs_diff(m.matrix(), &scaled) < 1e-12);
            let v = variable_beam_splitter(&p, None).unwrap();
            assert!(max_abs_diff(v.matrix(), &ideal_block_matrix(&p)) < 1e-15);
        }
    }

    #[test]
    fn imperfect_block_matches_closed_form() {
        let imp = ImperfectionParams::new(0.07, 0.03, -0.02).unwrap();
        let p = t21();
        let m = mzi_block(&p, Some(&imp)).unwrap();
        for k in 0..16 {
            let chi = k as f64 * 0.4;
            let out = m.apply(&[C64::new(chi.cos(), 0.0), C64::new(chi.sin(), 0.0)]);
            let want = imperfect_block_output(chi, p.omega, p.phi, &imp);
            assert!((out[0] - want[0]).norm() < 1e-14);
            assert!((out[1] - want[1]).norm() < 1e-14);
        }
        let zero = ImperfectionParams::default();
        let a = imperfect_block_output(0.3, p.omega, p.phi, &zero);
        let b = ideal_block_output(0.3, p.omega, p.phi);
        assert!((a[0] - b[0]).norm() < 1e-15 && (a[1] - b[1]).norm() < 1e-15);
    }

    #[test]
    fn embedding() {
        let id2 = ModeTransform(CMatrix::identity(2, 2));
        let e = embed_block(&id2, (2, 1), 3).unwrap();
        assert_eq!(e.matrix(), &CMatrix::identity(3, 3));
        let p = t21();
        let e = embed_block(&variable_beam_splitter(&p, None).unwrap(), p.modes, 3).unwrap();
        let s = 0.5f64.sqrt();
        assert!((e.matrix()[(1, 1)] - cis(PI / 3.0) * s).norm() < 1e-15);
        assert!((e.matrix()[(1, 2)].re - s).abs() < 1e-15);
        assert!((e.matrix()[(2, 2)].re + s).abs() < 1e-15);
        assert_eq!(e.matrix()[(0, 0)], ONE);
        assert!(e.unitarity_deviation() < 1e-12);
        assert!(embed_block(&id2, (3, 0), 3).is_err());
    }

    #[test]
    fn abstract_product_row_zero() {
        let mut m = CMatrix::identity(3, 3);
        for p in BlockParams::fourier_network() {
            let b = ModeTransform(ideal_block_matrix(&p));
            m = embed_block(&b, p.modes, 3).unwrap().matrix() * m;
        }
        let want = cis(PI / 6.0) / 3f64.sqrt();
        for j in 0..3 {
            assert!((m[(0, j)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn fourier_network_equivalence() {
        let (m, report) = compose_fourier(None).unwrap();
        assert!(m.unitarity_deviation() < 1e-10);
        assert!(report.equivalent, "{report:?}");
        assert!(report.residual < 1e-10);
        assert_eq!(report.permutation, [0, 2, 1]);
        assert!(!report.is_identity_permutation());
        assert!(report.direct_residual > 0.1);
    }

    #[test]
    fn fourier_matrix_is_self_equivalent() {
        let r = check_equivalence(fourier_matrix().matrix()).unwrap();
        assert_eq!(r.permutation, [0, 1, 2]);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.phases, [0.0; 3]);
    }

    #[test]
    fn fidelity_is_one_without_imperfection() {
        let f = block_fidelity(&t21(), &ImperfectionParams::default()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_decreases_with_phase_error() {
        let mut prev = 1.0 + 1e-15;
        for k in 0..=20 {
            let d = PI / 8.0 * k as f64 / 20.0;
            let f = block_fidelity(&t21(), &ImperfectionParams::new(0.0, d, 0.0).unwrap()).unwrap();
            assert!(f <= prev + 1e-15);
            assert!((0.0..=1.0).contains(&f));
            prev = f;
        }
    }

    #[test]
    fn surface_layout() {
        let cells =
            fidelity_surface(&Span::new(0.0, 0.1, 3).unwrap(), &Span::new(0.0, 0.1, 2).unwrap(), &t21()).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!((cells[1].eps, cells[1].delta), (0.0, 0.1));
        assert!((cells[0].avg_fidelity - 1.0).abs() < 1e-12);
        let csv = surface_csv(&cells);
        assert!(csv.starts_with("eps,delta,avg_fidelity\n0,0,1\n"));
        let empty = Span { start: 0.0, stop: 1.0, points: 0 };
        assert!(fidelity_surface(&empty, &Span::point(0.0), &t21()).is_err());
    }
}
