//! Spin operators, the driven two-spin (I ⊗ S) Hamiltonian, the three-spin
//! hydrogen-pair Hamiltonian, and the singlet–triplet pseudo-spin mapping that
//! relates the two.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * All frequencies are angular. Dimensionless runs measure frequencies in
//!   units of the coupling `A⊥` and time in units of `1/A⊥`.
//! * Single-spin basis is `{|↑⟩, |↓⟩}` with `Ŝz|↑⟩ = +½|↑⟩`.
//! * The two-spin simulation basis is `I ⊗ S` (spin I is the left factor).
//! * The three-spin basis is `I¹ ⊗ I² ⊗ S`.
//! * The transformed hydrogen basis is ordered `{|S₀⟩, |T₀⟩, |T₊⟩, |T₋⟩}`; the
//!   pseudo-spin I has `|T₀⟩` as its up state and `|S₀⟩` as its down state.
//! * A drive of amplitude Ω and phase φ contributes `Ω (cos φ Ŝx + sin φ Ŝy)`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
// Float supplies libm-backed math on f64 under no_std.
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, kron, ComplexMatrix, DensityMatrix, LinalgError, Operator, Tolerances, ONE, ZERO};

/// Ratio by which the larger energy scale must exceed the smaller one before
/// the scale-hierarchy checks stop warning.
pub const HIERARCHY_RATIO: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("spin index {index} out of range for {n_spins} spins (1..=3 supported)")]
    SpinIndex { index: usize, n_spins: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Non-fatal findings about a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Advisory {
    /// `ω_I ≥ 4·A⊥` does not hold.
    WeakScaleHierarchy { omega_i: f64, a_perp: f64 },
    /// `|J| ≥ 4·|J¹ − J²|` does not hold.
    OutsideNearEquivalence { j: f64, j_diff: f64 },
    /// The coupling vanishes, so no polarization can be transferred.
    NoCoupling,
    /// Pulsed schemes are only characterized for `Ω ≥ ω_I`.
    DriveBelowLarmor { omega_rabi: f64, omega_i: f64 },
}

/// Parameters of the electron–nucleus (or pseudo-spin–heteronucleus) pair in the
/// frame rotating with spin S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnpParams {
    pub omega_i: f64,
    pub a_perp: f64,
    /// Carried as metadata; the rotating-frame Hamiltonian does not use it.
    #[serde(default)]
    pub omega_s: f64,
}

impl DnpParams {
    pub fn new(omega_i: f64, a_perp: f64) -> Self {
        Self { omega_i, a_perp, omega_s: 0.0 }
    }

    pub fn validate(&self) -> Result<Vec<Advisory>, ModelError> {
        finite("omega_i", self.omega_i)?;
        finite("a_perp", self.a_perp)?;
        finite("omega_s", self.omega_s)?;
        let mut adv = Vec::new();
        if self.a_perp == 0.0 {
            adv.push(Advisory::NoCoupling);
        } else if self.omega_i.abs() < HIERARCHY_RATIO * self.a_perp.abs() {
            adv.push(Advisory::WeakScaleHierarchy { omega_i: self.omega_i, a_perp: self.a_perp });
        }
        Ok(adv)
    }
}

/// Lab-frame parameters of two hydrogens and one heteronucleus S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhipParams {
    pub omega_i0: f64,
    pub omega_s: f64,
    pub j: f64,
    pub j1: f64,
    pub j2: f64,
}

impl PhipParams {
    pub fn validate(&self) -> Result<Vec<Advisory>, ModelError> {
        for (name, v) in [("omega_i0", self.omega_i0), ("omega_s", self.omega_s), ("j", self.j), ("j1", self.j1), ("j2", self.j2)] {
            finite(name, v)?;
        }
        if self.j == 0.0 {
            return Err(ModelError::InvalidParameter { name: "j", value: self.j });
        }
        let mut adv = Vec::new();
        let diff = self.j1 - self.j2;
        if diff == 0.0 {
            adv.push(Advisory::NoCoupling);
        } else if self.j.abs() < HIERARCHY_RATIO * diff.abs() {
            adv.push(Advisory::OutsideNearEquivalence { j: self.j, j_diff: diff });
        }
        Ok(adv)
    }
}

fn finite(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSample {
    pub amplitude: f64,
    pub phase: f64,
}

impl DriveSample {
    pub const OFF: DriveSample = DriveSample { amplitude: 0.0, phase: 0.0 };

    pub fn new(amplitude: f64, phase: f64) -> Self {
        Self { amplitude, phase }
    }
}

/// Drive imperfections: a resonance offset `Δ Ŝz` and a relative Rabi-frequency
/// error that scales every drive amplitude by `1 + rabi_rel`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorModel {
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub rabi_rel: f64,
}

impl ErrorModel {
    pub const NONE: ErrorModel = ErrorModel { delta: 0.0, rabi_rel: 0.0 };

    pub fn new(delta: f64, rabi_rel: f64) -> Self {
        Self { delta, rabi_rel }
    }
}

/// (Ŝx, Ŝy, Ŝz) = σ/2 for a single spin-½.
pub fn spin_half() -> [Operator; 3] {
    let h = 0.5;
    let tol = Tolerances::DEFAULT;
    let x = ComplexMatrix::from_real_rows(&[0.0, h, h, 0.0]).unwrap().into_hermitian(&tol).unwrap();
    let y = ComplexMatrix::from_rows(vec![ZERO, Complex64::new(0.0, -h), Complex64::new(0.0, h), ZERO])
        .unwrap()
        .into_hermitian(&tol)
        .unwrap();
    let z = ComplexMatrix::from_real_diag(&[h, -h]);
    [x, y, z]
}

/// Spin-½ components of spin `index` (1-based) in an `n_spins` register,
/// embedded with identities on the other factors.
pub fn spin_ops(n_spins: usize, index: usize) -> Result<[Operator; 3], ModelError> {
    if n_spins == 0 || n_spins > 3 || index == 0 || index > n_spins {
        return Err(ModelError::SpinIndex { index, n_spins });
    }
    let left = ComplexMatrix::identity(1 << (index - 1));
    let right = ComplexMatrix::identity(1 << (n_spins - index));
    Ok(spin_half().map(|op| kron(&kron(&left, &op), &right)))
}

/// Cached operators of the two-spin `I ⊗ S` register.
#[derive(Debug, Clone)]
pub struct PairOperators {
    pub ix: Operator,
    pub iy: Operator,
    pub iz: Operator,
    pub sx: Operator,
    pub sy: Operator,
    pub sz: Operator,
    /// Ŝz Îx, the coupling term.
    pub sz_ix: Operator,
}

impl PairOperators {
    pub fn new() -> Self {
        let [ix, iy, iz] = spin_ops(2, 1).unwrap();
        let [sx, sy, sz] = spin_ops(2, 2).unwrap();
        let sz_ix = sz.matmul(&ix).into_hermitian(&Tolerances::DEFAULT).unwrap();
        Self { ix, iy, iz, sx, sy, sz, sz_ix }
    }

    /// `ω_I Îz + A⊥ Ŝz Îx + (1 + ε) Ω (cos φ Ŝx + sin φ Ŝy) + Δ Ŝz`
    pub fn hamiltonian(&self, p: &DnpParams, d: &DriveSample, e: &ErrorModel) -> Operator {
        let amp = (1.0 + e.rabi_rel) * d.amplitude;
        let (s, c) = d.phase.sin_cos();
        let terms: [(f64, &Operator); 5] = [
            (p.omega_i, &self.iz),
            (p.a_perp, &self.sz_ix),
            (amp * c, &self.sx),
            (amp * s, &self.sy),
            (e.delta, &self.sz),
        ];
        weighted_sum(&terms)
    }
}

impl Default for PairOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Σ cₖ Oₖ for Hermitian Oₖ and real cₖ; the result keeps the Hermitian flag.
pub fn weighted_sum(terms: &[(f64, &Operator)]) -> Operator {
    let dim = terms[0].1.dim();
    let mut acc = ComplexMatrix::zeros(dim);
    for (c, op) in terms {
        if *c != 0.0 {
            acc = &acc + &op.scale(*c);
        }
    }
    acc
}

/// The rotating-frame Hamiltonian of the driven pair on `I ⊗ S`.
pub fn dnp_hamiltonian(p: &DnpParams, d: &DriveSample, e: &ErrorModel) -> Operator {
    PairOperators::new().hamiltonian(p, d, e)
}

/// Lab-frame Hamiltonian of two hydrogens and one heteronucleus on `I¹ ⊗ I² ⊗ S`:
/// `ω_I⁰(Î¹z + Î²z) + ω_S Ŝz + J Î¹·Î² + J¹ Ŝz Î¹z + J² Ŝz Î²z`.
pub fn phip_hamiltonian(p: &PhipParams) -> Operator {
    let i1 = spin_ops(3, 1).unwrap();
    let i2 = spin_ops(3, 2).unwrap();
    let s = spin_ops(3, 3).unwrap();
    let dot = hydrogen_dot(&i1, &i2);
    let s_i1 = s[2].matmul(&i1[2]).into_hermitian(&Tolerances::DEFAULT).unwrap();
    let s_i2 = s[2].matmul(&i2[2]).into_hermitian(&Tolerances::DEFAULT).unwrap();
    weighted_sum(&[
        (p.omega_i0, &i1[2]),
        (p.omega_i0, &i2[2]),
        (p.omega_s, &s[2]),
        (p.j, &dot),
        (p.j1, &s_i1),
        (p.j2, &s_i2),
    ])
}

fn hydrogen_dot(i1: &[Operator; 3], i2: &[Operator; 3]) -> Operator {
    let mut acc = ComplexMatrix::zeros(i1[0].dim());
    for k in 0..3 {
        acc = &acc + &i1[k].matmul(&i2[k]);
    }
    acc.into_hermitian(&Tolerances::DEFAULT).unwrap()
}

/// 4×4 change of basis on the hydrogen pair: row k is ⟨new_k|, columns are the
/// product states |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩.
fn hydrogen_singlet_triplet() -> ComplexMatrix {
    let r = FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let rows = [
        0.0, r, -r, 0.0, // S0
        0.0, r,  r, 0.0, // T0
        1.0, 0.0, 0.0, 0.0, // T+
        0.0, 0.0, 0.0, 1.0, // T-
    ];
    ComplexMatrix::from_real_rows(&rows).unwrap().into_unitary(&Tolerances::DEFAULT).unwrap()
}

/// Unitary taking `I¹ ⊗ I² ⊗ S` coordinates to `{S₀, T₀, T₊, T₋} ⊗ S`
/// coordinates: an operator O becomes `U O U†`.
pub fn singlet_triplet_unitary() -> Operator {
    kron(&hydrogen_singlet_triplet(), &ComplexMatrix::identity(2))
}

/// Operators of the pseudo-spin picture, all 8×8 in the transformed basis
/// `{S₀, T₀, T₊, T₋} ⊗ S`.
#[derive(Debug, Clone)]
pub struct PseudoSpinOperators {
    pub iz: Operator,
    pub ix: Operator,
    pub iy: Operator,
    pub tilde_iz: Operator,
    /// Projector onto {T₀, S₀}.
    pub p_i: Operator,
    /// Projector onto {T₊, T₋}.
    pub p_tilde: Operator,
    pub sx: Operator,
    pub sy: Operator,
    pub sz: Operator,
}

impl PseudoSpinOperators {
    pub fn new() -> Self {
        let id2 = ComplexMatrix::identity(2);
        let h = 0.5;
        let lift = |m: ComplexMatrix| kron(&m, &id2);
        let iz = lift(ComplexMatrix::from_real_diag(&[-h, h, 0.0, 0.0]));
        let mut ix_h = ComplexMatrix::zeros(4);
        ix_h[(0, 1)] = Complex64::new(h, 0.0);
        ix_h[(1, 0)] = Complex64::new(h, 0.0);
        let mut iy_h = ComplexMatrix::zeros(4);
        // up = T0 (index 1), down = S0 (index 0): Îy = (−i|T₀⟩⟨S₀| + i|S₀⟩⟨T₀|)/2
        iy_h[(1, 0)] = Complex64::new(0.0, -h);
        iy_h[(0, 1)] = Complex64::new(0.0, h);
        let tol = Tolerances::DEFAULT;
        let ix = lift(ix_h.into_hermitian(&tol).unwrap());
        let iy = lift(iy_h.into_hermitian(&tol).unwrap());
        let tilde_iz = lift(ComplexMatrix::from_real_diag(&[0.0, 0.0, h, -h]));
        let p_i = lift(ComplexMatrix::from_real_diag(&[1.0, 1.0, 0.0, 0.0]));
        let p_tilde = lift(ComplexMatrix::from_real_diag(&[0.0, 0.0, 1.0, 1.0]));
        let [sx, sy, sz] = spin_half().map(|s| kron(&ComplexMatrix::identity(4), &s));
        Self { iz, ix, iy, tilde_iz, p_i, p_tilde, sx, sy, sz }
    }

    /// Terms of the transformed Hamiltonian that act inside the {T₀, S₀} ⊗ S
    /// block: `J Îz + ω_S Ŝz + (J¹ − J²) Îx Ŝz`.
    pub fn interacting_part(&self, p: &PhipParams) -> Operator {
        let ix_sz = self.ix.matmul(&self.sz).into_hermitian(&Tolerances::DEFAULT).unwrap();
        weighted_sum(&[(p.j, &self.iz), (p.omega_s, &self.sz), (p.j1 - p.j2, &ix_sz)])
    }

    /// The remaining terms: `2ω_I⁰ Ĩz + (J/4) P̂_Ĩ − (J/4) P̂_I + (J¹ + J²) Ĩz Ŝz`.
    pub fn spectator_part(&self, p: &PhipParams) -> Operator {
        let tz_sz = self.tilde_iz.matmul(&self.sz).into_hermitian(&Tolerances::DEFAULT).unwrap();
        weighted_sum(&[
            (2.0 * p.omega_i0, &self.tilde_iz),
            (0.25 * p.j, &self.p_tilde),
            (-0.25 * p.j, &self.p_i),
            (p.j1 + p.j2, &tz_sz),
        ])
    }
}

impl Default for PseudoSpinOperators {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub tolerance: f64,
    pub params: PhipParams,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-13;

/// Reference parameters for [`pseudospin_identities_report`].
pub const REFERENCE_PHIP: PhipParams = PhipParams { omega_i0: 1000.0, omega_s: 250.0, j: 24.0, j1: 2.0, j2: 1.0 };

/// Verifies the pseudo-spin operator identities and the block structure of the
/// transformed Hamiltonian at [`REFERENCE_PHIP`].
pub fn pseudospin_identities_report() -> IdentityReport {
    pseudospin_identities_report_for(&REFERENCE_PHIP)
}

/// As [`pseudospin_identities_report`], with the Hamiltonian checks evaluated at
/// `p`. Hamiltonian residuals are relative to the largest parameter magnitude.
pub fn pseudospin_identities_report_for(p: &PhipParams) -> IdentityReport {
    let u = singlet_triplet_unitary();
    let ud = u.adjoint();
    let to_pseudo = |o: &Operator| u.matmul(o).matmul(&ud);
    let ps = PseudoSpinOperators::new();
    let i1 = spin_ops(3, 1).unwrap();
    let i2 = spin_ops(3, 2).unwrap();
    let dot = hydrogen_dot(&i1, &i2);
    let tol = IDENTITY_TOLERANCE;

    let mut checks = Vec::new();
    let mut push = |name: &str, residual: f64| {
        checks.push(IdentityCheck { name: name.into(), residual, passed: residual <= tol });
    };

    push("I1z = tilde_Iz + Ix", to_pseudo(&i1[2]).max_abs_diff(&(&ps.tilde_iz + &ps.ix)));
    push("I2z = tilde_Iz - Ix", to_pseudo(&i2[2]).max_abs_diff(&(&ps.tilde_iz - &ps.ix)));
    let dot_rhs = &(&ps.p_tilde.scale(0.25) - &ps.p_i.scale(0.25)) + &ps.iz;
    push("I1.I2 = P_tilde/4 - P_I/4 + Iz", to_pseudo(&dot).max_abs_diff(&dot_rhs));
    push("tilde_Iz^2 = P_tilde/4", ps.tilde_iz.matmul(&ps.tilde_iz).max_abs_diff(&ps.p_tilde.scale(0.25)));
    push("Iz^2 = P_I/4", ps.iz.matmul(&ps.iz).max_abs_diff(&ps.p_i.scale(0.25)));
    push("P_I + P_tilde = 1", (&ps.p_i + &ps.p_tilde).max_abs_diff(&ComplexMatrix::identity(8)));

    let scale = [p.omega_i0, p.omega_s, p.j, p.j1, p.j2].iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let h_pseudo = to_pseudo(&phip_hamiltonian(p));
    let split = &ps.interacting_part(p) + &ps.spectator_part(p);
    push("U H U^dag = interacting + spectator", h_pseudo.max_abs_diff(&split) / scale);

    let ix_sz = ps.ix.matmul(&ps.sz);
    let tz_sz = ps.tilde_iz.matmul(&ps.sz);
    let interacting = [&ps.iz, &ps.sz, &ix_sz];
    let spectator = [&ps.tilde_iz, &ps.p_tilde, &ps.p_i, &tz_sz];
    let worst = spectator
        .iter()
        .flat_map(|a| interacting.iter().map(move |b| a.commutator(b).max_abs()))
        .fold(0.0, f64::max);
    push("[spectator terms, interacting terms] = 0", worst);

    IdentityReport { tolerance: tol, params: *p, checks }
}

/// Pseudo-spin correspondence: `ω_I := J`, `A⊥ := J¹ − J²`, `ω_S := ω_S`.
///
/// The sign of `J¹ − J²` is kept; it only flips the sign of Îx in the coupling.
pub fn map_phip_to_dnp(p: &PhipParams) -> Result<(DnpParams, Vec<Advisory>), ModelError> {
    let adv = p.validate()?;
    Ok((DnpParams { omega_i: p.j, a_perp: p.j1 - p.j2, omega_s: p.omega_s }, adv))
}

/// Outcome of propagating the same drive in the 8-level and 4-level pictures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub boundaries: usize,
    pub max_sz_deviation: f64,
    pub max_iz_deviation: f64,
    pub max_leakage: f64,
}

/// Embeds a state of the pseudo-spin pair (`I ⊗ S`, 4×4) into the three-spin
/// product basis.
pub fn embed_pseudospin_state(rho: &DensityMatrix) -> Result<DensityMatrix, ModelError> {
    if rho.dim() != 4 {
        return Err(LinalgError::DimensionMismatch { expected: 4, found: rho.dim() }.into());
    }
    // pseudo up (index 0) -> T0 (1), pseudo down (index 1) -> S0 (0)
    let hydrogen_index = [1usize, 0usize];
    let mut iso = ComplexMatrix::zeros(8);
    for a in 0..2 {
        for s in 0..2 {
            iso[(hydrogen_index[a] * 2 + s, a * 2 + s)] = ONE;
        }
    }
    let m = rho.matrix();
    let mut padded = ComplexMatrix::zeros(8);
    for r in 0..4 {
        for c in 0..4 {
            padded[(r, c)] = m[(r, c)];
        }
    }
    let in_pseudo = iso.matmul(&padded).matmul(&iso.adjoint());
    let u = singlet_triplet_unitary();
    let product = u.adjoint().matmul(&in_pseudo).matmul(&u);
    Ok(DensityMatrix::new(product)?)
}

/// Propagates `rho0` (a pseudo-spin pair state) through the piecewise-constant
/// `drive` in both pictures and compares ⟨Ŝz⟩, ⟨Îz⟩ and the population that
/// leaks out of the {T₀, S₀} block.
pub fn equivalence_check(
    p: &PhipParams,
    rho0: &DensityMatrix,
    drive: &[(DriveSample, f64)],
) -> Result<EquivalenceReport, ModelError> {
    let (dnp, _) = map_phip_to_dnp(p)?;
    let pair = PairOperators::new();
    let h_static8 = phip_hamiltonian(p);
    let s8 = spin_ops(3, 3)?;
    let u = singlet_triplet_unitary();
    let ud = u.adjoint();
    let ps = PseudoSpinOperators::new();
    let back = |o: &Operator| ud.matmul(o).matmul(&u).into_hermitian(&Tolerances::DEFAULT);
    let iz8 = back(&ps.iz)?;
    let leak8 = back(&ps.p_tilde)?;

    let mut rho8 = embed_pseudospin_state(rho0)?;
    let mut rho4 = rho0.clone();
    let mut report = EquivalenceReport { boundaries: 0, max_sz_deviation: 0.0, max_iz_deviation: 0.0, max_leakage: 0.0 };
    for (d, dt) in drive {
        let (sn, cs) = d.phase.sin_cos();
        let drive8 = weighted_sum(&[(d.amplitude * cs, &s8[0]), (d.amplitude * sn, &s8[1])]);
        let h8 = &h_static8 + &drive8;
        let h4 = &pair.hamiltonian(&dnp, d, &ErrorModel::NONE) + &pair.sz.scale(p.omega_s);
        rho8 = linalg::evolve(&rho8, &linalg::propagator(&h8, *dt)?)?;
        rho4 = linalg::evolve(&rho4, &linalg::propagator(&h4, *dt)?)?;
        let sz_dev = (linalg::expectation(&rho8, &s8[2])? - linalg::expectation(&rho4, &pair.sz)?).abs();
        let iz_dev = (linalg::expectation(&rho8, &iz8)? - linalg::expectation(&rho4, &pair.iz)?).abs();
        let leak = linalg::expectation(&rho8, &leak8)?.abs();
        report.boundaries += 1;
        report.max_sz_deviation = report.max_sz_deviation.max(sz_dev);
        report.max_iz_deviation = report.max_iz_deviation.max(iz_dev);
        report.max_leakage = report.max_leakage.max(leak);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn single_spin_sz() {
        let [_, _, z] = spin_ops(1, 1).unwrap();
        assert_eq!(z.max_abs_diff(&ComplexMatrix::from_real_diag(&[0.5, -0.5])), 0.0);
    }

    #[test]
    fn disjoint_supports_commute_exactly() {
        let [_, _, iz] = spin_ops(2, 1).unwrap();
        let [_, _, sz] = spin_ops(2, 2).unwrap();
        assert_eq!(iz.commutator(&sz).max_abs(), 0.0);
        let expected = kron(&ComplexMatrix::from_real_diag(&[0.5, -0.5]), &ComplexMatrix::identity(2));
        assert_eq!(iz.max_abs_diff(&expected), 0.0);
    }

    #[test]
    fn spin_algebra_on_three_spins() {
        for k in 1..=3 {
            let [x, y, z] = spin_ops(3, k).unwrap();
            let lhs = x.commutator(&y);
            assert!(lhs.max_abs_diff(&z.scale_complex(linalg::I)) < 1e-14);
        }
    }

    #[test]
    fn spin_index_out_of_range() {
        assert!(matches!(spin_ops(2, 3), Err(ModelError::SpinIndex { .. })));
        assert!(matches!(spin_ops(4, 1), Err(ModelError::SpinIndex { .. })));
        assert!(matches!(spin_ops(2, 0), Err(ModelError::SpinIndex { .. })));
    }

    #[test]
    fn undriven_pair_hamiltonian_entries() {
        let (w, a) = (24.0, 1.0);
        let h = dnp_hamiltonian(&DnpParams::new(w, a), &DriveSample::OFF, &ErrorModel::NONE);
        #[rustfmt::skip]
        let expected = ComplexMatrix::from_real_rows(&[
            w / 2.0, 0.0,      a / 4.0,  0.0,
            0.0,     w / 2.0,  0.0,     -a / 4.0,
            a / 4.0, 0.0,     -w / 2.0,  0.0,
            0.0,    -a / 4.0,  0.0,     -w / 2.0,
        ]).unwrap();
        assert_eq!(h.max_abs_diff(&expected), 0.0);
        assert!(h.is_hermitian());
    }

    #[test]
    fn drive_phase_quarter_turn_is_sy() {
        let p = DnpParams::new(0.0, 0.0);
        let h = dnp_hamiltonian(&p, &DriveSample::new(3.0, FRAC_PI_2), &ErrorModel::NONE);
        let [_, sy, _] = spin_ops(2, 2).unwrap();
        assert!(h.max_abs_diff(&sy.scale(3.0)) < 1e-15);
    }

    #[test]
    fn rabi_error_scales_drive_entry() {
        let p = DnpParams::new(24.0, 1.0);
        let h = dnp_hamiltonian(&p, &DriveSample::new(100.0, 0.0), &ErrorModel::new(0.0, 0.1));
        assert!((h[(0, 1)].re - 110.0 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn uncoupled_three_spin_spectrum_is_zeeman() {
        let p = PhipParams { omega_i0: 3.0, omega_s: 7.0, j: 0.0, j1: 0.0, j2: 0.0 };
        let h = phip_hamiltonian(&p);
        let mut want = Vec::new();
        for a in [0.5, -0.5] {
            for b in [0.5, -0.5] {
                for s in [0.5, -0.5] {
                    want.push(3.0 * (a + b) + 7.0 * s);
                }
            }
        }
        want.sort_by(f64::total_cmp);
        let got = linalg::eigh(&h).unwrap().values;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn hydrogen_dot_eigenvalues_in_singlet_triplet_basis() {
        let i1 = spin_ops(3, 1).unwrap();
        let i2 = spin_ops(3, 2).unwrap();
        let dot = hydrogen_dot(&i1, &i2);
        let u = singlet_triplet_unitary();
        let conj = u.matmul(&dot).matmul(&u.adjoint());
        let want = kron(&ComplexMatrix::from_real_diag(&[-0.75, 0.25, 0.25, 0.25]), &ComplexMatrix::identity(2));
        assert!(conj.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn singlet_triplet_unitary_columns() {
        let u = singlet_triplet_unitary();
        assert!(u.matmul(&u.adjoint()).max_abs_diff(&ComplexMatrix::identity(8)) < 1e-14);
        // |↑↓⟩ ⊗ |↑⟩ is product index 2.
        for row in 0..8 {
            let v = u[(row, 2)].re;
            match row {
                0 => assert!((v - FRAC_1_SQRT_2).abs() < 1e-15),
                2 => assert!((v - FRAC_1_SQRT_2).abs() < 1e-15),
                _ => assert_eq!(v, 0.0),
            }
        }
    }

    #[test]
    fn identity_report_passes() {
        let rep = pseudospin_identities_report();
        for c in &rep.checks {
            assert!(c.passed, "{} residual {:e}", c.name, c.residual);
        }
    }

    #[test]
    fn mapping_is_definitional() {
        let p = PhipParams { omega_i0: 1000.0, omega_s: 250.0, j: 24.0, j1: 2.0, j2: 1.0 };
        let (d, adv) = map_phip_to_dnp(&p).unwrap();
        assert_eq!((d.omega_i, d.a_perp, d.omega_s), (24.0, 1.0, 250.0));
        assert!(adv.is_empty());
        let degenerate = PhipParams { j1: 1.5, j2: 1.5, ..p };
        let (d, adv) = map_phip_to_dnp(&degenerate).unwrap();
        assert_eq!(d.a_perp, 0.0);
        assert_eq!(adv, vec![Advisory::NoCoupling]);
        assert!(map_phip_to_dnp(&PhipParams { j: 0.0, ..p }).is_err());
    }

    #[test]
    fn regime_advisories() {
        assert_eq!(
            DnpParams::new(2.0, 1.0).validate().unwrap(),
            vec![Advisory::WeakScaleHierarchy { omega_i: 2.0, a_perp: 1.0 }]
        );
        assert!(DnpParams::new(24.0, 1.0).validate().unwrap().is_empty());
        assert!(DnpParams::new(24.0, -1.0).validate().unwrap().is_empty());
        assert!(DnpParams::new(f64::NAN, 1.0).validate().is_err());
        let p = PhipParams { omega_i0: 1.0, omega_s: 1.0, j: 2.0, j1: 2.0, j2: 1.0 };
        assert!(matches!(p.validate().unwrap()[0], Advisory::OutsideNearEquivalence { .. }));
    }
}
