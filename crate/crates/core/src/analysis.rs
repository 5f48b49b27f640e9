//! Effective couplings: first-maximum timing, one-cycle average
//! Hamiltonians, and ADAPT sideband positions.

use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError, Operator};
use crate::propagate::{self, Propagator, SimError};
use crate::sequence::{Schedule, ScheduleError, Scheme, SchemeOptions, SchemeSpec};
use crate::spin::{DnpParams, ErrorModel, PairOperators};

/// Eigenphases of one cycle must stay below this for the principal log.
pub const BRANCH_LIMIT: f64 = 0.9 * core::f64::consts::PI;

/// Largest k tried when looking for U₀ᵏ ∝ 1.
pub const MAX_CYCLE_MULTIPLE: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("no transfer maximum found within {cap} steps")]
    NoMaximumFound { cap: usize },
    #[error("{0} has no repetition structure to time")]
    Unsupported(&'static str),
    #[error("the uncoupled block does not close within {0} repetitions")]
    OpenCycle(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMethod {
    FirstMaximum,
    CycleLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplingReport {
    pub scheme: Scheme,
    pub a_star_measured: f64,
    pub a_star_theory: Option<f64>,
    pub relative_deviation: Option<f64>,
    pub method: CouplingMethod,
    /// Interpolated repetition count (or pulses per train) at the maximum.
    pub steps_at_maximum: f64,
}

impl EffectiveCouplingReport {
    fn new(scheme: Scheme, measured: f64, a_perp: f64, method: CouplingMethod, steps: f64) -> Self {
        let theory = scheme.a_star_theory().map(|r| r * a_perp.abs());
        Self {
            scheme,
            a_star_measured: measured,
            a_star_theory: theory,
            relative_deviation: theory.map(|t| (measured - t) / t),
            method,
            steps_at_maximum: steps,
        }
    }

    pub fn ratio(&self, a_perp: f64) -> f64 {
        self.a_star_measured / a_perp.abs()
    }
}

/// Position of the first local maximum refined by a parabola through it and
/// its neighbours.
pub fn refined_first_maximum(values: &[f64]) -> Option<f64> {
    let n = propagate::first_local_maximum(values)?;
    let (a, b, c) = (values[n - 1], values[n], values[n + 1]);
    let curv = a - 2.0 * b + c;
    let shift = if curv < 0.0 { 0.5 * (a - c) / curv } else { 0.0 };
    Some(n as f64 + shift.clamp(-0.5, 0.5))
}

/// A* = 2π/T from the error-free first transfer maximum. Repeating schemes
/// scan the repetition count (T = N·block); plain S2hM scans the pulses per
/// train (T = one block).
pub fn estimate_a_star(spec: &SchemeSpec, p: &DnpParams) -> Result<EffectiveCouplingReport, AnalysisError> {
    match spec.scheme {
        Scheme::B1Sweep => Err(AnalysisError::Unsupported("b1_sweep")),
        Scheme::S2hmPlain => estimate_s2hm_plain(spec, p),
        scheme => {
            let sch = spec.build(p)?;
            let cap = 2 * propagate::default_repetition_cap(p);
            let series = propagate::repetition_series(&sch, p, cap)?;
            let n = refined_first_maximum(&series).ok_or(AnalysisError::NoMaximumFound { cap })?;
            let a = TAU / (n * sch.block_duration());
            Ok(EffectiveCouplingReport::new(scheme, a, p.a_perp, CouplingMethod::FirstMaximum, n))
        }
    }
}

fn estimate_s2hm_plain(spec: &SchemeSpec, p: &DnpParams) -> Result<EffectiveCouplingReport, AnalysisError> {
    let nominal = crate::sequence::s2hm_pulses_per_train(p)?;
    let cap = 2 * nominal + 8;
    let mut series = Vec::with_capacity(cap + 1);
    series.push(0.0);
    for n in 1..=cap {
        let s = SchemeSpec { options: SchemeOptions { pulses_per_train: Some(n), ..spec.options.clone() }, ..spec.clone() };
        series.push(propagate::final_polarization(&s.build(p)?, p, &ErrorModel::NONE)?);
    }
    let n = refined_first_maximum(&series).ok_or(AnalysisError::NoMaximumFound { cap })?;
    let tau = core::f64::consts::PI / p.omega_i;
    let a = TAU / ((2.0 * n + 0.5) * tau);
    Ok(EffectiveCouplingReport::new(Scheme::S2hmPlain, a, p.a_perp, CouplingMethod::FirstMaximum, n))
}

/// Average Hamiltonian of one closed cycle and its flip-flop content.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    /// Blocks per cycle: the smallest k with U₀ᵏ ∝ 1 for the uncoupled block.
    pub blocks_per_cycle: usize,
    pub period: f64,
    /// Effective Hamiltonian in the toggling frame of the drive.
    pub h_eff: Operator,
    /// c_ab in H_eff = Σ c_ab Îa Ŝb + …
    pub coupling_tensor: [[f64; 3]; 3],
    /// Singular values of the coupling tensor, descending.
    pub singular_values: [f64; 3],
    /// Mean of the two largest singular values; A*/2 for a pure flip-flop.
    pub flip_flop: f64,
}

impl CycleReport {
    pub fn a_star(&self) -> f64 {
        2.0 * self.flip_flop
    }
}

fn closes(u: &ComplexMatrix) -> bool {
    let n = u.dim();
    let c = u[(0, 0)];
    (0..n).all(|r| (0..n).all(|k| {
        let target = if r == k { c } else { linalg::ZERO };
        (u[(r, k)] - target).norm() < 1e-8
    }))
}

/// −i·log(U₀ᵏ† Uᵏ)/(kT), where U is the block propagator and U₀ the same
/// block with the coupling switched off.
pub fn cycle_effective_hamiltonian(sch: &Schedule, p: &DnpParams) -> Result<CycleReport, AnalysisError> {
    let coupled = Propagator::new(*p, ErrorModel::NONE).sequence(&sch.block)?;
    let bare = DnpParams { a_perp: 0.0, ..*p };
    let free = Propagator::new(bare, ErrorModel::NONE).sequence(&sch.block)?;
    let k = (1..=MAX_CYCLE_MULTIPLE)
        .find(|&k| closes(&free.powi(k)))
        .ok_or(AnalysisError::OpenCycle(MAX_CYCLE_MULTIPLE))?;
    let period = k as f64 * sch.block_duration();
    let toggled = free.powi(k).adjoint().matmul(&coupled.powi(k));
    let h_eff = linalg::unitary_log(&toggled, period, BRANCH_LIMIT)?;

    let ops = PairOperators::new();
    let i_ops = [&ops.ix, &ops.iy, &ops.iz];
    let s_ops = [&ops.sx, &ops.sy, &ops.sz];
    let mut c = [[0.0; 3]; 3];
    for (a, ia) in i_ops.iter().enumerate() {
        for (b, sb) in s_ops.iter().enumerate() {
            c[a][b] = 4.0 * h_eff.trace_product(&ia.matmul(sb)).re;
        }
    }
    let sv = singular_values3(&c)?;
    Ok(CycleReport {
        blocks_per_cycle: k,
        period,
        h_eff,
        coupling_tensor: c,
        singular_values: sv,
        flip_flop: 0.5 * (sv[0] + sv[1]),
    })
}

fn singular_values3(c: &[[f64; 3]; 3]) -> Result<[f64; 3], LinalgError> {
    let mut ctc = [0.0; 9];
    for r in 0..3 {
        for k in 0..3 {
            ctc[r * 3 + k] = (0..3).map(|m| c[m][r] * c[m][k]).sum();
        }
    }
    let m = ComplexMatrix::from_real_rows(&ctc)?.into_hermitian(&linalg::Tolerances::DEFAULT)?;
    let eig = linalg::eigh(&m)?;
    let mut sv = [0.0; 3];
    for (i, v) in eig.values.iter().rev().enumerate() {
        sv[i] = v.max(0.0).sqrt();
    }
    Ok(sv)
}

/// 1 − |Tr U_S|/2 for the driven spin alone over one block at detuning Δ.
/// Zero where the block rotation of S is trivial.
fn block_rotation_defect(sch: &Schedule, delta: f64) -> f64 {
    let [sx, sy, sz] = crate::spin::spin_half();
    let mut u = ComplexMatrix::identity(2);
    for seg in &sch.block {
        let amp = seg.mean_amplitude();
        let (sn, cs) = seg.phase.sin_cos();
        let h = crate::spin::weighted_sum(&[(amp * cs, &sx), (amp * sn, &sy), (delta, &sz)]);
        match linalg::propagator(&h, seg.duration) {
            Ok(step) => u = step.matmul(&u),
            Err(_) => return f64::NAN,
        }
    }
    1.0 - 0.5 * u.trace().re.abs()
}

/// Resonance offsets at which the ADAPT block returns the driven spin to
/// itself (U_S ∝ 1). With ω_I·T_block = 2π these are the detunings where the
/// block stays resonant with the I precession: Δ = 0 and sidebands out to
/// |Δ| ≈ 2Ω. Returns at most `k_max` sidebands per side, ascending.
/// Not every predicted sideband carries transfer; a sideband stays dark when
/// the effective coupling vanishes there.
pub fn adapt_sideband_positions(p: &DnpParams, spec: &SchemeSpec, k_max: usize) -> Vec<f64> {
    let spec = SchemeSpec { scheme: Scheme::AdaptTopdnp, ..spec.clone() };
    let Ok(sch) = spec.build(p) else { return Vec::new() };
    let span = 2.0 * spec.omega_rabi;
    let n = 4000;
    let step = span / n as f64;
    let f = |d: f64| block_rotation_defect(&sch, d);
    let mut right = Vec::new();
    let mut vals: Vec<f64> = (0..=n + 1).map(|k| f(k as f64 * step)).collect();
    vals[0] = 0.0;
    for k in 1..=n {
        if vals[k] <= vals[k - 1] && vals[k] <= vals[k + 1] && vals[k] < 1e-2 {
            let d = golden_min(&f, (k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
            if f(d) < 1e-8 {
                right.push(d);
            }
        }
    }
    right.truncate(k_max);
    let mut out: Vec<f64> = right.iter().rev().map(|d| -d).collect();
    out.push(0.0);
    out.extend(right);
    out
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
