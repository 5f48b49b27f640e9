//! Density-matrix propagation through a [`Schedule`].
//!
//! The Hamiltonian is constant on every segment, so each segment contributes
//! one exact propagator. Block propagators are built once and reused across
//! repetitions.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, DensityMatrix, LinalgError, Operator};
use crate::sequence::{Schedule, ScheduleError, Segment};
use crate::spin::{DnpParams, DriveSample, ErrorModel, PairOperators};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("no transfer maximum found within {cap} repetitions")]
    NoMaximumFound { cap: usize },
    #[error("initial state must be 4x4 (got {0}x{0})")]
    StateDimension(usize),
}

/// Observables sampled at every segment boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub sz: Vec<f64>,
    pub iz: Vec<f64>,
    pub final_state: DensityMatrix,
    /// Signed 2⟨Ŝz⟩ at the end of the schedule.
    pub transferred_polarization: f64,
}

impl Trajectory {
    pub fn transferred_polarization_abs(&self) -> f64 {
        self.transferred_polarization.abs()
    }
}

/// |↑⟩⟨↑| on I, maximally mixed on S.
pub fn initial_state() -> DensityMatrix {
    let up = DensityMatrix::pure(&[linalg::ONE, linalg::ZERO]).unwrap();
    DensityMatrix::product(&up, &DensityMatrix::maximally_mixed(2))
}

/// Segment-to-propagator engine for one parameter set and error model.
#[derive(Debug, Clone)]
pub struct Propagator {
    ops: PairOperators,
    params: DnpParams,
    errors: ErrorModel,
    /// Sub-steps used for linearly ramped segments (each at its midpoint).
    pub ramp_substeps: usize,
}

impl Propagator {
    pub fn new(params: DnpParams, errors: ErrorModel) -> Self {
        Self { ops: PairOperators::new(), params, errors, ramp_substeps: 1 }
    }

    pub fn operators(&self) -> &PairOperators {
        &self.ops
    }

    pub fn hamiltonian(&self, drive: &DriveSample) -> Operator {
        self.ops.hamiltonian(&self.params, drive, &self.errors)
    }

    pub fn segment(&self, seg: &Segment) -> Result<ComplexMatrix, LinalgError> {
        if !seg.is_ramp() || self.ramp_substeps <= 1 {
            let h = self.hamiltonian(&DriveSample::new(seg.mean_amplitude(), seg.phase));
            return linalg::propagator(&h, seg.duration);
        }
        let n = self.ramp_substeps;
        let dt = seg.duration / n as f64;
        let mut u = ComplexMatrix::identity(4).into_unitary(&linalg::Tolerances::DEFAULT)?;
        for k in 0..n {
            let x = (k as f64 + 0.5) / n as f64;
            let amp = seg.amp_start + x * (seg.amp_end - seg.amp_start);
            let step = linalg::propagator(&self.hamiltonian(&DriveSample::new(amp, seg.phase)), dt)?;
            u = step.matmul(&u);
        }
        Ok(u)
    }

    /// Product of the segment propagators, first segment acting first.
    pub fn sequence(&self, segs: &[Segment]) -> Result<ComplexMatrix, LinalgError> {
        let mut u = ComplexMatrix::identity(4).into_unitary(&linalg::Tolerances::DEFAULT)?;
        for s in segs {
            u = self.segment(s)?.matmul(&u);
        }
        Ok(u)
    }

    /// Prelude, block and postlude propagators.
    pub fn sections(&self, sch: &Schedule) -> Result<Sections, LinalgError> {
        Ok(Sections {
            prelude: self.sequence(&sch.prelude)?,
            block: self.sequence(&sch.block)?,
            postlude: self.sequence(&sch.postlude)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Sections {
    pub prelude: ComplexMatrix,
    pub block: ComplexMatrix,
    pub postlude: ComplexMatrix,
}

impl Sections {
    pub fn total(&self, n_reps: usize) -> ComplexMatrix {
        self.postlude.matmul(&self.block.powi(n_reps)).matmul(&self.prelude)
    }
}

fn check_state(rho0: &DensityMatrix) -> Result<(), SimError> {
    if rho0.dim() != 4 {
        return Err(SimError::StateDimension(rho0.dim()));
    }
    Ok(())
}

/// Runs the whole schedule, recording ⟨Ŝz⟩ and ⟨Îz⟩ at t = 0 and after every
/// segment of non-zero length.
pub fn simulate(sch: &Schedule, p: &DnpParams, e: &ErrorModel, rho0: &DensityMatrix) -> Result<Trajectory, SimError> {
    check_state(rho0)?;
    sch.validate()?;
    let engine = Propagator::new(*p, *e);
    let ops = engine.operators();
    let cache = |segs: &[Segment]| -> Result<Vec<ComplexMatrix>, LinalgError> {
        segs.iter().map(|s| engine.segment(s)).collect()
    };
    let pre = cache(&sch.prelude)?;
    let blk = cache(&sch.block)?;
    let post = cache(&sch.postlude)?;

    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut sz = Vec::new();
    let mut iz = Vec::new();
    let mut record = |rho: &DensityMatrix, t: f64| -> Result<(), LinalgError> {
        times.push(t);
        sz.push(linalg::expectation(rho, &ops.sz)?);
        iz.push(linalg::expectation(rho, &ops.iz)?);
        Ok(())
    };
    record(&rho, t)?;

    let order = sch
        .prelude
        .iter()
        .zip(&pre)
        .chain((0..sch.n_reps).flat_map(|_| sch.block.iter().zip(&blk)))
        .chain(sch.postlude.iter().zip(&post));
    for (seg, u) in order {
        if seg.duration == 0.0 {
            continue;
        }
        rho = linalg::evolve(&rho, u)?;
        t += seg.duration;
        record(&rho, t)?;
    }
    let final_sz = *sz.last().unwrap();
    Ok(Trajectory { times, sz, iz, final_state: rho, transferred_polarization: 2.0 * final_sz })
}

/// Signed 2⟨Ŝz⟩ after the full schedule, without recording a trajectory.
pub fn final_polarization(sch: &Schedule, p: &DnpParams, e: &ErrorModel) -> Result<f64, SimError> {
    let engine = Propagator::new(*p, *e);
    let u = engine.sections(sch)?.total(sch.n_reps);
    let rho = linalg::evolve(&initial_state(), &u)?;
    Ok(2.0 * linalg::expectation(&rho, &engine.operators().sz)?)
}

/// Default repetition cap: 10·ω_I/A⊥, rounded up.
pub fn default_repetition_cap(p: &DnpParams) -> usize {
    if p.a_perp == 0.0 {
        return 1000;
    }
    ((10.0 * p.omega_i / p.a_perp.abs()).ceil() as usize).max(2)
}

/// Error-free polarization after each of 0..=cap repetitions, with the
/// postlude applied before every sample.
pub fn repetition_series(sch: &Schedule, p: &DnpParams, cap: usize) -> Result<Vec<f64>, SimError> {
    let engine = Propagator::new(*p, ErrorModel::NONE);
    let sec = engine.sections(sch)?;
    let sz = &engine.operators().sz;
    let mut rho = linalg::evolve(&initial_state(), &sec.prelude)?;
    let mut out = Vec::with_capacity(cap + 1);
    for n in 0..=cap {
        if n > 0 {
            rho = linalg::evolve(&rho, &sec.block)?;
        }
        let measured = linalg::evolve(&rho, &sec.postlude)?;
        out.push(2.0 * linalg::expectation(&measured, sz)?);
    }
    Ok(out)
}

/// Index of the first sample strictly above its left neighbour and not below
/// its right neighbour.
pub fn first_local_maximum(values: &[f64]) -> Option<usize> {
    (1..values.len().saturating_sub(1)).find(|&n| values[n] > values[n - 1] && values[n] >= values[n + 1])
}

/// Repetition count at the first maximum of the transferred polarization.
/// Non-repeating schemes return 1.
pub fn select_repetitions(sch: &Schedule, p: &DnpParams, cap: Option<usize>) -> Result<usize, SimError> {
    if !sch.scheme.repeats() {
        return Ok(1);
    }
    let cap = cap.unwrap_or_else(|| default_repetition_cap(p));
    let series = repetition_series(sch, p, cap + 1)?;
    match first_local_maximum(&series) {
        Some(n) if n <= cap => Ok(n),
        _ => Err(SimError::NoMaximumFound { cap }),
    }
}

/// The schedule with its repetition count set by [`select_repetitions`].
pub fn with_selected_repetitions(sch: Schedule, p: &DnpParams, cap: Option<usize>) -> Result<Schedule, SimError> {
    let n = select_repetitions(&sch, p, cap)?;
    Ok(sch.with_reps(n))
}

/// Total duration, prelude and postlude included, at the selected N.
pub fn transfer_time(sch: &Schedule, p: &DnpParams) -> Result<f64, SimError> {
    let n = select_repetitions(sch, p, None)?;
    Ok(sch.prelude_duration() + n as f64 * sch.block_duration() + sch.postlude_duration())
}
