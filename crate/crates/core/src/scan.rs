//! Robustness grids over resonance offset Δ and relative Rabi error.
//!
//! Points are independent. The caller supplies a [`PointMap`] that decides how
//! they are evaluated; results always come back in row-major order (Rabi
//! error outer, Δ inner), so the output does not depend on the strategy.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagate::{self, Propagator, SimError};
use crate::sequence::{Schedule, SchemeSpec};
use crate::spin::{DnpParams, ErrorModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("grid axis {0} must be non-empty and strictly increasing")]
    BadAxis(&'static str),
    #[error("error-free setup failed: {0}")]
    Setup(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanGrid {
    pub delta_over_omega: Vec<f64>,
    pub rabi_rel: Vec<f64>,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

impl ScanGrid {
    pub fn new(delta_over_omega: Vec<f64>, rabi_rel: Vec<f64>) -> Result<Self, ScanError> {
        let g = Self { delta_over_omega, rabi_rel };
        g.validate()?;
        Ok(g)
    }

    pub fn uniform(delta: (f64, f64), rabi: (f64, f64), n_delta: usize, n_rabi: usize) -> Result<Self, ScanError> {
        Self::new(linspace(delta.0, delta.1, n_delta), linspace(rabi.0, rabi.1, n_rabi))
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        let ok = |v: &[f64]| !v.is_empty() && v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0]);
        if !ok(&self.delta_over_omega) {
            return Err(ScanError::BadAxis("delta_over_omega"));
        }
        if !ok(&self.rabi_rel) {
            return Err(ScanError::BadAxis("rabi_rel"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.delta_over_omega.len() * self.rabi_rel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (Δ/Ω, Ω_error/Ω) of point `idx` in row-major order.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let nd = self.delta_over_omega.len();
        (self.delta_over_omega[idx % nd], self.rabi_rel[idx / nd])
    }
}

impl Default for ScanGrid {
    /// Δ/Ω ∈ [−0.5, 0.5], Ω_error/Ω ∈ [−0.3, 0.3], 41 × 41.
    fn default() -> Self {
        Self { delta_over_omega: linspace(-0.5, 0.5, 41), rabi_rel: linspace(-0.3, 0.3, 41) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub delta_over_omega: f64,
    pub rabi_rel: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMeta {
    pub scheme: SchemeSpec,
    pub params: DnpParams,
    pub n_reps: usize,
    pub total_duration: f64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: ScanGrid,
    /// Signed 2⟨Ŝz⟩, row-major; NaN where the point failed.
    pub values: Vec<f64>,
    pub failures: Vec<PointFailure>,
    pub meta: HeatmapMeta,
}

impl Heatmap {
    pub fn value(&self, delta_idx: usize, rabi_idx: usize) -> f64 {
        self.values[rabi_idx * self.grid.delta_over_omega.len() + delta_idx]
    }

    /// The row at the given Rabi error index.
    pub fn row(&self, rabi_idx: usize) -> &[f64] {
        let nd = self.grid.delta_over_omega.len();
        &self.values[rabi_idx * nd..(rabi_idx + 1) * nd]
    }

    pub fn column(&self, delta_idx: usize) -> Vec<f64> {
        (0..self.grid.rabi_rel.len()).map(|r| self.value(delta_idx, r)).collect()
    }
}

/// How to evaluate `n` independent points. Implementations must return
/// results indexed by point, whatever order they compute them in.
pub trait PointMap {
    fn map(&self, n: usize, f: &(dyn Fn(usize) -> Result<f64, SimError> + Sync)) -> Vec<Result<f64, SimError>>;
}

/// One point after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl PointMap for Sequential {
    fn map(&self, n: usize, f: &(dyn Fn(usize) -> Result<f64, SimError> + Sync)) -> Vec<Result<f64, SimError>> {
        (0..n).map(f).collect()
    }
}

/// Builds the schedule and fixes N at the error-free point.
pub fn prepare(spec: &SchemeSpec, p: &DnpParams) -> Result<Schedule, SimError> {
    let sch = spec.build(p)?;
    match spec.options.n_reps {
        Some(_) => Ok(sch),
        None => propagate::with_selected_repetitions(sch, p, None),
    }
}

pub fn scan(spec: &SchemeSpec, p: &DnpParams, grid: &ScanGrid) -> Result<Heatmap, ScanError> {
    scan_with(spec, p, grid, &Sequential)
}

pub fn scan_with(spec: &SchemeSpec, p: &DnpParams, grid: &ScanGrid, mapper: &dyn PointMap) -> Result<Heatmap, ScanError> {
    grid.validate()?;
    let sch = prepare(spec, p)?;
    Ok(scan_schedule(&sch, spec, p, grid, mapper))
}

/// Evaluates a prepared schedule over the grid. Δ is Δ/Ω times the scheme's Ω.
pub fn scan_schedule(sch: &Schedule, spec: &SchemeSpec, p: &DnpParams, grid: &ScanGrid, mapper: &dyn PointMap) -> Heatmap {
    let omega = spec.omega_rabi;
    let eval = |idx: usize| -> Result<f64, SimError> {
        let (d, r) = grid.point(idx);
        let e = ErrorModel::new(d * omega, r);
        let engine = Propagator::new(*p, e);
        let u = engine.sections(sch)?.total(sch.n_reps);
        let rho = crate::linalg::evolve(&propagate::initial_state(), &u)?;
        Ok(2.0 * crate::linalg::expectation(&rho, &engine.operators().sz)?)
    };
    let results = mapper.map(grid.len(), &eval);
    let mut values = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                let (d, rr) = grid.point(index);
                failures.push(PointFailure { index, delta_over_omega: d, rabi_rel: rr, reason: e.to_string() });
                values.push(f64::NAN);
            }
        }
    }
    Heatmap {
        grid: grid.clone(),
        values,
        failures,
        meta: HeatmapMeta {
            scheme: spec.clone(),
            params: *p,
            n_reps: sch.n_reps,
            total_duration: sch.total_duration(),
            code_version: crate::VERSION.into(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    /// A⊥ halvings.
    pub i: usize,
    /// ω_I halvings.
    pub j: usize,
    pub heatmap: Heatmap,
    /// Error-free total duration at the panel's own N.
    pub t_fin: f64,
    /// t_fin relative to 2π/A⊥ of the base parameters.
    pub t_fin_ratio: f64,
}

/// Panels with A⊥ → A⊥/2^i and ω_I → ω_I/2^j for i < halvings.0, j <
/// halvings.1, each with its own N.
pub fn multi_regime_scan(
    spec: &SchemeSpec,
    base: &DnpParams,
    halvings: (usize, usize),
    grid: &ScanGrid,
    mapper: &dyn PointMap,
) -> Result<Vec<Panel>, ScanError> {
    let t_ref = TAU / base.a_perp.abs();
    let mut panels = Vec::with_capacity(halvings.0 * halvings.1);
    for j in 0..halvings.1 {
        for i in 0..halvings.0 {
            let p = DnpParams {
                a_perp: base.a_perp / (1u64 << i) as f64,
                omega_i: base.omega_i / (1u64 << j) as f64,
                ..*base
            };
            let heatmap = scan_with(spec, &p, grid, mapper)?;
            let t_fin = heatmap.meta.total_duration;
            panels.push(Panel { i, j, heatmap, t_fin, t_fin_ratio: t_fin / t_ref });
        }
    }
    Ok(panels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Scheme;

    #[test]
    fn grid_validation() {
        assert!(ScanGrid::new(alloc::vec![], alloc::vec![0.0]).is_err());
        assert!(ScanGrid::new(alloc::vec![0.0, 0.0], alloc::vec![0.0]).is_err());
        assert!(ScanGrid::new(alloc::vec![0.0, 1.0], alloc::vec![f64::NAN]).is_err());
        let g = ScanGrid::default();
        assert_eq!(g.len(), 1681);
        assert_eq!(g.point(41), (-0.5, g.rabi_rel[1]));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-0.3, 0.3, 41);
        assert_eq!(v[0], -0.3);
        assert_eq!(v[40], 0.3);
        assert!(v[20].abs() < 1e-15);
    }

    #[test]
    fn small_slic_scan() {
        let p = DnpParams::new(24.0, 1.0);
        let g = ScanGrid::uniform((-0.1, 0.1), (-0.1, 0.1), 3, 3).unwrap();
        let h = scan(&SchemeSpec::new(Scheme::SlicNovel, 100.0), &p, &g).unwrap();
        assert_eq!(h.values.len(), 9);
        assert!(h.value(1, 1) > 0.99);
        assert!(h.value(1, 2) < 0.5);
        assert_eq!(h.meta.n_reps, 24);
        assert!(h.failures.is_empty());
    }

    struct Failing;
    impl PointMap for Failing {
        fn map(&self, n: usize, f: &(dyn Fn(usize) -> Result<f64, SimError> + Sync)) -> Vec<Result<f64, SimError>> {
            (0..n).map(|i| if i == 1 { Err(SimError::NoMaximumFound { cap: 0 }) } else { f(i) }).collect()
        }
    }

    #[test]
    fn point_failures_are_recorded() {
        let p = DnpParams::new(24.0, 1.0);
        let g = ScanGrid::uniform((-0.1, 0.1), (0.0, 0.0), 3, 1).unwrap();
        let h = scan_with(&SchemeSpec::new(Scheme::SlicNovel, 100.0), &p, &g, &Failing).unwrap();
        assert!(h.values[1].is_nan());
        assert_eq!(h.failures.len(), 1);
        assert_eq!(h.failures[0].index, 1);
    }
}
