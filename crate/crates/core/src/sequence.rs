//! Piecewise-constant drive schedules and the builders for each transfer
//! scheme.
//!
//! A [`Schedule`] is a prelude, a block repeated `n_reps` times, and a
//! postlude. Pulses are played at the full Rabi amplitude Ω unless a scheme
//! says otherwise (the spin lock runs at ω_I, sweeps at their ramp value).
//! Phase `X` is φ = 0, `Y` is π/2, `-X` is π and `-Y` is 3π/2.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spin::{Advisory, DnpParams};

pub const PHASE_X: f64 = 0.0;
pub const PHASE_Y: f64 = FRAC_PI_2;
pub const PHASE_MINUS_X: f64 = PI;
pub const PHASE_MINUS_Y: f64 = 3.0 * FRAC_PI_2;

/// Tolerance of the schedule invariants (rotation labels, block length).
pub const SCHEDULE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("wait #{index} would be negative ({value:e}): pulses do not fit their timing window")]
    NegativeWait { index: usize, value: f64 },
    #[error("pulse #{index} has no adjacent wait to absorb its duration")]
    MissingWait { index: usize },
    #[error("invalid sweep: {0}")]
    InvalidSweep(&'static str),
    #[error("pulses per train must be at least 1 (got {0})")]
    InvalidPulseCount(i64),
    #[error("schedule invariant violated at segment {index} ({label}): {reason}")]
    Invariant { index: usize, label: String, reason: &'static str },
    #[error("schedule document is malformed: {0}")]
    Document(&'static str),
}

/// A constant (or linearly ramped) stretch of drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration: f64,
    pub amp_start: f64,
    pub amp_end: f64,
    pub phase: f64,
    pub label: String,
}

impl Segment {
    pub fn wait(duration: f64) -> Self {
        Self { duration, amp_start: 0.0, amp_end: 0.0, phase: 0.0, label: "wait".into() }
    }

    pub fn constant(duration: f64, amplitude: f64, phase: f64, label: String) -> Self {
        Self { duration, amp_start: amplitude, amp_end: amplitude, phase, label }
    }

    /// A rotation by `angle` at amplitude `amplitude`, labelled e.g. `pi/2@Y`.
    pub fn rotation(angle: f64, amplitude: f64, phase: f64) -> Self {
        let label = format!("{}@{}", angle_name(angle), phase_name(phase));
        Self::constant(angle / amplitude, amplitude, phase, label)
    }

    pub fn is_ramp(&self) -> bool {
        self.amp_start != self.amp_end
    }

    pub fn mean_amplitude(&self) -> f64 {
        0.5 * (self.amp_start + self.amp_end)
    }

    /// Rotation angle encoded in the label, if the label names one.
    pub fn labelled_angle(&self) -> Option<f64> {
        let (angle, _) = self.label.split_once('@')?;
        match angle {
            "pi/2" => Some(FRAC_PI_2),
            "pi" => Some(PI),
            "2pi" => Some(TAU),
            _ => None,
        }
    }
}

fn angle_name(angle: f64) -> String {
    for (v, name) in [(FRAC_PI_2, "pi/2"), (PI, "pi"), (TAU, "2pi")] {
        if (angle - v).abs() < 1e-12 {
            return name.into();
        }
    }
    format!("{:.6}rad", angle)
}

/// `X`, `Y`, `-X`, `-Y` for quarter turns; degrees otherwise.
pub fn phase_name(phase: f64) -> String {
    let wrapped = phase.rem_euclid(TAU);
    for (k, name) in ["X", "Y", "-X", "-Y"].iter().enumerate() {
        let target = k as f64 * FRAC_PI_2;
        if (wrapped - target).abs() < 1e-12 || (wrapped - target - TAU).abs() < 1e-12 {
            return (*name).into();
        }
    }
    format!("{:.3}deg", wrapped.to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Continuous spin lock at Ω = ω_I (SLIC in PHIP, NOVEL in DNP).
    #[serde(alias = "slic", alias = "novel")]
    SlicNovel,
    /// Two same-phase π trains (S2hM / NV nuclear-spin initialization).
    #[serde(alias = "s2hm")]
    S2hmPlain,
    /// S2hM with four-pulse XY trains that chain into XY8 when repeated.
    S2hmXy8,
    #[serde(alias = "pulse_pol")]
    Pulsepol,
    /// Four π/2 pulses per Larmor period (ADAPT in PHIP, TOP-DNP in DNP).
    #[serde(alias = "adapt", alias = "top_dnp")]
    AdaptTopdnp,
    /// Linear amplitude sweep through the spin-lock resonance (RA-NOVEL).
    #[serde(alias = "b1sweep", alias = "ra_novel")]
    B1Sweep,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Scheme::SlicNovel, Scheme::S2hmPlain, Scheme::S2hmXy8, Scheme::Pulsepol, Scheme::AdaptTopdnp, Scheme::B1Sweep];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::SlicNovel => "slic_novel",
            Scheme::S2hmPlain => "s2hm_plain",
            Scheme::S2hmXy8 => "s2hm_xy8",
            Scheme::Pulsepol => "pulsepol",
            Scheme::AdaptTopdnp => "adapt_topdnp",
            Scheme::B1Sweep => "b1_sweep",
        }
    }

    /// Whether the repetition count is chosen by scanning for the first
    /// transfer maximum. Non-repeating schemes run once.
    pub fn repeats(self) -> bool {
        !matches!(self, Scheme::S2hmPlain | Scheme::B1Sweep)
    }

    pub fn is_pulsed(self) -> bool {
        !matches!(self, Scheme::SlicNovel | Scheme::B1Sweep)
    }

    /// Closed-form effective coupling A*/A⊥ where one is known.
    pub fn a_star_theory(self) -> Option<f64> {
        match self {
            Scheme::SlicNovel => Some(1.0),
            Scheme::S2hmPlain | Scheme::S2hmXy8 => Some(2.0 / PI),
            Scheme::Pulsepol => Some(2.0 * (2.0 + core::f64::consts::SQRT_2) / (3.0 * PI)),
            Scheme::AdaptTopdnp | Scheme::B1Sweep => None,
        }
    }

    /// Names of the corresponding schemes in the hydrogen-pair and
    /// electron–nucleus settings.
    pub fn correspondence(self) -> (&'static str, &'static str) {
        match self {
            Scheme::SlicNovel => ("SLIC", "NOVEL"),
            Scheme::S2hmPlain => ("S2hM", "NV nuclear spin initialization"),
            Scheme::S2hmXy8 => ("S2hM (XY8 phase cycle)", "NV nuclear spin initialization (XY8)"),
            Scheme::Pulsepol => ("PulsePol", "PulsePol"),
            Scheme::AdaptTopdnp => ("ADAPT", "TOP-DNP"),
            Scheme::B1Sweep => ("adiabatic B1 sweep", "RA-NOVEL"),
        }
    }
}

/// Scheme-specific knobs. Every field has a default that reproduces the
/// standard form of the scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeOptions {
    /// Sweep limits as multiples of ω_I.
    pub sweep_range: [f64; 2],
    /// dΩ/dt; `None` means A⊥²/(2π).
    pub sweep_rate: Option<f64>,
    /// Overrides the duration implied by the sweep rate.
    pub sweep_duration: Option<f64>,
    pub sweep_segments: usize,
    /// π pulses per train for `s2hm_plain`; `None` means round(π ω_I / (2 A⊥)).
    pub pulses_per_train: Option<usize>,
    /// Phase offset of the second PulsePol half-block. The default −π/2 makes
    /// the transferred polarization positive under this crate's conventions.
    pub pulsepol_phase_shift: f64,
    /// PulsePol block length in units of π/ω_I.
    pub pulsepol_tau_factor: f64,
    /// Fixed repetition count; `None` lets the simulator choose.
    pub n_reps: Option<usize>,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            sweep_range: [0.6, 1.4],
            sweep_rate: None,
            sweep_duration: None,
            sweep_segments: 150,
            pulses_per_train: None,
            pulsepol_phase_shift: -FRAC_PI_2,
            pulsepol_tau_factor: 3.0,
            n_reps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    /// Maximum available Rabi angular frequency Ω.
    pub omega_rabi: f64,
    #[serde(default)]
    pub options: SchemeOptions,
}

impl SchemeSpec {
    pub fn new(scheme: Scheme, omega_rabi: f64) -> Self {
        Self { scheme, omega_rabi, options: SchemeOptions::default() }
    }

    pub fn with_options(mut self, options: SchemeOptions) -> Self {
        self.options = options;
        self
    }

    pub fn advisories(&self, p: &DnpParams) -> Vec<Advisory> {
        let mut adv = Vec::new();
        if self.scheme.is_pulsed() && self.omega_rabi < p.omega_i.abs() {
            adv.push(Advisory::DriveBelowLarmor { omega_rabi: self.omega_rabi, omega_i: p.omega_i });
        }
        adv
    }

    pub fn build(&self, p: &DnpParams) -> Result<Schedule, ScheduleError> {
        match self.scheme {
            Scheme::SlicNovel => build_slic(p, self),
            Scheme::S2hmPlain => build_s2hm_plain(p, self),
            Scheme::S2hmXy8 => build_s2hm_xy8(p, self),
            Scheme::Pulsepol => build_pulsepol(p, self),
            Scheme::AdaptTopdnp => build_adapt(p, self),
            Scheme::B1Sweep => build_b1_sweep(p, self),
        }
    }
}

/// A compiled drive program.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub scheme: Scheme,
    pub params: DnpParams,
    pub omega_rabi: f64,
    pub prelude: Vec<Segment>,
    pub block: Vec<Segment>,
    pub postlude: Vec<Segment>,
    pub n_reps: usize,
    /// The scheme's timing parameter τ.
    pub tau: f64,
    /// Block length in units of τ.
    pub tau_multiple: f64,
}

impl Schedule {
    pub fn block_duration(&self) -> f64 {
        self.block.iter().map(|s| s.duration).sum()
    }

    pub fn prelude_duration(&self) -> f64 {
        self.prelude.iter().map(|s| s.duration).sum()
    }

    pub fn postlude_duration(&self) -> f64 {
        self.postlude.iter().map(|s| s.duration).sum()
    }

    pub fn total_duration(&self) -> f64 {
        self.prelude_duration() + self.n_reps as f64 * self.block_duration() + self.postlude_duration()
    }

    pub fn with_reps(mut self, n_reps: usize) -> Self {
        self.n_reps = n_reps;
        self
    }

    /// All segments in playing order, the block repeated `n_reps` times.
    pub fn segments(&self) -> impl Iterator<Item = &Segment> + '_ {
        self.prelude
            .iter()
            .chain((0..self.n_reps).flat_map(move |_| self.block.iter()))
            .chain(self.postlude.iter())
    }

    /// Checks segment sanity, rotation labels and the block length.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.n_reps == 0 {
            return Err(ScheduleError::InvalidParameter { name: "n_reps", value: 0.0 });
        }
        let all = self.prelude.iter().chain(&self.block).chain(&self.postlude);
        for (index, s) in all.enumerate() {
            let bad = |reason| ScheduleError::Invariant { index, label: s.label.clone(), reason };
            if !(s.duration >= 0.0) || !s.duration.is_finite() {
                return Err(bad("duration must be finite and non-negative"));
            }
            if !(s.amp_start >= 0.0 && s.amp_end >= 0.0) || !s.amp_start.is_finite() || !s.amp_end.is_finite() {
                return Err(bad("amplitudes must be finite and non-negative"));
            }
            if !s.phase.is_finite() {
                return Err(bad("phase must be finite"));
            }
            if let Some(angle) = s.labelled_angle() {
                if s.is_ramp() || (s.amp_start * s.duration - angle).abs() > SCHEDULE_TOLERANCE {
                    return Err(bad("amplitude x duration does not match the labelled rotation"));
                }
            }
        }
        if (self.block_duration() - self.tau_multiple * self.tau).abs() > SCHEDULE_TOLERANCE {
            return Err(ScheduleError::Invariant {
                index: self.prelude.len(),
                label: "block".into(),
                reason: "block duration differs from its tau multiple",
            });
        }
        Ok(())
    }

    /// The schedule played backwards with every phase negated. Its propagator
    /// is the transpose of the forward propagator (in the z basis).
    pub fn reversed(&self) -> Schedule {
        let flip = |segs: &[Segment]| -> Vec<Segment> {
            segs.iter()
                .rev()
                .map(|s| Segment {
                    duration: s.duration,
                    amp_start: s.amp_end,
                    amp_end: s.amp_start,
                    phase: if s.phase == 0.0 { 0.0 } else { TAU - s.phase.rem_euclid(TAU) },
                    label: s.label.clone(),
                })
                .collect()
        };
        Schedule {
            prelude: flip(&self.postlude),
            block: flip(&self.block),
            postlude: flip(&self.prelude),
            ..self.clone()
        }
    }

    pub fn to_document(&self) -> ScheduleDocument {
        ScheduleDocument {
            scheme: self.scheme,
            params: DocumentParams {
                omega_i: self.params.omega_i,
                a_perp: self.params.a_perp,
                omega_s: self.params.omega_s,
                omega_rabi: self.omega_rabi,
                tau_multiple: self.tau_multiple,
                prelude_len: self.prelude.len(),
                block_len: self.block.len(),
                postlude_len: self.postlude.len(),
            },
            segments: self.prelude.iter().chain(&self.block).chain(&self.postlude).cloned().collect(),
            n_reps: self.n_reps,
            tau: self.tau,
        }
    }

    pub fn from_document(doc: ScheduleDocument) -> Result<Schedule, ScheduleError> {
        let p = &doc.params;
        if p.prelude_len + p.block_len + p.postlude_len != doc.segments.len() {
            return Err(ScheduleError::Document("section lengths do not add up to the segment count"));
        }
        let mut segs = doc.segments.into_iter();
        let prelude = segs.by_ref().take(p.prelude_len).collect();
        let block = segs.by_ref().take(p.block_len).collect();
        let postlude = segs.collect();
        let sch = Schedule {
            scheme: doc.scheme,
            params: DnpParams { omega_i: p.omega_i, a_perp: p.a_perp, omega_s: p.omega_s },
            omega_rabi: p.omega_rabi,
            prelude,
            block,
            postlude,
            n_reps: doc.n_reps,
            tau: doc.tau,
            tau_multiple: p.tau_multiple,
        };
        sch.validate()?;
        Ok(sch)
    }
}

/// Flat serialized form of a [`Schedule`]: segments are listed prelude, one
/// block, postlude; `params` records the section lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDocument {
    pub scheme: Scheme,
    pub params: DocumentParams,
    pub segments: Vec<Segment>,
    pub n_reps: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentParams {
    pub omega_i: f64,
    pub a_perp: f64,
    pub omega_s: f64,
    pub omega_rabi: f64,
    pub tau_multiple: f64,
    pub prelude_len: usize,
    pub block_len: usize,
    pub postlude_len: usize,
}

/// Which neighbouring waits a finite pulse takes its duration from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorb {
    /// Half from the wait before, half from the wait after (centered pulse).
    Both,
    /// All from the wait before (pulse ends on its nominal position).
    Before,
    /// All from the wait after (pulse starts on its nominal position).
    After,
    /// Not absorbed; the pulse adds its own duration.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DraftPulse {
    pub angle: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub absorb: Absorb,
}

/// Nominal timing: zero-width pulses separated by delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DraftItem {
    Delay(f64),
    Pulse(DraftPulse),
}

fn pulse(angle: f64, phase: f64, amplitude: f64, absorb: Absorb) -> DraftItem {
    DraftItem::Pulse(DraftPulse { angle, phase, amplitude, absorb })
}

/// Gives every pulse its finite duration by shrinking the adjacent delays, so
/// that the nominal section boundaries stay where they are.
pub fn layout_timing(draft: &[DraftItem]) -> Result<Vec<Segment>, ScheduleError> {
    let mut waits: Vec<Option<f64>> =
        draft.iter().map(|it| if let DraftItem::Delay(d) = it { Some(*d) } else { None }).collect();
    let scale = draft
        .iter()
        .map(|it| if let DraftItem::Delay(d) = it { d.abs() } else { 0.0 })
        .fold(0.0, f64::max)
        .max(1e-300);

    for (index, item) in draft.iter().enumerate() {
        let DraftItem::Pulse(p) = item else { continue };
        let d = pulse_duration(p);
        let (before, after) = match p.absorb {
            Absorb::Both => (0.5 * d, 0.5 * d),
            Absorb::Before => (d, 0.0),
            Absorb::After => (0.0, d),
            Absorb::Free => (0.0, 0.0),
        };
        if before > 0.0 || p.absorb == Absorb::Both || p.absorb == Absorb::Before {
            let w = index.checked_sub(1).and_then(|i| waits[i].as_mut()).ok_or(ScheduleError::MissingWait { index })?;
            *w -= before;
        }
        if after > 0.0 || p.absorb == Absorb::Both || p.absorb == Absorb::After {
            let w = waits.get_mut(index + 1).and_then(|w| w.as_mut()).ok_or(ScheduleError::MissingWait { index })?;
            *w -= after;
        }
    }

    let mut out = Vec::with_capacity(draft.len());
    for (index, item) in draft.iter().enumerate() {
        match item {
            DraftItem::Delay(_) => {
                let w = waits[index].unwrap_or(0.0);
                if w < -1e-12 * scale {
                    return Err(ScheduleError::NegativeWait { index, value: w });
                }
                if w > 1e-13 * scale {
                    out.push(Segment::wait(w));
                }
            }
            DraftItem::Pulse(p) => {
                let d = pulse_duration(p);
                let label = format!("{}@{}", angle_name(p.angle), phase_name(p.phase));
                out.push(Segment::constant(d, p.amplitude, p.phase, label));
            }
        }
    }
    Ok(out)
}

fn pulse_duration(p: &DraftPulse) -> f64 {
    if p.amplitude.is_infinite() {
        0.0
    } else {
        p.angle / p.amplitude
    }
}

fn check_common(p: &DnpParams, s: &SchemeSpec) -> Result<(), ScheduleError> {
    if !(p.omega_i.is_finite() && p.omega_i > 0.0) {
        return Err(ScheduleError::InvalidParameter { name: "omega_i", value: p.omega_i });
    }
    if !(s.omega_rabi.is_finite() && s.omega_rabi > 0.0) {
        return Err(ScheduleError::InvalidParameter { name: "omega_rabi", value: s.omega_rabi });
    }
    if s.options.n_reps == Some(0) {
        return Err(ScheduleError::InvalidParameter { name: "n_reps", value: 0.0 });
    }
    Ok(())
}

fn finish(
    scheme: Scheme,
    p: &DnpParams,
    s: &SchemeSpec,
    prelude: Vec<Segment>,
    block: Vec<Segment>,
    postlude: Vec<Segment>,
    tau: f64,
    tau_multiple: f64,
) -> Result<Schedule, ScheduleError> {
    let sch = Schedule {
        scheme,
        params: *p,
        omega_rabi: s.omega_rabi,
        prelude,
        block,
        postlude,
        n_reps: s.options.n_reps.unwrap_or(1),
        tau,
        tau_multiple,
    };
    sch.validate()?;
    Ok(sch)
}

/// π/2(Y) – spin lock at ω_I, phase X, one 2π turn per block – π/2(−Y).
pub fn build_slic(p: &DnpParams, s: &SchemeSpec) -> Result<Schedule, ScheduleError> {
    check_common(p, s)?;
    let omega = s.omega_rabi;
    let lock = Segment::rotation(TAU, p.omega_i, PHASE_X);
    let tau = TAU / p.omega_i;
    finish(
        Scheme::SlicNovel,
        p,
        s,
        vec![Segment::rotation(FRAC_PI_2, omega, PHASE_Y)],
        vec![lock],
        vec![Segment::rotation(FRAC_PI_2, omega, PHASE_MINUS_Y)],
        tau,
        1.0,
    )
}

/// n centered π pulses with spacing τ, half-spacing waits at both ends.
fn pi_train(phases: &[f64], tau: f64, omega: f64, extra_before_last: f64) -> Vec<DraftItem> {
    let mut items = vec![DraftItem::Delay(0.5 * tau)];
    for (k, &ph) in phases.iter().enumerate() {
        items.push(pulse(PI, ph, omega, Absorb::Both));
        let last = k + 1 == phases.len();
        let gap = if last { 0.5 * tau } else { tau };
        let extra = if k + 2 == phases.len() { extra_before_last } else { 0.0 };
        items.push(DraftItem::Delay(gap + extra));
    }
    items
}

/// S2hM with XY trains: π/2(Y); block = [XYXY train, π/2(X) + τ/2, YXYX train];
/// π/2(−Y). The wait left after the transitory π/2 pulse is split between the
/// start of the second train and the gap before its fourth pulse.
pub fn build_s2hm_xy8(p: &DnpParams, s: &SchemeSpec) -> Result<Schedule, ScheduleError> {
    check_common(p, s)?;
    let omega = s.omega_rabi;
    let tau = PI / p.omega_i;
    let half_pulse = FRAC_PI_2 / omega;
    let extra = 0.5 * tau - half_pulse;
    if extra < 0.0 {
        return Err(ScheduleError::NegativeWait { index: 0, value: extra });
    }
    let mut draft = pi_train(&[PHASE_X, PHASE_Y, PHASE_X, PHASE_Y], tau, omega, 0.0);
    draft.push(pulse(FRAC_PI_2, PHASE_X, omega, Absorb::Free));
    draft.push(DraftItem::Delay(0.5 * extra));
    draft.extend(pi_train(&[PHASE_Y, PHASE_X, PHASE_Y, PHASE_X], tau, omega, 0.5 * extra));
    let block = layout_timing(&merge_delays(draft))?;
    finish(
        Scheme::S2hmXy8,
        p,
        s,
        vec![Segment::rotation(FRAC_PI_2, omega, PHASE_Y)],
        block,
        vec![Segment::rotation(FRAC_PI_2, omega, PHASE_MINUS_Y)],
        tau,
        8.5,
    )
}

/// round(π ω_I / (2 A⊥)), the train length that completes the transfer after
/// the second train.
pub fn s2hm_pulses_per_train(p: &DnpParams) -> Result<usize, ScheduleError> {
    if p.a_perp == 0.0 {
        return Err(ScheduleError::InvalidParameter { name: "a_perp", value: 0.0 });
    }
    let n = (PI * p.omega_i / (2.0 * p.a_perp.abs())).round();
    if n < 1.0 {
        return Err(ScheduleError::InvalidPulseCount(n as i64));
    }
    Ok(n as usize)
}

/// Plain S2hM: π/2(Y); block = [n π(X) train, π/2(X), wait, n π(X) train];
/// wait, π/2(−Y). Train-to-train delay and the closing wait are both τ/2
/// including the π/2 pulse.
pub fn build_s2hm_plain(p: &DnpParams, s: &SchemeSpec) -> Result<Schedule, ScheduleError> {
    check_common(p, s)?;
    let n = match s.options.pulses_per_train {
        Some(0) => return Err(ScheduleError::InvalidPulseCount(0)),
        Some(n) => n,
        None => s2hm_pulses_per_train(p)?,
    };
    let omega = s.omega_rabi;
    let tau = PI / p.omega_i;
    let half_pulse = FRAC_PI_2 / omega;
    let gap = 0.5 * tau - half_pulse;
    if gap < 0.0 {
        return Err(ScheduleError::NegativeWait { index: 0, value: gap });
    }
    let phases = vec![PHASE_X; n];
    let mut draft = pi_train(&phases, tau, omega, 0.0);
    draft.push(pulse(FRAC_PI_2, PHASE_X, omega, Absorb::Free));
    draft.push(DraftItem::Delay(gap));
    draft.extend(pi_train(&phases, tau, omega, 0.0));
    let block = layout_timing(&merge_delays(draft))?;
    let mut postlude = Vec::new();
    if gap > 0.0 {
        postlude.push(Segment::wait(gap));
    }
    postlude.push(Segment::rotation(FRAC_PI_2, omega, PHASE_MINUS_Y));
    finish(
        Scheme::S2hmPlain,
        p,
        s,
        vec![Segment::rotation(FRAC_PI_2, omega, PHASE_Y)],
        block,
        postlude,
        tau,
        2.0 * n as f64 + 0.5,
    )
}

/// PulsePol: two half-blocks of length τ/2, [π/2(Y), wait, π(X), wait, π/2(Y)]
/// and the same with all phases advanced by the phase shift. τ = 3π/ω_I by
/// default. No separate prelude or postlude.
pub fn build_pulsepol(p: &DnpParams, s: &SchemeSpec) -> Result<Schedule, ScheduleError> {
    check_common(p, s)?;
    let o = &s.options;
    if !(o.pulsepol_tau_factor > 0.0) {
        return Err(ScheduleError::InvalidParameter { name: "pulsepol_tau_factor", value: o.pulsepol_tau_factor });
    }
    let omega = s.omega_rabi;
    let tau = o.pulsepol_tau_factor * PI / p.omega_i;
    let mut draft = Vec::new();
    for shift in [0.0, o.pulsepol_phase_shift] {
        let ph = |base: f64| (base + shift).rem_euclid(TAU);
        draft.push(pulse(FRAC_PI_2, ph(PHASE_Y), omega, Absorb::After));
        draft.push(DraftItem::Delay(0.25 * tau));
        draft.push(pulse(PI, ph(PHASE_X), omega, Absorb::Both));
        draft.push(DraftItem::Delay(0.25 * tau));
        draft.push(pulse(FRAC_PI_2, ph(PHASE_Y), omega, Absorb::Before));
    }
    let block = layout_timing(&draft)?;
    finish(Scheme::Pulsepol, p, s, Vec::new(), block, Vec::new(), tau, 1.0)
}

/// ADAPT / TOP-DNP: block = four centered π/2(X) pulses with spacing
/// τ = π/(2ω_I); the opening π/2(Y) and closing π/2(−Y) are padded so that
/// every pulse-to-pulse gap is equal.
pub fn build_adapt(p: &DnpParams, s: &SchemeSpec) -> Result<Schedule, ScheduleError> {
    check_common(p, s)?;
    let omega = s.omega_rabi;
    let tau = FRAC_PI_2 / p.omega_i;
    let half_pulse = FRAC_PI_2 / omega;
    let pad = 0.5 * (tau - half_pulse);
    if pad < 0.0 {
        return Err(ScheduleError::NegativeWait { index: 0, value: pad });
    }
    let block = layout_timing(&pi_half_train(tau, omega))?;
    let mut prelude = vec![Segment::rotation(FRAC_PI_2, omega, PHASE_Y)];
    let mut postlude = Vec::new();
    if pad > 0.0 {
        prelude.push(Segment::wait(pad));
        postlude.push(Segment::wait(pad));
    }
    postlude.push(Segment::rotation(FRAC_PI_2, omega, PHASE_MINUS_Y));
    finish(Scheme::AdaptTopdnp, p, s, prelude, block, postlude, tau, 4.0)
}

fn pi_half_train(tau: f64, omega: f64) -> Vec<DraftItem> {
    let mut items = vec![DraftItem::Delay(0.5 * tau)];
    for k in 0..4 {
        items.push(pulse(FRAC_PI_2, PHASE_X, omega, Absorb::Both));
        items.push(DraftItem::Delay(if k == 3 { 0.5 * tau } else { tau }));
    }
    items
}

/// Linear amplitude sweep across `sweep_range`·ω_I in `sweep_segments`
/// constant steps (each at its step's midpoint amplitude), framed by π/2(Y)
/// and π/2(−Y). Runs once.
pub fn build_b1_sweep(p: &DnpParams, s: &SchemeSpec) -> Result<Schedule, ScheduleError> {
    check_common(p, s)?;
    let o = &s.options;
    let [lo_rel, hi_rel] = o.sweep_range;
    if !(lo_rel >= 0.0 && hi_rel >= lo_rel && hi_rel.is_finite()) {
        return Err(ScheduleError::InvalidSweep("range must satisfy 0 <= low <= high"));
    }
    if o.sweep_segments == 0 {
        return Err(ScheduleError::InvalidSweep("at least one segment is required"));
    }
    let (lo, hi) = (lo_rel * p.omega_i, hi_rel * p.omega_i);
    let duration = match (o.sweep_duration, o.sweep_rate) {
        (Some(t), _) => t,
        (None, rate) => {
            let rate = rate.unwrap_or(p.a_perp * p.a_perp / TAU);
            if !(rate > 0.0) || !rate.is_finite() {
                return Err(ScheduleError::InvalidSweep("sweep rate must be positive"));
            }
            (hi - lo) / rate
        }
    };
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(ScheduleError::InvalidSweep("sweep duration must be positive"));
    }
    let n = o.sweep_segments;
    let step = (hi - lo) / n as f64;
    let block = (0..n)
        .map(|k| Segment::constant(duration / n as f64, lo + (k as f64 + 0.5) * step, PHASE_X, "sweep@X".into()))
        .collect();
    let spec = SchemeSpec { options: SchemeOptions { n_reps: Some(o.n_reps.unwrap_or(1)), ..o.clone() }, ..s.clone() };
    finish(
        Scheme::B1Sweep,
        p,
        &spec,
        vec![Segment::rotation(FRAC_PI_2, s.omega_rabi, PHASE_Y)],
        block,
        vec![Segment::rotation(FRAC_PI_2, s.omega_rabi, PHASE_MINUS_Y)],
        duration,
        1.0,
    )
}

/// Joins adjacent delays so each wait between pulses is one draft item.
fn merge_delays(items: Vec<DraftItem>) -> Vec<DraftItem> {
    let mut out: Vec<DraftItem> = Vec::with_capacity(items.len());
    for it in items {
        match (out.last_mut(), it) {
            (Some(DraftItem::Delay(a)), DraftItem::Delay(b)) => *a += b,
            (_, it) => out.push(it),
        }
    }
    out
}
