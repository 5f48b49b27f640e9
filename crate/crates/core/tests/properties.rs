use core::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use spinseq_core::linalg::{self, ComplexMatrix};
use spinseq_core::propagate::{self, Propagator};
use spinseq_core::sequence::{Schedule, ScheduleDocument, Scheme, SchemeOptions, SchemeSpec, Segment, SCHEDULE_TOLERANCE};
use spinseq_core::{DnpParams, DriveSample, ErrorModel};

/// exp(−iHt) by scaling and squaring a 24-term Taylor series.
fn expm_taylor(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let norm = h.frobenius_norm() * t.abs();
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let step = t / f64::from(1u32 << squarings);
    let a = h.scale_complex(Complex64::new(0.0, -step));
    let mut term = ComplexMatrix::identity(h.dim());
    let mut sum = term.clone();
    for k in 1..=24 {
        term = term.matmul(&a).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Every segment cut into `parts` pieces, each propagated with the Taylor
/// series at its own midpoint amplitude.
fn refined_sz(sch: &Schedule, p: &DnpParams, e: &ErrorModel, parts: usize) -> f64 {
    let engine = Propagator::new(*p, *e);
    let mut rho = propagate::initial_state().into_matrix();
    let segs: Vec<&Segment> = sch
        .prelude
        .iter()
        .chain((0..sch.n_reps).flat_map(|_| sch.block.iter()))
        .chain(&sch.postlude)
        .collect();
    for s in segs {
        let dt = s.duration / parts as f64;
        for k in 0..parts {
            let amp = if s.amp_start == s.amp_end {
                s.amp_start
            } else {
                s.amp_start + (s.amp_end - s.amp_start) * (k as f64 + 0.5) / parts as f64
            };
            let u = expm_taylor(&engine.hamiltonian(&DriveSample::new(amp, s.phase)), dt);
            rho = u.matmul(&rho).matmul(&u.adjoint());
        }
    }
    rho.trace_product(&engine.operators().sz).re
}

fn pulsed_or_locked() -> impl Strategy<Value = Scheme> {
    prop_oneof![
        Just(Scheme::SlicNovel),
        Just(Scheme::S2hmPlain),
        Just(Scheme::S2hmXy8),
        Just(Scheme::Pulsepol),
        Just(Scheme::AdaptTopdnp),
    ]
}

fn any_scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![pulsed_or_locked(), Just(Scheme::B1Sweep)]
}

prop_compose! {
    fn setup(schemes: BoxedStrategy<Scheme>)(
        scheme in schemes,
        omega_i in 8.0..40.0f64,
        a_perp in 0.5..2.0f64,
        drive_ratio in 2.0..6.0f64,
        reps in 1usize..4,
    ) -> (SchemeSpec, DnpParams) {
        let options = SchemeOptions { n_reps: Some(reps), sweep_segments: 20, ..SchemeOptions::default() };
        (SchemeSpec::new(scheme, drive_ratio * omega_i).with_options(options), DnpParams::new(omega_i, a_perp))
    }
}

prop_compose! {
    fn errors()(d in -0.3..0.3f64, r in -0.2..0.2f64) -> (f64, f64) { (d, r) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn built_schedules_are_valid((spec, p) in setup(any_scheme().boxed())) {
        let sch = spec.build(&p).unwrap();
        sch.validate().unwrap();
        prop_assert!(sch.segments().all(|s| s.duration >= 0.0 && s.duration.is_finite()));
        let total: f64 = sch.prelude.iter().chain(&sch.postlude).map(|s| s.duration).sum::<f64>()
            + sch.n_reps as f64 * sch.block.iter().map(|s| s.duration).sum::<f64>();
        prop_assert!((total - sch.total_duration()).abs() <= SCHEDULE_TOLERANCE * total.max(1.0));
        if spec.scheme.is_pulsed() {
            prop_assert!(sch.segments().all(|s| s.amp_start == 0.0 || s.amp_start == spec.omega_rabi));
        }
    }

    #[test]
    fn document_round_trip_is_exact((spec, p) in setup(any_scheme().boxed())) {
        let sch = spec.build(&p).unwrap();
        let text = serde_json::to_string(&sch.to_document()).unwrap();
        let doc: ScheduleDocument = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(Schedule::from_document(doc).unwrap(), sch);
    }

    #[test]
    fn reversal_gives_the_transpose((spec, p) in setup(pulsed_or_locked().boxed()), (d, r) in errors()) {
        let sch = spec.build(&p).unwrap();
        let engine = Propagator::new(p, ErrorModel::new(d * spec.omega_rabi, r));
        let fwd = engine.sections(&sch).unwrap().total(sch.n_reps);
        let rev = engine.sections(&sch.reversed()).unwrap().total(sch.n_reps);
        let mut t = ComplexMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                t[(i, j)] = fwd[(j, i)];
            }
        }
        prop_assert!(rev.max_abs_diff(&t) < 1e-10, "{}", rev.max_abs_diff(&t));
    }

    #[test]
    fn evolution_preserves_trace_and_bounds((spec, p) in setup(any_scheme().boxed()), (d, r) in errors()) {
        let sch = spec.build(&p).unwrap();
        let e = ErrorModel::new(d * spec.omega_rabi, r);
        let traj = propagate::simulate(&sch, &p, &e, &propagate::initial_state()).unwrap();
        let m = traj.final_state.matrix();
        prop_assert!((m.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(traj.sz.iter().chain(&traj.iz).all(|v| v.abs() <= 0.5 + 1e-12));
        let u = Propagator::new(p, e).sections(&sch).unwrap().total(sch.n_reps);
        prop_assert!(u.unitary_residual() < 1e-10);
    }

    #[test]
    fn refinement_leaves_sz_unchanged((spec, p) in setup(pulsed_or_locked().boxed()), (d, r) in errors()) {
        let sch = spec.build(&p).unwrap();
        let e = ErrorModel::new(d * spec.omega_rabi, r);
        let coarse = propagate::final_polarization(&sch, &p, &e).unwrap() / 2.0;
        let fine = refined_sz(&sch, &p, &e, 200);
        prop_assert!((coarse - fine).abs() <= 1e-8, "{coarse} vs {fine}");
    }
}

#[test]
fn taylor_oracle_matches_closed_form_rotation() {
    // drive only: 1 ⊗ exp(−iθσx/2)
    let p = DnpParams::new(0.0, 0.0);
    let engine = Propagator::new(p, ErrorModel::NONE);
    let theta: f64 = 1.3;
    let u = expm_taylor(&engine.hamiltonian(&DriveSample::new(theta, 0.0)), 1.0);
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mi = Complex64::new(0.0, -s);
    let mut expected = ComplexMatrix::zeros(4);
    for b in [0, 2] {
        expected[(b, b)] = Complex64::new(c, 0.0);
        expected[(b + 1, b + 1)] = Complex64::new(c, 0.0);
        expected[(b, b + 1)] = mi;
        expected[(b + 1, b)] = mi;
    }
    assert!(u.max_abs_diff(&expected) < 1e-14);
}

#[test]
fn spectral_propagator_matches_taylor_oracle() {
    let p = DnpParams::new(24.0, 1.0);
    let engine = Propagator::new(p, ErrorModel::new(3.0, 0.1));
    for (amp, phase, t) in [(100.0, 0.0, 0.013), (37.0, 1.1, 0.4), (0.0, 0.0, 2.0), (250.0, TAU * 0.75, 0.05)] {
        let h = engine.hamiltonian(&DriveSample::new(amp, phase));
        let diff = linalg::propagator(&h, t).unwrap().max_abs_diff(&expm_taylor(&h, t));
        assert!(diff < 1e-12, "{diff}");
    }
}
