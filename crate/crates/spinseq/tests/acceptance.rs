//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Run with `cargo test -p spinseq --test acceptance` (release is much faster).

use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use spinseq::parallel::RayonMap;
use spinseq::run::{verify, EQUIVALENCE_SZ_TOLERANCE, LEAKAGE_TOLERANCE};
use spinseq_core::analysis::{cycle_effective_hamiltonian, estimate_a_star};
use spinseq_core::linalg::ComplexMatrix;
use spinseq_core::propagate::{self, Propagator};
use spinseq_core::scan::{self, Heatmap, ScanGrid};
use spinseq_core::sequence::{Schedule, Scheme, SchemeOptions, SchemeSpec};
use spinseq_core::spin::{pseudospin_identities_report, IDENTITY_TOLERANCE};
use spinseq_core::{DnpParams, DriveSample, ErrorModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(id: u8, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.pass = false;
        o.detail.push_str(&format!("; over the {}s budget", limit.as_secs()));
    }
    println!("{} {id} {title}: {} ({:.2}s)", if o.pass { "PASS" } else { "FAIL" }, o.detail, took.as_secs_f64());
    o.pass
}

fn reference() -> DnpParams {
    DnpParams::new(24.0, 1.0)
}

fn mapper() -> RayonMap {
    RayonMap::new(None).expect("thread pool")
}

fn c1_identities() -> Outcome {
    let r = pseudospin_identities_report();
    let worst = r.max_residual();
    Outcome {
        pass: r.all_passed() && worst <= IDENTITY_TOLERANCE && r.checks.len() >= 6,
        detail: format!("{} checks, max residual {worst:.1e}", r.checks.len()),
    }
}

fn c2_equivalence() -> Outcome {
    match verify(&spinseq_core::spin::REFERENCE_PHIP, 5, 100, 20_240_601) {
        Err(e) => Outcome { pass: false, detail: e.to_string() },
        Ok(r) => {
            let sz = r.equivalence.iter().map(|c| c.report.max_sz_deviation).fold(0.0, f64::max);
            let leak = r.equivalence.iter().map(|c| c.report.max_leakage).fold(0.0, f64::max);
            let bounds = r.equivalence.iter().all(|c| c.report.boundaries == 100);
            Outcome {
                pass: r.equivalence.len() == 5 && bounds && sz <= EQUIVALENCE_SZ_TOLERANCE && leak <= LEAKAGE_TOLERANCE,
                detail: format!("5 sets x 100 segments, max |d<Sz>| {sz:.1e}, max leakage {leak:.1e}"),
            }
        }
    }
}

fn c3_couplings() -> Outcome {
    let p = DnpParams::new(100.0, 1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [Scheme::SlicNovel, Scheme::S2hmXy8, Scheme::Pulsepol] {
        match estimate_a_star(&SchemeSpec::new(s, 400.0), &p) {
            Ok(r) => {
                let theory = s.a_star_theory().unwrap();
                let dev = r.ratio(p.a_perp) / theory - 1.0;
                pass &= dev.abs() <= 0.02;
                parts.push(format!("{} {:.4} vs {theory:.4} ({:+.1}%)", s.name(), r.ratio(p.a_perp), 100.0 * dev));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{}: {e}", s.name()));
            }
        }
    }
    Outcome { pass, detail: parts.join(", ") }
}

fn c4_cycle_log() -> Outcome {
    let p = DnpParams::new(100.0, 1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [Scheme::SlicNovel, Scheme::S2hmXy8, Scheme::Pulsepol, Scheme::AdaptTopdnp] {
        let spec = SchemeSpec::new(s, 400.0);
        let res = estimate_a_star(&spec, &p).map_err(|e| e.to_string()).and_then(|r| {
            let sch = spec.build(&p).map_err(|e| e.to_string())?;
            let c = cycle_effective_hamiltonian(&sch, &p).map_err(|e| e.to_string())?;
            Ok((r.a_star_measured / 2.0, c.flip_flop))
        });
        match res {
            Ok((half, ff)) => {
                let rel = (ff - half).abs() / half;
                pass &= rel <= 0.05;
                parts.push(format!("{} {:.1}%", s.name(), 100.0 * rel));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{}: {e}", s.name()));
            }
        }
    }
    Outcome { pass, detail: parts.join(", ") }
}

/// Value at the grid point nearest to (Δ/Ω, Ω_error/Ω).
fn at(h: &Heatmap, d: f64, r: f64) -> f64 {
    let near = |v: &[f64], x: f64| {
        (0..v.len()).min_by(|&a, &b| (v[a] - x).abs().total_cmp(&(v[b] - x).abs())).unwrap()
    };
    h.value(near(&h.grid.delta_over_omega, d), near(&h.grid.rabi_rel, r))
}

/// Error-free Δ = 0 is on the default grid; Ω_error/Ω = 0.1 is not, so that
/// point is evaluated directly.
fn exact(spec: &SchemeSpec, p: &DnpParams, d: f64, r: f64) -> f64 {
    let sch = scan::prepare(spec, p).unwrap();
    propagate::final_polarization(&sch, p, &ErrorModel::new(d * spec.omega_rabi, r)).unwrap()
}

/// Contiguous runs of Δ columns whose best value over all rows is ≥ `level`,
/// excluding the run that contains Δ = 0.
fn sideband_clusters(h: &Heatmap, level: f64) -> Vec<(f64, f64)> {
    let d = &h.grid.delta_over_omega;
    let best: Vec<f64> = (0..d.len()).map(|k| h.column(k).into_iter().fold(f64::MIN, f64::max)).collect();
    let mut runs = Vec::new();
    let mut k = 0;
    while k < d.len() {
        if best[k] < level {
            k += 1;
            continue;
        }
        let start = k;
        while k < d.len() && best[k] >= level {
            k += 1;
        }
        let (lo, hi) = (d[start], d[k - 1]);
        if !(lo <= 0.0 && hi >= 0.0) {
            runs.push((lo, hi));
        }
    }
    runs
}

fn c5_heatmaps() -> Outcome {
    let p = reference();
    let omega = 100.0;
    let grid = ScanGrid::default();
    let m = mapper();
    let schemes = [Scheme::SlicNovel, Scheme::S2hmXy8, Scheme::Pulsepol, Scheme::AdaptTopdnp, Scheme::B1Sweep];
    let mut maps = Vec::new();
    for s in schemes {
        match scan::scan_with(&SchemeSpec::new(s, omega), &p, &grid, &m) {
            Ok(h) => maps.push((s, h)),
            Err(e) => return Outcome { pass: false, detail: format!("{}: {e}", s.name()) },
        }
    }
    let mut parts = Vec::new();

    let centre: Vec<(Scheme, f64)> = maps.iter().map(|(s, h)| (*s, at(h, 0.0, 0.0))).collect();
    let a = centre.iter().all(|(_, v)| *v >= 0.98);
    let low: Vec<String> = centre.iter().filter(|(_, v)| *v < 0.98).map(|(s, v)| format!("{} {v:.3}", s.name())).collect();
    parts.push(format!("(a) {}", if a { "all >= 0.98".to_string() } else { format!("below 0.98: {}", low.join(", ")) }));

    let slic = exact(&SchemeSpec::new(Scheme::SlicNovel, omega), &p, 0.0, 0.1);
    let sweep = exact(&SchemeSpec::new(Scheme::B1Sweep, omega), &p, 0.0, 0.1);
    let b = slic < 0.5 && sweep >= 0.9;
    parts.push(format!("(b) slic {slic:.3}, b1_sweep {sweep:.3}"));

    let pp = &maps.iter().find(|(s, _)| *s == Scheme::Pulsepol).unwrap().1;
    let r0 = pp.grid.rabi_rel.iter().position(|r| r.abs() < 1e-12).unwrap();
    let band: Vec<f64> = (0..pp.grid.delta_over_omega.len())
        .filter(|&k| pp.grid.delta_over_omega[k].abs() <= 0.2 + 1e-9)
        .map(|k| pp.value(k, r0))
        .collect();
    let worst = band.iter().cloned().fold(f64::MAX, f64::min);
    let c = worst >= 0.9;
    parts.push(format!("(c) pulsepol min {worst:.3} over |d| <= 0.2"));

    let wide = ScanGrid::new(scan::linspace(-1.25, 1.25, 101), grid.rabi_rel.clone()).unwrap();
    let d = match scan::scan_with(&SchemeSpec::new(Scheme::AdaptTopdnp, omega), &p, &wide, &m) {
        Ok(h) => {
            let runs = sideband_clusters(&h, 0.8);
            let list: Vec<String> = runs.iter().map(|(lo, hi)| format!("[{lo:.3}, {hi:.3}]")).collect();
            parts.push(format!("(d) adapt sidebands >= 0.8: {}", list.join(" ")));
            runs.len() >= 2
        }
        Err(e) => {
            parts.push(format!("(d) {e}"));
            false
        }
    };
    Outcome { pass: a && b && c && d, detail: parts.join("; ") }
}

/// Half the width (in absolute units) of the ≥ `level` run around zero.
fn half_width(xs: &[f64], vals: &[f64], level: f64) -> f64 {
    let zero = (0..xs.len()).min_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs())).unwrap();
    if vals[zero] < level {
        return 0.0;
    }
    let mut lo = zero;
    while lo > 0 && vals[lo - 1] >= level {
        lo -= 1;
    }
    let mut hi = zero;
    while hi + 1 < xs.len() && vals[hi + 1] >= level {
        hi += 1;
    }
    0.5 * (xs[hi] - xs[lo])
}

fn c6_scaling() -> Outcome {
    let p = reference();
    let m = mapper();
    let delta_band = |omega: f64| -> Result<f64, String> {
        let g = ScanGrid::new(scan::linspace(-0.5, 0.5, 401), vec![0.0]).unwrap();
        let h = scan::scan_with(&SchemeSpec::new(Scheme::Pulsepol, omega), &p, &g, &m).map_err(|e| e.to_string())?;
        let xs: Vec<f64> = g.delta_over_omega.iter().map(|d| d * omega).collect();
        Ok(half_width(&xs, h.row(0), 0.9))
    };
    let rabi_band = |omega: f64| -> Result<f64, String> {
        let g = ScanGrid::new(vec![0.0], scan::linspace(-0.3, 0.3, 1201)).unwrap();
        let h = scan::scan_with(&SchemeSpec::new(Scheme::SlicNovel, omega), &p, &g, &m).map_err(|e| e.to_string())?;
        let xs: Vec<f64> = g.rabi_rel.iter().map(|r| r * omega).collect();
        Ok(half_width(&xs, &h.column(0), 0.9))
    };
    match (delta_band(100.0), delta_band(200.0), rabi_band(100.0), rabi_band(200.0)) {
        (Ok(d1), Ok(d2), Ok(r1), Ok(r2)) => {
            let ratio = if d1 > 0.0 { d2 / d1 } else { 0.0 };
            Outcome {
                pass: ratio >= 1.5 && r1 <= 4.0 && r2 <= 4.0,
                detail: format!(
                    "pulsepol delta half-width {d1:.2} -> {d2:.2} (x{ratio:.2}), slic Rabi-error half-width {r1:.2} -> {r2:.2} (limit 4 A)"
                ),
            }
        }
        (a, b, c, d) => Outcome {
            pass: false,
            detail: [a, b, c, d].into_iter().filter_map(Result::err).collect::<Vec<_>>().join("; "),
        },
    }
}

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

fn refined_sz(sch: &Schedule, p: &DnpParams, e: &ErrorModel, parts: usize) -> f64 {
    let engine = Propagator::new(*p, *e);
    let mut rho = propagate::initial_state().into_matrix();
    let segs = sch.prelude.iter().chain((0..sch.n_reps).flat_map(|_| sch.block.iter())).chain(&sch.postlude);
    for s in segs {
        let dt = s.duration / parts as f64;
        let u = expm_taylor(&engine.hamiltonian(&DriveSample::new(s.amp_start, s.phase)), dt);
        let ud = u.adjoint();
        for _ in 0..parts {
            rho = u.matmul(&rho).matmul(&ud);
        }
    }
    rho.trace_product(&engine.operators().sz).re
}

fn c7_refinement() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let schemes = [Scheme::SlicNovel, Scheme::S2hmPlain, Scheme::S2hmXy8, Scheme::Pulsepol, Scheme::AdaptTopdnp];
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let s = schemes[k % schemes.len()];
        let w = rng.gen_range(10.0..40.0);
        let p = DnpParams::new(w, rng.gen_range(0.5..2.0));
        let options = SchemeOptions { n_reps: Some(rng.gen_range(1..4)), ..SchemeOptions::default() };
        let spec = SchemeSpec::new(s, w * rng.gen_range(2.0..6.0)).with_options(options);
        let e = ErrorModel::new(rng.gen_range(-0.3..0.3) * spec.omega_rabi, rng.gen_range(-0.2..0.2));
        let sch = match spec.build(&p) {
            Ok(sch) => sch,
            Err(err) => return Outcome { pass: false, detail: format!("{}: {err}", s.name()) },
        };
        let coarse = propagate::final_polarization(&sch, &p, &e).unwrap() / 2.0;
        worst = worst.max((coarse - refined_sz(&sch, &p, &e, 200)).abs());
    }
    Outcome { pass: worst <= 1e-8, detail: format!("10 schedules, max |d<Sz>| {worst:.1e}") }
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let prefix = dir.path().join(format!("t{threads}/scan"));
        let out = Command::new(env!("CARGO_BIN_EXE_spinseq"))
            .args(["scan", "--set", r#"dnp={"omega_i":24,"a_perp":1}"#])
            .args(["--set", r#"scheme={"scheme":"pulsepol","omega_rabi":100}"#])
            .arg("--output")
            .arg(&prefix)
            .env("SPINSEQ_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        let mut path = prefix.into_os_string();
        path.push(".heatmap.csv");
        std::fs::read(path).map_err(|e| e.to_string())
    };
    match (run("1"), run("8")) {
        (Ok(a), Ok(b)) => Outcome {
            pass: a == b && !a.is_empty(),
            detail: format!("{} vs {} bytes, {}", a.len(), b.len(), if a == b { "identical" } else { "different" }),
        },
        (a, b) => Outcome { pass: false, detail: [a.err(), b.err()].into_iter().flatten().collect::<Vec<_>>().join("; ") },
    }
}

fn main() {
    let results = [
        verdict(1, "identity suite", Duration::from_secs(1), c1_identities),
        verdict(2, "dynamical equivalence", Duration::from_secs(10), c2_equivalence),
        verdict(3, "effective couplings", Duration::from_secs(60), c3_couplings),
        verdict(4, "cycle-log cross-check", Duration::from_secs(60), c4_cycle_log),
        verdict(5, "robustness heatmaps", Duration::from_secs(600), c5_heatmaps),
        verdict(6, "robustness scaling", Duration::from_secs(300), c6_scaling),
        verdict(7, "propagator refinement", Duration::from_secs(60), c7_refinement),
        verdict(8, "thread-count determinism", Duration::from_secs(600), c8_determinism),
    ];
    let failed = results.iter().filter(|r| !**r).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
