//! Subcommand implementations. Each returns a JSON payload for one record.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use specflow::cayley::{cayley, fp_distance, inv_cayley};
use specflow::matcore::{identity, op_norm, schatten_norm, ComplexMatrix};
use specflow::quad::QuadSpec;
use specflow::rdet::{det_p, det_p_reduced};
use specflow::sampling::random_unitary;
use specflow::scatter::{
    guillope_ratio, levinson_verify, resonance_detect, smatrix_1d, smatrix_1d_threshold, spath_1d, LevinsonSpec,
    NystromSpec, PhaseShiftTable, Potential1D, PotentialSpec, RadialPotential, RadialSPath, ResonanceClass,
};
use specflow::sflow::{
    capped_path, sf_alpha, sf_beta, sf_det, sf_open_path, sf_phillips, sf_phillips_generic, PhillipsSpec,
    Regularization, SpectralFlowReport,
};
use specflow::upath::UnitaryPath;

use crate::config::{named, MethodArg, Options};
use crate::matrix_io;
use crate::CliError;

fn quad(opts: &Options) -> QuadSpec {
    opts.tol.map(QuadSpec::with_abs_tol).unwrap_or_default()
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("library records serialize")
}

fn run_method(path: &UnitaryPath, opts: &Options) -> Result<SpectralFlowReport, CliError> {
    let q = quad(opts);
    let method = opts.method.unwrap_or(MethodArg::Phillips);
    let closed = path.is_closed();
    log::info!("method {method:?} on a {} path of dimension {}", if closed { "closed" } else { "open" }, path.dim());
    let report = match (method, closed) {
        (MethodArg::Phillips, true) => sf_phillips(path, &PhillipsSpec::default())?,
        (MethodArg::Phillips, false) => sf_phillips(&capped_path(path)?, &PhillipsSpec::default())?,
        (MethodArg::Alpha, true) => sf_alpha(path, opts.n.unwrap_or(1), &q)?,
        (MethodArg::Beta, true) => sf_beta(path, opts.r.unwrap_or(1.0), &q)?,
        (MethodArg::Det, true) => sf_det(path, opts.p.unwrap_or(1), &q)?,
        (MethodArg::Alpha, false) => {
            sf_open_path(path, Regularization::Alpha(opts.n.unwrap_or(1)), &q, &PhillipsSpec::default())?
        }
        (MethodArg::Beta, false) => {
            sf_open_path(path, Regularization::Beta(opts.r.unwrap_or(1.0)), &q, &PhillipsSpec::default())?
        }
        (MethodArg::Det, false) => {
            return Err(CliError::usage("the determinant method needs a closed path"));
        }
    };
    Ok(report)
}

/// `--model k=2,dim=4`.
pub fn sf_loop(model: &str, opts: &Options) -> Result<Value, CliError> {
    let [k, dim] = named(model, ["k", "dim"])?;
    let path = model_path(k, dim)?;
    let report = run_method(&path, opts)?;
    Ok(json!({ "path": format!("model:{k}:{dim}"), "report": to_value(&report) }))
}

fn model_path(k: f64, dim: f64) -> Result<UnitaryPath, CliError> {
    if k.fract() != 0.0 || dim.fract() != 0.0 || k < 1.0 || dim < 1.0 {
        return Err(CliError::usage(format!("model loop needs positive integers, got k={k}, dim={dim}")));
    }
    Ok(UnitaryPath::model_loop(k as usize, dim as usize)?)
}

/// Paths addressed as `model:k:dim`, `geodesic:file` or `scattering:config`.
pub fn sf_path(name: &str, opts: &Options) -> Result<Value, CliError> {
    let (kind, rest) = name.split_once(':').ok_or_else(|| CliError::usage(format!("unknown path `{name}`")))?;
    let report = match kind {
        "model" => {
            let (k, dim) = rest
                .split_once(':')
                .ok_or_else(|| CliError::usage("expected model:k:dim"))?;
            let parse = |s: &str| s.parse::<f64>().map_err(|_| CliError::usage(format!("`{s}` is not a number")));
            run_method(&model_path(parse(k)?, parse(dim)?)?, opts)?
        }
        "geodesic" => {
            let y = matrix_io::load(Path::new(rest)).map_err(CliError::input)?;
            let path = UnitaryPath::geodesic(&y);
            let closed = op_norm(&(path.end() - identity(y.nrows()))) <= 1e-8;
            run_method(&path.with_closed(closed), opts)?
        }
        "scattering" => scattering_flow(&PotentialSpec::load(Path::new(rest))?, opts)?,
        _ => return Err(CliError::usage(format!("unknown path kind `{kind}`"))),
    };
    Ok(json!({ "path": name, "report": to_value(&report) }))
}

fn scattering_flow(system: &PotentialSpec, opts: &Options) -> Result<SpectralFlowReport, CliError> {
    match system {
        PotentialSpec::Line(v) => {
            let resonant = resonance_detect(Some(v), None, 1)? == ResonanceClass::SResonance;
            let s0 = smatrix_1d_threshold(v, resonant)?;
            let path = spath_1d(v, s0).compactify(1.0)?;
            run_method(&path, opts)
        }
        PotentialSpec::Radial(v) => {
            if !matches!(opts.method, None | Some(MethodArg::Phillips)) {
                return Err(CliError::usage("radial scattering paths support only --method phillips; use `levinson` for the integral routes"));
            }
            let threshold = match resonance_detect(None, Some(v), 3)? {
                ResonanceClass::SResonance => vec![PI],
                _ => Vec::new(),
            };
            Ok(sf_phillips_generic(&RadialSPath::new(v.clone(), threshold), &PhillipsSpec::default())?)
        }
    }
}

/// Regularized determinant of a unitary read from a file, by both formulas.
pub fn det(matrix: &Path, opts: &Options) -> Result<Value, CliError> {
    let u = matrix_io::load(matrix).map_err(CliError::input)?;
    let p = opts.p.unwrap_or(1);
    let direct = det_p(&u, p)?;
    let reduced = det_p_reduced(&u, p)?;
    Ok(json!({
        "matrix": matrix.display().to_string(),
        "p": p,
        "definition": to_value(&direct),
        "reduced": to_value(&reduced),
        "discrepancy": (direct.value - reduced.value).norm(),
    }))
}

/// Cayley transform of one unitary; with `other`, the `F_p` distance between the two.
pub fn cayley_cmd(matrix: &Path, other: Option<&Path>, opts: &Options) -> Result<Value, CliError> {
    let u = matrix_io::load(matrix).map_err(CliError::input)?;
    let t = cayley(&u)?;
    let mut out = json!({
        "matrix": matrix.display().to_string(),
        "subspace_dim": t.subspace_dim(),
        "eigenvalues": t.eigenvalues(),
        "round_trip_defect": op_norm(&(inv_cayley(&t) - &u)),
        "invariant_defects": t.invariant_defects(),
    });
    if let Some(other) = other {
        let w = matrix_io::load(other).map_err(CliError::input)?;
        let tw = cayley(&w)?;
        let p = opts.p.map_or(2.0, f64::from);
        let distance = fp_distance(&t, &tw, p)?;
        let half = 0.5 * schatten_norm(&(&u - &w), p)?;
        out["other"] = json!(other.display().to_string());
        out["p"] = json!(p);
        out["fp_distance"] = json!(distance);
        out["half_schatten_distance"] = json!(half);
    }
    Ok(out)
}

/// Levinson check for a well given inline or through a potential file.
pub fn levinson(system: &PotentialSpec, opts: &Options) -> Result<(Value, Option<(String, String)>), CliError> {
    let mut spec = LevinsonSpec::default();
    if let Some(tol) = opts.tol {
        spec.quad.abs_tol = tol;
    }
    let report = levinson_verify(system, &spec)?;
    log::info!("N = {}, verdict {}", report.bound_states, report.verdict.pass);
    let sweep = match opts.grid {
        Some(n) => Some(("levinson_sweep.csv".to_string(), sweep_csv(system, n, opts.lmax)?)),
        None => None,
    };
    Ok((to_value(&report), sweep))
}

/// Parses `--well depth=..,halfwidth=..` (line) or `--ball depth=..,radius=..` (radial).
pub fn inline_system(dim: u32, well: Option<&str>, ball: Option<&str>) -> Result<PotentialSpec, CliError> {
    match (dim, well, ball) {
        (1, Some(w), None) => {
            let [depth, halfwidth] = named(w, ["depth", "halfwidth"])?;
            Ok(PotentialSpec::Line(Potential1D::square_well(depth, halfwidth)?))
        }
        (3, None, Some(b)) | (3, Some(b), None) => {
            let [depth, radius] = named(b, ["depth", "radius"])?;
            Ok(PotentialSpec::Radial(RadialPotential::ball(depth, radius)?))
        }
        (d, _, _) if d != 1 && d != 3 => Err(CliError::usage(format!("dimension {d} is not supported; use 1 or 3"))),
        _ => Err(CliError::usage("give exactly one of --well (d = 1) or --ball (d = 3), or --potential")),
    }
}

/// λ-sweep on a geometric grid: S-matrix data on the line, phase shifts in 3D.
fn sweep_csv(system: &PotentialSpec, n: usize, lmax: Option<usize>) -> Result<String, CliError> {
    let n = n.max(2);
    let energies: Vec<f64> = (0..n).map(|j| 10f64.powf(-2.0 + 6.0 * j as f64 / (n - 1) as f64)).collect();
    match system {
        PotentialSpec::Line(v) => {
            let mut csv = String::from("lambda,re_t,im_t,re_r_left,im_r_left,arg_det_s,trace_norm_s_minus_id\n");
            for &e in &energies {
                let s = smatrix_1d(v, e)?;
                let det = s.determinant();
                let norm = schatten_norm(&(&s - identity(2)), 1.0)?;
                let (t, r) = (s[(0, 0)], s[(1, 0)]);
                let _ = writeln!(csv, "{e:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{norm:.12e}", t.re, t.im, r.re, r.im, det.arg());
            }
            Ok(csv)
        }
        PotentialSpec::Radial(v) => Ok(PhaseShiftTable::build(v, &energies, lmax)?.to_csv()),
    }
}

/// Fast invariant suite; each entry is `(name, pass, detail)`.
pub fn selftest(opts: &Options) -> Vec<(&'static str, bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.unwrap_or(0));
    let mut out = Vec::new();
    let q = QuadSpec::with_abs_tol(1e-10);

    let mut worst: f64 = 0.0;
    let mut ok = true;
    for k in 1..=3usize {
        let path = UnitaryPath::model_loop(k, k + 1).expect("k ≤ dim");
        let reports = [
            sf_phillips(&path, &PhillipsSpec::default()),
            sf_alpha(&path, 2, &q),
            sf_beta(&path, 1.0, &q),
            sf_det(&path, 2, &q),
        ];
        for r in reports {
            match r {
                Ok(r) => {
                    ok &= r.value == k as i64;
                    worst = worst.max(r.residual);
                }
                Err(_) => ok = false,
            }
        }
    }
    out.push(("model_loops", ok && worst < 1e-6, format!("max residual {worst:.2e}")));

    let (mut det_gap, mut trip): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let n = rng.gen_range(1..=8);
        let u = random_unitary(&mut rng, n);
        for p in 1..=4 {
            if let (Ok(a), Ok(b)) = (det_p(&u, p), det_p_reduced(&u, p)) {
                det_gap = det_gap.max((a.value - b.value).norm() / a.value.norm());
            } else {
                det_gap = f64::INFINITY;
            }
        }
        trip = trip.max(cayley(&u).map_or(f64::INFINITY, |t| op_norm(&(inv_cayley(&t) - &u))));
    }
    out.push(("determinant_formulas", det_gap < 1e-10, format!("relative gap {det_gap:.2e}")));
    out.push(("cayley_round_trip", trip < 1e-10, format!("defect {trip:.2e}")));

    let well = Potential1D::square_well(5.0, 1.0).expect("valid well");
    let mut gap: f64 = 0.0;
    for lambda in [0.5, 3.0, 20.0] {
        let det = smatrix_1d(&well, lambda).map(|s| s.determinant());
        let ratio = guillope_ratio(&well, lambda, 2, &NystromSpec::default());
        gap = gap.max(match (det, ratio) {
            (Ok(d), Ok(r)) => (d - r).norm(),
            _ => f64::INFINITY,
        });
    }
    out.push(("guillope_identity", gap < 1e-5, format!("max gap {gap:.2e}")));

    let unit = (0..10).all(|j| {
        let s = smatrix_1d(&well, 0.01 * 3f64.powi(j)).unwrap_or_else(|_| ComplexMatrix::zeros(2, 2));
        op_norm(&(s.adjoint() * &s - identity(2))) < 1e-9
    });
    out.push(("line_smatrix_unitary", unit, "10 energies".into()));

    let ball = PotentialSpec::Radial(RadialPotential::ball(3.0, 1.0).expect("valid ball"));
    let (pass, detail) = match levinson_verify(&ball, &LevinsonSpec::default()) {
        Ok(r) => (
            r.verdict.pass && r.phillips.value == -1,
            format!("N = {}, routes {:.4} / {:.4}", r.bound_states, r.sf_regularized.raw.re, r.sf_subtracted.raw.re),
        ),
        Err(e) => (false, e.to_string()),
    };
    out.push(("radial_levinson_routes", pass, detail));
    out
}
