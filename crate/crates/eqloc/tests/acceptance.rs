//! Acceptance gate: every criterion runs at its stated tolerance and prints
//! one pass/fail line. The criteria run sequentially inside one test so the
//! runtime budgets are measured without contention from sibling tests.

use std::time::Instant;

use eqloc::ad::DiffMode;
use eqloc::cli::{execute, Mode, RunConfig};
use eqloc::localization::RunOptions;
use eqloc::models::build;
use eqloc::proofpath::{deformation_invariance, fixed_point_limit, restricted_closedness_residual, tail_decay};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const PI: f64 = std::f64::consts::PI;

fn opts() -> RunOptions {
    RunOptions { threads: 2, ..Default::default() }
}

type Criterion = (&'static str, fn() -> Result<String, String>);

fn c01_sphere_verify() -> Result<String, String> {
    let start = Instant::now();
    let config = RunConfig::new(Mode::Verify, "sphere");
    let (report, ok) = execute(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !ok {
        return Err(format!("checks failed: {:?}", report.checks));
    }
    let l = report.lhs.ok_or("missing lhs")?.value;
    let r = report.rhs.ok_or("missing rhs")?;
    let expect = 4.0 * PI;
    let lhs_rel = (l - expect).abs() / expect;
    if lhs_rel > 1e-6 {
        return Err(format!("lhs {l} misses 4pi by {lhs_rel:.3e} relative"));
    }
    let rhs_abs = (r - expect).abs();
    if rhs_abs > 1e-12 * expect {
        return Err(format!("rhs {r} differs from 4pi by {rhs_abs:.3e}"));
    }
    if elapsed.as_secs_f64() > 1.0 {
        return Err(format!("runtime {elapsed:?} exceeds 1 s"));
    }
    Ok(format!("lhs rel {lhs_rel:.2e}, rhs abs {rhs_abs:.2e}, runtime {elapsed:?}"))
}

fn c02_exponential_pair() -> Result<String, String> {
    let config = RunConfig::new(Mode::Verify, "sphere_exp");
    let (report, ok) = execute(&config).map_err(|e| e.to_string())?;
    if !ok {
        return Err(format!("checks failed: {:?}", report.checks));
    }
    let expect = 2.0 * PI * (1.0f64.exp() - (-1.0f64).exp());
    let l = report.lhs.ok_or("missing lhs")?.value;
    let r = report.rhs.ok_or("missing rhs")?;
    for (side, v) in [("lhs", l), ("rhs", r)] {
        let rel = (v - expect).abs() / expect;
        if rel > 1e-6 {
            return Err(format!("{side} {v} misses target by {rel:.3e}"));
        }
    }
    Ok(format!("both sides at {expect:.6} within 1e-6"))
}

fn c03_product_model() -> Result<String, String> {
    let start = Instant::now();
    let config = RunConfig::new(Mode::Verify, "s2xs2");
    let (report, ok) = execute(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !ok {
        return Err(format!("checks failed: {:?}", report.checks));
    }
    let expect = 16.0 * PI * PI;
    let l = report.lhs.ok_or("missing lhs")?.value;
    let r = report.rhs.ok_or("missing rhs")?;
    for (side, v) in [("lhs", l), ("rhs", r)] {
        let rel = (v - expect).abs() / expect;
        if rel > 1e-5 {
            return Err(format!("{side} {v} misses 16 pi^2 by {rel:.3e}"));
        }
    }
    if report.fixed_points.len() != 4 {
        return Err(format!("expected 4 fixed points, found {}", report.fixed_points.len()));
    }
    if elapsed.as_secs_f64() > 60.0 {
        return Err(format!("runtime {elapsed:?} exceeds 60 s"));
    }
    Ok(format!("both sides 16 pi^2, 4 fixed points, runtime {elapsed:?}"))
}

fn c04_scaling_family() -> Result<String, String> {
    for c in [0.5, 2.0, 7.0] {
        let config = RunConfig::new(Mode::Verify, &format!("sphere_scaled:{c}"));
        let (report, ok) = execute(&config).map_err(|e| e.to_string())?;
        if !ok {
            return Err(format!("c={c}: checks failed: {:?}", report.checks));
        }
        let expect = 4.0 * PI;
        let l = report.lhs.ok_or("missing lhs")?.value;
        let r = report.rhs.ok_or("missing rhs")?;
        for (side, v) in [("lhs", l), ("rhs", r)] {
            let rel = (v - expect).abs() / expect;
            if rel > 1e-6 {
                return Err(format!("c={c}: {side} {v} misses 4pi by {rel:.3e}"));
            }
        }
        for fp in &report.fixed_points {
            let lambda_prod: f64 = fp.lambdas.iter().product();
            if (lambda_prod.abs() - c).abs() > 1e-10 * c {
                return Err(format!("c={c}: lambda product {lambda_prod} does not scale"));
            }
            if (fp.alpha0.abs() - c).abs() > 1e-10 * c {
                return Err(format!("c={c}: alpha0 {} does not scale", fp.alpha0));
            }
            if (fp.contribution.abs() - 1.0).abs() > 1e-10 {
                return Err(format!("c={c}: contribution {} not invariant", fp.contribution));
            }
        }
    }
    Ok("both sides 4pi at c in {0.5, 2, 7}; lambda and alpha0 scale, ratio invariant".into())
}

fn c05_deformation_invariance() -> Result<String, String> {
    let mut notes = Vec::new();
    for name in ["sphere", "sphere_exp"] {
        let model = build(name).map_err(|e| e.to_string())?;
        let fam = deformation_invariance(&model, &[0.0, 0.5, 1.0, 2.0, 5.0], &opts())
            .map_err(|e| e.to_string())?;
        let base = fam.rows[0].value;
        for row in &fam.rows[1..] {
            let rel = row.residual / base.abs();
            if rel > 1e-6 {
                return Err(format!("{name}: |I({}) - I(0)| rel {rel:.3e}", row.r));
            }
        }
        notes.push(format!("{name} max rel {:.2e}", fam.max_residual));
    }
    Ok(notes.join("; "))
}

fn c06_restricted_closedness() -> Result<String, String> {
    let model = build("sphere").map_err(|e| e.to_string())?;
    let forward = restricted_closedness_residual(&model, 2.0, 200, &opts()).map_err(|e| e.to_string())?;
    if forward > 1e-8 {
        return Err(format!("forward-mode residual {forward:.3e} exceeds 1e-8"));
    }
    let mut fd_opts = opts();
    fd_opts.mode = DiffMode::FiniteDifference { step: 1e-5 };
    let fd = restricted_closedness_residual(&model, 2.0, 200, &fd_opts).map_err(|e| e.to_string())?;
    if fd > 1e-4 {
        return Err(format!("finite-difference residual {fd:.3e} exceeds 1e-4"));
    }
    let control = build("control_noninvariant_metric").map_err(|e| e.to_string())?;
    let broken = restricted_closedness_residual(&control, 2.0, 200, &opts()).map_err(|e| e.to_string())?;
    if broken < 1e-3 {
        return Err(format!("control residual {broken:.3e} below 1e-3"));
    }
    Ok(format!("forward {forward:.2e}, fd {fd:.2e}, control {broken:.2e}"))
}

fn c07_tail_localization() -> Result<String, String> {
    let model = build("sphere").map_err(|e| e.to_string())?;
    let tab = tail_decay(&model, 0.3, &[1.0, 5.0, 10.0, 20.0], &opts()).map_err(|e| e.to_string())?;
    if tab.monotonicity_violation > 0.0 {
        return Err(format!("tail not strictly decreasing ({:+.3e})", tab.monotonicity_violation));
    }
    let ratio = tab.rows[3].value / tab.rows[2].value;
    if ratio > 0.7 {
        return Err(format!("T(20)/T(10) = {ratio:.4} exceeds 0.7"));
    }
    if tab.ratio_vs_bound > 1.0 {
        return Err(format!("exponential-rate bound violated ({:.4})", tab.ratio_vs_bound));
    }
    Ok(format!("strictly decreasing, T(20)/T(10) = {ratio:.3}, rate bound met"))
}

fn c08_gaussian_limits() -> Result<String, String> {
    let model = build("sphere").map_err(|e| e.to_string())?;
    let o = opts();
    let zeros = eqloc::fixedpoints::find_zeros(&model, &o.zero_config, DiffMode::Forward)
        .map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for z in &zeros {
        let fp = eqloc::fixedpoints::populate(&model, z).map_err(|e| e.to_string())?;
        let table = fixed_point_limit(&model, &fp, 0.3, &[10.0, 25.0, 50.0, 100.0], &o)
            .map_err(|e| e.to_string())?;
        if (table.series.target - 2.0 * PI).abs() > 1e-12 {
            return Err(format!("{}: target {} is not 2pi", fp.chart, table.series.target));
        }
        if table.final_relative_error > 0.02 {
            return Err(format!(
                "{}: C(100) off target by {:.3e} relative",
                fp.chart, table.final_relative_error
            ));
        }
        if table.error_increase > 0.0 {
            return Err(format!("{}: error increases over the last entries", fp.chart));
        }
        notes.push(format!("{} final rel {:.2e}", fp.chart, table.final_relative_error));
    }
    Ok(notes.join("; "))
}

fn c09_algebra_suite() -> Result<String, String> {
    use eqloc::ad::Jet;
    use eqloc::forms::KForm;
    use eqloc::geometry::{Chart, Orientation};
    use eqloc::linalg::{pfaffian, Mat};
    use eqloc::rng::SplitMix64;
    use std::sync::Arc;

    let start = Instant::now();
    let mut rng = SplitMix64::new(0x9e37);

    // d of d vanishes on transcendental data
    let f = KForm::scalar_field(3, Arc::new(|x: &[Jet]| {
        &(&x[0].sin() * &x[1].exp()) + &(&x[2].powi(3) * &x[0])
    }));
    let ddf = f
        .exterior_derivative(DiffMode::Forward)
        .unwrap()
        .exterior_derivative(DiffMode::Forward)
        .unwrap();
    for _ in 0..100 {
        let p = [rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0)];
        for c in ddf.eval(&p) {
            if c.abs() > 1e-10 {
                return Err(format!("d(d f) component {c:.3e}"));
            }
        }
    }

    // Leibniz and Cartan identities on polynomial data
    let a = KForm::new(3, 1, Arc::new(|x: &[Jet]| {
        vec![&x[0] * &x[1], x[2].powi(2), &x[0] + &x[2]]
    }))
    .unwrap();
    let b = KForm::new(3, 1, Arc::new(|x: &[Jet]| {
        vec![x[1].clone(), &x[0] * &x[2], Jet::Re(1.0)]
    }))
    .unwrap();
    let v: eqloc::ad::VecFn = Arc::new(|x: &[Jet]| vec![x[1].clone(), -&x[0], &x[2] * &x[0]]);
    let wedge = a.wedge(&b).unwrap();
    let lhs_leibniz = wedge.exterior_derivative(DiffMode::Forward).unwrap();
    let rhs_leibniz = a
        .exterior_derivative(DiffMode::Forward)
        .unwrap()
        .wedge(&b)
        .unwrap()
        .add(&a.wedge(&b.exterior_derivative(DiffMode::Forward).unwrap()).unwrap().scale(-1.0))
        .unwrap();
    let lhs_cartan = wedge.contract(&v).unwrap();
    let rhs_cartan = a
        .contract(&v)
        .unwrap()
        .wedge(&b)
        .unwrap()
        .add(&a.wedge(&b.contract(&v).unwrap()).unwrap().scale(-1.0))
        .unwrap();
    for _ in 0..100 {
        let p = [rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0)];
        for (u, w) in lhs_leibniz.eval(&p).iter().zip(rhs_leibniz.eval(&p).iter()) {
            if (u - w).abs() > 1e-12 {
                return Err(format!("Leibniz residual {:.3e}", (u - w).abs()));
            }
        }
        for (u, w) in lhs_cartan.eval(&p).iter().zip(rhs_cartan.eval(&p).iter()) {
            if (u - w).abs() > 1e-12 {
                return Err(format!("Cartan residual {:.3e}", (u - w).abs()));
            }
        }
        // graded commutativity of two 1-forms: a^b + b^a = 0
        let ab = a.wedge(&b).unwrap().eval(&p);
        let ba = b.wedge(&a).unwrap().eval(&p);
        for (u, w) in ab.iter().zip(ba.iter()) {
            if (u + w).abs() > 1e-12 {
                return Err(format!("graded commutativity residual {:.3e}", (u + w).abs()));
            }
        }
    }

    // Pfaffian squared equals the determinant on random skew matrices
    for _ in 0..200 {
        let n = 2 * (1 + (rng.next_u64() % 4) as usize);
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let x = rng.in_range(-2.0, 2.0);
                m[(i, j)] = x;
                m[(j, i)] = -x;
            }
        }
        let pf = pfaffian(&m);
        let det = m.det();
        if (pf * pf - det).abs() > 1e-10 * (1.0 + det.abs()) {
            return Err(format!("pf^2 {:.6e} vs det {det:.6e}", pf * pf));
        }
    }

    // orientation flip negates the oriented square root exactly
    let mut l = Mat::zeros(4);
    l[(0, 1)] = -1.7;
    l[(1, 0)] = 1.7;
    l[(2, 3)] = 0.4;
    l[(3, 2)] = -0.4;
    let (plus, _) =
        eqloc::fixedpoints::sqrt_det(&l, &Mat::identity(4), Orientation::Positive, "t").unwrap();
    let (minus, _) =
        eqloc::fixedpoints::sqrt_det(&l, &Mat::identity(4), Orientation::Negative, "t").unwrap();
    if plus != -minus {
        return Err(format!("orientation flip changed magnitude: {plus} vs {minus}"));
    }

    // Stokes on a box: integral of the derivative equals the boundary sum
    let beta = KForm::new(2, 1, Arc::new(|x: &[Jet]| {
        vec![&x[0].powi(2) * &x[1], &(&x[0] * &x[1].powi(3)) + &x[0].powi(2)]
    }))
    .unwrap();
    let chart = Chart::new("box", vec![(-1.0, 2.0), (0.5, 1.5)], Orientation::Positive, true).unwrap();
    let dbeta = beta.exterior_derivative(DiffMode::Forward).unwrap();
    let inner = eqloc::quadrature::integrate_top_form(&dbeta, &chart, 16, 1)
        .map_err(|e| e.to_string())?
        .value;
    let (x0, x1) = chart.bounds[0];
    let (y0, y1) = chart.bounds[1];
    let grid = eqloc::quadrature::QuadratureGrid::new(&[(0.0, 1.0)], 16);
    let line = |f: &(dyn Fn(f64) -> f64 + Sync), a: f64, b: f64| -> f64 {
        eqloc::quadrature::integrate_density(
            &grid,
            &eqloc::quadrature::Region::Whole,
            1,
            |t: &[f64]| f(a + (b - a) * t[0]) * (b - a),
        )
    };
    let mut boundary = 0.0;
    boundary += line(&|x| beta.eval(&[x, y0])[0], x0, x1);
    boundary += line(&|y| beta.eval(&[x1, y])[1], y0, y1);
    boundary -= line(&|x| beta.eval(&[x, y1])[0], x0, x1);
    boundary -= line(&|y| beta.eval(&[x0, y])[1], y0, y1);
    if (inner - boundary).abs() > 1e-10 {
        return Err(format!("Stokes residual {:.3e}", (inner - boundary).abs()));
    }

    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() > 10.0 {
        return Err(format!("algebra suite took {elapsed:?}, budget 10 s"));
    }
    Ok(format!("all identities hold, runtime {elapsed:?}"))
}

fn c10_controls_behave() -> Result<String, String> {
    // not equivariantly closed: exactly the closedness check fails
    let config = RunConfig::new(Mode::Verify, "control_nonclosed");
    let (report, ok) = execute(&config).map_err(|e| e.to_string())?;
    if !ok {
        return Err("nonclosed control did not fail as labeled".into());
    }
    for c in &report.checks {
        match (c.name.as_str(), c.pass) {
            ("closedness", Some(true)) => return Err("closedness unexpectedly passed".into()),
            ("closedness", Some(false)) => {}
            (name, Some(false)) => return Err(format!("unexpected failure: {name}")),
            _ => {}
        }
    }
    if report.check("theorem_comparison").and_then(|c| c.pass).is_some() {
        return Err("comparison should be skipped when closedness fails".into());
    }

    // non-invariant metric: comparison passes, invariance and the
    // restricted-closedness test fail
    let config = RunConfig::new(Mode::Verify, "control_noninvariant_metric");
    let (report, ok) = execute(&config).map_err(|e| e.to_string())?;
    if !ok {
        return Err("noninvariant control did not fail exactly as labeled".into());
    }
    if report.check("theorem_comparison").and_then(|c| c.pass) != Some(true) {
        return Err("two-sided comparison should pass for the metric control".into());
    }
    if report.check("metric_invariance").and_then(|c| c.pass) != Some(false) {
        return Err("metric invariance should fail".into());
    }
    if report.check("restricted_closedness").and_then(|c| c.pass) != Some(false) {
        return Err("restricted closedness should fail".into());
    }

    // translation torus: zero equals zero over an empty fixed-point list
    let config = RunConfig::new(Mode::Verify, "torus_translate");
    let (report, ok) = execute(&config).map_err(|e| e.to_string())?;
    if !ok {
        return Err(format!("torus checks failed: {:?}", report.checks));
    }
    if !report.fixed_points.is_empty() {
        return Err("torus should have no fixed points".into());
    }
    if report.lhs.map(|l| l.value) != Some(0.0) || report.rhs != Some(0.0) {
        return Err("torus sides should both be exactly zero".into());
    }
    Ok("controls fail exactly their labeled checks; torus verifies 0 = 0".into())
}

fn c11_determinism() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_eqloc");
    let dir = std::env::temp_dir();
    let p1 = dir.join("eqloc_accept_p1.json");
    let p8 = dir.join("eqloc_accept_p8.json");
    for (path, par) in [(&p1, "1"), (&p8, "8")] {
        let status = std::process::Command::new(bin)
            .args([
                "verify",
                "sphere",
                "--seed",
                "0",
                "--parallel",
                par,
                "--report",
                path.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("verify sphere --parallel {par} exited {status}"));
        }
    }
    let a = std::fs::read(&p1).map_err(|e| e.to_string())?;
    let b = std::fs::read(&p8).map_err(|e| e.to_string())?;
    if a != b {
        return Err("reports differ between --parallel 1 and --parallel 8".into());
    }
    Ok(format!("byte-identical reports ({} bytes)", a.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Criterion> = vec![
        ("01 sphere two-sided identity", c01_sphere_verify),
        ("02 exponential sphere identity", c02_exponential_pair),
        ("03 product of spheres", c03_product_model),
        ("04 scaling family", c04_scaling_family),
        ("05 deformation invariance", c05_deformation_invariance),
        ("06 restricted-closedness residuals", c06_restricted_closedness),
        ("07 tail localization", c07_tail_localization),
        ("08 per-pole Gaussian limits", c08_gaussian_limits),
        ("09 algebra property suite", c09_algebra_suite),
        ("10 controls behave", c10_controls_behave),
        ("11 deterministic reports", c11_determinism),
    ];
    let mut failures = Vec::new();
    for (name, body) in criteria {
        match body() {
            Ok(detail) => println!("pass  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
