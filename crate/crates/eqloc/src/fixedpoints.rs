//! Zeros of the model vector field, their linearizations, and the oriented
//! square root of the linearization determinant.
//!
//! Zeros live in the centered fixed-point charts, never in the integration
//! chart. The linearization at a zero is minus the Jacobian of the field,
//! which on the rotation normal form `lambda (x_2 d_1 - x_1 d_2)` acts as
//! `L e_1 = lambda e_2`, `L e_2 = -lambda e_1`. The oriented square root is
//! a Pfaffian in a positively oriented orthonormal frame and equals the
//! product of the rotation numbers.

use crate::ad::DiffMode;
use crate::geometry::{Model, Orientation, Point};
use crate::linalg::{pfaffian, symmetric_eigenvalues, Mat};
use crate::{Error, Result};

/// Newton search controls.
#[derive(Clone, Copy, Debug)]
pub struct ZeroFindingConfig {
    /// Seeds per axis on the coarse grid (the chart origin is always tried
    /// first).
    pub grid_resolution: usize,
    pub max_iterations: usize,
    /// Acceptance threshold on the field magnitude at a converged point.
    pub zero_tol: f64,
    /// Converged points closer than this are the same zero.
    pub dedup_radius: f64,
}

impl Default for ZeroFindingConfig {
    fn default() -> Self {
        ZeroFindingConfig {
            grid_resolution: 5,
            max_iterations: 50,
            zero_tol: 1e-12,
            dedup_radius: 1e-6,
        }
    }
}

/// A verified zero before the local data is filled in.
#[derive(Clone, Debug)]
pub struct ZeroPoint {
    pub chart_index: usize,
    pub chart: String,
    pub coords: Point,
    /// Minus the field Jacobian at the zero.
    pub linearization: Mat,
}

/// A zero with its local contribution data.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub chart_index: usize,
    pub chart: String,
    pub coords: Point,
    pub linearization: Mat,
    /// Rotation numbers; individual signs are frame-dependent diagnostics,
    /// only their product is contract-bearing.
    pub lambdas: Vec<f64>,
    pub sqrt_det: f64,
    /// Value of the degree-0 part of the evaluated form at the zero.
    pub alpha0: f64,
}

/// L = minus the Jacobian of the field at a point where the field vanishes.
pub fn linearization(field: &crate::geometry::VectorField, p: &[f64], mode: DiffMode) -> Mat {
    field.jacobian_at(p, mode).scale(-1.0)
}

const SKEW_TOL: f64 = 1e-8;

/// Oriented square root of `det L` with respect to the metric at the zero:
/// express L in a positively oriented g-orthonormal frame, check skewness,
/// and take the Pfaffian matching the rotation block normal form. Also
/// returns the rotation numbers.
pub fn sqrt_det(l: &Mat, g_p: &Mat, orientation: Orientation, chart: &str) -> Result<(f64, Vec<f64>)> {
    let n = l.n;
    // g = C^T C gives a g-orthonormal basis as the columns of C^{-1}; the
    // Cholesky factor has positive diagonal, so this basis is positively
    // oriented relative to the chart axes.
    let c = g_p.cholesky_upper()?;
    let mut basis = c.inverse()?;
    // Correct to the manifold orientation: flip the last vector when the
    // chart carries a negative sign.
    if orientation == Orientation::Negative {
        for i in 0..n {
            basis[(i, n - 1)] = -basis[(i, n - 1)];
        }
    }
    let basis_inv = basis.inverse()?;
    let a = basis_inv.matmul(l).matmul(&basis);
    // Skewness in the orthonormal frame; forces a purely imaginary spectrum.
    let scale = a.max_abs().max(1.0);
    let mut skew_residual: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            skew_residual = skew_residual.max((a[(i, j)] + a[(j, i)]).abs());
        }
    }
    if skew_residual > SKEW_TOL * scale {
        return Err(Error::NotSkew { chart: chart.to_string(), residual: skew_residual });
    }
    let mut skew = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            skew[(i, j)] = 0.5 * (a[(i, j)] - a[(j, i)]);
        }
    }
    // The rotation normal form has blocks [[0, -lambda], [lambda, 0]], so
    // the product of rotation numbers is the Pfaffian of minus the matrix.
    let pf = pfaffian(&skew.scale(-1.0));
    if pf == 0.0 {
        return Err(Error::DegenerateZero { chart: chart.to_string() });
    }
    // Moduli from the symmetric square: eigenvalues of -A^2 come in equal
    // pairs lambda_i^2.
    let sym = skew.matmul(&skew).scale(-1.0);
    let eig = symmetric_eigenvalues(&sym);
    let mut lambdas: Vec<f64> = (0..n / 2).map(|i| eig[2 * i].max(0.0).sqrt()).collect();
    let prod: f64 = lambdas.iter().product();
    if (prod > 0.0) != (pf > 0.0) {
        lambdas[0] = -lambdas[0];
    }
    Ok((pf, lambdas))
}

/// Search every fixed-point chart for zeros: Newton from the origin and
/// from a coarse grid of seeds, deduplicated, each verified against the
/// zero tolerance and checked for an invertible linearization. Results are
/// sorted by chart name, then coordinates.
pub fn find_zeros(model: &Model, config: &ZeroFindingConfig, mode: DiffMode) -> Result<Vec<ZeroPoint>> {
    let mut zeros: Vec<ZeroPoint> = Vec::new();
    for (ci, fc) in model.fixed.iter().enumerate() {
        let data = &fc.data;
        let n = data.dim();
        let bounds = &data.chart.bounds;
        let mut seeds: Vec<Point> = vec![vec![0.0; n]];
        let res = config.grid_resolution.max(1);
        let mut idx = vec![0usize; n];
        loop {
            let seed: Point = (0..n)
                .map(|a| {
                    let (lo, hi) = bounds[a];
                    lo + (hi - lo) * (idx[a] as f64 + 0.5) / res as f64
                })
                .collect();
            seeds.push(seed);
            let mut carry = true;
            for a in (0..n).rev() {
                if carry {
                    idx[a] += 1;
                    if idx[a] == res {
                        idx[a] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if carry {
                break;
            }
        }

        let mut found: Vec<Point> = Vec::new();
        for seed in seeds {
            if let Some(z) = newton(data, &seed, config, mode) {
                if !data.chart.contains(&z) {
                    continue;
                }
                if found.iter().all(|f| distance(f, &z) > config.dedup_radius) {
                    found.push(z);
                }
            }
        }
        if found.is_empty() {
            return Err(Error::NoZeroFound { chart: data.chart.name.clone() });
        }
        for z in found {
            let jac = data.field.jacobian_at(&z, mode);
            let det = jac.det();
            if det.abs() <= 1e-10 * (1.0 + jac.max_abs()).powi(n as i32) {
                return Err(Error::DegenerateZero { chart: data.chart.name.clone() });
            }
            zeros.push(ZeroPoint {
                chart_index: ci,
                chart: data.chart.name.clone(),
                coords: z,
                linearization: jac.scale(-1.0),
            });
        }
    }
    zeros.sort_by(|a, b| {
        a.chart
            .cmp(&b.chart)
            .then_with(|| a.coords.partial_cmp(&b.coords).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(zeros)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn newton(
    data: &crate::geometry::ChartData,
    seed: &[f64],
    config: &ZeroFindingConfig,
    mode: DiffMode,
) -> Option<Point> {
    let mut x = seed.to_vec();
    for _ in 0..config.max_iterations {
        let fx = data.field.at(&x);
        let norm = fx.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= config.zero_tol {
            return Some(x);
        }
        let jac = data.field.jacobian_at(&x, mode);
        let step = jac.solve(&fx).ok()?;
        for i in 0..x.len() {
            x[i] -= step[i];
        }
        // Give up on iterates that leave a slightly enlarged chart box.
        for (i, &(lo, hi)) in data.chart.bounds.iter().enumerate() {
            let pad = 0.5 * (hi - lo);
            if x[i] < lo - pad || x[i] > hi + pad {
                return None;
            }
        }
    }
    let fx = data.field.at(&x);
    let norm = fx.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm <= config.zero_tol).then_some(x)
}

/// Fill in the rotation numbers, oriented square root and form value.
pub fn populate(model: &Model, zero: &ZeroPoint) -> Result<FixedPoint> {
    let data = &model.fixed[zero.chart_index].data;
    let g_p = data.metric.at(&zero.coords);
    let (sd, lambdas) = sqrt_det(
        &zero.linearization,
        &g_p,
        data.chart.orientation,
        &zero.chart,
    )?;
    let alpha0 = data.alpha.grade(0).eval(&zero.coords)[0];
    Ok(FixedPoint {
        chart_index: zero.chart_index,
        chart: zero.chart.clone(),
        coords: zero.coords.clone(),
        linearization: zero.linearization.clone(),
        lambdas,
        sqrt_det: sd,
        alpha0,
    })
}

/// The summand attached to one zero.
pub fn local_contribution(fp: &FixedPoint) -> f64 {
    fp.alpha0 / fp.sqrt_det
}

/// When the chart supplies a flow, compare the flow Jacobian at the zero
/// against the exponential of the linearization. Returns the max-abs
/// mismatch, or None when there is no flow.
pub fn flow_linearization_residual(
    model: &Model,
    fp: &FixedPoint,
    eps: f64,
    mode: DiffMode,
) -> Option<f64> {
    let data = &model.fixed[fp.chart_index].data;
    let flow = data.flow.as_ref()?;
    let map = flow.map.clone();
    let t = crate::ad::Jet::Re(eps);
    let wrapped = move |x: &[crate::ad::Jet]| map(&t, x);
    let (_vals, jac) = crate::ad::jacobian(&wrapped, &fp.coords, mode);
    let jmat = Mat::from_rows(&jac);
    let expected = fp.linearization.scale(eps).expm();
    let mut worst: f64 = 0.0;
    for i in 0..jmat.n {
        for j in 0..jmat.n {
            worst = worst.max((jmat[(i, j)] - expected[(i, j)]).abs());
        }
    }
    Some(worst)
}
