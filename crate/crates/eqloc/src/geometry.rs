//! Charts, metrics, vector fields and models.
//!
//! A model presents a manifold as one oriented integration chart (covering
//! it up to measure zero) plus centered fixed-point charts, each carrying
//! its own metric, vector field and evaluated equivariant form. Vector
//! fields follow the convention that the field induced by a flow is the
//! derivative of the backward flow (notice the minus sign).

use std::sync::Arc;

use crate::ad::{constants, derivatives_of, DiffMode, Jet, VecFn};
use crate::forms::{ChartMap, MixedForm};
use crate::linalg::Mat;
use crate::rng::SplitMix64;
use crate::{Error, Result};

pub type Point = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Orientation {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

/// A coordinate chart: a named box with an orientation sign relative to the
/// manifold orientation.
#[derive(Clone, Debug)]
pub struct Chart {
    pub name: String,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub orientation: Orientation,
    /// True when the chart covers the manifold up to a measure-zero set;
    /// exactly one such chart exists per model and carries all global
    /// integrals.
    pub covers_almost_all: bool,
}

impl Chart {
    pub fn new(name: &str, bounds: Vec<(f64, f64)>, orientation: Orientation, covers_almost_all: bool) -> Result<Chart> {
        if bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidRegion(format!("chart {name} has an empty bounds box")));
        }
        Ok(Chart { name: name.to_string(), dim: bounds.len(), bounds, orientation, covers_almost_all })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim
            && p.iter().zip(self.bounds.iter()).all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn sample_points(&self, count: usize, rng: &mut SplitMix64) -> Vec<Point> {
        (0..count).map(|_| rng.point_in(&self.bounds)).collect()
    }
}

/// Riemannian metric on a chart: a pure function from points to symmetric
/// matrices, entries row-major.
#[derive(Clone)]
pub struct Metric {
    pub dim: usize,
    entries: VecFn,
}

impl Metric {
    pub fn new(dim: usize, entries: VecFn) -> Metric {
        Metric { dim, entries }
    }

    pub fn euclidean(dim: usize) -> Metric {
        let n = dim;
        Metric::new(
            dim,
            Arc::new(move |_x: &[Jet]| {
                (0..n * n)
                    .map(|i| Jet::Re(if i % (n + 1) == 0 { 1.0 } else { 0.0 }))
                    .collect()
            }),
        )
    }

    pub fn entries_fn(&self) -> VecFn {
        self.entries.clone()
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.entries)(x)
    }

    pub fn at(&self, p: &[f64]) -> Mat {
        let vals = (self.entries)(&constants(p));
        Mat { n: self.dim, a: vals.iter().map(|j| j.value()).collect() }
    }

    /// Smallest eigenvalue check at the given samples.
    pub fn check_spd(&self, samples: &[Point]) -> Result<()> {
        for p in samples {
            let g = self.at(p);
            let eig = crate::linalg::symmetric_eigenvalues(&g);
            if eig[0] <= 0.0 {
                return Err(Error::NonSpdMetric);
            }
        }
        Ok(())
    }
}

/// Vector field on a chart, components as one jet closure.
#[derive(Clone)]
pub struct VectorField {
    pub dim: usize,
    comps: VecFn,
}

impl VectorField {
    pub fn new(dim: usize, comps: VecFn) -> VectorField {
        VectorField { dim, comps }
    }

    pub fn components_fn(&self) -> VecFn {
        self.comps.clone()
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.comps)(x)
    }

    pub fn at(&self, p: &[f64]) -> Vec<f64> {
        (self.comps)(&constants(p)).iter().map(|j| j.value()).collect()
    }

    pub fn scale(&self, c: f64) -> VectorField {
        let f = self.comps.clone();
        VectorField::new(
            self.dim,
            Arc::new(move |x: &[Jet]| {
                let s = Jet::Re(c);
                f(x).iter().map(|v| v * &s).collect()
            }),
        )
    }

    pub fn jacobian_at(&self, p: &[f64], mode: DiffMode) -> Mat {
        let f = self.comps.clone();
        let wrapped = move |x: &[Jet]| f(x);
        let (_vals, jac) = crate::ad::jacobian(&wrapped, p, mode);
        Mat::from_rows(&jac)
    }
}

/// Covector field on a chart; component i pairs with the coordinate
/// differential of axis i.
#[derive(Clone)]
pub struct CovectorField {
    pub dim: usize,
    comps: VecFn,
}

impl CovectorField {
    pub fn new(dim: usize, comps: VecFn) -> CovectorField {
        CovectorField { dim, comps }
    }

    pub fn components_fn(&self) -> VecFn {
        self.comps.clone()
    }

    pub fn at(&self, p: &[f64]) -> Vec<f64> {
        (self.comps)(&constants(p)).iter().map(|j| j.value()).collect()
    }
}

/// A one-parameter family of chart maps, `(time, point) -> point`.
#[derive(Clone)]
pub struct FlowMap {
    pub dim: usize,
    pub map: Arc<dyn Fn(&Jet, &[Jet]) -> Vec<Jet> + Send + Sync>,
}

const FLOW_IDENTITY_TOL: f64 = 1e-10;

/// The vector field induced by a flow under the backward convention:
/// `X(x) = d/de flow(-e, x)` at `e = 0`. Validates that the flow at time
/// zero is the identity on a few deterministic samples.
pub fn vector_field_from_flow(flow: &FlowMap, chart: &Chart) -> Result<VectorField> {
    let mut rng = SplitMix64::new(0x8c5f_37a1);
    for p in chart.sample_points(8, &mut rng) {
        let at_zero = (flow.map)(&Jet::Re(0.0), &constants(&p));
        let residual = at_zero
            .iter()
            .zip(p.iter())
            .map(|(a, b)| (a.value() - b).abs())
            .fold(0.0, f64::max);
        if residual > FLOW_IDENTITY_TOL {
            return Err(Error::FlowNotIdentity { residual });
        }
    }
    let f = flow.map.clone();
    Ok(VectorField::new(
        flow.dim,
        Arc::new(move |x: &[Jet]| {
            // Differentiate e -> flow(-e, x) at 0 with one seeded slot for e.
            // The point coordinates ride along as constants at the lifted
            // layer, so outer derivatives of the field still compose.
            let g = f.clone();
            let wrapped = move |args: &[Jet]| {
                let eps = -&args[0];
                g(&eps, &args[1..])
            };
            let mut args = Vec::with_capacity(x.len() + 1);
            args.push(Jet::Re(0.0));
            args.extend_from_slice(x);
            let d = derivatives_of(&wrapped, &args, DiffMode::Forward);
            (0..x.len()).map(|i| d.partials[i][0].clone()).collect()
        }),
    ))
}

const FLOW_RK4_STEPS: usize = 32;

/// The group flow whose backward derivative returns the field: integrates
/// `dx/dt = -X(x)` with fixed-step RK4, so `vector_field_from_flow` applied
/// to the result recovers `X` up to integration error.
pub fn flow_from_field(field: &VectorField) -> FlowMap {
    let comps = field.components_fn();
    let dim = field.dim;
    FlowMap {
        dim,
        map: Arc::new(move |t: &Jet, x: &[Jet]| {
            let mut state = x.to_vec();
            let h = t / &Jet::Re(FLOW_RK4_STEPS as f64);
            let half = Jet::Re(0.5);
            let sixth = Jet::Re(1.0 / 6.0);
            let two = Jet::Re(2.0);
            let rhs = |y: &[Jet]| -> Vec<Jet> { comps(y).iter().map(|v| -v).collect() };
            for _ in 0..FLOW_RK4_STEPS {
                let k1 = rhs(&state);
                let y2: Vec<Jet> = state.iter().zip(&k1).map(|(y, k)| y + &(&(&h * k) * &half)).collect();
                let k2 = rhs(&y2);
                let y3: Vec<Jet> = state.iter().zip(&k2).map(|(y, k)| y + &(&(&h * k) * &half)).collect();
                let k3 = rhs(&y3);
                let y4: Vec<Jet> = state.iter().zip(&k3).map(|(y, k)| y + &(&h * k)).collect();
                let k4 = rhs(&y4);
                state = state
                    .iter()
                    .enumerate()
                    .map(|(i, y)| {
                        let incr = &(&k1[i] + &(&two * &(&k2[i] + &k3[i]))) + &k4[i];
                        y + &(&(&h * &sixth) * &incr)
                    })
                    .collect();
            }
            state
        }),
    }
}

/// Metric-dual covector field of a vector field: `(g v)_i`.
pub fn metric_dual(g: &Metric, v: &VectorField) -> CovectorField {
    let ge = g.entries_fn();
    let vc = v.components_fn();
    let n = g.dim;
    CovectorField::new(
        n,
        Arc::new(move |x: &[Jet]| {
            let gm = ge(x);
            let vv = vc(x);
            (0..n)
                .map(|i| {
                    let mut acc = Jet::Re(0.0);
                    for j in 0..n {
                        if gm[i * n + j].is_zero() || vv[j].is_zero() {
                            continue;
                        }
                        acc = &acc + &(&gm[i * n + j] * &vv[j]);
                    }
                    acc
                })
                .collect()
        }),
    )
}

/// Inverse of `metric_dual`: solves `g v = xi` pointwise.
pub fn metric_dual_inverse(g: &Metric, xi: &CovectorField) -> VectorField {
    let gm = g.clone();
    let xc = xi.components_fn();
    let n = g.dim;
    VectorField::new(
        n,
        Arc::new(move |x: &[Jet]| {
            // Plain-value path is enough for the round-trip property checks.
            let p: Vec<f64> = x.iter().map(|j| j.value()).collect();
            let mat = gm.at(&p);
            let rhs: Vec<f64> = xc(x).iter().map(|j| j.value()).collect();
            let sol = mat.solve(&rhs).unwrap_or_else(|_| vec![f64::NAN; n]);
            sol.into_iter().map(Jet::Re).collect()
        }),
    )
}

/// Max-norm of the Lie derivative of the metric along the field over the
/// samples: `X^k dg_ij/dx_k + g_kj dX^k/dx_i + g_ik dX^k/dx_j`.
pub fn lie_derivative_metric_residual(
    g: &Metric,
    field: &VectorField,
    samples: &[Point],
    mode: DiffMode,
) -> f64 {
    let n = g.dim;
    let ge = g.entries_fn();
    let xe = field.components_fn();
    let mut worst: f64 = 0.0;
    for p in samples {
        let xs = constants(p);
        let dg = derivatives_of(&*ge, &xs, mode);
        let dx = derivatives_of(&*xe, &xs, mode);
        let xv: Vec<f64> = dx.values.iter().map(|j| j.value()).collect();
        for i in 0..n {
            for j in 0..n {
                let mut lie = 0.0;
                for k in 0..n {
                    lie += xv[k] * dg.partials[i * n + j][k].value();
                    lie += dg.values[k * n + j].value() * dx.partials[k][i].value();
                    lie += dg.values[i * n + k].value() * dx.partials[k][j].value();
                }
                worst = worst.max(lie.abs());
            }
        }
    }
    worst
}

/// Squared metric norm of the field at a point.
pub fn norm_sq(g: &Metric, v: &VectorField, p: &[f64]) -> f64 {
    let gm = g.at(p);
    let vv = v.at(p);
    let gv = gm.matvec(&vv);
    vv.iter().zip(gv.iter()).map(|(a, b)| a * b).sum()
}

/// Everything a model supplies on one chart.
#[derive(Clone)]
pub struct ChartData {
    pub chart: Chart,
    pub metric: Metric,
    pub field: VectorField,
    pub alpha: MixedForm,
    pub flow: Option<FlowMap>,
    /// Per-axis fiber intervals used when sampling the cotangent chart.
    pub fiber_bounds: Vec<(f64, f64)>,
}

impl ChartData {
    pub fn dim(&self) -> usize {
        self.chart.dim
    }
}

/// A transition from the integration chart into a fixed-point chart,
/// defined on part of the integration chart.
#[derive(Clone)]
pub struct TransitionMap {
    pub map: ChartMap,
    pub domain: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
}

/// A fixed-point chart together with its transition from the integration
/// chart (used for cube membership and the optional consistency spot-check).
#[derive(Clone)]
pub struct FixedChart {
    pub data: ChartData,
    pub from_integration: Option<TransitionMap>,
}

/// Expected-failure labels for negative-control models.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlLabel {
    Closedness,
    MetricInvariance,
    RestrictedClosedness,
}

impl ControlLabel {
    pub fn check_name(self) -> &'static str {
        match self {
            ControlLabel::Closedness => "closedness",
            ControlLabel::MetricInvariance => "metric_invariance",
            ControlLabel::RestrictedClosedness => "restricted_closedness",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExpectedValue {
    pub value: f64,
    pub provenance: String,
}

/// A manifold with the data entering the fixed-point formula.
#[derive(Clone)]
pub struct Model {
    pub name: String,
    pub dim: usize,
    /// Declared half dimension; must equal dim / 2.
    pub half_dim: usize,
    pub integration: ChartData,
    pub fixed: Vec<FixedChart>,
    pub expected_lhs: Option<ExpectedValue>,
    pub controls: Vec<ControlLabel>,
    /// Optional per-axis quadrature node cap (higher-dimensional models keep
    /// grid sizes tractable).
    pub node_cap: Option<usize>,
}

impl Model {
    /// Basic structural validation.
    pub fn validate(&self) -> Result<()> {
        if self.dim % 2 != 0 {
            return Err(Error::InvalidModel(format!("dimension {} is odd", self.dim)));
        }
        if self.half_dim * 2 != self.dim {
            return Err(Error::InvalidModel(format!(
                "declared half dimension {} does not match dimension {}",
                self.half_dim, self.dim
            )));
        }
        if !self.integration.chart.covers_almost_all {
            return Err(Error::InvalidModel("integration chart must cover almost all".into()));
        }
        if self.integration.dim() != self.dim {
            return Err(Error::InvalidModel("integration chart dimension mismatch".into()));
        }
        for fc in &self.fixed {
            if fc.data.dim() != self.dim {
                return Err(Error::InvalidModel(format!(
                    "fixed chart {} dimension mismatch",
                    fc.data.chart.name
                )));
            }
            if fc.data.chart.covers_almost_all {
                return Err(Error::InvalidModel(
                    "fixed-point charts must not be marked covers_almost_all".into(),
                ));
            }
        }
        // Parts of the evaluated form must sit in one parity.
        self.integration.alpha.parity()?;
        for fc in &self.fixed {
            fc.data.alpha.parity()?;
        }
        Ok(())
    }

    pub fn all_chart_data(&self) -> Vec<&ChartData> {
        let mut v = vec![&self.integration];
        v.extend(self.fixed.iter().map(|fc| &fc.data));
        v
    }

    /// The same model with the manifold orientation reversed (all chart
    /// orientation signs flipped).
    pub fn orientation_flipped(&self) -> Model {
        let mut m = self.clone();
        m.name = format!("{}_flipped", self.name);
        m.integration.chart.orientation = m.integration.chart.orientation.flipped();
        for fc in &mut m.fixed {
            fc.data.chart.orientation = fc.data.chart.orientation.flipped();
        }
        m.expected_lhs = self.expected_lhs.as_ref().map(|e| ExpectedValue {
            value: -e.value,
            provenance: format!("negated: {}", e.provenance),
        });
        m
    }
}

/// Spot-check that forms, metrics and fields agree across a declared
/// transition at sample points on its domain. Returns the worst residual.
pub fn transition_consistency_residual(
    model: &Model,
    samples_per_chart: usize,
    mode: DiffMode,
    seed: u64,
) -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = SplitMix64::new(seed ^ 0x7ac3_55d9);
    for fc in &model.fixed {
        let Some(tr) = &fc.from_integration else { continue };
        let mut collected = 0;
        let mut attempts = 0;
        while collected < samples_per_chart && attempts < samples_per_chart * 200 {
            attempts += 1;
            let p = rng.point_in(&model.integration.chart.bounds);
            if !(tr.domain)(&p) {
                continue;
            }
            let q = tr.map.eval(&p);
            if !fc.data.chart.contains(&q) {
                continue;
            }
            collected += 1;
            // Forms: the pullback of the fixed-chart form along the
            // transition must match the integration-chart form.
            for k in fc.data.alpha.degrees() {
                let pulled =
                    crate::forms::KForm::pullback(&tr.map, &fc.data.alpha.grade(k), mode)
                        .expect("transition pullback");
                let a = pulled.eval(&p);
                let b = model.integration.alpha.grade(k).eval(&p);
                for (u, v) in a.iter().zip(b.iter()) {
                    worst = worst.max((u - v).abs());
                }
            }
            // Metric: J^T g(q) J == g(p).
            let map = tr.map.map.clone();
            let wrapped = move |x: &[Jet]| map(x);
            let (_vals, jac) = crate::ad::jacobian(&wrapped, &p, mode);
            let j = Mat::from_rows(&jac);
            let pulled_g = j.transpose().matmul(&fc.data.metric.at(&q)).matmul(&j);
            let gp = model.integration.metric.at(&p);
            worst = worst.max(
                pulled_g
                    .a
                    .iter()
                    .zip(gp.a.iter())
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max),
            );
            // Field: J X(p) == X(q).
            let push = j.matvec(&model.integration.field.at(&p));
            let xq = fc.data.field.at(&q);
            worst = worst.max(
                push.iter().zip(xq.iter()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max),
            );
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planar_chart() -> Chart {
        Chart::new("plane", vec![(-1.0, 1.0), (-1.0, 1.0)], Orientation::Positive, true).unwrap()
    }

    #[test]
    fn flow_rotation_gives_backward_field() {
        let flow = FlowMap {
            dim: 2,
            map: Arc::new(|t: &Jet, x: &[Jet]| {
                let (s, c) = (t.sin(), t.cos());
                vec![&(&x[0] * &c) - &(&x[1] * &s), &(&x[0] * &s) + &(&x[1] * &c)]
            }),
        };
        let field = vector_field_from_flow(&flow, &planar_chart()).unwrap();
        let v = field.at(&[1.0, 0.0]);
        assert!((v[0] - 0.0).abs() < 1e-12);
        assert!((v[1] + 1.0).abs() < 1e-12);
        let v = field.at(&[0.3, -0.4]);
        assert!((v[0] + 0.4).abs() < 1e-12); // X = (y, -x)
        assert!((v[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn flow_identity_gives_zero_field() {
        let flow = FlowMap { dim: 2, map: Arc::new(|_t: &Jet, x: &[Jet]| x.to_vec()) };
        let field = vector_field_from_flow(&flow, &planar_chart()).unwrap();
        let v = field.at(&[0.5, 0.2]);
        assert!(v.iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn flow_translation_field() {
        let flow = FlowMap {
            dim: 2,
            map: Arc::new(|t: &Jet, x: &[Jet]| vec![&x[0] + t, x[1].clone()]),
        };
        let field = vector_field_from_flow(&flow, &planar_chart()).unwrap();
        let v = field.at(&[0.0, 0.0]);
        assert!((v[0] + 1.0).abs() < 1e-14); // minus convention: X = -d/dx
        assert!(v[1].abs() < 1e-14);
    }

    #[test]
    fn flow_not_identity_rejected() {
        let flow = FlowMap {
            dim: 2,
            map: Arc::new(|t: &Jet, x: &[Jet]| vec![&(&x[0] + t) + &Jet::Re(0.5), x[1].clone()]),
        };
        assert!(matches!(
            vector_field_from_flow(&flow, &planar_chart()),
            Err(Error::FlowNotIdentity { .. })
        ));
    }

    #[test]
    fn metric_dual_examples() {
        // flat identity metric: dual of d/dx1 is dx1
        let g = Metric::euclidean(2);
        let v = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(1.0), Jet::Re(0.0)]));
        assert_eq!(metric_dual(&g, &v).at(&[0.0, 0.0]), vec![1.0, 0.0]);

        // g = diag(4, 1): dual of d/dx1 is 4 dx1
        let g4 = Metric::new(2, Arc::new(|_x: &[Jet]| {
            vec![Jet::Re(4.0), Jet::Re(0.0), Jet::Re(0.0), Jet::Re(1.0)]
        }));
        assert_eq!(metric_dual(&g4, &v).at(&[0.0, 0.0]), vec![4.0, 0.0]);

        // round sphere metric diag(1, sin^2 theta): dual of d/dphi
        let gs = Metric::new(2, Arc::new(|x: &[Jet]| {
            let s = x[0].sin();
            vec![Jet::Re(1.0), Jet::Re(0.0), Jet::Re(0.0), &s * &s]
        }));
        let vphi = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(0.0), Jet::Re(1.0)]));
        let dual = metric_dual(&gs, &vphi).at(&[1.1, 0.3]);
        assert!((dual[1] - 1.1f64.sin().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn metric_dual_round_trip() {
        let g = Metric::new(2, Arc::new(|x: &[Jet]| {
            let b = &Jet::Re(0.2) * &x[0].cos();
            vec![&Jet::Re(2.0) + &x[1].sin().powi(2), b.clone(), b, Jet::Re(1.5)]
        }));
        let v = VectorField::new(2, Arc::new(|x: &[Jet]| vec![x[1].clone(), -&x[0]]));
        let back = metric_dual_inverse(&g, &metric_dual(&g, &v));
        let mut rng = SplitMix64::new(2);
        for _ in 0..20 {
            let p = vec![rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0)];
            let a = v.at(&p);
            let b = back.at(&p);
            for (u, w) in a.iter().zip(b.iter()) {
                assert!((u - w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lie_derivative_residuals() {
        let samples: Vec<Point> = vec![vec![1.0, 0.0], vec![0.3, 0.8], vec![1.4, 2.0]];
        // flat metric, constant field: exactly invariant
        let g = Metric::euclidean(2);
        let v = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(1.0), Jet::Re(0.0)]));
        assert_eq!(lie_derivative_metric_residual(&g, &v, &samples, DiffMode::Forward), 0.0);

        // round sphere + rotation: invariant to roundoff
        let gs = Metric::new(2, Arc::new(|x: &[Jet]| {
            let s = x[0].sin();
            vec![Jet::Re(1.0), Jet::Re(0.0), Jet::Re(0.0), &s * &s]
        }));
        let vphi = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(0.0), Jet::Re(1.0)]));
        assert!(lie_derivative_metric_residual(&gs, &vphi, &samples, DiffMode::Forward) <= 1e-12);

        // anisotropic flat metric + rotation field: residual at least 1 at (1, 0)
        let ga = Metric::new(2, Arc::new(|_x: &[Jet]| {
            vec![Jet::Re(1.0), Jet::Re(0.0), Jet::Re(0.0), Jet::Re(4.0)]
        }));
        let rot = VectorField::new(2, Arc::new(|x: &[Jet]| vec![x[1].clone(), -&x[0]]));
        let r = lie_derivative_metric_residual(&ga, &rot, &[vec![1.0, 0.0]], DiffMode::Forward);
        assert!(r >= 1.0, "residual {r}");
    }

    #[test]
    fn norm_sq_examples() {
        let g = Metric::euclidean(2);
        let zero = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(0.0), Jet::Re(0.0)]));
        assert_eq!(norm_sq(&g, &zero, &[0.3, 0.4]), 0.0);
        let v34 = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(3.0), Jet::Re(4.0)]));
        assert_eq!(norm_sq(&g, &v34, &[0.0, 0.0]), 25.0);
        let gs = Metric::new(2, Arc::new(|x: &[Jet]| {
            let s = x[0].sin();
            vec![Jet::Re(1.0), Jet::Re(0.0), Jet::Re(0.0), &s * &s]
        }));
        let vphi = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(0.0), Jet::Re(1.0)]));
        let n = norm_sq(&gs, &vphi, &[std::f64::consts::FRAC_PI_2, 0.0]);
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn norm_sq_matches_dual_pairing() {
        let g = Metric::new(2, Arc::new(|x: &[Jet]| {
            let b = &Jet::Re(0.1) * &x[1].sin();
            vec![&Jet::Re(1.0) + &x[0].powi(2), b.clone(), b, Jet::Re(2.0)]
        }));
        let v = VectorField::new(2, Arc::new(|x: &[Jet]| vec![x[1].clone(), x[0].cos()]));
        let dual = metric_dual(&g, &v);
        let mut rng = SplitMix64::new(6);
        for _ in 0..20 {
            let p = vec![rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0)];
            let direct = norm_sq(&g, &v, &p);
            let paired: f64 = dual.at(&p).iter().zip(v.at(&p).iter()).map(|(a, b)| a * b).sum();
            assert!((direct - paired).abs() < 1e-14);
        }
    }

    #[test]
    fn flow_field_flow_round_trip() {
        // Rebuilding the flow of a flow-derived field recovers the field.
        let flow = FlowMap {
            dim: 2,
            map: Arc::new(|t: &Jet, x: &[Jet]| {
                let (s, c) = (t.sin(), t.cos());
                vec![&(&x[0] * &c) - &(&x[1] * &s), &(&x[0] * &s) + &(&x[1] * &c)]
            }),
        };
        let chart = planar_chart();
        let field = vector_field_from_flow(&flow, &chart).unwrap();
        let rebuilt_flow = flow_from_field(&field);
        let recovered = vector_field_from_flow(&rebuilt_flow, &chart).unwrap();
        let mut rng = SplitMix64::new(3);
        for _ in 0..10 {
            let p = vec![rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0)];
            let a = field.at(&p);
            let b = recovered.at(&p);
            for (u, v) in a.iter().zip(b.iter()) {
                assert!((u - v).abs() < 1e-8, "{u} vs {v}");
            }
        }
    }
}
