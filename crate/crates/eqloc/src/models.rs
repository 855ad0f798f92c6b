//! Built-in models with closed-form answers, including negative controls.
//!
//! The sphere family uses the polar chart for integration and orthographic
//! planar charts at the two poles (the south chart is negatively oriented
//! relative to the outward orientation). The product model glues two sphere
//! factors. Controls deliberately break one hypothesis each: a form that is
//! not equivariantly closed, and a bulk metric that the rotation flow does
//! not preserve (the fixed-point charts keep the round metric so the local
//! data stays well-defined).

use std::sync::Arc;

use crate::ad::Jet;
use crate::forms::{ChartMap, KForm, MixedForm};
use crate::geometry::{
    Chart, ChartData, ControlLabel, ExpectedValue, FixedChart, FlowMap, Metric, Model,
    Orientation, TransitionMap, VectorField,
};
use crate::quadrature::Region;
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// Registered model names in CLI order.
pub fn registry() -> Vec<&'static str> {
    vec![
        "sphere",
        "sphere_scaled",
        "sphere_exp",
        "s2xs2",
        "torus_translate",
        "control_nonclosed",
        "control_noninvariant_metric",
    ]
}

/// Build a model by name. `sphere_scaled` accepts an optional parameter as
/// `sphere_scaled:<c>` (default c = 2).
pub fn build(name: &str) -> Result<Model> {
    if let Some(rest) = name.strip_prefix("sphere_scaled") {
        let c = match rest.strip_prefix(':') {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::UnknownModel(name.to_string()))?,
            None if rest.is_empty() => 2.0,
            _ => return Err(Error::UnknownModel(name.to_string())),
        };
        if c <= 0.0 {
            return Err(Error::InvalidModel("scale must be positive".into()));
        }
        return Ok(sphere_model(c, false, name.to_string()));
    }
    match name {
        "sphere" => Ok(sphere_model(1.0, false, "sphere".into())),
        "sphere_exp" => Ok(sphere_model(1.0, true, "sphere_exp".into())),
        "s2xs2" => Ok(product_model()),
        "torus_translate" => Ok(torus_model()),
        "control_nonclosed" => Ok(control_nonclosed()),
        "control_noninvariant_metric" => Ok(control_noninvariant_metric()),
        _ => Err(Error::UnknownModel(name.to_string())),
    }
}

/// Region of the integration chart outside every fixed-point cube of the
/// given half-width, via the declared transitions.
pub fn outside_cubes_mask(model: &Model, eps: f64) -> Region {
    let checks: Vec<(TransitionMap, usize)> = model
        .fixed
        .iter()
        .filter_map(|fc| fc.from_integration.clone().map(|t| (t, fc.data.dim())))
        .collect();
    Region::Mask(Arc::new(move |p: &[f64]| {
        for (tr, dim) in &checks {
            if !(tr.domain)(p) {
                continue;
            }
            let q = tr.map.eval(p);
            if q.iter().take(*dim).all(|c| c.abs() <= eps) {
                return false;
            }
        }
        true
    }))
}

// ---------------------------------------------------------------------------
// sphere family
// ---------------------------------------------------------------------------

fn round_sphere_metric() -> Metric {
    Metric::new(
        2,
        Arc::new(|x: &[Jet]| {
            let s = x[0].sin();
            vec![Jet::Re(1.0), Jet::Re(0.0), Jet::Re(0.0), &s * &s]
        }),
    )
}

/// Orthographic pole-chart metric of the unit sphere:
/// `g_ij = delta_ij + x_i x_j / w^2` with `w^2 = 1 - |x|^2`.
fn pole_metric() -> Metric {
    Metric::new(
        2,
        Arc::new(|x: &[Jet]| {
            let w2 = &(&Jet::Re(1.0) - &(&x[0] * &x[0])) - &(&x[1] * &x[1]);
            let g11 = &Jet::Re(1.0) + &(&(&x[0] * &x[0]) / &w2);
            let g12 = &(&x[0] * &x[1]) / &w2;
            let g22 = &Jet::Re(1.0) + &(&(&x[1] * &x[1]) / &w2);
            vec![g11, g12.clone(), g12, g22]
        }),
    )
}

/// Rotation field in a pole chart, scaled: `c (-y, x)`.
fn pole_field(c: f64) -> VectorField {
    VectorField::new(
        2,
        Arc::new(move |x: &[Jet]| {
            let s = Jet::Re(c);
            vec![-&(&s * &x[1]), &s * &x[0]]
        }),
    )
}

/// Pole-chart form data. `south` flips the height sign and the area
/// orientation; `exponential` replaces `c z + area` with `e^z (1 + area)`.
fn pole_alpha(c: f64, south: bool, exponential: bool) -> MixedForm {
    let zsign = if south { -1.0 } else { 1.0 };
    let h = KForm::scalar_field(
        2,
        Arc::new(move |x: &[Jet]| {
            let w2 = &(&Jet::Re(1.0) - &(&x[0] * &x[0])) - &(&x[1] * &x[1]);
            let z = &Jet::Re(zsign) * &w2.sqrt();
            if exponential {
                z.exp()
            } else {
                &Jet::Re(c) * &z
            }
        }),
    );
    let area = KForm::new(
        2,
        2,
        Arc::new(move |x: &[Jet]| {
            let w2 = &(&Jet::Re(1.0) - &(&x[0] * &x[0])) - &(&x[1] * &x[1]);
            let w = w2.sqrt();
            let density = &Jet::Re(zsign) / &w;
            if exponential {
                let z = &Jet::Re(zsign) * &w;
                vec![&z.exp() * &density]
            } else {
                vec![density]
            }
        }),
    )
    .expect("area form");
    MixedForm::from_parts(2, vec![h, area]).expect("pole form")
}

fn pole_flow(c: f64) -> FlowMap {
    // Backward rotation: the induced field under the minus convention is
    // c (-y, x).
    FlowMap {
        dim: 2,
        map: Arc::new(move |t: &Jet, x: &[Jet]| {
            let a = &Jet::Re(c) * t;
            let (s, co) = (a.sin(), a.cos());
            vec![&(&x[0] * &co) + &(&x[1] * &s), &(&x[1] * &co) - &(&x[0] * &s)]
        }),
    }
}

fn sphere_integration_chart(c: f64, exponential: bool, metric: Metric) -> ChartData {
    let chart = Chart::new(
        "equator",
        vec![(0.0, PI), (0.0, 2.0 * PI)],
        Orientation::Positive,
        true,
    )
    .expect("sphere chart");
    let field = VectorField::new(
        2,
        Arc::new(move |_x: &[Jet]| vec![Jet::Re(0.0), Jet::Re(c)]),
    );
    let h = KForm::scalar_field(
        2,
        Arc::new(move |x: &[Jet]| {
            if exponential {
                x[0].cos().exp()
            } else {
                &Jet::Re(c) * &x[0].cos()
            }
        }),
    );
    let area = KForm::new(
        2,
        2,
        Arc::new(move |x: &[Jet]| {
            if exponential {
                vec![&x[0].cos().exp() * &x[0].sin()]
            } else {
                vec![x[0].sin()]
            }
        }),
    )
    .expect("area part");
    let alpha = MixedForm::from_parts(2, vec![h, area]).expect("sphere form");
    let flow = FlowMap {
        dim: 2,
        map: Arc::new(move |t: &Jet, x: &[Jet]| {
            vec![x[0].clone(), &x[1] - &(&Jet::Re(c) * t)]
        }),
    };
    ChartData {
        chart,
        metric,
        field,
        alpha,
        flow: Some(flow),
        fiber_bounds: vec![(-1.5, 1.5), (-1.5, 1.5)],
    }
}

const POLE_HALF_WIDTH: f64 = 0.7;
/// Transition domain: polar angle from the relevant pole below this keeps
/// the image strictly inside the pole chart box.
const POLE_DOMAIN_ANGLE: f64 = 0.75;

fn pole_chart_data(name: &str, c: f64, south: bool, exponential: bool, metric: Metric) -> ChartData {
    let orientation = if south { Orientation::Negative } else { Orientation::Positive };
    let chart = Chart::new(
        name,
        vec![(-POLE_HALF_WIDTH, POLE_HALF_WIDTH), (-POLE_HALF_WIDTH, POLE_HALF_WIDTH)],
        orientation,
        false,
    )
    .expect("pole chart");
    ChartData {
        chart,
        metric,
        field: pole_field(c),
        alpha: pole_alpha(c, south, exponential),
        flow: Some(pole_flow(c)),
        fiber_bounds: vec![(-1.5, 1.5), (-1.5, 1.5)],
    }
}

/// Shared transition formula: both pole charts use the equatorial-plane
/// projection `(sin t cos p, sin t sin p)` of the embedded point.
fn pole_transition(south: bool) -> TransitionMap {
    let map = ChartMap::new(
        2,
        2,
        Arc::new(|x: &[Jet]| {
            let s = x[0].sin();
            vec![&s * &x[1].cos(), &s * &x[1].sin()]
        }),
    );
    let domain: Arc<dyn Fn(&[f64]) -> bool + Send + Sync> = if south {
        Arc::new(|p: &[f64]| p[0] > PI - POLE_DOMAIN_ANGLE)
    } else {
        Arc::new(|p: &[f64]| p[0] < POLE_DOMAIN_ANGLE)
    };
    TransitionMap { map, domain }
}

fn sphere_model(c: f64, exponential: bool, name: String) -> Model {
    let integration = sphere_integration_chart(c, exponential, round_sphere_metric());
    let north = FixedChart {
        data: pole_chart_data("pole_north", c, false, exponential, pole_metric()),
        from_integration: Some(pole_transition(false)),
    };
    let south = FixedChart {
        data: pole_chart_data("pole_south", c, true, exponential, pole_metric()),
        from_integration: Some(pole_transition(true)),
    };
    let expected = if exponential {
        ExpectedValue {
            value: 2.0 * PI * (1.0f64.exp() - (-1.0f64).exp()),
            provenance: "closed form of the height-exponential integral over the unit sphere".into(),
        }
    } else {
        ExpectedValue {
            value: 4.0 * PI,
            provenance: "area of the unit sphere".into(),
        }
    };
    Model {
        name,
        dim: 2,
        half_dim: 1,
        integration,
        fixed: vec![north, south],
        expected_lhs: Some(expected),
        controls: vec![],
        node_cap: None,
    }
}

// ---------------------------------------------------------------------------
// product of two spheres
// ---------------------------------------------------------------------------

/// Lift a 2-dim chart closure onto one factor of a 4-dim product chart.
fn factor_slice(offset: usize, x: &[Jet]) -> [Jet; 2] {
    [x[offset].clone(), x[offset + 1].clone()]
}

fn product_metric(first: Metric, second: Metric) -> Metric {
    let f1 = first.entries_fn();
    let f2 = second.entries_fn();
    Metric::new(
        4,
        Arc::new(move |x: &[Jet]| {
            let a = f1(&factor_slice(0, x));
            let b = f2(&factor_slice(2, x));
            let zero = Jet::Re(0.0);
            let mut out = vec![zero; 16];
            for i in 0..2 {
                for j in 0..2 {
                    out[i * 4 + j] = a[i * 2 + j].clone();
                    out[(i + 2) * 4 + (j + 2)] = b[i * 2 + j].clone();
                }
            }
            out
        }),
    )
}

fn product_field(first: VectorField, second: VectorField) -> VectorField {
    let f1 = first.components_fn();
    let f2 = second.components_fn();
    VectorField::new(
        4,
        Arc::new(move |x: &[Jet]| {
            let mut out = f1(&factor_slice(0, x));
            out.extend(f2(&factor_slice(2, x)));
            out
        }),
    )
}

/// Re-chart a form of one factor onto the 4-dim product chart.
fn factor_form(alpha: &MixedForm, offset: usize) -> MixedForm {
    let mut out = MixedForm::new(4);
    for k in alpha.degrees() {
        let part = alpha.grade(k).embed_axes(&[offset, offset + 1], 4).expect("factor embedding");
        out = out.with_part(part).expect("factor part");
    }
    out
}

fn product_flow(first: FlowMap, second: FlowMap) -> FlowMap {
    let m1 = first.map.clone();
    let m2 = second.map.clone();
    FlowMap {
        dim: 4,
        map: Arc::new(move |t: &Jet, x: &[Jet]| {
            let mut out = m1(t, &factor_slice(0, x));
            out.extend(m2(t, &factor_slice(2, x)));
            out
        }),
    }
}

fn product_model() -> Model {
    let sphere = sphere_model(1.0, false, "sphere".into());
    let base_int = &sphere.integration;

    let chart = Chart::new(
        "equator_pair",
        vec![(0.0, PI), (0.0, 2.0 * PI), (0.0, PI), (0.0, 2.0 * PI)],
        Orientation::Positive,
        true,
    )
    .expect("product chart");
    let alpha = factor_form(&base_int.alpha, 0)
        .wedge(&factor_form(&base_int.alpha, 2))
        .expect("product form");
    let integration = ChartData {
        chart,
        metric: product_metric(round_sphere_metric(), round_sphere_metric()),
        field: product_field(base_int.field.clone(), base_int.field.clone()),
        alpha,
        flow: Some(product_flow(
            base_int.flow.clone().expect("sphere flow"),
            base_int.flow.clone().expect("sphere flow"),
        )),
        fiber_bounds: vec![(-1.5, 1.5); 4],
    };

    let mut fixed = Vec::new();
    for (s1, tag1) in [(false, "north"), (true, "south")] {
        for (s2, tag2) in [(false, "north"), (true, "south")] {
            let d1 = pole_chart_data("f1", 1.0, s1, false, pole_metric());
            let d2 = pole_chart_data("f2", 1.0, s2, false, pole_metric());
            let orientation = if s1 == s2 { Orientation::Positive } else { Orientation::Negative };
            let chart = Chart::new(
                &format!("pole_{tag1}_{tag2}"),
                vec![(-POLE_HALF_WIDTH, POLE_HALF_WIDTH); 4],
                orientation,
                false,
            )
            .expect("pole pair chart");
            let alpha = factor_form(&d1.alpha, 0).wedge(&factor_form(&d2.alpha, 2)).expect("pole pair form");
            let data = ChartData {
                chart,
                metric: product_metric(pole_metric(), pole_metric()),
                field: product_field(pole_field(1.0), pole_field(1.0)),
                alpha,
                flow: Some(product_flow(pole_flow(1.0), pole_flow(1.0))),
                fiber_bounds: vec![(-1.5, 1.5); 4],
            };
            let t1 = pole_transition(s1);
            let t2 = pole_transition(s2);
            let map = {
                let m1 = t1.map.map.clone();
                let m2 = t2.map.map.clone();
                ChartMap::new(
                    4,
                    4,
                    Arc::new(move |x: &[Jet]| {
                        let mut out = m1(&factor_slice(0, x));
                        out.extend(m2(&factor_slice(2, x)));
                        out
                    }),
                )
            };
            let dom1 = t1.domain.clone();
            let dom2 = t2.domain.clone();
            let domain: Arc<dyn Fn(&[f64]) -> bool + Send + Sync> =
                Arc::new(move |p: &[f64]| dom1(&p[..2]) && dom2(&p[2..]));
            fixed.push(FixedChart {
                data,
                from_integration: Some(TransitionMap { map, domain }),
            });
        }
    }

    Model {
        name: "s2xs2".into(),
        dim: 4,
        half_dim: 2,
        integration,
        fixed,
        expected_lhs: Some(ExpectedValue {
            value: 16.0 * PI * PI,
            provenance: "squared sphere area from the product structure".into(),
        }),
        controls: vec![],
        node_cap: Some(28),
    }
}

// ---------------------------------------------------------------------------
// torus and controls
// ---------------------------------------------------------------------------

fn torus_chart_data(alpha: MixedForm) -> ChartData {
    let chart = Chart::new(
        "fundamental",
        vec![(0.0, 1.0), (0.0, 1.0)],
        Orientation::Positive,
        true,
    )
    .expect("torus chart");
    let field = VectorField::new(2, Arc::new(|_x: &[Jet]| vec![Jet::Re(1.0), Jet::Re(0.0)]));
    let flow = FlowMap {
        dim: 2,
        map: Arc::new(|t: &Jet, x: &[Jet]| vec![&x[0] - t, x[1].clone()]),
    };
    ChartData {
        chart,
        metric: Metric::euclidean(2),
        field,
        alpha,
        flow: Some(flow),
        fiber_bounds: vec![(-1.5, 1.5), (-1.5, 1.5)],
    }
}

fn torus_model() -> Model {
    let alpha = MixedForm::from_parts(2, vec![KForm::constant(2, 1.0)]).expect("unit form");
    Model {
        name: "torus_translate".into(),
        dim: 2,
        half_dim: 1,
        integration: torus_chart_data(alpha),
        fixed: vec![],
        expected_lhs: Some(ExpectedValue {
            value: 0.0,
            provenance: "constant form has no top-degree part".into(),
        }),
        controls: vec![],
        node_cap: None,
    }
}

fn control_nonclosed() -> Model {
    let alpha = MixedForm::from_parts(2, vec![KForm::basis(2, &[0, 1]).expect("basis")])
        .expect("volume form");
    Model {
        name: "control_nonclosed".into(),
        dim: 2,
        half_dim: 1,
        integration: torus_chart_data(alpha),
        fixed: vec![],
        expected_lhs: None,
        controls: vec![ControlLabel::Closedness],
        node_cap: None,
    }
}

/// Bulk metric that the rotation flow does not preserve: an off-diagonal
/// term correlated with a longitude-dependent stretch. Both deformations
/// vanish at the poles, and the fixed-point charts keep the round metric,
/// so the local fixed-point data stays intact while the invariance and
/// restricted-closedness checks fail in the bulk.
fn noninvariant_metric() -> Metric {
    Metric::new(
        2,
        Arc::new(|x: &[Jet]| {
            let s = x[0].sin();
            let s2 = &s * &s;
            let b = &(&(&Jet::Re(0.3) * &s2) * &x[0].cos()) * &x[1].sin();
            let stretch = &Jet::Re(1.0) + &(&Jet::Re(0.3) * &x[1].cos());
            let g22 = &s2 * &stretch;
            vec![Jet::Re(1.0), b.clone(), b, g22]
        }),
    )
}

fn control_noninvariant_metric() -> Model {
    let mut model = sphere_model(1.0, false, "control_noninvariant_metric".into());
    model.integration.metric = noninvariant_metric();
    model.controls = vec![ControlLabel::MetricInvariance, ControlLabel::RestrictedClosedness];
    // The deformed bulk metric genuinely disagrees with the round pole
    // metric across the overlaps; this control declares no transitions (the
    // consistency spot-check is opt-in) and therefore runs no cube
    // bookkeeping.
    for fc in &mut model.fixed {
        fc.from_integration = None;
    }
    model
}
