//! The equivariant differential and the canonical cotangent-chart data.
//!
//! On a chart with coordinates `x` the cotangent chart doubles it with fiber
//! coordinates `z`, a covector at `x` being `z_1 dx_1 + ... + z_n dx_n`. The
//! canonical two-form is `sum_i dx_i ^ dz_i`, the moment function of a field
//! `X` is `sum_i z_i X^i(x)`, and a form `alpha` on the base extends to
//! `exp(mu + sigma) ^ pi* alpha`, whose restriction to the zero section is
//! `alpha` again.

use std::sync::Arc;

use crate::ad::{DiffMode, Jet, ScalarFn};
use crate::forms::{ChartMap, KForm, MixedForm};
use crate::geometry::{Chart, ChartData, Point, VectorField};
use crate::{Error, Result};

/// The doubled chart `(x, z)` over a base chart.
#[derive(Clone)]
pub struct CotangentChart {
    pub base: Chart,
    /// Finite per-axis fiber intervals, used only for sampling.
    pub fiber_bounds: Vec<(f64, f64)>,
}

impl CotangentChart {
    pub fn new(base: Chart, fiber_bounds: Vec<(f64, f64)>) -> Result<CotangentChart> {
        if fiber_bounds.len() != base.dim {
            return Err(Error::DimensionMismatch { expected: base.dim, got: fiber_bounds.len() });
        }
        Ok(CotangentChart { base, fiber_bounds })
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim
    }

    pub fn dim(&self) -> usize {
        2 * self.base.dim
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = self.base.bounds.clone();
        b.extend_from_slice(&self.fiber_bounds);
        b
    }
}

/// Projection `(x, z) -> x` from the doubled chart to the base.
pub fn projection_map(n: usize) -> ChartMap {
    ChartMap::new(2 * n, n, Arc::new(move |x: &[Jet]| x[..n].to_vec()))
}

/// Zero-section inclusion `x -> (x, 0)`.
pub fn zero_section_map(n: usize) -> ChartMap {
    ChartMap::new(
        n,
        2 * n,
        Arc::new(move |x: &[Jet]| {
            let mut out = x.to_vec();
            out.extend((0..n).map(|_| Jet::Re(0.0)));
            out
        }),
    )
}

/// Extension of a base-chart form to the doubled chart along the
/// projection: base-axis components carry over unchanged, every component
/// touching a fiber axis is zero. Agrees with the generic pullback along
/// [`projection_map`] but skips the Jacobian machinery (the projection is a
/// constant index scatter).
pub fn base_extension(form: &KForm, n: usize) -> KForm {
    let identity: Vec<usize> = (0..n).collect();
    form.embed_axes(&identity, 2 * n).expect("base axes embed into the doubled chart")
}

/// The canonical two-form `sum_i dx_i ^ dz_i` on the doubled chart.
pub fn canonical_symplectic(n: usize) -> KForm {
    let mut form = KForm::zero(2 * n, 2);
    for i in 0..n {
        form = form
            .add(&KForm::basis(2 * n, &[i, n + i]).expect("basis two-form"))
            .expect("same shape");
    }
    form
}

/// The moment function of a field on the doubled chart:
/// `(x, z) -> sum_i z_i X^i(x)`.
pub fn moment_map(field: &VectorField) -> ScalarFn {
    let comps = field.components_fn();
    let n = field.dim;
    Arc::new(move |xz: &[Jet]| {
        let x = &xz[..n];
        let z = &xz[n..];
        let xv = comps(x);
        let mut acc = Jet::Re(0.0);
        for i in 0..n {
            if z[i].is_zero() || xv[i].is_zero() {
                continue;
            }
            acc = &acc + &(&z[i] * &xv[i]);
        }
        acc
    })
}

/// Apply the equivariant differential once: per grade k the output picks up
/// `d(alpha_k)` in grade k+1 and `-iota(X)(alpha_k)` in grade k-1.
pub fn equivariant_differential(alpha: &MixedForm, field: &VectorField, mode: DiffMode) -> MixedForm {
    let mut out = MixedForm::new(alpha.dim());
    let vf = field.components_fn();
    for k in alpha.degrees() {
        let part = alpha.grade(k);
        if let Some(d) = part.exterior_derivative(mode) {
            out = out.with_part(d).expect("derivative part fits");
        }
        if k >= 1 {
            let c = part.contract(&vf).expect("contraction of positive degree");
            out = out.with_part(c.negate()).expect("contraction part fits");
        }
    }
    out
}

/// Max component magnitude of the equivariant differential over samples and
/// grades.
pub fn closedness_residual(
    alpha: &MixedForm,
    field: &VectorField,
    samples: &[Point],
    mode: DiffMode,
) -> f64 {
    let d = equivariant_differential(alpha, field, mode);
    let mut worst: f64 = 0.0;
    for k in d.degrees() {
        let part = d.grade(k);
        for p in samples {
            for c in part.eval(p) {
                worst = worst.max(c.abs());
            }
        }
    }
    worst
}

/// Canonical data on the cotangent chart of one model chart: the two-form,
/// the moment function, and the extension of the chart's evaluated form.
#[derive(Clone)]
pub struct EquivariantData {
    pub sigma: KForm,
    pub mu: ScalarFn,
    pub omega: MixedForm,
    pub cotangent: CotangentChart,
}

/// Build `omega = exp(mu + sigma) ^ pi* alpha` on the doubled chart.
/// The form must have parts of a single parity.
pub fn omega_extension(data: &ChartData, _mode: DiffMode) -> Result<EquivariantData> {
    data.alpha.parity()?;
    let n = data.dim();
    let sigma = canonical_symplectic(n);
    let mu = moment_map(&data.field);
    let mu_form = KForm::scalar_field(2 * n, mu.clone());
    let exp_part = MixedForm::from_parts(2 * n, vec![mu_form, sigma.clone()])?.exp_even()?;
    let mut pulled = MixedForm::new(2 * n);
    for k in data.alpha.degrees() {
        pulled = pulled.with_part(base_extension(&data.alpha.grade(k), n))?;
    }
    let omega = exp_part.wedge(&pulled)?;
    let cotangent = CotangentChart::new(data.chart.clone(), data.fiber_bounds.clone())?;
    Ok(EquivariantData { sigma, mu, omega, cotangent })
}
