//! Gauss-Legendre tensor-product quadrature over chart boxes, and
//! integration of top-degree forms both on the base chart and along graph
//! sections of the cotangent chart.
//!
//! Node evaluations are pure; parallel runs split the outermost axis into
//! contiguous slices whose partial sums are combined in a fixed pairwise
//! order, so results are bit-identical for every thread count.

use std::sync::Arc;

use crate::ad::{DiffMode, Jet};
use crate::equivariant::omega_extension;
use crate::forms::{ChartMap, KForm, MixedForm};
use crate::geometry::{metric_dual, Chart, ChartData, Model};
use crate::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial with the cosine initial guess.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_m(x) and P'_m(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[m - 1 - i] = x.abs();
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// Tensor grid over a box: per-axis nodes mapped into the interval, weights
/// scaled by the interval half-width.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub nodes_per_axis: usize,
    pub axes: Vec<(Vec<f64>, Vec<f64>)>,
}

impl QuadratureGrid {
    pub fn new(bounds: &[(f64, f64)], m: usize) -> QuadratureGrid {
        let (base_nodes, base_weights) = gauss_legendre(m);
        let axes = bounds
            .iter()
            .map(|&(lo, hi)| {
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                let nodes: Vec<f64> = base_nodes.iter().map(|t| mid + half * t).collect();
                let weights: Vec<f64> = base_weights.iter().map(|w| w * half).collect();
                (nodes, weights)
            })
            .collect();
        QuadratureGrid { nodes_per_axis: m, axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes_per_axis.pow(self.dim() as u32)
    }

    /// Sum of all tensor weights (the box volume, up to roundoff).
    pub fn weight_sum(&self) -> f64 {
        self.axes
            .iter()
            .map(|(_n, w)| w.iter().sum::<f64>())
            .product()
    }
}

/// Result of one integration: the value at the requested node count and a
/// coarse-grid cross-check as the error estimate.
#[derive(Clone, Copy, Debug)]
pub struct IntegrationResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

/// Restriction of the integration domain.
#[derive(Clone)]
pub enum Region {
    Whole,
    /// Intersect with a sub-box (same dimension as the chart).
    SubBox(Vec<(f64, f64)>),
    /// Keep only nodes where the predicate is true.
    Mask(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>),
}

/// Per-axis node count for a deformation parameter: wide Gaussians need few
/// nodes, narrow ones more, growing like the square root of R.
pub fn node_schedule(r: f64) -> usize {
    let formula = 4.0 * (8.0 * (1.0 + r).sqrt()).ceil();
    (formula as usize).max(32)
}

/// Fixed-order pairwise reduction; independent of chunking.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Neumaier compensated accumulation for the sequential inner loops.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// Integrate a pointwise density over the grid, restricted to the region.
/// The outermost axis is divided into contiguous slices across `threads`
/// workers; slice sums are combined pairwise in index order, so the result
/// does not depend on the thread count.
pub fn integrate_density<F>(grid: &QuadratureGrid, region: &Region, threads: usize, density: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate_density_with_boundary(grid, region, threads, density).0
}

/// As [`integrate_density`], also accumulating the quadrature mass of nodes
/// adjacent to inclusion flips along the innermost axis. That mass bounds
/// the cell-assignment ambiguity a masked region introduces at its cut
/// boundary, and feeds the error estimate of masked integrals.
pub fn integrate_density_with_boundary<F>(
    grid: &QuadratureGrid,
    region: &Region,
    threads: usize,
    density: F,
) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = grid.dim();
    let m = grid.nodes_per_axis;
    let slice_sum = |i0: usize| -> (f64, f64) {
        let mut acc = Compensated::default();
        let mut boundary = 0.0f64;
        let mut point = vec![0.0; dim];
        point[0] = grid.axes[0].0[i0];
        let w0 = grid.axes[0].1[i0];
        // Previous node along the innermost axis: inclusion, weight, |f|.
        let mut prev: Option<(bool, f64, f64)> = None;
        // Odometer over the remaining axes.
        let mut idx = vec![0usize; dim.saturating_sub(1)];
        loop {
            let mut w = w0;
            for (a, &i) in idx.iter().enumerate() {
                point[a + 1] = grid.axes[a + 1].0[i];
                w *= grid.axes[a + 1].1[i];
            }
            let include = match region {
                Region::Whole => true,
                Region::SubBox(b) => point
                    .iter()
                    .zip(b.iter())
                    .all(|(x, (lo, hi))| lo <= x && x <= hi),
                Region::Mask(pred) => pred(&point),
            };
            // Masked runs evaluate the density on both sides of the cut so
            // flip-adjacent masses are available; box regions never need the
            // excluded side.
            let fval = if include || matches!(region, Region::Mask(_)) {
                density(&point)
            } else {
                0.0
            };
            if include {
                acc.add(w * fval);
            }
            if let Some((pinc, pw, pf)) = prev {
                if pinc != include {
                    boundary += pw * pf.abs() + w * fval.abs();
                }
            }
            prev = Some((include, w, fval));
            // advance odometer
            let mut carry = true;
            for a in (0..idx.len()).rev() {
                if carry {
                    idx[a] += 1;
                    if idx[a] == m {
                        idx[a] = 0;
                    } else {
                        carry = false;
                    }
                }
            }
            if idx.last() == Some(&0) || idx.is_empty() {
                // innermost axis wrapped (or there is none): next node is not
                // adjacent to this one
                prev = None;
            }
            if carry {
                break;
            }
        }
        (acc.total(), boundary)
    };

    let mut slice_sums = vec![(0.0, 0.0); m];
    let threads = threads.max(1).min(m);
    if threads == 1 {
        for (i, out) in slice_sums.iter_mut().enumerate() {
            *out = slice_sum(i);
        }
    } else {
        let chunk = m.div_ceil(threads);
        std::thread::scope(|scope| {
            for (t, out_chunk) in slice_sums.chunks_mut(chunk).enumerate() {
                let slice_sum = &slice_sum;
                scope.spawn(move || {
                    for (off, out) in out_chunk.iter_mut().enumerate() {
                        *out = slice_sum(t * chunk + off);
                    }
                });
            }
        });
    }
    let values: Vec<f64> = slice_sums.iter().map(|s| s.0).collect();
    let boundaries: Vec<f64> = slice_sums.iter().map(|s| s.1).collect();
    (pairwise_sum(&values), pairwise_sum(&boundaries))
}

fn coarse_node_count(m: usize) -> usize {
    (m / 2).max(4)
}

/// Shared evaluation-and-estimate driver at a resolved node count. The
/// refinement difference against one coarse grid covers the smooth
/// truncation error; for masked regions the flip-adjacent boundary mass
/// (scaled to cover cut pieces parallel to the sweep axis) covers the
/// cell-assignment ambiguity of the cut.
fn run_with_estimate<F>(
    bounds: &[(f64, f64)],
    region: &Region,
    m: usize,
    threads: usize,
    sign: f64,
    density: F,
) -> IntegrationResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let grid = QuadratureGrid::new(bounds, m);
    let (raw, boundary_mass) = integrate_density_with_boundary(&grid, region, threads, &density);
    let value = sign * raw;
    let mut nodes_used = grid.total_nodes();
    let grid2 = QuadratureGrid::new(bounds, coarse_node_count(m));
    let coarse = sign * integrate_density(&grid2, region, threads, &density);
    nodes_used += grid2.total_nodes();
    let mut error_estimate = (value - coarse).abs();
    if matches!(region, Region::Mask(_)) {
        let dim_factor = bounds.len() as f64 / 2.0;
        error_estimate = error_estimate.max(dim_factor * boundary_mass);
    }
    IntegrationResult { value, error_estimate, nodes_used }
}

/// Integrate a top-degree form over a chart box (or a region of it). The
/// chart orientation sign multiplies the raw tensor quadrature.
pub fn integrate_top_form_over(
    form: &KForm,
    chart: &Chart,
    bounds: &[(f64, f64)],
    region: &Region,
    m: usize,
    threads: usize,
) -> Result<IntegrationResult> {
    if form.degree() != chart.dim {
        return Err(Error::DegreeOutOfRange { degree: form.degree(), dim: chart.dim });
    }
    if form.dim() != chart.dim {
        return Err(Error::DimensionMismatch { expected: chart.dim, got: form.dim() });
    }
    let density = |p: &[f64]| form.eval(p)[0];
    let sign = chart.orientation.sign();
    Ok(run_with_estimate(bounds, region, m, threads, sign, density))
}

/// Integrate a top-degree form over the model's integration chart.
pub fn integrate_top_form(form: &KForm, chart: &Chart, m: usize, threads: usize) -> Result<IntegrationResult> {
    if !chart.covers_almost_all {
        return Err(Error::InvalidRegion(format!(
            "chart {} does not cover the manifold",
            chart.name
        )));
    }
    integrate_top_form_over(form, chart, &chart.bounds.clone(), &Region::Whole, m, threads)
}

/// The graph section map of one chart: `x -> (x, R s(x))` into the doubled
/// chart, with `s` the metric dual of minus the field.
pub fn section_map(data: &ChartData, r: f64) -> ChartMap {
    let n = data.dim();
    let dual = metric_dual(&data.metric, &data.field.scale(-1.0));
    let comps = dual.components_fn();
    let scale = Jet::Re(r);
    ChartMap::new(
        n,
        2 * n,
        Arc::new(move |x: &[Jet]| {
            let mut out = x.to_vec();
            for s in comps(x) {
                out.push(&s * &scale);
            }
            out
        }),
    )
}

/// Options shared by the graph integrations.
#[derive(Clone, Copy)]
pub struct GraphOpts {
    pub threads: usize,
    pub mode: DiffMode,
    /// Per-axis node count override (None: use the schedule).
    pub nodes_override: Option<usize>,
    /// Per-axis cap from the model.
    pub node_cap: Option<usize>,
    /// Length of the integration domain relative to the chart the schedule
    /// is calibrated for. Small boxes (fixed-point cubes) need
    /// proportionally fewer nodes to resolve the same Gaussian width.
    pub subdomain_fraction: Option<f64>,
}

impl GraphOpts {
    pub fn nodes_for(&self, r: f64) -> usize {
        let m = self.nodes_override.unwrap_or_else(|| {
            let full = node_schedule(r);
            match self.subdomain_fraction {
                Some(f) if f < 1.0 => {
                    ((1.25 * full as f64 * f).ceil() as usize).max(32)
                }
                _ => full,
            }
        });
        match self.node_cap {
            Some(cap) => m.min(cap).max(4),
            None => m,
        }
    }

    /// Masked regions carry a boundary cut; they run on a finer grid, still
    /// capped.
    pub fn nodes_for_region(&self, r: f64, region: &Region) -> usize {
        let m = self.nodes_for(r);
        match region {
            Region::Mask(_) => {
                let boosted = m + m / 2;
                match self.node_cap {
                    Some(cap) => boosted.min(cap).max(4),
                    None => boosted,
                }
            }
            _ => m,
        }
    }
}

/// Integrate the top grade of the cotangent extension over the graph
/// section at deformation parameter R, on one chart, over the given bounds
/// and region in that chart.
///
/// Two equivalent evaluation routes exist: the generic route pulls
/// `grade(omega, n)` back along the section map, the direct route assembles
/// the same density by hand from the section Jacobian. They are
/// cross-checked against each other in the test suite; production use picks
/// the generic route on small charts and the direct one on 4-dimensional
/// charts, where the generic component tree dominates the run time.
pub fn integrate_graph_on(
    data: &ChartData,
    r: f64,
    bounds: &[(f64, f64)],
    region: &Region,
    opts: &GraphOpts,
) -> Result<IntegrationResult> {
    if r < 0.0 {
        return Err(Error::NegativeR(r));
    }
    let n = data.dim();
    let m = opts.nodes_for_region(r, region);
    if r == 0.0 {
        // The zero section restores the base top-degree part exactly.
        return integrate_top_form_over(&data.alpha.grade(n), &data.chart, bounds, region, m, opts.threads);
    }
    if n >= 4 {
        return integrate_graph_closed_form(data, r, bounds, region, opts);
    }
    let eq = omega_extension(data, opts.mode)?;
    let phi = section_map(data, r);
    let pulled = KForm::pullback(&phi, &eq.omega.grade(n), opts.mode)?;
    integrate_top_form_over(&pulled, &data.chart, bounds, region, m, opts.threads)
}

/// The generic pullback route regardless of dimension (cross-check target).
pub fn integrate_graph_pullback(
    data: &ChartData,
    r: f64,
    bounds: &[(f64, f64)],
    region: &Region,
    opts: &GraphOpts,
) -> Result<IntegrationResult> {
    if r < 0.0 {
        return Err(Error::NegativeR(r));
    }
    let n = data.dim();
    let m = opts.nodes_for_region(r, region);
    if r == 0.0 {
        return integrate_top_form_over(&data.alpha.grade(n), &data.chart, bounds, region, m, opts.threads);
    }
    let eq = omega_extension(data, opts.mode)?;
    let phi = section_map(data, r);
    let pulled = KForm::pullback(&phi, &eq.omega.grade(n), opts.mode)?;
    integrate_top_form_over(&pulled, &data.chart, bounds, region, m, opts.threads)
}

/// Graph integration over the model's integration chart.
pub fn integrate_graph(model: &Model, r: f64, region: &Region, opts: &GraphOpts) -> Result<IntegrationResult> {
    let mut opts = *opts;
    opts.node_cap = opts.node_cap.or(model.node_cap);
    let bounds = model.integration.chart.bounds.clone();
    integrate_graph_on(&model.integration, r, &bounds, region, &opts)
}

/// Index bookkeeping for the hand-assembled graph density, built once per
/// integral: wedge-merge tables between successive powers of a two-form and
/// the complementary-degree parts of the base form.
struct DensityTables {
    /// For each power k: flattened merge table (power rank, pair rank,
    /// resulting rank, sign) taking power degree 2k to 2k+2.
    raise: Vec<Vec<(usize, usize, usize, f64)>>,
    /// For each power k with a stored base part of degree n-2k: the
    /// contraction table (power rank, part rank, sign) onto the top index.
    dot: Vec<Option<Vec<(usize, usize, f64)>>>,
    /// Component counts of the power at each degree 2k.
    power_len: Vec<usize>,
}

fn density_tables(n: usize, alpha: &MixedForm) -> DensityTables {
    use crate::forms::MultiIndex;
    let pairs = MultiIndex::enumerate(n, 2);
    let l = n / 2;
    let mut raise = Vec::with_capacity(l);
    let mut dot = Vec::with_capacity(l + 1);
    let mut power_len = Vec::with_capacity(l + 1);
    for k in 0..=l {
        let pow_idx = MultiIndex::enumerate(n, 2 * k);
        power_len.push(pow_idx.len());
        let deg_alpha = n - 2 * k;
        dot.push(alpha.part(deg_alpha).map(|_| {
            let a_idx = MultiIndex::enumerate(n, deg_alpha);
            let mut t = Vec::new();
            for (rp, ip) in pow_idx.iter().enumerate() {
                for (ra, ia) in a_idx.iter().enumerate() {
                    if let Some((_m, sign)) = ip.merge(ia) {
                        t.push((rp, ra, sign));
                    }
                }
            }
            t
        }));
        if k < l {
            let mut t = Vec::new();
            for (rp, ip) in pow_idx.iter().enumerate() {
                for (rs, is) in pairs.iter().enumerate() {
                    if let Some((merged, sign)) = ip.merge(is) {
                        t.push((rp, rs, merged.rank(n), sign));
                    }
                }
            }
            raise.push(t);
        }
    }
    DensityTables { raise, dot, power_len }
}

/// Independent assembly of the same graph integral: pull the pieces back by
/// hand instead of through the generic pullback. Per node this evaluates
/// `exp(-R |X|^2) sum_k (Phi* sigma)^k / k! ^ alpha_{n-2k}` with
/// `Phi* sigma = -R d(s-flat)` assembled from the Jacobian of the section.
pub fn integrate_graph_closed_form(
    data: &ChartData,
    r: f64,
    bounds: &[(f64, f64)],
    region: &Region,
    opts: &GraphOpts,
) -> Result<IntegrationResult> {
    if r < 0.0 {
        return Err(Error::NegativeR(r));
    }
    let n = data.dim();
    let m = opts.nodes_for_region(r, region);
    let dual = metric_dual(&data.metric, &data.field.scale(-1.0));
    let s_comps = dual.components_fn();
    let field = data.field.clone();
    let mode = opts.mode;
    let tables = density_tables(n, &data.alpha);
    let parts: Vec<Option<KForm>> = (0..=n / 2)
        .map(|k| data.alpha.part(n - 2 * k).cloned())
        .collect();
    use crate::forms::MultiIndex;
    let pair_axes: Vec<(usize, usize)> = MultiIndex::enumerate(n, 2)
        .iter()
        .map(|mi| (mi.axes()[0], mi.axes()[1]))
        .collect();

    let density = move |p: &[f64]| -> f64 {
        let wrapped = |x: &[Jet]| s_comps(x);
        let d = crate::ad::derivatives_of(&wrapped, &crate::ad::constants(p), mode);
        let xv = field.at(p);
        // mu on the section is R <s, X> = -R |X|^2
        let mu: f64 = d.values.iter().zip(xv.iter()).map(|(a, b)| a.value() * b).sum();
        // two-form comps of Phi* sigma = -R d(s-flat) in enumeration order
        let sigma_r: Vec<f64> = pair_axes
            .iter()
            .map(|&(i, j)| -r * (d.partials[j][i].value() - d.partials[i][j].value()))
            .collect();
        let mut total = 0.0;
        let mut power: Vec<f64> = vec![1.0];
        let mut factorial = 1.0;
        for k in 0..tables.power_len.len() {
            if let (Some(part), Some(dot)) = (&parts[k], &tables.dot[k]) {
                let a_comps = part.eval(p);
                let mut top = 0.0;
                for &(rp, ra, sign) in dot {
                    let c = power[rp] * a_comps[ra];
                    if c != 0.0 {
                        top += sign * c;
                    }
                }
                total += top / factorial;
            }
            if k < tables.raise.len() {
                let mut next = vec![0.0; tables.power_len[k + 1]];
                for &(rp, rs, out, sign) in &tables.raise[k] {
                    let c = power[rp] * sigma_r[rs];
                    if c != 0.0 {
                        next[out] += sign * c;
                    }
                }
                power = next;
                factorial *= (k + 1) as f64;
            }
        }
        (r * mu).exp() * total
    };

    let sign = data.chart.orientation.sign();
    Ok(run_with_estimate(bounds, region, m, opts.threads, sign, density))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Orientation;
    use std::sync::Arc as StdArc;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn gauss_legendre_small_orders() {
        let (n2, w2) = gauss_legendre(2);
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert!((n2[0] + inv_sqrt3).abs() < 1e-15);
        assert!((n2[1] - inv_sqrt3).abs() < 1e-15);
        assert!((w2[0] - 1.0).abs() < 1e-15);
        let (n3, w3) = gauss_legendre(3);
        assert!((n3[1]).abs() < 1e-15);
        assert!((w3[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((n3[2] - (0.6f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_box_volume() {
        for m in [4usize, 16, 64, 324] {
            let grid = QuadratureGrid::new(&[(0.0, PI), (0.0, 2.0 * PI)], m);
            let vol = 2.0 * PI * PI;
            assert!(
                (grid.weight_sum() - vol).abs() <= 1e-12 * vol,
                "m={m}: {} vs {vol}",
                grid.weight_sum()
            );
        }
    }

    #[test]
    fn polynomial_exactness() {
        // m nodes integrate degree 2m-1 exactly per axis.
        let m = 6;
        let grid = QuadratureGrid::new(&[(-1.0, 1.0)], m);
        let density = |p: &[f64]| p[0].powi(11) + 3.0 * p[0].powi(10);
        let got = integrate_density(&grid, &Region::Whole, 1, density);
        let expect = 3.0 * 2.0 / 11.0;
        assert!((got - expect).abs() <= 1e-13 * expect.abs());
    }

    #[test]
    fn node_schedule_shape() {
        assert_eq!(node_schedule(0.0), 32);
        assert!(node_schedule(100.0) >= 320);
        let mut prev = 0;
        for r in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
            let m = node_schedule(r);
            assert!(m >= prev, "schedule must not decrease");
            prev = m;
        }
    }

    fn sphere_area_chart() -> (KForm, Chart) {
        let form = KForm::new(2, 2, StdArc::new(|x: &[Jet]| vec![x[0].sin()])).unwrap();
        let chart = Chart::new(
            "sphere",
            vec![(0.0, PI), (0.0, 2.0 * PI)],
            Orientation::Positive,
            true,
        )
        .unwrap();
        (form, chart)
    }

    #[test]
    fn sphere_area_integral() {
        let (form, chart) = sphere_area_chart();
        let r = integrate_top_form(&form, &chart, 32, 1).unwrap();
        let expect = 4.0 * PI;
        assert!((r.value - expect).abs() <= 1e-10 * expect, "{}", r.value);
        let r64 = integrate_top_form(&form, &chart, 64, 1).unwrap();
        assert!(r64.error_estimate <= 1e-9);
    }

    #[test]
    fn constant_form_unit_box() {
        let form = KForm::constant_components(2, 2, vec![1.0]).unwrap();
        let chart = Chart::new("box", vec![(0.0, 1.0), (0.0, 1.0)], Orientation::Positive, true).unwrap();
        let r = integrate_top_form(&form, &chart, 8, 1).unwrap();
        assert!((r.value - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn odd_integrand_cancels() {
        let form = KForm::new(2, 2, StdArc::new(|x: &[Jet]| vec![x[0].clone()])).unwrap();
        let chart = Chart::new("sym", vec![(-1.0, 1.0), (0.0, 1.0)], Orientation::Positive, true).unwrap();
        let r = integrate_top_form(&form, &chart, 16, 1).unwrap();
        assert!(r.value.abs() <= 1e-14);
    }

    #[test]
    fn orientation_flip_negates_exactly() {
        let (form, chart) = sphere_area_chart();
        let plus = integrate_top_form(&form, &chart, 24, 1).unwrap();
        let mut flipped = chart.clone();
        flipped.orientation = Orientation::Negative;
        let minus = integrate_top_form(&form, &flipped, 24, 1).unwrap();
        assert_eq!(plus.value, -minus.value);
    }

    #[test]
    fn parallel_runs_are_bit_identical() {
        let (form, chart) = sphere_area_chart();
        let a = integrate_top_form(&form, &chart, 48, 1).unwrap();
        let b = integrate_top_form(&form, &chart, 48, 8).unwrap();
        let c = integrate_top_form(&form, &chart, 48, 3).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn stokes_on_a_box() {
        // For a polynomial 1-form on a 2-dim box, the integral of the
        // derivative equals the oriented boundary line integral.
        let beta = KForm::new(2, 1, StdArc::new(|x: &[Jet]| {
            vec![&x[0].powi(2) * &x[1], &(&x[0] * &x[1].powi(3)) + &x[0].powi(2)]
        }))
        .unwrap();
        let chart = Chart::new("box", vec![(-1.0, 2.0), (0.5, 1.5)], Orientation::Positive, true).unwrap();
        let dbeta = beta.exterior_derivative(DiffMode::Forward).unwrap();
        let inner = integrate_top_form(&dbeta, &chart, 16, 1).unwrap().value;

        // boundary: four edges with the induced orientation
        let (x0, x1) = chart.bounds[0];
        let (y0, y1) = chart.bounds[1];
        let m = 16;
        let mut boundary = 0.0;
        let line = |a: f64, b: f64, f: &(dyn Fn(f64) -> f64 + Sync)| -> f64 {
            let grid = QuadratureGrid::new(&[(a, b)], m);
            integrate_density(&grid, &Region::Whole, 1, |p: &[f64]| f(p[0]))
        };
        // bottom: y = y0, dx direction
        boundary += line(x0, x1, &|x| beta.eval(&[x, y0])[0]);
        // right: x = x1, dy direction
        boundary += line(y0, y1, &|y| beta.eval(&[x1, y])[1]);
        // top: y = y1, -dx direction
        boundary -= line(x0, x1, &|x| beta.eval(&[x, y1])[0]);
        // left: x = x0, -dy direction
        boundary -= line(y0, y1, &|y| beta.eval(&[x0, y])[1]);

        assert!((inner - boundary).abs() <= 1e-10, "{inner} vs {boundary}");
    }
}
