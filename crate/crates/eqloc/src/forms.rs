//! Differential forms on a single coordinate chart.
//!
//! A degree-k form stores one closure producing all `C(n, k)` components in
//! lexicographic multi-index order; components are jet-valued so exterior
//! derivatives and pullback Jacobians come out of the same closures that
//! quadrature evaluates. Forms are immutable values: every operation builds
//! a new evaluation tree over the operands.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ad::{constants, derivatives_of, DiffMode, Jet, ScalarFn, VecFn};
use crate::{Error, Result};

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Strictly increasing list of axis indices (0-based). Enumeration over all
/// degree-k indices of a chart is lexicographic and total.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct MultiIndex {
    axes: Vec<usize>,
}

impl MultiIndex {
    pub fn new(axes: Vec<usize>) -> Result<MultiIndex> {
        for w in axes.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidRegion(format!(
                    "multi-index {axes:?} is not strictly increasing"
                )));
            }
        }
        Ok(MultiIndex { axes })
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn degree(&self) -> usize {
        self.axes.len()
    }

    /// All degree-k indices on an n-dimensional chart, lexicographic.
    pub fn enumerate(dim: usize, k: usize) -> Vec<MultiIndex> {
        let mut out = Vec::with_capacity(binomial(dim, k));
        let mut current = Vec::with_capacity(k);
        fn rec(dim: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
            if current.len() == k {
                out.push(MultiIndex { axes: current.clone() });
                return;
            }
            for a in start..dim {
                current.push(a);
                rec(dim, k, a + 1, current, out);
                current.pop();
            }
        }
        rec(dim, k, 0, &mut current, &mut out);
        out
    }

    /// Lexicographic rank among all indices of the same degree.
    pub fn rank(&self, dim: usize) -> usize {
        let k = self.degree();
        let mut rank = 0usize;
        let mut prev: isize = -1;
        for (i, &s) in self.axes.iter().enumerate() {
            for j in (prev + 1) as usize..s {
                rank += binomial(dim - 1 - j, k - 1 - i);
            }
            prev = s as isize;
        }
        rank
    }

    /// Wedge-merge with another index: the union with the permutation sign,
    /// or `None` when an axis repeats.
    pub fn merge(&self, other: &MultiIndex) -> Option<(MultiIndex, f64)> {
        let a = &self.axes;
        let b = &other.axes;
        let mut out = Vec::with_capacity(a.len() + b.len());
        let mut i = 0;
        let mut j = 0;
        let mut inversions = 0usize;
        while i < a.len() && j < b.len() {
            if a[i] == b[j] {
                return None;
            }
            if a[i] < b[j] {
                out.push(a[i]);
                i += 1;
            } else {
                // b[j] jumps over the remaining elements of a.
                inversions += a.len() - i;
                out.push(b[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        Some((MultiIndex { axes: out }, sign))
    }

    fn without_position(&self, pos: usize) -> MultiIndex {
        let mut axes = self.axes.clone();
        axes.remove(pos);
        MultiIndex { axes }
    }
}

/// A chart map with jet evaluation: values and Jacobians both come from the
/// same closure.
#[derive(Clone)]
pub struct ChartMap {
    pub source_dim: usize,
    pub target_dim: usize,
    pub map: VecFn,
}

impl ChartMap {
    pub fn new(source_dim: usize, target_dim: usize, map: VecFn) -> ChartMap {
        ChartMap { source_dim, target_dim, map }
    }

    pub fn identity(dim: usize) -> ChartMap {
        ChartMap {
            source_dim: dim,
            target_dim: dim,
            map: Arc::new(|x: &[Jet]| x.to_vec()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.map)(&constants(x)).iter().map(|j| j.value()).collect()
    }
}

/// Homogeneous differential form of one degree on one chart.
#[derive(Clone)]
pub struct KForm {
    dim: usize,
    degree: usize,
    comps: VecFn,
}

impl KForm {
    pub fn new(dim: usize, degree: usize, comps: VecFn) -> Result<KForm> {
        if degree > dim {
            return Err(Error::DegreeOutOfRange { degree, dim });
        }
        Ok(KForm { dim, degree, comps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn component_count(&self) -> usize {
        binomial(self.dim, self.degree)
    }

    pub fn zero(dim: usize, degree: usize) -> KForm {
        let count = binomial(dim, degree);
        KForm {
            dim,
            degree,
            comps: Arc::new(move |_x: &[Jet]| vec![Jet::Re(0.0); count]),
        }
    }

    /// Constant scalar as a 0-form.
    pub fn constant(dim: usize, c: f64) -> KForm {
        KForm {
            dim,
            degree: 0,
            comps: Arc::new(move |_x: &[Jet]| vec![Jet::Re(c)]),
        }
    }

    /// Scalar field as a 0-form.
    pub fn scalar_field(dim: usize, f: ScalarFn) -> KForm {
        KForm {
            dim,
            degree: 0,
            comps: Arc::new(move |x: &[Jet]| vec![f(x)]),
        }
    }

    /// Coordinate differential basis form `dx_{axes}` with coefficient one.
    pub fn basis(dim: usize, axes: &[usize]) -> Result<KForm> {
        let idx = MultiIndex::new(axes.to_vec())?;
        let degree = idx.degree();
        if degree > dim {
            return Err(Error::DegreeOutOfRange { degree, dim });
        }
        let rank = idx.rank(dim);
        let count = binomial(dim, degree);
        Ok(KForm {
            dim,
            degree,
            comps: Arc::new(move |_x: &[Jet]| {
                let mut v = vec![Jet::Re(0.0); count];
                v[rank] = Jet::Re(1.0);
                v
            }),
        })
    }

    /// Form with constant components in enumeration order.
    pub fn constant_components(dim: usize, degree: usize, values: Vec<f64>) -> Result<KForm> {
        if values.len() != binomial(dim, degree) {
            return Err(Error::DimensionMismatch { expected: binomial(dim, degree), got: values.len() });
        }
        Ok(KForm {
            dim,
            degree,
            comps: Arc::new(move |_x: &[Jet]| values.iter().map(|&v| Jet::Re(v)).collect()),
        })
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.comps)(x)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.comps)(&constants(x)).iter().map(|j| j.value()).collect()
    }

    pub fn components_fn(&self) -> VecFn {
        self.comps.clone()
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        if self.degree != other.degree {
            return Err(Error::DegreeOutOfRange { degree: other.degree, dim: self.dim });
        }
        let a = self.comps.clone();
        let b = other.comps.clone();
        Ok(KForm {
            dim: self.dim,
            degree: self.degree,
            comps: Arc::new(move |x: &[Jet]| {
                a(x).iter().zip(b(x).iter()).map(|(u, v)| u + v).collect()
            }),
        })
    }

    pub fn negate(&self) -> KForm {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> KForm {
        let a = self.comps.clone();
        KForm {
            dim: self.dim,
            degree: self.degree,
            comps: Arc::new(move |x: &[Jet]| {
                let s = Jet::Re(c);
                a(x).iter().map(|u| u * &s).collect()
            }),
        }
    }

    /// Pointwise scaling by a scalar field.
    pub fn scale_field(&self, s: ScalarFn) -> KForm {
        let a = self.comps.clone();
        KForm {
            dim: self.dim,
            degree: self.degree,
            comps: Arc::new(move |x: &[Jet]| {
                let f = s(x);
                a(x).iter().map(|u| u * &f).collect()
            }),
        }
    }

    /// Exterior product. Bilinear, associative, graded-commutative.
    pub fn wedge(&self, other: &KForm) -> Result<KForm> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let (j, k, n) = (self.degree, other.degree, self.dim);
        if j + k > n {
            return Err(Error::WedgeOverflow { j, k, dim: n });
        }
        // Combination table built once at construction time.
        let idx_a = MultiIndex::enumerate(n, j);
        let idx_b = MultiIndex::enumerate(n, k);
        let out_count = binomial(n, j + k);
        let mut table: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); out_count];
        for (ra, ia) in idx_a.iter().enumerate() {
            for (rb, ib) in idx_b.iter().enumerate() {
                if let Some((merged, sign)) = ia.merge(ib) {
                    table[merged.rank(n)].push((ra, rb, sign));
                }
            }
        }
        let a = self.comps.clone();
        let b = other.comps.clone();
        Ok(KForm {
            dim: n,
            degree: j + k,
            comps: Arc::new(move |x: &[Jet]| {
                let va = a(x);
                let vb = b(x);
                table
                    .iter()
                    .map(|terms| {
                        let mut acc = Jet::Re(0.0);
                        for &(ra, rb, sign) in terms {
                            if va[ra].is_zero() || vb[rb].is_zero() {
                                continue;
                            }
                            let prod = &va[ra] * &vb[rb];
                            acc = if sign > 0.0 { &acc + &prod } else { &acc - &prod };
                        }
                        acc
                    })
                    .collect()
            }),
        })
    }

    /// Interior product with a vector field (components closure).
    pub fn contract(&self, v: &VecFn) -> Result<KForm> {
        if self.degree == 0 {
            return Err(Error::ContractZeroForm);
        }
        let (n, k) = (self.dim, self.degree);
        let idx_in = MultiIndex::enumerate(n, k);
        let out_count = binomial(n, k - 1);
        // For each input index I and position p: contribution of v^{I[p]} a_I
        // with sign (-1)^p to the output index I minus that axis.
        let mut table: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); out_count];
        for (ri, idx) in idx_in.iter().enumerate() {
            for p in 0..k {
                let axis = idx.axes()[p];
                let reduced = idx.without_position(p);
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                table[reduced.rank(n)].push((axis, ri, sign));
            }
        }
        let a = self.comps.clone();
        let vf = v.clone();
        Ok(KForm {
            dim: n,
            degree: k - 1,
            comps: Arc::new(move |x: &[Jet]| {
                let vv = vf(x);
                let va = a(x);
                table
                    .iter()
                    .map(|terms| {
                        let mut acc = Jet::Re(0.0);
                        for &(axis, ri, sign) in terms {
                            if vv[axis].is_zero() || va[ri].is_zero() {
                                continue;
                            }
                            let prod = &vv[axis] * &va[ri];
                            acc = if sign > 0.0 { &acc + &prod } else { &acc - &prod };
                        }
                        acc
                    })
                    .collect()
            }),
        })
    }

    /// Exterior derivative. Returns `None` for a top-degree form (the
    /// derivative is identically zero and degree n+1 forms are not
    /// constructible).
    pub fn exterior_derivative(&self, mode: DiffMode) -> Option<KForm> {
        let (n, k) = (self.dim, self.degree);
        if k == n {
            return None;
        }
        let idx_out = MultiIndex::enumerate(n, k + 1);
        // (da)_K = sum over positions p of (-1)^p d_{K[p]} a_{K minus K[p]}
        let table: Vec<Vec<(usize, usize, f64)>> = idx_out
            .iter()
            .map(|kidx| {
                (0..k + 1)
                    .map(|p| {
                        let axis = kidx.axes()[p];
                        let reduced = kidx.without_position(p);
                        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                        (axis, reduced.rank(n), sign)
                    })
                    .collect()
            })
            .collect();
        let a = self.comps.clone();
        Some(KForm {
            dim: n,
            degree: k + 1,
            comps: Arc::new(move |x: &[Jet]| {
                let d = derivatives_of(&*a, x, mode);
                table
                    .iter()
                    .map(|terms| {
                        let mut acc = Jet::Re(0.0);
                        for &(axis, rank, sign) in terms {
                            let p = &d.partials[rank][axis];
                            if p.is_zero() {
                                continue;
                            }
                            acc = if sign > 0.0 { &acc + p } else { &acc - p };
                        }
                        acc
                    })
                    .collect()
            }),
        })
    }

    /// Pullback along a chart map.
    pub fn pullback(map: &ChartMap, form: &KForm, mode: DiffMode) -> Result<KForm> {
        if map.target_dim != form.dim {
            return Err(Error::DimensionMismatch { expected: form.dim, got: map.target_dim });
        }
        let k = form.degree;
        let m = map.source_dim;
        let n = map.target_dim;
        if k > m {
            // Every k-minor of the Jacobian vanishes identically.
            return Ok(KForm::zero(m, k.min(m)));
        }
        let idx_src = MultiIndex::enumerate(m, k);
        let idx_tgt = MultiIndex::enumerate(n, k);
        let f = map.map.clone();
        let comps = form.comps.clone();
        Ok(KForm {
            dim: m,
            degree: k,
            comps: Arc::new(move |x: &[Jet]| {
                let d = derivatives_of(&*f, x, mode);
                let target_vals = comps(&d.values);
                idx_src
                    .iter()
                    .map(|isrc| {
                        let mut acc = Jet::Re(0.0);
                        for (rj, jtgt) in idx_tgt.iter().enumerate() {
                            if target_vals[rj].is_zero() {
                                continue;
                            }
                            let minor = jet_minor_det(&d.partials, jtgt.axes(), isrc.axes());
                            if minor.is_zero() {
                                continue;
                            }
                            acc = &acc + &(&target_vals[rj] * &minor);
                        }
                        acc
                    })
                    .collect()
            }),
        })
    }

    /// Re-chart the form along a coordinate inclusion: axis `i` of this
    /// form's chart becomes axis `axis_map[i]` of the target chart, and the
    /// coordinates fed to the coefficients are the mapped slots. The map
    /// must be strictly increasing, so no signs appear. This agrees with the
    /// generic pullback along the corresponding coordinate projection but
    /// skips the Jacobian machinery.
    pub fn embed_axes(&self, axis_map: &[usize], target_dim: usize) -> Result<KForm> {
        if axis_map.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: axis_map.len() });
        }
        if axis_map.windows(2).any(|w| w[0] >= w[1])
            || axis_map.last().is_some_and(|&a| a >= target_dim)
        {
            return Err(Error::InvalidRegion("axis embedding must be strictly increasing".into()));
        }
        let k = self.degree;
        let source_idx = MultiIndex::enumerate(self.dim, k);
        let scatter: Vec<usize> = source_idx
            .iter()
            .map(|mi| {
                let mapped: Vec<usize> = mi.axes().iter().map(|&a| axis_map[a]).collect();
                MultiIndex::new(mapped).expect("monotone image").rank(target_dim)
            })
            .collect();
        let total = binomial(target_dim, k);
        let comps = self.comps.clone();
        let axis_map = axis_map.to_vec();
        Ok(KForm {
            dim: target_dim,
            degree: k,
            comps: Arc::new(move |x: &[Jet]| {
                let source_point: Vec<Jet> = axis_map.iter().map(|&a| x[a].clone()).collect();
                let vals = comps(&source_point);
                let mut out = vec![Jet::Re(0.0); total];
                for (i, &r) in scatter.iter().enumerate() {
                    out[r] = vals[i].clone();
                }
                out
            }),
        })
    }

    /// Full antisymmetric evaluation against a frame of tangent vectors.
    pub fn eval_on_frame(&self, p: &[f64], vectors: &[Vec<f64>]) -> Result<f64> {
        let k = self.degree;
        if vectors.len() != k {
            return Err(Error::FrameSize { expected: k, got: vectors.len() });
        }
        for v in vectors {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
            }
        }
        let comps = self.eval(p);
        if k == 0 {
            return Ok(comps[0]);
        }
        let idx = MultiIndex::enumerate(self.dim, k);
        let mut total = 0.0;
        for (r, i) in idx.iter().enumerate() {
            if comps[r] == 0.0 {
                continue;
            }
            // k x k minor: rows are the index axes, columns the vectors.
            let mut minor = vec![0.0; k * k];
            for (row, &axis) in i.axes().iter().enumerate() {
                for (col, v) in vectors.iter().enumerate() {
                    minor[row * k + col] = v[axis];
                }
            }
            total += comps[r] * det_f64(&mut minor, k);
        }
        Ok(total)
    }
}

/// Determinant of the Jacobian minor with the given target rows and source
/// columns, by Laplace expansion (no divisions, jets may be singular).
fn jet_minor_det(partials: &[Vec<Jet>], rows: &[usize], cols: &[usize]) -> Jet {
    let k = rows.len();
    debug_assert_eq!(k, cols.len());
    match k {
        0 => Jet::Re(1.0),
        1 => partials[rows[0]][cols[0]].clone(),
        2 => {
            let a = &partials[rows[0]][cols[0]];
            let b = &partials[rows[0]][cols[1]];
            let c = &partials[rows[1]][cols[0]];
            let d = &partials[rows[1]][cols[1]];
            &(a * d) - &(b * c)
        }
        _ => {
            let mut acc = Jet::Re(0.0);
            let sub_cols = &cols[1..];
            for (p, &row) in rows.iter().enumerate() {
                let entry = &partials[row][cols[0]];
                if entry.is_zero() {
                    continue;
                }
                let sub_rows: Vec<usize> =
                    rows.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &r)| r).collect();
                let sub = jet_minor_det(partials, &sub_rows, sub_cols);
                let term = entry * &sub;
                acc = if p % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

/// In-place determinant with partial pivoting.
pub(crate) fn det_f64(a: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let mut pivot = col;
        for r in col + 1..k {
            if a[r * k + col].abs() > a[pivot * k + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * k + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
            }
            det = -det;
        }
        let d = a[col * k + col];
        det *= d;
        for r in col + 1..k {
            let f = a[r * k + col] / d;
            if f != 0.0 {
                for j in col..k {
                    a[r * k + j] -= f * a[col * k + j];
                }
            }
        }
    }
    det
}

/// Form of mixed degree: a map from degree to homogeneous part. Absent
/// degrees are zero.
#[derive(Clone)]
pub struct MixedForm {
    dim: usize,
    parts: BTreeMap<usize, KForm>,
}

impl MixedForm {
    pub fn new(dim: usize) -> MixedForm {
        MixedForm { dim, parts: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn from_parts(dim: usize, parts: Vec<KForm>) -> Result<MixedForm> {
        let mut m = MixedForm::new(dim);
        for p in parts {
            m = m.with_part(p)?;
        }
        Ok(m)
    }

    /// Add a homogeneous part, merging with any existing part of the same
    /// degree.
    pub fn with_part(mut self, part: KForm) -> Result<MixedForm> {
        if part.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: part.dim() });
        }
        let degree = part.degree();
        let merged = match self.parts.remove(&degree) {
            Some(existing) => existing.add(&part)?,
            None => part,
        };
        self.parts.insert(degree, merged);
        Ok(self)
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.parts.keys().copied().collect()
    }

    pub fn part(&self, k: usize) -> Option<&KForm> {
        self.parts.get(&k)
    }

    /// Homogeneous component of degree k (zero form if absent).
    pub fn grade(&self, k: usize) -> KForm {
        self.parts.get(&k).cloned().unwrap_or_else(|| KForm::zero(self.dim, k))
    }

    pub fn add(&self, other: &MixedForm) -> Result<MixedForm> {
        let mut out = self.clone();
        for part in other.parts.values() {
            out = out.with_part(part.clone())?;
        }
        Ok(out)
    }

    pub fn negate(&self) -> MixedForm {
        let parts = self.parts.values().map(|p| p.negate()).collect();
        MixedForm::from_parts(self.dim, parts).expect("negation preserves validity")
    }

    pub fn wedge(&self, other: &MixedForm) -> Result<MixedForm> {
        let mut out = MixedForm::new(self.dim);
        for (ka, pa) in &self.parts {
            for (kb, pb) in &other.parts {
                if ka + kb > self.dim {
                    continue; // identically zero
                }
                out = out.with_part(pa.wedge(pb)?)?;
            }
        }
        Ok(out)
    }

    /// Parity of the degrees present: `Some(0)` all even, `Some(1)` all odd,
    /// `None` for an empty form, error when mixed.
    pub fn parity(&self) -> Result<Option<usize>> {
        let mut parity = None;
        for k in self.parts.keys() {
            match parity {
                None => parity = Some(k % 2),
                Some(p) if p != k % 2 => return Err(Error::MixedParity),
                _ => {}
            }
        }
        Ok(parity)
    }

    /// Exponential of a form with parts only in degrees 0 and 2:
    /// `e^u (1 + b + b^2/2! + ...)` truncated at the chart dimension.
    pub fn exp_even(&self) -> Result<MixedForm> {
        for k in self.parts.keys() {
            if *k != 0 && *k != 2 {
                return Err(Error::ExpEvenDegree);
            }
        }
        let n = self.dim;
        let eu: ScalarFn = match self.parts.get(&0) {
            Some(u) => {
                let c = u.components_fn();
                Arc::new(move |x: &[Jet]| c(x)[0].exp())
            }
            None => Arc::new(|_x: &[Jet]| Jet::Re(1.0)),
        };
        let mut out = MixedForm::new(n)
            .with_part(KForm::scalar_field(n, eu.clone()))?;
        if let Some(beta) = self.parts.get(&2) {
            let mut power = beta.clone();
            let mut factorial = 1.0;
            let mut k = 1usize;
            loop {
                let scaled = power.scale(1.0 / factorial).scale_field(eu.clone());
                out = out.with_part(scaled)?;
                k += 1;
                if 2 * k > n {
                    break;
                }
                power = power.wedge(beta)?;
                factorial *= k as f64;
            }
        }
        Ok(out)
    }

    /// Pull back every part along a chart map.
    pub fn pullback(map: &ChartMap, form: &MixedForm, mode: DiffMode) -> Result<MixedForm> {
        let mut out = MixedForm::new(map.source_dim);
        for part in form.parts.values() {
            if part.degree() > map.source_dim {
                continue;
            }
            out = out.with_part(KForm::pullback(map, part, mode)?)?;
        }
        Ok(out)
    }

    /// Largest degree with a stored part (zero for an empty form).
    pub fn top_degree(&self) -> usize {
        self.parts.keys().next_back().copied().unwrap_or(0)
    }
}
