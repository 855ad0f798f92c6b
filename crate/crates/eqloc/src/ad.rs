//! Forward-mode automatic differentiation.
//!
//! Every coefficient function, metric, vector field and chart map in this
//! crate is a closure over [`Jet`] values. A jet is a truncated Taylor value:
//! a plain real, a first-order dual, or a nested tower carrying one more
//! derivative layer over an arbitrary inner jet. Because closures compose on
//! jets, the chain rule flows through arbitrary call chains (pullbacks of
//! derivatives of products of ...) without any symbolic bookkeeping, and
//! second derivatives come from stacking one tower layer on top of whatever
//! the caller passed in.
//!
//! Duals come in two widths: a stack variant with [`E1_VARS`] slots covering
//! every base-chart dimension, and a boxed variant with [`MAX_VARS`] slots
//! for doubled charts. Keeping the enum at 48 bytes matters: jets are moved
//! by value through deep evaluation trees on every quadrature node.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

/// Stack dual width; covers charts up to dimension four.
pub const E1_VARS: usize = 4;

/// Largest seedable variable count (cotangent charts of 4-dimensional
/// models).
pub const MAX_VARS: usize = 8;

/// A scalar-valued function of chart coordinates.
pub type ScalarFn = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;

/// A vector-valued function of chart coordinates (components, metric
/// entries, a chart map, ...).
pub type VecFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

/// How derivatives are extracted from coefficient closures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DiffMode {
    /// Dual-number forward differentiation (exact to roundoff).
    Forward,
    /// Central finite differences with step `step * (1 + |x_j|)` per axis,
    /// for coefficient functions treated as opaque.
    FiniteDifference { step: f64 },
}

impl Default for DiffMode {
    fn default() -> Self {
        DiffMode::Forward
    }
}

/// Default finite-difference base step.
pub const FD_DEFAULT_STEP: f64 = 1e-6;

#[derive(Clone, Debug)]
pub enum Jet {
    /// Plain value, no derivative content.
    Re(f64),
    /// First-order dual over `f64`, narrow stack buffer.
    E1 { val: f64, grad: [f64; E1_VARS] },
    /// First-order dual over `f64`, wide boxed buffer.
    E1w { val: f64, grad: Box<[f64; MAX_VARS]> },
    /// One derivative layer over an arbitrary inner jet.
    Tower { val: Box<Jet>, grad: Vec<Jet> },
}

impl Jet {
    #[inline]
    pub fn constant(x: f64) -> Jet {
        Jet::Re(x)
    }

    pub fn zero() -> Jet {
        Jet::Re(0.0)
    }

    pub fn one() -> Jet {
        Jet::Re(1.0)
    }

    /// First-order seed: value `x` with unit derivative in slot `slot`.
    pub fn variable(x: f64, slot: usize) -> Jet {
        assert!(slot < MAX_VARS, "variable slot {slot} exceeds MAX_VARS");
        if slot < E1_VARS {
            let mut grad = [0.0; E1_VARS];
            grad[slot] = 1.0;
            Jet::E1 { val: x, grad }
        } else {
            let mut grad = Box::new([0.0; MAX_VARS]);
            grad[slot] = 1.0;
            Jet::E1w { val: x, grad }
        }
    }

    /// The underlying real value.
    pub fn value(&self) -> f64 {
        match self {
            Jet::Re(x) => *x,
            Jet::E1 { val, .. } | Jet::E1w { val, .. } => *val,
            Jet::Tower { val, .. } => val.value(),
        }
    }

    /// The jet one derivative layer down (the "value part").
    pub fn lower(&self) -> Jet {
        match self {
            Jet::Re(x) => Jet::Re(*x),
            Jet::E1 { val, .. } | Jet::E1w { val, .. } => Jet::Re(*val),
            Jet::Tower { val, .. } => (**val).clone(),
        }
    }

    /// Partial derivative in slot `j` of the outermost layer, expressed one
    /// layer down. Constants have zero derivative.
    pub fn partial(&self, j: usize) -> Jet {
        match self {
            Jet::Re(_) => Jet::Re(0.0),
            Jet::E1 { grad, .. } => Jet::Re(if j < E1_VARS { grad[j] } else { 0.0 }),
            Jet::E1w { grad, .. } => Jet::Re(if j < MAX_VARS { grad[j] } else { 0.0 }),
            Jet::Tower { grad, .. } => grad.get(j).cloned().unwrap_or(Jet::Re(0.0)),
        }
    }

    /// True when the jet is identically zero including all derivative
    /// content.
    pub fn is_zero(&self) -> bool {
        match self {
            Jet::Re(x) => *x == 0.0,
            Jet::E1 { val, grad } => *val == 0.0 && grad.iter().all(|g| *g == 0.0),
            Jet::E1w { val, grad } => *val == 0.0 && grad.iter().all(|g| *g == 0.0),
            Jet::Tower { val, grad } => val.is_zero() && grad.iter().all(|g| g.is_zero()),
        }
    }

    fn widen(&self) -> Jet {
        match self {
            Jet::E1 { val, grad } => {
                let mut g = Box::new([0.0; MAX_VARS]);
                g[..E1_VARS].copy_from_slice(grad);
                Jet::E1w { val: *val, grad: g }
            }
            other => other.clone(),
        }
    }

    fn as_tower(&self, width: usize) -> (Jet, Vec<Jet>) {
        match self {
            Jet::Tower { val, grad } => {
                let mut g = grad.clone();
                g.resize(width.max(g.len()), Jet::Re(0.0));
                ((**val).clone(), g)
            }
            other => (other.clone(), vec![Jet::Re(0.0); width]),
        }
    }

    fn tower_width(&self) -> usize {
        match self {
            Jet::Tower { grad, .. } => grad.len(),
            _ => 0,
        }
    }

    /// Unary chain rule: value map plus derivative factor.
    fn unary(&self, f: impl Fn(f64) -> f64, dfactor: impl Fn(f64) -> f64) -> Jet {
        match self {
            Jet::Re(x) => Jet::Re(f(*x)),
            Jet::E1 { val, grad } => {
                let d = dfactor(*val);
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = d * grad[i];
                }
                Jet::E1 { val: f(*val), grad: g }
            }
            Jet::E1w { val, grad } => {
                let d = dfactor(*val);
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = d * grad[i];
                }
                Jet::E1w { val: f(*val), grad: g }
            }
            Jet::Tower { .. } => unreachable!("tower unary handled by the caller"),
        }
    }

    pub fn exp(&self) -> Jet {
        if let Jet::Tower { val, grad } = self {
            let e = val.exp();
            let g = grad.iter().map(|gi| &e * gi).collect();
            return Jet::Tower { val: Box::new(e), grad: g };
        }
        self.unary(f64::exp, f64::exp)
    }

    pub fn ln(&self) -> Jet {
        if let Jet::Tower { val, grad } = self {
            let inner = (**val).clone();
            let g = grad.iter().map(|gi| gi / &inner).collect();
            return Jet::Tower { val: Box::new(val.ln()), grad: g };
        }
        self.unary(f64::ln, |x| 1.0 / x)
    }

    pub fn sin(&self) -> Jet {
        if let Jet::Tower { val, grad } = self {
            let c = val.cos();
            let g = grad.iter().map(|gi| &c * gi).collect();
            return Jet::Tower { val: Box::new(val.sin()), grad: g };
        }
        self.unary(f64::sin, f64::cos)
    }

    pub fn cos(&self) -> Jet {
        if let Jet::Tower { val, grad } = self {
            let ms = -&val.sin();
            let g = grad.iter().map(|gi| &ms * gi).collect();
            return Jet::Tower { val: Box::new(val.cos()), grad: g };
        }
        self.unary(f64::cos, |x| -x.sin())
    }

    pub fn sqrt(&self) -> Jet {
        if let Jet::Tower { val, grad } = self {
            let s = val.sqrt();
            let factor = &Jet::Re(0.5) / &s;
            let g = grad.iter().map(|gi| &factor * gi).collect();
            return Jet::Tower { val: Box::new(s), grad: g };
        }
        self.unary(f64::sqrt, |x| 0.5 / x.sqrt())
    }

    /// Integer power by repeated multiplication (exact chain rule).
    pub fn powi(&self, k: i32) -> Jet {
        if k == 0 {
            return Jet::Re(1.0);
        }
        if k < 0 {
            return &Jet::Re(1.0) / &self.powi(-k);
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn atan2(&self, x: &Jet) -> Jet {
        let y = self;
        match (y, x) {
            (Jet::Re(yv), Jet::Re(xv)) => Jet::Re(yv.atan2(*xv)),
            (Jet::Tower { .. }, _) | (_, Jet::Tower { .. }) => {
                let width = y.tower_width().max(x.tower_width());
                let (yv, yg) = y.as_tower(width);
                let (xv, xg) = x.as_tower(width);
                let denom = &(&yv * &yv) + &(&xv * &xv);
                let inner = yv.atan2(&xv);
                let grad = (0..width)
                    .map(|i| &(&(&xv * &yg[i]) - &(&yv * &xg[i])) / &denom)
                    .collect();
                Jet::Tower { val: Box::new(inner), grad }
            }
            _ => {
                // first-order pair: dz = (x dy - y dx) / (x^2 + y^2)
                let yv = y.value();
                let xv = x.value();
                let denom = xv * xv + yv * yv;
                let combine_narrow = |yg: &[f64; E1_VARS], xg: &[f64; E1_VARS]| -> Jet {
                    let mut g = [0.0; E1_VARS];
                    for i in 0..E1_VARS {
                        g[i] = (xv * yg[i] - yv * xg[i]) / denom;
                    }
                    Jet::E1 { val: yv.atan2(xv), grad: g }
                };
                match (y.widen_if_mixed(x), x.widen_if_mixed(y)) {
                    (Jet::E1 { grad: yg, .. }, Jet::E1 { grad: xg, .. }) => combine_narrow(&yg, &xg),
                    (Jet::E1 { grad: yg, .. }, Jet::Re(_)) => combine_narrow(&yg, &[0.0; E1_VARS]),
                    (Jet::Re(_), Jet::E1 { grad: xg, .. }) => combine_narrow(&[0.0; E1_VARS], &xg),
                    (a, b) => {
                        let zero = Box::new([0.0; MAX_VARS]);
                        let yg = match &a {
                            Jet::E1w { grad, .. } => grad.clone(),
                            _ => zero.clone(),
                        };
                        let xg = match &b {
                            Jet::E1w { grad, .. } => grad.clone(),
                            _ => zero,
                        };
                        let mut g = Box::new([0.0; MAX_VARS]);
                        for i in 0..MAX_VARS {
                            g[i] = (xv * yg[i] - yv * xg[i]) / denom;
                        }
                        Jet::E1w { val: yv.atan2(xv), grad: g }
                    }
                }
            }
        }
    }

    /// Widen a narrow dual when the partner is wide, so binary ops see
    /// matching widths.
    fn widen_if_mixed(&self, other: &Jet) -> Jet {
        if matches!(self, Jet::E1 { .. }) && matches!(other, Jet::E1w { .. }) {
            self.widen()
        } else {
            self.clone()
        }
    }
}


impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        use Jet::*;
        match (self, rhs) {
            (Re(a), Re(b)) => Re(a + b),
            (Re(a), E1 { val, grad }) | (E1 { val, grad }, Re(a)) => E1 { val: a + val, grad: *grad },
            (E1 { val: a, grad: ga }, E1 { val: b, grad: gb }) => {
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = ga[i] + gb[i];
                }
                E1 { val: a + b, grad: g }
            }
            (Re(a), E1w { val, grad }) | (E1w { val, grad }, Re(a)) => {
                E1w { val: a + val, grad: grad.clone() }
            }
            (E1w { val: a, grad: ga }, E1w { val: b, grad: gb }) => {
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = ga[i] + gb[i];
                }
                E1w { val: a + b, grad: g }
            }
            (a @ E1 { .. }, b @ E1w { .. }) => &a.widen() + b,
            (a @ E1w { .. }, b @ E1 { .. }) => a + &b.widen(),
            (a, b) => {
                let width = a.tower_width().max(b.tower_width());
                let (av, ag) = a.as_tower(width);
                let (bv, bg) = b.as_tower(width);
                let grad = ag.iter().zip(bg.iter()).map(|(x, y)| x + y).collect();
                Tower { val: Box::new(&av + &bv), grad }
            }
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        use Jet::*;
        match (self, rhs) {
            (Re(a), Re(b)) => Re(a - b),
            (E1 { val, grad }, Re(b)) => E1 { val: val - b, grad: *grad },
            (Re(a), E1 { val, grad }) => {
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = -grad[i];
                }
                E1 { val: a - val, grad: g }
            }
            (E1 { val: a, grad: ga }, E1 { val: b, grad: gb }) => {
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = ga[i] - gb[i];
                }
                E1 { val: a - b, grad: g }
            }
            (E1w { val, grad }, Re(b)) => E1w { val: val - b, grad: grad.clone() },
            (Re(a), E1w { val, grad }) => {
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = -grad[i];
                }
                E1w { val: a - val, grad: g }
            }
            (E1w { val: a, grad: ga }, E1w { val: b, grad: gb }) => {
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = ga[i] - gb[i];
                }
                E1w { val: a - b, grad: g }
            }
            (a @ E1 { .. }, b @ E1w { .. }) => &a.widen() - b,
            (a @ E1w { .. }, b @ E1 { .. }) => a - &b.widen(),
            (a, b) => {
                let width = a.tower_width().max(b.tower_width());
                let (av, ag) = a.as_tower(width);
                let (bv, bg) = b.as_tower(width);
                let grad = ag.iter().zip(bg.iter()).map(|(x, y)| x - y).collect();
                Tower { val: Box::new(&av - &bv), grad }
            }
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        use Jet::*;
        match (self, rhs) {
            (Re(a), Re(b)) => Re(a * b),
            (Re(a), E1 { val, grad }) | (E1 { val, grad }, Re(a)) => {
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = a * grad[i];
                }
                E1 { val: a * val, grad: g }
            }
            (E1 { val: a, grad: ga }, E1 { val: b, grad: gb }) => {
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = a * gb[i] + b * ga[i];
                }
                E1 { val: a * b, grad: g }
            }
            (Re(a), E1w { val, grad }) | (E1w { val, grad }, Re(a)) => {
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = a * grad[i];
                }
                E1w { val: a * val, grad: g }
            }
            (E1w { val: a, grad: ga }, E1w { val: b, grad: gb }) => {
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = a * gb[i] + b * ga[i];
                }
                E1w { val: a * b, grad: g }
            }
            (a @ E1 { .. }, b @ E1w { .. }) => &a.widen() * b,
            (a @ E1w { .. }, b @ E1 { .. }) => a * &b.widen(),
            (a, b) => {
                let width = a.tower_width().max(b.tower_width());
                let (av, ag) = a.as_tower(width);
                let (bv, bg) = b.as_tower(width);
                let grad = ag
                    .iter()
                    .zip(bg.iter())
                    .map(|(x, y)| &(&av * y) + &(&bv * x))
                    .collect();
                Tower { val: Box::new(&av * &bv), grad }
            }
        }
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        use Jet::*;
        match (self, rhs) {
            (Re(a), Re(b)) => Re(a / b),
            (E1 { val, grad }, Re(b)) => {
                let inv = 1.0 / b;
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = grad[i] * inv;
                }
                E1 { val: val * inv, grad: g }
            }
            (Re(a), E1 { val, grad }) => {
                let inv = 1.0 / val;
                let factor = -a * inv * inv;
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = factor * grad[i];
                }
                E1 { val: a * inv, grad: g }
            }
            (E1 { val: a, grad: ga }, E1 { val: b, grad: gb }) => {
                let inv = 1.0 / b;
                let q = a * inv;
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = (ga[i] - q * gb[i]) * inv;
                }
                E1 { val: q, grad: g }
            }
            (E1w { val, grad }, Re(b)) => {
                let inv = 1.0 / b;
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = grad[i] * inv;
                }
                E1w { val: val * inv, grad: g }
            }
            (Re(a), E1w { val, grad }) => {
                let inv = 1.0 / val;
                let factor = -a * inv * inv;
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = factor * grad[i];
                }
                E1w { val: a * inv, grad: g }
            }
            (E1w { val: a, grad: ga }, E1w { val: b, grad: gb }) => {
                let inv = 1.0 / b;
                let q = a * inv;
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = (ga[i] - q * gb[i]) * inv;
                }
                E1w { val: q, grad: g }
            }
            (a @ E1 { .. }, b @ E1w { .. }) => &a.widen() / b,
            (a @ E1w { .. }, b @ E1 { .. }) => a / &b.widen(),
            (a, b) => {
                let width = a.tower_width().max(b.tower_width());
                let (av, ag) = a.as_tower(width);
                let (bv, bg) = b.as_tower(width);
                let q = &av / &bv;
                let grad = ag
                    .iter()
                    .zip(bg.iter())
                    .map(|(x, y)| &(x - &(&q * y)) / &bv)
                    .collect();
                Tower { val: Box::new(q), grad }
            }
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        match self {
            Jet::Re(a) => Jet::Re(-a),
            Jet::E1 { val, grad } => {
                let mut g = [0.0; E1_VARS];
                for i in 0..E1_VARS {
                    g[i] = -grad[i];
                }
                Jet::E1 { val: -val, grad: g }
            }
            Jet::E1w { val, grad } => {
                let mut g = Box::new([0.0; MAX_VARS]);
                for i in 0..MAX_VARS {
                    g[i] = -grad[i];
                }
                Jet::E1w { val: -val, grad: g }
            }
            Jet::Tower { val, grad } => Jet::Tower {
                val: Box::new(-&**val),
                grad: grad.iter().map(|g| -g).collect(),
            },
        }
    }
}

macro_rules! owned_ops {
    ($($trait:ident :: $m:ident),*) => {$(
        impl $trait for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { $trait::$m(&self, &rhs) }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet { $trait::$m(&self, rhs) }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet { $trait::$m(self, &rhs) }
        }
    )*};
}
owned_ops!(Add::add, Sub::sub, Mul::mul, Div::div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

/// Wrap plain coordinates as constant jets.
pub fn constants(x: &[f64]) -> Vec<Jet> {
    x.iter().map(|&v| Jet::Re(v)).collect()
}

/// Seed one derivative layer on top of the given inputs: slot `i` gets the
/// unit derivative for input `i`. Plain inputs get the cheap first-order
/// representation (narrow when it fits); anything already carrying
/// derivatives gets a tower layer so that nested differentiation composes.
pub fn lift(xs: &[Jet]) -> Vec<Jet> {
    let n = xs.len();
    let all_plain = n <= MAX_VARS && xs.iter().all(|x| matches!(x, Jet::Re(_)));
    if all_plain {
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                if n <= E1_VARS {
                    let mut grad = [0.0; E1_VARS];
                    grad[i] = 1.0;
                    Jet::E1 { val: x.value(), grad }
                } else {
                    Jet::variable(x.value(), i)
                }
            })
            .collect()
    } else {
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                let grad = (0..n)
                    .map(|j| Jet::Re(if i == j { 1.0 } else { 0.0 }))
                    .collect();
                Jet::Tower { val: Box::new(x.clone()), grad }
            })
            .collect()
    }
}

/// Values and first partials of a vector-valued closure at jet inputs.
/// Output jets live at the same layer as the inputs, so nested calls keep
/// the chain rule intact.
pub struct DerivEval {
    /// `values[i]` = F_i(x)
    pub values: Vec<Jet>,
    /// `partials[i][j]` = dF_i/dx_j
    pub partials: Vec<Vec<Jet>>,
}

pub fn derivatives_of(f: &dyn Fn(&[Jet]) -> Vec<Jet>, x: &[Jet], mode: DiffMode) -> DerivEval {
    match mode {
        DiffMode::Forward => {
            let lifted = lift(x);
            let ys = f(&lifted);
            let values = ys.iter().map(|y| y.lower()).collect();
            let partials = ys
                .iter()
                .map(|y| (0..x.len()).map(|j| y.partial(j)).collect())
                .collect();
            DerivEval { values, partials }
        }
        DiffMode::FiniteDifference { step } => {
            let values = f(x);
            let m = values.len();
            let mut partials = vec![Vec::with_capacity(x.len()); m];
            for j in 0..x.len() {
                let h = step * (1.0 + x[j].value().abs());
                let mut xp = x.to_vec();
                xp[j] = &xp[j] + &Jet::Re(h);
                let mut xm = x.to_vec();
                xm[j] = &xm[j] - &Jet::Re(h);
                let yp = f(&xp);
                let ym = f(&xm);
                let scale = Jet::Re(0.5 / h);
                for i in 0..m {
                    partials[i].push(&(&yp[i] - &ym[i]) * &scale);
                }
            }
            DerivEval { values, partials }
        }
    }
}

/// Values and Jacobian of a map at a plain point.
pub fn jacobian(f: &dyn Fn(&[Jet]) -> Vec<Jet>, x: &[f64], mode: DiffMode) -> (Vec<f64>, Vec<Vec<f64>>) {
    let xs = constants(x);
    let d = derivatives_of(f, &xs, mode);
    let values = d.values.iter().map(|v| v.value()).collect();
    let jac = d
        .partials
        .iter()
        .map(|row| row.iter().map(|p| p.value()).collect())
        .collect();
    (values, jac)
}

/// Value and gradient of a scalar closure at a plain point.
pub fn gradient(f: &dyn Fn(&[Jet]) -> Jet, x: &[f64], mode: DiffMode) -> (f64, Vec<f64>) {
    let wrapped = |xs: &[Jet]| vec![f(xs)];
    let (vals, jac) = jacobian(&wrapped, x, mode);
    (vals[0], jac.into_iter().next().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(x: &[Jet]) -> Jet {
        // x^3 y^2
        &x[0].powi(3) * &x[1].powi(2)
    }

    #[test]
    fn jet_stays_small() {
        assert!(std::mem::size_of::<Jet>() <= 48, "{}", std::mem::size_of::<Jet>());
    }

    #[test]
    fn first_order_partials() {
        let f = |xs: &[Jet]| vec![poly(xs)];
        let (v, jac) = jacobian(&f, &[2.0, 3.0], DiffMode::Forward);
        assert_eq!(v[0], 72.0);
        assert_eq!(jac[0][0], 108.0); // 3 x^2 y^2
        assert_eq!(jac[0][1], 48.0); // 2 x^3 y
    }

    #[test]
    fn wide_seeding_beyond_narrow_slots() {
        // product over six variables: d/dx_i = product of the others
        let f = |xs: &[Jet]| {
            let mut acc = Jet::Re(1.0);
            for x in xs {
                acc = &acc * x;
            }
            vec![acc]
        };
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (v, jac) = jacobian(&f, &x, DiffMode::Forward);
        assert_eq!(v[0], 720.0);
        for i in 0..6 {
            assert_eq!(jac[0][i], 720.0 / x[i], "slot {i}");
        }
    }

    #[test]
    fn mixed_width_promotion() {
        // narrow dual from an inner helper meets a wide-seeded input
        let narrow = Jet::variable(2.0, 1); // narrow slot
        let wide = Jet::variable(3.0, 6); // wide slot
        let prod = &narrow * &wide;
        assert_eq!(prod.value(), 6.0);
        assert_eq!(prod.partial(1).value(), 3.0);
        assert_eq!(prod.partial(6).value(), 2.0);
    }

    #[test]
    fn transcendental_chain() {
        let f = |xs: &[Jet]| vec![(&xs[0].sin() * &xs[1].exp()).sqrt()];
        let x = 0.7;
        let y = 0.3;
        let (v, jac) = jacobian(&f, &[x, y], DiffMode::Forward);
        let exact = (x.sin() * y.exp()).sqrt();
        assert!((v[0] - exact).abs() < 1e-14);
        let dx = 0.5 * x.cos() * y.exp() / exact;
        let dy = 0.5 * exact;
        assert!((jac[0][0] - dx).abs() < 1e-13);
        assert!((jac[0][1] - dy).abs() < 1e-13);
    }

    #[test]
    fn second_order_through_nesting() {
        // d/dx of (df/dy) for f = x^3 y^2 is 6 x^2 y.
        let df_dy = |xs: &[Jet]| {
            let lifted = lift(xs);
            vec![poly(&lifted).partial(1)]
        };
        let (v, jac) = jacobian(&df_dy, &[2.0, 3.0], DiffMode::Forward);
        assert_eq!(v[0], 48.0);
        assert!((jac[0][0] - 72.0).abs() < 1e-12); // 6 x^2 y = 72
        assert!((jac[0][1] - 16.0).abs() < 1e-12); // 2 x^3 = 16
    }

    #[test]
    fn third_order_tower() {
        // f = x^4, third derivative 24 x at x = 1.5 -> 36.
        let f = |xs: &[Jet]| xs[0].powi(4);
        let d1 = move |xs: &[Jet]| f(&lift(xs)).partial(0);
        let d2 = move |xs: &[Jet]| d1(&lift(xs)).partial(0);
        let d3 = move |xs: &[Jet]| d2(&lift(xs)).partial(0);
        let v = d3(&constants(&[1.5]));
        assert!((v.value() - 36.0).abs() < 1e-10);
    }

    #[test]
    fn finite_difference_close_to_exact() {
        let f = |xs: &[Jet]| vec![&xs[0].sin() * &xs[1].cos()];
        let (_, exact) = jacobian(&f, &[0.4, 1.1], DiffMode::Forward);
        let (_, fd) = jacobian(&f, &[0.4, 1.1], DiffMode::FiniteDifference { step: 1e-6 });
        for j in 0..2 {
            assert!((exact[0][j] - fd[0][j]).abs() < 1e-9);
        }
    }

    #[test]
    fn division_and_atan2() {
        let f = |xs: &[Jet]| vec![&xs[1] / &xs[0], xs[1].atan2(&xs[0])];
        let (v, jac) = jacobian(&f, &[2.0, 1.0], DiffMode::Forward);
        assert!((v[0] - 0.5).abs() < 1e-15);
        assert!((v[1] - 0.5f64.atan()).abs() < 1e-15);
        // d(y/x)/dx = -y/x^2, d(y/x)/dy = 1/x
        assert!((jac[0][0] + 0.25).abs() < 1e-14);
        assert!((jac[0][1] - 0.5).abs() < 1e-14);
        // datan2/dx = -y/(x^2+y^2), /dy = x/(x^2+y^2)
        assert!((jac[1][0] + 0.2).abs() < 1e-14);
        assert!((jac[1][1] - 0.4).abs() < 1e-14);
    }

    #[test]
    fn mixed_constant_and_seeded() {
        // g(x) = x * c with c entering as a plain constant jet.
        let c = Jet::Re(3.0);
        let f = move |xs: &[Jet]| vec![&xs[0] * &c];
        let (v, jac) = jacobian(&f, &[2.0], DiffMode::Forward);
        assert_eq!(v[0], 6.0);
        assert_eq!(jac[0][0], 3.0);
    }
}
