//! Compactly supported smoothing kernels G and checks of their moment
//! conditions: unit mass, vanishing moments of orders 1..k, and finiteness
//! of the square-integrability functionals used by the error bounds.
//!
//! Kernels of arbitrary order are built on [-1, 1] as the Epanechnikov
//! weight times a Legendre series,
//!
//! ```text
//! G(u) = 3/4 (1 - u^2) * sum_{j=0}^{k} c_j P_j(u),
//! ```
//!
//! with the coefficients c_j solved exactly over the rationals from
//! `int u^i G(u) du = [i == 0]`, i = 0..k. For k <= 1 this is the
//! Epanechnikov kernel itself.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::quadrature::GaussLegendre;

pub const MAX_BUILT_ORDER: u32 = 10;
pub const DEFAULT_MOMENT_TOL: f64 = 1e-9;
pub const DEFAULT_QUAD_NODES: usize = 32;
const QUAD_PANELS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum KernelShape {
    /// Constant height on the support.
    Uniform { height: f64 },
    /// 3/4 (1 - u^2) sum_j c_j P_j(u) on [-1, 1].
    WeightedLegendre { coeffs: Vec<f64> },
    /// sum_j c_j u^j on [A, B].
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    id: String,
    support_a: f64,
    support_b: f64,
    order_k: u32,
    shape: KernelShape,
    moment_cache: Vec<f64>,
}

impl Kernel {
    fn from_parts(id: String, support: (f64, f64), order_k: u32, shape: KernelShape) -> Self {
        assert!(support.0 < support.1, "kernel support must satisfy A < B");
        let mut g = Kernel { id, support_a: support.0, support_b: support.1, order_k, shape, moment_cache: vec![] };
        g.moment_cache = (0..=order_k as usize + 2).map(|j| kernel_moment(&g, j as u32, DEFAULT_QUAD_NODES)).collect();
        g
    }

    /// Flat kernel on [a, b]. Declared order 1 when symmetric about zero.
    pub fn uniform(a: f64, b: f64) -> Self {
        let order = u32::from(a == -b);
        Kernel::from_parts(format!("uniform[{a},{b}]"), (a, b), order, KernelShape::Uniform { height: 1.0 / (b - a) })
    }

    pub fn epanechnikov() -> Self {
        Kernel::from_parts("epanechnikov".into(), (-1.0, 1.0), 1, KernelShape::WeightedLegendre { coeffs: vec![1.0] })
    }

    /// User-supplied polynomial kernel sum_j coeffs[j] u^j on [a, b] with a
    /// declared order. The moment conditions are not enforced here; run
    /// [`verify_kernel_conditions`].
    pub fn polynomial(id: impl Into<String>, a: f64, b: f64, coeffs: Vec<f64>, order_k: u32) -> Self {
        Kernel::from_parts(id.into(), (a, b), order_k, KernelShape::Polynomial { coeffs })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_a, self.support_b)
    }

    pub fn order(&self) -> u32 {
        self.order_k
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    /// Cached m_j for j = 0..=order+2, else computed by quadrature.
    pub fn moment(&self, j: u32) -> f64 {
        self.moment_cache.get(j as usize).copied().unwrap_or_else(|| kernel_moment(self, j, DEFAULT_QUAD_NODES))
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        kernel_eval(self, u)
    }
}

/// G(u); exactly zero outside [A, B].
#[inline]
pub fn kernel_eval(g: &Kernel, u: f64) -> f64 {
    if !(u >= g.support_a && u <= g.support_b) {
        return 0.0;
    }
    match &g.shape {
        KernelShape::Uniform { height } => *height,
        KernelShape::WeightedLegendre { coeffs } => 0.75 * (1.0 - u * u) * legendre_series(coeffs, u),
        KernelShape::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c),
    }
}

fn legendre_series(coeffs: &[f64], u: f64) -> f64 {
    let mut total = coeffs[0];
    if coeffs.len() == 1 {
        return total;
    }
    let (mut p0, mut p1) = (1.0, u);
    total += coeffs[1] * p1;
    for (n, c) in coeffs.iter().enumerate().skip(2) {
        let nf = n as f64;
        let p2 = ((2.0 * nf - 1.0) * u * p1 - (nf - 1.0) * p0) / nf;
        total += c * p2;
        p0 = p1;
        p1 = p2;
    }
    total
}

/// m_j = int_A^B u^j G(u) du by composite Gauss-Legendre with `n_quad`
/// nodes per panel.
pub fn kernel_moment(g: &Kernel, j: u32, n_quad: usize) -> f64 {
    integrate_on_support(g, n_quad, |u, gu| u.powi(j as i32) * gu)
}

fn integrate_on_support(g: &Kernel, n_quad: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(n_quad.max(1));
    rule.integrate(|u| f(u, kernel_eval(g, u)), g.support_a, g.support_b, QUAD_PANELS)
}

/// Legendre polynomial coefficients in the monomial basis.
fn legendre_monomials(max_degree: usize) -> Vec<Vec<BigRational>> {
    let int = |v: i64| BigRational::from_integer(BigInt::from(v));
    let mut polys: Vec<Vec<BigRational>> = vec![vec![int(1)]];
    if max_degree >= 1 {
        polys.push(vec![int(0), int(1)]);
    }
    for n in 1..max_degree {
        let mut next = vec![BigRational::zero(); n + 2];
        for (m, c) in polys[n].iter().enumerate() {
            next[m + 1] += c * int(2 * n as i64 + 1);
        }
        for (m, c) in polys[n - 1].iter().enumerate() {
            next[m] -= c * int(n as i64);
        }
        let denom = int(n as i64 + 1);
        polys.push(next.into_iter().map(|c| c / &denom).collect());
    }
    polys
}

/// int_{-1}^{1} u^n 3/4 (1 - u^2) du.
fn epanechnikov_weight_moment(n: usize) -> BigRational {
    if n % 2 == 1 {
        return BigRational::zero();
    }
    let r = |p: i64, q: i64| BigRational::new(BigInt::from(p), BigInt::from(q));
    r(3, 4) * (r(2, n as i64 + 1) - r(2, n as i64 + 3))
}

#[allow(clippy::needless_range_loop)]
fn solve_rational(mut a: Vec<Vec<BigRational>>, mut rhs: Vec<BigRational>) -> Vec<BigRational> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).expect("moment system is nonsingular");
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for c in col..n {
            a[col][c] = &a[col][c] * &inv;
        }
        rhs[col] = &rhs[col] * &inv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &factor * &rhs[col];
            rhs[r] -= delta;
        }
    }
    rhs
}

/// Kernel on [-1, 1] with unit mass and vanishing moments 1..=k.
pub fn build_order_k_kernel(k: u32) -> Kernel {
    assert!(k <= MAX_BUILT_ORDER, "built kernels are available for k <= {MAX_BUILT_ORDER}");
    let dim = k as usize + 1;
    let legendre = legendre_monomials(k as usize);
    let system: Vec<Vec<BigRational>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    legendre[j]
                        .iter()
                        .enumerate()
                        .fold(BigRational::zero(), |acc, (m, c)| acc + c * epanechnikov_weight_moment(i + m))
                })
                .collect()
        })
        .collect();
    let mut rhs = vec![BigRational::zero(); dim];
    rhs[0] = BigRational::one();
    let exact = solve_rational(system, rhs);
    let mut coeffs: Vec<f64> = exact.iter().map(|c| c.to_f64().expect("representable coefficient")).collect();
    while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    let id = if coeffs.len() == 1 { "epanechnikov".to_string() } else { format!("order{k}") };
    Kernel::from_parts(id, (-1.0, 1.0), k, KernelShape::WeightedLegendre { coeffs })
}

/// What a condition requires of its measured value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Requirement {
    Equals(f64),
    Finite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelCheck {
    /// Moment index as a string ("0", "1", ...) or a named functional.
    pub label: String,
    pub measured: f64,
    pub required: Requirement,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelReport {
    pub kernel_id: String,
    pub order_k: u32,
    pub tol: f64,
    pub checks: Vec<KernelCheck>,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, label: &str) -> Option<&KernelCheck> {
        self.checks.iter().find(|c| c.label == label)
    }

    /// CSV with header `j,moment,required,pass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,moment,required,pass\n");
        for c in &self.checks {
            let required = match c.required {
                Requirement::Equals(v) => crate::output::fmt_real(v),
                Requirement::Finite => "finite".into(),
            };
            let _ = writeln!(out, "{},{},{},{}", c.label, crate::output::fmt_real(c.measured), required, c.pass);
        }
        out
    }
}

/// Checks unit mass, m_j = 0 for j = 1..=k, finiteness of int G^2,
/// int |G| |u|^{k+1} and int u^{2(k+1)} G^2, and exact vanishing outside
/// the support. Measured values are reported for each row.
pub fn verify_kernel_conditions(g: &Kernel, k: u32, tol: f64) -> KernelReport {
    let n_quad = 2 * DEFAULT_QUAD_NODES;
    let mut checks = Vec::new();
    for j in 0..=k {
        let m = kernel_moment(g, j, n_quad);
        let target = if j == 0 { 1.0 } else { 0.0 };
        checks.push(KernelCheck {
            label: j.to_string(),
            measured: m,
            required: Requirement::Equals(target),
            pass: (m - target).abs() <= tol,
        });
    }
    let p = (k + 1) as i32;
    let finite = [
        ("int_g2", integrate_on_support(g, n_quad, |_, gu| gu * gu)),
        ("int_abs_g_u_k1", integrate_on_support(g, n_quad, |u, gu| gu.abs() * u.abs().powi(p))),
        ("int_u_2k2_g2", integrate_on_support(g, n_quad, |u, gu| u.powi(2 * p) * gu * gu)),
    ];
    for (label, v) in finite {
        checks.push(KernelCheck {
            label: label.into(),
            measured: v,
            required: Requirement::Finite,
            pass: v.is_finite(),
        });
    }
    let (a, b) = g.support();
    let width = b - a;
    let outside = [a - 1e-12 * width.max(1.0), a - 0.5 * width, b + 1e-12 * width.max(1.0), b + 0.5 * width];
    let leak = outside.iter().map(|&u| kernel_eval(g, u).abs()).fold(0.0, f64::max);
    checks.push(KernelCheck {
        label: "outside_support".into(),
        measured: leak,
        required: Requirement::Equals(0.0),
        pass: leak == 0.0,
    });
    KernelReport { kernel_id: g.id.clone(), order_k: k, tol, checks }
}
