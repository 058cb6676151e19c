//! Desingularization of b^m-symplectic forms: explicit profiles `f`, the
//! piecewise forms `ω_ε`, fold detection and `C^{2k-1}` convergence tables.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_traits::{One, Zero};

use crate::chart::{ChartModel, SampleGrid};
use crate::error::{Error, Result};
use crate::expr::{parse_rational, rat_to_f64, Expr, Rational};
use crate::forms::numeric::{bivector_of, nondegeneracy_of, pfaffian, CompiledForm, FormField, PFAFFIAN_THRESHOLD};
use crate::forms::{Frame, SingularForm, VectorFieldExpr};
use crate::laurent::{decompose_2form, LaurentDecomposition, DEFAULT_ORDER};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    /// `m = 2k`
    Even,
    /// `m = 2k + 1`
    Odd,
}

/// Polynomial `Σ c_i x^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<Rational>);

impl Poly {
    fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + rat_to_f64(c))
    }

    fn deriv(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(i, c)| c * Rational::from_integer((i as i64).into())).collect())
    }

    fn nth_deriv(&self, d: usize) -> Poly {
        (0..d).fold(self.clone(), |p, _| p.deriv())
    }

    fn eval_exact(&self, x: &Rational) -> Rational {
        self.0.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|c| !c.is_zero()).unwrap_or(0)
    }
}

/// Explicit profile `f` and its scaled family `f_ε(x) = ε^{-s} f(x/ε)` with
/// `s = 2k - 1` (even) or `s = 2k` (odd).
#[derive(Clone, Debug)]
pub struct DesingProfile {
    pub parity: Parity,
    pub k: u32,
    pub epsilon: Rational,
    eps: f64,
    /// `f` on `[-1, 1]`.
    inner: Poly,
    /// Odd parity: `f` on `[1, 2]`.
    bridge: Option<Poly>,
}

fn int(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// d-th derivative of `c x^{-n}` at `x`.
fn power_deriv(c: f64, n: i64, d: usize, x: f64) -> f64 {
    let falling: f64 = (0..d as i64).map(|i| (-n - i) as f64).product();
    c * falling * x.powi((-n - d as i64) as i32)
}

fn power_deriv_exact(c: &Rational, n: i64, d: usize, x: &Rational) -> Rational {
    let falling: Rational = (0..d as i64).map(|i| int(-n - i)).product();
    let p = -n - d as i64;
    let xp = if p >= 0 { x.pow(p as i32) } else { x.recip().pow((-p) as i32) };
    c * falling * xp
}

/// Exact solution of a square rational system.
fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let v = &f * &a[col][c];
                    a[r][c] -= v;
                }
                let v = &f * &b[col];
                b[r] -= v;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Polynomials in `u` as coefficient vectors.
fn poly_mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn binomial(n: i64, k: i64) -> Rational {
    (0..k).fold(Rational::one(), |acc, i| acc * int(n - i) / int(i + 1))
}

/// Even-parity core: `f' = g(x²)` with
/// `g(u) = u^N Σ_{d≤2k} C(k+N+d-1, d)(1-u)^d + λ(1-u)^{2k+1}`, which matches
/// `x^{-2k}` to order `2k` at `x = ±1`; `λ` fixes `f(1)` and `N` is the
/// smallest weight for which `f' > 0` on a 1e-3 grid.
fn even_core(k: u32) -> Result<Poly> {
    let k = k as i64;
    let d_max = 2 * k;
    let target = int(2) - Rational::new(1.into(), (2 * k - 1).into());
    let one_minus_u = vec![int(1), int(-1)];
    let pow = |base: &Vec<Rational>, e: i64| (0..e).fold(vec![int(1)], |acc, _| poly_mul(&acc, base));
    // ∫_0^1 x^{2j} dx = 1/(2j+1)
    let integral = |g: &[Rational]| -> Rational {
        g.iter().enumerate().map(|(j, c)| c / int(2 * j as i64 + 1)).sum()
    };
    for weight in 0..64 {
        let mut taylor = vec![Rational::zero()];
        for d in 0..=d_max {
            let term: Vec<Rational> = pow(&one_minus_u, d).into_iter().map(|c| c * binomial(k + weight + d - 1, d)).collect();
            taylor = add_poly(&taylor, &term);
        }
        let mut g = poly_mul(&pow(&vec![int(0), int(1)], weight), &taylor);
        let bump = pow(&one_minus_u, d_max + 1);
        let lambda = (&target - integral(&g)) / integral(&bump);
        g = add_poly(&g, &bump.into_iter().map(|c| c * &lambda).collect::<Vec<_>>());
        let gx = |x: f64| g.iter().rev().fold(0.0, |acc, c| acc * x * x + rat_to_f64(c));
        if (0..=1000).all(|i| gx(i as f64 * 1e-3) > 0.0) {
            // f(x) = ∫_0^x g(s²) ds
            let mut f = vec![Rational::zero(); 2 * g.len() + 1];
            for (j, c) in g.iter().enumerate() {
                f[2 * j + 1] = c / int(2 * j as i64 + 1);
            }
            return Ok(Poly(f));
        }
    }
    Err(Error::InvalidInput(format!("no monotone profile found for k = {k}")))
}

fn add_poly(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).cloned().unwrap_or_else(Rational::zero) + b.get(i).cloned().unwrap_or_else(Rational::zero))
        .collect()
}

/// Odd-parity bridge on `[1, 2]`: the degree-7 polynomial matching `f` and
/// three derivatives of `-x² + 2` at 1 and of the outer branch at 2.
fn odd_bridge(k: u32) -> Poly {
    let one = int(1);
    let two = int(2);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let basis = |d: usize, x: &Rational| -> Vec<Rational> {
        (0..8)
            .map(|i| {
                let mut e = vec![Rational::zero(); 8];
                e[i] = int(1);
                Poly(e).nth_deriv(d).eval_exact(x)
            })
            .collect()
    };
    let core = Poly(vec![int(2), int(0), int(-1)]);
    for d in 0..4 {
        rows.push(basis(d, &one));
        rhs.push(core.nth_deriv(d).eval_exact(&one));
    }
    for d in 0..4 {
        rows.push(basis(d, &two));
        let v = if k == 0 {
            if d == 0 {
                // log 2 enters only through the value condition
                Rational::from_float(std::f64::consts::LN_2).expect("finite")
            } else {
                // (log x)^{(d)} = (-1)^{d-1} (d-1)! x^{-d}
                int((-1i64).pow(d as u32 - 1) * factorial(d - 1)) * two.recip().pow(d as i32)
            }
        } else {
            let n = 2 * k as i64;
            power_deriv_exact(&Rational::new((-1).into(), n.into()), n, d, &two)
        };
        rhs.push(v);
    }
    Poly(solve(rows, rhs).expect("Hermite system is nonsingular"))
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

impl DesingProfile {
    /// Profile for singularity order `m` at scale `epsilon`.
    pub fn for_order(m: u32, epsilon: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("singularity order must be positive".into()));
        }
        if m.is_multiple_of(2) {
            DesingProfile::even(m / 2, epsilon)
        } else {
            DesingProfile::odd(m / 2, epsilon)
        }
    }

    pub fn even(k: u32, epsilon: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("even profile needs k >= 1".into()));
        }
        let (epsilon, eps) = exact_epsilon(epsilon)?;
        Ok(DesingProfile { parity: Parity::Even, k, epsilon, eps, inner: even_core(k)?, bridge: None })
    }

    pub fn odd(k: u32, epsilon: f64) -> Result<Self> {
        let (epsilon, eps) = exact_epsilon(epsilon)?;
        let inner = Poly(vec![int(2), int(0), int(-1)]);
        Ok(DesingProfile { parity: Parity::Odd, k, epsilon, eps, inner, bridge: Some(odd_bridge(k)) })
    }

    pub fn m(&self) -> u32 {
        match self.parity {
            Parity::Even => 2 * self.k,
            Parity::Odd => 2 * self.k + 1,
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn inner_polynomial(&self) -> &Poly {
        &self.inner
    }

    pub fn bridge_polynomial(&self) -> Option<&Poly> {
        self.bridge.as_ref()
    }

    fn scale_exponent(&self) -> i32 {
        match self.parity {
            Parity::Even => 2 * self.k as i32 - 1,
            Parity::Odd => 2 * self.k as i32,
        }
    }

    /// `|x|` beyond which `f` is the outer branch.
    pub fn outer_start(&self) -> f64 {
        match self.parity {
            Parity::Even => 1.0,
            Parity::Odd => 2.0,
        }
    }

    fn outer(&self, x: f64, d: usize) -> f64 {
        let k = self.k as i64;
        match self.parity {
            Parity::Even => {
                let n = 2 * k - 1;
                let branch = power_deriv(-1.0 / n as f64, n, d, x);
                if d == 0 {
                    branch + 2.0 * x.signum()
                } else {
                    branch
                }
            }
            Parity::Odd if k == 0 => match d {
                0 => x.abs().ln(),
                _ => (-1f64).powi(d as i32 - 1) * factorial(d - 1) as f64 * x.powi(-(d as i32)),
            },
            Parity::Odd => {
                let n = 2 * k;
                power_deriv(-1.0 / n as f64, n, d, x)
            }
        }
    }

    /// `f^{(d)}(x)` of the unscaled profile.
    pub fn f_deriv(&self, x: f64, d: usize) -> f64 {
        let a = x.abs();
        if a <= 1.0 {
            return self.inner.nth_deriv(d).eval(x);
        }
        if a >= self.outer_start() {
            return self.outer(x, d);
        }
        let bridge = self.bridge.as_ref().expect("odd profile has a bridge");
        // f even: f^{(d)}(x) = (-1)^d f^{(d)}(-x)
        let sign = if x < 0.0 && d % 2 == 1 { -1.0 } else { 1.0 };
        sign * bridge.nth_deriv(d).eval(a)
    }

    pub fn f(&self, x: f64) -> f64 {
        self.f_deriv(x, 0)
    }

    pub fn f_eps(&self, x: f64) -> f64 {
        self.eps.powi(-self.scale_exponent()) * self.f(x / self.eps)
    }

    /// `f_ε'` as an exact polynomial in `t` on each interval inside the
    /// outer region, as `(lo, hi, f_ε'(t))`.
    pub fn derivative_pieces(&self, t: &str) -> Vec<(f64, f64, Expr)> {
        let tt = Expr::sym(t);
        let scaled = |p: &Poly| -> Expr {
            // f_ε'(t) = ε^{-s-1} f'(t/ε)
            let dp = p.deriv();
            let s = self.scale_exponent() + 1;
            let terms = dp.0.iter().enumerate().map(|(i, c)| {
                let factor = c * self.epsilon.recip().pow(s + i as i32);
                Expr::constant(factor) * tt.powi(i as i64)
            });
            Expr::sum(terms)
        };
        let e = self.eps;
        let mut out = vec![(-e, e, scaled(&self.inner))];
        if let Some(b) = &self.bridge {
            let pos = scaled(b);
            let neg = -pos.substitute(t, &-tt.clone());
            out.push((e, 2.0 * e, pos));
            out.push((-2.0 * e, -e, neg));
        }
        out
    }
}

fn exact_epsilon(epsilon: f64) -> Result<(Rational, f64)> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let r = parse_rational(&format!("{epsilon}"))
        .or_else(|| Rational::from_float(epsilon))
        .ok_or_else(|| Error::InvalidInput(format!("bad epsilon {epsilon}")))?;
    Ok((r, epsilon))
}

struct Piece {
    lo: f64,
    hi: f64,
    form: SingularForm,
    compiled: CompiledForm,
}

/// `ω_ε`: polynomial pieces near `t = 0`, the original form elsewhere.
pub struct DesingularizedForm {
    profile: DesingProfile,
    decomposition: LaurentDecomposition,
    source: SingularForm,
    t_index: usize,
    pieces: Vec<Piece>,
    outer: CompiledForm,
}

/// Build `ω_ε = df_ε ∧ Σ_j t^{m-j} α_j + β` from the Laurent decomposition.
pub fn desingularize(w: &SingularForm, profile: &DesingProfile) -> Result<DesingularizedForm> {
    let d = decompose_2form(w, DEFAULT_ORDER)?;
    let m = d.m;
    if profile.m() != m {
        return Err(Error::InvalidInput(format!("profile is for m = {}, form has m = {m}", profile.m())));
    }
    let chart = d.chart.clone();
    let t_index = chart.require_defining()?.0;
    let tt = Expr::sym(&d.t);
    let dt = SingularForm::basis(chart.clone(), &d.t)?;
    let build = |g: &Expr| -> Result<SingularForm> {
        let mut out = d.beta.clone();
        for (j, a) in d.alphas.iter().enumerate() {
            let shift = m as i64 - (j as i64 + 1);
            out = out.add(&dt.scale(&(g * &tt.powi(shift))).wedge(a)?)?;
        }
        Ok(out)
    };
    let source = w.to_standard();
    // the outer branch has f_ε' = t^{-m}, which must give back ω
    let outer_form = build(&tt.powi(-(m as i64)))?;
    if !outer_form.sub(&source)?.is_zero_full() {
        return Err(Error::InvalidInput("outer branch does not reproduce the form".into()));
    }
    let mut pieces = Vec::new();
    for (lo, hi, g) in profile.derivative_pieces(&d.t) {
        let form = build(&g)?;
        if !form.ext_d().is_zero_full() {
            return Err(Error::NonClosed(format!("desingularized piece on [{lo}, {hi}]")));
        }
        let compiled = CompiledForm::new(&form)?;
        pieces.push(Piece { lo, hi, form, compiled });
    }
    let out = DesingularizedForm {
        profile: profile.clone(),
        decomposition: d,
        outer: CompiledForm::new(&source)?,
        source,
        t_index,
        pieces,
    };
    if profile.parity == Parity::Even && chart.dim() % 2 == 0 {
        let grid = nondegeneracy_samples(&chart, 2.0 * profile.eps);
        nondegeneracy_of(&out, Frame::Standard, &grid).into_result()?;
    }
    Ok(out)
}

/// Tensor grid in two dimensions, otherwise Halton points plus their
/// projections to `t = 0`.
pub fn nondegeneracy_samples(chart: &ChartModel, t_max: f64) -> Vec<Vec<f64>> {
    if chart.dim() <= 2 {
        return SampleGrid::for_chart(chart, 9, t_max).points();
    }
    let ti = chart.defining_index();
    let pts = SampleGrid::halton(&SampleGrid::chart_bounds(chart, t_max), 128);
    let on_z = pts.iter().filter_map(|p| {
        ti.map(|i| {
            let mut q = p.clone();
            q[i] = 0.0;
            q
        })
    });
    pts.iter().cloned().chain(on_z).collect()
}

impl DesingularizedForm {
    pub fn profile(&self) -> &DesingProfile {
        &self.profile
    }

    pub fn decomposition(&self) -> &LaurentDecomposition {
        &self.decomposition
    }

    pub fn source(&self) -> &SingularForm {
        &self.source
    }

    pub fn chart(&self) -> &Arc<ChartModel> {
        self.source.chart()
    }

    /// Symbolic pieces with their `t` intervals.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, &SingularForm)> {
        self.pieces.iter().map(|p| (p.lo, p.hi, &p.form))
    }

    /// The symbolic form valid at `t`.
    pub fn piece_at(&self, t: f64) -> &SingularForm {
        self.pieces.iter().find(|p| p.lo <= t && t <= p.hi).map(|p| &p.form).unwrap_or(&self.source)
    }

    fn field_at(&self, t: f64) -> &CompiledForm {
        self.pieces.iter().find(|p| p.lo <= t && t <= p.hi).map(|p| &p.compiled).unwrap_or(&self.outer)
    }

    pub fn is_closed(&self) -> bool {
        self.pieces.iter().all(|p| p.form.ext_d().is_zero_full())
    }

    /// Every piece is preserved by the flow of `xi`.
    pub fn is_invariant(&self, xi: &VectorFieldExpr) -> Result<bool> {
        for p in &self.pieces {
            if !p.form.lie(xi)?.is_zero_full() {
                return Ok(false);
            }
        }
        Ok(self.source.lie(xi)?.is_zero_full())
    }

    /// Largest coefficient of `ω_ε - ω` over sample points with `|t| >= cutoff`.
    pub fn agreement_deviation(&self, points: &[Vec<f64>], cutoff: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for p in points.iter().filter(|p| p[self.t_index].abs() >= cutoff) {
            let diff = self.matrix_at(p)? - self.outer.matrix_at(p)?;
            worst = worst.max(diff.amax());
        }
        Ok(worst)
    }
}

impl FormField for DesingularizedForm {
    fn dim(&self) -> usize {
        self.source.chart().dim()
    }

    fn matrix_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.field_at(p[self.t_index]).matrix_at(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub order: usize,
    pub sup_deviation: f64,
}

/// Points with `|t| = t_max (i - 1/2) / n_t`, `i = 1..n_t` on both sides of
/// `Z`, and `n_other` samples on each remaining axis.
pub fn off_z_grid(chart: &ChartModel, t_max: f64, n_t: usize, n_other: usize) -> Vec<Vec<f64>> {
    let ti = chart.defining_index();
    let mut axes = Vec::new();
    for i in 0..chart.dim() {
        if Some(i) == ti {
            let mut axis: Vec<f64> = (1..=n_t).map(|j| t_max * (j as f64 - 0.5) / n_t as f64).collect();
            axis.extend(axis.clone().iter().map(|v| -v));
            axis.sort_by(f64::total_cmp);
            axes.push(axis);
        } else if chart.is_periodic(i) {
            axes.push(SampleGrid::linspace(0.3, 5.9, n_other));
        } else {
            axes.push(SampleGrid::linspace(-1.0, 1.0, n_other));
        }
    }
    SampleGrid::new(axes).points()
}

/// Finite-difference derivative of `f` along the multi-index `axes`.
fn fd<F>(f: &mut F, p: &[f64], axes: &[usize], h: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<DMatrix<f64>>,
{
    match axes.split_first() {
        None => f(p),
        Some((&a, rest)) => {
            let mut q = p.to_vec();
            q[a] = p[a] + h;
            let plus = fd(f, &q, rest, h)?;
            q[a] = p[a] - h;
            let minus = fd(f, &q, rest, h)?;
            Ok((plus - minus) / (2.0 * h))
        }
    }
}

fn multi_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
    if order == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for prefix in multi_indices(dim, order - 1) {
        let start = prefix.last().copied().unwrap_or(0);
        for a in start..dim {
            let mut v = prefix.clone();
            v.push(a);
            out.push(v);
        }
    }
    out
}

/// Sup over `points` of `|∂^α(Π_ε - Π)|` for every `|α| <= 2k - 1`, where
/// `Π = ω^{-1}` and derivatives are central differences.
pub fn convergence_report(w: &SingularForm, epsilons: &[f64], points: &[Vec<f64>]) -> Result<Vec<ConvergenceRow>> {
    let chart = w.chart().clone();
    let (ti, _) = chart.require_defining()?;
    let m = chart.m();
    if !m.is_multiple_of(2) {
        return Err(Error::InvalidInput("convergence is measured for even m only".into()));
    }
    let max_order = m as usize - 1;
    let mut rows = Vec::new();
    for &eps in epsilons {
        let profile = DesingProfile::for_order(m, eps)?;
        let de = desingularize(w, &profile)?;
        let mut sup = vec![0.0f64; max_order + 1];
        for p in points {
            let h = (eps / 64.0).min(p[ti].abs() / 8.0);
            let mut cache: HashMap<Vec<u64>, DMatrix<f64>> = HashMap::new();
            let mut diff = |q: &[f64]| -> Result<DMatrix<f64>> {
                let key: Vec<u64> = q.iter().map(|v| v.to_bits()).collect();
                if let Some(v) = cache.get(&key) {
                    return Ok(v.clone());
                }
                let v = bivector_of(&de, q)? - bivector_of(&de.outer, q)?;
                cache.insert(key, v.clone());
                Ok(v)
            };
            for (order, s) in sup.iter_mut().enumerate() {
                for axes in multi_indices(chart.dim(), order) {
                    let d = fd(&mut diff, p, &axes, h)?;
                    *s = s.max(d.amax());
                }
            }
        }
        rows.extend(sup.into_iter().enumerate().map(|(order, sup_deviation)| ConvergenceRow { epsilon: eps, order, sup_deviation }));
    }
    Ok(rows)
}

/// Each derivative column strictly decreases as `ε` decreases.
pub fn strictly_decreasing(rows: &[ConvergenceRow]) -> bool {
    let max_order = rows.iter().map(|r| r.order).max().unwrap_or(0);
    (0..=max_order).all(|o| {
        let mut col: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.order == o).collect();
        col.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        col.windows(2).all(|w| w[1].sup_deviation < w[0].sup_deviation)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldPoint {
    pub point: Vec<f64>,
    pub gradient: Vec<f64>,
    /// Rank of the form restricted to the tangent space of the zero set.
    pub restricted_rank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FoldVerdict {
    Symplectic,
    Folded(Vec<FoldPoint>),
}

impl FoldVerdict {
    pub fn folds(&self) -> &[FoldPoint] {
        match self {
            FoldVerdict::Symplectic => &[],
            FoldVerdict::Folded(f) => f,
        }
    }
}

fn bisect(field: &dyn FormField, mut a: Vec<f64>, mut b: Vec<f64>, mut fa: f64) -> Result<Vec<f64>> {
    for _ in 0..200 {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        if mid == a || mid == b {
            break;
        }
        let fm = pfaffian(&field.matrix_at(&mid)?);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(a)
}

/// Locate the Pfaffian zero set on a tensor grid and verify that it is a
/// fold: transverse vanishing and rank `dim - 2` along the zero set.
pub fn fold_check(field: &dyn FormField, grid: &SampleGrid) -> Result<FoldVerdict> {
    let n = field.dim();
    if !n.is_multiple_of(2) || grid.axes.len() != n {
        return Err(Error::InvalidInput("fold check needs an even-dimensional grid".into()));
    }
    let points = grid.points();
    let pf: Vec<f64> = points.iter().map(|p| field.matrix_at(p).map(|m| pfaffian(&m))).collect::<Result<_>>()?;
    let strides: Vec<usize> = (0..n).map(|a| grid.axes[a + 1..].iter().map(Vec::len).product()).collect();
    let mut zeros: Vec<Vec<f64>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if pf[i].abs() <= PFAFFIAN_THRESHOLD {
            zeros.push(p.clone());
            continue;
        }
        for a in 0..n {
            let idx = (i / strides[a]) % grid.axes[a].len();
            if idx + 1 == grid.axes[a].len() {
                continue;
            }
            let j = i + strides[a];
            if pf[j].abs() > PFAFFIAN_THRESHOLD && pf[i].signum() != pf[j].signum() {
                zeros.push(bisect(field, p.clone(), points[j].clone(), pf[i])?);
            }
        }
    }
    zeros.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-9));
    if zeros.is_empty() {
        return Ok(FoldVerdict::Symplectic);
    }
    let mut folds = Vec::new();
    for z in zeros {
        let mut grad = vec![0.0; n];
        for (a, g) in grad.iter_mut().enumerate() {
            let h = 1e-6 * z[a].abs().max(1.0);
            let mut q = z.clone();
            q[a] = z[a] + h;
            let plus = pfaffian(&field.matrix_at(&q)?);
            q[a] = z[a] - h;
            let minus = pfaffian(&field.matrix_at(&q)?);
            *g = (plus - minus) / (2.0 * h);
        }
        let (lead, gmax) = grad.iter().enumerate().fold((0, 0.0f64), |acc, (a, g)| if g.abs() > acc.1.abs() { (a, *g) } else { acc });
        if gmax.abs() <= 1e-6 {
            return Err(Error::DegenerateFold(format!("Pfaffian vanishes to second order at {z:?}")));
        }
        // tangent basis e_a - (g_a / g_lead) e_lead
        let mut v = DMatrix::zeros(n, n - 1);
        for (col, a) in (0..n).filter(|a| *a != lead).enumerate() {
            v[(a, col)] = 1.0;
            v[(lead, col)] = -grad[a] / gmax;
        }
        let omega = field.matrix_at(&z)?;
        let restricted = v.transpose() * omega * &v;
        let sv = restricted.clone().svd(false, false).singular_values;
        let scale = sv.max().max(1.0);
        let rank = sv.iter().filter(|s| **s > 1e-8 * scale).count();
        if rank != n - 2 {
            return Err(Error::DegenerateFold(format!("restriction has rank {rank} at {z:?}")));
        }
        folds.push(FoldPoint { point: z, gradient: grad, restricted_rank: rank });
    }
    Ok(FoldVerdict::Folded(folds))
}

/// [`fold_check`] for a symbolic form.
pub fn fold_check_form(w: &SingularForm, grid: &SampleGrid) -> Result<FoldVerdict> {
    fold_check(&CompiledForm::new(&w.to_standard())?, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Coordinate;
    use crate::expr::rat;

    fn sphere(m: u32) -> (Arc<ChartModel>, SingularForm) {
        let c = Arc::new(ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), m).unwrap());
        let terms = vec![("1".to_string(), vec![format!("dh/h^{m}"), "dtheta".to_string()])];
        let w = SingularForm::from_literal(c.clone(), &terms).unwrap();
        (c, w)
    }

    #[test]
    fn even_profile_k1_coefficients() {
        let p = DesingProfile::even(1, 1.0).unwrap();
        let expect = [rat(0, 1), rat(3, 8), rat(0, 1), rat(13, 8), rat(0, 1), rat(-11, 8), rat(0, 1), rat(3, 8)];
        assert_eq!(p.inner.0[..8], expect);
        assert_eq!(p.inner.degree(), 7);
        assert!((p.f(2.0) - 1.5).abs() < 1e-15);
        assert_eq!(p.f(0.0), 0.0);
    }

    #[test]
    fn profiles_are_smooth_at_breakpoints() {
        let mut profiles = vec![];
        for k in 1..=3 {
            profiles.push(DesingProfile::even(k, 1.0).unwrap());
        }
        for k in 0..=2 {
            profiles.push(DesingProfile::odd(k, 1.0).unwrap());
        }
        for p in profiles {
            let breaks: &[f64] = if p.parity == Parity::Even { &[1.0] } else { &[1.0, 2.0] };
            for &b in breaks {
                for x in [b, -b] {
                    for d in 0..3 {
                        let below = p.f_deriv(x - x.signum() * 1e-13, d);
                        let above = p.f_deriv(x + x.signum() * 1e-13, d);
                        assert!((below - above).abs() < 1e-10, "{:?} k={} x={x} d={d}: {below} vs {above}", p.parity, p.k);
                    }
                }
            }
            if p.parity == Parity::Even {
                assert!((-1000..=1000).all(|i| p.f_deriv(i as f64 * 1e-3, 1) > 0.0));
            }
        }
    }

    #[test]
    fn odd_profile_values() {
        let p = DesingProfile::odd(0, 1.0).unwrap();
        assert_eq!(p.f(0.0), 2.0);
        assert!((p.f(3.0) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(p.f(0.5), p.f(-0.5));
    }

    #[test]
    fn scaling_law() {
        let p = DesingProfile::even(2, 0.1).unwrap();
        assert!((p.f_eps(0.05) - 0.1f64.powi(-3) * p.f(0.5)).abs() < 1e-9);
        // outside the neighborhood f_ε' = t^{-m}
        let h = 1e-6;
        let slope = (p.f_eps(0.3 + h) - p.f_eps(0.3 - h)) / (2.0 * h);
        assert!((slope - 0.3f64.powi(-4)).abs() < 1e-4);
    }

    #[test]
    fn even_sphere_is_symplectic_and_agrees() {
        let (c, w) = sphere(2);
        let p = DesingProfile::even(1, 0.1).unwrap();
        let de = desingularize(&w, &p).unwrap();
        assert!(de.is_closed());
        let grid = SampleGrid::for_chart(&c, 21, 0.5).points();
        assert!(nondegeneracy_of(&de, Frame::Standard, &grid).all_pass());
        let m = de.matrix_at(&[0.5, 1.0]).unwrap();
        assert!((m[(0, 1)] - 4.0).abs() < 1e-12);
        assert_eq!(de.agreement_deviation(&grid, 0.2).unwrap(), 0.0);
        let xi = VectorFieldExpr::coordinate(c.clone(), "theta").unwrap();
        assert!(de.is_invariant(&xi).unwrap());
    }

    #[test]
    fn odd_sphere_folds_at_z() {
        let (c, w) = sphere(1);
        let p = DesingProfile::odd(0, 0.1).unwrap();
        let de = desingularize(&w, &p).unwrap();
        let grid = SampleGrid::for_chart(&c, 11, 0.5);
        let verdict = fold_check(&de, &grid).unwrap();
        assert!(verdict.folds().iter().any(|f| f.point[0] == 0.0));
        // Pfaffian proportional to t near Z
        let r1 = pfaffian(&de.matrix_at(&[1e-3, 1.0]).unwrap()) / 1e-3;
        let r2 = pfaffian(&de.matrix_at(&[2e-3, 1.0]).unwrap()) / 2e-3;
        assert!((r1 - r2).abs() < 1e-9 * r1.abs());
    }

    #[test]
    fn fold_check_fixtures() {
        let c = Arc::new(ChartModel::lines(&["x", "y", "u", "v"], None, 1).unwrap());
        let lit = |t: &[(&str, &[&str])]| {
            let t: Vec<(String, Vec<String>)> =
                t.iter().map(|(c, b)| (c.to_string(), b.iter().map(|s| s.to_string()).collect())).collect();
            SingularForm::from_literal(c.clone(), &t).unwrap()
        };
        let grid = SampleGrid::for_chart(&c, 5, 1.0);
        let folded = lit(&[("y", &["dx", "dy"]), ("1", &["du", "dv"])]);
        let v = fold_check_form(&folded, &grid).unwrap();
        assert!(!v.folds().is_empty() && v.folds().iter().all(|f| f.point[1] == 0.0 && f.restricted_rank == 2));
        let flat = lit(&[("1", &["dx", "dy"]), ("1", &["du", "dv"])]);
        assert_eq!(fold_check_form(&flat, &grid).unwrap(), FoldVerdict::Symplectic);
        let degenerate = lit(&[("y^2", &["dx", "dy"]), ("1", &["du", "dv"])]);
        assert!(matches!(fold_check_form(&degenerate, &grid), Err(Error::DegenerateFold(_))));
    }

    #[test]
    fn sphere_convergence_decreases() {
        let (c, w) = sphere(2);
        let grid = off_z_grid(&c, 0.5, 40, 2);
        let rows = convergence_report(&w, &[0.2, 0.1, 0.05], &grid).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(strictly_decreasing(&rows), "{rows:?}");
        let far: Vec<Vec<f64>> = grid.iter().filter(|p| p[0].abs() >= 0.4).cloned().collect();
        let rows = convergence_report(&w, &[0.2], &far).unwrap();
        assert!(rows.iter().all(|r| r.sup_deviation == 0.0));
    }
}
