//! Table-driven symbolic antiderivatives and potentials of closed 1-forms.
//!
//! The table covers powers of the variable (with `log|x|` for `x^{-1}`),
//! `sin^p u`, `cos^q u` and `sin^p u cos u`, `sin u cos^q u` for a linear
//! argument `u = a x + b` (including the `csc^n` reduction), and
//! `x^n · {sin, cos, exp}(u)` for `n <= 4` by parts. Anything else is an
//! error rather than a numeric fallback.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{rat, Atom, Env, Expr, Rational};
use crate::forms::SingularForm;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Kind {
    Sin,
    Cos,
    Exp,
}

/// Variable-dependent content of one term.
struct Shape {
    power: i64,
    /// Linear argument `(a, b)` shared by the transcendental factors.
    arg: Option<(Rational, Expr)>,
    factors: BTreeMap<Kind, i64>,
}

fn not_in_table(e: &Expr, var: &str) -> Error {
    Error::AntiderivativeNotInTable(format!("∫ {e} d{var}"))
}

fn linear_arg(u: &Expr, var: &str) -> Option<(Rational, Expr)> {
    let coeffs = u.polynomial_coefficients(var)?;
    if coeffs.len() != 2 {
        return None;
    }
    let a = coeffs[1].as_rational()?;
    Some((a, coeffs[0].clone()))
}

fn shape_of(term: &Expr, var: &str) -> Option<(Expr, Shape)> {
    let (c, m) = term.as_monomial()?;
    let mut rest = Expr::constant(c.clone());
    let mut shape = Shape { power: 0, arg: None, factors: BTreeMap::new() };
    for (atom, k) in m.iter() {
        if !atom.depends_on(var) {
            rest = rest * Expr::atom(atom.clone()).powi(k);
            continue;
        }
        let (kind, u) = match atom {
            Atom::Sym(_) => {
                shape.power += k;
                continue;
            }
            Atom::Sin(u) => (Kind::Sin, u),
            Atom::Cos(u) => (Kind::Cos, u),
            Atom::Exp(u) => (Kind::Exp, u),
            _ => return None,
        };
        let (mut a, mut b) = linear_arg(u, var)?;
        if kind == Kind::Exp && k != 1 {
            // exp(u)^k = exp(k u)
            a *= Rational::from_integer(k.into());
            b = b.scale(&Rational::from_integer(k.into()));
        }
        match &shape.arg {
            Some((a0, b0)) if *a0 != a || *b0 != b => return None,
            _ => shape.arg = Some((a, b)),
        }
        let exp = if kind == Kind::Exp { 1 } else { k };
        *shape.factors.entry(kind).or_insert(0) += exp;
    }
    Some((rest, shape))
}

fn var_power(var: &str, n: i64) -> Expr {
    Expr::sym(var).powi(n)
}

fn integrate_power(var: &str, n: i64) -> Expr {
    if n == -1 {
        Expr::sym(var).log_abs()
    } else {
        var_power(var, n + 1).scale(&rat(1, n + 1))
    }
}

fn u_expr(var: &str, a: &Rational, b: &Expr) -> Expr {
    Expr::sym(var).scale(a) + b.clone()
}

/// `∫ sin^p(u) cos^q(u) dx`, `u = a x + b`, for the supported `(p, q)`.
fn integrate_trig(p: i64, q: i64, a: &Rational, b: &Expr, var: &str) -> Option<Expr> {
    let u = u_expr(var, a, b);
    let (s, c) = (u.sin(), u.cos());
    let inv_a = a.recip();
    let r = |n: i64, d: i64| rat(n, d);
    let out = match (p, q) {
        (0, 0) => Expr::sym(var),
        (p, 1) if p == -1 => s.log_abs().scale(&inv_a),
        (p, 1) => s.powi(p + 1).scale(&(r(1, p + 1) * &inv_a)),
        (1, q) if q == -1 => -c.log_abs().scale(&inv_a),
        (1, q) => -c.powi(q + 1).scale(&(r(1, q + 1) * &inv_a)),
        (p, 0) if p >= 2 => {
            // ∫ sin^p = -sin^{p-1} cos / (p a) + (p-1)/p ∫ sin^{p-2}
            let head = -(s.powi(p - 1) * c).scale(&(r(1, p) * &inv_a));
            head + integrate_trig(p - 2, 0, a, b, var)?.scale(&r(p - 1, p))
        }
        (-1, 0) => {
            // log|tan(u/2)|
            let half = u.scale(&r(1, 2));
            (half.sin().log_abs() - half.cos().log_abs()).scale(&inv_a)
        }
        (-2, 0) => -(c * s.powi(-1)).scale(&inv_a),
        (p, 0) if p <= -3 => {
            // ∫ csc^n = -cos sin^{1-n} / ((n-1) a) + (n-2)/(n-1) ∫ csc^{n-2}
            let n = -p;
            let head = -(c * s.powi(1 - n)).scale(&(r(1, n - 1) * &inv_a));
            head + integrate_trig(p + 2, 0, a, b, var)?.scale(&r(n - 2, n - 1))
        }
        (0, q) if q >= 2 => {
            let head = (c.powi(q - 1) * s).scale(&(r(1, q) * &inv_a));
            head + integrate_trig(0, q - 2, a, b, var)?.scale(&r(q - 1, q))
        }
        _ => return None,
    };
    Some(out)
}

/// `∫ x^n g(u) dx` by parts, `g ∈ {sin, cos, exp}`, `0 <= n <= 4`.
fn integrate_by_parts(n: i64, kind: Kind, a: &Rational, b: &Expr, var: &str) -> Option<Expr> {
    let u = u_expr(var, a, b);
    let inv_a = a.recip();
    let (anti, next) = match kind {
        Kind::Sin => (-u.cos().scale(&inv_a), Kind::Cos),
        Kind::Cos => (u.sin().scale(&inv_a), Kind::Sin),
        Kind::Exp => (u.exp().scale(&inv_a), Kind::Exp),
    };
    if n == 0 {
        return Some(anti);
    }
    // ∫ x^n g = x^n G - n ∫ x^{n-1} G, with G = ±g'/a
    let inner = integrate_by_parts(n - 1, next, a, b, var)?;
    let inner = match kind {
        Kind::Sin => -inner.scale(&inv_a),
        _ => inner.scale(&inv_a),
    };
    Some(var_power(var, n) * anti - inner.scale(&Rational::from_integer(n.into())))
}

fn integrate_shape(shape: &Shape, var: &str) -> Option<Expr> {
    if shape.factors.is_empty() {
        return Some(integrate_power(var, shape.power));
    }
    let (a, b) = shape.arg.as_ref()?;
    let p = shape.factors.get(&Kind::Sin).copied().unwrap_or(0);
    let q = shape.factors.get(&Kind::Cos).copied().unwrap_or(0);
    let e = shape.factors.get(&Kind::Exp).copied().unwrap_or(0);
    if shape.power == 0 && e == 0 {
        return integrate_trig(p, q, a, b, var);
    }
    if !(0..=4).contains(&shape.power) {
        return None;
    }
    let kind = match (p, q, e) {
        (1, 0, 0) => Kind::Sin,
        (0, 1, 0) => Kind::Cos,
        (0, 0, 1) => Kind::Exp,
        _ => return None,
    };
    integrate_by_parts(shape.power, kind, a, b, var)
}

/// Antiderivative of `e` in `var` from the table.
pub fn antiderivative(e: &Expr, var: &str) -> Result<Expr> {
    let e = e.simplify_full();
    let mut out = Vec::with_capacity(e.num_terms());
    for (m, c) in e.terms() {
        let term = Expr::term(c.clone(), m.clone());
        if !term.depends_on(var) {
            out.push(term * Expr::sym(var));
            continue;
        }
        let (rest, shape) = shape_of(&term, var).ok_or_else(|| not_in_table(&term, var))?;
        let f = integrate_shape(&shape, var).ok_or_else(|| not_in_table(&term, var))?;
        out.push(rest * f);
    }
    Ok(Expr::sum(out))
}

/// A potential `F` with `dF = eta` for a closed 1-form, built one coordinate
/// at a time.
pub fn potential(eta: &SingularForm) -> Result<Expr> {
    if eta.degree() != 1 {
        return Err(Error::InvalidInput(format!("potential of a {}-form", eta.degree())));
    }
    let eta = eta.to_standard();
    let chart = eta.chart().clone();
    let mut rem = eta.clone();
    let mut total = Expr::zero();
    for i in 0..chart.dim() {
        let c = rem.coeff(&[i]).simplify_full();
        if c.is_zero() {
            continue;
        }
        let g = antiderivative(&c, chart.name(i))?;
        let dg = SingularForm::scalar(chart.clone(), g.clone()).ext_d();
        rem = rem.sub(&dg)?.simplify_full();
        total = total + g;
    }
    if !rem.is_zero_full() {
        if check_numeric_zero(&rem)? {
            return Ok(total);
        }
        return Err(Error::NotClosedContraction(format!("remainder {rem}")));
    }
    Ok(total)
}

/// Numeric zero test of a 1-form's coefficients on a deterministic sample.
fn check_numeric_zero(form: &SingularForm) -> Result<bool> {
    let chart = form.chart();
    let bounds: Vec<(f64, f64)> = (0..chart.dim()).map(|_| (0.15, 1.35)).collect();
    for p in crate::chart::SampleGrid::halton(&bounds, 100) {
        let env = Env::from_chart(chart, &p);
        for (_, c) in form.terms() {
            if c.eval(&env)?.abs() > 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Compare `d/dvar F` with `f` symbolically, falling back to 100 sample
/// points in `[0.15, 1.35]`; returns whether the symbolic check succeeded.
pub fn verify_antiderivative(f: &Expr, anti: &Expr, var: &str) -> Result<bool> {
    let diff = anti.diff(var) - f.clone();
    if diff.is_zero_full() {
        return Ok(true);
    }
    let symbols: Vec<String> = diff.symbols().iter().map(|s| s.to_string()).collect();
    let bounds: Vec<(f64, f64)> = symbols.iter().map(|_| (0.15, 1.35)).collect();
    for p in crate::chart::SampleGrid::halton(&bounds, 100) {
        let env = Env::from_pairs(symbols.iter().map(String::as_str).zip(p.iter().copied()));
        let d = diff.eval(&env)?;
        let scale = f.eval(&env)?.abs().max(1.0);
        if d.abs() > 1e-9 * scale {
            return Err(Error::AntiderivativeNotInTable(format!("verification failed for d/d{var} {anti}")));
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_free;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    fn check(integrand: &str, var: &str) -> Expr {
        let f = p(integrand);
        let a = antiderivative(&f, var).unwrap();
        verify_antiderivative(&f, &a, var).unwrap();
        a
    }

    #[test]
    fn powers_and_logs() {
        assert_eq!(check("h^-2", "h"), p("-1/h"));
        assert_eq!(check("1/h", "h"), p("log(abs(h))"));
        assert_eq!(check("3*x^2*y", "x"), p("x^3*y"));
        assert_eq!(check("h^-3", "h"), p("-1/(2*h^2)"));
    }

    #[test]
    fn cosecant_family() {
        assert_eq!(check("sin(t)^-2", "t"), p("-cos(t)/sin(t)"));
        check("sin(t)^-1", "t");
        check("sin(t)^-3", "t");
        check("sin(t)^-4", "t");
        check("sin(t/2)^-2", "t");
        check("cos(t)/sin(t)^2", "t");
    }

    #[test]
    fn by_parts() {
        check("x^2*sin(x)", "x");
        check("x^3*exp(2*x)", "x");
        check("x*cos(3*x + y)", "x");
        check("sin(x)^3", "x");
        check("cos(x)^2", "x");
    }

    #[test]
    fn outside_table() {
        assert!(matches!(antiderivative(&p("1/(1 + x^2)"), "x"), Err(Error::AntiderivativeNotInTable(_))));
        assert!(matches!(antiderivative(&p("sin(x^2)"), "x"), Err(Error::AntiderivativeNotInTable(_))));
    }
}
