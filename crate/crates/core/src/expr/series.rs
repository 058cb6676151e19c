//! Truncated Laurent expansions in one variable with symbolic coefficients,
//! plus an additive `log|t|` part.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{Atom, Env, Expr, Rational};
use crate::error::{Error, Result};

/// `log * log|t| + sum_i coeffs[i] * t^(val + i) + O(t^prec)`, where
/// `prec = val + coeffs.len()` and every coefficient is independent of `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub val: i64,
    pub coeffs: Vec<Expr>,
    pub log: Expr,
}

fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

impl Series {
    pub fn prec(&self) -> i64 {
        self.val + self.coeffs.len() as i64
    }

    fn zero_to(prec: i64) -> Series {
        Series { val: prec, coeffs: vec![], log: Expr::zero() }
    }

    fn constant(c: Expr, prec: i64) -> Series {
        if prec <= 0 {
            return Series::zero_to(prec);
        }
        let mut coeffs = vec![Expr::zero(); prec as usize];
        coeffs[0] = c;
        Series { val: 0, coeffs, log: Expr::zero() }.normalized()
    }

    fn monomial(power: i64, prec: i64) -> Series {
        if power >= prec {
            return Series::zero_to(prec);
        }
        let mut coeffs = vec![Expr::zero(); (prec - power) as usize];
        coeffs[0] = Expr::one();
        Series { val: power, coeffs, log: Expr::zero() }
    }

    /// Coefficient of `t^power`; zero below the valuation.
    pub fn coeff(&self, power: i64) -> Expr {
        if power < self.val || power >= self.prec() {
            return Expr::zero();
        }
        self.coeffs[(power - self.val) as usize].clone()
    }

    /// Strip vanishing leading coefficients.
    fn normalized(mut self) -> Series {
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.val += lead as i64;
        }
        self
    }

    fn truncate(mut self, prec: i64) -> Series {
        if prec < self.prec() {
            if prec <= self.val {
                self.val = prec;
                self.coeffs.clear();
            } else {
                self.coeffs.truncate((prec - self.val) as usize);
            }
        }
        self
    }

    pub fn is_exact_zero_principal(&self) -> bool {
        self.log.is_zero() && (self.val..0).all(|p| self.coeff(p).is_zero())
    }

    fn add(&self, other: &Series) -> Series {
        let val = self.val.min(other.val);
        let prec = self.prec().min(other.prec());
        let coeffs = (val..prec).map(|p| self.coeff(p) + other.coeff(p)).collect();
        Series { val, coeffs, log: &self.log + &other.log }.normalized()
    }

    fn scale(&self, k: &Expr) -> Series {
        Series {
            val: self.val,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            log: &self.log * k,
        }
        .normalized()
    }

    fn mul(&self, other: &Series) -> Result<Series> {
        if !self.log.is_zero() || !other.log.is_zero() {
            return Err(Error::Series("log|t| multiplied by a t-dependent factor".into()));
        }
        let n = self.coeffs.len().min(other.coeffs.len());
        let val = self.val + other.val;
        let mut coeffs = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = Vec::with_capacity(k + 1);
            for i in 0..=k {
                let (a, b) = (&self.coeffs[i], &other.coeffs[k - i]);
                if !a.is_zero() && !b.is_zero() {
                    acc.push(a * b);
                }
            }
            coeffs.push(Expr::sum(acc));
        }
        Ok(Series { val, coeffs, log: Expr::zero() }.normalized())
    }

    fn inverse(&self) -> Result<Series> {
        if !self.log.is_zero() {
            return Err(Error::Series("reciprocal of a logarithmic series".into()));
        }
        let s = self.clone().normalized();
        if s.coeffs.is_empty() {
            return Err(Error::Series("leading coefficient undetermined at this order".into()));
        }
        let inv0 = s.coeffs[0].recip();
        let n = s.coeffs.len();
        let mut b: Vec<Expr> = Vec::with_capacity(n);
        b.push(inv0.clone());
        for k in 1..n {
            let mut acc = Vec::new();
            for j in 1..=k {
                if !s.coeffs[j].is_zero() && !b[k - j].is_zero() {
                    acc.push(&s.coeffs[j] * &b[k - j]);
                }
            }
            b.push(-(Expr::sum(acc) * &inv0));
        }
        Ok(Series { val: -s.val, coeffs: b, log: Expr::zero() }.normalized())
    }

    fn powi(&self, k: i64) -> Result<Series> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut acc: Option<Series> = None;
        for _ in 0..k.unsigned_abs() {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => a.mul(&base)?,
            });
        }
        Ok(acc.unwrap_or_else(|| Series::constant(Expr::one(), base.prec().max(1))))
    }

    /// Split `u = u0 + w` with `w = O(t)`; fails on a genuine pole.
    fn split_constant(&self) -> Result<(Expr, Series)> {
        if !self.log.is_zero() {
            return Err(Error::Series("function of a logarithmic argument".into()));
        }
        if (self.val..0).any(|p| !self.coeff(p).is_zero()) {
            return Err(Error::Series("function argument has a pole".into()));
        }
        let u0 = self.coeff(0);
        let val = self.val.max(1);
        let coeffs = (val..self.prec()).map(|p| self.coeff(p)).collect();
        Ok((u0, Series { val, coeffs, log: Expr::zero() }.normalized()))
    }

    /// `sum_n f(n) * w^n` for `w = O(t)`.
    fn compose(w: &Series, prec: i64, f: impl Fn(usize) -> Expr) -> Result<Series> {
        let prec = prec.min(w.prec());
        let mut acc = Series::constant(f(0), prec);
        if w.coeffs.is_empty() || w.val >= prec {
            return Ok(acc);
        }
        let mut pw = w.clone();
        let mut n = 1;
        while pw.val < prec && !pw.coeffs.is_empty() {
            let fn_ = f(n);
            if !fn_.is_zero() {
                acc = acc.add(&pw.scale(&fn_));
            }
            pw = pw.mul(w)?;
            n += 1;
        }
        Ok(acc.truncate(prec))
    }

    /// Numeric value at `t` given the other coordinates.
    pub fn eval(&self, t: f64, env: &Env) -> Result<f64> {
        let mut total = 0.0;
        if !self.log.is_zero() {
            if t == 0.0 {
                return Err(Error::SingularEvaluation("log|t| at t = 0".into()));
            }
            total += self.log.eval(env)? * t.abs().ln();
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let p = self.val + i as i64;
            if t == 0.0 && p < 0 {
                return Err(Error::SingularEvaluation("pole at t = 0".into()));
            }
            total += c.eval(env)? * t.powi(p as i32);
        }
        Ok(total)
    }
}

fn factorial(n: usize) -> Rational {
    (1..=n as i64).fold(Rational::one(), |acc, k| acc * int(k))
}

fn pochhammer(a: &Rational, n: usize) -> Rational {
    (0..n as i64).fold(Rational::one(), |acc, k| acc * (a + int(k)))
}

struct Expander {
    var: Arc<str>,
    prec: i64,
    cache: HashMap<Atom, Series>,
}

impl Expander {
    fn expr(&mut self, e: &Expr) -> Result<Series> {
        let mut total = Series::zero_to(self.prec);
        let mut free = Vec::new();
        for (m, c) in e.terms() {
            let mut coeff = Expr::constant(c.clone());
            let mut factors: Vec<(Atom, i64)> = Vec::new();
            for (a, k) in m.iter() {
                if a.depends_on(&self.var) {
                    factors.push((a.clone(), k));
                } else {
                    coeff = coeff * Expr::atom(a.clone()).powi(k);
                }
            }
            if factors.is_empty() {
                free.push(coeff);
                continue;
            }
            let mut series: Option<Series> = None;
            for (a, k) in factors {
                let s = self.atom(&a)?;
                let s = if k == 1 { s } else { s.powi(k)? };
                series = Some(match series {
                    None => s,
                    Some(acc) => acc.mul(&s)?,
                });
            }
            total = total.add(&series.expect("nonempty").scale(&coeff));
        }
        if !free.is_empty() {
            total = total.add(&Series::constant(Expr::sum(free), self.prec));
        }
        Ok(total.truncate(self.prec))
    }

    fn atom(&mut self, a: &Atom) -> Result<Series> {
        if let Some(s) = self.cache.get(a) {
            return Ok(s.clone());
        }
        let prec = self.prec;
        let s = match a {
            Atom::Sym(_) => Series::monomial(1, prec),
            Atom::Pi => unreachable!("pi does not depend on the variable"),
            Atom::Sin(u) | Atom::Cos(u) => {
                let (u0, w) = self.expr(u)?.split_constant()?;
                let (s0, c0) = (u0.sin(), u0.cos());
                let is_sin = matches!(a, Atom::Sin(_));
                Series::compose(&w, prec, |n| {
                    let d = match (n + if is_sin { 0 } else { 1 }) % 4 {
                        0 => s0.clone(),
                        1 => c0.clone(),
                        2 => -&s0,
                        _ => -&c0,
                    };
                    d.scale(&factorial(n).recip())
                })?
            }
            Atom::Tan(u) => {
                let s = self.atom(&Atom::Sin(u.clone()))?;
                let c = self.atom(&Atom::Cos(u.clone()))?;
                s.mul(&c.inverse()?)?
            }
            Atom::Cot(u) => {
                let s = self.atom(&Atom::Sin(u.clone()))?;
                let c = self.atom(&Atom::Cos(u.clone()))?;
                c.mul(&s.inverse()?)?
            }
            Atom::Exp(u) => {
                let (u0, w) = self.expr(u)?.split_constant()?;
                let e0 = u0.exp();
                Series::compose(&w, prec, |n| e0.scale(&factorial(n).recip()))?
            }
            Atom::Hyp2f1 { a: pa, b: pb, c: pc, arg } => {
                let (u0, w) = self.expr(arg)?.split_constant()?;
                Series::compose(&w, prec, |n| {
                    let k = pochhammer(pa, n) * pochhammer(pb, n) / (pochhammer(pc, n) * factorial(n));
                    if k.is_zero() {
                        return Expr::zero();
                    }
                    let ni = int(n as i64);
                    Expr::hyp2f1(pa + &ni, pb + &ni, pc + &ni, u0.clone()).scale(&k)
                })?
            }
            Atom::Abs(u) => {
                let s = self.expr(u)?;
                if !s.log.is_zero() {
                    return Err(Error::Series("abs of a logarithmic series".into()));
                }
                let s = s.normalized();
                if s.coeffs.is_empty() {
                    return Err(Error::Series("abs argument vanishes to working order".into()));
                }
                if s.val.rem_euclid(2) != 0 {
                    return Err(Error::Series(format!("abs({u}) changes sign across the expansion point")));
                }
                let lead = &s.coeffs[0];
                s.scale(&(lead.abs() * lead.recip()))
            }
            Atom::LogAbs(u) => {
                let s = self.expr(u)?;
                if !s.log.is_zero() {
                    return Err(Error::Series("log of a logarithmic series".into()));
                }
                let s = s.normalized();
                if s.coeffs.is_empty() {
                    return Err(Error::Series("log argument vanishes to working order".into()));
                }
                let lead = s.coeffs[0].clone();
                let inv = lead.recip();
                let rel = s.coeffs.len() as i64;
                let r = Series {
                    val: 1,
                    coeffs: s.coeffs[1..].iter().map(|c| c * &inv).collect(),
                    log: Expr::zero(),
                }
                .normalized();
                let mut out = Series::compose(&r, rel.min(prec), |n| {
                    if n == 0 {
                        lead.log_abs()
                    } else {
                        let sign = if n % 2 == 1 { 1 } else { -1 };
                        Expr::rational(sign, n as i64)
                    }
                })?;
                out.log = Expr::int(s.val);
                out
            }
            Atom::Recip(e) => self.expr(e)?.inverse()?,
        };
        self.cache.insert(a.clone(), s.clone());
        Ok(s)
    }
}

/// Expand `e` around `var = 0` with absolute precision at least `order`
/// (terms through `t^(order-1)`). Working precision is raised automatically
/// to absorb cancellation and negative valuations.
pub fn expand(e: &Expr, var: &str, order: i64) -> Result<Series> {
    let mut last = Error::Series("no attempt".into());
    for extra in [2, 4, 8, 16] {
        let mut ex = Expander { var: Arc::from(var), prec: order + extra, cache: HashMap::new() };
        match ex.expr(e) {
            Ok(s) if s.prec() >= order => return Ok(s.truncate(order)),
            Ok(s) => last = Error::Series(format!("precision {} below requested {order}", s.prec())),
            Err(err) => last = err,
        }
    }
    Err(last)
}

/// Sum `log * log|t| + sum_{p < 0} c_p t^p`.
pub fn principal_part(s: &Series, var: &str) -> Expr {
    let t = Expr::sym(var);
    let mut parts = vec![&s.log * &t.log_abs()];
    for p in s.val..0 {
        parts.push(s.coeff(p) * t.powi(p));
    }
    Expr::sum(parts)
}

/// Truncated polynomial `sum_{0 <= p < order} c_p t^p`.
pub fn taylor_polynomial(s: &Series, var: &str, order: i64) -> Expr {
    let t = Expr::sym(var);
    Expr::sum((0..order.min(s.prec())).map(|p| s.coeff(p) * t.powi(p)))
}

/// Evaluates an expression numerically, switching to its Laurent expansion in
/// `var` for `|var| < delta` so that removable singularities (and the
/// cancellation next to them) are handled.
#[derive(Debug)]
pub struct NearEvaluator {
    expr: Expr,
    var: Option<Arc<str>>,
    series: OnceLock<Option<Series>>,
}

const NEAR_DELTA: f64 = 0.02;
const NEAR_ORDER: i64 = 16;

impl NearEvaluator {
    pub fn new(expr: Expr, var: Option<&str>) -> Self {
        let var = var.filter(|v| expr.depends_on(v)).map(Arc::from);
        NearEvaluator { expr, var, series: OnceLock::new() }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        if let Some(var) = &self.var {
            let t = env.get(var).ok_or_else(|| Error::UnknownCoordinate(var.to_string()))?;
            if t.abs() < NEAR_DELTA {
                let series = self.series.get_or_init(|| expand(&self.expr, var, NEAR_ORDER).ok());
                if let Some(s) = series {
                    return s.eval(t, env);
                }
            }
        }
        self.expr.eval(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_free;
    use crate::expr::rat;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    #[test]
    fn csc_squared_laurent() {
        let s = expand(&p("sin(t)^-2"), "t", 4).unwrap();
        assert_eq!(s.val, -2);
        assert_eq!(s.coeff(-2), Expr::one());
        assert_eq!(s.coeff(-1), Expr::zero());
        assert_eq!(s.coeff(0), Expr::rational(1, 3));
        assert_eq!(s.coeff(2), Expr::rational(1, 15));
    }

    #[test]
    fn removable_singularity() {
        let s = expand(&p("sin(h)/h"), "h", 4).unwrap();
        assert_eq!(s.val, 0);
        assert_eq!(s.coeff(0), Expr::one());
        assert_eq!(s.coeff(2), Expr::rational(-1, 6));
        let s = expand(&p("t^2/sin(t)^2"), "t", 4).unwrap();
        assert_eq!(s.coeff(0), Expr::one());
        assert_eq!(s.coeff(2), Expr::rational(1, 3));
    }

    #[test]
    fn logarithms() {
        let s = expand(&p("log(abs(sin(t))) + x"), "t", 3).unwrap();
        assert_eq!(s.log, Expr::one());
        assert_eq!(s.coeff(0), p("x"));
        assert_eq!(s.coeff(2), Expr::rational(-1, 6));
        let s = expand(&p("log(abs(x + t))"), "t", 3).unwrap();
        assert_eq!(s.coeff(0), p("log(abs(x))"));
        assert_eq!(s.coeff(1), p("1/x"));
        assert!(expand(&p("t*log(abs(t))"), "t", 3).is_err());
    }

    #[test]
    fn symbolic_coefficients_and_hyp() {
        let s = expand(&p("exp(x + t)"), "t", 3).unwrap();
        assert_eq!(s.coeff(2), p("exp(x)").scale(&rat(1, 2)));
        let s = expand(&p("hyp2f1(1/2,-1/2,1/2; t)"), "t", 3).unwrap();
        assert_eq!(s.coeff(1), Expr::rational(-1, 2));
        assert_eq!(s.coeff(2), Expr::rational(-1, 8));
        let s = expand(&p("abs(cos(t))/t"), "t", 2).unwrap();
        assert_eq!(s.coeff(-1), Expr::one());
        assert!(expand(&p("abs(t)"), "t", 2).is_err());
        assert!(expand(&p("sin(1/t)"), "t", 2).is_err());
    }

    #[test]
    fn near_evaluation_cancels() {
        let e = p("sin(t)^-2 - t^-2");
        let ev = NearEvaluator::new(e, Some("t"));
        let v = ev.eval(&Env::new().with("t", 0.0)).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let v = ev.eval(&Env::new().with("t", 1e-6)).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
}
