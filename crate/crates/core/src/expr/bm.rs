//! The b^m-function class: `c1 log|t| + sum_{i=1}^{m-1} c_{i+1} t^-i / i + mu0`.

use std::fmt;

use super::series::expand;
use super::{rat, Env, Expr};
use crate::chart::ChartModel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BmFunction {
    pub defining: String,
    pub m: u32,
    pub log_coeff: Expr,
    /// `poles[i]` is `c_{i+2}`, the coefficient attached to `t^-(i+1)/(i+1)`.
    pub poles: Vec<Expr>,
    pub smooth: Expr,
}

impl BmFunction {
    pub fn new(defining: &str, m: u32, log_coeff: Expr, poles: Vec<Expr>, smooth: Expr) -> Result<Self> {
        if poles.len() >= m as usize {
            return Err(Error::NotBmFunction(format!("{} pole coefficients for m = {m}", poles.len())));
        }
        let mut poles = poles;
        poles.resize(m as usize - 1, Expr::zero());
        Ok(BmFunction { defining: defining.to_string(), m, log_coeff, poles, smooth })
    }

    /// `c_i` for `i` in `1..=m`.
    pub fn c(&self, i: usize) -> Expr {
        match i {
            1 => self.log_coeff.clone(),
            _ => self.poles.get(i - 2).cloned().unwrap_or_else(Expr::zero),
        }
    }

    /// The singular part `c1 log|t| + sum c_{i+1} t^-i / i`.
    pub fn singular_part(&self) -> Expr {
        let t = Expr::sym(&self.defining);
        let mut parts = vec![&self.log_coeff * &t.log_abs()];
        for (idx, c) in self.poles.iter().enumerate() {
            let i = idx as i64 + 1;
            parts.push((c * &t.powi(-i)).scale(&rat(1, i)));
        }
        Expr::sum(parts)
    }

    pub fn reassemble(&self) -> Expr {
        self.singular_part() + &self.smooth
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        self.reassemble().eval(env)
    }

    /// Same function shifted by a constant (only the smooth part moves).
    pub fn shifted(&self, k: &Expr) -> BmFunction {
        BmFunction { smooth: &self.smooth + k, ..self.clone() }
    }
}

impl fmt::Display for BmFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c1 = {}", self.log_coeff)?;
        for (i, c) in self.poles.iter().enumerate() {
            write!(f, ", c{} = {}", i + 2, c)?;
        }
        write!(f, ", mu0 = {}", self.smooth)
    }
}

/// Split a scalar into its canonical b^m-function parts.
pub fn split_bm_scalar(e: &Expr, chart: &ChartModel) -> Result<BmFunction> {
    let (_, t) = chart.require_defining()?;
    split_in(e, t, chart.m())
}

pub fn split_in(e: &Expr, t: &str, m: u32) -> Result<BmFunction> {
    let order = 1;
    let s = expand(e, t, order).map_err(|err| Error::NotBmFunction(format!("{e}: {err}")))?;
    if s.log.depends_on(t) {
        return Err(Error::NotBmFunction(format!("log coefficient of {e} depends on {t}")));
    }
    if !s.coeffs.is_empty() && s.val <= -(m as i64) {
        return Err(Error::NotBmFunction(format!("pole of order {} in {e} exceeds m - 1 = {}", -s.val, m - 1)));
    }
    let tt = Expr::sym(t);
    let mut poles = Vec::with_capacity(m as usize - 1);
    let mut principal = vec![&s.log * &tt.log_abs()];
    for i in 1..m as i64 {
        let coeff = s.coeff(-i);
        principal.push(&coeff * &tt.powi(-i));
        poles.push(coeff.scale(&rat(i, 1)));
    }
    let smooth = e - &Expr::sum(principal);
    BmFunction::new(t, m, s.log.clone(), poles, smooth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_free;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    #[test]
    fn splits() {
        let f = split_in(&p("log(abs(h))"), "h", 1).unwrap();
        assert_eq!(f.log_coeff, Expr::one());
        assert!(f.poles.is_empty());
        assert!(f.smooth.is_zero());

        let f = split_in(&p("-1/h + x*y"), "h", 2).unwrap();
        assert!(f.log_coeff.is_zero());
        assert_eq!(f.poles, vec![Expr::int(-1)]);
        assert_eq!(f.smooth, p("x*y"));

        let f = split_in(&p("sin(h)/h"), "h", 3).unwrap();
        assert!(f.log_coeff.is_zero() && f.poles.iter().all(Expr::is_zero));
        assert_eq!(f.smooth, p("sin(h)/h"));
    }

    #[test]
    fn rejects_high_poles_and_moving_logs() {
        assert!(matches!(split_in(&p("1/h^2"), "h", 2), Err(Error::NotBmFunction(_))));
        assert!(matches!(split_in(&p("h*log(abs(h))"), "h", 2), Err(Error::NotBmFunction(_))));
        assert!(matches!(split_in(&p("exp(1/h)"), "h", 2), Err(Error::NotBmFunction(_))));
    }

    #[test]
    fn split_reassemble_identity() {
        let f = BmFunction::new("t", 3, p("x"), vec![p("2"), p("-y")], p("cos(t)*x")).unwrap();
        let g = split_in(&f.reassemble(), "t", 3).unwrap();
        assert_eq!(f, g);
    }
}
