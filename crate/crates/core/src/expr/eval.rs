use std::collections::HashMap;

use super::{hyp, rat_to_f64, Atom, Expr};
use crate::chart::ChartModel;
use crate::error::{Error, Result};

/// Numeric values for coordinate symbols.
#[derive(Clone, Debug, Default)]
pub struct Env {
    values: HashMap<String, f64>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a, I: IntoIterator<Item = (&'a str, f64)>>(pairs: I) -> Self {
        Env {
            values: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn from_chart(chart: &ChartModel, point: &[f64]) -> Self {
        Env::from_pairs(chart.names().zip(point.iter().copied()))
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        match self.values.get_mut(name) {
            Some(v) => *v = value,
            None => {
                self.values.insert(name.to_string(), value);
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

fn singular(what: impl std::fmt::Display) -> Error {
    Error::SingularEvaluation(what.to_string())
}

impl Atom {
    fn eval(&self, env: &Env) -> Result<f64> {
        Ok(match self {
            Atom::Sym(s) => env.get(s).ok_or_else(|| Error::UnknownCoordinate(s.to_string()))?,
            Atom::Pi => std::f64::consts::PI,
            Atom::Sin(u) => u.eval(env)?.sin(),
            Atom::Cos(u) => u.eval(env)?.cos(),
            Atom::Tan(u) => u.eval(env)?.tan(),
            Atom::Cot(u) => {
                let s = u.eval(env)?.sin();
                if s == 0.0 {
                    return Err(singular(format!("cot({u}) at a pole")));
                }
                u.eval(env)?.cos() / s
            }
            Atom::Exp(u) => u.eval(env)?.exp(),
            Atom::Abs(u) => u.eval(env)?.abs(),
            Atom::LogAbs(u) => {
                let v = u.eval(env)?;
                if v == 0.0 {
                    return Err(singular(format!("log(abs({u})) at zero")));
                }
                v.abs().ln()
            }
            Atom::Hyp2f1 { a, b, c, arg } => {
                hyp::hyp2f1(rat_to_f64(a), rat_to_f64(b), rat_to_f64(c), arg.eval(env)?)?
            }
            Atom::Recip(e) => {
                let v = e.eval(env)?;
                if v == 0.0 {
                    return Err(singular(format!("division by zero in ({e})^-1")));
                }
                1.0 / v
            }
        })
    }
}

impl Expr {
    /// Evaluate in double precision.
    pub fn eval(&self, env: &Env) -> Result<f64> {
        let mut total = 0.0;
        for (m, c) in self.terms() {
            let mut prod = rat_to_f64(c);
            for (a, k) in m.iter() {
                let v = a.eval(env)?;
                if v == 0.0 && k < 0 {
                    return Err(singular(format!("pole of {} at zero", Expr::atom(a.clone()))));
                }
                prod *= v.powi(k as i32);
            }
            total += prod;
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(singular(format!("non-finite value of {self}")))
        }
    }

    pub fn eval_at(&self, chart: &ChartModel, point: &[f64]) -> Result<f64> {
        self.eval(&Env::from_chart(chart, point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_free;

    #[test]
    fn pole_and_log_values() {
        let e = parse_free("1/h^2").unwrap();
        assert_eq!(e.eval(&Env::new().with("h", 2.0)).unwrap(), 0.25);
        let l = parse_free("log(abs(h))").unwrap();
        assert!(matches!(l.eval(&Env::new().with("h", 0.0)), Err(Error::SingularEvaluation(_))));
        assert!(matches!(e.eval(&Env::new().with("h", 0.0)), Err(Error::SingularEvaluation(_))));
    }

    #[test]
    fn hypergeometric_atom() {
        let e = parse_free("hyp2f1(1/2,-1/2,1/2; s)").unwrap();
        let v = e.eval(&Env::new().with("s", 0.36)).unwrap();
        assert!((v - 0.8).abs() < 1e-14);
    }

    #[test]
    fn missing_coordinate() {
        let e = parse_free("x + y").unwrap();
        assert!(matches!(e.eval(&Env::new().with("x", 1.0)), Err(Error::UnknownCoordinate(_))));
    }
}
