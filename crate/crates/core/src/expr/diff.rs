use num_bigint::BigInt;
use num_traits::One;

use super::{Atom, Expr, Rational};

impl Atom {
    /// Derivative of the atom itself (chain rule included).
    fn diff(&self, var: &str) -> Expr {
        match self {
            Atom::Sym(s) => {
                if &**s == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Atom::Pi => Expr::zero(),
            Atom::Sin(u) => u.cos() * u.diff(var),
            Atom::Cos(u) => -(u.sin() * u.diff(var)),
            Atom::Tan(u) => u.cos().powi(-2) * u.diff(var),
            Atom::Cot(u) => -(u.sin().powi(-2) * u.diff(var)),
            Atom::Exp(u) => u.exp() * u.diff(var),
            // Locally constant sign factor away from the zeros of u.
            Atom::Abs(u) => u * &u.abs().recip() * u.diff(var),
            Atom::LogAbs(u) => u.diff(var) * u.recip(),
            Atom::Hyp2f1 { a, b, c, arg } => {
                let one = Rational::one();
                let factor = a * b / c;
                Expr::hyp2f1(a + &one, b + &one, c + &one, arg.clone()).scale(&factor) * arg.diff(var)
            }
            Atom::Recip(e) => -(e.diff(var) * Expr::atom(self.clone()).powi(2)),
        }
    }
}

impl Expr {
    /// Partial derivative with respect to the coordinate `var`.
    pub fn diff(&self, var: &str) -> Expr {
        let mut parts = Vec::new();
        for (m, c) in self.terms() {
            if !m.depends_on(var) {
                continue;
            }
            let factors: Vec<(&Atom, i64)> = m.iter().collect();
            for (i, (a, k)) in factors.iter().enumerate() {
                if !a.depends_on(var) {
                    continue;
                }
                let mut prod = Expr::constant(c * Rational::from_integer(BigInt::from(*k)));
                for (j, (b, l)) in factors.iter().enumerate() {
                    let e = if i == j { *l - 1 } else { *l };
                    if e != 0 {
                        prod = prod * Expr::atom((*b).clone()).powi(e);
                    }
                }
                parts.push(prod * a.diff(var));
            }
        }
        Expr::sum(parts)
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse::parse_free;
    use crate::expr::Expr;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(p("-cot(theta1)").diff("theta1"), p("1/sin(theta1)^2"));
        assert_eq!(p("log(abs(h))").diff("h"), p("1/h"));
        assert_eq!(p("-1/(2*h^2)").diff("h"), p("1/h^3"));
        assert_eq!(
            p("hyp2f1(1/2,-1/2,3/2; x)").diff("x"),
            p("-1/6*hyp2f1(3/2,1/2,5/2; x)")
        );
    }

    #[test]
    fn product_and_chain_rules() {
        assert_eq!(p("x*sin(x^2)").diff("x"), p("sin(x^2) + 2*x^2*cos(x^2)"));
        assert_eq!(p("1/(1 + x^2)").diff("x"), p("-2*x/(1 + x^2)^2"));
        assert_eq!(p("abs(x)").diff("x"), p("abs(x)/x"));
        assert!(p("y*exp(y)").diff("x").is_zero());
    }
}
