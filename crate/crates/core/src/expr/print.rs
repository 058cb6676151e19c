use std::fmt;

use num_traits::{One, Signed};

use super::{Atom, Expr, Monomial, Rational};

fn fmt_rational(r: &Rational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Sym(s) => write!(f, "{s}"),
            Atom::Pi => write!(f, "pi"),
            Atom::Sin(u) => write!(f, "sin({u})"),
            Atom::Cos(u) => write!(f, "cos({u})"),
            Atom::Tan(u) => write!(f, "tan({u})"),
            Atom::Cot(u) => write!(f, "cot({u})"),
            Atom::Exp(u) => write!(f, "exp({u})"),
            Atom::Abs(u) => write!(f, "abs({u})"),
            Atom::LogAbs(u) => write!(f, "log(abs({u}))"),
            Atom::Hyp2f1 { a, b, c, arg } => {
                write!(f, "hyp2f1(")?;
                fmt_rational(a, f)?;
                write!(f, ",")?;
                fmt_rational(b, f)?;
                write!(f, ",")?;
                fmt_rational(c, f)?;
                write!(f, "; {arg})")
            }
            Atom::Recip(e) => write!(f, "({e})^-1"),
        }
    }
}

fn fmt_factor(a: &Atom, k: i64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match a {
        Atom::Recip(e) => write!(f, "({e})^{}", -k),
        _ if k == 1 => write!(f, "{a}"),
        _ => write!(f, "{a}^{k}"),
    }
}

fn fmt_unsigned_term(c: &Rational, m: &Monomial, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let c = c.abs();
    if m.is_one() {
        return fmt_rational(&c, f);
    }
    let mut first = true;
    if !c.is_one() {
        fmt_rational(&c, f)?;
        first = false;
    }
    for (a, k) in m.iter() {
        if !first {
            write!(f, "*")?;
        }
        fmt_factor(a, k, f)?;
        first = false;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            match (i, c.is_negative()) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            fmt_unsigned_term(c, m, f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse::parse_free;

    #[test]
    fn round_trips() {
        for text in [
            "3/2*x^2*sin(y)^-1",
            "-1/h + x*y",
            "log(abs(h))",
            "hyp2f1(1/2,-1/2,1/2; sin(theta1)^2)",
            "1/(1 + x^2)",
            "abs(cos(theta))/cos(theta)",
            "exp(-cot(t)) - pi*abs(x + 2*y)^3",
            "log(abs(2*x^2*(1 + x)))",
            "0",
            "-7/3",
        ] {
            let e = parse_free(text).unwrap();
            let printed = e.to_string();
            let again = parse_free(&printed).unwrap();
            assert_eq!(e, again, "{text} -> {printed}");
        }
    }

    #[test]
    fn canonical_text() {
        assert_eq!(parse_free("x*3/2*x*sin(y)^-1").unwrap().to_string(), "3/2*x^2*sin(y)^-1");
        assert_eq!(parse_free("1/(x + 1)").unwrap().to_string(), "(1 + x)^-1");
    }
}
