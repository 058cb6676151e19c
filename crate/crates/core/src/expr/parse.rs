//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' integer)?
//! base   := rational | ident | func '(' args ')' | '(' expr ')'
//! ```

use super::{parse_rational, Expr, Rational};
use crate::chart::ChartModel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str) -> Result<Lexer> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if s.matches('.').count() > 1 {
                return Err(Error::Syntax { pos: start, msg: format!("malformed number `{s}`") });
            }
            toks.push((Tok::Num(s), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^(),;".contains(c) {
            toks.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(Error::Syntax { pos: i, msg: format!("unexpected character `{c}`") });
        }
    }
    toks.push((Tok::End, chars.len()));
    Ok(Lexer { toks })
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    known: &'a dyn Fn(&str) -> bool,
}

const FUNCS: &[&str] = &["sin", "cos", "tan", "cot", "exp", "abs", "log", "hyp2f1"];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax { pos: self.at(), msg: msg.into() })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    acc = acc + self.term()?;
                }
                Tok::Op('-') => {
                    self.bump();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    acc = acc * self.factor()?;
                }
                Tok::Op('/') => {
                    self.bump();
                    let at = self.at();
                    let d = self.factor()?;
                    if d.is_zero() {
                        return Err(Error::Syntax { pos: at, msg: "division by zero".into() });
                    }
                    acc = acc.div_expr(&d);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(-self.factor()?)
            }
            Tok::Op('+') => {
                self.bump();
                self.factor()
            }
            _ => {
                let b = self.base()?;
                if *self.peek() == Tok::Op('^') {
                    self.bump();
                    let n = self.exponent()?;
                    if n < 0 && b.is_zero() {
                        return self.err("negative power of zero");
                    }
                    if *self.peek() == Tok::Op('^') {
                        return self.err("chained exponents need parentheses");
                    }
                    Ok(b.powi(n))
                } else {
                    Ok(b)
                }
            }
        }
    }

    fn exponent(&mut self) -> Result<i64> {
        let paren = *self.peek() == Tok::Op('(');
        if paren {
            self.bump();
        }
        let neg = match self.peek() {
            Tok::Op('-') => {
                self.bump();
                true
            }
            Tok::Op('+') => {
                self.bump();
                false
            }
            _ => false,
        };
        let n = match self.bump() {
            Tok::Num(s) if !s.contains('.') => s.parse::<i64>().map_err(|_| Error::NonIntegerExponent(s.clone()))?,
            Tok::Num(s) => return Err(Error::NonIntegerExponent(s)),
            Tok::Ident(s) => return Err(Error::NonIntegerExponent(s)),
            Tok::Op(c) => return Err(Error::NonIntegerExponent(c.to_string())),
            Tok::End => return self.err("missing exponent"),
        };
        if paren {
            if *self.peek() == Tok::Op('/') {
                return Err(Error::NonIntegerExponent(format!("{n}/...")));
            }
            self.expect(')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn rational_param(&mut self) -> Result<Rational> {
        let mut text = String::new();
        if *self.peek() == Tok::Op('-') {
            self.bump();
            text.push('-');
        }
        match self.bump() {
            Tok::Num(s) => text.push_str(&s),
            _ => return self.err("hyp2f1 parameters must be rational literals"),
        }
        if *self.peek() == Tok::Op('/') {
            self.bump();
            text.push('/');
            if *self.peek() == Tok::Op('-') {
                self.bump();
                text.push('-');
            }
            match self.bump() {
                Tok::Num(s) => text.push_str(&s),
                _ => return self.err("hyp2f1 parameters must be rational literals"),
            }
        }
        parse_rational(&text).ok_or_else(|| Error::Syntax { pos: self.at(), msg: format!("bad rational `{text}`") })
    }

    fn base(&mut self) -> Result<Expr> {
        let start = self.at();
        match self.bump() {
            Tok::Num(s) => parse_rational(&s)
                .map(Expr::constant)
                .ok_or(Error::Syntax { pos: start, msg: format!("malformed number `{s}`") }),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) if FUNCS.contains(&name.as_str()) => self.call(&name, start),
            Tok::Ident(name) if name == "pi" => Ok(Expr::pi()),
            Tok::Ident(name) => {
                if (self.known)(&name) {
                    Ok(Expr::sym(&name))
                } else {
                    Err(Error::UnknownCoordinate(name))
                }
            }
            Tok::Op(c) => Err(Error::Syntax { pos: start, msg: format!("unexpected `{c}`") }),
            Tok::End => Err(Error::Syntax { pos: start, msg: "unexpected end of input".into() }),
        }
    }

    fn call(&mut self, name: &str, start: usize) -> Result<Expr> {
        self.expect('(')?;
        let out = match name {
            "log" => {
                match self.peek() {
                    Tok::Ident(f) if f == "abs" => {
                        self.bump();
                    }
                    _ => {
                        return Err(Error::Syntax {
                            pos: start,
                            msg: "log takes an abs(...) argument; write log(abs(u))".into(),
                        })
                    }
                }
                self.expect('(')?;
                let u = self.expr()?;
                self.expect(')')?;
                if u.is_zero() {
                    return Err(Error::Syntax { pos: start, msg: "log(abs(0))".into() });
                }
                u.log_abs()
            }
            "hyp2f1" => {
                let a = self.rational_param()?;
                self.expect(',')?;
                let b = self.rational_param()?;
                self.expect(',')?;
                let c = self.rational_param()?;
                self.expect(';')?;
                let x = self.expr()?;
                Expr::hyp2f1(a, b, c, x)
            }
            _ => {
                let u = self.expr()?;
                match name {
                    "sin" => u.sin(),
                    "cos" => u.cos(),
                    "tan" => u.tan(),
                    "cot" => u.cot(),
                    "exp" => u.exp(),
                    "abs" => u.abs(),
                    _ => unreachable!(),
                }
            }
        };
        self.expect(')')?;
        Ok(out)
    }
}

fn parse_with(text: &str, known: &dyn Fn(&str) -> bool) -> Result<Expr> {
    let lexer = lex(text)?;
    let mut p = Parser { toks: lexer.toks, pos: 0, known };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

/// Parse an expression whose identifiers must be coordinates of `chart`.
pub fn parse_expr(text: &str, chart: &ChartModel) -> Result<Expr> {
    parse_with(text, &|name| chart.contains(name))
}

/// Parse an expression over an explicit list of symbol names.
pub fn parse_symbols(text: &str, names: &[&str]) -> Result<Expr> {
    parse_with(text, &|name| names.contains(&name))
}

/// Parse an expression accepting any identifier as a symbol.
pub fn parse_free(text: &str) -> Result<Expr> {
    parse_with(text, &|_| true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{rat, Atom};

    fn chart() -> ChartModel {
        ChartModel::lines(&["h", "theta", "theta1", "x", "y"], Some("h"), 2).unwrap()
    }

    #[test]
    fn pole_literal() {
        let e = parse_expr("1/h^2", &chart()).unwrap();
        assert_eq!(e, Expr::sym("h").powi(-2));
    }

    #[test]
    fn log_requires_abs() {
        let e = parse_expr("log(abs(h))", &chart()).unwrap();
        assert!(matches!(e.single_atom(), Some(Atom::LogAbs(_))));
        assert!(matches!(parse_expr("log(h)", &chart()), Err(Error::Syntax { .. })));
    }

    #[test]
    fn hypergeometric_node() {
        let e = parse_expr("hyp2f1(1/2,-1/2,1/2; sin(theta1)^2)", &chart()).unwrap();
        match e.single_atom() {
            Some(Atom::Hyp2f1 { a, b, c, .. }) => {
                assert_eq!((a, b, c), (&rat(1, 2), &rat(-1, 2), &rat(1, 2)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_are_specific() {
        assert!(matches!(parse_expr("q + 1", &chart()), Err(Error::UnknownCoordinate(s)) if s == "q"));
        assert!(matches!(parse_expr("h^0.5", &chart()), Err(Error::NonIntegerExponent(_))));
        assert!(matches!(parse_expr("h^x", &chart()), Err(Error::NonIntegerExponent(_))));
        assert!(matches!(parse_expr("h + * 2", &chart()), Err(Error::Syntax { pos: 4, .. })));
        assert!(matches!(parse_expr("(h", &chart()), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expr("h/0", &chart()), Err(Error::Syntax { .. })));
    }

    #[test]
    fn unary_minus_and_exponents() {
        let c = chart();
        assert_eq!(parse_expr("-h^2", &c).unwrap(), -Expr::sym("h").powi(2));
        assert_eq!(parse_expr("h^-2", &c).unwrap(), Expr::sym("h").powi(-2));
        assert_eq!(parse_expr("h^(-2)", &c).unwrap(), Expr::sym("h").powi(-2));
        assert_eq!(parse_expr("0.25*x", &c).unwrap(), Expr::sym("x").scale(&rat(1, 4)));
    }
}
