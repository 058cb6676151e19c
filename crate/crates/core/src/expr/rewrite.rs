//! Named rewrites applied on request: tan/cot to sin/cos, cos² = 1 − sin²,
//! and the elementary reductions of ₂F₁ with c ∈ {a, b}.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::{Atom, Expr, Monomial, Rational};

/// `(1 - x)^e` for the reducible hypergeometric case, if expressible.
fn one_minus_pow(x: &Expr, e: &Rational) -> Option<Expr> {
    let base = Expr::one() - x;
    if e.is_integer() {
        let n: i64 = e.to_integer().try_into().ok()?;
        return Some(base.powi(n));
    }
    let two_e = e * Rational::from_integer(BigInt::from(2));
    if !two_e.is_integer() {
        return None;
    }
    let n: i64 = two_e.to_integer().try_into().ok()?;
    // sqrt(1 - x) must be an |atom| or a perfect-square monomial.
    if let Some((c, m)) = x.as_monomial() {
        if c.is_one() && m.len() == 1 {
            let (a, k) = m.iter().next().unwrap();
            if k == 2 {
                match a {
                    Atom::Sin(u) => return Some(u.cos().abs().powi(n)),
                    Atom::Cos(u) => return Some(u.sin().abs().powi(n)),
                    _ => {}
                }
            }
        }
    }
    let (c, m) = base.as_monomial()?;
    if c.is_negative() || m.iter().any(|(_, k)| k % 2 != 0) {
        return None;
    }
    let (num, den) = (c.numer().sqrt(), c.denom().sqrt());
    if &(&num * &num) != c.numer() || &(&den * &den) != c.denom() {
        return None;
    }
    let mut root = Expr::constant(Rational::new(num, den));
    for (a, k) in m.iter() {
        root = root * Expr::atom(a.clone()).powi(k / 2);
    }
    Some(root.abs().powi(n))
}

fn rewrite_atom(a: &Atom) -> Option<Expr> {
    match a {
        Atom::Tan(u) => Some(u.sin() * u.cos().recip()),
        Atom::Cot(u) => Some(u.cos() * u.sin().recip()),
        Atom::Hyp2f1 { a, b, c, arg } => {
            let other = if c == a {
                b
            } else if c == b {
                a
            } else {
                return None;
            };
            one_minus_pow(arg, &-other)
        }
        _ => None,
    }
}

fn pass(e: &Expr) -> Expr {
    let mut out = Vec::with_capacity(e.num_terms());
    for (m, c) in e.terms() {
        let mut prod = Expr::constant(c.clone());
        for (a, k) in m.iter() {
            let atom = match a.argument() {
                Some(arg) => {
                    let new_arg = pass(arg);
                    if &new_arg == arg {
                        Expr::atom(a.clone())
                    } else {
                        a.with_argument(new_arg)
                    }
                }
                None => Expr::atom(a.clone()),
            };
            let atom = match atom.single_atom() {
                Some(na) => rewrite_atom(na).unwrap_or(atom),
                None => atom,
            };
            let factor = match atom.single_atom() {
                Some(Atom::Cos(u)) if k >= 2 => {
                    let (q, r) = k.div_rem(&2);
                    let one_minus_sin2 = Expr::one() - u.sin().powi(2);
                    u.cos().powi(r) * one_minus_sin2.powi(q)
                }
                _ => atom.powi(k),
            };
            prod = prod * factor;
        }
        out.push(prod);
    }
    Expr::sum(out)
}

/// Graded lexicographic comparison over the atom order.
fn grlex(a: &Monomial, b: &Monomial) -> Ordering {
    let deg = |m: &Monomial| m.iter().map(|(_, k)| k).sum::<i64>();
    deg(a).cmp(&deg(b)).then_with(|| {
        let atoms: BTreeSet<&Atom> = a.iter().chain(b.iter()).map(|(x, _)| x).collect();
        atoms
            .into_iter()
            .map(|x| a.exponent(x).cmp(&b.exponent(x)))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    })
}

fn leading(e: &Expr) -> Option<(&Monomial, &Rational)> {
    e.terms().max_by(|x, y| grlex(x.0, y.0))
}

/// Exact quotient `n / d` by repeated leading-term division, if it exists
/// within a bounded number of steps.
fn try_divide(n: &Expr, d: &Expr) -> Option<Expr> {
    let (dm, dc) = leading(d)?;
    let dm_inv = dm.inverse();
    let mut r = n.clone();
    let mut q = Vec::new();
    for _ in 0..4 * (n.num_terms() + 1) {
        let Some((rm, rc)) = leading(&r) else {
            return Some(Expr::sum(q));
        };
        let factor = Expr::term(rc / dc, rm.mul(&dm_inv));
        r = &r - &(&factor * d);
        q.push(factor);
    }
    None
}

/// Cancel `N * (D)^-1` when `D` divides `N` exactly.
fn cancel_recips(e: &Expr) -> Expr {
    let mut groups: BTreeMap<Option<Expr>, Vec<Expr>> = BTreeMap::new();
    for (m, c) in e.terms() {
        let den = m.iter().find_map(|(a, _)| match a {
            Atom::Recip(d) => Some(d.clone()),
            _ => None,
        });
        let rest: BTreeMap<Atom, i64> =
            m.iter().filter(|(a, _)| !matches!(a, Atom::Recip(_))).map(|(a, k)| (a.clone(), k)).collect();
        groups.entry(den).or_default().push(Expr::term(c.clone(), Monomial(rest)));
    }
    let mut out = Vec::new();
    for (den, nums) in groups {
        let n = Expr::sum(nums);
        match den {
            None => out.push(n),
            Some(d) => match try_divide(&n, &d) {
                Some(q) => out.push(q),
                None => out.push(n * Expr::atom(Atom::Recip(d))),
            },
        }
    }
    Expr::sum(out)
}

/// Apply the named rewrites to a fixed point.
pub fn simplify_full(e: &Expr) -> Expr {
    let mut cur = e.clone();
    for _ in 0..16 {
        let next = cancel_recips(&pass(&cur));
        if next == cur {
            return cur;
        }
        cur = next;
    }
    cur
}

impl Expr {
    pub fn simplify_full(&self) -> Expr {
        simplify_full(self)
    }

    /// Symbolic zero test after the named rewrites.
    pub fn is_zero_full(&self) -> bool {
        self.is_zero() || simplify_full(self).is_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_free;
    use crate::expr::Env;

    fn p(s: &str) -> Expr {
        parse_free(s).unwrap()
    }

    #[test]
    fn pythagorean_identity() {
        assert!(p("sin(x)^2 + cos(x)^2 - 1").is_zero_full());
        assert!(!p("sin(x)^2 + cos(y)^2 - 1").is_zero_full());
        assert_eq!(p("cot(x)").diff("x").simplify_full(), p("-1/sin(x)^2"));
    }

    #[test]
    fn hypergeometric_reductions() {
        assert_eq!(p("hyp2f1(1/2,-1/2,1/2; sin(t)^2)").simplify_full(), p("abs(cos(t))"));
        assert_eq!(p("hyp2f1(3,1,1; x)").simplify_full(), p("1/(1 - x)^3").simplify_full());
        assert_eq!(p("hyp2f1(1,1/2,1; 1 - 4*x^2)").simplify_full(), p("1/(2*abs(x))"));
        assert_eq!(p("hyp2f1(1,1/2,3; x)").simplify_full(), p("hyp2f1(1,1/2,3; x)"));
    }

    #[test]
    fn reciprocal_cancellation() {
        assert_eq!(p("(1 + x)^2/(1 + x)").simplify_full(), p("1 + x"));
        assert_eq!(p("(x*y + y)/(1 + x)").simplify_full(), p("y"));
        assert_eq!(p("x/(1 + x)").simplify_full(), p("x/(1 + x)"));
    }

    #[test]
    fn torus_hamiltonian_is_cotangent() {
        let mu = p("-abs(cos(t))/cos(t) * hyp2f1(1/2,-1/2,1/2; sin(t)^2) / ((1 - 2)*sin(t))");
        assert_eq!(mu.simplify_full(), p("cos(t)/sin(t)"));
    }

    #[test]
    fn rewrites_preserve_values() {
        let e = p("tan(x)*cos(x)^3 + hyp2f1(1/2,-1/2,1/2; sin(x)^2)");
        let s = e.simplify_full();
        for x in [0.3, 1.1, 2.0, -0.7] {
            let env = Env::new().with("x", x);
            assert!((e.eval(&env).unwrap() - s.eval(&env).unwrap()).abs() < 1e-12);
        }
    }
}
