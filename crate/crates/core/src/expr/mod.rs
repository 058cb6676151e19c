//! Symbolic scalar expressions over chart coordinates.
//!
//! An [`Expr`] is kept in a canonical sum-of-products form: a map from
//! [`Monomial`]s (products of [`Atom`]s raised to integer powers) to exact
//! rational coefficients. Every constructor re-canonicalizes, so two
//! expressions that differ only by ring identities of the atom algebra
//! compare equal structurally. Trigonometric identities are *not* applied
//! automatically; see [`rewrite`] for the named rewrites.

pub mod bm;
mod diff;
mod eval;
pub mod hyp;
mod parse;
mod print;
pub mod rewrite;
pub mod series;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use eval::Env;
pub use parse::{parse_expr, parse_free, parse_symbols};
pub use rewrite::simplify_full;

pub type Rational = BigRational;

/// Build a rational from a numerator/denominator pair.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational from a decimal or fraction literal such as `0.05`, `-3/4`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = Rational::new(num, den);
    Some(if neg { -r } else { r })
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Atom {
    Sym(Arc<str>),
    Pi,
    Sin(Expr),
    Cos(Expr),
    Tan(Expr),
    Cot(Expr),
    Exp(Expr),
    Abs(Expr),
    /// `log|e|`; plain logarithms of signed quantities are not representable.
    LogAbs(Expr),
    Hyp2f1 {
        a: Rational,
        b: Rational,
        c: Rational,
        arg: Expr,
    },
    /// Reciprocal of a sum that does not factor into a monomial.
    Recip(Expr),
}

impl Atom {
    pub fn argument(&self) -> Option<&Expr> {
        match self {
            Atom::Sym(_) | Atom::Pi => None,
            Atom::Sin(e)
            | Atom::Cos(e)
            | Atom::Tan(e)
            | Atom::Cot(e)
            | Atom::Exp(e)
            | Atom::Abs(e)
            | Atom::LogAbs(e)
            | Atom::Recip(e) => Some(e),
            Atom::Hyp2f1 { arg, .. } => Some(arg),
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Atom::Sym(s) => &**s == name,
            Atom::Pi => false,
            _ => self.argument().is_some_and(|e| e.depends_on(name)),
        }
    }

    /// Rebuild the atom as an expression with its argument replaced.
    fn with_argument(&self, arg: Expr) -> Expr {
        match self {
            Atom::Sym(_) | Atom::Pi => Expr::atom(self.clone()),
            Atom::Sin(_) => arg.sin(),
            Atom::Cos(_) => arg.cos(),
            Atom::Tan(_) => arg.tan(),
            Atom::Cot(_) => arg.cot(),
            Atom::Exp(_) => arg.exp(),
            Atom::Abs(_) => arg.abs(),
            Atom::LogAbs(_) => arg.log_abs(),
            Atom::Recip(_) => arg.recip(),
            Atom::Hyp2f1 { a, b, c, .. } => Expr::hyp2f1(a.clone(), b.clone(), c.clone(), arg),
        }
    }
}

/// Product of atoms with nonzero integer exponents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial(BTreeMap<Atom, i64>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, i64)> {
        self.0.iter().map(|(a, k)| (a, *k))
    }

    pub fn exponent(&self, atom: &Atom) -> i64 {
        self.0.get(atom).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.0.keys().any(|a| a.depends_on(name))
    }

    fn from_map(mut map: BTreeMap<Atom, i64>) -> Self {
        // |a|^k -> a^(k - k mod 2) * |a|^(k mod 2) for single-atom arguments.
        let abs_atoms: Vec<(Atom, i64)> = map
            .iter()
            .filter(|(a, k)| matches!(a, Atom::Abs(e) if e.single_atom().is_some()) && (**k < 0 || **k > 1))
            .map(|(a, k)| (a.clone(), *k))
            .collect();
        for (abs_atom, k) in abs_atoms {
            let inner = match &abs_atom {
                Atom::Abs(e) => e.single_atom().cloned().expect("single atom"),
                _ => unreachable!(),
            };
            let keep = k.rem_euclid(2);
            map.insert(abs_atom, keep);
            *map.entry(inner).or_insert(0) += k - keep;
        }
        map.retain(|_, k| *k != 0);
        Monomial(map)
    }

    fn needs_recip_merge(&self) -> bool {
        let mut seen = false;
        for (a, k) in &self.0 {
            if let Atom::Recip(_) = a {
                if seen || *k != 1 {
                    return true;
                }
                seen = true;
            }
        }
        false
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut map = self.0.clone();
        for (a, k) in &other.0 {
            *map.entry(a.clone()).or_insert(0) += k;
        }
        Monomial::from_map(map)
    }

    fn inverse(&self) -> Monomial {
        Monomial::from_map(self.0.iter().map(|(a, k)| (a.clone(), -k)).collect())
    }

    fn pow(&self, n: i64) -> Monomial {
        Monomial::from_map(self.0.iter().map(|(a, k)| (a.clone(), k * n)).collect())
    }
}

/// Canonical symbolic expression. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Expr(Arc<BTreeMap<Monomial, Rational>>);

impl Default for Expr {
    fn default() -> Self {
        Expr::zero()
    }
}

impl Expr {
    fn from_terms(mut terms: BTreeMap<Monomial, Rational>) -> Expr {
        terms.retain(|_, c| !c.is_zero());
        if terms.keys().any(Monomial::needs_recip_merge) {
            return Expr::sum(terms.into_iter().map(|(m, c)| Expr::merge_recips(c, m)));
        }
        Expr(Arc::new(terms))
    }

    /// Rewrite a term so that it carries at most one reciprocal atom, to the
    /// first power, with all inverted reciprocals multiplied back out.
    fn merge_recips(c: Rational, m: Monomial) -> Expr {
        if !m.needs_recip_merge() {
            let mut terms = BTreeMap::new();
            terms.insert(m, c);
            return Expr(Arc::new(terms));
        }
        let mut rest = BTreeMap::new();
        let mut num = Expr::constant(c);
        let mut den = Expr::one();
        for (a, k) in m.0 {
            match a {
                Atom::Recip(e) if k > 0 => den = den.mul_expr(&e.powi(k)),
                Atom::Recip(e) => num = num.mul_expr(&e.powi(-k)),
                _ => {
                    rest.insert(a, k);
                }
            }
        }
        let rest = Expr::term(Rational::one(), Monomial(rest));
        rest.mul_expr(&num).mul_expr(&den.recip())
    }

    pub fn zero() -> Expr {
        Expr::from_terms(BTreeMap::new())
    }

    pub fn one() -> Expr {
        Expr::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Expr {
        Expr::term(c, Monomial::one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::constant(Rational::from_integer(BigInt::from(n)))
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::constant(rat(n, d))
    }

    pub fn sym(name: &str) -> Expr {
        Expr::atom(Atom::Sym(Arc::from(name)))
    }

    pub fn pi() -> Expr {
        Expr::atom(Atom::Pi)
    }

    pub fn atom(a: Atom) -> Expr {
        let mut map = BTreeMap::new();
        map.insert(a, 1);
        Expr::term(Rational::one(), Monomial::from_map(map))
    }

    pub fn term(c: Rational, m: Monomial) -> Expr {
        let mut terms = BTreeMap::new();
        terms.insert(m, c);
        Expr::from_terms(terms)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.0.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|c| c.is_one())
    }

    /// The rational value if the expression is a constant.
    pub fn as_rational(&self) -> Option<Rational> {
        match self.0.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.0.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn as_monomial(&self) -> Option<(&Rational, &Monomial)> {
        if self.0.len() == 1 {
            let (m, c) = self.0.iter().next().unwrap();
            Some((c, m))
        } else {
            None
        }
    }

    /// The atom if the expression is exactly one atom to the first power.
    pub fn single_atom(&self) -> Option<&Atom> {
        let (c, m) = self.as_monomial()?;
        if !c.is_one() || m.len() != 1 {
            return None;
        }
        let (a, k) = m.iter().next().unwrap();
        (k == 1).then_some(a)
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self.single_atom()? {
            Atom::Sym(s) => Some(s),
            _ => None,
        }
    }

    /// True when the leading term (in canonical order) has a negative coefficient.
    fn leading_negative(&self) -> bool {
        self.0.values().next().is_some_and(|c| c.is_negative())
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.0.keys().any(|m| m.depends_on(name))
    }

    pub fn symbols(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Arc<str>>) {
        for m in self.0.keys() {
            for (a, _) in m.iter() {
                match a {
                    Atom::Sym(s) => {
                        out.insert(s.clone());
                    }
                    _ => {
                        if let Some(e) = a.argument() {
                            e.collect_symbols(out);
                        }
                    }
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr::from_terms(self.0.iter().map(|(m, k)| (m.clone(), k * c)).collect())
    }

    pub fn add_expr(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let mut terms = (*self.0).clone();
        for (m, c) in other.0.iter() {
            let entry = terms.entry(m.clone()).or_insert_with(Rational::zero);
            *entry += c;
        }
        Expr::from_terms(terms)
    }

    pub fn mul_expr(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        let mut terms: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (m1, c1) in self.0.iter() {
            for (m2, c2) in other.0.iter() {
                let m = m1.mul(m2);
                *terms.entry(m).or_insert_with(Rational::zero) += c1 * c2;
            }
        }
        Expr::from_terms(terms)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut terms: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for e in items {
            for (m, c) in e.0.iter() {
                *terms.entry(m.clone()).or_insert_with(Rational::zero) += c;
            }
        }
        Expr::from_terms(terms)
    }

    pub fn product<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        items.into_iter().fold(Expr::one(), |acc, e| acc.mul_expr(&e))
    }

    /// Split `self = c * M * rest` where `c` is the leading coefficient, `M`
    /// the monomial gcd of all terms and `rest` has leading coefficient 1.
    fn factor_content(&self) -> (Rational, Monomial, Expr) {
        let lead = self.0.values().next().cloned().unwrap_or_else(Rational::one);
        let mut atoms: BTreeSet<&Atom> = BTreeSet::new();
        for m in self.0.keys() {
            for (a, _) in m.iter() {
                atoms.insert(a);
            }
        }
        let mut gcd = BTreeMap::new();
        for a in atoms {
            let min = self.0.keys().map(|m| m.exponent(a)).min().unwrap_or(0);
            if min != 0 {
                gcd.insert(a.clone(), min);
            }
        }
        // Raw monomial: gcd normalization would disturb the |a| bookkeeping.
        let gcd = Monomial(gcd);
        let inv_gcd = Monomial(gcd.0.iter().map(|(a, k)| (a.clone(), -k)).collect());
        let inv_lead = lead.recip();
        let rest = Expr::from_terms(
            self.0
                .iter()
                .map(|(m, c)| {
                    let mut map = m.0.clone();
                    for (a, k) in &inv_gcd.0 {
                        *map.entry(a.clone()).or_insert(0) += k;
                    }
                    map.retain(|_, k| *k != 0);
                    (Monomial(map), c * &inv_lead)
                })
                .collect(),
        );
        (lead, gcd, rest)
    }

    /// Multiplicative inverse. `1/0` is kept as an unevaluable reciprocal atom.
    pub fn recip(&self) -> Expr {
        if let Some((c, m)) = self.as_monomial() {
            return Expr::term(c.recip(), m.inverse());
        }
        if self.is_zero() {
            return Expr::atom(Atom::Recip(Expr::zero()));
        }
        let (c, gcd, rest) = self.factor_content();
        let base = Expr::term(c.recip(), Monomial::from_map(gcd.0).inverse());
        if let Some((rc, rm)) = rest.as_monomial() {
            return base.mul_expr(&Expr::term(rc.recip(), rm.inverse()));
        }
        base.mul_expr(&Expr::atom(Atom::Recip(rest)))
    }

    pub fn div_expr(&self, other: &Expr) -> Expr {
        self.mul_expr(&other.recip())
    }

    pub fn powi(&self, n: i64) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if let Some((c, m)) = self.as_monomial() {
            let c = if n > 0 {
                num_traits::pow(c.clone(), n as usize)
            } else {
                num_traits::pow(c.recip(), (-n) as usize)
            };
            return Expr::term(c, m.pow(n));
        }
        if n < 0 {
            return self.powi(-n).recip();
        }
        let base = self.clone();
        let mut acc = Expr::one();
        let mut sq = base;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_expr(&sq);
            }
            k >>= 1;
            if k > 0 {
                sq = sq.mul_expr(&sq);
            }
        }
        acc
    }

    pub fn sin(&self) -> Expr {
        if self.is_zero() {
            return Expr::zero();
        }
        if self.leading_negative() {
            return -Expr::atom(Atom::Sin(-self));
        }
        Expr::atom(Atom::Sin(self.clone()))
    }

    pub fn cos(&self) -> Expr {
        if self.is_zero() {
            return Expr::one();
        }
        if self.leading_negative() {
            return Expr::atom(Atom::Cos(-self));
        }
        Expr::atom(Atom::Cos(self.clone()))
    }

    pub fn tan(&self) -> Expr {
        if self.is_zero() {
            return Expr::zero();
        }
        if self.leading_negative() {
            return -Expr::atom(Atom::Tan(-self));
        }
        Expr::atom(Atom::Tan(self.clone()))
    }

    pub fn cot(&self) -> Expr {
        if self.leading_negative() {
            return -Expr::atom(Atom::Cot(-self));
        }
        Expr::atom(Atom::Cot(self.clone()))
    }

    pub fn exp(&self) -> Expr {
        if self.is_zero() {
            return Expr::one();
        }
        Expr::atom(Atom::Exp(self.clone()))
    }

    pub fn abs(&self) -> Expr {
        if self.is_zero() {
            return Expr::zero();
        }
        if let Some((c, m)) = self.as_monomial() {
            let mut out = Expr::constant(c.abs());
            for (a, k) in m.iter() {
                let f = match a {
                    Atom::Pi | Atom::Exp(_) | Atom::Abs(_) => Expr::atom(a.clone()),
                    Atom::Recip(e) => e.abs().recip(),
                    _ => Expr::atom(Atom::Abs(Expr::atom(a.clone()))),
                };
                out = out.mul_expr(&f.powi(k));
            }
            return out;
        }
        let (c, gcd, rest) = self.factor_content();
        let outer = Expr::term(c, Monomial::from_map(gcd.0)).abs();
        outer.mul_expr(&Expr::atom(Atom::Abs(rest)))
    }

    /// `log|self|`, expanded over the multiplicative structure.
    pub fn log_abs(&self) -> Expr {
        if self.is_zero() {
            return Expr::atom(Atom::LogAbs(Expr::zero()));
        }
        let (c, gcd, rest) = if let Some((c, m)) = self.as_monomial() {
            (c.clone(), m.clone(), Expr::one())
        } else {
            self.factor_content()
        };
        let mut parts = Vec::new();
        let c = c.abs();
        if !c.is_one() {
            parts.push(Expr::atom(Atom::LogAbs(Expr::constant(c))));
        }
        for (a, k) in gcd.iter() {
            let l = match a {
                Atom::Abs(e) => e.log_abs(),
                Atom::Exp(e) => e.clone(),
                Atom::Recip(e) => -e.log_abs(),
                _ => Expr::atom(Atom::LogAbs(Expr::atom(a.clone()))),
            };
            parts.push(l.scale(&Rational::from_integer(BigInt::from(k))));
        }
        if !rest.is_one() {
            parts.push(Expr::atom(Atom::LogAbs(rest)));
        }
        Expr::sum(parts)
    }

    pub fn hyp2f1(a: Rational, b: Rational, c: Rational, arg: Expr) -> Expr {
        if arg.is_zero() || a.is_zero() || b.is_zero() {
            return Expr::one();
        }
        Expr::atom(Atom::Hyp2f1 { a, b, c, arg })
    }

    /// Apply `f` to every atom bottom-up; atoms for which `f` returns `None`
    /// are rebuilt from their (transformed) arguments.
    pub fn map_atoms(&self, f: &dyn Fn(&Atom) -> Option<Expr>) -> Expr {
        let mut out = Vec::with_capacity(self.0.len());
        for (m, c) in self.0.iter() {
            let mut prod = Expr::constant(c.clone());
            for (a, k) in m.iter() {
                let rebuilt = match a.argument() {
                    Some(arg) => {
                        let new_arg = arg.map_atoms(f);
                        let atom_expr = if &new_arg == arg { Expr::atom(a.clone()) } else { a.with_argument(new_arg) };
                        match atom_expr.single_atom() {
                            Some(na) => f(na).unwrap_or(atom_expr),
                            None => atom_expr,
                        }
                    }
                    None => f(a).unwrap_or_else(|| Expr::atom(a.clone())),
                };
                prod = prod.mul_expr(&rebuilt.powi(k));
            }
            out.push(prod);
        }
        Expr::sum(out)
    }

    /// Replace the coordinate `name` by `value`.
    pub fn substitute(&self, name: &str, value: &Expr) -> Expr {
        if !self.depends_on(name) {
            return self.clone();
        }
        self.map_atoms(&|a| match a {
            Atom::Sym(s) if &**s == name => Some(value.clone()),
            _ => None,
        })
    }

    /// Polynomial coefficients in `name` if the expression is a polynomial in it.
    pub fn polynomial_coefficients(&self, name: &str) -> Option<Vec<Expr>> {
        let var = Atom::Sym(Arc::from(name));
        let mut coeffs: Vec<Expr> = Vec::new();
        for (m, c) in self.0.iter() {
            let k = m.exponent(&var);
            if k < 0 {
                return None;
            }
            let mut rest = m.0.clone();
            rest.remove(&var);
            if rest.keys().any(|a| a.depends_on(name)) {
                return None;
            }
            let k = k as usize;
            if coeffs.len() <= k {
                coeffs.resize(k + 1, Expr::zero());
            }
            coeffs[k] = coeffs[k].add_expr(&Expr::term(c.clone(), Monomial(rest)));
        }
        Some(coeffs)
    }

    pub fn rational_gcd_denominator(&self) -> BigInt {
        self.0.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Expr {
        Expr::constant(r)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $body(&self, &rhs)
            }
        }
        impl<'a> $tr<&'a Expr> for &'a Expr {
            type Output = Expr;
            fn $method(self, rhs: &'a Expr) -> Expr {
                $body(self, rhs)
            }
        }
        impl<'a> $tr<&'a Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &'a Expr) -> Expr {
                $body(&self, rhs)
            }
        }
    };
}

binop!(Add, add, |a: &Expr, b: &Expr| a.add_expr(b));
binop!(Sub, sub, |a: &Expr, b: &Expr| a.add_expr(&-b));
binop!(Mul, mul, |a: &Expr, b: &Expr| a.mul_expr(b));

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(&-Rational::one())
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}
