//! Differential forms with singular coefficients on a chart.
//!
//! A form is a sparse map from strictly increasing coordinate multi-indices to
//! coefficient expressions. In the [`Frame::B`] frame the slot of the defining
//! coordinate `t` stands for the b^m-covector `dt/t^m` instead of `dt`.

pub mod numeric;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::chart::ChartModel;
use crate::error::{Error, Result};
use crate::expr::series::expand;
use crate::expr::{parse_expr, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Standard,
    /// `{dt/t^m, dx_2, ...}`
    B(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SingularForm {
    chart: Arc<ChartModel>,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
    frame: Frame,
}

/// Sort a multi-index, returning the permutation sign, or `None` on a repeat.
fn sort_index(idx: &[usize]) -> Option<(Vec<usize>, i64)> {
    let mut v = idx.to_vec();
    let mut sign = 1;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                sign = -sign;
            } else if v[j] == v[j + 1] {
                return None;
            }
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

impl SingularForm {
    pub fn zero(chart: Arc<ChartModel>, degree: usize) -> Self {
        SingularForm { chart, degree, terms: BTreeMap::new(), frame: Frame::Standard }
    }

    pub fn zero_in(chart: Arc<ChartModel>, degree: usize, frame: Frame) -> Self {
        SingularForm { chart, degree, terms: BTreeMap::new(), frame }
    }

    pub fn scalar(chart: Arc<ChartModel>, f: Expr) -> Self {
        SingularForm::from_terms(chart, 0, Frame::Standard, vec![(vec![], f)]).expect("0-form")
    }

    /// The coordinate 1-form `d<name>`.
    pub fn basis(chart: Arc<ChartModel>, name: &str) -> Result<Self> {
        let i = chart.require(name)?;
        SingularForm::from_terms(chart, 1, Frame::Standard, vec![(vec![i], Expr::one())])
    }

    /// Build a form from (multi-index, coefficient) pairs in any order.
    pub fn from_terms(
        chart: Arc<ChartModel>,
        degree: usize,
        frame: Frame,
        terms: Vec<(Vec<usize>, Expr)>,
    ) -> Result<Self> {
        let mut out = SingularForm::zero_in(chart, degree, frame);
        for (idx, c) in terms {
            if idx.len() != degree {
                return Err(Error::InvalidInput(format!("multi-index {idx:?} in a {degree}-form")));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= out.chart.dim()) {
                return Err(Error::InvalidInput(format!("coordinate index {bad} out of range")));
            }
            out.add_term(&idx, c);
        }
        Ok(out)
    }

    fn add_term(&mut self, idx: &[usize], c: Expr) {
        if c.is_zero() {
            return;
        }
        let Some((sorted, sign)) = sort_index(idx) else { return };
        let c = if sign < 0 { -c } else { c };
        let entry = self.terms.entry(sorted).or_insert_with(Expr::zero);
        *entry = &*entry + &c;
        self.terms.retain(|_, v| !v.is_zero());
    }

    /// Parse manifest-style terms: a coefficient and a list of basis tags such
    /// as `dtheta` or `dh/h^2`.
    pub fn from_literal(chart: Arc<ChartModel>, terms: &[(String, Vec<String>)]) -> Result<Self> {
        let degree = terms.first().map(|t| t.1.len()).unwrap_or(0);
        let mut out = SingularForm::zero(chart.clone(), degree);
        for (coeff, tags) in terms {
            if tags.len() != degree {
                return Err(Error::InvalidInput("form terms of mixed degree".into()));
            }
            let mut c = parse_expr(coeff, &chart)?;
            let mut idx = Vec::with_capacity(tags.len());
            for tag in tags {
                let (i, factor) = parse_basis_tag(tag, &chart)?;
                idx.push(i);
                c = c * factor;
            }
            out.add_term(&idx, c);
        }
        Ok(out)
    }

    pub fn chart(&self) -> &Arc<ChartModel> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, &Expr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, idx: &[usize]) -> Expr {
        match sort_index(idx) {
            Some((sorted, sign)) => {
                let c = self.terms.get(&sorted).cloned().unwrap_or_else(Expr::zero);
                if sign < 0 {
                    -c
                } else {
                    c
                }
            }
            None => Expr::zero(),
        }
    }

    /// Coefficient by coordinate names.
    pub fn coeff_named(&self, names: &[&str]) -> Result<Expr> {
        let idx = names.iter().map(|n| self.chart.require(n)).collect::<Result<Vec<_>>>()?;
        Ok(self.coeff(&idx))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Zero after the named rewrites are applied to every coefficient.
    pub fn is_zero_full(&self) -> bool {
        self.terms.values().all(Expr::is_zero_full)
    }

    pub fn map_coeffs(&self, f: impl Fn(&Expr) -> Expr) -> SingularForm {
        let mut out = SingularForm::zero_in(self.chart.clone(), self.degree, self.frame);
        for (idx, c) in &self.terms {
            out.add_term(idx, f(c));
        }
        out
    }

    pub fn simplify_full(&self) -> SingularForm {
        self.map_coeffs(Expr::simplify_full)
    }

    fn check_compatible(&self, other: &SingularForm) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::CoframeMismatch("forms live on different charts".into()));
        }
        if self.frame != other.frame && !(self.degree == 0 || other.degree == 0) {
            return Err(Error::CoframeMismatch(format!("{:?} vs {:?}", self.frame, other.frame)));
        }
        Ok(())
    }

    fn joint_frame(&self, other: &SingularForm) -> Frame {
        if self.degree == 0 && other.degree > 0 {
            other.frame
        } else {
            self.frame
        }
    }

    pub fn add(&self, other: &SingularForm) -> Result<SingularForm> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(Error::InvalidInput(format!("adding a {}-form to a {}-form", self.degree, other.degree)));
        }
        let mut out = self.clone();
        out.frame = self.joint_frame(other);
        for (idx, c) in &other.terms {
            out.add_term(idx, c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SingularForm) -> Result<SingularForm> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> SingularForm {
        self.map_coeffs(|c| -c)
    }

    pub fn scale(&self, f: &Expr) -> SingularForm {
        self.map_coeffs(|c| c * f)
    }

    pub fn wedge(&self, other: &SingularForm) -> Result<SingularForm> {
        self.check_compatible(other)?;
        let mut out = SingularForm::zero_in(self.chart.clone(), self.degree + other.degree, self.joint_frame(other));
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                let mut idx = i.clone();
                idx.extend(j);
                out.add_term(&idx, a * b);
            }
        }
        Ok(out)
    }

    /// Index of the defining coordinate when the b-frame is active.
    fn b_slot(&self) -> Option<(usize, u32)> {
        match self.frame {
            Frame::Standard => None,
            Frame::B(m) => self.chart.defining_index().map(|t| (t, m)),
        }
    }

    /// Differential of a function expressed in this form's frame.
    fn d_scalar(&self, f: &Expr) -> Vec<(usize, Expr)> {
        let slot = self.b_slot();
        (0..self.chart.dim())
            .filter_map(|j| {
                let name = self.chart.name(j);
                if !f.depends_on(name) {
                    return None;
                }
                let mut c = f.diff(name);
                if let Some((t, m)) = slot {
                    if t == j {
                        c = c * Expr::sym(name).powi(m as i64);
                    }
                }
                Some((j, c))
            })
            .collect()
    }

    /// Exterior derivative; `d(dt/t^m) = 0` in the b-frame.
    pub fn ext_d(&self) -> SingularForm {
        let mut out = SingularForm::zero_in(self.chart.clone(), self.degree + 1, self.frame);
        for (idx, c) in &self.terms {
            for (j, dc) in self.d_scalar(c) {
                let mut full = vec![j];
                full.extend(idx);
                out.add_term(&full, dc);
            }
        }
        out
    }

    /// Contraction `ι_v`.
    pub fn interior(&self, v: &VectorFieldExpr) -> Result<SingularForm> {
        if *v.chart != *self.chart {
            return Err(Error::CoframeMismatch("vector field on a different chart".into()));
        }
        if self.degree == 0 {
            return Ok(SingularForm::zero_in(self.chart.clone(), 0, self.frame));
        }
        let slot = self.b_slot();
        let pairing = |i: usize| -> Expr {
            let mut c = v.comps[i].clone();
            if let Some((t, m)) = slot {
                if t == i {
                    c = c * Expr::sym(self.chart.name(t)).powi(-(m as i64));
                }
            }
            c
        };
        let mut out = SingularForm::zero_in(self.chart.clone(), self.degree - 1, self.frame);
        for (idx, c) in &self.terms {
            for (k, &i) in idx.iter().enumerate() {
                if v.comps[i].is_zero() {
                    continue;
                }
                let mut rest = idx.clone();
                rest.remove(k);
                let val = c * &pairing(i);
                out.add_term(&rest, if k % 2 == 0 { val } else { -val });
            }
        }
        Ok(out)
    }

    /// Lie derivative through the Cartan formula.
    pub fn lie(&self, v: &VectorFieldExpr) -> Result<SingularForm> {
        let a = self.ext_d().interior(v)?;
        let b = self.interior(v)?.ext_d();
        a.add(&b)
    }

    /// Express the form against `{dt/t^m, dx_2, ...}`.
    pub fn to_b_coframe(&self, m: u32) -> Result<SingularForm> {
        let (t, tname) = self.chart.require_defining()?;
        let standard = self.to_standard();
        let mut out = SingularForm::zero_in(self.chart.clone(), self.degree, Frame::B(m));
        let tt = Expr::sym(tname);
        for (idx, c) in &standard.terms {
            let has_t = idx.contains(&t);
            let val = valuation(c, tname, 1)?;
            if has_t && val < -(m as i64) {
                return Err(Error::OrderMismatch { coord: tname.to_string(), found: -val, m });
            }
            if !has_t && val < 0 {
                return Err(Error::NotBmForm(format!("pole of order {} in a slot without d{tname}", -val)));
            }
            let c = if has_t { c * &tt.powi(m as i64) } else { c.clone() };
            out.add_term(idx, c);
        }
        Ok(out)
    }

    /// Express the form against the ordinary coordinate coframe.
    pub fn to_standard(&self) -> SingularForm {
        match self.b_slot() {
            None => {
                let mut out = self.clone();
                out.frame = Frame::Standard;
                out
            }
            Some((t, m)) => {
                let tt = Expr::sym(self.chart.name(t)).powi(-(m as i64));
                let mut out = SingularForm::zero_in(self.chart.clone(), self.degree, Frame::Standard);
                for (idx, c) in &self.terms {
                    out.add_term(idx, if idx.contains(&t) { c * &tt } else { c.clone() });
                }
                out
            }
        }
    }

    /// Replace a coordinate by an expression in the coefficients only.
    pub fn substitute(&self, name: &str, value: &Expr) -> SingularForm {
        self.map_coeffs(|c| c.substitute(name, value))
    }

    /// Move the form to another chart containing all coordinates it uses.
    pub fn transfer(&self, chart: Arc<ChartModel>) -> Result<SingularForm> {
        let std = self.to_standard();
        let mut out = SingularForm::zero(chart.clone(), self.degree);
        for (idx, c) in &std.terms {
            let new_idx = idx.iter().map(|&i| chart.require(self.chart.name(i))).collect::<Result<Vec<_>>>()?;
            for s in c.symbols() {
                if !chart.contains(&s) {
                    return Err(Error::UnknownCoordinate(s.to_string()));
                }
            }
            out.add_term(&new_idx, c.clone());
        }
        Ok(out)
    }

    /// Whether any coefficient depends on `name`.
    pub fn depends_on(&self, name: &str) -> bool {
        self.terms.values().any(|c| c.depends_on(name))
    }

    /// Whether the multi-index of any term involves `name`.
    pub fn uses_slot(&self, name: &str) -> bool {
        self.chart.index_of(name).is_some_and(|i| self.terms.keys().any(|idx| idx.contains(&i)))
    }
}

/// Order of vanishing of `c` in `t`, capped at `upto` (negative for poles).
pub fn valuation(c: &Expr, t: &str, upto: i64) -> Result<i64> {
    if !c.depends_on(t) {
        return Ok(if c.is_zero() { upto } else { 0.min(upto) });
    }
    let s = expand(c, t, upto).map_err(|e| Error::NotBmForm(format!("coefficient {c}: {e}")))?;
    if !s.log.is_zero() {
        return Err(Error::NotBmForm(format!("logarithmic coefficient {c}")));
    }
    Ok(if s.coeffs.is_empty() { s.prec() } else { s.val.min(upto) })
}

/// Parse a basis tag: `d<coord>` or `d<coord>/<coord>^<j>` (j defaults to 1).
pub fn parse_basis_tag(tag: &str, chart: &ChartModel) -> Result<(usize, Expr)> {
    let tag = tag.trim();
    let bad = || Error::InvalidInput(format!("malformed basis tag `{tag}`"));
    let body = tag.strip_prefix('d').ok_or_else(bad)?;
    let (coord, denom) = match body.split_once('/') {
        None => (body.trim(), None),
        Some((c, d)) => (c.trim(), Some(d.trim())),
    };
    let i = chart.require(coord)?;
    let factor = match denom {
        None => Expr::one(),
        Some(d) => {
            let (base, pow) = match d.split_once('^') {
                None => (d, 1),
                Some((b, p)) => (b.trim(), p.trim().parse::<i64>().map_err(|_| Error::NonIntegerExponent(p.to_string()))?),
            };
            if !chart.contains(base) {
                return Err(Error::UnknownCoordinate(base.to_string()));
            }
            Expr::sym(base).powi(-pow)
        }
    };
    Ok((i, factor))
}

impl fmt::Display for SingularForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let slot = self.b_slot();
        for (n, (idx, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for &i in idx {
                let name = self.chart.name(i);
                match slot {
                    Some((t, m)) if t == i => write!(f, " d{name}/{name}^{m}")?,
                    _ => write!(f, " d{name}")?,
                }
            }
        }
        Ok(())
    }
}

/// Vector field with components against the coordinate frame.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldExpr {
    pub chart: Arc<ChartModel>,
    pub comps: Vec<Expr>,
}

impl VectorFieldExpr {
    pub fn new(chart: Arc<ChartModel>, comps: Vec<Expr>) -> Result<Self> {
        if comps.len() != chart.dim() {
            return Err(Error::InvalidInput(format!("{} components on a {}-dimensional chart", comps.len(), chart.dim())));
        }
        Ok(VectorFieldExpr { chart, comps })
    }

    pub fn zero(chart: Arc<ChartModel>) -> Self {
        let n = chart.dim();
        VectorFieldExpr { chart, comps: vec![Expr::zero(); n] }
    }

    /// The coordinate field `∂/∂<name>`.
    pub fn coordinate(chart: Arc<ChartModel>, name: &str) -> Result<Self> {
        let i = chart.require(name)?;
        let mut v = VectorFieldExpr::zero(chart);
        v.comps[i] = Expr::one();
        Ok(v)
    }

    /// From `(coordinate, component)` pairs; unspecified components are zero.
    pub fn from_pairs(chart: Arc<ChartModel>, pairs: &[(&str, Expr)]) -> Result<Self> {
        let mut v = VectorFieldExpr::zero(chart.clone());
        for (name, c) in pairs {
            let i = chart.require(name)?;
            v.comps[i] = &v.comps[i] + c;
        }
        Ok(v)
    }

    pub fn component(&self, name: &str) -> Expr {
        self.chart.index_of(name).map(|i| self.comps[i].clone()).unwrap_or_else(Expr::zero)
    }

    /// Directional derivative `v(f)`.
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(
            self.comps
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| c * &f.diff(self.chart.name(i))),
        )
    }

    pub fn bracket(&self, other: &VectorFieldExpr) -> VectorFieldExpr {
        let comps = (0..self.chart.dim())
            .map(|i| (self.apply(&other.comps[i]) - other.apply(&self.comps[i])).simplify_full())
            .collect();
        VectorFieldExpr { chart: self.chart.clone(), comps }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    /// Whether the `t`-component vanishes to order `m` at `t = 0`.
    pub fn is_bm(&self, m: u32) -> Result<bool> {
        let (t, name) = self.chart.require_defining()?;
        let c = &self.comps[t];
        if c.is_zero() {
            return Ok(true);
        }
        Ok(valuation(c, name, m as i64)? >= m as i64)
    }

    pub fn parse(chart: Arc<ChartModel>, pairs: &[(String, String)]) -> Result<Self> {
        let mut v = VectorFieldExpr::zero(chart.clone());
        for (name, text) in pairs {
            let i = chart.require(name)?;
            v.comps[i] = &v.comps[i] + &parse_expr(text, &chart)?;
        }
        Ok(v)
    }
}

impl fmt::Display for VectorFieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({c}) d/d{}", self.chart.name(i))?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Coordinate;
    use crate::expr::parse_free;

    fn sphere(m: u32) -> Arc<ChartModel> {
        Arc::new(ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), m).unwrap())
    }

    fn torus() -> Arc<ChartModel> {
        Arc::new(ChartModel::new(vec![Coordinate::line("theta1"), Coordinate::angle("theta2")], Some("theta1"), 2).unwrap())
    }

    fn lit(chart: &Arc<ChartModel>, terms: &[(&str, &[&str])]) -> SingularForm {
        let terms: Vec<(String, Vec<String>)> =
            terms.iter().map(|(c, t)| (c.to_string(), t.iter().map(|s| s.to_string()).collect())).collect();
        SingularForm::from_literal(chart.clone(), &terms).unwrap()
    }

    #[test]
    fn wedge_examples() {
        let c = sphere(2);
        let a = lit(&c, &[("1", &["dh/h^2"])]);
        let b = SingularForm::basis(c.clone(), "theta").unwrap();
        let w = a.wedge(&b).unwrap();
        assert_eq!(w.coeff_named(&["h", "theta"]).unwrap(), parse_free("h^-2").unwrap());
        assert!(b.wedge(&b).unwrap().is_zero());
        assert_eq!(b.wedge(&a).unwrap(), w.neg());
    }

    #[test]
    fn exterior_derivative_examples() {
        let c = torus();
        let f = SingularForm::scalar(c.clone(), parse_free("-cot(theta1)").unwrap());
        let df = f.ext_d();
        assert_eq!(df.coeff_named(&["theta1"]).unwrap(), parse_free("sin(theta1)^-2").unwrap());
        let xy = Arc::new(ChartModel::lines(&["x", "y"], None, 1).unwrap());
        let a = lit(&xy, &[("x", &["dy"])]);
        assert_eq!(a.ext_d(), lit(&xy, &[("1", &["dx", "dy"])]));
        let w = lit(&sphere(2), &[("1", &["dh/h^2", "dtheta"])]);
        assert!(w.ext_d().is_zero());
    }

    #[test]
    fn interior_examples() {
        for m in 1..=3 {
            let c = sphere(m);
            let tag = format!("dh/h^{m}");
            let w = lit(&c, &[("1", &[tag.as_str(), "dtheta"])]);
            let v = VectorFieldExpr::coordinate(c.clone(), "theta").unwrap();
            assert_eq!(w.interior(&v).unwrap(), lit(&c, &[("-1", &[tag.as_str()])]));
        }
        let c = torus();
        let w = lit(&c, &[("sin(theta1)^-2", &["dtheta1", "dtheta2"])]);
        let v = VectorFieldExpr::coordinate(c.clone(), "theta2").unwrap();
        assert_eq!(w.interior(&v).unwrap(), lit(&c, &[("-sin(theta1)^-2", &["dtheta1"])]));
        let f = SingularForm::scalar(c.clone(), Expr::sym("theta1"));
        assert!(f.interior(&v).unwrap().is_zero());
    }

    #[test]
    fn b_coframe_examples() {
        let c = sphere(2);
        let w = lit(&c, &[("1", &["dh/h^2", "dtheta"])]);
        let b = w.to_b_coframe(2).unwrap();
        assert_eq!(b.coeff(&[0, 1]), Expr::one());
        assert_eq!(b.to_standard(), w);
        let t = torus();
        let w = lit(&t, &[("sin(theta1)^-2", &["dtheta1", "dtheta2"])]);
        let b = w.to_b_coframe(2).unwrap();
        assert_eq!(b.coeff(&[0, 1]), parse_free("theta1^2*sin(theta1)^-2").unwrap());
        let bad = lit(&c, &[("1", &["dh/h^3", "dtheta"])]);
        assert!(matches!(bad.to_b_coframe(2), Err(Error::OrderMismatch { found: 3, m: 2, .. })));
    }

    #[test]
    fn b_frame_derivative_and_contraction_agree_with_standard() {
        let c = sphere(2);
        let f = SingularForm::scalar(c.clone(), parse_free("h^3*sin(theta) - 1/h").unwrap());
        let std_d = f.ext_d();
        let b_zero = SingularForm::zero_in(c.clone(), 0, Frame::B(2));
        let fb = b_zero.add(&f).unwrap();
        assert_eq!(fb.frame(), Frame::B(2));
        let mut in_b = fb.ext_d();
        assert_eq!(in_b.to_standard(), std_d);
        in_b = in_b.wedge(&SingularForm::basis(c.clone(), "theta").unwrap().to_b_coframe(2).unwrap()).unwrap();
        let v = VectorFieldExpr::from_pairs(c.clone(), &[("h", parse_free("h^2").unwrap())]).unwrap();
        assert_eq!(in_b.interior(&v).unwrap().to_standard(), in_b.to_standard().interior(&v).unwrap());
    }

    #[test]
    fn vector_field_checks() {
        let c = sphere(2);
        let v = VectorFieldExpr::from_pairs(c.clone(), &[("h", parse_free("h^2").unwrap())]).unwrap();
        assert!(v.is_bm(2).unwrap());
        let v = VectorFieldExpr::from_pairs(c.clone(), &[("h", parse_free("h").unwrap())]).unwrap();
        assert!(!v.is_bm(2).unwrap());
        let a = VectorFieldExpr::coordinate(c.clone(), "theta").unwrap();
        assert!(a.bracket(&v).is_zero());
    }
}
