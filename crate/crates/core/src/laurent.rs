//! Semilocal decomposition `ω = Σ_j (dt/t^j) ∧ α_j + β` of a closed 2-form.

use std::sync::Arc;

use crate::chart::{ChartModel, SampleGrid};
use crate::error::{Error, Result};
use crate::expr::series::{expand, taylor_polynomial, NearEvaluator};
use crate::expr::{Env, Expr};
use crate::forms::numeric::CompiledForm;
use crate::forms::numeric::FormField;
use crate::forms::{valuation, SingularForm, VectorFieldExpr};

pub const DEFAULT_ORDER: i64 = 8;

#[derive(Clone, Debug)]
pub struct LaurentDecomposition {
    pub chart: Arc<ChartModel>,
    pub t: String,
    pub m: u32,
    /// `alphas[j - 1]` is `α_j`; coefficients are independent of `t` and no
    /// term involves `dt`.
    pub alphas: Vec<SingularForm>,
    /// The remainder, kept exactly; its coefficients are finite at `t = 0`.
    pub beta: SingularForm,
    pub order: i64,
}

/// Decompose a closed singular 2-form on a chart with a defining coordinate.
pub fn decompose_2form(w: &SingularForm, order: i64) -> Result<LaurentDecomposition> {
    let chart = w.chart().clone();
    let (ti, t) = chart.require_defining()?;
    let t = t.to_string();
    let t = t.as_str();
    let m = chart.m();
    if w.degree() != 2 {
        return Err(Error::InvalidInput(format!("Laurent decomposition of a {}-form", w.degree())));
    }
    let w = w.to_standard();
    let dw = w.ext_d();
    if !dw.is_zero_full() {
        return Err(Error::NonClosed(dw.to_string()));
    }
    let tt = Expr::sym(t);
    let mut alpha_terms: Vec<Vec<(Vec<usize>, Expr)>> = vec![Vec::new(); m as usize];
    let mut beta_terms = Vec::new();
    for (idx, c) in w.terms() {
        if !idx.contains(&ti) {
            if valuation(c, t, 1)? < 0 {
                return Err(Error::NotBmForm(format!("pole in the d{}^d{} slot", chart.name(idx[0]), chart.name(idx[1]))));
            }
            beta_terms.push((idx.clone(), c.clone()));
            continue;
        }
        let k = if idx[0] == ti { idx[1] } else { idx[0] };
        // coefficient of dt ^ dx_k
        let c = w.coeff(&[ti, k]);
        let s = expand(&c, t, 1).map_err(|e| Error::NotBmForm(format!("coefficient {c}: {e}")))?;
        if !s.log.is_zero() {
            return Err(Error::NotBmForm(format!("logarithmic coefficient {c}")));
        }
        if !s.coeffs.is_empty() && s.val < -(m as i64) {
            return Err(Error::OrderMismatch { coord: t.to_string(), found: -s.val, m });
        }
        let mut principal = Vec::new();
        for j in 1..=m as i64 {
            let a = s.coeff(-j);
            if !a.is_zero() {
                principal.push(&a * &tt.powi(-j));
                alpha_terms[j as usize - 1].push((vec![k], a));
            }
        }
        beta_terms.push((vec![ti, k], c - Expr::sum(principal)));
    }
    let alphas = alpha_terms
        .into_iter()
        .map(|terms| SingularForm::from_terms(chart.clone(), 1, crate::forms::Frame::Standard, terms))
        .collect::<Result<Vec<_>>>()?;
    let beta = SingularForm::from_terms(chart.clone(), 2, crate::forms::Frame::Standard, beta_terms)?;
    let d = LaurentDecomposition { chart, t: t.to_string(), m, alphas, beta, order };
    for (j, a) in d.alphas.iter().enumerate() {
        if !a.ext_d().is_zero_full() {
            return Err(Error::NonClosed(format!("alpha_{} = {a}", j + 1)));
        }
    }
    Ok(d)
}

impl LaurentDecomposition {
    pub fn alpha(&self, j: usize) -> &SingularForm {
        &self.alphas[j - 1]
    }

    /// `Σ_j (dt/t^j) ∧ α_j + β`.
    pub fn reconstruct(&self) -> Result<SingularForm> {
        let tt = Expr::sym(&self.t);
        let dt = SingularForm::basis(self.chart.clone(), &self.t)?;
        let mut out = self.beta.clone();
        for (j, a) in self.alphas.iter().enumerate() {
            let term = dt.scale(&tt.powi(-(j as i64 + 1))).wedge(a)?;
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// `β` with coefficients replaced by their Taylor polynomials in `t`
    /// through `t^order`.
    pub fn beta_taylor(&self, order: i64) -> Result<SingularForm> {
        let mut terms = Vec::new();
        for (idx, c) in self.beta.terms() {
            let s = expand(c, &self.t, order + 1)?;
            terms.push((idx.clone(), taylor_polynomial(&s, &self.t, order + 1)));
        }
        SingularForm::from_terms(self.chart.clone(), 2, crate::forms::Frame::Standard, terms)
    }

    /// Forms in the reindexed convention `ω = dt/t^m ∧ Σ_i t^i α'_i + β`,
    /// i.e. `α'_i = α_{m-i}` for `i = 0..m-1`.
    pub fn reindexed(&self) -> Vec<SingularForm> {
        (0..self.m as usize).map(|i| self.alphas[self.m as usize - 1 - i].clone()).collect()
    }

    /// Inverse of [`reindexed`](Self::reindexed).
    pub fn from_reindexed(&self, forms: Vec<SingularForm>) -> LaurentDecomposition {
        let mut alphas = forms;
        alphas.reverse();
        LaurentDecomposition { alphas, ..self.clone() }
    }

    pub fn highest_weight_nonzero(&self) -> bool {
        !self.alphas.last().is_some_and(SingularForm::is_zero)
    }

    /// Max absolute coefficient difference between the reconstruction and
    /// `source` at points off `t = 0`.
    pub fn residual(&self, source: &SingularForm, points: &[Vec<f64>]) -> Result<f64> {
        let rec = CompiledForm::new(&self.reconstruct()?)?;
        residual_between(&rec, &CompiledForm::new(&source.to_standard())?, &self.chart, points)
    }

    /// Residual when `β` is replaced by its Taylor polynomial of the given
    /// order; fails with `TruncationInsufficient` above `tolerance`.
    pub fn truncation_residual(&self, source: &SingularForm, points: &[Vec<f64>], tolerance: f64) -> Result<f64> {
        let truncated = LaurentDecomposition { beta: self.beta_taylor(self.order)?, ..self.clone() };
        let r = truncated.residual(source, points)?;
        if r > tolerance {
            return Err(Error::TruncationInsufficient { residual: r, tolerance });
        }
        Ok(r)
    }

    /// Slice sample points (`t = 0`) used for weight constancy.
    pub fn slice_points(&self, n: usize) -> Vec<Vec<f64>> {
        let ti = self.chart.defining_index().expect("decomposition has a defining coordinate");
        let mut bounds = SampleGrid::chart_bounds(&self.chart, 0.0);
        bounds[ti] = (0.0, 0.0);
        SampleGrid::halton(&bounds, n)
    }

    /// `a_j(ξ) = α_j(ξ)` on the slice, required to be constant.
    pub fn modular_weight(&self, j: usize, xi: &VectorFieldExpr) -> Result<f64> {
        if j == 0 || j > self.m as usize {
            return Err(Error::InvalidInput(format!("weight index {j} outside 1..={}", self.m)));
        }
        let pairing = self.alpha(j).interior(xi)?;
        let value = pairing.coeff(&[]).substitute(&self.t, &Expr::zero()).simplify_full();
        if let Some(r) = value.as_rational() {
            return Ok(crate::expr::rat_to_f64(&r));
        }
        let ev = NearEvaluator::new(value.clone(), None);
        let mut vals = Vec::new();
        for p in self.slice_points(64) {
            vals.push(ev.eval(&Env::from_chart(&self.chart, &p))?);
        }
        let first = vals[0];
        let dev = vals.iter().map(|v| (v - first).abs()).fold(0.0, f64::max);
        if dev >= 1e-9 {
            return Err(Error::NonConstantWeight(dev));
        }
        Ok(first)
    }
}

fn residual_between(a: &CompiledForm, b: &CompiledForm, chart: &ChartModel, points: &[Vec<f64>]) -> Result<f64> {
    let ti = chart.defining_index();
    let mut worst: f64 = 0.0;
    for p in points {
        if ti.is_some_and(|i| p[i] == 0.0) {
            continue;
        }
        let diff = a.matrix_at(p)? - b.matrix_at(p)?;
        worst = worst.max(diff.amax());
    }
    Ok(worst)
}

/// Grid with `|t| <= t_max`, `n` points per axis.
pub fn residual_grid(chart: &ChartModel, n: usize, t_max: f64) -> Vec<Vec<f64>> {
    SampleGrid::for_chart(chart, n, t_max).points()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Coordinate;
    use crate::expr::parse_free;

    fn lit(chart: &Arc<ChartModel>, terms: &[(&str, &[&str])]) -> SingularForm {
        let terms: Vec<(String, Vec<String>)> =
            terms.iter().map(|(c, t)| (c.to_string(), t.iter().map(|s| s.to_string()).collect())).collect();
        SingularForm::from_literal(chart.clone(), &terms).unwrap()
    }

    #[test]
    fn sphere_m2() {
        let c = Arc::new(ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), 2).unwrap());
        let w = lit(&c, &[("1", &["dh/h^2", "dtheta"])]);
        let d = decompose_2form(&w, 8).unwrap();
        assert_eq!(d.alpha(2), &SingularForm::basis(c.clone(), "theta").unwrap());
        assert!(d.alpha(1).is_zero());
        assert!(d.beta.is_zero());
        assert_eq!(d.reconstruct().unwrap(), w);
        let xi = VectorFieldExpr::coordinate(c.clone(), "theta").unwrap();
        assert_eq!(d.modular_weight(2, &xi).unwrap(), 1.0);
        assert_eq!(d.modular_weight(1, &xi).unwrap(), 0.0);
    }

    #[test]
    fn torus_beta_constant_term() {
        let c = Arc::new(
            ChartModel::new(vec![Coordinate::line("theta1"), Coordinate::angle("theta2")], Some("theta1"), 2).unwrap(),
        );
        let w = lit(&c, &[("sin(theta1)^-2", &["dtheta1", "dtheta2"])]);
        let d = decompose_2form(&w, 8).unwrap();
        assert_eq!(d.alpha(2), &SingularForm::basis(c.clone(), "theta2").unwrap());
        let bt = d.beta_taylor(2).unwrap();
        assert_eq!(bt.coeff(&[0, 1]), parse_free("1/3 + 1/15*theta1^2").unwrap());
        let grid = residual_grid(&c, 11, 0.5);
        assert!(d.residual(&w, &grid).unwrap() < 1e-12);
        let re = d.from_reindexed(d.reindexed());
        assert_eq!(re.alphas, d.alphas);
    }

    #[test]
    fn smooth_form_goes_to_beta() {
        let c = Arc::new(ChartModel::lines(&["x", "y"], Some("x"), 1).unwrap());
        let w = lit(&c, &[("1", &["dx", "dy"])]);
        let d = decompose_2form(&w, 8).unwrap();
        assert!(d.alphas.iter().all(SingularForm::is_zero));
        assert_eq!(d.beta, w);
    }

    #[test]
    fn rejects_bad_input() {
        let c = Arc::new(ChartModel::lines(&["t", "x", "y"], Some("t"), 1).unwrap());
        let not_closed = lit(&c, &[("x", &["dt", "dy"])]);
        assert!(matches!(decompose_2form(&not_closed, 8), Err(Error::NonClosed(_))));
        let pole = lit(&c, &[("1/t", &["dx", "dy"])]);
        assert!(matches!(decompose_2form(&pole, 8), Err(Error::NotBmForm(_)) | Err(Error::NonClosed(_))));
    }
}
