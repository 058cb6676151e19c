//! Darboux forms on moduli of flat connections in holonomy coordinates,
//! with an optional b-type marking and the b²-torus limit of the
//! desingularized family.

use std::sync::Arc;

use crate::chart::{ChartModel, Coordinate, SampleGrid};
use crate::desing::{convergence_report, desingularize, nondegeneracy_samples, DesingProfile};
use crate::error::{Error, Result};
use crate::expr::{parse_free, Expr};
use crate::forms::numeric::nondegeneracy_check;
use crate::forms::{Frame, SingularForm};

/// Holonomy coordinates `a_i, b_i` of a genus-`g` surface and the coordinate
/// carrying the b-type degeneration, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HolonomyChart {
    pub g: usize,
    pub marked: Vec<String>,
}

impl HolonomyChart {
    pub fn new(g: usize) -> Self {
        HolonomyChart { g, marked: vec![] }
    }

    pub fn with_mark(mut self, name: &str) -> Result<Self> {
        if !self.names().iter().any(|n| n == name) {
            return Err(Error::Marking(format!("`{name}` is not a holonomy coordinate for genus {}", self.g)));
        }
        self.marked.push(name.to_string());
        Ok(self)
    }

    /// `a, b` in genus one, `a1, b1, a2, b2, ...` otherwise.
    pub fn pair(&self, i: usize) -> (String, String) {
        if self.g == 1 {
            ("a".into(), "b".into())
        } else {
            (format!("a{i}"), format!("b{i}"))
        }
    }

    pub fn names(&self) -> Vec<String> {
        (1..=self.g)
            .flat_map(|i| {
                let (a, b) = self.pair(i);
                [a, b]
            })
            .collect()
    }

    fn chart(&self, defining: Option<&str>) -> Result<Arc<ChartModel>> {
        let coords = self.names().iter().map(|n| Coordinate::line(n)).collect();
        Ok(Arc::new(ChartModel::new(coords, defining, 1)?))
    }
}

/// `Σ db_i ∧ da_i`, checked closed and nondegenerate.
pub fn ab_form(hc: &HolonomyChart) -> Result<SingularForm> {
    if !hc.marked.is_empty() {
        return Err(Error::Marking("marked chart: use singular_ab_form".into()));
    }
    let chart = hc.chart(None)?;
    let terms = (1..=hc.g)
        .map(|i| {
            let (a, b) = hc.pair(i);
            Ok((vec![chart.require(&b)?, chart.require(&a)?], Expr::one()))
        })
        .collect::<Result<Vec<_>>>()?;
    let w = SingularForm::from_terms(chart.clone(), 2, Frame::Standard, terms)?;
    if !w.ext_d().is_zero_full() {
        return Err(Error::NonClosed(w.to_string()));
    }
    if hc.g > 0 {
        let n = if hc.g <= 2 { 3 } else { 2 };
        nondegeneracy_check(&w, 0, &SampleGrid::for_chart(&chart, n, 1.0).points())?.into_result()?;
    }
    Ok(w)
}

/// The b-form with the marked coordinate `x` as defining function: its block
/// becomes `db/b ∧ da` (or `db ∧ da/a`); other blocks are unchanged.
pub fn singular_ab_form(hc: &HolonomyChart) -> Result<SingularForm> {
    let mark = match hc.marked.as_slice() {
        [one] => one.clone(),
        [] => return Err(Error::Marking("no marked coordinate".into())),
        _ => return Err(Error::Marking(format!("{} marked coordinates, at most one allowed", hc.marked.len()))),
    };
    let chart = hc.chart(Some(&mark))?;
    let x = Expr::sym(&mark);
    let mut terms = Vec::new();
    for i in 1..=hc.g {
        let (a, b) = hc.pair(i);
        let c = if a == mark || b == mark { x.powi(-1) } else { Expr::one() };
        terms.push((vec![chart.require(&b)?, chart.require(&a)?], c));
    }
    let w = SingularForm::from_terms(chart.clone(), 2, Frame::Standard, terms)?;
    if !w.ext_d().is_zero_full() {
        return Err(Error::NonClosed(w.to_string()));
    }
    nondegeneracy_check(&w, 1, &nondegeneracy_samples(&chart, 1.0))?.into_result()?;
    Ok(w)
}

/// The surface form `dθ/sin²(θ/2) ∧ dφ` on a chart around `θ = 0`.
pub fn b2_torus_form() -> Result<SingularForm> {
    let chart = Arc::new(ChartModel::new(vec![Coordinate::line("theta"), Coordinate::angle("phi")], Some("theta"), 2)?);
    let c = parse_free("sin(theta/2)^-2")?;
    SingularForm::from_terms(chart, 2, Frame::Standard, vec![(vec![0, 1], c)])
}

#[derive(Clone, Debug, PartialEq)]
pub struct B2LimitRow {
    pub epsilon: f64,
    /// `ω_ε - ω` on `|θ| >= 0.5`.
    pub far_deviation: f64,
    /// Bivector deviation `Π_ε - Π` on `|θ| ∈ [ε/2, 2ε]`.
    pub near_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct B2LimitReport {
    pub rows: Vec<B2LimitRow>,
}

impl B2LimitReport {
    pub fn exact_outside(&self) -> bool {
        self.rows.iter().all(|r| r.far_deviation == 0.0)
    }

    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].near_deviation < w[0].near_deviation)
    }
}

fn band(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    let phis = SampleGrid::linspace(0.3, 5.9, 4);
    let mut out = Vec::new();
    for th in SampleGrid::linspace(lo, hi, n) {
        for &ph in &phis {
            out.push(vec![th, ph]);
            out.push(vec![-th, ph]);
        }
    }
    out
}

/// Desingularize the b²-torus form with the even `k = 1` family for each `ε`
/// (given in decreasing order) and compare with the singular form.
pub fn b2_limit_check(epsilons: &[f64]) -> Result<B2LimitReport> {
    if epsilons.is_empty() {
        return Err(Error::InvalidInput("empty epsilon list".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidInput(format!("epsilon {e} is not positive")));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("epsilon list must be decreasing".into()));
    }
    let w = b2_torus_form()?;
    let far = band(0.5, 3.0, 11);
    let mut rows = Vec::new();
    for &eps in epsilons {
        let de = desingularize(&w, &DesingProfile::even(1, eps)?)?;
        let far_deviation = de.agreement_deviation(&far, 0.5)?;
        let near = band(eps / 2.0, 2.0 * eps, 9);
        let report = convergence_report(&w, &[eps], &near)?;
        let near_deviation = report.iter().find(|r| r.order == 0).map_or(f64::NAN, |r| r.sup_deviation);
        rows.push(B2LimitRow { epsilon: eps, far_deviation, near_deviation });
    }
    Ok(B2LimitReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::decompose_2form;
    use crate::moment::{check_bm_hamiltonian, ActionSpec};

    fn lit(chart: &Arc<ChartModel>, terms: &[(&str, &[&str])]) -> SingularForm {
        let terms: Vec<(String, Vec<String>)> =
            terms.iter().map(|(c, t)| (c.to_string(), t.iter().map(|s| s.to_string()).collect())).collect();
        SingularForm::from_literal(chart.clone(), &terms).unwrap()
    }

    #[test]
    fn genus_forms() {
        let w1 = ab_form(&HolonomyChart::new(1)).unwrap();
        assert_eq!(w1, lit(w1.chart(), &[("1", &["db", "da"])]));
        let w2 = ab_form(&HolonomyChart::new(2)).unwrap();
        assert_eq!(w2, lit(w2.chart(), &[("1", &["db1", "da1"]), ("1", &["db2", "da2"])]));
        let w0 = ab_form(&HolonomyChart::new(0)).unwrap();
        assert_eq!(w0.chart().dim(), 0);
        assert!(w0.is_zero());
        for g in 3..=4 {
            assert!(ab_form(&HolonomyChart::new(g)).is_ok());
        }
        let marked = HolonomyChart::new(1).with_mark("b").unwrap();
        assert!(matches!(ab_form(&marked), Err(Error::Marking(_))));
    }

    #[test]
    fn singular_forms() {
        let hc = HolonomyChart::new(1).with_mark("b").unwrap();
        let w = singular_ab_form(&hc).unwrap();
        assert_eq!(w, lit(w.chart(), &[("1", &["db/b", "da"])]));
        let d = decompose_2form(&w, 8).unwrap();
        assert_eq!(d.alpha(1), &SingularForm::basis(w.chart().clone(), "a").unwrap());
        let a = ActionSpec::rotation(w.chart().clone(), "a").unwrap();
        assert!(check_bm_hamiltonian(&w, &a).is_ok());

        let hc2 = HolonomyChart::new(2).with_mark("b1").unwrap();
        let w2 = singular_ab_form(&hc2).unwrap();
        assert_eq!(w2, lit(w2.chart(), &[("1", &["db1/b1", "da1"]), ("1", &["db2", "da2"])]));
        assert!(matches!(singular_ab_form(&HolonomyChart::new(1)), Err(Error::Marking(_))));
        let twice = HolonomyChart::new(2).with_mark("b1").unwrap().with_mark("a2").unwrap();
        assert!(matches!(singular_ab_form(&twice), Err(Error::Marking(_))));
        assert!(HolonomyChart::new(1).with_mark("c").is_err());
    }

    #[test]
    fn b2_limit() {
        let r = b2_limit_check(&[0.2, 0.1, 0.05]).unwrap();
        assert!(r.exact_outside());
        assert!(r.decreasing(), "{r:?}");
        assert!(matches!(b2_limit_check(&[-0.1]), Err(Error::InvalidInput(_))));
    }
}
