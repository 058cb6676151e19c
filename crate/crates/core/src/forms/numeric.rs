//! Pointwise numeric evaluation of 2-forms: coefficient matrices, Pfaffians,
//! nondegeneracy reports and inversion to bivectors.

use nalgebra::DMatrix;

use super::{Frame, SingularForm};
use crate::chart::ChartModel;
use crate::error::{Error, Result};
use crate::expr::series::NearEvaluator;
use crate::expr::Env;

/// Anything that yields an antisymmetric coefficient matrix at a point.
pub trait FormField {
    fn dim(&self) -> usize;
    fn matrix_at(&self, p: &[f64]) -> Result<DMatrix<f64>>;
}

/// A 2-form with coefficients prepared for repeated evaluation. Points close
/// to `t = 0` are evaluated through Laurent expansions, so removable
/// singularities of b-frame coefficients are handled.
pub struct CompiledForm {
    chart: ChartModel,
    entries: Vec<(usize, usize, NearEvaluator)>,
}

impl CompiledForm {
    pub fn new(form: &SingularForm) -> Result<Self> {
        if form.degree() != 2 {
            return Err(Error::InvalidInput(format!("expected a 2-form, got degree {}", form.degree())));
        }
        let chart = (**form.chart()).clone();
        let var = chart.defining_name().map(str::to_string);
        let entries = form
            .terms()
            .map(|(idx, c)| (idx[0], idx[1], NearEvaluator::new(c.clone(), var.as_deref())))
            .collect();
        Ok(CompiledForm { chart, entries })
    }

    pub fn chart(&self) -> &ChartModel {
        &self.chart
    }
}

impl FormField for CompiledForm {
    fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn matrix_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let env = Env::from_chart(&self.chart, p);
        let n = self.chart.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, ev) in &self.entries {
            let v = ev.eval(&env)?;
            m[(*i, *j)] = v;
            m[(*j, *i)] = -v;
        }
        Ok(m)
    }
}

/// Pfaffian by expansion along the first row (zero in odd dimension).
pub fn pfaffian(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let idx: Vec<usize> = (0..n).collect();
    pf_rec(a, &idx)
}

fn pf_rec(a: &DMatrix<f64>, idx: &[usize]) -> f64 {
    match idx.len() {
        0 => 1.0,
        n if n % 2 == 1 => 0.0,
        2 => a[(idx[0], idx[1])],
        _ => {
            let first = idx[0];
            let mut total = 0.0;
            for k in 1..idx.len() {
                let v = a[(first, idx[k])];
                if v == 0.0 {
                    continue;
                }
                let rest: Vec<usize> = idx[1..].iter().enumerate().filter(|(j, _)| j + 1 != k).map(|(_, &x)| x).collect();
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                total += sign * v * pf_rec(a, &rest);
            }
            total
        }
    }
}

pub const PFAFFIAN_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PointVerdict {
    pub point: Vec<f64>,
    pub pfaffian: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct NondegeneracyReport {
    pub frame: Frame,
    pub points: Vec<PointVerdict>,
}

impl NondegeneracyReport {
    pub fn all_pass(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.pass)
    }

    pub fn first_failure(&self) -> Option<&PointVerdict> {
        self.points.iter().find(|p| !p.pass)
    }

    pub fn min_abs_pfaffian(&self) -> f64 {
        self.points.iter().map(|p| p.pfaffian.abs()).fold(f64::INFINITY, f64::min)
    }

    /// Convert a failing report into an error carrying the witness point.
    pub fn into_result(self) -> Result<NondegeneracyReport> {
        match self.first_failure() {
            Some(p) => Err(Error::Nondegeneracy {
                witness: p.point.clone(),
                msg: format!("Pfaffian {:e}", p.pfaffian),
            }),
            None => Ok(self),
        }
    }
}

/// Evaluate the Pfaffian of a 2-form at each sample. With `m > 0` the form is
/// first written in the b^m-coframe, so points on `t = 0` are legitimate;
/// `m = 0` checks the ordinary coframe.
pub fn nondegeneracy_check(form: &SingularForm, m: u32, samples: &[Vec<f64>]) -> Result<NondegeneracyReport> {
    if form.degree() != 2 {
        return Err(Error::InvalidInput("nondegeneracy needs a 2-form".into()));
    }
    if !form.chart().dim().is_multiple_of(2) {
        return Err(Error::InvalidInput("nondegeneracy needs an even-dimensional chart".into()));
    }
    let framed = if m == 0 { form.to_standard() } else { form.to_b_coframe(m)? };
    let compiled = CompiledForm::new(&framed)?;
    Ok(nondegeneracy_of(&compiled, framed.frame(), samples))
}

/// Pfaffian test of an arbitrary form field at each sample.
pub fn nondegeneracy_of(field: &dyn FormField, frame: Frame, samples: &[Vec<f64>]) -> NondegeneracyReport {
    let mut points = Vec::with_capacity(samples.len());
    for p in samples {
        let (pf, pass) = match field.matrix_at(p) {
            Ok(mat) => {
                let pf = pfaffian(&mat);
                (pf, pf.abs() > PFAFFIAN_THRESHOLD)
            }
            Err(_) => (f64::NAN, false),
        };
        points.push(PointVerdict { point: p.clone(), pfaffian: pf, pass });
    }
    NondegeneracyReport { frame, points }
}

/// Inverse of a coefficient matrix, checked to be well conditioned.
pub fn invert(mat: &DMatrix<f64>, at: &[f64]) -> Result<DMatrix<f64>> {
    let n = mat.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let scale = mat.amax().max(1.0);
    if pfaffian(mat).abs() <= PFAFFIAN_THRESHOLD * scale.powi(n as i32 / 2) {
        return Err(Error::SingularMatrix(format!("degenerate form at {at:?}")));
    }
    let inv = mat.clone().try_inverse().ok_or_else(|| Error::SingularMatrix(format!("degenerate form at {at:?}")))?;
    Ok(inv)
}

/// The Poisson bivector `Π = Ω⁻¹` at a point (ordinary coframe).
pub fn form_to_bivector(form: &SingularForm, p: &[f64]) -> Result<DMatrix<f64>> {
    let compiled = CompiledForm::new(&form.to_standard())?;
    bivector_of(&compiled, p)
}

pub fn bivector_of(field: &dyn FormField, p: &[f64]) -> Result<DMatrix<f64>> {
    let mat = field.matrix_at(p)?;
    let inv = invert(&mat, p)?;
    let err = (&inv * &mat - DMatrix::<f64>::identity(mat.nrows(), mat.nrows())).amax();
    if err > 1e-12 * mat.amax().max(1.0) * inv.amax().max(1.0) {
        return Err(Error::SingularMatrix(format!("ill-conditioned inverse at {p:?} (residual {err:e})")));
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::chart::Coordinate;

    fn lit(chart: &Arc<ChartModel>, terms: &[(&str, &[&str])]) -> SingularForm {
        let terms: Vec<(String, Vec<String>)> =
            terms.iter().map(|(c, t)| (c.to_string(), t.iter().map(|s| s.to_string()).collect())).collect();
        SingularForm::from_literal(chart.clone(), &terms).unwrap()
    }

    fn sphere(m: u32) -> Arc<ChartModel> {
        Arc::new(ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), m).unwrap())
    }

    #[test]
    fn pfaffian_of_canonical_blocks() {
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 1)] = 2.0;
        a[(1, 0)] = -2.0;
        a[(2, 3)] = 3.0;
        a[(3, 2)] = -3.0;
        assert_eq!(pfaffian(&a), 6.0);
        assert!((pfaffian(&a).powi(2) - a.determinant()).abs() < 1e-12);
    }

    #[test]
    fn sphere_is_b_nondegenerate_on_z() {
        let c = sphere(2);
        let w = lit(&c, &[("1", &["dh/h^2", "dtheta"])]);
        let r = nondegeneracy_check(&w, 2, &[vec![0.0, 1.0]]).unwrap();
        assert!(r.all_pass());
        assert_eq!(r.points[0].pfaffian, 1.0);
    }

    #[test]
    fn rank_drop_detected() {
        let c = sphere(1);
        let w = lit(&c, &[("h", &["dh", "dtheta"])]);
        let r = nondegeneracy_check(&w, 0, &[vec![0.0, 1.0]]).unwrap();
        assert!(!r.all_pass());
    }

    #[test]
    fn bivector_inverse() {
        let c = sphere(2);
        let w = lit(&c, &[("1", &["dh/h^2", "dtheta"])]);
        let pi = form_to_bivector(&w, &[0.5, 1.0]).unwrap();
        assert!((pi[(1, 0)] - 0.25).abs() < 1e-15);
        let xy = Arc::new(ChartModel::lines(&["x", "y"], None, 1).unwrap());
        let fold = lit(&xy, &[("y", &["dx", "dy"])]);
        assert!(matches!(form_to_bivector(&fold, &[0.3, 0.0]), Err(Error::SingularMatrix(_))));
    }
}
