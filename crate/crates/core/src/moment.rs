//! Torus actions on chart models, the b^m-Hamiltonian test and symbolic
//! moment maps.
//!
//! Convention: `ι_{ξ^M} ω = -dμ`. With this sign the model form
//! `Σ c_i dt/t^i ∧ dθ` has moment map coefficients `c_1` for `log|t|` and
//! `-c_i` for `t^{-(i-1)}/(i-1)`, see [`model_sign`].

use std::sync::Arc;

use crate::chart::{ChartModel, SampleGrid};
use crate::error::{Error, Result};
use crate::expr::bm::split_in;
use crate::expr::series::{expand, NearEvaluator};
use crate::expr::{rat_to_f64, Env, Expr, Rational};
use crate::forms::{SingularForm, VectorFieldExpr};
use crate::integrate::{potential, verify_antiderivative};
use crate::BmFunction;

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub name: String,
    pub field: VectorFieldExpr,
}

/// Generators of a torus action on a chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpec {
    chart: Arc<ChartModel>,
    generators: Vec<Generator>,
}

impl ActionSpec {
    pub fn new(chart: Arc<ChartModel>, generators: Vec<Generator>) -> Result<Self> {
        for (i, g) in generators.iter().enumerate() {
            for h in &generators[..i] {
                if !g.field.bracket(&h.field).is_zero() {
                    return Err(Error::InvalidInput(format!("generators {} and {} do not commute", h.name, g.name)));
                }
            }
            for j in 0..chart.dim() {
                let comp = g.field.component(chart.name(j));
                if chart.is_periodic(j) && !comp.is_zero() && comp.depends_on(chart.name(j)) {
                    return Err(Error::InvalidInput(format!("generator {} is not periodic in {}", g.name, chart.name(j))));
                }
            }
        }
        Ok(ActionSpec { chart, generators })
    }

    /// The circle action generated by `∂/∂angle`.
    pub fn rotation(chart: Arc<ChartModel>, angle: &str) -> Result<Self> {
        let field = VectorFieldExpr::coordinate(chart.clone(), angle)?;
        ActionSpec::new(chart, vec![Generator { name: angle.to_string(), field }])
    }

    pub fn empty(chart: Arc<ChartModel>) -> Self {
        ActionSpec { chart, generators: vec![] }
    }

    pub fn chart(&self) -> &Arc<ChartModel> {
        &self.chart
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorReport {
    pub name: String,
    pub contraction: SingularForm,
    /// Pole order in the defining coordinate of the contraction's coefficients.
    pub pole_order: i64,
}

/// Verify `L_ξ ω = 0` and `d ι_ξ ω = 0` for every generator.
pub fn check_bm_hamiltonian(w: &SingularForm, a: &ActionSpec) -> Result<Vec<GeneratorReport>> {
    if w.degree() != 2 {
        return Err(Error::InvalidInput("moment maps need a 2-form".into()));
    }
    if !w.ext_d().is_zero_full() {
        return Err(Error::NonClosed(w.to_string()));
    }
    let mut out = Vec::new();
    for g in a.generators() {
        if !w.lie(&g.field)?.is_zero_full() {
            return Err(Error::NotInvariant(g.name.clone()));
        }
        let contraction = w.interior(&g.field)?.to_standard().simplify_full();
        if !contraction.ext_d().is_zero_full() {
            return Err(Error::NotClosedContraction(g.name.clone()));
        }
        let mut pole_order = 0;
        if let Some(t) = w.chart().defining_name() {
            for (_, c) in contraction.terms() {
                let v = crate::forms::valuation(c, t, 1)?;
                pole_order = pole_order.max(-v);
            }
            if pole_order > w.chart().m() as i64 {
                return Err(Error::OrderMismatch { coord: t.to_string(), found: pole_order, m: w.chart().m() });
            }
        }
        out.push(GeneratorReport { name: g.name.clone(), contraction, pole_order });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct MomentMap {
    pub generator: String,
    /// Full expression, normalized so that the smooth part vanishes at the base point.
    pub mu: Expr,
    /// Canonical split when the chart has a defining coordinate.
    pub split: Option<BmFunction>,
    /// `dμ = -ι_ξ ω` was confirmed symbolically (otherwise numerically only).
    pub symbolic: bool,
    pub numeric_deviation: f64,
}

/// `1` for `m = 1`, `-1` otherwise: `c_m = model_sign(m) · a_m`.
pub fn model_sign(m: u32) -> i64 {
    if m == 1 {
        1
    } else {
        -1
    }
}

fn verification_points(chart: &ChartModel) -> Vec<Vec<f64>> {
    let mut bounds = SampleGrid::chart_bounds(chart, 0.45);
    if let Some(t) = chart.defining_index() {
        bounds[t] = (0.05, 0.45);
    }
    SampleGrid::halton(&bounds, 100)
}

/// Value of the smooth part at the base point, exact when possible.
fn base_value(smooth: &Expr, chart: &ChartModel, base: &[f64]) -> Result<Expr> {
    let mut v = smooth.clone();
    if let Some(ti) = chart.defining_index() {
        if base[ti] == 0.0 {
            let s = expand(smooth, chart.name(ti), 1)?;
            v = s.coeff(0);
        }
    }
    for (i, name) in chart.names().enumerate() {
        if let Some(r) = Rational::from_float(base[i]) {
            if v.depends_on(name) {
                let exact = crate::expr::parse_rational(&format!("{}", base[i])).unwrap_or(r);
                v = v.substitute(name, &Expr::constant(exact));
            }
        }
    }
    let v = v.simplify_full();
    if v.as_rational().is_some() {
        return Ok(v);
    }
    let x = NearEvaluator::new(smooth.clone(), chart.defining_name()).eval(&Env::from_chart(chart, base))?;
    Ok(Expr::constant(Rational::from_float(x).ok_or(Error::SingularEvaluation(format!("{smooth} at base")))?))
}

/// Symbolic moment map per generator with `ι_ξ ω = -dμ`, normalized by
/// `μ₀(base) = 0` (default base: the origin of the chart).
pub fn compute_moment(w: &SingularForm, a: &ActionSpec, base: Option<&[f64]>) -> Result<Vec<MomentMap>> {
    let reports = check_bm_hamiltonian(w, a)?;
    let chart = w.chart().clone();
    let origin = vec![0.0; chart.dim()];
    let base = base.unwrap_or(&origin);
    let points = verification_points(&chart);
    let mut out = Vec::new();
    for r in reports {
        let eta = r.contraction.neg();
        let raw = potential(&eta)?;
        let (mu, split) = match chart.defining_name() {
            Some(t) => {
                let f = split_in(&raw, t, chart.m())?;
                let shift = base_value(&f.smooth, &chart, base)?;
                let f = f.shifted(&-shift);
                (f.reassemble(), Some(f))
            }
            None => {
                let shift = base_value(&raw, &chart, base)?;
                (raw - shift, None)
            }
        };
        let mut symbolic = true;
        let mut dev: f64 = 0.0;
        for i in 0..chart.dim() {
            let target = eta.coeff(&[i]);
            if !verify_antiderivative_component(&target, &mu, chart.name(i))? {
                symbolic = false;
            }
        }
        let dmu = SingularForm::scalar(chart.clone(), mu.clone()).ext_d();
        for p in &points {
            let env = Env::from_chart(&chart, p);
            for i in 0..chart.dim() {
                let d = dmu.coeff(&[i]).eval(&env)? - eta.coeff(&[i]).eval(&env)?;
                dev = dev.max(d.abs());
            }
        }
        if dev > 1e-9 {
            return Err(Error::AntiderivativeNotInTable(format!("moment map for {} fails verification ({dev:e})", r.name)));
        }
        out.push(MomentMap { generator: r.name, mu, split, symbolic, numeric_deviation: dev });
    }
    Ok(out)
}

fn verify_antiderivative_component(target: &Expr, mu: &Expr, var: &str) -> Result<bool> {
    if target.is_zero() && !mu.depends_on(var) {
        return Ok(true);
    }
    verify_antiderivative(target, mu, var)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentSplit {
    /// `c[i - 1] = c_i`.
    pub c: Vec<Rational>,
    pub mu0: Expr,
}

/// Constants `c_1..c_m` and the smooth part; with a modular weight given,
/// checks `c_m = model_sign(m) · a_m`.
pub fn split_moment(mu: &BmFunction, highest_weight: Option<f64>) -> Result<MomentSplit> {
    let mut c = Vec::with_capacity(mu.m as usize);
    for i in 1..=mu.m as usize {
        let ci = mu.c(i).simplify_full();
        let r = ci
            .as_rational()
            .ok_or_else(|| Error::ModelViolation(format!("c{i} = {ci} is not constant")))?;
        c.push(r);
    }
    if let Some(a) = highest_weight {
        let cm = rat_to_f64(c.last().expect("m >= 1"));
        let expect = model_sign(mu.m) as f64 * a;
        if (cm - expect).abs() > 1e-9 {
            return Err(Error::ModelViolation(format!("c{} = {cm} but the highest modular weight gives {expect}", mu.m)));
        }
    }
    Ok(MomentSplit { c, mu0: mu.smooth.clone() })
}

/// `c_1 log|a| + Σ c_{i+1} a^{-i}/i + μ₀`.
pub fn cotangent_lift_moment(m: u32, c: &[Rational], a: &str, mu0: Expr) -> Result<BmFunction> {
    if c.len() != m as usize {
        return Err(Error::InvalidInput(format!("{} constants for m = {m}", c.len())));
    }
    let poles = c[1..].iter().map(|x| Expr::constant(x.clone())).collect();
    BmFunction::new(a, m, Expr::constant(c[0].clone()), poles, mu0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageSample {
    /// `-1` for `t < 0`, `1` for `t > 0`.
    pub component: i32,
    pub t: f64,
    pub value: f64,
}

/// `μ` along the defining coordinate with the other coordinates fixed, per
/// connected component of the chart minus `Z`.
pub fn moment_image(mu: &Expr, chart: &ChartModel, fixed: &[f64], t_values: &[f64]) -> Result<Vec<ImageSample>> {
    let (ti, _) = chart.require_defining()?;
    let mut out = Vec::new();
    for &t in t_values.iter().filter(|t| **t != 0.0) {
        let mut p = fixed.to_vec();
        p[ti] = t;
        let value = mu.eval(&Env::from_chart(chart, &p))?;
        out.push(ImageSample { component: if t < 0.0 { -1 } else { 1 }, t, value });
    }
    out.sort_by(|a, b| (a.component, a.t).partial_cmp(&(b.component, b.t)).expect("finite"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Coordinate;
    use crate::expr::{parse_free, rat};
    use crate::laurent::decompose_2form;

    fn sphere(m: u32) -> (Arc<ChartModel>, SingularForm) {
        let c = Arc::new(ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), m).unwrap());
        let terms = vec![("1".to_string(), vec![format!("dh/h^{m}"), "dtheta".to_string()])];
        let w = SingularForm::from_literal(c.clone(), &terms).unwrap();
        (c, w)
    }

    fn torus(m: u32) -> (Arc<ChartModel>, SingularForm) {
        let c = Arc::new(
            ChartModel::new(vec![Coordinate::line("theta1"), Coordinate::angle("theta2")], Some("theta1"), m).unwrap(),
        );
        let terms = vec![(format!("sin(theta1)^-{m}"), vec!["dtheta1".to_string(), "dtheta2".to_string()])];
        (c.clone(), SingularForm::from_literal(c, &terms).unwrap())
    }

    #[test]
    fn sphere_moments() {
        for m in 1..=4 {
            let (c, w) = sphere(m);
            let a = ActionSpec::rotation(c.clone(), "theta").unwrap();
            let mu = &compute_moment(&w, &a, None).unwrap()[0];
            let expect = if m == 1 { parse_free("log(abs(h))").unwrap() } else { Expr::sym("h").powi(1 - m as i64).scale(&rat(-1, m as i64 - 1)) };
            assert_eq!(mu.mu, expect, "m = {m}");
            assert!(mu.symbolic);
            let d = decompose_2form(&w, 8).unwrap();
            let weight = d.modular_weight(m as usize, &a.generators()[0].field).unwrap();
            let s = split_moment(mu.split.as_ref().unwrap(), Some(weight)).unwrap();
            assert!(s.mu0.is_zero());
        }
    }

    #[test]
    fn torus_moment_is_minus_cot() {
        let (c, w) = torus(2);
        let a = ActionSpec::rotation(c.clone(), "theta2").unwrap();
        let mu = &compute_moment(&w, &a, None).unwrap()[0];
        assert_eq!(mu.mu, parse_free("-cot(theta1)").unwrap().simplify_full());
        let s = split_moment(mu.split.as_ref().unwrap(), Some(1.0)).unwrap();
        assert_eq!(s.c, vec![rat(0, 1), rat(-1, 1)]);
    }

    #[test]
    fn higher_torus_orders() {
        for m in [1, 3, 4] {
            let (c, w) = torus(m);
            let a = ActionSpec::rotation(c, "theta2").unwrap();
            let mu = &compute_moment(&w, &a, None).unwrap()[0];
            assert!(mu.numeric_deviation < 1e-9);
        }
    }

    #[test]
    fn non_invariant_generator() {
        let (c, w) = sphere(2);
        let field = VectorFieldExpr::from_pairs(c.clone(), &[("h", Expr::sym("h"))]).unwrap();
        let a = ActionSpec::new(c, vec![Generator { name: "dilation".into(), field }]).unwrap();
        assert!(matches!(check_bm_hamiltonian(&w, &a), Err(Error::NotInvariant(_))));
    }

    #[test]
    fn split_examples() {
        let f = split_in(&parse_free("-1/t + (x^2 + y^2)/2").unwrap(), "t", 2).unwrap();
        let s = split_moment(&f, None).unwrap();
        assert_eq!(s.c, vec![rat(0, 1), rat(-1, 1)]);
        assert_eq!(s.mu0, parse_free("(x^2 + y^2)/2").unwrap());
        let shifted = split_moment(&f.shifted(&Expr::int(3)), None).unwrap();
        assert_eq!(shifted.c, s.c);
        let bad = split_in(&parse_free("x/t").unwrap(), "t", 2).unwrap();
        assert!(matches!(split_moment(&bad, None), Err(Error::ModelViolation(_))));
    }

    #[test]
    fn cotangent_lift() {
        let f = cotangent_lift_moment(3, &[rat(0, 1), rat(0, 1), rat(1, 1)], "a", Expr::zero()).unwrap();
        assert_eq!(f.reassemble(), parse_free("1/(2*a^2)").unwrap());
        let f = cotangent_lift_moment(1, &[rat(1, 1)], "a", Expr::zero()).unwrap();
        assert_eq!(f.reassemble(), parse_free("log(abs(a))").unwrap());
    }

    #[test]
    fn image_components() {
        let (c, _) = sphere(1);
        let samples = moment_image(&parse_free("log(abs(h))").unwrap(), &c, &[0.0, 1.0], &[-0.5, 0.0, 0.5]).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].component, -1);
        assert_eq!(samples[0].value, samples[1].value);
    }
}
