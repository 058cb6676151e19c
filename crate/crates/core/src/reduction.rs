//! Marsden–Weinstein reduction in the cotangent normal-form model
//! `ω = Σ c_i dt/t^i ∧ dθ + Σ dx_j ∧ dy_j`.

use std::fmt;
use std::sync::Arc;

use crate::chart::{ChartModel, Coordinate, SampleGrid};
use crate::desing::{desingularize, DesingProfile, Parity};
use crate::error::{Error, Result};
use crate::expr::{Atom, Env, Expr, Rational};
use crate::forms::numeric::nondegeneracy_check;
use crate::forms::{valuation, SingularForm, VectorFieldExpr};
use crate::integrate::potential;
use crate::moment::{ActionSpec, Generator};

/// Names of the `j`-th slice plane (1-based).
pub fn plane_names(j: usize) -> (String, String) {
    (format!("x{j}"), format!("y{j}"))
}

#[derive(Clone, Debug)]
pub struct CotangentModel {
    pub n: usize,
    /// `c[i - 1] = c_i`.
    pub c: Vec<Rational>,
    /// Slice planes rotated by the slice torus (1-based indices).
    pub planes: Vec<usize>,
    pub form: SingularForm,
}

/// Build and validate the model on `(theta, t, x_1, y_1, ..., x_{n-1}, y_{n-1})`.
pub fn build_cotangent_model(n: usize, m: u32, c: &[Rational], planes: &[usize]) -> Result<CotangentModel> {
    if n == 0 {
        return Err(Error::InvalidInput("model dimension n must be at least 1".into()));
    }
    if c.len() != m as usize {
        return Err(Error::InvalidInput(format!("{} constants for m = {m}", c.len())));
    }
    if c.last().is_none_or(num_traits::Zero::is_zero) {
        return Err(Error::ZeroHighestWeight);
    }
    for &j in planes {
        if j == 0 || j >= n {
            return Err(Error::NonModelAction(format!("no slice plane {j} in a model with n = {n}")));
        }
    }
    let mut coords = vec![Coordinate::angle("theta"), Coordinate::line("t")];
    for j in 1..n {
        let (x, y) = plane_names(j);
        coords.push(Coordinate::line(&x));
        coords.push(Coordinate::line(&y));
    }
    let chart = Arc::new(ChartModel::new(coords, Some("t"), m)?);
    let t = Expr::sym("t");
    let mut terms = Vec::new();
    let sing = Expr::sum(c.iter().enumerate().map(|(i, ci)| Expr::constant(ci.clone()) * t.powi(-(i as i64 + 1))));
    terms.push((vec![1, 0], sing));
    for j in 1..n {
        terms.push((vec![2 * j, 2 * j + 1], Expr::one()));
    }
    let form = SingularForm::from_terms(chart.clone(), 2, crate::forms::Frame::Standard, terms)?;
    let samples = SampleGrid::for_chart(&chart, 3, 0.5).points();
    nondegeneracy_check(&form, m, &samples)?.into_result()?;
    let mut planes = planes.to_vec();
    planes.sort_unstable();
    planes.dedup();
    Ok(CotangentModel { n, c: c.to_vec(), planes, form })
}

impl CotangentModel {
    pub fn chart(&self) -> &Arc<ChartModel> {
        self.form.chart()
    }

    pub fn m(&self) -> u32 {
        self.chart().m()
    }

    /// `∂θ` followed by the plane rotations `-y ∂x + x ∂y`.
    pub fn action(&self) -> Result<ActionSpec> {
        let chart = self.chart().clone();
        let mut gens = vec![Generator { name: "theta".into(), field: VectorFieldExpr::coordinate(chart.clone(), "theta")? }];
        for &j in &self.planes {
            let (x, y) = plane_names(j);
            let field = VectorFieldExpr::from_pairs(chart.clone(), &[(&x, -Expr::sym(&y)), (&y, Expr::sym(&x))])?;
            gens.push(Generator { name: format!("rot{j}"), field });
        }
        ActionSpec::new(chart, gens)
    }

    /// Slice Hamiltonian `μ₀ = Σ (x_j² + y_j²)/2` over the rotated planes.
    pub fn mu0(&self) -> Expr {
        Expr::sum(self.planes.iter().map(|&j| {
            let (x, y) = plane_names(j);
            (Expr::sym(&x).powi(2) + Expr::sym(&y).powi(2)).scale(&crate::expr::rat(1, 2))
        }))
    }

    pub fn space(&self) -> ReducedSpace {
        ReducedSpace {
            form: self.form.clone(),
            circle: true,
            planes: self.planes.clone(),
            trace: vec![],
        }
    }
}

/// A (partially) reduced space: its chart, form, and what is left to reduce.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSpace {
    pub form: SingularForm,
    /// The `(θ, t)` pair is still present.
    pub circle: bool,
    /// Rotated slice planes still present.
    pub planes: Vec<usize>,
    pub trace: Vec<String>,
}

impl ReducedSpace {
    pub fn chart(&self) -> &Arc<ChartModel> {
        self.form.chart()
    }

    pub fn dim(&self) -> usize {
        self.chart().dim()
    }

    /// Whether any coefficient carries a pole, reciprocal or logarithm.
    pub fn has_singular_atoms(&self) -> bool {
        singular_content(&self.form)
    }
}

impl fmt::Display for ReducedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.chart().names().collect();
        write!(f, "dim {} ({}) : {}", self.dim(), names.join(", "), self.form)
    }
}

fn atom_singular(a: &Atom, k: i64) -> bool {
    match a {
        Atom::Recip(_) | Atom::LogAbs(_) => true,
        Atom::Sym(_) | Atom::Sin(_) | Atom::Cos(_) | Atom::Tan(_) | Atom::Cot(_) => k < 0 || expr_singular(a.argument()),
        _ => expr_singular(a.argument()),
    }
}

fn expr_singular(e: Option<&Expr>) -> bool {
    e.is_some_and(|e| e.terms().any(|(m, _)| m.iter().any(|(a, k)| atom_singular(a, k))))
}

/// Singular atoms anywhere in the coefficients of a form.
pub fn singular_content(form: &SingularForm) -> bool {
    let std = form.to_standard();
    let found = std.terms().any(|(_, c)| expr_singular(Some(c)));
    found
}

/// Drop the listed coordinates: terms using them are discarded and the given
/// values are substituted into the remaining coefficients.
pub(crate) fn restrict(form: &SingularForm, drop: &[&str], values: &[(&str, Expr)]) -> Result<SingularForm> {
    let std = form.to_standard();
    let chart = Arc::new(std.chart().without(drop)?);
    let mut kept = Vec::new();
    for (idx, c) in std.terms() {
        if idx.iter().any(|&i| drop.contains(&std.chart().name(i))) {
            continue;
        }
        let mut c = c.clone();
        for (name, v) in values {
            c = c.substitute(name, v);
        }
        let new_idx = idx.iter().map(|&i| chart.require(std.chart().name(i))).collect::<Result<Vec<_>>>()?;
        kept.push((new_idx, c.simplify_full()));
    }
    let out = SingularForm::from_terms(chart, std.degree(), crate::forms::Frame::Standard, kept)?;
    for name in drop {
        if out.depends_on(name) {
            return Err(Error::NotBasic(format!("reduced form still depends on {name}")));
        }
    }
    Ok(out)
}

/// Reduce the `θ`-circle at the level `t = 0`: restrict to the level and
/// quotient by `θ`-translation.
pub fn reduce_circle(space: &ReducedSpace) -> Result<ReducedSpace> {
    if !space.circle {
        return Err(Error::NonModelAction("no circle factor left to reduce".into()));
    }
    let form = &space.form;
    let std = form.to_standard();
    // the level's coefficients must extend to t = 0
    for (idx, c) in std.terms() {
        let uses = |n: &str| idx.iter().any(|&i| std.chart().name(i) == n);
        if !uses("t") && valuation(c, "t", 1)? < 0 {
            return Err(Error::NotBmForm(format!("coefficient {c} is singular along the level")));
        }
        if !uses("t") && !uses("theta") && c.depends_on("theta") {
            return Err(Error::NotBasic(format!("coefficient {c} depends on theta")));
        }
    }
    let reduced = restrict(form, &["theta", "t"], &[("t", Expr::zero())])?;
    let mut trace = space.trace.clone();
    let singular_before = singular_content(form);
    trace.push(format!(
        "circle at t = 0{}",
        if singular_before && !singular_content(&reduced) { " (singular atoms eliminated)" } else { "" }
    ));
    Ok(ReducedSpace { form: reduced, circle: false, planes: space.planes.clone(), trace })
}

/// Reduce rotated slice planes at levels `ρ_j > 0` of `(x_j² + y_j²)/2`.
pub fn reduce_torus_stage(space: &ReducedSpace, levels: &[(usize, Rational)]) -> Result<ReducedSpace> {
    let mut current = space.clone();
    for (j, rho) in levels {
        if !current.planes.contains(j) {
            return Err(Error::NonModelAction(format!("plane {j} is not rotated by the slice action")));
        }
        if *rho <= Rational::from_integer(0.into()) {
            return Err(Error::LevelNotRegular(format!("level {rho} of plane {j} is not a regular value")));
        }
        let (x, y) = plane_names(*j);
        let std = current.form.to_standard();
        let (xi, yi) = (current.chart().require(&x)?, current.chart().require(&y)?);
        for (idx, c) in std.terms() {
            let pair = idx.as_slice() == [xi, yi];
            let touches = idx.contains(&xi) || idx.contains(&yi);
            if (touches && !pair) || (pair && !c.is_one()) || (!pair && (c.depends_on(&x) || c.depends_on(&y))) {
                return Err(Error::NonModelAction(format!("plane {j} does not split off canonically")));
            }
        }
        let form = restrict(&current.form, &[&x, &y], &[])?;
        let mut trace = current.trace.clone();
        trace.push(format!("plane {j} at level {rho}"));
        let planes = current.planes.iter().copied().filter(|p| p != j).collect();
        current = ReducedSpace { form, circle: current.circle, planes, trace };
    }
    Ok(current)
}

/// `i*ω` on the level `t = 0` equals the pullback of the reduced form.
pub fn pullback_identity(model: &CotangentModel, reduced_circle: &ReducedSpace) -> Result<bool> {
    let level = restrict(&model.form, &["t"], &[("t", Expr::zero())])?;
    let level_chart = level.chart().clone();
    let lifted = reduced_circle.form.transfer(level_chart)?;
    Ok(level.sub(&lifted)?.is_zero_full())
}

/// The full reduction: circle first, then the slice planes at `levels`.
pub fn reduce(model: &CotangentModel, levels: &[(usize, Rational)], slice_first: bool) -> Result<ReducedSpace> {
    let space = model.space();
    if slice_first {
        reduce_circle(&reduce_torus_stage(&space, levels)?)
    } else {
        reduce_torus_stage(&reduce_circle(&space)?, levels)
    }
}

/// Largest coefficient difference between two forms on the same chart, with
/// the point where it occurs.
pub fn form_deviation(a: &SingularForm, b: &SingularForm, points: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    if a.chart().names().ne(b.chart().names()) {
        return Ok((f64::INFINITY, vec![]));
    }
    let (a, b) = (a.to_standard(), b.to_standard());
    let mut idx: Vec<&Vec<usize>> = a.terms().map(|(i, _)| i).chain(b.terms().map(|(i, _)| i)).collect();
    idx.sort();
    idx.dedup();
    let mut deviation: f64 = 0.0;
    let mut witness = vec![];
    for p in points {
        let env = Env::from_chart(a.chart(), p);
        for i in &idx {
            let d = (a.coeff(i).eval(&env)? - b.coeff(i).eval(&env)?).abs();
            if d > deviation {
                deviation = d;
                witness = p.clone();
            }
        }
    }
    Ok((deviation, witness))
}

#[derive(Clone, Debug)]
pub struct CommutationReport {
    pub epsilon: f64,
    /// Level value `μ_ε(0)` used on the desingularized side.
    pub level: f64,
    pub path_a: ReducedSpace,
    pub path_b: ReducedSpace,
    pub deviation: f64,
    pub witness: Vec<f64>,
}

/// Compare reduction of `ω` with symplectic reduction of `ω_ε`.
pub fn check_commutation(model: &CotangentModel, profile: &DesingProfile, levels: &[(usize, Rational)]) -> Result<CommutationReport> {
    if profile.parity != Parity::Even {
        return Err(Error::InvalidInput("commutation is checked for even m".into()));
    }
    let path_a = reduce(model, levels, false)?;
    let de = desingularize(&model.form, profile)?;
    let inner = de.piece_at(0.0).clone();
    // μ_ε for the θ-circle on the inner piece, and its level set near Z
    let theta = VectorFieldExpr::coordinate(model.chart().clone(), "theta")?;
    let mu_eps = potential(&inner.interior(&theta)?.neg())?;
    let at = |t: f64| -> Result<f64> {
        let env = Env::from_chart(model.chart(), &vec![0.0; model.chart().dim()]).with("t", t);
        mu_eps.eval(&env)
    };
    let level = at(0.0)?;
    let eps = profile.eps();
    let ts = SampleGrid::linspace(-eps, eps, 401);
    let mut roots = Vec::new();
    for w in ts.windows(2) {
        let (a, b) = (at(w[0])? - level, at(w[1])? - level);
        if a == 0.0 {
            roots.push(w[0]);
        } else if a * b < 0.0 {
            roots.push(0.5 * (w[0] + w[1]));
        }
    }
    if roots.len() != 1 || roots[0].abs() > 1e-12 {
        return Err(Error::LevelNotRegular(format!("desingularized level set {roots:?} is not {{t = 0}}")));
    }
    let b_space = ReducedSpace { form: inner, circle: true, planes: model.planes.clone(), trace: vec![format!("desingularized, epsilon = {eps}")] };
    let path_b = reduce_torus_stage(&reduce_circle(&b_space)?, levels)?;
    if path_a.chart().names().ne(path_b.chart().names()) {
        return Err(Error::CommutationMismatch { witness: vec![], deviation: f64::INFINITY });
    }
    let chart = path_a.chart().clone();
    let points = if chart.dim() == 0 { vec![vec![]] } else { SampleGrid::halton(&SampleGrid::chart_bounds(&chart, 1.0), 64) };
    let (deviation, witness) = form_deviation(&path_a.form, &path_b.form, &points)?;
    if deviation >= 1e-9 {
        return Err(Error::CommutationMismatch { witness, deviation });
    }
    Ok(CommutationReport { epsilon: eps, level, path_a, path_b, deviation, witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rat;

    fn stages(m: u32) -> CotangentModel {
        let mut c = vec![rat(0, 1); m as usize];
        c[m as usize - 1] = rat(1, 1);
        build_cotangent_model(3, m, &c, &[1]).unwrap()
    }

    #[test]
    fn sphere_model_reduces_to_point() {
        let model = build_cotangent_model(1, 2, &[rat(0, 1), rat(1, 1)], &[]).unwrap();
        let r = reduce_circle(&model.space()).unwrap();
        assert_eq!(r.dim(), 0);
        assert!(r.form.is_zero());
        assert!(r.trace[0].contains("eliminated"));
    }

    #[test]
    fn stages_fixture() {
        let model = stages(1);
        let after_circle = reduce_circle(&model.space()).unwrap();
        assert_eq!(after_circle.dim(), 4);
        assert!(pullback_identity(&model, &after_circle).unwrap());
        let r = reduce_torus_stage(&after_circle, &[(1, rat(1, 2))]).unwrap();
        let names: Vec<&str> = r.chart().names().collect();
        assert_eq!(names, ["x2", "y2"]);
        let expect = SingularForm::from_literal(r.chart().clone(), &[("1".into(), vec!["dx2".into(), "dy2".into()])]).unwrap();
        assert_eq!(r.form, expect);
        assert!(!r.has_singular_atoms());
        assert_eq!(r.dim(), model.chart().dim() - 2 * (1 + model.planes.len()));
        let other = reduce(&model, &[(1, rat(1, 2))], true).unwrap();
        assert_eq!(other.form, r.form);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(build_cotangent_model(1, 2, &[rat(1, 1), rat(0, 1)], &[]), Err(Error::ZeroHighestWeight)));
        let model = stages(1);
        let s = reduce_circle(&model.space()).unwrap();
        assert!(matches!(reduce_torus_stage(&s, &[(1, rat(0, 1))]), Err(Error::LevelNotRegular(_))));
        assert!(matches!(reduce_torus_stage(&s, &[(2, rat(1, 1))]), Err(Error::NonModelAction(_))));
        assert_eq!(reduce_torus_stage(&s, &[]).unwrap().form, s.form);
    }

    #[test]
    fn commutation_on_stages() {
        let model = stages(2);
        for eps in [0.1, 0.05] {
            let p = DesingProfile::for_order(2, eps).unwrap();
            let r = check_commutation(&model, &p, &[(1, rat(1, 2))]).unwrap();
            assert!(r.deviation < 1e-9);
        }
        let sphere = build_cotangent_model(1, 2, &[rat(0, 1), rat(1, 1)], &[]).unwrap();
        let r = check_commutation(&sphere, &DesingProfile::for_order(2, 0.1).unwrap(), &[]).unwrap();
        assert_eq!(r.path_a.dim(), 0);
    }
}
