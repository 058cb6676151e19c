//! Singular quasi-Hamiltonian spaces for torus groups.
//!
//! For an abelian group the Cartan 3-form vanishes and both Maurer–Cartan
//! forms pull back to `dΦ`, so a circle-valued moment map is stored through
//! its angle: component `j` is `exp(i·phi[j])`. Products of circle values
//! become sums of angles. The moment condition reads
//! `ι_{ξ_i} σ = -Σ_j P_ij dφ_j` with the same sign as [`crate::moment`].

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_traits::{Signed, Zero};

use crate::chart::{ChartModel, SampleGrid};
use crate::error::{Error, Result};
use crate::expr::series::NearEvaluator;
use crate::expr::{rat, Env, Expr, Rational};
use crate::forms::numeric::{nondegeneracy_check, CompiledForm, FormField};
use crate::forms::{valuation, Frame, SingularForm, VectorFieldExpr};
use crate::integrate::antiderivative;
use crate::laurent::{decompose_2form, LaurentDecomposition, DEFAULT_ORDER};
use crate::moment::{compute_moment, ActionSpec, Generator};
use crate::reduction::{restrict, ReducedSpace};

/// Structure groups that can be requested; only tori are computable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureGroup {
    Torus(usize),
    Nonabelian(String),
}

#[derive(Clone, Debug)]
pub struct QuasiSpace {
    pub sigma: SingularForm,
    /// Invariant inner product on the Lie algebra, symmetric positive definite.
    pub pairing: Vec<Vec<Rational>>,
    /// Moment map angles, one per circle factor.
    pub phi: Vec<Expr>,
    pub action: ActionSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    pub samples: usize,
    /// Smallest relative singular value of the stacked `(σ, dΦ)` matrix.
    pub min_kernel_margin: f64,
}

const KERNEL_TOLERANCE: f64 = 1e-9;

pub fn identity_pairing(r: usize) -> Vec<Vec<Rational>> {
    (0..r).map(|i| (0..r).map(|j| if i == j { rat(1, 1) } else { rat(0, 1) }).collect()).collect()
}

/// Symmetric with all pivots of the `LDLᵀ` elimination positive.
pub fn check_pairing(p: &[Vec<Rational>]) -> Result<()> {
    let r = p.len();
    if p.iter().any(|row| row.len() != r) {
        return Err(Error::RankMismatch(format!("pairing is not a {r}x{r} matrix")));
    }
    for i in 0..r {
        for j in 0..i {
            if p[i][j] != p[j][i] {
                return Err(Error::RankMismatch(format!("pairing is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut a: Vec<Vec<Rational>> = p.to_vec();
    for k in 0..r {
        if !a[k][k].is_positive() {
            return Err(Error::RankMismatch("pairing is not positive definite".into()));
        }
        for i in k + 1..r {
            let f = &a[i][k] / &a[k][k];
            for j in k..r {
                let v = &f * &a[k][j];
                a[i][j] -= v;
            }
        }
    }
    Ok(())
}

/// `ϖ = ½ ∫₀¹ (exp_s* θ, ∂_s exp_s* θ) ds` on the Lie algebra coordinates
/// `eta1..etar`. For a torus `exp_s* θ = s·dη`, so the integrand is
/// `½ Σ P_ij s dη_i ∧ dη_j`, which cancels pairwise for symmetric `P`.
pub fn varpi_form(group: &StructureGroup, pairing: &[Vec<Rational>]) -> Result<SingularForm> {
    let r = match group {
        StructureGroup::Torus(r) => *r,
        StructureGroup::Nonabelian(_) => return Err(Error::NonabelianUnsupported),
    };
    if pairing.len() != r {
        return Err(Error::RankMismatch(format!("pairing of size {} for rank {r}", pairing.len())));
    }
    check_pairing(pairing)?;
    let names: Vec<String> = (1..=r).map(|i| format!("eta{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let chart = Arc::new(ChartModel::lines(&refs, None, 1)?);
    let s = Expr::sym("s");
    let mut terms = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            let c = (&pairing[i][j] - &pairing[j][i]) * rat(1, 2);
            let integrand = s.scale(&c);
            let prim = antiderivative(&integrand, "s")?;
            let value = prim.substitute("s", &Expr::one()) - prim.substitute("s", &Expr::zero());
            terms.push((vec![i, j], value.simplify_full()));
        }
    }
    let form = SingularForm::from_terms(chart, 2, Frame::Standard, terms)?;
    if !form.is_zero_full() {
        return Err(Error::AxiomViolation { axiom: "varpi", msg: format!("nonzero correction {form}") });
    }
    Ok(form)
}

impl QuasiSpace {
    /// Build and verify a space from its data.
    pub fn new(sigma: SingularForm, pairing: Vec<Vec<Rational>>, phi: Vec<Expr>, action: ActionSpec) -> Result<Self> {
        if phi.len() != action.rank() || pairing.len() != phi.len() {
            return Err(Error::RankMismatch(format!(
                "{} angles, {} generators, pairing of size {}",
                phi.len(),
                action.rank(),
                pairing.len()
            )));
        }
        check_pairing(&pairing)?;
        if **action.chart() != **sigma.chart() {
            return Err(Error::InvalidInput("action and form live on different charts".into()));
        }
        let q = QuasiSpace { sigma, pairing, phi, action };
        q.verify_axioms()?;
        Ok(q)
    }

    /// A point with a trivial circle action: `σ = 0`, angle `0`.
    pub fn trivial(rank: usize) -> Result<Self> {
        let chart = Arc::new(ChartModel::new(vec![], None, 1)?);
        let gens = (0..rank)
            .map(|i| Generator { name: format!("g{}", i + 1), field: VectorFieldExpr::zero(chart.clone()) })
            .collect();
        let action = ActionSpec::new(chart.clone(), gens)?;
        QuasiSpace::new(SingularForm::zero(chart, 2), identity_pairing(rank), vec![Expr::zero(); rank], action)
    }

    pub fn chart(&self) -> &Arc<ChartModel> {
        self.sigma.chart()
    }

    pub fn rank(&self) -> usize {
        self.phi.len()
    }

    /// The splitting `σ = Σ dt/t^j ∧ α_j + β` with closed `α_j`.
    pub fn laurent(&self) -> Result<LaurentDecomposition> {
        decompose_2form(&self.sigma, DEFAULT_ORDER)
    }

    /// Components whose angle is singular along `t = 0`: there the circle
    /// value is the limit point of the compactified line, not a number.
    pub fn boundary_components(&self) -> Result<Vec<usize>> {
        let Some(t) = self.chart().defining_name() else { return Ok(vec![]) };
        let mut out = Vec::new();
        for (i, f) in self.phi.iter().enumerate() {
            let singular = f.terms().any(|(m, _)| m.iter().any(|(a, _)| matches!(a, crate::expr::Atom::LogAbs(_))))
                || valuation(f, t, 1)? < 0;
            if singular {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Axioms (i) and (ii) symbolically, equivariance of `Φ`, and (iii) at
    /// sample points including `t = 0` when the chart has a defining coordinate.
    pub fn verify_axioms(&self) -> Result<AxiomReport> {
        let chart = self.chart().clone();
        let dsigma = self.sigma.ext_d();
        if !dsigma.is_zero_full() {
            return Err(Error::AxiomViolation { axiom: "i", msg: format!("dσ = {dsigma}") });
        }
        let dphi: Vec<SingularForm> =
            self.phi.iter().map(|f| SingularForm::scalar(chart.clone(), f.clone()).ext_d()).collect();
        for (i, g) in self.action.generators().iter().enumerate() {
            if !self.sigma.lie(&g.field)?.is_zero_full() {
                return Err(Error::AxiomViolation { axiom: "ii", msg: format!("σ is not invariant under {}", g.name) });
            }
            for f in &self.phi {
                let v = g.field.apply(f).simplify_full();
                if !v.is_zero() {
                    return Err(Error::AxiomViolation { axiom: "ii", msg: format!("{}({f}) = {v} ≠ 0", g.name) });
                }
            }
            let mut lhs = self.sigma.interior(&g.field)?.to_standard();
            for (j, d) in dphi.iter().enumerate() {
                lhs = lhs.add(&d.scale(&Expr::constant(self.pairing[i][j].clone())))?;
            }
            if !lhs.is_zero_full() {
                return Err(Error::AxiomViolation {
                    axiom: "ii",
                    msg: format!("ι_{}σ + (dΦ, ξ) = {} ≠ 0", g.name, lhs.simplify_full()),
                });
            }
        }
        self.check_kernel()
    }

    fn check_kernel(&self) -> Result<AxiomReport> {
        let chart = self.chart().clone();
        let n = chart.dim();
        if n == 0 {
            return Ok(AxiomReport { samples: 0, min_kernel_margin: f64::INFINITY });
        }
        let b_frame = chart.defining_index().and_then(|_| self.sigma.to_b_coframe(chart.m()).ok());
        let framed = b_frame.clone().unwrap_or_else(|| self.sigma.to_standard());
        let compiled = CompiledForm::new(&framed)?;
        let var = chart.defining_name();
        let grads: Vec<Vec<NearEvaluator>> = self
            .phi
            .iter()
            .map(|f| {
                (0..n)
                    .map(|i| {
                        let mut g = f.diff(chart.name(i));
                        if b_frame.is_some() && Some(i) == chart.defining_index() {
                            g = g * Expr::sym(chart.name(i)).powi(chart.m() as i64);
                        }
                        NearEvaluator::new(g.simplify_full(), var)
                    })
                    .collect()
            })
            .collect();
        let mut samples = SampleGrid::halton(&SampleGrid::chart_bounds(&chart, 0.5), 64);
        if let (Some(ti), Some(_)) = (chart.defining_index(), &b_frame) {
            let on_z: Vec<Vec<f64>> = samples.iter().take(16).map(|p| {
                let mut q = p.clone();
                q[ti] = 0.0;
                q
            }).collect();
            samples.extend(on_z);
        }
        let mut margin = f64::INFINITY;
        for p in &samples {
            let s = compiled.matrix_at(p)?;
            let env = Env::from_chart(&chart, p);
            let mut m = DMatrix::zeros(n + grads.len(), n);
            m.view_mut((0, 0), (n, n)).copy_from(&s);
            for (r, row) in grads.iter().enumerate() {
                for (i, g) in row.iter().enumerate() {
                    m[(n + r, i)] = g.eval(&env)?;
                }
            }
            let sv = m.singular_values();
            let scale = sv.max().max(1.0);
            let rel = sv.min() / scale;
            margin = margin.min(rel);
            if rel <= KERNEL_TOLERANCE {
                return Err(Error::AxiomViolation { axiom: "iii", msg: format!("ker σ ∩ ker dΦ ≠ 0 at {p:?}") });
            }
        }
        Ok(AxiomReport { samples: samples.len(), min_kernel_margin: margin })
    }
}

impl fmt::Display for QuasiSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.chart().names().collect();
        writeln!(f, "chart ({})", names.join(", "))?;
        writeln!(f, "sigma = {}", self.sigma)?;
        for (g, phi) in self.action.generators().iter().zip(&self.phi) {
            writeln!(f, "Phi[{}] = exp({phi})", g.name)?;
        }
        Ok(())
    }
}

/// A b^m-Hamiltonian package as a quasi-Hamiltonian space with
/// `Φ = exp(μ)` and `σ = ω + μ*ϖ = ω`.
pub fn exponentiate_space(w: &SingularForm, a: &ActionSpec, base: Option<&[f64]>) -> Result<QuasiSpace> {
    let pairing = identity_pairing(a.rank());
    varpi_form(&StructureGroup::Torus(a.rank()), &pairing)?;
    let mus = compute_moment(w, a, base)?;
    QuasiSpace::new(w.clone(), pairing, mus.into_iter().map(|m| m.mu).collect(), a.clone())
}

fn transfer_field(v: &VectorFieldExpr, chart: &Arc<ChartModel>) -> Result<VectorFieldExpr> {
    let mut out = VectorFieldExpr::zero(chart.clone());
    for (i, c) in v.comps.iter().enumerate() {
        out.comps[chart.require(v.chart.name(i))?] = c.clone();
    }
    Ok(out)
}

/// Fuse the first `shared` circle factors of `a` and `b`. The result carries
/// the fused factors first, then the remaining factors of `a`, then of `b`.
pub fn fuse(a: &QuasiSpace, b: &QuasiSpace, shared: usize) -> Result<QuasiSpace> {
    if shared > a.rank() || shared > b.rank() {
        return Err(Error::RankMismatch(format!("cannot share {shared} factors between ranks {} and {}", a.rank(), b.rank())));
    }
    for i in 0..shared {
        for j in 0..shared {
            if a.pairing[i][j] != b.pairing[i][j] {
                return Err(Error::RankMismatch(format!("pairings differ at ({i}, {j})")));
            }
        }
    }
    if let Some(name) = a.chart().names().find(|n| b.chart().contains(n)) {
        return Err(Error::InvalidInput(format!("coordinate `{name}` occurs in both factors")));
    }
    let chart = Arc::new(a.chart().product(b.chart())?);
    let sa = a.sigma.transfer(chart.clone())?;
    let sb = b.sigma.transfer(chart.clone())?;
    let mut sigma = sa.add(&sb)?;
    for i in 0..shared {
        for j in 0..shared {
            let p = &a.pairing[i][j];
            if p.is_zero() {
                continue;
            }
            let d1 = SingularForm::scalar(chart.clone(), a.phi[i].clone()).ext_d();
            let d2 = SingularForm::scalar(chart.clone(), b.phi[j].clone()).ext_d();
            sigma = sigma.sub(&d1.wedge(&d2)?.scale(&Expr::constant(p * rat(1, 2))))?;
        }
    }
    let sigma = sigma.simplify_full();

    let ga = a.action.generators();
    let gb = b.action.generators();
    let mut gens = Vec::new();
    let mut phi = Vec::new();
    let mut order = Vec::new(); // (source, index) for the pairing
    for i in 0..shared {
        let field = transfer_field(&ga[i].field, &chart)?;
        let other = transfer_field(&gb[i].field, &chart)?;
        let comps = field.comps.iter().zip(&other.comps).map(|(x, y)| x + y).collect();
        gens.push(Generator { name: format!("{}+{}", ga[i].name, gb[i].name), field: VectorFieldExpr::new(chart.clone(), comps)? });
        phi.push((&a.phi[i] + &b.phi[i]).simplify_full());
        order.push((0, i));
    }
    for i in shared..a.rank() {
        gens.push(Generator { name: ga[i].name.clone(), field: transfer_field(&ga[i].field, &chart)? });
        phi.push(a.phi[i].clone());
        order.push((1, i));
    }
    for i in shared..b.rank() {
        gens.push(Generator { name: gb[i].name.clone(), field: transfer_field(&gb[i].field, &chart)? });
        phi.push(b.phi[i].clone());
        order.push((2, i));
    }
    let pairing = order
        .iter()
        .map(|&(si, i)| {
            order
                .iter()
                .map(|&(sj, j)| match (si, sj) {
                    (0, 0) | (0, 1) | (1, 0) | (1, 1) => a.pairing[i][j].clone(),
                    (2, 2) => b.pairing[i][j].clone(),
                    _ => rat(0, 1),
                })
                .collect()
        })
        .collect();
    QuasiSpace::new(sigma, pairing, phi, ActionSpec::new(chart, gens)?)
}

/// Which value of a circle factor to reduce at.
#[derive(Clone, Debug, PartialEq)]
pub enum QuasiLevel {
    /// The limit value along `t = 0` of a component whose angle is singular
    /// there (the unit `exp(0)` of the compactified b-line).
    Boundary,
    /// A regular angle.
    Angle(Rational),
}

#[derive(Clone, Debug)]
pub enum QuasiReduction {
    Quasi(QuasiSpace),
    Reduced(ReducedSpace),
}

impl QuasiReduction {
    pub fn form(&self) -> &SingularForm {
        match self {
            QuasiReduction::Quasi(q) => &q.sigma,
            QuasiReduction::Reduced(r) => &r.form,
        }
    }
}

/// The level set of one component, as a substitution plus coordinates to drop.
struct LevelSet {
    drop: Vec<String>,
    subs: Vec<(String, Expr)>,
    note: String,
}

fn constant_of(e: &Expr) -> Option<Rational> {
    e.simplify_full().as_rational()
}

fn level_set(q: &QuasiSpace, k: usize, level: &QuasiLevel) -> Result<LevelSet> {
    let chart = q.chart();
    let phi = q.phi[k].simplify_full();
    let field = &q.action.generators()[k].field;
    match level {
        QuasiLevel::Boundary => {
            if !q.boundary_components()?.contains(&k) {
                return Err(Error::LevelNotRegular(format!("component {k} has no boundary value: angle {phi} is smooth")));
            }
            let (ti, t) = chart.require_defining()?;
            if !field.comps[ti].is_zero() {
                return Err(Error::NotBasic(format!("generator moves {t}")));
            }
            Ok(LevelSet { drop: vec![t.to_string()], subs: vec![(t.to_string(), Expr::zero())], note: format!("{t} = 0") })
        }
        QuasiLevel::Angle(f) => {
            // a coordinate entering linearly with constant coefficient
            for i in 0..chart.dim() {
                let s = chart.name(i);
                let Some(a) = constant_of(&phi.diff(s)) else { continue };
                if a.is_zero() || !field.comps[i].is_zero() {
                    continue;
                }
                let rest = (&phi - &Expr::sym(s).scale(&a)).simplify_full();
                if rest.depends_on(s) {
                    continue;
                }
                let g = ((Expr::constant(f.clone()) - rest) * Expr::constant(a.recip())).simplify_full();
                return Ok(LevelSet { drop: vec![s.to_string()], subs: vec![(s.to_string(), g.clone())], note: format!("{s} = {g}") });
            }
            // a rotated plane: angle a(x² + y²)/2 + const
            for i in 0..chart.dim() {
                for j in 0..chart.dim() {
                    let (x, y) = (chart.name(i), chart.name(j));
                    let rot_ok = field.comps[i] == -Expr::sym(y) && field.comps[j] == Expr::sym(x);
                    if i == j || !rot_ok {
                        continue;
                    }
                    let Some(a) = constant_of(&phi.diff(x).diff(x)) else { continue };
                    let quad = (Expr::sym(x).powi(2) + Expr::sym(y).powi(2)).scale(&(a.clone() * rat(1, 2)));
                    let Some(c) = constant_of(&(&phi - &quad)) else { continue };
                    if a.is_zero() {
                        continue;
                    }
                    let rho = (f - c) / a;
                    if !rho.is_positive() {
                        return Err(Error::LevelNotRegular(format!("angle {f} is critical for {phi} (plane level {rho})")));
                    }
                    return Ok(LevelSet {
                        drop: vec![x.to_string(), y.to_string()],
                        subs: vec![],
                        note: format!("{x}^2 + {y}^2 = {}", rho * rat(2, 1)),
                    });
                }
            }
            Err(Error::LevelNotRegular(format!("no closed-form level set for {phi} = {f}")))
        }
    }
}

/// Pull a form back along `name = value` for each substitution.
fn pullback(form: &SingularForm, subs: &[(String, Expr)]) -> Result<SingularForm> {
    let mut out = form.to_standard();
    for (name, value) in subs {
        let chart = out.chart().clone();
        let si = chart.require(name)?;
        let dv = SingularForm::scalar(chart.clone(), value.clone()).ext_d();
        let mut acc = SingularForm::zero(chart.clone(), out.degree());
        for (idx, c) in out.terms() {
            let c = c.substitute(name, value);
            let mut term = SingularForm::scalar(chart.clone(), c);
            for &i in idx {
                let f = if i == si { dv.clone() } else { SingularForm::basis(chart.clone(), chart.name(i))? };
                term = term.wedge(&f)?;
            }
            acc = acc.add(&term)?;
        }
        out = acc;
    }
    Ok(out.simplify_full())
}

/// Reduce circle factor `k` at `level`: restrict `σ` to the level set and
/// pass to the quotient by the generator, which must be a constant
/// combination of coordinate fields (or the plane rotation of the level).
pub fn quasi_reduce_abelian(q: &QuasiSpace, k: usize, level: &QuasiLevel) -> Result<QuasiReduction> {
    if k >= q.rank() {
        return Err(Error::RankMismatch(format!("no factor {k} in a rank {} space", q.rank())));
    }
    let chart = q.chart().clone();
    let ls = level_set(q, k, level)?;
    let xi = &q.action.generators()[k].field;

    // reject poles along the level before restricting
    if let QuasiLevel::Boundary = level {
        let t = &ls.drop[0];
        let std = q.sigma.to_standard();
        for (idx, c) in std.terms() {
            if !idx.contains(&chart.require(t)?) && valuation(c, t, 1)? < 0 {
                return Err(Error::NotBmForm(format!("coefficient {c} is singular along the level")));
            }
        }
    }
    let on_level = pullback(&q.sigma, &ls.subs)?;

    // quotient direction: either the dropped plane or a coordinate moved by ξ
    let plane = ls.subs.is_empty();
    let mut drop: Vec<String> = ls.drop.clone();
    let mut quotient_note = String::new();
    let mut pivot: Option<(usize, Rational)> = None;
    if !plane {
        let restricted_field: Vec<(usize, Expr)> =
            xi.comps.iter().enumerate().filter(|(i, c)| !c.is_zero() && !ls.drop.iter().any(|d| d == chart.name(*i))).map(|(i, c)| (i, c.clone())).collect();
        let mut consts = Vec::new();
        for (i, c) in &restricted_field {
            let r = constant_of(c).ok_or_else(|| Error::NotBasic(format!("generator component {c} is not constant")))?;
            consts.push((*i, r));
        }
        let &(p, ref cp) = consts
            .iter()
            .find(|(i, _)| chart.is_periodic(*i))
            .or(consts.first())
            .ok_or_else(|| Error::NotBasic("generator vanishes on the level".into()))?;
        let p_name = chart.name(p).to_string();
        let shifted: Vec<String> = consts
            .iter()
            .filter(|(i, _)| *i != p)
            .map(|(i, c)| {
                let r = c / cp;
                if r == rat(1, 1) { format!("{} - {p_name}", chart.name(*i)) } else { format!("{} - ({r})*{p_name}", chart.name(*i)) }
            })
            .collect();
        if !shifted.is_empty() {
            quotient_note = format!("; coordinates now stand for {}", shifted.join(", "));
        }
        pivot = Some((p, cp.clone()));
        drop.push(p_name);
    }
    // basic-ness: ι_ξ and L_ξ of the pullback vanish
    let level_xi = {
        let mut v = xi.clone();
        for (name, value) in &ls.subs {
            v = VectorFieldExpr::new(v.chart.clone(), v.comps.iter().map(|c| c.substitute(name, value)).collect())?;
        }
        v
    };
    if !plane {
        let contraction = on_level.interior(&level_xi)?;
        if !contraction.is_zero_full() {
            return Err(Error::NotBasic(format!("ι_ξ i*σ = {}", contraction.simplify_full())));
        }
        if !on_level.lie(&level_xi)?.is_zero_full() {
            return Err(Error::NotBasic("i*σ is not invariant".into()));
        }
    }
    let drop_refs: Vec<&str> = drop.iter().map(String::as_str).collect();
    let values: Vec<(&str, Expr)> = match pivot {
        Some((p, _)) => vec![(chart.name(p), Expr::zero())],
        None => vec![],
    };
    let reduced = if plane {
        check_plane_splits(&on_level, &ls.drop)?;
        restrict(&on_level, &drop_refs, &[])?
    } else {
        restrict(&on_level, &drop_refs, &values)?
    };
    let new_chart = reduced.chart().clone();

    let trace = vec![format!("factor {} at {} ({}){quotient_note}", q.action.generators()[k].name, level_desc(level), ls.note)];
    if q.rank() == 1 {
        return Ok(QuasiReduction::Reduced(ReducedSpace { form: reduced, circle: false, planes: vec![], trace }));
    }

    // carry the remaining factors to the quotient
    let mut gens = Vec::new();
    let mut phi = Vec::new();
    let keep: Vec<usize> = (0..q.rank()).filter(|&j| j != k).collect();
    for &j in &keep {
        let g = &q.action.generators()[j];
        let mut comps = g.field.comps.clone();
        if let Some((p, cp)) = &pivot {
            if let Some(r) = constant_of(&comps[*p]) {
                // shift by a multiple of ξ_k so the pivot component vanishes
                let f = r / cp;
                comps = comps.iter().zip(&xi.comps).map(|(c, x)| (c - &x.scale(&f)).simplify_full()).collect();
            }
        }
        let mut out = VectorFieldExpr::zero(new_chart.clone());
        for (i, c) in comps.iter().enumerate() {
            let name = chart.name(i);
            let mut c = c.clone();
            for (n, v) in ls.subs.iter().map(|(n, v)| (n.as_str(), v.clone())).chain(values.iter().cloned()) {
                c = c.substitute(n, &v);
            }
            match new_chart.index_of(name) {
                Some(ni) => out.comps[ni] = c,
                None if c.is_zero() => {}
                None => return Err(Error::NotBasic(format!("factor {} moves the dropped coordinate {name}", g.name))),
            }
        }
        gens.push(Generator { name: g.name.clone(), field: out });
        let mut f = q.phi[j].clone();
        for (n, v) in ls.subs.iter().map(|(n, v)| (n.as_str(), v.clone())).chain(values.iter().cloned()) {
            f = f.substitute(n, &v);
        }
        phi.push(f.simplify_full());
    }
    let pairing = keep.iter().map(|&i| keep.iter().map(|&j| q.pairing[i][j].clone()).collect()).collect();
    let action = ActionSpec::new(new_chart, gens)?;
    Ok(QuasiReduction::Quasi(QuasiSpace::new(reduced, pairing, phi, action)?))
}

fn level_desc(level: &QuasiLevel) -> String {
    match level {
        QuasiLevel::Boundary => "exp(0) on Z".into(),
        QuasiLevel::Angle(f) => format!("angle {f}"),
    }
}

fn check_plane_splits(form: &SingularForm, plane: &[String]) -> Result<()> {
    let chart = form.chart();
    let (xi, yi) = (chart.require(&plane[0])?, chart.require(&plane[1])?);
    let (lo, hi) = (xi.min(yi), xi.max(yi));
    for (idx, c) in form.terms() {
        let pair = idx.as_slice() == [lo, hi];
        let touches = idx.contains(&xi) || idx.contains(&yi);
        if (touches && !pair) || (pair && constant_of(c).is_none()) || c.depends_on(&plane[0]) || c.depends_on(&plane[1]) {
            return Err(Error::NotBasic(format!("plane ({}, {}) does not split off", plane[0], plane[1])));
        }
    }
    Ok(())
}

/// Nondegeneracy of a reduced form in the ordinary coframe at sample points
/// of its chart off `t = 0`; the zero-dimensional space passes trivially.
pub fn is_symplectic(form: &SingularForm, samples: usize) -> Result<bool> {
    let chart = form.chart();
    if chart.dim() == 0 {
        return Ok(true);
    }
    let ti = chart.defining_index();
    let pts: Vec<Vec<f64>> = SampleGrid::halton(&SampleGrid::chart_bounds(chart, 1.0), samples)
        .into_iter()
        .filter(|p| ti.is_none_or(|i| p[i].abs() > 1e-3))
        .collect();
    Ok(nondegeneracy_check(form, 0, &pts)?.all_pass())
}

/// Replace the coordinate `old` by `new` through `old = g(new)`.
pub fn reparametrize(form: &SingularForm, old: &str, new: &str, g: &Expr) -> Result<SingularForm> {
    let chart = form.chart();
    let i = chart.require(old)?;
    let coords = chart
        .coords()
        .iter()
        .map(|c| if c.name == old { crate::chart::Coordinate { name: new.to_string(), periodic: c.periodic } } else { c.clone() })
        .collect();
    let defining = chart.defining_name().filter(|d| *d != old);
    let new_chart = Arc::new(ChartModel::new(coords, defining, chart.m())?);
    let dg = g.diff(new);
    let std = form.to_standard();
    let terms = std
        .terms()
        .map(|(idx, c)| {
            let mut c = c.substitute(old, g);
            if idx.contains(&i) {
                c = c * dg.clone();
            }
            (idx.clone(), c.simplify_full())
        })
        .collect();
    SingularForm::from_terms(new_chart, form.degree(), Frame::Standard, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Coordinate;
    use crate::expr::parse_free;
    use crate::reduction::{build_cotangent_model, form_deviation, reduce_circle, reduce_torus_stage};

    fn lit(chart: &Arc<ChartModel>, terms: &[(&str, &[&str])]) -> SingularForm {
        let terms: Vec<(String, Vec<String>)> =
            terms.iter().map(|(c, t)| (c.to_string(), t.iter().map(|s| s.to_string()).collect())).collect();
        SingularForm::from_literal(chart.clone(), &terms).unwrap()
    }

    fn sphere2() -> QuasiSpace {
        let c = Arc::new(ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), 2).unwrap());
        let w = lit(&c, &[("1", &["dh/h^2", "dtheta"])]);
        exponentiate_space(&w, &ActionSpec::rotation(c, "theta").unwrap(), None).unwrap()
    }

    fn flat_torus() -> QuasiSpace {
        let c = Arc::new(ChartModel::new(vec![Coordinate::angle("theta1"), Coordinate::angle("theta2")], None, 1).unwrap());
        let w = lit(&c, &[("1", &["dtheta1", "dtheta2"])]);
        let a = ActionSpec::rotation(c, "theta2").unwrap();
        QuasiSpace::new(w, identity_pairing(1), vec![Expr::sym("theta1")], a).unwrap()
    }

    fn b2_torus(names: (&str, &str)) -> QuasiSpace {
        let c = Arc::new(ChartModel::new(vec![Coordinate::line(names.0), Coordinate::angle(names.1)], Some(names.0), 2).unwrap());
        let w = lit(&c, &[(&format!("sin({})^-2", names.0), &[&format!("d{}", names.0), &format!("d{}", names.1)])]);
        exponentiate_space(&w, &ActionSpec::rotation(c, names.1).unwrap(), None).unwrap()
    }

    #[test]
    fn varpi_vanishes() {
        for r in 1..=3 {
            let mut p = identity_pairing(r);
            if r == 3 {
                p[0][1] = rat(1, 3);
                p[1][0] = rat(1, 3);
                p[2][2] = rat(5, 2);
            }
            assert!(varpi_form(&StructureGroup::Torus(r), &p).unwrap().is_zero());
        }
        let su2 = StructureGroup::Nonabelian("SU(2)".into());
        assert!(matches!(varpi_form(&su2, &identity_pairing(3)), Err(Error::NonabelianUnsupported)));
        let mut bad = identity_pairing(2);
        bad[0][1] = rat(1, 1);
        assert!(matches!(varpi_form(&StructureGroup::Torus(2), &bad), Err(Error::RankMismatch(_))));
    }

    #[test]
    fn exponentiated_examples() {
        let s = sphere2();
        assert_eq!(s.phi[0], parse_free("-1/h").unwrap());
        assert_eq!(s.boundary_components().unwrap(), vec![0]);
        let t = b2_torus(("theta1", "theta2"));
        assert_eq!(t.phi[0], parse_free("-cot(theta1)").unwrap().simplify_full());
        let l = s.laurent().unwrap();
        assert!(l.alpha(2).ext_d().is_zero_full());
        let e = exponentiate_space(&s.sigma, &ActionSpec::empty(s.chart().clone()), None).unwrap();
        assert_eq!(e.rank(), 0);
    }

    #[test]
    fn fused_sphere_torus() {
        let f = fuse(&sphere2(), &flat_torus(), 1).unwrap();
        assert_eq!(f.phi[0], parse_free("-1/h + theta1").unwrap());
        let expect = lit(
            f.chart(),
            &[("1", &["dh/h^2", "dtheta"]), ("1", &["dtheta1", "dtheta2"]), ("-1/2", &["dh/h^2", "dtheta1"])],
        );
        assert!(f.sigma.sub(&expect).unwrap().is_zero_full());
        let g = fuse(&sphere2(), &b2_torus(("theta1", "theta2")), 1).unwrap();
        assert_eq!(g.phi[0], parse_free("-1/h - cot(theta1)").unwrap().simplify_full());
    }

    #[test]
    fn fusion_with_point_and_associativity() {
        let s = sphere2();
        let p = fuse(&s, &QuasiSpace::trivial(1).unwrap(), 1).unwrap();
        assert_eq!(p.sigma, s.sigma);
        assert_eq!(p.phi, s.phi);
        let c = b2_torus(("u", "v"));
        let left = fuse(&fuse(&s, &flat_torus(), 1).unwrap(), &c, 1).unwrap();
        let right = fuse(&s, &fuse(&flat_torus(), &c, 1).unwrap(), 1).unwrap();
        assert_eq!(left.phi, right.phi);
        assert!(left.sigma.sub(&right.sigma).unwrap().is_zero_full());
    }

    #[test]
    fn reduce_exponentiated_model_matches_hamiltonian() {
        let model = build_cotangent_model(3, 2, &[rat(0, 1), rat(1, 1)], &[1]).unwrap();
        let q = exponentiate_space(&model.form, &model.action().unwrap(), None).unwrap();
        let r = quasi_reduce_abelian(&q, 0, &QuasiLevel::Boundary).unwrap();
        let QuasiReduction::Quasi(rest) = r else { panic!("one factor left") };
        let ham = reduce_circle(&model.space()).unwrap();
        let pts = SampleGrid::halton(&SampleGrid::chart_bounds(ham.chart(), 1.0), 64);
        assert!(form_deviation(&rest.sigma, &ham.form, &pts).unwrap().0 < 1e-9);
        let done = quasi_reduce_abelian(&rest, 0, &QuasiLevel::Angle(rat(1, 2))).unwrap();
        let ham = reduce_torus_stage(&ham, &[(1, rat(1, 2))]).unwrap();
        assert_eq!(done.form(), &ham.form);
        assert!(matches!(quasi_reduce_abelian(&rest, 0, &QuasiLevel::Angle(rat(0, 1))), Err(Error::LevelNotRegular(_))));
    }

    #[test]
    fn fused_reduction_is_symplectic() {
        let f = fuse(&sphere2(), &flat_torus(), 1).unwrap();
        let QuasiReduction::Reduced(r) = quasi_reduce_abelian(&f, 0, &QuasiLevel::Angle(rat(1, 3))).unwrap() else {
            panic!("fully reduced")
        };
        assert_eq!(r.dim(), f.chart().dim() - 2);
        assert!(is_symplectic(&r.form, 64).unwrap());
        let darboux = reparametrize(&r.form, "h", "u", &parse_free("-1/u").unwrap()).unwrap();
        assert!(!crate::reduction::singular_content(&darboux));
        assert!(quasi_reduce_abelian(&f, 0, &QuasiLevel::Boundary).is_err());
    }

    #[test]
    fn axiom_failures() {
        let c = Arc::new(ChartModel::lines(&["x", "y"], None, 1).unwrap());
        let w = lit(&c, &[("1", &["dx", "dy"])]);
        let a = ActionSpec::rotation(c.clone(), "y").unwrap();
        let wrong = QuasiSpace::new(w.clone(), identity_pairing(1), vec![Expr::sym("y")], a.clone());
        assert!(matches!(wrong, Err(Error::AxiomViolation { axiom: "ii", .. })));
        assert!(QuasiSpace::new(w, identity_pairing(1), vec![Expr::sym("x")], a.clone()).is_ok());
        let degenerate = lit(&c, &[("x", &["dx", "dy"])]);
        let r = QuasiSpace::new(degenerate, identity_pairing(0), vec![], ActionSpec::empty(c));
        assert!(matches!(r, Err(Error::AxiomViolation { axiom: "iii", .. })));
    }
}
