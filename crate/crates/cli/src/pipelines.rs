use std::path::Path;

use bmsymp::chart::SampleGrid;
use bmsymp::desing::{
    convergence_report, desingularize, fold_check, off_z_grid, strictly_decreasing, ConvergenceRow,
    DesingProfile,
};
use bmsymp::examples::{torus_chart, torus_hamiltonian};
use bmsymp::expr::hyp::hyp2f1;
use bmsymp::expr::{parse_expr, Rational};
use bmsymp::forms::numeric::{nondegeneracy_check, nondegeneracy_of};
use bmsymp::laurent::{decompose_2form, residual_grid, DEFAULT_ORDER};
use bmsymp::moduli::{ab_form, b2_limit_check, singular_ab_form, HolonomyChart};
use bmsymp::moment::{compute_moment, moment_image, split_moment};
use bmsymp::props::{d_squared_suite, derivative_suite};
use bmsymp::quasi::{
    exponentiate_space, fuse, identity_pairing, is_symplectic, quasi_reduce_abelian, reparametrize, varpi_form, QuasiLevel,
    QuasiReduction, QuasiSpace, StructureGroup,
};
use bmsymp::reduction::{
    check_commutation, form_deviation, pullback_identity, reduce, reduce_circle, reduce_torus_stage, singular_content,
};
use bmsymp::{Env, Frame, SingularForm};

use crate::manifest::{self, Manifest, RunSection};
use crate::report::{sci, Report};
use crate::{CliError, Settings};

const DEFAULT_TOLERANCE: f64 = 1e-9;

type Out = Result<Report, CliError>;

pub fn dispatch(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    match run.command.as_str() {
        "laurent" => laurent(m, run, s),
        "desingularize" => desing(m, run, s),
        "moment-map" => moment_map(m, run, s),
        "emit-moment-image" => moment_image_csv(m, run, s),
        "reduce" => reduce_cmd(m, run, s),
        "check-commutation" => commutation(m, run, s),
        "fuse" => fuse_cmd(m),
        "quasi-reduce" => quasi_reduce_cmd(m, run, s),
        "ab-form" => ab_form_cmd(run),
        other => Err(CliError::Input(format!("unknown run command `{other}`"))),
    }
}

fn tolerance(run: &RunSection, s: &Settings) -> f64 {
    s.tolerance.or(run.tolerance).unwrap_or(DEFAULT_TOLERANCE)
}

fn grid(run: &RunSection, s: &Settings, default: usize) -> usize {
    s.grid.or(run.grid).unwrap_or(default)
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn parse_levels(run: &RunSection) -> Result<Vec<(usize, Rational)>, CliError> {
    run.levels
        .iter()
        .map(|l| {
            let (j, rho) = l.split_once('=').ok_or_else(|| CliError::Input(format!("level `{l}` is not of the form j=rho")))?;
            let j = j.trim().parse().map_err(|_| CliError::Input(format!("bad plane index in `{l}`")))?;
            Ok((j, manifest::rational(rho.trim())?))
        })
        .collect()
}

fn write_csv(run: &RunSection, header: &[&str], rows: Vec<Vec<String>>, report: &mut Report) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Input(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(format!("csv: {e}")))?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    match &run.output {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
            report.line(format!("csv written to {path}"));
        }
        None => report.csv = Some(text),
    }
    Ok(())
}

fn laurent(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    let pkg = m.package()?;
    let order = s.taylor_order.or(run.taylor_order).unwrap_or(DEFAULT_ORDER);
    let tol = tolerance(run, s);
    let d = decompose_2form(&pkg.form, order)?;
    let mut r = Report::new(format!("laurent decomposition (m = {}, taylor order {order})", d.m));
    r.line(format!("form: {}", pkg.form));
    for (j, a) in d.alphas.iter().enumerate() {
        r.line(format!("alpha_{} = {a}", j + 1));
    }
    r.line(format!("beta = {}", d.beta));
    let t_max = run.t_max.unwrap_or(0.5);
    let pts = residual_grid(pkg.form.chart(), grid(run, s, 9), t_max);
    let res = d.residual(&pkg.form, &pts)?;
    r.check(format!("reconstruction residual on |{}| <= {t_max}", d.t), res < tol, sci(res));
    let trunc = d.truncation_residual(&pkg.form, &pts, f64::INFINITY)?;
    r.line(format!("residual with beta truncated at order {order}: {}", sci(trunc)));
    let closed = d.alphas.iter().all(|a| a.ext_d().is_zero_full());
    r.check("alpha_j closed", closed, "");
    r.line(format!("highest weight nonzero: {}", yes(d.highest_weight_nonzero())));
    if let Some(action) = &pkg.action {
        for g in action.generators() {
            let weights = (1..=d.m as usize).map(|j| d.modular_weight(j, &g.field)).collect::<Result<Vec<_>, _>>()?;
            let shown: Vec<String> = weights.iter().enumerate().map(|(j, a)| format!("a_{} = {a}", j + 1)).collect();
            r.line(format!("modular weights of {}: {}", g.name, shown.join(", ")));
        }
        r.check("modular weights constant", true, "");
    }
    Ok(r)
}

fn desing(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    let pkg = m.package()?;
    let w = &pkg.form;
    let chart = w.chart().clone();
    let (ti, t) = chart.require_defining()?;
    let order = chart.m();
    let eps = if run.epsilons.is_empty() { vec![0.2, 0.1, 0.05] } else { run.epsilons.clone() };
    let t_max = run.t_max.unwrap_or(0.5);
    let mut r = Report::new(format!("desingularization (m = {order}, epsilons {eps:?})"));
    if order % 2 == 0 {
        let pts = off_z_grid(&chart, t_max, grid(run, s, 40), 2);
        let rows = convergence_report(w, &eps, &pts)?;
        for row in &rows {
            r.line(format!("epsilon {} order {}: sup deviation {}", row.epsilon, row.order, sci(row.sup_deviation)));
        }
        r.check("each derivative column strictly decreasing", strictly_decreasing(&rows), "");
        let mut far_zero = true;
        for &e in &eps {
            let far: Vec<Vec<f64>> = pts.iter().filter(|p| p[ti].abs() >= 2.0 * e).cloned().collect();
            let rows: Vec<ConvergenceRow> = convergence_report(w, &[e], &far)?;
            far_zero &= rows.iter().all(|x| x.sup_deviation == 0.0);
        }
        r.check(format!("identically zero for |{t}| >= 2 epsilon"), far_zero, "");
        let full = SampleGrid::for_chart(&chart, grid(run, s, 21), t_max).points();
        for &e in &eps {
            let de = desingularize(w, &DesingProfile::for_order(order, e)?)?;
            let nd = nondegeneracy_of(&de, Frame::Standard, &full);
            r.check(
                format!("epsilon {e}: closed and nondegenerate including {t} = 0"),
                de.is_closed() && nd.all_pass(),
                format!("min |Pf| {}", sci(nd.min_abs_pfaffian())),
            );
        }
        let csv_rows = rows.iter().map(|x| vec![x.epsilon.to_string(), x.order.to_string(), format!("{:e}", x.sup_deviation)]).collect();
        write_csv(run, &["epsilon", "deriv_order", "sup_deviation"], csv_rows, &mut r)?;
    } else {
        let grid = SampleGrid::for_chart(&chart, grid(run, s, 11), t_max);
        for &e in &eps {
            let de = desingularize(w, &DesingProfile::for_order(order, e)?)?;
            let verdict = fold_check(&de, &grid)?;
            let folds = verdict.folds();
            let mut ts: Vec<f64> = folds.iter().map(|f| f.point[ti]).collect();
            ts.sort_by(f64::total_cmp);
            ts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
            r.line(format!("epsilon {e}: fold loci at {t} in {ts:?}"));
            let at_z = folds.iter().filter(|f| f.point[ti] == 0.0).collect::<Vec<_>>();
            let full_rank = !at_z.is_empty() && at_z.iter().all(|f| f.restricted_rank == chart.dim() - 2);
            r.check(format!("epsilon {e}: transverse fold at {t} = 0 with maximal-rank restriction"), full_rank, "");
            r.check(format!("epsilon {e}: closed"), de.is_closed(), "");
        }
    }
    Ok(r)
}

fn moment_map(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    let pkg = m.package()?;
    let action = pkg.action.as_ref().ok_or_else(|| CliError::Input("moment-map needs an [action] section".into()))?;
    let tol = tolerance(run, s);
    let maps = compute_moment(&pkg.form, action, run.base.as_deref())?;
    let chart = pkg.form.chart();
    let mut r = Report::new(format!("moment map (m = {})", chart.m()));
    r.line(format!("form: {}", pkg.form));
    let decomposition = match chart.defining_name() {
        Some(_) => Some(decompose_2form(&pkg.form, DEFAULT_ORDER)?),
        None => None,
    };
    for (mm, g) in maps.iter().zip(action.generators()) {
        r.line(format!("generator {}: mu = {}", mm.generator, mm.mu));
        r.check(format!("{}: d mu = -i_xi omega", mm.generator), mm.numeric_deviation < tol, sci(mm.numeric_deviation));
        r.line(format!("  verified symbolically: {}", yes(mm.symbolic)));
        if let (Some(split), Some(d)) = (&mm.split, &decomposition) {
            let weights = (1..=d.m as usize).map(|j| d.modular_weight(j, &g.field)).collect::<Result<Vec<_>, _>>()?;
            let shown: Vec<String> = weights.iter().enumerate().map(|(j, a)| format!("a_{} = {a}", j + 1)).collect();
            r.line(format!("  modular weights: {}", shown.join(", ")));
            let ms = split_moment(split, weights.last().copied())?;
            let cs: Vec<String> = ms.c.iter().enumerate().map(|(i, c)| format!("c_{} = {c}", i + 1)).collect();
            r.line(format!("  split: {}, mu0 = {}", cs.join(", "), ms.mu0));
            r.check(format!("{}: highest constant matches the modular weight", mm.generator), true, "");
        }
    }
    Ok(r)
}

fn moment_image_csv(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    let pkg = m.package()?;
    let action = pkg.action.as_ref().ok_or_else(|| CliError::Input("emit-moment-image needs an [action] section".into()))?;
    let chart = pkg.form.chart();
    let (_, t) = chart.require_defining()?;
    let maps = compute_moment(&pkg.form, action, run.base.as_deref())?;
    let fixed = match &run.fixed {
        Some(f) if f.len() == chart.dim() => f.clone(),
        Some(f) => return Err(CliError::Input(format!("`fixed` has {} values for a {}-dimensional chart", f.len(), chart.dim()))),
        None => vec![0.0; chart.dim()],
    };
    let clip = run.clip.unwrap_or(10.0);
    let t_max = run.t_max.unwrap_or(2.0);
    let n = grid(run, s, 81);
    let ts = SampleGrid::linspace(-t_max, t_max, n);
    let mut r = Report::new(format!("moment image along {t} (clip {clip})"));
    let mut rows = Vec::new();
    for mm in &maps {
        let samples = moment_image(&mm.mu, chart, &fixed, &ts)?;
        let mut comps: Vec<i32> = samples.iter().map(|x| x.component).collect();
        comps.dedup();
        let clipped = samples.iter().filter(|x| x.value.abs() > clip).count();
        r.line(format!("{}: {} samples on {} branches, {} clipped", mm.generator, samples.len(), comps.len(), clipped));
        // symmetry of the two branches under t -> -t
        let mirror = |x: f64| samples.iter().find(|y| y.t == -x).map(|y| y.value);
        let (mut even, mut odd) = (true, true);
        for x in samples.iter().filter(|x| x.t > 0.0) {
            if let Some(v) = mirror(x.t) {
                even &= (v - x.value).abs() <= 1e-9 * x.value.abs().max(1.0);
                odd &= (v + x.value).abs() <= 1e-9 * x.value.abs().max(1.0);
            }
        }
        let shape = match (even, odd) {
            (true, _) => "symmetric branches",
            (_, true) => "branches of opposite sign across Z",
            _ => "asymmetric branches",
        };
        r.line(format!("  {shape}"));
        r.check(format!("{}: two branches", mm.generator), comps.len() == 2, "");
        for x in samples {
            let (value, marker) = if x.value > clip {
                (clip, "→∞")
            } else if x.value < -clip {
                (-clip, "→-∞")
            } else {
                (x.value, "")
            };
            rows.push(vec![mm.generator.clone(), x.component.to_string(), x.t.to_string(), value.to_string(), marker.to_string()]);
        }
    }
    write_csv(run, &["generator", "component", "t", "mu", "clipped"], rows, &mut r)?;
    Ok(r)
}

fn reduce_cmd(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    let pkg = m.package()?;
    let tol = tolerance(run, s);
    let Some(model) = &pkg.model else {
        // general chart: exponentiate and reduce the first circle on Z
        let action = pkg.action.as_ref().ok_or_else(|| CliError::Input("reduce needs an [action] section".into()))?;
        let q = exponentiate_space(&pkg.form, action, run.base.as_deref())?;
        let out = quasi_reduce_abelian(&q, 0, &QuasiLevel::Boundary)?;
        let form = out.form();
        let mut r = Report::new("reduction at the critical hypersurface");
        r.line(format!("form: {}", pkg.form));
        let dim = form.chart().dim();
        r.line(if dim == 0 { "reduced space: point".to_string() } else { format!("reduced space: dim {dim}, {form}") });
        let removed = singular_content(&pkg.form) && !singular_content(form);
        r.line(format!("singularity removed: {}", yes(removed)));
        r.check("reduced form is symplectic", is_symplectic(form, 64)?, "");
        return Ok(r);
    };
    let levels = parse_levels(run)?;
    let mut r = Report::new(format!("reduction of the cotangent model (n = {}, m = {})", model.n, model.m()));
    r.line(format!("form: {}", model.form));
    let circle = reduce_circle(&model.space())?;
    r.line(format!("after circle: {circle}"));
    r.check("pullback of the reduced form equals the restriction", pullback_identity(model, &circle)?, "");
    let done = reduce_torus_stage(&circle, &levels)?;
    for step in &done.trace {
        r.line(format!("stage: {step}"));
    }
    r.line(if done.dim() == 0 { "reduced space: point".to_string() } else { format!("reduced space: {done}") });
    r.line(format!("singularity removed: {}", yes(!done.has_singular_atoms())));
    r.check("no singular atoms", !done.has_singular_atoms(), "");
    if done.dim() > 0 {
        let pts = SampleGrid::for_chart(done.chart(), grid(run, s, 3), 1.0).points();
        let nd = nondegeneracy_check(&done.form, 0, &pts)?;
        r.check("reduced form nondegenerate", nd.all_pass(), format!("min |Pf| {}", sci(nd.min_abs_pfaffian())));
    }
    if run.stages {
        let other = reduce(model, &levels, true)?;
        let same = other.chart().names().eq(done.chart().names()) && other.form.sub(&done.form)?.is_zero_full();
        r.check("stage order independent (symbolic)", same, "");
        let pts = SampleGrid::halton(&SampleGrid::chart_bounds(done.chart(), 1.0), 32);
        let (dev, _) = form_deviation(&other.form, &done.form, &pts)?;
        r.check("stage order independent (numeric)", dev < tol, sci(dev));
    }
    Ok(r)
}

fn commutation(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    let pkg = m.package()?;
    let model = pkg.model.as_ref().ok_or_else(|| CliError::Input("check-commutation needs a [model] section".into()))?;
    let tol = tolerance(run, s);
    let levels = parse_levels(run)?;
    let eps = if run.epsilons.is_empty() { vec![0.1, 0.05] } else { run.epsilons.clone() };
    let mut r = Report::new(format!("desingularization vs reduction (n = {}, m = {})", model.n, model.m()));
    for e in eps {
        let rep = check_commutation(model, &DesingProfile::for_order(model.m(), e)?, &levels)?;
        r.line(format!("epsilon {e}: level {}, reduced {}", rep.level, rep.path_b));
        r.check(format!("epsilon {e}: reduced forms agree"), rep.deviation < tol, sci(rep.deviation));
    }
    Ok(r)
}

fn factors(m: &Manifest) -> Result<(Vec<QuasiSpace>, usize), CliError> {
    let q = m.quasi.as_ref().ok_or_else(|| CliError::Input("missing [quasi] section".into()))?;
    if q.factors.is_empty() {
        return Err(CliError::Input("[quasi] lists no factors".into()));
    }
    let pairing = m.pairing()?;
    let mut out = Vec::new();
    for f in &q.factors {
        let mut space = f.build()?;
        if let (Some(p), Some(_)) = (&pairing, &f.angles) {
            space = QuasiSpace::new(space.sigma, p.clone(), space.phi, space.action)?;
        }
        out.push(space);
    }
    Ok((out, q.shared))
}

fn fused(m: &Manifest, r: &mut Report) -> Result<QuasiSpace, CliError> {
    let (spaces, shared) = factors(m)?;
    for (i, q) in spaces.iter().enumerate() {
        let ax = q.verify_axioms()?;
        let angles: Vec<String> = q.phi.iter().map(ToString::to_string).collect();
        r.line(format!("factor {}: angles [{}]", i + 1, angles.join(", ")));
        r.check(format!("factor {}: axioms", i + 1), true, format!("{} samples, kernel margin {}", ax.samples, sci(ax.min_kernel_margin)));
    }
    let mut acc = spaces[0].clone();
    for q in &spaces[1..] {
        acc = fuse(&acc, q, shared)?;
    }
    Ok(acc)
}

fn fuse_cmd(m: &Manifest) -> Out {
    let mut r = Report::new("fusion product");
    let q = fused(m, &mut r)?;
    r.line(format!("sigma = {}", q.sigma));
    let angles: Vec<String> = q.phi.iter().map(ToString::to_string).collect();
    r.line(format!("moment angles: [{}]", angles.join(", ")));
    let ax = q.verify_axioms()?;
    r.check("fused space axioms", true, format!("{} samples, kernel margin {}", ax.samples, sci(ax.min_kernel_margin)));
    let varpi = varpi_form(&StructureGroup::Torus(q.rank()), &q.pairing)?;
    r.check(format!("varpi vanishes for rank {}", q.rank()), varpi.is_zero(), "");
    Ok(r)
}

fn parse_level(text: Option<&str>) -> Result<QuasiLevel, CliError> {
    match text {
        None | Some("boundary") => Ok(QuasiLevel::Boundary),
        Some(v) => Ok(QuasiLevel::Angle(manifest::rational(v)?)),
    }
}

fn quasi_reduce_cmd(m: &Manifest, run: &RunSection, s: &Settings) -> Out {
    let tol = tolerance(run, s);
    let level = parse_level(run.level.as_deref())?;
    if m.model.is_some() {
        let pkg = m.package()?;
        let model = pkg.model.as_ref().expect("model present");
        let action = pkg.action.as_ref().expect("model action");
        let mut r = Report::new("quasi-Hamiltonian reduction of the exponentiated model");
        let q = exponentiate_space(&model.form, action, None)?;
        let angles: Vec<String> = q.phi.iter().map(ToString::to_string).collect();
        r.line(format!("moment angles: [{}]", angles.join(", ")));
        let first = quasi_reduce_abelian(&q, 0, &QuasiLevel::Boundary)?;
        let ham = reduce_circle(&model.space())?;
        let pts = SampleGrid::halton(&SampleGrid::chart_bounds(ham.chart(), 1.0), 64);
        let (dev, _) = form_deviation(first.form(), &ham.form, &pts)?;
        r.line(format!("after circle: {}", first.form()));
        r.check("circle stage agrees with Hamiltonian reduction", dev < tol, sci(dev));
        let levels = parse_levels(run)?;
        let mut current = first;
        let mut ham_space = ham;
        for (j, rho) in &levels {
            let QuasiReduction::Quasi(rest) = &current else {
                return Err(CliError::Input(format!("no factor left for plane {j}")));
            };
            let k = rest
                .action
                .generators()
                .iter()
                .position(|g| g.name == format!("rot{j}"))
                .ok_or_else(|| CliError::Input(format!("plane {j} is not rotated")))?;
            current = quasi_reduce_abelian(rest, k, &QuasiLevel::Angle(rho.clone()))?;
            ham_space = reduce_torus_stage(&ham_space, &[(*j, rho.clone())])?;
            let same = current.form().chart().names().eq(ham_space.chart().names()) && current.form().sub(&ham_space.form)?.is_zero_full();
            r.check(format!("plane {j} at angle {rho} agrees with Hamiltonian reduction"), same, "");
        }
        r.line(format!("reduced form: {}", current.form()));
        return Ok(r);
    }
    let mut r = Report::new("quasi-Hamiltonian reduction");
    let q = fused(m, &mut r)?;
    let k = run.factor.unwrap_or(0);
    let angles: Vec<String> = q.phi.iter().map(ToString::to_string).collect();
    r.line(format!("moment angles: [{}]", angles.join(", ")));
    let out = quasi_reduce_abelian(&q, k, &level)?;
    match &out {
        QuasiReduction::Quasi(rest) => {
            r.line(format!("remaining factors: {}", rest.rank()));
            let ax = rest.verify_axioms()?;
            r.check("quotient axioms", true, format!("{} samples", ax.samples));
        }
        QuasiReduction::Reduced(red) => {
            for step in &red.trace {
                r.line(format!("stage: {step}"));
            }
        }
    }
    let mut form: SingularForm = out.form().clone();
    let dim = form.chart().dim();
    r.line(if dim == 0 { "reduced space: point".to_string() } else { format!("reduced form (dim {dim}): {form}") });
    r.check("reduced form is symplectic", is_symplectic(&form, 64)?, "");
    if let Some(sub) = &run.substitute {
        let [old, new, g] = sub.as_slice() else {
            return Err(CliError::Input("substitute needs [old, new, expression]".into()));
        };
        let probe = bmsymp::ChartModel::lines(&[new.as_str()], None, 1)?;
        let g = parse_expr(g, &probe)?;
        form = reparametrize(&form, old, new, &g)?;
        r.line(format!("with {old} = {g}: {form}"));
    }
    r.check("reduced form is smooth", !singular_content(&form), "");
    Ok(r)
}

fn ab_form_cmd(run: &RunSection) -> Out {
    let g = run.genus.unwrap_or(1);
    let mut hc = HolonomyChart::new(g);
    let mut r = Report::new(format!("Atiyah-Bott form, genus {g}"));
    match &run.mark {
        Some(mark) => {
            hc = hc.with_mark(mark)?;
            let w = singular_ab_form(&hc)?;
            r.line(format!("marked {mark}: {w}"));
            r.check("closed and b-nondegenerate", true, "");
        }
        None => {
            let w = ab_form(&hc)?;
            r.line(format!("omega = {w}"));
            r.check("closed and nondegenerate", true, "");
        }
    }
    if run.b2_limit {
        let eps = if run.epsilons.is_empty() { vec![0.2, 0.1, 0.05] } else { run.epsilons.clone() };
        let rep = b2_limit_check(&eps)?;
        for row in &rep.rows {
            r.line(format!(
                "b2 torus, epsilon {}: far deviation {}, near deviation {}",
                row.epsilon,
                sci(row.far_deviation),
                sci(row.near_deviation)
            ));
        }
        r.check("b2 limit exact outside the epsilon-neighborhood", rep.exact_outside(), "");
        r.check("b2 limit deviation decreases with epsilon", rep.decreasing(), "");
    }
    Ok(r)
}

fn suites(s: &Settings, r: &mut Report) -> Result<(), CliError> {
    let d = derivative_suite(s.seed, 200, 1e-5)?;
    r.check(format!("derivative vs central difference, {} expressions (seed {})", d.cases, s.seed), d.passed(), format!("worst {}", sci(d.worst)));
    let dd = d_squared_suite(s.seed, 500)?;
    r.check(format!("d^2 = 0 on {} random forms", dd.cases), dd.passed(), format!("{} failures", dd.failures));
    let mut worst: f64 = 0.0;
    for x in SampleGrid::linspace(0.0, 0.9, 91) {
        for b in [0.5, 1.0, 2.5] {
            worst = worst.max((hyp2f1(-0.5, b, b, x)? - (1.0 - x).sqrt()).abs());
        }
    }
    r.check("2F1(-1/2, b; b; s) = sqrt(1 - s) on [0, 0.9]", worst < 1e-12, sci(worst));
    let h = torus_hamiltonian(2)?;
    let chart = torus_chart(2)?;
    let mut worst: f64 = 0.0;
    for p in SampleGrid::halton(&[(0.05, 3.09), (0.3, 5.9)], 100) {
        worst = worst.max((h.eval(&Env::from_chart(&chart, &p))? - 1.0 / p[0].tan()).abs());
    }
    r.check("torus Hamiltonian at m = 2 equals cot", worst < 1e-10, sci(worst));
    for rank in 1..=3 {
        let v = varpi_form(&StructureGroup::Torus(rank), &identity_pairing(rank))?;
        r.check(format!("varpi vanishes for rank {rank}"), v.is_zero(), "");
    }
    let b2 = b2_limit_check(&[0.2, 0.1, 0.05])?;
    r.check("b2 torus limit exact off the neighborhoods and decreasing", b2.exact_outside() && b2.decreasing(), "");
    Ok(())
}

pub fn verify_all(dir: &Path, s: &Settings) -> Out {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut r = Report::new(format!("verify-all: {} manifests in {}", paths.len(), dir.display()));
    for p in &paths {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let render = || -> Result<(bool, String), CliError> {
            let m = manifest::load(p)?;
            let mut run = m.run.clone();
            // CSV artifacts are not written during verification
            run.output = None;
            let rep = dispatch(&m, &run, s)?;
            Ok((rep.passed(), rep.to_string()))
        };
        match (render(), render()) {
            (Ok((pass, a)), Ok((_, b))) => {
                let detail = if a == b { "deterministic" } else { "output differs between runs" };
                r.check(name, pass && a == b, detail);
            }
            (Err(e), _) | (_, Err(e)) => r.check(name, false, e.to_string()),
        }
    }
    suites(s, &mut r)?;
    Ok(r)
}
