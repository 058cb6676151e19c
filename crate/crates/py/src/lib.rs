//! Python bindings: charts, singular forms, moment maps, desingularization,
//! reduction, quasi-Hamiltonian spaces and holonomy forms.
//!
//! Rationals cross the boundary as strings (`"1/2"`), expressions as text in
//! the chart's coordinates.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use bmsymp::chart::SampleGrid;
use bmsymp::desing::{convergence_report, desingularize, fold_check, off_z_grid, DesingProfile};
use bmsymp::expr::{parse_rational, Rational};
use bmsymp::laurent::{decompose_2form, residual_grid, DEFAULT_ORDER};
use bmsymp::moment::{compute_moment, ActionSpec, Generator};
use bmsymp::quasi::{self, QuasiLevel, QuasiReduction};
use bmsymp::reduction::{self, build_cotangent_model};
use bmsymp::{moduli, ChartModel, Coordinate, Env, SingularForm, VectorFieldExpr};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(bmsymp, BmError, PyException, "Raised when a bmsymp computation fails.");

fn err(e: bmsymp::Error) -> PyErr {
    BmError::new_err(e.to_string())
}

fn rational(s: &str) -> PyResult<Rational> {
    parse_rational(s).ok_or_else(|| PyValueError::new_err(format!("`{s}` is not a rational number")))
}

/// Coordinate chart with an optional defining coordinate for `Z`.
#[pyclass(name = "Chart", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChart(Arc<ChartModel>);

#[pymethods]
impl PyChart {
    #[new]
    #[pyo3(signature = (coordinates, periodic = Vec::new(), defining = None, m = 1))]
    fn new(coordinates: Vec<String>, periodic: Vec<String>, defining: Option<String>, m: u32) -> PyResult<Self> {
        let coords = coordinates
            .iter()
            .map(|c| if periodic.contains(c) { Coordinate::angle(c) } else { Coordinate::line(c) })
            .collect();
        Ok(PyChart(Arc::new(ChartModel::new(coords, defining.as_deref(), m).map_err(err)?)))
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.0.names().map(String::from).collect()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m()
    }

    #[getter]
    fn defining(&self) -> Option<String> {
        self.0.defining_name().map(String::from)
    }

    fn __repr__(&self) -> String {
        format!("Chart({:?}, defining={:?}, m={})", self.names(), self.defining(), self.m())
    }
}

/// A differential form whose coefficients may be singular along `Z`.
#[pyclass(name = "Form", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyForm(SingularForm);

#[pymethods]
impl PyForm {
    /// `terms` is a list of `(coefficient, [basis tags])`, e.g.
    /// `("1", ["dh/h^2", "dtheta"])`.
    #[new]
    fn new(chart: &PyChart, terms: Vec<(String, Vec<String>)>) -> PyResult<Self> {
        Ok(PyForm(SingularForm::from_literal(chart.0.clone(), &terms).map_err(err)?))
    }

    #[getter]
    fn degree(&self) -> usize {
        self.0.degree()
    }

    #[getter]
    fn chart(&self) -> PyChart {
        PyChart(self.0.chart().clone())
    }

    fn d(&self) -> PyForm {
        PyForm(self.0.ext_d())
    }

    fn wedge(&self, other: &PyForm) -> PyResult<PyForm> {
        Ok(PyForm(self.0.wedge(&other.0).map_err(err)?))
    }

    fn is_closed(&self) -> bool {
        self.0.ext_d().is_zero_full()
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero_full()
    }

    /// Coefficients in the standard coframe at a point, keyed by index tuple.
    fn evaluate(&self, point: Vec<f64>) -> PyResult<BTreeMap<Vec<usize>, f64>> {
        let std = self.0.to_standard();
        let env = Env::from_chart(std.chart(), &point);
        std.terms().map(|(idx, c)| Ok((idx.clone(), c.eval(&env).map_err(err)?))).collect()
    }

    fn __eq__(&self, other: &PyForm) -> bool {
        self.0.chart().names().eq(other.0.chart().names()) && self.0.sub(&other.0).is_ok_and(|d| d.is_zero_full())
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Form({})", self.0)
    }
}

/// Torus action by named generators, each a `{coordinate: component}` map.
#[pyclass(name = "Action", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyAction(ActionSpec);

#[pymethods]
impl PyAction {
    #[new]
    fn new(chart: &PyChart, generators: Vec<(String, BTreeMap<String, String>)>) -> PyResult<Self> {
        let mut gens = Vec::new();
        for (name, field) in generators {
            let pairs: Vec<(String, String)> = field.into_iter().collect();
            gens.push(Generator { name, field: VectorFieldExpr::parse(chart.0.clone(), &pairs).map_err(err)? });
        }
        Ok(PyAction(ActionSpec::new(chart.0.clone(), gens).map_err(err)?))
    }

    /// Circle action rotating one coordinate.
    #[staticmethod]
    fn rotation(chart: &PyChart, angle: &str) -> PyResult<Self> {
        Ok(PyAction(ActionSpec::rotation(chart.0.clone(), angle).map_err(err)?))
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }
}

/// Moment maps with `ι_ξ ω = -dμ`, one dict per generator.
#[pyfunction]
#[pyo3(signature = (form, action, base = None))]
fn moment_map(form: &PyForm, action: &PyAction, base: Option<Vec<f64>>) -> PyResult<Vec<BTreeMap<String, String>>> {
    let maps = compute_moment(&form.0, &action.0, base.as_deref()).map_err(err)?;
    Ok(maps
        .into_iter()
        .map(|mm| {
            let mut d = BTreeMap::new();
            d.insert("generator".into(), mm.generator);
            d.insert("mu".into(), mm.mu.to_string());
            d.insert("symbolic".into(), mm.symbolic.to_string());
            if let Some(s) = mm.split {
                let cs: Vec<String> = (1..=s.m as usize).map(|i| s.c(i).simplify_full().to_string()).collect();
                d.insert("c".into(), cs.join(", "));
                d.insert("mu0".into(), s.smooth.to_string());
            }
            d
        })
        .collect())
}

/// Laurent decomposition: `alphas`, `beta` and the reconstruction residual on
/// `|t| <= 0.5`.
#[pyfunction]
#[pyo3(signature = (form, order = DEFAULT_ORDER))]
fn laurent(form: &PyForm, order: i64) -> PyResult<(Vec<PyForm>, PyForm, f64)> {
    let d = decompose_2form(&form.0, order).map_err(err)?;
    let residual = d.residual(&form.0, &residual_grid(form.0.chart(), 9, 0.5)).map_err(err)?;
    Ok((d.alphas.iter().cloned().map(PyForm).collect(), PyForm(d.beta.clone()), residual))
}

/// `(epsilon, derivative order, sup deviation)` rows of the bivector
/// convergence report on an off-`Z` grid.
#[pyfunction]
#[pyo3(signature = (form, epsilons, t_max = 0.5, n = 40))]
fn convergence(form: &PyForm, epsilons: Vec<f64>, t_max: f64, n: usize) -> PyResult<Vec<(f64, usize, f64)>> {
    let pts = off_z_grid(form.0.chart(), t_max, n, 2);
    let rows = convergence_report(&form.0, &epsilons, &pts).map_err(err)?;
    Ok(rows.into_iter().map(|r| (r.epsilon, r.order, r.sup_deviation)).collect())
}

/// Fold points of the desingularized form on a tensor grid.
#[pyfunction]
#[pyo3(signature = (form, epsilon, n = 11, t_max = 0.5))]
fn folds(form: &PyForm, epsilon: f64, n: usize, t_max: f64) -> PyResult<Vec<Vec<f64>>> {
    let profile = DesingProfile::for_order(form.0.chart().m(), epsilon).map_err(err)?;
    let de = desingularize(&form.0, &profile).map_err(err)?;
    let verdict = fold_check(&de, &SampleGrid::for_chart(form.0.chart(), n, t_max)).map_err(err)?;
    Ok(verdict.folds().iter().map(|f| f.point.clone()).collect())
}

/// The cotangent normal-form model on `(theta, t, x1, y1, ...)`.
#[pyclass(name = "CotangentModel", frozen, skip_from_py_object)]
struct PyModel(reduction::CotangentModel);

fn levels(levels: Vec<(usize, String)>) -> PyResult<Vec<(usize, Rational)>> {
    levels.into_iter().map(|(j, r)| Ok((j, rational(&r)?))).collect()
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (n, m, c, planes = Vec::new()))]
    fn new(n: usize, m: u32, c: Vec<String>, planes: Vec<usize>) -> PyResult<Self> {
        let c = c.iter().map(|s| rational(s)).collect::<PyResult<Vec<_>>>()?;
        Ok(PyModel(build_cotangent_model(n, m, &c, &planes).map_err(err)?))
    }

    #[getter]
    fn form(&self) -> PyForm {
        PyForm(self.0.form.clone())
    }

    fn action(&self) -> PyResult<PyAction> {
        Ok(PyAction(self.0.action().map_err(err)?))
    }

    /// Fully reduced form; `levels` are `(plane, rho)` pairs.
    #[pyo3(signature = (levels = Vec::new(), slice_first = false))]
    fn reduce(&self, levels: Vec<(usize, String)>, slice_first: bool) -> PyResult<PyForm> {
        let r = reduction::reduce(&self.0, &self::levels(levels)?, slice_first).map_err(err)?;
        Ok(PyForm(r.form))
    }

    /// Deviation between reduction before and after desingularization.
    #[pyo3(signature = (epsilon, levels = Vec::new()))]
    fn check_commutation(&self, epsilon: f64, levels: Vec<(usize, String)>) -> PyResult<f64> {
        let profile = DesingProfile::for_order(self.0.m(), epsilon).map_err(err)?;
        let r = reduction::check_commutation(&self.0, &profile, &self::levels(levels)?).map_err(err)?;
        Ok(r.deviation)
    }
}

/// Abelian quasi-Hamiltonian space with torus-valued moment angles.
#[pyclass(name = "QuasiSpace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQuasi(quasi::QuasiSpace);

#[pymethods]
impl PyQuasi {
    /// Exponentiate a Hamiltonian b^m-space.
    #[staticmethod]
    fn exponentiate(form: &PyForm, action: &PyAction) -> PyResult<Self> {
        Ok(PyQuasi(quasi::exponentiate_space(&form.0, &action.0, None).map_err(err)?))
    }

    /// Space with explicit moment angles and the identity pairing.
    #[staticmethod]
    fn with_angles(form: &PyForm, action: &PyAction, angles: Vec<String>) -> PyResult<Self> {
        let chart = form.0.chart();
        let phi = angles.iter().map(|a| bmsymp::parse_expr(a, chart)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let q = quasi::QuasiSpace::new(form.0.clone(), quasi::identity_pairing(phi.len()), phi, action.0.clone());
        Ok(PyQuasi(q.map_err(err)?))
    }

    #[getter]
    fn sigma(&self) -> PyForm {
        PyForm(self.0.sigma.clone())
    }

    #[getter]
    fn angles(&self) -> Vec<String> {
        self.0.phi.iter().map(ToString::to_string).collect()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    /// Fusion along the first `shared` circle factors.
    #[pyo3(signature = (other, shared = 1))]
    fn fuse(&self, other: &PyQuasi, shared: usize) -> PyResult<PyQuasi> {
        Ok(PyQuasi(quasi::fuse(&self.0, &other.0, shared).map_err(err)?))
    }

    /// Reduce factor `k` at `"boundary"` or a rational angle; returns the
    /// reduced form.
    #[pyo3(signature = (k = 0, level = "boundary"))]
    fn reduce(&self, k: usize, level: &str) -> PyResult<PyForm> {
        let level = if level == "boundary" { QuasiLevel::Boundary } else { QuasiLevel::Angle(rational(level)?) };
        let r = quasi::quasi_reduce_abelian(&self.0, k, &level).map_err(err)?;
        Ok(PyForm(match r {
            QuasiReduction::Quasi(q) => q.sigma,
            QuasiReduction::Reduced(s) => s.form,
        }))
    }

    fn __repr__(&self) -> String {
        self.0.to_string()
    }
}

/// `Σ db_i ∧ da_i`, or its b-version when `mark` names a coordinate.
#[pyfunction]
#[pyo3(signature = (genus, mark = None))]
fn ab_form(genus: usize, mark: Option<&str>) -> PyResult<PyForm> {
    let hc = moduli::HolonomyChart::new(genus);
    let w = match mark {
        Some(m) => moduli::singular_ab_form(&hc.with_mark(m).map_err(err)?),
        None => moduli::ab_form(&hc),
    };
    Ok(PyForm(w.map_err(err)?))
}

/// `(epsilon, far deviation, near deviation)` for the b²-torus family.
#[pyfunction]
fn b2_limit(epsilons: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
    let r = moduli::b2_limit_check(&epsilons).map_err(err)?;
    Ok(r.rows.into_iter().map(|x| (x.epsilon, x.far_deviation, x.near_deviation)).collect())
}

/// Run a TOML manifest; returns `(passed, report text)`.
#[pyfunction]
fn run_manifest(path: PathBuf) -> PyResult<(bool, String)> {
    let report = bmsymp_cli::run_manifest(&path, &bmsymp_cli::Settings::default())
        .map_err(|e| BmError::new_err(e.to_string()))?;
    Ok((report.passed(), report.to_string()))
}

#[pymodule]
#[pyo3(name = "bmsymp")]
fn bmsymp_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BmError", m.py().get_type::<BmError>())?;
    m.add_class::<PyChart>()?;
    m.add_class::<PyForm>()?;
    m.add_class::<PyAction>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyQuasi>()?;
    m.add_function(wrap_pyfunction!(moment_map, m)?)?;
    m.add_function(wrap_pyfunction!(laurent, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(folds, m)?)?;
    m.add_function(wrap_pyfunction!(ab_form, m)?)?;
    m.add_function(wrap_pyfunction!(b2_limit, m)?)?;
    m.add_function(wrap_pyfunction!(run_manifest, m)?)?;
    Ok(())
}
