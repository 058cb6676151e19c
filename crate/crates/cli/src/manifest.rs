//! TOML model descriptions.
//!
//! ```toml
//! [chart]
//! coordinates = ["h", "theta"]
//! periodic = ["theta"]
//! defining = "h"
//! m = 2
//!
//! [form]
//! terms = [["1", "dh/h^2", "dtheta"]]
//!
//! [[action.generators]]
//! name = "theta"
//! field = { theta = "1" }
//!
//! [run]
//! command = "moment-map"
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use bmsymp::chart::{ChartModel, Coordinate};
use bmsymp::expr::{parse_expr, parse_rational, Rational};
use bmsymp::moment::{ActionSpec, Generator};
use bmsymp::quasi::{exponentiate_space, identity_pairing, QuasiSpace};
use bmsymp::reduction::{build_cotangent_model, CotangentModel};
use bmsymp::{SingularForm, VectorFieldExpr};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub chart: Option<ChartSection>,
    pub form: Option<FormSection>,
    pub action: Option<ActionSection>,
    /// Cotangent normal-form model, an alternative to chart/form/action.
    pub model: Option<ModelSection>,
    pub quasi: Option<QuasiSection>,
    pub run: RunSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub periodic: Vec<String>,
    pub defining: Option<String>,
    #[serde(default = "one")]
    pub m: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSection {
    /// Each term is `[coefficient, basis tag, basis tag]`.
    pub terms: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSection {
    #[serde(default)]
    pub generators: Vec<GeneratorSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub name: String,
    pub field: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub m: u32,
    pub c: Vec<String>,
    #[serde(default)]
    pub planes: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiSection {
    /// Pairing on the shared factor; identity when omitted.
    pub pairing: Option<Vec<Vec<String>>>,
    #[serde(default = "one_usize")]
    pub shared: usize,
    #[serde(default)]
    pub factors: Vec<FactorSection>,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSection {
    pub chart: ChartSection,
    pub form: FormSection,
    pub action: ActionSection,
    /// Moment angles; when omitted the space is exponentiated.
    pub angles: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub command: String,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Slice levels `"j=rho"`.
    #[serde(default)]
    pub levels: Vec<String>,
    #[serde(default)]
    pub stages: bool,
    pub grid: Option<usize>,
    pub taylor_order: Option<i64>,
    pub tolerance: Option<f64>,
    pub output: Option<String>,
    pub clip: Option<f64>,
    pub t_max: Option<f64>,
    /// Values of the non-defining coordinates for moment images.
    pub fixed: Option<Vec<f64>>,
    /// Base point normalizing moment maps.
    pub base: Option<Vec<f64>>,
    pub factor: Option<usize>,
    /// `"boundary"` or a rational angle.
    pub level: Option<String>,
    pub genus: Option<usize>,
    pub mark: Option<String>,
    #[serde(default)]
    pub b2_limit: bool,
    /// `[old, new, g]`: rewrite the reduced form through `old = g(new)`.
    pub substitute: Option<Vec<String>>,
}

pub fn load(path: &Path) -> Result<Manifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<Manifest, CliError> {
    toml::from_str(text).map_err(|e| CliError::Input(e.to_string()))
}

pub fn rational(text: &str) -> Result<Rational, CliError> {
    parse_rational(text).ok_or_else(|| CliError::Input(format!("`{text}` is not a rational number")))
}

impl ChartSection {
    pub fn build(&self) -> Result<Arc<ChartModel>, CliError> {
        for p in &self.periodic {
            if !self.coordinates.contains(p) {
                return Err(CliError::Input(format!("periodic coordinate `{p}` is not declared")));
            }
        }
        let coords = self
            .coordinates
            .iter()
            .map(|c| if self.periodic.contains(c) { Coordinate::angle(c) } else { Coordinate::line(c) })
            .collect();
        Ok(Arc::new(ChartModel::new(coords, self.defining.as_deref(), self.m)?))
    }
}

impl FormSection {
    pub fn build(&self, chart: &Arc<ChartModel>) -> Result<SingularForm, CliError> {
        let mut terms = Vec::new();
        for t in &self.terms {
            let (c, tags) = t.split_first().ok_or_else(|| CliError::Input("empty form term".into()))?;
            terms.push((c.clone(), tags.to_vec()));
        }
        Ok(SingularForm::from_literal(chart.clone(), &terms)?)
    }
}

impl ActionSection {
    pub fn build(&self, chart: &Arc<ChartModel>) -> Result<ActionSpec, CliError> {
        let mut gens = Vec::new();
        for g in &self.generators {
            let pairs: Vec<(String, String)> = g.field.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
            gens.push(Generator { name: g.name.clone(), field: VectorFieldExpr::parse(chart.clone(), &pairs)? });
        }
        Ok(ActionSpec::new(chart.clone(), gens)?)
    }
}

impl ModelSection {
    pub fn build(&self) -> Result<CotangentModel, CliError> {
        let c = self.c.iter().map(|s| rational(s)).collect::<Result<Vec<_>, _>>()?;
        Ok(build_cotangent_model(self.n, self.m, &c, &self.planes)?)
    }
}

impl FactorSection {
    pub fn build(&self) -> Result<QuasiSpace, CliError> {
        let chart = self.chart.build()?;
        let form = self.form.build(&chart)?;
        let action = self.action.build(&chart)?;
        match &self.angles {
            None => Ok(exponentiate_space(&form, &action, None)?),
            Some(angles) => {
                let phi = angles.iter().map(|a| parse_expr(a, &chart)).collect::<Result<Vec<_>, _>>()?;
                Ok(QuasiSpace::new(form, identity_pairing(phi.len()), phi, action)?)
            }
        }
    }
}

/// The chart, form and optional action of a manifest: from `[model]` when
/// present, otherwise from `[chart]`, `[form]` and `[action]`.
pub struct Package {
    pub form: SingularForm,
    pub action: Option<ActionSpec>,
    pub model: Option<CotangentModel>,
}

impl Manifest {
    pub fn package(&self) -> Result<Package, CliError> {
        if let Some(m) = &self.model {
            let model = m.build()?;
            return Ok(Package { form: model.form.clone(), action: Some(model.action()?), model: Some(model) });
        }
        let chart = self.chart.as_ref().ok_or_else(|| CliError::Input("missing [chart] section".into()))?.build()?;
        let form = self.form.as_ref().ok_or_else(|| CliError::Input("missing [form] section".into()))?.build(&chart)?;
        let action = self.action.as_ref().map(|a| a.build(&chart)).transpose()?;
        Ok(Package { form, action, model: None })
    }

    pub fn pairing(&self) -> Result<Option<Vec<Vec<Rational>>>, CliError> {
        let Some(q) = &self.quasi else { return Ok(None) };
        q.pairing
            .as_ref()
            .map(|rows| rows.iter().map(|r| r.iter().map(|s| rational(s)).collect()).collect())
            .transpose()
    }
}
