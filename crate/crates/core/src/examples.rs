//! Ready-made charts, forms and actions used by the tests, the CLI and the
//! Python bindings.

use std::sync::Arc;

use crate::chart::{ChartModel, Coordinate};
use crate::error::Result;
use crate::expr::{parse_expr, Expr};
use crate::forms::{Frame, SingularForm};
use crate::moment::ActionSpec;

/// `(h, θ)` with `Z = {h = 0}`.
pub fn sphere_chart(m: u32) -> Result<Arc<ChartModel>> {
    Ok(Arc::new(ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), m)?))
}

/// `dh/h^m ∧ dθ`.
pub fn sphere_form(m: u32) -> Result<SingularForm> {
    let chart = sphere_chart(m)?;
    let c = Expr::sym("h").powi(-(m as i64));
    SingularForm::from_terms(chart, 2, Frame::Standard, vec![(vec![0, 1], c)])
}

/// `(θ₁, θ₂)` with `Z = {θ₁ = 0}`.
pub fn torus_chart(m: u32) -> Result<Arc<ChartModel>> {
    Ok(Arc::new(ChartModel::new(
        vec![Coordinate::line("theta1"), Coordinate::angle("theta2")],
        Some("theta1"),
        m,
    )?))
}

/// `dθ₁/sin^m θ₁ ∧ dθ₂`.
pub fn torus_form(m: u32) -> Result<SingularForm> {
    let chart = torus_chart(m)?;
    let c = Expr::sym("theta1").sin().powi(-(m as i64));
    SingularForm::from_terms(chart, 2, Frame::Standard, vec![(vec![0, 1], c)])
}

pub fn sphere_action(m: u32) -> Result<ActionSpec> {
    ActionSpec::rotation(sphere_chart(m)?, "theta")
}

pub fn torus_action(m: u32) -> Result<ActionSpec> {
    ActionSpec::rotation(torus_chart(m)?, "theta2")
}

/// The closed-form Hamiltonian of `∂θ₂` for the torus form, written with
/// `₂F₁(1/2, (1-m)/2; (3-m)/2; sin²θ₁)`. Defined for `m >= 2`; for odd `m`
/// the lower parameter is a non-positive integer at `m = 3, 5, ...`, so only
/// even `m` are accepted.
pub fn torus_hamiltonian(m: u32) -> Result<Expr> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(crate::Error::InvalidInput(format!("closed-form torus Hamiltonian needs even m >= 2, got {m}")));
    }
    let m = m as i64;
    let text = format!(
        "-abs(cos(theta1))/cos(theta1) * hyp2f1(1/2, {}/2, {}/2; sin(theta1)^2) / (({}) * sin(theta1)^{})",
        1 - m,
        3 - m,
        1 - m,
        m - 1
    );
    parse_expr(&text, &*torus_chart(m as u32)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_free;

    #[test]
    fn torus_hamiltonian_m2_is_cot() {
        let h = torus_hamiltonian(2).unwrap().simplify_full();
        assert_eq!(h, parse_free("cot(theta1)").unwrap().simplify_full());
        assert!(torus_hamiltonian(3).is_err());
    }

    #[test]
    fn fixtures_are_closed() {
        for m in 1..=4 {
            assert!(sphere_form(m).unwrap().ext_d().is_zero_full());
            assert!(torus_form(m).unwrap().ext_d().is_zero_full());
        }
    }
}
