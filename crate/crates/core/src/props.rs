//! Seeded randomized checks of the expression and form engines, shared by
//! the test suite and the command-line `verify-all`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::ChartModel;
use crate::error::Result;
use crate::expr::{rat, Env, Expr};
use crate::forms::{Frame, SingularForm};

/// Random expression over `vars` built from polynomials, `sin`, `cos`,
/// `exp` and products, finite everywhere.
pub fn random_expr(rng: &mut impl Rng, vars: &[&str], depth: u32) -> Expr {
    let leaf = |rng: &mut dyn rand::RngCore| -> Expr {
        let v = Expr::sym(vars[rng.gen_range(0..vars.len())]);
        match rng.gen_range(0..3) {
            0 => Expr::constant(rat(rng.gen_range(-5..=5), rng.gen_range(1..=4))),
            1 => v,
            _ => v.powi(rng.gen_range(2..=3)),
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    let a = random_expr(rng, vars, depth - 1);
    match rng.gen_range(0..6) {
        0 => a + random_expr(rng, vars, depth - 1),
        1 => a * random_expr(rng, vars, depth - 1),
        2 => a.sin(),
        3 => a.cos(),
        4 => (a.scale(&rat(1, 4))).exp(),
        _ => leaf(rng),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error (relative for derivatives).
    pub worst: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Symbolic derivatives against central differences at random points.
pub fn derivative_suite(seed: u64, cases: usize, tolerance: f64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = ["x", "y", "z"];
    let (mut failures, mut worst) = (0, 0.0f64);
    for _ in 0..cases {
        let e = random_expr(&mut rng, &vars, 3);
        let var = vars[rng.gen_range(0..vars.len())];
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let env = Env::from_pairs(vars.iter().copied().zip(p.iter().copied()));
        let exact = e.diff(var).eval(&env)?;
        let h = 1e-5;
        let at = |d: f64| e.eval(&env.clone().with(var, env.get(var).unwrap_or(0.0) + d));
        let fd = (at(h)? - at(-h)?) / (2.0 * h);
        let err = (exact - fd).abs() / exact.abs().max(1.0);
        worst = worst.max(err);
        if err > tolerance {
            failures += 1;
        }
    }
    Ok(SuiteReport { cases, failures, worst })
}

/// `d(dα) = 0` for random 0-, 1- and 2-forms on a four-dimensional chart.
pub fn d_squared_suite(seed: u64, cases: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = ["x", "y", "z", "w"];
    let chart = Arc::new(ChartModel::lines(&names, None, 1)?);
    let mut failures = 0;
    for i in 0..cases {
        let degree = i % 3;
        let form = random_form(&mut rng, &chart, degree)?;
        if !form.ext_d().ext_d().is_zero_full() {
            failures += 1;
        }
    }
    Ok(SuiteReport { cases, failures, worst: 0.0 })
}

/// A form with one or two random terms of the given degree.
pub fn random_form(rng: &mut impl Rng, chart: &Arc<ChartModel>, degree: usize) -> Result<SingularForm> {
    let names: Vec<&str> = chart.names().collect();
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let mut idx: Vec<usize> = (0..chart.dim()).collect();
        for k in 0..degree {
            let j = rng.gen_range(k..idx.len());
            idx.swap(k, j);
        }
        idx.truncate(degree);
        terms.push((idx, random_expr(rng, &names, 2)));
    }
    SingularForm::from_terms(chart.clone(), degree, Frame::Standard, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_small() {
        assert!(derivative_suite(7, 40, 1e-5).unwrap().passed());
        assert!(d_squared_suite(7, 30).unwrap().passed());
    }

    #[test]
    fn seeded_is_deterministic() {
        let a = derivative_suite(3, 10, 1e-5).unwrap();
        let b = derivative_suite(3, 10, 1e-5).unwrap();
        assert_eq!(a, b);
    }
}
