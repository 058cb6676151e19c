//! Numeric Gauss hypergeometric function.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

const CUTOFF: f64 = 1e-15;
const MAX_TERMS: usize = 2_000_000;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

/// Direct Gauss series, summed until the relative term size drops below 1e-15.
pub fn gauss_series(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(Error::SingularEvaluation(format!("hyp2f1 with c = {c}")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * x;
        sum += term;
        if term == 0.0 || term.abs() <= CUTOFF * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::SeriesDomain(x))
}

fn terminates(a: f64, b: f64) -> bool {
    is_nonpositive_integer(a) || is_nonpositive_integer(b)
}

/// ₂F₁(a, b; c; x) for real x < 1.
///
/// Negative arguments go through the Pfaff transformation, arguments above
/// 0.9 through the connection formula around x = 1 whenever c − a − b is not
/// an integer.
pub fn hyp2f1(a: f64, b: f64, c: f64, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::SingularEvaluation("hyp2f1 at NaN".into()));
    }
    if terminates(a, b) {
        return gauss_series(a, b, c, x);
    }
    if x >= 1.0 {
        return Err(Error::SeriesDomain(x));
    }
    if x < 0.0 {
        let z = x / (x - 1.0);
        return Ok((1.0 - x).powf(-a) * hyp2f1(a, c - b, c, z)?);
    }
    if x <= 0.9 {
        return gauss_series(a, b, c, x);
    }
    let s = c - a - b;
    if s.fract() == 0.0 {
        return gauss_series(a, b, c, x);
    }
    let y = 1.0 - x;
    let g = gamma(c);
    let first = if is_nonpositive_integer(c - a) || is_nonpositive_integer(c - b) {
        0.0
    } else {
        g * gamma(s) * rgamma(c - a) * rgamma(c - b) * gauss_series(a, b, 1.0 - s, y)?
    };
    let second = if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        0.0
    } else {
        y.powf(s) * g * gamma(-s) * rgamma(a) * rgamma(b) * gauss_series(c - a, c - b, 1.0 + s, y)?
    };
    let v = first + second;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SingularEvaluation(format!("hyp2f1({a}, {b}; {c}; {x})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_root_identity() {
        let v = hyp2f1(0.5, -0.5, 0.5, 0.36).unwrap();
        assert!((v - 0.8).abs() < 1e-14);
        for i in 0..=90 {
            let s = i as f64 / 100.0;
            let v = hyp2f1(0.5, -0.5, 0.5, s).unwrap();
            assert!((v - (1.0 - s).sqrt()).abs() < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn near_one_uses_connection() {
        for s in [0.95, 0.99, 0.999_999] {
            let v = hyp2f1(0.5, -0.5, 0.5, s).unwrap();
            assert!((v - (1.0 - s).sqrt()).abs() < 1e-12, "s = {s}");
        }
        // 2F1(1,1;2;x) = -log(1-x)/x has integer c - a - b.
        let x = 0.95;
        let v = hyp2f1(1.0, 1.0, 2.0, x).unwrap();
        assert!((v + (1.0 - x).ln() / x).abs() < 1e-10);
    }

    #[test]
    fn negative_arguments() {
        // 2F1(1,1;2;x) = -log(1-x)/x
        for x in [-0.3, -2.0, -10.0] {
            let v = hyp2f1(1.0, 1.0, 2.0, x).unwrap();
            let want = -(1.0f64 - x).ln() / x;
            assert!((v - want).abs() < 1e-12 * want.abs().max(1.0), "x = {x}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(hyp2f1(0.5, 0.5, 1.5, 1.0), Err(Error::SeriesDomain(_))));
        assert!(matches!(hyp2f1(0.5, 0.5, 1.5, 2.5), Err(Error::SeriesDomain(_))));
        // terminating series is a polynomial
        assert!((hyp2f1(-1.0, 1.0, 1.0, 3.0).unwrap() + 2.0).abs() < 1e-15);
    }
}
