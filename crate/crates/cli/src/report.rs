use std::fmt::{self, Write as _};

/// Text lines plus named pass/fail checks, rendered in insertion order.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<String>,
    checks: Vec<Check>,
    /// Raw CSV appended after the report when no output path is set.
    pub csv: Option<String>,
}

#[derive(Debug)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report { lines: vec![title.into()], ..Default::default() }
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        for c in &self.checks {
            let mark = if c.passed { "pass" } else { "FAIL" };
            if c.detail.is_empty() {
                writeln!(f, "[{mark}] {}", c.name)?;
            } else {
                writeln!(f, "[{mark}] {} ({})", c.name, c.detail)?;
            }
        }
        writeln!(f, "result: {}", if self.passed() { "pass" } else { "fail" })?;
        if let Some(csv) = &self.csv {
            f.write_str(csv)?;
        }
        Ok(())
    }
}

/// Deviations and residuals: three significant digits.
pub fn sci(x: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{x:.3e}");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_checks() {
        let mut r = Report::new("demo");
        r.line("x = 1");
        r.check("first", true, "");
        r.check("second", false, sci(1.5e-3));
        assert!(!r.passed());
        let s = r.to_string();
        assert!(s.contains("[FAIL] second (1.500e-3)"));
        assert!(s.ends_with("result: fail\n"));
    }
}
