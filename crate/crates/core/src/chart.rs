//! Coordinate charts with a distinguished defining coordinate.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coordinate {
    pub name: String,
    pub periodic: bool,
}

impl Coordinate {
    pub fn line(name: &str) -> Self {
        Coordinate { name: name.to_string(), periodic: false }
    }

    pub fn angle(name: &str) -> Self {
        Coordinate { name: name.to_string(), periodic: true }
    }
}

/// Ordered coordinates, an optional defining coordinate `t` with `Z = {t = 0}`,
/// and the singularity order `m >= 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartModel {
    coords: Vec<Coordinate>,
    defining: Option<usize>,
    m: u32,
}

const RESERVED: &[&str] = &["sin", "cos", "tan", "cot", "exp", "abs", "log", "hyp2f1", "pi"];

impl ChartModel {
    pub fn new(coords: Vec<Coordinate>, defining: Option<&str>, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Chart("singularity order m must be at least 1".into()));
        }
        for (i, c) in coords.iter().enumerate() {
            let valid = c.name.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic() || ch == '_')
                && c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
            if !valid {
                return Err(Error::Chart(format!("invalid coordinate name `{}`", c.name)));
            }
            if RESERVED.contains(&c.name.as_str()) {
                return Err(Error::Chart(format!("coordinate name `{}` is reserved", c.name)));
            }
            if coords[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::Chart(format!("duplicate coordinate `{}`", c.name)));
            }
        }
        let defining = match defining {
            None => None,
            Some(name) => {
                let idx = coords
                    .iter()
                    .position(|c| c.name == name)
                    .ok_or_else(|| Error::UnknownCoordinate(name.to_string()))?;
                if coords[idx].periodic {
                    return Err(Error::Chart(format!("defining coordinate `{name}` must not be periodic")));
                }
                Some(idx)
            }
        };
        Ok(ChartModel { coords, defining, m })
    }

    /// Chart with only line coordinates.
    pub fn lines(names: &[&str], defining: Option<&str>, m: u32) -> Result<Self> {
        ChartModel::new(names.iter().map(|n| Coordinate::line(n)).collect(), defining, m)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn coords(&self) -> &[Coordinate] {
        &self.coords
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.coords.iter().map(|c| c.name.as_str())
    }

    pub fn name(&self, i: usize) -> &str {
        &self.coords[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownCoordinate(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn is_periodic(&self, i: usize) -> bool {
        self.coords[i].periodic
    }

    pub fn defining_index(&self) -> Option<usize> {
        self.defining
    }

    pub fn defining_name(&self) -> Option<&str> {
        self.defining.map(|i| self.name(i))
    }

    pub fn require_defining(&self) -> Result<(usize, &str)> {
        self.defining
            .map(|i| (i, self.name(i)))
            .ok_or_else(|| Error::Chart("chart has no defining coordinate".into()))
    }

    pub fn with_m(&self, m: u32) -> Result<Self> {
        ChartModel::new(self.coords.clone(), self.defining_name(), m)
    }

    /// Chart with the listed coordinates removed; the defining coordinate is
    /// dropped as well if it is among them.
    pub fn without(&self, drop: &[&str]) -> Result<Self> {
        let coords: Vec<Coordinate> = self.coords.iter().filter(|c| !drop.contains(&c.name.as_str())).cloned().collect();
        let defining = self.defining_name().filter(|d| !drop.contains(d));
        ChartModel::new(coords, defining, self.m)
    }

    /// Disjoint union of coordinates, keeping this chart's defining coordinate.
    pub fn product(&self, other: &ChartModel) -> Result<Self> {
        let mut coords = self.coords.clone();
        coords.extend(other.coords.iter().cloned());
        let defining = self.defining_name().or(other.defining_name());
        ChartModel::new(coords, defining, self.m.max(other.m))
    }
}

/// Tensor grid of sample points; each axis lists its values.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    pub axes: Vec<Vec<f64>>,
}

impl SampleGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Self {
        SampleGrid { axes }
    }

    /// `n` evenly spaced values on `[lo, hi]` (inclusive).
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![0.5 * (lo + hi)],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }

    /// Grid with `n` points per axis; the defining axis spans `[-t_max, t_max]`
    /// and contains `0`, angle axes avoid the seam, line axes span `[-1, 1]`.
    pub fn for_chart(chart: &ChartModel, n: usize, t_max: f64) -> Self {
        let mut axes = Vec::with_capacity(chart.dim());
        for i in 0..chart.dim() {
            let mut axis = if Some(i) == chart.defining_index() {
                SampleGrid::linspace(-t_max, t_max, n)
            } else if chart.is_periodic(i) {
                SampleGrid::linspace(0.3, 5.9, n)
            } else {
                SampleGrid::linspace(-1.0, 1.0, n)
            };
            if Some(i) == chart.defining_index() && !axis.contains(&0.0) {
                axis.push(0.0);
                axis.sort_by(f64::total_cmp);
            }
            axes.push(axis);
        }
        SampleGrid { axes }
    }

    /// Deterministic low-discrepancy points (Halton sequence) in a box.
    pub fn halton(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
        const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
        (1..=n)
            .map(|i| {
                bounds
                    .iter()
                    .enumerate()
                    .map(|(d, (lo, hi))| {
                        let base = PRIMES[d % PRIMES.len()] as f64;
                        let (mut f, mut r, mut k) = (1.0, 0.0, i as f64);
                        while k > 0.0 {
                            f /= base;
                            r += f * (k % base);
                            k = (k / base).floor();
                        }
                        lo + (hi - lo) * r
                    })
                    .collect()
            })
            .collect()
    }

    /// Default sampling box for a chart: `[-t_max, t_max]` on the defining
    /// axis, `(0.3, 5.9)` on angles, `[-1, 1]` on lines.
    pub fn chart_bounds(chart: &ChartModel, t_max: f64) -> Vec<(f64, f64)> {
        (0..chart.dim())
            .map(|i| {
                if Some(i) == chart.defining_index() {
                    (-t_max, t_max)
                } else if chart.is_periodic(i) {
                    (0.3, 5.9)
                } else {
                    (-1.0, 1.0)
                }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            return 0;
        }
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![]];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for p in &out {
                for v in axis {
                    let mut q = p.clone();
                    q.push(*v);
                    next.push(q);
                }
            }
            out = next;
        }
        if self.axes.is_empty() {
            return vec![];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defining_must_be_line() {
        let err = ChartModel::new(vec![Coordinate::angle("theta"), Coordinate::line("h")], Some("theta"), 1);
        assert!(matches!(err, Err(Error::Chart(_))));
        assert!(ChartModel::lines(&["h"], Some("h"), 0).is_err());
        assert!(ChartModel::lines(&["h", "h"], None, 1).is_err());
        assert!(ChartModel::lines(&["sin"], None, 1).is_err());
    }

    #[test]
    fn chart_grid_contains_z() {
        let chart = ChartModel::new(vec![Coordinate::line("h"), Coordinate::angle("theta")], Some("h"), 2).unwrap();
        let g = SampleGrid::for_chart(&chart, 10, 0.5);
        assert!(g.axes[0].contains(&0.0));
        assert_eq!(g.points().len(), g.len());
    }
}
