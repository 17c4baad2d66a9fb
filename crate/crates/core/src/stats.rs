//! Histograms of trajectory ensembles against grid densities.

use crate::error::{CoreError, Result};
use crate::field::WaveField;

/// Freedman–Diaconis width 2·IQR·n^{−1/3}.
pub fn freedman_diaconis_width(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(CoreError::DegenerateDensity("need at least two samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let w = 2.0 * iqr / (s.len() as f64).cbrt();
    if !(w > 0.0) {
        return Err(CoreError::DegenerateDensity(format!("interquartile range {iqr}")));
    }
    Ok(w)
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let x = p * (sorted.len() - 1) as f64;
    let i = x.floor() as usize;
    let f = x - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, width: f64, bins: usize) -> Self {
        Histogram { lo, width, counts: vec![0; bins] }
    }

    /// Adds a sample; returns false when it falls outside the bins.
    pub fn add(&mut self, x: f64) -> bool {
        let b = ((x - self.lo) / self.width).floor();
        if b >= 0.0 && (b as usize) < self.counts.len() {
            self.counts[b as usize] += 1;
            true
        } else {
            false
        }
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let a = self.lo + bin as f64 * self.width;
        (a, a + self.width)
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Marginal of |ψ|² along `axis` as a probability mass per node, spread
/// uniformly over each node's cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub coords: Vec<f64>,
    pub spacing: f64,
    pub mass: Vec<f64>,
}

impl Marginal {
    pub fn of(field: &WaveField, axis: usize) -> Result<Self> {
        let g = &field.grid;
        if axis >= g.ndim() {
            return Err(CoreError::ShapeMismatch(format!("axis {axis} on a {}-d grid", g.ndim())));
        }
        let mut mass = vec![0.0; g.dims()[axis]];
        let mut idx = vec![0; g.ndim()];
        for (flat, z) in field.values.iter().enumerate() {
            g.unravel(flat, &mut idx);
            mass[idx[axis]] += z.norm_sqr();
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return Err(CoreError::DegenerateDensity("zero density".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Marginal { coords: g.coords(axis).to_vec(), spacing: g.spacing()[axis], mass })
    }

    /// Probability below `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.spacing;
        let mut acc = 0.0;
        for (c, m) in self.coords.iter().zip(&self.mass) {
            let lo = c - 0.5 * h;
            if x >= lo + h {
                acc += m;
            } else if x > lo {
                acc += m * (x - lo) / h;
            } else {
                break;
            }
        }
        acc
    }

    /// Mass in [a, b).
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Report {
    pub l1: f64,
    pub histogram: Histogram,
    /// Reference mass in each bin.
    pub reference: Vec<f64>,
    /// Reference mass outside the binned range (counted in `l1`).
    pub outside: f64,
}

/// L¹ distance between the Freedman–Diaconis histogram of `samples` and the
/// marginal, both as probability distributions over the bins.
pub fn l1_against_marginal(samples: &[f64], marginal: &Marginal) -> Result<L1Report> {
    let width = freedman_diaconis_width(samples)?;
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bins = (((hi - lo) / width).floor() as usize + 1).max(1);
    let mut histogram = Histogram::new(lo, width, bins);
    for &x in samples {
        histogram.add(x);
    }
    let n = samples.len() as f64;
    let mut l1 = 0.0;
    let mut reference = Vec::with_capacity(bins);
    for b in 0..bins {
        let (a, e) = histogram.edges(b);
        let m = marginal.mass_between(a, e);
        reference.push(m);
        l1 += (histogram.counts[b] as f64 / n - m).abs();
    }
    let (_, top) = histogram.edges(bins - 1);
    let outside = marginal.cdf(lo) + (1.0 - marginal.cdf(top));
    l1 += outside;
    Ok(L1Report { l1, histogram, reference, outside })
}

/// L¹ distance between two normalized distributions on the same bins.
pub fn l1_between(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_and_width() {
        let s: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(quantile(&s, 0.25), 25.0);
        assert_eq!(quantile(&s, 0.5), 50.0);
        let w = freedman_diaconis_width(&s).unwrap();
        assert!((w - 2.0 * 50.0 / 101f64.cbrt()).abs() < 1e-12);
        assert!(freedman_diaconis_width(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn uniform_marginal_cdf() {
        let m = Marginal { coords: vec![0.5, 1.5, 2.5, 3.5], spacing: 1.0, mass: vec![0.25; 4] };
        assert_eq!(m.cdf(0.0), 0.0);
        assert_eq!(m.cdf(4.0), 1.0);
        assert!((m.cdf(2.0) - 0.5).abs() < 1e-15);
        assert!((m.mass_between(0.5, 1.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn histogram_binning() {
        let mut h = Histogram::new(0.0, 0.5, 4);
        assert!(h.add(0.0) && h.add(1.99) && !h.add(2.0) && !h.add(-0.1));
        assert_eq!(h.counts, vec![1, 0, 0, 1]);
        assert_eq!(h.center(1), 0.75);
    }
}
