//! Uniform Cartesian grids.

use std::f64::consts::PI;

use crate::error::{CoreError, Result};

/// Default limit on the total number of grid points (2²⁶).
pub const DEFAULT_POINT_BUDGET: usize = 1 << 26;

/// Minimum number of points per axis.
pub const MIN_POINTS_PER_AXIS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Periodic,
    /// cos² mask applied over a rim of `rim_fraction` of the box on each side.
    Absorbing { rim_fraction: f64 },
}

impl Boundary {
    pub fn absorbing() -> Self {
        Boundary::Absorbing { rim_fraction: 0.1 }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    /// Box length per axis (bohr).
    pub box_lengths: Vec<f64>,
    /// Coordinate of the first node per axis (bohr).
    pub origin: Vec<f64>,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, box_lengths: Vec<f64>, origin: Vec<f64>, boundary: Boundary) -> Self {
        GridSpec { dims, box_lengths, origin, boundary }
    }

    /// Box centred on `center` along every axis.
    pub fn centered(dims: Vec<usize>, box_lengths: Vec<f64>, center: &[f64], boundary: Boundary) -> Self {
        let origin = box_lengths.iter().zip(center).map(|(l, c)| c - 0.5 * l).collect();
        GridSpec { dims, box_lengths, origin, boundary }
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, budget: usize) -> Result<()> {
        let n = self.dims.len();
        if n == 0 {
            return Err(CoreError::InvalidGrid("no axes".into()));
        }
        if self.box_lengths.len() != n || self.origin.len() != n {
            return Err(CoreError::InvalidGrid(format!(
                "{} dims but {} box lengths and {} origins",
                n,
                self.box_lengths.len(),
                self.origin.len()
            )));
        }
        if let Some(d) = self.dims.iter().find(|&&d| d < MIN_POINTS_PER_AXIS) {
            return Err(CoreError::InvalidGrid(format!("axis with {d} points (< {MIN_POINTS_PER_AXIS})")));
        }
        if let Some(l) = self.box_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(CoreError::InvalidGrid(format!("non-positive box length {l}")));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(CoreError::InvalidGrid("non-finite origin".into()));
        }
        if let Boundary::Absorbing { rim_fraction } = self.boundary {
            if !(rim_fraction > 0.0 && rim_fraction < 0.5) {
                return Err(CoreError::InvalidGrid(format!("rim fraction {rim_fraction} outside (0, 0.5)")));
            }
        }
        let points = self
            .dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .unwrap_or(usize::MAX);
        if points > budget {
            return Err(CoreError::BudgetExceeded { points, budget });
        }
        Ok(())
    }
}

/// A validated grid with precomputed coordinates and DFT wavenumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    spacing: Vec<f64>,
    coords: Vec<Vec<f64>>,
    wavenumbers: Vec<Vec<f64>>,
    strides: Vec<usize>,
    len: usize,
}

pub fn make_grid(spec: GridSpec) -> Result<Grid> {
    make_grid_with_budget(spec, DEFAULT_POINT_BUDGET)
}

pub fn make_grid_with_budget(spec: GridSpec, budget: usize) -> Result<Grid> {
    spec.validate(budget)?;
    let n = spec.ndim();
    let spacing: Vec<f64> = (0..n).map(|a| spec.box_lengths[a] / spec.dims[a] as f64).collect();
    let coords = (0..n)
        .map(|a| (0..spec.dims[a]).map(|i| spec.origin[a] + i as f64 * spacing[a]).collect())
        .collect();
    let wavenumbers = (0..n).map(|a| fft_wavenumbers(spec.dims[a], spacing[a])).collect();
    let mut strides = vec![1usize; n];
    for a in (0..n.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * spec.dims[a + 1];
    }
    let len = spec.len();
    Ok(Grid { spec, spacing, coords, wavenumbers, strides, len })
}

/// Wavenumbers in standard DFT order: 0, 1, …, N/2−1, −N/2, …, −1 (times 2π/L).
pub fn fft_wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * h);
    (0..n)
        .map(|i| {
            let m = if i < n.div_ceil(2) { i as isize } else { i as isize - n as isize };
            m as f64 * dk
        })
        .collect()
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn ndim(&self) -> usize {
        self.spec.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.spec.dims
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn boundary(&self) -> Boundary {
        self.spec.boundary
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn coords(&self, axis: usize) -> &[f64] {
        &self.coords[axis]
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Nyquist wavenumber π/h along `axis`.
    pub fn k_max(&self, axis: usize) -> f64 {
        PI / self.spacing[axis]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Volume element of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn origin(&self) -> &[f64] {
        &self.spec.origin
    }

    pub fn box_lengths(&self) -> &[f64] {
        &self.spec.box_lengths
    }

    /// Geometric centre of the periodic box (origin + L/2).
    pub fn center(&self) -> Vec<f64> {
        (0..self.ndim()).map(|a| self.spec.origin[a] + 0.5 * self.spec.box_lengths[a]).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in 0..self.ndim() {
            out[a] = flat / self.strides[a];
            flat %= self.strides[a];
        }
    }

    /// Coordinates of the node at `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.ndim()];
        self.unravel(flat, &mut idx);
        idx.iter().enumerate().map(|(a, &i)| self.coords[a][i]).collect()
    }

    /// Whether `p` lies in the interpolation domain: the node hull for
    /// absorbing grids, everywhere for periodic grids.
    pub fn contains(&self, p: &[f64]) -> bool {
        if self.spec.boundary.is_periodic() {
            return p.iter().all(|x| x.is_finite());
        }
        p.iter().enumerate().all(|(a, &x)| {
            let lo = self.spec.origin[a];
            let hi = lo + (self.spec.dims[a] - 1) as f64 * self.spacing[a];
            x >= lo && x <= hi
        })
    }

    /// Whether `p` lies where the absorbing mask is exactly one (inside the
    /// node hull and off the rim). Equivalent to `contains` on periodic grids.
    pub fn in_interior(&self, p: &[f64]) -> bool {
        match self.spec.boundary {
            Boundary::Periodic => self.contains(p),
            Boundary::Absorbing { rim_fraction } => p.iter().enumerate().all(|(a, &x)| {
                let l = self.spec.box_lengths[a];
                let c = self.spec.origin[a] + 0.5 * l;
                (x - c).abs() <= 0.5 * l - rim_fraction * l
            }),
        }
    }

    /// Wraps `p` into the primary periodic cell (no-op on absorbing grids).
    pub fn wrap(&self, p: &mut [f64]) {
        if !self.spec.boundary.is_periodic() {
            return;
        }
        for (a, x) in p.iter_mut().enumerate() {
            let lo = self.spec.origin[a];
            let l = self.spec.box_lengths[a];
            *x = lo + (*x - lo).rem_euclid(l);
        }
    }

    /// Nearest node index to `p` (clamped / wrapped as appropriate).
    pub fn nearest_node(&self, p: &[f64]) -> usize {
        let mut flat = 0;
        for a in 0..self.ndim() {
            let n = self.spec.dims[a] as isize;
            let mut i = ((p[a] - self.spec.origin[a]) / self.spacing[a]).round() as isize;
            i = if self.spec.boundary.is_periodic() { i.rem_euclid(n) } else { i.clamp(0, n - 1) };
            flat += i as usize * self.strides[a];
        }
        flat
    }

    /// Per-node absorbing mask (all ones for periodic grids).
    pub fn absorbing_mask(&self) -> Option<Vec<f64>> {
        let rim_fraction = match self.spec.boundary {
            Boundary::Periodic => return None,
            Boundary::Absorbing { rim_fraction } => rim_fraction,
        };
        let axis_masks: Vec<Vec<f64>> = (0..self.ndim())
            .map(|a| {
                let l = self.spec.box_lengths[a];
                let c = self.spec.origin[a] + 0.5 * l;
                let rim = rim_fraction * l;
                let inner = 0.5 * l - rim;
                self.coords[a]
                    .iter()
                    .map(|&x| {
                        let r = (x - c).abs();
                        if r <= inner {
                            1.0
                        } else if r >= inner + rim {
                            0.0
                        } else {
                            let u = (r - inner) / rim;
                            (0.5 * PI * u).cos().powi(2)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut mask = vec![1.0; self.len];
        let mut idx = vec![0; self.ndim()];
        for (flat, m) in mask.iter_mut().enumerate() {
            self.unravel(flat, &mut idx);
            *m = idx.iter().enumerate().map(|(a, &i)| axis_masks[a][i]).product();
        }
        Some(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_nyquist() {
        let g = make_grid(GridSpec::new(vec![256, 256], vec![96.0, 96.0], vec![0.0, 0.0], Boundary::Periodic)).unwrap();
        assert!((g.spacing()[0] - 0.375).abs() < 1e-15);
        assert!((g.k_max(1) - 8.377580409572781).abs() < 1e-12);
        // DFT ordering: last positive index then the Nyquist (negative) wavenumber.
        let k = g.wavenumbers(0);
        assert!(k[127] > 0.0 && k[128] < 0.0);
        assert!((k[128].abs() - g.k_max(0)).abs() < 1e-12);
    }

    #[test]
    fn unit_coordinates() {
        let g = make_grid(GridSpec::new(vec![8], vec![8.0], vec![0.0], Boundary::Periodic)).unwrap();
        assert_eq!(g.coords(0), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn budget_and_validation() {
        let err = make_grid(GridSpec::new(vec![1 << 27], vec![1.0], vec![0.0], Boundary::Periodic)).unwrap_err();
        assert!(matches!(err, CoreError::BudgetExceeded { .. }));
        assert!(make_grid(GridSpec::new(vec![8], vec![0.0], vec![0.0], Boundary::Periodic)).is_err());
        assert!(make_grid(GridSpec::new(vec![8], vec![-1.0], vec![0.0], Boundary::Periodic)).is_err());
        assert!(make_grid(GridSpec::new(vec![4], vec![1.0], vec![0.0], Boundary::Periodic)).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = make_grid(GridSpec::new(vec![8, 10, 12], vec![1.0; 3], vec![0.0; 3], Boundary::Periodic)).unwrap();
        let mut idx = [0; 3];
        for flat in [0, 17, 403, g.len() - 1] {
            g.unravel(flat, &mut idx);
            assert_eq!(g.flat_index(&idx), flat);
        }
    }

    #[test]
    fn mask_is_mirror_symmetric() {
        let spec = GridSpec::centered(vec![32], vec![16.0], &[0.0], Boundary::absorbing());
        let g = make_grid(spec).unwrap();
        let m = g.absorbing_mask().unwrap();
        assert_eq!(m[0], 0.0);
        assert_eq!(m[16], 1.0);
        for j in 1..16 {
            assert_eq!(m[16 + j], m[16 - j]);
        }
    }
}
