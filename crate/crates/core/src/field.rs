//! Complex wavefields on a grid, derivative operators and off-grid sampling.

use std::f64::consts::PI;
use std::ops::{Add, Mul};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::fft::FftNd;
use crate::grid::Grid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// ψ(q, t) sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Arc<Grid>,
    pub values: Vec<Complex64>,
    /// Simulation time (a.u.).
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    Spectral,
    Central4,
}

impl WaveField {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let field = WaveField { grid, values, time };
        field.check_finite(0)?;
        Ok(field)
    }

    pub fn zeros(grid: Arc<Grid>, time: f64) -> Self {
        let n = grid.len();
        WaveField { grid, values: vec![ZERO; n], time }
    }

    pub fn check_finite(&self, step: usize) -> Result<()> {
        if let Some(i) = self.values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(CoreError::NonFinite {
                step,
                detail: format!("ψ at node {} ({:?}) is {}", i, self.grid.point(i), self.values[i]),
            });
        }
        Ok(())
    }

    /// ∫|ψ|² dq by grid quadrature.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_squared();
        if !(n2 > 0.0 && n2.is_finite()) {
            return Err(CoreError::DegenerateDensity(format!("norm² = {n2}")));
        }
        let s = 1.0 / n2.sqrt();
        self.values.par_iter_mut().for_each(|z| *z *= s);
        Ok(n2)
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// ⟨q_axis⟩ over |ψ|².
    pub fn mean_position(&self, axis: usize) -> f64 {
        let mut idx = vec![0; self.grid.ndim()];
        let (mut s, mut w) = (0.0, 0.0);
        for (flat, z) in self.values.iter().enumerate() {
            self.grid.unravel(flat, &mut idx);
            let p = z.norm_sqr();
            s += p * self.grid.coords(axis)[idx[axis]];
            w += p;
        }
        s / w
    }

    /// Standard deviation of q_axis over |ψ|².
    pub fn position_std(&self, axis: usize) -> f64 {
        let mean = self.mean_position(axis);
        let mut idx = vec![0; self.grid.ndim()];
        let (mut s, mut w) = (0.0, 0.0);
        for (flat, z) in self.values.iter().enumerate() {
            self.grid.unravel(flat, &mut idx);
            let p = z.norm_sqr();
            let d = self.grid.coords(axis)[idx[axis]] - mean;
            s += p * d * d;
            w += p;
        }
        (s / w).sqrt()
    }

    /// ⟨p_axis⟩ from the momentum-space density (ħ = 1).
    pub fn mean_momentum(&self, axis: usize) -> f64 {
        let mut spec = self.values.clone();
        FftNd::new(self.grid.dims()).forward(&mut spec);
        let mut idx = vec![0; self.grid.ndim()];
        let (mut s, mut w) = (0.0, 0.0);
        for (flat, z) in spec.iter().enumerate() {
            self.grid.unravel(flat, &mut idx);
            let p = z.norm_sqr();
            s += p * self.grid.wavenumbers(axis)[idx[axis]];
            w += p;
        }
        s / w
    }

    pub fn sample(&self, point: &[f64]) -> Result<Complex64> {
        interpolate(&self.grid, &self.values, point)
    }

    pub fn derivative(&self, axis: usize, order: usize, method: DerivativeMethod) -> Result<Vec<Complex64>> {
        derivative(&self.grid, &self.values, axis, order, method)
    }

    /// L² distance ‖ψ − φ‖ by grid quadrature.
    pub fn l2_distance(&self, other: &WaveField) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }
}

/// Normalized Gaussian wavepacket ∝ exp(−|q−q₀|²/(4σ²)) exp(i k₀·(q−q₀)),
/// the real-space form of a Gaussian momentum distribution of width 1/(2σ).
pub fn init_gaussian(grid: Arc<Grid>, center: &[f64], k0: &[f64], sigma: f64) -> Result<WaveField> {
    let n = grid.ndim();
    if center.len() != n || k0.len() != n {
        return Err(CoreError::ShapeMismatch(format!("grid is {n}-dimensional")));
    }
    let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
    if !(sigma > 3.0 * h) {
        return Err(CoreError::InvalidParameter(format!("sigma {sigma} is under-resolved (needs > 3h = {})", 3.0 * h)));
    }
    let kmax = (0..n).map(|a| grid.k_max(a)).fold(f64::INFINITY, f64::min);
    let knorm = k0.iter().map(|k| k * k).sum::<f64>().sqrt();
    if !(knorm < 0.5 * kmax) {
        return Err(CoreError::InvalidParameter(format!("|k0| = {knorm} aliases (needs < {})", 0.5 * kmax)));
    }
    let g = grid.clone();
    let mut values = vec![ZERO; grid.len()];
    values.par_iter_mut().enumerate().for_each(|(flat, z)| {
        let mut idx = vec![0; n];
        g.unravel(flat, &mut idx);
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..n {
            let d = periodic_offset(&g, a, g.coords(a)[idx[a]] - center[a]);
            r2 += d * d;
            phase += k0[a] * d;
        }
        *z = Complex64::from_polar((-r2 / (4.0 * sigma * sigma)).exp(), phase);
    });
    let mut field = WaveField { grid, values, time: 0.0 };
    field.normalize()?;
    Ok(field)
}

/// Minimum-image displacement on periodic grids; identity otherwise.
pub fn periodic_offset(grid: &Grid, axis: usize, d: f64) -> f64 {
    if grid.boundary().is_periodic() {
        let l = grid.box_lengths()[axis];
        d - l * (d / l).round()
    } else {
        d
    }
}

/// Corner nodes and weights of a multilinear interpolation (ndim ≤ 4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub len: usize,
    pub index: [usize; 16],
    pub weight: [f64; 16],
}

impl Stencil {
    pub fn apply<T>(&self, data: &[T]) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let mut acc = T::default();
        for c in 0..self.len {
            acc = acc + data[self.index[c]] * self.weight[c];
        }
        acc
    }

    pub fn corners(&self) -> &[usize] {
        &self.index[..self.len]
    }
}

pub fn stencil(grid: &Grid, point: &[f64]) -> Result<Stencil> {
    let n = grid.ndim();
    if point.len() != n {
        return Err(CoreError::ShapeMismatch(format!("{}-d point on a {n}-d grid", point.len())));
    }
    if n > 4 {
        return Err(CoreError::ShapeMismatch(format!("interpolation supports up to 4 axes, not {n}")));
    }
    if !grid.contains(point) {
        return Err(CoreError::OutOfBox { point: point.to_vec() });
    }
    let periodic = grid.boundary().is_periodic();
    let mut lo = [0usize; 4];
    let mut hi = [0usize; 4];
    let mut frac = [0.0f64; 4];
    for a in 0..n {
        let dim = grid.dims()[a];
        let mut s = (point[a] - grid.origin()[a]) / grid.spacing()[a];
        // Snap round-off so that nodes are reproduced bit-exactly.
        if (s - s.round()).abs() < 1e-9 {
            s = s.round();
        }
        let mut i0 = s.floor();
        let mut f = s - i0;
        if periodic {
            let i = (i0 as isize).rem_euclid(dim as isize) as usize;
            lo[a] = i;
            hi[a] = (i + 1) % dim;
        } else {
            if i0 as usize >= dim - 1 {
                i0 = (dim - 2) as f64;
                f = s - i0;
            }
            lo[a] = i0 as usize;
            hi[a] = lo[a] + 1;
        }
        frac[a] = f;
    }
    let strides = grid.strides();
    let mut st = Stencil { len: 1 << n, index: [0; 16], weight: [0.0; 16] };
    for corner in 0..st.len {
        let mut w = 1.0;
        let mut flat = 0;
        for a in 0..n {
            if corner >> a & 1 == 1 {
                w *= frac[a];
                flat += hi[a] * strides[a];
            } else {
                w *= 1.0 - frac[a];
                flat += lo[a] * strides[a];
            }
        }
        st.index[corner] = flat;
        st.weight[corner] = w;
    }
    Ok(st)
}

/// Multilinear interpolation of node values at an arbitrary point.
pub fn interpolate<T>(grid: &Grid, data: &[T], point: &[f64]) -> Result<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    Ok(stencil(grid, point)?.apply(data))
}

/// Spectral operators sharing one FFT plan.
#[derive(Debug, Clone)]
pub struct Spectral {
    grid: Arc<Grid>,
    fft: FftNd,
}

impl Spectral {
    pub fn new(grid: Arc<Grid>) -> Self {
        let fft = FftNd::new(grid.dims());
        Spectral { grid, fft }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn fft(&self) -> &FftNd {
        &self.fft
    }

    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut s = values.to_vec();
        self.fft.forward(&mut s);
        s
    }

    /// Inverse transform of `spectrum` multiplied by `factor(k-index)`.
    pub fn apply<F>(&self, spectrum: &[Complex64], factor: F) -> Vec<Complex64>
    where
        F: Fn(&[usize]) -> Complex64 + Sync,
    {
        let g = &self.grid;
        let n = g.ndim();
        let mut out = spectrum.to_vec();
        out.par_iter_mut().enumerate().for_each(|(flat, z)| {
            let mut idx = [0usize; 8];
            g.unravel(flat, &mut idx[..n]);
            *z *= factor(&idx[..n]);
        });
        self.fft.inverse(&mut out);
        out
    }

    /// Spectral factor for ∂^order along `axis`; the Nyquist mode of odd
    /// derivatives on even grids is dropped.
    pub fn derivative_factor(&self, axis: usize, order: usize, i: usize) -> Complex64 {
        let dim = self.grid.dims()[axis];
        let k = self.grid.wavenumbers(axis)[i];
        if order % 2 == 1 && dim % 2 == 0 && i == dim / 2 {
            return ZERO;
        }
        Complex64::new(0.0, k).powu(order as u32)
    }

    /// Mixed partial derivative ∂^{orders} of the field with the given spectrum.
    pub fn partial(&self, spectrum: &[Complex64], orders: &[usize]) -> Vec<Complex64> {
        self.apply(spectrum, |idx| {
            let mut f = Complex64::new(1.0, 0.0);
            for (a, &o) in orders.iter().enumerate() {
                if o > 0 {
                    f *= self.derivative_factor(a, o, idx[a]);
                }
            }
            f
        })
    }

    pub fn laplacian(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let g = &self.grid;
        self.apply(spectrum, |idx| {
            let k2: f64 = idx.iter().enumerate().map(|(a, &i)| g.wavenumbers(a)[i].powi(2)).sum();
            Complex64::new(-k2, 0.0)
        })
    }
}

/// ∂^order ψ / ∂q_axis^order for order ∈ {1, 2}.
pub fn derivative(grid: &Arc<Grid>, values: &[Complex64], axis: usize, order: usize, method: DerivativeMethod) -> Result<Vec<Complex64>> {
    if values.len() != grid.len() {
        return Err(CoreError::ShapeMismatch(format!("{} values on {} nodes", values.len(), grid.len())));
    }
    if axis >= grid.ndim() {
        return Err(CoreError::ShapeMismatch(format!("axis {axis} on a {}-d grid", grid.ndim())));
    }
    if !(order == 1 || order == 2) {
        return Err(CoreError::InvalidParameter(format!("derivative order {order} (must be 1 or 2)")));
    }
    match method {
        DerivativeMethod::Spectral => {
            let sp = Spectral::new(grid.clone());
            let spectrum = sp.forward(values);
            let mut orders = vec![0; grid.ndim()];
            orders[axis] = order;
            Ok(sp.partial(&spectrum, &orders))
        }
        DerivativeMethod::Central4 => Ok(central4(grid, values, axis, order)),
    }
}

/// Derivative of a real field.
pub fn derivative_real(grid: &Arc<Grid>, values: &[f64], axis: usize, order: usize, method: DerivativeMethod) -> Result<Vec<f64>> {
    let c: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(derivative(grid, &c, axis, order, method)?.into_iter().map(|z| z.re).collect())
}

/// Fourth-order central differences with periodic index wrap.
pub fn central4<T>(grid: &Grid, values: &[T], axis: usize, order: usize) -> Vec<T>
where
    T: Copy + Default + Send + Sync + Add<Output = T> + Mul<f64, Output = T>,
{
    let h = grid.spacing()[axis];
    let dim = grid.dims()[axis] as isize;
    let stride = grid.strides()[axis];
    let coeffs: [f64; 5] = if order == 1 {
        let c = 1.0 / (12.0 * h);
        [c, -8.0 * c, 0.0, 8.0 * c, -c]
    } else {
        let c = 1.0 / (12.0 * h * h);
        [-c, 16.0 * c, -30.0 * c, 16.0 * c, -c]
    };
    let mut out = vec![T::default(); values.len()];
    out.par_iter_mut().enumerate().for_each(|(flat, o)| {
        let i = ((flat / stride) % dim as usize) as isize;
        let base = flat as isize - i * stride as isize;
        let mut acc = T::default();
        for (m, c) in coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let j = (i + m as isize - 2).rem_euclid(dim);
            acc = acc + values[(base + j * stride as isize) as usize] * *c;
        }
        *o = acc;
    });
    out
}

/// Plane wave exp(i k·q) with unit amplitude (not normalized).
pub fn plane_wave(grid: Arc<Grid>, k: &[f64]) -> WaveField {
    let n = grid.ndim();
    let mut values = vec![ZERO; grid.len()];
    let mut idx = vec![0; n];
    for (flat, z) in values.iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        let ph: f64 = (0..n).map(|a| k[a] * grid.coords(a)[idx[a]]).sum();
        *z = Complex64::from_polar(1.0, ph);
    }
    WaveField { grid, values, time: 0.0 }
}

/// Grid-representable wavenumber closest to `k` along `axis`.
pub fn nearest_grid_wavenumber(grid: &Grid, axis: usize, k: f64) -> f64 {
    let dk = 2.0 * PI / grid.box_lengths()[axis];
    (k / dk).round() * dk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Boundary, GridSpec};

    fn grid1(n: usize, l: f64, boundary: Boundary) -> Arc<Grid> {
        Arc::new(make_grid(GridSpec::centered(vec![n], vec![l], &[0.0], boundary)).unwrap())
    }

    #[test]
    fn gaussian_moments() {
        let g = grid1(1024, 160.0, Boundary::Periodic);
        let k0 = 1.497;
        let f = init_gaussian(g, &[0.0], &[k0], 5.0).unwrap();
        assert!((f.norm_squared() - 1.0).abs() < 1e-10);
        assert!((f.position_std(0) - 5.0).abs() < 1e-6);
        assert!((f.mean_momentum(0) - k0).abs() / k0 < 1e-6);
        let lambda = 2.0 * PI / k0;
        assert!((lambda - 4.197).abs() < 1e-3);
    }

    #[test]
    fn gaussian_at_rest_is_real_positive() {
        let g = grid1(256, 64.0, Boundary::Periodic);
        let f = init_gaussian(g, &[0.0], &[0.0], 3.0).unwrap();
        assert!(f.values.iter().all(|z| z.im == 0.0 && z.re > 0.0));
        assert!(f.mean_momentum(0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_preconditions() {
        let g = grid1(64, 64.0, Boundary::Periodic);
        assert!(init_gaussian(g.clone(), &[0.0], &[0.0], 2.0).is_err());
        assert!(init_gaussian(g, &[0.0], &[2.0], 8.0).is_err());
    }

    #[test]
    fn sample_on_nodes_and_midpoints() {
        let g = grid1(16, 16.0, Boundary::absorbing());
        let vals: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, -(i as f64).powi(2))).collect();
        let f = WaveField::new(g.clone(), vals.clone(), 0.0).unwrap();
        for i in 0..16 {
            assert_eq!(f.sample(&[g.coords(0)[i]]).unwrap(), vals[i]);
        }
        let mid = 0.5 * (g.coords(0)[3] + g.coords(0)[4]);
        assert_eq!(f.sample(&[mid]).unwrap(), (vals[3] + vals[4]) * 0.5);
        assert!(matches!(f.sample(&[100.0]), Err(CoreError::OutOfBox { .. })));
    }

    #[test]
    fn spectral_derivative_of_plane_wave() {
        let g = grid1(64, 20.0, Boundary::Periodic);
        let k = nearest_grid_wavenumber(&g, 0, 2.0);
        let f = plane_wave(g.clone(), &[k]);
        let d = f.derivative(0, 1, DerivativeMethod::Spectral).unwrap();
        for (dz, z) in d.iter().zip(&f.values) {
            assert!((dz - Complex64::new(0.0, k) * z).norm() < 1e-10);
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = grid1(32, 10.0, Boundary::Periodic);
        let c = vec![Complex64::new(0.3, -0.2); 32];
        for m in [DerivativeMethod::Spectral, DerivativeMethod::Central4] {
            for o in [1, 2] {
                let d = derivative(&g, &c, 0, o, m).unwrap();
                assert!(d.iter().all(|z| z.norm() < 1e-12));
            }
        }
        assert!(derivative(&g, &c, 0, 3, DerivativeMethod::Spectral).is_err());
    }
}
