//! Multi-dimensional FFTs over row-major flat buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
struct AxisPlan {
    n: usize,
    stride: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Planned N-dimensional transform. The inverse is normalized by 1/N so that
/// `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct FftNd {
    dims: Vec<usize>,
    len: usize,
    axes: Vec<AxisPlan>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("dims", &self.dims).finish()
    }
}

impl FftNd {
    pub fn new(dims: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let mut strides = vec![1usize; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let axes = dims
            .iter()
            .zip(&strides)
            .map(|(&n, &stride)| AxisPlan {
                n,
                stride,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
            .collect();
        FftNd { dims: dims.to_vec(), len: dims.iter().product(), axes }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len, "buffer does not match the planned shape");
        for axis in &self.axes {
            transform_axis(axis, data, false);
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len, "buffer does not match the planned shape");
        for axis in &self.axes {
            transform_axis(axis, data, true);
        }
        let scale = 1.0 / self.len as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    /// Transform along a single axis (unnormalized in both directions).
    pub fn along_axis(&self, data: &mut [Complex64], axis: usize, inverse: bool) {
        transform_axis(&self.axes[axis], data, inverse);
    }
}

fn transform_axis(plan: &AxisPlan, data: &mut [Complex64], inverse: bool) {
    let fft = if inverse { &plan.inverse } else { &plan.forward };
    let n = plan.n;
    let stride = plan.stride;
    if stride == 1 {
        data.par_chunks_mut(n).for_each(|line| fft.process(line));
        return;
    }
    let block = n * stride;
    data.par_chunks_mut(block).for_each(|chunk| {
        let mut lines = vec![Complex64::new(0.0, 0.0); block];
        for j in 0..n {
            for i in 0..stride {
                lines[i * n + j] = chunk[j * stride + i];
            }
        }
        fft.process(&mut lines);
        for j in 0..n {
            for i in 0..stride {
                chunk[j * stride + i] = lines[i * n + j];
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft_2d(x: &[Complex64], n0: usize, n1: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n0 * n1];
        for k0 in 0..n0 {
            for k1 in 0..n1 {
                let mut s = Complex64::new(0.0, 0.0);
                for j0 in 0..n0 {
                    for j1 in 0..n1 {
                        let ph = -2.0 * std::f64::consts::PI * ((k0 * j0) as f64 / n0 as f64 + (k1 * j1) as f64 / n1 as f64);
                        s += x[j0 * n1 + j1] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[k0 * n1 + k1] = s;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let (n0, n1) = (8, 12);
        let x: Vec<Complex64> = (0..n0 * n1)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut y = x.clone();
        FftNd::new(&[n0, n1]).forward(&mut y);
        let z = naive_dft_2d(&x, n0, n1);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_3d() {
        let dims = [8, 10, 9];
        let x: Vec<Complex64> = (0..720).map(|i| Complex64::new((i as f64).sqrt(), -(i as f64) * 0.01)).collect();
        let f = FftNd::new(&dims);
        let mut y = x.clone();
        f.forward(&mut y);
        f.inverse(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-11);
        }
    }
}
