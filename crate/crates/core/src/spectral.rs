//! Periodic transverse grids and FFT-based spectral operators.
//!
//! Transforms are unnormalized forward and 1/N-normalized inverse, so that
//! `inverse(forward(x)) == x`. Flat arrays are row-major with x fastest.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// Discretisation of the transverse plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseGrid {
    dims: usize,
    points_per_axis: usize,
    periods: usize,
    domain_length: f64,
}

impl TransverseGrid {
    /// A periodic box of `periods` lattice periods per axis.
    pub fn new(dims: usize, points_per_axis: usize, lattice_period: f64, periods: usize) -> Result<Self> {
        if dims != 1 && dims != 2 {
            return Err(invalid("dims", format!("must be 1 or 2, got {dims}")));
        }
        if !points_per_axis.is_power_of_two() || points_per_axis < 8 {
            return Err(invalid(
                "points_per_axis",
                format!("must be a power of two >= 8, got {points_per_axis}"),
            ));
        }
        if periods == 0 || 3 * periods > points_per_axis {
            return Err(invalid(
                "periods",
                format!("lattice mode {periods} is not resolved by {points_per_axis} points"),
            ));
        }
        if !(lattice_period > 0.0 && lattice_period.is_finite()) {
            return Err(invalid("lattice_period", "must be > 0"));
        }
        Ok(Self {
            dims,
            points_per_axis,
            periods,
            domain_length: periods as f64 * lattice_period,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn spacing(&self) -> f64 {
        self.domain_length / self.points_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points_per_axis; self.dims]
    }

    /// Fundamental wavenumber 2π/L of the box.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.domain_length
    }

    /// Lattice wavenumber, which sits on mode index `periods`.
    pub fn lattice_wavenumber(&self) -> f64 {
        self.periods as f64 * self.dk()
    }

    /// x coordinate of flat index `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i % self.points_per_axis) as f64 * self.spacing()
    }

    /// Integer mode index of `q` along x, if `q` is a grid wavenumber.
    pub fn mode_index(&self, q: f64) -> Result<usize> {
        let j = q / self.dk();
        let jr = j.round();
        if !(q > 0.0) || (j - jr).abs() > 1e-9 * j.max(1.0) || jr as usize > self.points_per_axis / 2 {
            return Err(Error::NotOnGrid(q));
        }
        Ok(jr as usize)
    }
}

fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// FFT plans plus the wavenumber tables of a grid.
#[derive(Clone)]
pub struct Spectral {
    grid: TransverseGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    k2: Vec<f64>,
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: TransverseGrid) -> Self {
        let n = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let dk = grid.dk();
        let cutoff = (n / 3) as i64;
        let len = grid.len();
        let (mut kx, mut ky, mut k2, mut keep) = (
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
        );
        let rows = if grid.dims() == 2 { n } else { 1 };
        for iy in 0..rows {
            let jy = if grid.dims() == 2 { signed_index(iy, n) } else { 0 };
            for ix in 0..n {
                let jx = signed_index(ix, n);
                // The Nyquist mode has no first derivative.
                let dx = if 2 * ix == n { 0.0 } else { jx as f64 * dk };
                let dy = if 2 * iy == n { 0.0 } else { jy as f64 * dk };
                kx.push(dx);
                ky.push(dy);
                k2.push(((jx * jx + jy * jy) as f64) * dk * dk);
                keep.push(jx.abs() <= cutoff && jy.abs() <= cutoff);
            }
        }
        Self {
            grid,
            fwd,
            inv,
            kx,
            ky,
            k2,
            keep,
        }
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    /// |k|² per flat spectral index.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Largest |k|² that survives de-aliasing.
    pub fn k2_max_retained(&self) -> f64 {
        self.k2
            .iter()
            .zip(&self.keep)
            .filter(|(_, &k)| k)
            .fold(0.0f64, |m, (&v, _)| m.max(v))
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points_per_axis();
        assert_eq!(data.len(), self.grid.len());
        plan.process(data);
        if self.grid.dims() == 2 {
            let mut column = vec![Complex64::default(); n];
            for ix in 0..n {
                for iy in 0..n {
                    column[iy] = data[iy * n + ix];
                }
                plan.process(&mut column);
                for iy in 0..n {
                    data[iy * n + ix] = column[iy];
                }
            }
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Normalized inverse transform in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spec);
        spec.into_iter().map(|c| c.re).collect()
    }

    /// 2/3-rule truncation in spectral space.
    pub fn dealias_spectrum(&self, spec: &mut [Complex64]) {
        for (c, &keep) in spec.iter_mut().zip(&self.keep) {
            if !keep {
                *c = Complex64::default();
            }
        }
    }

    /// 2/3-rule truncation of a real field.
    pub fn dealias(&self, data: &[f64]) -> Vec<f64> {
        let mut spec = self.forward_real(data);
        self.dealias_spectrum(&mut spec);
        self.inverse_real(spec)
    }

    /// Gradient components (x, and y in 2D) of a real field.
    pub fn gradient(&self, data: &[f64]) -> Vec<Vec<f64>> {
        let spec = self.forward_real(data);
        let mut out = Vec::with_capacity(self.grid.dims());
        let axes: [&Vec<f64>; 2] = [&self.kx, &self.ky];
        for k in axes.iter().take(self.grid.dims()) {
            let deriv: Vec<Complex64> = spec
                .iter()
                .zip(k.iter())
                .map(|(c, &kk)| c * Complex64::new(0.0, kk))
                .collect();
            out.push(self.inverse_real(deriv));
        }
        out
    }

    /// Divergence of a vector field, de-aliased. The mean of the result is
    /// exactly zero.
    pub fn divergence(&self, components: &[Vec<f64>]) -> Vec<f64> {
        let axes: [&Vec<f64>; 2] = [&self.kx, &self.ky];
        let mut acc = vec![Complex64::default(); self.grid.len()];
        for (comp, k) in components.iter().zip(axes.iter()) {
            let spec = self.forward_real(comp);
            for ((a, c), &kk) in acc.iter_mut().zip(&spec).zip(k.iter()) {
                *a += c * Complex64::new(0.0, kk);
            }
        }
        self.dealias_spectrum(&mut acc);
        self.inverse_real(acc)
    }

    /// Laplacian of a real field.
    pub fn laplacian(&self, data: &[f64]) -> Vec<f64> {
        let mut spec = self.forward_real(data);
        for (c, &k2) in spec.iter_mut().zip(&self.k2) {
            *c *= -k2;
        }
        self.inverse_real(spec)
    }

    /// Multiply each mode by exp(−coeff·|k|²); exact heat-equation step.
    pub fn heat_step(&self, data: &mut [f64], coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let mut spec = self.forward_real(data);
        for (c, &k2) in spec.iter_mut().zip(&self.k2) {
            *c *= (-coeff * k2).exp();
        }
        let out = self.inverse_real(spec);
        data.copy_from_slice(&out);
    }

    /// Amplitude A of a component A·cos(jx·dk·x + φ) along x.
    pub fn mode_amplitude(&self, data: &[f64], jx: usize) -> f64 {
        let spec = self.forward_real(data);
        2.0 * spec[jx].norm() / data.len() as f64
    }
}
