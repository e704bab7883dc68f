//! Far-field plane-wave model: detector layout, candidate direction grids,
//! sensing matrices and synthetic data.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{norm2, normalize_columns, ComplexMatrix, ComplexVector};
use crate::rng::CounterRng;

pub type Vec3 = [f64; 3];

/// Unit direction for azimuth `theta` and polar angle `phi`.
pub fn direction(theta: f64, phi: f64) -> Vec3 {
    [theta.cos() * phi.sin(), theta.sin() * phi.sin(), phi.cos()]
}

/// `(theta, phi)` with `theta` in `[0, 2 pi)` and `phi` in `[0, pi]`.
pub fn spherical(d: &Vec3) -> (f64, f64) {
    let phi = d[2].clamp(-1.0, 1.0).acos();
    let theta = d[1].atan2(d[0]).rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    (if theta >= TAU { 0.0 } else { theta }, phi)
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorArray {
    directions: Vec<Vec3>,
    omega_r: f64,
}

impl DetectorArray {
    pub fn new(directions: Vec<Vec3>, omega_r: f64) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidArgument("detector array needs at least one detector".into()));
        }
        if !(omega_r.is_finite() && omega_r > 0.0) {
            return Err(Error::InvalidArgument(format!("omega_r must be positive, got {omega_r}")));
        }
        for d in &directions {
            if (dot(d, d).sqrt() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("detector directions must be unit vectors".into()));
            }
        }
        Ok(Self { directions, omega_r })
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn count(&self) -> usize {
        self.directions.len()
    }

    pub fn omega_r(&self) -> f64 {
        self.omega_r
    }
}

/// Fibonacci lattice on the unit sphere:
/// `phi_m = acos(1 - 2(m + 1/2)/M)`, `theta_m = 2 pi m / golden`.
pub fn fibonacci_sphere_detectors(m: usize, omega_r: f64) -> Result<DetectorArray> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let dirs = (0..m)
        .map(|i| {
            let phi = (1.0 - 2.0 * (i as f64 + 0.5) / m as f64).acos();
            let theta = TAU * i as f64 / golden;
            direction(theta, phi)
        })
        .collect();
    DetectorArray::new(dirs, omega_r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridShape {
    OneD { n: usize },
    /// `n1` azimuth steps by `n2` polar steps, azimuth index fastest.
    TwoD { n1: usize, n2: usize },
    Scattered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    directions: Vec<Vec3>,
    spherical: Vec<(f64, f64)>,
    spacing: (f64, f64),
    shape: GridShape,
}

impl AngleGrid {
    /// Grid from `(theta, phi)` pairs, treated as unstructured.
    pub fn from_spherical(coords: Vec<(f64, f64)>, spacing: (f64, f64)) -> Self {
        Self::build(coords, spacing, GridShape::Scattered)
    }

    fn build(coords: Vec<(f64, f64)>, spacing: (f64, f64), shape: GridShape) -> Self {
        let coords: Vec<(f64, f64)> = coords.into_iter().map(|(t, p)| (t.rem_euclid(TAU), p)).collect();
        let directions = coords.iter().map(|&(t, p)| direction(t, p)).collect();
        Self {
            directions,
            spherical: coords,
            spacing,
            shape,
        }
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn spherical_coords(&self) -> &[(f64, f64)] {
        &self.spherical
    }

    /// `(h_theta, h_phi)`; `h_phi` is zero for the equatorial grid.
    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Lattice position `(m, n)` (both zero-based) of index `j` on a 2D grid.
    pub fn lattice_position(&self, j: usize) -> Option<(usize, usize)> {
        match self.shape {
            GridShape::TwoD { n1, n2 } if j < n1 * n2 => Some((j % n1, j / n1)),
            GridShape::OneD { n } if j < n => Some((j, 0)),
            _ => None,
        }
    }

    /// Inverse of [`lattice_position`](Self::lattice_position).
    pub fn lattice_index(&self, m: usize, n: usize) -> Option<usize> {
        match self.shape {
            GridShape::TwoD { n1, n2 } if m < n1 && n < n2 => Some(m + n1 * n),
            GridShape::OneD { n: len } if m < len && n == 0 => Some(m),
            _ => None,
        }
    }
}

/// `N` equatorial directions at azimuths `2 pi n / N`, `n = 1..=N`.
pub fn grid_1d(n: usize) -> Result<AngleGrid> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("1D grid needs N >= 2, got {n}")));
    }
    let coords = (1..=n).map(|i| (TAU * i as f64 / n as f64, PI / 2.0)).collect();
    Ok(AngleGrid::build(coords, (TAU / n as f64, 0.0), GridShape::OneD { n }))
}

/// `theta_m = 2 pi m / N1`, `phi_n = pi n / N2` for `m = 1..=N1`,
/// `n = 1..=N2`; index `(m - 1) + N1 (n - 1)`.
pub fn grid_2d(n1: usize, n2: usize) -> Result<AngleGrid> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidArgument(format!("2D grid needs N1, N2 >= 2, got {n1} x {n2}")));
    }
    let mut coords = Vec::with_capacity(n1 * n2);
    for n in 1..=n2 {
        for m in 1..=n1 {
            coords.push((TAU * m as f64 / n1 as f64, PI * n as f64 / n2 as f64));
        }
    }
    Ok(AngleGrid::build(
        coords,
        (TAU / n1 as f64, PI / n2 as f64),
        GridShape::TwoD { n1, n2 },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    pub angles: Vec<Vec3>,
    pub amplitudes: Vec<Complex64>,
}

impl SourceSet {
    pub fn new(angles: Vec<Vec3>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if angles.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} angles but {} amplitudes",
                angles.len(),
                amplitudes.len()
            )));
        }
        Ok(Self { angles, amplitudes })
    }

    /// Sources sitting on grid points `indices` with the given amplitudes.
    pub fn on_grid(grid: &AngleGrid, indices: &[usize], amplitudes: &[Complex64]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= grid.len()) {
            return Err(Error::IndexOutOfRange { index: bad, len: grid.len() });
        }
        Self::new(indices.iter().map(|&j| grid.directions()[j]).collect(), amplitudes.to_vec())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

fn plane_wave(omega_r: f64, d: &Vec3, phi: &Vec3) -> Complex64 {
    Complex64::from_polar(1.0, omega_r * dot(d, phi))
}

/// `A_mj = exp(i omega_r d_m . Phi_j) / sqrt(M)` over arbitrary directions.
pub fn sensing_matrix_from_directions(det: &DetectorArray, dirs: &[Vec3]) -> Result<ComplexMatrix> {
    if dirs.is_empty() {
        return Err(Error::InvalidArgument("no candidate directions".into()));
    }
    let raw = ComplexMatrix::from_fn(det.count(), dirs.len(), |m, j| {
        plane_wave(det.omega_r(), &det.directions()[m], &dirs[j])
    })?;
    normalize_columns(&raw)
}

pub fn sensing_matrix(det: &DetectorArray, grid: &AngleGrid) -> Result<ComplexMatrix> {
    sensing_matrix_from_directions(det, grid.directions())
}

/// Noisy data `(b, eps)` with the same `1/sqrt(M)` scaling as the sensing
/// matrix, so on-grid sources satisfy `A x* = b - eps`. The noise is circular
/// complex Gaussian rescaled to `||eps|| = noise_level ||b - eps||`.
pub fn synthesize_data(
    det: &DetectorArray,
    sources: &SourceSet,
    noise_level: f64,
    seed: u64,
) -> Result<(ComplexVector, ComplexVector)> {
    if !(noise_level.is_finite() && noise_level >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {noise_level}")));
    }
    let scale = 1.0 / (det.count() as f64).sqrt();
    let clean: ComplexVector = det
        .directions()
        .iter()
        .map(|d| {
            sources
                .angles
                .iter()
                .zip(&sources.amplitudes)
                .map(|(theta, a)| a * plane_wave(det.omega_r(), d, theta))
                .sum::<Complex64>()
                * scale
        })
        .collect();
    let mut eps = vec![Complex64::new(0.0, 0.0); clean.len()];
    if noise_level > 0.0 {
        let mut rng = CounterRng::new(seed, 0x15B);
        for e in eps.iter_mut() {
            *e = rng.complex_normal();
        }
        let target = noise_level * norm2(&clean);
        let current = norm2(&eps);
        if current > 0.0 {
            for e in eps.iter_mut() {
                *e *= target / current;
            }
        }
    }
    let b = clean.iter().zip(&eps).map(|(c, e)| c + e).collect();
    Ok((b, eps))
}
