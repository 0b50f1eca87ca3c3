//! Signals on the 2-sphere: Legendre functions, spherical harmonics,
//! Gauss–Legendre sampling and the quadrature-exact harmonic transform.
//!
//! Phase convention: the associated Legendre functions carry the
//! Condon–Shortley factor (−1)^m, and negative orders follow
//! Y_ℓ^{−m} = (−1)^m conj(Y_ℓ^m). Every sign in the crate derives from these
//! two choices.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SstError};
use crate::region::Region;

/// Flat position of (ℓ, m) in degree-major order: ℓ² + ℓ + m.
#[inline]
pub fn flat_index(l: usize, m: isize) -> usize {
    debug_assert!(m.unsigned_abs() <= l);
    ((l * l + l) as isize + m) as usize
}

/// Inverse of [`flat_index`].
#[inline]
pub fn degree_order(idx: usize) -> (usize, isize) {
    let l = (idx as f64).sqrt() as usize;
    // guard against rounding in the square root
    let l = if (l + 1) * (l + 1) <= idx {
        l + 1
    } else if l * l > idx {
        l - 1
    } else {
        l
    };
    (l, idx as isize - (l * l + l) as isize)
}

/// Position of P̄_ℓ^m (m ≥ 0) inside a packed triangular Legendre table.
#[inline]
pub(crate) fn legendre_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Spectral coefficients (f)_ℓ^m of a signal bandlimited to `L`, stored in
/// degree-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    bandlimit: usize,
    coeffs: Vec<Complex64>,
}

impl HarmonicCoefficients {
    pub fn zeros(bandlimit: usize) -> Self {
        Self {
            bandlimit,
            coeffs: vec![Complex64::new(0.0, 0.0); bandlimit * bandlimit],
        }
    }

    pub fn from_vec(bandlimit: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != bandlimit * bandlimit {
            return Err(SstError::Domain(format!(
                "expected {} coefficients for L = {}, got {}",
                bandlimit * bandlimit,
                bandlimit,
                coeffs.len()
            )));
        }
        Ok(Self { bandlimit, coeffs })
    }

    /// Unit coefficient at (ℓ, m), zero elsewhere.
    pub fn delta(bandlimit: usize, l: usize, m: isize) -> Result<Self> {
        if l >= bandlimit || m.unsigned_abs() > l {
            return Err(SstError::Domain(format!(
                "(ℓ, m) = ({l}, {m}) outside bandlimit {bandlimit}"
            )));
        }
        let mut c = Self::zeros(bandlimit);
        c.coeffs[flat_index(l, m)] = Complex64::new(1.0, 0.0);
        Ok(c)
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn get(&self, l: usize, m: isize) -> Complex64 {
        self.coeffs[flat_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: isize, value: Complex64) {
        self.coeffs[flat_index(l, m)] = value;
    }

    /// Coefficients of degree ℓ, orders −ℓ..=ℓ.
    pub fn degree(&self, l: usize) -> &[Complex64] {
        &self.coeffs[l * l..(l + 1) * (l + 1)]
    }

    pub fn degree_mut(&mut self, l: usize) -> &mut [Complex64] {
        &mut self.coeffs[l * l..(l + 1) * (l + 1)]
    }

    /// Σ |(f)_ℓ^m|², the signal energy by Parseval.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }

    /// Coefficient-wise sum; both operands must share a bandlimit.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.bandlimit != other.bandlimit {
            return Err(SstError::BandlimitMismatch {
                signal: self.bandlimit,
                basis: other.bandlimit,
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            bandlimit: self.bandlimit,
            coeffs,
        })
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Gauss–Legendre nodes in cos θ times uniform longitude nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    bandlimit: usize,
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    phi: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereGrid {
    /// Grid exact for products of harmonics below `bandlimit`:
    /// `bandlimit` nodes in θ and 2·bandlimit − 1 nodes in φ.
    pub fn new(bandlimit: usize) -> Result<Self> {
        if bandlimit == 0 {
            return Err(SstError::Domain("bandlimit must be at least 1".into()));
        }
        let (x, w) = gauss_legendre(bandlimit);
        let n_phi = 2 * bandlimit - 1;
        Ok(Self {
            bandlimit,
            theta: x.iter().map(|c| c.acos()).collect(),
            cos_theta: x,
            phi: (0..n_phi)
                .map(|k| 2.0 * PI * k as f64 / n_phi as f64)
                .collect(),
            weights: w,
        })
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }
    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }
    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }
    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta
    }
    pub fn cos_theta_nodes(&self) -> &[f64] {
        &self.cos_theta
    }
    pub fn phi_nodes(&self) -> &[f64] {
        &self.phi
    }
    /// Gauss–Legendre weights in cos θ; they sum to 2.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Surface-area element of node (j, k): w_j · 2π / n_phi.
    pub fn node_area(&self, j: usize) -> f64 {
        self.weights[j] * 2.0 * PI / self.n_phi() as f64
    }

    pub fn len(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether analysis of a signal bandlimited to `l` is exact on this grid.
    pub fn supports(&self, l: usize) -> bool {
        self.n_theta() >= l && self.n_phi() + 1 >= 2 * l
    }
}

/// Samples f(θ_j, φ_k) on a [`SphereGrid`], θ-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSignal {
    grid: SphereGrid,
    values: Vec<Complex64>,
}

impl SphereSignal {
    pub fn new(grid: SphereGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SstError::GridMismatch(format!(
                "{} values for a {}×{} grid",
                values.len(),
                grid.n_theta(),
                grid.n_phi()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(θ, φ)` at every grid node.
    pub fn from_fn(grid: SphereGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.theta_nodes() {
            for &p in grid.phi_nodes() {
                values.push(f(t, p));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn value(&self, j: usize, k: usize) -> Complex64 {
        self.values[j * self.grid.n_phi() + k]
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// Gauss–Legendre nodes (descending, i.e. ascending θ) and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Orthonormalized associated Legendre values P̄_ℓ^m(x) for 0 ≤ m ≤ ℓ < L,
/// packed by [`legendre_index`]. P̄ includes √((2ℓ+1)/4π · (ℓ−m)!/(ℓ+m)!) and
/// the Condon–Shortley phase, so Y_ℓ^m(θ, φ) = P̄_ℓ^m(cos θ) e^{imφ}.
pub fn normalized_legendre_table(bandlimit: usize, x: f64) -> Vec<f64> {
    let mut table = vec![0.0; bandlimit * (bandlimit + 1) / 2];
    if bandlimit == 0 {
        return table;
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..bandlimit {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        table[legendre_index(m, m)] = pmm;
        if m + 1 < bandlimit {
            table[legendre_index(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        }
        for l in m + 2..bandlimit {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            table[legendre_index(l, m)] =
                a * (x * table[legendre_index(l - 1, m)] - b * table[legendre_index(l - 2, m)]);
        }
    }
    table
}

/// Unnormalized associated Legendre function P_ℓ^m(x), Condon–Shortley phase
/// included. Evaluated through the normalized recursion, so it stays stable
/// for large ℓ as long as the result itself is representable.
pub fn associated_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(SstError::Domain(format!("order {m} exceeds degree {l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(SstError::Domain(format!("argument {x} outside [-1, 1]")));
    }
    let table = normalized_legendre_table(l + 1, x);
    // (ℓ+m)!/(ℓ−m)! as a running product
    let ratio: f64 = ((l - m + 1)..=(l + m)).map(|k| k as f64).product();
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) / ratio).sqrt();
    Ok(table[legendre_index(l, m)] / norm)
}

/// Spherical harmonic Y_ℓ^m(θ, φ).
pub fn ylm(l: usize, m: isize, theta: f64, phi: f64) -> Result<Complex64> {
    if m.unsigned_abs() > l {
        return Err(SstError::Domain(format!(
            "|m| = {} exceeds ℓ = {l}",
            m.abs()
        )));
    }
    let am = m.unsigned_abs();
    let table = normalized_legendre_table(l + 1, theta.cos());
    let p = table[legendre_index(l, am)];
    let sign = if m < 0 && am % 2 == 1 { -1.0 } else { 1.0 };
    Ok(Complex64::from_polar(sign * p, m as f64 * phi))
}

/// P̄_ℓ^m for signed m, read from a packed table.
#[inline]
pub(crate) fn signed_legendre(table: &[f64], l: usize, m: isize) -> f64 {
    let am = m.unsigned_abs();
    let p = table[legendre_index(l, am)];
    if m < 0 && am % 2 == 1 {
        -p
    } else {
        p
    }
}

fn fft_plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

/// Forward harmonic transform by Gauss–Legendre quadrature in θ and a
/// length-n_phi DFT in φ. Exact for signals bandlimited to `bandlimit`.
pub fn sht_forward(signal: &SphereSignal, bandlimit: usize) -> Result<HarmonicCoefficients> {
    let grid = signal.grid();
    if bandlimit == 0 {
        return Err(SstError::Domain("bandlimit must be at least 1".into()));
    }
    if !grid.supports(bandlimit) {
        return Err(SstError::GridMismatch(format!(
            "{}×{} grid cannot resolve bandlimit {}",
            grid.n_theta(),
            grid.n_phi(),
            bandlimit
        )));
    }
    let n_phi = grid.n_phi();
    let (fwd, _) = fft_plans(n_phi);
    let dphi = 2.0 * PI / n_phi as f64;

    // Row spectra, one per θ node.
    let spectra: Vec<Vec<Complex64>> = (0..grid.n_theta())
        .into_par_iter()
        .map(|j| {
            let mut row = signal.values[j * n_phi..(j + 1) * n_phi].to_vec();
            fwd.process(&mut row);
            for v in &mut row {
                *v *= dphi * grid.weights[j];
            }
            row
        })
        .collect();
    let tables: Vec<Vec<f64>> = grid
        .cos_theta
        .par_iter()
        .map(|&x| normalized_legendre_table(bandlimit, x))
        .collect();

    let coeffs: Vec<Complex64> = (0..bandlimit * bandlimit)
        .into_par_iter()
        .map(|idx| {
            let (l, m) = degree_order(idx);
            let bin = m.rem_euclid(n_phi as isize) as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (row, table) in spectra.iter().zip(&tables) {
                acc += row[bin] * signed_legendre(table, l, m);
            }
            acc
        })
        .collect();
    HarmonicCoefficients::from_vec(bandlimit, coeffs)
}

/// Synthesis f(θ_j, φ_k) = Σ_{ℓ<L, |m|≤ℓ} (f)_ℓ^m Y_ℓ^m(θ_j, φ_k).
pub fn sht_inverse(coeffs: &HarmonicCoefficients, grid: &SphereGrid) -> SphereSignal {
    let bandlimit = coeffs.bandlimit();
    let n_phi = grid.n_phi();
    let (_, inv) = fft_plans(n_phi);
    let rows: Vec<Vec<Complex64>> = grid
        .cos_theta
        .par_iter()
        .map(|&x| {
            let table = normalized_legendre_table(bandlimit, x);
            let mut bins = vec![Complex64::new(0.0, 0.0); n_phi];
            for l in 0..bandlimit {
                for m in -(l as isize)..=(l as isize) {
                    let bin = m.rem_euclid(n_phi as isize) as usize;
                    bins[bin] += coeffs.get(l, m) * signed_legendre(&table, l, m);
                }
            }
            inv.process(&mut bins);
            bins
        })
        .collect();
    SphereSignal {
        grid: grid.clone(),
        values: rows.into_iter().flatten().collect(),
    }
}

/// Colatitudes of an equiangular grid with `n_theta` rows: the midpoints
/// θ_j = π(j + ½)/n_theta, which avoid the poles.
pub fn equiangular_theta(n_theta: usize) -> Vec<f64> {
    (0..n_theta)
        .map(|j| PI * (j as f64 + 0.5) / n_theta as f64)
        .collect()
}

/// Samples Σ (f)_ℓ^m Y_ℓ^m on an equiangular n_theta × n_phi grid, θ-major.
pub fn synthesize_equiangular(
    coeffs: &HarmonicCoefficients,
    n_theta: usize,
    n_phi: usize,
) -> Vec<Complex64> {
    let bandlimit = coeffs.bandlimit();
    let phi: Vec<f64> = (0..n_phi)
        .map(|k| 2.0 * PI * k as f64 / n_phi as f64)
        .collect();
    equiangular_theta(n_theta)
        .par_iter()
        .flat_map_iter(|&t| {
            let table = normalized_legendre_table(bandlimit, t.cos());
            let phi = phi.clone();
            phi.into_iter().map(move |p| {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..bandlimit {
                    for m in -(l as isize)..=(l as isize) {
                        acc += coeffs.get(l, m)
                            * Complex64::from_polar(signed_legendre(&table, l, m), m as f64 * p);
                    }
                }
                acc
            })
        })
        .collect()
}

/// Harmonic analysis of an equiangular grid (rows at [`equiangular_theta`],
/// columns at φ_k = 2πk/n_phi), θ-major.
///
/// Each row is Fourier transformed in φ; then, order by order, the degrees
/// are fitted by least squares over the θ rows with √(sin θ) row weights.
/// Exact for inputs bandlimited to L when n_theta ≥ L and n_phi ≥ 2L − 1.
pub fn analyze_equiangular(
    values: &[Complex64],
    n_theta: usize,
    n_phi: usize,
    bandlimit: usize,
) -> Result<HarmonicCoefficients> {
    if bandlimit == 0 {
        return Err(SstError::Domain("bandlimit must be at least 1".into()));
    }
    if values.len() != n_theta * n_phi {
        return Err(SstError::GridMismatch(format!(
            "{} values for a {n_theta}×{n_phi} grid",
            values.len()
        )));
    }
    if n_theta < bandlimit || n_phi + 1 < 2 * bandlimit {
        return Err(SstError::GridMismatch(format!(
            "{n_theta}×{n_phi} equiangular grid is under-sampled for bandlimit {bandlimit} \
             (needs at least {bandlimit}×{})",
            2 * bandlimit - 1
        )));
    }
    let (fwd, _) = fft_plans(n_phi);
    let theta = equiangular_theta(n_theta);
    let spectra: Vec<Vec<Complex64>> = (0..n_theta)
        .into_par_iter()
        .map(|j| {
            let mut row = values[j * n_phi..(j + 1) * n_phi].to_vec();
            fwd.process(&mut row);
            row.iter_mut().for_each(|v| *v /= n_phi as f64);
            row
        })
        .collect();
    let tables: Vec<Vec<f64>> = theta
        .par_iter()
        .map(|t| normalized_legendre_table(bandlimit, t.cos()))
        .collect();
    let row_weight: Vec<f64> = theta.iter().map(|t| t.sin().sqrt()).collect();

    let orders: Vec<isize> = (-(bandlimit as isize - 1)..bandlimit as isize).collect();
    let solved: Vec<(isize, Vec<Complex64>)> = orders
        .par_iter()
        .map(|&m| {
            let am = m.unsigned_abs();
            let cols = bandlimit - am;
            let a = nalgebra::DMatrix::<f64>::from_fn(n_theta, cols, |j, i| {
                row_weight[j] * signed_legendre(&tables[j], am + i, m)
            });
            let bin = m.rem_euclid(n_phi as isize) as usize;
            let rhs = nalgebra::DMatrix::<f64>::from_fn(n_theta, 2, |j, k| {
                let v = spectra[j][bin] * row_weight[j];
                if k == 0 {
                    v.re
                } else {
                    v.im
                }
            });
            // thin QR: x = R⁻¹ Qᵀ b
            let qr = a.qr();
            let qtb = qr.q().transpose() * rhs;
            let x = qr.r().solve_upper_triangular(&qtb).ok_or_else(|| {
                SstError::Numerical(format!("rank-deficient least squares for order {m}"))
            })?;
            Ok((
                m,
                (0..cols)
                    .map(|i| Complex64::new(x[(i, 0)], x[(i, 1)]))
                    .collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = HarmonicCoefficients::zeros(bandlimit);
    for (m, column) in solved {
        for (i, c) in column.into_iter().enumerate() {
            out.set(m.unsigned_abs() + i, m, c);
        }
    }
    Ok(out)
}

fn check_same_grid(f: &SphereSignal, h: &SphereSignal) -> Result<()> {
    if f.grid != h.grid {
        return Err(SstError::GridMismatch(
            "inner product of signals sampled on different grids".into(),
        ));
    }
    Ok(())
}

/// ⟨f, h⟩ = ∫_{S²} f conj(h) ds by quadrature.
pub fn inner_product_sphere(f: &SphereSignal, h: &SphereSignal) -> Result<Complex64> {
    check_same_grid(f, h)?;
    let grid = f.grid();
    let n_phi = grid.n_phi();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..grid.n_theta() {
        let mut row = Complex64::new(0.0, 0.0);
        for k in 0..n_phi {
            row += f.values[j * n_phi + k] * h.values[j * n_phi + k].conj();
        }
        acc += row * grid.node_area(j);
    }
    Ok(acc)
}

/// ⟨f, h⟩_R: the same quadrature restricted to nodes inside `region`.
pub fn inner_product_region(
    f: &SphereSignal,
    h: &SphereSignal,
    region: &Region,
) -> Result<Complex64> {
    check_same_grid(f, h)?;
    let grid = f.grid();
    let n_phi = grid.n_phi();
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &t) in grid.theta.iter().enumerate() {
        let mut row = Complex64::new(0.0, 0.0);
        for (k, &p) in grid.phi.iter().enumerate() {
            if region.contains(t, p) {
                row += f.values[j * n_phi + k] * h.values[j * n_phi + k].conj();
            }
        }
        acc += row * grid.node_area(j);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(l: usize, seed: u64) -> HarmonicCoefficients {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..l * l)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        HarmonicCoefficients::from_vec(l, v).unwrap()
    }

    /// Rodrigues-formula oracle: P_ℓ^m(x) = (−1)^m (1−x²)^{m/2} d^m/dx^m P_ℓ(x),
    /// with P_ℓ expanded as explicit polynomial coefficients.
    fn rodrigues(l: usize, m: usize, x: f64) -> f64 {
        // coefficients of (x² − 1)^ℓ
        let mut poly = vec![0.0; 2 * l + 1];
        let mut binom = 1.0;
        for k in 0..=l {
            let sign = if (l - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            poly[2 * k] = sign * binom;
            binom = binom * (l - k) as f64 / (k + 1) as f64;
        }
        // differentiate ℓ + m times
        for _ in 0..l + m {
            poly = poly
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * i as f64)
                .collect();
        }
        let fact: f64 = (1..=l).map(|k| k as f64).product();
        let scale = 1.0 / (2f64.powi(l as i32) * fact);
        let val: f64 = poly
            .iter()
            .enumerate()
            .map(|(i, c)| c * x.powi(i as i32))
            .sum();
        let cs = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        cs * (1.0 - x * x).powf(m as f64 / 2.0) * scale * val
    }

    #[test]
    fn legendre_trivial_values() {
        assert_eq!(associated_legendre(0, 0, 0.3).unwrap(), 1.0);
        assert!((associated_legendre(1, 0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_matches_rodrigues() {
        let expected = rodrigues(4, 2, 0.5);
        // closed form 15/2 (7x² − 1)(1 − x²) at x = 0.5
        assert!((expected - 4.21875).abs() < 1e-12);
        assert!((associated_legendre(4, 2, 0.5).unwrap() - expected).abs() < 1e-12);
        for l in 0..9 {
            for m in 0..=l {
                for &x in &[-0.9, -0.3, 0.0, 0.42, 0.77] {
                    let a = associated_legendre(l, m, x).unwrap();
                    let b = rodrigues(l, m, x);
                    assert!(
                        (a - b).abs() < 1e-9 * b.abs().max(1.0),
                        "{l} {m} {x}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn legendre_domain_errors() {
        assert!(associated_legendre(2, 3, 0.0).is_err());
        assert!(associated_legendre(2, 1, 1.5).is_err());
        assert!(ylm(1, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn ylm_trivial_values() {
        let y00 = ylm(0, 0, 1.1, 2.3).unwrap();
        assert!((y00.re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15 && y00.im == 0.0);
        let y10 = ylm(1, 0, 0.0, 0.0).unwrap();
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        let a = ylm(3, -2, 0.7, 1.3).unwrap();
        let b = ylm(3, 2, 0.7, 1.3).unwrap().conj();
        assert!((a - b).norm() < 1e-15);
        let a = ylm(3, -1, 0.7, 1.3).unwrap();
        assert!((a + ylm(3, 1, 0.7, 1.3).unwrap().conj()).norm() < 1e-15);
    }

    #[test]
    fn y21_normalized_by_quadrature() {
        let grid = SphereGrid::new(8).unwrap();
        let y = SphereSignal::from_fn(grid, |t, p| ylm(2, 1, t, p).unwrap());
        let n = inner_product_sphere(&y, &y).unwrap();
        assert!((n.re - 1.0).abs() < 1e-13 && n.im.abs() < 1e-13);
    }

    #[test]
    fn grid_sizes_and_weights() {
        let g1 = SphereGrid::new(1).unwrap();
        assert_eq!((g1.n_theta(), g1.n_phi()), (1, 1));
        assert!(g1.cos_theta_nodes()[0].abs() < 1e-15);
        assert!((g1.quadrature_weights()[0] - 2.0).abs() < 1e-15);

        let g4 = SphereGrid::new(4).unwrap();
        assert_eq!((g4.n_theta(), g4.n_phi()), (4, 7));
        // four-point Gauss–Legendre rule, closed form
        let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
        let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
        let wa = (18.0 + 30f64.sqrt()) / 36.0;
        let wb = (18.0 - 30f64.sqrt()) / 36.0;
        let x = g4.cos_theta_nodes();
        let w = g4.quadrature_weights();
        assert!((x[0] - b).abs() < 1e-15 && (x[1] - a).abs() < 1e-15);
        assert!((w[0] - wb).abs() < 1e-14 && (w[1] - wa).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);

        for l in [1, 5, 17, 64] {
            let g = SphereGrid::new(l).unwrap();
            let area: f64 = (0..g.n_theta())
                .map(|j| g.node_area(j) * g.n_phi() as f64)
                .sum();
            assert!((area - 4.0 * PI).abs() < 1e-12);
        }
        assert!(SphereGrid::new(0).is_err());
    }

    #[test]
    fn analysis_of_single_harmonic() {
        let grid = SphereGrid::new(5).unwrap();
        let y = SphereSignal::from_fn(grid.clone(), |t, p| ylm(2, 1, t, p).unwrap());
        let c = sht_forward(&y, 5).unwrap();
        for (i, v) in c.as_slice().iter().enumerate() {
            let want = if i == 7 { 1.0 } else { 0.0 };
            assert!(
                (v - Complex64::new(want, 0.0)).norm() < 1e-13,
                "index {i}: {v}"
            );
        }
        let one = SphereSignal::from_fn(grid, |_, _| Complex64::new(1.0, 0.0));
        let c = sht_forward(&one, 5).unwrap();
        assert!((c.get(0, 0).re - (4.0 * PI).sqrt()).abs() < 1e-13);
        assert!(c.as_slice()[1..].iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn synthesis_trivial_cases() {
        let grid = SphereGrid::new(6).unwrap();
        let s = sht_inverse(&HarmonicCoefficients::delta(6, 0, 0).unwrap(), &grid);
        let c = 1.0 / (4.0 * PI).sqrt();
        assert!(s
            .values()
            .iter()
            .all(|v| (v.re - c).abs() < 1e-15 && v.im.abs() < 1e-15));
        let z = sht_inverse(&HarmonicCoefficients::zeros(6), &grid);
        assert!(z.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn round_trip_and_parseval() {
        for &l in &[1usize, 2, 7, 16, 33] {
            let c = random_coeffs(l, l as u64);
            let grid = SphereGrid::new(l).unwrap();
            let s = sht_inverse(&c, &grid);
            let back = sht_forward(&s, l).unwrap();
            let rel =
                back.max_abs_diff(&c) / c.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(rel < 1e-12, "L = {l}: {rel}");
            let energy = inner_product_sphere(&s, &s).unwrap().re;
            assert!((energy - c.norm_sqr()).abs() / c.norm_sqr() < 1e-12);
        }
    }

    #[test]
    fn finer_grid_is_accepted_coarser_rejected() {
        let c = random_coeffs(6, 9);
        let fine = SphereGrid::new(10).unwrap();
        let s = sht_inverse(&c, &fine);
        let back = sht_forward(&s, 6).unwrap();
        assert!(back.max_abs_diff(&c) < 1e-12);
        let coarse = SphereGrid::new(4).unwrap();
        let s = sht_inverse(&c, &coarse);
        assert!(matches!(sht_forward(&s, 6), Err(SstError::GridMismatch(_))));
    }

    #[test]
    fn quadrature_exact_for_harmonic_products() {
        let l = 9;
        let grid = SphereGrid::new(l).unwrap();
        let sigs: Vec<SphereSignal> = (0..l * l)
            .map(|i| {
                let (a, b) = degree_order(i);
                SphereSignal::from_fn(grid.clone(), |t, p| ylm(a, b, t, p).unwrap())
            })
            .collect();
        for i in 0..l * l {
            for k in 0..l * l {
                let v = inner_product_sphere(&sigs[i], &sigs[k]).unwrap();
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((v - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inner_products_match_spectral_parseval() {
        let l = 12;
        let grid = SphereGrid::new(l).unwrap();
        let (a, b) = (random_coeffs(l, 1), random_coeffs(l, 2));
        let (fa, fb) = (sht_inverse(&a, &grid), sht_inverse(&b, &grid));
        let spatial = inner_product_sphere(&fa, &fb).unwrap();
        let spectral: Complex64 = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x * y.conj())
            .sum();
        assert!((spatial - spectral).norm() < 1e-11);

        let y10 = SphereSignal::from_fn(grid.clone(), |t, p| ylm(1, 0, t, p).unwrap());
        let y20 = SphereSignal::from_fn(grid.clone(), |t, p| ylm(2, 0, t, p).unwrap());
        assert!((inner_product_sphere(&y10, &y10).unwrap().re - 1.0).abs() < 1e-14);
        assert!(inner_product_sphere(&y10, &y20).unwrap().norm() < 1e-14);

        let other = sht_inverse(&a, &SphereGrid::new(l + 1).unwrap());
        assert!(matches!(
            inner_product_sphere(&fa, &other),
            Err(SstError::GridMismatch(_))
        ));
    }

    #[test]
    fn region_inner_product_on_caps() {
        let l = 16;
        let grid = SphereGrid::new(l).unwrap();
        let f = sht_inverse(&random_coeffs(l, 5), &grid);
        let whole = Region::polar_cap(PI).unwrap();
        let a = inner_product_region(&f, &f, &whole).unwrap();
        let b = inner_product_sphere(&f, &f).unwrap();
        assert!((a - b).norm() < 1e-12);

        // A constant is a degree-0 polynomial; the masked rule only sums the
        // node areas inside the cap, so check against the same discrete area.
        let cap = Region::polar_cap(40f64.to_radians()).unwrap();
        let one = SphereSignal::from_fn(grid.clone(), |_, _| Complex64::new(1.0, 0.0));
        let area = inner_product_region(&one, &one, &cap).unwrap().re;
        let discrete: f64 = (0..grid.n_theta())
            .filter(|&j| grid.theta_nodes()[j] <= cap.cap_angle().unwrap())
            .map(|j| grid.node_area(j) * grid.n_phi() as f64)
            .sum();
        assert!((area - discrete).abs() < 1e-13);
        // the masked rule converges to the true area as the grid refines
        let exact = 2.0 * PI * (1.0 - cap.cap_angle().unwrap().cos());
        let fine = SphereGrid::new(256).unwrap();
        let one = SphereSignal::from_fn(fine, |_, _| Complex64::new(1.0, 0.0));
        let area = inner_product_region(&one, &one, &cap).unwrap().re;
        assert!((area - exact).abs() / exact < 0.02, "{area} vs {exact}");
    }

    #[test]
    fn equiangular_round_trip() {
        let l = 12;
        let c = random_coeffs(l, 77);
        for &(nt, np) in &[(12usize, 23usize), (30, 64)] {
            let v = synthesize_equiangular(&c, nt, np);
            let back = analyze_equiangular(&v, nt, np, l).unwrap();
            assert!(
                back.max_abs_diff(&c) < 1e-9,
                "{nt}×{np}: {}",
                back.max_abs_diff(&c)
            );
        }
        let v = synthesize_equiangular(&c, 11, 23);
        assert!(matches!(
            analyze_equiangular(&v, 11, 23, l),
            Err(SstError::GridMismatch(_))
        ));
        let y = synthesize_equiangular(&HarmonicCoefficients::delta(6, 3, 1).unwrap(), 8, 16);
        let back = analyze_equiangular(&y, 8, 16, 6).unwrap();
        assert!((back.as_slice()[13] - Complex64::new(1.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn flat_index_is_a_bijection() {
        let l = 20;
        let mut seen = vec![false; l * l];
        for d in 0..l {
            for m in -(d as isize)..=(d as isize) {
                let i = flat_index(d, m);
                assert!(!seen[i]);
                seen[i] = true;
                assert_eq!(degree_order(i), (d, m));
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(flat_index(3, 1), 13);
        assert_eq!(flat_index(2, 1), 7);
    }
}
