//! The spatial-Slepian transform: F_{g_α}(ρ) = ⟨f, D_ρ g_α⟩ on SO(3).
//!
//! Forward evaluation by direct sum and by the FFT-accelerated path, Wigner
//! coefficients, inversion, frame diagnostics and the zonal specialization.
//!
//! Cube layouts wrap negative Fourier orders: order k ∈ [−(L−1), −1] sits at
//! index (2L−1) + k.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Result, SstError};
use crate::slepian::SlepianBasis;
use crate::sphere::{sht_inverse, HarmonicCoefficients, SphereGrid, SphereSignal};
use crate::wigner::{i_pow, wigner_d_matrix, DeltaRecursion, DeltaSlice, DeltaSlices, EulerAngles};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative singularity guard used when no threshold is given.
pub const DEFAULT_RELATIVE_EPSILON: f64 = 1e-12;

#[inline]
fn wrap(k: isize, n: usize) -> usize {
    k.rem_euclid(n as isize) as usize
}

/// Equiangular grid on SO(3): 2L−1 uniform nodes on [0, 2π) along each of
/// φ, ϑ and ω. The ϑ axis is the periodic extension of [0, π]; its first L
/// nodes cover [0, π].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SO3Grid {
    bandlimit: usize,
}

impl SO3Grid {
    pub fn new(bandlimit: usize) -> Result<Self> {
        if bandlimit == 0 {
            return Err(SstError::Domain("bandlimit must be at least 1".into()));
        }
        Ok(Self { bandlimit })
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    /// Nodes per axis, 2L − 1.
    pub fn n(&self) -> usize {
        2 * self.bandlimit - 1
    }

    pub fn node(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n() as f64
    }

    fn nodes(&self) -> Vec<f64> {
        (0..self.n()).map(|k| self.node(k)).collect()
    }
    pub fn varphi_nodes(&self) -> Vec<f64> {
        self.nodes()
    }
    pub fn vartheta_nodes(&self) -> Vec<f64> {
        self.nodes()
    }
    pub fn omega_nodes(&self) -> Vec<f64> {
        self.nodes()
    }

    /// Number of ϑ nodes inside [0, π].
    pub fn n_vartheta_half(&self) -> usize {
        self.bandlimit
    }

    /// Euler angles of node (i, j, k). Nodes with ϑ > π are returned
    /// unchecked, as the periodic extension they are.
    pub fn rotation(&self, i: usize, j: usize, k: usize) -> EulerAngles {
        EulerAngles::unchecked(self.node(i), self.node(j), self.node(k))
    }
}

/// Samples of F_{g_α}(ρ) on an [`SO3Grid`], stored (φ, ϑ, ω)-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SO3Signal {
    grid: SO3Grid,
    alpha: usize,
    values: Vec<Complex64>,
}

impl SO3Signal {
    pub fn new(grid: SO3Grid, alpha: usize, values: Vec<Complex64>) -> Result<Self> {
        let n = grid.n();
        if values.len() != n * n * n {
            return Err(SstError::GridMismatch(format!(
                "{} values for a {n}³ SO(3) grid",
                values.len()
            )));
        }
        Ok(Self {
            grid,
            alpha,
            values,
        })
    }

    pub fn grid(&self) -> &SO3Grid {
        &self.grid
    }
    pub fn alpha(&self) -> usize {
        self.alpha
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// F at (φ_i, ϑ_j, ω_k).
    pub fn value(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let n = self.grid.n();
        self.values[(i * n + j) * n + k]
    }
}

/// SO(3) Fourier coefficients (F)^ℓ_{m,m′}, ℓ < L, degree-major with
/// row m and column m′ inside each (2ℓ+1)² block.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerCoefficients {
    bandlimit: usize,
    coeffs: Vec<Complex64>,
}

impl WignerCoefficients {
    pub fn zeros(bandlimit: usize) -> Self {
        Self {
            bandlimit,
            coeffs: vec![ZERO; Self::offset(bandlimit)],
        }
    }

    /// Σ_{k<ℓ} (2k+1)².
    fn offset(l: usize) -> usize {
        l * (4 * l * l).saturating_sub(1) / 3
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }
    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    fn index(l: usize, m: isize, mp: isize) -> usize {
        let li = l as isize;
        Self::offset(l) + ((m + li) * (2 * li + 1) + mp + li) as usize
    }

    pub fn get(&self, l: usize, m: isize, mp: isize) -> Complex64 {
        self.coeffs[Self::index(l, m, mp)]
    }

    pub fn set(&mut self, l: usize, m: isize, mp: isize, value: Complex64) {
        self.coeffs[Self::index(l, m, mp)] = value;
    }

    /// Row-major (2ℓ+1)² block of degree ℓ.
    pub fn degree(&self, l: usize) -> &[Complex64] {
        &self.coeffs[Self::offset(l)..Self::offset(l + 1)]
    }

    /// Σ_ℓ 8π²/(2ℓ+1) Σ |(F)^ℓ_{m,m′}|², the SO(3) energy by Parseval.
    pub fn energy(&self) -> f64 {
        (0..self.bandlimit)
            .map(|l| {
                8.0 * PI * PI / (2 * l + 1) as f64
                    * self.degree(l).iter().map(|c| c.norm_sqr()).sum::<f64>()
            })
            .sum()
    }
}

/// C_{m,m′,m″} = i^{m′−m} Σ_ℓ (f)_ℓ^m conj((g)_ℓ^{m′}) Δ^ℓ_{m″,m} Δ^ℓ_{m″,m′},
/// stored with wrapped orders as [m″][m][m′].
#[derive(Debug, Clone, PartialEq)]
pub struct CCube {
    bandlimit: usize,
    values: Vec<Complex64>,
}

impl CCube {
    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    pub fn n(&self) -> usize {
        2 * self.bandlimit - 1
    }

    pub fn get(&self, m: isize, mp: isize, mpp: isize) -> Complex64 {
        let n = self.n();
        self.values[(wrap(mpp, n) * n + wrap(m, n)) * n + wrap(mp, n)]
    }

    /// Raw wrapped [m″][m][m′] storage.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.values
    }
}

/// Remark-1 guard: the signal and the basis must share a bandlimit.
fn slepian_column<'a>(
    f: &HarmonicCoefficients,
    basis: &'a SlepianBasis,
    alpha: usize,
) -> Result<&'a HarmonicCoefficients> {
    if f.bandlimit() != basis.bandlimit() {
        return Err(SstError::BandlimitMismatch {
            signal: f.bandlimit(),
            basis: basis.bandlimit(),
        });
    }
    basis.column(alpha)
}

fn delta_slices(bandlimit: usize) -> Vec<DeltaSlice> {
    DeltaSlices::new(DeltaRecursion::Trapani)
        .take(bandlimit)
        .collect()
}

/// F_{g_α}(ρ) by the direct triple sum
/// Σ_{ℓ,m,m′} (f)_ℓ^m conj((g_α)_ℓ^{m′}) conj(D^ℓ_{m,m′}(ρ)).
pub fn sst_point(
    f: &HarmonicCoefficients,
    basis: &SlepianBasis,
    alpha: usize,
    rho: &EulerAngles,
) -> Result<Complex64> {
    let g = slepian_column(f, basis, alpha)?;
    Ok(direct_sum(f, g, &delta_slices(f.bandlimit()), rho))
}

/// [`sst_point`] at many rotations, sharing one Δ table.
pub fn sst_points(
    f: &HarmonicCoefficients,
    basis: &SlepianBasis,
    alpha: usize,
    rhos: &[EulerAngles],
) -> Result<Vec<Complex64>> {
    let g = slepian_column(f, basis, alpha)?;
    let slices = delta_slices(f.bandlimit());
    Ok(rhos
        .par_iter()
        .map(|rho| direct_sum(f, g, &slices, rho))
        .collect())
}

fn direct_sum(
    f: &HarmonicCoefficients,
    g: &HarmonicCoefficients,
    slices: &[DeltaSlice],
    rho: &EulerAngles,
) -> Complex64 {
    let mut acc = ZERO;
    for delta in slices {
        let l = delta.degree();
        let li = l as isize;
        let n = 2 * l + 1;
        let d = wigner_d_matrix(delta, rho.vartheta);
        let (fl, gl) = (f.degree(l), g.degree(l));
        for m in -li..=li {
            let fm = fl[(m + li) as usize];
            if fm == ZERO {
                continue;
            }
            for mp in -li..=li {
                // conj(D) = e^{imφ} d e^{im′ω}
                let conj_d = Complex64::from_polar(
                    d[(m + li) as usize * n + (mp + li) as usize],
                    m as f64 * rho.varphi + mp as f64 * rho.omega,
                );
                acc += fm * gl[(mp + li) as usize].conj() * conj_d;
            }
        }
    }
    acc
}

/// The C cube of the fast algorithm, in O(L⁴).
///
/// Degrees are visited in order with Δ^ℓ generated on the fly; within a
/// degree every m″ slab is updated independently, so results do not depend on
/// the thread count.
pub fn compute_c(f: &HarmonicCoefficients, basis: &SlepianBasis, alpha: usize) -> Result<CCube> {
    let g = slepian_column(f, basis, alpha)?;
    Ok(compute_c_with(f, g))
}

/// [`compute_c`] against an explicit window g with the bandlimit of f.
pub fn compute_c_with(f: &HarmonicCoefficients, g: &HarmonicCoefficients) -> CCube {
    let bandlimit = f.bandlimit();
    let n = 2 * bandlimit - 1;
    let mut values = vec![ZERO; n * n * n];
    for delta in DeltaSlices::new(DeltaRecursion::Trapani).take(bandlimit) {
        let l = delta.degree();
        let li = l as isize;
        // f_ℓ^m i^{−m} and conj(g_ℓ^{m′}) i^{m′}
        let fm: Vec<Complex64> = (-li..=li)
            .zip(f.degree(l))
            .map(|(m, c)| c * i_pow(-m))
            .collect();
        let gm: Vec<Complex64> = (-li..=li)
            .zip(g.degree(l))
            .map(|(mp, c)| c.conj() * i_pow(mp))
            .collect();
        values
            .par_chunks_mut(n * n)
            .enumerate()
            .for_each(|(b, slab)| {
                let mpp = if b < bandlimit {
                    b as isize
                } else {
                    b as isize - n as isize
                };
                if mpp.abs() > li {
                    return;
                }
                let y: Vec<Complex64> = (-li..=li)
                    .map(|mp| gm[(mp + li) as usize] * delta.get(mpp, mp))
                    .collect();
                let (y_neg, y_pos) = y.split_at(l);
                for m in -li..=li {
                    let x = fm[(m + li) as usize] * delta.get(mpp, m);
                    let row = &mut slab[wrap(m, n) * n..(wrap(m, n) + 1) * n];
                    // m′ ≥ 0 at the front, m′ < 0 wrapped to the back
                    for (r, yv) in row[..=l].iter_mut().zip(y_pos) {
                        *r += x * yv;
                    }
                    for (r, yv) in row[n - l..].iter_mut().zip(y_neg) {
                        *r += x * yv;
                    }
                }
            });
    }
    CCube { bandlimit, values }
}

/// Sum of C e^{i(mφ + m″ϑ + m′ω)} on the SO(3) grid: a 3D inverse DFT of
/// size (2L−1)³, output (φ, ϑ, ω)-major.
pub fn evaluate_c(cube: &CCube) -> Vec<Complex64> {
    let n = cube.n();
    let mut planner = FftPlanner::<f64>::new();
    let inv = planner.plan_fft_inverse(n);
    let mut data = cube.values.clone();

    // along m′ (contiguous)
    data.par_chunks_mut(n * n)
        .for_each(|slab| inv.process(slab));
    // along m inside each m″ slab
    data.par_chunks_mut(n * n)
        .for_each(|slab| fft_columns(slab, n, &*inv));
    // [m″][φ][ω] → [φ][m″][ω]
    let mut out = vec![ZERO; n * n * n];
    out.par_chunks_mut(n * n).enumerate().for_each(|(a, slab)| {
        for b in 0..n {
            slab[b * n..(b + 1) * n].copy_from_slice(&data[(b * n + a) * n..(b * n + a + 1) * n]);
        }
    });
    // along m″ inside each φ slab
    out.par_chunks_mut(n * n)
        .for_each(|slab| fft_columns(slab, n, &*inv));
    out
}

/// Transforms the columns of a row-major n×n slab.
fn fft_columns(slab: &mut [Complex64], n: usize, fft: &dyn rustfft::Fft<f64>) {
    let mut t = vec![ZERO; n * n];
    for r in 0..n {
        for c in 0..n {
            t[c * n + r] = slab[r * n + c];
        }
    }
    fft.process(&mut t);
    for r in 0..n {
        for c in 0..n {
            slab[r * n + c] = t[c * n + r];
        }
    }
}

/// FFT-accelerated SST on the full SO(3) grid.
pub fn sst_fast(f: &HarmonicCoefficients, basis: &SlepianBasis, alpha: usize) -> Result<SO3Signal> {
    let cube = compute_c(f, basis, alpha)?;
    let grid = SO3Grid::new(f.bandlimit())?;
    SO3Signal::new(grid, alpha, evaluate_c(&cube))
}

/// (F)^ℓ_{m,m′} = (f)_ℓ^m conj((g_α)_ℓ^{m′}).
pub fn sst_wigner_coefficients(
    f: &HarmonicCoefficients,
    basis: &SlepianBasis,
    alpha: usize,
) -> Result<WignerCoefficients> {
    let g = slepian_column(f, basis, alpha)?;
    Ok(wigner_coefficients_with(f, g))
}

fn wigner_coefficients_with(
    f: &HarmonicCoefficients,
    g: &HarmonicCoefficients,
) -> WignerCoefficients {
    let bandlimit = f.bandlimit();
    let mut out = WignerCoefficients::zeros(bandlimit);
    for l in 0..bandlimit {
        let (fl, gl) = (f.degree(l), g.degree(l));
        let n = 2 * l + 1;
        let start = WignerCoefficients::offset(l);
        for (i, a) in fl.iter().enumerate() {
            for (j, b) in gl.iter().enumerate() {
                out.coeffs[start + i * n + j] = a * b.conj();
            }
        }
    }
    out
}

/// ∫_0^π e^{ikϑ} sin ϑ dϑ.
fn sin_moment(k: isize) -> Complex64 {
    match k {
        1 => Complex64::new(0.0, PI / 2.0),
        -1 => Complex64::new(0.0, -PI / 2.0),
        _ if k % 2 == 0 => Complex64::new(2.0 / (1 - k * k) as f64, 0.0),
        _ => ZERO,
    }
}

/// Wigner coefficients of an SO(3) signal whose Fourier orders lie below L
/// in every angle, such as any output of [`sst_fast`]. Exact up to rounding:
/// the samples determine the Fourier cube, and the ϑ integral against
/// d^ℓ_{m,m′} sin ϑ reduces to closed-form moments. O(L⁴).
pub fn so3_analysis(signal: &SO3Signal) -> WignerCoefficients {
    let bandlimit = signal.grid().bandlimit();
    let n = signal.grid().n();
    let li_max = bandlimit as isize - 1;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);

    // Fourier cube [φ][ϑ][ω] → coefficients [m][m″][m′]
    let mut data = signal.values.clone();
    data.par_chunks_mut(n * n).for_each(|slab| {
        fwd.process(slab);
        fft_columns(slab, n, &*fwd);
    });
    let mut cube = vec![ZERO; n * n * n];
    cube.par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(b, slab)| {
            for a in 0..n {
                slab[a * n..(a + 1) * n]
                    .copy_from_slice(&data[(a * n + b) * n..(a * n + b + 1) * n]);
            }
        });
    // cube is now [m″][m][m′]; transform along m
    cube.par_chunks_mut(n * n)
        .for_each(|slab| fft_columns(slab, n, &*fwd));
    let norm = 1.0 / (n * n * n) as f64;

    // H_{m,m′}(n″) = Σ_{m″} C_{m,m′,m″} W(m″ − n″)
    let orders: Vec<isize> = (-li_max..=li_max).collect();
    let moments: Vec<Complex64> = (-2 * li_max..=2 * li_max).map(sin_moment).collect();
    let h: Vec<Complex64> = (0..n * n * n)
        .into_par_iter()
        .map(|q| {
            let (m, mp, npp) = (orders[q / (n * n)], orders[(q / n) % n], orders[q % n]);
            orders
                .iter()
                .map(|&mpp| {
                    cube[(wrap(mpp, n) * n + wrap(m, n)) * n + wrap(mp, n)]
                        * moments[(mpp - npp + 2 * li_max) as usize]
                })
                .sum::<Complex64>()
                * norm
        })
        .collect();

    // (F)^ℓ_{m,m′} = (2ℓ+1)/2 · i^{m−m′} Σ_{n″} H_{m,m′}(n″) Δ^ℓ_{n″,m} Δ^ℓ_{n″,m′}
    let slices = delta_slices(bandlimit);
    let blocks: Vec<Vec<Complex64>> = slices
        .par_iter()
        .map(|delta| {
            let l = delta.degree() as isize;
            let mut block = Vec::with_capacity(((2 * l + 1) * (2 * l + 1)) as usize);
            for m in -l..=l {
                for mp in -l..=l {
                    let row = &h[((m + li_max) as usize * n + (mp + li_max) as usize) * n..];
                    let mut acc = ZERO;
                    for npp in -l..=l {
                        acc +=
                            row[(npp + li_max) as usize] * (delta.get(npp, m) * delta.get(npp, mp));
                    }
                    block.push(acc * i_pow(m - mp) * ((2 * l + 1) as f64 / 2.0));
                }
            }
            block
        })
        .collect();
    WignerCoefficients {
        bandlimit,
        coeffs: blocks.into_iter().flatten().collect(),
    }
}

/// Recovers f from (F_{g_α})^ℓ_{m,m′}: for each degree the order
/// m′* = argmax |(g_α)_ℓ^{m′}| is used, f_ℓ^m = (F)^ℓ_{m,m′*} / conj((g_α)_ℓ^{m′*}).
///
/// `epsilon` is an absolute threshold; by default 1e−12 × max |g_α|.
pub fn inverse_sst(
    coeffs: &WignerCoefficients,
    basis: &SlepianBasis,
    alpha: usize,
    epsilon: Option<f64>,
) -> Result<HarmonicCoefficients> {
    let bandlimit = coeffs.bandlimit();
    if bandlimit != basis.bandlimit() {
        return Err(SstError::BandlimitMismatch {
            signal: bandlimit,
            basis: basis.bandlimit(),
        });
    }
    let g = basis.column(alpha)?;
    let eps = epsilon.unwrap_or_else(|| default_epsilon(g));
    let mut pivots = Vec::with_capacity(bandlimit);
    let mut singular = Vec::new();
    for l in 0..bandlimit {
        let li = l as isize;
        let (best, value) = (-li..=li)
            .map(|mp| (mp, g.get(l, mp)))
            .fold(
                (0, ZERO),
                |acc, x| if x.1.norm() > acc.1.norm() { x } else { acc },
            );
        if value.norm() <= eps {
            singular.push(l);
        }
        pivots.push((best, value));
    }
    if !singular.is_empty() {
        return Err(SstError::NonInvertible { degrees: singular });
    }
    let mut f = HarmonicCoefficients::zeros(bandlimit);
    for (l, &(mp, gv)) in pivots.iter().enumerate() {
        let li = l as isize;
        for m in -li..=li {
            f.set(l, m, coeffs.get(l, m, mp) / gv.conj());
        }
    }
    Ok(f)
}

fn default_epsilon(g: &HarmonicCoefficients) -> f64 {
    DEFAULT_RELATIVE_EPSILON * g.as_slice().iter().fold(0.0f64, |a, c| a.max(c.norm()))
}

/// Outcome of the frame-energy check over the first `scales` Slepian functions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FrameReport {
    pub scales: usize,
    /// Σ_α ∫_{SO(3)} |F_{g_α}|², by Wigner–Parseval.
    pub numerator: f64,
    /// Σ_α Σ_{s,t′} 8π²/(2s+1) |(g_α)_s^{t′}|².
    pub frame_constant: f64,
    /// numerator / (frame_constant ‖f‖²); 1 for a tight frame.
    pub ratio: f64,
    /// Smallest and largest per-degree energy gain
    /// c_ℓ = Σ_α 8π²/(2ℓ+1) ‖(g_α)_ℓ‖²; numerator = Σ_ℓ c_ℓ ‖f_ℓ‖².
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// Frame check over the first n_well Slepian functions of `basis`.
pub fn tight_frame_ratio(f: &HarmonicCoefficients, basis: &SlepianBasis) -> Result<f64> {
    Ok(frame_report(f, basis, basis.n_well())?.ratio)
}

/// Frame energies over the first `scales` Slepian functions.
pub fn frame_report(
    f: &HarmonicCoefficients,
    basis: &SlepianBasis,
    scales: usize,
) -> Result<FrameReport> {
    let energy = f.norm_sqr();
    if energy == 0.0 {
        return Err(SstError::ZeroSignal("frame ratio of a zero signal".into()));
    }
    let bandlimit = f.bandlimit();
    let mut numerator = 0.0;
    let mut frame_constant = 0.0;
    let mut gains = vec![0.0; bandlimit];
    for alpha in 1..=scales {
        let g = slepian_column(f, basis, alpha)?;
        numerator += wigner_coefficients_with(f, g).energy();
        for (l, gain) in gains.iter_mut().enumerate() {
            let e: f64 = g.degree(l).iter().map(|c| c.norm_sqr()).sum();
            let w = 8.0 * PI * PI / (2 * l + 1) as f64;
            frame_constant += w * e;
            *gain += w * e;
        }
    }
    Ok(FrameReport {
        scales,
        numerator,
        frame_constant,
        ratio: numerator / (frame_constant * energy),
        lower_bound: gains.iter().copied().fold(f64::INFINITY, f64::min),
        upper_bound: gains.iter().copied().fold(0.0, f64::max),
    })
}

fn zonal_column<'a>(
    f: &HarmonicCoefficients,
    basis: &'a SlepianBasis,
    alpha: usize,
) -> Result<&'a HarmonicCoefficients> {
    if !basis.is_zonal() {
        return Err(SstError::NotZonal);
    }
    slepian_column(f, basis, alpha)
}

/// Harmonic coefficients of the zonal SST, a signal on the sphere:
/// (F)_ℓ^m = √(4π/(2ℓ+1)) (f)_ℓ^m conj((g_α)_ℓ^0).
pub fn zonal_sst_coefficients(
    f: &HarmonicCoefficients,
    basis: &SlepianBasis,
    alpha: usize,
) -> Result<HarmonicCoefficients> {
    let g = zonal_column(f, basis, alpha)?;
    let mut out = HarmonicCoefficients::zeros(f.bandlimit());
    for l in 0..f.bandlimit() {
        let s = (4.0 * PI / (2 * l + 1) as f64).sqrt() * g.get(l, 0).conj();
        for (o, c) in out.degree_mut(l).iter_mut().zip(f.degree(l)) {
            *o = c * s;
        }
    }
    Ok(out)
}

/// Zonal SST F_{g_α}(ϑ, φ) sampled on `grid` (θ plays the role of ϑ).
pub fn zonal_sst(
    f: &HarmonicCoefficients,
    basis: &SlepianBasis,
    alpha: usize,
    grid: &SphereGrid,
) -> Result<SphereSignal> {
    Ok(sht_inverse(&zonal_sst_coefficients(f, basis, alpha)?, grid))
}

/// Inverse of [`zonal_sst_coefficients`]:
/// (f)_ℓ^m = √((2ℓ+1)/4π) (F)_ℓ^m / conj((g_α)_ℓ^0).
pub fn zonal_inverse(
    coeffs: &HarmonicCoefficients,
    basis: &SlepianBasis,
    alpha: usize,
    epsilon: Option<f64>,
) -> Result<HarmonicCoefficients> {
    let g = zonal_column(coeffs, basis, alpha)?;
    let eps = epsilon.unwrap_or_else(|| default_epsilon(g));
    let bandlimit = coeffs.bandlimit();
    let singular: Vec<usize> = (0..bandlimit)
        .filter(|&l| g.get(l, 0).norm() <= eps)
        .collect();
    if !singular.is_empty() {
        return Err(SstError::NonInvertible { degrees: singular });
    }
    let mut out = HarmonicCoefficients::zeros(bandlimit);
    for l in 0..bandlimit {
        let s = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() / g.get(l, 0).conj();
        for (o, c) in out.degree_mut(l).iter_mut().zip(coeffs.degree(l)) {
            *o = c * s;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::Region;
    use crate::sphere::gauss_legendre;
    use crate::wigner::wigner_D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_coeffs(l: usize, seed: u64) -> HarmonicCoefficients {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..l * l)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        HarmonicCoefficients::from_vec(l, v).unwrap()
    }

    fn cap_basis(l: usize) -> SlepianBasis {
        SlepianBasis::build(Region::polar_cap(40f64.to_radians()).unwrap(), l).unwrap()
    }

    /// Basis with one dense random column, so every (m, m′) pairing is exercised.
    fn dense_basis(l: usize, seed: u64) -> SlepianBasis {
        let mut g = random_coeffs(l, seed);
        g.scale(1.0 / g.norm_sqr().sqrt());
        SlepianBasis::from_parts(
            Region::polar_cap(PI).unwrap(),
            l,
            vec![1.0],
            vec![g],
            1.0,
            false,
        )
        .unwrap()
    }

    #[test]
    fn direct_sum_trivial_cases() {
        let b = cap_basis(5);
        let id = EulerAngles::IDENTITY;
        let g1 = b.column(1).unwrap().clone();
        assert!((sst_point(&g1, &b, 1, &id).unwrap() - 1.0).norm() < 1e-12);
        let g2 = b.column(2).unwrap().clone();
        assert!(sst_point(&g2, &b, 1, &id).unwrap().norm() < 1e-12);
        let mut f = HarmonicCoefficients::zeros(5);
        f.set(0, 0, Complex64::new(0.3, -0.2));
        let want = f.get(0, 0) * b.column(3).unwrap().get(0, 0).conj();
        let rho = EulerAngles::new(1.0, 2.0, 3.0).unwrap();
        assert!((sst_point(&f, &b, 3, &rho).unwrap() - want).norm() < 1e-14);
        assert!(matches!(
            sst_point(&random_coeffs(4, 1), &b, 1, &rho),
            Err(SstError::BandlimitMismatch { .. })
        ));
        assert!(matches!(
            sst_point(&g1, &b, 0, &rho),
            Err(SstError::ScaleOutOfRange { .. })
        ));
    }

    #[test]
    fn direct_sum_matches_rotated_inner_product() {
        // ⟨f, D_ρ g⟩ computed spectrally through rotate_coefficients
        let l = 7;
        let b = dense_basis(l, 3);
        let f = random_coeffs(l, 4);
        let rho = EulerAngles::new(0.4, 1.1, 5.0).unwrap();
        let rg = crate::wigner::rotate_coefficients(b.column(1).unwrap(), &rho);
        let want: Complex64 = f
            .as_slice()
            .iter()
            .zip(rg.as_slice())
            .map(|(a, c)| a * c.conj())
            .sum();
        assert!((sst_point(&f, &b, 1, &rho).unwrap() - want).norm() < 1e-12);
    }

    #[test]
    fn c_cube_small_cases() {
        let b = dense_basis(1, 2);
        let f = random_coeffs(1, 5);
        let c = compute_c(&f, &b, 1).unwrap();
        assert_eq!(c.as_slice().len(), 1);
        assert!(
            (c.get(0, 0, 0) - f.get(0, 0) * b.column(1).unwrap().get(0, 0).conj()).norm() < 1e-15
        );

        let z = SlepianBasis::zonal(0.5, 6).unwrap();
        let c = compute_c(&random_coeffs(6, 6), &z, 1).unwrap();
        for m in -5isize..=5 {
            for mp in -5isize..=5 {
                for mpp in -5isize..=5 {
                    if mp != 0 {
                        assert_eq!(c.get(m, mp, mpp), ZERO);
                    }
                }
            }
        }
    }

    #[test]
    fn fast_matches_direct_on_full_grid() {
        for &l in &[2usize, 4, 8] {
            for alpha in 1..=2 {
                let b = if alpha == 1 {
                    dense_basis(l, 10 + l as u64)
                } else {
                    cap_basis(l)
                };
                let a = if alpha == 1 { 1 } else { 2 };
                let f = random_coeffs(l, l as u64);
                let fast = sst_fast(&f, &b, a).unwrap();
                let grid = fast.grid();
                let n = grid.n();
                let rhos: Vec<EulerAngles> = (0..n * n * n)
                    .map(|q| grid.rotation(q / (n * n), (q / n) % n, q % n))
                    .collect();
                let direct = sst_points(&f, &b, a, &rhos).unwrap();
                let err = direct
                    .iter()
                    .zip(fast.values())
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-10, "L = {l}: {err}");
            }
        }
    }

    #[test]
    fn negative_orders_wrap_to_high_indices() {
        // a cube with a single C entry evaluates to one plane wave
        let l = 3;
        let n = 5;
        let mut values = vec![ZERO; n * n * n];
        // (m, m′, m″) = (−1, 2, −2)
        values[(wrap(-2, n) * n + wrap(-1, n)) * n + wrap(2, n)] = Complex64::new(1.0, 0.0);
        assert_eq!(wrap(-1, n), 4);
        assert_eq!(wrap(-2, n), 3);
        let cube = CCube {
            bandlimit: l,
            values,
        };
        let out = evaluate_c(&cube);
        let grid = SO3Grid::new(l).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let phase = -grid.node(i) - 2.0 * grid.node(j) + 2.0 * grid.node(k);
                    let want = Complex64::from_polar(1.0, phase);
                    assert!((out[(i * n + j) * n + k] - want).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zonal_cube_is_constant_along_omega() {
        let z = SlepianBasis::zonal(0.4, 8).unwrap();
        let s = sst_fast(&random_coeffs(8, 8), &z, 1).unwrap();
        let n = s.grid().n();
        for i in 0..n {
            for j in 0..n {
                for k in 1..n {
                    assert!((s.value(i, j, k) - s.value(i, j, 0)).norm() < 1e-12);
                }
            }
        }
        let zero = sst_fast(&HarmonicCoefficients::zeros(8), &z, 1).unwrap();
        assert!(zero.values().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn compute_c_is_thread_count_independent() {
        let b = dense_basis(10, 1);
        let f = random_coeffs(10, 2);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| compute_c(&f, &b, 1).unwrap());
        let c = four.install(|| compute_c(&f, &b, 1).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn wigner_coefficients_match_so3_quadrature() {
        // exact quadrature: uniform in φ, ω; Gauss–Legendre in cos ϑ
        let l = 6;
        let b = dense_basis(l, 7);
        let f = random_coeffs(l, 8);
        let w = sst_wigner_coefficients(&f, &b, 1).unwrap();
        let n = 2 * l - 1;
        let (x, wt) = gauss_legendre(l);
        let mut rhos = Vec::new();
        for i in 0..n {
            for xj in &x {
                for k in 0..n {
                    rhos.push(EulerAngles::unchecked(
                        2.0 * PI * i as f64 / n as f64,
                        xj.acos(),
                        2.0 * PI * k as f64 / n as f64,
                    ));
                }
            }
        }
        let vals = sst_points(&f, &b, 1, &rhos).unwrap();
        let dphi = 2.0 * PI / n as f64;
        for (deg, m, mp) in [(0usize, 0isize, 0isize), (2, 1, -2), (5, -3, 4), (4, 0, 0)] {
            let mut acc = ZERO;
            for (q, rho) in rhos.iter().enumerate() {
                let j = (q / n) % l;
                acc += vals[q] * wigner_D(deg, m, mp, rho).unwrap() * wt[j] * dphi * dphi;
            }
            acc *= (2 * deg + 1) as f64 / (8.0 * PI * PI);
            assert!((acc - w.get(deg, m, mp)).norm() < 1e-12, "{deg} {m} {mp}");
        }
        assert_eq!(
            w.get(0, 0, 0),
            f.get(0, 0) * b.column(1).unwrap().get(0, 0).conj()
        );
    }

    #[test]
    fn wigner_blocks_are_rank_one() {
        let l = 9;
        let b = dense_basis(l, 9);
        let w = sst_wigner_coefficients(&random_coeffs(l, 10), &b, 1).unwrap();
        for deg in 1..l {
            let n = 2 * deg + 1;
            let m = nalgebra::DMatrix::from_row_slice(n, n, w.degree(deg));
            let s = m.singular_values();
            let mut s: Vec<f64> = s.iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            assert!(s[0] / s[1].max(1e-300) > 1e8);
        }
    }

    #[test]
    fn so3_analysis_recovers_wigner_coefficients() {
        for &l in &[1usize, 3, 8] {
            let b = dense_basis(l, 20);
            let f = random_coeffs(l, 21);
            let s = sst_fast(&f, &b, 1).unwrap();
            let got = so3_analysis(&s);
            let want = sst_wigner_coefficients(&f, &b, 1).unwrap();
            let err = got
                .as_slice()
                .iter()
                .zip(want.as_slice())
                .map(|(a, c)| (a - c).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "L = {l}: {err}");
        }
    }

    #[test]
    fn inverse_round_trips() {
        let l = 16;
        let b = dense_basis(l, 30);
        let f = random_coeffs(l, 31);
        let w = sst_wigner_coefficients(&f, &b, 1).unwrap();
        let back = inverse_sst(&w, &b, 1, None).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-10);
        let g = b.column(1).unwrap().clone();
        let w = sst_wigner_coefficients(&g, &b, 1).unwrap();
        assert!(inverse_sst(&w, &b, 1, None).unwrap().max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn inverse_reports_singular_degrees() {
        let mut g = random_coeffs(6, 40);
        for c in g.degree_mut(3) {
            *c = ZERO;
        }
        let b = SlepianBasis::from_parts(
            Region::polar_cap(PI).unwrap(),
            6,
            vec![1.0],
            vec![g],
            1.0,
            false,
        )
        .unwrap();
        let w = sst_wigner_coefficients(&random_coeffs(6, 41), &b, 1).unwrap();
        match inverse_sst(&w, &b, 1, Some(1e-12)) {
            Err(SstError::NonInvertible { degrees }) => assert_eq!(degrees, vec![3]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zonal_transform_cases() {
        let l = 8;
        let z = SlepianBasis::zonal(0.6, l).unwrap();
        let f = HarmonicCoefficients::delta(l, 3, -2).unwrap();
        let c = zonal_sst_coefficients(&f, &z, 1).unwrap();
        let want = (4.0 * PI / 7.0).sqrt() * z.column(1).unwrap().get(3, 0).conj();
        for (i, v) in c.as_slice().iter().enumerate() {
            let w = if i == crate::sphere::flat_index(3, -2) {
                want
            } else {
                ZERO
            };
            assert!((v - w).norm() < 1e-15);
        }
        // agrees with the ω = 0 slice of the rotation-group transform
        let f = random_coeffs(l, 50);
        let grid = SphereGrid::new(l).unwrap();
        let s = zonal_sst(&f, &z, 2, &grid).unwrap();
        for (j, &t) in grid.theta_nodes().iter().enumerate() {
            for (k, &p) in grid.phi_nodes().iter().enumerate() {
                let direct = sst_point(&f, &z, 2, &EulerAngles::unchecked(p, t, 0.0)).unwrap();
                assert!((s.value(j, k) - direct).norm() < 1e-12);
            }
        }
        assert!(matches!(
            zonal_sst(&f, &cap_basis(l), 1, &grid),
            Err(SstError::NotZonal)
        ));
    }

    #[test]
    fn zonal_inverse_round_trip_and_errors() {
        let l = 32;
        let z = SlepianBasis::zonal(15f64.to_radians(), l).unwrap();
        let f = random_coeffs(l, 60);
        let c = zonal_sst_coefficients(&f, &z, 1).unwrap();
        let back = zonal_inverse(&c, &z, 1, None).unwrap();
        let rel = back.max_abs_diff(&f) / f.as_slice().iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(rel < 1e-9, "{rel}");
        let zero = HarmonicCoefficients::zeros(l);
        assert_eq!(zonal_inverse(&zero, &z, 1, None).unwrap(), zero);

        let mut g = z.column(1).unwrap().clone();
        g.set(4, 0, ZERO);
        let bad = SlepianBasis::from_parts(*z.region(), l, vec![1.0], vec![g], z.shannon(), true)
            .unwrap();
        assert!(matches!(
            zonal_inverse(&c, &bad, 1, Some(1e-12)),
            Err(SstError::NonInvertible { degrees }) if degrees == vec![4]
        ));
    }

    #[test]
    fn frame_constant_matches_direct_sum() {
        let z = SlepianBasis::zonal(15f64.to_radians(), 16).unwrap();
        let g = z.column(1).unwrap();
        let want: f64 = (0..16)
            .map(|s| 8.0 * PI * PI * g.get(s, 0).norm_sqr() / (2 * s + 1) as f64)
            .sum();
        let r = frame_report(&random_coeffs(16, 1), &z, 1).unwrap();
        assert!((r.frame_constant - want).abs() / want < 1e-14);
        // the numerator always lies between the per-degree bounds
        let f = random_coeffs(16, 2);
        let r = frame_report(&f, &z, 3).unwrap();
        let e = f.norm_sqr();
        assert!(r.numerator >= r.lower_bound * e * (1.0 - 1e-12));
        assert!(r.numerator <= r.upper_bound * e * (1.0 + 1e-12));
        assert!(matches!(
            tight_frame_ratio(&HarmonicCoefficients::zeros(16), &z),
            Err(SstError::ZeroSignal(_))
        ));
    }
}
