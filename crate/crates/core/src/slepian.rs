//! Slepian concentration: the matrix K, its eigenproblem, Shannon numbers,
//! Slepian analysis/synthesis and the zonal polar-cap basis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, SstError};
use crate::region::Region;
use crate::sphere::{
    flat_index, gauss_legendre, legendre_index, normalized_legendre_table, sht_inverse,
    signed_legendre, HarmonicCoefficients, SphereGrid, SphereSignal,
};

/// Eigenvalues this close outside [0, 1] are clamped onto it.
const CLAMP_SLACK: f64 = 1e-12;
/// Eigenvalues further than this outside [0, 1] indicate a broken solve.
const HARD_SLACK: f64 = 1e-9;
/// Components below this fraction of the largest one count as zero when
/// fixing the eigenvector phase.
const PHASE_THRESHOLD: f64 = 1e-10;

/// Spectral Slepian basis of a region: eigenvalues of K in descending order
/// and (a prefix of) the matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SlepianBasis {
    bandlimit: usize,
    region: Region,
    eigenvalues: Vec<f64>,
    columns: Vec<HarmonicCoefficients>,
    shannon: f64,
    n_well: usize,
    zonal: bool,
}

impl SlepianBasis {
    /// Full basis of `region` at bandlimit L.
    pub fn build(region: Region, bandlimit: usize) -> Result<Self> {
        Self::build_truncated(region, bandlimit, None)
    }

    /// Like [`build`](Self::build), keeping only the first `keep` eigenvectors
    /// (all eigenvalues are kept). Useful for caps at large L, where the full
    /// L²×L² eigenvector matrix does not fit in memory.
    pub fn build_truncated(region: Region, bandlimit: usize, keep: Option<usize>) -> Result<Self> {
        check_bandlimit(bandlimit)?;
        match region {
            Region::PolarCap { cap_angle } => build_cap(region, cap_angle, bandlimit, keep),
            Region::SphericalEllipse { .. } => {
                let k = concentration_matrix(&region, bandlimit)?;
                solve_slepian(&k, region, bandlimit, keep)
            }
        }
    }

    /// Zonal (m = 0) Slepian basis of the cap {θ ≤ Θ_c}: only the m = 0 block
    /// of K is solved. Its Shannon number is L·Θ_c/π.
    pub fn zonal(cap_angle: f64, bandlimit: usize) -> Result<Self> {
        check_bandlimit(bandlimit)?;
        let region = Region::polar_cap(cap_angle)?;
        let block = cap_block(cap_angle, bandlimit, 0);
        let (values, vectors) = real_block_eigen(&block, bandlimit)?;
        let mut order: Vec<usize> = (0..bandlimit).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let mut eigenvalues = Vec::with_capacity(bandlimit);
        let mut columns = Vec::with_capacity(bandlimit);
        for &i in &order {
            eigenvalues.push(clamp_eigenvalue(values[i])?);
            let mut c = HarmonicCoefficients::zeros(bandlimit);
            for (j, l) in (0..bandlimit).enumerate() {
                c.set(l, 0, Complex64::new(vectors[i][j], 0.0));
            }
            columns.push(c);
        }
        let shannon = bandlimit as f64 * cap_angle / PI;
        Ok(Self {
            bandlimit,
            region,
            eigenvalues,
            columns,
            shannon,
            n_well: round_half_up(shannon),
            zonal: true,
        })
    }

    /// Reassembles a basis from stored parts (e.g. a basis file).
    pub fn from_parts(
        region: Region,
        bandlimit: usize,
        eigenvalues: Vec<f64>,
        columns: Vec<HarmonicCoefficients>,
        shannon: f64,
        zonal: bool,
    ) -> Result<Self> {
        check_bandlimit(bandlimit)?;
        if let Some(c) = columns.iter().find(|c| c.bandlimit() != bandlimit) {
            return Err(SstError::BandlimitMismatch {
                signal: c.bandlimit(),
                basis: bandlimit,
            });
        }
        if columns.len() > eigenvalues.len() {
            return Err(SstError::Format(format!(
                "{} eigenvectors but only {} eigenvalues",
                columns.len(),
                eigenvalues.len()
            )));
        }
        Ok(Self {
            bandlimit,
            region,
            eigenvalues,
            columns,
            shannon,
            n_well: round_half_up(shannon),
            zonal,
        })
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }
    pub fn region(&self) -> &Region {
        &self.region
    }
    /// All eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    /// Stored eigenvectors, in eigenvalue order.
    pub fn columns(&self) -> &[HarmonicCoefficients] {
        &self.columns
    }
    pub fn shannon(&self) -> f64 {
        self.shannon
    }
    /// Shannon number rounded half-up: the count of well-concentrated functions.
    pub fn n_well(&self) -> usize {
        self.n_well
    }
    pub fn is_zonal(&self) -> bool {
        self.zonal
    }

    /// λ_α for the 1-based scale α.
    pub fn eigenvalue(&self, alpha: usize) -> Result<f64> {
        self.check_scale(alpha, self.eigenvalues.len())?;
        Ok(self.eigenvalues[alpha - 1])
    }

    /// Spectral coefficients of g_α for the 1-based scale α.
    pub fn column(&self, alpha: usize) -> Result<&HarmonicCoefficients> {
        self.check_scale(alpha, self.columns.len())?;
        Ok(&self.columns[alpha - 1])
    }

    /// Keeps only the first `keep` eigenvectors.
    pub fn truncate(&mut self, keep: usize) {
        self.columns.truncate(keep);
    }

    fn check_scale(&self, alpha: usize, available: usize) -> Result<()> {
        if alpha == 0 || alpha > available {
            return Err(SstError::ScaleOutOfRange { alpha, available });
        }
        Ok(())
    }
}

fn check_bandlimit(bandlimit: usize) -> Result<()> {
    if bandlimit == 0 {
        return Err(SstError::Domain("bandlimit must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

fn clamp_eigenvalue(lambda: f64) -> Result<f64> {
    if !(-HARD_SLACK..=1.0 + HARD_SLACK).contains(&lambda) {
        return Err(SstError::Numerical(format!(
            "concentration eigenvalue {lambda:e} outside [0, 1]"
        )));
    }
    Ok(if lambda < 0.0 && lambda > -CLAMP_SLACK {
        0.0
    } else if lambda > 1.0 && lambda < 1.0 + CLAMP_SLACK {
        1.0
    } else {
        lambda
    })
}

/// Order-m block of the cap matrix: 2π ∫_{cos Θ_c}^1 P̄_ℓ^m P̄_p^m dx for
/// m ≤ ℓ, p < L, row-major (L−m)². Gauss–Legendre with L nodes is exact
/// because the integrand is a polynomial of degree ≤ 2L − 2.
fn cap_block(cap_angle: f64, bandlimit: usize, m: usize) -> Vec<f64> {
    let n = bandlimit - m;
    let c = cap_angle.cos();
    let (t, w) = gauss_legendre(bandlimit);
    let half = (1.0 - c) / 2.0;
    let tables: Vec<(f64, Vec<f64>)> = t
        .iter()
        .zip(&w)
        .map(|(&t, &w)| {
            (
                w * half,
                normalized_legendre_table(bandlimit, (1.0 + c) / 2.0 + half * t),
            )
        })
        .collect();
    let mut block = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let (l, p) = (m + i, m + j);
            let v: f64 = tables
                .iter()
                .map(|(w, tab)| w * tab[legendre_index(l, m)] * tab[legendre_index(p, m)])
                .sum::<f64>()
                * 2.0
                * PI;
            block[i * n + j] = v;
            block[j * n + i] = v;
        }
    }
    block
}

/// Eigen-decomposition of a real symmetric row-major block; eigenvectors
/// are returned phase-fixed (first significant component positive).
fn real_block_eigen(block: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = block.len().isqrt().min(n);
    let mat = DMatrix::from_row_slice(n, n, block);
    let eig = mat.try_symmetric_eigen(f64::EPSILON, 0).ok_or_else(|| {
        SstError::Numerical(format!(
            "symmetric eigensolver failed on a {n}×{n} cap block"
        ))
    })?;
    let vectors = (0..n)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if let Some(first) = v.iter().find(|x| x.abs() > PHASE_THRESHOLD * max) {
                if *first < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            v
        })
        .collect();
    Ok((eig.eigenvalues.iter().copied().collect(), vectors))
}

fn build_cap(
    region: Region,
    cap_angle: f64,
    bandlimit: usize,
    keep: Option<usize>,
) -> Result<SlepianBasis> {
    let blocks: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..bandlimit)
        .into_par_iter()
        .map(|m| real_block_eigen(&cap_block(cap_angle, bandlimit, m), bandlimit - m))
        .collect::<Result<_>>()?;

    // (λ, signed order, index within block); ±m blocks are identical
    let mut entries: Vec<(f64, isize, usize)> = Vec::with_capacity(bandlimit * bandlimit);
    for (m, (values, _)) in blocks.iter().enumerate() {
        for (i, &v) in values.iter().enumerate() {
            entries.push((v, m as isize, i));
            if m > 0 {
                entries.push((v, -(m as isize), i));
            }
        }
    }
    entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let eigenvalues = entries
        .iter()
        .map(|e| clamp_eigenvalue(e.0))
        .collect::<Result<Vec<_>>>()?;
    let keep = keep.unwrap_or(entries.len()).min(entries.len());
    let columns = entries[..keep]
        .iter()
        .map(|&(_, m, i)| {
            let am = m.unsigned_abs();
            let v = &blocks[am].1[i];
            let mut c = HarmonicCoefficients::zeros(bandlimit);
            for (j, x) in v.iter().enumerate() {
                c.set(am + j, m, Complex64::new(*x, 0.0));
            }
            c
        })
        .collect();
    let shannon = eigenvalues.iter().sum();
    Ok(SlepianBasis {
        bandlimit,
        region,
        eigenvalues,
        columns,
        shannon,
        n_well: round_half_up(shannon),
        zonal: false,
    })
}

/// Dense K_{ℓm,pq} = ∫_R conj(Y_ℓ^m) Y_p^q ds in flat-index order.
///
/// Caps are filled block-diagonally from exact 1D quadrature, so entries with
/// m ≠ q are exactly zero. Ellipses use the membership-masked quadrature on
/// the grid for bandlimit 2L; K = AᴴA is Hermitian by construction.
pub fn concentration_matrix(region: &Region, bandlimit: usize) -> Result<DMatrix<Complex64>> {
    check_bandlimit(bandlimit)?;
    let n = bandlimit * bandlimit;
    let mut k = DMatrix::<Complex64>::zeros(n, n);
    match *region {
        Region::PolarCap { cap_angle } => {
            for m in 0..bandlimit {
                let block = cap_block(cap_angle, bandlimit, m);
                let size = bandlimit - m;
                for sign in [1isize, -1] {
                    if m == 0 && sign < 0 {
                        continue;
                    }
                    let sm = sign * m as isize;
                    for i in 0..size {
                        for j in 0..size {
                            k[(flat_index(m + i, sm), flat_index(m + j, sm))] =
                                Complex64::new(block[i * size + j], 0.0);
                        }
                    }
                }
            }
        }
        Region::SphericalEllipse { .. } => {
            let grid = SphereGrid::new(2 * bandlimit)?;
            let rows = masked_synthesis_rows(region, &grid, bandlimit);
            let a = DMatrix::from_row_slice(rows.len() / n.max(1), n, &rows);
            k = a.adjoint() * a;
            // mirror the upper triangle so K = Kᴴ bit for bit
            for i in 0..n {
                k[(i, i)].im = 0.0;
                for j in i + 1..n {
                    k[(j, i)] = k[(i, j)].conj();
                }
            }
        }
    }
    Ok(k)
}

/// √(node area) · Y_idx(node) for every grid node inside the region, one
/// row of length L² per node.
fn masked_synthesis_rows(region: &Region, grid: &SphereGrid, bandlimit: usize) -> Vec<Complex64> {
    let n = bandlimit * bandlimit;
    let per_row: Vec<Vec<Complex64>> = (0..grid.n_theta())
        .into_par_iter()
        .map(|j| {
            let t = grid.theta_nodes()[j];
            let table = normalized_legendre_table(bandlimit, grid.cos_theta_nodes()[j]);
            let scale = grid.node_area(j).sqrt();
            let mut out = Vec::new();
            for &p in grid.phi_nodes() {
                if !region.contains(t, p) {
                    continue;
                }
                for l in 0..bandlimit {
                    for m in -(l as isize)..=(l as isize) {
                        out.push(Complex64::from_polar(
                            scale * signed_legendre(&table, l, m),
                            m as f64 * p,
                        ));
                    }
                }
            }
            debug_assert_eq!(out.len() % n, 0);
            out
        })
        .collect();
    per_row.into_iter().flatten().collect()
}

/// Hermitian eigen-decomposition of K, sorted by descending eigenvalue, with
/// each eigenvector's first significant component made real and positive.
/// `keep` limits the number of stored eigenvectors.
pub fn solve_slepian(
    k: &DMatrix<Complex64>,
    region: Region,
    bandlimit: usize,
    keep: Option<usize>,
) -> Result<SlepianBasis> {
    let n = bandlimit * bandlimit;
    if k.nrows() != n || k.ncols() != n {
        return Err(SstError::Domain(format!(
            "K is {}×{}, expected {n}×{n} for L = {bandlimit}",
            k.nrows(),
            k.ncols()
        )));
    }
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (k[(i, j)] - k[(j, i)].conj()).norm())
        .fold(0.0, f64::max);
    if asym > 0.0 {
        return Err(SstError::Numerical(format!(
            "K is not Hermitian (max |K − Kᴴ| = {asym:e})"
        )));
    }
    let eig = k.clone().try_symmetric_eigen(f64::EPSILON, 0).ok_or_else(|| {
        let diag_max = (0..n).map(|i| k[(i, i)].re).fold(f64::MIN, f64::max);
        let diag_min = (0..n).map(|i| k[(i, i)].re).fold(f64::MAX, f64::min);
        SstError::Numerical(format!(
            "Hermitian eigensolver failed on {n}×{n} K (diagonal range [{diag_min:e}, {diag_max:e}])"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let eigenvalues = order
        .iter()
        .map(|&i| clamp_eigenvalue(eig.eigenvalues[i]))
        .collect::<Result<Vec<_>>>()?;
    let keep = keep.unwrap_or(n).min(n);
    let columns = order[..keep]
        .iter()
        .map(|&i| {
            let mut v: Vec<Complex64> = eig.eigenvectors.column(i).iter().copied().collect();
            fix_phase(&mut v);
            HarmonicCoefficients::from_vec(bandlimit, v)
        })
        .collect::<Result<Vec<_>>>()?;
    let shannon: f64 = eigenvalues.iter().sum();
    Ok(SlepianBasis {
        bandlimit,
        region,
        eigenvalues,
        columns,
        shannon,
        n_well: round_half_up(shannon),
        zonal: false,
    })
}

fn fix_phase(v: &mut [Complex64]) {
    let max = v.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    if let Some(first) = v.iter().find(|x| x.norm() > PHASE_THRESHOLD * max) {
        let phase = first.conj() / first.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Spatial Slepian function g_α sampled on `grid`.
pub fn slepian_eval(basis: &SlepianBasis, alpha: usize, grid: &SphereGrid) -> Result<SphereSignal> {
    Ok(sht_inverse(basis.column(alpha)?, grid))
}

/// Slepian coefficients (h)_α = g_αᴴ h for every stored column.
pub fn slepian_analysis(h: &HarmonicCoefficients, basis: &SlepianBasis) -> Result<Vec<Complex64>> {
    if h.bandlimit() != basis.bandlimit() {
        return Err(SstError::BandlimitMismatch {
            signal: h.bandlimit(),
            basis: basis.bandlimit(),
        });
    }
    Ok(basis
        .columns()
        .par_iter()
        .map(|g| {
            g.as_slice()
                .iter()
                .zip(h.as_slice())
                .map(|(a, b)| a.conj() * b)
                .sum()
        })
        .collect())
}

/// h = Σ_α (h)_α g_α over the given Slepian coefficients.
pub fn slepian_synthesis(
    coeffs: &[Complex64],
    basis: &SlepianBasis,
) -> Result<HarmonicCoefficients> {
    if coeffs.len() > basis.columns().len() {
        return Err(SstError::ScaleOutOfRange {
            alpha: coeffs.len(),
            available: basis.columns().len(),
        });
    }
    let mut out = HarmonicCoefficients::zeros(basis.bandlimit());
    for (c, g) in coeffs.iter().zip(basis.columns()) {
        for (o, x) in out.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *o += c * x;
        }
    }
    Ok(out)
}
