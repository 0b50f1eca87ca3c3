//! Wigner functions and spectral rotation.
//!
//! Everything is built on Δ^ℓ_{m,m′} = d^ℓ_{m,m′}(π/2). The Wigner-d function
//! at an arbitrary angle follows from the Fourier expansion
//!
//! ```text
//! d^ℓ_{m,m′}(ϑ) = i^{m−m′} Σ_{m″} Δ^ℓ_{m″,m} Δ^ℓ_{m″,m′} e^{−i m″ ϑ}
//! ```
//!
//! The d convention matches Sakurai: d^1_{1,0}(ϑ) = −sin ϑ / √2, and
//! D^ℓ_{m,0}(φ, ϑ, 0) = √(4π/(2ℓ+1)) conj(Y_ℓ^m(ϑ, φ)).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, SstError};
use crate::sphere::HarmonicCoefficients;

/// Imaginary residue tolerated when collapsing the Δ expansion of d to a real.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Euler angles ρ = (φ, ϑ, ω) of the rotation R_z(φ) R_y(ϑ) R_z(ω).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EulerAngles {
    pub varphi: f64,
    pub vartheta: f64,
    pub omega: f64,
}

impl EulerAngles {
    pub const IDENTITY: EulerAngles = EulerAngles {
        varphi: 0.0,
        vartheta: 0.0,
        omega: 0.0,
    };

    /// Angles in radians; φ, ω ∈ [0, 2π), ϑ ∈ [0, π].
    pub fn new(varphi: f64, vartheta: f64, omega: f64) -> Result<Self> {
        let two_pi = 2.0 * PI;
        if !(0.0..two_pi).contains(&varphi)
            || !(0.0..two_pi).contains(&omega)
            || !(0.0..=PI).contains(&vartheta)
        {
            return Err(SstError::Domain(format!(
                "Euler angles ({varphi}, {vartheta}, {omega}) out of range"
            )));
        }
        Ok(Self {
            varphi,
            vartheta,
            omega,
        })
    }

    /// Angles in degrees, wrapped into the canonical ranges for φ and ω.
    pub fn from_degrees(varphi: f64, vartheta: f64, omega: f64) -> Result<Self> {
        let wrap = |a: f64| a.to_radians().rem_euclid(2.0 * PI);
        Self::new(wrap(varphi), vartheta.to_radians(), wrap(omega))
    }

    /// No range check. Used for SO(3) grid nodes, whose ϑ axis is the periodic
    /// extension over [0, 2π).
    pub fn unchecked(varphi: f64, vartheta: f64, omega: f64) -> Self {
        Self {
            varphi,
            vartheta,
            omega,
        }
    }

    /// 3×3 rotation matrix R_z(φ) R_y(ϑ) R_z(ω), row-major.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let rz = |a: f64| {
            let (s, c) = a.sin_cos();
            [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
        };
        let (s, c) = self.vartheta.sin_cos();
        let ry = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]];
        matmul3(&matmul3(&rz(self.varphi), &ry), &rz(self.omega))
    }
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Δ^ℓ for a single degree: rows m″, columns m, both in −ℓ..=ℓ.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSlice {
    degree: usize,
    data: Vec<f64>,
}

impl DeltaSlice {
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn get(&self, row: isize, col: isize) -> f64 {
        let l = self.degree as isize;
        let n = 2 * l + 1;
        self.data[((row + l) * n + col + l) as usize]
    }

    /// Row-major (2ℓ+1)² values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Column m as a contiguous vector over m″ = −ℓ..=ℓ.
    pub fn column(&self, col: isize) -> Vec<f64> {
        let l = self.degree as isize;
        (-l..=l).map(|r| self.get(r, col)).collect()
    }

    fn zero_degree() -> Self {
        Self {
            degree: 0,
            data: vec![1.0],
        }
    }

    /// Trapani–Navaza step: Δ^ℓ from Δ^{ℓ−1}.
    ///
    /// Computes the eighth 0 ≤ m′ ≤ m ≤ ℓ by the recursions in m at fixed m′
    /// and fills the remaining entries by the symmetries of d(π/2).
    pub fn next_trapani(&self) -> Self {
        let l = self.degree + 1;
        let lf = l as f64;
        let li = l as isize;
        // eighth[m][mm] = Δ^ℓ_{m,mm}, 0 ≤ mm ≤ m ≤ ℓ (plus a few extra entries)
        let w = l + 1;
        let mut eighth = vec![0.0; w * w];
        let e = |m: usize, mm: usize| m * w + mm;

        eighth[e(l, 0)] = -((2.0 * lf - 1.0) / (2.0 * lf)).sqrt() * self.get(li - 1, 0);
        for mm in 1..=l {
            let mmf = mm as f64;
            let factor = (lf / 2.0 * (2.0 * lf - 1.0) / ((lf + mmf) * (lf + mmf - 1.0))).sqrt();
            eighth[e(l, mm)] = factor * self.get(li - 1, mm as isize - 1);
        }
        for mm in 0..=l {
            let mmf = mm as f64;
            let m = l - 1;
            let t1 = ((lf - m as f64) * (lf + m as f64 + 1.0)).sqrt();
            eighth[e(m, mm)] = 2.0 * mmf / t1 * eighth[e(m + 1, mm)];
            if l >= 2 {
                let mut m = l as isize - 2;
                while m >= mm as isize {
                    let mf = m as f64;
                    let t1 = ((lf - mf) * (lf + mf + 1.0)).sqrt();
                    let t2 = ((lf - mf - 1.0) * (lf + mf + 2.0)).sqrt();
                    let mu = m as usize;
                    eighth[e(mu, mm)] =
                        (2.0 * mmf * eighth[e(mu + 1, mm)] - t2 * eighth[e(mu + 2, mm)]) / t1;
                    m -= 1;
                }
            }
        }

        let n = 2 * l + 1;
        let mut data = vec![0.0; n * n];
        for a in -li..=li {
            for b in -li..=li {
                let (ua, ub) = (a.unsigned_abs(), b.unsigned_abs());
                // Δ_{|a|,|b|} from the stored eighth
                let mut v = if ua >= ub {
                    eighth[e(ua, ub)]
                } else {
                    parity(ua + ub) * eighth[e(ub, ua)]
                };
                // Δ_{m,−m′} = (−1)^{ℓ−m} Δ_{m,m′}
                if b < 0 {
                    v *= parity(l + ua);
                }
                // Δ_{−m,m′} = (−1)^{ℓ+m′} Δ_{m,m′}
                if a < 0 {
                    v *= parity_signed(li + b);
                }
                data[((a + li) as usize) * n + (b + li) as usize] = v;
            }
        }
        Self { degree: l, data }
    }

    /// Risbo step: Δ^ℓ from Δ^{ℓ−1} through the half-integer degree ℓ − ½.
    ///
    /// Kept as an independent route to the same table.
    pub fn next_risbo(&self) -> Self {
        let l = self.degree + 1;
        // at β = π/2, cos(β/2) = sin(β/2) = 1/√2
        let (c, s) = (FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let sq = |k: usize| (k as f64).sqrt();

        // Stored as [row k][col i] with k ↔ m′ and i ↔ m, offsets j/2.
        let prev_n = 2 * l - 1;
        let mut prev = vec![0.0; prev_n * prev_n];
        let pl = (l - 1) as isize;
        for k in 0..prev_n {
            for i in 0..prev_n {
                prev[k * prev_n + i] = self.get(i as isize - pl, k as isize - pl);
            }
        }
        let step = |src: &[f64], j: usize| -> Vec<f64> {
            let n_src = j;
            let n_dst = j + 1;
            let rj = j as f64;
            let mut dst = vec![0.0; n_dst * n_dst];
            for k in 0..n_src {
                for i in 0..n_src {
                    let d = src[k * n_src + i] / rj;
                    dst[k * n_dst + i] += sq(j - i) * sq(j - k) * d * c;
                    dst[k * n_dst + i + 1] -= sq(i + 1) * sq(j - k) * d * s;
                    dst[(k + 1) * n_dst + i] += sq(j - i) * sq(k + 1) * d * s;
                    dst[(k + 1) * n_dst + i + 1] += sq(i + 1) * sq(k + 1) * d * c;
                }
            }
            dst
        };
        let half = step(&prev, 2 * l - 1);
        let full = step(&half, 2 * l);

        let n = 2 * l + 1;
        let li = l as isize;
        let mut data = vec![0.0; n * n];
        for a in -li..=li {
            for b in -li..=li {
                let (k, i) = ((b + li) as usize, (a + li) as usize);
                data[((a + li) as usize) * n + (b + li) as usize] = full[k * n + i];
            }
        }
        Self { degree: l, data }
    }
}

#[inline]
fn parity(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn parity_signed(k: isize) -> f64 {
    parity(k.unsigned_abs())
}

/// Which recursion drives the Δ table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaRecursion {
    #[default]
    Trapani,
    Risbo,
}

/// Iterator over Δ^0, Δ^1, … computed on the fly; only one degree is held.
#[derive(Debug, Clone)]
pub struct DeltaSlices {
    current: Option<DeltaSlice>,
    recursion: DeltaRecursion,
}

impl DeltaSlices {
    pub fn new(recursion: DeltaRecursion) -> Self {
        Self {
            current: None,
            recursion,
        }
    }
}

impl Iterator for DeltaSlices {
    type Item = DeltaSlice;

    fn next(&mut self) -> Option<DeltaSlice> {
        let next = match &self.current {
            None => DeltaSlice::zero_degree(),
            Some(prev) => match self.recursion {
                DeltaRecursion::Trapani => prev.next_trapani(),
                DeltaRecursion::Risbo => prev.next_risbo(),
            },
        };
        self.current = Some(next.clone());
        Some(next)
    }
}

/// All Δ^ℓ_{m″,m} for ℓ < L, degree-major; each degree stores its
/// (2ℓ+1)² slice with rows m″ and columns m.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerDeltaTable {
    bandlimit: usize,
    data: Vec<f64>,
}

impl WignerDeltaTable {
    pub fn build(bandlimit: usize) -> Self {
        Self::build_with(bandlimit, DeltaRecursion::Trapani)
    }

    pub fn build_with(bandlimit: usize, recursion: DeltaRecursion) -> Self {
        let mut data = Vec::with_capacity(Self::offset(bandlimit));
        for slice in DeltaSlices::new(recursion).take(bandlimit) {
            data.extend_from_slice(&slice.data);
        }
        Self { bandlimit, data }
    }

    pub fn from_raw(bandlimit: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != Self::offset(bandlimit) {
            return Err(SstError::Format(format!(
                "Δ table for L = {bandlimit} needs {} values, got {}",
                Self::offset(bandlimit),
                data.len()
            )));
        }
        Ok(Self { bandlimit, data })
    }

    /// Start of degree ℓ: Σ_{k<ℓ} (2k+1)² = ℓ(4ℓ² − 1)/3.
    fn offset(l: usize) -> usize {
        l * (4 * l * l).saturating_sub(1) / 3
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, l: usize, row: isize, col: isize) -> f64 {
        let li = l as isize;
        let n = 2 * li + 1;
        self.data[Self::offset(l) + ((row + li) * n + col + li) as usize]
    }

    pub fn slice(&self, l: usize) -> DeltaSlice {
        let n = 2 * l + 1;
        let start = Self::offset(l);
        DeltaSlice {
            degree: l,
            data: self.data[start..start + n * n].to_vec(),
        }
    }
}

/// d^ℓ_{m,m′}(ϑ) via the Δ expansion, from an existing slice.
pub fn wigner_d_from_slice(delta: &DeltaSlice, m: isize, mp: isize, vartheta: f64) -> Result<f64> {
    let l = delta.degree() as isize;
    if m.abs() > l || mp.abs() > l {
        return Err(SstError::Domain(format!(
            "orders ({m}, {mp}) exceed degree {l}"
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for mpp in -l..=l {
        acc += delta.get(mpp, m)
            * delta.get(mpp, mp)
            * Complex64::from_polar(1.0, -(mpp as f64) * vartheta);
    }
    let value = acc * i_pow(m - mp);
    if value.im.abs() > IMAG_RESIDUE_TOL {
        return Err(SstError::Numerical(format!(
            "imaginary residue {:.3e} in d^{l}_({m},{mp})",
            value.im
        )));
    }
    Ok(value.re)
}

/// d^ℓ_{m,m′}(ϑ). Builds Δ up to degree ℓ, so prefer
/// [`wigner_d_from_slice`] inside loops.
pub fn wigner_d(l: usize, m: isize, mp: isize, vartheta: f64) -> Result<f64> {
    if m.unsigned_abs() > l || mp.unsigned_abs() > l {
        return Err(SstError::Domain(format!(
            "orders ({m}, {mp}) exceed degree {l}"
        )));
    }
    let delta = DeltaSlices::new(DeltaRecursion::Trapani)
        .nth(l)
        .expect("infinite iterator");
    wigner_d_from_slice(&delta, m, mp, vartheta)
}

/// D^ℓ_{m,m′}(ρ) = e^{−imφ} d^ℓ_{m,m′}(ϑ) e^{−im′ω}.
#[allow(non_snake_case)]
pub fn wigner_D(l: usize, m: isize, mp: isize, rho: &EulerAngles) -> Result<Complex64> {
    let d = wigner_d(l, m, mp, rho.vartheta)?;
    Ok(Complex64::from_polar(
        d,
        -(m as f64) * rho.varphi - (mp as f64) * rho.omega,
    ))
}

/// i^k for any integer k.
#[inline]
pub fn i_pow(k: isize) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Real d^ℓ(ϑ) matrix for one degree, rows m, columns m′.
pub fn wigner_d_matrix(delta: &DeltaSlice, vartheta: f64) -> Vec<f64> {
    let l = delta.degree() as isize;
    let n = (2 * l + 1) as usize;
    // Re(i^k e^{−im″ϑ}) depends on k mod 4 only
    let cos: Vec<f64> = (-l..=l).map(|k| (k as f64 * vartheta).cos()).collect();
    let sin: Vec<f64> = (-l..=l).map(|k| (k as f64 * vartheta).sin()).collect();
    let mut out = vec![0.0; n * n];
    let cols: Vec<Vec<f64>> = (-l..=l).map(|c| delta.column(c)).collect();
    for m in -l..=l {
        let cm = &cols[(m + l) as usize];
        for mp in -l..=l {
            let cmp = &cols[(mp + l) as usize];
            let phase = (m - mp).rem_euclid(4);
            let mut acc = 0.0;
            for t in 0..n {
                let trig = match phase {
                    0 => cos[t],
                    1 => sin[t],
                    2 => -cos[t],
                    _ => -sin[t],
                };
                acc += cm[t] * cmp[t] * trig;
            }
            out[(m + l) as usize * n + (mp + l) as usize] = acc;
        }
    }
    out
}

/// Coefficients of the rotated signal: (D_ρ f)_ℓ^m = Σ_{m′} D^ℓ_{m,m′}(ρ) (f)_ℓ^{m′}.
pub fn rotate_coefficients(
    coeffs: &HarmonicCoefficients,
    rho: &EulerAngles,
) -> HarmonicCoefficients {
    let bandlimit = coeffs.bandlimit();
    let slices: Vec<DeltaSlice> = DeltaSlices::new(DeltaRecursion::Trapani)
        .take(bandlimit)
        .collect();
    let degrees: Vec<Vec<Complex64>> = slices
        .par_iter()
        .map(|delta| {
            let l = delta.degree() as isize;
            let n = (2 * l + 1) as usize;
            let d = wigner_d_matrix(delta, rho.vartheta);
            let input = coeffs.degree(delta.degree());
            let twisted: Vec<Complex64> = (-l..=l)
                .zip(input)
                .map(|(mp, c)| c * Complex64::from_polar(1.0, -(mp as f64) * rho.omega))
                .collect();
            (-l..=l)
                .map(|m| {
                    let row = &d[(m + l) as usize * n..(m + l + 1) as usize * n];
                    let acc: Complex64 = row.iter().zip(&twisted).map(|(a, b)| b * *a).sum();
                    acc * Complex64::from_polar(1.0, -(m as f64) * rho.varphi)
                })
                .collect()
        })
        .collect();
    HarmonicCoefficients::from_vec(bandlimit, degrees.into_iter().flatten().collect())
        .expect("degree blocks cover L²")
}
