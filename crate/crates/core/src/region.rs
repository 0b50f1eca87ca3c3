//! Spatial regions: north polar caps and rotated spherical ellipses.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SstError};
use crate::sphere::SphereGrid;
use crate::wigner::EulerAngles;

/// A region R on the sphere.
///
/// The spherical ellipse is the set of points whose geodesic distances to two
/// foci sum to at most 2a. Before rotation the foci sit at colatitude θ_c on
/// the x–z great circle, at longitudes 0 and π, so the major axis lies along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    PolarCap {
        cap_angle: f64,
    },
    SphericalEllipse {
        focus_colatitude: f64,
        semi_major: f64,
        rotation: EulerAngles,
    },
}

impl Region {
    /// Cap {θ ≤ Θ_c}, 0 < Θ_c ≤ π.
    pub fn polar_cap(cap_angle: f64) -> Result<Self> {
        if !(cap_angle > 0.0 && cap_angle <= PI) {
            return Err(SstError::InvalidRegion(format!(
                "cap angle {cap_angle} rad outside (0, π]"
            )));
        }
        Ok(Region::PolarCap { cap_angle })
    }

    /// Ellipse with 0 < θ_c < a < π/2 (radians).
    pub fn spherical_ellipse(
        focus_colatitude: f64,
        semi_major: f64,
        rotation: EulerAngles,
    ) -> Result<Self> {
        if !(focus_colatitude > 0.0 && focus_colatitude < semi_major && semi_major < FRAC_PI_2) {
            return Err(SstError::InvalidRegion(format!(
                "ellipse needs 0 < θ_c < a < π/2, got θ_c = {focus_colatitude}, a = {semi_major}"
            )));
        }
        Ok(Region::SphericalEllipse {
            focus_colatitude,
            semi_major,
            rotation,
        })
    }

    pub fn cap_angle(&self) -> Option<f64> {
        match self {
            Region::PolarCap { cap_angle } => Some(*cap_angle),
            _ => None,
        }
    }

    pub fn is_polar_cap(&self) -> bool {
        matches!(self, Region::PolarCap { .. })
    }

    /// Whether (θ, φ) lies in the region (boundary included).
    pub fn contains(&self, theta: f64, phi: f64) -> bool {
        match *self {
            Region::PolarCap { cap_angle } => theta <= cap_angle,
            Region::SphericalEllipse {
                focus_colatitude,
                semi_major,
                rotation,
            } => {
                let x = unit_vector(theta, phi);
                let r = rotation.rotation_matrix();
                // R⁻¹ x = Rᵀ x
                let y = [
                    r[0][0] * x[0] + r[1][0] * x[1] + r[2][0] * x[2],
                    r[0][1] * x[0] + r[1][1] * x[1] + r[2][1] * x[2],
                    r[0][2] * x[0] + r[1][2] * x[1] + r[2][2] * x[2],
                ];
                let (s, c) = focus_colatitude.sin_cos();
                let d1 = geodesic(&y, &[s, 0.0, c]);
                let d2 = geodesic(&y, &[-s, 0.0, c]);
                d1 + d2 <= 2.0 * semi_major
            }
        }
    }

    /// Whether (θ, φ) lies within geodesic distance `margin` of the region.
    /// Ellipses are tested by sampling a disc of radius `margin` around the
    /// point, so the dilated boundary is resolved to about margin / 12.
    pub fn dilated_contains(&self, theta: f64, phi: f64, margin: f64) -> bool {
        if self.contains(theta, phi) {
            return true;
        }
        match *self {
            Region::PolarCap { cap_angle } => theta <= cap_angle + margin,
            Region::SphericalEllipse { semi_major, .. } => {
                let x = unit_vector(theta, phi);
                let centre = self.centre();
                if geodesic(&x, &centre) > semi_major + margin {
                    return false;
                }
                let (e1, e2) = tangent_frame(&x);
                let rings = 12;
                let spokes = 48;
                for i in 1..=rings {
                    let r = margin * i as f64 / rings as f64;
                    for k in 0..spokes {
                        let a = 2.0 * PI * k as f64 / spokes as f64;
                        let dir = [
                            a.cos() * e1[0] + a.sin() * e2[0],
                            a.cos() * e1[1] + a.sin() * e2[1],
                            a.cos() * e1[2] + a.sin() * e2[2],
                        ];
                        let p = [
                            r.cos() * x[0] + r.sin() * dir[0],
                            r.cos() * x[1] + r.sin() * dir[1],
                            r.cos() * x[2] + r.sin() * dir[2],
                        ];
                        let t = p[2].clamp(-1.0, 1.0).acos();
                        let ph = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
                        if self.contains(t, ph) {
                            return true;
                        }
                    }
                }
                false
            }
        }
    }

    /// Unit vector of the region centre (north pole for caps).
    pub fn centre(&self) -> [f64; 3] {
        match *self {
            Region::PolarCap { .. } => [0.0, 0.0, 1.0],
            Region::SphericalEllipse { rotation, .. } => {
                let r = rotation.rotation_matrix();
                [r[0][2], r[1][2], r[2][2]]
            }
        }
    }

    /// Surface area A_R. Closed form for caps; for ellipses, the
    /// membership-masked quadrature on the grid for `quadrature_bandlimit`.
    pub fn area(&self, quadrature_bandlimit: usize) -> Result<f64> {
        match *self {
            Region::PolarCap { cap_angle } => Ok(2.0 * PI * (1.0 - cap_angle.cos())),
            Region::SphericalEllipse { .. } => {
                let grid = SphereGrid::new(quadrature_bandlimit)?;
                Ok(self.masked_area(&grid))
            }
        }
    }

    /// Σ of node areas inside the region.
    pub fn masked_area(&self, grid: &SphereGrid) -> f64 {
        let mut area = 0.0;
        for (j, &t) in grid.theta_nodes().iter().enumerate() {
            let inside = grid
                .phi_nodes()
                .iter()
                .filter(|&&p| self.contains(t, p))
                .count();
            area += inside as f64 * grid.node_area(j);
        }
        area
    }
}

pub(crate) fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

pub(crate) fn geodesic(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    // atan2 form stays accurate for nearly coincident points
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let c = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    s.atan2(c)
}

fn tangent_frame(x: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if x[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let mut e1 = [
        helper[1] * x[2] - helper[2] * x[1],
        helper[2] * x[0] - helper[0] * x[2],
        helper[0] * x[1] - helper[1] * x[0],
    ];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for v in &mut e1 {
        *v /= n;
    }
    let e2 = [
        x[1] * e1[2] - x[2] * e1[1],
        x[2] * e1[0] - x[0] * e1[2],
        x[0] * e1[1] - x[1] * e1[0],
    ];
    (e1, e2)
}
