//! Localized variation analysis: a background plus weak region-localized
//! variations, their spatial-Slepian coefficients over a zonal cap basis, and
//! sample-variance maps that reveal where the variations live.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SstError};
use crate::region::Region;
use crate::slepian::SlepianBasis;
use crate::sphere::{HarmonicCoefficients, SphereGrid};
use crate::sst::zonal_sst;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Background realization: (b)_0^0 real standard normal, every other
/// coefficient complex with independent standard normal parts.
pub fn synthesize_background(bandlimit: usize, seed: u64) -> HarmonicCoefficients {
    background_from(bandlimit, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn background_from(bandlimit: usize, rng: &mut ChaCha8Rng) -> HarmonicCoefficients {
    let mut b = HarmonicCoefficients::zeros(bandlimit);
    for (i, c) in b.as_mut_slice().iter_mut().enumerate() {
        *c = if i == 0 {
            Complex64::new(normal(rng), 0.0)
        } else {
            Complex64::new(normal(rng), normal(rng))
        };
    }
    b
}

/// v = Σ_{β ≤ n_well} a_β g̃_β with i.i.d. standard normal a_β.
pub fn synthesize_variation(basis: &SlepianBasis, seed: u64) -> Result<HarmonicCoefficients> {
    variation_from(basis, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn variation_from(basis: &SlepianBasis, rng: &mut ChaCha8Rng) -> Result<HarmonicCoefficients> {
    let weights: Vec<f64> = (0..basis.n_well()).map(|_| normal(rng)).collect();
    variation_from_weights(basis, &weights)
}

/// Σ_β a_β g̃_β for explicit weights.
pub fn variation_from_weights(
    basis: &SlepianBasis,
    weights: &[f64],
) -> Result<HarmonicCoefficients> {
    if weights.len() > basis.columns().len() {
        return Err(SstError::ScaleOutOfRange {
            alpha: weights.len(),
            available: basis.columns().len(),
        });
    }
    let mut v = HarmonicCoefficients::zeros(basis.bandlimit());
    for (a, g) in weights.iter().zip(basis.columns()) {
        for (o, x) in v.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *o += x * *a;
        }
    }
    Ok(v)
}

/// Background-to-variation ratio 10 log10(‖b‖² / ‖v‖²) in dB.
pub fn bvr(b: &HarmonicCoefficients, v: &HarmonicCoefficients) -> Result<f64> {
    let ev = v.norm_sqr();
    if ev == 0.0 {
        return Err(SstError::ZeroSignal("BVR of a zero variation".into()));
    }
    Ok(10.0 * (b.norm_sqr() / ev).log10())
}

/// One background, N variations rescaled to the target BVR, and the
/// observations f^j = b + v^j.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub bandlimit: usize,
    pub seed: u64,
    pub target_bvr_db: f64,
    pub background: HarmonicCoefficients,
    pub variations: Vec<HarmonicCoefficients>,
    pub observations: Vec<HarmonicCoefficients>,
}

/// Builds the Slepian basis of `region` and then the ensemble.
pub fn build_ensemble(
    bandlimit: usize,
    n_instances: usize,
    region: Region,
    target_bvr_db: f64,
    seed: u64,
) -> Result<Ensemble> {
    let basis = SlepianBasis::build(region, bandlimit)?;
    build_ensemble_with(&basis, n_instances, target_bvr_db, seed)
}

/// Ensemble from a prebuilt variation basis. A single generator seeded with
/// `seed` draws the background first, then the variations in order.
pub fn build_ensemble_with(
    basis: &SlepianBasis,
    n_instances: usize,
    target_bvr_db: f64,
    seed: u64,
) -> Result<Ensemble> {
    if n_instances == 0 {
        return Err(SstError::Domain(
            "ensemble needs at least one instance".into(),
        ));
    }
    let bandlimit = basis.bandlimit();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let background = background_from(bandlimit, &mut rng);
    let eb = background.norm_sqr();
    let mut variations = Vec::with_capacity(n_instances);
    for _ in 0..n_instances {
        let mut v = variation_from(basis, &mut rng)?;
        let ev = v.norm_sqr();
        if ev == 0.0 {
            return Err(SstError::ZeroSignal("variation with zero energy".into()));
        }
        v.scale((eb / (ev * 10f64.powf(target_bvr_db / 10.0))).sqrt());
        variations.push(v);
    }
    let observations = variations
        .iter()
        .map(|v| background.add(v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        bandlimit,
        seed,
        target_bvr_db,
        background,
        variations,
        observations,
    })
}

/// Pointwise biased sample variance (1/N) Σ_j |x_j − mean|² over a stack of
/// equally sized maps.
pub fn sample_variance(stack: &[Vec<Complex64>]) -> Result<Vec<f64>> {
    let first = stack
        .first()
        .ok_or_else(|| SstError::Domain("sample variance of an empty stack".into()))?;
    if stack.iter().any(|s| s.len() != first.len()) {
        return Err(SstError::GridMismatch(
            "stack entries differ in size".into(),
        ));
    }
    let n = stack.len() as f64;
    Ok((0..first.len())
        .into_par_iter()
        .map(|i| {
            let mean = stack.iter().map(|s| s[i]).sum::<Complex64>() / n;
            stack.iter().map(|s| (s[i] - mean).norm_sqr()).sum::<f64>() / n
        })
        .collect())
}

/// Sample-variance map of the zonal spatial-Slepian coefficients at one
/// Slepian scale, on a sphere grid (θ-major).
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceMap {
    pub alpha: usize,
    pub grid: SphereGrid,
    pub values: Vec<f64>,
}

impl VarianceMap {
    /// Flat index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            )
            .0
    }

    /// (θ, φ) of a flat grid index.
    pub fn node(&self, idx: usize) -> (f64, f64) {
        let n_phi = self.grid.n_phi();
        (
            self.grid.theta_nodes()[idx / n_phi],
            self.grid.phi_nodes()[idx % n_phi],
        )
    }
}

/// Variance maps for each scale in `alphas`, from the zonal SST of every
/// signal in `signals` sampled on `grid`.
pub fn variance_maps(
    signals: &[HarmonicCoefficients],
    zonal_basis: &SlepianBasis,
    alphas: &[usize],
    grid: &SphereGrid,
) -> Result<Vec<VarianceMap>> {
    alphas
        .iter()
        .map(|&alpha| {
            let stack = signals
                .par_iter()
                .map(|f| Ok(zonal_sst(f, zonal_basis, alpha, grid)?.into_values()))
                .collect::<Result<Vec<_>>>()?;
            Ok(VarianceMap {
                alpha,
                grid: grid.clone(),
                values: sample_variance(&stack)?,
            })
        })
        .collect()
}

/// Nodes whose value strictly exceeds the area-weighted q-quantile of the
/// map: the smallest value t such that nodes with value ≤ t cover at least a
/// fraction q of the sphere.
pub fn detect_region(map: &VarianceMap, quantile: f64) -> Result<Vec<bool>> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(SstError::Domain(format!(
            "quantile {quantile} outside (0, 1)"
        )));
    }
    let n_phi = map.grid.n_phi();
    let mut order: Vec<usize> = (0..map.values.len()).collect();
    order.sort_by(|&a, &b| map.values[a].total_cmp(&map.values[b]).then(a.cmp(&b)));
    let total: f64 = (0..map.values.len())
        .map(|i| map.grid.node_area(i / n_phi))
        .sum();
    let mut covered = 0.0;
    let mut threshold = map.values[*order.last().expect("non-empty map")];
    for &i in &order {
        covered += map.grid.node_area(i / n_phi);
        if covered >= quantile * total {
            threshold = map.values[i];
            break;
        }
    }
    Ok(map.values.iter().map(|&v| v > threshold).collect())
}

/// Parameters of a full detection experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LvaConfig {
    pub bandlimit: usize,
    pub n_instances: usize,
    pub target_bvr_db: f64,
    pub variation_region: Region,
    /// Cap angle of the zonal detection basis, radians.
    pub cap_angle: f64,
    /// Slepian scales; empty means 1..=n_well of the zonal basis.
    pub alphas: Vec<usize>,
    pub quantile: f64,
    pub seed: u64,
}

/// Outputs of [`run_lva`].
#[derive(Debug, Clone)]
pub struct LvaOutcome {
    pub ensemble: Ensemble,
    pub maps: Vec<VarianceMap>,
    pub masks: Vec<Vec<bool>>,
}

/// Ensemble → zonal SST stacks → variance maps → detection masks. Pass a
/// prebuilt `variation_basis` to reuse it across seeds.
pub fn run_lva(config: &LvaConfig, variation_basis: Option<&SlepianBasis>) -> Result<LvaOutcome> {
    let owned;
    let basis = match variation_basis {
        Some(b) => b,
        None => {
            owned = SlepianBasis::build(config.variation_region, config.bandlimit)?;
            &owned
        }
    };
    let ensemble =
        build_ensemble_with(basis, config.n_instances, config.target_bvr_db, config.seed)?;
    let zonal = SlepianBasis::zonal(config.cap_angle, config.bandlimit)?;
    let alphas: Vec<usize> = if config.alphas.is_empty() {
        (1..=zonal.n_well()).collect()
    } else {
        config.alphas.clone()
    };
    let grid = SphereGrid::new(config.bandlimit)?;
    let maps = variance_maps(&ensemble.observations, &zonal, &alphas, &grid)?;
    let masks = maps
        .iter()
        .map(|m| detect_region(m, config.quantile))
        .collect::<Result<Vec<_>>>()?;
    Ok(LvaOutcome {
        ensemble,
        maps,
        masks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn background_is_deterministic() {
        let a = synthesize_background(8, 7);
        assert_eq!(a, synthesize_background(8, 7));
        assert_ne!(a, synthesize_background(8, 8));
        assert_eq!(a.get(0, 0).im, 0.0);
        assert!(a.norm_sqr() > 0.0);
    }

    #[test]
    fn background_mean_is_zero() {
        let n = 10_000;
        let (mut re, mut im) = (0.0, 0.0);
        for seed in 0..n {
            let c = synthesize_background(3, seed).get(2, 1);
            re += c.re;
            im += c.im;
        }
        // standard error of the mean is 1/√n = 0.01
        assert!((re / n as f64).abs() < 0.03 && (im / n as f64).abs() < 0.03);
    }

    #[test]
    fn bvr_values() {
        let b = synthesize_background(4, 1);
        assert!(bvr(&b, &b).unwrap().abs() < 1e-15);
        let mut v = b.clone();
        v.scale(0.1);
        assert!((bvr(&b, &v).unwrap() - 20.0).abs() < 1e-12);
        assert!(matches!(
            bvr(&b, &HarmonicCoefficients::zeros(4)),
            Err(SstError::ZeroSignal(_))
        ));
    }

    #[test]
    fn zero_weights_give_zero_variation() {
        let basis = SlepianBasis::build(Region::polar_cap(0.5).unwrap(), 6).unwrap();
        let v = variation_from_weights(&basis, &vec![0.0; basis.n_well()]).unwrap();
        assert_eq!(v, HarmonicCoefficients::zeros(6));
    }

    #[test]
    fn ensemble_hits_target_bvr() {
        let basis = SlepianBasis::build(Region::polar_cap(0.6).unwrap(), 8).unwrap();
        let e = build_ensemble_with(&basis, 5, 20.0, 3).unwrap();
        for (v, f) in e.variations.iter().zip(&e.observations) {
            assert!((bvr(&e.background, v).unwrap() - 20.0).abs() < 1e-10);
            assert_eq!(&e.background.add(v).unwrap(), f);
        }
        assert_eq!(e, build_ensemble_with(&basis, 5, 20.0, 3).unwrap());
    }

    #[test]
    fn variance_hand_cases() {
        let z = Complex64::new(0.3, -1.2);
        let v = sample_variance(&[vec![z], vec![-z]]).unwrap();
        assert!((v[0] - z.norm_sqr()).abs() < 1e-15);
        let same = sample_variance(&[vec![z; 4], vec![z; 4], vec![z; 4]]).unwrap();
        assert!(same.iter().all(|&x| x == 0.0));
        assert!(sample_variance(&[vec![z], vec![z, z]]).is_err());
        assert!(sample_variance(&[]).is_err());
    }

    #[test]
    fn detection_masks() {
        let grid = SphereGrid::new(8).unwrap();
        let flat = VarianceMap {
            alpha: 1,
            grid: grid.clone(),
            values: vec![2.0; grid.len()],
        };
        assert!(detect_region(&flat, 0.95).unwrap().iter().all(|&b| !b));
        let mut spike = flat.clone();
        spike.values[17] = 5.0;
        let mask = detect_region(&spike, 0.99).unwrap();
        assert_eq!(mask.iter().filter(|&&b| b).count(), 1);
        assert!(mask[17]);
        assert_eq!(spike.argmax(), 17);
        assert!(detect_region(&spike, 1.0).is_err());
    }

    #[test]
    fn single_instance_has_zero_variance() {
        let cfg = LvaConfig {
            bandlimit: 8,
            n_instances: 1,
            target_bvr_db: 20.0,
            variation_region: Region::polar_cap(0.7).unwrap(),
            cap_angle: PI / 12.0,
            alphas: vec![],
            quantile: 0.95,
            seed: 1,
        };
        let out = run_lva(&cfg, None).unwrap();
        assert!(out.maps.iter().all(|m| m.values.iter().all(|&v| v == 0.0)));
    }
}
