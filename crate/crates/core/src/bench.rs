//! Timing harness for the fast transform and log-log complexity fits.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SstError};
use crate::region::Region;
use crate::slepian::SlepianBasis;
use crate::sphere::HarmonicCoefficients;
use crate::sst::{compute_c_with, evaluate_c};

/// Wall times in seconds for one bandlimit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub bandlimit: usize,
    pub t_c: f64,
    pub t_fft: f64,
    pub t_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub slope_c: f64,
    pub slope_fft: f64,
    pub slope_total: f64,
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Random signal with independent uniform real and imaginary parts.
pub fn random_signal(bandlimit: usize, seed: u64) -> HarmonicCoefficients {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..bandlimit * bandlimit)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    HarmonicCoefficients::from_vec(bandlimit, v).expect("length matches")
}

/// Times the C stage and the FFT stage of one single-scale transform, using
/// the best-concentrated Slepian function of a 15° polar cap as the window.
/// Each stage keeps its fastest of `reps` runs.
pub fn time_transform(bandlimit: usize, reps: usize, seed: u64) -> Result<BenchRow> {
    let basis =
        SlepianBasis::build_truncated(Region::polar_cap(15f64.to_radians())?, bandlimit, Some(1))?;
    let g = basis.column(1)?;
    let f = random_signal(bandlimit, seed);
    let (mut t_c, mut t_fft) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        let cube = compute_c_with(&f, g);
        t_c = t_c.min(start.elapsed().as_secs_f64());
        let start = Instant::now();
        let out = evaluate_c(&cube);
        t_fft = t_fft.min(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    Ok(BenchRow {
        bandlimit,
        t_c,
        t_fft,
        t_total: t_c + t_fft,
    })
}

/// Times every bandlimit in `bandlimits` (strictly increasing) on a pool
/// of `threads` workers (all cores when `None`) and fits the slopes.
pub fn run_bench(
    bandlimits: &[usize],
    reps: usize,
    threads: Option<usize>,
    seed: u64,
) -> Result<BenchReport> {
    if bandlimits.len() < 2 || bandlimits.windows(2).any(|w| w[0] >= w[1]) || bandlimits[0] == 0 {
        return Err(SstError::Domain(format!(
            "bandlimits must be positive, strictly increasing and at least two: {bandlimits:?}"
        )));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| SstError::Numerical(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        bandlimits
            .iter()
            .map(|&l| time_transform(l, reps, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    let xs: Vec<f64> = rows.iter().map(|r| r.bandlimit as f64).collect();
    let slope =
        |f: fn(&BenchRow) -> f64| loglog_slope(&xs, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(BenchReport {
        slope_c: slope(|r| r.t_c),
        slope_fft: slope(|r| r.t_fft),
        slope_total: slope(|r| r.t_total),
        rows,
    })
}

/// CSV with columns `L,t_C,t_fft,t_total`, then the fitted slopes.
pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = String::from("L,t_C,t_fft,t_total\n");
    for r in &report.rows {
        out += &format!(
            "{},{:.6e},{:.6e},{:.6e}\n",
            r.bandlimit, r.t_c, r.t_fft, r.t_total
        );
    }
    out += &format!(
        "slope,{:.4},{:.4},{:.4}\n",
        report.slope_c, report.slope_fft, report.slope_total
    );
    out
}
