//! Command implementations: thin bindings from parsed arguments to the core
//! library. Angles arrive in degrees and are converted here, once.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::{json, Value};
use sst_core::bench::{bench_csv, random_signal, run_bench};
use sst_core::io::{self, read_raw};
use sst_core::lva::{bvr, run_lva, LvaConfig, VarianceMap};
use sst_core::sphere::{analyze_equiangular, degree_order, sht_forward};
use sst_core::sst::{
    frame_report, inverse_sst, so3_analysis, sst_fast, sst_points, zonal_inverse, zonal_sst,
    SO3Grid, SO3Signal,
};
use sst_core::{
    EulerAngles, HarmonicCoefficients, Region, SlepianBasis, SphereGrid, SstError, VERSION,
};

use crate::error::{CliError, Result};
use crate::{
    BasisArgs, BenchArgs, Cli, Command, ForwardArgs, FrameCheckArgs, IngestArgs, InverseArgs,
    LvaCommand, LvaRunArgs,
};

/// Dilation of the variation region used in the LVA summary, degrees.
const DILATION_DEG: f64 = 5.0;

fn absolute(path: &mut PathBuf) -> Result<()> {
    *path = std::path::absolute(&*path)?;
    Ok(())
}

/// Resolves every path argument to an absolute path before execution.
pub fn resolve_paths(command: &mut Command) -> Result<()> {
    match command {
        Command::Basis(a) => absolute(&mut a.out),
        Command::IngestMap(a) => {
            absolute(&mut a.input)?;
            absolute(&mut a.out)
        }
        Command::Forward(a) => {
            absolute(&mut a.signal)?;
            absolute(&mut a.basis)?;
            absolute(&mut a.out)
        }
        Command::Inverse(a) => {
            absolute(&mut a.input)?;
            absolute(&mut a.basis)?;
            absolute(&mut a.out)
        }
        Command::FrameCheck(a) => {
            absolute(&mut a.basis)?;
            a.signal.as_mut().map(absolute).transpose()?;
            a.out.as_mut().map(absolute).transpose()?;
            Ok(())
        }
        Command::Bench(a) => {
            a.out.as_mut().map(absolute).transpose()?;
            Ok(())
        }
        Command::Lva(LvaCommand::Run(a)) => absolute(&mut a.out),
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = serde_json::to_value(cli)?;
    let out = Output {
        cli,
        config: &config,
    };
    match &cli.command {
        Command::Basis(a) => basis(a, &out),
        Command::IngestMap(a) => ingest_map(a, &out),
        Command::Forward(a) => forward(a, &out),
        Command::Inverse(a) => inverse(a, &out),
        Command::FrameCheck(a) => frame_check(a, &out),
        Command::Bench(a) => bench(a, &out),
        Command::Lva(LvaCommand::Run(a)) => lva_run(a, &out),
    }
}

/// Emits files in the requested encoding, embedding the run configuration.
struct Output<'a> {
    cli: &'a Cli,
    config: &'a Value,
}

impl Output<'_> {
    fn csv(&self) -> bool {
        self.cli.format == crate::Format::Csv
    }

    /// CSV files start with one `# {header}` comment line.
    fn write_csv(&self, path: &Path, kind: &str, body: &str) -> Result<()> {
        let header = json!({ "kind": kind, "version": VERSION, "run_config": self.config });
        fs::write(path, format!("# {header}\n{body}"))?;
        Ok(())
    }

    fn harmonic(&self, path: &Path, c: &HarmonicCoefficients) -> Result<()> {
        if self.csv() {
            self.write_csv(path, "harmonic_coefficients", &io::harmonic_csv(c))
        } else {
            Ok(io::write_harmonic(path, c, self.config)?)
        }
    }

    fn so3(&self, path: &Path, s: &SO3Signal) -> Result<()> {
        if self.csv() {
            self.write_csv(path, "so3_signal", &io::so3_signal_csv(s))
        } else {
            Ok(io::write_so3_signal(path, s, self.config)?)
        }
    }

    fn sphere(&self, path: &Path, s: &sst_core::SphereSignal) -> Result<()> {
        if self.csv() {
            self.write_csv(path, "sphere_signal", &io::sphere_signal_csv(s))
        } else {
            Ok(io::write_sphere_signal(path, s, self.config)?)
        }
    }

    fn variance(&self, path: &Path, map: &VarianceMap) -> Result<()> {
        if self.csv() {
            self.write_csv(path, "variance_map", &io::variance_map_csv(map))
        } else {
            Ok(io::write_variance_map(path, map, self.config)?)
        }
    }

    fn basis(&self, path: &Path, b: &SlepianBasis) -> Result<()> {
        if self.csv() {
            self.write_csv(path, "slepian_basis", &basis_csv(b))
        } else {
            Ok(io::write_basis(path, b, self.config)?)
        }
    }

    fn extension(&self, bin: &str) -> String {
        if self.csv() {
            "csv".into()
        } else {
            bin.into()
        }
    }
}

/// CSV rows `alpha,eigenvalue,l,m,re,im`; scales without a stored
/// eigenvector get a single row with empty coefficient fields.
fn basis_csv(b: &SlepianBasis) -> String {
    let mut out = String::from("alpha,eigenvalue,l,m,re,im\n");
    for (i, lambda) in b.eigenvalues().iter().enumerate() {
        match b.columns().get(i) {
            Some(col) => {
                for (idx, c) in col.as_slice().iter().enumerate() {
                    let (l, m) = degree_order(idx);
                    out += &format!("{},{lambda:e},{l},{m},{:e},{:e}\n", i + 1, c.re, c.im);
                }
            }
            None => out += &format!("{},{lambda:e},,,,\n", i + 1),
        }
    }
    out
}

fn parse_triple(text: &str, what: &str) -> Result<[f64; 3]> {
    let v = parse_list(text, what)?;
    v.try_into().map_err(|_| {
        CliError::Usage(format!(
            "{what} needs three comma-separated values, got `{text}`"
        ))
    })
}

fn parse_pair(text: &str, what: &str) -> Result<[f64; 2]> {
    let v = parse_list(text, what)?;
    v.try_into().map_err(|_| {
        CliError::Usage(format!(
            "{what} needs two comma-separated values, got `{text}`"
        ))
    })
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{what}: `{s}` is not a number")))
        })
        .collect()
}

fn ellipse(text: &str, rot: Option<&str>) -> Result<Region> {
    let [tc, a] = parse_pair(text, "--ellipse")?;
    let rotation = match rot {
        Some(r) => {
            let [p, t, o] = parse_triple(r, "rotation")?;
            EulerAngles::from_degrees(p, t, o)?
        }
        None => EulerAngles::IDENTITY,
    };
    Ok(Region::spherical_ellipse(
        tc.to_radians(),
        a.to_radians(),
        rotation,
    )?)
}

/// Parses `cap:Θ` or `ellipse:θc,a[:rot=φ,ϑ,ω]` (degrees).
pub fn parse_region(text: &str) -> Result<Region> {
    let mut parts = text.split(':');
    let kind = parts.next().unwrap_or_default();
    let body = parts
        .next()
        .ok_or_else(|| CliError::Usage(format!("region `{text}` lacks parameters")))?;
    match kind {
        "cap" => {
            let angle: f64 = body
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("cap angle `{body}` is not a number")))?;
            if parts.next().is_some() {
                return Err(CliError::Usage(format!(
                    "unexpected suffix in region `{text}`"
                )));
            }
            Ok(Region::polar_cap(angle.to_radians())?)
        }
        "ellipse" => {
            let rot =
                match parts.next() {
                    Some(r) => Some(r.strip_prefix("rot=").ok_or_else(|| {
                        CliError::Usage(format!("expected `rot=φ,ϑ,ω`, got `{r}`"))
                    })?),
                    None => None,
                };
            if parts.next().is_some() {
                return Err(CliError::Usage(format!(
                    "unexpected suffix in region `{text}`"
                )));
            }
            ellipse(body, rot)
        }
        other => Err(CliError::Usage(format!("unknown region kind `{other}`"))),
    }
}

fn basis(a: &BasisArgs, out: &Output) -> Result<()> {
    let mut b = match (a.cap_deg, &a.ellipse) {
        (Some(deg), _) => {
            let region = Region::polar_cap(deg.to_radians())?;
            if a.full {
                SlepianBasis::build(region, a.bandlimit)?
            } else {
                SlepianBasis::zonal(deg.to_radians(), a.bandlimit)?
            }
        }
        (None, Some(spec)) => SlepianBasis::build(ellipse(spec, a.rot.as_deref())?, a.bandlimit)?,
        (None, None) => {
            return Err(CliError::Usage(
                "either --cap-deg or --ellipse is required".into(),
            ))
        }
    };
    b.truncate(a.store_first.unwrap_or(b.n_well()).max(1));
    out.basis(&a.out, &b)?;
    println!(
        "{}",
        json!({
            "out": a.out, "bandlimit": b.bandlimit(), "shannon": b.shannon(),
            "n_well": b.n_well(), "zonal": b.is_zonal(), "stored_columns": b.columns().len(),
        })
    );
    Ok(())
}

/// Reads a headerless (or `#`-commented) CSV of real values, one θ row per line.
fn read_equiangular_csv(path: &Path) -> Result<(Vec<Complex64>, usize, usize)> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut n_phi = None;
    let mut n_theta = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| SstError::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        match n_phi {
            None => n_phi = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(SstError::Format(format!(
                    "{}:{}: row has {} values, expected {n}",
                    path.display(),
                    lineno + 1,
                    row.len()
                ))
                .into())
            }
            _ => {}
        }
        values.extend(row.into_iter().map(|v| Complex64::new(v, 0.0)));
        n_theta += 1;
    }
    let n_phi =
        n_phi.ok_or_else(|| SstError::Format(format!("{}: no data rows", path.display())))?;
    Ok((values, n_theta, n_phi))
}

fn is_binary(path: &Path) -> Result<bool> {
    let bytes = fs::read(path)?;
    Ok(bytes.first() == Some(&b'{'))
}

fn ingest_map(a: &IngestArgs, out: &Output) -> Result<()> {
    let coeffs = if is_binary(&a.input)? {
        let (signal, _) = io::read_sphere_signal(&a.input)?;
        sht_forward(&signal, a.bandlimit)?
    } else {
        let (values, n_theta, n_phi) = read_equiangular_csv(&a.input)?;
        analyze_equiangular(&values, n_theta, n_phi, a.bandlimit)?
    };
    out.harmonic(&a.out, &coeffs)
}

fn forward(a: &ForwardArgs, out: &Output) -> Result<()> {
    let (f, _) = io::read_harmonic(&a.signal)?;
    let (b, _) = io::read_basis(&a.basis)?;
    if f.bandlimit() != b.bandlimit() {
        return Err(SstError::BandlimitMismatch {
            signal: f.bandlimit(),
            basis: b.bandlimit(),
        }
        .into());
    }
    if a.sphere {
        let grid = SphereGrid::new(f.bandlimit())?;
        return out.sphere(&a.out, &zonal_sst(&f, &b, a.alpha, &grid)?);
    }
    let signal = if a.direct {
        let grid = SO3Grid::new(f.bandlimit())?;
        let n = grid.n();
        let rhos: Vec<EulerAngles> = (0..n * n * n)
            .map(|idx| grid.rotation(idx / (n * n), (idx / n) % n, idx % n))
            .collect();
        SO3Signal::new(grid, a.alpha, sst_points(&f, &b, a.alpha, &rhos)?)?
    } else {
        sst_fast(&f, &b, a.alpha)?
    };
    out.so3(&a.out, &signal)
}

fn inverse(a: &InverseArgs, out: &Output) -> Result<()> {
    let (b, _) = io::read_basis(&a.basis)?;
    let (header, _) = read_raw(&a.input)?;
    let coeffs = match header.get("kind").and_then(Value::as_str) {
        Some("so3_signal") => {
            let (signal, _) = io::read_so3_signal(&a.input)?;
            let alpha = a.alpha.unwrap_or(signal.alpha());
            inverse_sst(&so3_analysis(&signal), &b, alpha, a.epsilon)?
        }
        Some("sphere_signal") => {
            let alpha = a.alpha.ok_or_else(|| {
                CliError::Usage("--alpha is required for sphere-signal input".into())
            })?;
            let (signal, _) = io::read_sphere_signal(&a.input)?;
            let f = sht_forward(&signal, b.bandlimit())?;
            zonal_inverse(&f, &b, alpha, a.epsilon)?
        }
        other => {
            return Err(SstError::Format(format!("cannot invert a file of kind {other:?}")).into());
        }
    };
    out.harmonic(&a.out, &coeffs)
}

fn frame_check(a: &FrameCheckArgs, out: &Output) -> Result<()> {
    let (b, _) = io::read_basis(&a.basis)?;
    let scales = a.scales.unwrap_or(b.n_well());
    let signals: Vec<HarmonicCoefficients> = match (&a.signal, a.seed) {
        (Some(path), _) => vec![io::read_harmonic(path)?.0],
        (None, Some(seed)) => (0..a.samples as u64)
            .map(|i| random_signal(b.bandlimit(), seed.wrapping_add(i)))
            .collect(),
        (None, None) => return Err(CliError::Usage("--signal or --seed is required".into())),
    };
    let reports = signals
        .iter()
        .map(|f| frame_report(f, &b, scales))
        .collect::<sst_core::Result<Vec<_>>>()?;
    let worst = reports
        .iter()
        .map(|r| (r.ratio - 1.0).abs())
        .fold(0.0, f64::max);
    let report = json!({
        "kind": "frame_report", "version": VERSION, "run_config": out.config,
        "bandlimit": b.bandlimit(), "scales": scales, "reports": reports,
        "max_abs_ratio_deviation": worst,
    });
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = &a.out {
        fs::write(path, text + "\n")?;
    }
    Ok(())
}

fn bench(a: &BenchArgs, out: &Output) -> Result<()> {
    if a.lmin < 2 || a.lmin > a.lmax {
        return Err(CliError::Usage(format!(
            "need 2 ≤ lmin ≤ lmax, got lmin = {}, lmax = {}",
            a.lmin, a.lmax
        )));
    }
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let mut ls = vec![a.lmin];
    while let Some(&l) = ls.last().filter(|&&l| 2 * l <= a.lmax) {
        ls.push(2 * l);
    }
    let report = run_bench(&ls, a.reps, out.cli.threads, a.seed)?;
    let csv = bench_csv(&report);
    print!("{csv}");
    if let Some(path) = &a.out {
        out.write_csv(path, "bench_report", &csv)?;
    }
    Ok(())
}

fn lva_run(a: &LvaRunArgs, out: &Output) -> Result<()> {
    let region = parse_region(&a.region)?;
    let config = LvaConfig {
        bandlimit: a.bandlimit,
        n_instances: a.n_instances,
        target_bvr_db: a.bvr_db,
        variation_region: region,
        cap_angle: a.cap_deg.to_radians(),
        alphas: a.alphas.clone(),
        quantile: a.quantile,
        seed: a.seed,
    };
    // Validate cheap parameters before the basis build.
    Region::polar_cap(config.cap_angle)?;
    if !(a.quantile > 0.0 && a.quantile < 1.0) {
        return Err(CliError::Usage(format!(
            "--quantile {} outside (0, 1)",
            a.quantile
        )));
    }
    let outcome = run_lva(&config, None)?;
    fs::create_dir_all(&a.out)?;
    let dir = &a.out;
    let ext = out.extension("shc");
    let e = &outcome.ensemble;
    out.harmonic(&dir.join(format!("background.{ext}")), &e.background)?;
    for (j, (v, f)) in e.variations.iter().zip(&e.observations).enumerate() {
        out.harmonic(&dir.join(format!("variation_{j:03}.{ext}")), v)?;
        out.harmonic(&dir.join(format!("observation_{j:03}.{ext}")), f)?;
    }
    let margin = DILATION_DEG.to_radians();
    let mut scales = Vec::new();
    for (map, mask) in outcome.maps.iter().zip(&outcome.masks) {
        out.variance(
            &dir.join(format!(
                "variance_alpha{}.{}",
                map.alpha,
                out.extension("var")
            )),
            map,
        )?;
        out.write_csv(
            &dir.join(format!("mask_alpha{}.csv", map.alpha)),
            "detection_mask",
            &io::mask_csv(map, mask),
        )?;
        let (t, p) = map.node(map.argmax());
        let selected: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        let inside = selected
            .iter()
            .filter(|&&i| {
                let (t, p) = map.node(i);
                region.dilated_contains(t, p, margin)
            })
            .count();
        scales.push(json!({
            "alpha": map.alpha,
            "argmax": { "theta": t, "phi": p, "inside_region": region.contains(t, p) },
            "mask_nodes": selected.len(),
            "mask_fraction_in_dilated_region": inside as f64 / selected.len().max(1) as f64,
        }));
    }
    let achieved = e
        .variations
        .iter()
        .map(|v| bvr(&e.background, v))
        .collect::<sst_core::Result<Vec<_>>>()?;
    let summary = json!({
        "kind": "lva_summary", "version": VERSION, "run_config": out.config,
        "config": config, "dilation_deg": DILATION_DEG, "bvr_db": achieved, "scales": scales,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(dir.join("summary.json"), text.clone() + "\n")?;
    println!("{text}");
    Ok(())
}
