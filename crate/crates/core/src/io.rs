//! File formats: one line of JSON header, a newline, then raw little-endian
//! float64 data. Complex arrays are interleaved (re, im). Every header
//! carries the library version and the run configuration that produced it.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Result, SstError};
use crate::lva::VarianceMap;
use crate::region::Region;
use crate::slepian::SlepianBasis;
use crate::sphere::{degree_order, HarmonicCoefficients, SphereGrid, SphereSignal};
use crate::sst::{SO3Grid, SO3Signal};
use crate::wigner::WignerDeltaTable;
use crate::VERSION;

pub const COMPLEX_DTYPE: &str = "c64le-interleaved";
pub const REAL_DTYPE: &str = "f64le";

/// Header fields shared by every file.
fn header(kind: &str, run_config: &Value, fields: Value) -> Value {
    let mut h = json!({ "kind": kind, "version": VERSION, "run_config": run_config });
    if let (Some(h), Value::Object(extra)) = (h.as_object_mut(), fields) {
        h.extend(extra);
    }
    h
}

fn real_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn complex_bytes(values: &[Complex64]) -> Vec<u8> {
    values
        .iter()
        .flat_map(|c| c.re.to_le_bytes().into_iter().chain(c.im.to_le_bytes()))
        .collect()
}

fn write_raw(path: &Path, header: &Value, payload: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer(&mut file, header)?;
    file.write_all(b"\n")?;
    file.write_all(payload)?;
    Ok(())
}

/// Reads a header and its raw payload.
pub fn read_raw(path: &Path) -> Result<(Value, Vec<u8>)> {
    let bytes = fs::read(path)?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| SstError::Format(format!("{}: missing header line", path.display())))?;
    let header: Value = serde_json::from_slice(&bytes[..split])?;
    Ok((header, bytes[split + 1..].to_vec()))
}

fn decode_reals(payload: &[u8]) -> Result<Vec<f64>> {
    if !payload.len().is_multiple_of(8) {
        return Err(SstError::Format(format!(
            "payload of {} bytes is not a float64 array",
            payload.len()
        )));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn decode_complex(payload: &[u8]) -> Result<Vec<Complex64>> {
    let reals = decode_reals(payload)?;
    if reals.len() % 2 != 0 {
        return Err(SstError::Format(
            "odd number of floats in a complex array".into(),
        ));
    }
    Ok(reals
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect())
}

fn expect_kind(header: &Value, kind: &str) -> Result<()> {
    match header.get("kind").and_then(Value::as_str) {
        Some(k) if k == kind => Ok(()),
        other => Err(SstError::Format(format!(
            "expected a {kind} file, found {other:?}"
        ))),
    }
}

fn field_usize(header: &Value, key: &str) -> Result<usize> {
    header
        .get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| SstError::Format(format!("header lacks integer field `{key}`")))
}

fn field_f64(header: &Value, key: &str) -> Result<f64> {
    header
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| SstError::Format(format!("header lacks numeric field `{key}`")))
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(SstError::Format(format!(
            "{what}: expected {want} values, found {got}"
        )));
    }
    Ok(())
}

// ----- harmonic coefficients -------------------------------------------------

pub fn write_harmonic(path: &Path, c: &HarmonicCoefficients, run_config: &Value) -> Result<()> {
    let h = header(
        "harmonic_coefficients",
        run_config,
        json!({ "bandlimit": c.bandlimit(), "dtype": COMPLEX_DTYPE, "order": "degree-major" }),
    );
    write_raw(path, &h, &complex_bytes(c.as_slice()))
}

pub fn read_harmonic(path: &Path) -> Result<(HarmonicCoefficients, Value)> {
    let (h, payload) = read_raw(path)?;
    expect_kind(&h, "harmonic_coefficients")?;
    let l = field_usize(&h, "bandlimit")?;
    let data = decode_complex(&payload)?;
    check_len(data.len(), l * l, "harmonic coefficients")?;
    Ok((HarmonicCoefficients::from_vec(l, data)?, h))
}

/// CSV rows `l,m,re,im`.
pub fn harmonic_csv(c: &HarmonicCoefficients) -> String {
    let mut out = String::from("l,m,re,im\n");
    for (i, v) in c.as_slice().iter().enumerate() {
        let (l, m) = degree_order(i);
        out += &format!("{l},{m},{:e},{:e}\n", v.re, v.im);
    }
    out
}

// ----- sphere signals --------------------------------------------------------

pub fn write_sphere_signal(path: &Path, s: &SphereSignal, run_config: &Value) -> Result<()> {
    let g = s.grid();
    let h = header(
        "sphere_signal",
        run_config,
        json!({
            "bandlimit": g.bandlimit(), "n_theta": g.n_theta(), "n_phi": g.n_phi(),
            "dtype": COMPLEX_DTYPE, "order": "theta-major",
        }),
    );
    write_raw(path, &h, &complex_bytes(s.values()))
}

pub fn read_sphere_signal(path: &Path) -> Result<(SphereSignal, Value)> {
    let (h, payload) = read_raw(path)?;
    expect_kind(&h, "sphere_signal")?;
    let grid = SphereGrid::new(field_usize(&h, "bandlimit")?)?;
    let values = decode_complex(&payload)?;
    check_len(values.len(), grid.len(), "sphere signal")?;
    Ok((SphereSignal::new(grid, values)?, h))
}

/// CSV rows `theta,phi,re,im` (radians).
pub fn sphere_signal_csv(s: &SphereSignal) -> String {
    let g = s.grid();
    let mut out = String::from("theta,phi,re,im\n");
    for (j, t) in g.theta_nodes().iter().enumerate() {
        for (k, p) in g.phi_nodes().iter().enumerate() {
            let v = s.value(j, k);
            out += &format!("{t:e},{p:e},{:e},{:e}\n", v.re, v.im);
        }
    }
    out
}

// ----- variance maps ---------------------------------------------------------

pub fn write_variance_map(path: &Path, map: &VarianceMap, run_config: &Value) -> Result<()> {
    let g = &map.grid;
    let h = header(
        "variance_map",
        run_config,
        json!({
            "alpha": map.alpha, "bandlimit": g.bandlimit(), "n_theta": g.n_theta(),
            "n_phi": g.n_phi(), "dtype": REAL_DTYPE, "order": "theta-major",
        }),
    );
    write_raw(path, &h, &real_bytes(&map.values))
}

pub fn read_variance_map(path: &Path) -> Result<(VarianceMap, Value)> {
    let (h, payload) = read_raw(path)?;
    expect_kind(&h, "variance_map")?;
    let grid = SphereGrid::new(field_usize(&h, "bandlimit")?)?;
    let values = decode_reals(&payload)?;
    check_len(values.len(), grid.len(), "variance map")?;
    let alpha = field_usize(&h, "alpha")?;
    Ok((
        VarianceMap {
            alpha,
            grid,
            values,
        },
        h,
    ))
}

/// CSV rows `theta,phi,value`.
pub fn variance_map_csv(map: &VarianceMap) -> String {
    let mut out = String::from("theta,phi,value\n");
    for (i, v) in map.values.iter().enumerate() {
        let (t, p) = map.node(i);
        out += &format!("{t:e},{p:e},{v:e}\n");
    }
    out
}

/// CSV rows `index,theta,phi` of the masked nodes.
pub fn mask_csv(map: &VarianceMap, mask: &[bool]) -> String {
    let mut out = String::from("index,theta,phi\n");
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (t, p) = map.node(i);
        out += &format!("{i},{t:e},{p:e}\n");
    }
    out
}

// ----- Slepian bases ---------------------------------------------------------

/// Basis file: header, then the eigenvalues (float64) followed by the stored
/// eigenvectors (complex, column after column).
pub fn write_basis(path: &Path, b: &SlepianBasis, run_config: &Value) -> Result<()> {
    let h = header(
        "slepian_basis",
        run_config,
        json!({
            "L": b.bandlimit(), "region": b.region(), "shannon": b.shannon(),
            "n_well": b.n_well(), "zonal": b.is_zonal(),
            "n_eigenvalues": b.eigenvalues().len(), "n_columns": b.columns().len(),
            "dtype": COMPLEX_DTYPE,
        }),
    );
    let mut payload = real_bytes(b.eigenvalues());
    for c in b.columns() {
        payload.extend(complex_bytes(c.as_slice()));
    }
    write_raw(path, &h, &payload)
}

pub fn read_basis(path: &Path) -> Result<(SlepianBasis, Value)> {
    let (h, payload) = read_raw(path)?;
    expect_kind(&h, "slepian_basis")?;
    let l = field_usize(&h, "L")?;
    let n_eig = field_usize(&h, "n_eigenvalues")?;
    let n_col = field_usize(&h, "n_columns")?;
    let region: Region = serde_json::from_value(h.get("region").cloned().unwrap_or(Value::Null))?;
    let zonal = h.get("zonal").and_then(Value::as_bool).unwrap_or(false);
    let shannon = field_f64(&h, "shannon")?;
    check_len(
        payload.len(),
        8 * n_eig + 16 * n_col * l * l,
        "basis payload bytes",
    )?;
    let eigenvalues = decode_reals(&payload[..8 * n_eig])?;
    let data = decode_complex(&payload[8 * n_eig..])?;
    let columns = data
        .chunks_exact(l * l)
        .map(|c| HarmonicCoefficients::from_vec(l, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        SlepianBasis::from_parts(region, l, eigenvalues, columns, shannon, zonal)?,
        h,
    ))
}

// ----- SO(3) signals ---------------------------------------------------------

pub fn write_so3_signal(path: &Path, s: &SO3Signal, run_config: &Value) -> Result<()> {
    let h = header(
        "so3_signal",
        run_config,
        json!({
            "L": s.grid().bandlimit(), "alpha": s.alpha(), "axes": "varphi,vartheta,omega",
            "n": s.grid().n(), "dtype": COMPLEX_DTYPE,
        }),
    );
    write_raw(path, &h, &complex_bytes(s.values()))
}

pub fn read_so3_signal(path: &Path) -> Result<(SO3Signal, Value)> {
    let (h, payload) = read_raw(path)?;
    expect_kind(&h, "so3_signal")?;
    let grid = SO3Grid::new(field_usize(&h, "L")?)?;
    let values = decode_complex(&payload)?;
    let n = grid.n();
    check_len(values.len(), n * n * n, "SO(3) signal")?;
    Ok((SO3Signal::new(grid, field_usize(&h, "alpha")?, values)?, h))
}

/// CSV rows `varphi,vartheta,omega,re,im`.
pub fn so3_signal_csv(s: &SO3Signal) -> String {
    let g = s.grid();
    let n = g.n();
    let mut out = String::from("varphi,vartheta,omega,re,im\n");
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = s.value(i, j, k);
                out += &format!(
                    "{:e},{:e},{:e},{:e},{:e}\n",
                    g.node(i),
                    g.node(j),
                    g.node(k),
                    v.re,
                    v.im
                );
            }
        }
    }
    out
}

// ----- Wigner Δ cache --------------------------------------------------------

pub fn write_delta_table(path: &Path, t: &WignerDeltaTable, run_config: &Value) -> Result<()> {
    let h = header(
        "wigner_delta_table",
        run_config,
        json!({ "L": t.bandlimit(), "dtype": REAL_DTYPE, "layout": "ell-major triangular" }),
    );
    write_raw(path, &h, &real_bytes(t.as_slice()))
}

pub fn read_delta_table(path: &Path) -> Result<WignerDeltaTable> {
    let (h, payload) = read_raw(path)?;
    expect_kind(&h, "wigner_delta_table")?;
    WignerDeltaTable::from_raw(field_usize(&h, "L")?, decode_reals(&payload)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(l: usize) -> HarmonicCoefficients {
        let v = (0..l * l)
            .map(|i| Complex64::new(i as f64 * 0.25, -(i as f64).sqrt()))
            .collect();
        HarmonicCoefficients::from_vec(l, v).unwrap()
    }

    #[test]
    fn round_trips_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = json!({ "command": "test", "seed": 3 });

        let c = coeffs(5);
        let p = dir.path().join("c.shc");
        write_harmonic(&p, &c, &cfg).unwrap();
        let (back, h) = read_harmonic(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(h["run_config"], cfg);
        assert_eq!(h["version"], VERSION);

        let s = crate::sphere::sht_inverse(&c, &SphereGrid::new(5).unwrap());
        let p = dir.path().join("s.sph");
        write_sphere_signal(&p, &s, &cfg).unwrap();
        assert_eq!(read_sphere_signal(&p).unwrap().0, s);

        let b = SlepianBasis::build_truncated(Region::polar_cap(0.4).unwrap(), 5, Some(3)).unwrap();
        let p = dir.path().join("b.slp");
        write_basis(&p, &b, &cfg).unwrap();
        assert_eq!(read_basis(&p).unwrap().0, b);

        let so3 = crate::sst::sst_fast(&c, &b, 2).unwrap();
        let p = dir.path().join("f.so3");
        write_so3_signal(&p, &so3, &cfg).unwrap();
        let (back, h) = read_so3_signal(&p).unwrap();
        assert_eq!(back, so3);
        assert_eq!(h["axes"], "varphi,vartheta,omega");
        assert_eq!(h["n"], 9);

        let t = WignerDeltaTable::build(6);
        let p = dir.path().join("d.wig");
        write_delta_table(&p, &t, &cfg).unwrap();
        assert_eq!(read_delta_table(&p).unwrap(), t);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, b"no newline").unwrap();
        assert!(matches!(read_harmonic(&p), Err(SstError::Format(_))));
        write_harmonic(&p, &coeffs(3), &Value::Null).unwrap();
        assert!(matches!(read_basis(&p), Err(SstError::Format(_))));
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_harmonic(&p), Err(SstError::Format(_))));
        assert!(matches!(
            read_harmonic(&dir.path().join("missing")),
            Err(SstError::Io(_))
        ));
    }

    #[test]
    fn csv_exports_have_headers() {
        let c = coeffs(2);
        let csv = harmonic_csv(&c);
        assert!(csv.starts_with("l,m,re,im\n"));
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.lines().nth(2).unwrap().starts_with("1,-1,"));
    }
}
