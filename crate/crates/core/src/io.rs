//! File formats: CSV tables with header rows, raw little-endian f64 arrays
//! with text sidecars, and the decomposition dump/reload pair. All float
//! formatting uses 17 significant digits so values round-trip bit-exactly.

use crate::decomposition::{AtomValidation, Decomposition};
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::multiplier::DecayReport;
use crate::operator::{GaussianFitReport, KernelMatrix, SpectralOperator};
use crate::symbols::Symbol;
use ndarray::Array1;
use std::io::{BufRead, Write};
use std::path::Path;

/// Full-precision float formatting (17 significant digits round-trips f64).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    let mut out = String::from("index,value\n");
    for (i, v) in f.values().iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt_f64(*v)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_eigenvalues_csv(path: &Path, op: &SpectralOperator) -> Result<()> {
    let mut out = String::new();
    for v in op.eigenvalues() {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Raw little-endian f64 array, row-major, with a text sidecar describing
/// the dimensions and the measure convention.
pub fn write_kernel_raw(path_base: &Path, kernel: &KernelMatrix) -> Result<()> {
    let raw_path = path_base.with_extension("f64");
    let mut bytes = Vec::with_capacity(kernel.entries().len() * 8);
    for v in kernel.entries() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(&raw_path, bytes)?;
    let sidecar = format!(
        "rows = {}\ncols = {}\nlayout = row-major little-endian f64\nconvention = (Ff)(x) = sum_y K(x,y) f(y) h^n\n",
        kernel.entries().nrows(),
        kernel.entries().ncols()
    );
    std::fs::write(path_base.with_extension("txt"), sidecar)?;
    Ok(())
}

pub fn write_symbol_table_csv(path: &Path, sym: &Symbol, xs: &[f64]) -> Result<()> {
    let mut out = String::from("x,value\n");
    for &x in xs {
        out.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(sym.eval(x))));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_decay_report_csv(path: &Path, rep: &DecayReport) -> Result<()> {
    let mut out = String::from("s,t,value\n");
    for row in &rep.rows {
        out.push_str(&format!("{},{},{}\n", fmt_f64(row.s), fmt_f64(row.t), fmt_f64(row.value)));
    }
    out.push_str(&format!("# label = {}\n# measured_constant = {}\n", rep.label, fmt_f64(rep.measured_constant)));
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_gaussian_report_csv(path: &Path, rep: &GaussianFitReport) -> Result<()> {
    let mut out = String::from("t,c_constant,c_rate\n");
    for row in &rep.rows {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(row.t),
            fmt_f64(row.c_constant),
            fmt_f64(row.c_rate)
        ));
    }
    out.push_str(&format!(
        "# fitted_C = {}\n# fitted_c = {}\n# stability_ratio = {}\n# min_kernel_entry = {}\n",
        fmt_f64(rep.fitted_c_constant),
        fmt_f64(rep.fitted_c_rate),
        fmt_f64(rep.max_violation_ratio),
        fmt_f64(rep.min_kernel_entry)
    ));
    std::fs::write(path, out)?;
    Ok(())
}

fn write_f64_array(path: &Path, values: &Array1<f64>) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn read_f64_array(path: &Path) -> Result<Array1<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Invariant(format!("raw array {path:?} has ragged length")));
    }
    Ok(Array1::from_iter(
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("length 8"))),
    ))
}

/// Dump a decomposition: a manifest CSV (term metadata plus validation
/// numbers) and per-atom raw arrays with sidecars.
pub fn dump_decomposition(
    dir: &Path,
    dec: &Decomposition,
    validations: &[AtomValidation],
) -> Result<()> {
    assert_eq!(dec.terms.len(), validations.len());
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::from(
        "term,level,cube_index,lambda,corner0,corner1,corner2,side_cells,size_ratio_qinf,size_ratio_q2,support_mass,lm_identity_rel_err\n",
    );
    for (idx, (term, val)) in dec.terms.iter().zip(validations).enumerate() {
        let c = term.whitney.cube.corner();
        manifest.push_str(&format!(
            "{idx},{},{},{},{},{},{},{},{},{},{},{}\n",
            term.level,
            term.cube_index,
            fmt_f64(term.lambda),
            c[0],
            c[1],
            c[2],
            term.whitney.cube.side_cells(),
            fmt_f64(val.size_ratio_qinf),
            fmt_f64(val.size_ratio_q2),
            fmt_f64(val.max_support_mass),
            fmt_f64(val.lm_identity_rel_err),
        ));
        write_f64_array(&dir.join(format!("atom_{idx:05}_a.f64")), term.a.values())?;
        write_f64_array(&dir.join(format!("atom_{idx:05}_b.f64")), term.b.values())?;
        let sidecar = format!(
            "len = {}\nlayout = little-endian f64\nfields = a (L^M b) and b\nlambda = {}\np = {}\nM = {}\n",
            term.a.len(),
            fmt_f64(term.lambda),
            fmt_f64(term.p),
            term.m_order
        );
        std::fs::write(dir.join(format!("atom_{idx:05}.txt")), sidecar)?;
    }
    std::fs::write(dir.join("manifest.csv"), manifest)?;
    write_f64_array(&dir.join("residual.f64"), dec.residual.values())?;
    Ok(())
}

/// Reload the (λ, a) pairs of a dump; summing λ·a in manifest order
/// reproduces the dumped reconstruction bit-exactly.
pub fn load_decomposition_terms(dir: &Path) -> Result<Vec<(f64, Array1<f64>)>> {
    let file = std::fs::File::open(dir.join("manifest.csv"))?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.starts_with('#') || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let idx: usize = cols[0]
            .parse()
            .map_err(|e| Error::Invariant(format!("manifest term index: {e}")))?;
        let lambda: f64 = cols[3]
            .parse()
            .map_err(|e| Error::Invariant(format!("manifest lambda: {e}")))?;
        let a = read_f64_array(&dir.join(format!("atom_{idx:05}_a.f64")))?;
        out.push((lambda, a));
    }
    Ok(out)
}

/// Write rows of (name, values...) as CSV with a fixed header; the harness
/// builds its reports through this single entry point.
pub fn write_table_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for row in rows {
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}
