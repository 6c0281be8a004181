//! `hardy` — CLI over the Hardy-space toolkit.

use clap::{Args, Parser, Subcommand};
use hardy_core::decomposition::{atomic_decompose, validate_atom};
use hardy_core::io::{dump_decomposition, fmt_f64, write_field_csv, write_table_csv};
use hardy_core::maximal::{
    area_function, grand_maximal, nt_maximal, radial_maximal, script_m, ConeParams, Dictionary,
    ScaleGrid,
};
use hardy_core::{CalderonBundle, OperatorKind, Symbol};
use hardy_harness::equivalence::build_scalar_operator;
use hardy_harness::{generate_corpus, run_equivalence, run_kernel_reports, ExperimentConfig};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "hardy",
    about = "Heat-semigroup Hardy spaces on finite grids: maximal functions, kernel checks, atomic decomposition",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// flat key = value config file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (overrides the config's out_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// corpus seed override
    #[arg(long)]
    seed: Option<u64>,
    /// points per side override
    #[arg(long)]
    grid: Option<usize>,
    /// dimension override (1, 2 or 3)
    #[arg(long)]
    dim: Option<usize>,
    /// comma-separated p values override
    #[arg(long)]
    p: Option<String>,
    /// operator kind override: laplacian | schrodinger | magnetic
    #[arg(long)]
    operator: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// kernel-estimate checker reports (6 CSV files)
    KernelReport(Common),
    /// maximal functions per corpus entry (f*, f⁺, Φ*, grand, 𝓜)
    Maximal(Common),
    /// area (square) function per corpus entry
    Square(Common),
    /// atomic decomposition dumps per corpus entry and p
    Decompose(Common),
    /// atom validation table per corpus entry and p
    ValidateAtoms(Common),
    /// the full norm-equivalence experiment
    Equivalence(Common),
    /// write the corpus fields as CSV
    Corpus(Common),
}

fn apply_overrides(mut cfg: ExperimentConfig, c: &Common) -> Result<ExperimentConfig, String> {
    if let Some(out) = &c.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = c.seed {
        cfg.corpus_seed = seed;
    }
    if let Some(grid) = c.grid {
        cfg.grid_n = grid;
    }
    if let Some(dim) = c.dim {
        cfg.dim = dim;
    }
    if let Some(p) = &c.p {
        cfg.p_list = p
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad --p: {e}")))
            .collect::<Result<_, _>>()?;
    }
    if let Some(op) = &c.operator {
        cfg.operator = match op.as_str() {
            "laplacian" => OperatorKind::Laplacian,
            "schrodinger" => OperatorKind::Schrodinger,
            "magnetic" => OperatorKind::MagneticSchrodinger,
            other => return Err(format!("bad --operator: {other}")),
        };
    }
    Ok(cfg)
}

fn load_config(c: &Common) -> Result<ExperimentConfig, String> {
    let cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(cfg, c)
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::KernelReport(c) => {
            let cfg = load_config(&c)?;
            let paths = run_kernel_reports(&cfg).map_err(|e| e.to_string())?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Equivalence(c) => {
            let cfg = load_config(&c)?;
            let rep = run_equivalence(&cfg).map_err(|e| e.to_string())?;
            println!("wrote {}", rep.csv_path.display());
            println!("wrote {}", rep.json_path.display());
            for s in &rep.summary {
                println!(
                    "p={} {}: [{:.4}, {:.4}] spread {:.2}",
                    s.p,
                    s.name,
                    s.min,
                    s.max,
                    s.max / s.min
                );
            }
            if rep.hard_failures.is_empty() {
                Ok(0)
            } else {
                for fail in &rep.hard_failures {
                    eprintln!("hard invariant failure: {fail}");
                }
                Ok(2)
            }
        }
        Command::Corpus(c) => {
            let cfg = load_config(&c)?;
            let grid = cfg.grid().map_err(|e| e.to_string())?;
            let out = ensure_out(&cfg)?;
            let corpus = generate_corpus(&cfg, grid).map_err(|e| e.to_string())?;
            for (name, f) in &corpus {
                let p = out.join(format!("corpus_{name}.csv"));
                write_field_csv(&p, f).map_err(|e| e.to_string())?;
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Square(c) => {
            let cfg = load_config(&c)?;
            let (op, scales, corpus, out) = scalar_setup(&cfg)?;
            for (name, f) in &corpus {
                let s = area_function(&op, f, &scales).map_err(|e| e.to_string())?;
                let p = out.join(format!("square_{name}.csv"));
                write_field_csv(&p, &s).map_err(|e| e.to_string())?;
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Maximal(c) => {
            let cfg = load_config(&c)?;
            let (op, scales, corpus, out) = scalar_setup(&cfg)?;
            let p0 = cfg.p_list.first().copied().unwrap_or(1.0);
            let m0 = cfg.m_for(p0);
            let xi_max = scales.t_max() * op.max_eigenvalue().sqrt() + 8.0;
            let bundle = CalderonBundle::new(m0, xi_max).map_err(|e| e.to_string())?;
            let cone = ConeParams::defaults(cfg.dim, p0);
            let dict = Dictionary::normalized(
                vec![Symbol::gaussian(), bundle.phi().clone(), Symbol::rational_decay()],
                cone.grand_n,
            )
            .map_err(|e| e.to_string())?;
            for (name, f) in &corpus {
                let outputs: Vec<(&str, hardy_core::Field)> = vec![
                    (
                        "heat_nt",
                        nt_maximal(&op, &Symbol::gaussian(), f, &scales, 1.0)
                            .map_err(|e| e.to_string())?,
                    ),
                    ("radial", radial_maximal(&op, f, &scales).map_err(|e| e.to_string())?),
                    (
                        "phi_nt",
                        nt_maximal(&op, bundle.phi(), f, &scales, 1.0)
                            .map_err(|e| e.to_string())?,
                    ),
                    ("grand", grand_maximal(&op, &dict, f, &scales).map_err(|e| e.to_string())?),
                    ("script_m", script_m(&op, &bundle, f, &scales).map_err(|e| e.to_string())?),
                ];
                for (kind, field) in outputs {
                    let p = out.join(format!("maximal_{kind}_{name}.csv"));
                    write_field_csv(&p, &field).map_err(|e| e.to_string())?;
                    println!("wrote {}", p.display());
                }
            }
            Ok(0)
        }
        Command::Decompose(c) => {
            let cfg = load_config(&c)?;
            let (op, scales, corpus, out) = scalar_setup(&cfg)?;
            let xi_max = scales.t_max() * op.max_eigenvalue().sqrt() + 8.0;
            for &p in &cfg.p_list {
                let m = cfg.m_for(p);
                let bundle = CalderonBundle::new(m, xi_max).map_err(|e| e.to_string())?;
                for (name, f) in &corpus {
                    let dec = atomic_decompose(&op, &bundle, f, p, m, &scales)
                        .map_err(|e| e.to_string())?;
                    let vals: Vec<_> = dec
                        .terms
                        .iter()
                        .map(|t| validate_atom(&op, t, cfg.support_tol))
                        .collect::<hardy_core::Result<_>>()
                        .map_err(|e| e.to_string())?;
                    let dir = out.join(format!("decomposition_{name}_p{p}"));
                    dump_decomposition(&dir, &dec, &vals).map_err(|e| e.to_string())?;
                    println!(
                        "wrote {} ({} atoms, residual {:.3e})",
                        dir.display(),
                        dec.terms.len(),
                        dec.residual.l2_norm() / f.l2_norm()
                    );
                }
            }
            Ok(0)
        }
        Command::ValidateAtoms(c) => {
            let cfg = load_config(&c)?;
            let (op, scales, corpus, out) = scalar_setup(&cfg)?;
            let xi_max = scales.t_max() * op.max_eigenvalue().sqrt() + 8.0;
            let mut rows = Vec::new();
            let mut worst_support = 0.0f64;
            for &p in &cfg.p_list {
                let m = cfg.m_for(p);
                let bundle = CalderonBundle::new(m, xi_max).map_err(|e| e.to_string())?;
                for (name, f) in &corpus {
                    let dec = atomic_decompose(&op, &bundle, f, p, m, &scales)
                        .map_err(|e| e.to_string())?;
                    for (idx, term) in dec.terms.iter().enumerate() {
                        let v = validate_atom(&op, term, cfg.support_tol)
                            .map_err(|e| e.to_string())?;
                        worst_support = worst_support.max(v.max_support_mass);
                        rows.push(vec![
                            name.clone(),
                            p.to_string(),
                            idx.to_string(),
                            term.level.to_string(),
                            fmt_f64(term.lambda),
                            fmt_f64(v.size_ratio_qinf),
                            fmt_f64(v.size_ratio_q2),
                            fmt_f64(v.max_support_mass),
                            fmt_f64(v.lm_identity_rel_err),
                            (v.support_ok as usize).to_string(),
                        ]);
                    }
                }
            }
            let path = out.join("atom_validation.csv");
            write_table_csv(
                &path,
                "function,p,term,level,lambda,size_qinf,size_q2,support_mass,lm_err,support_ok",
                &rows,
            )
            .map_err(|e| e.to_string())?;
            println!("wrote {} (worst support mass {:.3e})", path.display(), worst_support);
            Ok(if worst_support <= cfg.support_tol { 0 } else { 2 })
        }
    }
}

fn ensure_out(cfg: &ExperimentConfig) -> Result<PathBuf, String> {
    let out = Path::new(&cfg.out_dir).to_path_buf();
    std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
    Ok(out)
}

type ScalarSetup = (
    hardy_core::SpectralOperator,
    ScaleGrid,
    Vec<(String, hardy_core::Field)>,
    PathBuf,
);

fn scalar_setup(cfg: &ExperimentConfig) -> Result<ScalarSetup, String> {
    let grid = cfg.grid().map_err(|e| e.to_string())?;
    let op = build_scalar_operator(cfg).map_err(|e| e.to_string())?;
    let scales = ScaleGrid::for_reconstruction(&op);
    let corpus = generate_corpus(cfg, grid).map_err(|e| e.to_string())?;
    let out = ensure_out(cfg)?;
    Ok((op, scales, corpus, out))
}
