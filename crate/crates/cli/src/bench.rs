use serde::Serialize;

use fnmat_core::dense::DenseSpectrum;
use fnmat_core::estimators::{exact_entry, walk_estimate, WalkConfig, DEFAULT_EXACT_BUDGET};
use fnmat_core::funcspace::cheb_fit;
use fnmat_core::sparsemat::random_sparse_hermitian;
use fnmat_core::{approxdeg, witness, Exec, PolySpec, QueryCounter, SCHEMA_VERSION};

use crate::commands::{spec_degree, target};
use crate::{BenchArgs, BenchMethod, CliError};

/// CSV header, in column order. Changing it requires a schema version bump.
pub const COLUMNS: [&str; 9] =
    ["schema_version", "family", "method", "parameter", "degree", "dimension", "queries_o1", "queries_o2", "error"];

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub schema_version: u32,
    pub family: String,
    pub method: &'static str,
    pub parameter: f64,
    pub degree: usize,
    pub dimension: usize,
    pub queries_o1: u64,
    pub queries_o2: u64,
    pub error: f64,
}

fn spec_for(family: &str, p: f64) -> Result<String, CliError> {
    match family {
        "sin" | "cos" | "exp" => Ok(format!("{family}:t={p}")),
        "power" | "cheb" => {
            if p < 0.0 || p.fract() != 0.0 {
                return Err(CliError::usage(format!("{family} needs integer degrees, got {p}")));
            }
            Ok(format!("{family}:d={p}"))
        }
        _ => Err(CliError::usage(format!("unknown family {family:?}; use sin, cos, exp, power or cheb"))),
    }
}

pub fn run(args: &BenchArgs, seed: u64, exec: Exec) -> Result<Vec<Row>, CliError> {
    let a = random_sparse_hermitian(args.dim, args.sparsity, seed, false);
    let norm1 = a.norm1();
    if norm1 == 0.0 {
        return Err(CliError::usage("test matrix is zero; raise --dim or --sparsity"));
    }
    let a = a.scaled(1.0 / norm1);
    let dense = DenseSpectrum::new(&a.to_dense());
    let (i, j) = (1, args.dim.min(2));
    let mut rows = Vec::new();
    for &p in &args.sweep {
        let spec = spec_for(&args.family, p)?;
        let f = target(&spec)?;
        let row = |method, degree, dimension, q: fnmat_core::Tally, error| Row {
            schema_version: SCHEMA_VERSION,
            family: args.family.clone(),
            method,
            parameter: p,
            degree,
            dimension,
            queries_o1: q.o1,
            queries_o2: q.o2,
            error,
        };
        let polynomial = || -> Result<(usize, PolySpec), CliError> {
            let d = match spec_degree(&spec) {
                Some(d) => d,
                None => approxdeg::approx_degree(&f, args.eps / 2.0)
                    .map_err(|e| CliError::new("approx", e.to_string()))?
                    .0,
            };
            Ok((d, PolySpec::from_cheb(&cheb_fit(&f, d))))
        };
        match args.method {
            BenchMethod::Witness => {
                let cert = match f.parity() {
                    fnmat_core::Parity::Even => witness::build_even_witness(&f, args.eps),
                    _ => witness::build_odd_witness(&f, args.eps),
                }
                .map_err(|e| CliError::new("witness", e.to_string()))?;
                let err = (cert.achieved_value - cert.claimed_value).abs();
                rows.push(row("witness", cert.degree_d, cert.matrix.n, Default::default(), err));
            }
            BenchMethod::Exact => {
                let (d, poly) = polynomial()?;
                let r = exact_entry(&a, &poly, i, j, &QueryCounter::new(), DEFAULT_EXACT_BUDGET)
                    .map_err(|e| CliError::new("estimate", e.to_string()))?;
                let want = dense.entry(|x| poly.value(x), i - 1, j - 1);
                rows.push(row("exact", d, args.dim, r.queries, (r.value - want).norm()));
            }
            BenchMethod::Walk => {
                let (d, poly) = polynomial()?;
                let mut cfg = WalkConfig::new(args.eps, args.fail_prob, seed);
                cfg.exec = exec;
                cfg.norm1 = Some(1.0);
                let r = walk_estimate(&a, &poly, i, j, &cfg, &QueryCounter::new())
                    .map_err(|e| CliError::new("estimate", e.to_string()))?;
                let want = dense.entry(|x| poly.value(x), i - 1, j - 1);
                rows.push(row("walk", d, args.dim, r.queries, (r.value - want).norm()));
            }
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = COLUMNS.join(",") + "\n";
    for r in rows {
        let cells = [
            r.schema_version.to_string(),
            r.family.clone(),
            r.method.to_string(),
            r.parameter.to_string(),
            r.degree.to_string(),
            r.dimension.to_string(),
            r.queries_o1.to_string(),
            r.queries_o2.to_string(),
            format!("{:e}", r.error),
        ];
        out += &cells.join(",");
        out.push('\n');
    }
    out
}
