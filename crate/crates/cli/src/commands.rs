use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use fnmat_core::estimators::{
    self, contour_estimate, exact_entry, walk_estimate, ContourConfig, EstimateReport, WalkConfig,
};
use fnmat_core::funcspace::cheb_fit;
use fnmat_core::hardness::{self, Bundle, ParityVariant};
use fnmat_core::witness::{self, WitnessCertificate};
use fnmat_core::{
    approxdeg, dense::DenseSpectrum, Exec, Parity, PolySpec, QueryCounter, SparseHermitian, SparseOracle,
    TargetFunction, TridiagMatrix, SCHEMA_VERSION,
};

use crate::{
    bench, Cli, CliError, Command, EstimateArgs, FamilyKind, Format, HardnessCmd, MethodArg, Output, VariantArg,
    WitnessCmd,
};

pub fn dispatch(cli: &Cli) -> Result<Output, CliError> {
    let start = Instant::now();
    let exec = if cli.common.threads == Some(1) { Exec::Sequential } else { Exec::Parallel };
    let seed = cli.common.seed;
    let csv_ok = matches!(cli.command, Command::Estimate(_) | Command::Bench(_));
    if cli.common.format == Format::Csv && !csv_ok {
        return Err(CliError::usage("csv output is available for estimate and bench only"));
    }
    let (name, out) = match &cli.command {
        Command::ApproxDegree { function, eps, parity } => {
            ("approx-degree", approx_degree(function, *eps, (*parity).into())?)
        }
        Command::Witness(cmd) => ("witness", witness_cmd(cmd)?),
        Command::Estimate(args) => {
            let report = estimate(args, seed, exec)?;
            if cli.common.format == Format::Csv {
                return Ok(Output::Csv(estimate_csv(&report)));
            }
            ("estimate", report.into())
        }
        Command::Hardness(cmd) => ("hardness", hardness_cmd(cmd, seed)?),
        Command::Bench(args) => {
            let rows = bench::run(args, seed, exec)?;
            if cli.common.format == Format::Csv {
                return Ok(Output::Csv(bench::to_csv(&rows)));
            }
            ("bench", json!({ "columns": bench::COLUMNS, "rows": rows }).into())
        }
    };
    let wall = start.elapsed().as_secs_f64();
    Ok(match out {
        Outcome::Ok(body) => Output::Json(document(name, body, wall)),
        Outcome::Rejected(body, err) => Output::Rejected(document(name, body, wall), err),
    })
}

/// Command result before the envelope is added.
pub enum Outcome {
    Ok(Value),
    Rejected(Value, CliError),
}

impl From<Value> for Outcome {
    fn from(v: Value) -> Self {
        Outcome::Ok(v)
    }
}

fn document(command: &str, body: Value, wall: f64) -> Value {
    let mut doc = json!({ "schema_version": SCHEMA_VERSION, "command": command, "wall_time_s": wall });
    if let (Some(d), Value::Object(b)) = (doc.as_object_mut(), body) {
        d.extend(b);
    }
    doc
}

pub fn target(spec: &str) -> Result<TargetFunction, CliError> {
    TargetFunction::from_spec(spec).map_err(|e| CliError::new("function", e.to_string()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("cannot read {}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))
}

fn approx_degree(spec: &str, eps: f64, parity: Parity) -> Result<Outcome, CliError> {
    let f = target(spec)?;
    let (d, ba) = approxdeg::approx_degree_parity(&f, eps, parity)
        .map_err(|e| CliError::new("approx", e.to_string()))?;
    Ok(json!({
        "function": spec,
        "eps": eps,
        "parity": parity,
        "d": d,
        "val": ba.error,
        "refs": ba.refs,
        "coeffs": ba.poly.coeffs(),
        "iterations": ba.iterations,
    })
    .into())
}

fn witness_cmd(cmd: &WitnessCmd) -> Result<Outcome, CliError> {
    let err = |e: witness::WitnessError| CliError::new("witness", e.to_string());
    match cmd {
        WitnessCmd::Build { function, eps, parity } => {
            let f = target(function)?;
            let cert = match Parity::from(*parity) {
                Parity::Odd => witness::build_odd_witness(&f, *eps),
                Parity::Even => witness::build_even_witness(&f, *eps),
                Parity::None => return Err(CliError::usage("witness parity must be odd or even")),
            }
            .map_err(err)?;
            Ok(json!({ "certificate": cert }).into())
        }
        WitnessCmd::Verify { certificate, function } => {
            let doc: Value = parse(certificate)?;
            // accept both the `witness build` document and a bare certificate
            let raw = doc.get("certificate").cloned().unwrap_or(doc);
            let cert: WitnessCertificate = serde_json::from_value(raw)
                .map_err(|e| CliError::new("parse", format!("{}: {e}", certificate.display())))?;
            let f = target(function.as_deref().unwrap_or(&cert.function))?;
            let v = witness::verify(&cert, &f).map_err(err)?;
            let body = json!({ "verification": v });
            if v.ok {
                Ok(body.into())
            } else {
                Ok(Outcome::Rejected(body, CliError::new("verification_failed", v.reasons.join("; "))))
            }
        }
        WitnessCmd::Certify { matrix, nff, function, eps, parity } => {
            let a = match (matrix, nff) {
                (Some(path), _) => {
                    let t: TridiagMatrix = parse(path)?;
                    let rebuilt = TridiagMatrix::new(t.diag.clone(), t.offdiag.clone())
                        .map_err(|e| CliError::new("parse", e.to_string()))?;
                    if rebuilt.n != t.n {
                        return Err(CliError::new("parse", format!("n = {} disagrees with the diagonal", t.n)));
                    }
                    rebuilt
                }
                (None, Some(m)) if *m >= 1 => witness::nff_matrix(*m),
                _ => return Err(CliError::usage("give --matrix or a positive --nff")),
            };
            let f = target(function)?;
            let parity = Parity::from(*parity);
            if parity == Parity::None {
                return Err(CliError::usage("certify parity must be odd or even"));
            }
            let bound = witness::certify_lower_bound(&a, &f, *eps, parity);
            Ok(json!({ "function": function, "eps": eps, "parity": parity, "n": a.n, "lower_bound": bound }).into())
        }
    }
}

/// Degree implied by a polynomial spec such as `power:d=4` or `mono:c=1;0;2`.
pub fn spec_degree(spec: &str) -> Option<usize> {
    let (name, args) = spec.split_once(':')?;
    match name {
        "cheb" | "power" => args.trim().strip_prefix("d=")?.parse().ok(),
        "mono" => Some(args.trim().strip_prefix("c=")?.split(';').count() - 1),
        "const" => Some(0),
        _ => None,
    }
}

fn load_matrix(path: &Path) -> Result<SparseHermitian, CliError> {
    SparseHermitian::from_json(&read(path)?).map_err(|e| CliError::new("matrix", e.to_string()))
}

fn est_err(e: estimators::EstimateError) -> CliError {
    CliError::new("estimate", e.to_string())
}

fn report_json(args: &EstimateArgs, r: &EstimateReport) -> Value {
    json!({
        "function": args.function,
        "i": args.i,
        "j": args.j,
        "eps": args.eps,
        "method": r.method,
        "value": [r.value.re, r.value.im],
        "imag_residue": r.imag_residue,
        "walks": r.walks_used,
        "queries_o1": r.queries.o1,
        "queries_o2": r.queries.o2,
        "seed": r.seed,
        "nodes": r.nodes,
        "terms": r.terms,
        "contour_max": r.contour_max,
    })
}

fn estimate(args: &EstimateArgs, seed: u64, exec: Exec) -> Result<Value, CliError> {
    let a = load_matrix(&args.matrix)?;
    let f = target(&args.function)?;
    let counter = QueryCounter::new();
    let poly = || -> Result<PolySpec, CliError> {
        let d = args.degree.or_else(|| spec_degree(&args.function)).ok_or_else(|| {
            CliError::usage(format!("{} is not a polynomial spec; pass --degree", args.function))
        })?;
        Ok(PolySpec::from_cheb(&cheb_fit(&f, d)))
    };
    let report = match args.method {
        MethodArg::Exact => exact_entry(&a, &poly()?, args.i, args.j, &counter, args.budget).map_err(est_err)?,
        MethodArg::Walk => {
            let mut cfg = WalkConfig::new(args.eps, args.fail_prob, seed);
            cfg.exec = exec;
            walk_estimate(&a, &poly()?, args.i, args.j, &cfg, &counter).map_err(est_err)?
        }
        MethodArg::Contour => {
            let g = f
                .complex_fn()
                .ok_or_else(|| CliError::new("function", format!("{} has no analytic continuation", args.function)))?;
            let lambda = args.lambda.ok_or_else(|| CliError::usage("contour needs --lambda"))?;
            let mut cfg = ContourConfig::new(lambda, args.eps, args.fail_prob, seed);
            cfg.big_lambda = args.big_lambda;
            cfg.real_input = a.is_real();
            cfg.exec = exec;
            let g = move |z: Complex64| g(z);
            contour_estimate(&a, &g, args.i, args.j, &cfg, &counter).map_err(est_err)?
        }
        MethodArg::Oracle => {
            // dense reference value; reads the matrix directly
            for index in [args.i, args.j] {
                if index == 0 || index > a.dim() {
                    return Err(est_err(estimators::EstimateError::Index { index, n: a.dim() }));
                }
            }
            let value = DenseSpectrum::new(&a.to_dense()).entry(|x| f.value(x), args.i - 1, args.j - 1);
            return Ok(json!({
                "function": args.function,
                "i": args.i,
                "j": args.j,
                "method": "oracle",
                "value": [value.re, value.im],
                "walks": 0,
                "queries_o1": 0,
                "queries_o2": 0,
                "seed": seed,
            }));
        }
    };
    Ok(report_json(args, &report))
}

fn estimate_csv(v: &Value) -> String {
    let cols = ["method", "i", "j", "eps", "walks", "queries_o1", "queries_o2", "seed"];
    let cell = |x: &Value| match x {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    let mut head = vec!["schema_version"];
    head.extend(cols);
    head.extend(["value_re", "value_im"]);
    let mut row = vec![SCHEMA_VERSION.to_string()];
    row.extend(cols.iter().map(|c| cell(&v[*c])));
    row.extend([cell(&v["value"][0]), cell(&v["value"][1])]);
    format!("{}\n{}\n", head.join(","), row.join(","))
}

fn hardness_cmd(cmd: &HardnessCmd, seed: u64) -> Result<Outcome, CliError> {
    let err = |e: hardness::HardnessError| CliError::new("hardness", e.to_string());
    match cmd {
        HardnessCmd::Gen { family, function, bits, variant, weight, n } => {
            let f = target(function)?;
            let bundle = match family {
                FamilyKind::Parity => {
                    let bits = bits.as_deref().ok_or_else(|| CliError::usage("parity needs --bits"))?;
                    let bits: Vec<u8> = bits
                        .chars()
                        .map(|c| match c {
                            '0' => Ok(0),
                            '1' => Ok(1),
                            _ => Err(CliError::usage(format!("bit string may hold only 0 and 1, got {c:?}"))),
                        })
                        .collect::<Result<_, _>>()?;
                    let variant = match variant {
                        VariantArg::Odd => ParityVariant::Odd,
                        VariantArg::Even => ParityVariant::Even,
                    };
                    let weights = match weight {
                        Some(w) => {
                            let count = if variant == ParityVariant::Even { bits.len() + 2 } else { bits.len() };
                            vec![*w; count]
                        }
                        None => hardness::parity_witness_weights(&f, bits.len(), variant).map_err(err)?.0,
                    };
                    Bundle::Parity { bits, weights, variant, function: function.clone() }
                }
                FamilyKind::Forrelation => {
                    let n = n.ok_or_else(|| CliError::usage("forrelation needs --n"))?;
                    if n > hardness::MAX_FORRELATION_QUBITS {
                        return Err(err(hardness::HardnessError::Budget { n, max: hardness::MAX_FORRELATION_QUBITS }));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut table = || -> Vec<i8> { (0..1usize << n).map(|_| if rng.gen() { 1 } else { -1 }).collect() };
                    let (g1, g2) = (table(), table());
                    let (weights, _) =
                        hardness::clock_witness_weights(&f, hardness::forrelation_clock_size(n)).map_err(err)?;
                    Bundle::Forrelation { n, g1, g2, weights, function: function.clone() }
                }
            };
            Ok(json!({ "bundle": bundle }).into())
        }
        HardnessCmd::Verify { bundle } => {
            let doc: Value = parse(bundle)?;
            let raw = doc.get("bundle").cloned().unwrap_or(doc);
            let b: Bundle = serde_json::from_value(raw)
                .map_err(|e| CliError::new("parse", format!("{}: {e}", bundle.display())))?;
            let report = hardness::verify_bundle(&b).map_err(err)?;
            let body = json!({ "report": report });
            if report.ok {
                Ok(body.into())
            } else {
                let msg = format!("identity residual {:e} exceeds {:e}", report.residual, hardness::BUNDLE_TOL);
                Ok(Outcome::Rejected(body, CliError::new("verification_failed", msg)))
            }
        }
    }
}
