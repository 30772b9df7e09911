use serde::Serialize;
use serde_json::{json, Map, Value};

use tally_core::estimator::{compare_to_exact, estimate_full, estimate_phi_report, estimate_plain};
use tally_core::exact::TableCounter;
use tally_core::margins::{classify_smoothness, typical_entry_bounds, SmoothnessParams};
use tally_core::matrix::from_nested;
use tally_core::rng::{substream, Purpose};
use tally_core::sampling::ChainConfig;
use tally_core::scaling::{p_upper_bound, sinkhorn, FactorEvaluator, DEFAULT_MAX_ITER};
use tally_core::typical::solve_typical;
use tally_core::{Budget, Margins};

use crate::output::{decimal_from_log10, render, Report};
use crate::{bench, checks, read_json, read_margins, Cli, CliResult, Command, MethodArg};

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize to JSON")
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("reports are JSON objects"),
    }
}

fn path_string(p: &std::path::Path) -> String {
    p.display().to_string()
}

pub(crate) fn dispatch(cli: &Cli, budget: &Budget) -> CliResult<String> {
    let seed = cli.seed;
    let report = match &cli.command {
        Command::Exact { input } => {
            let margins = read_margins(input)?;
            let counter = TableCounter::new(&margins, budget)?;
            let count = counter.count();
            let mut result = object(to_value(&count));
            result.insert("ln_count".into(), count.ln().into());
            result.insert("dp_states".into(), counter.state_count().into());
            Report {
                command: "exact",
                input: Some(path_string(input)),
                seed,
                knobs: object(json!({ "dp_budget": budget.dp_states })),
                result: Value::Object(result),
            }
        }
        Command::Estimate(args) => {
            let margins = read_margins(&args.input)?;
            let mut report = match args.method {
                MethodArg::Plain => estimate_plain(&margins, args.samples, seed, budget)?,
                MethodArg::Phi => estimate_phi_report(&margins, args.samples, seed)?,
                MethodArg::Full => {
                    let mut config = ChainConfig::for_margins(&margins, seed);
                    config.burn_in = args.burnin;
                    config.thinning = args.thin;
                    config.chains = args.chains;
                    if let Some(d) = args.delta_interior {
                        config.delta_interior = d;
                    }
                    estimate_full(&margins, args.samples, args.nu_samples, args.delta_exponent, &config, budget)?
                }
            };
            if !cli.timings {
                report.wall_time = None;
            }
            let mut result = object(to_value(&report));
            result.insert(
                "estimate".into(),
                decimal_from_log10(report.log10_estimate).map_or(Value::Null, Value::from),
            );
            if args.compare {
                result.insert("comparison".into(), to_value(&compare_to_exact(&margins, &report, budget)?));
            }
            let delta_exponent = if args.delta_exponent.is_finite() {
                Value::from(args.delta_exponent)
            } else {
                Value::from("inf")
            };
            Report {
                command: "estimate",
                input: Some(path_string(&args.input)),
                seed,
                knobs: object(json!({
                    "method": format!("{:?}", args.method).to_lowercase(),
                    "samples": args.samples,
                    "nu_samples": args.nu_samples,
                    "delta_exponent": delta_exponent,
                    "burnin": args.burnin,
                    "thin": args.thin,
                    "chains": args.chains,
                    "delta_interior": args.delta_interior,
                    "compare": args.compare,
                    "dp_budget": budget.dp_states,
                })),
                result: Value::Object(result),
            }
        }
        Command::Typical { input, tol } => {
            let margins = read_margins(input)?;
            let typical = solve_typical(&margins, *tol)?;
            let mut result = object(to_value(&typical));
            let log10_rho = typical.log_rho / std::f64::consts::LN_10;
            result.insert("log10_rho".into(), log10_rho.into());
            result.insert("rho".into(), decimal_from_log10(log10_rho).into());
            result.insert("entry_bounds".into(), to_value(&typical_entry_bounds(&margins)));
            Report {
                command: "typical",
                input: Some(path_string(input)),
                seed,
                knobs: object(json!({ "tol": tol })),
                result: Value::Object(result),
            }
        }
        Command::Scale { input, matrix, tol } => {
            let margins = read_margins(input)?;
            let rows: Vec<Vec<f64>> = read_json(matrix)?;
            let x = from_nested(&rows)?;
            let scaled = sinkhorn(&x, &margins, *tol, DEFAULT_MAX_ITER)?;
            let factor = FactorEvaluator::new(&margins, *tol, budget)?;
            let mut result = object(to_value(&scaled));
            result.insert("factorization".into(), to_value(&factor.report(&x)?));
            Report {
                command: "scale",
                input: Some(path_string(input)),
                seed,
                knobs: object(json!({
                    "matrix": path_string(matrix),
                    "tol": tol,
                    "dp_budget": budget.dp_states,
                })),
                result: Value::Object(result),
            }
        }
        Command::Bounds { input } => {
            let margins = read_margins(input)?;
            Report {
                command: "bounds",
                input: Some(path_string(input)),
                seed,
                knobs: object(json!({ "tol": tally_core::typical::DEFAULT_TOL })),
                result: bounds(&margins)?,
            }
        }
        Command::Smoothness(args) => {
            let margins = read_margins(&args.input)?;
            let params = SmoothnessParams {
                golden_rho: args.golden_rho,
                golden_eps: args.golden_eps,
                linear_beta: args.linear_beta,
                linear_eps: args.linear_eps,
            };
            let typical = solve_typical(&margins, tally_core::typical::DEFAULT_TOL)?;
            let report = classify_smoothness(&margins, Some(&typical), &params)?;
            let mut result = object(to_value(&report));
            result.insert("stats".into(), to_value(&margins.stats()));
            Report {
                command: "smoothness",
                input: Some(path_string(&args.input)),
                seed,
                knobs: object(to_value(&params)),
                result: Value::Object(result),
            }
        }
        Command::SampleTables { input, count } => {
            let margins = read_margins(input)?;
            let counter = TableCounter::new(&margins, budget)?;
            let mut rng = substream(seed, Purpose::Tables, 0);
            let tables: Vec<Value> = (0..*count).map(|_| to_value(&counter.sample(&mut rng))).collect();
            let total = counter.count();
            Report {
                command: "sample-tables",
                input: Some(path_string(input)),
                seed,
                knobs: object(json!({ "count": count, "dp_budget": budget.dp_states })),
                result: json!({
                    "table_count": total.to_string(),
                    "log10_table_count": total.log10(),
                    "tables": tables,
                }),
            }
        }
        Command::Check(args) => {
            let margins = args.input.as_deref().map(read_margins).transpose()?;
            let (result, knob_map) = checks::run_suite(args.suite, margins.as_ref(), args.trials, args.lambda, seed, budget)?;
            Report {
                command: "check",
                input: args.input.as_deref().map(path_string),
                seed,
                knobs: knob_map,
                result,
            }
        }
        Command::Benchmark {
            corpus,
            out,
            samples,
            nu_samples,
        } => {
            let config = bench::BenchConfig {
                samples: *samples,
                nu_samples: *nu_samples,
                seed,
                timings: cli.timings,
            };
            let rows = bench::run_benchmark(corpus, out, &config, budget)?;
            Report {
                command: "benchmark",
                input: Some(path_string(corpus)),
                seed,
                knobs: object(json!({
                    "out": path_string(out),
                    "samples": samples,
                    "nu_samples": nu_samples,
                    "timings": cli.timings,
                    "dp_budget": budget.dp_states,
                })),
                result: json!({
                    "instances": rows.len(),
                    "errors": rows.iter().filter(|r| r.is_err()).count(),
                }),
            }
        }
    };
    render(report, cli.format)
}

fn bounds(margins: &Margins) -> CliResult<Value> {
    let typical = solve_typical(margins, tally_core::typical::DEFAULT_TOL)?;
    let ln10 = std::f64::consts::LN_10;
    let p_bound = p_upper_bound(margins);
    Ok(json!({
        "stats": margins.stats(),
        "log_rho": typical.log_rho,
        "log10_rho": typical.log_rho / ln10,
        "rho": decimal_from_log10(typical.log_rho / ln10),
        "log_p_upper_bound": p_bound,
        "log10_p_upper_bound": p_bound / ln10,
        "entry_bounds": typical_entry_bounds(margins),
        "max_typical_entry": typical.entries.iter().copied().fold(0.0, f64::max),
    }))
}
