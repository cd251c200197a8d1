//! Command-line front end: analyze a model from JSON, reproduce the
//! reference tables, cross-check against simulation, check the increment
//! ordering, or run the built-in verification sweep.
//!
//! Exit codes: 0 success, 1 a numerical check failed, 2 bad input.

use clap::{Parser, Subcommand};
use qrisk::models::{DependenceModel, ScenarioKind};
use qrisk::montecarlo::{self, SimConfig};
use qrisk::queuerisk::{analyze, increment_stop_loss};
use serde::Serialize;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "qrisk", about = "Exact waiting-time, workload and ruin analysis \
for queues with inter-arrival/service dependence", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a model from a JSON file (use '-' for stdin)
    Analyze {
        /// model JSON: {"family": "...", ..., "c": 1.0}
        #[arg(long)]
        model: PathBuf,
        /// write the tail curves as CSV to this path
        #[arg(long)]
        csv: Option<PathBuf>,
        /// largest grid point for the CSV curves
        #[arg(long, default_value_t = 10.0)]
        grid_max: f64,
        /// number of CSV grid points
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
    },
    /// Reference-table rows for the three scenarios with uniform mixing
    /// (unit-mean service stages: mu = 1, lambda = rho, c = 1)
    Table {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 4, 7, 14])]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75])]
        rho: Vec<f64>,
    },
    /// Simulation cross-check of the analytic waiting time and workload
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        customers: usize,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        /// agreement threshold in standard errors
        #[arg(long, default_value_t = 4.0)]
        max_se: f64,
    },
    /// Analytic convex-ordering check of the increments across scenarios
    Ordering {
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
    },
    /// Built-in sweep: analyze a battery of models and cross-check a few
    /// against simulation
    Verify,
}

#[derive(Serialize)]
struct ErrorOut {
    schema_version: u32,
    error: String,
}

fn fail(code: u8, msg: String) -> ExitCode {
    let out = ErrorOut {
        schema_version: SCHEMA_VERSION,
        error: msg,
    };
    eprintln!("{}", serde_json::to_string(&out).unwrap());
    ExitCode::from(code)
}

fn read_model(path: &PathBuf) -> Result<DependenceModel, String> {
    let text = if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| e.to_string())?;
        buf
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?
    };
    let model: DependenceModel =
        serde_json::from_str(&text).map_err(|e| format!("invalid model JSON: {e}"))?;
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err((code, msg)) => fail(code, msg),
    }
}

fn run(cmd: Command) -> Result<ExitCode, (u8, String)> {
    match cmd {
        Command::Analyze {
            model,
            csv,
            grid_max,
            grid_points,
        } => {
            let model = read_model(&model).map_err(|e| (2u8, e))?;
            let a = analyze(&model).map_err(|e| (1u8, e.to_string()))?;
            #[derive(Serialize)]
            struct Out {
                schema_version: u32,
                moments: qrisk::MomentReport,
                report: qrisk::ScenarioReport,
                duality_gap: f64,
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&Out {
                    schema_version: SCHEMA_VERSION,
                    moments: a.moments,
                    report: a.report(),
                    duality_gap: a.duality_gap,
                })
                .unwrap()
            );
            if let Some(path) = csv {
                let mut out = String::from("u,waiting_tail,workload_tail,ordinary_ruin,delayed_ruin\n");
                for i in 0..grid_points {
                    let u = grid_max * i as f64 / (grid_points.max(2) - 1) as f64;
                    out.push_str(&format!(
                        "{u},{},{},{},{}\n",
                        a.waiting_tail(u),
                        a.workload_tail(u),
                        a.ordinary_ruin(u),
                        a.delayed_ruin(u)
                    ));
                }
                std::fs::write(&path, out).map_err(|e| (2u8, e.to_string()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Table { k, rho } => {
            #[derive(Serialize)]
            struct Row {
                k: usize,
                rho: f64,
                scenario: &'static str,
                corr: f64,
                mean_waiting: f64,
                atom: f64,
                q95: f64,
            }
            let mut rows = Vec::new();
            for &kk in &k {
                for &r in &rho {
                    let weights = vec![1.0 / kk as f64; kk];
                    for (kind, name) in [
                        (ScenarioKind::Positive, "positive"),
                        (ScenarioKind::Independent, "independent"),
                        (ScenarioKind::Negative, "negative"),
                    ] {
                        let m = DependenceModel::build_scenario(kind, &weights, r, 1.0, 1.0)
                            .map_err(|e| (2u8, e.to_string()))?;
                        let a = analyze(&m).map_err(|e| (1u8, e.to_string()))?;
                        rows.push(Row {
                            k: kk,
                            rho: r,
                            scenario: name,
                            corr: a.moments.corr,
                            mean_waiting: a.mean_waiting(),
                            atom: a.atom(),
                            q95: a.waiting_quantile(0.95),
                        });
                    }
                }
            }
            #[derive(Serialize)]
            struct Out {
                schema_version: u32,
                rows: Vec<Row>,
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&Out {
                    schema_version: SCHEMA_VERSION,
                    rows
                })
                .unwrap()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            model,
            customers,
            seed,
            max_se,
        } => {
            let model = read_model(&model).map_err(|e| (2u8, e))?;
            let a = analyze(&model).map_err(|e| (1u8, e.to_string()))?;
            let mut cfg = SimConfig::default().with_n(customers);
            cfg.seed = seed;
            let mw = a.mean_waiting();
            let grid = [0.5 * mw.max(0.1), 2.0 * mw.max(0.1), 5.0 * mw.max(0.1)];
            let wsim = montecarlo::simulate_waiting(&model, &cfg, &grid);
            let vsim = montecarlo::simulate_workload(&model, &cfg, &grid);
            #[derive(Serialize)]
            struct Check {
                quantity: String,
                analytic: f64,
                simulated: f64,
                std_error: f64,
                ok: bool,
            }
            let mut checks = Vec::new();
            let mut push = |name: String, analytic: f64, est: &qrisk::SimEstimate| {
                checks.push(Check {
                    quantity: name,
                    analytic,
                    simulated: est.value,
                    std_error: est.std_error,
                    ok: est.agrees_with(analytic, max_se),
                });
            };
            push("mean_waiting".into(), a.mean_waiting(), &wsim.mean);
            push("waiting_atom".into(), a.atom(), &wsim.atom);
            for (i, &u) in grid.iter().enumerate() {
                push(format!("waiting_tail@{u:.4}"), a.waiting_tail(u), &wsim.tail[i]);
            }
            push("mean_workload".into(), a.mean_workload(), &vsim.mean);
            push("workload_atom".into(), a.workload_atom(), &vsim.atom);
            for (i, &v) in grid.iter().enumerate() {
                push(
                    format!("workload_tail@{v:.4}"),
                    a.workload_tail(v),
                    &vsim.tail[i],
                );
            }
            let all_ok = checks.iter().all(|c| c.ok);
            #[derive(Serialize)]
            struct Out {
                schema_version: u32,
                customers: usize,
                seed: u64,
                checks: Vec<Check>,
                ok: bool,
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&Out {
                    schema_version: SCHEMA_VERSION,
                    customers,
                    seed,
                    checks,
                    ok: all_ok
                })
                .unwrap()
            );
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Ordering { k, rho, points } => {
            let weights = vec![1.0 / k as f64; k];
            let make = |kind| {
                DependenceModel::build_scenario(kind, &weights, rho, 1.0, 1.0)
                    .map_err(|e| (2u8, e.to_string()))
            };
            let pos = make(ScenarioKind::Positive)?;
            let ind = make(ScenarioKind::Independent)?;
            let neg = make(ScenarioKind::Negative)?;
            let ey = pos.moments().ey;
            let span = 4.0 * (pos.moments().eb + pos.moments().ea);
            #[derive(Serialize)]
            struct Point {
                t: f64,
                positive: f64,
                independent: f64,
                negative: f64,
            }
            let mut curve = Vec::new();
            let mut violation = false;
            for i in 0..points {
                let t = ey - span / 2.0 + span * i as f64 / (points.max(2) - 1) as f64;
                let p = increment_stop_loss(&pos, t).map_err(|e| (1u8, e.to_string()))?;
                let q = increment_stop_loss(&ind, t).map_err(|e| (1u8, e.to_string()))?;
                let r = increment_stop_loss(&neg, t).map_err(|e| (1u8, e.to_string()))?;
                if p > q + 1e-9 || q > r + 1e-9 {
                    violation = true;
                }
                curve.push(Point {
                    t,
                    positive: p,
                    independent: q,
                    negative: r,
                });
            }
            #[derive(Serialize)]
            struct Out {
                schema_version: u32,
                ordered: bool,
                curve: Vec<Point>,
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&Out {
                    schema_version: SCHEMA_VERSION,
                    ordered: !violation,
                    curve
                })
                .unwrap()
            );
            Ok(if violation {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Verify => {
            let mut models: Vec<(String, DependenceModel)> = Vec::new();
            for k in [1usize, 2, 4, 7] {
                for rho in [0.25, 0.5, 0.75] {
                    let weights = vec![1.0 / k as f64; k];
                    for (kind, name) in [
                        (ScenarioKind::Positive, "positive"),
                        (ScenarioKind::Independent, "independent"),
                        (ScenarioKind::Negative, "negative"),
                    ] {
                        let m = DependenceModel::build_scenario(kind, &weights, rho, 1.0, 1.0)
                            .map_err(|e| (2u8, e.to_string()))?;
                        models.push((format!("{name} K={k} rho={rho}"), m));
                    }
                }
            }
            for m in [1u32, 2] {
                let km = DependenceModel::new(
                    qrisk::Family::KibbleMoran {
                        m,
                        p: 0.4,
                        lambda: 0.5,
                        mu: 1.0,
                    },
                    1.0,
                )
                .map_err(|e| (2u8, e.to_string()))?;
                models.push((format!("kibble-moran m={m}"), km));
            }
            models.push((
                "cheriyan-ramabhadran (1,1,2)".into(),
                DependenceModel::new(
                    qrisk::Family::CheriyanRamabhadran {
                        orders: [1, 1, 2],
                        beta: [2.0, 1.0, 3.0],
                    },
                    1.0,
                )
                .map_err(|e| (2u8, e.to_string()))?,
            ));
            let mut failures = Vec::new();
            for (name, m) in &models {
                match analyze(m) {
                    Ok(a) => {
                        println!(
                            "ok   {name}: atom {:.6}, EW {:.6}, duality gap {:.2e}",
                            a.atom(),
                            a.mean_waiting(),
                            a.duality_gap
                        );
                    }
                    Err(e) => {
                        println!("FAIL {name}: {e}");
                        failures.push(name.clone());
                    }
                }
            }
            // light simulation cross-check on a handful
            let cfg = SimConfig::default().with_n(200_000);
            for idx in [4usize, 13, 22] {
                let (name, m) = &models[idx.min(models.len() - 1)];
                let a = analyze(m).map_err(|e| (1u8, e.to_string()))?;
                let grid = [a.mean_waiting().max(0.1)];
                let sim = montecarlo::simulate_waiting(m, &cfg, &grid);
                let ok = sim.mean.agrees_with(a.mean_waiting(), 4.0)
                    && sim.atom.agrees_with(a.atom(), 4.0)
                    && sim.tail[0].agrees_with(a.waiting_tail(grid[0]), 4.0);
                println!(
                    "{} sim {name}: mean {:.4} vs {:.4}",
                    if ok { "ok  " } else { "FAIL" },
                    sim.mean.value,
                    a.mean_waiting()
                );
                if !ok {
                    failures.push(format!("sim {name}"));
                }
            }
            if failures.is_empty() {
                println!("verify: all {} models passed", models.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verify: {} failures", failures.len());
                Ok(ExitCode::from(1))
            }
        }
    }
}
