use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use switchgraph::estimator::estimate;
use switchgraph::harness::{self, HarnessError};
use switchgraph::moments::{theoretical_moment, DynamicProfile, EmpiricalMoments};
use switchgraph::CaseConfig;

#[derive(Parser)]
#[command(name = "simfit", version, about = "Simulate switching dynamic graphs and fit them by moments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; overrides the config.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; overrides the config (default: `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare theoretical and accumulated moments on replication 0.
    Moments {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate parameters from supplied moment values.
    Estimate {
        /// EmpiricalMoments JSON.
        #[arg(long)]
        moments: PathBuf,
        /// CaseConfig JSON, or a preset name (case1, case2, case3).
        #[arg(long)]
        case: String,
        #[arg(long)]
        vertices: usize,
    },
}

const CONFIG_ERROR: u8 = 2;
const ALL_FAILED: u8 = 3;

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config_error() { CONFIG_ERROR } else { ALL_FAILED })
}

fn read(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(CONFIG_ERROR)
    })
}

fn run(config: PathBuf, workers: Option<usize>, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match harness::load_config(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let output = match harness::run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if let Err(e) = harness::write_outputs(&output, &dir, cfg.histogram_bins) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::FAILURE;
    }
    if cfg.trace {
        let path = dir.join("trace.csv");
        let written = std::fs::File::create(&path)
            .map_err(|source| HarnessError::Io { path: path.clone(), source })
            .and_then(|f| harness::write_trace(&cfg, 0, &mut std::io::BufWriter::new(f)));
        if let Err(e) = written {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    for case in &output.report.cases {
        println!("{}: {}/{} replications succeeded", case.name, case.successes, cfg.r);
        for s in &case.summary {
            println!("  {:<8} truth {:>9.4}  mean {:>9.4}  std {:>9.4}", s.name, s.truth, s.mean, s.std);
        }
        for (kind, count) in &case.failures {
            println!("  failed ({kind}): {count}");
        }
    }
    println!("wrote {}", dir.display());
    ExitCode::SUCCESS
}

fn moments(config: PathBuf) -> ExitCode {
    let cfg = match harness::load_config(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let model = match cfg.model.prepare() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: model: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let em = match harness::replication_moments(&cfg, &model, 0) {
        Ok(em) => em,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let d = DynamicProfile::from_model(&model);
    println!("{:<8} {:>14} {:>14} {:>10} {:>7}", "moment", "theory", "empirical", "s.e.", "z");
    for e in &em.entries {
        let spec = e.spec();
        let Ok(th) = theoretical_moment(cfg.n_vertices(), spec, &d) else {
            continue;
        };
        let se = e.std_error.unwrap_or(f64::NAN);
        println!("{:<8} {:>14.4} {:>14.4} {:>10.4} {:>7.2}", spec.to_string(), th, e.value, se, (e.value - th) / se);
    }
    ExitCode::SUCCESS
}

fn estimate_cmd(moments: PathBuf, case: String, vertices: usize) -> ExitCode {
    let text = match read(&moments) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let em: EmpiricalMoments = match serde_json::from_str(&text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {}:{}:{}: {e}", moments.display(), e.line(), e.column());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let cfg: CaseConfig = match harness::preset(&case) {
        Some(c) => c,
        None => {
            let path = PathBuf::from(&case);
            let text = match read(&path) {
                Ok(t) => t,
                Err(c) => return c,
            };
            match serde_json::from_str(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {}:{}:{}: {e}", path.display(), e.line(), e.column());
                    return ExitCode::from(CONFIG_ERROR);
                }
            }
        }
    };
    match estimate(&cfg, &em, vertices, None) {
        Ok(res) => {
            println!("{}", serde_json::to_string_pretty(&res).expect("result serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: estimation failed ({}): {e}", e.kind());
            ExitCode::from(ALL_FAILED)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, workers, out } => run(config, workers, out),
        Command::Moments { config } => moments(config),
        Command::Estimate { moments: m, case, vertices } => estimate_cmd(m, case, vertices),
    }
}
