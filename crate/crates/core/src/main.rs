use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use ragplan::config::{OracleMode, PipelineConfig, Selector};
use ragplan::mmkp::gen::{random_instance, InstanceShape};
use ragplan::mmkp::{solve_exact, MmkpInstance, ParetoDp};
use ragplan::{load_corpus, load_queries, run_eval, Error};

const EXIT_VALIDATION: u8 = 2;
const EXIT_ORACLE_BUDGET: u8 = 3;
/// Largest tolerated share of failed queries.
const FAILURE_BUDGET: f64 = 0.10;

#[derive(Parser)]
#[command(name = "ragplan", version, about = "Budgeted context selection and entailment-guided answer search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverChoice {
    Dp,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a query set against a corpus.
    Eval {
        /// TOML configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// JSONL corpus with `id`, `text` and optional `embedding`, `token_len`.
        #[arg(long)]
        corpus: PathBuf,
        /// JSONL queries with `id`, `text`, `gold_answers`, `gold_passage_ids`.
        #[arg(long)]
        queries: PathBuf,
        /// Force local mock oracles.
        #[arg(long, conflicts_with = "remote")]
        mock: bool,
        /// Use the HTTP oracles named in the config.
        #[arg(long)]
        remote: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON-lines report path; defaults to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum)]
        selector: Option<SelectorArg>,
        /// Token budget.
        #[arg(long)]
        c_token: Option<u64>,
        /// Redundancy budget.
        #[arg(long)]
        c_red: Option<f64>,
        /// Weight of the fusion score in item utility.
        #[arg(long)]
        alpha: Option<f64>,
        /// Weight of distance from the group centroid in item utility.
        #[arg(long)]
        beta: Option<f64>,
        /// Cosine threshold for grouping near-duplicates.
        #[arg(long)]
        tau: Option<f64>,
        /// Scale applied to redundancy costs.
        #[arg(long)]
        lambda_red: Option<f64>,
    },
    /// Solve an MMKP instance file and print the solution as JSON.
    SolveMmkp {
        /// JSON instance with `groups` and `capacity`.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "dp")]
        solver: SolverChoice,
    },
    /// Compare the Pareto DP against exhaustive search on random instances.
    BenchSolvers {
        /// Number of random instances.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectorArg {
    Mmkp,
    Topk,
    Mmr,
}

impl From<SelectorArg> for Selector {
    fn from(s: SelectorArg) -> Self {
        match s {
            SelectorArg::Mmkp => Selector::Mmkp,
            SelectorArg::Topk => Selector::Topk,
            SelectorArg::Mmr => Selector::Mmr,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Eval {
            config,
            corpus,
            queries,
            mock,
            remote,
            seed,
            report,
            selector,
            c_token,
            c_red,
            alpha,
            beta,
            tau,
            lambda_red,
        } => {
            let mut cfg = match config {
                Some(path) => PipelineConfig::load(path)?,
                None => PipelineConfig::default(),
            };
            if mock {
                cfg.oracles.mode = OracleMode::Mock;
            }
            if remote {
                cfg.oracles.mode = OracleMode::Remote;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = selector {
                cfg.selector = s.into();
            }
            let m = &mut cfg.mmkp;
            m.c_token = c_token.unwrap_or(m.c_token);
            m.c_red = c_red.unwrap_or(m.c_red);
            m.alpha = alpha.unwrap_or(m.alpha);
            m.beta = beta.unwrap_or(m.beta);
            m.tau = tau.unwrap_or(m.tau);
            m.lambda_red = lambda_red.unwrap_or(m.lambda_red);
            cfg.validate()?;

            let store = load_corpus(&corpus, cfg.dim)?;
            let queries = load_queries(&queries)?;
            let started = Instant::now();
            let result = run_eval(&cfg, &store, &queries)?;
            match report {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|e| Error::Io {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                    let mut out = io::BufWriter::new(file);
                    result.write_jsonl(&mut out)?;
                    out.flush()?;
                    print!("{}", result.summary_table());
                }
                None => {
                    result.write_jsonl(io::stdout().lock())?;
                    eprint!("{}", result.summary_table());
                }
            }
            eprintln!("elapsed: {:.2?}", started.elapsed());
            let a = &result.aggregate;
            let failed_share = if a.queries == 0 { 0.0 } else { a.failed as f64 / a.queries as f64 };
            if failed_share > FAILURE_BUDGET {
                eprintln!(
                    "{} of {} queries failed ({} on oracle calls)",
                    a.failed, a.queries, a.oracle_failures
                );
                return Ok(ExitCode::from(EXIT_ORACLE_BUDGET));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::SolveMmkp { instance, solver } => {
            let text = fs::read_to_string(&instance).map_err(|e| Error::Io {
                path: instance.display().to_string(),
                source: e,
            })?;
            let inst = MmkpInstance::from_json(&text)?;
            let sol = match solver {
                SolverChoice::Dp => ParetoDp::default().solve(&inst)?.0,
                SolverChoice::Exact => solve_exact(&inst)?,
            };
            println!("{}", serde_json::to_string_pretty(&sol)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::BenchSolvers { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let shape = InstanceShape::default();
            let instances: Vec<MmkpInstance> = (0..n).map(|_| random_instance(&mut rng, &shape)).collect();
            let dp = ParetoDp::default();
            let mut mismatches = 0usize;
            let mut max_frontier = 0usize;
            let mut dp_time = std::time::Duration::ZERO;
            let mut exact_time = std::time::Duration::ZERO;
            for inst in &instances {
                let t = Instant::now();
                let (a, stats) = dp.solve(inst)?;
                dp_time += t.elapsed();
                let t = Instant::now();
                let b = solve_exact(inst)?;
                exact_time += t.elapsed();
                max_frontier = max_frontier.max(stats.max_frontier);
                if a.total_value != b.total_value || a.selected != b.selected {
                    mismatches += 1;
                }
            }
            let out = json!({
                "instances": n,
                "seed": seed,
                "mismatches": mismatches,
                "max_frontier": max_frontier,
                "dp_ms": dp_time.as_secs_f64() * 1e3,
                "exact_ms": exact_time.as_secs_f64() * 1e3,
            });
            println!("{out}");
            if mismatches > 0 {
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
