use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ssdl::{run, Hyperparameters, Method, RunConfig};

/// Train a graph-regularised dictionary on an MNIST subset and report
/// classification accuracy.
#[derive(Debug, Parser)]
#[command(name = "ssdl", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "ss-dg-dl")]
    method: Method,
    /// IDX image file, optionally gzip-compressed.
    #[arg(long)]
    images: PathBuf,
    /// IDX label file, optionally gzip-compressed.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    n_train: usize,
    #[arg(long)]
    n_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write codes.csv with one row per sample.
    #[arg(long)]
    export_codes: bool,
    /// Write the trained model as model.bin.
    #[arg(long)]
    export_model: bool,
    /// Write the learned feature-graph Laplacian as feature_graph.csv.
    #[arg(long)]
    export_feature_graph: bool,

    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    sc_iters: Option<usize>,
    #[arg(long)]
    du_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    graph_iters: Option<usize>,
    #[arg(long)]
    graph_tol: Option<f64>,
    #[arg(long)]
    k_cls: Option<usize>,
}

impl Cli {
    fn into_config(self) -> RunConfig {
        let d = Hyperparameters::default();
        let hyperparameters = Hyperparameters {
            lambda: self.lambda.unwrap_or(d.lambda),
            gamma: self.gamma.unwrap_or(d.gamma),
            mu: self.mu.unwrap_or(d.mu),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            theta: self.theta.unwrap_or(d.theta),
            k: self.k.unwrap_or(d.k),
            p: self.p.unwrap_or(d.p),
            outer_iters: self.outer_iters.unwrap_or(d.outer_iters),
            sc_iters: self.sc_iters.unwrap_or(d.sc_iters),
            du_iters: self.du_iters.unwrap_or(d.du_iters),
            tol: self.tol.unwrap_or(d.tol),
            seed: self.seed,
            graph_iters: self.graph_iters.unwrap_or(d.graph_iters),
            graph_tol: self.graph_tol.unwrap_or(d.graph_tol),
            k_cls: self.k_cls.unwrap_or(d.k_cls),
        };
        RunConfig {
            images: self.images,
            labels: self.labels,
            n_train: self.n_train,
            n_test: self.n_test,
            method: self.method,
            hyperparameters,
            out_dir: self.out,
            export_codes: self.export_codes,
            export_model: self.export_model,
            export_feature_graph: self.export_feature_graph,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SSDL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("SSDL_THREADS must be a positive integer, got {raw:?}"))?;
    // matrixmultiply reads this once, on first use.
    std::env::set_var("MATMUL_NUM_THREADS", threads.to_string());
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let config = cli.into_config();
    match run(&config) {
        Ok(metrics) => {
            println!(
                "{}: test accuracy {:.4} (k-NN on codes {:.4}), wrote {}",
                metrics.method,
                metrics.test_accuracy,
                metrics.surrogate_test_accuracy,
                config.out_dir.join(ssdl::run::METRICS_FILE).display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
