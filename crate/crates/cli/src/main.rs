//! slspec: forward and inverse spectral computations for Sturm-Liouville
//! problems with irregular boundary conditions.
//!
//! Exit codes: 0 success, 2 schema or parameter violation, 3 computation
//! error. Every run prints a single machine-parseable key=value summary
//! line on stdout.

use clap::{Parser, Subcommand};
use std::process::ExitCode;

mod commands;
mod io_util;



#[derive(Parser, Debug)]
#[command(name = "slspec", version, about = "Sturm-Liouville spectral toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the spectrum of (q, b, theta) with multiplicities and the
    /// tail-regularity report.
    Forward {
        /// Potential JSON: {"point_count", "samples_re", "samples_im"}
        #[arg(long)]
        potential: String,
        /// Boundary parameters as inline JSON {"b_re":..,"b_im":..,"theta":0|1}
        #[arg(long)]
        boundary: String,
        /// Highest index searched; roots lie in Re mu in (1/2, n_max + 1/2]
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        /// ODE solver tolerance override
        #[arg(long)]
        tol: Option<f64>,
        /// Half-height of the search strip
        #[arg(long, default_value_t = 2.0)]
        im_band: f64,
        /// Output spectrum JSON path
        #[arg(long)]
        out: String,
    },
    /// Tabulate Delta(mu) over a real mu grid as CSV.
    DeterminantTrace {
        #[arg(long)]
        potential: String,
        #[arg(long)]
        boundary: String,
        /// Trace covers mu in [0, n_max] at 32 samples per unit
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        #[arg(long)]
        tol: Option<f64>,
        /// Output CSV path (header mu_re,mu_im,delta_re,delta_im)
        #[arg(long)]
        out: String,
    },
    /// Reconstruct a potential from a target model descriptor or an
    /// inverse-data file, verify it, and write potential + report.
    Inverse {
        /// Target JSON: a model descriptor (with "variant") or inverse data
        /// (with "N", "nodes", "c_re", "c_im", "target")
        #[arg(long)]
        target: String,
        /// Kernel grid points
        #[arg(long, default_value_t = 513)]
        grid: usize,
        /// Tail terms summed directly when no closed tail applies
        #[arg(long, default_value_t = 512)]
        n_tail: usize,
        #[arg(long)]
        tol: Option<f64>,
        /// Output potential JSON; the verification report lands next to it
        /// with extension .report.json
        #[arg(long)]
        out: String,
    },
    /// Inverse reconstruction plus a forward Dirichlet-spectrum cross-check
    /// of the prescribed nodes.
    Roundtrip {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 513)]
        grid: usize,
        #[arg(long, default_value_t = 512)]
        n_tail: usize,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: String,
    },
    /// Evaluate the closed-form example families: multiplicity tables at
    /// the designated zeros plus a determinant trace.
    Examples {
        /// Which family: 1 or 2
        #[arg(long)]
        example: u32,
        /// Zero order of the first family
        #[arg(long)]
        k: Option<u32>,
        /// Splitting parameter of the first family, 0 < alpha < 1
        #[arg(long)]
        alpha: Option<f64>,
        /// First cluster exponent of the second family (>= 10)
        #[arg(long)]
        p0: Option<u32>,
        /// Output report JSON; the trace lands next to it as .trace.csv
        #[arg(long)]
        out: String,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("SLSPEC_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Forward {
            potential,
            boundary,
            n_max,
            tol,
            im_band,
            out,
        } => commands::forward(&potential, &boundary, n_max, tol, im_band, &out),
        Command::DeterminantTrace {
            potential,
            boundary,
            n_max,
            tol,
            out,
        } => commands::determinant_trace(&potential, &boundary, n_max, tol, &out),
        Command::Inverse {
            target,
            grid,
            n_tail,
            tol,
            out,
        } => commands::inverse(&target, grid, n_tail, tol, &out, false),
        Command::Roundtrip {
            target,
            grid,
            n_tail,
            tol,
            out,
        } => commands::inverse(&target, grid, n_tail, tol, &out, true),
        Command::Examples {
            example,
            k,
            alpha,
            p0,
            out,
        } => commands::examples(example, k, alpha, p0, &out),
    };

    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("status=error code={} msg={:?}", e.exit_code(), e.to_string());
            ExitCode::from(e.exit_code())
        }
    }
}
