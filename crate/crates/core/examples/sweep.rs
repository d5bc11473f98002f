//! A small sample-size sweep through the same code path as
//! `sparse-ica sweep`, printing the summary CSV.
//!
//! ```text
//! cargo run --release --example sweep
//! ```

use clap::Parser;
use sparse_ica::cli::{run_cells, summarize, sweep_cells, Axis, Cli, Command};

fn main() {
    let cli = Cli::parse_from([
        "sparse-ica",
        "sweep",
        "--axis",
        "sample-size",
        "--grid",
        "500,5000",
        "--trials",
        "3",
        "--n",
        "5",
        "--restarts",
        "5",
        "--methods",
        "sparseica-likelihood,vanilla-likelihood,fastica",
        "--pairing",
        "benchmark",
        "--out",
        "unused",
    ]);
    let Command::Sweep(args) = cli.command else {
        unreachable!()
    };
    let cells = sweep_cells(&args).unwrap();
    let rows = run_cells(&cells, &args.solver);
    for r in &rows {
        println!("{:<22} T={:<5} trial={} mcc={:.3} amari={:.4} {}", r.method, r.t, r.trial, r.mcc, r.amari, r.status);
    }
    print!("\n{}", summarize(&rows, Axis::SampleSize));
}
