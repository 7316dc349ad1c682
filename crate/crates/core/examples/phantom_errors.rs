//! Error table on phantoms with and without the plausibility checks.
//!
//! `cargo run --release --example phantom_errors -- [count]`

use qpmseg::eval::{evaluate_run, EvalConfig};
use qpmseg::phantom::{PhantomParams, PhantomSet};
use qpmseg::pipeline::run_pipeline;
use qpmseg::Config;

fn main() -> qpmseg::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let set = PhantomSet::new(PhantomParams::default(), 1000, n);
    let truths = (0..n).map(|i| set.scene(i).map(|s| s.truth)).collect::<qpmseg::Result<Vec<_>>>()?;
    let workers = std::thread::available_parallelism().map(|w| w.get()).unwrap_or(1);
    for checks in [true, false] {
        let cfg = Config { plausibility_checks: checks, ..Config::default() };
        let out = run_pipeline(&set, &cfg, workers)?;
        let report = evaluate_run(&truths, &out, &EvalConfig::default())?;
        println!("plausibility checks {}", if checks { "on" } else { "off" });
        print!("{}", report.table());
    }
    Ok(())
}
