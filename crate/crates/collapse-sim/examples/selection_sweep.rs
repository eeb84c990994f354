//! Sweeps the weight step and compares three routes to the collapse time
//! scale: measured mean steps to collapse, the slowest relaxation time from
//! the spectrum, and the asymptotic estimate 1/(2 eps^2).
//!
//! Run with: cargo run --release --example selection_sweep

use collapse_sim::{
    asymptotic_selection_time, build_stat_matrix, eigen_spectrum, relaxation_times, run_ensemble,
    FluctuationParams, PhaseDist, RunConfig,
};

fn main() -> collapse_sim::Result<()> {
    println!("eps      mean collapse   selection time   1/(2 eps^2)");
    for eps in [0.25, 0.125, 0.1, 0.05] {
        let config = RunConfig {
            weights: vec![0.5, 0.5],
            phases: vec![0.0, 0.0],
            params: FluctuationParams::new(eps, 1.0, PhaseDist::ThreePoint, 1)?,
            n_trajectories: 20_000,
            max_steps: 10_000_000,
            record_every: 0,
            worker_count: 0,
        };
        let stats = run_ensemble(&config)?;
        let matrix = build_stat_matrix(eps)?;
        let spectrum = eigen_spectrum(&matrix)?;
        let times = relaxation_times(&spectrum, 1.0)?;
        println!(
            "{eps:<8} {:<15.3} {:<16.3} {:.1}",
            stats.mean_steps_to_collapse(),
            times.selection_time,
            asymptotic_selection_time(eps, 1.0),
        );
    }
    Ok(())
}
