//! Result serialization and config-file parsing.
//!
//! Two on-disk formats: JSON (round-trips the statistics exactly, thanks to
//! shortest-round-trip float printing) and CSV in long format for plotting.
//! CSV files carry one header row, dot-decimal numbers and `#`-prefixed
//! summary lines after the table. Output bytes depend only on the inputs
//! and the seed, never on the worker count.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conformance::CheckReport;
use crate::ensemble::{EnsembleStats, RunConfig};
use crate::spectral::{RelaxationTimes, SpectralResult};
use crate::state::PhaseDist;

/// Everything a `run` invocation produces: the inputs that determine the
/// statistics (the worker count is deliberately absent) plus the statistics
/// themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub weights: Vec<f64>,
    pub phases: Vec<f64>,
    pub epsilon: f64,
    pub tau: f64,
    pub phase_dist: PhaseDist,
    pub seed: u64,
    pub n_trajectories: u64,
    pub max_steps: u64,
    pub record_every: u64,
    pub stats: EnsembleStats,
}

impl RunOutput {
    pub fn new(config: &RunConfig, stats: EnsembleStats) -> Self {
        Self {
            weights: config.weights.clone(),
            phases: config.phases.clone(),
            epsilon: config.params.epsilon,
            tau: config.params.tau,
            phase_dist: config.params.phase_dist,
            seed: config.params.seed,
            n_trajectories: config.n_trajectories,
            max_steps: config.max_steps,
            record_every: config.record_every,
            stats,
        }
    }
}

pub fn write_run_json(path: &Path, output: &RunOutput) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, output).map_err(io::Error::other)?;
    file.write_all(b"\n")?;
    file.flush()
}

pub fn read_run_json(path: &Path) -> io::Result<RunOutput> {
    let file = BufReader::new(File::open(path)?);
    serde_json::from_reader(file).map_err(io::Error::other)
}

/// Long-format time-series table (step, packet_index, mean_weight,
/// mean_amp_re, mean_amp_im) followed by `#` summary lines with the
/// survival counts.
pub fn write_run_csv(path: &Path, output: &RunOutput) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(
        file,
        "step,packet_index,mean_weight,mean_amp_re,mean_amp_im"
    )?;
    if let Some(series) = &output.stats.series {
        for (row, &step) in series.steps.iter().enumerate() {
            for packet in 0..output.weights.len() {
                writeln!(
                    file,
                    "{},{},{},{},{}",
                    step,
                    packet,
                    series.mean_weights[row][packet],
                    series.mean_amp_re[row][packet],
                    series.mean_amp_im[row][packet],
                )?;
            }
        }
    }
    writeln!(
        file,
        "# trajectories,{},resolved,{},unresolved,{}",
        output.stats.total_trajectories, output.stats.resolved, output.stats.unresolved
    )?;
    let freqs = output.stats.survival_frequencies();
    for (packet, (&count, freq)) in output.stats.survival_counts.iter().zip(&freqs).enumerate() {
        writeln!(file, "# packet,{packet},survivals,{count},frequency,{freq}")?;
    }
    file.flush()
}

/// Eigenvalue table (index, eigenvalue, relaxation_time) with a summary line
/// carrying the selection time and its ratio to the asymptotic estimate
/// tau / (2 eps^2). The two unit modes never decay; their time column reads
/// `inf`.
pub fn write_spectrum_csv(
    path: &Path,
    eps: f64,
    tau: f64,
    spectrum: &SpectralResult,
    times: &RelaxationTimes,
) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "index,eigenvalue,relaxation_time")?;
    let mut time_iter = times.times.iter();
    for (index, &lambda) in spectrum.eigenvalues().iter().enumerate() {
        if lambda < 1.0 {
            let t = time_iter.next().copied().unwrap_or(0.0);
            writeln!(file, "{index},{lambda},{t}")?;
        } else {
            writeln!(file, "{index},{lambda},inf")?;
        }
    }
    let asymptotic = crate::spectral::asymptotic_selection_time(eps, tau);
    writeln!(
        file,
        "# selection_time,{},asymptotic,{},ratio,{}",
        times.selection_time,
        asymptotic,
        times.selection_time / asymptotic
    )?;
    file.flush()
}

pub fn write_reports_json(path: &Path, reports: &[CheckReport]) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, reports).map_err(io::Error::other)?;
    file.write_all(b"\n")?;
    file.flush()
}

pub fn render_reports_text(reports: &[CheckReport]) -> String {
    let mut out = String::new();
    for report in reports {
        out.push_str(&report.to_string());
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed == 0 {
        out.push_str(&format!("all {} checks passed\n", reports.len()));
    } else {
        out.push_str(&format!("{failed} of {} checks failed\n", reports.len()));
    }
    out
}

/// Key-value config file: one `key = value` per line, `#` comments. Keys
/// use the long flag names; flags take precedence over file entries.
pub fn parse_config_file(path: &Path) -> io::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("line {}: expected `key = value`, got {raw:?}", lineno + 1),
            )
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
