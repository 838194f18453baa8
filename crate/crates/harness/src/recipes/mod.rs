//! Named experiments behind the CLI subcommands.

mod ber;
mod q_ratio;
mod spectrum;
mod sweep;
mod validate;

pub use ber::{run_ber, BerRow};
pub use q_ratio::{default_q_section, run_q_ratio, QRow};
pub use spectrum::{run_spectrum, SpectrumReport};
pub use sweep::{apply_sweep_value, run_sweep, SweepRow};
pub use validate::{gate, run_validate, Check};

use std::path::Path;
use std::time::Instant;

use xpm_core::analytic::IfMode;

use crate::config::ExperimentConfig;
use crate::error::HarnessResult;
use crate::output::{append_record, RunRecord, TOOL_VERSION};

pub(crate) fn mode_name(m: IfMode) -> &'static str {
    match m {
        IfMode::Evolving => "evolving",
        IfMode::Constant => "constant",
    }
}

/// Persists the resolved config and appends the run record.
pub(crate) fn finish_run(
    cfg: &ExperimentConfig,
    out: &Path,
    recipe: &str,
    started: Instant,
    results: Vec<(String, f64)>,
    files: Vec<String>,
) -> HarnessResult<()> {
    cfg.persist(out)?;
    let record = RunRecord {
        tool_version: TOOL_VERSION.into(),
        recipe: recipe.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        realizations: cfg.simulation.realizations,
        results,
        files,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    append_record(out, &record)?;
    Ok(())
}
