use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use xpm_harness::config::{BerSection, IfModeName, KModeName, ProbeType, QRatioSection, SweepParameter, SweepSection};
use xpm_harness::recipes::{self, gate};
use xpm_harness::{ExperimentConfig, HarnessError, HarnessResult, Preset};

#[derive(Parser)]
#[command(name = "xpmif", version, about = "XPM phase noise with evolving intensity-fluctuation spectra")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; overrides --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    if_mode: Option<IfModeArg>,
    #[arg(long, global = true, value_enum)]
    k_mode: Option<KModeArg>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IfModeArg {
    Constant,
    Evolving,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum KModeArg {
    Coherent,
    Incoherent,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Distance,
    Dispersion,
    Spacing,
    Power,
}

#[derive(Subcommand)]
enum Command {
    /// One span, K = 1: measured and analytic probe phase spectra.
    SingleSpan,
    /// Multi-span spectra for constant and evolving IF.
    MultiSpan {
        #[arg(long)]
        spans: Option<usize>,
    },
    /// Phase variance against one parameter.
    Sweep {
        #[arg(long, value_enum)]
        param: Option<ParamArg>,
        /// Comma-separated values (km, ps/nm/km, GHz or dBm).
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Predicted and measured BER over pump launch power.
    Ber {
        /// Comma-separated pump powers in dBm.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        powers: Vec<f64>,
    },
    /// Expectation-ratio table for the random phasor sum.
    QRatio {
        #[arg(long, value_delimiter = ',')]
        spans: Vec<usize>,
        #[arg(long = "c", value_delimiter = ',')]
        c_values: Vec<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Invariant self-test; exit code 3 on failure.
    Validate,
}

fn load(common: &Common) -> HarnessResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::preset(common.preset.parse::<Preset>().map_err(HarnessError::Config)?),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(m) = common.if_mode {
        cfg.model.if_mode = match m {
            IfModeArg::Constant => IfModeName::Constant,
            IfModeArg::Evolving => IfModeName::Evolving,
            IfModeArg::Both => IfModeName::Both,
        };
    }
    if let Some(k) = common.k_mode {
        cfg.model.k_mode = match k {
            KModeArg::Coherent => KModeName::Coherent,
            KModeArg::Incoherent => KModeName::Incoherent,
        };
    }
    Ok(cfg)
}

fn run(cli: Cli) -> HarnessResult<()> {
    if let Some(t) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = load(&cli.common)?;
    match cli.command {
        Command::SingleSpan => {
            cfg.link.num_spans = 1;
            cfg.validate()?;
            let out = PathBuf::from(&cfg.output_dir);
            let r = recipes::run_spectrum(&cfg, &out, "single-span")?;
            print_spectrum(&r);
        }
        Command::MultiSpan { spans } => {
            if let Some(n) = spans {
                cfg.link.num_spans = n;
            }
            cfg.validate()?;
            let out = PathBuf::from(&cfg.output_dir);
            let r = recipes::run_spectrum(&cfg, &out, "multi-span")?;
            print_spectrum(&r);
        }
        Command::Sweep { param, values } => {
            if let Some(p) = param {
                let parameter = match p {
                    ParamArg::Distance => SweepParameter::Distance,
                    ParamArg::Dispersion => SweepParameter::Dispersion,
                    ParamArg::Spacing => SweepParameter::Spacing,
                    ParamArg::Power => SweepParameter::Power,
                };
                cfg.sweep = Some(SweepSection { parameter, values });
            } else if !values.is_empty() {
                return Err(HarnessError::Config("--values needs --param".into()));
            }
            cfg.validate()?;
            let out = PathBuf::from(&cfg.output_dir);
            for r in recipes::run_sweep(&cfg, &out)? {
                let a: Vec<String> = r.analytic.iter().map(|(m, v)| format!("{m:?}={v:.4e}")).collect();
                println!("{:>10.3}  measured={:.4e}  {}", r.value, r.measured, a.join("  "));
            }
        }
        Command::Ber { powers } => {
            if cfg.probe.kind != ProbeType::Qam {
                cfg.probe.kind = ProbeType::Qam;
                cfg.probe.subcarriers = cfg.pump.subcarriers.clone();
                cfg.probe.power_dbm = -8.0;
            }
            if cfg.link.noise_figure_db.is_none() {
                cfg.link.noise_figure_db = Some(5.0);
            }
            if !powers.is_empty() {
                cfg.ber = Some(BerSection { powers_dbm: powers, quadrature_nodes: 64 });
            }
            if cfg.ber.is_none() {
                cfg.ber = Some(BerSection { powers_dbm: vec![-8.0, -2.0, 2.0, 4.0, 6.0], quadrature_nodes: 64 });
            }
            cfg.validate()?;
            let out = PathBuf::from(&cfg.output_dir);
            for r in recipes::run_ber(&cfg, &out)? {
                println!(
                    "{:>6.2} dBm  BER evolving={:.3e} constant={:.3e} measured={:.3e}",
                    r.power_dbm, r.ber_evolving, r.ber_constant, r.ber_measured
                );
            }
        }
        Command::QRatio { spans, c_values, trials } => {
            let mut q = cfg.q_ratio.clone().unwrap_or_else(recipes::default_q_section);
            if !spans.is_empty() {
                q.spans = spans;
            }
            if !c_values.is_empty() {
                q.c_values = c_values;
            }
            if let Some(t) = trials {
                q.trials = t;
            }
            cfg.q_ratio = Some(QRatioSection { ..q });
            cfg.validate()?;
            let out = PathBuf::from(&cfg.output_dir);
            for r in recipes::run_q_ratio(&cfg, &out)? {
                let c = r.c.map(|c| format!("{c:.3}")).unwrap_or_else(|| "avg".into());
                let q = r.q.map(|q| format!("{q:.5}")).unwrap_or_else(|| "undefined".into());
                println!("N={:<3} C={c:<6} Q={q} +/- {:.5}  bounds [{:.4}, {:.4}]", r.spans, r.ci95, r.lower, r.upper);
            }
        }
        Command::Validate => {
            let out = PathBuf::from(&cfg.output_dir);
            let checks = recipes::run_validate(&cfg, &out)?;
            for c in &checks {
                println!("{} {}: {:.3e} (limit {:.1e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.limit);
            }
            gate(&checks)?;
        }
    }
    Ok(())
}

fn print_spectrum(r: &recipes::SpectrumReport) {
    println!("measured variance: {:.4e} rad^2", r.measured_variance);
    for (mode, v, mad) in &r.analytic {
        println!("{mode:?}: variance {v:.4e} rad^2, MAD {mad:.2} dB");
    }
    if let Some(f) = r.evolving_closer_fraction {
        println!("evolving closer than constant in {:.0}% of bands", 100.0 * f);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xpmif: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
