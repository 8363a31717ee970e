//! Run configuration: command-line flags layered over an optional JSON
//! config file, with built-in hardware defaults.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Deserialize;

use crate::carbon::{Generation, HardwareProfile, HwPair, FOUR_YEARS_S};
use crate::dpso::WeightBounds;
use crate::policy::PolicyKind;
use crate::scenario::ScenarioKind;
use crate::scheduler::ObjectiveWeights;
use crate::{Error, Result};

/// Built-in older-generation hardware: a 2016-class 36-core box with 512 GiB
/// of DRAM. Lower embodied and keep-alive cost per slot, slower execution.
pub fn default_hw_old() -> HardwareProfile {
    HardwareProfile {
        id: Generation::Old,
        ec_cpu: 18_000.0,
        ec_dram: 110_000.0,
        lt_cpu: FOUR_YEARS_S,
        lt_dram: FOUR_YEARS_S,
        core_num: 36,
        m_dram: 524_288.0,
        keepalive_cpu_power: 150.0,
        keepalive_dram_power: 40.0,
        extra_embodied: 0.0,
        extra_lifetime: None,
    }
}

/// Built-in newer-generation hardware: a 2020-class 24-core box with 192 GiB
/// of DRAM. Faster and more energy-efficient per executed second, higher
/// embodied cost per core and per MiB.
pub fn default_hw_new() -> HardwareProfile {
    HardwareProfile {
        id: Generation::New,
        ec_cpu: 23_000.0,
        ec_dram: 75_000.0,
        lt_cpu: FOUR_YEARS_S,
        lt_dram: FOUR_YEARS_S,
        core_num: 24,
        m_dram: 196_608.0,
        keepalive_cpu_power: 120.0,
        keepalive_dram_power: 25.0,
        extra_embodied: 0.0,
        extra_lifetime: None,
    }
}

pub fn default_pair() -> HwPair {
    HwPair::new(default_hw_old(), default_hw_new()).expect("built-in hardware pair is valid")
}

pub const DEFAULT_KAT: [f64; 5] = [0.0, 60.0, 120.0, 300.0, 600.0];

/// Carbon-aware serverless keep-alive simulator.
#[derive(Debug, Parser)]
#[command(name = "ecolife", version, about)]
pub struct Cli {
    /// Optional JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Invocation trace CSV (`timestamp_ms,function_id`).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Carbon-intensity CSV (`minute,g_co2_per_kwh`).
    #[arg(long)]
    pub ci: Option<PathBuf>,
    /// Function profile catalog (JSON array).
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Older-generation hardware profile JSON (built-in default if omitted).
    #[arg(long)]
    pub hw_old: Option<PathBuf>,
    /// Newer-generation hardware profile JSON (built-in default if omitted).
    #[arg(long)]
    pub hw_new: Option<PathBuf>,
    /// Scheduler to run.
    #[arg(long)]
    pub scheduler: Option<String>,
    /// Service-time weight.
    #[arg(long)]
    pub lambda_s: Option<f64>,
    /// Carbon weight.
    #[arg(long)]
    pub lambda_c: Option<f64>,
    /// Keep-alive grid, comma-separated seconds starting at 0.
    #[arg(long)]
    pub kat: Option<String>,
    /// Old-generation warm-pool capacity, MiB.
    #[arg(long)]
    pub mem_old: Option<f64>,
    /// New-generation warm-pool capacity, MiB.
    #[arg(long)]
    pub mem_new: Option<f64>,
    /// Swarm size.
    #[arg(long)]
    pub particles: Option<usize>,
    /// Swarm iterations per invocation.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Inter-arrival history window.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated schedulers to run side by side on the same scenario.
    #[arg(long)]
    pub compare: Option<String>,
    /// Generate and run a named synthetic scenario instead of loading files.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Disable the swarm perception-response redistribution (ablation).
    #[arg(long)]
    pub no_perception: bool,
    /// Disable warm-pool adjustment on overflow (ablation).
    #[arg(long)]
    pub no_adjust: bool,
}

/// The same keys as the flags, accepted from a JSON config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    trace: Option<PathBuf>,
    ci: Option<PathBuf>,
    profiles: Option<PathBuf>,
    hw_old: Option<PathBuf>,
    hw_new: Option<PathBuf>,
    scheduler: Option<String>,
    lambda_s: Option<f64>,
    lambda_c: Option<f64>,
    kat: Option<Vec<f64>>,
    mem_old: Option<f64>,
    mem_new: Option<f64>,
    particles: Option<usize>,
    iters: Option<usize>,
    window: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    compare: Option<Vec<String>>,
    scenario: Option<String>,
    perception_response: Option<bool>,
    pool_adjustment: Option<bool>,
    w_min: Option<f64>,
    w_max: Option<f64>,
    c_min: Option<f64>,
    c_max: Option<f64>,
}

/// Fully resolved and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub trace: Option<PathBuf>,
    pub ci: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub hw_old: Option<PathBuf>,
    pub hw_new: Option<PathBuf>,
    pub scheduler: PolicyKind,
    pub weights: ObjectiveWeights,
    pub kat: Vec<f64>,
    pub mem_old_mib: f64,
    pub mem_new_mib: f64,
    pub particles: usize,
    pub iters: usize,
    pub window: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub compare: Vec<PolicyKind>,
    pub scenario: Option<ScenarioKind>,
    pub perception_response: bool,
    pub pool_adjustment: bool,
    pub bounds: WeightBounds,
}

pub fn parse_kat(text: &str) -> Result<Vec<f64>> {
    let kat: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad keep-alive value {p:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok(kat)
}

impl RunConfig {
    /// Merge flags over the optional config file and validate everything
    /// that can be validated without reading the data files.
    pub fn resolve(cli: Cli) -> Result<RunConfig> {
        let file: FileConfig = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("config file {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let scheduler: PolicyKind = cli
            .scheduler
            .or(file.scheduler)
            .as_deref()
            .unwrap_or("ecolife")
            .parse()?;
        let kat = match (cli.kat, file.kat) {
            (Some(text), _) => parse_kat(&text)?,
            (None, Some(values)) => values,
            (None, None) => DEFAULT_KAT.to_vec(),
        };
        let compare = match (cli.compare, file.compare) {
            (Some(text), _) => text
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse())
                .collect::<Result<Vec<PolicyKind>>>()?,
            (None, Some(list)) => list
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<PolicyKind>>>()?,
            (None, None) => Vec::new(),
        };
        let scenario = match cli.scenario.or(file.scenario) {
            Some(name) => Some(name.parse::<ScenarioKind>()?),
            None => None,
        };

        let config = RunConfig {
            trace: cli.trace.or(file.trace),
            ci: cli.ci.or(file.ci),
            profiles: cli.profiles.or(file.profiles),
            hw_old: cli.hw_old.or(file.hw_old),
            hw_new: cli.hw_new.or(file.hw_new),
            scheduler,
            weights: ObjectiveWeights::new(
                cli.lambda_s.or(file.lambda_s).unwrap_or(0.5),
                cli.lambda_c.or(file.lambda_c).unwrap_or(0.5),
            )?,
            kat,
            mem_old_mib: cli.mem_old.or(file.mem_old).unwrap_or(15_360.0),
            mem_new_mib: cli.mem_new.or(file.mem_new).unwrap_or(15_360.0),
            particles: cli.particles.or(file.particles).unwrap_or(15),
            iters: cli.iters.or(file.iters).unwrap_or(10),
            window: cli.window.or(file.window).unwrap_or(10),
            seed: cli.seed.or(file.seed).unwrap_or(0),
            out: cli.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            compare,
            scenario,
            perception_response: !cli.no_perception
                && file.perception_response.unwrap_or(true),
            pool_adjustment: !cli.no_adjust && file.pool_adjustment.unwrap_or(true),
            bounds: {
                let defaults = WeightBounds::default();
                WeightBounds {
                    w_min: file.w_min.unwrap_or(defaults.w_min),
                    w_max: file.w_max.unwrap_or(defaults.w_max),
                    c_min: file.c_min.unwrap_or(defaults.c_min),
                    c_max: file.c_max.unwrap_or(defaults.c_max),
                }
            },
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.scenario.is_some() {
            if self.trace.is_some() || self.ci.is_some() || self.profiles.is_some() {
                return Err(Error::Config(
                    "--scenario generates its own trace/ci/profiles; do not pass those paths too"
                        .into(),
                ));
            }
        } else {
            for (name, path) in [
                ("--trace", &self.trace),
                ("--ci", &self.ci),
                ("--profiles", &self.profiles),
            ] {
                match path {
                    None => {
                        return Err(Error::Config(format!(
                            "{name} is required unless --scenario is given"
                        )))
                    }
                    Some(p) if !p.exists() => {
                        return Err(Error::Config(format!(
                            "{name} file {} does not exist",
                            p.display()
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        for (name, path) in [("--hw-old", &self.hw_old), ("--hw-new", &self.hw_new)] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "{name} file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        crate::dpso::SearchSpace::new(vec![Generation::Old, Generation::New], self.kat.clone())?;
        if !(self.mem_old_mib > 0.0 && self.mem_new_mib > 0.0) {
            return Err(Error::Config("pool capacities must be positive".into()));
        }
        if self.particles == 0 {
            return Err(Error::Config("--particles must be at least 1".into()));
        }
        Ok(())
    }

    /// Load the hardware pair, falling back to the built-in defaults.
    pub fn load_hw(&self) -> Result<HwPair> {
        let old = match &self.hw_old {
            Some(p) => HardwareProfile::from_json_file(p)?,
            None => default_hw_old(),
        };
        let new = match &self.hw_new {
            Some(p) => HardwareProfile::from_json_file(p)?,
            None => default_hw_new(),
        };
        HwPair::new(old, new)
    }

    /// The schedulers this run executes: the compare list, or the single
    /// configured scheduler.
    pub fn schedulers(&self) -> Vec<PolicyKind> {
        if self.compare.is_empty() {
            vec![self.scheduler]
        } else {
            self.compare.clone()
        }
    }
}

/// Parse argv into a validated config (clap handles `--help`/usage errors
/// with exit code 2 itself).
pub fn parse_config_from<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    RunConfig::resolve(cli)
}

/// True if a path looks like a directory we can write reports into.
pub fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}
