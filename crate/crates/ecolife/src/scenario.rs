//! Seeded synthetic scenarios: desk-scale stand-ins for production traces.
//!
//! Functions are drawn uniformly at random per arrival; global inter-arrival
//! gaps are exponential. Everything is deterministic given the seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::carbon::{CarbonIntensitySeries, Generation};
use crate::workload::{
    write_ci, write_profiles, write_trace, FunctionProfile, HardwareUsage, InvocationTrace,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// 8 functions, 300 invocations, exponential gaps with a 4-minute mean,
    /// diurnal carbon intensity.
    PoissonSmall,
    /// Regime change at mid-trace: dense arrivals under a carbon intensity
    /// of 50, then sparse arrivals under 300. Keep-alive decisions learned
    /// in the first half turn wasteful in the second, so the scenario
    /// rewards schedulers that notice the change.
    CiStep,
    /// Memory-hungry functions arriving fast; pools sized to roughly half
    /// of the aggregate warm demand put the eviction machinery under
    /// pressure.
    MemoryPressure,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::PoissonSmall,
        ScenarioKind::CiStep,
        ScenarioKind::MemoryPressure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::PoissonSmall => "poisson-small",
            ScenarioKind::CiStep => "ci-step",
            ScenarioKind::MemoryPressure => "memory-pressure",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scenario {s:?}; expected one of: {}",
                    ScenarioKind::ALL.map(|k| k.as_str()).join(", ")
                ))
            })
    }
}

pub struct Scenario {
    pub trace: InvocationTrace,
    pub ci: CarbonIntensitySeries,
    pub profiles: Vec<FunctionProfile>,
}

impl Scenario {
    /// Total memory footprint of the catalog, MiB — the aggregate warm
    /// demand if every function were kept alive at once.
    pub fn aggregate_mem_mib(&self) -> f64 {
        self.profiles.iter().map(|p| p.mem).sum()
    }
}

fn usage(exec: f64, coldstart: f64, cpu_w: f64, dram_w: f64) -> HardwareUsage {
    HardwareUsage {
        exec,
        coldstart,
        cpu_power_exec: cpu_w,
        dram_power_exec: dram_w,
        cpu_power_cold: None,
        dram_power_cold: None,
    }
}

fn profile(id: &str, mem: f64, old: HardwareUsage, new: HardwareUsage) -> FunctionProfile {
    let mut hw = BTreeMap::new();
    hw.insert(Generation::Old, old);
    hw.insert(Generation::New, new);
    FunctionProfile {
        id: id.into(),
        mem,
        hw,
    }
}

/// Benchmark-style catalog: small tools through memory-heavy pipelines. Old
/// hardware runs 1.3–1.45x slower at higher power.
fn standard_catalog() -> Vec<FunctionProfile> {
    vec![
        profile(
            "thumbnailer",
            128.0,
            usage(0.42, 1.0, 225.0, 26.0),
            usage(0.30, 0.80, 172.0, 18.0),
        ),
        profile(
            "json-transform",
            256.0,
            usage(0.68, 1.25, 230.0, 27.0),
            usage(0.50, 1.00, 175.0, 19.0),
        ),
        profile(
            "compression",
            512.0,
            usage(1.70, 1.90, 245.0, 30.0),
            usage(1.20, 1.50, 185.0, 21.0),
        ),
        profile(
            "graph-bfs",
            512.0,
            usage(1.15, 2.80, 235.0, 32.0),
            usage(0.80, 2.20, 178.0, 23.0),
        ),
        profile(
            "pagerank",
            768.0,
            usage(2.10, 2.50, 250.0, 33.0),
            usage(1.50, 2.00, 188.0, 24.0),
        ),
        profile(
            "dna-visualization",
            1024.0,
            usage(3.90, 4.40, 240.0, 30.0),
            usage(2.80, 3.50, 190.0, 22.0),
        ),
        profile(
            "video-processing",
            1536.0,
            usage(6.00, 3.80, 260.0, 36.0),
            usage(4.20, 3.00, 200.0, 26.0),
        ),
        profile(
            "ml-inference",
            2048.0,
            usage(3.40, 5.60, 255.0, 38.0),
            usage(2.40, 4.50, 195.0, 28.0),
        ),
    ]
}

/// Catalog with large memory footprints for the eviction scenarios.
fn heavy_catalog() -> Vec<FunctionProfile> {
    vec![
        profile(
            "etl-batch",
            1024.0,
            usage(1.60, 2.60, 240.0, 32.0),
            usage(1.15, 2.00, 182.0, 23.0),
        ),
        profile(
            "feature-store",
            1536.0,
            usage(1.00, 3.20, 235.0, 34.0),
            usage(0.72, 2.50, 178.0, 24.0),
        ),
        profile(
            "image-pipeline",
            2048.0,
            usage(2.40, 3.00, 250.0, 35.0),
            usage(1.70, 2.30, 190.0, 25.0),
        ),
        profile(
            "model-serving",
            2560.0,
            usage(1.90, 4.80, 245.0, 36.0),
            usage(1.35, 3.80, 186.0, 26.0),
        ),
        profile(
            "vector-search",
            3072.0,
            usage(1.30, 4.00, 240.0, 38.0),
            usage(0.95, 3.10, 184.0, 27.0),
        ),
        profile(
            "graph-analytics",
            3584.0,
            usage(2.80, 4.40, 255.0, 40.0),
            usage(2.00, 3.40, 194.0, 28.0),
        ),
        profile(
            "genome-align",
            4096.0,
            usage(3.60, 5.00, 260.0, 42.0),
            usage(2.60, 3.90, 198.0, 30.0),
        ),
        profile(
            "media-transcode",
            5120.0,
            usage(4.80, 4.20, 262.0, 44.0),
            usage(3.40, 3.30, 202.0, 31.0),
        ),
    ]
}

/// Exponential gap in milliseconds, floored at one clock tick.
fn exp_gap_ms(rng: &mut ChaCha8Rng, mean_s: f64) -> u64 {
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let gap_s = -mean_s * (1.0 - u).ln();
    ((gap_s * 1000.0).round() as u64).max(1)
}

fn poisson_trace(
    rng: &mut ChaCha8Rng,
    catalog: &[FunctionProfile],
    invocations: usize,
    mean_gap_s: f64,
) -> InvocationTrace {
    let mut events = Vec::with_capacity(invocations);
    let mut t = 0u64;
    for _ in 0..invocations {
        t += exp_gap_ms(rng, mean_gap_s);
        let f = &catalog[rng.gen_range(0..catalog.len())];
        events.push((t, f.id.clone()));
    }
    InvocationTrace { events }
}

/// Diurnal-ish intensity: base plus a sine swing and seeded noise.
fn diurnal_ci(rng: &mut ChaCha8Rng, minutes: usize) -> CarbonIntensitySeries {
    let values = (0..minutes)
        .map(|m| {
            let phase = m as f64 / (24.0 * 60.0) * std::f64::consts::TAU;
            let noise: f64 = rng.gen_range(-20.0..20.0);
            (250.0 + 120.0 * phase.sin() + noise).max(20.0)
        })
        .collect();
    CarbonIntensitySeries {
        start_epoch_ms: 0,
        step_ms: 60_000,
        values,
    }
}

fn minutes_covering(trace: &InvocationTrace, slack_s: u64) -> usize {
    let end_ms = trace.events.last().map(|(t, _)| *t).unwrap_or(0);
    ((end_ms / 1000 + slack_s) / 60 + 2) as usize
}

/// Generate a named scenario. The same seed always produces the same
/// trace, intensity series, and catalog.
pub fn generate_scenario(kind: ScenarioKind, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ScenarioKind::PoissonSmall => {
            let profiles = standard_catalog();
            let trace = poisson_trace(&mut rng, &profiles, 300, 240.0);
            let ci = diurnal_ci(&mut rng, minutes_covering(&trace, 700));
            Scenario { trace, ci, profiles }
        }
        ScenarioKind::CiStep => {
            let profiles = standard_catalog();
            // Dense first half (short gaps make keeping alive pay off),
            // sparse second half.
            let mut events = Vec::with_capacity(300);
            let mut t = 0u64;
            for i in 0..300 {
                let mean = if i < 150 { 30.0 } else { 240.0 };
                t += exp_gap_ms(&mut rng, mean);
                let f = &profiles[rng.gen_range(0..profiles.len())];
                events.push((t, f.id.clone()));
            }
            let trace = InvocationTrace { events };
            // The intensity steps 50 -> 300 at the arrival-regime change.
            let step_minute = ((trace.events[149].0 / 60_000) + 1) as usize;
            let minutes = minutes_covering(&trace, 700);
            let values = (0..minutes)
                .map(|m| if m < step_minute { 50.0 } else { 300.0 })
                .collect();
            let ci = CarbonIntensitySeries {
                start_epoch_ms: 0,
                step_ms: 60_000,
                values,
            };
            Scenario { trace, ci, profiles }
        }
        ScenarioKind::MemoryPressure => {
            let profiles = heavy_catalog();
            let trace = poisson_trace(&mut rng, &profiles, 300, 45.0);
            let ci = diurnal_ci(&mut rng, minutes_covering(&trace, 700));
            Scenario { trace, ci, profiles }
        }
    }
}

/// Standard file names for a scenario on disk.
pub const TRACE_FILE: &str = "trace.csv";
pub const CI_FILE: &str = "ci.csv";
pub const PROFILES_FILE: &str = "profiles.json";

/// Write the scenario triple into `dir`, returning the three paths.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<(PathBuf, PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let trace = dir.join(TRACE_FILE);
    let ci = dir.join(CI_FILE);
    let profiles = dir.join(PROFILES_FILE);
    write_trace(&trace, &scenario.trace)?;
    write_ci(&ci, &scenario.ci)?;
    write_profiles(&profiles, &scenario.profiles)?;
    Ok((trace, ci, profiles))
}
