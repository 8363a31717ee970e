//! Carbon footprint model for serverless functions on a hardware generation.
//!
//! Embodied carbon is amortized over hardware lifetime and attributed by
//! resource share: the whole CPU while a function executes, a single core
//! while it is kept alive, and the memory-size fraction of DRAM in both
//! phases. Operational carbon is energy times grid carbon intensity, with
//! energy derived from profile power draws (kWh = W·s / 3.6e6).

use serde::{Deserialize, Serialize};

use crate::workload::FunctionProfile;
use crate::{Error, Result};

/// Watt-seconds per kilowatt-hour.
pub const WS_PER_KWH: f64 = 3.6e6;

/// Default hardware lifetime: four years, in seconds.
pub const FOUR_YEARS_S: f64 = 126_144_000.0;

/// Hardware generation label. Ordering puts `Old` first, matching the
/// decision-space axis order used everywhere else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generation {
    Old,
    New,
}

impl Generation {
    pub fn as_str(self) -> &'static str {
        match self {
            Generation::Old => "old",
            Generation::New => "new",
        }
    }

    pub fn other(self) -> Generation {
        match self {
            Generation::Old => Generation::New,
            Generation::New => Generation::Old,
        }
    }
}

impl std::fmt::Display for Generation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Generation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "old" => Ok(Generation::Old),
            "new" => Ok(Generation::New),
            other => Err(Error::Config(format!(
                "unknown hardware generation {other:?}, expected \"old\" or \"new\""
            ))),
        }
    }
}

/// One hardware generation: total embodied carbon, lifetimes, and the power
/// drawn while idle-hosting warm functions.
///
/// Units: grams CO2, seconds, watts, MiB.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HardwareProfile {
    /// Generation label (`old` or `new`).
    pub id: Generation,
    /// Total embodied carbon of the CPU, grams.
    pub ec_cpu: f64,
    /// Total embodied carbon of the DRAM, grams.
    pub ec_dram: f64,
    /// CPU lifetime, seconds.
    #[serde(default = "default_lifetime")]
    pub lt_cpu: f64,
    /// DRAM lifetime, seconds.
    #[serde(default = "default_lifetime")]
    pub lt_dram: f64,
    /// Physical core count.
    pub core_num: u32,
    /// DRAM capacity, MiB.
    pub m_dram: f64,
    /// Whole-CPU power while idle-hosting warm functions, watts.
    pub keepalive_cpu_power: f64,
    /// Whole-DRAM power while idle-hosting warm functions, watts.
    pub keepalive_dram_power: f64,
    /// Embodied carbon of other components (storage, motherboard, PSU),
    /// grams. Amortized like the CPU, during service only.
    #[serde(default)]
    pub extra_embodied: f64,
    /// Lifetime for `extra_embodied`; defaults to `lt_cpu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_lifetime: Option<f64>,
}

fn default_lifetime() -> f64 {
    FOUR_YEARS_S
}

impl HardwareProfile {
    pub fn extra_lifetime(&self) -> f64 {
        self.extra_lifetime.unwrap_or(self.lt_cpu)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ec_cpu", self.ec_cpu),
            ("ec_dram", self.ec_dram),
            ("lt_cpu", self.lt_cpu),
            ("lt_dram", self.lt_dram),
            ("m_dram", self.m_dram),
            ("keepalive_cpu_power", self.keepalive_cpu_power),
            ("keepalive_dram_power", self.keepalive_dram_power),
        ];
        for (name, value) in positive {
            if value.is_nan() || value <= 0.0 {
                return Err(Error::Domain(format!(
                    "hardware {}: {name} must be strictly positive, got {value}",
                    self.id
                )));
            }
        }
        if self.core_num < 1 {
            return Err(Error::Domain(format!(
                "hardware {}: core_num must be >= 1",
                self.id
            )));
        }
        if self.extra_embodied < 0.0 {
            return Err(Error::Domain(format!(
                "hardware {}: extra_embodied must be >= 0",
                self.id
            )));
        }
        if self.extra_lifetime().is_nan() || self.extra_lifetime() <= 0.0 {
            return Err(Error::Domain(format!(
                "hardware {}: extra_lifetime must be strictly positive",
                self.id
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let hw: HardwareProfile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("hardware profile {}: {e}", path.display())))?;
        hw.validate()
            .map_err(|e| Error::Config(format!("hardware profile {}: {e}", path.display())))?;
        Ok(hw)
    }
}

/// The old/new hardware pair a simulation runs against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HwPair {
    pub old: HardwareProfile,
    pub new: HardwareProfile,
}

impl HwPair {
    pub fn new(old: HardwareProfile, new: HardwareProfile) -> Result<Self> {
        if old.id != Generation::Old || new.id != Generation::New {
            return Err(Error::Config(
                "hardware pair must be labeled old/new respectively".into(),
            ));
        }
        old.validate()?;
        new.validate()?;
        Ok(HwPair { old, new })
    }

    pub fn get(&self, gen: Generation) -> &HardwareProfile {
        match gen {
            Generation::Old => &self.old,
            Generation::New => &self.new,
        }
    }
}

/// Minute-resolution grid carbon intensity, gCO2/kWh. Lookups outside the
/// covered range clamp to the nearest sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarbonIntensitySeries {
    /// Simulation time of the first sample, milliseconds.
    #[serde(default)]
    pub start_epoch_ms: u64,
    /// Sample spacing, milliseconds.
    #[serde(default = "default_step_ms")]
    pub step_ms: u64,
    pub values: Vec<f64>,
}

fn default_step_ms() -> u64 {
    60_000
}

impl CarbonIntensitySeries {
    pub fn new(start_epoch_ms: u64, step_ms: u64, values: Vec<f64>) -> Result<Self> {
        let series = CarbonIntensitySeries {
            start_epoch_ms,
            step_ms,
            values,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn constant(value: f64) -> Self {
        CarbonIntensitySeries {
            start_epoch_ms: 0,
            step_ms: default_step_ms(),
            values: vec![value],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Domain(
                "carbon intensity series must be non-empty".into(),
            ));
        }
        if self.step_ms == 0 {
            return Err(Error::Domain(
                "carbon intensity step must be positive".into(),
            ));
        }
        if let Some(bad) = self.values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Domain(format!(
                "carbon intensity values must be >= 0, got {bad}"
            )));
        }
        Ok(())
    }

    fn index_at(&self, t_ms: u64) -> usize {
        if t_ms <= self.start_epoch_ms {
            return 0;
        }
        (((t_ms - self.start_epoch_ms) / self.step_ms) as usize).min(self.values.len() - 1)
    }

    /// Carbon intensity at an instant, gCO2/kWh.
    pub fn at(&self, t_ms: u64) -> f64 {
        self.values[self.index_at(t_ms)]
    }

    /// Piecewise-constant integral of CI over `[start_ms, end_ms)`, in
    /// gCO2·s/kWh. Multiplying by a power expressed in kWh/s yields grams.
    pub fn integrate(&self, start_ms: u64, end_ms: u64) -> f64 {
        let mut acc = 0.0;
        let mut t = start_ms;
        while t < end_ms {
            let idx = self.index_at(t);
            let seg_end = if idx + 1 < self.values.len() {
                let boundary = self.start_epoch_ms + (idx as u64 + 1) * self.step_ms;
                if boundary > t {
                    boundary.min(end_ms)
                } else {
                    end_ms
                }
            } else {
                end_ms
            };
            acc += self.values[idx] * ((seg_end - t) as f64 / 1000.0);
            t = seg_end;
        }
        acc
    }
}

/// Carbon of one accounting event, split by source. `total` is always the
/// sum of the four parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CarbonBreakdown {
    pub embodied_cpu: f64,
    pub embodied_dram: f64,
    pub op_cpu: f64,
    pub op_dram: f64,
    pub total: f64,
}

impl CarbonBreakdown {
    pub fn new(embodied_cpu: f64, embodied_dram: f64, op_cpu: f64, op_dram: f64) -> Self {
        CarbonBreakdown {
            embodied_cpu,
            embodied_dram,
            op_cpu,
            op_dram,
            total: embodied_cpu + embodied_dram + op_cpu + op_dram,
        }
    }

    pub const ZERO: CarbonBreakdown = CarbonBreakdown {
        embodied_cpu: 0.0,
        embodied_dram: 0.0,
        op_cpu: 0.0,
        op_dram: 0.0,
        total: 0.0,
    };

    pub fn add(&self, other: &CarbonBreakdown) -> CarbonBreakdown {
        CarbonBreakdown::new(
            self.embodied_cpu + other.embodied_cpu,
            self.embodied_dram + other.embodied_dram,
            self.op_cpu + other.op_cpu,
            self.op_dram + other.op_dram,
        )
    }
}

/// W·s → kWh.
pub fn kwh(watts: f64, seconds: f64) -> f64 {
    watts * seconds / WS_PER_KWH
}

fn check_non_negative(name: &str, value: f64) -> Result<()> {
    if value < 0.0 || value.is_nan() {
        return Err(Error::Domain(format!("{name} must be >= 0, got {value}")));
    }
    Ok(())
}

fn check_mem(hw: &HardwareProfile, mem_mib: f64) -> Result<()> {
    if mem_mib.is_nan() || mem_mib <= 0.0 {
        return Err(Error::Domain(format!(
            "function memory must be positive, got {mem_mib} MiB"
        )));
    }
    if mem_mib > hw.m_dram {
        return Err(Error::Capacity(format!(
            "function memory {mem_mib} MiB exceeds DRAM capacity {} MiB on {}",
            hw.m_dram, hw.id
        )));
    }
    Ok(())
}

/// DRAM embodied carbon attributed to a function resident for `duration_s`
/// seconds: (duration / lt_dram) · (mem / m_dram) · ec_dram.
pub fn embodied_dram(hw: &HardwareProfile, mem_mib: f64, duration_s: f64) -> Result<f64> {
    check_non_negative("duration", duration_s)?;
    check_mem(hw, mem_mib)?;
    Ok(duration_s / hw.lt_dram * (mem_mib / hw.m_dram) * hw.ec_dram)
}

/// CPU embodied carbon: the whole CPU is attributed during service, a single
/// core during keep-alive.
pub fn embodied_cpu(hw: &HardwareProfile, service_s: f64, keepalive_s: f64) -> Result<f64> {
    check_non_negative("service duration", service_s)?;
    check_non_negative("keepalive duration", keepalive_s)?;
    Ok(service_s / hw.lt_cpu * hw.ec_cpu
        + keepalive_s / hw.lt_cpu * (hw.ec_cpu / hw.core_num as f64))
}

/// DRAM operational carbon: memory-share of DRAM energy times carbon
/// intensity.
pub fn operational_dram(
    hw: &HardwareProfile,
    mem_mib: f64,
    e_service_kwh: f64,
    e_keepalive_kwh: f64,
    ci: f64,
) -> Result<f64> {
    check_non_negative("service energy", e_service_kwh)?;
    check_non_negative("keepalive energy", e_keepalive_kwh)?;
    check_non_negative("carbon intensity", ci)?;
    check_mem(hw, mem_mib)?;
    Ok(mem_mib / hw.m_dram * (e_service_kwh + e_keepalive_kwh) * ci)
}

/// CPU operational carbon: full CPU energy during service, one core's share
/// during keep-alive, times carbon intensity.
pub fn operational_cpu(
    hw: &HardwareProfile,
    e_service_kwh: f64,
    e_keepalive_kwh: f64,
    ci: f64,
) -> Result<f64> {
    check_non_negative("service energy", e_service_kwh)?;
    check_non_negative("keepalive energy", e_keepalive_kwh)?;
    check_non_negative("carbon intensity", ci)?;
    Ok((e_service_kwh + e_keepalive_kwh / hw.core_num as f64) * ci)
}

/// Carbon of one service period (execution plus cold start when `cold`),
/// with CI sampled at invocation start. Service durations are far below the
/// CI sample step, so a point sample prices the whole period.
pub fn service_carbon(
    f: &FunctionProfile,
    hw: &HardwareProfile,
    cold: bool,
    ci_at_start: f64,
) -> Result<CarbonBreakdown> {
    let entry = f.on(hw.id)?;
    let cold_s = if cold { entry.coldstart } else { 0.0 };
    let service_s = entry.exec + cold_s;

    let e_cpu = kwh(entry.cpu_power_exec, entry.exec) + kwh(entry.cpu_power_cold(), cold_s);
    let e_dram = kwh(entry.dram_power_exec, entry.exec) + kwh(entry.dram_power_cold(), cold_s);

    let extra = service_s / hw.extra_lifetime() * hw.extra_embodied;
    let emb_cpu = embodied_cpu(hw, service_s, 0.0)? + extra;
    let emb_dram = embodied_dram(hw, f.mem, service_s)?;
    let op_cpu = operational_cpu(hw, e_cpu, 0.0, ci_at_start)?;
    let op_dram = operational_dram(hw, f.mem, e_dram, 0.0, ci_at_start)?;
    Ok(CarbonBreakdown::new(emb_cpu, emb_dram, op_cpu, op_dram))
}

/// Carbon of keeping a function alive for `duration_s` seconds.
///
/// `ci_integral` is the piecewise-constant CI integral over the window in
/// gCO2·s/kWh (see [`CarbonIntensitySeries::integrate`]); pass `ci *
/// duration_s` for a constant intensity.
pub fn keepalive_carbon(
    f: &FunctionProfile,
    hw: &HardwareProfile,
    duration_s: f64,
    ci_integral: f64,
) -> Result<CarbonBreakdown> {
    check_non_negative("keepalive duration", duration_s)?;
    check_non_negative("ci integral", ci_integral)?;
    if duration_s == 0.0 {
        return Ok(CarbonBreakdown::ZERO);
    }
    check_mem(hw, f.mem)?;
    let emb_cpu = embodied_cpu(hw, 0.0, duration_s)?;
    let emb_dram = embodied_dram(hw, f.mem, duration_s)?;
    let op_cpu = hw.keepalive_cpu_power / WS_PER_KWH / hw.core_num as f64 * ci_integral;
    let op_dram = f.mem / hw.m_dram * (hw.keepalive_dram_power / WS_PER_KWH) * ci_integral;
    Ok(CarbonBreakdown::new(emb_cpu, emb_dram, op_cpu, op_dram))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{FunctionProfile, HardwareUsage};
    use std::collections::BTreeMap;

    fn hw(id: Generation) -> HardwareProfile {
        HardwareProfile {
            id,
            ec_cpu: 20_000.0,
            ec_dram: 80_000.0,
            lt_cpu: FOUR_YEARS_S,
            lt_dram: FOUR_YEARS_S,
            core_num: 24,
            m_dram: 131_072.0,
            keepalive_cpu_power: 120.0,
            keepalive_dram_power: 25.0,
            extra_embodied: 0.0,
            extra_lifetime: None,
        }
    }

    fn func(mem: f64) -> FunctionProfile {
        let usage = HardwareUsage {
            exec: 2.0,
            coldstart: 3.0,
            cpu_power_exec: 200.0,
            dram_power_exec: 25.0,
            cpu_power_cold: None,
            dram_power_cold: None,
        };
        let mut map = BTreeMap::new();
        map.insert(Generation::Old, usage.clone());
        map.insert(Generation::New, usage);
        FunctionProfile {
            id: "f".into(),
            mem,
            hw: map,
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        let scale = a.abs().max(b.abs()).max(1e-300);
        (a - b).abs() / scale <= tol
    }

    #[test]
    fn embodied_dram_zero_duration() {
        let hw = hw(Generation::New);
        assert_eq!(embodied_dram(&hw, 1024.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn embodied_dram_worked_example() {
        // 80 kg DRAM over 4 years, 1/128 memory share, 600 s resident.
        let hw = hw(Generation::New);
        let mem = hw.m_dram / 128.0;
        let got = embodied_dram(&hw, mem, 600.0).unwrap();
        let expected = 80_000.0 * 600.0 / (FOUR_YEARS_S * 128.0);
        assert!(rel_close(got, expected, 1e-12), "got {got}");
        assert!(rel_close(got, 2.973e-3, 1e-3), "got {got}");
    }

    #[test]
    fn embodied_dram_full_device_full_lifetime() {
        let hw = hw(Generation::New);
        let got = embodied_dram(&hw, hw.m_dram, hw.lt_dram).unwrap();
        assert!(rel_close(got, hw.ec_dram, 1e-12));
    }

    #[test]
    fn embodied_dram_rejects_oversized_function() {
        let hw = hw(Generation::New);
        assert!(matches!(
            embodied_dram(&hw, hw.m_dram + 1.0, 10.0),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            embodied_dram(&hw, 1.0, -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn embodied_cpu_hand_arithmetic() {
        let hw = hw(Generation::New);
        assert_eq!(embodied_cpu(&hw, 0.0, 0.0).unwrap(), 0.0);
        let got = embodied_cpu(&hw, 2.0, 600.0).unwrap();
        let expected = 2.0 * 20_000.0 / FOUR_YEARS_S + 600.0 * 20_000.0 / (FOUR_YEARS_S * 24.0);
        assert!(rel_close(got, expected, 1e-12));
        // service part ~3.171e-4 g, keep-alive part ~3.964e-3 g
        assert!(rel_close(expected, 4.2808219178e-3, 1e-9), "{expected}");
        let full = embodied_cpu(&hw, hw.lt_cpu, 0.0).unwrap();
        assert!(rel_close(full, hw.ec_cpu, 1e-12));
    }

    #[test]
    fn operational_dram_hand_arithmetic() {
        let hw = hw(Generation::New);
        let half = hw.m_dram / 2.0;
        assert_eq!(operational_dram(&hw, half, 0.01, 0.01, 0.0).unwrap(), 0.0);
        assert_eq!(operational_dram(&hw, half, 0.0, 0.0, 300.0).unwrap(), 0.0);
        let got = operational_dram(&hw, half, 0.015, 0.005, 300.0).unwrap();
        assert!(rel_close(got, 3.0, 1e-12), "got {got}");
    }

    #[test]
    fn operational_cpu_hand_arithmetic() {
        let hw = hw(Generation::New);
        let got = operational_cpu(&hw, 0.01, 0.0024, 300.0).unwrap();
        assert!(rel_close(got, 3.03, 1e-12), "got {got}");
        assert_eq!(operational_cpu(&hw, 0.01, 0.0024, 0.0).unwrap(), 0.0);
        let mut one_core = hw.clone();
        one_core.core_num = 1;
        let got = operational_cpu(&one_core, 0.0, 0.0024, 300.0).unwrap();
        assert!(rel_close(got, 0.0024 * 300.0, 1e-12));
    }

    #[test]
    fn service_carbon_cold_delta_is_coldstart_contribution() {
        let hw = hw(Generation::New);
        let f = func(1024.0);
        let warm = service_carbon(&f, &hw, false, 300.0).unwrap();
        let cold = service_carbon(&f, &hw, true, 300.0).unwrap();
        // The cold run differs from warm exactly by a 3 s service period at
        // cold-start power with no execution.
        let entry = f.on(Generation::New).unwrap();
        let extra_service = entry.coldstart;
        let emb_cpu = embodied_cpu(&hw, extra_service, 0.0).unwrap();
        let emb_dram = embodied_dram(&hw, f.mem, extra_service).unwrap();
        let op_cpu =
            operational_cpu(&hw, kwh(entry.cpu_power_cold(), extra_service), 0.0, 300.0).unwrap();
        let op_dram = operational_dram(
            &hw,
            f.mem,
            kwh(entry.dram_power_cold(), extra_service),
            0.0,
            300.0,
        )
        .unwrap();
        assert!(rel_close(cold.total - warm.total, emb_cpu + emb_dram + op_cpu + op_dram, 1e-9));
    }

    #[test]
    fn service_carbon_zero_ci_keeps_embodied() {
        let hw = hw(Generation::New);
        let f = func(1024.0);
        let b = service_carbon(&f, &hw, true, 0.0).unwrap();
        assert_eq!(b.op_cpu, 0.0);
        assert_eq!(b.op_dram, 0.0);
        assert!(b.embodied_cpu > 0.0);
        assert!(b.embodied_dram > 0.0);
        assert!(rel_close(
            b.total,
            b.embodied_cpu + b.embodied_dram,
            1e-12
        ));
    }

    #[test]
    fn keepalive_carbon_zero_duration_is_zero() {
        let hw = hw(Generation::New);
        let f = func(1024.0);
        let b = keepalive_carbon(&f, &hw, 0.0, 0.0).unwrap();
        assert_eq!(b, CarbonBreakdown::ZERO);
    }

    #[test]
    fn keepalive_carbon_constant_ci_matches_single_bucket() {
        let hw = hw(Generation::New);
        let f = func(1024.0);
        let duration = 600.0;
        let ci = 300.0;
        let got = keepalive_carbon(&f, &hw, duration, ci * duration).unwrap();
        let e_cpu = kwh(hw.keepalive_cpu_power, duration);
        let e_dram = kwh(hw.keepalive_dram_power, duration);
        let op_cpu = operational_cpu(&hw, 0.0, e_cpu, ci).unwrap();
        let op_dram = operational_dram(&hw, f.mem, 0.0, e_dram, ci).unwrap();
        assert!(rel_close(got.op_cpu, op_cpu, 1e-12));
        assert!(rel_close(got.op_dram, op_dram, 1e-12));
    }

    #[test]
    fn keepalive_carbon_split_ci_equals_mean_ci() {
        // CI 50 for the first minute, 300 for the second: the operational
        // part of a 2-minute window equals a constant-175 computation.
        let hw = hw(Generation::New);
        let f = func(1024.0);
        let series = CarbonIntensitySeries::new(0, 60_000, vec![50.0, 300.0]).unwrap();
        let integral = series.integrate(0, 120_000);
        assert!(rel_close(integral, 50.0 * 60.0 + 300.0 * 60.0, 1e-12));
        let split = keepalive_carbon(&f, &hw, 120.0, integral).unwrap();
        let mean = keepalive_carbon(&f, &hw, 120.0, 175.0 * 120.0).unwrap();
        assert!(rel_close(split.op_cpu, mean.op_cpu, 1e-12));
        assert!(rel_close(split.op_dram, mean.op_dram, 1e-12));
        assert!(rel_close(split.total, mean.total, 1e-12));
    }

    #[test]
    fn ci_series_clamps_and_steps() {
        let s = CarbonIntensitySeries::new(0, 60_000, vec![10.0, 20.0, 30.0]).unwrap();
        assert_eq!(s.at(0), 10.0);
        assert_eq!(s.at(59_999), 10.0);
        assert_eq!(s.at(60_000), 20.0);
        assert_eq!(s.at(90_000), 20.0);
        assert_eq!(s.at(10_000_000), 30.0);
        let single = CarbonIntensitySeries::new(0, 60_000, vec![42.0]).unwrap();
        assert_eq!(single.at(0), 42.0);
        assert_eq!(single.at(u64::MAX), 42.0);
    }

    #[test]
    fn ci_integration_matches_per_second_brute_force() {
        let s = CarbonIntensitySeries::new(30_000, 60_000, vec![50.0, 300.0, 120.0]).unwrap();
        for (start, end) in [(0u64, 10_000u64), (0, 250_000), (45_000, 170_500), (200_000, 400_000)]
        {
            let got = s.integrate(start, end);
            // Brute force in 1 ms steps.
            let mut acc = 0.0;
            let mut t = start;
            while t < end {
                acc += s.at(t) * 0.001;
                t += 1;
            }
            assert!(rel_close(got, acc, 1e-9), "[{start},{end}) got {got} want {acc}");
        }
    }

    #[test]
    fn breakdown_total_is_sum_of_parts() {
        let b = CarbonBreakdown::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(b.total, 10.0);
        let c = b.add(&CarbonBreakdown::new(0.5, 0.5, 0.5, 0.5));
        assert_eq!(c.total, 12.0);
    }

    #[test]
    fn hardware_profile_json_applies_defaults() {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            file.path(),
            r#"{
                "id": "old",
                "ec_cpu": 18000,
                "ec_dram": 110000,
                "core_num": 36,
                "m_dram": 524288,
                "keepalive_cpu_power": 150,
                "keepalive_dram_power": 40
            }"#,
        )
        .unwrap();
        let hw = HardwareProfile::from_json_file(file.path()).unwrap();
        assert_eq!(hw.id, Generation::Old);
        assert_eq!(hw.lt_cpu, FOUR_YEARS_S);
        assert_eq!(hw.lt_dram, FOUR_YEARS_S);
        assert_eq!(hw.extra_embodied, 0.0);
        assert_eq!(hw.extra_lifetime(), FOUR_YEARS_S);

        std::fs::write(file.path(), r#"{"id": "old", "ec_cpu": -1}"#).unwrap();
        assert!(HardwareProfile::from_json_file(file.path()).is_err());
    }

    #[test]
    fn extra_embodied_amortized_during_service_only() {
        let mut h = hw(Generation::New);
        h.extra_embodied = 10_000.0;
        let f = func(1024.0);
        let base = service_carbon(&f, &hw(Generation::New), false, 300.0).unwrap();
        let with_extra = service_carbon(&f, &h, false, 300.0).unwrap();
        let entry = f.on(Generation::New).unwrap();
        let expected = entry.exec / h.lt_cpu * 10_000.0;
        assert!(rel_close(
            with_extra.embodied_cpu - base.embodied_cpu,
            expected,
            1e-12
        ));
        // Keep-alive carbon is unaffected.
        let ka_base = keepalive_carbon(&f, &hw(Generation::New), 60.0, 300.0 * 60.0).unwrap();
        let ka_extra = keepalive_carbon(&f, &h, 60.0, 300.0 * 60.0).unwrap();
        assert_eq!(ka_base, ka_extra);
    }
}
