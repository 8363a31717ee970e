//! Trace, function-profile, and carbon-intensity ingestion.
//!
//! File contracts:
//! - trace CSV: header `timestamp_ms,function_id`, UTF-8, LF endings
//! - CI CSV: header `minute,g_co2_per_kwh`, minute indices contiguous from 0
//! - profile catalog: JSON array of [`FunctionProfile`]
//!
//! Traces in other formats (e.g. the Azure production trace) are expected to
//! be converted to the two-column CSV up front; see the repository README.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carbon::{CarbonIntensitySeries, Generation};
use crate::{Error, Result};

/// Per-generation execution characteristics of a function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareUsage {
    /// Warm execution time, seconds.
    pub exec: f64,
    /// Cold-start overhead, seconds.
    pub coldstart: f64,
    /// CPU power draw during execution, watts.
    pub cpu_power_exec: f64,
    /// DRAM power draw during execution, watts.
    pub dram_power_exec: f64,
    /// CPU power during the cold-start phase; defaults to `cpu_power_exec`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_power_cold: Option<f64>,
    /// DRAM power during the cold-start phase; defaults to `dram_power_exec`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dram_power_cold: Option<f64>,
}

impl HardwareUsage {
    pub fn cpu_power_cold(&self) -> f64 {
        self.cpu_power_cold.unwrap_or(self.cpu_power_exec)
    }

    pub fn dram_power_cold(&self) -> f64 {
        self.dram_power_cold.unwrap_or(self.dram_power_exec)
    }

    fn validate(&self, fid: &str, gen: Generation) -> Result<()> {
        let ctx = |name: &str, v: f64| {
            Error::Profile(format!("function {fid} on {gen}: {name} invalid ({v})"))
        };
        if self.exec.is_nan() || self.exec <= 0.0 {
            return Err(ctx("exec", self.exec));
        }
        if self.coldstart < 0.0 {
            return Err(ctx("coldstart", self.coldstart));
        }
        for (name, v) in [
            ("cpu_power_exec", self.cpu_power_exec),
            ("dram_power_exec", self.dram_power_exec),
            ("cpu_power_cold", self.cpu_power_cold()),
            ("dram_power_cold", self.dram_power_cold()),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(ctx(name, v));
            }
        }
        Ok(())
    }
}

/// A profiled serverless function: memory footprint plus per-generation
/// execution characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionProfile {
    pub id: String,
    /// Memory footprint, MiB.
    pub mem: f64,
    /// Per-generation usage, keyed by generation label.
    pub hw: BTreeMap<Generation, HardwareUsage>,
}

impl FunctionProfile {
    /// Usage entry for a generation; profile error if the function was never
    /// profiled there.
    pub fn on(&self, gen: Generation) -> Result<&HardwareUsage> {
        self.hw.get(&gen).ok_or_else(|| {
            Error::Profile(format!(
                "function {} has no profile entry for generation {gen}",
                self.id
            ))
        })
    }

    pub fn validate(&self, required: &[Generation]) -> Result<()> {
        if self.mem.is_nan() || self.mem <= 0.0 {
            return Err(Error::Profile(format!(
                "function {}: mem must be positive",
                self.id
            )));
        }
        for gen in required {
            self.on(*gen)?.validate(&self.id, *gen)?;
        }
        for (gen, usage) in &self.hw {
            usage.validate(&self.id, *gen)?;
        }
        Ok(())
    }

    /// Representative execution time for profile matching: the mean warm
    /// execution time across profiled generations.
    pub fn mean_exec(&self) -> f64 {
        let sum: f64 = self.hw.values().map(|u| u.exec).sum();
        sum / self.hw.len() as f64
    }
}

/// Ordered invocation trace: (milliseconds since trace start, function id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvocationTrace {
    pub events: Vec<(u64, String)>,
}

impl InvocationTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Distinct function ids, in first-appearance order.
    pub fn function_ids(&self) -> Vec<&str> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for (_, fid) in &self.events {
            if seen.insert(fid.as_str()) {
                out.push(fid.as_str());
            }
        }
        out
    }
}

/// Observed shape of a trace function, used to map it onto the profiled
/// catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFunctionStats {
    pub function_id: String,
    /// Observed memory footprint, MiB.
    pub mem: f64,
    /// Observed mean execution time, seconds.
    pub mean_exec: f64,
}

/// Load and validate a trace CSV. Rows must be time-ordered; the error for
/// an ordering violation names the offending line.
pub fn load_trace(path: &Path) -> Result<InvocationTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("trace {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp_ms", "function_id"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `timestamp_ms,function_id`, got {headers:?}"),
        });
    }
    let mut events = Vec::new();
    let mut prev: Option<u64> = None;
    for (i, row) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let row = row.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if row.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 columns, got {}", row.len()),
            });
        }
        let ts: u64 = row[0].trim().parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad timestamp {:?}: {e}", &row[0]),
        })?;
        let fid = row[1].trim();
        if fid.is_empty() {
            return Err(Error::Parse { line, msg: "empty function_id".into() });
        }
        if let Some(p) = prev {
            if ts < p {
                return Err(Error::Ordering {
                    line,
                    msg: format!("timestamp {ts} precedes previous {p}"),
                });
            }
        }
        prev = Some(ts);
        events.push((ts, fid.to_string()));
    }
    Ok(InvocationTrace { events })
}

/// Write a trace in the format [`load_trace`] reads.
pub fn write_trace(path: &Path, trace: &InvocationTrace) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "timestamp_ms,function_id")?;
    for (ts, fid) in &trace.events {
        writeln!(out, "{ts},{fid}")?;
    }
    out.flush()?;
    Ok(())
}

/// Map observed trace-function stats to the closest catalog profile by
/// Euclidean distance in normalized (memory, execution-time) space. Each
/// axis is normalized by the catalog maximum; distance ties break to the
/// lexicographically smaller profile id.
pub fn match_profile<'a>(
    stats: &TraceFunctionStats,
    catalog: &'a [FunctionProfile],
) -> Result<&'a FunctionProfile> {
    if catalog.is_empty() {
        return Err(Error::Config("profile catalog is empty".into()));
    }
    let mem_max = catalog.iter().map(|p| p.mem).fold(f64::MIN, f64::max).max(f64::MIN_POSITIVE);
    let exec_max = catalog
        .iter()
        .map(|p| p.mean_exec())
        .fold(f64::MIN, f64::max)
        .max(f64::MIN_POSITIVE);
    let dist = |p: &FunctionProfile| {
        let dm = stats.mem / mem_max - p.mem / mem_max;
        let de = stats.mean_exec / exec_max - p.mean_exec() / exec_max;
        dm * dm + de * de
    };
    let mut best = &catalog[0];
    let mut best_d = dist(best);
    for p in &catalog[1..] {
        let d = dist(p);
        if d < best_d || (d == best_d && p.id < best.id) {
            best = p;
            best_d = d;
        }
    }
    Ok(best)
}

/// Load a profile catalog (JSON array), validating that each function has an
/// entry for every generation in `required`.
pub fn load_profiles(path: &Path, required: &[Generation]) -> Result<Vec<FunctionProfile>> {
    let text = std::fs::read_to_string(path)?;
    let profiles: Vec<FunctionProfile> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("profile catalog {}: {e}", path.display())))?;
    let mut seen = std::collections::BTreeSet::new();
    for p in &profiles {
        p.validate(required)?;
        if !seen.insert(p.id.clone()) {
            return Err(Error::Config(format!("duplicate profile id {}", p.id)));
        }
    }
    Ok(profiles)
}

pub fn write_profiles(path: &Path, profiles: &[FunctionProfile]) -> Result<()> {
    let text = serde_json::to_string_pretty(profiles)
        .map_err(|e| Error::Config(format!("serialize profiles: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Load a minute-resolution CI series CSV (`minute,g_co2_per_kwh`). Minute
/// indices must be contiguous from 0; values must be non-negative.
pub fn load_ci(path: &Path) -> Result<CarbonIntensitySeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("ci {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["minute", "g_co2_per_kwh"] {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `minute,g_co2_per_kwh`, got {headers:?}"),
        });
    }
    let mut values = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let minute: usize = row[0].trim().parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad minute index {:?}: {e}", &row[0]),
        })?;
        if minute != i {
            return Err(Error::Parse {
                line,
                msg: format!("minute indices must be contiguous from 0; expected {i}, got {minute}"),
            });
        }
        let value: f64 = row[1].trim().parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad carbon intensity {:?}: {e}", &row[1]),
        })?;
        if value.is_nan() || value < 0.0 {
            return Err(Error::Parse {
                line,
                msg: format!("carbon intensity must be >= 0, got {value}"),
            });
        }
        values.push(value);
    }
    CarbonIntensitySeries::new(0, 60_000, values)
}

pub fn write_ci(path: &Path, series: &CarbonIntensitySeries) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "minute,g_co2_per_kwh")?;
    for (i, v) in series.values.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn profile(id: &str, mem: f64, exec: f64) -> FunctionProfile {
        let usage = HardwareUsage {
            exec,
            coldstart: 1.0,
            cpu_power_exec: 200.0,
            dram_power_exec: 20.0,
            cpu_power_cold: None,
            dram_power_cold: None,
        };
        let mut hw = BTreeMap::new();
        hw.insert(Generation::Old, usage.clone());
        hw.insert(Generation::New, usage);
        FunctionProfile { id: id.into(), mem, hw }
    }

    #[test]
    fn empty_trace_is_valid() {
        let f = tmp("timestamp_ms,function_id\n");
        let trace = load_trace(f.path()).unwrap();
        assert!(trace.is_empty());
    }

    #[test]
    fn two_row_trace_round_trips() {
        let f = tmp("timestamp_ms,function_id\n0,f1\n60000,f1\n");
        let trace = load_trace(f.path()).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(trace.events[1], (60_000, "f1".to_string()));
        let out = tempfile::NamedTempFile::new().unwrap();
        write_trace(out.path(), &trace).unwrap();
        let reloaded = load_trace(out.path()).unwrap();
        assert_eq!(trace, reloaded);
    }

    #[test]
    fn out_of_order_trace_names_line() {
        let f = tmp("timestamp_ms,function_id\n0,f1\n60000,f1\n30000,f2\n");
        match load_trace(f.path()) {
            Err(Error::Ordering { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected ordering error, got {other:?}"),
        }
    }

    #[test]
    fn match_profile_exact_hit() {
        let catalog = vec![profile("a", 100.0, 1.0), profile("b", 500.0, 4.0)];
        let stats = TraceFunctionStats {
            function_id: "t".into(),
            mem: 500.0,
            mean_exec: 4.0,
        };
        assert_eq!(match_profile(&stats, &catalog).unwrap().id, "b");
    }

    #[test]
    fn match_profile_tie_breaks_lexicographically() {
        // gamma only widens the normalization axes; beta and alpha are
        // exactly equidistant (ratios 0.25 vs 0.75 around 0.5, all exact in
        // binary) and the tie goes to the lexicographically smaller id.
        let catalog = vec![
            profile("beta", 100.0, 2.0),
            profile("alpha", 300.0, 2.0),
            profile("gamma", 400.0, 10.0),
        ];
        let stats = TraceFunctionStats {
            function_id: "t".into(),
            mem: 200.0,
            mean_exec: 2.0,
        };
        assert_eq!(match_profile(&stats, &catalog).unwrap().id, "alpha");
    }

    #[test]
    fn match_profile_agrees_with_brute_force_scan() {
        let catalog = vec![
            profile("a", 128.0, 0.5),
            profile("b", 1024.0, 3.0),
            profile("c", 2048.0, 8.0),
        ];
        let mem_max = 2048.0;
        let exec_max = 8.0;
        for (mem, exec) in [(96.0, 0.4), (900.0, 3.5), (1600.0, 6.0), (2000.0, 1.0)] {
            let stats = TraceFunctionStats {
                function_id: "t".into(),
                mem,
                mean_exec: exec,
            };
            let got = match_profile(&stats, &catalog).unwrap();
            // Independent nearest-neighbor scan.
            let want = catalog
                .iter()
                .min_by(|p, q| {
                    let d = |p: &FunctionProfile| {
                        ((mem - p.mem) / mem_max).powi(2)
                            + ((exec - p.mean_exec()) / exec_max).powi(2)
                    };
                    d(p).partial_cmp(&d(q)).unwrap()
                })
                .unwrap();
            assert_eq!(got.id, want.id);
        }
    }

    #[test]
    fn match_profile_rejects_empty_catalog() {
        let stats = TraceFunctionStats {
            function_id: "t".into(),
            mem: 1.0,
            mean_exec: 1.0,
        };
        assert!(matches!(match_profile(&stats, &[]), Err(Error::Config(_))));
    }

    #[test]
    fn ci_loader_step_semantics() {
        let f = tmp("minute,g_co2_per_kwh\n0,50\n1,300\n2,120\n");
        let s = load_ci(f.path()).unwrap();
        assert_eq!(s.at(30_000), 50.0);
        assert_eq!(s.at(90_000), 300.0);
        assert_eq!(s.at(10_000_000), 120.0);
        let single = load_ci(tmp("minute,g_co2_per_kwh\n0,75\n").path()).unwrap();
        assert_eq!(single.at(0), 75.0);
        assert_eq!(single.at(99_999_999), 75.0);
    }

    #[test]
    fn ci_loader_rejects_negative_and_gaps() {
        let f = tmp("minute,g_co2_per_kwh\n0,50\n1,-3\n");
        assert!(matches!(load_ci(f.path()), Err(Error::Parse { line: 3, .. })));
        let g = tmp("minute,g_co2_per_kwh\n0,50\n2,60\n");
        assert!(matches!(load_ci(g.path()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn profiles_round_trip() {
        let catalog = vec![profile("a", 128.0, 0.5), profile("b", 1024.0, 3.0)];
        let out = tempfile::NamedTempFile::new().unwrap();
        write_profiles(out.path(), &catalog).unwrap();
        let loaded =
            load_profiles(out.path(), &[Generation::Old, Generation::New]).unwrap();
        assert_eq!(catalog, loaded);
    }
}
