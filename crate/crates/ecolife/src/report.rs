//! Report emission: per-invocation records, summary JSON, CDF points, and
//! the cross-scheduler comparison table. Plot-ready CSVs, no rendering.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::carbon::Generation;
use crate::policy::PolicyKind;
use crate::sim::{MetricsRecord, RunSummary};
use crate::{Error, Result};

pub struct PolicyRun {
    pub kind: PolicyKind,
    pub records: Vec<MetricsRecord>,
    pub summary: RunSummary,
}

const RECORDS_HEADER: &str = "function_id,t_ms,location,cold,service_time_s,service_carbon_g,\
keepalive_carbon_g,keep_location,keep_duration_s";

fn write_records(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.function_id,
            r.t_ms,
            r.location,
            r.cold,
            r.service_time_s,
            r.service_carbon_g,
            r.keepalive_carbon_g,
            r.keep_location,
            r.keep_duration_s
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Read a records CSV back (round-trip counterpart of [`write_records`]).
pub fn load_records(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("records {}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let field = |idx: usize| -> Result<&str> {
            row.get(idx).ok_or(Error::Parse {
                line,
                msg: format!("missing column {idx}"),
            })
        };
        let parse_f64 = |idx: usize| -> Result<f64> {
            field(idx)?.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad float in column {idx}: {e}"),
            })
        };
        records.push(MetricsRecord {
            function_id: field(0)?.to_string(),
            t_ms: field(1)?.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad timestamp: {e}"),
            })?,
            location: field(2)?.parse::<Generation>()?,
            cold: field(3)?.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("bad cold flag: {e}"),
            })?,
            service_time_s: parse_f64(4)?,
            service_carbon_g: parse_f64(5)?,
            keepalive_carbon_g: parse_f64(6)?,
            keep_location: field(7)?.parse::<Generation>()?,
            keep_duration_s: parse_f64(8)?,
        });
    }
    Ok(records)
}

fn write_cdf(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "quantile,service_time_s,carbon_g")?;
    for p in &summary.cdf {
        writeln!(out, "{},{},{}", p.quantile, p.service_time_s, p.carbon_g)?;
    }
    out.flush()?;
    Ok(())
}

/// Emit all report files for one or more runs into `outdir`.
///
/// Per run: `records_<policy>.csv`, `summary_<policy>.json`,
/// `cdf_<policy>.csv`, plus `overhead_<policy>.json` holding the wall-clock
/// decision stats (kept out of the summary so the summary is byte-stable
/// across identical runs). With more than one run a `comparison.csv` is
/// added.
pub fn emit_report(outdir: &Path, runs: &[PolicyRun]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(outdir)?;
    let mut written = Vec::new();
    for run in runs {
        let name = run.kind.as_str();
        let records_path = outdir.join(format!("records_{name}.csv"));
        write_records(&records_path, &run.records)?;
        written.push(records_path);

        let summary_path = outdir.join(format!("summary_{name}.json"));
        let json = serde_json::to_string_pretty(&run.summary)
            .map_err(|e| Error::Config(format!("serialize summary: {e}")))?;
        std::fs::write(&summary_path, json + "\n")?;
        written.push(summary_path);

        let cdf_path = outdir.join(format!("cdf_{name}.csv"));
        write_cdf(&cdf_path, &run.summary)?;
        written.push(cdf_path);

        let overhead_path = outdir.join(format!("overhead_{name}.json"));
        let json = serde_json::to_string_pretty(&run.summary.decision_overhead)
            .map_err(|e| Error::Config(format!("serialize overhead: {e}")))?;
        std::fs::write(&overhead_path, json + "\n")?;
        written.push(overhead_path);
    }
    if runs.len() > 1 {
        let path = outdir.join("comparison.csv");
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(
            out,
            "scheduler,invocations,cold_starts,total_service_time_s,total_carbon_g,\
total_objective,evictions,warm_pool_function_minutes,contention_free"
        )?;
        for run in runs {
            let s = &run.summary;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.policy,
                s.invocations,
                s.cold_starts,
                s.total_service_time_s,
                s.total_carbon_g,
                s.total_objective,
                s.evictions,
                s.warm_pool_function_minutes,
                s.contention_free
            )?;
        }
        out.flush()?;
        written.push(path);
    }
    Ok(written)
}
