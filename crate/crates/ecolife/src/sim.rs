//! Deterministic trace-driven simulation engine.
//!
//! The engine replays invocation events in (time, kind, function) order and
//! drives a [`Policy`] for every invocation. It owns the warm pools and all
//! carbon/service accounting; policies only decide where a function
//! executes and where/how long it is kept alive.
//!
//! Keep-alive accounting is *realized*, not budgeted: a window accrues
//! carbon from its opening invocation until re-invocation, eviction, or its
//! natural expiry, whichever comes first. Keep-alive expiry events are
//! never materialized in the queue — expiry is checked lazily on lookup and
//! at pool adjustment, which is observationally identical.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::carbon::{service_carbon, keepalive_carbon, CarbonIntensitySeries, Generation, HwPair};
use crate::dpso::SearchSpace;
use crate::policy::PolicyKind;
use crate::pool::{self, InsertOutcome, PoolEntry, WarmPool};
use crate::scheduler::{normalizers, Decision, Normalizers, ObjectiveWeights};
use crate::workload::{FunctionProfile, InvocationTrace};
use crate::{Error, Result};

/// Engine event kinds. Expiries sort before invocations at equal time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    KeepaliveExpiry,
    Invocation,
}

/// One engine event, ordered by (time, kind, function id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub time_ms: u64,
    pub kind: EventKind,
    pub function_id: String,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time_ms
            .cmp(&other.time_ms)
            .then(self.kind.cmp(&other.kind))
            .then(self.function_id.cmp(&other.function_id))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// The trace as a canonically ordered invocation event list.
pub fn sorted_events(trace: &InvocationTrace) -> Vec<Event> {
    let mut events: Vec<Event> = trace
        .events
        .iter()
        .map(|(t, fid)| Event {
            time_ms: *t,
            kind: EventKind::Invocation,
            function_id: fid.clone(),
        })
        .collect();
    events.sort();
    events
}

/// What the engine tells a policy about the invocation at hand.
pub struct InvocationCtx<'a> {
    pub now_ms: u64,
    pub function: &'a FunctionProfile,
    pub ci_now: f64,
    pub warm_old: bool,
    pub warm_new: bool,
}

/// A policy's answer: where to execute now, and the keep-alive decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub exec_location: Generation,
    pub decision: Decision,
}

/// The scheduling-policy interface shared by the main scheduler, the
/// baselines, and the clairvoyant bounds.
pub trait Policy {
    fn kind(&self) -> PolicyKind;

    /// Locations this policy may place executions and keep-alives on.
    fn locations(&self) -> &[Generation];

    /// Clairvoyant bounds ignore pool memory contention entirely; their
    /// summaries are flagged.
    fn contention_free(&self) -> bool {
        false
    }

    /// Weights used for priority scoring when this policy wants warm-pool
    /// adjustment on overflow; `None` means overflowing entries are simply
    /// refused.
    fn pool_adjustment(&self) -> Option<ObjectiveWeights> {
        None
    }

    fn on_invocation(&mut self, ctx: &InvocationCtx<'_>) -> Result<Placement>;
}

/// One per-invocation accounting row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub function_id: String,
    pub t_ms: u64,
    pub location: Generation,
    pub cold: bool,
    pub service_time_s: f64,
    pub service_carbon_g: f64,
    /// Keep-alive carbon of the window this invocation opened (attributed
    /// when the window closes).
    pub keepalive_carbon_g: f64,
    pub keep_location: Generation,
    pub keep_duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfPoint {
    /// Percentile in 1..=100.
    pub quantile: u32,
    pub service_time_s: f64,
    pub carbon_g: f64,
}

/// Wall-clock decision overhead. Excluded from the deterministic summary
/// file and reported separately, since wall times vary run to run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct OverheadStats {
    pub mean_us: f64,
    pub p95_us: f64,
    pub max_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub policy: String,
    pub invocations: usize,
    pub cold_starts: usize,
    pub total_service_time_s: f64,
    pub mean_service_time_s: f64,
    /// Service plus attributed keep-alive carbon.
    pub total_carbon_g: f64,
    pub mean_carbon_g: f64,
    pub total_service_carbon_g: f64,
    pub total_keepalive_carbon_g: f64,
    /// The weighted three-term objective realized over the run, accounted
    /// with policy-independent normalizers.
    pub total_objective: f64,
    pub service_time_p50_s: f64,
    pub service_time_p95_s: f64,
    pub service_time_p99_s: f64,
    pub carbon_p50_g: f64,
    pub carbon_p95_g: f64,
    pub carbon_p99_g: f64,
    pub evictions: usize,
    /// Realized warm residency across all functions, minutes.
    pub warm_pool_function_minutes: f64,
    /// True for clairvoyant bounds that ignore pool memory contention.
    pub contention_free: bool,
    pub cdf: Vec<CdfPoint>,
    #[serde(skip)]
    pub decision_overhead: OverheadStats,
}

/// Nearest-rank percentile of a pre-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Aggregate per-invocation records into totals, means, percentiles, and a
/// 100-point CDF. Engine-level fields (objective, evictions, overhead,
/// warm minutes) are filled by [`run`].
pub fn summarize(records: &[MetricsRecord]) -> RunSummary {
    let n = records.len();
    let mut service: Vec<f64> = records.iter().map(|r| r.service_time_s).collect();
    let mut carbon: Vec<f64> = records
        .iter()
        .map(|r| r.service_carbon_g + r.keepalive_carbon_g)
        .collect();
    let total_service_time: f64 = service.iter().sum();
    let total_service_carbon: f64 = records.iter().map(|r| r.service_carbon_g).sum();
    let total_keepalive_carbon: f64 = records.iter().map(|r| r.keepalive_carbon_g).sum();
    let total_carbon: f64 = carbon.iter().sum();
    service.sort_by(f64::total_cmp);
    carbon.sort_by(f64::total_cmp);
    let cdf = (1..=100)
        .map(|q| CdfPoint {
            quantile: q,
            service_time_s: percentile(&service, q as f64),
            carbon_g: percentile(&carbon, q as f64),
        })
        .collect();
    let mean = |total: f64| if n == 0 { 0.0 } else { total / n as f64 };
    RunSummary {
        policy: String::new(),
        invocations: n,
        cold_starts: records.iter().filter(|r| r.cold).count(),
        total_service_time_s: total_service_time,
        mean_service_time_s: mean(total_service_time),
        total_carbon_g: total_carbon,
        mean_carbon_g: mean(total_carbon),
        total_service_carbon_g: total_service_carbon,
        total_keepalive_carbon_g: total_keepalive_carbon,
        total_objective: 0.0,
        service_time_p50_s: percentile(&service, 50.0),
        service_time_p95_s: percentile(&service, 95.0),
        service_time_p99_s: percentile(&service, 99.0),
        carbon_p50_g: percentile(&carbon, 50.0),
        carbon_p95_g: percentile(&carbon, 95.0),
        carbon_p99_g: percentile(&carbon, 99.0),
        evictions: 0,
        warm_pool_function_minutes: 0.0,
        contention_free: false,
        cdf,
        decision_overhead: OverheadStats::default(),
    }
}

/// Engine-level knobs: pool capacities and the canonical decision space
/// used for objective accounting.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mem_old_mib: f64,
    pub mem_new_mib: f64,
    /// Weights for the realized-objective accounting and pool priorities.
    pub weights: ObjectiveWeights,
    /// Canonical keep-alive grid (used for accounting normalizers; policies
    /// carry their own, possibly restricted, space).
    pub kat: Vec<f64>,
}

/// One open keep-alive window: location segments accruing carbon until the
/// window closes.
struct OpenWindow {
    record_idx: usize,
    opened_ms: u64,
    k_s: f64,
    kc_max: f64,
    /// (location, segment start). A new segment is pushed when the entry is
    /// transferred across generations.
    segments: Vec<(Generation, u64)>,
}

impl OpenWindow {
    fn expiry_ms(&self) -> u64 {
        self.opened_ms + (self.k_s * 1000.0).round() as u64
    }
}

struct Engine<'a> {
    profiles: &'a BTreeMap<String, FunctionProfile>,
    hw: &'a HwPair,
    ci: &'a CarbonIntensitySeries,
    weights: ObjectiveWeights,
    space: SearchSpace,
    pool_old: WarmPool,
    pool_new: WarmPool,
    windows: BTreeMap<String, OpenWindow>,
    /// Normalizers of the decision governing a function's next invocation.
    prev_norms: BTreeMap<String, Normalizers>,
    records: Vec<MetricsRecord>,
    total_objective: f64,
    evictions: usize,
    warm_seconds: f64,
}

impl<'a> Engine<'a> {
    fn pool_mut(&mut self, gen: Generation) -> &mut WarmPool {
        match gen {
            Generation::Old => &mut self.pool_old,
            Generation::New => &mut self.pool_new,
        }
    }

    /// Close a window at `end_ms` (clamped to its natural expiry), accruing
    /// keep-alive carbon per location segment.
    fn close_window(&mut self, fid: &str, end_ms: u64) -> Result<()> {
        let Some(w) = self.windows.remove(fid) else {
            return Ok(());
        };
        let end = end_ms.min(w.expiry_ms());
        let f = &self.profiles[fid];
        let mut kc = 0.0;
        for (i, (loc, seg_start)) in w.segments.iter().enumerate() {
            let seg_end = w
                .segments
                .get(i + 1)
                .map(|(_, s)| *s)
                .unwrap_or(end)
                .min(end);
            if seg_end <= *seg_start {
                continue;
            }
            let duration_s = (seg_end - seg_start) as f64 / 1000.0;
            let integral = self.ci.integrate(*seg_start, seg_end);
            kc += keepalive_carbon(f, self.hw.get(*loc), duration_s, integral)?.total;
        }
        self.records[w.record_idx].keepalive_carbon_g = kc;
        self.total_objective += self.weights.lambda_c * kc / w.kc_max;
        self.warm_seconds += (end.saturating_sub(w.opened_ms)) as f64 / 1000.0;
        Ok(())
    }

    fn check_invariants(&self, now_ms: u64) {
        debug_assert!(self.pool_old.used_mib() <= self.pool_old.capacity_mib + 1e-9);
        debug_assert!(self.pool_new.used_mib() <= self.pool_new.capacity_mib + 1e-9);
        for e in self.pool_old.entries() {
            debug_assert!(
                self.pool_new.get(&e.function_id).is_none(),
                "function {} resident in both pools at {}",
                e.function_id,
                now_ms
            );
        }
    }
}

/// Replay a trace against a policy with full accounting.
pub fn run(
    trace: &InvocationTrace,
    policy: &mut dyn Policy,
    profiles: &[FunctionProfile],
    hw: &HwPair,
    ci: &CarbonIntensitySeries,
    cfg: &SimConfig,
) -> Result<(Vec<MetricsRecord>, RunSummary)> {
    ci.validate()?;
    let catalog: BTreeMap<String, FunctionProfile> = profiles
        .iter()
        .map(|p| (p.id.clone(), p.clone()))
        .collect();
    for fid in trace.function_ids() {
        let p = catalog.get(fid).ok_or_else(|| {
            Error::Config(format!("trace references unknown function {fid:?}"))
        })?;
        p.validate(&[Generation::Old, Generation::New])?;
    }
    let space = SearchSpace::new(vec![Generation::Old, Generation::New], cfg.kat.clone())?;

    let mut engine = Engine {
        profiles: &catalog,
        hw,
        ci,
        weights: cfg.weights,
        space,
        pool_old: WarmPool::new(Generation::Old, cfg.mem_old_mib),
        pool_new: WarmPool::new(Generation::New, cfg.mem_new_mib),
        windows: BTreeMap::new(),
        prev_norms: BTreeMap::new(),
        records: Vec::with_capacity(trace.len()),
        total_objective: 0.0,
        evictions: 0,
        warm_seconds: 0.0,
    };
    let contention_free = policy.contention_free();
    let mut decision_us: Vec<f64> = Vec::with_capacity(trace.len());

    for event in sorted_events(trace) {
        let now = event.time_ms;
        let fid = event.function_id.as_str();
        let f = &engine.profiles[fid];
        let ci_now = ci.at(now);

        // Warmth: from the open window for contention-free policies, from
        // the pools otherwise (lookup lazily drops expired entries).
        let (warm_old, warm_new) = if contention_free {
            match engine.windows.get(fid) {
                Some(w) if now <= w.expiry_ms() => {
                    let loc = w.segments.last().unwrap().0;
                    (loc == Generation::Old, loc == Generation::New)
                }
                _ => (false, false),
            }
        } else {
            (
                engine.pool_old.lookup(fid, now),
                engine.pool_new.lookup(fid, now),
            )
        };

        let ctx = InvocationCtx {
            now_ms: now,
            function: f,
            ci_now,
            warm_old,
            warm_new,
        };
        let started = Instant::now();
        let placement = policy.on_invocation(&ctx)?;
        decision_us.push(started.elapsed().as_secs_f64() * 1e6);

        let exec_loc = placement.exec_location;
        let warm_here = match exec_loc {
            Generation::Old => warm_old,
            Generation::New => warm_new,
        };
        let cold = !warm_here;
        let usage = f.on(exec_loc)?;
        let service_time = usage.exec + if cold { usage.coldstart } else { 0.0 };
        let breakdown = service_carbon(f, hw.get(exec_loc), cold, ci_now)?;

        // This invocation's service terms are normalized by the decision
        // that governed it: the previous invocation's normalizers, or this
        // instant's for a first invocation.
        let govern = match engine.prev_norms.get(fid) {
            Some(n) => *n,
            None => normalizers(f, hw, &engine.space, ci_now)?,
        };
        engine.total_objective += engine.weights.lambda_s * service_time / govern.s_max
            + engine.weights.lambda_c * breakdown.total / govern.sc_max;

        // The previous keep-alive window of this function ends now at the
        // latest (earlier if it already expired).
        engine.close_window(fid, now)?;

        let decision = placement.decision;
        engine.records.push(MetricsRecord {
            function_id: fid.to_string(),
            t_ms: now,
            location: exec_loc,
            cold,
            service_time_s: service_time,
            service_carbon_g: breakdown.total,
            keepalive_carbon_g: 0.0,
            keep_location: decision.keep_location,
            keep_duration_s: decision.keep_duration_s,
        });
        let record_idx = engine.records.len() - 1;

        // Normalizers at this decision instant govern the next invocation
        // and this window's keep-alive term.
        let norms_now = normalizers(f, hw, &engine.space, ci_now)?;
        engine.prev_norms.insert(fid.to_string(), norms_now);

        let k = decision.keep_duration_s;
        if contention_free {
            if k > 0.0 {
                engine.windows.insert(
                    fid.to_string(),
                    OpenWindow {
                        record_idx,
                        opened_ms: now,
                        k_s: k,
                        kc_max: norms_now.kc_max,
                        segments: vec![(decision.keep_location, now)],
                    },
                );
            }
            continue;
        }

        // Contended path: the old entry was consumed by this invocation.
        engine.pool_old.remove(fid);
        engine.pool_new.remove(fid);
        if k > 0.0 {
            let entry = PoolEntry {
                function_id: fid.to_string(),
                mem: f.mem,
                expiry_ms: now + (k * 1000.0).round() as u64,
                admitted_at_ms: now,
                home: decision.keep_location,
            };
            let mut window = Some(OpenWindow {
                record_idx,
                opened_ms: now,
                k_s: k,
                kc_max: norms_now.kc_max,
                segments: vec![(decision.keep_location, now)],
            });
            match engine.pool_mut(decision.keep_location).insert(entry) {
                InsertOutcome::Inserted => {}
                InsertOutcome::Overflow(entry) => {
                    if let Some(adj_weights) = policy.pool_adjustment() {
                        let incoming_priority = pool::priority(
                            f,
                            &hw.old,
                            &hw.new,
                            decision.keep_location,
                            ci_now,
                            &adj_weights,
                            &norms_now,
                        )?
                        .score;
                        // The score closure captures only shared inputs, so
                        // the pools can be borrowed mutably alongside it.
                        let profiles = engine.profiles;
                        let space = engine.space.clone();
                        let score = move |fid2: &str, g: Generation| {
                            let f2 = &profiles[fid2];
                            let norms = normalizers(f2, hw, &space, ci_now)
                                .expect("normalizers for validated profile");
                            pool::priority(f2, &hw.old, &hw.new, g, ci_now, &adj_weights, &norms)
                                .expect("priority for validated profile")
                                .score
                        };
                        let single_gen = policy.locations().len() == 1;
                        let outcome = if single_gen {
                            // Single-generation policies never transfer to
                            // the other pool.
                            let gen = decision.keep_location;
                            let mut phantom = WarmPool::new(gen.other(), 0.0);
                            let target = match gen {
                                Generation::Old => &mut engine.pool_old,
                                Generation::New => &mut engine.pool_new,
                            };
                            let out = pool::adjust(
                                target,
                                &mut phantom,
                                vec![(entry, incoming_priority)],
                                now,
                                &score,
                            );
                            debug_assert!(phantom.is_empty());
                            out
                        } else {
                            pool::adjust(
                                &mut engine.pool_old,
                                &mut engine.pool_new,
                                vec![(entry, incoming_priority)],
                                now,
                                &score,
                            )
                        };
                        for (fid2, to) in &outcome.transferred {
                            if fid2 == fid {
                                if let Some(w) = window.as_mut() {
                                    w.segments = vec![(*to, now)];
                                }
                            } else if let Some(w) = engine.windows.get_mut(fid2) {
                                w.segments.push((*to, now));
                            }
                        }
                        for ev in &outcome.evicted {
                            engine.evictions += 1;
                            if ev.entry.function_id == fid {
                                window = None;
                            } else {
                                engine.close_window(&ev.entry.function_id, now)?;
                            }
                        }
                    } else {
                        // No adjustment: the incoming entry is refused.
                        engine.evictions += 1;
                        window = None;
                    }
                }
            }
            if let Some(w) = window {
                engine.windows.insert(fid.to_string(), w);
            }
        }
        engine.check_invariants(now);
    }

    // Remaining windows run their full keep-alive duration.
    let open: Vec<String> = engine.windows.keys().cloned().collect();
    for fid in open {
        engine.close_window(&fid, u64::MAX)?;
    }

    let mut summary = summarize(&engine.records);
    summary.policy = policy.kind().to_string();
    summary.total_objective = engine.total_objective;
    summary.evictions = engine.evictions;
    summary.warm_pool_function_minutes = engine.warm_seconds / 60.0;
    summary.contention_free = contention_free;
    decision_us.sort_by(f64::total_cmp);
    if !decision_us.is_empty() {
        summary.decision_overhead = OverheadStats {
            mean_us: decision_us.iter().sum::<f64>() / decision_us.len() as f64,
            p95_us: percentile(&decision_us, 95.0),
            max_us: *decision_us.last().unwrap(),
        };
    }
    Ok((engine.records, summary))
}
