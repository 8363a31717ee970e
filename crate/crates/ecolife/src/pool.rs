//! Warm pools: per-generation sets of kept-alive functions under a memory
//! capacity, with priority-ranked eviction and cross-generation transfer.

use std::collections::BTreeMap;

use crate::carbon::{service_carbon, Generation, HardwareProfile};
use crate::scheduler::{Normalizers, ObjectiveWeights};
use crate::workload::FunctionProfile;
use crate::Result;

/// One kept-alive function.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub function_id: String,
    /// Memory footprint, MiB.
    pub mem: f64,
    /// Absolute simulation time at which the keep-alive window ends.
    pub expiry_ms: u64,
    pub admitted_at_ms: u64,
    /// Generation this entry currently resides on.
    pub home: Generation,
}

/// How valuable it is to keep a function warm: the service-time and carbon
/// gap between a cold and a warm start, normalized and weighted like the
/// scheduling objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityScore {
    pub function_id: String,
    pub score: f64,
    pub mem: f64,
}

/// Priority of keeping `f` warm on its designated generation at the current
/// carbon intensity. Larger is more valuable.
pub fn priority(
    f: &FunctionProfile,
    hw_old: &HardwareProfile,
    hw_new: &HardwareProfile,
    designated: Generation,
    ci: f64,
    weights: &ObjectiveWeights,
    norms: &Normalizers,
) -> Result<PriorityScore> {
    let hw = match designated {
        Generation::Old => hw_old,
        Generation::New => hw_new,
    };
    let usage = f.on(designated)?;
    let service_gap = usage.coldstart;
    let carbon_gap =
        service_carbon(f, hw, true, ci)?.total - service_carbon(f, hw, false, ci)?.total;
    let score =
        weights.lambda_s * service_gap / norms.s_max + weights.lambda_c * carbon_gap / norms.sc_max;
    Ok(PriorityScore {
        function_id: f.id.clone(),
        score,
        mem: f.mem,
    })
}

/// Outcome of [`WarmPool::insert`].
#[derive(Debug, PartialEq)]
pub enum InsertOutcome {
    Inserted,
    /// The entry does not fit; the caller should run [`adjust`].
    Overflow(PoolEntry),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictReason {
    /// Lost the priority race for the available capacity.
    Capacity,
    /// Larger than both pool capacities.
    Unplaceable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evicted {
    pub entry: PoolEntry,
    pub reason: EvictReason,
}

/// Result of a warm-pool adjustment.
#[derive(Debug, Default, PartialEq)]
pub struct AdjustOutcome {
    /// Entries that could not be kept anywhere, in decision order.
    pub evicted: Vec<Evicted>,
    /// Entries now resident on a different generation than before:
    /// (function id, new generation).
    pub transferred: Vec<(String, Generation)>,
}

/// Kept-alive functions of one generation under a memory capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmPool {
    pub generation: Generation,
    pub capacity_mib: f64,
    entries: BTreeMap<String, PoolEntry>,
}

impl WarmPool {
    pub fn new(generation: Generation, capacity_mib: f64) -> Self {
        WarmPool {
            generation,
            capacity_mib,
            entries: BTreeMap::new(),
        }
    }

    /// Memory held by current entries, MiB.
    pub fn used_mib(&self) -> f64 {
        self.entries.values().map(|e| e.mem).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, function_id: &str) -> Option<&PoolEntry> {
        self.entries.get(function_id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.values()
    }

    /// True iff the function is resident and not expired (expiry is
    /// inclusive). An expired entry encountered here is removed.
    pub fn lookup(&mut self, function_id: &str, now_ms: u64) -> bool {
        match self.entries.get(function_id) {
            Some(e) if e.expiry_ms >= now_ms => true,
            Some(_) => {
                self.entries.remove(function_id);
                false
            }
            None => false,
        }
    }

    /// Insert when the entry fits (exact fit included); otherwise hand the
    /// entry back as an overflow signal.
    pub fn insert(&mut self, entry: PoolEntry) -> InsertOutcome {
        debug_assert_eq!(entry.home, self.generation);
        debug_assert!(!self.entries.contains_key(&entry.function_id));
        if self.used_mib() + entry.mem <= self.capacity_mib {
            self.entries.insert(entry.function_id.clone(), entry);
            InsertOutcome::Inserted
        } else {
            InsertOutcome::Overflow(entry)
        }
    }

    pub fn remove(&mut self, function_id: &str) -> Option<PoolEntry> {
        self.entries.remove(function_id)
    }

    /// Drop every entry whose expiry precedes `now_ms`.
    pub fn purge_expired(&mut self, now_ms: u64) {
        self.entries.retain(|_, e| e.expiry_ms >= now_ms);
    }

    fn drain(&mut self) -> Vec<PoolEntry> {
        std::mem::take(&mut self.entries).into_values().collect()
    }

    fn restore(&mut self, entries: impl IntoIterator<Item = PoolEntry>) {
        for mut e in entries {
            e.home = self.generation;
            self.entries.insert(e.function_id.clone(), e);
        }
        debug_assert!(self.used_mib() <= self.capacity_mib);
    }
}

struct Candidate {
    entry: PoolEntry,
    priority: f64,
}

/// Admit candidates in priority order while capacity allows. Ties break to
/// the earlier `admitted_at`, then the smaller function id. Candidates that
/// do not fit are skipped, not terminal.
fn greedy_admit(mut cands: Vec<Candidate>, capacity: f64) -> (Vec<Candidate>, Vec<Candidate>) {
    cands.sort_by(|a, b| {
        b.priority
            .total_cmp(&a.priority)
            .then(a.entry.admitted_at_ms.cmp(&b.entry.admitted_at_ms))
            .then(a.entry.function_id.cmp(&b.entry.function_id))
    });
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    let mut used = 0.0;
    for c in cands {
        if used + c.entry.mem <= capacity {
            used += c.entry.mem;
            kept.push(c);
        } else {
            rejected.push(c);
        }
    }
    (kept, rejected)
}

/// Warm-pool adjustment with priority eviction and cross-generation
/// transfer.
///
/// Each pool re-ranks its residents together with the incoming candidates
/// destined for it and greedily re-admits by descending priority. Entries
/// rejected from their own pool are offered to the other pool's remaining
/// space under the same greedy rule, with priority recomputed for that
/// generation via `score`. Still-rejected entries are evicted. Transferred
/// entries keep their expiry.
pub fn adjust(
    pool_a: &mut WarmPool,
    pool_b: &mut WarmPool,
    incoming: Vec<(PoolEntry, f64)>,
    now_ms: u64,
    score: &dyn Fn(&str, Generation) -> f64,
) -> AdjustOutcome {
    pool_a.purge_expired(now_ms);
    pool_b.purge_expired(now_ms);

    let gen_a = pool_a.generation;
    let gen_b = pool_b.generation;

    let mut cand_a: Vec<Candidate> = pool_a
        .drain()
        .into_iter()
        .map(|e| Candidate {
            priority: score(&e.function_id, gen_a),
            entry: e,
        })
        .collect();
    let mut cand_b: Vec<Candidate> = pool_b
        .drain()
        .into_iter()
        .map(|e| Candidate {
            priority: score(&e.function_id, gen_b),
            entry: e,
        })
        .collect();
    for (entry, priority) in incoming {
        let c = Candidate { priority, entry };
        if c.entry.home == gen_a {
            cand_a.push(c);
        } else {
            cand_b.push(c);
        }
    }

    let (kept_a, rej_a) = greedy_admit(cand_a, pool_a.capacity_mib);
    let (kept_b, rej_b) = greedy_admit(cand_b, pool_b.capacity_mib);

    let free = |cap: f64, kept: &[Candidate]| cap - kept.iter().map(|c| c.entry.mem).sum::<f64>();

    // Rejected entries try the other generation's residual space.
    let offer = |rejects: Vec<Candidate>, to: Generation| -> Vec<Candidate> {
        rejects
            .into_iter()
            .map(|c| Candidate {
                priority: score(&c.entry.function_id, to),
                entry: c.entry,
            })
            .collect()
    };
    let (xfer_to_b, evict_a) = greedy_admit(offer(rej_a, gen_b), free(pool_b.capacity_mib, &kept_b));
    let (xfer_to_a, evict_b) = greedy_admit(offer(rej_b, gen_a), free(pool_a.capacity_mib, &kept_a));

    let mut outcome = AdjustOutcome::default();
    for c in xfer_to_a.iter() {
        outcome.transferred.push((c.entry.function_id.clone(), gen_a));
    }
    for c in xfer_to_b.iter() {
        outcome.transferred.push((c.entry.function_id.clone(), gen_b));
    }
    for c in evict_a.into_iter().chain(evict_b) {
        let reason = if c.entry.mem > pool_a.capacity_mib && c.entry.mem > pool_b.capacity_mib {
            EvictReason::Unplaceable
        } else {
            EvictReason::Capacity
        };
        outcome.evicted.push(Evicted { entry: c.entry, reason });
    }

    pool_a.restore(kept_a.into_iter().chain(xfer_to_a).map(|c| c.entry));
    pool_b.restore(kept_b.into_iter().chain(xfer_to_b).map(|c| c.entry));
    outcome
}
