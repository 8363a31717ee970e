//! Shared fixtures for unit tests: a two-generation hardware pair and a
//! mid-sized function profile.

use std::collections::BTreeMap;

use crate::carbon::{Generation, HwPair};
use crate::config::default_pair;
use crate::dpso::SearchSpace;
use crate::workload::{FunctionProfile, HardwareUsage};

pub fn pair_a() -> HwPair {
    default_pair()
}

/// A 1 GiB function: 3.1 s / 5.2 s cold on old, 2.0 s / 3.9 s cold on new.
pub fn sample_function() -> FunctionProfile {
    let mut hw = BTreeMap::new();
    hw.insert(
        Generation::Old,
        HardwareUsage {
            exec: 3.1,
            coldstart: 5.2,
            cpu_power_exec: 240.0,
            dram_power_exec: 30.0,
            cpu_power_cold: None,
            dram_power_cold: None,
        },
    );
    hw.insert(
        Generation::New,
        HardwareUsage {
            exec: 2.0,
            coldstart: 3.9,
            cpu_power_exec: 190.0,
            dram_power_exec: 22.0,
            cpu_power_cold: None,
            dram_power_cold: None,
        },
    );
    FunctionProfile {
        id: "sample".into(),
        mem: 1024.0,
        hw,
    }
}

pub fn space_2x4() -> SearchSpace {
    SearchSpace::new(
        vec![Generation::Old, Generation::New],
        vec![0.0, 120.0, 300.0, 600.0],
    )
    .unwrap()
}
