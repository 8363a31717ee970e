use std::process::ExitCode;

use clap::Parser;
use log::info;

use ecolife::config::{ensure_out_dir, Cli, RunConfig};
use ecolife::policy::{build_policy, PolicyParams};
use ecolife::report::{emit_report, PolicyRun};
use ecolife::scenario::{generate_scenario, write_scenario};
use ecolife::sim::{run, SimConfig};
use ecolife::workload::{load_ci, load_profiles, load_trace};
use ecolife::{Error, Generation};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ECOLIFE_LOG")).init();
    let cli = Cli::parse();
    let config = match RunConfig::resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::Parse { .. } | Error::Ordering { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(config: &RunConfig) -> ecolife::Result<()> {
    ensure_out_dir(&config.out)?;
    let hw = config.load_hw()?;

    let (trace, ci, profiles) = match config.scenario {
        Some(kind) => {
            let scenario = generate_scenario(kind, config.seed);
            let (t, c, p) = write_scenario(&config.out, &scenario)?;
            info!("generated scenario {kind} into {}", config.out.display());
            info!("  trace: {} / ci: {} / profiles: {}", t.display(), c.display(), p.display());
            (scenario.trace, scenario.ci, scenario.profiles)
        }
        None => {
            let trace = load_trace(config.trace.as_ref().unwrap())?;
            let ci = load_ci(config.ci.as_ref().unwrap())?;
            let profiles = load_profiles(
                config.profiles.as_ref().unwrap(),
                &[Generation::Old, Generation::New],
            )?;
            (trace, ci, profiles)
        }
    };

    let params = PolicyParams {
        weights: config.weights,
        kat: config.kat.clone(),
        particles: config.particles,
        iterations: config.iters,
        history_window: config.window,
        seed: config.seed,
        bounds: config.bounds,
        perception_response: config.perception_response,
        pool_adjustment: config.pool_adjustment,
        fixed_keepalive_s: 600.0,
    };
    let sim_config = SimConfig {
        mem_old_mib: config.mem_old_mib,
        mem_new_mib: config.mem_new_mib,
        weights: config.weights,
        kat: config.kat.clone(),
    };

    let mut runs = Vec::new();
    for kind in config.schedulers() {
        let mut policy = build_policy(kind, &trace, &profiles, &hw, &ci, &params)?;
        let (records, summary) = run(&trace, policy.as_mut(), &profiles, &hw, &ci, &sim_config)?;
        info!(
            "{kind}: {} invocations, {} cold, service {:.2} s, carbon {:.4} g, objective {:.4}, \
             {} evictions, mean decision {:.1} us",
            summary.invocations,
            summary.cold_starts,
            summary.total_service_time_s,
            summary.total_carbon_g,
            summary.total_objective,
            summary.evictions,
            summary.decision_overhead.mean_us,
        );
        println!(
            "{kind}: service_time={:.3}s carbon={:.6}g objective={:.6} cold={} evictions={}",
            summary.total_service_time_s,
            summary.total_carbon_g,
            summary.total_objective,
            summary.cold_starts,
            summary.evictions,
        );
        runs.push(PolicyRun {
            kind,
            records,
            summary,
        });
    }
    let written = emit_report(&config.out, &runs)?;
    for path in &written {
        info!("wrote {}", path.display());
    }
    Ok(())
}
