//! Runs the sim pipeline over a range of master seeds and prints, per seed,
//! the selected and baseline designs with their stress-test gains.
//!
//! `cargo run --release --example seed_sweep -- [first_seed] [count]`; set
//! `SWEEP_CONFIG` to a JSON config file to override the sim defaults.

use hubnet::config::RunConfig;
use hubnet::pipeline::{load_inputs, run_in_memory};

fn main() -> hubnet::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let first = args.first().copied().unwrap_or(1);
    let count = args.get(1).copied().unwrap_or(20);
    let cfg = match std::env::var("SWEEP_CONFIG") {
        Ok(path) => RunConfig::load(std::path::Path::new(&path))?,
        Err(_) => RunConfig::sim_default(),
    };
    println!("seed,selected,baseline,cap_sel,cap_base,cvar_red_pct,hold_gain_pp,service_gain_pp,cost_prem_pct,p_best,hold_sel,hold_base");
    let (mut cap_ok, mut cvar_ok, mut best_ok) = (0, 0, 0);
    let mut hold_gains = Vec::new();
    for seed in first..first + count {
        let inputs = load_inputs(&cfg, seed)?;
        let p = run_in_memory(&cfg, &inputs, seed)?;
        let (s, b) = (&p.designs[p.selected()], &p.designs[p.baseline_index()]);
        let rep = p.comparison.as_ref().expect("stress ran");
        let g = &rep.gains[0];
        cap_ok += usize::from(s.capacity_multiplier >= b.capacity_multiplier);
        cvar_ok += usize::from(g.cvar_reduction_pct > 0.0);
        best_ok += usize::from(p.selected_scenario_best() > 0.5);
        hold_gains.push(g.hold_gain_pp);
        println!(
            "{seed},{},{},{:.2},{:.2},{:.3},{:.2},{:.2},{:.3},{:.3},{:.3},{:.3}",
            s.label,
            b.label,
            s.capacity_multiplier,
            b.capacity_multiplier,
            g.cvar_reduction_pct,
            g.hold_gain_pp,
            g.service_gain_pp,
            g.cost_premium_pct,
            p.selected_scenario_best(),
            rep.methods[0].summary.hold_reliability,
            rep.methods[1].summary.hold_reliability,
        );
    }
    println!(
        "# cap>=baseline {cap_ok}/{count}, cvar reduction>0 {cvar_ok}/{count}, median hold gain {:.2} pp, scenario-best>0.5 {best_ok}/{count}",
        hubnet::stats::median(&hold_gains)
    );
    Ok(())
}
