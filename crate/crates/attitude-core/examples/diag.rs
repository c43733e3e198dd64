use std::collections::BTreeMap;

use attitude_core::harness::{ensemble_summary, run_experiment, summarize, ExperimentConfig};

fn main() {
    let exp = ExperimentConfig::benchmark_preset();
    let t0 = std::time::Instant::now();
    let runs = run_experiment(&exp).expect("run");
    println!("elapsed: {:.2?}  runs: {}", t0.elapsed(), runs.len());

    let mut by_label: BTreeMap<String, Vec<&attitude_core::harness::RunResult>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in &runs {
        if !by_label.contains_key(&r.label) {
            order.push(r.label.clone());
        }
        by_label.entry(r.label.clone()).or_default().push(r);
    }

    for label in order {
        let group = &by_label[&label];
        let mut sums = Vec::new();
        let mut viol = 0u64;
        let mut unst = 0u64;
        let mut fails = Vec::new();
        let mut env_seeds_ok = 0usize;
        let mut env_seeds = 0usize;
        for r in group.iter() {
            viol += r.funnel_violations;
            unst += r.unstable_events;
            if let Some(f) = &r.failure {
                fails.push(format!("seed {}: {}", r.seed, f));
            }
            if let Some(env) = &r.envelope {
                env_seeds += 1;
                let ok = r
                    .samples
                    .iter()
                    .zip(env.iter())
                    .all(|(s, e)| s.dist < *e);
                if ok && r.samples.len() == env.len() {
                    env_seeds_ok += 1;
                }
            }
            match summarize(r, exp.stats_window) {
                Ok(s) => sums.push(s),
                Err(e) => fails.push(format!("seed {}: summarize: {e}", r.seed)),
            }
        }
        match ensemble_summary(&label, &sums) {
            Ok(e) => {
                print!(
                    "{:<18} mean={:<11.6} std={:<11.6} inf={:<11.6} viol={:<5} unst={:<3} verdict={:?}",
                    e.label, e.mean_dist, e.std_dist, e.inf_dist, viol, unst, e.verdict
                );
                if env_seeds > 0 {
                    print!("  env {}/{}", env_seeds_ok, env_seeds);
                }
                println!();
            }
            Err(e) => println!("{label:<18} ensemble failed: {e}"),
        }
        for f in fails {
            println!("    FAIL {f}");
        }
    }
}
