use mcsc_core::io::{generate_scenario, ParamSetSpec};
use mcsc_core::model::Level;
use mcsc_core::offline::{gp_sca_offline, GpScaConfig};
use mcsc_core::quotes::build_quote_profile;
use mcsc_core::risk;
use mcsc_core::stats::RngStream;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tasks: usize = args[1].parse().unwrap();
    let workers: usize = args[2].parse().unwrap();
    let seeds: u64 = args[3].parse().unwrap();
    let mut ok = 0;
    let mut overbooked = 0;
    for seed in 0..seeds {
        let s = generate_scenario(&ParamSetSpec::set1(), tasks, workers, &RngStream::new(seed, 0))
            .unwrap();
        let q = build_quote_profile(&s).unwrap();
        let t0 = std::time::Instant::now();
        match gp_sca_offline(&s, &q, &GpScaConfig { eps: 1e-5, ..Default::default() }) {
            Ok(r) => {
                ok += 1;
                let mut over = vec![];
                for k in 0..s.num_tasks() {
                    let eq = risk::expected_task_quality(&r.profile, &q, &s, k);
                    if eq > s.tasks[k].quality_demand {
                        over.push((k, eq, s.tasks[k].quality_demand));
                    }
                }
                if !over.is_empty() {
                    overbooked += 1;
                }
                let contracts: Vec<_> = r.profile.assigned().collect();
                let n_soft = contracts.iter().filter(|(_, _, l)| *l == Level::Soft).count();
                println!(
                    "seed {seed}: ok obj {:.2} iters {} contracts {} (soft {n_soft}) over {:?} [{:.1}s]",
                    r.objective,
                    r.iterations,
                    contracts.len(),
                    over,
                    t0.elapsed().as_secs_f64()
                );
            }
            Err(e) => println!("seed {seed}: {e} [{:.1}s]", t0.elapsed().as_secs_f64()),
        }
    }
    println!("== feasible {ok}/{seeds}, overbooked {overbooked}");
}
