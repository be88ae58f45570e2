use mcsc_core::gp;
use mcsc_core::io::{generate_scenario, ParamSetSpec};
use mcsc_core::offline::{init_point_debug, InitStrategy};
use mcsc_core::quotes::build_quote_profile;
use mcsc_core::stats::RngStream;

fn main() {
    let s = generate_scenario(&ParamSetSpec::set1(), 2, 5, &RngStream::new(0, 0)).unwrap();
    let q = build_quote_profile(&s).unwrap();
    let instance = gp::offline_instance(&s, &q);
    println!("caps: {:?}", instance.budget_cap);
    println!("floors: {:?}", instance.quality_floor);
    println!(
        "best soft ratios per worker: {:?}",
        (0..5)
            .map(|i| {
                let e = instance.entry(i, 0, mcsc_core::model::Level::Soft);
                (instance.quality_coef[e], instance.pay_coef[e])
            })
            .collect::<Vec<_>>()
    );
    for strat in [InitStrategy::Uniform, InitStrategy::Greedy, InitStrategy::Random(0)] {
        let raw = init_point_debug(&instance, strat);
        let (x0, y0) = gp::interior_lift(&instance, &raw);
        println!("--- {strat:?}: raw quality {:.3}", instance.objective(&raw));
        let program = instance.build_program(&x0, y0).unwrap();
        let mut z0: Vec<f64> = x0.iter().map(|v| v.ln()).collect();
        z0.push(y0.ln());
        println!("  max violation at init: {:.4}", program.max_violation(&z0));
        match gp::solve_convex_subproblem(&program, &z0) {
            Ok(sol) => println!(
                "  subproblem ok: viol {:.2e}, kkt {:.2e}, steps {}",
                sol.max_violation, sol.kkt_residual, sol.newton_steps
            ),
            Err(e) => println!("  subproblem err: {e}"),
        }
        match gp::sca_solve(&instance, &x0, y0, 1e-4, 200) {
            Ok(st) => println!(
                "  sca ok: iters {}, quality {:.3}, y last {:.5}",
                st.iterations,
                st.quality(),
                st.y
            ),
            Err(e) => println!("  sca err: {e}"),
        }
    }
}
