use mcsc_core::io::{generate_scenario, ParamSetSpec};
use mcsc_core::quotes::{hard_reserve_price, local_cost_dist};
use mcsc_core::stats::RngStream;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn main() {
    let s = generate_scenario(&ParamSetSpec::set1(), 1, 6, &RngStream::new(11, 0)).unwrap();
    let mut rng = RngStream::new(104, 0).rng();
    for w in &s.workers {
        let link = s.link(w.id, 0);
        let (price, inter) = hard_reserve_price(link, w, s.delta_p).unwrap();
        let y = local_cost_dist(link, w).unwrap();
        let floor = w.lambda1 * w.min_utility;
        let theta = price - link.base_cost - floor;
        let exact = 1.0 - y.cdf(theta);
        let n = 1_000_000;
        let normal = Normal::new(y.mu(), y.sigma()).unwrap();
        let mut hits = 0usize;
        for _ in 0..n {
            let yv = loop {
                let x: f64 = normal.sample(&mut rng);
                if x >= y.lo() && x <= y.hi() { break x; }
            };
            if price - link.base_cost - yv <= floor { hits += 1; }
        }
        let mc = hits as f64 / n as f64;
        println!("worker {}: price {:.6} p_hat {:.6} theta {:.6} y=[{:.4},{:.4}] mu_y {:.4} sig_y {:.4} exact {:.6e} mc {:.6e} lambda2 {:.3}",
            w.id, price, inter.p_hat, theta, y.lo(), y.hi(), y.mu(), y.sigma(), exact, mc, w.lambda2);
    }
}
