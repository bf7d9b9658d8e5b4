use obm::{gen_random, solve_exact, run_greedy, RandomParams, SolveLimits};

fn main() {
    let params = RandomParams { u_count: 8, v_count: 25, mean_degree: 5.0, capacity_range: (20.0, 40.0), load_range: (1.0, 4.0), rate_range: (0.08, 0.12) };
    let inst = gen_random(72, &params).unwrap();
    let opt = solve_exact(&inst, false, &SolveLimits { max_nodes: Some(2_000_000_000), max_time: None }).unwrap();
    let greedy = run_greedy(&inst, false);
    // root bound components
    let round_sum: f64 = inst.arrivals().iter().map(|a| a.values().cloned().fold(0.0f64, f64::max)).sum();
    let node_sum: f64 = (0..inst.u_count()).map(|u| {
        let s: f64 = inst.arrivals().iter().filter_map(|a| a.get(&u)).sum();
        s.min(inst.budgets()[u])
    }).sum();
    println!("kappa {:.3}", inst.bid_budget_ratio());
    println!("OPT {:.6} ({} nodes), greedy {:.6}", opt.value, opt.nodes_explored, greedy.total_reward);
    println!("round bound {round_sum:.6}  node bound {node_sum:.6}");
    println!("budgets {:?}", inst.budgets().iter().map(|b| (b*100.0).round()/100.0).collect::<Vec<_>>());
}
