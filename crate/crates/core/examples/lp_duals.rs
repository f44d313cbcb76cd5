use sddp_tsto::cuts::{Cut, CutPool};
use sddp_tsto::lp::{cut_multipliers, solve, solve_with_cuts, LpProblem};

fn main() {
    // max 3a + 2b  s.t.  a + b <= 4,  a + 3b <= 6,  a <= 3
    let mut p = LpProblem::new(vec![-3.0, -2.0]);
    p.add_ub(vec![1.0, 1.0], 4.0).add_ub(vec![1.0, 3.0], 6.0);
    p.set_bounds(0, 0.0, 3.0);

    let sol = solve(&p).expect("well-formed");
    let cert = sol.certificate.expect("optimal");
    println!("status    {:?}", sol.status);
    println!("x         {:?}", sol.x);
    println!("objective {}", sol.objective);
    println!("row duals {:?}", sol.duals_ub);
    println!("reduced   {:?}", sol.reduced_costs);
    println!(
        "primal residual {:.1e}, dual residual {:.1e}, gap {:.1e}",
        cert.primal_residual, cert.dual_residual, cert.duality_gap
    );

    // the same problem with a future-cost epigraph over (a, b)
    let mut pool = CutPool::new(2, Cut::new(0.0, vec![0.0, 0.0]));
    pool.push(Cut::new(-1.0, vec![1.0, 0.5])).unwrap();
    pool.push(Cut::new(2.0, vec![-0.5, 0.0])).unwrap();
    let with_future = solve_with_cuts(&p, &pool, &[0, 1]).expect("well-formed");
    println!("\nwith cuts: x {:?}, objective {}", with_future.x, with_future.objective);
    println!("cut multipliers {:?}", cut_multipliers(&with_future, p.b_ub.len()));

    println!("\n{}", p.to_lp_format());
}
