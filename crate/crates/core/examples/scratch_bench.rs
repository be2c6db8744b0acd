use optomotor::dynamics::{
    build_liouvillian, evolve, thermal_state, DissipationParams, EvolveOptions, QubitState,
};
use optomotor::hilbert::build_layout;
use optomotor::models::{build_effective_hamiltonian, EffectiveModelParams};
use optomotor::observables::standard_observables;
use std::time::Instant;

fn main() {
    let d = DissipationParams {
        kappa1: 0.001,
        kappa2: 0.001,
        gamma: 0.001,
        gamma_phi: 0.01,
        n_th: 0.15,
    };
    for (n, rtol, t_max) in [
        (6usize, 1e-8, 200.0),
        (6, 1e-9, 200.0),
        (6, 1e-9, 2000.0),
        (8, 1e-9, 200.0),
    ] {
        let layout = build_layout(n, n).unwrap();
        let p = EffectiveModelParams::symmetric(1.0, 1.0, 1.0, 0.5, 1.0);
        let h = build_effective_hamiltonian(&p, &layout).unwrap();
        println!(
            "n={n} dim={} H nnz={} |H|_inf={:.2}",
            layout.total_dim(),
            h.entries().nnz(),
            h.entries().norm_inf()
        );
        let t0 = Instant::now();
        let l = build_liouvillian(&h, &d, &layout).unwrap();
        println!(
            "  L built in {:?}, nnz={} |L|_inf={:.2}",
            t0.elapsed(),
            l.superoperator().nnz(),
            l.superoperator().norm_inf()
        );
        let rho0 = thermal_state(&layout, 0.15, QubitState::Excited);
        let n_points = 500;
        let t_grid: Vec<f64> = (0..n_points)
            .map(|i| i as f64 * t_max / (n_points - 1) as f64)
            .collect();
        let obs = standard_observables(&layout);
        let opts = EvolveOptions {
            rtol,
            atol: rtol * 0.01,
            ..Default::default()
        };
        let t0 = Instant::now();
        match evolve(&rho0, &l, &t_grid, &obs, &opts) {
            Ok(out) => {
                let el = t0.elapsed();
                let min_eig = out.final_state.min_eigenvalue();
                let tr = out.final_state.trace().re;
                println!(
                    "  evolve rtol={rtol:.0e} t_max={t_max}: {el:?}  (per unit t: {:?}), final min eig {min_eig:.3e}, tr-1 {:.3e}",
                    el / t_max as u32,
                    tr - 1.0
                );
                if let Some(g2c) = out.record.get("g2_moment_1") {
                    let m = g2c.as_real().unwrap();
                    let n1 = out.record.get("n_1").unwrap().as_real().unwrap();
                    println!(
                        "  g2_c start {:.4} end {:.4}; n1 end {:.4}",
                        m[0] / (n1[0] * n1[0]),
                        m[m.len() - 1] / (n1[n1.len() - 1] * n1[n1.len() - 1]),
                        n1[n1.len() - 1]
                    );
                }
            }
            Err(e) => println!("  evolve FAILED: {e}"),
        }
    }
}
