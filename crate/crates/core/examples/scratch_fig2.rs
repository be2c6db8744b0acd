use optomotor::dynamics::{
    build_liouvillian, evolve, thermal_state, DissipationParams, EvolveOptions, QubitState,
};
use optomotor::hilbert::build_layout;
use optomotor::models::{build_effective_hamiltonian, EffectiveModelParams};
use optomotor::observables::{attach_derived_series, standard_observables};
use std::time::Instant;

fn smooth(v: &[f64], w: usize) -> Vec<f64> {
    let half = w / 2;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn main() {
    let d = DissipationParams {
        kappa1: 0.001,
        kappa2: 0.001,
        gamma: 0.001,
        gamma_phi: 0.01,
        n_th: 0.15,
    };
    for (name, k, j) in [("fig2a", 0.5, 1.0), ("fig2b", 0.5, 0.5)] {
        let layout = build_layout(6, 6).unwrap();
        let p = EffectiveModelParams::symmetric(1.0, 1.0, 1.0, k, j);
        let h = build_effective_hamiltonian(&p, &layout).unwrap();
        let l = build_liouvillian(&h, &d, &layout).unwrap();
        let rho0 = thermal_state(&layout, 0.15, QubitState::Excited);
        let t_grid: Vec<f64> = (0..1600).map(|i| i as f64 * 800.0 / 1599.0).collect();
        let obs = standard_observables(&layout);
        let t0 = Instant::now();
        let out = evolve(&rho0, &l, &t_grid, &obs, &EvolveOptions::default()).unwrap();
        println!("{name}: evolve took {:?}", t0.elapsed());
        let mut record = out.record;
        attach_derived_series(&mut record);
        for label in ["g2_c", "g2_d"] {
            let raw = record.get(label).unwrap().as_real().unwrap();
            for w in [33usize, 65, 101] {
                let s = smooth(raw, w);
                let max_rise = s
                    .windows(2)
                    .map(|p| p[1] - p[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                println!(
                    "  {label} w={w}: start {:.4} end {:.4} drop {:.4} max_rise {:.3e}",
                    s[0],
                    s[s.len() - 1],
                    s[0] - s[s.len() - 1],
                    max_rise
                );
            }
        }
        for label in ["z_c", "z_d", "z_c_number", "z_d_number", "sigma_z", "n_1", "n_2"] {
            let v = record.get(label).unwrap().as_real().unwrap();
            let avg: f64 = v.iter().sum::<f64>() / v.len() as f64;
            println!("  avg {label} = {avg:.5}");
        }
        for st in &out.checkpoint_states {
            if st.time_tag() == 0.0 || st.time_tag() == 800.0 {
                println!(
                    "  checkpoint t={} trace-1={:.2e} herm={:.2e} mineig={:.2e}",
                    st.time_tag(),
                    (st.trace().re - 1.0).abs(),
                    st.hermiticity_defect(),
                    st.min_eigenvalue()
                );
            }
        }
    }
}
