use optomech::evolution::ProtocolOptions;
use optomech::{run_protocol, ModelParams, Protocol, ProtocolRun};
use rayon::prelude::*;

fn ramp_params() -> ModelParams {
    ModelParams {
        delta_a: -0.5,
        delta_b: -0.4,
        g_a: 0.05,
        g_b: -0.05,
        kappa_a: 1e-5,
        kappa_b: 1e-5,
        gamma: 1e-5,
        nbar_a: 0.0,
        nbar_b: 0.04,
        nbar_c: 0.1,
        five_mode: None,
    }
}

fn drift(run: &ProtocolRun) -> f64 {
    let pol = &run.trajectory.polariton[run.ramp_start..=run.ramp_end];
    let first = pol[0];
    pol.iter()
        .map(|n| (n[0] - first[0]).abs().max((n[1] - first[1]).abs()))
        .fold(0.0, f64::max)
        / first[1]
}

#[test]
fn polariton_drift_falls_as_the_ramp_slows() {
    let p = ramp_params();
    let tau_min = 1.0 / (4.0 * (p.g_a * p.g_b).abs());
    let drifts: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .par_iter()
        .map(|&m| {
            let protocol = Protocol::new(100.0, m * tau_min, 100.0, -0.5, -0.3).unwrap();
            drift(&run_protocol(&protocol, &p, None, &ProtocolOptions::default()).unwrap())
        })
        .collect();
    println!("drift at 0.5, 1, 2, 4 x tau_min: {drifts:?}");
    assert!(drifts.windows(2).all(|w| w[1] < w[0]), "{drifts:?}");
}

#[test]
fn feasibility_is_reported_for_short_ramps() {
    let p = ramp_params();
    let protocol = Protocol::new(100.0, 50.0, 100.0, -0.5, -0.3).unwrap();
    let run = run_protocol(&protocol, &p, None, &ProtocolOptions::default()).unwrap();
    assert!(!run.feasibility.feasible);
    assert!(run.feasibility.message.contains("outside the adiabatic window"));
}
