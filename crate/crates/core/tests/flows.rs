use lyhjko::jko::{jko_flow, JkoOptions};
use lyhjko::pde::evolve;
use lyhjko::torus::{energy, DensityFamily, PeriodicGrid, PotentialSpec, Potentials};

fn fokker_planck(n: usize) -> (Potentials, PotentialSpec) {
    let grid = PeriodicGrid::new(1, n).unwrap();
    let v = PotentialSpec::parse(1, "cos[1]:0.2").unwrap();
    let w = PotentialSpec::parse(1, "cos[1]:0.1").unwrap();
    (Potentials::new(&v, &w, grid).unwrap(), v)
}

#[test]
fn evolve_conserves_mass_and_dissipates_energy() {
    let (pots, v) = fokker_planck(64);
    let rho0 = DensityFamily::VonMises { kappa: 2.0, center: [0.3, 0.0] }
        .build(pots.grid(), &v)
        .unwrap();
    let times: Vec<f64> = (1..=10).map(|i| 0.02 * i as f64).collect();
    let traj = evolve(&rho0, &pots, 0.2, 2e-4, &times).unwrap();
    assert_eq!(traj.snapshots.len(), 11);
    let mut last = f64::INFINITY;
    for s in &traj.snapshots {
        assert!((s.rho.mass() - 1.0).abs() < 1e-12);
        let e = energy(&s.rho, &pots).unwrap();
        assert!(e < last, "energy rose at t = {}", s.t);
        last = e;
    }
}

#[test]
fn raw_scheme_drifts_only_by_roundoff() {
    let (pots, v) = fokker_planck(64);
    let rho0 = DensityFamily::VonMises { kappa: 2.0, center: [0.3, 0.0] }
        .build(pots.grid(), &v)
        .unwrap();
    let drift = lyhjko::pde::raw_mass_drift(&rho0, &pots, 0.05, 2e-4).unwrap();
    assert!(drift < 1e-12, "drift {drift}");
}

#[test]
fn jko_flow_descends() {
    let (pots, v) = fokker_planck(64);
    let rho0 = DensityFamily::VonMises { kappa: 2.0, center: [0.3, 0.0] }
        .build(pots.grid(), &v)
        .unwrap();
    let opts = JkoOptions { eps: 1e-3, ..JkoOptions::default() };
    let flow = jko_flow(&rho0, 0.01, 5, &pots, &opts).unwrap();
    assert_eq!(flow.k(), 5);
    assert!(flow.descent_violation() <= 1e-8, "violation {}", flow.descent_violation());
    for w in flow.steps.windows(2) {
        assert!(w[1].energy < w[0].energy);
        assert!(w[1].w2_sq > 0.0);
        assert!((w[1].rho.mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn jko_rejects_step_outside_comparison_domain() {
    let (pots, v) = fokker_planck(32);
    let rho0 = DensityFamily::Uniform.build(pots.grid(), &v).unwrap();
    let lim = pots.constants().tau_limit();
    assert!(jko_flow(&rho0, lim, 1, &pots, &JkoOptions::default()).is_err());
}
