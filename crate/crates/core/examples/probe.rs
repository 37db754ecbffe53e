use qbm::greens::build_greens;
use qbm::model::{coherent_state, PhysParams};
use qbm::propagation::{noise_matrix, noise_oracle, propagate_covariance};
use qbm::spectral::NoiseConfig;
use qbm::nonmarkov::{trajectory, Backend, PairSpec};
use qbm::model::TimeGrid;

fn main() {
    // criterion 9 failure point
    let p = PhysParams::new(1.0, 1.0, 0.0734144648578868, 1.1089332403279628, 0.839695215824261).unwrap();
    let sol = build_greens(&p).unwrap();
    let s = coherent_state(0.5, 0.0, &p).unwrap();
    for t in [0.01, 0.05, 0.2] {
        let coarse = noise_matrix(&sol, t, &NoiseConfig::default()).unwrap();
        let fine = noise_matrix(&sol, t, &NoiseConfig::new(1e-12, 80_000_000).unwrap()).unwrap();
        let oc = noise_oracle(&sol, t).unwrap();
        println!("t={t}");
        println!("  coarse: {:+.9e} {:+.9e} {:+.9e}", coarse.ixx, coarse.ipp, coarse.ipx);
        println!("  fine  : {:+.9e} {:+.9e} {:+.9e}", fine.ixx, fine.ipp, fine.ipx);
        println!("  oracle: {:+.9e} {:+.9e} {:+.9e}", oc.ixx, oc.ipp, oc.ipx);
        let det_c = propagate_covariance(&s, &sol, &coarse, t).map(|c| c.det());
        println!("  det coarse = {:?}", det_c);
    }
    // criterion 8: gap profile
    let p8 = PhysParams::from_ratios(0.1, 100.0, 100.0).unwrap();
    let s0 = coherent_state(0.0, 0.0, &p8).unwrap();
    let grid = TimeGrid::from_t_max(0.01, 40.0).unwrap();
    let cfg = NoiseConfig::default();
    let ex = trajectory(&s0, &s0, &p8, &grid, &cfg, Backend::Exact, None).unwrap();
    let cl = trajectory(&s0, &s0, &p8, &grid, &cfg, Backend::ClLimit, None).unwrap();
    let mut last_bad_xx = 0.0f64;
    let mut last_bad_pp = 0.0f64;
    let mut worst_after_1 = 0.0f64;
    for (a, b) in ex.points.iter().zip(&cl.points) {
        let rxx = (a.state1.cov.xx - b.state1.cov.xx).abs() / a.state1.cov.xx.max(b.state1.cov.xx);
        let rpp = (a.state1.cov.pp - b.state1.cov.pp).abs() / a.state1.cov.pp.max(b.state1.cov.pp);
        if rxx > 5e-2 { last_bad_xx = a.t; }
        if rpp > 5e-2 { last_bad_pp = a.t; }
        if a.t >= 1.0 { worst_after_1 = worst_after_1.max(rxx).max(rpp); }
    }
    println!("c8: last t with rel>5e-2: xx {last_bad_xx}, pp {last_bad_pp}; worst after t=1: {worst_after_1:.3e}");
    let _ = PairSpec::symmetric(1.0);
}
