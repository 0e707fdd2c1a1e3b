mod common;

use common::{compare, small_regions, spec_1d};
use rclab::exact::{partition_weight, random_omega};
use rclab::mc::{HeatBath, SamplerKind};
use rclab::region::{Boundary, Cutoff, RCParams, Region};

/// Around 10 estimates per run over 30 runs; 4.5σ keeps the family-wise false
/// alarm rate well below 1% while any real bias at these sample sizes shows.
const Z_MAX: f64 = 4.5;

#[test]
fn mc_matches_enumeration_on_small_regions() {
    for boundary in [Boundary::Free, Boundary::Wired] {
        for (name, region) in small_regions(boundary) {
            for (i, &q) in [1.0, 1.5, 2.0].iter().enumerate() {
                for (j, &beta) in [0.2, 0.5, 1.0].iter().enumerate() {
                    let params = RCParams::new(q, beta, boundary).unwrap();
                    let c = compare(&region, params, 100_000, 100 + (3 * i + j) as u64, None);
                    let (z, what) = c.max_z_floored();
                    assert!(z < Z_MAX, "{name} {boundary:?} q={q} beta={beta}: {what} off by {z:.2} sigma");
                }
            }
        }
    }
}

#[test]
fn forced_heat_bath_at_q_one_matches_enumeration() {
    let region = Region::segment(&spec_1d(3.0), -2, 2, Cutoff::None).unwrap();
    for boundary in [Boundary::Free, Boundary::Wired] {
        let params = RCParams::new(1.0, 0.5, boundary).unwrap();
        let c = compare(&region, params, 100_000, 7, Some(SamplerKind::HeatBath));
        let (z, what) = c.max_z_floored();
        assert!(z < Z_MAX, "{boundary:?}: {what} off by {z:.2} sigma");
    }
}

/// Single-edge heat-bath probabilities equal the ratio of configuration
/// weights, which makes each update reversible for the measure.
#[test]
fn heat_bath_conditionals_satisfy_detailed_balance() {
    for boundary in [Boundary::Free, Boundary::Wired] {
        for (_, region) in small_regions(boundary) {
            for &q in &[1.0, 1.5, 2.0, 3.0] {
                let params = RCParams::new(q, 0.7, boundary).unwrap();
                let mut hb = HeatBath::new(&region, &params);
                let m = hb.n_edges();
                for seed in 0..20 {
                    let omega = random_omega(m, seed);
                    hb.set_state(&omega);
                    for e in 0..m {
                        let mut open = omega.clone();
                        open[e] = true;
                        let mut closed = omega.clone();
                        closed[e] = false;
                        let w1 = partition_weight(&region, &params, &open).unwrap();
                        let w0 = partition_weight(&region, &params, &closed).unwrap();
                        let want = w1 / (w1 + w0);
                        let got = hb.conditional(e);
                        assert!((got - want).abs() < 1e-12, "q={q} e={e}: {got} vs {want}");
                    }
                }
            }
        }
    }
}
