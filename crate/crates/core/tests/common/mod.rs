//! Shared fixtures for the integration and acceptance suites.
#![allow(dead_code)]

use std::sync::Arc;

use rclab::couplings::{normalize, CouplingSpec, PrefactorSpec};
use rclab::exact::{exact_expectations, exact_two_point};
use rclab::geometry::NormSpec;
use rclab::mc::{estimate_two_point, run_chains, SampleView, SamplerConfig, SamplerKind};
use rclab::region::{Boundary, Cutoff, RCParams, Region};
use rclab::unionfind::UnionFind;

pub fn spec_1d(alpha: f64) -> CouplingSpec {
    normalize(NormSpec::l1(1), PrefactorSpec::polynomial(alpha, true), None).unwrap()
}

pub fn spec_2d(alpha: f64) -> CouplingSpec {
    normalize(NormSpec::l1(2), PrefactorSpec::polynomial(alpha, true), None).unwrap()
}

/// Regions with at most 20 measure edges under the given boundary.
pub fn small_regions(boundary: Boundary) -> Vec<(String, Region)> {
    let s1 = spec_1d(3.0);
    let s2 = spec_2d(3.0);
    let mut v = vec![
        ("segment[-2,2]".to_string(), Region::segment(&s1, -2, 2, Cutoff::None).unwrap()),
        ("box1 nn".to_string(), Region::boxed(&s2, 1, Cutoff::Radius(1.0)).unwrap()),
    ];
    if boundary == Boundary::Free {
        v.push(("segment[-2,3]".to_string(), Region::segment(&s1, -2, 3, Cutoff::None).unwrap()));
    }
    for (name, r) in &v {
        assert!(r.n_measure_edges(boundary) <= 20, "{name}");
    }
    v
}

/// Observables compared against enumeration: connection of the origin to
/// every vertex, the origin being isolated, edge 0 open and, when wired, the
/// origin reaching the exterior.
pub const N_EVENTS: usize = 3;

pub struct Comparison {
    pub labels: Vec<String>,
    pub exact: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: Vec<u64>,
}

impl Comparison {
    pub fn z(&self) -> Vec<f64> {
        (0..self.exact.len())
            .map(|i| {
                let d = (self.mean[i] - self.exact[i]).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / self.stderr[i]
                }
            })
            .collect()
    }

    /// z with the standard error floored at the independent-sampling error
    /// √(p(1−p)/N) of the exact value, which holds under the null hypothesis
    /// for nonnegatively correlated samples.
    pub fn z_floored(&self) -> Vec<f64> {
        (0..self.exact.len())
            .map(|i| {
                let p = self.exact[i];
                let floor = (p * (1.0 - p) / self.samples[i] as f64).sqrt();
                let d = (self.mean[i] - p).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / self.stderr[i].max(floor)
                }
            })
            .collect()
    }

    pub fn max_z(&self) -> (f64, String) {
        Self::argmax(&self.z(), &self.labels)
    }

    pub fn max_z_floored(&self) -> (f64, String) {
        Self::argmax(&self.z_floored(), &self.labels)
    }

    fn argmax(z: &[f64], labels: &[String]) -> (f64, String) {
        let i = (0..z.len()).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
        (z[i], labels[i].clone())
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn compare(region: &Region, params: RCParams, sweeps: u64, seed: u64, kind: Option<SamplerKind>) -> Comparison {
    let region = Arc::new(region.clone());
    let mut cfg = SamplerConfig::new(region.clone(), params, sweeps, seed);
    if let Some(k) = kind {
        cfg = cfg.with_kind(k);
    }
    let o = region.origin;
    let n = region.n_vertices();
    let op = region.point(o).to_vec();
    let disp: Vec<Vec<i64>> =
        (0..n).map(|v| region.point(v).iter().zip(&op).map(|(a, b)| a - b).collect()).collect();
    let table = estimate_two_point(&cfg, &disp).unwrap();
    let g_exact = exact_two_point(&region, &params).unwrap();

    let wired = params.boundary == Boundary::Wired;
    let ev_exact = exact_expectations(&region, &params, N_EVENTS, |v, out| {
        if v.cluster_size(o) == 1 && !v.reaches_boundary(o) {
            out[0] = 1.0;
        }
        if v.is_open(0) {
            out[1] = 1.0;
        }
        if v.reaches_boundary(o) {
            out[2] = 1.0;
        }
    })
    .unwrap();
    let n_sites = cfg.n_sites();
    let ghost = n as u32;
    let stats = run_chains(&cfg, N_EVENTS, || {
        let mut uf = UnionFind::new(n_sites);
        move |s: &SampleView, out: &mut [f64]| {
            uf.reset();
            for (a, b) in s.open_pairs() {
                uf.union(a, b);
            }
            if uf.set_size(o as u32) == 1 {
                out[0] = 1.0;
            }
            if s.open.first() == Some(&0) {
                out[1] = 1.0;
            }
            if wired && uf.same(o as u32, ghost) {
                out[2] = 1.0;
            }
        }
    })
    .unwrap();
    let ev = stats.estimates().unwrap();

    let mut c = Comparison { labels: vec![], exact: vec![], mean: vec![], stderr: vec![], samples: vec![] };
    for (v, e) in table.entries.iter().enumerate() {
        if v == o {
            continue;
        }
        c.labels.push(format!("G(0,{:?})", e.x));
        c.exact.push(g_exact[v]);
        c.mean.push(e.estimate.mean);
        c.stderr.push(e.estimate.stderr);
        c.samples.push(e.estimate.n);
    }
    let names = ["origin isolated", "edge 0 open", "origin wired to exterior"];
    for k in 0..N_EVENTS {
        if k == 2 && !wired {
            continue;
        }
        c.labels.push(names[k].to_string());
        c.exact.push(ev_exact[k]);
        c.mean.push(ev[k].mean);
        c.stderr.push(ev[k].stderr);
        c.samples.push(ev[k].n);
    }
    c
}
