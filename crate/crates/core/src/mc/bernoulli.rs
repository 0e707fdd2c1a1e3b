use rand::Rng;

use crate::region::{RCParams, Region};

/// Independent edges with P(open) = 1 − e^{−βJ_e}, drawn as a unit-rate
/// Poisson process over the concatenated hazards βJ_e: an edge is open when
/// its hazard interval holds an arrival. Edges are sorted by decreasing
/// hazard, and each draw costs one exponential variate and one binary search
/// per open edge.
#[derive(Clone, Debug)]
pub struct BernoulliSampler {
    /// Cumulative hazard through each sorted edge.
    cum: Vec<f64>,
    /// Measure-edge index of each sorted edge.
    index: Vec<u32>,
}

impl BernoulliSampler {
    pub fn new(region: &Region, params: &RCParams) -> Self {
        let edges = region.measure_edges(params.boundary);
        let mut order: Vec<(f64, u32)> =
            edges.iter().enumerate().map(|(k, &(_, _, j))| (params.beta * j, k as u32)).collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut acc = 0.0;
        let cum = order
            .iter()
            .map(|&(h, _)| {
                acc += h;
                acc
            })
            .collect();
        Self { cum, index: order.into_iter().map(|o| o.1).collect() }
    }

    pub fn total_hazard(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Fills `open` with the open edge indices of a fresh draw, ascending.
    pub fn sample<R: Rng>(&self, rng: &mut R, open: &mut Vec<u32>) {
        open.clear();
        let total = self.total_hazard();
        let mut t = 0.0;
        loop {
            // Exp(1) increment; 1 − U lies in (0, 1]
            t += -(1.0 - rng.gen::<f64>()).ln();
            if t >= total {
                break;
            }
            let k = self.cum.partition_point(|&c| c <= t);
            open.push(self.index[k]);
            // memoryless: restart at the end of the hit interval
            t = self.cum[k];
        }
        open.sort_unstable();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{normalize, PrefactorSpec};
    use crate::geometry::NormSpec;
    use crate::region::Cutoff;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn region() -> Region {
        let spec = normalize(NormSpec::l1(1), PrefactorSpec::polynomial(1.0, true), None).unwrap();
        Region::interval(&spec, 5, Cutoff::None).unwrap()
    }

    #[test]
    fn marginals_and_edge_count() {
        let r = region();
        let p = RCParams::free(1.0, 1.0);
        let s = BernoulliSampler::new(&r, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000u64;
        let mut counts = vec![0u64; r.n_edges()];
        let mut total = 0u64;
        let mut open = Vec::new();
        for _ in 0..n {
            s.sample(&mut rng, &mut open);
            total += open.len() as u64;
            for &e in &open {
                counts[e as usize] += 1;
            }
        }
        let mut mean_count = 0.0;
        let mut var_count = 0.0;
        for (e, &c) in counts.iter().enumerate() {
            let pe = p.p_connected(r.edges[e].j);
            mean_count += pe;
            var_count += pe * (1.0 - pe);
            let sd = (pe * (1.0 - pe) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - pe).abs() < 4.0 * sd, "edge {e}");
        }
        let sd = (var_count / n as f64).sqrt();
        assert!((total as f64 / n as f64 - mean_count).abs() < 4.0 * sd);
    }

    #[test]
    fn zero_beta_is_empty() {
        let r = region();
        let s = BernoulliSampler::new(&r, &RCParams::free(1.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut open = vec![3];
        for _ in 0..1000 {
            s.sample(&mut rng, &mut open);
            assert!(open.is_empty());
        }
    }
}
