use rand::seq::SliceRandom;
use rand::Rng;

use crate::region::{RCParams, Region};

/// Single-edge heat-bath chain. Each update resamples one edge from its exact
/// conditional law: 1 − e^{−βJ} when the endpoints are joined without it,
/// (e^{βJ}−1)/(e^{βJ}−1+q) otherwise. The wired exterior is an ordinary
/// vertex here, so connections through it are found by the same search.
#[derive(Clone, Debug)]
pub struct HeatBath {
    edges: Vec<(u32, u32)>,
    p_conn: Vec<f64>,
    p_sep: Vec<f64>,
    state: Vec<bool>,
    adj: Vec<Vec<(u32, u32)>>,
    independent: bool,
    order: Vec<u32>,
    seen: Vec<u32>,
    stamp: u32,
    queue: Vec<u32>,
}

impl HeatBath {
    /// Starts from the all-closed configuration.
    pub fn new(region: &Region, params: &RCParams) -> Self {
        let me = region.measure_edges(params.boundary);
        let n_sites = region.n_vertices() + 1;
        Self {
            edges: me.iter().map(|&(u, v, _)| (u, v)).collect(),
            p_conn: me.iter().map(|&(_, _, j)| params.p_connected(j)).collect(),
            p_sep: me.iter().map(|&(_, _, j)| params.p_separate(j)).collect(),
            state: vec![false; me.len()],
            adj: vec![Vec::new(); n_sites],
            independent: params.q == 1.0,
            order: (0..me.len() as u32).collect(),
            seen: vec![0; n_sites],
            stamp: 0,
            queue: Vec::new(),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn state(&self) -> &[bool] {
        &self.state
    }

    pub fn set_state(&mut self, omega: &[bool]) {
        assert_eq!(omega.len(), self.state.len());
        for (e, &o) in omega.iter().enumerate() {
            self.set(e, o);
        }
    }

    fn set(&mut self, e: usize, open: bool) {
        if self.state[e] == open {
            return;
        }
        self.state[e] = open;
        let (u, v) = self.edges[e];
        if open {
            self.adj[u as usize].push((v, e as u32));
            self.adj[v as usize].push((u, e as u32));
        } else {
            for w in [u, v] {
                let list = &mut self.adj[w as usize];
                let pos = list.iter().position(|&(_, k)| k == e as u32).expect("open edge listed");
                list.swap_remove(pos);
            }
        }
    }

    /// Whether the endpoints of `e` are joined by open edges other than `e`.
    pub fn connected_off(&mut self, e: usize) -> bool {
        let (u, v) = self.edges[e];
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
        let stamp = self.stamp;
        self.queue.clear();
        self.queue.push(u);
        self.seen[u as usize] = stamp;
        let mut head = 0;
        while head < self.queue.len() {
            let a = self.queue[head];
            head += 1;
            for &(b, k) in &self.adj[a as usize] {
                if k as usize == e || self.seen[b as usize] == stamp {
                    continue;
                }
                if b == v {
                    return true;
                }
                self.seen[b as usize] = stamp;
                self.queue.push(b);
            }
        }
        false
    }

    /// The heat-bath open probability of edge `e` given the others.
    pub fn conditional(&mut self, e: usize) -> f64 {
        if self.independent || self.connected_off(e) {
            self.p_conn[e]
        } else {
            self.p_sep[e]
        }
    }

    pub fn update<R: Rng>(&mut self, e: usize, rng: &mut R) {
        let p = self.conditional(e);
        let open = rng.gen::<f64>() < p;
        self.set(e, open);
    }

    /// Every edge once, in a fresh random order.
    pub fn sweep<R: Rng>(&mut self, rng: &mut R) {
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(rng);
        for &e in &order {
            self.update(e as usize, rng);
        }
        self.order = order;
    }

    pub fn open_edges(&self, out: &mut Vec<u32>) {
        out.clear();
        out.extend(self.state.iter().enumerate().filter(|(_, &s)| s).map(|(e, _)| e as u32));
    }
}
