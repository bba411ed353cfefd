//! Nested layers S_0 ⊇ S_1 ⊇ … ⊇ S_{ℓ+1} with slack counters.
//!
//! Insertions are applied lazily to every layer. Each update bumps every
//! counter; the first layer whose counter exceeds its slack is rebuilt, along
//! with every layer below it, by local search restricted to the layer above.
//! Layers may keep deleted points, so S_{ℓ+1} is an improper solution.

use log::debug;

use crate::error::{Error, Result};
use crate::local_search::{rand_local_search, LocalSearchParams};
use crate::metric::{PointId, WeightedMetricSpace};
use crate::neighbors::NeighborLists;
use crate::objective::{clustering_cost, CenterSet, Norm};

/// ⌊k^{num/den}⌋, exact when the integer powers fit in 128 bits.
fn floor_rational_power(k: usize, num: u32, den: u32) -> usize {
    let estimate = (k as f64).powf(f64::from(num) / f64::from(den)).floor();
    let estimate = if estimate.is_finite() { estimate as u128 } else { u128::MAX };
    let Some(target) = (k as u128).checked_pow(num) else {
        return estimate as usize;
    };
    // An overflowing power is certainly above the target.
    let fits = |s: u128| s.checked_pow(den).is_some_and(|v| v <= target);
    let mut s = estimate;
    while s > 0 && !fits(s) {
        s -= 1;
    }
    while fits(s + 1) {
        s += 1;
    }
    s as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyConfig {
    pub k: usize,
    pub requested_eps: f64,
    /// ℓ = round(1/ε).
    pub levels: u32,
    pub norm: Norm,
    /// Local-search settings. `p` is replaced by the search exponent of
    /// `norm` at every rebuild and `seed` is mixed per rebuild.
    pub search: LocalSearchParams,
}

impl HierarchyConfig {
    pub fn new(k: usize, eps: f64, norm: Norm, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let levels = (1.0 / eps).round();
        if !(1.0..=f64::from(u16::MAX)).contains(&levels) {
            return Err(Error::InvalidParameter(format!("1/eps must round to an integer in 1..=65535, got {levels}")));
        }
        let levels = levels as u32;
        let search = LocalSearchParams::new(norm.search_exponent(2), (1.0 / f64::from(levels)).min(0.5), seed);
        Ok(HierarchyConfig { k, requested_eps: eps, levels, norm, search })
    }

    /// ε' = 1/ℓ.
    pub fn effective_eps(&self) -> f64 {
        1.0 / f64::from(self.levels)
    }

    /// s_i = ⌊k^{(ℓ−i)/ℓ}⌋ for i = 0..=ℓ, and s_{ℓ+1} = 0.
    pub fn slacks(&self) -> Vec<usize> {
        let l = self.levels;
        let mut s: Vec<usize> = (0..=l).map(|i| floor_rational_power(self.k, l - i, l)).collect();
        s.push(0);
        s
    }

    /// The slack used for recourse bounds of full rebuilds:
    /// max(⌊k^{(ℓ+1)/ℓ}⌋, 2k).
    pub fn slack_above_top(&self) -> usize {
        floor_rational_power(self.k, self.levels + 1, self.levels).max(2 * self.k)
    }

    /// Per-update recourse bound 4·s_{r−1} + 1 for a rebuild from layer r.
    pub fn recourse_bound(&self, rebuilt_from: usize) -> usize {
        let s = if rebuilt_from == 0 { self.slack_above_top() } else { self.slacks()[rebuilt_from - 1] };
        4 * s + 1
    }

    /// 2β·Σ_{i=0}^{ℓ+1} α^i with α = 1+7ε, β = 6p(1+7ε) and ε the local-search accuracy.
    pub fn approximation_bound(&self, p: u32) -> f64 {
        let alpha = 1.0 + 7.0 * self.search.effective_eps();
        let beta = 6.0 * f64::from(p) * alpha;
        2.0 * beta * (0..=self.levels + 1).map(|i| alpha.powi(i as i32)).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateReport {
    /// The layer r the rebuild started from.
    pub rebuilt_from: usize,
    /// |S_i ⊕ S_i'| for every layer.
    pub layer_recourse: Vec<usize>,
    /// Local-search iterations spent in this update.
    pub iterations: u64,
}

#[derive(Clone, Debug)]
pub enum Event {
    Insert(PointId),
    Delete(PointId),
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    config: HierarchyConfig,
    slacks: Vec<usize>,
    layers: Vec<CenterSet>,
    counters: Vec<usize>,
    /// `lists[i]` holds S_{i−1} as candidates (V for i = 0).
    lists: Vec<NeighborLists>,
    rebuilds: u64,
}

impl Hierarchy {
    /// Builds the hierarchy on the current space by rebuilding from layer 0.
    pub fn new(space: &WeightedMetricSpace, config: HierarchyConfig) -> Result<Self> {
        let depth = config.levels as usize + 2;
        let slacks = config.slacks();
        let mut lists = vec![NeighborLists::empty(space); depth];
        lists[0] = NeighborLists::build_unchecked(space, &space.ids().collect());
        let mut h = Hierarchy {
            config,
            slacks,
            layers: vec![CenterSet::new(); depth],
            counters: vec![0; depth],
            lists,
            rebuilds: 0,
        };
        h.reconstruct_from_layer(space, 0)?;
        Ok(h)
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    pub fn slacks(&self) -> &[usize] {
        &self.slacks
    }

    pub fn layers(&self) -> &[CenterSet] {
        &self.layers
    }

    pub fn counters(&self) -> &[usize] {
        &self.counters
    }

    /// Index of the final layer, ℓ+1.
    pub fn top(&self) -> usize {
        self.layers.len() - 1
    }

    /// The improper solution S_{ℓ+1}.
    pub fn current_solution(&self) -> &CenterSet {
        &self.layers[self.top()]
    }

    /// Every point any layer still refers to (S_0 contains all others).
    pub fn referenced(&self) -> &CenterSet {
        &self.layers[0]
    }

    /// cl_p(S_{ℓ+1}) against the live points; 0 on an empty space.
    pub fn current_cost(&self, space: &WeightedMetricSpace, norm: Norm) -> Result<f64> {
        if space.is_empty() {
            return Ok(0.0);
        }
        clustering_cost(space, self.current_solution(), norm)
    }

    /// Applies an event that has already been applied to `space`.
    pub fn update(&mut self, space: &WeightedMetricSpace, event: &Event) -> Result<UpdateReport> {
        let before = self.layers.clone();
        match *event {
            Event::Insert(x) => {
                for layer in &mut self.layers {
                    layer.insert(x);
                }
                for lists in &mut self.lists {
                    lists.on_point_inserted(space, x);
                    lists.add_candidate(space, x)?;
                }
            }
            Event::Delete(x) => {
                for lists in &mut self.lists {
                    lists.on_point_deleted(x);
                }
                self.lists[0].remove_candidate(space, x)?;
            }
        }
        for c in &mut self.counters {
            *c += 1;
        }
        let r = (0..self.layers.len())
            .find(|&i| self.counters[i] > self.slacks[i])
            .expect("the final layer has zero slack");
        let iterations = self.reconstruct_from_layer(space, r)?;
        let layer_recourse = before
            .iter()
            .zip(&self.layers)
            .map(|(a, b)| a.symmetric_difference(b).count())
            .collect();
        Ok(UpdateReport { rebuilt_from: r, layer_recourse, iterations })
    }

    /// Rebuilds layers j..=ℓ+1 in order and resets their counters. Returns
    /// the local-search iterations spent.
    pub fn reconstruct_from_layer(&mut self, space: &WeightedMetricSpace, j: usize) -> Result<u64> {
        if j > self.top() {
            return Err(Error::InvalidParameter(format!("layer {j} exceeds {}", self.top())));
        }
        self.rebuilds += 1;
        let mut iterations = 0;
        for i in j..=self.top() {
            let pool: CenterSet = if i == 0 { space.ids().collect() } else { self.layers[i - 1].clone() };
            self.lists[i].sync_candidates(space, &pool);
            let target = self.config.k + self.slacks[i];
            let params = LocalSearchParams {
                p: self.config.norm.search_exponent(space.len()),
                seed: mix_seed(self.config.search.seed, self.rebuilds, i),
                ..self.config.search.clone()
            };
            let out = rand_local_search(space, &pool, target, &params, &mut self.lists[i])?;
            iterations += out.iterations;
            self.layers[i] = out.centers;
            self.counters[i] = 0;
        }
        debug!("rebuilt layers {j}..={} with {iterations} swap iterations", self.top());
        Ok(iterations)
    }

    /// Checks nestedness and the size bounds of every layer.
    pub fn check_invariants(&self, space: &WeightedMetricSpace) -> Result<()> {
        let k = self.config.k;
        let live: CenterSet = space.ids().collect();
        if !live.is_subset(&self.layers[0]) && self.layers[0].len() < k + self.slacks[0] {
            return Err(Error::MembershipViolation("S_0 is undersized but misses live points".into()));
        }
        for i in 0..self.layers.len() {
            let layer = &self.layers[i];
            if i > 0 && !layer.is_subset(&self.layers[i - 1]) {
                return Err(Error::MembershipViolation(format!("S_{i} is not contained in S_{}", i - 1)));
            }
            if layer.len() > k + 2 * self.slacks[i] {
                return Err(Error::MembershipViolation(format!(
                    "|S_{i}| = {} exceeds k + 2s_{i} = {}",
                    layer.len(),
                    k + 2 * self.slacks[i]
                )));
            }
            if layer.len() < k + self.slacks[i] {
                let collapsed = self.layers[..=i].iter().all(|l| l == layer) && live.is_subset(layer);
                if !collapsed {
                    return Err(Error::MembershipViolation(format!(
                        "|S_{i}| = {} is below k + s_{i} but S_{i} is not the collapsed chain",
                        layer.len()
                    )));
                }
            }
        }
        let top = self.current_solution();
        if top.len() != k && !(live.is_subset(top) && live.len() < k) {
            return Err(Error::MembershipViolation(format!("|S_top| = {} but k = {k}", top.len())));
        }
        Ok(())
    }
}

fn mix_seed(seed: u64, rebuild: u64, layer: usize) -> u64 {
    seed ^ rebuild.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (layer as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}
