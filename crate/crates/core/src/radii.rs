//! Augmented AVL trees answering ball-growing radius queries.
//!
//! For a point i and facility cost λ, the radius r_i is the smallest r with
//! Σ_j w(j)·max(0, r − β·d(i,j)) = λ. One tree per point stores the pairs
//! (β·d(i,j), w(j)) with subtree aggregates, so both the radius and the
//! connection value C_i come out of one O(log n) descent.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metric::{PointId, WeightedMetricSpace};

/// Handle to a node of an [`AugTree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
struct Node {
    d: f64,
    id: PointId,
    q: f64,
    left: Option<usize>,
    right: Option<usize>,
    height: i32,
    /// q(T_u).
    mass: f64,
    /// Σ q_v (d_{u⁺} − d_v) over T_u.
    phi: f64,
    /// Σ q_v d_v over T_u.
    psi: f64,
    /// Σ q_v d_v² over T_u.
    psi2: f64,
    /// d_{u⁻} and d_{u⁺}: smallest and largest key in T_u.
    lo: f64,
    hi: f64,
}

impl Node {
    fn key(&self) -> (f64, PointId) {
        (self.d, self.id)
    }
}

fn key_lt(a: (f64, PointId), b: (f64, PointId)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Aggregate values of one subtree.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Aggregates {
    pub mass: f64,
    pub phi: f64,
    pub psi: f64,
    pub psi2: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Prefix sums over every entry up to and including some node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prefix {
    pub mass: f64,
    pub psi: f64,
    pub psi2: f64,
}

#[derive(Clone, Debug, Default)]
pub struct AugTree {
    nodes: Vec<Node>,
    free: Vec<usize>,
    root: Option<usize>,
    len: usize,
}

impl AugTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root.map(NodeId)
    }

    pub fn height(&self) -> i32 {
        self.h(self.root)
    }

    pub fn key(&self, u: NodeId) -> (f64, PointId) {
        self.nodes[u.0].key()
    }

    pub fn weight(&self, u: NodeId) -> f64 {
        self.nodes[u.0].q
    }

    pub fn aggregates(&self, u: NodeId) -> Aggregates {
        let n = &self.nodes[u.0];
        Aggregates { mass: n.mass, phi: n.phi, psi: n.psi, psi2: n.psi2, lo: n.lo, hi: n.hi }
    }

    /// In-order `(d, id, q)` entries.
    pub fn entries(&self) -> Vec<(f64, PointId, f64)> {
        let mut out = Vec::with_capacity(self.len);
        self.collect(self.root, &mut out);
        out
    }

    fn collect(&self, n: Option<usize>, out: &mut Vec<(f64, PointId, f64)>) {
        if let Some(i) = n {
            self.collect(self.nodes[i].left, out);
            out.push((self.nodes[i].d, self.nodes[i].id, self.nodes[i].q));
            self.collect(self.nodes[i].right, out);
        }
    }

    fn h(&self, n: Option<usize>) -> i32 {
        n.map_or(0, |i| self.nodes[i].height)
    }

    fn alloc(&mut self, d: f64, id: PointId, q: f64) -> usize {
        let node = Node {
            d,
            id,
            q,
            left: None,
            right: None,
            height: 1,
            mass: q,
            phi: 0.0,
            psi: q * d,
            psi2: q * d * d,
            lo: d,
            hi: d,
        };
        match self.free.pop() {
            Some(i) => {
                self.nodes[i] = node;
                i
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        }
    }

    /// Recomputes height and aggregates of `u` from its children.
    fn pull(&mut self, u: usize) {
        let (l, r) = (self.nodes[u].left, self.nodes[u].right);
        let (d, q) = (self.nodes[u].d, self.nodes[u].q);
        let height = 1 + self.h(l).max(self.h(r));
        let mut mass = q;
        let mut psi = q * d;
        let mut psi2 = q * d * d;
        let mut lo = d;
        let mut hi = d;
        let mut left_phi = 0.0;
        let mut left_mass = 0.0;
        let mut left_hi = d;
        if let Some(v) = l {
            let v = &self.nodes[v];
            mass += v.mass;
            psi += v.psi;
            psi2 += v.psi2;
            lo = v.lo;
            left_phi = v.phi;
            left_mass = v.mass;
            left_hi = v.hi;
        }
        let mut right_phi = 0.0;
        if let Some(w) = r {
            let w = &self.nodes[w];
            mass += w.mass;
            psi += w.psi;
            psi2 += w.psi2;
            hi = w.hi;
            right_phi = w.phi;
        }
        let phi = left_phi + left_mass * (hi - left_hi) + q * (hi - d) + right_phi;
        let n = &mut self.nodes[u];
        n.height = height;
        n.mass = mass;
        n.psi = psi;
        n.psi2 = psi2;
        n.lo = lo;
        n.hi = hi;
        n.phi = phi;
    }

    fn rotate_right(&mut self, u: usize) -> usize {
        let v = self.nodes[u].left.expect("rotation needs a left child");
        self.nodes[u].left = self.nodes[v].right;
        self.nodes[v].right = Some(u);
        self.pull(u);
        self.pull(v);
        v
    }

    fn rotate_left(&mut self, u: usize) -> usize {
        let w = self.nodes[u].right.expect("rotation needs a right child");
        self.nodes[u].right = self.nodes[w].left;
        self.nodes[w].left = Some(u);
        self.pull(u);
        self.pull(w);
        w
    }

    fn balance(&mut self, u: usize) -> usize {
        self.pull(u);
        let (l, r) = (self.nodes[u].left, self.nodes[u].right);
        let bf = self.h(l) - self.h(r);
        if bf > 1 {
            let l = l.expect("left-heavy");
            if self.h(self.nodes[l].left) < self.h(self.nodes[l].right) {
                let nl = self.rotate_left(l);
                self.nodes[u].left = Some(nl);
            }
            return self.rotate_right(u);
        }
        if bf < -1 {
            let r = r.expect("right-heavy");
            if self.h(self.nodes[r].right) < self.h(self.nodes[r].left) {
                let nr = self.rotate_right(r);
                self.nodes[u].right = Some(nr);
            }
            return self.rotate_left(u);
        }
        u
    }

    pub fn insert(&mut self, d: f64, id: PointId, q: f64) -> Result<()> {
        let root = self.insert_at(self.root, d, id, q)?;
        self.root = Some(root);
        self.len += 1;
        Ok(())
    }

    fn insert_at(&mut self, n: Option<usize>, d: f64, id: PointId, q: f64) -> Result<usize> {
        let Some(u) = n else {
            return Ok(self.alloc(d, id, q));
        };
        let here = self.nodes[u].key();
        if key_lt((d, id), here) {
            let l = self.insert_at(self.nodes[u].left, d, id, q)?;
            self.nodes[u].left = Some(l);
        } else if key_lt(here, (d, id)) {
            let r = self.insert_at(self.nodes[u].right, d, id, q)?;
            self.nodes[u].right = Some(r);
        } else {
            return Err(Error::AlreadyPresent(id));
        }
        Ok(self.balance(u))
    }

    pub fn remove(&mut self, d: f64, id: PointId) -> Result<()> {
        self.root = self.remove_at(self.root, (d, id))?;
        self.len -= 1;
        Ok(())
    }

    fn remove_at(&mut self, n: Option<usize>, key: (f64, PointId)) -> Result<Option<usize>> {
        let Some(u) = n else {
            return Err(Error::NotPresent(key.1));
        };
        let here = self.nodes[u].key();
        if key_lt(key, here) {
            self.nodes[u].left = self.remove_at(self.nodes[u].left, key)?;
        } else if key_lt(here, key) {
            self.nodes[u].right = self.remove_at(self.nodes[u].right, key)?;
        } else {
            match (self.nodes[u].left, self.nodes[u].right) {
                (None, None) => {
                    self.free.push(u);
                    return Ok(None);
                }
                (Some(c), None) | (None, Some(c)) => {
                    self.free.push(u);
                    return Ok(Some(c));
                }
                (Some(_), Some(r)) => {
                    let mut s = r;
                    while let Some(l) = self.nodes[s].left {
                        s = l;
                    }
                    let (sd, sid, sq) = (self.nodes[s].d, self.nodes[s].id, self.nodes[s].q);
                    self.nodes[u].right = self.remove_at(Some(r), (sd, sid))?;
                    let node = &mut self.nodes[u];
                    node.d = sd;
                    node.id = sid;
                    node.q = sq;
                }
            }
        }
        Ok(Some(self.balance(u)))
    }

    fn rightmost(&self, mut u: usize) -> usize {
        while let Some(r) = self.nodes[u].right {
            u = r;
        }
        u
    }

    /// φ_η(u) = φ(u) + η·(d_{u⁺} − d_{u⁻}).
    pub fn mass_query(&self, u: NodeId, eta: f64) -> f64 {
        let n = &self.nodes[u.0];
        n.phi + eta * (n.hi - n.lo)
    }

    /// The in-order last node u* of T_u with φ_η(u, u*) < μ, and φ_η(u, u*),
    /// where φ_η(u, x) = Σ_{y ∈ T_u, y ⪯ x} q_y (d_x − d_y) + η·(d_x − d_{u⁻}).
    pub fn search_query(&self, u: NodeId, mu: f64, eta: f64) -> (NodeId, f64) {
        let mut u = u.0;
        let mut mu = mu;
        let mut eta = eta;
        let mut offset = 0.0;
        loop {
            let node = &self.nodes[u];
            let base = node.lo;
            let (left_mass, at_u, at_left_max) = match node.left {
                Some(v) => {
                    let v = &self.nodes[v];
                    let at_vmax = v.phi + eta * (v.hi - base);
                    if at_vmax >= mu {
                        u = node.left.expect("checked");
                        continue;
                    }
                    let at_u = v.phi + (node.d - v.hi) * v.mass + eta * (node.d - base);
                    (v.mass, at_u, Some(at_vmax))
                }
                None => (0.0, 0.0, None),
            };
            if at_u >= mu {
                let vmax = self.rightmost(node.left.expect("φ_η(u,u) > 0 needs a left child"));
                return (NodeId(vmax), offset + at_left_max.expect("left child exists"));
            }
            let Some(w) = node.right else {
                return (NodeId(u), offset + at_u);
            };
            let w_lo = self.nodes[w].lo;
            let at_w_min = at_u + (w_lo - node.d) * (left_mass + node.q) + eta * (w_lo - node.d);
            if at_w_min >= mu {
                return (NodeId(u), offset + at_u);
            }
            mu -= at_w_min;
            offset += at_w_min;
            eta += node.q + left_mass;
            u = w;
        }
    }

    /// Σ q_v over entries v ⪯ u*, together with Σ q_v d_v and Σ q_v d_v².
    pub fn prefix(&self, target: NodeId) -> Prefix {
        let key = self.nodes[target.0].key();
        let mut acc = Prefix::default();
        let mut cur = self.root;
        while let Some(u) = cur {
            let n = &self.nodes[u];
            if key_lt(key, n.key()) {
                cur = n.left;
            } else {
                acc.mass += n.q;
                acc.psi += n.q * n.d;
                acc.psi2 += n.q * n.d * n.d;
                if let Some(l) = n.left {
                    let l = &self.nodes[l];
                    acc.mass += l.mass;
                    acc.psi += l.psi;
                    acc.psi2 += l.psi2;
                }
                cur = n.right;
            }
        }
        acc
    }

    /// Σ_{v ⪯ u*} q_v.
    pub fn compute_weight(&self, target: NodeId) -> f64 {
        self.prefix(target).mass
    }

    /// Smallest key strictly after `u` in order.
    fn successor_key(&self, target: NodeId) -> Option<f64> {
        let key = self.nodes[target.0].key();
        let mut best = None;
        let mut cur = self.root;
        while let Some(u) = cur {
            let n = &self.nodes[u];
            if key_lt(key, n.key()) {
                best = Some(n.d);
                cur = n.left;
            } else {
                cur = n.right;
            }
        }
        best
    }

    /// Radius and connection value for facility cost λ and demand weight `wi`.
    pub fn radius_and_cost(&self, lambda: f64, wi: f64) -> Option<(f64, f64)> {
        let root = self.root()?;
        let (star, gamma) = self.search_query(root, lambda, 0.0);
        let pre = self.prefix(star);
        let mut r = self.key(star).0 + (lambda - gamma) / pre.mass;
        if let Some(next) = self.successor_key(star) {
            r = r.min(next);
        }
        let c = (wi / lambda) * (r * pre.psi - pre.psi2);
        Some((r, c.max(0.0)))
    }

    /// Every node's aggregates against a definitional recomputation.
    pub fn audit(&self) -> std::result::Result<(), String> {
        if let Some(r) = self.root {
            self.audit_at(r)?;
        }
        Ok(())
    }

    fn audit_at(&self, u: usize) -> std::result::Result<Vec<(f64, f64)>, String> {
        let n = &self.nodes[u];
        let mut entries = match n.left {
            Some(l) => self.audit_at(l)?,
            None => Vec::new(),
        };
        entries.push((n.d, n.q));
        if let Some(r) = n.right {
            entries.extend(self.audit_at(r)?);
        }
        let hi = entries.last().expect("nonempty").0;
        let lo = entries[0].0;
        let mass: f64 = entries.iter().map(|e| e.1).sum();
        let phi: f64 = entries.iter().map(|&(d, q)| q * (hi - d)).sum();
        let psi: f64 = entries.iter().map(|&(d, q)| q * d).sum();
        let psi2: f64 = entries.iter().map(|&(d, q)| q * d * d).sum();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-12;
        if !(close(mass, n.mass) && close(phi, n.phi) && close(psi, n.psi) && close(psi2, n.psi2) && lo == n.lo && hi == n.hi) {
            return Err(format!("aggregates of node {} disagree with recomputation", n.id));
        }
        let bf = self.h(n.left) - self.h(n.right);
        if bf.abs() > 1 || n.height != 1 + self.h(n.left).max(self.h(n.right)) {
            return Err(format!("node {} is unbalanced", n.id));
        }
        Ok(entries)
    }

    /// Same in-order entries and root aggregates equal up to rounding.
    pub fn same_contents(&self, other: &AugTree) -> bool {
        if self.entries() != other.entries() {
            return false;
        }
        match (self.root(), other.root()) {
            (None, None) => true,
            (Some(a), Some(b)) => {
                let (a, b) = (self.aggregates(a), other.aggregates(b));
                let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()) + 1e-12;
                close(a.mass, b.mass) && close(a.phi, b.phi) && close(a.psi, b.psi) && close(a.psi2, b.psi2)
            }
            _ => false,
        }
    }
}

/// One tree per live point over all live points, with distances scaled by β.
#[derive(Clone, Debug)]
pub struct RadiiMp {
    beta: f64,
    trees: BTreeMap<PointId, AugTree>,
}

impl RadiiMp {
    pub fn new(space: &WeightedMetricSpace, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        let mut trees = BTreeMap::new();
        for i in space.ids() {
            trees.insert(i, Self::build_tree(space, beta, i)?);
        }
        Ok(RadiiMp { beta, trees })
    }

    fn build_tree(space: &WeightedMetricSpace, beta: f64, i: PointId) -> Result<AugTree> {
        let mut t = AugTree::new();
        for (j, w) in space.points() {
            t.insert(beta * space.dist(i, j), j, w)?;
        }
        Ok(t)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tree(&self, i: PointId) -> Option<&AugTree> {
        self.trees.get(&i)
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> + '_ {
        self.trees.keys().copied()
    }

    /// Call after `j` has been inserted into `space`.
    pub fn on_insert(&mut self, space: &WeightedMetricSpace, j: PointId) -> Result<()> {
        if self.trees.contains_key(&j) {
            return Err(Error::DuplicateId(j));
        }
        let w = space.weight(j)?;
        for (&i, tree) in &mut self.trees {
            tree.insert(self.beta * space.dist(i, j), j, w)?;
        }
        self.trees.insert(j, Self::build_tree(space, self.beta, j)?);
        Ok(())
    }

    /// Call after `j` has been deleted from `space` and before its payload
    /// is released.
    pub fn on_delete(&mut self, space: &WeightedMetricSpace, j: PointId) -> Result<()> {
        if self.trees.remove(&j).is_none() {
            return Err(Error::UnknownId(j));
        }
        for (&i, tree) in &mut self.trees {
            tree.remove(self.beta * space.dist(i, j), j)?;
        }
        Ok(())
    }

    /// (r_i, C_i) at facility cost λ.
    pub fn radius_and_cost(&self, space: &WeightedMetricSpace, i: PointId, lambda: f64) -> Result<(f64, f64)> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::NonpositiveLambda(lambda));
        }
        let tree = self.trees.get(&i).ok_or(Error::UnknownId(i))?;
        let wi = space.weight(i)?;
        Ok(tree.radius_and_cost(lambda, wi).expect("tree of a live point contains the point"))
    }

    pub fn radius(&self, space: &WeightedMetricSpace, i: PointId, lambda: f64) -> Result<f64> {
        self.radius_and_cost(space, i, lambda).map(|(r, _)| r)
    }

    pub fn connection_cost(&self, space: &WeightedMetricSpace, i: PointId, lambda: f64) -> Result<f64> {
        self.radius_and_cost(space, i, lambda).map(|(_, c)| c)
    }

    /// Σ_j w(j)·β·d(i,j), read off the root aggregate.
    pub fn weighted_distance_sum(&self, i: PointId) -> Result<f64> {
        let tree = self.trees.get(&i).ok_or(Error::UnknownId(i))?;
        Ok(tree.root().map_or(0.0, |r| tree.aggregates(r).psi))
    }
}
