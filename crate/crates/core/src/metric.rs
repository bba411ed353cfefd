//! The dynamic weighted metric space: live points, their weights, the
//! distance source, and the extrema (d_min, d_max, w_min, w_max) used by
//! iteration budgets and facility-cost grids.
//!
//! Deleted points stay distance-queryable ("retained") until released, since
//! improper center sets may still refer to them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use log::warn;
use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::tol;

/// Largest matrix for which the triangle inequality is verified at load.
pub const TRIANGLE_CHECK_LIMIT: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u64);

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for PointId {
    fn from(v: u64) -> Self {
        PointId(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CoordMetric {
    #[default]
    Euclidean,
    L1,
}

impl CoordMetric {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            CoordMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            CoordMetric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Symmetric n×n matrix over the fixed universe of ids `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    cells: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, the zero diagonal, strictly positive off-diagonal
    /// entries and (for n ≤ [`TRIANGLE_CHECK_LIMIT`]) the triangle inequality.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            cells.extend_from_slice(row);
        }
        let m = DistanceMatrix { n, cells };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry ({i},{i}) is nonzero")));
            }
            for j in 0..n {
                let d = m.get(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidMatrix(format!("entry ({i},{j}) = {d} is not a finite nonnegative real")));
                }
                if d != m.get(j, i) {
                    return Err(Error::InvalidMatrix(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
                if i != j && d == 0.0 {
                    return Err(Error::InvalidMatrix(format!("distinct points {i} and {j} are at distance 0")));
                }
            }
        }
        if n <= TRIANGLE_CHECK_LIMIT {
            for i in 0..n {
                for j in 0..n {
                    let dij = m.get(i, j);
                    for k in 0..n {
                        if !tol::approx_le(m.get(i, k), dij + m.get(j, k)) {
                            return Err(Error::InvalidMatrix(format!(
                                "triangle inequality fails for ({i},{j},{k})"
                            )));
                        }
                    }
                }
            }
        } else {
            warn!("distance matrix has {n} points; skipping the triangle-inequality check");
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.n + j]
    }
}

#[derive(Clone, Debug)]
pub enum DistanceSource {
    Matrix(DistanceMatrix),
    Coords {
        metric: CoordMetric,
        dim: Option<usize>,
        coords: HashMap<PointId, Vec<f64>>,
    },
}

/// Ordered multisets of live pairwise distances and live weights.
#[derive(Clone, Debug, Default)]
pub struct ExtremaTracker {
    dists: BTreeMap<OrderedFloat<f64>, usize>,
    weights: BTreeMap<OrderedFloat<f64>, usize>,
}

fn multiset_add(set: &mut BTreeMap<OrderedFloat<f64>, usize>, v: f64) {
    *set.entry(OrderedFloat(v)).or_insert(0) += 1;
}

fn multiset_remove(set: &mut BTreeMap<OrderedFloat<f64>, usize>, v: f64) {
    let key = OrderedFloat(v);
    match set.get_mut(&key) {
        Some(c) if *c > 1 => *c -= 1,
        Some(_) => {
            set.remove(&key);
        }
        None => debug_assert!(false, "removing {v} which is not in the multiset"),
    }
}

impl ExtremaTracker {
    pub fn add_distance(&mut self, d: f64) {
        if d > 0.0 {
            multiset_add(&mut self.dists, d);
        }
    }

    pub fn remove_distance(&mut self, d: f64) {
        if d > 0.0 {
            multiset_remove(&mut self.dists, d);
        }
    }

    pub fn add_weight(&mut self, w: f64) {
        multiset_add(&mut self.weights, w);
    }

    pub fn remove_weight(&mut self, w: f64) {
        multiset_remove(&mut self.weights, w);
    }

    pub fn distance_count(&self) -> usize {
        self.dists.values().sum()
    }

    pub fn d_min(&self) -> Option<f64> {
        self.dists.keys().next().map(|k| k.0)
    }

    pub fn d_max(&self) -> Option<f64> {
        self.dists.keys().next_back().map(|k| k.0)
    }

    pub fn w_min(&self) -> Option<f64> {
        self.weights.keys().next().map(|k| k.0)
    }

    pub fn w_max(&self) -> Option<f64> {
        self.weights.keys().next_back().map(|k| k.0)
    }
}

#[derive(Clone, Debug)]
pub struct WeightedMetricSpace {
    weights: BTreeMap<PointId, f64>,
    retired: HashSet<PointId>,
    retained: BTreeSet<PointId>,
    source: DistanceSource,
    extrema: ExtremaTracker,
}

impl WeightedMetricSpace {
    pub fn with_coords(metric: CoordMetric) -> Self {
        Self::from_source(DistanceSource::Coords {
            metric,
            dim: None,
            coords: HashMap::new(),
        })
    }

    pub fn with_matrix(matrix: DistanceMatrix) -> Self {
        Self::from_source(DistanceSource::Matrix(matrix))
    }

    fn from_source(source: DistanceSource) -> Self {
        WeightedMetricSpace {
            weights: BTreeMap::new(),
            retired: HashSet::new(),
            retained: BTreeSet::new(),
            source,
            extrema: ExtremaTracker::default(),
        }
    }

    /// Builds a coordinate space on the real line; ids are `0..xs.len()`.
    pub fn on_line(xs: &[f64], weights: &[f64]) -> Result<Self> {
        let mut space = Self::with_coords(CoordMetric::Euclidean);
        for (i, (&x, &w)) in xs.iter().zip(weights).enumerate() {
            space.insert_point(PointId(i as u64), w, &[x])?;
        }
        Ok(space)
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self.source, DistanceSource::Matrix(_))
    }

    /// Inserts a live point. In matrix mode `coords` must be empty and the id
    /// must lie in the declared universe.
    pub fn insert_point(&mut self, id: PointId, weight: f64, coords: &[f64]) -> Result<()> {
        if self.weights.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        if self.retired.contains(&id) {
            return Err(Error::ReusedId(id));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::NonpositiveWeight { id, weight });
        }
        match &mut self.source {
            DistanceSource::Matrix(m) => {
                if !coords.is_empty() {
                    return Err(Error::DimensionMismatch { expected: 0, got: coords.len() });
                }
                if id.0 >= m.len() as u64 {
                    return Err(Error::UnknownMatrixId(id));
                }
            }
            DistanceSource::Coords { metric, dim, coords: store } => {
                match *dim {
                    Some(expected) if expected != coords.len() => {
                        return Err(Error::DimensionMismatch { expected, got: coords.len() });
                    }
                    None if coords.is_empty() => {
                        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
                    }
                    _ => {}
                }
                if let Some(&bad) = coords.iter().find(|c| !c.is_finite()) {
                    return Err(Error::InvalidParameter(format!("coordinate {bad} of point {id} is not finite")));
                }
                for other in self.weights.keys() {
                    if metric.eval(&store[other], coords) == 0.0 {
                        return Err(Error::CoincidentPoint { id, other: *other });
                    }
                }
                *dim = Some(coords.len());
                store.insert(id, coords.to_vec());
            }
        }
        let others: Vec<PointId> = self.weights.keys().copied().collect();
        for other in others {
            let d = self.dist(id, other);
            self.extrema.add_distance(d);
        }
        self.extrema.add_weight(weight);
        self.weights.insert(id, weight);
        Ok(())
    }

    /// Removes a live point. Its payload is retained for distance queries
    /// until [`release`](Self::release) is called.
    pub fn delete_point(&mut self, id: PointId) -> Result<()> {
        let weight = *self.weights.get(&id).ok_or(Error::UnknownId(id))?;
        self.weights.remove(&id);
        let others: Vec<PointId> = self.weights.keys().copied().collect();
        for other in others {
            let d = self.dist(id, other);
            self.extrema.remove_distance(d);
        }
        self.extrema.remove_weight(weight);
        self.retired.insert(id);
        self.retained.insert(id);
        Ok(())
    }

    /// Drops the payload of a deleted point. No-op for live or unknown ids.
    pub fn release(&mut self, id: PointId) {
        if self.retained.remove(&id) {
            if let DistanceSource::Coords { coords, .. } = &mut self.source {
                coords.remove(&id);
            }
        }
    }

    pub fn retained(&self) -> impl Iterator<Item = PointId> + '_ {
        self.retained.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn contains(&self, id: PointId) -> bool {
        self.weights.contains_key(&id)
    }

    /// Live or retained.
    pub fn is_known(&self, id: PointId) -> bool {
        self.weights.contains_key(&id) || self.retained.contains(&id)
    }

    /// Live ids in increasing order.
    pub fn ids(&self) -> impl Iterator<Item = PointId> + '_ {
        self.weights.keys().copied()
    }

    /// Live `(id, weight)` pairs in increasing id order.
    pub fn points(&self) -> impl Iterator<Item = (PointId, f64)> + '_ {
        self.weights.iter().map(|(&id, &w)| (id, w))
    }

    pub fn weight(&self, id: PointId) -> Result<f64> {
        self.weights.get(&id).copied().ok_or(Error::UnknownId(id))
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn distance(&self, i: PointId, j: PointId) -> Result<f64> {
        for id in [i, j] {
            if !self.is_known(id) {
                return Err(Error::UnknownId(id));
            }
        }
        Ok(self.dist(i, j))
    }

    /// Unchecked distance between live or retained points.
    ///
    /// Panics if either id has no payload.
    #[inline]
    pub fn dist(&self, i: PointId, j: PointId) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.source {
            DistanceSource::Matrix(m) => m.get(i.0 as usize, j.0 as usize),
            DistanceSource::Coords { metric, coords, .. } => {
                metric.eval(&coords[&i], &coords[&j])
            }
        }
    }

    pub fn coords(&self, id: PointId) -> Option<&[f64]> {
        match &self.source {
            DistanceSource::Coords { coords, .. } => coords.get(&id).map(Vec::as_slice),
            DistanceSource::Matrix(_) => None,
        }
    }

    pub fn extrema(&self) -> &ExtremaTracker {
        &self.extrema
    }

    pub fn d_min(&self) -> Result<f64> {
        self.pair_extremum(self.extrema.d_min())
    }

    pub fn d_max(&self) -> Result<f64> {
        self.pair_extremum(self.extrema.d_max())
    }

    pub fn w_min(&self) -> Result<f64> {
        self.extrema.w_min().ok_or(Error::EmptySpace)
    }

    pub fn w_max(&self) -> Result<f64> {
        self.extrema.w_max().ok_or(Error::EmptySpace)
    }

    fn pair_extremum(&self, v: Option<f64>) -> Result<f64> {
        match v {
            Some(v) => Ok(v),
            None if self.is_empty() => Err(Error::EmptySpace),
            None => Err(Error::DegenerateSpace),
        }
    }

    /// Δ = d_max·w_max / (d_min·w_min).
    pub fn aspect_ratio(&self) -> Result<f64> {
        let (d_min, d_max) = match (self.extrema.d_min(), self.extrema.d_max()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::DegenerateSpace),
        };
        Ok(d_max * self.w_max()? / (d_min * self.w_min()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> WeightedMetricSpace {
        WeightedMetricSpace::on_line(&[0.0, 1.0, 3.0], &[1.0; 3]).unwrap()
    }

    #[test]
    fn first_insert_has_no_pairs() {
        let mut s = WeightedMetricSpace::with_coords(CoordMetric::Euclidean);
        s.insert_point(PointId(0), 1.0, &[0.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.extrema().distance_count(), 0);
        assert_eq!(s.d_min(), Err(Error::DegenerateSpace));
    }

    #[test]
    fn line_extrema() {
        let s = line();
        assert_eq!(s.d_min().unwrap(), 1.0);
        assert_eq!(s.d_max().unwrap(), 3.0);
        assert_eq!(s.aspect_ratio().unwrap(), 3.0);
    }

    #[test]
    fn zero_weight_rejected() {
        let mut s = line();
        let err = s.insert_point(PointId(7), 0.0, &[5.0]).unwrap_err();
        assert!(matches!(err, Error::NonpositiveWeight { .. }));
    }

    #[test]
    fn delete_updates_extrema() {
        let mut s = line();
        s.delete_point(PointId(2)).unwrap();
        assert_eq!(s.d_min().unwrap(), 1.0);
        assert_eq!(s.d_max().unwrap(), 1.0);
        assert_eq!(s.delete_point(PointId(9)), Err(Error::UnknownId(PointId(9))));
    }

    #[test]
    fn delete_sole_point() {
        let mut s = WeightedMetricSpace::on_line(&[4.0], &[2.0]).unwrap();
        s.delete_point(PointId(0)).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.d_max(), Err(Error::EmptySpace));
        assert_eq!(s.w_min(), Err(Error::EmptySpace));
    }

    #[test]
    fn distances() {
        let s = line();
        assert_eq!(s.distance(PointId(0), PointId(0)).unwrap(), 0.0);
        assert_eq!(s.distance(PointId(0), PointId(2)).unwrap(), 3.0);
        assert_eq!(s.distance(PointId(2), PointId(0)).unwrap(), 3.0);
        assert!(s.distance(PointId(0), PointId(5)).is_err());
    }

    #[test]
    fn matrix_mode() {
        let m = DistanceMatrix::new(vec![
            vec![0.0, 2.0, 3.0],
            vec![2.0, 0.0, 4.0],
            vec![3.0, 4.0, 0.0],
        ])
        .unwrap();
        let mut s = WeightedMetricSpace::with_matrix(m);
        s.insert_point(PointId(0), 1.0, &[]).unwrap();
        s.insert_point(PointId(2), 1.0, &[]).unwrap();
        assert_eq!(s.distance(PointId(0), PointId(2)).unwrap(), 3.0);
        assert_eq!(
            s.insert_point(PointId(3), 1.0, &[]),
            Err(Error::UnknownMatrixId(PointId(3)))
        );
    }

    #[test]
    fn matrix_validation() {
        assert!(DistanceMatrix::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
        let bad_triangle = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        assert!(DistanceMatrix::new(bad_triangle).is_err());
    }

    #[test]
    fn ids_are_never_reused() {
        let mut s = line();
        s.delete_point(PointId(1)).unwrap();
        assert_eq!(s.insert_point(PointId(1), 1.0, &[7.0]), Err(Error::ReusedId(PointId(1))));
    }

    #[test]
    fn coincident_points_rejected() {
        let mut s = line();
        let err = s.insert_point(PointId(5), 1.0, &[1.0]).unwrap_err();
        assert_eq!(err, Error::CoincidentPoint { id: PointId(5), other: PointId(1) });
    }

    #[test]
    fn retained_points_stay_queryable_until_released() {
        let mut s = line();
        s.delete_point(PointId(2)).unwrap();
        assert_eq!(s.distance(PointId(0), PointId(2)).unwrap(), 3.0);
        s.release(PointId(2));
        assert!(s.distance(PointId(0), PointId(2)).is_err());
    }
}
