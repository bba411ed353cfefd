//! Per-point neighbor lists over a shared candidate set.
//!
//! For every live point z, `L_z` holds every current candidate keyed by
//! `(d(z, c), c)`, so rank-1 and rank-2 lookups are O(log m) and ties break
//! toward the smaller id.

use std::collections::{BTreeMap, BTreeSet};

use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::metric::{PointId, WeightedMetricSpace};
use crate::objective::CenterSet;

type Key = (OrderedFloat<f64>, PointId);

/// A candidate and its distance.
pub type Entry = (PointId, f64);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborLists {
    candidates: CenterSet,
    lists: BTreeMap<PointId, BTreeSet<Key>>,
}

impl NeighborLists {
    /// Lists for every live point, with no candidates yet.
    pub fn empty(space: &WeightedMetricSpace) -> Self {
        NeighborLists {
            candidates: CenterSet::new(),
            lists: space.ids().map(|z| (z, BTreeSet::new())).collect(),
        }
    }

    pub fn build(space: &WeightedMetricSpace, candidates: &CenterSet) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::EmptyCenters);
        }
        Ok(Self::build_unchecked(space, candidates))
    }

    /// Like [`build`](Self::build) but an empty candidate set is allowed.
    pub fn build_unchecked(space: &WeightedMetricSpace, candidates: &CenterSet) -> Self {
        let lists = space
            .ids()
            .map(|z| (z, candidates.iter().map(|&c| (OrderedFloat(space.dist(z, c)), c)).collect()))
            .collect();
        NeighborLists { candidates: candidates.clone(), lists }
    }

    pub fn candidates(&self) -> &CenterSet {
        &self.candidates
    }

    /// Points that currently own a list.
    pub fn points(&self) -> impl Iterator<Item = PointId> + '_ {
        self.lists.keys().copied()
    }

    pub fn list(&self, z: PointId) -> Option<impl Iterator<Item = (PointId, f64)> + '_> {
        self.lists.get(&z).map(|l| l.iter().map(|&(d, c)| (c, d.0)))
    }

    pub fn add_candidate(&mut self, space: &WeightedMetricSpace, x: PointId) -> Result<()> {
        if !self.candidates.insert(x) {
            return Err(Error::AlreadyPresent(x));
        }
        for (&z, list) in &mut self.lists {
            list.insert((OrderedFloat(space.dist(z, x)), x));
        }
        Ok(())
    }

    pub fn remove_candidate(&mut self, space: &WeightedMetricSpace, x: PointId) -> Result<()> {
        if !self.candidates.remove(&x) {
            return Err(Error::NotPresent(x));
        }
        for (&z, list) in &mut self.lists {
            list.remove(&(OrderedFloat(space.dist(z, x)), x));
        }
        Ok(())
    }

    /// Adds and removes candidates so the registry equals `target`.
    pub fn sync_candidates(&mut self, space: &WeightedMetricSpace, target: &CenterSet) {
        let stale: Vec<PointId> = self.candidates.difference(target).copied().collect();
        let fresh: Vec<PointId> = target.difference(&self.candidates).copied().collect();
        for x in stale {
            self.remove_candidate(space, x).expect("registry membership checked");
        }
        for x in fresh {
            self.add_candidate(space, x).expect("registry membership checked");
        }
    }

    fn ranked(&self, z: PointId, rank: usize) -> Result<(PointId, f64)> {
        let list = self.lists.get(&z).ok_or(Error::UnknownId(z))?;
        list.iter()
            .nth(rank - 1)
            .map(|&(d, c)| (c, d.0))
            .ok_or(Error::NotEnoughCandidates { needed: rank, available: list.len() })
    }

    /// L_z(1): nearest candidate to z and its distance.
    pub fn first(&self, z: PointId) -> Result<(PointId, f64)> {
        self.ranked(z, 1)
    }

    /// L_z(2): second-nearest candidate to z and its distance.
    pub fn second(&self, z: PointId) -> Result<(PointId, f64)> {
        self.ranked(z, 2)
    }

    /// Rank-1 and rank-2 entries in one lookup.
    pub fn first_two(&self, z: PointId) -> (Option<Entry>, Option<Entry>) {
        match self.lists.get(&z) {
            Some(list) => {
                let mut it = list.iter().map(|&(d, c)| (c, d.0));
                (it.next(), it.next())
            }
            None => (None, None),
        }
    }

    /// Creates L_z for a newly live point.
    pub fn on_point_inserted(&mut self, space: &WeightedMetricSpace, z: PointId) {
        let list = self
            .candidates
            .iter()
            .map(|&c| (OrderedFloat(space.dist(z, c)), c))
            .collect();
        self.lists.insert(z, list);
    }

    /// Drops L_z. The candidate registry is untouched.
    pub fn on_point_deleted(&mut self, z: PointId) {
        self.lists.remove(&z);
    }
}
