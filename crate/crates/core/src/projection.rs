//! Ordered projection of an improper center set A onto the live points B.
//!
//! With A ordered as y_1..y_m, each y_i takes its nearest point of B that
//! no earlier y has taken (ties to the smallest id); Λ is the set of taken
//! points. Each y_i keeps the list of B ∖ Λ_{i−1} sorted by distance from
//! y_i, and an event ripples forward through the lists carrying only the
//! few points whose availability differs from before.

use std::collections::BTreeSet;

use ordered_float::OrderedFloat;

use crate::error::{Error, Result};
use crate::metric::{PointId, WeightedMetricSpace};
use crate::objective::CenterSet;

type Key = (OrderedFloat<f64>, PointId);

/// Change of Λ caused by one event.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Delta {
    pub added: CenterSet,
    pub removed: CenterSet,
}

impl Delta {
    pub fn size(&self) -> usize {
        self.added.len() + self.removed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionState {
    order: Vec<PointId>,
    members: CenterSet,
    targets: CenterSet,
    lists: Vec<BTreeSet<Key>>,
    picks: Vec<Option<PointId>>,
    lambda: CenterSet,
}

fn key(space: &WeightedMetricSpace, y: PointId, b: PointId) -> Key {
    (OrderedFloat(space.dist(y, b)), b)
}

impl ProjectionState {
    /// Runs the projection from scratch.
    pub fn new(space: &WeightedMetricSpace, order: &[PointId], targets: &CenterSet) -> Result<Self> {
        let mut state = ProjectionState {
            order: Vec::new(),
            members: CenterSet::new(),
            targets: targets.clone(),
            lists: Vec::new(),
            picks: Vec::new(),
            lambda: CenterSet::new(),
        };
        for &y in order {
            state.apply_a_insert(space, y)?;
        }
        Ok(state)
    }

    pub fn proper_solution(&self) -> &CenterSet {
        &self.lambda
    }

    pub fn order(&self) -> &[PointId] {
        &self.order
    }

    pub fn targets(&self) -> &CenterSet {
        &self.targets
    }

    /// Appends y to the order; Λ grows by at most one point.
    pub fn apply_a_insert(&mut self, space: &WeightedMetricSpace, y: PointId) -> Result<Delta> {
        if !space.is_known(y) {
            return Err(Error::UnknownId(y));
        }
        if !self.members.insert(y) {
            return Err(Error::MembershipViolation(format!("{y} is already in the projected set")));
        }
        let list: BTreeSet<Key> = self
            .targets
            .iter()
            .filter(|b| !self.lambda.contains(*b))
            .map(|&b| key(space, y, b))
            .collect();
        let pick = list.first().map(|&(_, b)| b);
        self.order.push(y);
        self.lists.push(list);
        self.picks.push(pick);
        let mut delta = Delta::default();
        if let Some(b) = pick {
            self.lambda.insert(b);
            delta.added.insert(b);
        }
        Ok(delta)
    }

    /// Splices y out of the order; its pick becomes available downstream.
    pub fn apply_a_delete(&mut self, space: &WeightedMetricSpace, y: PointId) -> Result<Delta> {
        if !self.members.remove(&y) {
            return Err(Error::MembershipViolation(format!("{y} is not in the projected set")));
        }
        let at = self.order.iter().position(|&o| o == y).expect("members and order agree");
        self.order.remove(at);
        self.lists.remove(at);
        let freed = self.picks.remove(at);
        let add: CenterSet = freed.into_iter().collect();
        self.ripple(space, at, add, CenterSet::new())
    }

    pub fn apply_b_insert(&mut self, space: &WeightedMetricSpace, x: PointId) -> Result<Delta> {
        if !self.targets.insert(x) {
            return Err(Error::MembershipViolation(format!("{x} is already a target")));
        }
        self.ripple(space, 0, [x].into(), CenterSet::new())
    }

    pub fn apply_b_delete(&mut self, space: &WeightedMetricSpace, x: PointId) -> Result<Delta> {
        if !self.targets.remove(&x) {
            return Err(Error::MembershipViolation(format!("{x} is not a target")));
        }
        self.ripple(space, 0, CenterSet::new(), [x].into())
    }

    /// Forward scan from index `from`. `add` holds points missing from the
    /// current list that belong in it, `remove` the reverse.
    fn ripple(&mut self, space: &WeightedMetricSpace, from: usize, mut add: CenterSet, mut remove: CenterSet) -> Result<Delta> {
        let before = self.lambda.clone();
        for j in from..self.order.len() {
            if add.is_empty() && remove.is_empty() {
                break;
            }
            let y = self.order[j];
            let list = &mut self.lists[j];
            for &b in &add {
                list.insert(key(space, y, b));
            }
            for &b in &remove {
                list.remove(&key(space, y, b));
            }
            let old = self.picks[j];
            let new = list.first().map(|&(_, b)| b);
            self.picks[j] = new;
            if old == new {
                // Both versions drop the same point, so the pending sets carry over.
                if let Some(b) = new {
                    add.remove(&b);
                    remove.remove(&b);
                }
                continue;
            }
            if let Some(n) = new {
                let was_present = !add.remove(&n);
                if was_present {
                    remove.insert(n);
                }
            }
            if let Some(o) = old {
                let still_present = !remove.remove(&o);
                if still_present {
                    add.insert(o);
                }
            }
        }
        self.lambda = self.picks.iter().flatten().copied().collect();
        Ok(Delta {
            added: self.lambda.difference(&before).copied().collect(),
            removed: before.difference(&self.lambda).copied().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{clustering_cost, Norm};
    use crate::oracles::project_from_scratch;
    use proptest::prelude::*;

    fn ids(v: &[u64]) -> CenterSet {
        v.iter().map(|&i| PointId(i)).collect()
    }

    #[test]
    fn line_example() {
        let mut s = WeightedMetricSpace::on_line(&[0.0, 1.0, 3.0], &[1.0; 3]).unwrap();
        let mut st = ProjectionState::new(&s, &[PointId(0)], &ids(&[1, 2])).unwrap();
        assert_eq!(st.proper_solution(), &ids(&[1]));
        s.delete_point(PointId(1)).unwrap();
        let d = st.apply_b_delete(&s, PointId(1)).unwrap();
        assert_eq!(st.proper_solution(), &ids(&[2]));
        assert_eq!(d.size(), 2);
    }

    #[test]
    fn a_insert_adds_one() {
        let s = WeightedMetricSpace::on_line(&[0.0, 1.0, 3.0, 7.0], &[1.0; 4]).unwrap();
        let mut st = ProjectionState::new(&s, &[PointId(0)], &ids(&[1, 2, 3])).unwrap();
        let d = st.apply_a_insert(&s, PointId(3)).unwrap();
        assert_eq!(d, Delta { added: ids(&[3]), removed: ids(&[]) });
        // Point 1 is already taken by point 0, so the next one is 2.
        let d = st.apply_a_insert(&s, PointId(1)).unwrap();
        assert_eq!(d.added, ids(&[2]));
    }

    #[test]
    fn empty_a_ignores_b_events() {
        let s = WeightedMetricSpace::on_line(&[0.0, 1.0], &[1.0; 2]).unwrap();
        let mut st = ProjectionState::new(&s, &[], &ids(&[0])).unwrap();
        assert!(st.apply_b_insert(&s, PointId(1)).unwrap().is_empty());
        assert!(st.apply_b_delete(&s, PointId(0)).unwrap().is_empty());
        assert!(st.proper_solution().is_empty());
    }

    #[test]
    fn subset_projects_to_itself() {
        let s = WeightedMetricSpace::on_line(&[0.0, 1.0, 3.0, 4.5], &[1.0; 4]).unwrap();
        let st = ProjectionState::new(&s, &[PointId(2), PointId(0)], &ids(&[0, 1, 2, 3])).unwrap();
        assert_eq!(st.proper_solution(), &ids(&[0, 2]));
    }

    #[test]
    fn membership_errors() {
        let s = WeightedMetricSpace::on_line(&[0.0, 1.0], &[1.0; 2]).unwrap();
        let mut st = ProjectionState::new(&s, &[PointId(0)], &ids(&[0, 1])).unwrap();
        assert!(matches!(st.apply_a_insert(&s, PointId(0)), Err(Error::MembershipViolation(_))));
        assert!(matches!(st.apply_a_delete(&s, PointId(1)), Err(Error::MembershipViolation(_))));
        assert!(matches!(st.apply_b_insert(&s, PointId(1)), Err(Error::MembershipViolation(_))));
    }

    #[derive(Clone, Debug)]
    enum Ev {
        AIns(usize),
        ADel(usize),
        BIns(usize),
        BDel(usize),
    }

    fn ev() -> impl Strategy<Value = Ev> {
        prop_oneof![
            (0usize..30).prop_map(Ev::AIns),
            (0usize..30).prop_map(Ev::ADel),
            (0usize..30).prop_map(Ev::BIns),
            (0usize..30).prop_map(Ev::BDel),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn matches_from_scratch(
            pts in proptest::collection::btree_set((-40i32..40, -40i32..40), 30..31),
            events in proptest::collection::vec(ev(), 1..200),
        ) {
            let mut s = WeightedMetricSpace::with_coords(Default::default());
            for (i, &(a, b)) in pts.iter().enumerate() {
                s.insert_point(PointId(i as u64), 1.0, &[f64::from(a), f64::from(b)]).unwrap();
            }
            let mut st = ProjectionState::new(&s, &[], &CenterSet::new()).unwrap();
            let mut a: Vec<PointId> = Vec::new();
            let mut b = CenterSet::new();
            for e in events {
                let delta = match e {
                    Ev::AIns(i) if !a.contains(&PointId(i as u64)) => {
                        a.push(PointId(i as u64));
                        let d = st.apply_a_insert(&s, PointId(i as u64)).unwrap();
                        prop_assert!(d.size() <= 1);
                        d
                    }
                    Ev::ADel(i) if a.contains(&PointId(i as u64)) => {
                        a.retain(|&y| y != PointId(i as u64));
                        st.apply_a_delete(&s, PointId(i as u64)).unwrap()
                    }
                    Ev::BIns(i) if b.insert(PointId(i as u64)) => st.apply_b_insert(&s, PointId(i as u64)).unwrap(),
                    Ev::BDel(i) if b.remove(&PointId(i as u64)) => st.apply_b_delete(&s, PointId(i as u64)).unwrap(),
                    _ => continue,
                };
                prop_assert!(delta.size() <= 2, "delta {:?}", delta);
                prop_assert_eq!(st.proper_solution(), &project_from_scratch(&s, &a, &b));
                if a.len() <= b.len() {
                    prop_assert_eq!(st.proper_solution().len(), a.len());
                }
            }
        }

        #[test]
        fn cost_at_most_twice_improper(
            pts in proptest::collection::btree_set((-40i32..40, -40i32..40), 6..25),
            a_mask in any::<u32>(),
            b_mask in any::<u32>(),
        ) {
            let mut s = WeightedMetricSpace::with_coords(Default::default());
            for (i, &(x, y)) in pts.iter().enumerate() {
                s.insert_point(PointId(i as u64), 1.0, &[f64::from(x), f64::from(y)]).unwrap();
            }
            let n = pts.len();
            let a: Vec<PointId> = (0..n).filter(|i| a_mask & (1 << i) != 0).map(|i| PointId(i as u64)).collect();
            let mut b_ids: Vec<PointId> = (0..n).filter(|i| b_mask & (1 << i) != 0).map(|i| PointId(i as u64)).collect();
            prop_assume!(!a.is_empty() && b_ids.len() > a.len());
            // Points outside B play the role of deleted centers.
            let dead: Vec<PointId> = s.ids().filter(|i| !b_ids.contains(i)).collect();
            for d in dead {
                s.delete_point(d).unwrap();
            }
            b_ids.sort();
            let st = ProjectionState::new(&s, &a, &b_ids.iter().copied().collect()).unwrap();
            let improper: CenterSet = a.iter().copied().collect();
            for norm in [Norm::Finite(1), Norm::Finite(2), Norm::Infinity] {
                let proper = clustering_cost(&s, st.proper_solution(), norm).unwrap();
                let base = clustering_cost(&s, &improper, norm).unwrap();
                prop_assert!(proper <= 2.0 * base * (1.0 + 1e-9) + 1e-12, "{} vs {}", proper, base);
            }
        }
    }
}
