//! Clustering and facility-location objectives, plus set projection.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metric::{PointId, WeightedMetricSpace};

/// A set of centers. May contain deleted (retained) points, in which case it
/// is an improper solution.
pub type CenterSet = BTreeSet<PointId>;

/// The exponent p of the (k,p)-clustering objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Finite(u32),
    Infinity,
}

impl Norm {
    /// Exponent used inside local search. The k-center objective is
    /// approximated by p = ⌈log₂ n⌉.
    pub fn search_exponent(self, n: usize) -> u32 {
        match self {
            Norm::Finite(p) => p,
            Norm::Infinity => (n.max(2) as f64).log2().ceil() as u32,
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::Finite(p) => write!(f, "{p}"),
            Norm::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inf" | "infinity" => Ok(Norm::Infinity),
            _ => match s.parse::<u32>() {
                Ok(p) if p >= 1 => Ok(Norm::Finite(p)),
                _ => Err(Error::InvalidParameter(format!("p must be a positive integer or 'inf', got {s:?}"))),
            },
        }
    }
}

/// `(d / scale)^p`. Every p-th power of a distance in the crate goes through
/// this function so independent evaluations agree bit for bit.
#[inline]
pub fn scaled_pow(d: f64, scale: f64, p: u32) -> f64 {
    (d / scale).powi(p as i32)
}

/// Nearest center to `x`, ties broken toward the smallest id.
pub fn nearest(space: &WeightedMetricSpace, x: PointId, centers: &CenterSet) -> Option<(PointId, f64)> {
    let mut best: Option<(PointId, f64)> = None;
    for &c in centers {
        let d = space.dist(x, c);
        // Ascending iteration means a strict comparison keeps the smallest id.
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c, d));
        }
    }
    best
}

fn check_args(space: &WeightedMetricSpace, centers: &CenterSet) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    if let Some(&c) = centers.iter().find(|&&c| !space.is_known(c)) {
        return Err(Error::UnknownId(c));
    }
    Ok(())
}

fn center_distances(space: &WeightedMetricSpace, centers: &CenterSet) -> Vec<(f64, f64)> {
    space
        .points()
        .map(|(x, w)| (w, nearest(space, x, centers).map(|(_, d)| d).unwrap_or(0.0)))
        .collect()
}

/// cl_p(S) = (Σ_x w(x)·d(x,S)^p)^{1/p}, or max_x d(x,S) for p = ∞.
pub fn clustering_cost(space: &WeightedMetricSpace, centers: &CenterSet, norm: Norm) -> Result<f64> {
    check_args(space, centers)?;
    let dists = center_distances(space, centers);
    let max = dists.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    Ok(match norm {
        Norm::Infinity => max,
        Norm::Finite(1) => dists.iter().map(|&(w, d)| w * d).sum(),
        Norm::Finite(p) => {
            if max == 0.0 {
                return Ok(0.0);
            }
            let sum: f64 = dists.iter().map(|&(w, d)| w * scaled_pow(d, max, p)).sum();
            max * sum.powf(1.0 / p as f64)
        }
    })
}

/// cl_p(S)^p, evaluated directly as Σ_x w(x)·d(x,S)^p.
pub fn unnormalized_cost(space: &WeightedMetricSpace, centers: &CenterSet, p: u32) -> Result<f64> {
    check_args(space, centers)?;
    Ok(center_distances(space, centers)
        .iter()
        .map(|&(w, d)| w * scaled_pow(d, 1.0, p))
        .sum())
}

/// fl_λ(S) = λ·|S| + Σ_x w(x)·d(x,S).
pub fn facility_cost(space: &WeightedMetricSpace, centers: &CenterSet, lambda: f64) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::EmptyCenters);
    }
    if space.is_empty() {
        return Ok(lambda * centers.len() as f64);
    }
    let connection = clustering_cost(space, centers, Norm::Finite(1))?;
    Ok(lambda * centers.len() as f64 + connection)
}

/// Proj(S, X): the nearest point of X for every y ∈ S.
pub fn project_set(space: &WeightedMetricSpace, centers: &CenterSet, onto: &CenterSet) -> Result<CenterSet> {
    if onto.is_empty() {
        return Err(Error::EmptyCenters);
    }
    Ok(centers
        .iter()
        .filter_map(|&y| nearest(space, y, onto).map(|(x, _)| x))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u64]) -> CenterSet {
        v.iter().map(|&i| PointId(i)).collect()
    }

    fn line() -> WeightedMetricSpace {
        WeightedMetricSpace::on_line(&[0.0, 1.0, 3.0], &[1.0; 3]).unwrap()
    }

    #[test]
    fn line_costs() {
        let s = line();
        assert_eq!(clustering_cost(&s, &ids(&[1]), Norm::Finite(1)).unwrap(), 3.0);
        assert_eq!(clustering_cost(&s, &ids(&[1]), Norm::Infinity).unwrap(), 2.0);
        assert_eq!(unnormalized_cost(&s, &ids(&[1]), 2).unwrap(), 5.0);
        let l2 = clustering_cost(&s, &ids(&[1]), Norm::Finite(2)).unwrap();
        assert!((l2 - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn all_centers_cost_nothing() {
        let s = line();
        for norm in [Norm::Finite(1), Norm::Finite(3), Norm::Infinity] {
            assert_eq!(clustering_cost(&s, &ids(&[0, 1, 2]), norm).unwrap(), 0.0);
        }
        assert_eq!(unnormalized_cost(&s, &ids(&[0, 1, 2]), 2).unwrap(), 0.0);
    }

    #[test]
    fn p1_unnormalized_matches() {
        let s = line();
        let c = ids(&[0]);
        assert_eq!(
            unnormalized_cost(&s, &c, 1).unwrap(),
            clustering_cost(&s, &c, Norm::Finite(1)).unwrap()
        );
    }

    #[test]
    fn facility_costs() {
        let s = line();
        assert_eq!(facility_cost(&s, &ids(&[1]), 1.0).unwrap(), 4.0);
        assert_eq!(facility_cost(&s, &ids(&[0, 1, 2]), 1.0).unwrap(), 3.0);
        assert_eq!(
            facility_cost(&s, &ids(&[2]), 0.0).unwrap(),
            clustering_cost(&s, &ids(&[2]), Norm::Finite(1)).unwrap()
        );
    }

    #[test]
    fn projection() {
        let s = line();
        assert_eq!(project_set(&s, &ids(&[0]), &ids(&[1, 2])).unwrap(), ids(&[1]));
        assert_eq!(project_set(&s, &ids(&[0, 2]), &ids(&[0, 1, 2])).unwrap(), ids(&[0, 2]));
        assert_eq!(project_set(&s, &ids(&[0]), &CenterSet::new()), Err(Error::EmptyCenters));
    }

    #[test]
    fn large_p_does_not_overflow() {
        let s = WeightedMetricSpace::on_line(&[0.0, 1e6, 3e6], &[1.0; 3]).unwrap();
        let c = clustering_cost(&s, &ids(&[0]), Norm::Finite(64)).unwrap();
        assert!(c.is_finite());
        assert!(c >= 3e6 && c <= 3e6 * 2f64.powf(1.0 / 64.0) + 1.0);
    }

    #[test]
    fn errors() {
        let s = line();
        assert_eq!(clustering_cost(&s, &CenterSet::new(), Norm::Finite(1)), Err(Error::EmptyCenters));
        let empty = WeightedMetricSpace::with_coords(Default::default());
        assert_eq!(clustering_cost(&empty, &ids(&[0]), Norm::Finite(1)), Err(Error::EmptySpace));
        assert_eq!("inf".parse::<Norm>().unwrap(), Norm::Infinity);
        assert!("0".parse::<Norm>().is_err());
    }
}
