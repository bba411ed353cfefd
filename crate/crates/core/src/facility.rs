//! Fractional facility location through ball-growing radii.
//!
//! At facility cost λ every point i opens y_i = w(i)·r_i/λ, with r_i the
//! radius in the metric scaled by 1/4, and each j spreads its demand over
//! the points inside its own ball. The construction is a Lagrangian
//! multiplier preserving 4-approximation, certified by a dual solution built
//! from radii in the metric scaled by 1/2.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metric::{PointId, WeightedMetricSpace};
use crate::radii::RadiiMp;
use crate::tol;

pub const SOLUTION_BETA: f64 = 0.25;
pub const DUAL_BETA: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct FractionalSolution {
    pub lambda: f64,
    pub y: BTreeMap<PointId, f64>,
    pub open_mass: f64,
    /// Σ_{i,j} w(j)·d(i,j)·x_{j→i}.
    pub connection_cost: f64,
}

/// `x[j][i]`: the fraction of j's demand served by i.
pub type Assignment = BTreeMap<PointId, BTreeMap<PointId, f64>>;

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub lambda: f64,
    pub v: BTreeMap<PointId, f64>,
    /// `w_dual[(j, i)]`; absent pairs are 0.
    pub w_dual: BTreeMap<(PointId, PointId), f64>,
}

impl DualSolution {
    pub fn value(&self) -> f64 {
        self.v.values().sum()
    }

    /// Checks Σ_j w_{j→i} ≤ λ for every i and v_j ≤ w(j)·d(i,j) + w_{j→i}
    /// for every pair, up to the shared tolerance.
    pub fn check_feasible(&self, space: &WeightedMetricSpace) -> std::result::Result<(), String> {
        for i in space.ids() {
            let load: f64 = space.ids().map(|j| self.w_dual.get(&(j, i)).copied().unwrap_or(0.0)).sum();
            if !tol::approx_le(load, self.lambda) {
                return Err(format!("facility {i} is paid {load} > λ = {}", self.lambda));
            }
        }
        for (j, wj) in space.points() {
            let vj = self.v[&j];
            for i in space.ids() {
                let cap = wj * space.dist(i, j) + self.w_dual.get(&(j, i)).copied().unwrap_or(0.0);
                if !tol::approx_le(vj, cap) {
                    return Err(format!("v_{j} = {vj} exceeds {cap} at facility {i}"));
                }
            }
        }
        Ok(())
    }
}

/// Query layer over the radii trees. The β = 1/2 trees used for the dual
/// witness are built on first request and maintained from then on.
#[derive(Clone, Debug)]
pub struct FracLmp {
    quarter: RadiiMp,
    half: Option<RadiiMp>,
}

fn check_query(space: &WeightedMetricSpace, lambda: f64) -> Result<()> {
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::NonpositiveLambda(lambda));
    }
    Ok(())
}

impl FracLmp {
    pub fn new(space: &WeightedMetricSpace) -> Result<Self> {
        Ok(FracLmp { quarter: RadiiMp::new(space, SOLUTION_BETA)?, half: None })
    }

    pub fn radii(&self) -> &RadiiMp {
        &self.quarter
    }

    pub fn on_insert(&mut self, space: &WeightedMetricSpace, j: PointId) -> Result<()> {
        self.quarter.on_insert(space, j)?;
        if let Some(h) = &mut self.half {
            h.on_insert(space, j)?;
        }
        Ok(())
    }

    pub fn on_delete(&mut self, space: &WeightedMetricSpace, j: PointId) -> Result<()> {
        self.quarter.on_delete(space, j)?;
        if let Some(h) = &mut self.half {
            h.on_delete(space, j)?;
        }
        Ok(())
    }

    pub fn solution(&self, space: &WeightedMetricSpace, lambda: f64) -> Result<FractionalSolution> {
        check_query(space, lambda)?;
        let mut y = BTreeMap::new();
        let mut connection = 0.0;
        for (i, w) in space.points() {
            let (r, c) = self.quarter.radius_and_cost(space, i, lambda)?;
            y.insert(i, w * r / lambda);
            connection += c;
        }
        let open_mass = y.values().sum();
        Ok(FractionalSolution { lambda, y, open_mass, connection_cost: 4.0 * connection })
    }

    /// Σ_i y_i at facility cost λ.
    pub fn open_mass(&self, space: &WeightedMetricSpace, lambda: f64) -> Result<f64> {
        check_query(space, lambda)?;
        space
            .points()
            .map(|(i, w)| self.quarter.radius(space, i, lambda).map(|r| w * r / lambda))
            .sum()
    }

    /// 4·Σ_j C_j at β = 1/4, without materializing x.
    pub fn connection_cost_total(&self, space: &WeightedMetricSpace, lambda: f64) -> Result<f64> {
        check_query(space, lambda)?;
        let total: Result<f64> = space.ids().map(|j| self.quarter.connection_cost(space, j, lambda)).sum();
        Ok(4.0 * total?)
    }

    /// The full x matrix: x_{j→i} = max(0, w(i)·(r_j − d(i,j)/4))/λ.
    pub fn materialize_assignment(&self, space: &WeightedMetricSpace, lambda: f64) -> Result<Assignment> {
        check_query(space, lambda)?;
        let mut x = Assignment::new();
        for j in space.ids() {
            let rj = self.quarter.radius(space, j, lambda)?;
            let row = space
                .points()
                .map(|(i, wi)| (i, (wi * (rj - SOLUTION_BETA * space.dist(i, j))).max(0.0) / lambda))
                .filter(|&(_, v)| v > 0.0)
                .collect();
            x.insert(j, row);
        }
        Ok(x)
    }

    /// v_j = w(j)·r_j and w_{j→i} = max(0, w(j)·(r_j − d(i,j))) with radii at β = 1/2.
    pub fn dual_witness(&mut self, space: &WeightedMetricSpace, lambda: f64) -> Result<DualSolution> {
        check_query(space, lambda)?;
        if self.half.is_none() {
            self.half = Some(RadiiMp::new(space, DUAL_BETA)?);
        }
        let half = self.half.as_ref().expect("built above");
        let mut v = BTreeMap::new();
        let mut w_dual = BTreeMap::new();
        for (j, wj) in space.points() {
            let rj = half.radius(space, j, lambda)?;
            v.insert(j, wj * rj);
            for i in space.ids() {
                let pay = wj * (rj - space.dist(i, j));
                if pay > 0.0 {
                    w_dual.insert((j, i), pay);
                }
            }
        }
        Ok(DualSolution { lambda, v, w_dual })
    }

    /// r_j at β = 1/2, for the per-point dual inequality.
    pub fn half_radius(&mut self, space: &WeightedMetricSpace, j: PointId, lambda: f64) -> Result<f64> {
        if self.half.is_none() {
            self.half = Some(RadiiMp::new(space, DUAL_BETA)?);
        }
        self.half.as_ref().expect("built above").radius(space, j, lambda)
    }
}

/// Σ_{i,j} w(j)·d(i,j)·x_{j→i}.
pub fn assignment_cost(space: &WeightedMetricSpace, x: &Assignment) -> f64 {
    x.iter()
        .map(|(&j, row)| {
            let wj = space.weight(j).expect("assignment rows are live points");
            row.iter().map(|(&i, &v)| wj * space.dist(i, j) * v).sum::<f64>()
        })
        .sum()
}
