//! The update engine behind the CLI: drives a stream through the space, the
//! hierarchy and the projection (run mode) or the fractional k-median layer
//! (value mode), producing one metrics row per event.

use std::io::Write;
use std::time::Instant;

use log::warn;

use crate::error::{Error, Result};
use crate::facility::FracLmp;
use crate::hierarchy::{Event, Hierarchy, HierarchyConfig};
use crate::kmedian::value_estimate;
use crate::metric::{PointId, WeightedMetricSpace};
use crate::objective::{clustering_cost, CenterSet, Norm};
use crate::oracles::brute_opt_clustering;
use crate::projection::ProjectionState;
use crate::stream::{apply, Op, Stream};

pub const METRICS_HEADER: [&str; 10] = [
    "update_idx",
    "op",
    "n_live",
    "improper_cost",
    "proper_cost",
    "recourse_improper",
    "recourse_proper",
    "cumulative_recourse",
    "value_estimate",
    "elapsed_us",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Run,
    Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub k: usize,
    pub eps: f64,
    pub norm: Norm,
    pub seed: u64,
    pub max_iters: Option<u64>,
    /// Invariant violations become errors instead of warnings.
    pub strict: bool,
    /// Measure wall time per event; otherwise `elapsed_us` is 0.
    pub record_timing: bool,
}

impl EngineConfig {
    pub fn new(mode: Mode, k: usize, eps: f64, norm: Norm, seed: u64) -> Self {
        EngineConfig { mode, k, eps, norm, seed, max_iters: None, strict: false, record_timing: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub update_idx: usize,
    pub op: &'static str,
    pub n_live: usize,
    pub improper_cost: Option<f64>,
    pub proper_cost: Option<f64>,
    pub recourse_improper: Option<usize>,
    pub recourse_proper: Option<usize>,
    pub cumulative_recourse: Option<usize>,
    pub value_estimate: Option<f64>,
    pub elapsed_us: u128,
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn record(&self) -> [String; 10] {
        [
            self.update_idx.to_string(),
            self.op.to_string(),
            self.n_live.to_string(),
            cell(self.improper_cost),
            cell(self.proper_cost),
            cell(self.recourse_improper),
            cell(self.recourse_proper),
            cell(self.cumulative_recourse),
            cell(self.value_estimate),
            self.elapsed_us.to_string(),
        ]
    }
}

/// Details of one run-mode event beyond the metrics row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventDetail {
    pub rebuilt_from: usize,
    pub layer_recourse: Vec<usize>,
    /// |Λ ⊕ Λ'| for every individual projection event.
    pub projection_steps: Vec<usize>,
    pub violations: Vec<String>,
}

pub struct Engine {
    config: EngineConfig,
    space: WeightedMetricSpace,
    hierarchy: Option<Hierarchy>,
    projection: Option<ProjectionState>,
    lmp: Option<FracLmp>,
    updates: usize,
    cumulative: usize,
    violations: usize,
    last: EventDetail,
}

impl Engine {
    /// Starts from an empty space with the given distance source.
    pub fn new(space: WeightedMetricSpace, config: EngineConfig) -> Result<Self> {
        if !space.is_empty() {
            return Err(Error::InvalidParameter("the engine starts from an empty space".into()));
        }
        let (hierarchy, projection, lmp) = match config.mode {
            Mode::Run => {
                let mut hc = HierarchyConfig::new(config.k, config.eps, config.norm, config.seed)?;
                hc.search.max_iters_override = config.max_iters;
                let h = Hierarchy::new(&space, hc)?;
                let proj = ProjectionState::new(&space, &[], &CenterSet::new())?;
                (Some(h), Some(proj), None)
            }
            Mode::Value => {
                if config.k == 0 {
                    return Err(Error::InvalidParameter("k must be at least 1".into()));
                }
                if !(config.eps > 0.0 && config.eps < 1.0) {
                    return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {}", config.eps)));
                }
                (None, None, Some(FracLmp::new(&space)?))
            }
        };
        Ok(Engine {
            config,
            space,
            hierarchy,
            projection,
            lmp,
            updates: 0,
            cumulative: 0,
            violations: 0,
            last: EventDetail::default(),
        })
    }

    pub fn space(&self) -> &WeightedMetricSpace {
        &self.space
    }

    pub fn hierarchy(&self) -> Option<&Hierarchy> {
        self.hierarchy.as_ref()
    }

    pub fn projection(&self) -> Option<&ProjectionState> {
        self.projection.as_ref()
    }

    pub fn last_detail(&self) -> &EventDetail {
        &self.last
    }

    /// Invariant violations logged so far (non-strict mode).
    pub fn violations(&self) -> usize {
        self.violations
    }

    /// The improper solution S_{ℓ+1} (run mode).
    pub fn improper_solution(&self) -> Option<&CenterSet> {
        self.hierarchy.as_ref().map(Hierarchy::current_solution)
    }

    /// The proper solution Λ (run mode).
    pub fn proper_solution(&self) -> Option<&CenterSet> {
        self.projection.as_ref().map(ProjectionState::proper_solution)
    }

    pub fn apply(&mut self, op: &Op) -> Result<MetricsRow> {
        let start = self.config.record_timing.then(Instant::now);
        apply(&mut self.space, op)?;
        self.updates += 1;
        let mut row = MetricsRow {
            update_idx: self.updates,
            op: op.kind(),
            n_live: self.space.len(),
            improper_cost: None,
            proper_cost: None,
            recourse_improper: None,
            recourse_proper: None,
            cumulative_recourse: None,
            value_estimate: None,
            elapsed_us: 0,
        };
        match self.config.mode {
            Mode::Run => self.run_event(op, &mut row)?,
            Mode::Value => self.value_event(op, &mut row)?,
        }
        if let Some(t) = start {
            row.elapsed_us = t.elapsed().as_micros();
        }
        Ok(row)
    }

    fn run_event(&mut self, op: &Op, row: &mut MetricsRow) -> Result<()> {
        let h = self.hierarchy.as_mut().expect("run mode");
        let proj = self.projection.as_mut().expect("run mode");
        let space = &self.space;
        let old_top = h.current_solution().clone();
        let old_lambda = proj.proper_solution().clone();
        let event = match *op {
            Op::Insert { id, .. } => Event::Insert(id),
            Op::Delete { id } => Event::Delete(id),
        };
        let report = h.update(space, &event)?;
        let new_top = h.current_solution().clone();

        let mut steps = Vec::new();
        steps.push(
            match *op {
                Op::Insert { id, .. } => proj.apply_b_insert(space, id)?,
                Op::Delete { id } => proj.apply_b_delete(space, id)?,
            }
            .size(),
        );
        for &y in old_top.difference(&new_top) {
            steps.push(proj.apply_a_delete(space, y)?.size());
        }
        for &y in new_top.difference(&old_top) {
            steps.push(proj.apply_a_insert(space, y)?.size());
        }

        let mut violations = Vec::new();
        if let Err(e) = h.check_invariants(space) {
            violations.push(e.to_string());
        }
        let bound = h.config().recourse_bound(report.rebuilt_from);
        for (i, &r) in report.layer_recourse.iter().enumerate() {
            if r > bound {
                violations.push(format!("layer {i} recourse {r} exceeds {bound}"));
            }
        }
        for &s in &steps {
            if s > 2 {
                violations.push(format!("projection recourse {s} exceeds 2"));
            }
        }

        let referenced = h.referenced().clone();
        let stale: Vec<PointId> = self.space.retained().filter(|x| !referenced.contains(x)).collect();
        for x in stale {
            self.space.release(x);
        }

        let h = self.hierarchy.as_ref().expect("run mode");
        let proj = self.projection.as_ref().expect("run mode");
        let recourse_improper = old_top.symmetric_difference(&new_top).count();
        self.cumulative += recourse_improper;
        row.improper_cost = Some(h.current_cost(&self.space, self.config.norm)?);
        row.proper_cost = Some(if self.space.is_empty() {
            0.0
        } else {
            clustering_cost(&self.space, proj.proper_solution(), self.config.norm)?
        });
        row.recourse_improper = Some(recourse_improper);
        row.recourse_proper = Some(old_lambda.symmetric_difference(proj.proper_solution()).count());
        row.cumulative_recourse = Some(self.cumulative);
        self.last = EventDetail {
            rebuilt_from: report.rebuilt_from,
            layer_recourse: report.layer_recourse,
            projection_steps: steps,
            violations,
        };
        self.flag_violations(row.update_idx)
    }

    fn value_event(&mut self, op: &Op, row: &mut MetricsRow) -> Result<()> {
        let lmp = self.lmp.as_mut().expect("value mode");
        match *op {
            Op::Insert { id, .. } => lmp.on_insert(&self.space, id)?,
            Op::Delete { id } => {
                lmp.on_delete(&self.space, id)?;
                self.space.release(id);
            }
        }
        row.value_estimate = Some(if self.space.is_empty() {
            0.0
        } else {
            value_estimate(lmp, &self.space, self.config.k, self.config.eps)?
        });
        self.last = EventDetail::default();
        Ok(())
    }

    fn flag_violations(&mut self, update_idx: usize) -> Result<()> {
        if self.last.violations.is_empty() {
            return Ok(());
        }
        let msg = self.last.violations.join("; ");
        if self.config.strict {
            return Err(Error::MembershipViolation(format!("update {update_idx}: {msg}")));
        }
        self.violations += self.last.violations.len();
        warn!("update {update_idx}: {msg}");
        Ok(())
    }
}

/// Runs a whole stream, writing CSV metrics to `out`. The header precedes the
/// first row, so an empty stream leaves `out` empty. Errors carry the line
/// number of the offending operation.
pub fn run_stream<W: Write>(stream: &Stream, config: &EngineConfig, out: W) -> Result<Vec<MetricsRow>> {
    let mut engine = Engine::new(stream.empty_space(), config.clone())?;
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Output(e.to_string());
    let mut rows = Vec::with_capacity(stream.ops.len());
    for (line, op) in &stream.ops {
        let row = engine.apply(op).map_err(|e| Error::AtLine { line: *line, source: Box::new(e) })?;
        if rows.is_empty() {
            writer.write_record(METRICS_HEADER).map_err(io)?;
        }
        writer.write_record(row.record()).map_err(io)?;
        writer.flush().map_err(|e| Error::Output(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub update_idx: usize,
    pub n_live: usize,
    pub cost: f64,
    pub opt: f64,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub checkpoints: Vec<Checkpoint>,
}

impl OracleReport {
    pub fn all_pass(&self) -> bool {
        self.checkpoints.iter().all(|c| c.pass)
    }
}

/// cost/OPT with 0/0 read as 1.
pub fn ratio(cost: f64, opt: f64) -> f64 {
    if opt == 0.0 {
        if cost == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        cost / opt
    }
}

/// Replays the stream and, every `every` events, compares the maintained
/// cost with the exact optimum. Run mode checks cl(S_{ℓ+1})/OPT_k against the
/// hierarchy bound; value mode checks estimate/OPT_k ∈ [1, 12(1+ε)].
pub fn compare_with_oracle(stream: &Stream, config: &EngineConfig, every: usize) -> Result<OracleReport> {
    let every = every.max(1);
    let mut engine = Engine::new(stream.empty_space(), config.clone())?;
    let mut checkpoints = Vec::new();
    for (line, op) in &stream.ops {
        let row = engine.apply(op).map_err(|e| Error::AtLine { line: *line, source: Box::new(e) })?;
        if row.update_idx % every != 0 || engine.space().is_empty() {
            continue;
        }
        let space = engine.space();
        let (cost, lower, upper, norm) = match config.mode {
            Mode::Run => {
                let h = engine.hierarchy().expect("run mode");
                let p = config.norm.search_exponent(space.len());
                let bound = h.config().approximation_bound(p);
                (row.improper_cost.expect("run mode"), 0.0, bound, config.norm)
            }
            Mode::Value => (row.value_estimate.expect("value mode"), 1.0, 12.0 * (1.0 + config.eps), Norm::Finite(1)),
        };
        let opt = brute_opt_clustering(space, config.k, norm)?.1;
        let r = ratio(cost, opt);
        let within = |x: f64, b: f64| x <= b * (1.0 + crate::tol::REL_TOL) + crate::tol::ABS_TOL;
        let pass = within(r, upper) && within(lower, r);
        checkpoints.push(Checkpoint {
            update_idx: row.update_idx,
            n_live: row.n_live,
            cost,
            opt,
            ratio: r,
            lower,
            upper,
            pass,
        });
    }
    Ok(OracleReport { checkpoints })
}
