//! Segmentation of a planned trajectory into open-loop and closed-loop parts.
//!
//! Nodes are the time points `0..=N`. Every forward pair `(i, j)` is an edge
//! that is robust when the segment metric over `i..j` is below one. Robust
//! edges get cheaper the longer they are, non-robust edges more expensive,
//! so the cheapest path from `0` to `N` covers as much of the trajectory as
//! possible with long robust segments.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{segment_product, DivergenceProfile};

const COST_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Robust,
    NonRobust,
}

/// `c_ro / (j - i)` for robust edges, `c_nr * (j - i)` otherwise.
pub fn edge_cost(i: usize, j: usize, robust: bool, c_ro: f64, c_nr: f64) -> Result<f64> {
    if i >= j {
        return Err(Error::Index(format!("edge ({i}, {j}) must go forward in time")));
    }
    let span = (j - i) as f64;
    Ok(if robust { c_ro / span } else { c_nr * span })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub metric: f64,
    pub robust: bool,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessGraph {
    /// Number of steps `N`; nodes are `0..=N`.
    pub steps: usize,
    pub c_ro: f64,
    pub c_nr: f64,
    /// All forward edges, ordered by `(from, to)`.
    pub edges: Vec<Edge>,
}

impl RobustnessGraph {
    pub fn node_count(&self) -> usize {
        self.steps + 1
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        if from >= to || to > self.steps {
            return None;
        }
        self.edges.get(row_offset(self.steps, from) + (to - from - 1))
    }
}

/// Index of the first edge leaving `from` when rows hold `n - from` edges.
fn row_offset(n: usize, from: usize) -> usize {
    from * n - from * from.saturating_sub(1) / 2
}

pub fn build_graph_from_steps(per_step: &[f64], c_ro: f64, c_nr: f64) -> Result<RobustnessGraph> {
    if per_step.is_empty() {
        return Err(Error::DegenerateInput("per-step metric vector is empty".into()));
    }
    if !(c_ro > 0.0) || !(c_nr > c_ro) || !c_nr.is_finite() {
        return Err(Error::Config(format!(
            "edge costs must satisfy 0 < c_ro < c_nr (got {c_ro}, {c_nr})"
        )));
    }
    let n = per_step.len();
    let mut edges = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i + 1..=n {
            let metric = segment_product(per_step, i, j)?;
            let robust = metric < 1.0;
            edges.push(Edge {
                from: i,
                to: j,
                metric,
                robust,
                cost: edge_cost(i, j, robust, c_ro, c_nr)?,
            });
        }
    }
    Ok(RobustnessGraph {
        steps: n,
        c_ro,
        c_nr,
        edges,
    })
}

pub fn build_robustness_graph(
    profile: &DivergenceProfile,
    c_ro: f64,
    c_nr: f64,
) -> Result<RobustnessGraph> {
    build_graph_from_steps(&profile.per_step_expected, c_ro, c_nr)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
    pub metric: f64,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn is_robust(&self) -> bool {
        self.kind == SegmentKind::Robust
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
    pub cost: f64,
}

impl SegmentPlan {
    pub fn steps(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn robust_steps(&self) -> usize {
        self.segments.iter().filter(|s| s.is_robust()).map(Segment::len).sum()
    }

    pub fn is_fully_robust(&self) -> bool {
        self.segments.iter().all(Segment::is_robust)
    }

    /// Segments start at 0, abut each other and end at `steps`.
    pub fn is_contiguous(&self, steps: usize) -> bool {
        let mut at = 0;
        for s in &self.segments {
            if s.start != at || s.end <= s.start {
                return false;
            }
            at = s.end;
        }
        at == steps
    }

    /// `(start, end, kind)` triples.
    pub fn spans(&self) -> Vec<(usize, usize, SegmentKind)> {
        self.segments.iter().map(|s| (s.start, s.end, s.kind)).collect()
    }
}

#[derive(Clone)]
struct Label {
    cost: f64,
    segments: usize,
    /// Per-step kinds so far; `true` = robust.
    cover: Vec<bool>,
    prev: Option<(usize, usize)>,
    edge: Option<usize>,
}

fn cost_cmp(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= COST_RTOL * a.abs().max(b.abs()) {
        Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    }
}

/// Cheaper, then fewer segments, then robust coverage starting earlier.
fn better(a: &Label, b: &Label) -> bool {
    let by = cost_cmp(a.cost, b.cost)
        .then(a.segments.cmp(&b.segments))
        .then_with(|| b.cover.cmp(&a.cover));
    by == Ordering::Less
}

/// Exact cheapest path `0 -> N`. Back-to-back non-robust segments never
/// appear: their costs add up to that of the single spanning edge, which is
/// preferred.
pub fn min_cost_path(graph: &RobustnessGraph) -> Result<SegmentPlan> {
    let n = graph.steps;
    // labels[node][k]: best path ending at `node` whose last segment is
    // robust (k = 0) or non-robust (k = 1); node 0 uses k = 0 as the start.
    let mut labels: Vec<[Option<Label>; 2]> = vec![[None, None]; n + 1];
    labels[0][0] = Some(Label {
        cost: 0.0,
        segments: 0,
        cover: Vec::new(),
        prev: None,
        edge: None,
    });
    for (idx, e) in graph.edges.iter().enumerate() {
        debug_assert!(e.from < e.to);
        let k = usize::from(!e.robust);
        for pk in 0..2 {
            if !e.robust && pk == 1 {
                continue;
            }
            let Some(from) = &labels[e.from][pk] else {
                continue;
            };
            let mut cover = from.cover.clone();
            cover.extend(std::iter::repeat_n(e.robust, e.to - e.from));
            let cand = Label {
                cost: from.cost + e.cost,
                segments: from.segments + 1,
                cover,
                prev: Some((e.from, pk)),
                edge: Some(idx),
            };
            let slot = &mut labels[e.to][k];
            if slot.as_ref().is_none_or(|cur| better(&cand, cur)) {
                *slot = Some(cand);
            }
        }
    }
    // Edges are ordered by `from`, so every label at `e.from` is final
    // before any edge leaving it is relaxed.
    let end = match (&labels[n][0], &labels[n][1]) {
        (Some(a), Some(b)) => {
            if better(b, a) {
                1
            } else {
                0
            }
        }
        (Some(_), None) => 0,
        (None, Some(_)) => 1,
        (None, None) => return Err(Error::DegenerateInput("no path through the graph".into())),
    };
    let cost = labels[n][end].as_ref().expect("label").cost;
    let mut segments = Vec::new();
    let mut at = (n, end);
    while let Some(label) = labels[at.0][at.1].as_ref() {
        let (Some(prev), Some(edge)) = (label.prev, label.edge) else {
            break;
        };
        let e = &graph.edges[edge];
        segments.push(Segment {
            start: e.from,
            end: e.to,
            kind: if e.robust {
                SegmentKind::Robust
            } else {
                SegmentKind::NonRobust
            },
            metric: e.metric,
        });
        at = prev;
    }
    segments.reverse();
    Ok(SegmentPlan { segments, cost })
}

/// Builds the graph and returns its cheapest decomposition.
pub fn get_segments(per_step: &[f64], c_ro: f64, c_nr: f64) -> Result<SegmentPlan> {
    min_cost_path(&build_graph_from_steps(per_step, c_ro, c_nr)?)
}
