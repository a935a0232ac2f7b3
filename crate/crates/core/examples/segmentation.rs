//! Splits a trajectory into robust and non-robust segments by a shortest
//! path over the robustness graph.

use contraplan::graph::{build_graph_from_steps, get_segments, min_cost_path, SegmentKind};

fn main() -> contraplan::Result<()> {
    let per_step = [0.8, 1.5, 1.4, 0.7, 0.9];
    let (c_ro, c_nr) = (1.0, 1000.0);

    let graph = build_graph_from_steps(&per_step, c_ro, c_nr)?;
    println!("{} nodes, {} edges", graph.node_count(), graph.edges.len());
    for e in &graph.edges {
        println!(
            "  ({}, {})  metric {:>6.3}  {:<10}  cost {:>8.3}",
            e.from,
            e.to,
            e.metric,
            if e.robust { "robust" } else { "non-robust" },
            e.cost
        );
    }

    let plan = min_cost_path(&graph)?;
    assert_eq!(plan, get_segments(&per_step, c_ro, c_nr)?);
    println!("best decomposition, cost {:.3}:", plan.cost);
    for s in &plan.segments {
        let kind = match s.kind {
            SegmentKind::Robust => "open loop",
            SegmentKind::NonRobust => "closed loop",
        };
        println!("  steps {}..{}  metric {:.3}  {kind}", s.start, s.end, s.metric);
    }
    Ok(())
}
