//! Deterministic DOT renderings of the labeled Reeb graph, the quotient
//! graph of a certificate, and the collapse correspondence between them.

use std::fmt::Write as _;

use crate::model::LabeledReebGraph;
use crate::search::Solution;

pub fn emit_wf(graph: &LabeledReebGraph) -> String {
    let mut out = String::new();
    out.push_str("digraph wf {\n  rankdir=LR;\n");
    let mut vs: Vec<usize> = (0..graph.vertices.len()).collect();
    vs.sort_by_key(|&i| graph.vertices[i].slot);
    for i in vs {
        let v = &graph.vertices[i];
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{}\\nslot {} {}\"];",
            v.id, v.id, v.slot, v.sign
        );
    }
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"{} wraps={}\"];",
            graph.vertices[e.tail].id, graph.vertices[e.head].id, e.id, e.wraps
        );
    }
    for c in &graph.circles {
        let _ = writeln!(
            out,
            "  \"{}\" [shape=circle,peripheries=2,label=\"{}\\ndegree {}\"];",
            c.id, c.id, c.degree
        );
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [style=dotted];", c.id, c.id);
    }
    out.push_str("}\n");
    out
}

pub fn emit_v(graph: &LabeledReebGraph, solution: &Solution) -> String {
    let mut out = String::new();
    out.push_str("digraph v {\n  rankdir=LR;\n");
    emit_v_body(&mut out, graph, solution, "");
    out.push_str("}\n");
    out
}

fn v_node_name(index: usize) -> String {
    format!("w{index}")
}

fn emit_v_body(out: &mut String, graph: &LabeledReebGraph, solution: &Solution, indent: &str) {
    let vg = &solution.vgraph;
    for (i, v) in vg.vertices.iter().enumerate() {
        let wf = &graph.vertices[v.wf_vertex];
        let _ = writeln!(
            out,
            "{indent}  \"{}\" [label=\"{}\\n{} @ slot {}\"];",
            v_node_name(i),
            wf.id,
            v.symbol,
            v.slot
        );
    }
    for e in &vg.edges {
        let genus = solution.labeling.genus(&e.id);
        match (e.tail, e.head) {
            (Some(t), Some(h)) => {
                let strands = e.crossings.first().map(|c| c.strands.len()).unwrap_or(0);
                let _ = writeln!(
                    out,
                    "{indent}  \"{}\" -> \"{}\" [label=\"{} g={} strands={}\"];",
                    v_node_name(t),
                    v_node_name(h),
                    e.id,
                    genus,
                    strands
                );
            }
            _ => {
                let _ = writeln!(
                    out,
                    "{indent}  \"{}\" [shape=circle,peripheries=2,label=\"{}\\ndegree {} g={}\"];",
                    e.id,
                    e.id,
                    e.circle_degree.unwrap_or(0),
                    genus
                );
                let _ = writeln!(
                    out,
                    "{indent}  \"{}\" -> \"{}\" [style=dotted];",
                    e.id, e.id
                );
            }
        }
    }
}

/// Side-by-side rendering with dashed correspondence arrows from each
/// Reeb-graph vertex to its image vertex.
pub fn emit_collapse(graph: &LabeledReebGraph, solution: &Solution) -> String {
    let mut out = String::new();
    out.push_str("digraph collapse {\n  rankdir=LR;\n");
    out.push_str("  subgraph cluster_wf {\n    label=\"W\";\n");
    let mut vs: Vec<usize> = (0..graph.vertices.len()).collect();
    vs.sort_by_key(|&i| graph.vertices[i].slot);
    for i in vs {
        let v = &graph.vertices[i];
        let _ = writeln!(
            out,
            "    \"{}\" [label=\"{}\\nslot {} {}\"];",
            v.id, v.id, v.slot, v.sign
        );
    }
    for e in &graph.edges {
        let _ = writeln!(
            out,
            "    \"{}\" -> \"{}\" [label=\"{}\"];",
            graph.vertices[e.tail].id, graph.vertices[e.head].id, e.id
        );
    }
    for c in &graph.circles {
        let _ = writeln!(
            out,
            "    \"{}\" [shape=circle,peripheries=2,label=\"{}\"];",
            c.id, c.id
        );
    }
    out.push_str("  }\n  subgraph cluster_v {\n    label=\"V\";\n");
    emit_v_body(&mut out, graph, solution, "  ");
    out.push_str("  }\n");
    for (i, v) in solution.vgraph.vertices.iter().enumerate() {
        let wf = &graph.vertices[v.wf_vertex];
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [style=dashed,constraint=false];",
            wf.id,
            v_node_name(i)
        );
    }
    out.push_str("}\n");
    out
}
