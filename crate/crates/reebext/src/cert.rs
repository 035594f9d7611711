//! Plain-text certificates: the instance echo, the collapse, the genus
//! labels, the saddle matching, and the assembly trace, in one diff-able
//! file that round-trips byte-identically and re-verifies from scratch.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::allow::{check_labeling, DirectedV, GenusLabeling, Matching};
use crate::assembly::{build_trace, manifold_report, simulate, AssemblyTrace};
use crate::collapse::{
    apply_slot, display_component, to_vgraph, verify, CollapseConfig, CollapseStructure,
    ComponentId, IdSource, SlotChoice, SlotTransition, SweepComponent, SweepState,
};
use crate::model::{
    parse_instance, validate, GapIndex, LabeledReebGraph, StrandOccurrence, StrandSource,
};
use crate::search::Solution;
use crate::symbol::{SymbolName, SymbolTable};

pub const FORMAT_TAG: &str = "reebext-certificate v1";

#[derive(Clone, Debug)]
pub struct Certificate {
    pub graph: LabeledReebGraph,
    pub solution: Solution,
    pub trace: AssemblyTrace,
    /// Winding degrees declared for vertexless circles in the genus section.
    pub circle_degrees: BTreeMap<String, u32>,
}

pub fn make_certificate(graph: &LabeledReebGraph, solution: &Solution) -> Certificate {
    let trace = build_trace(graph, &solution.collapse);
    let circle_degrees = solution
        .vgraph
        .edges
        .iter()
        .filter_map(|e| e.circle_degree.map(|d| (e.id.clone(), d)))
        .collect();
    Certificate {
        graph: graph.clone(),
        solution: solution.clone(),
        trace,
        circle_degrees,
    }
}

fn occurrence_text(graph: &LabeledReebGraph, occ: &StrandOccurrence) -> String {
    graph.display_occurrence(occ)
}

fn occurrence_list(graph: &LabeledReebGraph, occs: &BTreeSet<StrandOccurrence>) -> String {
    if occs.is_empty() {
        "-".to_string()
    } else {
        occs.iter()
            .map(|o| occurrence_text(graph, o))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn component_list(ids: &[ComponentId]) -> String {
    if ids.is_empty() {
        "-".to_string()
    } else {
        ids.iter()
            .map(|id| display_component(*id))
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn serialize_certificate(cert: &Certificate) -> String {
    let graph = &cert.graph;
    let mut out = String::new();
    out.push_str(FORMAT_TAG);
    out.push('\n');

    out.push_str("instance\n");
    out.push_str(&graph.serialize());
    out.push_str("end\n");

    out.push_str("collapse\n");
    for comp in &cert.solution.collapse.initial.components {
        let _ = writeln!(
            out,
            "init {} strands={}",
            display_component(comp.id),
            occurrence_list(graph, &comp.strands)
        );
    }
    for t in &cert.solution.collapse.transitions {
        let split = match &t.split_first {
            None => "-".to_string(),
            Some(occs) => {
                let items: Vec<String> = occs.iter().map(|o| occurrence_text(graph, o)).collect();
                format!("[{}]", items.join(","))
            }
        };
        let _ = writeln!(
            out,
            "transition {} symbol={} in={} out={} drill={} split={}",
            t.slot,
            t.symbol,
            component_list(&t.inputs),
            component_list(&t.outputs),
            t.drill.map(display_component).unwrap_or_else(|| "-".into()),
            split
        );
    }
    let mut pairs = cert.solution.collapse.pairing.clone();
    pairs.sort_unstable();
    for (f, i) in pairs {
        let _ = writeln!(
            out,
            "pair {} = {}",
            display_component(f),
            display_component(i)
        );
    }
    out.push_str("end\n");

    out.push_str("genus\n");
    for e in &cert.solution.vgraph.edges {
        let genus = cert.solution.labeling.genus(&e.id);
        match e.circle_degree {
            Some(d) => {
                let _ = writeln!(out, "circle {} degree={} genus={}", e.id, d, genus);
            }
            None => {
                let _ = writeln!(out, "edge {} genus={}", e.id, genus);
            }
        }
    }
    out.push_str("end\n");

    out.push_str("gamma\n");
    for (k, (a, b)) in cert.solution.matching.pairs.iter().enumerate() {
        let va = &graph.vertices[cert.solution.vgraph.vertices[*a].wf_vertex].id;
        let vb = &graph.vertices[cert.solution.vgraph.vertices[*b].wf_vertex].id;
        let via = cert.solution.matching.witnesses[k].join(",");
        let _ = writeln!(out, "match {va} -> {vb} via {via}");
    }
    out.push_str("end\n");

    out.push_str("trace\n");
    for line in render_trace_lines(&cert.trace) {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

fn render_trace_lines(trace: &AssemblyTrace) -> Vec<String> {
    let mut lines = Vec::new();
    for step in &trace.steps {
        lines.push(format!(
            "step {} slot={} part={} attach={} K={} data={}",
            step.index,
            step.slot,
            step.part,
            step.attach,
            step.carrier
                .map(display_component)
                .unwrap_or_else(|| "-".into()),
            step.data
        ));
    }
    let mut pairs = trace.close_pairs.clone();
    pairs.sort_unstable();
    let pairs_text = if pairs.is_empty() {
        "-".to_string()
    } else {
        pairs
            .iter()
            .map(|(f, i)| format!("{}={}", display_component(*f), display_component(*i)))
            .collect::<Vec<_>>()
            .join(",")
    };
    lines.push(format!("close pairs={pairs_text}"));
    lines
}

#[derive(Error, Debug)]
pub enum CertError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("instance section: {0}")]
    Instance(#[from] crate::model::ParseError),
    #[error("collapse replay failed: {0}")]
    Replay(String),
}

fn syntax(line: usize, msg: impl Into<String>) -> CertError {
    CertError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn parse_component_id(line: usize, text: &str) -> Result<ComponentId, CertError> {
    text.strip_prefix('C')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| syntax(line, format!("bad component id '{text}'")))
}

fn parse_component_list(line: usize, text: &str) -> Result<Vec<ComponentId>, CertError> {
    if text == "-" {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| parse_component_id(line, t))
        .collect()
}

fn parse_occurrence(
    graph: &LabeledReebGraph,
    line: usize,
    text: &str,
    gap: GapIndex,
) -> Result<StrandOccurrence, CertError> {
    let (id, crossing) = text
        .rsplit_once('#')
        .ok_or_else(|| syntax(line, format!("bad strand '{text}'")))?;
    let crossing: u32 = crossing
        .parse()
        .map_err(|_| syntax(line, format!("bad crossing in '{text}'")))?;
    let source = if let Some(e) = graph.edges.iter().position(|e| e.id == id) {
        StrandSource::Edge(e)
    } else if let Some(c) = graph.circles.iter().position(|c| c.id == id) {
        StrandSource::Circle(c)
    } else {
        return Err(syntax(line, format!("unknown strand source '{id}'")));
    };
    Ok(StrandOccurrence {
        source,
        crossing,
        gap,
    })
}

fn parse_occurrence_set(
    graph: &LabeledReebGraph,
    line: usize,
    text: &str,
    gap: GapIndex,
) -> Result<BTreeSet<StrandOccurrence>, CertError> {
    if text == "-" {
        return Ok(BTreeSet::new());
    }
    text.split(',')
        .map(|t| parse_occurrence(graph, line, t, gap))
        .collect()
}

/// Parse a certificate and replay its collapse to rebuild the per-gap
/// states, the quotient graph and the trace. Verification proper is
/// [`reverify`].
pub fn parse_certificate(text: &str, table: &SymbolTable) -> Result<Certificate, CertError> {
    let mut lines = text.lines().enumerate().peekable();
    match lines.next() {
        Some((_, l)) if l.trim() == FORMAT_TAG => {}
        other => {
            return Err(syntax(
                other.map(|(i, _)| i + 1).unwrap_or(1),
                format!("expected '{FORMAT_TAG}'"),
            ))
        }
    }

    // Collect sections in order.
    let mut sections: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match (&current, line) {
            (None, name) if ["instance", "collapse", "genus", "gamma", "trace"].contains(&name) => {
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
            }
            (None, other) => return Err(syntax(line_no, format!("unexpected line '{other}'"))),
            (Some(_), "end") => current = None,
            (Some(name), content) => sections
                .get_mut(name)
                .unwrap()
                .push((line_no, content.to_string())),
        }
    }
    if current.is_some() {
        return Err(syntax(text.lines().count(), "unterminated section"));
    }

    let instance_body: String = sections
        .get("instance")
        .ok_or_else(|| syntax(1, "missing instance section"))?
        .iter()
        .map(|(_, l)| format!("{l}\n"))
        .collect();
    let graph = parse_instance(&instance_body)?;
    let n = graph.slot_count;
    let cut = if n == 0 { 0 } else { n - 1 };

    let mut initial = SweepState::default();
    let mut transitions: Vec<SlotTransition> = Vec::new();
    let mut pairing: Vec<(ComponentId, ComponentId)> = Vec::new();
    for (line_no, line) in sections.get("collapse").map(Vec::as_slice).unwrap_or(&[]) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            Some("init") => {
                if tokens.len() != 3 {
                    return Err(syntax(*line_no, "expected 'init <id> strands=<list>'"));
                }
                let id = parse_component_id(*line_no, tokens[1])?;
                let strands = tokens[2]
                    .strip_prefix("strands=")
                    .ok_or_else(|| syntax(*line_no, "expected strands="))?;
                initial.components.push(SweepComponent {
                    id,
                    strands: parse_occurrence_set(&graph, *line_no, strands, cut)?,
                });
            }
            Some("transition") => {
                if tokens.len() != 7 {
                    return Err(syntax(*line_no, "malformed transition line"));
                }
                let slot: usize = tokens[1]
                    .parse()
                    .map_err(|_| syntax(*line_no, "bad slot"))?;
                let symbol = tokens[2]
                    .strip_prefix("symbol=")
                    .and_then(SymbolName::parse)
                    .ok_or_else(|| syntax(*line_no, "bad symbol"))?;
                let inputs = parse_component_list(
                    *line_no,
                    tokens[3]
                        .strip_prefix("in=")
                        .ok_or_else(|| syntax(*line_no, "expected in="))?,
                )?;
                let outputs = parse_component_list(
                    *line_no,
                    tokens[4]
                        .strip_prefix("out=")
                        .ok_or_else(|| syntax(*line_no, "expected out="))?,
                )?;
                let drill_text = tokens[5]
                    .strip_prefix("drill=")
                    .ok_or_else(|| syntax(*line_no, "expected drill="))?;
                let drill = if drill_text == "-" {
                    None
                } else {
                    Some(parse_component_id(*line_no, drill_text)?)
                };
                let split_text = tokens[6]
                    .strip_prefix("split=")
                    .ok_or_else(|| syntax(*line_no, "expected split="))?;
                let split_first = if split_text == "-" {
                    None
                } else {
                    let inner = split_text
                        .strip_prefix('[')
                        .and_then(|s| s.strip_suffix(']'))
                        .ok_or_else(|| syntax(*line_no, "split list must be bracketed"))?;
                    if inner.is_empty() {
                        Some(Vec::new())
                    } else {
                        Some(
                            inner
                                .split(',')
                                .map(|t| parse_occurrence(&graph, *line_no, t, slot))
                                .collect::<Result<Vec<_>, _>>()?,
                        )
                    }
                };
                transitions.push(SlotTransition {
                    slot,
                    symbol,
                    inputs,
                    outputs,
                    drill,
                    split_first,
                });
            }
            Some("pair") => {
                if tokens.len() != 4 || tokens[2] != "=" {
                    return Err(syntax(*line_no, "expected 'pair <final> = <initial>'"));
                }
                pairing.push((
                    parse_component_id(*line_no, tokens[1])?,
                    parse_component_id(*line_no, tokens[3])?,
                ));
            }
            _ => return Err(syntax(*line_no, "unexpected collapse line")),
        }
    }
    initial.components.sort_by_key(|c| c.id);

    // Replay to rebuild the per-gap states.
    let config = CollapseConfig::default();
    let mut states = Vec::new();
    let mut state = initial.clone();
    for t in &transitions {
        let choice = SlotChoice {
            symbol: t.symbol,
            drill: t.drill,
            split_first: t.split_first.as_ref().map(|v| v.iter().copied().collect()),
        };
        let mut ids = IdSource::Scripted(VecDeque::from(t.outputs.clone()));
        let (next, _) = apply_slot(&graph, table, &config, &state, t.slot, &choice, &mut ids)
            .map_err(|e| CertError::Replay(e.to_string()))?;
        states.push(next.clone());
        state = next;
    }
    let collapse = CollapseStructure {
        initial,
        states,
        transitions,
        pairing,
    };
    // The quotient projection needs a structurally sane pairing; reject
    // anything that does not biject the cut components.
    let final_ids: BTreeSet<ComponentId> = collapse
        .final_state()
        .components
        .iter()
        .map(|c| c.id)
        .collect();
    let initial_ids: BTreeSet<ComponentId> =
        collapse.initial.components.iter().map(|c| c.id).collect();
    let from: BTreeSet<ComponentId> = collapse.pairing.iter().map(|p| p.0).collect();
    let to: BTreeSet<ComponentId> = collapse.pairing.iter().map(|p| p.1).collect();
    if from != final_ids || to != initial_ids || collapse.pairing.len() != final_ids.len() {
        return Err(CertError::Replay(
            "cut pairing is not a bijection over the cut components".to_string(),
        ));
    }
    let vgraph = to_vgraph(&graph, table, &collapse);

    let mut labels = BTreeMap::new();
    let mut circle_degrees = BTreeMap::new();
    for (line_no, line) in sections.get("genus").map(Vec::as_slice).unwrap_or(&[]) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.first().copied() {
            Some("edge") if tokens.len() == 3 => {
                let genus: u64 = tokens[2]
                    .strip_prefix("genus=")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| syntax(*line_no, "bad genus"))?;
                labels.insert(tokens[1].to_string(), genus);
            }
            Some("circle") if tokens.len() == 4 => {
                let degree: u32 = tokens[2]
                    .strip_prefix("degree=")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| syntax(*line_no, "bad degree"))?;
                let genus: u64 = tokens[3]
                    .strip_prefix("genus=")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| syntax(*line_no, "bad genus"))?;
                labels.insert(tokens[1].to_string(), genus);
                circle_degrees.insert(tokens[1].to_string(), degree);
            }
            _ => return Err(syntax(*line_no, "unexpected genus line")),
        }
    }
    let labeling = GenusLabeling { labels };

    let mut pairs = Vec::new();
    let mut witnesses = Vec::new();
    for (line_no, line) in sections.get("gamma").map(Vec::as_slice).unwrap_or(&[]) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 6 || tokens[0] != "match" || tokens[2] != "->" || tokens[4] != "via" {
            return Err(syntax(*line_no, "expected 'match <a> -> <b> via <edges>'"));
        }
        let find = |id: &str| -> Result<usize, CertError> {
            let wf = graph
                .vertices
                .iter()
                .position(|v| v.id == id)
                .ok_or_else(|| syntax(*line_no, format!("unknown vertex '{id}'")))?;
            vgraph
                .vertices
                .iter()
                .position(|v| v.wf_vertex == wf)
                .ok_or_else(|| syntax(*line_no, format!("vertex '{id}' not in quotient")))
        };
        pairs.push((find(tokens[1])?, find(tokens[3])?));
        witnesses.push(tokens[5].split(',').map(str::to_string).collect());
    }
    let matching = Matching { pairs, witnesses };

    let solution = Solution {
        collapse,
        vgraph,
        labeling,
        matching,
    };
    // The trace is fully determined by the collapse; a stored section that
    // disagrees with the rebuilt one is an inconsistent certificate.
    let trace = build_trace(&graph, &solution.collapse);
    let stored: Vec<&str> = sections
        .get("trace")
        .map(Vec::as_slice)
        .unwrap_or(&[])
        .iter()
        .map(|(_, l)| l.as_str())
        .collect();
    let rebuilt = render_trace_lines(&trace);
    if stored != rebuilt.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(CertError::Replay(
            "trace section does not match the collapse".to_string(),
        ));
    }
    Ok(Certificate {
        graph,
        solution,
        trace,
        circle_degrees,
    })
}

/// Re-verify a parsed certificate from scratch: instance validity, collapse
/// replay, genus rules, matching witnesses, trace simulation and manifold
/// invariants. Returns diagnostics; empty means the certificate checks out.
pub fn reverify(cert: &Certificate, table: &SymbolTable, config: &CollapseConfig) -> Vec<String> {
    let mut report = Vec::new();
    let graph = &cert.graph;
    let validation = validate(graph);
    if !validation.is_valid() {
        for v in &validation.violations {
            report.push(format!("instance: {v}"));
        }
        return report;
    }

    report.extend(verify(graph, table, config, &cert.solution.collapse));

    let vgraph = &cert.solution.vgraph;
    for e in vgraph.edges.iter() {
        if !cert.solution.labeling.labels.contains_key(&e.id) {
            report.push(format!("genus: edge {} unlabeled", e.id));
        }
        if let Some(d) = e.circle_degree {
            match cert.circle_degrees.get(&e.id) {
                Some(&dd) if dd == d => {}
                Some(&dd) => report.push(format!(
                    "genus: circle {} declared degree {dd}, rebuilt degree {d}",
                    e.id
                )),
                None => report.push(format!("genus: circle {} missing degree", e.id)),
            }
        }
    }
    if !crate::collapse::vstar_degrees_hold(table, vgraph) {
        report.push("quotient: vertex degrees violate the symbol table".to_string());
    }
    let directed = DirectedV::new(vgraph, table);
    report.extend(check_labeling(table, &directed, &cert.solution.labeling));

    // Matching: a bijection between the saddle sets with valid witnesses.
    let m = &cert.solution.matching;
    let gplus: BTreeSet<usize> = vgraph.gplus.iter().copied().collect();
    let gminus: BTreeSet<usize> = vgraph.gminus.iter().copied().collect();
    let from: BTreeSet<usize> = m.pairs.iter().map(|p| p.0).collect();
    let to: BTreeSet<usize> = m.pairs.iter().map(|p| p.1).collect();
    if from != gplus || to != gminus || m.pairs.len() != gplus.len() {
        report.push("gamma: not a bijection between the saddle sets".to_string());
    }
    for (k, (a, b)) in m.pairs.iter().enumerate() {
        let mut at = *a;
        let mut ok = true;
        for eid in &m.witnesses[k] {
            match vgraph.edge(eid) {
                Some(e) if e.tail == Some(at) => at = e.head.unwrap(),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || at != *b || m.witnesses[k].is_empty() {
            report.push(format!("gamma: witness {k} is not a sweep-directed walk"));
        }
    }

    if report.is_empty() {
        match simulate(
            graph,
            table,
            &cert.trace,
            &cert.solution.collapse,
            vgraph,
            &cert.solution.labeling,
        ) {
            Ok(_) => match manifold_report(graph, &cert.trace, vgraph) {
                Ok(_) => {}
                Err(e) => report.push(format!("manifold: {e}")),
            },
            Err(e) => report.push(format!("trace: {e}")),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{decide, SearchLimits};

    fn certify(text: &str) -> (Certificate, String) {
        let graph = parse_instance(text).unwrap();
        let table = SymbolTable::shipped();
        let (v, _) = decide(&graph, &table, &SearchLimits::default()).unwrap();
        let cert = make_certificate(&graph, v.solution().unwrap());
        let ser = serialize_certificate(&cert);
        (cert, ser)
    }

    const SPHERE_MP: &str =
        "slots 2\nvertex a slot=0 sign=-\nvertex b slot=1 sign=+\nedge e a -> b wraps=0\n";

    #[test]
    fn certificates_round_trip_byte_identically() {
        for text in [
            "slots 2\nvertex a slot=0 sign=+\nvertex b slot=1 sign=-\nedge e a -> b wraps=0\n",
            SPHERE_MP,
            "slots 0\ncircle c degree=2\n",
            "slots 2\nvertex m slot=0 sign=-\nvertex p slot=1 sign=+\nedge e m -> p wraps=0\ncircle t degree=1\n",
        ] {
            let (_, ser) = certify(text);
            let table = SymbolTable::shipped();
            let parsed = parse_certificate(&ser, &table).unwrap();
            assert_eq!(serialize_certificate(&parsed), ser);
        }
    }

    #[test]
    fn reverification_accepts_emitted_certificates() {
        let (cert, _) = certify(SPHERE_MP);
        let table = SymbolTable::shipped();
        let report = reverify(&cert, &table, &CollapseConfig::default());
        assert!(report.is_empty(), "{report:?}");
    }

    #[test]
    fn tampered_genus_labels_are_rejected() {
        // The ball certificate pins genus 0 on its single disk edge.
        let (_, ser) = certify(
            "slots 2\nvertex a slot=0 sign=+\nvertex b slot=1 sign=-\nedge e a -> b wraps=0\n",
        );
        let tampered = ser.replace("genus=0", "genus=1");
        let table = SymbolTable::shipped();
        let cert = parse_certificate(&tampered, &table).unwrap();
        let report = reverify(&cert, &table, &CollapseConfig::default());
        assert!(!report.is_empty());
    }

    #[test]
    fn conservation_cycles_admit_nonminimal_labels() {
        // Raising every label on the drilled sphere's cycle stays valid:
        // the floating level surface becomes a torus instead of a sphere.
        let (_, ser) = certify(SPHERE_MP);
        let raised = ser.replace("genus=0", "genus=1");
        let table = SymbolTable::shipped();
        let cert = parse_certificate(&raised, &table).unwrap();
        let report = reverify(&cert, &table, &CollapseConfig::default());
        assert!(report.is_empty(), "{report:?}");
    }

    #[test]
    fn tampered_trace_sections_are_rejected_at_parse() {
        let (_, ser) = certify(SPHERE_MP);
        let tampered = ser.replace("part=MOD(N+)", "part=MOD(N-)");
        let table = SymbolTable::shipped();
        match parse_certificate(&tampered, &table) {
            Err(CertError::Replay(msg)) => assert!(msg.contains("trace")),
            other => panic!("expected a trace mismatch, got {other:?}"),
        }
    }

    #[test]
    fn tampered_pairings_fail_replay_or_closure() {
        let (cert, ser) = certify(SPHERE_MP);
        let table = SymbolTable::shipped();
        // Swap the pairing target to a nonexistent component.
        let bad = ser.replace(
            &format!(
                "pair {} =",
                display_component(cert.solution.collapse.pairing[0].0)
            ),
            "pair C99 =",
        );
        if let Ok(cert) = parse_certificate(&bad, &table) {
            let report = reverify(&cert, &table, &CollapseConfig::default());
            assert!(!report.is_empty());
        }
    }
}
