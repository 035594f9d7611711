//! Allowability of a verified collapse: reachability between quotient
//! vertices, the bijective matching between genus-raising and genus-lowering
//! saddles, and the equivalent genus-labeling flow formulation. The two
//! routes are computed independently and cross-checked against each other.

use std::collections::{BTreeMap, VecDeque};

use crate::collapse::VGraph;
use crate::symbol::{GenusRule, SymbolTable};

/// The quotient graph with every edge directed in sweep direction, plus the
/// derived zero-genus constraints on disk edges.
pub struct DirectedV<'a> {
    pub vgraph: &'a VGraph,
    /// Per edge: must carry genus 0 (newborn or dying disks).
    pub force_zero: Vec<bool>,
}

impl<'a> DirectedV<'a> {
    pub fn new(vgraph: &'a VGraph, table: &SymbolTable) -> DirectedV<'a> {
        let force_zero = vgraph
            .edges
            .iter()
            .map(|e| {
                let tail_rule = e
                    .tail
                    .map(|t| table.signature(vgraph.vertices[t].symbol).genus_rule);
                let head_rule = e
                    .head
                    .map(|h| table.signature(vgraph.vertices[h].symbol).genus_rule);
                tail_rule == Some(GenusRule::ForceZeroOut)
                    || head_rule == Some(GenusRule::ForceZeroIn)
            })
            .collect();
        DirectedV { vgraph, force_zero }
    }
}

/// Sweep-directed reachability between quotient vertices.
///
/// The underlying relation on vertices reads: x precedes y iff there is a
/// path from x to y whose level map is an orientation-preserving immersion,
/// which is exactly a sweep-directed walk from y to x. Whether a vertex
/// precedes itself via the empty path is a convention; both are computed.
pub struct Reach {
    n: usize,
    /// Paths with at least one edge.
    positive: Vec<bool>,
    /// Convention flag: admit the empty path, making the relation reflexive.
    pub include_empty_path: bool,
}

impl Reach {
    /// True iff a sweep-directed walk leads from `from` to `to`.
    pub fn sweep_reachable(&self, from: usize, to: usize) -> bool {
        (self.include_empty_path && from == to) || self.positive[from * self.n + to]
    }
}

pub fn reach(v: &DirectedV, include_empty_path: bool) -> Reach {
    let n = v.vgraph.vertices.len();
    let mut positive = vec![false; n * n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &v.vgraph.edges {
        if let (Some(t), Some(h)) = (e.tail, e.head) {
            adj[t].push(h);
        }
    }
    for start in 0..n {
        let mut queue: VecDeque<usize> = adj[start].iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            if !positive[start * n + x] {
                positive[start * n + x] = true;
                queue.extend(adj[x].iter().copied());
            }
        }
    }
    Reach {
        n,
        positive,
        include_empty_path,
    }
}

/// A bijection between genus-raising and genus-lowering vertices together
/// with one sweep-directed witness walk per pair.
#[derive(Clone, Debug)]
pub struct Matching {
    /// (raising vertex index, lowering vertex index) pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Edge-id sequence of a sweep-directed walk per pair.
    pub witnesses: Vec<Vec<String>>,
}

/// Maximum bipartite matching over the reachability relation, by augmenting
/// paths; deterministic by vertex index order. Returns a full bijection or
/// `None`.
pub fn allowable_matching(v: &DirectedV, reach: &Reach) -> Option<Matching> {
    let gplus = &v.vgraph.gplus;
    let gminus = &v.vgraph.gminus;
    if gplus.len() != gminus.len() {
        return None;
    }
    if gplus.is_empty() {
        return Some(Matching {
            pairs: Vec::new(),
            witnesses: Vec::new(),
        });
    }
    let adj: Vec<Vec<usize>> = gplus
        .iter()
        .map(|&a| {
            (0..gminus.len())
                .filter(|&bi| reach.sweep_reachable(a, gminus[bi]))
                .collect()
        })
        .collect();
    let mut matched_to: Vec<Option<usize>> = vec![None; gminus.len()];

    fn augment(
        a: usize,
        adj: &[Vec<usize>],
        matched_to: &mut Vec<Option<usize>>,
        seen: &mut [bool],
    ) -> bool {
        for &b in &adj[a] {
            if seen[b] {
                continue;
            }
            seen[b] = true;
            if matched_to[b].is_none() || augment(matched_to[b].unwrap(), adj, matched_to, seen) {
                matched_to[b] = Some(a);
                return true;
            }
        }
        false
    }

    let mut size = 0;
    for a in 0..gplus.len() {
        let mut seen = vec![false; gminus.len()];
        if augment(a, &adj, &mut matched_to, &mut seen) {
            size += 1;
        }
    }
    if size < gplus.len() {
        return None;
    }

    let mut pairs: Vec<(usize, usize)> = matched_to
        .iter()
        .enumerate()
        .map(|(b, a)| (gplus[a.unwrap()], gminus[b]))
        .collect();
    pairs.sort_unstable();
    let witnesses = pairs
        .iter()
        .map(|&(a, b)| witness_walk(v, a, b).expect("matched pair must be reachable"))
        .collect();
    Some(Matching { pairs, witnesses })
}

/// Shortest sweep-directed walk (at least one edge) between two vertices,
/// as edge ids.
pub fn witness_walk(v: &DirectedV, from: usize, to: usize) -> Option<Vec<String>> {
    let n = v.vgraph.vertices.len();
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; n]; // (vertex, edge index)
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    // Seed with the out-edges of `from` so that walks from a vertex to
    // itself traverse a genuine cycle.
    for (ei, e) in v.vgraph.edges.iter().enumerate() {
        if e.tail == Some(from) {
            let h = e.head.unwrap();
            if !seen[h] {
                seen[h] = true;
                pred[h] = Some((from, ei));
                queue.push_back(h);
            }
        }
    }
    while let Some(x) = queue.pop_front() {
        if x == to {
            break;
        }
        for (ei, e) in v.vgraph.edges.iter().enumerate() {
            if e.tail == Some(x) {
                let h = e.head.unwrap();
                if !seen[h] {
                    seen[h] = true;
                    pred[h] = Some((x, ei));
                    queue.push_back(h);
                }
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = to;
    loop {
        let (p, ei) = pred[cur]?;
        path.push(v.vgraph.edges[ei].id.clone());
        cur = p;
        if cur == from {
            break;
        }
    }
    path.reverse();
    Some(path)
}

/// Genus labels for every quotient edge, satisfying each vertex's genus
/// rule. Vertexless circles carry one constant label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenusLabeling {
    pub labels: BTreeMap<String, u64>,
}

impl GenusLabeling {
    pub fn genus(&self, edge_id: &str) -> u64 {
        *self.labels.get(edge_id).unwrap_or(&0)
    }
}

/// Integral feasibility flow: one unit of supply at each genus-raising
/// vertex, one unit of demand at each genus-lowering vertex, conservation
/// everywhere else, zero capacity on disk edges. Returns `None` when
/// infeasible.
pub fn genus_labeling(v: &DirectedV) -> Option<GenusLabeling> {
    let nv = v.vgraph.vertices.len();
    let supply = v.vgraph.gplus.len();
    if supply != v.vgraph.gminus.len() {
        return None;
    }

    // Node layout: 0..nv vertices, nv = source, nv+1 = sink.
    let source = nv;
    let sink = nv + 1;
    let mut arcs: Vec<(usize, usize, i64)> = Vec::new(); // tail, head, capacity
    let mut edge_arc: BTreeMap<String, usize> = BTreeMap::new();
    let cap = supply as i64;
    for (ei, e) in v.vgraph.edges.iter().enumerate() {
        if let (Some(t), Some(h)) = (e.tail, e.head) {
            if !v.force_zero[ei] {
                edge_arc.insert(e.id.clone(), arcs.len());
                arcs.push((t, h, cap));
            }
        }
    }
    for &a in &v.vgraph.gplus {
        arcs.push((source, a, 1));
    }
    for &b in &v.vgraph.gminus {
        arcs.push((b, sink, 1));
    }

    let flows = max_flow(nv + 2, &arcs, source, sink);
    let total: i64 = arcs
        .iter()
        .zip(&flows)
        .filter(|((t, _, _), _)| *t == source)
        .map(|(_, f)| *f)
        .sum();
    if total != supply as i64 {
        return None;
    }

    let mut labels = BTreeMap::new();
    for e in &v.vgraph.edges {
        let genus = edge_arc.get(&e.id).map(|&ai| flows[ai] as u64).unwrap_or(0);
        labels.insert(e.id.clone(), genus);
    }
    Some(GenusLabeling { labels })
}

/// Plain breadth-first augmenting max-flow; returns per-arc flow.
fn max_flow(n: usize, arcs: &[(usize, usize, i64)], s: usize, t: usize) -> Vec<i64> {
    // Residual graph as arc pairs: arc 2i forward, 2i+1 backward.
    let mut head = Vec::with_capacity(arcs.len() * 2);
    let mut cap = Vec::with_capacity(arcs.len() * 2);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v, c) in arcs {
        adj[u].push(head.len());
        head.push(v);
        cap.push(c);
        adj[v].push(head.len());
        head.push(u);
        cap.push(0);
    }
    loop {
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut queue = VecDeque::new();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            if u == t {
                break;
            }
            for &ai in &adj[u] {
                let v = head[ai];
                if cap[ai] > 0 && pred[v].is_none() && v != s {
                    pred[v] = Some(ai);
                    queue.push_back(v);
                }
            }
        }
        if pred[t].is_none() {
            break;
        }
        let mut bottleneck = i64::MAX;
        let mut x = t;
        while x != s {
            let ai = pred[x].unwrap();
            bottleneck = bottleneck.min(cap[ai]);
            x = head[ai ^ 1];
        }
        let mut x = t;
        while x != s {
            let ai = pred[x].unwrap();
            cap[ai] -= bottleneck;
            cap[ai ^ 1] += bottleneck;
            x = head[ai ^ 1];
        }
    }
    (0..arcs.len()).map(|i| cap[2 * i + 1]).collect()
}

/// Check a (possibly untrusted) labeling against every vertex rule.
pub fn check_labeling(table: &SymbolTable, v: &DirectedV, labeling: &GenusLabeling) -> Vec<String> {
    let mut report = Vec::new();
    let g = v.vgraph;
    for e in &g.edges {
        if !labeling.labels.contains_key(&e.id) {
            report.push(format!("edge {} has no genus label", e.id));
        }
    }
    for (ei, e) in g.edges.iter().enumerate() {
        if v.force_zero[ei] && labeling.genus(&e.id) != 0 {
            report.push(format!("edge {} must carry genus 0", e.id));
        }
    }
    for (i, vv) in g.vertices.iter().enumerate() {
        let ins: Vec<u64> = g
            .edges
            .iter()
            .filter(|e| e.head == Some(i))
            .map(|e| labeling.genus(&e.id))
            .collect();
        let outs: Vec<u64> = g
            .edges
            .iter()
            .filter(|e| e.tail == Some(i))
            .map(|e| labeling.genus(&e.id))
            .collect();
        let rule = table.signature(vv.symbol).genus_rule;
        let ok = match rule {
            GenusRule::Conserve => ins.len() == 1 && outs.len() == 1 && ins[0] == outs[0],
            GenusRule::SourceOne => ins.len() == 1 && outs.len() == 1 && outs[0] == ins[0] + 1,
            GenusRule::SinkOne => ins.len() == 1 && outs.len() == 1 && ins[0] == outs[0] + 1,
            GenusRule::SumAtMerge => {
                ins.len() == 2 && outs.len() == 1 && outs[0] == ins[0] + ins[1]
            }
            GenusRule::SumAtSplit => {
                ins.len() == 1 && outs.len() == 2 && ins[0] == outs[0] + outs[1]
            }
            GenusRule::ForceZeroOut => ins.is_empty() && outs == [0],
            GenusRule::ForceZeroIn => outs.is_empty() && ins == [0],
        };
        if !ok {
            report.push(format!(
                "vertex {} ({}): genus rule {} violated (in {:?}, out {:?})",
                vv.slot, vv.symbol, rule, ins, outs
            ));
        }
    }
    report
}

#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub matching: Option<Matching>,
    pub labeling: Option<GenusLabeling>,
    pub agree: bool,
}

/// Assert that the matching and the flow agree on feasibility; on mismatch
/// both artifacts are returned for debugging.
pub fn cross_check(v: &DirectedV) -> CrossCheck {
    let r = reach(v, true);
    let matching = allowable_matching(v, &r);
    let labeling = genus_labeling(v);
    let agree = matching.is_some() == labeling.is_some();
    CrossCheck {
        matching,
        labeling,
        agree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::{VEdge, VVertex};
    use crate::symbol::SymbolName;

    fn vgraph(symbols: &[SymbolName], edge_pairs: &[(Option<usize>, Option<usize>)]) -> VGraph {
        let vertices: Vec<VVertex> = symbols
            .iter()
            .enumerate()
            .map(|(i, &symbol)| VVertex {
                slot: i,
                wf_vertex: i,
                symbol,
            })
            .collect();
        let edges: Vec<VEdge> = edge_pairs
            .iter()
            .enumerate()
            .map(|(k, &(tail, head))| VEdge {
                id: format!("E{k}"),
                tail,
                head,
                crossings: Vec::new(),
                chain: vec![k as u32],
                circle_degree: if tail.is_none() { Some(1) } else { None },
            })
            .collect();
        let gplus = vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.symbol == SymbolName::GPlus)
            .map(|(i, _)| i)
            .collect();
        let gminus = vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.symbol == SymbolName::GMinus)
            .map(|(i, _)| i)
            .collect();
        VGraph {
            vertices,
            edges,
            gplus,
            gminus,
        }
    }

    #[test]
    fn reach_on_a_single_edge() {
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::MPlus, SymbolName::NMinus],
            &[(Some(0), Some(1))],
        );
        let v = DirectedV::new(&g, &table);
        let r = reach(&v, true);
        assert!(r.sweep_reachable(0, 1));
        assert!(!r.sweep_reachable(1, 0));
        assert!(r.sweep_reachable(0, 0)); // empty path convention
        let r = reach(&v, false);
        assert!(!r.sweep_reachable(0, 0));
    }

    #[test]
    fn reach_on_a_cycle_relates_all_pairs_both_ways() {
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::MMinus, SymbolName::NPlus],
            &[(Some(0), Some(1)), (Some(1), Some(0))],
        );
        let v = DirectedV::new(&g, &table);
        let r = reach(&v, false);
        for a in 0..2 {
            for b in 0..2 {
                assert!(r.sweep_reachable(a, b), "{a} -> {b}");
            }
        }
    }

    #[test]
    fn reach_is_a_preorder_and_survives_subdivision() {
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::MPlus, SymbolName::SPlus, SymbolName::NMinus],
            &[(Some(0), Some(1)), (Some(1), Some(2))],
        );
        let v = DirectedV::new(&g, &table);
        let r = reach(&v, true);
        let n = 3;
        for a in 0..n {
            assert!(r.sweep_reachable(a, a));
            for b in 0..n {
                for c in 0..n {
                    if r.sweep_reachable(a, b) && r.sweep_reachable(b, c) {
                        assert!(r.sweep_reachable(a, c));
                    }
                }
            }
        }
        // Subdivide E1 with a pass-through vertex.
        let g2 = vgraph(
            &[
                SymbolName::MPlus,
                SymbolName::SPlus,
                SymbolName::NMinus,
                SymbolName::NPlus,
            ],
            &[(Some(0), Some(1)), (Some(1), Some(3)), (Some(3), Some(2))],
        );
        let v2 = DirectedV::new(&g2, &table);
        let r2 = reach(&v2, true);
        for a in 0..n {
            for b in 0..n {
                assert_eq!(r.sweep_reachable(a, b), r2.sweep_reachable(a, b));
            }
        }
    }

    #[test]
    fn empty_saddle_sets_are_trivially_allowable() {
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::MPlus, SymbolName::NMinus],
            &[(Some(0), Some(1))],
        );
        let v = DirectedV::new(&g, &table);
        let r = reach(&v, true);
        let m = allowable_matching(&v, &r).unwrap();
        assert!(m.pairs.is_empty());
        let labeling = genus_labeling(&v).unwrap();
        assert_eq!(labeling.genus("E0"), 0);
        assert!(check_labeling(&table, &v, &labeling).is_empty());
    }

    #[test]
    fn chain_from_raising_to_lowering_saddle_matches_and_flows() {
        // G+ at 0 feeds G- at 1 through one edge; a return edge closes the
        // conservation cycle.
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::GPlus, SymbolName::GMinus],
            &[(Some(0), Some(1)), (Some(1), Some(0))],
        );
        let v = DirectedV::new(&g, &table);
        let r = reach(&v, true);
        let m = allowable_matching(&v, &r).unwrap();
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert_eq!(m.witnesses[0], vec!["E0".to_string()]);
        let labeling = genus_labeling(&v).unwrap();
        assert_eq!(labeling.genus("E0"), 1);
        assert_eq!(labeling.genus("E1"), 0);
        assert!(check_labeling(&table, &v, &labeling).is_empty());
        assert!(cross_check(&v).agree);
    }

    #[test]
    fn saddles_in_different_components_do_not_match() {
        let table = SymbolTable::shipped();
        // Two disjoint conservation cycles, one holding G+, the other G-.
        let g = vgraph(
            &[
                SymbolName::GPlus,
                SymbolName::SPlus,
                SymbolName::GMinus,
                SymbolName::SMinus,
            ],
            &[
                (Some(0), Some(1)),
                (Some(1), Some(0)),
                (Some(2), Some(3)),
                (Some(3), Some(2)),
            ],
        );
        let v = DirectedV::new(&g, &table);
        let r = reach(&v, true);
        assert!(allowable_matching(&v, &r).is_none());
        assert!(genus_labeling(&v).is_none());
        assert!(cross_check(&v).agree);
    }

    #[test]
    fn zero_capacity_disk_edges_block_the_flow() {
        // Synthetic ill-formed graph: the only raising-to-lowering route is
        // forced to genus zero. Quotient graphs of real collapses never
        // route through disk edges, so matching and flow still agree there;
        // this exercises the capacity handling alone.
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::GPlus, SymbolName::GMinus],
            &[(Some(0), Some(1))],
        );
        let mut v = DirectedV::new(&g, &table);
        v.force_zero[0] = true;
        assert!(genus_labeling(&v).is_none());
    }

    #[test]
    fn circulation_on_cycles_never_changes_feasibility() {
        let table = SymbolTable::shipped();
        // A conservation cycle without saddles, plus a disjoint disk edge.
        let g = vgraph(
            &[
                SymbolName::MMinus,
                SymbolName::NPlus,
                SymbolName::MPlus,
                SymbolName::NMinus,
            ],
            &[(Some(0), Some(1)), (Some(1), Some(0)), (Some(2), Some(3))],
        );
        let v = DirectedV::new(&g, &table);
        let c = cross_check(&v);
        assert!(c.agree);
        let labeling = c.labeling.unwrap();
        // The minimal flow assigns zero circulation.
        assert_eq!(labeling.genus("E0"), 0);
        assert_eq!(labeling.genus("E1"), 0);
        assert!(check_labeling(&table, &v, &labeling).is_empty());
    }

    #[test]
    fn empty_path_convention_never_changes_the_matching() {
        // Pairs always join distinct vertices, so whether a vertex precedes
        // itself via the empty path cannot matter.
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::GPlus, SymbolName::GMinus],
            &[(Some(0), Some(1)), (Some(1), Some(0))],
        );
        let v = DirectedV::new(&g, &table);
        let with = allowable_matching(&v, &reach(&v, true));
        let without = allowable_matching(&v, &reach(&v, false));
        assert_eq!(with.is_some(), without.is_some());
        assert_eq!(with.unwrap().pairs, without.unwrap().pairs);
    }

    #[test]
    fn labeling_checker_catches_rule_violations() {
        let table = SymbolTable::shipped();
        let g = vgraph(
            &[SymbolName::MPlus, SymbolName::NMinus],
            &[(Some(0), Some(1))],
        );
        let v = DirectedV::new(&g, &table);
        let mut labeling = genus_labeling(&v).unwrap();
        labeling.labels.insert("E0".to_string(), 2);
        let report = check_labeling(&table, &v, &labeling);
        assert!(!report.is_empty());
    }
}
