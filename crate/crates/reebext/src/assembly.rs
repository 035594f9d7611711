//! Turn an allowable collapse plus genus labeling into the ordered
//! part-attachment construction of the 3-manifold, replay it against the
//! level-surface ledger, and report invariants of the result.
//!
//! Traces are symbolic: arcs, rectangles, annuli and disks are named tokens
//! with incidence data, not embedded subsets. Each step attaches one solid
//! part along the sites of the construction; the closure step that glues the
//! final level surfaces back onto the initial ones is explicit.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::allow::GenusLabeling;
use crate::collapse::{display_component, monodromy_shift, CollapseStructure, ComponentId, VGraph};
use crate::model::{LabeledReebGraph, SlotIndex, StrandOccurrence};
use crate::search::Solution;
use crate::symbol::{SymbolName, SymbolTable};

#[derive(Clone, Debug)]
pub struct AssemblyStep {
    pub index: usize,
    pub slot: SlotIndex,
    pub symbol: SymbolName,
    /// Solid part attached at this step.
    pub part: &'static str,
    /// Attachment site on the part.
    pub attach: &'static str,
    /// Carrier component of the preceding level surface, when the part
    /// attaches to one.
    pub carrier: Option<ComponentId>,
    /// Symbolic region and boundary-circle tokens.
    pub data: String,
}

#[derive(Clone, Debug)]
pub struct AssemblyTrace {
    pub steps: Vec<AssemblyStep>,
    /// Final gluing of the last level surfaces onto the first.
    pub close_pairs: Vec<(ComponentId, ComponentId)>,
}

pub fn attach_site(symbol: SymbolName) -> &'static str {
    match symbol {
        SymbolName::MPlus => "phi1:collar",
        SymbolName::MMinus => "phi2:mu",
        SymbolName::NPlus => "phi4:xi",
        SymbolName::NMinus => "phi5:nu",
        SymbolName::SPlus | SymbolName::GPlus | SymbolName::JPlus => "phi3:sigma",
        SymbolName::SMinus | SymbolName::GMinus | SymbolName::JMinus => "phi3:tau",
    }
}

/// One attachment step per slot in sweep order, with attachment data read
/// off the transition, plus the explicit closure step.
pub fn build_trace(graph: &LabeledReebGraph, collapse: &CollapseStructure) -> AssemblyTrace {
    let mut steps = Vec::new();
    for (index, t) in collapse.transitions.iter().enumerate() {
        let slot = t.slot;
        let ins: Vec<String> = graph
            .inbound_star(slot)
            .iter()
            .map(|o| graph.display_occurrence(o))
            .collect();
        let outs: Vec<String> = graph
            .outbound_star(slot)
            .iter()
            .map(|o| graph.display_occurrence(o))
            .collect();
        let (carrier, data) = match t.symbol {
            SymbolName::MPlus => (None, format!("D2(strand={})", outs[0])),
            SymbolName::MMinus => (t.drill, format!("D2@K,strand={}", outs[0])),
            SymbolName::NPlus => (Some(t.inputs[0]), format!("A(P={})", ins[0])),
            SymbolName::NMinus => (Some(t.inputs[0]), format!("D2(P={})", ins[0])),
            SymbolName::SPlus => (
                Some(t.inputs[0]),
                format!("alpha1+alpha2(P={}),out={}+{}", ins[0], outs[0], outs[1]),
            ),
            SymbolName::SMinus => (
                Some(t.inputs[0]),
                format!("R(beta1,beta2;P1={},P2={}),out={}", ins[0], ins[1], outs[0]),
            ),
            SymbolName::GPlus => (
                Some(t.inputs[0]),
                format!(
                    "alpha1(P1={}),alpha2(P2={}),out={}",
                    ins[0], ins[1], outs[0]
                ),
            ),
            SymbolName::JPlus => (
                Some(t.inputs[0]),
                format!(
                    "alpha1(P1={}@K1),alpha2(P2={}@K2={}),out={}",
                    ins[0],
                    ins[1],
                    display_component(t.inputs[1]),
                    outs[0]
                ),
            ),
            SymbolName::GMinus => (
                Some(t.inputs[0]),
                format!(
                    "R(P={};complement-connected),out={}+{}",
                    ins[0], outs[0], outs[1]
                ),
            ),
            SymbolName::JMinus => (
                Some(t.inputs[0]),
                format!(
                    "R(P={};K1={},K2={}),out={}+{}",
                    ins[0],
                    display_component(t.outputs[0]),
                    display_component(t.outputs[1]),
                    outs[0],
                    outs[1]
                ),
            ),
        };
        steps.push(AssemblyStep {
            index,
            slot,
            symbol: t.symbol,
            part: t.symbol.part_name(),
            attach: attach_site(t.symbol),
            carrier,
            data,
        });
    }
    AssemblyTrace {
        steps,
        close_pairs: collapse.pairing.clone(),
    }
}

/// Genus and boundary strands of one level-surface component.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SurfaceDescriptor {
    pub genus: u64,
    pub strands: BTreeSet<StrandOccurrence>,
}

impl SurfaceDescriptor {
    pub fn chi(&self) -> i64 {
        2 - 2 * self.genus as i64 - self.strands.len() as i64
    }
}

/// The level surfaces alive at one gap.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LevelState {
    pub surfaces: BTreeMap<ComponentId, SurfaceDescriptor>,
}

impl LevelState {
    pub fn chi(&self) -> i64 {
        self.surfaces.values().map(|s| s.chi()).sum()
    }
}

#[derive(Error, Debug)]
pub enum SimulateError {
    #[error("step {step}: trace does not match the collapse transition")]
    StepMismatch { step: usize },
    #[error("step {step}: {detail}")]
    LedgerMismatch { step: usize, detail: String },
    #[error("closure: {detail}")]
    ClosureMismatch { detail: String },
    #[error("step {step}: boundary audit failed: {detail}")]
    BoundaryAudit { step: usize, detail: String },
}

#[derive(Clone, Debug)]
pub struct SimulationReport {
    /// Euler characteristic change per step, in sweep order.
    pub chi_ledger: Vec<(SlotIndex, i64)>,
    pub final_state: LevelState,
}

/// Replay the trace from the initial level state, asserting after each step
/// that the genus and boundary bookkeeping matches the certificate and that
/// the Euler characteristic moves by the symbol's delta; finally assert the
/// cut gluing.
pub fn simulate(
    graph: &LabeledReebGraph,
    table: &SymbolTable,
    trace: &AssemblyTrace,
    collapse: &CollapseStructure,
    vgraph: &VGraph,
    labeling: &GenusLabeling,
) -> Result<SimulationReport, SimulateError> {
    let n = graph.slot_count;
    let edge_of: BTreeMap<ComponentId, &str> = vgraph
        .edges
        .iter()
        .flat_map(|e| e.chain.iter().map(move |id| (*id, e.id.as_str())))
        .collect();
    let genus_of = |id: ComponentId| -> u64 { labeling.genus(edge_of.get(&id).unwrap_or(&"")) };

    let mut state = LevelState::default();
    for comp in &collapse.initial.components {
        state.surfaces.insert(
            comp.id,
            SurfaceDescriptor {
                genus: genus_of(comp.id),
                strands: comp.strands.clone(),
            },
        );
    }
    let initial_state = state.clone();

    let mut ledger = Vec::new();
    for (step, t) in trace.steps.iter().zip(&collapse.transitions) {
        if step.slot != t.slot || step.symbol != t.symbol || step.part != t.symbol.part_name() {
            return Err(SimulateError::StepMismatch { step: step.index });
        }
        let sig = table.signature(t.symbol);
        let chi_before = state.chi();

        let advance = |strands: &BTreeSet<StrandOccurrence>| -> BTreeSet<StrandOccurrence> {
            strands.iter().filter_map(|o| graph.advance(o)).collect()
        };
        let out_star = graph.outbound_star(t.slot);

        let mut next = LevelState::default();
        for (id, surf) in &state.surfaces {
            if !t.inputs.contains(id) {
                next.surfaces.insert(
                    *id,
                    SurfaceDescriptor {
                        genus: surf.genus,
                        strands: advance(&surf.strands),
                    },
                );
            }
        }
        let consumed: Vec<SurfaceDescriptor> = t
            .inputs
            .iter()
            .map(|id| {
                state
                    .surfaces
                    .get(id)
                    .cloned()
                    .ok_or(SimulateError::StepMismatch { step: step.index })
            })
            .collect::<Result<_, _>>()?;

        let mismatch = |detail: String| SimulateError::LedgerMismatch {
            step: step.index,
            detail,
        };

        match t.symbol {
            SymbolName::MPlus => {
                next.surfaces.insert(
                    t.outputs[0],
                    SurfaceDescriptor {
                        genus: 0,
                        strands: out_star.iter().copied().collect(),
                    },
                );
            }
            SymbolName::MMinus
            | SymbolName::NPlus
            | SymbolName::SPlus
            | SymbolName::SMinus
            | SymbolName::GPlus
            | SymbolName::GMinus
            | SymbolName::JPlus => {
                let genus: u64 = match t.symbol {
                    SymbolName::GPlus => consumed[0].genus + 1,
                    SymbolName::GMinus => consumed[0]
                        .genus
                        .checked_sub(1)
                        .ok_or_else(|| mismatch("genus cannot drop below zero".to_string()))?,
                    SymbolName::JPlus => consumed[0].genus + consumed[1].genus,
                    _ => consumed[0].genus,
                };
                let mut strands: BTreeSet<StrandOccurrence> = BTreeSet::new();
                for c in &consumed {
                    strands.extend(advance(&c.strands));
                }
                strands.extend(out_star.iter().copied());
                next.surfaces
                    .insert(t.outputs[0], SurfaceDescriptor { genus, strands });
            }
            SymbolName::NMinus => {
                if consumed[0].genus != 0 || consumed[0].strands.len() != 1 {
                    return Err(mismatch(format!(
                        "a dying component must be a disk, got genus {} with {} strands",
                        consumed[0].genus,
                        consumed[0].strands.len()
                    )));
                }
            }
            SymbolName::JMinus => {
                let g1 = genus_of(t.outputs[0]);
                let g2 = genus_of(t.outputs[1]);
                if g1 + g2 != consumed[0].genus {
                    return Err(mismatch(format!(
                        "split genera {g1}+{g2} do not sum to {}",
                        consumed[0].genus
                    )));
                }
                let rest = advance(&consumed[0].strands);
                let first: BTreeSet<StrandOccurrence> = t
                    .split_first
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .collect();
                let mut s1 = first.clone();
                s1.insert(out_star[0]);
                let mut s2: BTreeSet<StrandOccurrence> = rest.difference(&first).copied().collect();
                s2.insert(out_star[1]);
                next.surfaces.insert(
                    t.outputs[0],
                    SurfaceDescriptor {
                        genus: g1,
                        strands: s1,
                    },
                );
                next.surfaces.insert(
                    t.outputs[1],
                    SurfaceDescriptor {
                        genus: g2,
                        strands: s2,
                    },
                );
            }
        }

        // Every produced component must carry the genus its quotient edge is
        // labeled with.
        for id in &t.outputs {
            let got = next.surfaces[id].genus;
            let expected = genus_of(*id);
            if got != expected {
                return Err(mismatch(format!(
                    "component {} carries genus {got}, certificate says {expected}",
                    display_component(*id)
                )));
            }
        }

        let delta = next.chi() - chi_before;
        if delta != sig.chi_delta {
            return Err(mismatch(format!(
                "chi moved by {delta}, symbol {} requires {}",
                t.symbol, sig.chi_delta
            )));
        }
        ledger.push((t.slot, delta));

        // Boundary audit: the produced surfaces partition the next gap's
        // strands exactly.
        let gap = t.slot;
        let expected: BTreeSet<StrandOccurrence> = graph.strands_at(gap).into_iter().collect();
        let mut seen: BTreeSet<StrandOccurrence> = BTreeSet::new();
        for surf in next.surfaces.values() {
            for occ in &surf.strands {
                if !seen.insert(*occ) {
                    return Err(SimulateError::BoundaryAudit {
                        step: step.index,
                        detail: format!("strand {} appears twice", graph.display_occurrence(occ)),
                    });
                }
            }
        }
        if seen != expected {
            return Err(SimulateError::BoundaryAudit {
                step: step.index,
                detail: "surfaces do not cover the gap strands".to_string(),
            });
        }

        state = next;
    }

    // Closure: final surfaces glue onto the initial ones.
    let final_state = if n == 0 {
        let shifted = monodromy_shift(graph, &collapse.initial);
        let mut s = LevelState::default();
        for comp in &shifted.components {
            s.surfaces.insert(
                comp.id,
                SurfaceDescriptor {
                    genus: genus_of(comp.id),
                    strands: comp.strands.clone(),
                },
            );
        }
        s
    } else {
        state
    };
    if trace.close_pairs.len() != final_state.surfaces.len()
        || final_state.surfaces.len() != initial_state.surfaces.len()
    {
        return Err(SimulateError::ClosureMismatch {
            detail: "pairing does not cover the cut surfaces".to_string(),
        });
    }
    for (f, i) in &trace.close_pairs {
        let fs = final_state
            .surfaces
            .get(f)
            .ok_or_else(|| SimulateError::ClosureMismatch {
                detail: format!("unknown final component {}", display_component(*f)),
            })?;
        let is = initial_state
            .surfaces
            .get(i)
            .ok_or_else(|| SimulateError::ClosureMismatch {
                detail: format!("unknown initial component {}", display_component(*i)),
            })?;
        if fs != is {
            return Err(SimulateError::ClosureMismatch {
                detail: format!(
                    "{} and {} differ at the cut",
                    display_component(*f),
                    display_component(*i)
                ),
            });
        }
    }

    Ok(SimulationReport {
        chi_ledger: ledger,
        final_state,
    })
}

#[derive(Clone, Debug)]
pub struct ManifoldReport {
    pub component_count: usize,
    pub chi: i64,
    pub parts: BTreeMap<&'static str, usize>,
    pub boundary_chi: i64,
}

#[derive(Error, Debug)]
pub enum ReportError {
    #[error(
        "Euler characteristic mismatch: parts give {from_parts}, boundary gives {from_boundary}"
    )]
    ChiMismatch { from_parts: i64, from_boundary: i64 },
}

/// Invariants of the constructed 3-manifold: component count from the
/// quotient graph, the Euler characteristic from the part census, checked
/// against half the boundary characteristic from vertex counting.
pub fn manifold_report(
    graph: &LabeledReebGraph,
    trace: &AssemblyTrace,
    vgraph: &VGraph,
) -> Result<ManifoldReport, ReportError> {
    let mut parts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for step in &trace.steps {
        *parts.entry(step.part).or_insert(0) += 1;
    }
    let count = |name: &str| parts.get(name).copied().unwrap_or(0) as i64;
    let from_parts = count("MOD(M+)") + count("MOD(N+)") - count("MOD(S+)");
    let boundary_chi = graph.surface_invariants().total_chi;
    if from_parts != boundary_chi / 2 {
        return Err(ReportError::ChiMismatch {
            from_parts,
            from_boundary: boundary_chi / 2,
        });
    }
    Ok(ManifoldReport {
        component_count: vgraph.component_count(),
        chi: from_parts,
        parts,
        boundary_chi,
    })
}

/// Full certificate audit used by the census and the acceptance suite:
/// rebuild the trace, simulate it, and check every manifold invariant.
pub fn audit_solution(
    graph: &LabeledReebGraph,
    table: &SymbolTable,
    solution: &Solution,
) -> Result<ManifoldReport, String> {
    let trace = build_trace(graph, &solution.collapse);
    let chi_sum: i64 = solution
        .collapse
        .transitions
        .iter()
        .map(|t| table.signature(t.symbol).chi_delta)
        .sum();
    if chi_sum != 0 {
        return Err(format!("chi deltas sum to {chi_sum}, expected 0"));
    }
    simulate(
        graph,
        table,
        &trace,
        &solution.collapse,
        &solution.vgraph,
        &solution.labeling,
    )
    .map_err(|e| e.to_string())?;
    manifold_report(graph, &trace, &solution.vgraph).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;
    use crate::search::{decide, SearchLimits};

    fn solve(text: &str) -> (LabeledReebGraph, Solution) {
        let g = parse_instance(text).unwrap();
        let table = SymbolTable::shipped();
        let (v, _) = decide(&g, &table, &SearchLimits::default()).unwrap();
        let s = v.solution().expect("fixture must be extendable").clone();
        (g, s)
    }

    const SPHERE_PM: &str =
        "slots 2\nvertex a slot=0 sign=+\nvertex b slot=1 sign=-\nedge e a -> b wraps=0\n";
    const SPHERE_MP: &str =
        "slots 2\nvertex a slot=0 sign=-\nvertex b slot=1 sign=+\nedge e a -> b wraps=0\n";

    #[test]
    fn ball_trace_is_birth_then_death() {
        let (g, s) = solve(SPHERE_PM);
        let trace = build_trace(&g, &s.collapse);
        let parts: Vec<&str> = trace.steps.iter().map(|s| s.part).collect();
        assert_eq!(parts, vec!["MOD(M+)", "MOD(N-)"]);
        assert_eq!(trace.steps[0].attach, "phi1:collar");
        assert_eq!(trace.steps[1].attach, "phi5:nu");
        assert!(trace.close_pairs.is_empty());
        let table = SymbolTable::shipped();
        let sim = simulate(&g, &table, &trace, &s.collapse, &s.vgraph, &s.labeling).unwrap();
        assert_eq!(
            sim.chi_ledger.iter().map(|(_, d)| *d).collect::<Vec<i64>>(),
            vec![1, -1]
        );
        let report = manifold_report(&g, &trace, &s.vgraph).unwrap();
        assert_eq!(report.chi, 1);
        assert_eq!(report.component_count, 1);
    }

    #[test]
    fn drilled_trace_carries_the_token_across_the_cut() {
        let (g, s) = solve(SPHERE_MP);
        let trace = build_trace(&g, &s.collapse);
        let parts: Vec<&str> = trace.steps.iter().map(|s| s.part).collect();
        assert_eq!(parts, vec!["MOD(M-)", "MOD(N+)"]);
        assert_eq!(trace.steps[0].attach, "phi2:mu");
        assert!(trace.steps[0].carrier.is_some());
        assert_eq!(trace.steps[1].attach, "phi4:xi");
        assert_eq!(trace.close_pairs.len(), 1);
        let table = SymbolTable::shipped();
        let sim = simulate(&g, &table, &trace, &s.collapse, &s.vgraph, &s.labeling).unwrap();
        // Sphere token, then a disk, then the token again.
        assert_eq!(
            sim.chi_ledger.iter().map(|(_, d)| *d).collect::<Vec<i64>>(),
            vec![-1, 1]
        );
        let report = manifold_report(&g, &trace, &s.vgraph).unwrap();
        assert_eq!(report.chi, 1);
        assert_eq!(report.component_count, 1);
    }

    #[test]
    fn nested_spheres_use_each_part_once() {
        let (g, s) = solve(
            "slots 4\nvertex o1 slot=0 sign=+\nvertex i1 slot=1 sign=-\nvertex i2 slot=2 sign=+\nvertex o2 slot=3 sign=-\nedge outer o1 -> o2 wraps=0\nedge inner i1 -> i2 wraps=0\n",
        );
        let trace = build_trace(&g, &s.collapse);
        let parts: Vec<&str> = trace.steps.iter().map(|s| s.part).collect();
        assert_eq!(parts, vec!["MOD(M+)", "MOD(M-)", "MOD(N+)", "MOD(N-)"]);
        let report = manifold_report(&g, &trace, &s.vgraph).unwrap();
        assert_eq!(report.chi, 2);
        assert_eq!(report.parts.len(), 4);
        assert!(report.parts.values().all(|&c| c == 1));
    }

    #[test]
    fn solid_torus_has_zero_chi() {
        let (g, s) = solve("slots 0\ncircle c degree=1\n");
        let trace = build_trace(&g, &s.collapse);
        assert!(trace.steps.is_empty());
        let table = SymbolTable::shipped();
        simulate(&g, &table, &trace, &s.collapse, &s.vgraph, &s.labeling).unwrap();
        let report = manifold_report(&g, &trace, &s.vgraph).unwrap();
        assert_eq!(report.chi, 0);
        assert_eq!(report.component_count, 1);
    }

    #[test]
    fn genus_saddles_share_the_plain_saddle_parts() {
        // A genus-two surface: one splitting and one merging saddle, whose
        // transitions lower and raise the level genus.
        let (g, s) = solve(
            "slots 2\nvertex s slot=0 sign=-\nvertex m slot=1 sign=+\nedge a m -> s wraps=0\nedge b s -> m wraps=0\nedge c s -> m wraps=0\n",
        );
        assert_eq!(g.surface_invariants().components[0].genus, 2);
        let trace = build_trace(&g, &s.collapse);
        let parts: Vec<&str> = trace.steps.iter().map(|s| s.part).collect();
        assert_eq!(parts, vec!["MOD(S-)", "MOD(S+)"]);
        let symbols: Vec<SymbolName> = s.collapse.transitions.iter().map(|t| t.symbol).collect();
        assert_eq!(symbols, vec![SymbolName::GMinus, SymbolName::GPlus]);
        // One unit of genus flows from the raising to the lowering saddle.
        assert_eq!(s.labeling.labels.values().sum::<u64>(), 1);
        let report = manifold_report(&g, &trace, &s.vgraph).unwrap();
        assert_eq!(report.chi, -1);
        let table = SymbolTable::shipped();
        simulate(&g, &table, &trace, &s.collapse, &s.vgraph, &s.labeling).unwrap();
    }

    #[test]
    fn corrupted_genus_split_fails_at_the_splitting_step() {
        // The split at slot 1 is forced apart because both branches must die
        // as lone disks.
        let (g, s) = solve(
            "slots 4\nvertex v0 slot=0 sign=+\nvertex v1 slot=1 sign=-\nvertex v2 slot=2 sign=-\nvertex v3 slot=3 sign=-\nedge e v0 -> v1 wraps=0\nedge f v1 -> v2 wraps=0\nedge h v1 -> v3 wraps=0\n",
        );
        assert!(s
            .collapse
            .transitions
            .iter()
            .any(|t| t.symbol == SymbolName::JMinus));
        let trace = build_trace(&g, &s.collapse);
        let table = SymbolTable::shipped();
        simulate(&g, &table, &trace, &s.collapse, &s.vgraph, &s.labeling).unwrap();

        let mut corrupted = s.labeling.clone();
        // Raise one branch of the split; the sum rule breaks at step 1.
        let branch_edge = s
            .vgraph
            .edges
            .iter()
            .find(|e| e.tail == Some(1))
            .unwrap()
            .id
            .clone();
        corrupted.labels.insert(branch_edge, 1);
        let err = simulate(&g, &table, &trace, &s.collapse, &s.vgraph, &corrupted).unwrap_err();
        match err {
            SimulateError::LedgerMismatch { step, .. } => assert_eq!(step, 1),
            other => panic!("expected ledger mismatch, got {other}"),
        }
    }
}
