//! Sweep representation of a collapse: partitioned strands evolving through
//! slot transitions, cyclic closure at the cut, and extraction of the
//! quotient graph the collapse maps onto.
//!
//! A sweep state at a gap partitions the strand occurrences of that gap into
//! level-surface components. Components with an empty strand set are *closed
//! tokens*: boundaryless level-surface components, which exist only between
//! their creation at an `N+` transition and their consumption by an `M-`
//! drill, possibly across the cut.
//!
//! Component ids double as chain segments of the quotient graph: a component
//! keeps its id while passing over slots untouched, and every transition
//! retires its participants' ids and mints fresh ones. Maximal id chains,
//! linked across the cut by the pairing, are exactly the edges of the
//! quotient graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::model::{GapIndex, LabeledReebGraph, SlotIndex, StrandOccurrence, StrandSource};
use crate::symbol::{GenusRule, Participation, SymbolName, SymbolTable};

pub type ComponentId = u32;

pub fn display_component(id: ComponentId) -> String {
    format!("C{id}")
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CollapseConfig {
    /// Require circle components to map onto vertexless circles of the
    /// quotient graph: no component carrying a circle strand may take part
    /// in a transition.
    pub strict_circles: bool,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SweepComponent {
    pub id: ComponentId,
    pub strands: BTreeSet<StrandOccurrence>,
}

impl SweepComponent {
    pub fn is_token(&self) -> bool {
        self.strands.is_empty()
    }

    pub fn has_circle_strand(&self) -> bool {
        self.strands
            .iter()
            .any(|o| matches!(o.source, StrandSource::Circle(_)))
    }
}

/// Partition of the strands at one gap, kept sorted by component id.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SweepState {
    pub components: Vec<SweepComponent>,
}

impl SweepState {
    pub fn component(&self, id: ComponentId) -> Option<&SweepComponent> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn component_of(&self, occ: &StrandOccurrence) -> Option<ComponentId> {
        self.components
            .iter()
            .find(|c| c.strands.contains(occ))
            .map(|c| c.id)
    }

    pub fn token_count(&self) -> usize {
        self.components.iter().filter(|c| c.is_token()).count()
    }

    pub fn strand_count(&self) -> usize {
        self.components.iter().map(|c| c.strands.len()).sum()
    }

    /// Genus-free Euler ledger: 2 per component minus one per strand.
    pub fn chi_hat(&self) -> i64 {
        2 * self.components.len() as i64 - self.strand_count() as i64
    }

    fn sort(&mut self) {
        self.components.sort_by_key(|c| c.id);
    }
}

/// A branch decision at one slot: which symbol fires and its free choices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SlotChoice {
    pub symbol: SymbolName,
    /// For `M-`: the component the newborn strand drills into.
    pub drill: Option<ComponentId>,
    /// For `J-`: post-advance strands assigned to the first output side,
    /// not counting the out-strand itself.
    pub split_first: Option<BTreeSet<StrandOccurrence>>,
}

impl SlotChoice {
    pub fn plain(symbol: SymbolName) -> SlotChoice {
        SlotChoice {
            symbol,
            drill: None,
            split_first: None,
        }
    }
}

/// The record of one applied transition, sufficient to replay it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SlotTransition {
    pub slot: SlotIndex,
    pub symbol: SymbolName,
    pub inputs: Vec<ComponentId>,
    pub outputs: Vec<ComponentId>,
    pub drill: Option<ComponentId>,
    pub split_first: Option<Vec<StrandOccurrence>>,
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum ApplyError {
    #[error("slot {slot}: symbol {symbol} does not apply to this vertex")]
    KindMismatch { slot: SlotIndex, symbol: SymbolName },
    #[error("slot {slot}: no transition model covers in-strands in different components")]
    NoSymbolAcrossComponents { slot: SlotIndex },
    #[error("slot {slot}: merge across requires in-strands in different components")]
    SameComponent { slot: SlotIndex },
    #[error("slot {slot}: participant component {id} missing from the state")]
    MissingParticipant { slot: SlotIndex, id: ComponentId },
    #[error("slot {slot}: terminating component carries extra strands")]
    ExtraStrands { slot: SlotIndex },
    #[error("slot {slot}: split assignment references strands outside the component")]
    BadSplit { slot: SlotIndex },
    #[error("slot {slot}: strict circle mode forbids transitions on circle-carrying components")]
    StrictCircle { slot: SlotIndex },
    #[error("slot {slot}: no fresh component id available for replay")]
    NoFreshId { slot: SlotIndex },
}

/// Source of component ids: fresh counter during search, scripted list when
/// replaying a recorded collapse.
#[derive(Clone, Debug)]
pub enum IdSource {
    Fresh(ComponentId),
    Scripted(VecDeque<ComponentId>),
}

impl IdSource {
    fn take(&mut self) -> Option<ComponentId> {
        match self {
            IdSource::Fresh(next) => {
                let id = *next;
                *next += 1;
                Some(id)
            }
            IdSource::Scripted(queue) => queue.pop_front(),
        }
    }
}

/// Apply the transition at `slot` to the state at the preceding gap.
///
/// Non-participant components pass through with their strands advanced along
/// the linking relation; participants are rewritten according to the
/// symbol's participation rule and receive fresh ids.
pub fn apply_slot(
    graph: &LabeledReebGraph,
    table: &SymbolTable,
    config: &CollapseConfig,
    state: &SweepState,
    slot: SlotIndex,
    choice: &SlotChoice,
    ids: &mut IdSource,
) -> Result<(SweepState, SlotTransition), ApplyError> {
    let vertex = graph.vertex_at_slot(slot).expect("occupied slot");
    let sig = table.signature(choice.symbol);
    let kind = graph.derived_kind(vertex).expect("valid vertex");
    if sig.kind != kind || sig.sign != graph.vertices[vertex].sign {
        return Err(ApplyError::KindMismatch {
            slot,
            symbol: choice.symbol,
        });
    }

    let in_star = graph.inbound_star(slot);
    let out_star = graph.outbound_star(slot);
    debug_assert_eq!(in_star.len(), sig.wf_star.0 as usize);
    debug_assert_eq!(out_star.len(), sig.wf_star.1 as usize);

    let mut participant_ids: Vec<ComponentId> = Vec::new();
    for occ in &in_star {
        let id = state
            .component_of(occ)
            .ok_or(ApplyError::MissingParticipant { slot, id: 0 })?;
        if !participant_ids.contains(&id) {
            participant_ids.push(id);
        }
    }
    participant_ids.sort_unstable();

    let check_strict = |id: ComponentId| -> Result<(), ApplyError> {
        if config.strict_circles && state.component(id).is_some_and(|c| c.has_circle_strand()) {
            Err(ApplyError::StrictCircle { slot })
        } else {
            Ok(())
        }
    };

    let advance_set = |strands: &BTreeSet<StrandOccurrence>| -> BTreeSet<StrandOccurrence> {
        strands.iter().filter_map(|o| graph.advance(o)).collect()
    };

    let mut next = SweepState::default();
    for comp in &state.components {
        if !participant_ids.contains(&comp.id) {
            next.components.push(SweepComponent {
                id: comp.id,
                strands: advance_set(&comp.strands),
            });
        }
    }

    let fresh = |ids: &mut IdSource| ids.take().ok_or(ApplyError::NoFreshId { slot });
    let mut outputs: Vec<ComponentId> = Vec::new();
    let mut drill_record = None;
    let mut split_record = None;

    match sig.participation {
        Participation::FreshComponent => {
            let id = fresh(ids)?;
            next.components.push(SweepComponent {
                id,
                strands: out_star.iter().copied().collect(),
            });
            outputs.push(id);
        }
        Participation::DrillChosen => {
            let target = choice
                .drill
                .ok_or(ApplyError::MissingParticipant { slot, id: 0 })?;
            let comp = state
                .component(target)
                .ok_or(ApplyError::MissingParticipant { slot, id: target })?;
            check_strict(target)?;
            let id = fresh(ids)?;
            let mut strands = advance_set(&comp.strands);
            strands.extend(out_star.iter().copied());
            next.components.retain(|c| c.id != target);
            next.components.push(SweepComponent { id, strands });
            participant_ids = vec![target];
            outputs.push(id);
            drill_record = Some(target);
        }
        Participation::Withdraw => {
            let target = participant_ids[0];
            check_strict(target)?;
            let comp = state.component(target).unwrap();
            let id = fresh(ids)?;
            next.components.push(SweepComponent {
                id,
                strands: advance_set(&comp.strands),
            });
            outputs.push(id);
        }
        Participation::TerminateLone => {
            let target = participant_ids[0];
            let comp = state.component(target).unwrap();
            if comp.strands.len() != 1 {
                return Err(ApplyError::ExtraStrands { slot });
            }
        }
        Participation::SplitInPlace | Participation::SplitRetain => {
            let target = participant_ids[0];
            check_strict(target)?;
            let comp = state.component(target).unwrap();
            let id = fresh(ids)?;
            let mut strands = advance_set(&comp.strands);
            strands.extend(out_star.iter().copied());
            next.components.push(SweepComponent { id, strands });
            outputs.push(id);
        }
        Participation::MergeWithin => {
            if participant_ids.len() != 1 {
                return Err(ApplyError::NoSymbolAcrossComponents { slot });
            }
            let target = participant_ids[0];
            check_strict(target)?;
            let comp = state.component(target).unwrap();
            let id = fresh(ids)?;
            let mut strands = advance_set(&comp.strands);
            strands.extend(out_star.iter().copied());
            next.components.push(SweepComponent { id, strands });
            outputs.push(id);
        }
        Participation::MergeAcross => {
            if participant_ids.len() != 2 {
                return Err(ApplyError::SameComponent { slot });
            }
            check_strict(participant_ids[0])?;
            check_strict(participant_ids[1])?;
            let id = fresh(ids)?;
            let mut strands = advance_set(&state.component(participant_ids[0]).unwrap().strands);
            strands.extend(advance_set(
                &state.component(participant_ids[1]).unwrap().strands,
            ));
            strands.extend(out_star.iter().copied());
            next.components.push(SweepComponent { id, strands });
            outputs.push(id);
        }
        Participation::SplitApart => {
            let target = participant_ids[0];
            check_strict(target)?;
            let comp = state.component(target).unwrap();
            let rest = advance_set(&comp.strands);
            let first: BTreeSet<StrandOccurrence> = choice.split_first.clone().unwrap_or_default();
            if !first.is_subset(&rest) {
                return Err(ApplyError::BadSplit { slot });
            }
            let second: BTreeSet<StrandOccurrence> = rest.difference(&first).copied().collect();
            let id1 = fresh(ids)?;
            let mut s1 = first.clone();
            s1.insert(out_star[0]);
            next.components.push(SweepComponent {
                id: id1,
                strands: s1,
            });
            let id2 = fresh(ids)?;
            let mut s2 = second;
            s2.insert(out_star[1]);
            next.components.push(SweepComponent {
                id: id2,
                strands: s2,
            });
            outputs.push(id1);
            outputs.push(id2);
            split_record = Some(first.into_iter().collect());
        }
    }

    next.sort();
    Ok((
        next,
        SlotTransition {
            slot,
            symbol: choice.symbol,
            inputs: participant_ids,
            outputs,
            drill: drill_record,
            split_first: split_record,
        },
    ))
}

/// All legal branch decisions at `slot` from `state`, in canonical order:
/// symbols in table order, drill targets by ascending component id, split
/// distributions by ascending bitmask over the sorted remainder.
pub fn enumerate_choices(
    graph: &LabeledReebGraph,
    table: &SymbolTable,
    config: &CollapseConfig,
    state: &SweepState,
    slot: SlotIndex,
) -> Vec<SlotChoice> {
    let vertex = graph.vertex_at_slot(slot).expect("occupied slot");
    let kind = graph.derived_kind(vertex).expect("valid vertex");
    let sign = graph.vertices[vertex].sign;
    let in_star = graph.inbound_star(slot);

    let circle_blocked = |id: ComponentId| {
        config.strict_circles && state.component(id).is_some_and(|c| c.has_circle_strand())
    };

    let mut participant_ids: Vec<ComponentId> = Vec::new();
    for occ in &in_star {
        match state.component_of(occ) {
            Some(id) => {
                if !participant_ids.contains(&id) {
                    participant_ids.push(id);
                }
            }
            None => return Vec::new(),
        }
    }

    let mut out = Vec::new();
    for symbol in table.compatible(kind, sign) {
        let sig = table.signature(symbol);
        match sig.participation {
            Participation::FreshComponent => out.push(SlotChoice::plain(symbol)),
            Participation::DrillChosen => {
                for comp in &state.components {
                    if circle_blocked(comp.id) {
                        continue;
                    }
                    out.push(SlotChoice {
                        symbol,
                        drill: Some(comp.id),
                        split_first: None,
                    });
                }
            }
            Participation::Withdraw | Participation::SplitInPlace | Participation::SplitRetain => {
                if !circle_blocked(participant_ids[0]) {
                    out.push(SlotChoice::plain(symbol));
                }
            }
            Participation::TerminateLone => {
                let comp = state.component(participant_ids[0]).unwrap();
                if comp.strands.len() == 1 {
                    out.push(SlotChoice::plain(symbol));
                }
            }
            Participation::MergeWithin => {
                if participant_ids.len() == 1 && !circle_blocked(participant_ids[0]) {
                    out.push(SlotChoice::plain(symbol));
                }
            }
            Participation::MergeAcross => {
                if participant_ids.len() == 2
                    && !circle_blocked(participant_ids[0])
                    && !circle_blocked(participant_ids[1])
                {
                    out.push(SlotChoice::plain(symbol));
                }
            }
            Participation::SplitApart => {
                if circle_blocked(participant_ids[0]) {
                    continue;
                }
                let comp = state.component(participant_ids[0]).unwrap();
                let rest: Vec<StrandOccurrence> = comp
                    .strands
                    .iter()
                    .filter_map(|o| graph.advance(o))
                    .collect();
                for mask in 0u64..(1u64 << rest.len()) {
                    let first: BTreeSet<StrandOccurrence> = rest
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, o)| *o)
                        .collect();
                    out.push(SlotChoice {
                        symbol,
                        drill: None,
                        split_first: Some(first),
                    });
                }
            }
        }
    }
    out
}

/// A complete closed collapse: initial cut partition, one transition per
/// slot, the per-gap states they produce, and the cut pairing.
#[derive(Clone, Debug)]
pub struct CollapseStructure {
    /// Partition of the cut-gap strands before slot 0 fires.
    pub initial: SweepState,
    /// `states[j]` is the partition at gap `j` after slot `j`'s transition;
    /// the last entry is the final cut-state, paired back to `initial`.
    pub states: Vec<SweepState>,
    pub transitions: Vec<SlotTransition>,
    /// (final component, initial component): strand-bearing components are
    /// paired by strand-set equality, closed tokens by explicit choice.
    pub pairing: Vec<(ComponentId, ComponentId)>,
}

impl CollapseStructure {
    pub fn final_state(&self) -> &SweepState {
        if self.states.is_empty() {
            &self.initial
        } else {
            self.states.last().unwrap()
        }
    }
}

/// For slotless instances the monodromy shifts every circle strand by one
/// round; the cut pairing must match components across that shift.
pub fn monodromy_shift(graph: &LabeledReebGraph, state: &SweepState) -> SweepState {
    let mut out = SweepState::default();
    for comp in &state.components {
        let strands = comp
            .strands
            .iter()
            .map(|o| match o.source {
                StrandSource::Circle(k) => StrandOccurrence {
                    source: o.source,
                    crossing: (o.crossing + 1) % graph.circles[k].strand_count(),
                    gap: o.gap,
                },
                StrandSource::Edge(_) => *o,
            })
            .collect();
        out.components.push(SweepComponent {
            id: comp.id,
            strands,
        });
    }
    out
}

/// Strand occurrences of a slotless instance at its single conceptual level.
pub fn slotless_strands(graph: &LabeledReebGraph) -> Vec<StrandOccurrence> {
    let mut out = Vec::new();
    for (k, c) in graph.circles.iter().enumerate() {
        for r in 0..c.strand_count() {
            out.push(StrandOccurrence {
                source: StrandSource::Circle(k),
                crossing: r,
                gap: 0,
            });
        }
    }
    out.sort();
    out
}

/// Replay a recorded collapse and report every violated requirement. The
/// report is empty iff the collapse is valid for `graph` under `config`.
pub fn verify(
    graph: &LabeledReebGraph,
    table: &SymbolTable,
    config: &CollapseConfig,
    collapse: &CollapseStructure,
) -> Vec<String> {
    let mut report: Vec<String> = Vec::new();
    let n = graph.slot_count;

    // Initial state must partition the cut strands exactly.
    let expected: BTreeSet<StrandOccurrence> = if n == 0 {
        slotless_strands(graph).into_iter().collect()
    } else {
        graph.strands_at(n - 1).into_iter().collect()
    };
    let mut seen: BTreeSet<StrandOccurrence> = BTreeSet::new();
    let mut id_ok = true;
    let mut used_ids: BTreeSet<ComponentId> = BTreeSet::new();
    for comp in &collapse.initial.components {
        if !used_ids.insert(comp.id) {
            report.push(format!(
                "initial component id {} repeated",
                display_component(comp.id)
            ));
            id_ok = false;
        }
        for occ in &comp.strands {
            if !expected.contains(occ) {
                report.push(format!(
                    "initial strand {} is not a cut-gap strand",
                    graph.display_occurrence(occ)
                ));
            }
            if !seen.insert(*occ) {
                report.push(format!(
                    "initial strand {} assigned twice",
                    graph.display_occurrence(occ)
                ));
            }
        }
    }
    if seen != expected {
        report.push("initial state does not cover every cut-gap strand".to_string());
    }
    if !id_ok {
        return report;
    }

    if collapse.transitions.len() != n || collapse.states.len() != n {
        report.push(format!(
            "expected {n} transitions and states, got {} and {}",
            collapse.transitions.len(),
            collapse.states.len()
        ));
        return report;
    }

    // Replay every transition with scripted ids and compare states.
    let mut state = collapse.initial.clone();
    for (j, recorded) in collapse.transitions.iter().enumerate() {
        if recorded.slot != j {
            report.push(format!("transition {j} is labeled slot {}", recorded.slot));
            return report;
        }
        for id in &recorded.outputs {
            if !used_ids.insert(*id) {
                report.push(format!(
                    "component id {} reused at slot {j}",
                    display_component(*id)
                ));
                return report;
            }
        }
        let choice = SlotChoice {
            symbol: recorded.symbol,
            drill: recorded.drill,
            split_first: recorded
                .split_first
                .as_ref()
                .map(|v| v.iter().copied().collect()),
        };
        let mut ids = IdSource::Scripted(recorded.outputs.iter().copied().collect());
        match apply_slot(graph, table, config, &state, j, &choice, &mut ids) {
            Ok((next, replayed)) => {
                if replayed.inputs != recorded.inputs {
                    report.push(format!(
                        "slot {j}: recorded participants {:?} differ from replay {:?}",
                        recorded.inputs, replayed.inputs
                    ));
                }
                let chi_step = next.chi_hat() - state.chi_hat();
                let sig = table.signature(recorded.symbol);
                let pump = match sig.genus_rule {
                    GenusRule::SourceOne => 1,
                    GenusRule::SinkOne => -1,
                    _ => 0,
                };
                if chi_step != sig.chi_delta + 2 * pump {
                    report.push(format!(
                        "slot {j}: component/strand ledger moved by {chi_step}, expected {}",
                        sig.chi_delta + 2 * pump
                    ));
                }
                if next != collapse.states[j] {
                    report.push(format!("slot {j}: replayed state differs from record"));
                    return report;
                }
                state = next;
            }
            Err(e) => {
                report.push(format!("slot {j}: {e}"));
                return report;
            }
        }
    }

    // Cut closure: the pairing must be a strand-respecting bijection.
    let final_state = if n == 0 {
        monodromy_shift(graph, &collapse.initial)
    } else {
        state
    };
    let initial_ids: BTreeSet<ComponentId> =
        collapse.initial.components.iter().map(|c| c.id).collect();
    let mut paired_final: BTreeSet<ComponentId> = BTreeSet::new();
    let mut paired_initial: BTreeSet<ComponentId> = BTreeSet::new();
    for (f, i) in &collapse.pairing {
        if !paired_final.insert(*f) || !paired_initial.insert(*i) {
            report.push("cut closure: pairing is not a bijection".to_string());
            return report;
        }
        let fc = final_state.component(*f);
        let ic = collapse.initial.component(*i);
        match (fc, ic) {
            (Some(fc), Some(ic)) => {
                if fc.strands != ic.strands {
                    report.push(format!(
                        "cut closure: {} and {} carry different strand sets",
                        display_component(*f),
                        display_component(*i)
                    ));
                }
                // A token surviving untouched would close into a strand-free
                // vertexless circle, a disjoint closed piece excluded as
                // non-minimal.
                if fc.is_token() && initial_ids.contains(f) {
                    report.push(format!(
                        "cut closure: closed token {} survived the whole sweep",
                        display_component(*f)
                    ));
                }
            }
            _ => report.push("cut closure: pairing references unknown components".to_string()),
        }
    }
    if paired_final.len() != final_state.components.len()
        || paired_initial.len() != collapse.initial.components.len()
    {
        report.push("cut closure: pairing must cover all cut components".to_string());
    }

    let chi_sum: i64 = collapse
        .transitions
        .iter()
        .map(|t| table.signature(t.symbol).chi_delta)
        .sum();
    if chi_sum != 0 {
        report.push(format!(
            "chi deltas must cancel around the circle, got {chi_sum}"
        ));
    }

    report
}

/// Where a component lifetime begins or ends.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum ChainEnd {
    Cut,
    Vertex(SlotIndex),
}

#[derive(Clone, Debug)]
pub struct VVertex {
    pub slot: SlotIndex,
    pub wf_vertex: usize,
    pub symbol: SymbolName,
}

#[derive(Clone, Debug)]
pub struct VCrossing {
    pub gap: GapIndex,
    pub component: ComponentId,
    pub strands: BTreeSet<StrandOccurrence>,
}

#[derive(Clone, Debug)]
pub struct VEdge {
    pub id: String,
    /// Tail vertex index, or `None` for a vertexless circle.
    pub tail: Option<usize>,
    pub head: Option<usize>,
    /// Gap crossings along the chain, in sweep order.
    pub crossings: Vec<VCrossing>,
    /// Component lifetimes composing the chain.
    pub chain: Vec<ComponentId>,
    /// Winding degree, for vertexless circles.
    pub circle_degree: Option<u32>,
}

impl VEdge {
    pub fn is_circle(&self) -> bool {
        self.tail.is_none()
    }

    pub fn is_strand_free(&self) -> bool {
        self.crossings.iter().all(|c| c.strands.is_empty())
    }
}

#[derive(Clone, Debug)]
pub struct VGraph {
    pub vertices: Vec<VVertex>,
    pub edges: Vec<VEdge>,
    /// Vertex indices carrying the genus-raising merge symbol.
    pub gplus: Vec<usize>,
    /// Vertex indices carrying the genus-lowering split symbol.
    pub gminus: Vec<usize>,
}

impl VGraph {
    pub fn vertex_at_slot(&self, slot: SlotIndex) -> Option<usize> {
        self.vertices.iter().position(|v| v.slot == slot)
    }

    pub fn edge(&self, id: &str) -> Option<&VEdge> {
        self.edges.iter().find(|e| e.id == id)
    }

    /// Number of connected components, counting vertexless circles.
    pub fn component_count(&self) -> usize {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut circles = 0;
        for e in &self.edges {
            match (e.tail, e.head) {
                (Some(t), Some(h)) => {
                    let (a, b) = (find(&mut parent, t), find(&mut parent, h));
                    if a != b {
                        parent[a] = b;
                    }
                }
                _ => circles += 1,
            }
        }
        let mut roots: BTreeSet<usize> = BTreeSet::new();
        for v in 0..n {
            roots.insert(find(&mut parent, v));
        }
        roots.len() + circles
    }
}

impl fmt::Display for VGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "V({} vertices, {} edges)",
            self.vertices.len(),
            self.edges.len()
        )
    }
}

/// Extract the quotient graph from a verified collapse: maximal chains of
/// component continuations become edges, chains closing without meeting any
/// transition become vertexless circles.
pub fn to_vgraph(
    graph: &LabeledReebGraph,
    table: &SymbolTable,
    collapse: &CollapseStructure,
) -> VGraph {
    let n = graph.slot_count;
    let mut vertices = Vec::new();
    for t in &collapse.transitions {
        vertices.push(VVertex {
            slot: t.slot,
            wf_vertex: graph.vertex_at_slot(t.slot).expect("occupied slot"),
            symbol: t.symbol,
        });
    }

    let mut birth: BTreeMap<ComponentId, ChainEnd> = BTreeMap::new();
    let mut death: BTreeMap<ComponentId, ChainEnd> = BTreeMap::new();
    let mut across_cut: BTreeMap<ComponentId, ComponentId> = BTreeMap::new();
    for comp in &collapse.initial.components {
        birth.insert(comp.id, ChainEnd::Cut);
    }
    for t in &collapse.transitions {
        for id in &t.inputs {
            death.insert(*id, ChainEnd::Vertex(t.slot));
        }
        for id in &t.outputs {
            birth.insert(*id, ChainEnd::Vertex(t.slot));
        }
    }
    for comp in &collapse.final_state().components {
        death.entry(comp.id).or_insert(ChainEnd::Cut);
    }
    for (f, i) in &collapse.pairing {
        across_cut.insert(*f, *i);
    }

    // Gap crossings per component lifetime; the final cut state is skipped
    // so the cut level is counted once, on the initial side.
    let mut crossings: BTreeMap<ComponentId, Vec<VCrossing>> = BTreeMap::new();
    for comp in &collapse.initial.components {
        crossings.entry(comp.id).or_default().push(VCrossing {
            gap: n.saturating_sub(1),
            component: comp.id,
            strands: comp.strands.clone(),
        });
    }
    for gap in 0..n.saturating_sub(1) {
        for comp in &collapse.states[gap].components {
            crossings.entry(comp.id).or_default().push(VCrossing {
                gap,
                component: comp.id,
                strands: comp.strands.clone(),
            });
        }
    }

    let mut edges: Vec<VEdge> = Vec::new();
    let mut visited: BTreeSet<ComponentId> = BTreeSet::new();

    // Chains anchored at a vertex.
    let mut vertex_born: Vec<ComponentId> = birth
        .iter()
        .filter(|(_, b)| matches!(b, ChainEnd::Vertex(_)))
        .map(|(id, _)| *id)
        .collect();
    vertex_born.sort_unstable();
    for start in vertex_born {
        if visited.contains(&start) {
            continue;
        }
        let tail_slot = match birth[&start] {
            ChainEnd::Vertex(j) => j,
            ChainEnd::Cut => unreachable!(),
        };
        let mut chain = Vec::new();
        let mut cross = Vec::new();
        let mut cur = start;
        let head_slot = loop {
            visited.insert(cur);
            chain.push(cur);
            if let Some(cs) = crossings.get(&cur) {
                cross.extend(cs.iter().cloned());
            }
            match death[&cur] {
                ChainEnd::Vertex(j) => break j,
                ChainEnd::Cut => cur = across_cut[&cur],
            }
        };
        edges.push(VEdge {
            id: String::new(),
            tail: Some(tail_slot),
            head: Some(head_slot),
            crossings: cross,
            chain,
            circle_degree: None,
        });
    }

    // Remaining lifetimes close into vertexless circles.
    let mut leftover: Vec<ComponentId> = birth
        .keys()
        .filter(|id| !visited.contains(id))
        .copied()
        .collect();
    leftover.sort_unstable();
    for start in leftover {
        if visited.contains(&start) {
            continue;
        }
        let mut chain = Vec::new();
        let mut cross = Vec::new();
        let mut cur = start;
        loop {
            visited.insert(cur);
            chain.push(cur);
            if let Some(cs) = crossings.get(&cur) {
                cross.extend(cs.iter().cloned());
            }
            cur = across_cut[&cur];
            if cur == start {
                break;
            }
        }
        let degree = chain.len() as u32;
        edges.push(VEdge {
            id: String::new(),
            tail: None,
            head: None,
            crossings: cross,
            chain,
            circle_degree: Some(degree),
        });
    }

    // Deterministic edge ids: order chains by their smallest lifetime id.
    edges.sort_by_key(|e| *e.chain.iter().min().unwrap());
    for (k, e) in edges.iter_mut().enumerate() {
        e.id = format!("E{k}");
    }

    // Vertex indices instead of slots for endpoints.
    let slot_to_index: BTreeMap<SlotIndex, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.slot, i))
        .collect();
    for e in &mut edges {
        e.tail = e.tail.map(|s| slot_to_index[&s]);
        e.head = e.head.map(|s| slot_to_index[&s]);
    }

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

    let v = VGraph {
        vertices,
        edges,
        gplus,
        gminus,
    };
    debug_assert!(vstar_degrees_hold(table, &v));
    v
}

/// In/out degrees at each quotient vertex must match the assigned symbol.
pub fn vstar_degrees_hold(table: &SymbolTable, v: &VGraph) -> bool {
    for (i, vv) in v.vertices.iter().enumerate() {
        let ins = v.edges.iter().filter(|e| e.head == Some(i)).count();
        let outs = v.edges.iter().filter(|e| e.tail == Some(i)).count();
        let sig = table.signature(vv.symbol);
        if (ins, outs) != (sig.v_star.0 as usize, sig.v_star.1 as usize) {
            return false;
        }
    }
    v.edges
        .iter()
        .filter(|e| e.is_circle())
        .all(|e| e.circle_degree.unwrap_or(0) > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_instance;

    fn sphere(signs: &str) -> LabeledReebGraph {
        let (a, b) = (&signs[0..1], &signs[1..2]);
        parse_instance(&format!(
            "slots 2\nvertex a slot=0 sign={a}\nvertex b slot=1 sign={b}\nedge e a -> b wraps=0\n"
        ))
        .unwrap()
    }

    #[test]
    fn birth_into_empty_level() {
        let g = sphere("+-");
        let table = SymbolTable::shipped();
        let config = CollapseConfig::default();
        let state = SweepState::default();
        let mut ids = IdSource::Fresh(0);
        let (next, t) = apply_slot(
            &g,
            &table,
            &config,
            &state,
            0,
            &SlotChoice::plain(SymbolName::MPlus),
            &mut ids,
        )
        .unwrap();
        assert_eq!(next.components.len(), 1);
        assert_eq!(next.components[0].strands.len(), 1);
        assert_eq!(t.outputs, vec![0]);
    }

    #[test]
    fn merge_minus_across_components_has_no_model() {
        // Two borns feeding one merge with sign -, strands kept apart.
        let g = parse_instance(
            "slots 4\nvertex a slot=0 sign=+\nvertex b slot=1 sign=+\nvertex m slot=2 sign=-\nvertex d slot=3 sign=+\nedge e1 a -> m wraps=0\nedge e2 b -> m wraps=0\nedge f m -> d wraps=0\n",
        )
        .unwrap();
        let table = SymbolTable::shipped();
        let config = CollapseConfig::default();
        let mut ids = IdSource::Fresh(0);
        let mut state = SweepState::default();
        let (s1, _) = apply_slot(
            &g,
            &table,
            &config,
            &state,
            0,
            &SlotChoice::plain(SymbolName::MPlus),
            &mut ids,
        )
        .unwrap();
        state = s1;
        let (s2, _) = apply_slot(
            &g,
            &table,
            &config,
            &state,
            1,
            &SlotChoice::plain(SymbolName::MPlus),
            &mut ids,
        )
        .unwrap();
        state = s2;
        let err = apply_slot(
            &g,
            &table,
            &config,
            &state,
            2,
            &SlotChoice::plain(SymbolName::SMinus),
            &mut ids,
        )
        .unwrap_err();
        assert_eq!(err, ApplyError::NoSymbolAcrossComponents { slot: 2 });
        assert!(enumerate_choices(&g, &table, &config, &state, 2)
            .iter()
            .all(|c| c.symbol != SymbolName::SMinus));
    }

    #[test]
    fn withdraw_can_leave_a_closed_token() {
        let g = sphere("-+");
        let table = SymbolTable::shipped();
        let config = CollapseConfig::default();
        let mut ids = IdSource::Fresh(1);
        // One pre-existing closed token at the cut.
        let state = SweepState {
            components: vec![SweepComponent {
                id: 0,
                strands: BTreeSet::new(),
            }],
        };
        let (s1, t1) = apply_slot(
            &g,
            &table,
            &config,
            &state,
            0,
            &SlotChoice {
                symbol: SymbolName::MMinus,
                drill: Some(0),
                split_first: None,
            },
            &mut ids,
        )
        .unwrap();
        assert_eq!(t1.drill, Some(0));
        assert_eq!(s1.token_count(), 0);
        let (s2, _) = apply_slot(
            &g,
            &table,
            &config,
            &s1,
            1,
            &SlotChoice::plain(SymbolName::NPlus),
            &mut ids,
        )
        .unwrap();
        assert_eq!(s2.components.len(), 1);
        assert!(s2.components[0].is_token());
    }

    #[test]
    fn terminate_lone_rejects_extra_strands() {
        // A dies-minus vertex whose component also carries a circle strand.
        let g = parse_instance(
            "slots 2\nvertex a slot=0 sign=+\nvertex b slot=1 sign=-\nedge e a -> b wraps=0\ncircle c degree=1\n",
        )
        .unwrap();
        let table = SymbolTable::shipped();
        let config = CollapseConfig::default();
        let mut ids = IdSource::Fresh(1);
        let cut = g.strands_at(1);
        let state = SweepState {
            components: vec![SweepComponent {
                id: 0,
                strands: cut.into_iter().collect(),
            }],
        };
        let (s1, _) = apply_slot(
            &g,
            &table,
            &config,
            &state,
            0,
            &SlotChoice::plain(SymbolName::MPlus),
            &mut ids,
        )
        .unwrap();
        // Merge the newborn strand into the circle component by hand.
        let mut merged = BTreeSet::new();
        for c in &s1.components {
            merged.extend(c.strands.iter().copied());
        }
        let state = SweepState {
            components: vec![SweepComponent {
                id: 9,
                strands: merged,
            }],
        };
        let err = apply_slot(
            &g,
            &table,
            &config,
            &state,
            1,
            &SlotChoice::plain(SymbolName::NMinus),
            &mut ids,
        )
        .unwrap_err();
        assert_eq!(err, ApplyError::ExtraStrands { slot: 1 });
    }

    #[test]
    fn strict_mode_blocks_circle_carrying_participants() {
        let g = parse_instance(
            "slots 2\nvertex a slot=0 sign=-\nvertex b slot=1 sign=+\nedge e a -> b wraps=0\ncircle c degree=1\n",
        )
        .unwrap();
        let table = SymbolTable::shipped();
        let strict = CollapseConfig {
            strict_circles: true,
        };
        let cut = g.strands_at(1);
        let state = SweepState {
            components: vec![SweepComponent {
                id: 0,
                strands: cut.into_iter().collect(),
            }],
        };
        let mut ids = IdSource::Fresh(1);
        let err = apply_slot(
            &g,
            &table,
            &strict,
            &state,
            0,
            &SlotChoice {
                symbol: SymbolName::MMinus,
                drill: Some(0),
                split_first: None,
            },
            &mut ids,
        )
        .unwrap_err();
        assert_eq!(err, ApplyError::StrictCircle { slot: 0 });
        assert!(enumerate_choices(&g, &table, &strict, &state, 0).is_empty());
    }

    #[test]
    fn merge_across_requires_different_components() {
        // Two borns feeding a merge-plus whose strands share one component:
        // only the genus-raising model applies, never the joining one.
        let g = parse_instance(
            "slots 4\nvertex a slot=0 sign=+\nvertex b slot=1 sign=-\nvertex m slot=2 sign=+\nvertex d slot=3 sign=-\nedge e1 a -> m wraps=0\nedge e2 b -> m wraps=0\nedge f m -> d wraps=0\n",
        )
        .unwrap();
        let table = SymbolTable::shipped();
        let config = CollapseConfig::default();
        let mut ids = IdSource::Fresh(0);
        let state = SweepState::default();
        let (s1, _) = apply_slot(
            &g,
            &table,
            &config,
            &state,
            0,
            &SlotChoice::plain(SymbolName::MPlus),
            &mut ids,
        )
        .unwrap();
        let target = s1.components[0].id;
        let (s2, _) = apply_slot(
            &g,
            &table,
            &config,
            &s1,
            1,
            &SlotChoice {
                symbol: SymbolName::MMinus,
                drill: Some(target),
                split_first: None,
            },
            &mut ids,
        )
        .unwrap();
        // Both merge strands now live in the same component.
        let err = apply_slot(
            &g,
            &table,
            &config,
            &s2,
            2,
            &SlotChoice::plain(SymbolName::JPlus),
            &mut ids,
        )
        .unwrap_err();
        assert_eq!(err, ApplyError::SameComponent { slot: 2 });
        assert!(apply_slot(
            &g,
            &table,
            &config,
            &s2,
            2,
            &SlotChoice::plain(SymbolName::GPlus),
            &mut ids,
        )
        .is_ok());
    }

    #[test]
    fn hand_built_sphere_collapse_verifies_and_projects() {
        let g = sphere("+-");
        let table = SymbolTable::shipped();
        let config = CollapseConfig::default();
        let mut ids = IdSource::Fresh(0);
        let initial = SweepState::default();
        let (s0, t0) = apply_slot(
            &g,
            &table,
            &config,
            &initial,
            0,
            &SlotChoice::plain(SymbolName::MPlus),
            &mut ids,
        )
        .unwrap();
        let (s1, t1) = apply_slot(
            &g,
            &table,
            &config,
            &s0,
            1,
            &SlotChoice::plain(SymbolName::NMinus),
            &mut ids,
        )
        .unwrap();
        let collapse = CollapseStructure {
            initial,
            states: vec![s0, s1],
            transitions: vec![t0, t1],
            pairing: vec![],
        };
        assert!(verify(&g, &table, &config, &collapse).is_empty());
        let v = to_vgraph(&g, &table, &collapse);
        assert_eq!(v.vertices.len(), 2);
        assert_eq!(v.edges.len(), 1);
        assert_eq!(v.edges[0].tail, Some(0));
        assert_eq!(v.edges[0].head, Some(1));
        assert!(!v.edges[0].is_circle());
        assert_eq!(v.component_count(), 1);
    }

    #[test]
    fn corrupted_pairing_fails_cut_closure() {
        let g = sphere("-+");
        let table = SymbolTable::shipped();
        let config = CollapseConfig::default();
        let mut ids = IdSource::Fresh(1);
        let initial = SweepState {
            components: vec![SweepComponent {
                id: 0,
                strands: BTreeSet::new(),
            }],
        };
        let (s0, t0) = apply_slot(
            &g,
            &table,
            &config,
            &initial,
            0,
            &SlotChoice {
                symbol: SymbolName::MMinus,
                drill: Some(0),
                split_first: None,
            },
            &mut ids,
        )
        .unwrap();
        let (s1, t1) = apply_slot(
            &g,
            &table,
            &config,
            &s0,
            1,
            &SlotChoice::plain(SymbolName::NPlus),
            &mut ids,
        )
        .unwrap();
        let token_id = s1.components[0].id;
        let good = CollapseStructure {
            initial: initial.clone(),
            states: vec![s0.clone(), s1.clone()],
            transitions: vec![t0.clone(), t1.clone()],
            pairing: vec![(token_id, 0)],
        };
        assert!(verify(&g, &table, &config, &good).is_empty());
        let v = to_vgraph(&g, &table, &good);
        assert_eq!(v.edges.len(), 2);
        assert_eq!(v.edges.iter().filter(|e| e.is_strand_free()).count(), 1);

        let bad = CollapseStructure {
            pairing: vec![(token_id, token_id)],
            ..good
        };
        let report = verify(&g, &table, &config, &bad);
        assert!(report.iter().any(|m| m.contains("cut closure")));
    }

    #[test]
    fn slotless_circle_projects_to_vertexless_circle() {
        let g = parse_instance("slots 0\ncircle c degree=2\n").unwrap();
        let table = SymbolTable::shipped();
        let strands = slotless_strands(&g);
        assert_eq!(strands.len(), 2);
        // One component holding both rounds: shift-invariant.
        let initial = SweepState {
            components: vec![SweepComponent {
                id: 0,
                strands: strands.into_iter().collect(),
            }],
        };
        let shifted = monodromy_shift(&g, &initial);
        assert_eq!(shifted.components[0].strands, initial.components[0].strands);
        let collapse = CollapseStructure {
            initial,
            states: vec![],
            transitions: vec![],
            pairing: vec![(0, 0)],
        };
        assert!(verify(&g, &table, &CollapseConfig::default(), &collapse).is_empty());
        let v = to_vgraph(&g, &table, &collapse);
        assert_eq!(v.edges.len(), 1);
        assert!(v.edges[0].is_circle());
        assert_eq!(v.edges[0].circle_degree, Some(1));
    }
}
