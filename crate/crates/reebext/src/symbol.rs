//! The ten local transition models of a collapse as machine-checkable
//! signatures, including their genus rules and level-surface Euler
//! characteristic deltas.
//!
//! The table ships with the derived content below but is held as data, so a
//! transcription can override individual fields and re-run
//! [`SymbolTable::consistency_check`] plus the fixture suites.

use std::fmt;

use thiserror::Error;

use crate::model::{Sign, VertexKind};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum SymbolName {
    MPlus,
    MMinus,
    NPlus,
    NMinus,
    SPlus,
    SMinus,
    GPlus,
    GMinus,
    JPlus,
    JMinus,
}

pub const ALL_SYMBOLS: [SymbolName; 10] = [
    SymbolName::MPlus,
    SymbolName::MMinus,
    SymbolName::NPlus,
    SymbolName::NMinus,
    SymbolName::SPlus,
    SymbolName::SMinus,
    SymbolName::GPlus,
    SymbolName::GMinus,
    SymbolName::JPlus,
    SymbolName::JMinus,
];

impl SymbolName {
    pub fn parse(s: &str) -> Option<SymbolName> {
        Some(match s {
            "M+" => SymbolName::MPlus,
            "M-" => SymbolName::MMinus,
            "N+" => SymbolName::NPlus,
            "N-" => SymbolName::NMinus,
            "S+" => SymbolName::SPlus,
            "S-" => SymbolName::SMinus,
            "G+" => SymbolName::GPlus,
            "G-" => SymbolName::GMinus,
            "J+" => SymbolName::JPlus,
            "J-" => SymbolName::JMinus,
            _ => return None,
        })
    }

    pub fn sign(self) -> Sign {
        match self {
            SymbolName::MPlus
            | SymbolName::NPlus
            | SymbolName::SPlus
            | SymbolName::GPlus
            | SymbolName::JPlus => Sign::Plus,
            _ => Sign::Minus,
        }
    }

    /// The solid part attached at this transition during assembly. The two
    /// saddle parts are shared: genus saddles reuse the plain saddle parts.
    pub fn part_name(self) -> &'static str {
        match self {
            SymbolName::MPlus => "MOD(M+)",
            SymbolName::MMinus => "MOD(M-)",
            SymbolName::NPlus => "MOD(N+)",
            SymbolName::NMinus => "MOD(N-)",
            SymbolName::SPlus | SymbolName::GPlus | SymbolName::JPlus => "MOD(S+)",
            SymbolName::SMinus | SymbolName::GMinus | SymbolName::JMinus => "MOD(S-)",
        }
    }
}

impl fmt::Display for SymbolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymbolName::MPlus => "M+",
            SymbolName::MMinus => "M-",
            SymbolName::NPlus => "N+",
            SymbolName::NMinus => "N-",
            SymbolName::SPlus => "S+",
            SymbolName::SMinus => "S-",
            SymbolName::GPlus => "G+",
            SymbolName::GMinus => "G-",
            SymbolName::JPlus => "J+",
            SymbolName::JMinus => "J-",
        };
        write!(f, "{s}")
    }
}

/// How the genus labels on the incident quotient-graph edges relate across
/// the vertex, read in sweep direction.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GenusRule {
    /// In genus equals out genus.
    Conserve,
    /// Out genus = in genus + 1.
    SourceOne,
    /// Out genus = in genus - 1.
    SinkOne,
    /// Out genus = sum of the two in genera.
    SumAtMerge,
    /// In genus = sum of the two out genera.
    SumAtSplit,
    /// The single outgoing edge carries genus 0 (a newborn disk).
    ForceZeroOut,
    /// The single incoming edge carries genus 0 (a dying disk).
    ForceZeroIn,
}

impl fmt::Display for GenusRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GenusRule::Conserve => "conserve",
            GenusRule::SourceOne => "source-one",
            GenusRule::SinkOne => "sink-one",
            GenusRule::SumAtMerge => "sum-at-merge",
            GenusRule::SumAtSplit => "sum-at-split",
            GenusRule::ForceZeroOut => "force-zero-out",
            GenusRule::ForceZeroIn => "force-zero-in",
        };
        write!(f, "{s}")
    }
}

impl GenusRule {
    pub fn parse(s: &str) -> Option<GenusRule> {
        Some(match s {
            "conserve" => GenusRule::Conserve,
            "source-one" => GenusRule::SourceOne,
            "sink-one" => GenusRule::SinkOne,
            "sum-at-merge" => GenusRule::SumAtMerge,
            "sum-at-split" => GenusRule::SumAtSplit,
            "force-zero-out" => GenusRule::ForceZeroOut,
            "force-zero-in" => GenusRule::ForceZeroIn,
            _ => return None,
        })
    }
}

/// Which level-surface components and strands the transition touches.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Participation {
    /// A new component is created containing only the newborn strand.
    FreshComponent,
    /// The newborn strand joins one chosen existing component, which may be
    /// a closed, strand-free component.
    DrillChosen,
    /// The dying strand is removed; its component continues, possibly
    /// becoming closed and strand-free.
    Withdraw,
    /// The dying strand's component must consist of that strand alone; the
    /// component terminates.
    TerminateLone,
    /// The in-strand is replaced by both out-strands inside one continuing
    /// component.
    SplitInPlace,
    /// Both in-strands must lie in the same component; they are replaced by
    /// the out-strand.
    MergeWithin,
    /// The in-strands lie in different components, which merge.
    MergeAcross,
    /// The component continues containing both out-strands.
    SplitRetain,
    /// The component splits in two, one out-strand on each side; the
    /// remaining strands are distributed by choice.
    SplitApart,
}

impl fmt::Display for Participation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Participation::FreshComponent => "fresh-component",
            Participation::DrillChosen => "drill-chosen",
            Participation::Withdraw => "withdraw",
            Participation::TerminateLone => "terminate-lone",
            Participation::SplitInPlace => "split-in-place",
            Participation::MergeWithin => "merge-within",
            Participation::MergeAcross => "merge-across",
            Participation::SplitRetain => "split-retain",
            Participation::SplitApart => "split-apart",
        };
        write!(f, "{s}")
    }
}

impl Participation {
    pub fn parse(s: &str) -> Option<Participation> {
        Some(match s {
            "fresh-component" => Participation::FreshComponent,
            "drill-chosen" => Participation::DrillChosen,
            "withdraw" => Participation::Withdraw,
            "terminate-lone" => Participation::TerminateLone,
            "split-in-place" => Participation::SplitInPlace,
            "merge-within" => Participation::MergeWithin,
            "merge-across" => Participation::MergeAcross,
            "split-retain" => Participation::SplitRetain,
            "split-apart" => Participation::SplitApart,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SymbolSignature {
    pub name: SymbolName,
    pub sign: Sign,
    pub kind: VertexKind,
    /// (in, out) strand counts at the Reeb-graph vertex, sweep directed.
    pub wf_star: (u8, u8),
    /// (in, out) edge counts at the quotient-graph vertex.
    pub v_star: (u8, u8),
    pub participation: Participation,
    pub genus_rule: GenusRule,
    /// Change of the level-surface Euler characteristic across the vertex.
    pub chi_delta: i64,
}

#[derive(Clone, Debug)]
pub struct SymbolTable {
    sigs: [SymbolSignature; 10],
}

impl Default for SymbolTable {
    fn default() -> Self {
        SymbolTable::shipped()
    }
}

impl SymbolTable {
    pub fn shipped() -> SymbolTable {
        use GenusRule::*;
        use Participation::*;
        use SymbolName::*;
        use VertexKind::*;
        let sig =
            |name, kind, wf_star, v_star, participation, genus_rule, chi_delta| SymbolSignature {
                name,
                sign: name.sign(),
                kind,
                wf_star,
                v_star,
                participation,
                genus_rule,
                chi_delta,
            };
        SymbolTable {
            sigs: [
                sig(MPlus, Born, (0, 1), (0, 1), FreshComponent, ForceZeroOut, 1),
                sig(MMinus, Born, (0, 1), (1, 1), DrillChosen, Conserve, -1),
                sig(NPlus, Dies, (1, 0), (1, 1), Withdraw, Conserve, 1),
                sig(NMinus, Dies, (1, 0), (1, 0), TerminateLone, ForceZeroIn, -1),
                sig(SPlus, Split, (1, 2), (1, 1), SplitInPlace, Conserve, -1),
                sig(SMinus, Merge, (2, 1), (1, 1), MergeWithin, Conserve, 1),
                sig(GPlus, Merge, (2, 1), (1, 1), MergeWithin, SourceOne, -1),
                sig(GMinus, Split, (1, 2), (1, 1), SplitRetain, SinkOne, 1),
                sig(JPlus, Merge, (2, 1), (2, 1), MergeAcross, SumAtMerge, -1),
                sig(JMinus, Split, (1, 2), (1, 2), SplitApart, SumAtSplit, 1),
            ],
        }
    }

    pub fn signature(&self, name: SymbolName) -> &SymbolSignature {
        self.sigs.iter().find(|s| s.name == name).unwrap()
    }

    pub fn signatures(&self) -> &[SymbolSignature; 10] {
        &self.sigs
    }

    /// Symbols applicable at a vertex of the given kind and sign, in
    /// canonical (table) order. Ambiguity occurs exactly at (Merge, +) and
    /// (Split, -).
    pub fn compatible(&self, kind: VertexKind, sign: Sign) -> Vec<SymbolName> {
        self.sigs
            .iter()
            .filter(|s| s.kind == kind && s.sign == sign)
            .map(|s| s.name)
            .collect()
    }

    /// Verify the structural invariants of the table. Diagnostics, not
    /// errors: an overridden table may be inspected before use.
    pub fn consistency_check(&self) -> Vec<String> {
        use GenusRule::*;
        use SymbolName::*;
        let mut out = Vec::new();
        for s in &self.sigs {
            if s.sign != s.name.sign() {
                out.push(format!("{}: sign field does not match the name", s.name));
            }
            let wf_total = s.wf_star.0 + s.wf_star.1;
            if wf_total != 1 && wf_total != 3 {
                out.push(format!(
                    "{}: strand star total must be 1 or 3, got {wf_total}",
                    s.name
                ));
            }
            let v_total = s.v_star.0 + s.v_star.1;
            if !(1..=3).contains(&v_total) {
                out.push(format!(
                    "{}: quotient star total must be 1..3, got {v_total}",
                    s.name
                ));
            }
            if s.chi_delta != 1 && s.chi_delta != -1 {
                out.push(format!("{}: chi delta must be +1 or -1", s.name));
            }
            let expected_rule = match s.name {
                GPlus => SourceOne,
                GMinus => SinkOne,
                JPlus => SumAtMerge,
                JMinus => SumAtSplit,
                MPlus => ForceZeroOut,
                NMinus => ForceZeroIn,
                MMinus | NPlus | SPlus | SMinus => Conserve,
            };
            if s.genus_rule != expected_rule {
                out.push(format!(
                    "{}: genus rule must be {expected_rule}, got {}",
                    s.name, s.genus_rule
                ));
            }
        }
        let plus_set: Vec<SymbolName> = self
            .sigs
            .iter()
            .filter(|s| s.chi_delta == 1)
            .map(|s| s.name)
            .collect();
        let expected_plus = [MPlus, NPlus, SMinus, GMinus, JMinus];
        if plus_set.len() != 5 || !expected_plus.iter().all(|n| plus_set.contains(n)) {
            out.push(format!(
                "chi balance: the +1 symbols must be exactly M+, N+, S-, G-, J-; got {:?}",
                plus_set
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<String>>()
            ));
        }
        out
    }
}

#[derive(Error, Debug)]
pub enum TableOverrideError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

/// Apply overrides from a line-oriented file of the form
///
/// ```text
/// symbol <name> [wf=<in>,<out>] [v=<in>,<out>] [participation=<rule>]
///               [genus=<rule>] [chi=<+1|-1>]
/// ```
pub fn apply_overrides(table: &mut SymbolTable, text: &str) -> Result<(), TableOverrideError> {
    let syntax = |line: usize, msg: &str| TableOverrideError::Syntax {
        line,
        msg: msg.to_string(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens[0] != "symbol" || tokens.len() < 2 {
            return Err(syntax(line_no, "expected 'symbol <name> <field>=...'"));
        }
        let name =
            SymbolName::parse(tokens[1]).ok_or_else(|| syntax(line_no, "unknown symbol name"))?;
        let sig = table.sigs.iter_mut().find(|s| s.name == name).unwrap();
        for tok in &tokens[2..] {
            if let Some(v) = tok.strip_prefix("wf=") {
                sig.wf_star = parse_pair(v).ok_or_else(|| syntax(line_no, "bad wf= pair"))?;
            } else if let Some(v) = tok.strip_prefix("v=") {
                sig.v_star = parse_pair(v).ok_or_else(|| syntax(line_no, "bad v= pair"))?;
            } else if let Some(v) = tok.strip_prefix("participation=") {
                sig.participation = Participation::parse(v)
                    .ok_or_else(|| syntax(line_no, "unknown participation rule"))?;
            } else if let Some(v) = tok.strip_prefix("genus=") {
                sig.genus_rule =
                    GenusRule::parse(v).ok_or_else(|| syntax(line_no, "unknown genus rule"))?;
            } else if let Some(v) = tok.strip_prefix("chi=") {
                sig.chi_delta = v
                    .parse::<i64>()
                    .map_err(|_| syntax(line_no, "chi must be an integer"))?;
            } else {
                return Err(syntax(line_no, "unknown override field"));
            }
        }
    }
    Ok(())
}

fn parse_pair(s: &str) -> Option<(u8, u8)> {
    let (a, b) = s.split_once(',')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_is_consistent() {
        let table = SymbolTable::shipped();
        assert!(table.consistency_check().is_empty());
    }

    #[test]
    fn signature_fields_match_transition_analysis() {
        let table = SymbolTable::shipped();
        let g_plus = table.signature(SymbolName::GPlus);
        assert_eq!(g_plus.kind, VertexKind::Merge);
        assert_eq!(g_plus.v_star, (1, 1));
        assert_eq!(g_plus.genus_rule, GenusRule::SourceOne);
        assert_eq!(g_plus.chi_delta, -1);

        let m_plus = table.signature(SymbolName::MPlus);
        assert_eq!(m_plus.kind, VertexKind::Born);
        assert_eq!(m_plus.v_star, (0, 1));
        assert_eq!(m_plus.genus_rule, GenusRule::ForceZeroOut);
        assert_eq!(m_plus.chi_delta, 1);

        let j_minus = table.signature(SymbolName::JMinus);
        assert_eq!(j_minus.kind, VertexKind::Split);
        assert_eq!(j_minus.v_star, (1, 2));
        assert_eq!(j_minus.genus_rule, GenusRule::SumAtSplit);
        assert_eq!(j_minus.chi_delta, 1);
    }

    #[test]
    fn lookup_by_kind_and_sign() {
        let table = SymbolTable::shipped();
        let pairs = [
            (VertexKind::Born, Sign::Plus, vec![SymbolName::MPlus]),
            (VertexKind::Born, Sign::Minus, vec![SymbolName::MMinus]),
            (VertexKind::Dies, Sign::Plus, vec![SymbolName::NPlus]),
            (VertexKind::Dies, Sign::Minus, vec![SymbolName::NMinus]),
            (VertexKind::Split, Sign::Plus, vec![SymbolName::SPlus]),
            (
                VertexKind::Split,
                Sign::Minus,
                vec![SymbolName::GMinus, SymbolName::JMinus],
            ),
            (
                VertexKind::Merge,
                Sign::Plus,
                vec![SymbolName::GPlus, SymbolName::JPlus],
            ),
            (VertexKind::Merge, Sign::Minus, vec![SymbolName::SMinus]),
        ];
        for (kind, sign, expected) in pairs {
            assert_eq!(table.compatible(kind, sign), expected);
        }
    }

    #[test]
    fn every_kind_sign_pair_has_a_symbol() {
        let table = SymbolTable::shipped();
        let kinds = [
            VertexKind::Born,
            VertexKind::Dies,
            VertexKind::Split,
            VertexKind::Merge,
        ];
        let mut ambiguous = Vec::new();
        for kind in kinds {
            for sign in [Sign::Plus, Sign::Minus] {
                let c = table.compatible(kind, sign);
                assert!(!c.is_empty());
                if c.len() == 2 {
                    ambiguous.push((kind, sign));
                }
            }
        }
        assert_eq!(
            ambiguous,
            vec![
                (VertexKind::Split, Sign::Minus),
                (VertexKind::Merge, Sign::Plus)
            ]
        );
    }

    #[test]
    fn corrupt_tables_are_flagged() {
        let mut table = SymbolTable::shipped();
        apply_overrides(&mut table, "symbol G+ genus=conserve\n").unwrap();
        let report = table.consistency_check();
        assert!(report
            .iter()
            .any(|m| m.contains("G+") && m.contains("source-one")));

        let mut table = SymbolTable::shipped();
        apply_overrides(&mut table, "symbol M+ chi=-1\n").unwrap();
        let report = table.consistency_check();
        assert!(report.iter().any(|m| m.contains("chi balance")));
    }

    #[test]
    fn override_file_errors_carry_line_numbers() {
        let mut table = SymbolTable::shipped();
        let err = apply_overrides(&mut table, "symbol Q+ chi=1\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
