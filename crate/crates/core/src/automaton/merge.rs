//! Red-blue state merging with an ALERGIA-style Hoeffding compatibility test.
//!
//! The red core starts as the root. Each round picks the blue state (a
//! non-red child of a red state) with the most evidence and tries to merge it
//! into a red state, in promotion order. Two states are compatible when, for
//! every symbol, their outgoing relative frequencies differ by less than
//! `sqrt(ln(2/alpha) / 2) * (1/sqrt(n1) + 1/sqrt(n2))`, recursively on common
//! successors. A blue state compatible with no red state is promoted.

use serde::{Deserialize, Serialize};

use super::{Automaton, State, StateId, SymbolId, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeParams {
    /// Significance of the compatibility test, in (0, 1).
    pub alpha: f64,
    /// Blue states seen fewer times than this are left as unmerged subtrees.
    pub min_count: u64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            min_count: 0,
        }
    }
}

impl MergeParams {
    /// Leaves every state unmerged, returning the prefix tree unchanged.
    pub fn reject_all() -> Self {
        Self {
            alpha: 0.05,
            min_count: u64::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidAlpha(self.alpha))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Color {
    White,
    Red,
    /// Too little evidence to merge; never revisited.
    Frozen,
    Gone,
}

struct Merger {
    states: Vec<State>,
    color: Vec<Color>,
    red: Vec<StateId>,
    factor: f64,
}

/// Folds compatible states of a prefix tree into a smaller deterministic
/// automaton. State counts are summed under merges.
pub fn merge_states(pta: &Automaton, params: &MergeParams) -> Result<Automaton> {
    params.validate()?;
    let n = pta.num_states();
    let mut m = Merger {
        states: pta.states().to_vec(),
        color: vec![Color::White; n],
        red: vec![0],
        factor: (0.5 * (2.0 / params.alpha).ln()).sqrt(),
    };
    m.color[0] = Color::Red;

    while let Some((parent, sym, blue)) = m.next_blue() {
        if m.states[blue].count < params.min_count {
            m.color[blue] = Color::Frozen;
            continue;
        }
        let target = m
            .red
            .iter()
            .copied()
            .find(|&r| m.compatible(r, blue));
        match target {
            Some(r) => {
                m.states[parent]
                    .transitions
                    .get_mut(&sym)
                    .expect("blue state hangs off its parent")
                    .target = r;
                m.fold(r, blue);
            }
            None => {
                m.color[blue] = Color::Red;
                m.red.push(blue);
            }
        }
    }

    let merged = Automaton::from_parts(pta.alphabet().to_vec(), m.states);
    Ok(merged.canonicalize())
}

impl Merger {
    /// Blue state with the largest count; ties go to the first found when
    /// scanning red states in promotion order and symbols in order.
    fn next_blue(&self) -> Option<(StateId, SymbolId, StateId)> {
        let mut best: Option<(StateId, SymbolId, StateId)> = None;
        for &r in &self.red {
            for (&sym, t) in &self.states[r].transitions {
                if self.color[t.target] != Color::White {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((_, _, b)) => self.states[t.target].count > self.states[b].count,
                };
                if better {
                    best = Some((r, sym, t.target));
                }
            }
        }
        best
    }

    fn out_total(&self, q: StateId) -> u64 {
        self.states[q].transitions.values().map(|t| t.count).sum()
    }

    fn different(&self, c1: u64, n1: u64, c2: u64, n2: u64) -> bool {
        let (n1, n2) = (n1 as f64, n2 as f64);
        let bound = self.factor * (1.0 / n1.sqrt() + 1.0 / n2.sqrt());
        (c1 as f64 / n1 - c2 as f64 / n2).abs() >= bound
    }

    /// Recursion follows the blue side, which is always a tree.
    fn compatible(&self, red: StateId, blue: StateId) -> bool {
        let (r, b) = (&self.states[red], &self.states[blue]);
        let (nr, nb) = (self.out_total(red), self.out_total(blue));
        if nr > 0 && nb > 0 {
            for (sym, t) in &r.transitions {
                let cb = b.transitions.get(sym).map_or(0, |t| t.count);
                if self.different(t.count, nr, cb, nb) {
                    return false;
                }
            }
            for (sym, t) in &b.transitions {
                if !r.transitions.contains_key(sym) && self.different(0, nr, t.count, nb) {
                    return false;
                }
            }
        }
        b.transitions.iter().all(|(sym, tb)| match r.transitions.get(sym) {
            Some(tr) => self.compatible(tr.target, tb.target),
            None => true,
        })
    }

    /// Adds the tree rooted at `blue` into `red`.
    fn fold(&mut self, red: StateId, blue: StateId) {
        let moved = std::mem::take(&mut self.states[blue]);
        self.color[blue] = Color::Gone;
        self.states[red].count += moved.count;
        self.states[red].final_count += moved.final_count;
        for (sym, tb) in moved.transitions {
            match self.states[red].transitions.get_mut(&sym) {
                Some(tr) => {
                    tr.count += tb.count;
                    let target = tr.target;
                    self.fold(target, tb.target);
                }
                None => {
                    self.states[red].transitions.insert(
                        sym,
                        Transition {
                            target: tb.target,
                            count: tb.count,
                        },
                    );
                }
            }
        }
    }
}
