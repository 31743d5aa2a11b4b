//! Deterministic state machines learned from traces.

pub mod markov;
pub mod merge;
pub mod pta;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracegen::EventSymbol;

pub use markov::MarkovChain;
pub use merge::{merge_states, MergeParams};
pub use pta::build_pta;

pub type StateId = usize;
pub type SymbolId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub target: StateId,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct State {
    /// Training traversals arriving here; for the root, the number of traces.
    pub count: u64,
    /// Training traces ending here. Kept for completeness, unused by scoring.
    pub final_count: u64,
    pub transitions: BTreeMap<SymbolId, Transition>,
}

/// A deterministic automaton over an interned, lexicographically sorted
/// alphabet. State 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "AutomatonRepr", try_from = "AutomatonRepr")]
pub struct Automaton {
    alphabet: Vec<EventSymbol>,
    states: Vec<State>,
}

impl Automaton {
    pub(crate) fn from_parts(alphabet: Vec<EventSymbol>, states: Vec<State>) -> Self {
        debug_assert!(alphabet.windows(2).all(|w| w[0] < w[1]));
        Self { alphabet, states }
    }

    pub fn root() -> StateId {
        0
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.states.iter().map(|s| s.transitions.len()).sum()
    }

    pub fn alphabet(&self) -> &[EventSymbol] {
        &self.alphabet
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &State {
        &self.states[id]
    }

    pub fn symbol(&self, id: SymbolId) -> &EventSymbol {
        &self.alphabet[id as usize]
    }

    pub fn symbol_id(&self, symbol: &str) -> Option<SymbolId> {
        self.alphabet
            .binary_search_by(|s| s.as_str().cmp(symbol))
            .ok()
            .map(|i| i as SymbolId)
    }

    pub fn next(&self, state: StateId, symbol: SymbolId) -> Option<StateId> {
        self.states[state].transitions.get(&symbol).map(|t| t.target)
    }

    pub fn total_state_count(&self) -> u64 {
        self.states.iter().map(|s| s.count).sum()
    }

    /// `(source, symbol, target, count)` for every transition into `state`.
    pub fn incoming(&self, state: StateId) -> Vec<(StateId, SymbolId, u64)> {
        let mut out = Vec::new();
        for (src, s) in self.states.iter().enumerate() {
            for (&sym, t) in &s.transitions {
                if t.target == state {
                    out.push((src, sym, t.count));
                }
            }
        }
        out
    }

    /// Every state is reachable from the root.
    pub fn all_reachable(&self) -> bool {
        let mut seen = vec![false; self.states.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(q) = queue.pop_front() {
            for t in self.states[q].transitions.values() {
                if !seen[t.target] {
                    seen[t.target] = true;
                    queue.push_back(t.target);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Renumbers states breadth-first from the root, following symbols in
    /// lexicographic order, and drops anything unreachable.
    pub fn canonicalize(&self) -> Automaton {
        let mut order = Vec::with_capacity(self.states.len());
        let mut new_id = vec![usize::MAX; self.states.len()];
        new_id[0] = 0;
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let q = order[head];
            head += 1;
            for t in self.states[q].transitions.values() {
                if new_id[t.target] == usize::MAX {
                    new_id[t.target] = order.len();
                    order.push(t.target);
                }
            }
        }
        let states = order
            .iter()
            .map(|&old| {
                let s = &self.states[old];
                State {
                    count: s.count,
                    final_count: s.final_count,
                    transitions: s
                        .transitions
                        .iter()
                        .map(|(&sym, t)| {
                            (
                                sym,
                                Transition {
                                    target: new_id[t.target],
                                    count: t.count,
                                },
                            )
                        })
                        .collect(),
                }
            })
            .collect();
        Automaton::from_parts(self.alphabet.clone(), states)
    }

    /// Walks `symbols` from the root. A missing transition resets to the root
    /// and retries there; if the root has no transition either, the root
    /// itself is recorded for that position. The machine is never modified.
    pub fn replay<S: AsRef<str>>(&self, symbols: &[S]) -> ReplayResult {
        let mut state_sequence = Vec::with_capacity(symbols.len());
        let mut reset_positions = Vec::new();
        let mut current = Self::root();
        for (i, sym) in symbols.iter().enumerate() {
            let id = self.symbol_id(sym.as_ref());
            match id.and_then(|id| self.next(current, id)) {
                Some(next) => current = next,
                None => {
                    reset_positions.push(i);
                    current = id
                        .and_then(|id| self.next(Self::root(), id))
                        .unwrap_or(Self::root());
                }
            }
            state_sequence.push(current);
        }
        let visited_set = state_sequence.iter().copied().collect();
        ReplayResult {
            state_sequence,
            reset_positions,
            visited_set,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayResult {
    /// State entered after each symbol.
    pub state_sequence: Vec<StateId>,
    pub reset_positions: Vec<usize>,
    pub visited_set: BTreeSet<StateId>,
}

/// On-disk layout of an automaton.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AutomatonRepr {
    alphabet: Vec<EventSymbol>,
    state_counts: Vec<u64>,
    final_counts: Vec<u64>,
    /// `(source, symbol, target, count)`
    transitions: Vec<(StateId, SymbolId, StateId, u64)>,
}

impl From<Automaton> for AutomatonRepr {
    fn from(a: Automaton) -> Self {
        let transitions = a
            .states
            .iter()
            .enumerate()
            .flat_map(|(q, s)| {
                s.transitions
                    .iter()
                    .map(move |(&sym, t)| (q, sym, t.target, t.count))
            })
            .collect();
        Self {
            state_counts: a.states.iter().map(|s| s.count).collect(),
            final_counts: a.states.iter().map(|s| s.final_count).collect(),
            alphabet: a.alphabet,
            transitions,
        }
    }
}

impl TryFrom<AutomatonRepr> for Automaton {
    type Error = Error;

    fn try_from(r: AutomatonRepr) -> Result<Self> {
        let n = r.state_counts.len();
        if n == 0 || r.final_counts.len() != n {
            return Err(Error::Config("automaton state tables are malformed".into()));
        }
        if !r.alphabet.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("automaton alphabet is not sorted".into()));
        }
        let mut states: Vec<State> = r
            .state_counts
            .iter()
            .zip(&r.final_counts)
            .map(|(&count, &final_count)| State {
                count,
                final_count,
                transitions: BTreeMap::new(),
            })
            .collect();
        for (src, sym, target, count) in r.transitions {
            if src >= n || target >= n || sym as usize >= r.alphabet.len() {
                return Err(Error::Config(format!(
                    "transition ({src}, {sym}, {target}) is out of range"
                )));
            }
            if states[src]
                .transitions
                .insert(sym, Transition { target, count })
                .is_some()
            {
                return Err(Error::Config(format!(
                    "state {src} has two transitions on symbol {sym}"
                )));
            }
        }
        Ok(Automaton::from_parts(r.alphabet, states))
    }
}
