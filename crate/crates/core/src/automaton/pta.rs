use std::collections::{BTreeMap, BTreeSet};

use super::{Automaton, State, SymbolId, Transition};
use crate::tracegen::EventSymbol;

/// Prefix tree of the training traces. Every state counts the traces passing
/// through it; the root counts all of them.
pub fn build_pta<T: AsRef<[EventSymbol]>>(traces: &[T]) -> Automaton {
    let alphabet: Vec<EventSymbol> = traces
        .iter()
        .flat_map(|t| t.as_ref().iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ids: BTreeMap<&EventSymbol, SymbolId> = alphabet
        .iter()
        .enumerate()
        .map(|(i, s)| (s, i as SymbolId))
        .collect();

    let mut states = vec![State::default()];
    for trace in traces {
        let mut q = 0;
        states[0].count += 1;
        for sym in trace.as_ref() {
            let id = ids[sym];
            let next = match states[q].transitions.get_mut(&id) {
                Some(t) => {
                    t.count += 1;
                    t.target
                }
                None => {
                    let target = states.len();
                    states.push(State::default());
                    states[q].transitions.insert(id, Transition { target, count: 1 });
                    target
                }
            };
            states[next].count += 1;
            q = next;
        }
        states[q].final_count += 1;
    }
    Automaton::from_parts(alphabet, states).canonicalize()
}
