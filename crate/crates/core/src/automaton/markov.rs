//! First-order Markov chain over event symbols, used as a likelihood baseline.

use std::collections::{BTreeMap, HashMap};

use crate::tracegen::EventSymbol;

/// Transition counts with add-one smoothing over the training alphabet plus
/// one bucket shared by all unseen symbols.
#[derive(Debug, Clone, Default)]
pub struct MarkovChain {
    ids: BTreeMap<EventSymbol, u32>,
    pair_counts: HashMap<(u32, u32), u64>,
    row_totals: HashMap<u32, u64>,
}

impl MarkovChain {
    pub fn fit<T: AsRef<[EventSymbol]>>(traces: &[T]) -> Self {
        let mut chain = MarkovChain::default();
        for t in traces {
            for s in t.as_ref() {
                let next = chain.ids.len() as u32;
                chain.ids.entry(s.clone()).or_insert(next);
            }
        }
        for t in traces {
            for w in t.as_ref().windows(2) {
                let (a, b) = (chain.ids[&w[0]], chain.ids[&w[1]]);
                *chain.pair_counts.entry((a, b)).or_default() += 1;
                *chain.row_totals.entry(a).or_default() += 1;
            }
        }
        chain
    }

    pub fn alphabet_len(&self) -> usize {
        self.ids.len()
    }

    fn id(&self, s: &EventSymbol) -> u32 {
        // the unseen bucket sits just past the training alphabet
        self.ids.get(s).copied().unwrap_or(self.ids.len() as u32)
    }

    /// `P(next | prev)` with add-one smoothing.
    pub fn probability(&self, prev: &EventSymbol, next: &EventSymbol) -> f64 {
        let (a, b) = (self.id(prev), self.id(next));
        let c = self.pair_counts.get(&(a, b)).copied().unwrap_or(0);
        let row = self.row_totals.get(&a).copied().unwrap_or(0);
        (c + 1) as f64 / (row + self.ids.len() as u64 + 1) as f64
    }

    /// Negative log-likelihood of the transitions; higher is more anomalous.
    pub fn score(&self, trace: &[EventSymbol]) -> f64 {
        trace
            .windows(2)
            .map(|w| -self.probability(&w[0], &w[1]).ln())
            .sum()
    }
}
