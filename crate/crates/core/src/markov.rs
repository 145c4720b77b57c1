//! Level-1 per-page frequency statistics and level-2 adjacent-pair counts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PageId;
use crate::session::Session;

/// Occurrence counts for one page within a set of sessions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageCounts {
    /// Total occurrences.
    pub occ: u64,
    /// Occurrences immediately followed by another page.
    pub occ_followed: u64,
    /// Occurrences in session-final position.
    pub occ_terminal: u64,
    /// Sessions where the page occurs in some non-final position.
    pub sess_nonterminal: u64,
    /// Sessions where the page occurs only in final position.
    pub sess_terminal_only: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level1Stats {
    pub pages: BTreeMap<PageId, PageCounts>,
    pub n_sessions: u64,
    pub n_transitions: u64,
}

impl Level1Stats {
    pub fn get(&self, page: PageId) -> PageCounts {
        self.pages.get(&page).copied().unwrap_or_default()
    }

    pub fn page_ids(&self) -> impl Iterator<Item = PageId> + '_ {
        self.pages.keys().copied()
    }
}

/// Adjacent-pair counts; zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairStats {
    counts: BTreeMap<(PageId, PageId), u64>,
}

impl PairStats {
    pub fn count(&self, from: PageId, to: PageId) -> u64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Pairs in `(from, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = (PageId, PageId, u64)> + '_ {
        self.counts.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    pub fn successors(&self, from: PageId) -> impl Iterator<Item = (PageId, u64)> + '_ {
        self.counts
            .range((from, PageId(0))..=(from, PageId(u32::MAX)))
            .map(|(&(_, b), &c)| (b, c))
    }

    /// Keeps only the listed pairs.
    pub fn restrict(&self, keep: &BTreeSet<(PageId, PageId)>) -> PairStats {
        PairStats {
            counts: self
                .counts
                .iter()
                .filter(|(k, _)| keep.contains(k))
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    /// Builds from explicit `(from, to, count)` triples; zero counts dropped.
    pub fn from_triples<I: IntoIterator<Item = (PageId, PageId, u64)>>(triples: I) -> Self {
        let mut counts = BTreeMap::new();
        for (a, b, c) in triples {
            if c > 0 {
                *counts.entry((a, b)).or_insert(0) += c;
            }
        }
        PairStats { counts }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkovError {
    #[error("page {0} is never followed by another page")]
    UndefinedState(PageId),
}

/// Level-1 frequency analysis over the given sessions.
pub fn count_level1<'a, I>(sessions: I) -> Level1Stats
where
    I: IntoIterator<Item = &'a Session>,
{
    let mut stats = Level1Stats::default();
    let mut nonterminal: HashSet<PageId> = HashSet::new();
    for session in sessions {
        let pages = &session.pages;
        let Some((&last, body)) = pages.split_last() else {
            continue;
        };
        stats.n_sessions += 1;
        stats.n_transitions += body.len() as u64;

        nonterminal.clear();
        for &page in body {
            let c = stats.pages.entry(page).or_default();
            c.occ += 1;
            c.occ_followed += 1;
            if nonterminal.insert(page) {
                c.sess_nonterminal += 1;
            }
        }
        let c = stats.pages.entry(last).or_default();
        c.occ += 1;
        c.occ_terminal += 1;
        if !nonterminal.contains(&last) {
            c.sess_terminal_only += 1;
        }
    }
    stats
}

/// Level-2 pair analysis: counts adjacent `(a, b)` where both pages are
/// level-1 survivors. A pruned page between two survivors breaks the chain;
/// no pair is synthesized across it.
pub fn count_level2<'a, I>(sessions: I, survivors: &BTreeSet<PageId>) -> PairStats
where
    I: IntoIterator<Item = &'a Session>,
{
    let mut counts: HashMap<(PageId, PageId), u64> = HashMap::new();
    for session in sessions {
        for w in session.pages.windows(2) {
            if survivors.contains(&w[0]) && survivors.contains(&w[1]) {
                *counts.entry((w[0], w[1])).or_insert(0) += 1;
            }
        }
    }
    PairStats {
        counts: counts.into_iter().collect(),
    }
}

/// First-order transition estimate `count(a, b) / occ_followed(a)`.
pub fn transition_prob(
    pairs: &PairStats,
    level1: &Level1Stats,
    from: PageId,
    to: PageId,
) -> Result<f64, MarkovError> {
    let followed = level1.get(from).occ_followed;
    if followed == 0 {
        return Err(MarkovError::UndefinedState(from));
    }
    Ok(pairs.count(from, to) as f64 / followed as f64)
}
