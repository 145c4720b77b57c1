//! Vague-set memberships derived from frequency counts, and threshold
//! pruning on the vague score.
//!
//! A vague value carries a true membership `t`, a false membership `f` and
//! the hesitation `h = 1 - t - f` left between them. Here every value comes
//! from partitioning a finite population into three classes:
//!
//! * level 1 (pages): the cluster's sessions split into those where the
//!   page occurs somewhere before the end (`t`), those where it only closes
//!   the session (`h`) and those where it is absent (`f`);
//! * level 2 (pairs `a → b`): the occurrences of `a` split into those
//!   followed by `b` (`t`), by some other page (`f`) and session-final
//!   ones (`h`).
//!
//! The score is the midpoint of the vague interval `[t, 1 - f]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PageId;
use crate::markov::{Level1Stats, PairStats};

pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("invalid vague value t={t}, f={f}")]
pub struct InvalidVague {
    pub t: f64,
    pub f: f64,
}

/// A `(t, f)` membership pair with `t, f ≥ 0` and `t + f ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VagueValue {
    t: f64,
    f: f64,
}

impl VagueValue {
    pub fn new(t: f64, f: f64) -> Result<Self, InvalidVague> {
        let ok = (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&f) && t + f <= 1.0 + 1e-12;
        if ok {
            Ok(Self { t, f })
        } else {
            Err(InvalidVague { t, f })
        }
    }

    pub fn truth(&self) -> f64 {
        self.t
    }

    pub fn falsity(&self) -> f64 {
        self.f
    }

    pub fn hesitation(&self) -> f64 {
        (1.0 - self.t - self.f).max(0.0)
    }

    /// The vague interval `[t, 1 - f]`.
    pub fn interval(&self) -> (f64, f64) {
        (self.t, 1.0 - self.f)
    }
}

/// Exact three-way split of `total` items into true/false/hesitant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VagueEvidence {
    pub truth: u64,
    pub falsity: u64,
    pub hesitation: u64,
}

impl VagueEvidence {
    pub fn total(&self) -> u64 {
        self.truth + self.falsity + self.hesitation
    }

    pub fn value(&self) -> VagueValue {
        let n = self.total() as f64;
        VagueValue {
            t: self.truth as f64 / n,
            f: self.falsity as f64 / n,
        }
    }

    /// `h` computed directly from its own count.
    pub fn hesitation_ratio(&self) -> f64 {
        self.hesitation as f64 / self.total() as f64
    }

    /// Score numerator and denominator: `(t + 1 - f) / 2` over integers.
    pub fn score_ratio(&self) -> (u64, u64) {
        let n = self.total();
        (self.truth + n - self.falsity, 2 * n)
    }
}

/// Anything that can be ranked by a vague score in `[0, 1]`.
pub trait Scored {
    fn score(&self) -> f64;
}

impl Scored for VagueValue {
    fn score(&self) -> f64 {
        vague_score(self)
    }
}

impl Scored for VagueEvidence {
    /// Single rounding of the exact rational score.
    fn score(&self) -> f64 {
        let (num, den) = self.score_ratio();
        num as f64 / den as f64
    }
}

/// Interval midpoint `(t + 1 - f) / 2`.
pub fn vague_score(v: &VagueValue) -> f64 {
    (v.t + 1.0 - v.f) / 2.0
}

/// Level-1 evidence for a page over the cluster's sessions.
pub fn level1_evidence(level1: &Level1Stats, page: PageId) -> VagueEvidence {
    assert!(level1.n_sessions > 0, "level-1 stats over zero sessions");
    let c = level1.get(page);
    VagueEvidence {
        truth: c.sess_nonterminal,
        falsity: level1.n_sessions - c.sess_nonterminal - c.sess_terminal_only,
        hesitation: c.sess_terminal_only,
    }
}

/// Level-2 evidence for the pair `from → to` over the occurrences of `from`.
pub fn level2_evidence(
    level1: &Level1Stats,
    pairs: &PairStats,
    from: PageId,
    to: PageId,
) -> VagueEvidence {
    let c = level1.get(from);
    assert!(c.occ > 0, "page {from} never occurs");
    let n = pairs.count(from, to);
    VagueEvidence {
        truth: n,
        falsity: c.occ_followed - n,
        hesitation: c.occ_terminal,
    }
}

pub fn vague_level1(level1: &Level1Stats, page: PageId) -> VagueValue {
    level1_evidence(level1, page).value()
}

pub fn vague_level2(
    level1: &Level1Stats,
    pairs: &PairStats,
    from: PageId,
    to: PageId,
) -> VagueValue {
    level2_evidence(level1, pairs, from, to).value()
}

/// Keys whose score is at least `alpha`; anything strictly below is pruned.
pub fn prune<K, V, I>(items: I, alpha: f64) -> BTreeSet<K>
where
    K: Ord,
    V: Scored,
    I: IntoIterator<Item = (K, V)>,
{
    assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
    items
        .into_iter()
        .filter(|(_, v)| v.score() >= alpha)
        .map(|(k, _)| k)
        .collect()
}

/// Level-1 pruning over every page seen in the statistics.
pub fn prune_pages(level1: &Level1Stats, alpha: f64) -> BTreeSet<PageId> {
    prune(
        level1.page_ids().map(|p| (p, level1_evidence(level1, p))),
        alpha,
    )
}

/// Level-2 pruning over every counted pair.
pub fn prune_pairs(
    level1: &Level1Stats,
    pairs: &PairStats,
    alpha: f64,
) -> BTreeSet<(PageId, PageId)> {
    prune(
        pairs
            .iter()
            .map(|(a, b, _)| ((a, b), level2_evidence(level1, pairs, a, b))),
        alpha,
    )
}
