//! Leader clustering of sessions by page-set similarity, and selection of
//! the working cluster for a browsing context.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::PageId;
use crate::session::Session;

pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCluster {
    pub cluster_id: usize,
    /// Indices into the clustered session slice, in scan order.
    pub members: Vec<usize>,
    /// Fraction of member sessions that contain each page.
    pub page_weights: BTreeMap<PageId, f64>,
}

impl SessionCluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn weight(&self, page: PageId) -> f64 {
        self.page_weights.get(&page).copied().unwrap_or(0.0)
    }
}

fn page_set(session: &Session) -> Vec<PageId> {
    let mut pages = session.pages.clone();
    pages.sort_unstable();
    pages.dedup();
    pages
}

/// Jaccard similarity of two sorted, deduplicated page lists.
fn jaccard_sorted(a: &[PageId], b: &[PageId]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - common;
    if union == 0 {
        1.0
    } else {
        common as f64 / union as f64
    }
}

/// Jaccard similarity over the distinct pages of two sessions.
pub fn session_similarity(a: &Session, b: &Session) -> f64 {
    jaccard_sorted(&page_set(a), &page_set(b))
}

/// Single-pass leader clustering. Each session joins the first cluster
/// whose leader is at least `threshold` similar, otherwise it leads a new
/// one.
pub fn cluster_sessions(sessions: &[Session], threshold: f64) -> Vec<SessionCluster> {
    assert!(
        (0.0..=1.0).contains(&threshold),
        "threshold must lie in [0, 1]"
    );

    let sets: Vec<Vec<PageId>> = sessions.iter().map(page_set).collect();
    let mut leaders: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let home = leaders
            .iter()
            .position(|&leader| jaccard_sorted(&sets[leader], set) >= threshold);
        match home {
            Some(c) => members[c].push(i),
            None => {
                leaders.push(i);
                members.push(vec![i]);
            }
        }
    }

    members
        .into_iter()
        .enumerate()
        .map(|(cluster_id, members)| {
            let mut counts: BTreeMap<PageId, usize> = BTreeMap::new();
            for &m in &members {
                for &p in &sets[m] {
                    *counts.entry(p).or_default() += 1;
                }
            }
            let n = members.len() as f64;
            let page_weights = counts.into_iter().map(|(p, c)| (p, c as f64 / n)).collect();
            SessionCluster {
                cluster_id,
                members,
                page_weights,
            }
        })
        .collect()
}

/// Every session in one cluster; used when clustering is disabled.
pub fn single_cluster(sessions: &[Session]) -> SessionCluster {
    cluster_sessions(sessions, 0.0)
        .pop()
        .unwrap_or_else(|| SessionCluster {
            cluster_id: 0,
            members: Vec::new(),
            page_weights: BTreeMap::new(),
        })
}

/// Picks the cluster whose page weights best cover `context`; with an empty
/// context, the largest cluster. Ties go to the lower cluster id.
pub fn select_cluster<'a>(
    clusters: &'a [SessionCluster],
    context: &BTreeSet<PageId>,
) -> &'a SessionCluster {
    assert!(!clusters.is_empty(), "no clusters to select from");
    let mut best = &clusters[0];
    if context.is_empty() {
        for c in &clusters[1..] {
            if c.len() > best.len() {
                best = c;
            }
        }
        return best;
    }
    let score = |c: &SessionCluster| context.iter().map(|&p| c.weight(p)).sum::<f64>();
    let mut best_score = score(best);
    for c in &clusters[1..] {
        let s = score(c);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}
