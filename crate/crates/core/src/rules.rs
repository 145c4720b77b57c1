//! Association rules over surviving page pairs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ingest::PageId;
use crate::markov::{Level1Stats, PairStats};

/// `antecedent ⇒ consequent`, measured on pre-pruning counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: PageId,
    pub consequent: PageId,
    /// Share of all observed transitions.
    pub support: f64,
    /// Share of the antecedent's onward transitions.
    pub confidence: f64,
}

/// Antecedent ascending, then confidence and support descending, then
/// consequent ascending.
pub fn canonical_order(a: &AssociationRule, b: &AssociationRule) -> Ordering {
    a.antecedent
        .cmp(&b.antecedent)
        .then_with(|| b.confidence.total_cmp(&a.confidence))
        .then_with(|| b.support.total_cmp(&a.support))
        .then_with(|| a.consequent.cmp(&b.consequent))
}

/// One rule per pair in `pairs`. Support and confidence use the level-1
/// totals, so pruning never changes a surviving rule's strength.
pub fn mine_rules(
    pairs: &PairStats,
    level1: &Level1Stats,
    min_support: f64,
    min_confidence: f64,
) -> Vec<AssociationRule> {
    let mut rules: Vec<AssociationRule> = pairs
        .iter()
        .filter_map(|(a, b, count)| {
            let followed = level1.get(a).occ_followed;
            if followed == 0 || level1.n_transitions == 0 {
                return None;
            }
            let rule = AssociationRule {
                antecedent: a,
                consequent: b,
                support: count as f64 / level1.n_transitions as f64,
                confidence: count as f64 / followed as f64,
            };
            (rule.support >= min_support && rule.confidence >= min_confidence).then_some(rule)
        })
        .collect();
    rules.sort_by(canonical_order);
    rules
}
