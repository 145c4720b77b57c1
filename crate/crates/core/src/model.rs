//! The trained prediction model, next-page prediction and the model file.
//!
//! The model file is pretty-printed JSON with a fixed key order and every
//! collection sorted, so the same model always serializes to the same
//! bytes:
//!
//! ```text
//! {
//!   "format": "webprefetch-model",
//!   "version": 1,
//!   "config": { ...training flags... },
//!   "pages": ["/a", "/b", ...],                      // index = page id
//!   "n_sessions": 3,
//!   "n_transitions": 4,
//!   "level1": [{"page": 0, "occ": 3, ...}, ...],     // ascending page
//!   "pairs": [[0, 1, 2], ...],                       // [from, to, count]
//!   "level1_survivors": [0, 1],
//!   "rules": [{"antecedent": 0, "consequent": 1, "support": 0.5, "confidence": 0.6666666666666666}]
//! }
//! ```
//!
//! `pairs` holds the level-2 counts before level-2 pruning; `rules` holds
//! the survivors in canonical order.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ModelConfig;
use crate::ingest::{normalize_url, PageCatalog, PageId};
use crate::markov::{Level1Stats, PageCounts, PairStats};
use crate::rules::{canonical_order, AssociationRule};
use crate::vague::level1_evidence;

pub const MODEL_FORMAT: &str = "webprefetch-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported model version {found} (expected {MODEL_VERSION})")]
    Version { found: String },
    #[error("not a model file: {0}")]
    Format(String),
    #[error("corrupted model: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionModel {
    pub catalog: PageCatalog,
    pub level1_survivors: BTreeSet<PageId>,
    /// Sorted by [`canonical_order`].
    pub rules: Vec<AssociationRule>,
    pub config: ModelConfig,
    pub level1: Level1Stats,
    /// Level-2 counts before level-2 pruning.
    pub pairs: PairStats,
}

impl PredictionModel {
    /// Rules whose antecedent is `page`, strongest first.
    pub fn rules_from(&self, page: PageId) -> &[AssociationRule] {
        let lo = self.rules.partition_point(|r| r.antecedent < page);
        let hi = self.rules.partition_point(|r| r.antecedent <= page);
        &self.rules[lo..hi]
    }

    /// Highest-scoring level-1 survivor, lowest id on ties.
    pub fn most_popular(&self) -> Option<PageId> {
        if self.level1.n_sessions == 0 {
            return None;
        }
        let mut best: Option<(PageId, (u64, u64))> = None;
        for &p in &self.level1_survivors {
            let ratio = level1_evidence(&self.level1, p).score_ratio();
            // every level-1 score shares the denominator 2·n_sessions
            if best.is_none_or(|(_, b)| ratio.0 > b.0) {
                best = Some((p, ratio));
            }
        }
        best.map(|(p, _)| p)
    }

    pub fn predict_next(&self, current: PageId) -> Option<PageId> {
        match self.rules_from(current).first() {
            Some(rule) => Some(rule.consequent),
            None if self.config.fallback_popular => self.most_popular(),
            None => None,
        }
    }

    /// Up to `k` consequents in rule order. Prefix-consistent in `k`.
    pub fn predict_topk(&self, current: PageId, k: usize) -> Vec<PageId> {
        assert!(k >= 1, "k must be positive");
        let rules = self.rules_from(current);
        if rules.is_empty() {
            return self.predict_next(current).into_iter().collect();
        }
        rules.iter().take(k).map(|r| r.consequent).collect()
    }

    /// Predicts from a url; unknown pages abstain unless the popularity
    /// fallback is enabled.
    pub fn predict_url(&self, url: &str) -> Option<&str> {
        let next = match self.catalog.id(&normalize_url(url)) {
            Some(id) => self.predict_next(id),
            None if self.config.fallback_popular => self.most_popular(),
            None => None,
        };
        next.and_then(|p| self.catalog.url(p))
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            config: self.config.clone(),
            pages: self.catalog.urls().to_vec(),
            n_sessions: self.level1.n_sessions,
            n_transitions: self.level1.n_transitions,
            level1: self
                .level1
                .pages
                .iter()
                .map(|(&page, &counts)| PageRow { page, counts })
                .collect(),
            pairs: self.pairs.iter().collect(),
            level1_survivors: self.level1_survivors.iter().copied().collect(),
            rules: self.rules.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let header: Header =
            serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if header.format != MODEL_FORMAT {
            return Err(ModelError::Format(format!(
                "format tag {:?}",
                header.format
            )));
        }
        let version_ok = header.version.as_u64() == Some(u64::from(MODEL_VERSION));
        if !version_ok {
            return Err(ModelError::Version {
                found: header.version.to_string(),
            });
        }
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        doc.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn save_model(model: &PredictionModel, path: &Path) -> Result<(), ModelError> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<PredictionModel, ModelError> {
    PredictionModel::load(path)
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct PageRow {
    page: PageId,
    #[serde(flatten)]
    counts: PageCounts,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format: String,
    version: u32,
    config: ModelConfig,
    pages: Vec<String>,
    n_sessions: u64,
    n_transitions: u64,
    level1: Vec<PageRow>,
    pairs: Vec<(PageId, PageId, u64)>,
    level1_survivors: Vec<PageId>,
    rules: Vec<AssociationRule>,
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::Corrupt(msg.into())
}

fn strictly_increasing<T: Ord>(items: &[T]) -> bool {
    items.windows(2).all(|w| w[0] < w[1])
}

impl ModelDocument {
    fn into_model(self) -> Result<PredictionModel, ModelError> {
        let catalog =
            PageCatalog::from_urls(self.pages).ok_or_else(|| corrupt("duplicate page url"))?;
        let known = |p: PageId| p.index() < catalog.len();

        let pages: Vec<PageId> = self.level1.iter().map(|r| r.page).collect();
        if !strictly_increasing(&pages) || !pages.iter().all(|&p| known(p)) {
            return Err(corrupt("level1 rows out of order or unknown page"));
        }
        let mut level1 = Level1Stats {
            n_sessions: self.n_sessions,
            n_transitions: self.n_transitions,
            ..Level1Stats::default()
        };
        for row in self.level1 {
            let c = row.counts;
            if c.occ != c.occ_followed + c.occ_terminal
                || c.sess_nonterminal + c.sess_terminal_only > self.n_sessions
            {
                return Err(corrupt(format!(
                    "inconsistent counts for page {}",
                    row.page
                )));
            }
            level1.pages.insert(row.page, c);
        }

        let keys: Vec<(PageId, PageId)> = self.pairs.iter().map(|&(a, b, _)| (a, b)).collect();
        if !strictly_increasing(&keys)
            || self
                .pairs
                .iter()
                .any(|&(a, b, c)| c == 0 || !known(a) || !known(b))
        {
            return Err(corrupt("pairs out of order, zero or unknown"));
        }
        let pairs = PairStats::from_triples(self.pairs);

        if !strictly_increasing(&self.level1_survivors)
            || !self.level1_survivors.iter().all(|&p| known(p))
        {
            return Err(corrupt("survivors out of order or unknown"));
        }
        let level1_survivors: BTreeSet<PageId> = self.level1_survivors.into_iter().collect();

        for r in &self.rules {
            if !level1_survivors.contains(&r.antecedent)
                || !level1_survivors.contains(&r.consequent)
            {
                return Err(corrupt("rule endpoint is not a level-1 survivor"));
            }
            if pairs.count(r.antecedent, r.consequent) == 0 {
                return Err(corrupt("rule without pair count"));
            }
        }
        if !self
            .rules
            .windows(2)
            .all(|w| canonical_order(&w[0], &w[1]).is_lt())
        {
            return Err(corrupt("rules not in canonical order"));
        }

        Ok(PredictionModel {
            catalog,
            level1_survivors,
            rules: self.rules,
            config: self.config,
            level1,
            pairs,
        })
    }
}
