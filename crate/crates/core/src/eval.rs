//! Train/test splitting, prediction scoring and prefetch-cache simulation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::ingest::{PageCatalog, PageId};
use crate::model::PredictionModel;
use crate::pipeline::{train, PipelineError, TrainSummary};
use crate::rng::SeededRng;
use crate::session::Session;

pub const DEFAULT_TRAIN_SPLIT: f64 = 0.8;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_CACHE_SIZE: usize = 1;
/// Largest tolerated drop in accuracy between consecutive pruning levels.
pub const DEFAULT_ACCURACY_BUDGET: f64 = 0.10;

/// Shuffles with `seed` and puts the first `⌈fraction · n⌉` into train.
/// At least one session always lands in test.
pub fn split_sessions<T: Clone>(
    sessions: &[T],
    train_fraction: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    assert!(
        train_fraction > 0.0 && train_fraction <= 1.0,
        "train fraction must lie in (0, 1]"
    );
    let n = sessions.len();
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let n_train = ((train_fraction * n as f64).ceil() as usize).min(n.saturating_sub(1));
    let pick = |idx: &[usize]| idx.iter().map(|&i| sessions[i].clone()).collect::<Vec<T>>();
    (pick(&order[..n_train]), pick(&order[n_train..]))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionCounts {
    /// Test transitions.
    pub opportunities: u64,
    /// Non-abstaining predictions.
    pub attempted: u64,
    pub hits: u64,
}

impl PredictionCounts {
    pub fn accuracy(&self) -> f64 {
        ratio(self.hits, self.attempted)
    }

    pub fn applicability(&self) -> f64 {
        ratio(self.attempted, self.opportunities)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `predict_next(p_i)` against every actual `p_{i+1}`.
pub fn evaluate(model: &PredictionModel, test: &[Session]) -> PredictionCounts {
    let mut counts = PredictionCounts::default();
    for session in test {
        for w in session.pages.windows(2) {
            counts.opportunities += 1;
            if let Some(guess) = model.predict_next(w[0]) {
                counts.attempted += 1;
                if guess == w[1] {
                    counts.hits += 1;
                }
            }
        }
    }
    counts
}

/// Prefetch-only cache of capacity `k`. Each prefetch round evicts what the
/// previous round loaded; visited pages are never demand-cached.
#[derive(Debug)]
pub struct PrefetchCache {
    capacity: usize,
    entries: Vec<PageId>,
}

impl PrefetchCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "cache size must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn prefetch(&mut self, pages: &[PageId]) {
        self.entries.clear();
        for &p in pages.iter().take(self.capacity) {
            if !self.entries.contains(&p) {
                self.entries.push(p);
            }
        }
    }

    pub fn contains(&self, page: PageId) -> bool {
        self.entries.contains(&page)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheCounts {
    pub hits: u64,
    pub accesses: u64,
}

impl CacheCounts {
    pub fn hit_rate(&self) -> f64 {
        ratio(self.hits, self.accesses)
    }
}

/// Replays each test session: after visiting `p_i` the top-`k` predictions
/// are prefetched, and the visit to `p_{i+1}` hits iff it was prefetched.
pub fn simulate_prefetch_cache(model: &PredictionModel, test: &[Session], k: usize) -> CacheCounts {
    let mut cache = PrefetchCache::new(k);
    let mut counts = CacheCounts::default();
    for session in test {
        cache.clear();
        for w in session.pages.windows(2) {
            cache.prefetch(&model.predict_topk(w[0], k));
            counts.accesses += 1;
            if cache.contains(w[1]) {
                counts.hits += 1;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub opportunities: u64,
    pub attempted: u64,
    pub hits: u64,
    pub accuracy: f64,
    pub applicability: f64,
    pub cache_size: usize,
    pub cache_hits: u64,
    pub cache_accesses: u64,
    pub cache_hit_rate: f64,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub pages_before: usize,
    pub pages_after: usize,
    pub pairs_before: usize,
    pub pairs_after: usize,
    pub rules: usize,
}

impl EvalReport {
    pub fn new(
        summary: &TrainSummary,
        test_sessions: usize,
        predictions: PredictionCounts,
        cache_size: usize,
        cache: CacheCounts,
    ) -> Self {
        EvalReport {
            opportunities: predictions.opportunities,
            attempted: predictions.attempted,
            hits: predictions.hits,
            accuracy: predictions.accuracy(),
            applicability: predictions.applicability(),
            cache_size,
            cache_hits: cache.hits,
            cache_accesses: cache.accesses,
            cache_hit_rate: cache.hit_rate(),
            train_sessions: summary.sessions,
            test_sessions,
            pages_before: summary.pages_before,
            pages_after: summary.pages_after,
            pairs_before: summary.pairs_before,
            pairs_after: summary.pairs_after,
            rules: summary.rules,
        }
    }

    /// Scores `model` on `test` and assembles the full report.
    pub fn run(
        model: &PredictionModel,
        summary: &TrainSummary,
        test: &[Session],
        cache_size: usize,
    ) -> Self {
        let predictions = evaluate(model, test);
        let cache = simulate_prefetch_cache(model, test, cache_size);
        Self::new(summary, test.len(), predictions, cache_size, cache)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "sessions        train {}  test {}",
            self.train_sessions, self.test_sessions
        )?;
        writeln!(
            f,
            "pages           {} -> {}",
            self.pages_before, self.pages_after
        )?;
        writeln!(
            f,
            "pairs           {} -> {}",
            self.pairs_before, self.pairs_after
        )?;
        writeln!(f, "rules           {}", self.rules)?;
        writeln!(f, "opportunities   {}", self.opportunities)?;
        writeln!(f, "attempted       {}", self.attempted)?;
        writeln!(f, "hits            {}", self.hits)?;
        writeln!(f, "accuracy        {:.6}", self.accuracy)?;
        writeln!(f, "applicability   {:.6}", self.applicability)?;
        write!(
            f,
            "cache (k={})     {}/{} = {:.6}",
            self.cache_size, self.cache_hits, self.cache_accesses, self.cache_hit_rate
        )
    }
}

/// One pruning level of a trade-off sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub rules: usize,
    pub attempted: u64,
    pub accuracy: f64,
    pub applicability: f64,
}

impl fmt::Display for TradeoffPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={:.2} rules={} accuracy={:.4} applicability={:.4}",
            self.alpha, self.rules, self.accuracy, self.applicability
        )
    }
}

/// Trains once per `alpha` (used for both pruning levels) on top of `base`
/// and scores each model on `test`.
pub fn pruning_tradeoff(
    train_set: &[Session],
    test: &[Session],
    catalog: &PageCatalog,
    base: &ModelConfig,
    alphas: &[f64],
) -> Result<Vec<TradeoffPoint>, PipelineError> {
    alphas
        .iter()
        .map(|&alpha| {
            let config = ModelConfig {
                alpha1: alpha,
                alpha2: alpha,
                ..base.clone()
            };
            let trained = train(train_set, catalog, &config)?;
            let counts = evaluate(&trained.model, test);
            Ok(TradeoffPoint {
                alpha,
                rules: trained.summary.rules,
                attempted: counts.attempted,
                accuracy: counts.accuracy(),
                applicability: counts.applicability(),
            })
        })
        .collect()
}

/// Rule count must strictly fall from each level to the next while
/// accuracy falls by no more than `budget`.
pub fn check_tradeoff(points: &[TradeoffPoint], budget: f64) -> Result<(), String> {
    for w in points.windows(2) {
        if w[1].rules >= w[0].rules {
            return Err(format!(
                "rule count did not decrease: {} then {}",
                w[0], w[1]
            ));
        }
        if w[1].accuracy < w[0].accuracy - budget {
            return Err(format!(
                "accuracy dropped by more than {budget}: {} then {}",
                w[0], w[1]
            ));
        }
    }
    Ok(())
}
