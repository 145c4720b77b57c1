//! End-to-end composition: ingest → filter → sessionize, then cluster →
//! select → level 1 → prune → level 2 → prune → mine.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{cluster_sessions, select_cluster, single_cluster};
use crate::config::{ConfigError, ModelConfig};
use crate::ingest::{
    filter_records, intern_pages, normalize_records, normalize_url, read_log, IngestError,
    LogFormat, LogRecord, PageCatalog, PageId,
};
use crate::markov::{count_level1, count_level2};
use crate::model::PredictionModel;
use crate::rules::mine_rules;
use crate::session::{build_sessions, Session};
use crate::vague::{prune_pages, prune_pairs};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: IngestError },
    #[error("no data: nothing left after filtering")]
    NoData,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Filtered, interned and sessionized input.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<LogRecord>,
    pub catalog: PageCatalog,
    pub sessions: Vec<Session>,
}

impl Dataset {
    pub fn from_records(mut records: Vec<LogRecord>, timeout_minutes: u64, max_len: usize) -> Self {
        normalize_records(&mut records);
        let records = filter_records(records);
        let (catalog, ids) = intern_pages(&records);
        let timeout = Duration::minutes(timeout_minutes as i64);
        let sessions = build_sessions(&records, &ids, timeout, max_len);
        Dataset {
            records,
            catalog,
            sessions,
        }
    }

    /// Reads and concatenates several log files in order.
    pub fn load(
        paths: &[PathBuf],
        format: LogFormat,
        has_header: bool,
        config: &ModelConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let mut records = Vec::new();
        for path in paths {
            records.extend(read_file(path, format, has_header)?);
        }
        Ok(Self::from_records(
            records,
            config.session_timeout_minutes,
            config.max_session_len,
        ))
    }
}

fn read_file(
    path: &Path,
    format: LogFormat,
    has_header: bool,
) -> Result<Vec<LogRecord>, PipelineError> {
    let wrap = |source: IngestError| PipelineError::Input {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(|e| wrap(e.into()))?;
    read_log(BufReader::new(file), format, has_header).map_err(wrap)
}

/// Sizes before and after each reduction step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub sessions: usize,
    pub clusters: usize,
    pub selected_cluster: usize,
    pub cluster_sessions: usize,
    pub pages_before: usize,
    pub pages_after: usize,
    pub pairs_before: usize,
    pub pairs_after: usize,
    pub rules: usize,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: PredictionModel,
    pub summary: TrainSummary,
}

/// Trains a model on `sessions`, whose page ids index into `catalog`.
pub fn train(
    sessions: &[Session],
    catalog: &PageCatalog,
    config: &ModelConfig,
) -> Result<Trained, PipelineError> {
    config.validate()?;
    if sessions.is_empty() {
        return Err(PipelineError::NoData);
    }

    let clusters = if config.no_cluster {
        vec![single_cluster(sessions)]
    } else {
        cluster_sessions(sessions, config.cluster_threshold)
    };
    let context: BTreeSet<PageId> = config
        .context
        .iter()
        .filter_map(|u| catalog.id(&normalize_url(u)))
        .collect();
    let cluster = select_cluster(&clusters, &context);
    let members = || cluster.members.iter().map(|&i| &sessions[i]);

    let level1 = count_level1(members());
    let survivors = prune_pages(&level1, config.alpha1);
    let pairs = count_level2(members(), &survivors);
    let kept = prune_pairs(&level1, &pairs, config.alpha2);
    let rules = mine_rules(
        &pairs.restrict(&kept),
        &level1,
        config.min_support,
        config.min_confidence,
    );

    let summary = TrainSummary {
        sessions: sessions.len(),
        clusters: clusters.len(),
        selected_cluster: cluster.cluster_id,
        cluster_sessions: cluster.len(),
        pages_before: level1.pages.len(),
        pages_after: survivors.len(),
        pairs_before: pairs.len(),
        pairs_after: kept.len(),
        rules: rules.len(),
    };
    let model = PredictionModel {
        catalog: catalog.clone(),
        level1_survivors: survivors,
        rules,
        config: config.clone(),
        level1,
        pairs,
    };
    Ok(Trained { model, summary })
}
