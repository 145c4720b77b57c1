//! Synthetic clickstreams drawn from a planted first-order Markov chain.
//!
//! Page `i`'s dominant successor is `(i + 1) mod n`, taken with probability
//! `dominant_prob`; otherwise the next page is uniform over the pages that
//! are neither `i` nor its dominant successor. Start pages follow a Zipf
//! law over page ids (rank = id + 1, exponent 0 is uniform). Session
//! lengths are `2 + G` where `G` is geometric on `{0, 1, …}` with mean
//! `session_len_mean − 2`.
//!
//! Draw order per session: start page, then length, then one draw per
//! transition (a second one when the dominant branch is not taken).

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{LogRecord, PageCatalog, PageId};
use crate::rng::SeededRng;
use crate::session::Session;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntheticError {
    #[error("n_pages must be at least 2, got {0}")]
    TooFewPages(usize),
    #[error("dominant_prob must lie in (1/n_pages, 1], got {0}")]
    DominantProb(f64),
    #[error("session_len_mean must be at least 2, got {0}")]
    SessionLen(f64),
    #[error("zipf_exponent must be finite and non-negative, got {0}")]
    Zipf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_pages: usize,
    pub dominant_prob: f64,
    pub n_sessions: usize,
    pub session_len_mean: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.n_pages < 2 {
            return Err(SyntheticError::TooFewPages(self.n_pages));
        }
        let p = self.dominant_prob;
        if !(p > 1.0 / self.n_pages as f64 && p <= 1.0) {
            return Err(SyntheticError::DominantProb(p));
        }
        if !(self.session_len_mean >= 2.0 && self.session_len_mean.is_finite()) {
            return Err(SyntheticError::SessionLen(self.session_len_mean));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return Err(SyntheticError::Zipf(self.zipf_exponent));
        }
        Ok(())
    }

    pub fn dominant_successor(&self, page: PageId) -> PageId {
        PageId(((page.index() + 1) % self.n_pages) as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLog {
    pub sessions: Vec<Session>,
    pub transitions: u64,
    /// Transitions that followed the planted dominant successor.
    pub dominant_transitions: u64,
}

impl SyntheticLog {
    pub fn dominant_fraction(&self) -> f64 {
        if self.transitions == 0 {
            0.0
        } else {
            self.dominant_transitions as f64 / self.transitions as f64
        }
    }
}

/// Catalog for synthetic page ids: id `i` is `/page{i}.html`.
pub fn synthetic_catalog(n_pages: usize) -> PageCatalog {
    let mut catalog = PageCatalog::new();
    for i in 0..n_pages {
        catalog.intern(&synthetic_url(PageId(i as u32)));
    }
    catalog
}

pub fn synthetic_url(page: PageId) -> String {
    format!("/page{}.html", page.0)
}

fn epoch() -> DateTime<Utc> {
    DateTime::from_timestamp(1_388_534_400, 0).expect("valid epoch") // 2014-01-01T00:00:00Z
}

/// Distinct per-session user address.
fn synthetic_ip(index: usize) -> String {
    format!(
        "10.{}.{}.{}",
        (index >> 16) & 0xff,
        (index >> 8) & 0xff,
        index & 0xff
    )
}

pub fn generate_synthetic_log(spec: &SyntheticSpec) -> Result<SyntheticLog, SyntheticError> {
    spec.validate()?;
    let n = spec.n_pages;
    let mut rng = SeededRng::new(spec.seed);

    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for rank in 1..=n {
        acc += (rank as f64).powf(-spec.zipf_exponent);
        cumulative.push(acc);
    }
    let stop = 1.0 / (spec.session_len_mean - 1.0);

    let mut log = SyntheticLog {
        sessions: Vec::with_capacity(spec.n_sessions),
        transitions: 0,
        dominant_transitions: 0,
    };
    for s in 0..spec.n_sessions {
        let u = rng.unit() * acc;
        let start = cumulative.partition_point(|&c| c <= u).min(n - 1);
        let mut len = 2;
        while rng.unit() >= stop {
            len += 1;
        }

        let mut page = PageId(start as u32);
        let mut pages = Vec::with_capacity(len);
        pages.push(page);
        for _ in 1..len {
            let dominant = spec.dominant_successor(page);
            let next = if n == 2 || rng.unit() < spec.dominant_prob {
                dominant
            } else {
                // uniform over the n - 2 pages other than `page` and `dominant`
                let mut r = rng.below(n as u64 - 2) as usize;
                for skip in sorted_pair(page.index(), dominant.index()) {
                    if r >= skip {
                        r += 1;
                    }
                }
                PageId(r as u32)
            };
            if next == dominant {
                log.dominant_transitions += 1;
            }
            log.transitions += 1;
            pages.push(next);
            page = next;
        }

        let begin = epoch();
        log.sessions.push(Session {
            user_ip: synthetic_ip(s),
            start: begin,
            end: begin + Duration::minutes(len as i64 - 1),
            pages,
        });
    }
    Ok(log)
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

/// One log record per visit, a minute apart, suitable for re-ingestion.
pub fn to_records(sessions: &[Session], catalog: &PageCatalog) -> Vec<LogRecord> {
    let mut records = Vec::new();
    for s in sessions {
        for (i, &p) in s.pages.iter().enumerate() {
            records.push(LogRecord {
                user_ip: s.user_ip.clone(),
                server_ip: None,
                url: catalog
                    .url(p)
                    .map_or_else(|| synthetic_url(p), str::to_string),
                domain: None,
                target_ip: None,
                timestamp: s.start + Duration::minutes(i as i64),
                method: None,
                status: None,
                bytes: None,
            });
        }
    }
    records
}
