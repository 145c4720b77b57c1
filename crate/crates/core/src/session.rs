//! Inactivity-timeout sessionization.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::{LogRecord, PageId};

pub const DEFAULT_TIMEOUT_MINUTES: u64 = 30;
pub const DEFAULT_MAX_SESSION_LEN: usize = 100;

/// One user's consecutive page visits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub user_ip: String,
    pub pages: Vec<PageId>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

/// Groups records by user, orders each user's visits by time (stable on
/// ties) and cuts a new session whenever the gap to the previous record
/// exceeds `timeout` or the session already holds `max_len` visits.
/// Immediate reloads of the same page are collapsed into one visit.
///
/// Sessions come out ordered by `(user_ip, start)`.
pub fn build_sessions(
    records: &[LogRecord],
    ids: &[PageId],
    timeout: Duration,
    max_len: usize,
) -> Vec<Session> {
    assert_eq!(records.len(), ids.len(), "records and ids must be parallel");
    assert!(timeout > Duration::zero(), "timeout must be positive");
    assert!(max_len >= 1, "max_len must be positive");

    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, record) in records.iter().enumerate() {
        by_user.entry(record.user_ip.as_str()).or_default().push(i);
    }

    let mut sessions = Vec::new();
    for (user, mut visits) in by_user {
        visits.sort_by_key(|&i| records[i].timestamp);

        let mut current: Option<Session> = None;
        for i in visits {
            let at = records[i].timestamp;
            let page = ids[i];
            if let Some(session) = current.as_mut() {
                let reload = session.pages.last() == Some(&page);
                if at - session.end <= timeout && (reload || session.pages.len() < max_len) {
                    if !reload {
                        session.pages.push(page);
                    }
                    session.end = at;
                    continue;
                }
                sessions.push(current.take().unwrap());
            }
            current = Some(Session {
                user_ip: user.to_string(),
                pages: vec![page],
                start: at,
                end: at,
            });
        }
        sessions.extend(current);
    }
    sessions
}
