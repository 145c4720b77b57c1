//! Log ingestion: Common Log Format and seven-column CSV parsing, URL
//! normalization, record filtering and page interning.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Extensions of static resources that never count as page views.
pub const ASSET_EXTENSIONS: [&str; 10] = [
    "png", "jpg", "jpeg", "gif", "ico", "css", "js", "svg", "woff", "map",
];

const CLF_TIME_FORMAT: &str = "%d/%b/%Y:%H:%M:%S %z";

/// One web access event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub user_ip: String,
    /// Proxy server the user went through, when known.
    pub server_ip: Option<String>,
    pub url: String,
    pub domain: Option<String>,
    /// Address of the web server that served the page.
    pub target_ip: Option<String>,
    pub timestamp: DateTime<Utc>,
    /// HTTP method; only CLF input carries one.
    pub method: Option<String>,
    pub status: Option<u16>,
    pub bytes: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Clf,
    Csv,
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogFormat::Clf => f.write_str("clf"),
            LogFormat::Csv => f.write_str("csv"),
        }
    }
}

/// Why a single line or row could not be turned into a [`LogRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("malformed log line")]
    Malformed,
    #[error("invalid timestamp {0:?}")]
    Timestamp(String),
    #[error("invalid date {0:?}")]
    Date(String),
    #[error("invalid time {0:?}")]
    Time(String),
    #[error("invalid status {0:?}")]
    Status(String),
    #[error("invalid byte count {0:?}")]
    Bytes(String),
    #[error("empty url")]
    EmptyUrl,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: RecordError },
    #[error("line {line}: {source}")]
    Csv { line: usize, source: csv::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Splits a CLF line into whitespace-separated tokens, keeping `[...]` and
/// `"..."` groups whole (without their delimiters).
fn clf_tokens(line: &str) -> Result<Vec<&str>, RecordError> {
    let mut tokens = Vec::new();
    let bytes = line.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b' ' | b'\t' => i += 1,
            b'[' => {
                let end = line[i + 1..].find(']').ok_or(RecordError::Malformed)?;
                tokens.push(&line[i + 1..i + 1 + end]);
                i += end + 2;
            }
            b'"' => {
                let mut j = i + 1;
                while j < bytes.len() && bytes[j] != b'"' {
                    if bytes[j] == b'\\' {
                        j += 1;
                    }
                    j += 1;
                }
                if j >= bytes.len() {
                    return Err(RecordError::Malformed);
                }
                tokens.push(&line[i + 1..j]);
                i = j + 1;
            }
            _ => {
                let end = line[i..].find([' ', '\t']).map_or(line.len(), |e| i + e);
                tokens.push(&line[i..end]);
                i = end;
            }
        }
    }
    Ok(tokens)
}

fn dash_opt(field: &str) -> Option<&str> {
    (field != "-" && !field.is_empty()).then_some(field)
}

/// Parses one NCSA Common Log Format line. Trailing combined-format fields
/// (referer, user agent) are accepted and ignored. The url is returned raw.
pub fn parse_clf_line(line: &str) -> Result<LogRecord, RecordError> {
    let tokens = clf_tokens(line.trim_end_matches(['\r', '\n']))?;
    if tokens.len() < 7 {
        return Err(RecordError::FieldCount {
            expected: 7,
            found: tokens.len(),
        });
    }
    let user_ip = tokens[0].to_string();

    let timestamp = DateTime::parse_from_str(tokens[3], CLF_TIME_FORMAT)
        .map_err(|_| RecordError::Timestamp(tokens[3].to_string()))?
        .with_timezone(&Utc);

    let mut request = tokens[4].split_whitespace();
    let (method, url) = match (request.next(), request.next()) {
        (Some(m), Some(u)) => (m.to_string(), u.to_string()),
        _ => return Err(RecordError::Malformed),
    };

    let status = match dash_opt(tokens[5]) {
        None => None,
        Some(s) => {
            let code: u16 = s.parse().map_err(|_| RecordError::Status(s.to_string()))?;
            if !(100..=599).contains(&code) {
                return Err(RecordError::Status(s.to_string()));
            }
            Some(code)
        }
    };
    let bytes = match dash_opt(tokens[6]) {
        None => None,
        Some(s) => Some(s.parse().map_err(|_| RecordError::Bytes(s.to_string()))?),
    };

    Ok(LogRecord {
        user_ip,
        server_ip: None,
        url,
        domain: None,
        target_ip: None,
        timestamp,
        method: Some(method),
        status,
        bytes,
    })
}

/// Parses one CSV row with the columns
/// `user_ip, server_ip, url, domain, target_ip, date, time`.
pub fn parse_csv_record<S: AsRef<str>>(row: &[S]) -> Result<LogRecord, RecordError> {
    if row.len() != 7 {
        return Err(RecordError::FieldCount {
            expected: 7,
            found: row.len(),
        });
    }
    let field = |i: usize| row[i].as_ref().trim();
    let opt = |i: usize| dash_opt(field(i)).map(str::to_string);

    let date = NaiveDate::parse_from_str(field(5), "%Y-%m-%d")
        .map_err(|_| RecordError::Date(field(5).to_string()))?;
    let time = NaiveTime::parse_from_str(field(6), "%H:%M:%S")
        .map_err(|_| RecordError::Time(field(6).to_string()))?;
    if field(2).is_empty() {
        return Err(RecordError::EmptyUrl);
    }

    Ok(LogRecord {
        user_ip: field(0).to_string(),
        server_ip: opt(1),
        url: field(2).to_string(),
        domain: opt(3),
        target_ip: opt(4),
        timestamp: NaiveDateTime::new(date, time).and_utc(),
        method: None,
        status: None,
        bytes: None,
    })
}

/// The seven CSV columns for a record, absent values written as `-`.
pub fn csv_fields(record: &LogRecord) -> [String; 7] {
    let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".to_string());
    [
        record.user_ip.clone(),
        opt(&record.server_ip),
        record.url.clone(),
        opt(&record.domain),
        opt(&record.target_ip),
        record.timestamp.format("%Y-%m-%d").to_string(),
        record.timestamp.format("%H:%M:%S").to_string(),
    ]
}

/// Writes records in the seven-column CSV schema, without a header.
pub fn write_csv<W: Write>(out: W, records: &[LogRecord]) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for record in records {
        writer
            .write_record(csv_fields(record))
            .map_err(|source| IngestError::Csv { line: 0, source })?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads every record from a log. Blank lines are skipped; the first
/// malformed line aborts with its 1-based line number.
pub fn read_log<R: BufRead>(
    reader: R,
    format: LogFormat,
    has_header: bool,
) -> Result<Vec<LogRecord>, IngestError> {
    match format {
        LogFormat::Clf => {
            let mut records = Vec::new();
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record = parse_clf_line(&line).map_err(|source| IngestError::Parse {
                    line: idx + 1,
                    source,
                })?;
                records.push(record);
            }
            Ok(records)
        }
        LogFormat::Csv => {
            let mut csv_reader = csv::ReaderBuilder::new()
                .has_headers(has_header)
                .flexible(true)
                .from_reader(reader);
            let mut records = Vec::new();
            for row in csv_reader.records() {
                let row = row.map_err(|source| IngestError::Csv {
                    line: source.position().map_or(0, |p| p.line() as usize),
                    source,
                })?;
                let line = row.position().map_or(0, |p| p.line() as usize);
                if row.iter().all(|f| f.trim().is_empty()) {
                    continue;
                }
                let fields: Vec<&str> = row.iter().collect();
                let record = parse_csv_record(&fields)
                    .map_err(|source| IngestError::Parse { line, source })?;
                records.push(record);
            }
            Ok(records)
        }
    }
}

/// Canonical page path: scheme and host dropped, query and fragment
/// stripped, lowercased, empty and dot segments resolved. Always begins
/// with `/`.
pub fn normalize_url(raw: &str) -> String {
    let mut path = raw.trim();
    if let Some(rest) = path
        .strip_prefix("http://")
        .or_else(|| path.strip_prefix("https://"))
    {
        path = rest.find('/').map_or("/", |i| &rest[i..]);
    }
    let path = path.split(['?', '#']).next().unwrap_or("").to_lowercase();

    let mut segments: Vec<&str> = Vec::new();
    let mut trailing_slash = false;
    for segment in path.split('/') {
        trailing_slash = false;
        match segment {
            "" => trailing_slash = true,
            "." => trailing_slash = true,
            ".." => {
                segments.pop();
                trailing_slash = true;
            }
            s => segments.push(s),
        }
    }

    let mut out = String::with_capacity(path.len() + 1);
    for segment in &segments {
        out.push('/');
        out.push_str(segment);
    }
    if segments.is_empty() || trailing_slash {
        out.push('/');
    }
    out
}

/// Normalizes every record's url in place.
pub fn normalize_records(records: &mut [LogRecord]) {
    for record in records {
        record.url = normalize_url(&record.url);
    }
}

fn is_asset(url: &str) -> bool {
    let last = url.rsplit('/').next().unwrap_or("");
    match last.rsplit_once('.') {
        Some((_, ext)) => ASSET_EXTENSIONS.iter().any(|a| a.eq_ignore_ascii_case(ext)),
        None => false,
    }
}

/// Whether a record is a successful page view.
pub fn is_page_view(record: &LogRecord) -> bool {
    if is_asset(&record.url) {
        return false;
    }
    if let Some(status) = record.status {
        if !(200..400).contains(&status) {
            return false;
        }
    }
    match &record.method {
        Some(method) => method.eq_ignore_ascii_case("GET"),
        None => true,
    }
}

/// Keeps page views only, preserving order.
pub fn filter_records(records: Vec<LogRecord>) -> Vec<LogRecord> {
    records.into_iter().filter(is_page_view).collect()
}

/// Compact page identity; an index into a [`PageCatalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PageId(pub u32);

impl PageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional url ↔ [`PageId`] mapping in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageCatalog {
    urls: Vec<String>,
    ids: HashMap<String, PageId>,
}

impl PageCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a catalog from urls in id order. Returns `None` on duplicates.
    pub fn from_urls<I: IntoIterator<Item = String>>(urls: I) -> Option<Self> {
        let mut catalog = Self::new();
        for url in urls {
            if catalog.ids.contains_key(&url) {
                return None;
            }
            catalog.intern(&url);
        }
        Some(catalog)
    }

    pub fn intern(&mut self, url: &str) -> PageId {
        if let Some(&id) = self.ids.get(url) {
            return id;
        }
        let id = PageId(u32::try_from(self.urls.len()).expect("page catalog overflow"));
        self.urls.push(url.to_string());
        self.ids.insert(url.to_string(), id);
        id
    }

    pub fn id(&self, url: &str) -> Option<PageId> {
        self.ids.get(url).copied()
    }

    pub fn url(&self, id: PageId) -> Option<&str> {
        self.urls.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }

    pub fn urls(&self) -> &[String] {
        &self.urls
    }

    pub fn iter(&self) -> impl Iterator<Item = (PageId, &str)> {
        self.urls
            .iter()
            .enumerate()
            .map(|(i, u)| (PageId(i as u32), u.as_str()))
    }
}

/// Assigns page ids in first-seen order.
pub fn intern_pages(records: &[LogRecord]) -> (PageCatalog, Vec<PageId>) {
    let mut catalog = PageCatalog::new();
    let ids = records.iter().map(|r| catalog.intern(&r.url)).collect();
    (catalog, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn record(url: &str, status: Option<u16>, method: Option<&str>) -> LogRecord {
        LogRecord {
            user_ip: "1.2.3.4".into(),
            server_ip: None,
            url: url.into(),
            domain: None,
            target_ip: None,
            timestamp: Utc.with_ymd_and_hms(2014, 1, 5, 10, 0, 0).unwrap(),
            method: method.map(str::to_string),
            status,
            bytes: None,
        }
    }

    #[test]
    fn clf_line() {
        let r = parse_clf_line(
            r#"127.0.0.1 - - [10/Oct/2000:13:55:36 -0700] "GET /a.html HTTP/1.0" 200 2326"#,
        )
        .unwrap();
        assert_eq!(r.user_ip, "127.0.0.1");
        assert_eq!(r.url, "/a.html");
        assert_eq!(r.status, Some(200));
        assert_eq!(r.bytes, Some(2326));
        assert_eq!(r.method.as_deref(), Some("GET"));
        assert_eq!(
            r.timestamp,
            Utc.with_ymd_and_hms(2000, 10, 10, 20, 55, 36).unwrap()
        );
    }

    #[test]
    fn clf_dash_bytes_absent() {
        let r =
            parse_clf_line(r#"127.0.0.1 - - [10/Oct/2000:13:55:36 -0700] "GET / HTTP/1.0" 200 -"#)
                .unwrap();
        assert_eq!(r.bytes, None);
        assert_eq!(r.url, "/");
    }

    #[test]
    fn clf_combined_format_extras() {
        let r = parse_clf_line(
            r#"10.1.1.1 - bob [10/Oct/2000:13:55:36 +0000] "GET /x HTTP/1.1" 304 0 "http://ref/" "Mozilla/5.0 (X11)""#,
        )
        .unwrap();
        assert_eq!(r.status, Some(304));
        assert_eq!(r.url, "/x");
    }

    #[test]
    fn clf_garbage() {
        assert!(parse_clf_line("garbage text").is_err());
        assert!(matches!(
            parse_clf_line(r#"1.1.1.1 - - [yesterday] "GET / HTTP/1.0" 200 1"#),
            Err(RecordError::Timestamp(_))
        ));
        assert!(parse_clf_line(
            r#"1.1.1.1 - - [10/Oct/2000:13:55:36 -0700] "GET / HTTP/1.0" 999 1"#
        )
        .is_err());
        assert!(parse_clf_line(
            r#"1.1.1.1 - - [10/Oct/2000:13:55:36 -0700] "GET / HTTP/1.0 200 1"#
        )
        .is_err());
    }

    #[test]
    fn csv_row() {
        let row = "10.0.0.5,10.0.0.1,/idx.html,example.com,93.1.2.3,2014-01-05,10:00:00";
        let fields: Vec<&str> = row.split(',').collect();
        let r = parse_csv_record(&fields).unwrap();
        assert_eq!(
            r.timestamp,
            Utc.with_ymd_and_hms(2014, 1, 5, 10, 0, 0).unwrap()
        );
        assert_eq!(r.server_ip.as_deref(), Some("10.0.0.1"));
        assert_eq!(r.domain.as_deref(), Some("example.com"));
        assert_eq!(r.target_ip.as_deref(), Some("93.1.2.3"));
        assert_eq!(r.status, None);
        assert_eq!(r.bytes, None);
    }

    #[test]
    fn csv_errors() {
        let short = [
            "10.0.0.5",
            "10.0.0.1",
            "/idx.html",
            "example.com",
            "93.1.2.3",
            "2014-01-05",
        ];
        assert_eq!(
            parse_csv_record(&short),
            Err(RecordError::FieldCount {
                expected: 7,
                found: 6
            })
        );
        let bad_date = [
            "10.0.0.5",
            "10.0.0.1",
            "/idx.html",
            "example.com",
            "93.1.2.3",
            "2014-13-40",
            "10:00:00",
        ];
        assert!(matches!(
            parse_csv_record(&bad_date),
            Err(RecordError::Date(_))
        ));
    }

    #[test]
    fn read_log_reports_line_number() {
        let text = "1.1.1.1 - - [10/Oct/2000:13:55:36 -0700] \"GET / HTTP/1.0\" 200 1\n\ngarbage\n";
        match read_log(text.as_bytes(), LogFormat::Clf, false) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "user,server,url,domain,target,date,time\n1.1.1.1,-,/a,-,-,2014-01-05,10:00:00\n1.1.1.1,-,/b,-,-,2014-01-05,99:00:00\n";
        match read_log(csv.as_bytes(), LogFormat::Csv, true) {
            Err(IngestError::Parse { line, source }) => {
                assert_eq!(line, 3);
                assert!(matches!(source, RecordError::Time(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_url("/Index.HTML?q=1#top"), "/index.html");
        assert_eq!(normalize_url("/a/../b.html"), "/b.html");
        assert_eq!(normalize_url("/"), "/");
        assert_eq!(normalize_url("/docs/index.html"), "/docs/index.html");
        assert_eq!(normalize_url("/../.."), "/");
        assert_eq!(normalize_url("a//b/./c/"), "/a/b/c/");
        assert_eq!(normalize_url("http://Example.com/A?x"), "/a");
        assert_eq!(normalize_url("https://example.com"), "/");
        assert_eq!(normalize_url("?only=query"), "/");
    }

    #[test]
    fn filter_examples() {
        let kept = filter_records(vec![
            record("/img/logo.png", Some(200), Some("GET")),
            record("/page.html", Some(404), Some("GET")),
            record("/page.html", Some(200), Some("GET")),
            record("/form", Some(200), Some("POST")),
            record("/moved", Some(301), Some("GET")),
            record("/style.CSS", None, None),
            record("/csv-row", None, None),
        ]);
        let urls: Vec<&str> = kept.iter().map(|r| r.url.as_str()).collect();
        assert_eq!(urls, ["/page.html", "/moved", "/csv-row"]);
    }

    #[test]
    fn intern_first_seen() {
        let recs: Vec<LogRecord> = ["/a", "/b", "/a"]
            .iter()
            .map(|u| record(u, None, None))
            .collect();
        let (catalog, ids) = intern_pages(&recs);
        assert_eq!(catalog.urls(), ["/a", "/b"]);
        assert_eq!(ids, [PageId(0), PageId(1), PageId(0)]);

        let (empty, ids) = intern_pages(&[]);
        assert!(empty.is_empty() && ids.is_empty());

        let (single, _) = intern_pages(&[record("/x", None, None)]);
        assert_eq!(single.id("/x"), Some(PageId(0)));
        assert_eq!(single.url(PageId(0)), Some("/x"));
        assert_eq!(single.url(PageId(1)), None);
    }

    fn arb_ip() -> impl Strategy<Value = String> {
        (any::<u8>(), any::<u8>(), any::<u8>(), any::<u8>())
            .prop_map(|(a, b, c, d)| format!("{a}.{b}.{c}.{d}"))
    }

    fn arb_csv_record() -> impl Strategy<Value = LogRecord> {
        (
            arb_ip(),
            proptest::option::of(arb_ip()),
            "(/[a-z0-9_.]{1,8}){1,4}",
            proptest::option::of("[a-z]{1,10}\\.(com|org)"),
            proptest::option::of(arb_ip()),
            0i64..2_000_000_000,
        )
            .prop_map(
                |(user_ip, server_ip, url, domain, target_ip, secs)| LogRecord {
                    user_ip,
                    server_ip,
                    url,
                    domain,
                    target_ip,
                    timestamp: DateTime::from_timestamp(secs, 0).unwrap(),
                    method: None,
                    status: None,
                    bytes: None,
                },
            )
    }

    fn arb_url() -> impl Strategy<Value = String> {
        "[/a-zA-Z.?#=]{0,24}"
    }

    proptest! {
        #[test]
        fn csv_round_trip(records in proptest::collection::vec(arb_csv_record(), 0..20)) {
            let mut buf = Vec::new();
            write_csv(&mut buf, &records).unwrap();
            let back = read_log(buf.as_slice(), LogFormat::Csv, false).unwrap();
            prop_assert_eq!(back, records);
        }

        #[test]
        fn normalize_idempotent(raw in arb_url()) {
            let once = normalize_url(&raw);
            prop_assert!(once.starts_with('/'));
            prop_assert_eq!(normalize_url(&once), once);
        }

        #[test]
        fn filter_idempotent(specs in proptest::collection::vec(
            (arb_url(), proptest::option::of(100u16..600), proptest::option::of(prop_oneof![Just("GET"), Just("POST"), Just("get")])),
            0..30,
        )) {
            let records: Vec<LogRecord> = specs
                .iter()
                .map(|(u, s, m)| record(&normalize_url(u), *s, *m))
                .collect();
            let once = filter_records(records);
            prop_assert_eq!(filter_records(once.clone()), once);
        }

        #[test]
        fn intern_is_bijection_under_permutation(urls in proptest::collection::vec("/[a-d]{1,2}", 1..20), rot in 0usize..20) {
            let records: Vec<LogRecord> = urls.iter().map(|u| record(u, None, None)).collect();
            let mut permuted = records.clone();
            let k = rot % permuted.len();
            permuted.rotate_left(k);
            permuted.reverse();
            for recs in [&records, &permuted] {
                let (catalog, ids) = intern_pages(recs);
                for (r, id) in recs.iter().zip(&ids) {
                    prop_assert_eq!(catalog.url(*id), Some(r.url.as_str()));
                    prop_assert_eq!(catalog.id(&r.url), Some(*id));
                }
                let mut a: Vec<&String> = catalog.urls().iter().collect();
                let mut b: Vec<&String> = urls.iter().collect();
                a.sort();
                b.sort();
                b.dedup();
                prop_assert_eq!(a, b);
            }
        }
    }
}
