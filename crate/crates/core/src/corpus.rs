//! Documents, queries and the table linearization rule, plus the JSONL
//! loaders for passages, tables and queries.
//!
//! Both modalities share one id space. Loaders prefix raw ids with `text:` or
//! `table:` (unless already present) so a passage and a table can never
//! collide once merged into one corpus.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const TEXT_PREFIX: &str = "text:";
pub const TABLE_PREFIX: &str = "table:";

/// Separator between linearized segments.
pub const SEGMENT_SEP: &str = " | ";
/// Separator between cells of one row.
pub const CELL_SEP: &str = " , ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Table,
}

impl Modality {
    pub fn prefix(self) -> &'static str {
        match self {
            Modality::Text => TEXT_PREFIX,
            Modality::Table => TABLE_PREFIX,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Table => "table",
        }
    }

    /// Modality implied by a namespaced id, if it carries a known prefix.
    pub fn of_id(id: &str) -> Option<Modality> {
        if id.starts_with(TEXT_PREFIX) {
            Some(Modality::Text)
        } else if id.starts_with(TABLE_PREFIX) {
            Some(Modality::Table)
        } else {
            None
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Adds the modality prefix to `raw` unless it already carries it.
pub fn namespaced_id(raw: &str, modality: Modality) -> String {
    if raw.starts_with(modality.prefix()) {
        raw.to_owned()
    } else {
        format!("{}{raw}", modality.prefix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "text")]
    pub body: String,
}

impl Passage {
    pub fn linearize(&self) -> String {
        join_segments([self.title.as_str(), self.body.as_str()].map(clean_field))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub id: String,
    #[serde(default)]
    pub page_title: String,
    #[serde(default)]
    pub section_title: String,
    #[serde(default)]
    pub caption: String,
    pub header: Vec<String>,
    #[serde(default)]
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Pads short rows with empty cells and truncates long rows to the header
    /// arity. Returns the number of rows that lost cells.
    pub fn normalize_rows(&mut self) -> usize {
        let arity = self.header.len();
        let mut truncated = 0;
        for row in &mut self.rows {
            if row.len() > arity {
                row.truncate(arity);
                truncated += 1;
            } else if row.len() < arity {
                row.resize(arity, String::new());
            }
        }
        truncated
    }

    pub fn linearize(&self) -> String {
        let mut segments = vec![
            clean_field(&self.page_title),
            clean_field(&self.section_title),
            clean_field(&self.caption),
            row_segment(&self.header),
        ];
        segments.extend(self.rows.iter().map(|r| row_segment(r)));
        join_segments(segments)
    }
}

fn clean_field(s: &str) -> String {
    s.trim().replace('|', "/")
}

fn row_segment(cells: &[String]) -> String {
    let cleaned: Vec<String> = cells.iter().map(|c| clean_field(c)).collect();
    if cleaned.iter().all(String::is_empty) {
        return String::new();
    }
    cleaned.join(CELL_SEP)
}

fn join_segments<I: IntoIterator<Item = String>>(segments: I) -> String {
    let kept: Vec<String> = segments.into_iter().filter(|s| !s.is_empty()).collect();
    kept.join(SEGMENT_SEP)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DocumentKind {
    Passage(Passage),
    Table(Table),
}

impl DocumentKind {
    pub fn id(&self) -> &str {
        match self {
            DocumentKind::Passage(p) => &p.id,
            DocumentKind::Table(t) => &t.id,
        }
    }

    pub fn modality(&self) -> Modality {
        match self {
            DocumentKind::Passage(_) => Modality::Text,
            DocumentKind::Table(_) => Modality::Table,
        }
    }
}

/// Flattens a passage or table into the text that is indexed and embedded.
pub fn linearize(kind: &DocumentKind) -> String {
    match kind {
        DocumentKind::Passage(p) => p.linearize(),
        DocumentKind::Table(t) => t.linearize(),
    }
}

/// A passage or table together with its cached linearized text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    kind: DocumentKind,
    linearized: String,
}

impl Document {
    pub fn new(kind: DocumentKind) -> Self {
        let linearized = linearize(&kind);
        Document { kind, linearized }
    }

    pub fn id(&self) -> &str {
        self.kind.id()
    }

    pub fn modality(&self) -> Modality {
        self.kind.modality()
    }

    pub fn kind(&self) -> &DocumentKind {
        &self.kind
    }

    pub fn text(&self) -> &str {
        &self.linearized
    }
}

impl From<Passage> for Document {
    fn from(p: Passage) -> Self {
        Document::new(DocumentKind::Passage(p))
    }
}

impl From<Table> for Document {
    fn from(t: Table) -> Self {
        Document::new(DocumentKind::Table(t))
    }
}

/// Flat view of a linearized document, as written by `ttr linearize`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearizedRecord {
    pub id: String,
    pub modality: Modality,
    pub text: String,
}

impl From<&Document> for LinearizedRecord {
    fn from(d: &Document) -> Self {
        LinearizedRecord {
            id: d.id().to_owned(),
            modality: d.modality(),
            text: d.text().to_owned(),
        }
    }
}

/// An ordered collection of documents with globally unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if by_id.insert(d.id().to_owned(), i).is_some() {
                return Err(Error::DuplicateId(d.id().to_owned()));
            }
        }
        Ok(Corpus { docs, by_id })
    }

    /// Passages first, then tables, each in input order.
    pub fn from_parts(passages: Vec<Passage>, tables: Vec<Table>) -> Result<Self> {
        let docs = passages
            .into_iter()
            .map(Document::from)
            .chain(tables.into_iter().map(Document::from))
            .collect();
        Corpus::new(docs)
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dataset {
    NQ,
    NQTables,
    WikiSQL,
    WikiSQLCtx,
    OTTQA,
    MultiModal,
}

impl Dataset {
    pub const ALL: [Dataset; 6] = [
        Dataset::NQ,
        Dataset::NQTables,
        Dataset::WikiSQL,
        Dataset::WikiSQLCtx,
        Dataset::OTTQA,
        Dataset::MultiModal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::NQ => "NQ",
            Dataset::NQTables => "NQTables",
            Dataset::WikiSQL => "WikiSQL",
            Dataset::WikiSQLCtx => "WikiSQLCtx",
            Dataset::OTTQA => "OTTQA",
            Dataset::MultiModal => "MultiModal",
        }
    }

    /// Modality of the gold documents, when the dataset has only one.
    pub fn gold_modality(self) -> Option<Modality> {
        match self {
            Dataset::NQ => Some(Modality::Text),
            Dataset::MultiModal => None,
            _ => Some(Modality::Table),
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let ds = match key.as_str() {
            "nq" | "naturalquestions" => Dataset::NQ,
            "nqtables" => Dataset::NQTables,
            "wikisql" => Dataset::WikiSQL,
            "wikisqlctx" | "wikisqlctxindependent" => Dataset::WikiSQLCtx,
            "ottqa" => Dataset::OTTQA,
            "multimodal" | "multimodalretrieval" => Dataset::MultiModal,
            _ => return Err(format!("unknown dataset `{s}`")),
        };
        Ok(ds)
    }
}

impl Serialize for Dataset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Dataset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    AnswerString,
    GoldId,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::AnswerString => "answer_string",
            Protocol::GoldId => "gold_id",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub question: String,
    pub dataset: Dataset,
    #[serde(default)]
    pub gold_ids: BTreeSet<String>,
    #[serde(default)]
    pub answers: Vec<String>,
    pub protocol: Protocol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_negative_ids: Option<Vec<String>>,
}

impl QueryRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty query id".into());
        }
        match self.protocol {
            Protocol::AnswerString if self.answers.is_empty() => Err(format!(
                "query `{}`: answer_string protocol needs answers",
                self.id
            )),
            Protocol::GoldId if self.gold_ids.is_empty() => Err(format!(
                "query `{}`: gold_id protocol needs gold_ids",
                self.id
            )),
            _ => Ok(()),
        }
    }

    /// Prefixes unprefixed gold ids according to the dataset's modality.
    fn namespace_gold_ids(&mut self) -> std::result::Result<(), String> {
        let mut out = BTreeSet::new();
        for id in std::mem::take(&mut self.gold_ids) {
            if Modality::of_id(&id).is_some() {
                out.insert(id);
                continue;
            }
            match self.dataset.gold_modality() {
                Some(m) => {
                    out.insert(namespaced_id(&id, m));
                }
                None => {
                    return Err(format!(
                        "query `{}`: gold id `{id}` needs a text:/table: prefix for dataset {}",
                        self.id, self.dataset
                    ))
                }
            }
        }
        self.gold_ids = out;
        Ok(())
    }
}

fn check_unique<'a>(seen: &mut BTreeSet<&'a str>, id: &'a str) -> Result<()> {
    if !seen.insert(id) {
        return Err(Error::DuplicateId(id.to_owned()));
    }
    Ok(())
}

pub fn read_passages<R: BufRead>(reader: R) -> Result<Vec<Passage>> {
    let mut out = Vec::new();
    for (line, mut p) in io::read_jsonl::<Passage, _>(reader)? {
        if p.id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty passage id".into(),
            });
        }
        p.id = namespaced_id(&p.id, Modality::Text);
        if p.body.trim().is_empty() {
            return Err(Error::InvalidRecord {
                id: p.id,
                reason: "empty passage text".into(),
            });
        }
        out.push(p);
    }
    let mut seen = BTreeSet::new();
    for p in &out {
        check_unique(&mut seen, &p.id)?;
    }
    Ok(out)
}

pub fn ingest_passages(path: &Path) -> Result<Vec<Passage>> {
    read_passages(io::open(path)?)
}

/// Tables loaded from JSONL, with the number of rows that had to be truncated
/// to the header arity.
#[derive(Debug, Clone, Default)]
pub struct TableLoad {
    pub tables: Vec<Table>,
    pub truncated_rows: usize,
}

pub fn read_tables<R: BufRead>(reader: R) -> Result<TableLoad> {
    let mut load = TableLoad::default();
    for (line, mut t) in io::read_jsonl::<Table, _>(reader)? {
        if t.id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty table id".into(),
            });
        }
        t.id = namespaced_id(&t.id, Modality::Table);
        if t.header.is_empty() {
            return Err(Error::InvalidRecord {
                id: t.id,
                reason: "table header is empty".into(),
            });
        }
        load.truncated_rows += t.normalize_rows();
        load.tables.push(t);
    }
    let mut seen = BTreeSet::new();
    for t in &load.tables {
        check_unique(&mut seen, &t.id)?;
    }
    if load.truncated_rows > 0 {
        log::warn!(
            "{} table rows truncated to header arity",
            load.truncated_rows
        );
    }
    Ok(load)
}

pub fn ingest_tables(path: &Path) -> Result<TableLoad> {
    read_tables(io::open(path)?)
}

pub fn read_queries<R: BufRead>(reader: R) -> Result<Vec<QueryRecord>> {
    let mut out = Vec::new();
    for (line, mut q) in io::read_jsonl::<QueryRecord, _>(reader)? {
        q.validate()
            .and_then(|_| q.namespace_gold_ids())
            .map_err(|message| Error::Parse { line, message })?;
        out.push(q);
    }
    let mut seen = BTreeSet::new();
    for q in &out {
        check_unique(&mut seen, &q.id)?;
    }
    Ok(out)
}

pub fn ingest_queries(path: &Path) -> Result<Vec<QueryRecord>> {
    read_queries(io::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(caption: &str) -> Table {
        Table {
            id: "table:t".into(),
            page_title: "A".into(),
            section_title: "B".into(),
            caption: caption.into(),
            header: vec!["H1".into(), "H2".into()],
            rows: vec![vec!["x".into(), "y".into()]],
        }
    }

    #[test]
    fn table_linearization() {
        assert_eq!(table("C").linearize(), "A | B | C | H1 , H2 | x , y");
    }

    #[test]
    fn empty_caption_is_skipped() {
        assert_eq!(table("").linearize(), "A | B | H1 , H2 | x , y");
        assert_eq!(table("   ").linearize(), "A | B | H1 , H2 | x , y");
    }

    #[test]
    fn passage_linearization() {
        let p = Passage {
            id: "text:1".into(),
            title: "T".into(),
            body: "b".into(),
        };
        assert_eq!(p.linearize(), "T | b");
        let untitled = Passage {
            title: String::new(),
            ..p
        };
        assert_eq!(untitled.linearize(), "b");
    }

    #[test]
    fn pipes_in_cells_are_replaced() {
        let mut t = table("C");
        t.rows[0][0] = "a|b".into();
        assert_eq!(t.linearize(), "A | B | C | H1 , H2 | a/b , y");
    }

    #[test]
    fn all_empty_row_is_skipped() {
        let mut t = table("C");
        t.rows.insert(0, vec![String::new(), String::new()]);
        assert_eq!(t.linearize(), "A | B | C | H1 , H2 | x , y");
    }

    #[test]
    fn linearize_is_idempotent() {
        let d = Document::from(table("C"));
        assert_eq!(d.text(), linearize(d.kind()));
        assert_eq!(linearize(d.kind()), linearize(d.kind()));
        assert_eq!(d.modality(), Modality::Table);
    }

    #[test]
    fn passages_keep_file_order_and_get_prefixed() {
        let input = r#"{"id":"2","title":"B","text":"second"}
{"id":"text:1","title":"A","text":"first"}
"#;
        let ps = read_passages(input.as_bytes()).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].id, "text:2");
        assert_eq!(ps[1].id, "text:1");
    }

    #[test]
    fn empty_passage_file() {
        assert!(read_passages("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_three() {
        let input = r#"{"id":"1","title":"A","text":"a"}
{"id":"2","title":"B","text":"b"}
{"id":"3","title":
"#;
        let err = read_passages(input.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn duplicate_passage_id_is_named() {
        let input = r#"{"id":"1","title":"A","text":"a"}
{"id":"text:1","title":"B","text":"b"}
"#;
        let err = read_passages(input.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(ref id) if id == "text:1"));
    }

    #[test]
    fn empty_body_rejected() {
        let input = r#"{"id":"1","title":"A","text":"  "}"#;
        assert!(matches!(
            read_passages(input.as_bytes()),
            Err(Error::InvalidRecord { .. })
        ));
    }

    #[test]
    fn short_rows_padded_long_rows_truncated() {
        let input = r#"{"id":"t1","page_title":"P","section_title":"S","caption":"C","header":["a","b","c"],"rows":[["1"],["1","2","3","4","5"],["x","y","z"]]}"#;
        let load = read_tables(input.as_bytes()).unwrap();
        let t = &load.tables[0];
        assert_eq!(t.id, "table:t1");
        assert_eq!(t.header, vec!["a", "b", "c"]);
        assert_eq!(t.rows[0], vec!["1", "", ""]);
        assert_eq!(t.rows[1], vec!["1", "2", "3"]);
        assert_eq!(t.rows[2], vec!["x", "y", "z"]);
        assert_eq!(load.truncated_rows, 1);
    }

    #[test]
    fn headerless_table_rejected() {
        let input = r#"{"id":"t1","header":[],"rows":[]}"#;
        assert!(matches!(
            read_tables(input.as_bytes()),
            Err(Error::InvalidRecord { .. })
        ));
    }

    #[test]
    fn query_gold_ids_are_namespaced_by_dataset() {
        let input = r#"{"id":"q1","question":"who?","dataset":"NQ","gold_ids":["7"],"answers":["x"],"protocol":"answer_string"}
{"id":"q2","question":"what?","dataset":"WikiSQL","gold_ids":["t9"],"answers":[],"protocol":"gold_id"}
{"id":"q3","question":"which?","dataset":"MultiModal","gold_ids":["table:4"],"answers":["y"],"protocol":"answer_string"}
"#;
        let qs = read_queries(input.as_bytes()).unwrap();
        assert!(qs[0].gold_ids.contains("text:7"));
        assert!(qs[1].gold_ids.contains("table:t9"));
        assert!(qs[2].gold_ids.contains("table:4"));
        assert_eq!(qs[1].dataset, Dataset::WikiSQL);
    }

    #[test]
    fn multimodal_gold_ids_must_be_prefixed() {
        let input = r#"{"id":"q","question":"?","dataset":"MultiModal","gold_ids":["4"],"answers":["y"],"protocol":"gold_id"}"#;
        assert!(matches!(
            read_queries(input.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn protocol_invariants_enforced() {
        let no_answers = r#"{"id":"q","question":"?","dataset":"NQ","gold_ids":["1"],"answers":[],"protocol":"answer_string"}"#;
        let no_gold = r#"{"id":"q","question":"?","dataset":"OTTQA","gold_ids":[],"answers":["a"],"protocol":"gold_id"}"#;
        assert!(read_queries(no_answers.as_bytes()).is_err());
        assert!(read_queries(no_gold.as_bytes()).is_err());
    }

    #[test]
    fn dataset_names_parse_leniently() {
        assert_eq!("nq_tables".parse::<Dataset>().unwrap(), Dataset::NQTables);
        assert_eq!(
            "WikiSQL_ctx-independent".parse::<Dataset>().unwrap(),
            Dataset::WikiSQLCtx
        );
        assert_eq!("OTT-QA".parse::<Dataset>().unwrap(), Dataset::OTTQA);
        assert!("squad".parse::<Dataset>().is_err());
    }

    #[test]
    fn corpus_rejects_cross_modal_duplicates() {
        let p = Passage {
            id: "x".into(),
            title: String::new(),
            body: "b".into(),
        };
        let err = Corpus::new(vec![p.clone().into(), p.into()]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(_)));
    }
}
