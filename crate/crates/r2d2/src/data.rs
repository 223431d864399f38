//! Triple files, labelled splits and pretrained embedding tables.
//!
//! All files are TAB-separated without a header. A split row is
//! `subject<TAB>predicate<TAB>object` with an optional fourth label column
//! (`1`/`0` or `true`/`false`); unlabelled rows are positives.

use std::collections::BTreeSet;
use std::path::Path;

use r2d2_core::kg::{GraphBuilder, Relations};
use r2d2_core::rng::stream;
use r2d2_core::{EntityId, KnowledgeGraph, Query, Triple, Vocab};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub label: Option<bool>,
}

fn tsv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.into(), source })
}

fn parse_label(path: &Path, line: u64, field: &str) -> Result<bool> {
    match field.trim() {
        "1" | "true" => Ok(true),
        "0" | "-1" | "false" => Ok(false),
        other => Err(Error::format(path, format!("line {line}: bad label `{other}`"))),
    }
}

/// Reads triples, with labels if a fourth column is present.
pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for record in tsv_reader(path)?.records() {
        let record = record.map_err(|source| Error::Csv { path: path.into(), source })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let label = match record.len() {
            3 => None,
            4 => Some(parse_label(path, line, &record[3])?),
            n => return Err(Error::format(path, format!("line {line}: expected 3 or 4 fields, found {n}"))),
        };
        rows.push(Row { subject: record[0].into(), predicate: record[1].into(), object: record[2].into(), label });
    }
    if rows.is_empty() {
        return Err(Error::format(path, "no triples"));
    }
    Ok(rows)
}

/// Graph edges from `graph`, with every name in `splits` registered so that
/// held-out queries resolve. Inverse edges are added.
pub fn build_graph(graph: &[Row], splits: &[&[Row]]) -> KnowledgeGraph {
    let mut b = GraphBuilder::new();
    for r in graph {
        b.add_edge(&r.subject, &r.predicate, &r.object);
    }
    for r in splits.iter().flat_map(|s| s.iter()) {
        b.register(&r.subject, &r.predicate, &r.object);
    }
    b.build(true)
}

/// Rebuilds a graph over fixed vocabularies, e.g. those of a checkpoint.
/// Names outside the vocabularies are a mismatch.
pub fn build_graph_with_vocab(graph: &[Row], entities: Vocab, relations: &Relations) -> Result<KnowledgeGraph> {
    let mut b = GraphBuilder::with_vocab(entities, relations);
    for r in graph {
        b.add_edge_strict(&r.subject, &r.predicate, &r.object).map_err(|e| Error::VocabularyMismatch(e.to_string()))?;
    }
    Ok(b.build(true))
}

pub fn resolve(kg: &KnowledgeGraph, rows: &[Row]) -> Result<Vec<(Triple, Option<bool>)>> {
    rows.iter().map(|r| Ok((kg.resolve(&r.subject, &r.predicate, &r.object)?, r.label))).collect()
}

/// Every triple known to be true: graph edges plus positive split rows.
pub fn known_true(kg: &KnowledgeGraph, splits: &[&[(Triple, Option<bool>)]]) -> BTreeSet<Triple> {
    let mut known: BTreeSet<Triple> = kg.triples().copied().collect();
    for &(t, label) in splits.iter().flat_map(|s| s.iter()) {
        if label != Some(false) {
            known.insert(t);
        }
    }
    known
}

/// Labelled queries for one split. Labelled rows are used as given; each
/// unlabelled row is a positive paired with one plausible corruption drawn
/// from `stream(seed, [key])`.
pub fn labeled_queries(
    kg: &KnowledgeGraph,
    rows: &[(Triple, Option<bool>)],
    known: &BTreeSet<Triple>,
    seed: u64,
    key: u64,
) -> Vec<Query> {
    let mut queries: Vec<Query> =
        rows.iter().filter_map(|&(t, label)| label.map(|l| Query::new(t, l))).collect();
    let positives: Vec<Triple> = rows.iter().filter(|(_, l)| l.is_none()).map(|&(t, _)| t).collect();
    if !positives.is_empty() {
        let set = kg.build_labeled_set_excluding(&positives, known, &mut stream(seed, &[key]));
        if set.skipped > 0 {
            log::warn!("{} positives had no plausible negative", set.skipped);
        }
        queries.extend(set.queries);
    }
    queries
}

/// Reads `entity<TAB>v1<TAB>...<TAB>vd`. Entities unknown to `kg` are skipped.
pub fn read_pretrained(path: &Path, kg: &KnowledgeGraph) -> Result<Vec<(EntityId, Vec<f64>)>> {
    let mut out = Vec::new();
    let mut unknown = 0usize;
    for record in tsv_reader(path)?.records() {
        let record = record.map_err(|source| Error::Csv { path: path.into(), source })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(Error::format(path, format!("line {line}: expected an entity and a vector")));
        }
        let Some(id) = kg.entities().get(&record[0]) else {
            unknown += 1;
            continue;
        };
        let vector = record
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
        out.push((EntityId(id), vector));
    }
    if unknown > 0 {
        log::info!("{unknown} pretrained entities are not in the graph");
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
