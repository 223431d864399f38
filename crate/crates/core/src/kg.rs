//! Knowledge-graph store: vocabularies, inverse-closed adjacency, action
//! enumeration and plausible negative sampling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

pub const INVERSE_SUFFIX: &str = "_INV";
pub const NO_OP: &str = "NO_OP";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One `(relation, target)` edge, also the unit an agent moves along.
pub type Action = (RelationId, EntityId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub predicate: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(subject: EntityId, predicate: RelationId, object: EntityId) -> Self {
        Self { subject, predicate, object }
    }
}

/// A triple with its truth value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Query {
    pub triple: Triple,
    pub label: bool,
}

impl Query {
    pub fn new(triple: Triple, label: bool) -> Self {
        Self { triple, label }
    }

    pub fn target(&self) -> f64 {
        if self.label {
            1.0
        } else {
            0.0
        }
    }
}

/// Bijection between surface strings and dense ids, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `id<TAB>name` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(&format!("{i}\t{n}\n"));
        }
        out
    }

    /// Inverse of [`Vocab::dump`]; ids must be contiguous from 0.
    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut vocab = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let (id, name) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected `id<TAB>name`".into(),
            })?;
            let id: usize = id.parse().map_err(|_| Error::Parse { line: i + 1, message: format!("bad id `{id}`") })?;
            if id != vocab.len() || vocab.get(name).is_some() {
                return Err(Error::Parse { line: i + 1, message: "ids must be contiguous and names unique".into() });
            }
            vocab.intern(name);
        }
        Ok(vocab)
    }
}

/// Relation ids: base relations `0..P`, inverses `P..2P`, then `NO_OP`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relations {
    base: Vocab,
    full: Vocab,
}

impl Relations {
    pub fn from_base(base: Vocab) -> Self {
        let mut full = Vocab::new();
        for n in base.names() {
            full.intern(n);
        }
        for n in base.names() {
            full.intern(&format!("{n}{INVERSE_SUFFIX}"));
        }
        full.intern(NO_OP);
        Self { base, full }
    }

    /// Rebuilds from a full dump (base names, their inverses, `NO_OP`).
    pub fn from_full(full: Vocab) -> Result<Self> {
        let n = full.len();
        if n % 2 == 0 || full.name((n - 1) as u32) != NO_OP {
            return Err(Error::Config("relation vocabulary must end with NO_OP".into()));
        }
        let p = (n - 1) / 2;
        let mut base = Vocab::new();
        for i in 0..p {
            base.intern(full.name(i as u32));
        }
        let rebuilt = Self::from_base(base);
        if rebuilt.full != full {
            return Err(Error::Config("relation vocabulary is not inverse-closed".into()));
        }
        Ok(rebuilt)
    }

    pub fn base_count(&self) -> usize {
        self.base.len()
    }

    /// Total ids, including inverses and `NO_OP`.
    pub fn len(&self) -> usize {
        self.full.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn no_op(&self) -> RelationId {
        RelationId((2 * self.base.len()) as u32)
    }

    pub fn inverse(&self, r: RelationId) -> RelationId {
        let p = self.base.len() as u32;
        if r.0 < p {
            RelationId(r.0 + p)
        } else if r.0 < 2 * p {
            RelationId(r.0 - p)
        } else {
            r
        }
    }

    pub fn is_inverse(&self, r: RelationId) -> bool {
        let p = self.base.len() as u32;
        r.0 >= p && r.0 < 2 * p
    }

    pub fn name(&self, r: RelationId) -> &str {
        self.full.name(r.0)
    }

    pub fn get(&self, name: &str) -> Option<RelationId> {
        self.full.get(name).map(RelationId)
    }

    pub fn vocab(&self) -> &Vocab {
        &self.full
    }
}

/// Splits TAB-separated triple text into surface-form fields.
///
/// Blank lines are ignored; any other line must have exactly three fields.
pub fn parse_tsv(text: &str) -> Result<Vec<[&str; 3]>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [s, p, o] => out.push([*s, *p, *o]),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 3 TAB-separated fields, found {}", fields.len()),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(out)
}

/// Collects vocabulary and edges before the relation id space is fixed.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Vocab,
    relations: Vocab,
    edges: Vec<(u32, u32, u32)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from fixed vocabularies (e.g. from a checkpoint); unknown names
    /// are then rejected by [`GraphBuilder::add_edge_strict`].
    pub fn with_vocab(entities: Vocab, relations: &Relations) -> Self {
        Self { entities, relations: relations.base.clone(), edges: Vec::new() }
    }

    /// Registers names without adding an edge (held-out splits).
    pub fn register(&mut self, s: &str, p: &str, o: &str) {
        self.entities.intern(s);
        self.relations.intern(p);
        self.entities.intern(o);
    }

    pub fn add_edge(&mut self, s: &str, p: &str, o: &str) {
        let s = self.entities.intern(s);
        let p = self.relations.intern(p);
        let o = self.entities.intern(o);
        self.edges.push((s, p, o));
    }

    pub fn add_edge_strict(&mut self, s: &str, p: &str, o: &str) -> Result<()> {
        let si = self.entities.get(s).ok_or_else(|| Error::UnknownEntity(s.into()))?;
        let pi = self.relations.get(p).ok_or_else(|| Error::UnknownRelation(p.into()))?;
        let oi = self.entities.get(o).ok_or_else(|| Error::UnknownEntity(o.into()))?;
        self.edges.push((si, pi, oi));
        Ok(())
    }

    pub fn build(self, add_inverses: bool) -> KnowledgeGraph {
        let relations = Relations::from_base(self.relations);
        let p = relations.base_count() as u32;
        let mut triples = BTreeSet::new();
        for (s, r, o) in self.edges {
            triples.insert(Triple::new(EntityId(s), RelationId(r), EntityId(o)));
            if add_inverses {
                triples.insert(Triple::new(EntityId(o), RelationId(r + p), EntityId(s)));
            }
        }
        KnowledgeGraph::assemble(self.entities, relations, triples)
    }
}

/// Immutable directed multigraph with per-node sorted adjacency.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Relations,
    triples: BTreeSet<Triple>,
    adjacency: Vec<Vec<Action>>,
    objects: Vec<Vec<EntityId>>,
}

impl KnowledgeGraph {
    pub fn from_tsv(text: &str, add_inverses: bool) -> Result<Self> {
        let mut b = GraphBuilder::new();
        for [s, p, o] in parse_tsv(text)? {
            b.add_edge(s, p, o);
        }
        Ok(b.build(add_inverses))
    }

    fn assemble(entities: Vocab, relations: Relations, triples: BTreeSet<Triple>) -> Self {
        let mut adjacency = alloc::vec![Vec::new(); entities.len()];
        let mut objects: Vec<BTreeSet<EntityId>> = alloc::vec![BTreeSet::new(); relations.len()];
        for t in &triples {
            adjacency[t.subject.index()].push((t.predicate, t.object));
            objects[t.predicate.index()].insert(t.object);
        }
        // BTreeSet iteration already yields (subject, predicate, object) order.
        let objects = objects.into_iter().map(|s| s.into_iter().collect()).collect();
        Self { entities, relations, triples, adjacency, objects }
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Relations {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    pub fn entity(&self, name: &str) -> Result<EntityId> {
        self.entities.get(name).map(EntityId).ok_or_else(|| Error::UnknownEntity(name.into()))
    }

    pub fn relation(&self, name: &str) -> Result<RelationId> {
        self.relations.get(name).ok_or_else(|| Error::UnknownRelation(name.into()))
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        self.entities.name(e.0)
    }

    pub fn relation_name(&self, r: RelationId) -> &str {
        self.relations.name(r)
    }

    pub fn resolve(&self, s: &str, p: &str, o: &str) -> Result<Triple> {
        Ok(Triple::new(self.entity(s)?, self.relation(p)?, self.entity(o)?))
    }

    pub fn resolve_all(&self, rows: &[[&str; 3]]) -> Result<Vec<Triple>> {
        rows.iter().map(|[s, p, o]| self.resolve(s, p, o)).collect()
    }

    /// Stored outgoing edges, sorted, without the self-loop.
    pub fn neighbors(&self, e: EntityId) -> &[Action] {
        &self.adjacency[e.index()]
    }

    /// Entities observed as object of `r`, sorted.
    pub fn objects_of(&self, r: RelationId) -> &[EntityId] {
        &self.objects[r.index()]
    }

    /// Objects `o` with `(s, r, o)` stored.
    pub fn objects_for(&self, s: EntityId, r: RelationId) -> impl Iterator<Item = EntityId> + '_ {
        let adj = self.neighbors(s);
        let start = adj.partition_point(|&(rr, _)| rr < r);
        adj[start..].iter().take_while(move |&&(rr, _)| rr == r).map(|&(_, o)| o)
    }

    /// Admissible actions from `e`: the self-loop first, then outgoing edges.
    ///
    /// When the node has more than `max_out_degree - 1` edges, a uniform
    /// subsample (kept in adjacency order) fills the remaining slots.
    pub fn actions_from<R: Rng + ?Sized>(&self, e: EntityId, max_out_degree: usize, rng: &mut R) -> Vec<Action> {
        self.actions_from_excluding(e, max_out_degree, &[], rng)
    }

    /// Like [`KnowledgeGraph::actions_from`], with some edges hidden.
    pub fn actions_from_excluding<R: Rng + ?Sized>(
        &self,
        e: EntityId,
        max_out_degree: usize,
        exclude: &[Action],
        rng: &mut R,
    ) -> Vec<Action> {
        let cap = max_out_degree.max(1);
        let edges = self.neighbors(e);
        let mut out = Vec::with_capacity(edges.len().min(cap) + 1);
        out.push((self.relations.no_op(), e));
        let visible: Vec<Action> = if exclude.is_empty() {
            edges.to_vec()
        } else {
            edges.iter().filter(|a| !exclude.contains(a)).copied().collect()
        };
        if visible.len() < cap {
            out.extend(visible);
        } else {
            let mut picked = rand::seq::index::sample(rng, visible.len(), cap - 1).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| visible[i]));
        }
        out
    }

    /// A plausible false triple `(s, p, õ)` with `õ` observed as object of `p`.
    pub fn corrupt<R: Rng + ?Sized>(&self, t: Triple, rng: &mut R) -> Result<Triple> {
        self.corrupt_excluding(t, &BTreeSet::new(), rng)
    }

    /// Corruption that also avoids triples known true outside the graph
    /// (held-out splits).
    pub fn corrupt_excluding<R: Rng + ?Sized>(&self, t: Triple, known: &BTreeSet<Triple>, rng: &mut R) -> Result<Triple> {
        let candidates: Vec<EntityId> = self
            .objects_of(t.predicate)
            .iter()
            .copied()
            .filter(|&o| {
                let c = Triple::new(t.subject, t.predicate, o);
                o != t.object && !self.contains(&c) && !known.contains(&c)
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::NoCandidate { subject: t.subject.index(), predicate: t.predicate.index() });
        }
        let o = candidates[rng.random_range(0..candidates.len())];
        Ok(Triple::new(t.subject, t.predicate, o))
    }

    /// One negative per positive, shuffled. See [`LabeledSet`].
    pub fn build_labeled_set<R: Rng + ?Sized>(&self, positives: &[Triple], rng: &mut R) -> LabeledSet {
        self.build_labeled_set_excluding(positives, &BTreeSet::new(), rng)
    }

    pub fn build_labeled_set_excluding<R: Rng + ?Sized>(
        &self,
        positives: &[Triple],
        known: &BTreeSet<Triple>,
        rng: &mut R,
    ) -> LabeledSet {
        let mut queries = Vec::with_capacity(2 * positives.len());
        let mut skipped = 0;
        for &t in positives {
            queries.push(Query::new(t, true));
            match self.corrupt_excluding(t, known, rng) {
                Ok(neg) => queries.push(Query::new(neg, false)),
                Err(_) => {
                    skipped += 1;
                    log::warn!(
                        "no plausible negative for ({}, {}, {})",
                        self.entity_name(t.subject),
                        self.relation_name(t.predicate),
                        self.entity_name(t.object)
                    );
                }
            }
        }
        queries.shuffle(rng);
        LabeledSet { queries, skipped }
    }

    pub fn display_triple(&self, t: &Triple) -> TripleDisplay<'_> {
        TripleDisplay { kg: self, triple: *t }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    pub queries: Vec<Query>,
    /// Positives with no corruption candidate.
    pub skipped: usize,
}

pub struct TripleDisplay<'a> {
    kg: &'a KnowledgeGraph,
    triple: Triple,
}

impl fmt::Display for TripleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.triple;
        write!(
            f,
            "({}, {}, {})",
            self.kg.entity_name(t.subject),
            self.kg.relation_name(t.predicate),
            self.kg.entity_name(t.object)
        )
    }
}
