use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    tensor: Tensor,
    /// Rows excluded from optimizer updates.
    frozen_rows: Option<Vec<bool>>,
}

/// Named dense parameters. Ids are insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `name` is already registered.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        assert!(self.id(&name).is_none(), "duplicate parameter {name}");
        self.entries.push(Entry { name, tensor, frozen_rows: None });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.ids().filter(move |&id| self.name(id).starts_with(prefix))
    }

    pub fn freeze_row(&mut self, id: ParamId, row: usize) {
        let entry = &mut self.entries[id.0];
        let rows = entry.tensor.rows();
        entry.frozen_rows.get_or_insert_with(|| vec![false; rows])[row] = true;
    }

    pub fn freeze_all(&mut self, id: ParamId) {
        let entry = &mut self.entries[id.0];
        entry.frozen_rows = Some(vec![true; entry.tensor.rows()]);
    }

    pub fn is_row_frozen(&self, id: ParamId, row: usize) -> bool {
        self.entries[id.0].frozen_rows.as_ref().is_some_and(|f| f[row])
    }

    pub fn frozen_rows(&self, id: ParamId) -> Option<&[bool]> {
        self.entries[id.0].frozen_rows.as_deref()
    }

    /// Sum of squared entries over the given parameters.
    pub fn squared_norm<I: IntoIterator<Item = ParamId>>(&self, ids: I) -> f64 {
        ids.into_iter().map(|id| self.get(id).squared_norm()).sum()
    }
}

/// Gradient buffers keyed by parameter; untouched parameters stay `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients {
    bufs: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn new(store: &ParamStore) -> Self {
        Self { bufs: vec![None; store.len()] }
    }

    pub(crate) fn buffer(&mut self, id: ParamId, len: usize) -> &mut [f64] {
        if self.bufs.len() <= id.0 {
            self.bufs.resize(id.0 + 1, None);
        }
        self.bufs[id.0].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.bufs.get(id.0).and_then(|b| b.as_deref())
    }

    /// Dense view; zeros when the parameter received no gradient.
    pub fn dense(&self, id: ParamId, store: &ParamStore) -> Vec<f64> {
        match self.get(id) {
            Some(g) => g.to_vec(),
            None => vec![0.0; store.get(id).len()],
        }
    }

    pub fn add_scaled(&mut self, id: ParamId, values: &[f64], scale: f64) {
        let buf = self.buffer(id, values.len());
        for (g, v) in buf.iter_mut().zip(values) {
            *g += scale * v;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for buf in self.bufs.iter_mut().flatten() {
            buf.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn touched(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.bufs.iter().enumerate().filter(|(_, b)| b.is_some()).map(|(i, _)| ParamId(i))
    }

    pub fn is_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|b| b.iter().all(|v| v.is_finite()))
    }
}
