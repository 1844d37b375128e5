use super::{Gradients, Init, NnError, ParamId, ParamStore, Tensor};

/// Trainable lookup table `[dim × vocab]`; column `id` is the embedding of `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    table: ParamId,
    dim: usize,
    vocab: usize,
}

impl Embedding {
    pub const INIT_LIMIT: f64 = 0.05;

    pub fn new(store: &mut ParamStore, name: &str, dim: usize, vocab: usize) -> Self {
        let table = store.add(
            format!("{name}.table"),
            &[dim, vocab],
            Init::Uniform {
                limit: Self::INIT_LIMIT,
            },
        );
        Self { table, dim, vocab }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn table(&self) -> ParamId {
        self.table
    }

    /// Output is `[dim × ids.len()]`.
    pub fn forward(&self, store: &ParamStore, ids: &[usize]) -> Result<Tensor, NnError> {
        lookup(store.get(self.table), ids)
    }

    pub fn backward(&self, ids: &[usize], dout: &Tensor, grads: &mut Gradients) {
        let len = ids.len();
        let g = grads.get_mut(self.table);
        for d in 0..self.dim {
            for (j, &id) in ids.iter().enumerate() {
                g[d * self.vocab + id] += dout.data()[d * len + j];
            }
        }
    }
}

/// Gathers columns of `table` (`[n × k]`) into an `[n × ids.len()]` tensor.
pub fn lookup(table: &Tensor, ids: &[usize]) -> Result<Tensor, NnError> {
    let (n, k) = (table.rows(), table.cols());
    if let Some(&id) = ids.iter().find(|&&id| id >= k) {
        return Err(NnError::IdOutOfRange { id, vocab: k });
    }
    let mut out = Vec::with_capacity(n * ids.len());
    for d in 0..n {
        let row = &table.data()[d * k..(d + 1) * k];
        out.extend(ids.iter().map(|&id| row[id]));
    }
    Tensor::from_vec(&[n, ids.len()], out)
}
