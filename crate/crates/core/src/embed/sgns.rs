//! Skip-gram negative-sampling loss, its gradient, the in-place update
//! kernel, and the exact type-normalized softmax used as a diagnostic.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::hetgraph::{HetGraph, VertexId, VertexTypeId};

use super::EmbeddingTable;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(softplus(x), softplus(-x), sigmoid(x))` from a single exponential.
#[inline]
fn logistic(x: f64) -> (f64, f64, f64) {
    let e = (-x.abs()).exp();
    let l = e.ln_1p();
    let sig = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (x.max(0.0) + l, (-x).max(0.0) + l, sig)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-ln σ(pos·center) - Σ ln σ(-neg·center)`.
pub fn sgns_loss(center: &[f64], pos: &[f64], negs: &[&[f64]]) -> f64 {
    softplus(-dot(pos, center)) + negs.iter().map(|n| softplus(dot(n, center))).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub center: Vec<f64>,
    pub pos: Vec<f64>,
    pub negs: Vec<Vec<f64>>,
}

/// Gradient of [`sgns_loss`] with respect to every vector involved.
pub fn sgns_grad(center: &[f64], pos: &[f64], negs: &[&[f64]]) -> SgnsGrad {
    let d = center.len();
    let mut gc = vec![0.0; d];
    let gp_coef = sigmoid(dot(pos, center)) - 1.0;
    for k in 0..d {
        gc[k] += gp_coef * pos[k];
    }
    let gp = center.iter().map(|c| gp_coef * c).collect();
    let mut gn = Vec::with_capacity(negs.len());
    for n in negs {
        let coef = sigmoid(dot(n, center));
        for k in 0..d {
            gc[k] += coef * n[k];
        }
        gn.push(center.iter().map(|c| coef * c).collect());
    }
    SgnsGrad {
        center: gc,
        pos: gp,
        negs: gn,
    }
}

/// A parameter cell; plain cells for the single-worker path, relaxed
/// atomics for unsynchronized multi-worker updates.
pub(crate) trait Slot: Sync {
    fn get(&self) -> f64;
    fn set(&self, v: f64);
}

#[derive(Default)]
pub(crate) struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub(crate) fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    pub(crate) fn into_inner(self) -> f64 {
        f64::from_bits(self.0.into_inner())
    }
}

impl Slot for AtomicF64 {
    #[inline]
    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    fn set(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }
}

/// Single-threaded cells. `Sync` is required by the kernel signature only;
/// these are never shared across threads.
#[repr(transparent)]
pub(crate) struct LocalF64(Cell<f64>);

// SAFETY: LocalF64 slices are only ever handed to the single-worker trainer,
// which keeps them on one thread.
unsafe impl Sync for LocalF64 {}

impl LocalF64 {
    pub(crate) fn new(v: f64) -> Self {
        LocalF64(Cell::new(v))
    }

    pub(crate) fn into_inner(self) -> f64 {
        self.0.into_inner()
    }
}

impl Slot for LocalF64 {
    #[inline]
    fn get(&self) -> f64 {
        self.0.get()
    }

    #[inline]
    fn set(&self, v: f64) {
        self.0.set(v)
    }
}

/// Dot product with four independent partial sums.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut part = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ta, tb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            part[j] += x[j] * y[j];
        }
    }
    let mut s = (part[0] + part[1]) + (part[2] + part[3]);
    for (x, y) in ta.iter().zip(tb) {
        s += x * y;
    }
    s
}

#[inline]
fn load<S: Slot>(src: &[S], out: &mut [f64]) {
    for (o, x) in out.iter_mut().zip(src) {
        *o = x.get();
    }
}

#[inline]
fn store<S: Slot>(dst: &[S], src: &[f64]) {
    for (x, &v) in dst.iter().zip(src) {
        x.set(v);
    }
}

/// Per-worker buffers for [`pair_step`].
pub(crate) struct Scratch {
    h: Vec<f64>,
    acc: Vec<f64>,
    row: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(d: usize) -> Self {
        Scratch {
            h: vec![0.0; d],
            acc: vec![0.0; d],
            row: vec![0.0; d],
        }
    }
}

/// One gradient step `x -= lr · ∂loss/∂x` for a (center, context, negatives)
/// tuple, updating rows in place. Returns the loss before the step.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pair_step<S: Slot>(
    input: &[S],
    context: &[S],
    d: usize,
    center: usize,
    pos: usize,
    negs: &[usize],
    lr: f64,
    sc: &mut Scratch,
) -> f64 {
    let Scratch { h, acc, row } = sc;
    let crow = &input[center * d..(center + 1) * d];
    load(crow, h);
    acc.iter_mut().for_each(|a| *a = 0.0);
    let mut loss = 0.0;
    for (i, &target) in std::iter::once(&pos).chain(negs).enumerate() {
        let label = if i == 0 { 1.0 } else { 0.0 };
        let cells = &context[target * d..(target + 1) * d];
        load(cells, row);
        let s = dot4(row, h);
        let (sp, sn, sig) = logistic(s);
        loss += if i == 0 { sn } else { sp };
        let g = lr * (label - sig);
        for ((a, r), x) in acc.iter_mut().zip(row.iter_mut()).zip(h.iter()) {
            *a += g * *r;
            *r += g * x;
        }
        store(cells, row);
    }
    for (x, a) in h.iter_mut().zip(acc.iter()) {
        *x += a;
    }
    store(crow, h);
    loss
}

/// Exact softmax of `exp(context(u) · input(v))` over all `u` of type `n`.
pub fn softmax_check(
    table: &EmbeddingTable,
    g: &HetGraph,
    v: VertexId,
    n: VertexTypeId,
) -> Result<Vec<(VertexId, f64)>> {
    let members = g.vertices_of_type(n);
    if members.is_empty() {
        return Err(Error::Invalid(format!(
            "vertex type `{}` has no vertices",
            g.schema().vertex_type_name(n)
        )));
    }
    let x = table.input(v);
    let scores: Vec<f64> = members.iter().map(|&u| dot(table.context(u), x)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(members.iter().zip(exps).map(|(&u, e)| (u, e / z)).collect())
}

/// Gradient of `ln softmax_check(v, type(u))[u]` with respect to `input(v)`.
pub fn log_softmax_grad(table: &EmbeddingTable, g: &HetGraph, v: VertexId, u: VertexId) -> Result<Vec<f64>> {
    let dist = softmax_check(table, g, v, g.vertex_type(u))?;
    let mut grad = table.context(u).to_vec();
    for (w, p) in dist {
        for (gk, ck) in grad.iter_mut().zip(table.context(w)) {
            *gk -= p * ck;
        }
    }
    Ok(grad)
}
