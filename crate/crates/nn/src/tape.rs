//! Reverse-mode differentiation over a linear record of matrix operators.
//!
//! Values are computed eagerly as operators are pushed. [`Tape::backward`]
//! walks the record in reverse and adds parameter gradients into the
//! [`ParamStore`] the leaves were read from.

use std::collections::HashMap;

use crate::error::NnError;
use crate::matrix::{axpy, dot, matmul, matmul_t, Matrix};
use crate::params::{ParamId, ParamStore};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(ParamId),
    MatMulT(Var, Var),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    SliceCols(Var, usize),
    Reshape(Var),
    Sum(Var),
    Square(Var),
    Softmax(Var),
    LogProb(Var, Vec<f64>, usize),
}

#[derive(Debug, Clone)]
struct Entry {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    entries: Vec<Entry>,
    params: HashMap<ParamId, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops every entry recorded at or after `len`.
    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
        self.params.retain(|_, v| v.0 < len);
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.entries[v.0].value
    }

    fn needs(&self, v: Var) -> bool {
        self.entries[v.0].needs_grad
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let needs_grad = match &op {
            Op::Const => false,
            Op::Param(_) => true,
            Op::MatMulT(a, b)
            | Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::AddRow(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b) => self.needs(*a) || self.needs(*b),
            Op::Scale(a, _)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::SliceCols(a, _)
            | Op::Reshape(a)
            | Op::Sum(a)
            | Op::Square(a)
            | Op::Softmax(a)
            | Op::LogProb(a, _, _) => self.needs(*a),
        };
        self.entries.push(Entry {
            value,
            op,
            needs_grad,
        });
        Var(self.entries.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Const)
    }

    /// Leaf for a stored parameter; repeated reads share one leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    /// `a · wᵀ` with `a: r×k`, `w: o×k`.
    pub fn matmul_t(&mut self, a: Var, w: Var) -> Var {
        let (av, wv) = (self.value(a), self.value(w));
        assert_eq!(av.cols, wv.cols, "matmul_t inner dims");
        let out = matmul_t(av, wv);
        self.push(out, Op::MatMulT(a, w))
    }

    /// `a · b` with `a: r×k`, `b: k×c`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.cols, bv.rows, "matmul inner dims");
        let out = matmul(av, bv);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        assert_eq!(out.shape(), self.value(b).shape(), "add shapes");
        out.add_assign(self.value(b));
        self.push(out, Op::Add(a, b))
    }

    /// Adds the `1×c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        let bv = self.value(b);
        assert_eq!((1, out.cols), bv.shape(), "add_row shapes");
        for r in 0..out.rows {
            for (x, y) in out.row_mut(r).iter_mut().zip(&bv.data) {
                *x += y;
            }
        }
        self.push(out, Op::AddRow(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "sub shapes");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x - y).collect();
        let out = Matrix::from_vec(av.rows, av.cols, data);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "mul shapes");
        let data = av.data.iter().zip(&bv.data).map(|(x, y)| x * y).collect();
        let out = Matrix::from_vec(av.rows, av.cols, data);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| x * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let av = self.value(a);
        assert!(start <= end && end <= av.cols, "slice_cols range");
        let mut out = Matrix::zeros(av.rows, end - start);
        for r in 0..av.rows {
            out.row_mut(r).copy_from_slice(&av.row(r)[start..end]);
        }
        self.push(out, Op::SliceCols(a, start))
    }

    /// Same data, new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let av = self.value(a);
        assert_eq!(av.len(), rows * cols, "reshape size");
        let out = Matrix::from_vec(rows, cols, av.data.clone());
        self.push(out, Op::Reshape(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).data.iter().sum());
        self.push(out, Op::Sum(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    /// Softmax over all entries of `a`, returned with `a`'s shape.
    pub fn softmax(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let all = vec![true; av.len()];
        let p = masked_softmax(&av.data, &all).expect("softmax over empty input");
        let out = Matrix::from_vec(av.rows, av.cols, p);
        self.push(out, Op::Softmax(a))
    }

    /// `log p[index]` where `p` is the masked softmax of the entries of
    /// `logits`. Returns the scalar var and the probability vector.
    pub fn log_prob(
        &mut self,
        logits: Var,
        legal: &[bool],
        index: usize,
    ) -> Result<(Var, Vec<f64>), NnError> {
        let lv = self.value(logits);
        if lv.len() != legal.len() {
            return Err(NnError::Shape(format!(
                "{} logits, {} mask entries",
                lv.len(),
                legal.len()
            )));
        }
        let p = masked_softmax(&lv.data, legal)?;
        if !legal[index] {
            return Err(NnError::Shape(format!("index {index} is masked")));
        }
        let lp = log_softmax_at(&lv.data, legal, index);
        let v = self.push(Matrix::scalar(lp), Op::LogProb(logits, p.clone(), index));
        Ok((v, p))
    }

    /// Adds `d loss / d θ` into `store` for every parameter leaf.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<(), NnError> {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let entry = &self.entries[i];
            if !entry.needs_grad {
                continue;
            }
            match &entry.op {
                Op::Const => {}
                Op::Param(id) => {
                    let target = store.grad_mut(*id);
                    target.add_assign(&g);
                    if !target.all_finite() {
                        return Err(NnError::NonFinite {
                            param: store.name(*id).to_string(),
                        });
                    }
                }
                Op::MatMulT(a, w) => {
                    let (av, wv) = (self.value(*a), self.value(*w));
                    if self.needs(*a) {
                        let ga = matmul(&g, wv);
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.needs(*w) {
                        let mut gw = Matrix::zeros(wv.rows, wv.cols);
                        for r in 0..av.rows {
                            let ar = av.row(r);
                            for (o, &go) in g.row(r).iter().enumerate() {
                                if go != 0.0 {
                                    axpy(go, ar, gw.row_mut(o));
                                }
                            }
                        }
                        accumulate(&mut grads, *w, gw);
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    // dA = G Bᵀ, dB = Aᵀ G
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, matmul_t(&g, bv));
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, matmul(&av.transpose(), &g));
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, b) => {
                    let mut gb = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        axpy(1.0, g.row(r), &mut gb.data);
                    }
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|x| -x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = zip(&g, self.value(*b), |g, y| g * y);
                    let gb = zip(&g, self.value(*a), |g, x| g * x);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.map(|x| x * s)),
                Op::Tanh(a) => {
                    let ga = zip(&g, &entry.value, |g, y| g * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = zip(&g, &entry.value, |g, y| g * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = zip(&g, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let mut ga = Matrix::zeros(av.rows, av.cols);
                    for r in 0..g.rows {
                        ga.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Reshape(a) => {
                    let av = self.value(*a);
                    accumulate(&mut grads, *a, Matrix::from_vec(av.rows, av.cols, g.data));
                }
                Op::Sum(a) => {
                    let av = self.value(*a);
                    let ga = Matrix::from_vec(av.rows, av.cols, vec![g.item(); av.len()]);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Square(a) => {
                    let ga = zip(&g, self.value(*a), |g, x| 2.0 * g * x);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Softmax(a) => {
                    let p = &entry.value;
                    let s = dot(&g.data, &p.data);
                    let ga = zip(&g, p, |g, p| p * (g - s));
                    accumulate(&mut grads, *a, ga);
                }
                Op::LogProb(a, p, index) => {
                    let av = self.value(*a);
                    let go = g.item();
                    let mut data: Vec<f64> = p.iter().map(|p| -go * p).collect();
                    data[*index] += go;
                    accumulate(&mut grads, *a, Matrix::from_vec(av.rows, av.cols, data));
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    if v.0 >= grads.len() {
        return;
    }
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Matrix::from_vec(a.rows, a.cols, data)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax restricted to `legal` entries; masked entries get exactly 0.
pub fn masked_softmax(logits: &[f64], legal: &[bool]) -> Result<Vec<f64>, NnError> {
    if logits.len() != legal.len() {
        return Err(NnError::Shape(format!(
            "{} logits, {} mask entries",
            logits.len(),
            legal.len()
        )));
    }
    let max = logits
        .iter()
        .zip(legal)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NnError::EmptyLegal);
    }
    let mut p: Vec<f64> = logits
        .iter()
        .zip(legal)
        .map(|(&x, &ok)| if ok { (x - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    Ok(p)
}

fn log_softmax_at(logits: &[f64], legal: &[bool], index: usize) -> f64 {
    let max = logits
        .iter()
        .zip(legal)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits
        .iter()
        .zip(legal)
        .filter(|(_, &ok)| ok)
        .map(|(&x, _)| (x - max).exp())
        .sum();
    logits[index] - max - z.ln()
}
