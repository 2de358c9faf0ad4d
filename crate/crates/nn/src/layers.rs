use rand::Rng;

use crate::error::NnError;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

fn expect_cols(tape: &Tape, x: Var, cols: usize, what: &str) -> Result<(), NnError> {
    let got = tape.value(x).cols;
    if got != cols {
        return Err(NnError::Shape(format!(
            "{what}: expected {cols} columns, got {got}"
        )));
    }
    Ok(())
}

/// Row-wise affine map `y = x Wᵀ + b`, shared across rows.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let w = store.uniform(&format!("{name}.w"), output, input, input, rng);
        let b = store.zeros(&format!("{name}.b"), 1, output);
        Self {
            w,
            b,
            input,
            output,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, NnError> {
        expect_cols(tape, x, self.input, "linear input")?;
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let xw = tape.matmul_t(x, w);
        Ok(tape.add_row(xw, b))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmState {
    pub fn zeros(tape: &mut Tape, hidden: usize) -> Self {
        let h = tape.constant(crate::Matrix::zeros(1, hidden));
        let c = tape.constant(crate::Matrix::zeros(1, hidden));
        Self { h, c }
    }
}

/// LSTM cell with gate blocks ordered input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let w_ih = store.uniform(&format!("{name}.w_ih"), 4 * hidden, input, input, rng);
        let w_hh = store.uniform(&format!("{name}.w_hh"), 4 * hidden, hidden, hidden, rng);
        let b = store.zeros(&format!("{name}.b"), 1, 4 * hidden);
        Self {
            w_ih,
            w_hh,
            b,
            input,
            hidden,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        state: LstmState,
    ) -> Result<LstmState, NnError> {
        expect_cols(tape, x, self.input, "lstm input")?;
        expect_cols(tape, state.h, self.hidden, "lstm hidden")?;
        expect_cols(tape, state.c, self.hidden, "lstm cell")?;
        let hd = self.hidden;
        let w_ih = tape.param(store, self.w_ih);
        let w_hh = tape.param(store, self.w_hh);
        let b = tape.param(store, self.b);
        let xi = tape.matmul_t(x, w_ih);
        let hh = tape.matmul_t(state.h, w_hh);
        let pre = tape.add(xi, hh);
        let pre = tape.add_row(pre, b);
        let i = tape.slice_cols(pre, 0, hd);
        let f = tape.slice_cols(pre, hd, 2 * hd);
        let g = tape.slice_cols(pre, 2 * hd, 3 * hd);
        let o = tape.slice_cols(pre, 3 * hd, 4 * hd);
        let i = tape.sigmoid(i);
        let f = tape.sigmoid(f);
        let g = tape.tanh(g);
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, state.c);
        let write = tape.mul(i, g);
        let c = tape.add(keep, write);
        let ct = tape.tanh(c);
        let h = tape.mul(o, ct);
        Ok(LstmState { h, c })
    }
}

/// Additive attention `u_n = v · tanh(W (x_n ; h))` with `W` stored as one
/// `hidden × (node_dim + query_dim)` matrix.
#[derive(Debug, Clone)]
pub struct Attention {
    pub w: ParamId,
    pub v: ParamId,
    pub node_dim: usize,
    pub query_dim: usize,
    pub hidden: usize,
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        node_dim: usize,
        query_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = node_dim + query_dim;
        let w = store.uniform(&format!("{name}.w"), hidden, fan_in, fan_in, rng);
        let v = store.uniform(&format!("{name}.v"), 1, hidden, hidden, rng);
        Self {
            w,
            v,
            node_dim,
            query_dim,
            hidden,
        }
    }

    /// Columns `start..end` of `W` as a tape value.
    pub fn block(&self, tape: &mut Tape, store: &ParamStore, start: usize, end: usize) -> Var {
        let w = tape.param(store, self.w);
        tape.slice_cols(w, start, end)
    }

    /// Logits (`n×1`) from node projections `W_x x_n` already on the tape.
    pub fn scores_projected(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        projected: Var,
        query: Var,
    ) -> Result<Var, NnError> {
        expect_cols(tape, projected, self.hidden, "attention projection")?;
        expect_cols(tape, query, self.query_dim, "attention query")?;
        let w_q = self.block(tape, store, self.node_dim, self.node_dim + self.query_dim);
        let q = tape.matmul_t(query, w_q);
        let pre = tape.add_row(projected, q);
        let act = tape.tanh(pre);
        let v = tape.param(store, self.v);
        Ok(tape.matmul_t(act, v))
    }

    /// Logits (`n×1`) for node vectors `n×node_dim` against a `1×query_dim` query.
    pub fn scores(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        nodes: Var,
        query: Var,
    ) -> Result<Var, NnError> {
        expect_cols(tape, nodes, self.node_dim, "attention nodes")?;
        let w_x = self.block(tape, store, 0, self.node_dim);
        let projected = tape.matmul_t(nodes, w_x);
        self.scores_projected(tape, store, projected, query)
    }
}
