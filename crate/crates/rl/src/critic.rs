//! State-value network over the initial static node features.

use ffevss_core::sim::static_features;
use ffevss_core::NetworkInstance;
use ffevss_nn::{Attention, Linear, Matrix, ParamStore, Tape, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::actor::STATIC_DIM;
use crate::error::PolicyError;

pub const GLIMPSES: usize = 3;

#[derive(Debug, Clone)]
pub struct CriticNet {
    pub store: ParamStore,
    pub hidden: usize,
    pub glimpses: usize,
    embed: Linear,
    attention: Attention,
    ff: Linear,
    out: Linear,
}

impl CriticNet {
    pub fn new(seed: u64, hidden: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embed = Linear::new(&mut store, "critic.static", STATIC_DIM, hidden, &mut rng);
        let attention = Attention::new(
            &mut store,
            "critic.attention",
            hidden,
            hidden,
            hidden,
            &mut rng,
        );
        let ff = Linear::new(&mut store, "critic.ff", hidden, hidden, &mut rng);
        let out = Linear::new(&mut store, "critic.out", hidden, 1, &mut rng);
        Self {
            store,
            hidden,
            glimpses: GLIMPSES,
            embed,
            attention,
            ff,
            out,
        }
    }

    /// `V(x_0)` as a `1×1` tape value.
    ///
    /// Starting from a zero query, each glimpse attends over the embedded
    /// nodes and replaces the query with the attention-weighted mean of the
    /// node embeddings. The final query goes through a ReLU layer and a
    /// linear head.
    pub fn value(&self, tape: &mut Tape, inst: &NetworkInstance) -> Result<Var, PolicyError> {
        let n = inst.len();
        let xs = tape.constant(Matrix::from_vec(n, STATIC_DIM, static_features(inst)));
        let e = self.embed.forward(tape, &self.store, xs)?;
        let w_x = self.attention.block(tape, &self.store, 0, self.hidden);
        let proj = tape.matmul_t(e, w_x);
        let mut q = tape.constant(Matrix::zeros(1, self.hidden));
        for _ in 0..self.glimpses {
            let u = self
                .attention
                .scores_projected(tape, &self.store, proj, q)?;
            let u = tape.reshape(u, 1, n);
            let a = tape.softmax(u);
            q = tape.matmul(a, e);
        }
        let hidden = self.ff.forward(tape, &self.store, q)?;
        let hidden = tape.relu(hidden);
        Ok(self.out.forward(tape, &self.store, hidden)?)
    }

    pub fn predict(&self, inst: &NetworkInstance) -> Result<f64, PolicyError> {
        let mut tape = Tape::new();
        let v = self.value(&mut tape, inst)?;
        Ok(tape.value(v).item())
    }
}
