use rand::Rng;

use crate::error::NnError;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

/// Denominator floor for the relative error of near-zero gradients.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub samples: Vec<GradSample>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.samples.iter().map(|s| s.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradSample> {
        self.samples
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Picks `count` scalar entries uniformly over all parameters.
pub fn sample_entries<R: Rng + ?Sized>(
    store: &ParamStore,
    count: usize,
    rng: &mut R,
) -> Vec<(ParamId, usize)> {
    let total = store.num_scalars();
    (0..count)
        .map(|_| {
            let mut k = rng.gen_range(0..total);
            for id in store.ids() {
                let len = store.value(id).len();
                if k < len {
                    return (id, k);
                }
                k -= len;
            }
            unreachable!("index within total")
        })
        .collect()
}

/// Compares reverse-mode gradients with central differences of step `h`.
///
/// `loss` builds the scalar on a fresh tape from the current parameters.
/// Existing gradients in `store` are cleared.
pub fn check_gradients<F>(
    store: &mut ParamStore,
    entries: &[(ParamId, usize)],
    h: f64,
    mut loss: F,
) -> Result<GradCheckReport, NnError>
where
    F: FnMut(&ParamStore) -> Result<(Tape, Var), NnError>,
{
    store.zero_grads();
    let (tape, out) = loss(store)?;
    tape.backward(out, store)?;
    let mut samples = Vec::with_capacity(entries.len());
    for &(id, index) in entries {
        let analytic = store.grad(id).data[index];
        let original = store.value(id).data[index];
        store.value_mut(id).data[index] = original + h;
        let (t, v) = loss(store)?;
        let plus = t.value(v).item();
        store.value_mut(id).data[index] = original - h;
        let (t, v) = loss(store)?;
        let minus = t.value(v).item();
        store.value_mut(id).data[index] = original;
        let numeric = (plus - minus) / (2.0 * h);
        samples.push(GradSample {
            param: store.name(id).to_string(),
            index,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    }
    store.zero_grads();
    Ok(GradCheckReport { samples })
}
