use serde::{Deserialize, Serialize};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moment state over a flat parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Adam {
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected update. `blocks` pairs each parameter slice with its
    /// gradient; together they must cover exactly `len()` values in layout
    /// order.
    pub fn step<'a>(&mut self, lr: f64, blocks: impl IntoIterator<Item = (&'a mut [f64], &'a [f64])>) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        let mut off = 0;
        for (params, grads) in blocks {
            debug_assert_eq!(params.len(), grads.len());
            let m = &mut self.m[off..off + params.len()];
            let v = &mut self.v[off..off + params.len()];
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                params[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
            off += params.len();
        }
        debug_assert_eq!(off, self.m.len());
    }
}
