//! Exact semantic loss over enumerated answer sets and its gradient with
//! respect to the atom probabilities.

/// Product of factors kept as a count of exact zeros plus the log of the
/// nonzero ones, so that single factors can be divided out exactly.
#[derive(Clone, Copy, Debug)]
struct ZProd {
    zeros: u32,
    log: f64,
}

impl ZProd {
    const ONE: ZProd = ZProd { zeros: 0, log: 0.0 };

    fn mul(self, f: f64) -> ZProd {
        if f == 0.0 {
            ZProd { zeros: self.zeros + 1, log: self.log }
        } else {
            ZProd { zeros: self.zeros, log: self.log + f.ln() }
        }
    }

    fn div(self, f: f64) -> ZProd {
        if f == 0.0 {
            ZProd { zeros: self.zeros - 1, log: self.log }
        } else {
            ZProd { zeros: self.zeros, log: self.log - f.ln() }
        }
    }

    /// Value scaled by exp(-shift).
    fn scaled(self, shift: f64) -> f64 {
        if self.zeros > 0 {
            0.0
        } else {
            (self.log - shift).exp()
        }
    }
}

/// The answer sets of P_y projected onto the X atoms: each entry is a
/// sorted, distinct set of X indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LossCircuit {
    pub example: String,
    pub size: usize,
    pub sets: Vec<Vec<u32>>,
}

impl LossCircuit {
    pub fn new(example: impl Into<String>, size: usize, mut sets: Vec<Vec<u32>>) -> Self {
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
        }
        sets.sort();
        sets.dedup();
        LossCircuit { example: example.into(), size, sets }
    }
}

struct Weights {
    entries: Vec<ZProd>,
    shift: f64,
    /// Σ_A w_A exp(-shift).
    total: f64,
}

fn weights(c: &LossCircuit, p: &[f64]) -> Weights {
    let base = p.iter().fold(ZProd::ONE, |acc, &x| acc.mul(1.0 - x));
    let entries: Vec<ZProd> = c
        .sets
        .iter()
        .map(|a| a.iter().fold(base, |acc, &i| acc.div(1.0 - p[i as usize]).mul(p[i as usize])))
        .collect();
    let shift = entries.iter().filter(|e| e.zeros == 0).map(|e| e.log).fold(f64::NEG_INFINITY, f64::max);
    let total = if shift.is_finite() { entries.iter().map(|e| e.scaled(shift)).sum() } else { 0.0 };
    Weights { entries, shift, total }
}

/// −log Σ_{A} Π_{i∈A} p_i Π_{i∈X∖A} (1 − p_i). Infinite when no answer set
/// has positive probability.
pub fn semantic_loss(c: &LossCircuit, p: &[f64]) -> f64 {
    assert_eq!(p.len(), c.size, "probability vector does not match the circuit");
    let w = weights(c, p);
    if w.total <= 0.0 {
        return f64::INFINITY;
    }
    -(w.shift + w.total.ln())
}

/// Loss and ∂L/∂p_i for every X atom. `None` when the loss is infinite.
pub fn semantic_loss_grad(c: &LossCircuit, p: &[f64]) -> Option<(f64, Vec<f64>)> {
    assert_eq!(p.len(), c.size, "probability vector does not match the circuit");
    let w = weights(c, p);
    if w.total <= 0.0 {
        return None;
    }
    let n = p.len();
    // Σ over entries containing x of w_A with the p_x factor removed, and
    // Σ over entries containing x of w_A itself.
    let mut with_removed = vec![0.0; n];
    let mut containing = vec![0.0; n];
    for (a, e) in c.sets.iter().zip(&w.entries) {
        let v = e.scaled(w.shift);
        for &i in a {
            let i = i as usize;
            containing[i] += v;
            with_removed[i] += e.div(p[i]).scaled(w.shift);
        }
    }
    let mut grad = vec![0.0; n];
    for x in 0..n {
        let q = 1.0 - p[x];
        let rest = w.total - containing[x];
        let without = if q > 0.0 && rest > 1e-6 * w.total {
            rest / q
        } else {
            // Exact leave-one-out over the entries not containing x.
            c.sets
                .iter()
                .zip(&w.entries)
                .filter(|(a, _)| a.binary_search(&(x as u32)).is_err())
                .map(|(_, e)| e.div(q).scaled(w.shift))
                .sum()
        };
        grad[x] = -(with_removed[x] - without) / w.total;
    }
    Some((-(w.shift + w.total.ln()), grad))
}

/// Backpropagates ∂L/∂p through p = softmax(logits).
pub fn softmax_backward(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(pi, gi)| pi * (gi - dot)).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
