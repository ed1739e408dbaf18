//! Explicit finite MDP with sparse transition rows and plain value iteration.
//!
//! Used on small instances where every row can be materialized; the factored
//! solver in [`super::oracle`] is checked against it.

/// One allowed action in one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: usize,
    pub reward: f64,
    /// `(next state, probability)` pairs.
    pub row: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct FiniteMdp {
    pub choices: Vec<Vec<Choice>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViOptions {
    /// Stop once the sup-norm change between sweeps is below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Value every state starts from.
    pub initial_value: f64,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_sweeps: 100_000, initial_value: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViResult {
    pub values: Vec<f64>,
    /// Greedy action per state (lowest index on ties).
    pub policy: Vec<usize>,
    pub sweeps: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    pub converged: bool,
}

impl FiniteMdp {
    pub fn state_count(&self) -> usize {
        self.choices.len()
    }

    fn backup(&self, s: usize, values: &[f64], gamma: f64) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for c in &self.choices[s] {
            let q = c.reward + gamma * c.row.iter().map(|&(t, p)| p * values[t]).sum::<f64>();
            if q > best.0 || (q == best.0 && c.action < best.1) {
                best = (q, c.action);
            }
        }
        best
    }

    /// Jacobi value iteration: `V <- max_a [R(s,a) + gamma * sum P(s'|s,a) V(s')]`.
    pub fn value_iteration(&self, gamma: f64, opts: &ViOptions) -> ViResult {
        let n = self.state_count();
        let mut values = vec![opts.initial_value; n];
        let mut next = vec![0.0; n];
        let mut sweeps = 0;
        let mut residual = f64::INFINITY;
        while sweeps < opts.max_sweeps {
            residual = 0.0;
            for s in 0..n {
                next[s] = self.backup(s, &values, gamma).0;
                residual = f64::max(residual, (next[s] - values[s]).abs());
            }
            std::mem::swap(&mut values, &mut next);
            sweeps += 1;
            if residual < opts.tolerance {
                break;
            }
        }
        let policy = (0..n).map(|s| self.backup(s, &values, gamma).1).collect();
        ViResult { values, policy, sweeps, residual, converged: residual < opts.tolerance }
    }
}
