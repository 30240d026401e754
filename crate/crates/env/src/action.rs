use serde::{Deserialize, Serialize};

use crate::error::{EnvError, Result};

/// Floor applied inside the logarithm of the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// One step's decision for all `K` users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceAction {
    /// Continuous block shares, summing to 1.
    pub rho: Vec<f64>,
    /// Owner of each uplink block.
    pub blocks: Vec<usize>,
    /// Transmit powers in W.
    pub p: Vec<f64>,
    /// Compute shares, summing to 1.
    pub tau: Vec<f64>,
    /// Predicted class distribution per user.
    pub phi_out: Vec<Vec<f64>>,
}

impl ResourceAction {
    pub fn users(&self) -> usize {
        self.p.len()
    }

    /// Block indicator row for user `k`.
    pub fn rho_row(&self, k: usize) -> Vec<bool> {
        self.blocks.iter().map(|&o| o == k).collect()
    }

    pub fn block_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.users()];
        for &o in &self.blocks {
            c[o] += 1;
        }
        c
    }

    /// Checks every feasibility constraint of the allocation.
    pub fn validate(&self, m: usize, p_max: f64) -> Result<()> {
        let k = self.users();
        let bad = |s: String| Err(EnvError::Action(s));
        if k == 0 || self.rho.len() != k || self.tau.len() != k {
            return bad(format!("expected {k} entries in rho, p and tau"));
        }
        if self.blocks.len() != m || self.blocks.iter().any(|&o| o >= k) {
            return bad(format!("need {m} blocks each owned by a user < {k}"));
        }
        for (name, v) in [("rho", &self.rho), ("tau", &self.tau)] {
            let s: f64 = v.iter().sum();
            if (s - 1.0).abs() > 1e-9 || v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return bad(format!("{name} {v:?} is not on the simplex"));
            }
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=p_max).contains(*p)) {
            return bad(format!("power {p} outside [0, {p_max}]"));
        }
        if !self.phi_out.is_empty() {
            if self.phi_out.len() != k {
                return bad("one class distribution per user".into());
            }
            for row in &self.phi_out {
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 || row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return bad(format!("class distribution {row:?} does not sum to 1"));
                }
            }
        }
        Ok(())
    }
}

/// Numerically stable softmax. `+inf` entries share all mass, all `-inf`
/// gives the uniform vector, and NaN counts as 0.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let xs: Vec<f64> = xs.iter().map(|&x| if x.is_nan() { 0.0 } else { x }).collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::INFINITY {
        let n = xs.iter().filter(|&&x| x == m).count() as f64;
        return xs.iter().map(|&x| if x == m { 1.0 / n } else { 0.0 }).collect();
    }
    if m == f64::NEG_INFINITY {
        return vec![1.0 / xs.len() as f64; xs.len()];
    }
    let e: Vec<f64> = xs.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x.is_nan() {
        0.5
    } else if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Largest-remainder rounding of `shares * m` to integers summing to `m`.
/// Ties in the fractional part go to the lower index.
pub fn largest_remainder(shares: &[f64], m: usize) -> Vec<usize> {
    let quotas: Vec<f64> = shares.iter().map(|s| s * m as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    // floors can only overshoot through rounding noise in the shares
    let mut left = m.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    let mut over = counts.iter().sum::<usize>().saturating_sub(m);
    for &i in order.iter().rev() {
        while over > 0 && counts[i] > 0 {
            counts[i] -= 1;
            over -= 1;
        }
    }
    counts
}

/// Maps an unconstrained vector `[rho logits | power logits | tau logits]`
/// of length `3K` onto a feasible action: softmax shares, `P_max * sigmoid`
/// powers, and contiguous block ranges by largest remainder.
pub fn project_action(raw: &[f64], class_probs: Vec<Vec<f64>>, m: usize, p_max: f64) -> ResourceAction {
    assert!(!raw.is_empty() && raw.len() % 3 == 0, "raw action length must be 3K");
    let k = raw.len() / 3;
    let rho = softmax(&raw[..k]);
    let p = raw[k..2 * k].iter().map(|&x| p_max * sigmoid(x)).collect();
    let tau = softmax(&raw[2 * k..]);
    let counts = largest_remainder(&rho, m);
    let blocks = counts
        .iter()
        .enumerate()
        .flat_map(|(user, &c)| std::iter::repeat_n(user, c))
        .collect();
    ResourceAction {
        rho,
        blocks,
        p,
        tau,
        phi_out: class_probs,
    }
}

/// Index of the largest probability, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `(1 - eps_star) * [argmax probs == label]`.
pub fn classification_indicator(probs: &[f64], label: usize, eps_star: f64) -> f64 {
    if argmax(probs) == label {
        1.0 - eps_star
    } else {
        0.0
    }
}

/// `-(1 - eps_star) * ln(probs[label])`, the log floored at [`LOG_FLOOR`].
pub fn modified_ce_loss(probs: &[f64], label: usize, eps_star: f64) -> f64 {
    -(1.0 - eps_star) * probs[label].max(LOG_FLOOR).ln()
}

/// `[D <= D_max]`; infinite delays never satisfy it.
pub fn delay_indicator(d: f64, d_max: f64) -> f64 {
    if d <= d_max {
        1.0
    } else {
        0.0
    }
}
