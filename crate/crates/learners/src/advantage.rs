use crate::config::GaeMode;

/// `delta_o = r_o + gamma V(o+1) - V(o)`, with `last_value` standing in for
/// `V(O+1)`.
pub fn td_errors(rewards: &[f64], values: &[f64], last_value: f64, gamma: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len());
    (0..rewards.len())
        .map(|o| {
            let next = values.get(o + 1).copied().unwrap_or(last_value);
            rewards[o] + gamma * next - values[o]
        })
        .collect()
}

/// Per-step advantages. In [`GaeMode::Printed`] step `o` gets
/// `sum_{j>=o} (gamma lambda)^(j-o+1) delta_j`, so the first entry is the
/// trajectory-level estimate `sum_o (gamma lambda)^o delta_o`.
pub fn gae(deltas: &[f64], gamma: f64, lambda: f64, mode: GaeMode) -> Vec<f64> {
    let gl = gamma * lambda;
    let mut out = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for o in (0..deltas.len()).rev() {
        acc = match mode {
            GaeMode::Printed => gl * (deltas[o] + acc),
            GaeMode::Standard => deltas[o] + gl * acc,
        };
        out[o] = acc;
    }
    out
}

/// Trajectory-level advantage `sum_{o=1..O} (gamma lambda)^o delta_o`.
pub fn scalar_advantage(deltas: &[f64], gamma: f64, lambda: f64) -> f64 {
    gae(deltas, gamma, lambda, GaeMode::Printed).first().copied().unwrap_or(0.0)
}

/// Discounted return-to-go, bootstrapped with `last_value`.
pub fn discounted_returns(rewards: &[f64], last_value: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = last_value;
    for o in (0..rewards.len()).rev() {
        acc = rewards[o] + gamma * acc;
        out[o] = acc;
    }
    out
}

/// The clipping function: `(1 + eps) A` for `A >= 0`, `(1 - eps) A` otherwise.
pub fn clip_bound(eps: f64, adv: f64) -> f64 {
    if adv >= 0.0 {
        (1.0 + eps) * adv
    } else {
        (1.0 - eps) * adv
    }
}

/// `min(ratio A, clip_bound(eps, A))`.
pub fn clipped_objective(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(clip_bound(eps, adv))
}

/// Shifts to zero mean and scales to unit population std; a constant input
/// only loses its mean.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 1e-12 { sd } else { 1.0 };
    xs.iter_mut().for_each(|x| *x = (*x - mean) / sd);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_weighting_examples() {
        assert_eq!(scalar_advantage(&[0.0; 5], 0.99, 0.99), 0.0);
        assert_eq!(scalar_advantage(&[1.0, 1.0], 1.0, 0.5), 0.75);
        let per = gae(&[1.0, 1.0], 1.0, 0.5, GaeMode::Printed);
        assert_eq!(per, vec![0.75, 0.5]);
        let std = gae(&[1.0, 1.0], 1.0, 0.5, GaeMode::Standard);
        assert_eq!(std, vec![1.5, 1.0]);
    }

    #[test]
    fn constant_value_telescopes() {
        let d = td_errors(&[0.3; 4], &[2.0; 4], 2.0, 1.0);
        assert!(d.iter().all(|&x| (x - 0.3).abs() < 1e-15));
    }

    #[test]
    fn clipped_examples() {
        assert_eq!(clipped_objective(1.0, 0.7, 0.2), 0.7);
        assert_eq!(clipped_objective(1.0, -0.7, 0.2), -0.7);
        assert!((clipped_objective(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn returns_bootstrap() {
        let g = discounted_returns(&[1.0, 1.0], 10.0, 0.5);
        assert_eq!(g, vec![1.0 + 0.5 * (1.0 + 5.0), 6.0]);
    }
}
