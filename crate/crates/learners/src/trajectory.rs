use bciqoe_eeg::EegSegment;

/// One environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: Vec<f64>,
    /// Unconstrained action before projection.
    pub raw: Vec<f64>,
    /// Classes chosen by a categorical head; empty when a classifier decides.
    pub classes: Vec<usize>,
    /// Log-density of `(raw, classes)` under the sampling policy.
    pub log_prob: f64,
    pub value: f64,
    /// Per-user QoE.
    pub q: Vec<f64>,
    /// Mean QoE over users.
    pub reward: f64,
    pub eps_star: f64,
    /// Windows as received at the server.
    pub received: Vec<EegSegment>,
    pub labels: Vec<usize>,
    pub predicted: Vec<usize>,
    /// Round-trip delays in seconds, infinite when never delivered.
    pub delays: Vec<f64>,
    pub psi: Vec<f64>,
    /// Per-user classification term of the QoE.
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    /// Critic value of the observation after the last step; 0 when the
    /// data ran out.
    pub last_value: f64,
    pub done: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    pub fn mean_reward(&self) -> f64 {
        mean(self.steps.iter().map(|s| s.reward))
    }

    /// Fraction of user-steps whose argmax matched the label.
    pub fn accuracy(&self) -> f64 {
        mean(self.steps.iter().flat_map(|s| {
            s.labels
                .iter()
                .zip(&s.predicted)
                .map(|(l, p)| if l == p { 1.0 } else { 0.0 })
        }))
    }

    /// Mean over finite delays.
    pub fn mean_delay(&self) -> f64 {
        mean(self.steps.iter().flat_map(|s| s.delays.iter().copied().filter(|d| d.is_finite())))
    }

    /// Mean classification term over user-steps.
    pub fn mean_phi(&self) -> f64 {
        mean(self.steps.iter().flat_map(|s| s.phi.iter().copied()))
    }

    /// Fraction of user-steps meeting the delay deadline.
    pub fn delay_ok(&self) -> f64 {
        mean(self.steps.iter().flat_map(|s| s.psi.iter().copied()))
    }
}

pub(crate) fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}
