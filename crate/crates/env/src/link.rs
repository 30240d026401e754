use bciqoe_wireless::{
    downlink_rate, processing_delay, round_trip_delay, uplink_per, uplink_rate, Delay, NetworkParams,
};

use crate::action::{delay_indicator, ResourceAction};
use crate::error::{EnvError, Result};

/// Everything the network does to one step's transmissions, before any
/// classification happens.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub eps: Vec<f64>,
    /// Worst uplink error rate over users.
    pub eps_star: f64,
    pub r_u: Vec<f64>,
    pub r_d: Vec<f64>,
    pub processing: Vec<Delay>,
    pub delay: Vec<Delay>,
    pub psi: Vec<f64>,
}

/// Evaluates rates, error rates and delays for gains `h` when every user is
/// served by a CPU at load `u`.
pub fn link_outcome(net: &NetworkParams, h: &[f64], u: f64, action: &ResourceAction) -> Result<LinkOutcome> {
    let k = action.users();
    if h.len() != k {
        return Err(EnvError::Action(format!("{k} users but {} channel gains", h.len())));
    }
    let mut out = LinkOutcome {
        eps: Vec::with_capacity(k),
        eps_star: 0.0,
        r_u: Vec::with_capacity(k),
        r_d: Vec::with_capacity(k),
        processing: Vec::with_capacity(k),
        delay: Vec::with_capacity(k),
        psi: Vec::with_capacity(k),
    };
    for (user, &hk) in h.iter().enumerate() {
        let rho = action.rho_row(user);
        let p = action.p[user];
        let r_u = uplink_rate(&rho, p, hk, net)?;
        let r_d = downlink_rate(hk, net);
        let eps = uplink_per(&rho, p, hk, net)?;
        let d = processing_delay(action.tau[user], u, net)?;
        let total = round_trip_delay(net.l_u, r_u, d, net.l_d, r_d);
        out.eps_star = out.eps_star.max(eps);
        out.eps.push(eps);
        out.r_u.push(r_u);
        out.r_d.push(r_d);
        out.processing.push(d);
        out.delay.push(total);
        out.psi.push(delay_indicator(total.seconds_or_inf(), net.d_max));
    }
    Ok(out)
}
