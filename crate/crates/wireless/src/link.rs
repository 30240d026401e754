use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, WirelessError};
use crate::params::{LoadMode, NetworkParams};

/// Per-user channel power gains for one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub h: Vec<f64>,
}

/// Draws `k` i.i.d. Rayleigh power gains, i.e. exponential with mean `scale`.
pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, k: usize, scale: f64) -> Result<ChannelState> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid("fading_scale", format!("must be positive, got {scale}")));
    }
    let exp = Exp::new(1.0).expect("unit rate");
    let h = (0..k).map(|_| scale * exp.sample(rng)).collect();
    Ok(ChannelState { h })
}

fn check_power(p: f64) -> Result<()> {
    if p < 0.0 || p.is_nan() {
        return Err(WirelessError::NegativePower(p));
    }
    Ok(())
}

/// Uplink rate in bits/s over the blocks marked in `rho`.
pub fn uplink_rate(rho: &[bool], p: f64, h: f64, params: &NetworkParams) -> Result<f64> {
    check_power(p)?;
    let blocks = rho.iter().filter(|&&b| b).count() as f64;
    let snr = p * h / params.uplink_noise();
    Ok(blocks * params.b_u * (1.0 + snr).log2())
}

/// Downlink rate in bits/s for gain `h`.
pub fn downlink_rate(h: f64, params: &NetworkParams) -> f64 {
    let snr = params.p_b * h.max(0.0) / params.downlink_noise();
    params.b_d * (1.0 + snr).log2()
}

/// Per-block error rate `1 - exp(-z sigma^2 / (p h))`; certain loss when `p h = 0`.
fn waterfall(z: f64, sigma2: f64, ph: f64) -> f64 {
    if ph <= 0.0 {
        return 1.0;
    }
    -(-z * sigma2 / ph).exp_m1()
}

/// Uplink packet error rate: per-block rates summed over the user's blocks
/// and clamped to `[0, 1]`. No blocks means nothing is sent and nothing lost.
pub fn uplink_per(rho: &[bool], p: f64, h: f64, params: &NetworkParams) -> Result<f64> {
    check_power(p)?;
    let per_block = waterfall(params.z, params.sigma_u2, p * h);
    let blocks = rho.iter().filter(|&&b| b).count() as f64;
    Ok((blocks * per_block).clamp(0.0, 1.0))
}

pub fn downlink_per(h: f64, params: &NetworkParams) -> f64 {
    waterfall(params.z, params.sigma_d2, params.p_b * h)
}

/// A delay that may be infinite for a structural reason.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Delay {
    Finite(f64),
    /// Zero compute share: the edge server never processes the request.
    Starved,
    /// Zero link rate with a nonzero payload.
    Unreachable,
}

impl Delay {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Delay::Finite(s) => Some(s),
            _ => None,
        }
    }

    /// Seconds, with the infinite outcomes mapped to `f64::INFINITY`.
    pub fn seconds_or_inf(self) -> f64 {
        self.seconds().unwrap_or(f64::INFINITY)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Delay::Finite(_))
    }
}

/// Edge-server processing delay `1/(tau * u * upsilon)`.
///
/// Under [`LoadMode::AvailableFraction`] the idle share `1 - u` replaces `u`.
pub fn processing_delay(tau: f64, u: f64, params: &NetworkParams) -> Result<Delay> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid("tau", format!("must lie in [0, 1], got {tau}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid("u", format!("must lie in [0, 1], got {u}")));
    }
    let share = match params.load_mode {
        LoadMode::AsWritten => u,
        LoadMode::AvailableFraction => 1.0 - u,
    };
    let capacity = tau * share * params.upsilon;
    if capacity <= 0.0 {
        return Ok(Delay::Starved);
    }
    Ok(Delay::Finite(1.0 / capacity))
}

/// Round-trip delay `l_U/r_U + d + l_D/r_D`.
pub fn round_trip_delay(l_u: f64, r_u: f64, d: Delay, l_d: f64, r_d: f64) -> Delay {
    let transfer = |bits: f64, rate: f64| -> Option<f64> {
        if bits == 0.0 {
            Some(0.0)
        } else if rate > 0.0 {
            Some(bits / rate)
        } else {
            None
        }
    };
    let d = match d {
        Delay::Finite(s) => s,
        other => return other,
    };
    match (transfer(l_u, r_u), transfer(l_d, r_d)) {
        (Some(up), Some(down)) => Delay::Finite(up + d + down),
        _ => Delay::Unreachable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> NetworkParams {
        // noise terms of 1 make SNR equal p*h
        NetworkParams {
            m: 4,
            b_u: 1e6,
            b_d: 2e7,
            n0: 1e-20,
            i_m: 1.0 - 1e-14,
            i_d: 1.0 - 2e-13,
            p_b: 1.0,
            p_max: 10.0,
            z: 1.0,
            sigma_u2: 1.0,
            sigma_d2: 1.0,
            upsilon: 2.3e9,
            d_max: 0.01,
            l_u: 1e4,
            l_d: 1e5,
            n_cpus: 4,
            load_mode: LoadMode::AsWritten,
        }
    }

    #[test]
    fn uplink_rate_examples() {
        let p = unit_params();
        let r = uplink_rate(&[true, false, false, false], 1.0, 1.0, &p).unwrap();
        assert!((r - 1e6).abs() < 1e-6);
        assert_eq!(uplink_rate(&[false; 4], 1.0, 1.0, &p).unwrap(), 0.0);
        let r = uplink_rate(&[true, true, false, false], 3.0, 1.0, &p).unwrap();
        assert!((r - 4e6).abs() < 1e-6);
        assert!(uplink_rate(&[true], -1.0, 1.0, &p).is_err());
    }

    #[test]
    fn downlink_rate_examples() {
        let p = unit_params();
        assert_eq!(downlink_rate(0.0, &p), 0.0);
        assert!((downlink_rate(1.0, &p) - 2e7).abs() < 1e-5);
    }

    #[test]
    fn per_examples() {
        let p = unit_params();
        let one = [true, false, false, false];
        let e = uplink_per(&one, 1.0, 1.0 / std::f64::consts::LN_2, &p).unwrap();
        assert!((e - 0.5).abs() < 1e-15);
        let e = uplink_per(&one, 1.0, 1.0, &p).unwrap();
        assert!((e - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(uplink_per(&one, 1e12, 1.0, &p).unwrap() < 1e-11);
        assert_eq!(uplink_per(&one, 0.0, 1.0, &p).unwrap(), 1.0);
        assert_eq!(uplink_per(&[true; 4], 1.0, 1.0, &p).unwrap(), 1.0);

        assert!((downlink_per(1.0 / std::f64::consts::LN_2, &p) - 0.5).abs() < 1e-15);
        assert!((downlink_per(1.0, &p) - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert_eq!(downlink_per(0.0, &p), 1.0);
    }

    #[test]
    fn processing_delay_examples() {
        let p = unit_params();
        let d = processing_delay(1.0, 1.0, &p).unwrap().seconds().unwrap();
        assert!((d - 1.0 / 2.3e9).abs() < 1e-24);
        let d = processing_delay(0.5, 0.6, &p).unwrap().seconds().unwrap();
        assert!((d - 1.449_275_362_318_84e-9).abs() < 1e-20);
        let half = processing_delay(0.25, 0.6, &p).unwrap().seconds().unwrap();
        assert!((half / d - 2.0).abs() < 1e-12);
        assert_eq!(processing_delay(0.0, 0.5, &p).unwrap(), Delay::Starved);
        assert!(processing_delay(1.5, 0.5, &p).is_err());

        let avail = NetworkParams {
            load_mode: LoadMode::AvailableFraction,
            ..p
        };
        let d = processing_delay(0.5, 0.4, &avail).unwrap().seconds().unwrap();
        assert!((d - 1.449_275_362_318_84e-9).abs() < 1e-20);
    }

    #[test]
    fn round_trip_examples() {
        let d = round_trip_delay(1e4, 1e6, Delay::Finite(1e-3), 1e5, 2e7);
        assert!((d.seconds().unwrap() - 0.016).abs() < 1e-15);
        assert_eq!(
            round_trip_delay(0.0, 0.0, Delay::Finite(2e-3), 0.0, 0.0),
            Delay::Finite(2e-3)
        );
        assert_eq!(
            round_trip_delay(1.0, 0.0, Delay::Finite(0.0), 1.0, 1.0),
            Delay::Unreachable
        );
        assert_eq!(
            round_trip_delay(1.0, 1.0, Delay::Starved, 1.0, 1.0),
            Delay::Starved
        );
    }
}
