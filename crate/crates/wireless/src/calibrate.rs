use crate::error::{invalid, Result};
use crate::params::NetworkParams;

const NODES: usize = 4096;

/// Mean single-block uplink PER at transmit power `p` (W) when the gain is
/// exponential with mean `scale`. Midpoint rule in probability space.
pub fn mean_uplink_per(z: f64, p: f64, sigma_u2: f64, scale: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..NODES {
        let q = (i as f64 + 0.5) / NODES as f64;
        let h = -scale * (-q).ln_1p();
        acc += -(-z * sigma_u2 / (p * h)).exp_m1();
    }
    acc / NODES as f64
}

/// Finds `z` such that the mean single-block uplink PER at power `p` equals
/// `target`. The mean is strictly increasing in `z`, so bisection on `ln z`.
pub fn calibrate_z(params: &NetworkParams, p: f64, scale: f64, target: f64) -> Result<f64> {
    if !(0.0 < target && target < 1.0) {
        return Err(invalid("target", format!("must lie in (0,1), got {target}")));
    }
    if !(p > 0.0 && scale > 0.0) {
        return Err(invalid("p", "power and fading scale must be positive"));
    }
    let f = |ln_z: f64| mean_uplink_per(ln_z.exp(), p, params.sigma_u2, scale) - target;
    // bracket generously around the scale where z*sigma2/p is order one
    let centre = (p / params.sigma_u2).ln();
    let (mut lo, mut hi) = (centre - 60.0, centre + 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
