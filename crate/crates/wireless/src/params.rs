use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts watts to dBm. Non-positive input maps to `-inf`.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// How the measured CPU load `u_n` enters the processing delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LoadMode {
    /// `d = 1/(tau * u * upsilon)`: the load multiplies capacity directly.
    #[default]
    AsWritten,
    /// `d = 1/(tau * (1 - u) * upsilon)`: only the idle fraction is usable.
    AvailableFraction,
}

/// Radio and compute constants in SI units (W, Hz, s, bits).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// Uplink resource blocks.
    pub m: usize,
    pub b_u: f64,
    pub b_d: f64,
    /// Noise power spectral density, W/Hz.
    pub n0: f64,
    pub i_m: f64,
    pub i_d: f64,
    pub p_b: f64,
    pub p_max: f64,
    /// Waterfall threshold of the packet error model.
    pub z: f64,
    pub sigma_u2: f64,
    pub sigma_d2: f64,
    /// CPU capacity, cycles per second.
    pub upsilon: f64,
    pub d_max: f64,
    pub l_u: f64,
    pub l_d: f64,
    /// CPU count at the edge server.
    pub n_cpus: usize,
    pub load_mode: LoadMode,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("B_U_hz", self.b_u),
            ("B_D_hz", self.b_d),
            ("N0", self.n0),
            ("I_m", self.i_m),
            ("I_D", self.i_d),
            ("P_B", self.p_b),
            ("P_max", self.p_max),
            ("z", self.z),
            ("sigma_U2", self.sigma_u2),
            ("sigma_D2", self.sigma_d2),
            ("upsilon_hz", self.upsilon),
            ("D_max_s", self.d_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.m == 0 {
            return Err(invalid("M", "need at least one resource block"));
        }
        if self.n_cpus == 0 {
            return Err(invalid("N", "need at least one CPU"));
        }
        for (name, v) in [("l_U_bits", self.l_u), ("l_D_bits", self.l_d)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Uplink SINR denominator `I_m + B_U * N0`.
    pub fn uplink_noise(&self) -> f64 {
        self.i_m + self.b_u * self.n0
    }

    pub fn downlink_noise(&self) -> f64 {
        self.i_d + self.b_d * self.n0
    }
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkConfig::default()
            .to_params()
            .expect("default network config is valid")
    }
}

/// File-facing network settings, keyed by the usual symbols and in
/// engineering units (dBm, Hz, seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "B_U_hz")]
    pub b_u_hz: f64,
    #[serde(rename = "B_D_hz")]
    pub b_d_hz: f64,
    #[serde(rename = "N0_dbm_hz")]
    pub n0_dbm_hz: f64,
    #[serde(rename = "I_m_dbm")]
    pub i_m_dbm: f64,
    #[serde(rename = "I_D_dbm")]
    pub i_d_dbm: f64,
    #[serde(rename = "P_B_w")]
    pub p_b_w: f64,
    #[serde(rename = "P_max_dbm")]
    pub p_max_dbm: f64,
    pub z: f64,
    /// Defaults to `B_U * N0` when absent.
    #[serde(rename = "sigma_U2_w", skip_serializing_if = "Option::is_none")]
    pub sigma_u2_w: Option<f64>,
    /// Defaults to `B_D * N0` when absent.
    #[serde(rename = "sigma_D2_w", skip_serializing_if = "Option::is_none")]
    pub sigma_d2_w: Option<f64>,
    pub upsilon_hz: f64,
    #[serde(rename = "D_max_s")]
    pub d_max_s: f64,
    #[serde(rename = "l_U_bits")]
    pub l_u_bits: f64,
    #[serde(rename = "l_D_bits")]
    pub l_d_bits: f64,
    #[serde(rename = "N")]
    pub n_cpus: usize,
    pub load_mode: LoadMode,
    /// Mean of the exponential channel power gain.
    pub fading_scale: f64,
}

/// Waterfall threshold that puts the mean uplink PER near 0.5 at -20 dBm
/// under unit-mean Rayleigh fading (see [`crate::calibrate_z`]).
pub const DEFAULT_Z: f64 = 1.0e9;

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            m: 10,
            b_u_hz: 1e6,
            b_d_hz: 20e6,
            n0_dbm_hz: -174.0,
            i_m_dbm: -10.0,
            i_d_dbm: -10.0,
            p_b_w: 1.0,
            p_max_dbm: 20.0,
            z: DEFAULT_Z,
            sigma_u2_w: None,
            sigma_d2_w: None,
            upsilon_hz: 2.3e9,
            d_max_s: 0.01,
            l_u_bits: 16384.0,
            l_d_bits: 1e6,
            n_cpus: 8,
            load_mode: LoadMode::AsWritten,
            fading_scale: 1.0,
        }
    }
}

impl NetworkConfig {
    pub fn to_params(&self) -> Result<NetworkParams> {
        if !(self.fading_scale.is_finite() && self.fading_scale > 0.0) {
            return Err(invalid("fading_scale", "must be positive"));
        }
        let n0 = dbm_to_watts(self.n0_dbm_hz);
        let params = NetworkParams {
            m: self.m,
            b_u: self.b_u_hz,
            b_d: self.b_d_hz,
            n0,
            i_m: dbm_to_watts(self.i_m_dbm),
            i_d: dbm_to_watts(self.i_d_dbm),
            p_b: self.p_b_w,
            p_max: dbm_to_watts(self.p_max_dbm),
            z: self.z,
            sigma_u2: self.sigma_u2_w.unwrap_or(self.b_u_hz * n0),
            sigma_d2: self.sigma_d2_w.unwrap_or(self.b_d_hz * n0),
            upsilon: self.upsilon_hz,
            d_max: self.d_max_s,
            l_u: self.l_u_bits,
            l_d: self.l_d_bits,
            n_cpus: self.n_cpus,
            load_mode: self.load_mode,
        };
        params.validate()?;
        Ok(params)
    }
}
