//! Wireless edge link model: Rayleigh channel draws, OFDMA uplink and
//! downlink rates, waterfall packet error rates, edge processing delay and
//! the round-trip delay that combines them. CPU load comes from a bounded
//! random walk or a replayed CSV trace.

mod calibrate;
mod cpu;
mod error;
mod link;
mod params;

pub use calibrate::{calibrate_z, mean_uplink_per};
pub use cpu::{step_cpu_load, CpuLoadState, CpuProcess, CpuTrace, CpuWalk};
pub use error::{Result, WirelessError};
pub use link::{
    downlink_per, downlink_rate, processing_delay, round_trip_delay, sample_channel, uplink_per,
    uplink_rate, ChannelState, Delay,
};
pub use params::{dbm_to_watts, watts_to_dbm, LoadMode, NetworkConfig, NetworkParams, DEFAULT_Z};
