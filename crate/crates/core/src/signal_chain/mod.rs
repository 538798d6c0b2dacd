//! Desk-scale emulation of a sensing, communication and harvesting testbed.

pub mod fmcw;
pub mod harvester;
pub mod qpsk;

pub use fmcw::{fmcw_range, ChirpConfig, RangeEstimate, SPEED_OF_LIGHT};
pub use harvester::{
    dbm_to_watts, harvest_dc, watts_to_dbm, HarvestTrace, HarvesterConfig, LINK_BUDGET_DISTANCE_M,
    LINK_BUDGET_RX_DBM, LINK_BUDGET_TX_WATTS,
};
pub use qpsk::{qpsk_evm, qpsk_ser_theory, qpsk_symbol, QpskStats};
