//! Simulator for multi-point wireless energy transmission.
//!
//! Compares a single transmitter (SP), several transmitters on one carrier
//! (MP) and several transmitters on slightly shifted carriers (MPCSD), whose
//! interference cross terms average out over the beat period.

pub mod coverage;
pub mod propagation;
pub mod run;
pub mod scenario;
pub mod schemes;
pub mod spectrum;
pub mod units;
