//! Concrete problem instances with their reference oracles.

mod energy;
mod illustrative;
mod testbed;

pub use energy::{build_energy_community, EnergyCommunity, EnergyConfig, EnergyIndex, LineConfig};
pub use illustrative::{
    build_illustrative, check_convergence, ConvergenceReport, Illustrative, IllustrativeConfig, InducedMap, Regime,
    RegimeRecord, RegimeTrace, SequenceGenerator,
};
pub use testbed::{build_monotone_testbed, Testbed, TestbedConfig};
