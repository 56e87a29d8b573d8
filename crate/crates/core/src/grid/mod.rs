//! Quasi-steady-state grid model.

pub mod case;
pub mod dispatch;
pub mod network;
pub mod runner;
pub mod sim;

pub use case::{Branch, Bus, CaseError, Generator, GridCase, Substation, SystemParams};
pub use dispatch::{dispatch_units, DispatchError, DispatchSolution, DroopUnit};
pub use network::{find_islands, Island, IslandIssue, Statuses, Topology};
pub use runner::{spawn_simulator, Pacing, RunnerConfig, SimHandle, TickObserver, DEFAULT_TICK};
pub use sim::{CommandEffect, GridState, SetpointKind, SimCommand, SimError, Simulator};
