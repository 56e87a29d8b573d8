//! Core of the gridwire SCADA testbed: the DNP3 codec, the quasi-steady-state
//! grid simulator and the outstation point map.

pub mod grid;
pub mod points;
pub mod proto;
