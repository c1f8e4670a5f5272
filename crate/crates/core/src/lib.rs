//! Crosstalk-aware approximation of hardware-efficient ansatze.
//!
//! The pipeline characterizes pairwise cx crosstalk on a device with
//! simultaneous randomized benchmarking ([`rb`]), approximates an ansatz's
//! entangling layer into parallel groups and reschedules it under a
//! crosstalk/decoherence objective ([`scheduler`]), assembles the resulting
//! circuit families ([`ansatz`]) and evaluates them ([`metrics`], [`vqa`]).

pub mod ansatz;
pub mod circuit;
pub mod clifford;
pub mod device;
pub mod error;
pub mod metrics;
pub mod rb;
pub mod rng;
pub mod scheduler;
pub mod simulator;
pub mod vqa;

pub use circuit::{Circuit, DagLayering, Gate, GateKind, Param};
pub use device::{CouplingMap, CrosstalkTable, DeviceModel, Edge, GateCal, QubitCal};
pub use error::{Error, Result};
pub use simulator::{NoiseMode, NoiseSpec, ShotResult, StateVector};
