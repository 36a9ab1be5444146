//! Wrist-worn IMU teleoperation of a differential-drive robot.
//!
//! The crate is organised as a chain of small stages:
//!
//! * [`imu`]: samples, the complementary orientation filter and the
//!   sliding signal window.
//! * [`gesture`]: template construction by lag-aligned averaging and
//!   correlation matching with a refractory period.
//! * [`command`]: the pose-to-velocity mapping and the mode state machine.
//! * [`pipeline`]: the per-sample chain that glues the three together.
//! * [`sim`]: unicycle kinematics and the scenario worlds.
//! * [`wire`]: the framed binary protocol and its routing rules.
//! * [`autopilot`], [`harness`] and [`service`]: headless runs, replay,
//!   training and the networked service.

pub mod autopilot;
pub mod cli;
pub mod command;
pub mod gesture;
pub mod harness;
pub mod imu;
pub mod pipeline;
pub mod service;
pub mod sim;
pub mod wire;
