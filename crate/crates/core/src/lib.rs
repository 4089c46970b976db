//! Multi-agent protection of a distribution network with distributed
//! generation: a fault engine, a mode-checked message fabric, three layers of
//! agents, an offline setting-group study and a discrete-event simulator
//! binding them together.

pub mod grid;
pub mod comms;
pub mod time;
pub mod agents;
pub mod adaptive;
pub mod sim;
pub mod cli;
