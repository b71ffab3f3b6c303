//! Centralized urban traffic control: route enumeration, exact street-entry
//! scheduling over a relaxed mesoscopic model, a rolling-horizon controller
//! and a queue-based micro-simulator to check the plans.

pub mod controller;
pub mod io;
pub mod microsim;
pub mod net_model;
pub mod preprocessor;
pub mod scenario;
pub mod scheduler;
