//! Host side of the entryway: file formats, the virtual door rig, scenario
//! scripts, the user registry, the chat gateway, the HTTP API and the
//! evaluation toolkit.

pub mod annotations;
pub mod api;
pub mod evalkit;
pub mod gateway;
pub mod models;
pub mod pgm;
pub mod registry;
pub mod rig;
pub mod scenario;
pub mod settings;
pub mod station;
pub mod synth;
