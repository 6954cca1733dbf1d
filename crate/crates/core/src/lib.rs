//! Interactive search ranking with deep Q-learning over result slates and
//! sentence-level user feedback.

pub mod augment;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod context;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod qnet;
pub mod replay;
pub mod service;
pub mod state;
pub mod synth;
pub mod trainer;
pub mod user_model;

pub use error::{Error, Result};
