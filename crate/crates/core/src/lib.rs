pub mod audio;
pub mod cli;
pub mod embeddings;
pub mod metrics;
pub mod mushra;
pub mod separability;
pub mod service;
