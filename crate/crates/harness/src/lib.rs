//! Test bench for the repository: stub mechanism services, repository
//! seeding, fixture generation and a load generator.

pub mod cli;
pub mod load;
pub mod seed;
pub mod stubs;

use std::path::{Path, PathBuf};

use dorepo_core::demo::{self, StubEndpoints};

pub use load::{run_load, LoadProfile, LoadReport, RequestKind, Sample};
pub use seed::{seed_repository, seeded_objects, ContentModel, ModelMix, SeedReport};
pub use stubs::StubServers;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid mix: {0}")]
    Mix(String),
    #[error("invalid load profile: {0}")]
    Profile(String),
    #[error("repository already holds {0} data objects; seeding needs an empty one")]
    NotEmpty(usize),
    #[error(transparent)]
    Repository(#[from] dorepo_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Writes every demo fixture into `dir`; returns the paths in ingest order.
pub fn write_fixtures(dir: &Path, stubs: &StubEndpoints) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    demo::fixture_documents(stubs)
        .into_iter()
        .map(|(name, doc)| {
            let path = dir.join(name);
            std::fs::write(&path, doc)?;
            Ok(path)
        })
        .collect()
}
