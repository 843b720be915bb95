//! Named fault-injection points for crash-consistency tests.
//!
//! A failpoint is armed for files under one directory with a number of hits;
//! each matching hit decrements it and reports a failure until it reaches
//! zero. Scoping by directory keeps concurrently running tests apart.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use parking_lot::Mutex;

/// Fires between writing a temp file and renaming it over its target.
pub const BEFORE_RENAME: &str = "before_rename";

type Armed = Vec<(&'static str, PathBuf, u32)>;

fn armed() -> &'static Mutex<Armed> {
    static ARMED: OnceLock<Mutex<Armed>> = OnceLock::new();
    ARMED.get_or_init(Default::default)
}

pub fn arm(name: &'static str, under: &Path, hits: u32) {
    let mut list = armed().lock();
    list.retain(|(n, p, _)| !(*n == name && p == under));
    list.push((name, under.to_path_buf(), hits));
}

pub fn disarm(name: &'static str, under: &Path) {
    armed().lock().retain(|(n, p, _)| !(*n == name && p == under));
}

pub(crate) fn hit(name: &str, path: &Path) -> bool {
    let mut list = armed().lock();
    for (n, under, hits) in list.iter_mut() {
        if *n == name && path.starts_with(under.as_path()) && *hits > 0 {
            *hits -= 1;
            return true;
        }
    }
    false
}
