//! Populates a repository with data objects following the demo content models.

use std::fmt;
use std::str::FromStr;

use dorepo_core::demo::{self, ObjectBuilder, StubEndpoints};
use dorepo_core::{ObjectKind, Pid, Repository, Store};

use crate::HarnessError;

pub const SEED_NAMESPACE: &str = "demo";
pub const SEED_PRINCIPAL: &str = "harness";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContentModel {
    /// Four resolutions served through the echo stub.
    A,
    /// One wavelet-style file cut down by the resizer stub.
    B,
    /// One image behind the watermarker.
    W,
}

impl ContentModel {
    pub const ALL: [ContentModel; 3] = [ContentModel::A, ContentModel::B, ContentModel::W];

    pub fn tag(self) -> &'static str {
        match self {
            ContentModel::A => "a",
            ContentModel::B => "b",
            ContentModel::W => "w",
        }
    }

    /// Label prefix of seeded objects, e.g. `seed-a-`.
    pub fn label_prefix(self) -> String {
        format!("seed-{}-", self.tag())
    }

    pub fn of_label(label: &str) -> Option<ContentModel> {
        Self::ALL.into_iter().find(|m| label.starts_with(&m.label_prefix()))
    }

    /// Surrogates the model's objects depend on, bdef first.
    pub fn surrogates(self) -> [&'static str; 2] {
        match self {
            ContentModel::A => [demo::IMAGE_BDEF, demo::MODEL_A_BMECH],
            ContentModel::B => [demo::IMAGE_BDEF, demo::MODEL_B_BMECH],
            ContentModel::W => [demo::WATERMARK_BDEF, demo::WATERMARK_BMECH],
        }
    }

    fn object(self, pid: &Pid, label: &str) -> ObjectBuilder {
        let pid = pid.to_string();
        match self {
            ContentModel::A => demo::model_a_object(&pid, label),
            ContentModel::B => demo::model_b_object(&pid, label),
            ContentModel::W => demo::watermark_object(&pid, label),
        }
    }
}

impl FromStr for ContentModel {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarnessError::Mix(format!("unknown content model {s:?}; expected a, b or w")))
    }
}

impl fmt::Display for ContentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Parses `name:weight,name:weight`; a bare name has weight 1. Weights must
/// be positive and names distinct.
pub fn parse_weights<T: FromStr<Err = HarnessError> + PartialEq>(s: &str) -> Result<Vec<(T, u32)>, HarnessError> {
    let mut out: Vec<(T, u32)> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, weight) = match part.split_once(':') {
            Some((n, w)) => {
                let w: u32 = w
                    .trim()
                    .parse()
                    .map_err(|_| HarnessError::Mix(format!("weight {w:?} is not a whole number")))?;
                (n.trim(), w)
            }
            None => (part, 1),
        };
        if weight == 0 {
            return Err(HarnessError::Mix(format!("weight of {name} must be positive")));
        }
        let item: T = name.parse()?;
        if out.iter().any(|(t, _)| *t == item) {
            return Err(HarnessError::Mix(format!("{name} appears twice")));
        }
        out.push((item, weight));
    }
    if out.is_empty() {
        return Err(HarnessError::Mix("mix is empty".into()));
    }
    Ok(out)
}

/// Weighted content-model mix. Object `i` gets the model at position
/// `i mod total` of the expanded weight list, so assignment is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMix(Vec<(ContentModel, u32)>);

impl ModelMix {
    pub fn new(weights: Vec<(ContentModel, u32)>) -> Result<Self, HarnessError> {
        if weights.is_empty() || weights.iter().any(|(_, w)| *w == 0) {
            return Err(HarnessError::Mix("weights must be positive".into()));
        }
        Ok(Self(weights))
    }

    pub fn model_for(&self, i: u64) -> ContentModel {
        let total: u64 = self.0.iter().map(|(_, w)| u64::from(*w)).sum();
        let mut slot = i % total;
        for (m, w) in &self.0 {
            if slot < u64::from(*w) {
                return *m;
            }
            slot -= u64::from(*w);
        }
        unreachable!("slot is below the weight total")
    }

    pub fn models(&self) -> impl Iterator<Item = ContentModel> + '_ {
        self.0.iter().map(|(m, _)| *m)
    }
}

impl Default for ModelMix {
    fn default() -> Self {
        Self(vec![(ContentModel::A, 1), (ContentModel::B, 1), (ContentModel::W, 1)])
    }
}

impl FromStr for ModelMix {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(parse_weights(s)?)
    }
}

impl fmt::Display for ModelMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(m, w)| format!("{m}:{w}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SeedReport {
    /// Surrogates ingested by this run.
    pub surrogates: Vec<Pid>,
    pub objects: Vec<(Pid, ContentModel)>,
}

impl SeedReport {
    pub fn count(&self, model: ContentModel) -> usize {
        self.objects.iter().filter(|(_, m)| *m == model).count()
    }
}

/// Ingests the surrogates the mix's models need (even for `n == 0`), then
/// `n` data objects labelled `seed-<model>-<k>`. PIDs follow the namespace counter, so a fresh
/// repository gets `demo:1..=n`. Ingest runs on `workers` threads.
pub fn seed_repository(
    repo: &Repository,
    stubs: &StubEndpoints,
    n: u64,
    mix: &ModelMix,
    workers: usize,
) -> Result<SeedReport, HarnessError> {
    let existing = repo.store().list_objects(Some(ObjectKind::Data), None).len();
    if existing > 0 {
        return Err(HarnessError::NotEmpty(existing));
    }
    let mut report = SeedReport::default();

    let mut needed: Vec<&str> = mix.models().flat_map(|m| m.surrogates()).collect();
    // "bdef:" sorts before "bmech:"
    needed.sort();
    needed.dedup();
    let all = demo::surrogates(stubs);
    for pid in needed {
        let builder = all.iter().find(|b| b.pid().to_string() == pid).expect("every model surrogate is a demo surrogate");
        if !repo.store().contains(builder.pid()) {
            let pid = repo.ingest(&builder.clone().document(false), SEED_PRINCIPAL, "seed surrogates")?;
            report.surrogates.push(pid);
        }
    }

    let first = repo.store().registry().last_issued(SEED_NAMESPACE)? + 1;
    let workers = workers.clamp(1, 64) as u64;
    let results: Vec<Result<Vec<(Pid, ContentModel)>, HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut done = Vec::new();
                    let mut i = w;
                    while i < n {
                        let model = mix.model_for(i);
                        let pid = Pid::new(SEED_NAMESPACE, first + i)?;
                        let label = format!("{}{}", model.label_prefix(), i + 1);
                        let doc = model.object(&pid, &label).document(false);
                        repo.ingest(&doc, SEED_PRINCIPAL, "seed")?;
                        done.push((pid, model));
                        i += workers;
                    }
                    Ok(done)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("seed worker panicked")).collect()
    });
    for r in results {
        report.objects.extend(r?);
    }
    report.objects.sort_by(|a, b| a.0.cmp(&b.0));
    log::info!("seeded {} objects ({mix})", report.objects.len());
    Ok(report)
}

/// Seeded data objects in the repository, by PID.
pub fn seeded_objects(store: &Store) -> Vec<(Pid, ContentModel)> {
    store
        .list_objects(Some(ObjectKind::Data), Some("seed-"))
        .into_iter()
        .filter_map(|e| ContentModel::of_label(&e.label).map(|m| (e.pid, m)))
        .collect()
}
