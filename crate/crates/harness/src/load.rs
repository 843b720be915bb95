//! Closed-loop load generator: simulated users issue dissemination requests
//! over HTTP with a randomized think time between them.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::Barrier;
use std::time::{Duration, Instant};

use dorepo_core::demo;
use dorepo_core::Pid;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::seed::{parse_weights, ContentModel};
use crate::HarnessError;

/// Query value for `GetWatermarked`'s TEXT parameter.
pub const WATERMARK_TEXT: &str = "load test";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    /// `GetThumbnail` on any seeded object.
    Thumbnail,
    /// `GetHighResolution` on model A and B objects.
    Highres,
    /// `GetWatermarked` on model W objects.
    Watermark,
}

impl RequestKind {
    pub const ALL: [RequestKind; 3] = [RequestKind::Thumbnail, RequestKind::Highres, RequestKind::Watermark];

    pub fn name(self) -> &'static str {
        match self {
            RequestKind::Thumbnail => "thumbnail",
            RequestKind::Highres => "highres",
            RequestKind::Watermark => "watermark",
        }
    }

    pub fn applies_to(self, model: ContentModel) -> bool {
        match self {
            RequestKind::Thumbnail => true,
            RequestKind::Highres => model != ContentModel::W,
            RequestKind::Watermark => model == ContentModel::W,
        }
    }

    /// Path and query of the request against `pid`.
    pub fn path(self, pid: &Pid, model: ContentModel) -> String {
        let bdef = match model {
            ContentModel::A | ContentModel::B => demo::IMAGE_BDEF,
            ContentModel::W => demo::WATERMARK_BDEF,
        };
        match self {
            RequestKind::Thumbnail => format!("/access/{pid}/dissem/{bdef}/GetThumbnail"),
            RequestKind::Highres => format!("/access/{pid}/dissem/{bdef}/GetHighResolution"),
            RequestKind::Watermark => format!(
                "/access/{pid}/dissem/{bdef}/GetWatermarked?TEXT={}",
                WATERMARK_TEXT.replace(' ', "%20")
            ),
        }
    }
}

impl FromStr for RequestKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarnessError::Mix(format!("unknown request kind {s:?}; expected thumbnail, highres or watermark")))
    }
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Request-kind weights in `kind:weight,...` form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestMix(pub Vec<(RequestKind, u32)>);

impl FromStr for RequestMix {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_weights(s).map(Self)
    }
}

#[derive(Debug, Clone)]
pub struct LoadProfile {
    pub users: usize,
    /// Mean pause between a user's requests; each pause is drawn uniformly
    /// from `[0.5, 1.5]` times this.
    pub think_time: Duration,
    /// Total across all users.
    pub requests: usize,
    pub mix: Vec<(RequestKind, u32)>,
    pub rng_seed: u64,
    pub request_timeout: Duration,
}

impl LoadProfile {
    /// Uniform over thumbnail and watermark requests.
    pub fn default_mix() -> Vec<(RequestKind, u32)> {
        vec![(RequestKind::Thumbnail, 1), (RequestKind::Watermark, 1)]
    }
}

impl Default for LoadProfile {
    fn default() -> Self {
        Self {
            users: 20,
            think_time: Duration::from_millis(300),
            requests: 1000,
            mix: Self::default_mix(),
            rng_seed: 1,
            request_timeout: Duration::from_secs(30),
        }
    }
}

/// One request as issued. `status` is 0 when no response arrived.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub user: usize,
    pub seq: usize,
    pub kind: RequestKind,
    pub pid: String,
    /// Milliseconds from the start of the run to the request.
    pub start_ms: f64,
    pub latency_ms: f64,
    pub status: u16,
    pub bytes: u64,
}

impl Sample {
    pub fn ok(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadReport {
    pub requests: usize,
    pub errors: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub elapsed_s: f64,
    /// Completed requests per second of wall time.
    pub throughput_rps: f64,
}

impl LoadReport {
    pub fn from_samples(samples: &[Sample], elapsed: Duration) -> Self {
        let mut latencies: Vec<f64> = samples.iter().map(|s| s.latency_ms).collect();
        latencies.sort_by(f64::total_cmp);
        let n = latencies.len();
        let mean = if n == 0 { 0.0 } else { latencies.iter().sum::<f64>() / n as f64 };
        let elapsed_s = elapsed.as_secs_f64();
        Self {
            requests: n,
            errors: samples.iter().filter(|s| !s.ok()).count(),
            mean_ms: mean,
            p50_ms: percentile(&latencies, 50.0),
            p95_ms: percentile(&latencies, 95.0),
            max_ms: latencies.last().copied().unwrap_or(0.0),
            elapsed_s,
            throughput_rps: if elapsed_s > 0.0 { n as f64 / elapsed_s } else { 0.0 },
        }
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "requests={} errors={} mean={:.1}ms p50={:.1}ms p95={:.1}ms max={:.1}ms elapsed={:.2}s throughput={:.1}/s",
            self.requests, self.errors, self.mean_ms, self.p50_ms, self.p95_ms, self.max_ms, self.elapsed_s, self.throughput_rps
        )
    }
}

/// Nearest-rank percentile of sorted values; 0 for none.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn pick<T: Copy>(rng: &mut StdRng, weighted: &[(T, u32)]) -> T {
    let total: u32 = weighted.iter().map(|(_, w)| w).sum();
    let mut slot = rng.random_range(0..total);
    for (item, w) in weighted {
        if slot < *w {
            return *item;
        }
        slot -= w;
    }
    unreachable!("slot is below the weight total")
}

/// Runs `profile` against the server at `base_url`, choosing targets from
/// `targets`. Failed requests are counted, not raised.
pub fn run_load(
    base_url: &str,
    targets: &[(Pid, ContentModel)],
    profile: &LoadProfile,
) -> Result<(LoadReport, Vec<Sample>), HarnessError> {
    if profile.users == 0 {
        return Err(HarnessError::Profile("at least one user is required".into()));
    }
    if profile.mix.is_empty() || profile.mix.iter().any(|(_, w)| *w == 0) {
        return Err(HarnessError::Profile("request weights must be positive".into()));
    }
    let pools: Vec<(RequestKind, Vec<&(Pid, ContentModel)>)> = profile
        .mix
        .iter()
        .map(|(kind, _)| (*kind, targets.iter().filter(|(_, m)| kind.applies_to(*m)).collect()))
        .collect();
    if let Some((kind, _)) = pools.iter().find(|(_, p)| p.is_empty()) {
        return Err(HarnessError::Profile(format!("no seeded object answers {kind} requests")));
    }

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(profile.request_timeout))
        .max_idle_connections_per_host(profile.users.max(1))
        .build()
        .into();
    let base = base_url.trim_end_matches('/');
    let users = profile.users.min(profile.requests.max(1));
    let barrier = Barrier::new(users);
    let started = Instant::now();

    let mut samples: Vec<Sample> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..users)
            .map(|user| {
                let share = profile.requests / users + usize::from(user < profile.requests % users);
                let (agent, pools, barrier) = (&agent, &pools, &barrier);
                scope.spawn(move || {
                    let mut rng = StdRng::seed_from_u64(profile.rng_seed.wrapping_add(user as u64));
                    let mut out = Vec::with_capacity(share);
                    barrier.wait();
                    for seq in 0..share {
                        if seq > 0 {
                            think(&mut rng, profile.think_time);
                        }
                        let kind = pick(&mut rng, &profile.mix);
                        let pool = &pools.iter().find(|(k, _)| *k == kind).expect("pool per kind").1;
                        let (pid, model) = pool[rng.random_range(0..pool.len())];
                        let url = format!("{base}{}", kind.path(pid, *model));
                        let start = Instant::now();
                        let (status, bytes) = issue(agent, &url);
                        out.push(Sample {
                            user,
                            seq,
                            kind,
                            pid: pid.to_string(),
                            start_ms: millis(start.duration_since(started)),
                            latency_ms: millis(start.elapsed()),
                            status,
                            bytes,
                        });
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("load user panicked")).collect()
    });
    let elapsed = started.elapsed();
    samples.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms));
    Ok((LoadReport::from_samples(&samples, elapsed), samples))
}

/// Milliseconds rounded to the microsecond.
fn millis(d: Duration) -> f64 {
    (d.as_secs_f64() * 1_000_000.0).round() / 1000.0
}

fn think(rng: &mut StdRng, mean: Duration) {
    if mean.is_zero() {
        return;
    }
    let ms = mean.as_secs_f64() * 1000.0;
    std::thread::sleep(Duration::from_secs_f64(rng.random_range(0.5 * ms..=1.5 * ms) / 1000.0));
}

/// Reads the whole body so latency covers the full transfer.
fn issue(agent: &ureq::Agent, url: &str) -> (u16, u64) {
    match agent.get(url).call() {
        Ok(mut resp) => {
            let status = resp.status().as_u16();
            match io::copy(&mut resp.body_mut().as_reader(), &mut io::sink()) {
                Ok(n) => (status, n),
                Err(e) => {
                    log::warn!("{url}: body: {e}");
                    (0, 0)
                }
            }
        }
        Err(e) => {
            log::warn!("{url}: {e}");
            (0, 0)
        }
    }
}

/// Writes samples as CSV with a header row:
/// `user,seq,kind,pid,start_ms,latency_ms,status,bytes`.
pub fn write_csv<W: io::Write>(out: W, samples: &[Sample]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
