//! The `harness` command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 when a run fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand};
use dorepo_core::demo::StubEndpoints;
use dorepo_core::{Repository, RepositoryConfig, Store, StoreConfig};

use crate::load::{self, LoadProfile, RequestMix};
use crate::seed::{self, ModelMix};
use crate::{write_fixtures, HarnessError, StubServers};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "harness", version, about = "Stub services, seeding and load generation for dorepo")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct StubArgs {
    /// Host the stub services listen on and mechanisms call.
    #[arg(long, default_value = "127.0.0.1")]
    pub stub_host: String,
    /// Ports of the watermarker, resizer, echo and content services.
    #[arg(long, default_value = "8101,8102,8103,8104", value_parser = parse_ports)]
    pub stub_ports: [u16; 4],
}

impl StubArgs {
    fn endpoints(&self) -> StubEndpoints {
        StubEndpoints::on_host(&self.stub_host, self.stub_ports)
    }
}

fn parse_ports(s: &str) -> Result<[u16; 4], String> {
    let ports = s
        .split(',')
        .map(|p| p.trim().parse::<u16>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    ports.try_into().map_err(|v: Vec<u16>| format!("expected 4 ports, got {}", v.len()))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the stub mechanism services until interrupted.
    Stubs {
        #[command(flatten)]
        stubs: StubArgs,
    },
    /// Fill an empty repository with seeded data objects and their surrogates.
    Seed {
        #[arg(long)]
        n: u64,
        /// Content-model weights, e.g. `a:1,b:1,w:1`.
        #[arg(long, default_value_t = ModelMix::default())]
        mix: ModelMix,
        #[arg(long, default_value = "dorepo-data")]
        data_root: PathBuf,
        #[arg(long, default_value_t = std::thread::available_parallelism().map_or(4, |n| n.get()))]
        workers: usize,
        #[command(flatten)]
        stubs: StubArgs,
    },
    /// Drive dissemination requests at a running server.
    Load {
        #[arg(long, default_value_t = 20)]
        users: usize,
        #[arg(long, default_value_t = 300)]
        think_ms: u64,
        /// Total requests across all users.
        #[arg(long, default_value_t = 1000)]
        requests: usize,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        base_url: String,
        /// Repository the server runs on; targets are its seeded objects.
        #[arg(long, default_value = "dorepo-data")]
        data_root: PathBuf,
        /// Request-kind weights over thumbnail, highres and watermark.
        #[arg(long, default_value = "thumbnail:1,watermark:1")]
        mix: RequestMix,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write raw samples as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the demo fixture documents.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
        #[command(flatten)]
        stubs: StubArgs,
    },
}

pub fn run(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), HarnessError> {
    match command {
        Command::Stubs { stubs } => {
            let servers = StubServers::spawn(&stubs.stub_host, stubs.stub_ports)?;
            let ep = servers.endpoints();
            writeln!(out, "watermarker\t{}", ep.watermarker)?;
            writeln!(out, "resizer\t{}", ep.resizer)?;
            writeln!(out, "echo\t{}", ep.echo)?;
            writeln!(out, "content\t{}", ep.content)?;
            out.flush()?;
            servers.wait()?;
        }
        Command::Seed {
            n,
            mix,
            data_root,
            workers,
            stubs,
        } => {
            // The base URL only matters for disseminations, which seeding never runs.
            let repo = Repository::open(&RepositoryConfig::new(&data_root, "http://127.0.0.1:8080"))?;
            let report = seed::seed_repository(&repo, &stubs.endpoints(), n, &mix, workers)?;
            for pid in &report.surrogates {
                writeln!(out, "surrogate\t{pid}")?;
            }
            let counts: Vec<String> = mix.models().map(|m| format!("{m}={}", report.count(m))).collect();
            writeln!(out, "seeded {} objects ({})", report.objects.len(), counts.join(" "))?;
        }
        Command::Load {
            users,
            think_ms,
            requests,
            base_url,
            data_root,
            mix,
            seed,
            csv,
        } => {
            let store = Store::open(&StoreConfig::new(&data_root))?;
            let targets = seed::seeded_objects(&store);
            let profile = LoadProfile {
                users,
                think_time: Duration::from_millis(think_ms),
                requests,
                mix: mix.0,
                rng_seed: seed,
                ..LoadProfile::default()
            };
            let (report, samples) = load::run_load(&base_url, &targets, &profile)?;
            if let Some(path) = csv {
                load::write_csv(std::fs::File::create(path)?, &samples)?;
            }
            writeln!(out, "{report}")?;
        }
        Command::Fixtures { out: dir, stubs } => {
            for path in write_fixtures(&dir, &stubs.endpoints())? {
                writeln!(out, "{}", path.display())?;
            }
        }
    }
    Ok(())
}
