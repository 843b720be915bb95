//! The `dorepo` operator command line.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 when an operation fails.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use dorepo_core::{Error, ObjectKind, Pid, Repository};
use serde_json::json;

use crate::config::ServerConfig;
use crate::error::ApiError;
use crate::ServerHandle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "dorepo", version, about = "Digital object repository server and operator tools")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "DOREPO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Repository directory; overrides the configuration.
    #[arg(long, global = true)]
    pub data_root: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Recorded as the responsible party in audit records.
    #[arg(long, global = true, default_value = "operator")]
    pub principal: String,
    #[arg(long, global = true, default_value = "")]
    pub justification: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the access and management interfaces over HTTP.
    Serve {
        #[arg(long)]
        listen: Option<SocketAddr>,
        #[arg(long)]
        base_url: Option<String>,
    },
    /// Ingest METS documents.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Write an object's METS document to stdout or a file.
    Export {
        pid: String,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// Embed internal content so the document can be ingested elsewhere.
        #[arg(long)]
        inline: bool,
    },
    /// List objects, sorted by PID.
    List {
        /// data, bdef, bmech, or a kind token such as BEHAVIOR_DEFINITION.
        #[arg(long, value_parser = parse_kind)]
        kind: Option<ObjectKind>,
        /// Case-sensitive label substring.
        #[arg(long)]
        label: Option<String>,
    },
    /// Remove an object no other object depends on.
    Purge { pid: String },
    /// Print an object's audit trail.
    Audit { pid: String },
    /// Check blobs, object files and the index for inconsistencies.
    Fsck,
}

fn parse_kind(s: &str) -> Result<ObjectKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "data" => Ok(ObjectKind::Data),
        "bdef" => Ok(ObjectKind::BehaviorDefinition),
        "bmech" => Ok(ObjectKind::BehaviorMechanism),
        _ => s.to_ascii_uppercase().parse().map_err(|e: Error| e.to_string()),
    }
}

/// Output sinks, so the CLI can be driven from tests.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

struct Failed;

impl From<std::io::Error> for Failed {
    fn from(_: std::io::Error) -> Self {
        Failed
    }
}

struct Ctx<'a, 'b> {
    io: &'a mut Io<'b>,
    format: Format,
}

impl Ctx<'_, '_> {
    fn report(&mut self, context: &str, err: Error) -> Failed {
        let api = ApiError::from(err);
        let _ = match self.format {
            Format::Json => writeln!(self.io.out, "{}", json!({ "context": context, "error": api.body })),
            Format::Text => {
                let mut text = format!("error: {context}{}", api.body.message);
                if let Some(serde_json::Value::Array(items)) = &api.body.violations {
                    for v in items {
                        match (v.get("rule").or(v.get("code")), v.get("message")) {
                            (Some(code), Some(msg)) => {
                                let at = v.get("subject").or(v.get("locator")).and_then(|s| s.as_str()).unwrap_or("");
                                text.push_str(&format!(
                                    "\n  {} {at}: {}",
                                    code.as_str().unwrap_or(""),
                                    msg.as_str().unwrap_or("")
                                ));
                            }
                            _ => text.push_str(&format!("\n  {}", v.as_str().unwrap_or(&v.to_string()))),
                        }
                    }
                }
                writeln!(self.io.err, "{text}")
            }
        };
        Failed
    }

    fn fail(&mut self, message: &str) -> Failed {
        let _ = match self.format {
            Format::Json => writeln!(self.io.out, "{}", json!({ "error": { "code": "FAILED", "message": message } })),
            Format::Text => writeln!(self.io.err, "error: {message}"),
        };
        Failed
    }

    fn pid(&mut self, s: &str) -> Result<Pid, Failed> {
        s.parse().map_err(|e| self.report("", e))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: impl IntoIterator<Item = OsString>, io: &mut Io<'_>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(io.err, "{}", e.render())
            } else {
                write!(io.out, "{}", e.render())
            };
            return code;
        }
    };
    let format = cli.format;
    let mut ctx = Ctx { io, format };
    match execute(cli, &mut ctx) {
        Ok(code) => code,
        Err(Failed) => EXIT_FAILURE,
    }
}

fn load_config(cli: &Cli, ctx: &mut Ctx<'_, '_>) -> Result<ServerConfig, Failed> {
    let mut config = ServerConfig::load(cli.config.as_deref()).map_err(|e| ctx.fail(&e.to_string()))?;
    if let Some(root) = &cli.data_root {
        config.data_root = root.clone();
    }
    Ok(config)
}

fn open(config: &ServerConfig, ctx: &mut Ctx<'_, '_>) -> Result<Repository, Failed> {
    Repository::open(&config.repository_config()).map_err(|e| ctx.report("", e))
}

fn execute(cli: Cli, ctx: &mut Ctx<'_, '_>) -> Result<i32, Failed> {
    let mut config = load_config(&cli, ctx)?;
    let (principal, justification) = (cli.principal.as_str(), cli.justification.as_str());
    match &cli.command {
        Command::Serve { listen, base_url } => {
            if let Some(l) = listen {
                config.listen = *l;
            }
            if let Some(b) = base_url {
                config.base_url = b.clone();
            }
            config.validate().map_err(|e| ctx.fail(&e.to_string()))?;
            let repo = Arc::new(open(&config, ctx)?);
            let listener = std::net::TcpListener::bind(config.listen)
                .map_err(|e| ctx.fail(&format!("cannot listen on {}: {e}", config.listen)))?;
            let server = ServerHandle::spawn(repo.clone(), listener, config.management_token.clone())
                .map_err(|e| ctx.fail(&e.to_string()))?;
            let objects = repo.store().object_count();
            match ctx.format {
                Format::Json => writeln!(ctx.io.out, "{}", json!({ "listening": server.url(), "objects": objects }))?,
                Format::Text => writeln!(ctx.io.out, "listening on {} ({objects} objects)", server.url())?,
            }
            ctx.io.out.flush()?;
            if config.management_token.is_none() {
                log::warn!("no management token configured; /manage is disabled");
            }
            server.wait().map_err(|e| ctx.fail(&e.to_string()))?;
            Ok(EXIT_OK)
        }
        Command::Ingest { files } => {
            let repo = open(&config, ctx)?;
            let mut failed = false;
            let mut results = Vec::new();
            for file in files {
                let name = file.display().to_string();
                let outcome = std::fs::read(file)
                    .map_err(|e| Error::storage(format!("reading {name}"), e))
                    .and_then(|doc| repo.ingest(&doc, principal, justification));
                match outcome {
                    Ok(pid) => match ctx.format {
                        Format::Json => results.push(json!({ "file": name, "pid": pid })),
                        Format::Text => writeln!(ctx.io.out, "{pid}\t{name}")?,
                    },
                    Err(e) => {
                        failed = true;
                        match ctx.format {
                            Format::Json => results.push(json!({ "file": name, "error": ApiError::from(e).body })),
                            Format::Text => {
                                ctx.report(&format!("{name}: "), e);
                            }
                        }
                    }
                }
            }
            if ctx.format == Format::Json {
                writeln!(ctx.io.out, "{}", serde_json::Value::Array(results))?;
            }
            Ok(if failed { EXIT_FAILURE } else { EXIT_OK })
        }
        Command::Export { pid, output, inline } => {
            let pid = ctx.pid(pid)?;
            let repo = open(&config, ctx)?;
            let doc = if *inline { repo.export_with_content(&pid) } else { repo.export(&pid) };
            let doc = doc.map_err(|e| ctx.report("", e))?;
            match output {
                None => ctx.io.out.write_all(&doc)?,
                Some(path) => {
                    std::fs::write(path, &doc)
                        .map_err(|e| ctx.report("", Error::storage(format!("writing {}", path.display()), e)))?;
                    match ctx.format {
                        Format::Json => writeln!(
                            ctx.io.out,
                            "{}",
                            json!({ "pid": pid, "path": path, "bytes": doc.len() })
                        )?,
                        Format::Text => writeln!(ctx.io.out, "exported {pid} to {}", path.display())?,
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::List { kind, label } => {
            let repo = open(&config, ctx)?;
            let entries = repo.store().list_objects(*kind, label.as_deref());
            match ctx.format {
                Format::Json => {
                    let rows: Vec<_> = entries
                        .iter()
                        .map(|e| json!({ "pid": e.pid, "kind": e.kind, "label": e.label, "modified": e.modified }))
                        .collect();
                    writeln!(ctx.io.out, "{}", serde_json::Value::Array(rows))?;
                }
                Format::Text => {
                    for e in entries {
                        writeln!(ctx.io.out, "{}\t{}\t{}\t{}", e.pid, e.kind, e.modified, e.label)?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Purge { pid } => {
            let pid = ctx.pid(pid)?;
            let repo = open(&config, ctx)?;
            repo.purge_object(&pid, principal, justification).map_err(|e| ctx.report("", e))?;
            match ctx.format {
                Format::Json => writeln!(ctx.io.out, "{}", json!({ "pid": pid, "purged": true }))?,
                Format::Text => writeln!(ctx.io.out, "purged {pid}")?,
            }
            Ok(EXIT_OK)
        }
        Command::Audit { pid } => {
            let pid = ctx.pid(pid)?;
            let repo = open(&config, ctx)?;
            let trail = repo.audit_trail(&pid).map_err(|e| ctx.report("", e))?;
            match ctx.format {
                Format::Json => writeln!(ctx.io.out, "{}", json!({ "pid": pid, "auditTrail": trail }))?,
                Format::Text => {
                    for r in trail {
                        writeln!(
                            ctx.io.out,
                            "{}\t{}\t{}\t{}\t{}\t{}",
                            r.id,
                            r.date,
                            r.action.token(),
                            r.component_id,
                            r.responsible,
                            r.justification
                        )?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Fsck => {
            let repo = open(&config, ctx)?;
            let report = repo.store().fsck().map_err(|e| ctx.report("", e))?;
            let issues = report.issue_count();
            match ctx.format {
                Format::Json => writeln!(ctx.io.out, "{}", json!({ "issues": issues, "report": report }))?,
                Format::Text => {
                    let sections = [
                        ("orphan blob", &report.orphan_blobs),
                        ("missing blob", &report.missing_blobs),
                        ("corrupt blob", &report.corrupt_blobs),
                        ("unreadable object", &report.unreadable_objects),
                        ("index mismatch", &report.index_mismatches),
                        ("stray temp file", &report.stray_temp_files),
                    ];
                    for (what, items) in sections {
                        for item in items {
                            writeln!(ctx.io.out, "{what}: {item}")?;
                        }
                    }
                    writeln!(ctx.io.out, "{issues} issues")?;
                }
            }
            Ok(if issues == 0 { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}
