//! `mas` command line: validate, study, run, report.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::adaptive::{build_knowledge, CoordConfig, KnowledgeBase};
use crate::grid::{build_network, Network};
use crate::sim::{parse_log, run, Metrics, SettingsMode, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SELECTIVITY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mas", about = "Multi-agent protection simulator", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a network file.
    Validate { net: PathBuf },
    /// Build the setting-group knowledge base for every DG status vector.
    Study {
        net: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit 3 if any vector is infeasible.
        #[arg(long)]
        strict: bool,
    },
    /// Run a scenario.
    Run {
        net: PathBuf,
        scenario: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Freeze the settings of one DG status vector, e.g. `000`.
        #[arg(long = "static-group")]
        static_group: Option<String>,
        /// Exit 3 if any fault is not cleared selectively.
        #[arg(long)]
        strict: bool,
    },
    /// Recompute metrics from a run log and print them.
    Report {
        log: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
}

/// Failure carrying its exit code.
struct Fail(i32, String);

type Outcome = Result<i32, Fail>;

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    std::fs::write(path, text).map_err(|e| Fail(EXIT_FAILURE, format!("cannot write {}: {e}", path.display())))
}

fn load_net(path: &Path) -> Result<Network, Fail> {
    build_network(&read(path)?).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut stdout = String::new();
    let result = match cli.cmd {
        Command::Validate { net } => validate(&net, &mut stdout),
        Command::Study { net, out, strict } => study(&net, &out, strict, &mut stdout),
        Command::Run { net, scenario, kb, config, log, metrics, static_group, strict } => cmd_run(
            RunArgs { net, scenario, kb, config, log, metrics, static_group, strict },
            &mut stdout,
        ),
        Command::Report { log, metrics } => report(&log, metrics.as_deref(), &mut stdout),
    };
    let _ = out.write_all(stdout.as_bytes());
    match result {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn validate(path: &Path, out: &mut String) -> Outcome {
    let net = load_net(path)?;
    let _ = writeln!(
        out,
        "ok: {} buses, {} branches, {} sources, {} loads",
        net.buses.len(),
        net.branches.len(),
        net.sources.len(),
        net.loads.len()
    );
    Ok(EXIT_OK)
}

fn study(path: &Path, out_path: &Path, strict: bool, out: &mut String) -> Outcome {
    let net = load_net(path)?;
    let kb = build_knowledge(&net, &CoordConfig::default()).map_err(|e| Fail(EXIT_INPUT, e.to_string()))?;
    write(out_path, &kb.to_text())?;
    let _ = writeln!(
        out,
        "kb: {} entries, {} infeasible, network {}",
        kb.entries.len(),
        kb.infeasible.len(),
        kb.network_hash
    );
    for (bits, reason) in &kb.infeasible {
        let _ = writeln!(out, "infeasible {bits}: {reason}");
    }
    Ok(if strict && !kb.infeasible.is_empty() { EXIT_SELECTIVITY } else { EXIT_OK })
}

struct RunArgs {
    net: PathBuf,
    scenario: PathBuf,
    kb: Option<PathBuf>,
    config: Option<PathBuf>,
    log: Option<PathBuf>,
    metrics: Option<PathBuf>,
    static_group: Option<String>,
    strict: bool,
}

fn cmd_run(a: RunArgs, out: &mut String) -> Outcome {
    let net = load_net(&a.net)?;
    let scenario = read(&a.scenario)?;
    let kb = match &a.kb {
        Some(p) => Some(Arc::new(
            KnowledgeBase::parse(&read(p)?).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", p.display())))?,
        )),
        None => None,
    };
    let cfg = match &a.config {
        Some(p) => SimConfig::parse(&read(p)?).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", p.display())))?,
        None => SimConfig::default(),
    };
    let mode = match (kb, a.static_group) {
        (kb, Some(bits)) => SettingsMode::Frozen { kb, bits: Some(bits) },
        (Some(kb), None) => SettingsMode::Adaptive(kb),
        (None, None) => SettingsMode::Frozen { kb: None, bits: None },
    };
    let r = run(&net, &mode, &scenario, &cfg).map_err(|e| Fail(EXIT_INPUT, e.to_string()))?;
    if let Some(p) = &a.log {
        write(p, &r.log.render())?;
    }
    if let Some(p) = &a.metrics {
        write(p, &r.metrics.render())?;
    }
    let m = &r.metrics;
    let _ = writeln!(
        out,
        "faults {} pass {} fail {}; events {}; messages {} ({} bytes); frequency {:.3} Hz",
        m.count("faults.total"),
        m.count("faults.pass"),
        m.count("faults.fail"),
        m.count("events.total"),
        m.count("messages.total"),
        m.count("bytes.total"),
        r.frequency
    );
    Ok(if a.strict && m.count("faults.fail") > 0 { EXIT_SELECTIVITY } else { EXIT_OK })
}

/// Human-readable tables for one metrics set.
pub fn render_report(m: &Metrics) -> String {
    let mut s = String::new();
    let section = |s: &mut String, title: &str, prefix: &str| {
        let _ = writeln!(s, "{title}");
        for (k, v) in m.0.range(prefix.to_string()..).take_while(|(k, _)| k.starts_with(prefix)) {
            let _ = writeln!(s, "  {:<14}{v}", &k[prefix.len()..]);
        }
    };
    section(&mut s, "trips", "trips.");
    let _ = writeln!(s, "faults");
    for k in 1..=m.count("faults.total") {
        let get = |f: &str| m.get(&format!("fault.{k}.{f}")).unwrap_or("-").to_string();
        let _ = writeln!(s, "  {:<4}{:<6}clearing {:<10}{}", k, get("branch"), get("clearing_s"), get("verdict"));
    }
    let _ = writeln!(s, "messages by mode");
    for mode in ["DIRECT", "RADIO", "BB"] {
        let _ = writeln!(
            s,
            "  {:<8}{:>8} msgs{:>10} bytes",
            mode,
            m.count(&format!("messages.mode.{mode}")),
            m.count(&format!("bytes.mode.{mode}"))
        );
    }
    let _ = writeln!(s, "messages by link");
    for link in ["tt", "tr", "rt", "rr", "rc", "cr"] {
        let _ = writeln!(
            s,
            "  {:<8}{:>8} msgs{:>10} bytes",
            link,
            m.count(&format!("messages.link.{link}")),
            m.count(&format!("bytes.link.{link}"))
        );
    }
    let _ = writeln!(s, "loads shed      {}", m.count("loads_shed"));
    let _ = writeln!(s, "dg disconnects  {}", m.count("dg_disconnects"));
    let _ = writeln!(s, "selectivity     {}/{} pass", m.count("faults.pass"), m.count("faults.total"));
    s
}

fn report(path: &Path, metrics: Option<&Path>, out: &mut String) -> Outcome {
    let log = parse_log(&read(path)?).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    let m = log.metrics();
    out.push_str(&render_report(&m));
    let Some(mp) = metrics else { return Ok(EXIT_OK) };
    let stored = Metrics::parse(&read(mp)?).map_err(|e| Fail(EXIT_INPUT, format!("{}: {e}", mp.display())))?;
    if stored == m {
        out.push_str("CONSISTENT\n");
        return Ok(EXIT_OK);
    }
    let keys: std::collections::BTreeSet<&String> = stored.0.keys().chain(m.0.keys()).collect();
    for k in keys {
        let (a, b) = (stored.0.get(k), m.0.get(k));
        if a != b {
            let _ = writeln!(
                out,
                "MISMATCH {k}: file {} log {}",
                a.map(String::as_str).unwrap_or("-"),
                b.map(String::as_str).unwrap_or("-")
            );
        }
    }
    Ok(EXIT_FAILURE)
}
