//! Operator command line: runs the service and drives a running instance.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::Value;

use crate::exec::Exec;
use crate::ingest::{self, IngestError, ReplaySpec};
use crate::jobs::{AnnotationJob, JobState};
use crate::journal::JournalError;
use crate::report::{self, Band};
use crate::service::{OpenError, Service};
use crate::synth::{self, SynthSpec};
use crate::api;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BIND: i32 = 2;
pub const EXIT_CORRUPT: i32 = 3;
pub const EXIT_CONNECT: i32 = 4;
pub const EXIT_NOT_RUNNING: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "tagflow", version, about = "Sensor stream annotation service")]
pub struct Cli {
    /// Listen address for `serve`, service address for client commands.
    #[arg(long, global = true, env = "JAMAICA_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Journal directory for `serve`.
    #[arg(long, global = true, env = "JAMAICA_DATA_DIR", default_value = "./data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve {
        /// URL brokers should notify; defaults to the bound address.
        #[arg(long)]
        callback_url: Option<String>,
    },
    /// Generate the synthetic training and stream archives.
    Synth(SynthArgs),
    /// Stream an archive into a running service.
    Replay(ReplayArgs),
    /// Histogram or summary of an archive or of annotation values.
    Report(ReportArgs),
    #[command(subcommand)]
    Job(JobCommand),
    #[command(subcommand)]
    Domain(DomainCommand),
    #[command(subcommand)]
    Annotations(AnnotationsCommand),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for train.csv and stream.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 40000)]
    pub n_stream: usize,
    #[arg(long, default_value_t = 5.0)]
    pub band_low: f64,
    #[arg(long, default_value_t = 45.0)]
    pub band_high: f64,
    #[arg(long, default_value_t = 0.05)]
    pub frac_negative: f64,
    #[arg(long, default_value_t = 0.03)]
    pub frac_high: f64,
    #[arg(long, default_value_t = 50.0)]
    pub high_limit: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub archive: PathBuf,
    /// Job that must be running for the replay to start.
    #[arg(long)]
    pub job: String,
    /// Observations per second; 0 is as fast as possible.
    #[arg(long, default_value_t = 0.0)]
    pub rate: f64,
    /// Archive seconds per wall second (only with rate 0).
    #[arg(long)]
    pub time_compression: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportKind {
    Histogram,
    Summary,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub kind: ReportKind,
    /// Archive CSV to read values from.
    #[arg(long, conflicts_with = "tag")]
    pub archive: Option<PathBuf>,
    /// Use numeric values of annotations with this tag id from the service.
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Explicit histogram range `low,high`.
    #[arg(long, value_parser = parse_pair)]
    pub range: Option<(f64, f64)>,
    /// Band `low,high` for below/above totals.
    #[arg(long, value_parser = parse_pair)]
    pub band: Option<(f64, f64)>,
    /// Emit JSON instead of CSV for histograms.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum JobCommand {
    /// Create a job from a JSON spec file.
    Create {
        #[arg(short = 'f', long = "file")]
        file: PathBuf,
    },
    /// Submit training samples (`{"samples": [...]}`) from a file.
    Train {
        id: String,
        #[arg(short = 'f', long = "file")]
        file: PathBuf,
    },
    Start { id: String },
    Stop { id: String },
    List,
    Delete { id: String },
}

#[derive(Debug, Subcommand)]
pub enum DomainCommand {
    /// Create a tag domain from a JSON file.
    Create {
        #[arg(short = 'f', long = "file")]
        file: PathBuf,
    },
    List,
}

#[derive(Debug, Subcommand)]
pub enum AnnotationsCommand {
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub entity: Option<String>,
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
    /// `minLon,minLat,maxLon,maxLat`
    #[arg(long)]
    pub bbox: Option<String>,
    /// Comma-separated tag ids: list entities carrying all of them.
    #[arg(long, conflicts_with_all = ["entity", "tag", "domain"])]
    pub entities_with: Option<String>,
    #[arg(long)]
    pub offset: Option<usize>,
    #[arg(long)]
    pub limit: Option<usize>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected low,high")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((lo, hi))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Bind(String),
    Corrupt(String),
    Connect(String),
    NotRunning(String),
    Other(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Bind(_) => EXIT_BIND,
            Failure::Corrupt(_) => EXIT_CORRUPT,
            Failure::Connect(_) => EXIT_CONNECT,
            Failure::NotRunning(_) => EXIT_NOT_RUNNING,
            Failure::Other(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m)
            | Failure::Bind(m)
            | Failure::Corrupt(m)
            | Failure::Connect(m)
            | Failure::NotRunning(m)
            | Failure::Other(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: starting runtime: {e}");
            return EXIT_FAILURE;
        }
    };
    let result = match cli.command {
        Command::Serve { ref callback_url } => serve(&rt, &cli.addr, &cli.data_dir, callback_url.clone()),
        Command::Synth(ref a) => cmd_synth(a),
        Command::Report(ref a) => cmd_report(&rt, &Client::new(&cli.addr), a),
        Command::Replay(ref a) => cmd_replay(&rt, &Client::new(&cli.addr), a),
        Command::Job(ref c) => cmd_job(&rt, &Client::new(&cli.addr), c),
        Command::Domain(ref c) => cmd_domain(&rt, &Client::new(&cli.addr), c),
        Command::Annotations(AnnotationsCommand::Query(ref q)) => cmd_query(&rt, &Client::new(&cli.addr), q),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn serve(rt: &tokio::runtime::Runtime, addr: &str, data_dir: &Path, callback_url: Option<String>) -> Outcome {
    init_logging();
    let svc = match Service::open(data_dir) {
        Ok(s) => Arc::new(s),
        Err(OpenError::Journal(JournalError::Corrupt { line, reason })) => {
            return Err(Failure::Corrupt(format!("journal corrupted at line {line}: {reason}")));
        }
        Err(e) => return Err(Failure::Other(format!("opening {}: {e}", data_dir.display()))),
    };
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::Bind(format!("cannot bind {addr}: {e}")))?;
        let bound: SocketAddr = listener.local_addr().map_err(|e| Failure::Bind(e.to_string()))?;
        svc.subscriptions
            .set_callback_url(callback_url.unwrap_or_else(|| format!("http://{bound}/v1/notify")));
        svc.subscriptions.resume();
        eprintln!("listening on {bound}");
        axum::serve(listener, api::router(svc))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(|e| Failure::Other(e.to_string()))
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}

fn print_json<T: serde::Serialize>(v: &T) -> Outcome {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure::Other(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Outcome {
    let spec = SynthSpec {
        n_train: a.n_train,
        n_stream: a.n_stream,
        band_low: a.band_low,
        band_high: a.band_high,
        frac_negative: a.frac_negative,
        frac_high: a.frac_high,
        high_limit: a.high_limit,
        seed: a.seed,
    };
    match synth::write(&spec, &a.out) {
        Ok(summary) => print_json(&summary),
        Err(e @ synth::SynthError::BadSpec(_)) => Err(Failure::Usage(e.to_string())),
        Err(e) => Err(Failure::Other(e.to_string())),
    }
}

/// Minimal blocking-style HTTP client for a running service.
struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    fn new(addr: &str) -> Self {
        let base = if addr.starts_with("http://") || addr.starts_with("https://") {
            addr.trim_end_matches('/').to_owned()
        } else {
            format!("http://{addr}")
        };
        Client {
            base,
            http: reqwest::Client::new(),
        }
    }

    async fn send(&self, method: reqwest::Method, path: &str, body: Option<&Value>) -> Result<Value, Failure> {
        let url = format!("{}{}", self.base, path);
        let mut req = self.http.request(method, &url);
        if let Some(b) = body {
            req = req.json(b);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| Failure::Connect(format!("cannot reach {}: {e}", self.base)))?;
        let status = resp.status();
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| Failure::Connect(format!("reading response: {e}")))?;
        let value: Value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        if status.is_success() {
            Ok(value)
        } else {
            let detail = value
                .get("message")
                .and_then(Value::as_str)
                .map_or_else(|| String::from_utf8_lossy(&bytes).into_owned(), str::to_owned);
            let code = value.get("code").and_then(Value::as_str).unwrap_or("error");
            Err(Failure::Other(format!("{status} {code}: {detail}")))
        }
    }

    async fn get(&self, path: &str) -> Result<Value, Failure> {
        self.send(reqwest::Method::GET, path, None).await
    }

    async fn post(&self, path: &str, body: &Value) -> Result<Value, Failure> {
        self.send(reqwest::Method::POST, path, Some(body)).await
    }

    async fn get_as<T: DeserializeOwned>(&self, path: &str) -> Result<T, Failure> {
        serde_json::from_value(self.get(path).await?).map_err(|e| Failure::Other(format!("unexpected response: {e}")))
    }

    /// All items of a paginated list endpoint.
    async fn get_all(&self, path: &str) -> Result<Vec<Value>, Failure> {
        let sep = if path.contains('?') { '&' } else { '?' };
        let mut out = Vec::new();
        loop {
            let page: api::Page<Value> = self
                .get_as(&format!("{path}{sep}offset={}&limit={}", out.len(), api::MAX_PAGE_LIMIT))
                .await?;
            let done = page.items.is_empty() || out.len() + page.items.len() >= page.total;
            out.extend(page.items);
            if done {
                return Ok(out);
            }
        }
    }
}

fn read_json_file(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn cmd_job(rt: &tokio::runtime::Runtime, c: &Client, cmd: &JobCommand) -> Outcome {
    rt.block_on(async {
        let v = match cmd {
            JobCommand::Create { file } => c.post("/v1/jobs", &read_json_file(file)?).await?,
            JobCommand::Train { id, file } => c.post(&format!("/v1/jobs/{id}/train"), &read_json_file(file)?).await?,
            JobCommand::Start { id } => c.post(&format!("/v1/jobs/{id}/start"), &Value::Null).await?,
            JobCommand::Stop { id } => c.post(&format!("/v1/jobs/{id}/stop"), &Value::Null).await?,
            JobCommand::List => Value::Array(c.get_all("/v1/jobs").await?),
            JobCommand::Delete { id } => c.send(reqwest::Method::DELETE, &format!("/v1/jobs/{id}"), None).await?,
        };
        print_json(&v)
    })
}

fn cmd_domain(rt: &tokio::runtime::Runtime, c: &Client, cmd: &DomainCommand) -> Outcome {
    rt.block_on(async {
        let v = match cmd {
            DomainCommand::Create { file } => c.post("/v1/tagdomains", &read_json_file(file)?).await?,
            DomainCommand::List => Value::Array(c.get_all("/v1/tagdomains").await?),
        };
        print_json(&v)
    })
}

fn query_string(pairs: &[(&str, Option<String>)]) -> String {
    let mut url = reqwest::Url::parse("http://localhost/").expect("static url");
    {
        let mut q = url.query_pairs_mut();
        for (k, v) in pairs {
            if let Some(v) = v {
                q.append_pair(k, v);
            }
        }
    }
    url.query().filter(|q| !q.is_empty()).map(|q| format!("?{q}")).unwrap_or_default()
}

fn cmd_query(rt: &tokio::runtime::Runtime, c: &Client, q: &QueryArgs) -> Outcome {
    let common = [
        ("from", q.from.clone()),
        ("to", q.to.clone()),
        ("bbox", q.bbox.clone()),
        ("offset", q.offset.map(|o| o.to_string())),
        ("limit", q.limit.map(|l| l.to_string())),
    ];
    let path = match &q.entities_with {
        Some(tags) => {
            let mut pairs = vec![("tags", Some(tags.clone()))];
            pairs.extend(common);
            format!("/v1/annotations/entities{}", query_string(&pairs))
        }
        None => {
            let mut pairs = vec![
                ("entity", q.entity.clone()),
                ("tag", q.tag.clone()),
                ("domain", q.domain.clone()),
            ];
            pairs.extend(common);
            format!("/v1/annotations{}", query_string(&pairs))
        }
    };
    rt.block_on(async { print_json(&c.get(&path).await?) })
}

fn cmd_report(rt: &tokio::runtime::Runtime, c: &Client, a: &ReportArgs) -> Outcome {
    if a.bins == 0 {
        return Err(Failure::Usage("--bins must be at least 1".into()));
    }
    let values: Vec<f64> = match (&a.archive, &a.tag) {
        (Some(path), None) => ingest::read_archive(path)
            .map_err(|e| Failure::Other(e.to_string()))?
            .iter()
            .filter_map(|o| o.value)
            .collect(),
        (None, Some(tag)) => rt.block_on(async {
            let items = c.get_all(&format!("/v1/annotations{}", query_string(&[("tag", Some(tag.clone()))]))).await?;
            Ok::<_, Failure>(
                items
                    .iter()
                    .filter_map(|a| a.get("numeric_value").and_then(Value::as_f64))
                    .collect(),
            )
        })?,
        _ => return Err(Failure::Usage("exactly one of --archive or --tag is required".into())),
    };
    let band = a.band.map(|(low, high)| Band { low, high });
    let fail = |e: report::ReportError| Failure::Other(e.to_string());
    match a.kind {
        ReportKind::Histogram => {
            let h = report::histogram(&values, a.bins, a.range, band, Exec::default()).map_err(fail)?;
            if a.json {
                print_json(&h)?;
            } else {
                print!("{}", h.to_csv());
                eprintln!("total={} below={} above={}", h.total, h.below, h.above);
            }
            Ok(())
        }
        ReportKind::Summary => print_json(&report::summary(&values, band).map_err(fail)?),
    }
}

fn cmd_replay(rt: &tokio::runtime::Runtime, c: &Client, a: &ReplayArgs) -> Outcome {
    let spec = ReplaySpec {
        source_path: a.archive.clone(),
        rate: a.rate,
        time_compression: a.time_compression,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let job: AnnotationJob = rt.block_on(c.get_as(&format!("/v1/jobs/{}", a.job)))?;
    if job.state != JobState::Running {
        return Err(Failure::NotRunning(format!("job {} is {}, not running", job.id, job.state)));
    }
    let tags = rt.block_on(domain_tags(c, job.spec.tag_domain_id.as_str()))?;
    let before = rt.block_on(tag_totals(c, &tags))?;

    let mut transport: Option<Failure> = None;
    let result = ingest::replay(&spec, |batch| {
        let body = serde_json::to_value(ingest::to_notification(batch, None)).expect("notification serializes");
        match rt.block_on(c.post("/v1/observations", &body)) {
            Ok(_) => Ok(BTreeMap::new()),
            Err(f) => {
                let msg = f.message().to_owned();
                transport = Some(f);
                Err(IngestError::InvalidReplay(msg))
            }
        }
    });
    let mut report = match result {
        Ok(r) => r,
        Err(e) => return Err(transport.unwrap_or_else(|| Failure::Other(e.to_string()))),
    };
    let after = rt.block_on(tag_totals(c, &tags))?;
    report.annotations = after
        .into_iter()
        .filter_map(|(name, n)| {
            let delta = n.saturating_sub(before.get(&name).copied().unwrap_or(0));
            (delta > 0).then_some((name, delta))
        })
        .collect();
    print_json(&report)
}

/// `(tag id, tag name)` pairs of a domain.
async fn domain_tags(c: &Client, domain_id: &str) -> Result<Vec<(String, String)>, Failure> {
    let d: api::DomainView = c.get_as(&format!("/v1/tagdomains/{domain_id}")).await?;
    Ok(d.tags.into_iter().map(|t| (t.id.to_string(), t.name)).collect())
}

async fn tag_totals(c: &Client, tags: &[(String, String)]) -> Result<BTreeMap<String, u64>, Failure> {
    let mut out = BTreeMap::new();
    for (id, name) in tags {
        let page: api::Page<Value> = c
            .get_as(&format!("/v1/annotations{}", query_string(&[("tag", Some(id.clone())), ("limit", Some("0".into()))])))
            .await?;
        out.insert(name.clone(), page.total as u64);
    }
    Ok(out)
}
