use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use qsopt::initdesign::{assemble_qs_design, design_report, glp_design, verify_glp, CpParams, DesignBudget, NuPParams};
use qsopt::interface::service::{serve, AppState};
use qsopt::interface::{fmt6, write_outputs, Report, RunConfig};
use qsopt::learner::{run_campaign, Campaign, Source, Suggestion};
use qsopt::qscore::{read_runs, write_runs, QSPoint, Representation, Run};
use qsopt::Error;

#[derive(Parser)]
#[command(name = "qsopt", version, about = "Active learning for quantitative-sequence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an initial design (CSV) and print its property report (JSON).
    Design(DesignArgs),
    /// Run a full campaign against an oracle.
    Optimize(OptimizeArgs),
    /// Create an ask-tell campaign state file.
    Init(InitArgs),
    /// Print the next run of an ask-tell campaign.
    Suggest(StateArgs),
    /// Record a measured response.
    Tell(TellArgs),
    /// Append completed runs from a CSV file as manual observations.
    Import(ImportArgs),
    /// Write the history in the shared CSV run format.
    Export(ExportArgs),
    /// Serve the HTTP ask-tell API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, required_unless_present = "glp")]
    k: Option<usize>,
    #[arg(long, required_unless_present = "glp")]
    runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Design CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON path (stderr when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Algebraic construction with n = k = prime - 1.
    #[arg(long, conflicts_with_all = ["k", "runs"])]
    glp: Option<u64>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// builtin:<name> or exec:<command>.
    #[arg(long)]
    oracle: Option<String>,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Total evaluations, initial design included.
    #[arg(long)]
    budget: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    fast: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    design_size: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Keep proposing until the budget is spent.
    #[arg(long)]
    no_ei_stop: bool,
    /// Output directory for history, EI trace, summary and report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Campaign state file, rewritten after every evaluation.
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    state: PathBuf,
    /// Take k, bounds, direction and candidates from a builtin oracle.
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// minimize or maximize.
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    design_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct StateArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TellArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    /// Manual run "x1,...,xk;o1,...,ok" instead of the pending suggestion.
    #[arg(long)]
    point: Option<String>,
    #[arg(long)]
    nonce: Option<String>,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "QSOPT_DATA_DIR", default_value = "qsopt-data")]
    data_dir: PathBuf,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Design(a) => design(a),
        Command::Optimize(a) => optimize(a),
        Command::Init(a) => init(a),
        Command::Suggest(a) => suggest(a),
        Command::Tell(a) => tell(a),
        Command::Import(a) => import(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => serve_cmd(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn design(a: DesignArgs) -> CliResult {
    let (nu, cp) = (NuPParams::default(), CpParams::default());
    let (k, runs, report) = if let Some(pr) = a.glp {
        let g = glp_design(pr)?;
        let o = g.o.to(Representation::ComponentIndexed);
        let runs: Vec<Run> = g.x.iter().zip(o.rows).map(|(x, o)| Run { x: x.clone(), o, y: None }).collect();
        let report = serde_json::json!({
            "design": design_report(&g.x, &g.oprime, &nu, &cp)?,
            "lattice": verify_glp(pr, &nu, &cp)?,
        });
        ((pr - 1) as usize, runs, report)
    } else {
        let (k, n) = (a.k.expect("clap requires k"), a.runs.expect("clap requires runs"));
        if k < 2 || n < 2 {
            return Err(Failure::Usage("--k and --runs must be at least 2".into()));
        }
        let d = assemble_qs_design(n, k, &nu, &cp, &DesignBudget::default(), a.seed)?;
        let oprime = d.orders.to(Representation::PositionIndexed);
        let report = serde_json::json!({ "design": design_report(&d.x, &oprime, &nu, &cp)? });
        let runs = d.points().into_iter().map(|w| Run { x: w.x, o: w.o, y: None }).collect();
        (k, runs, report)
    };
    write_runs(output(a.out.as_deref())?, k, &runs)?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match a.report {
        Some(p) => fs::write(p, text + "\n")?,
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn optimize(a: OptimizeArgs) -> CliResult {
    let mut rc = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = a.oracle {
        rc.oracle = Some(o);
    }
    if rc.oracle.is_none() {
        return Err(Failure::Usage("--oracle (or a config file naming one) is required".into()));
    }
    rc.max_runs = a.budget.or(rc.max_runs);
    rc.max_seconds = a.time.or(rc.max_seconds);
    rc.seed = a.seed.or(rc.seed);
    rc.design_size = a.design_size.or(rc.design_size);
    rc.t = a.t.or(rc.t);
    rc.alpha = a.alpha.or(rc.alpha);
    if a.fast {
        rc.fast = Some(true);
    }
    if a.no_ei_stop {
        rc.stop_on_ei = Some(false);
    }
    if a.out.is_some() {
        rc.out_dir = a.out;
    }
    if a.state.is_some() {
        rc.state = a.state;
    }
    if rc.fast == Some(true) && rc.max_seconds.is_none() {
        return Err(Failure::Usage("--fast needs --time".into()));
    }
    let oracle = rc.oracle()?;
    let config = rc.campaign(oracle.as_ref())?;
    let out = rc.out_dir.clone().unwrap_or_else(|| PathBuf::from("qsopt-out"));
    let id = format!("{}-{}", oracle.name().split(':').next().unwrap_or("run"), config.seed);
    match run_campaign(oracle.as_ref(), &id, config, rc.state.as_deref()) {
        Ok(c) => {
            let r = write_outputs(&c, &out)?;
            print!("{}", r.text());
            println!("outputs in {}", out.display());
            Ok(())
        }
        Err(ab) => {
            if let Err(e) = write_outputs(&ab.campaign, &out) {
                eprintln!("could not write partial outputs: {e}");
            } else {
                eprint!("{}", Report::new(&ab.campaign).text());
                eprintln!("partial outputs in {}", out.display());
            }
            Err(Failure::Run(ab.to_string()))
        }
    }
}

fn parse_direction(s: &str) -> Result<qsopt::acquisition::Direction, Failure> {
    match s {
        "minimize" | "min" => Ok(qsopt::acquisition::Direction::Minimize),
        "maximize" | "max" => Ok(qsopt::acquisition::Direction::Maximize),
        _ => Err(Failure::Usage(format!("direction must be minimize or maximize, got {s:?}"))),
    }
}

fn init(a: InitArgs) -> CliResult {
    if a.state.exists() && !a.force {
        return Err(Failure::Usage(format!("{} exists; pass --force to overwrite", a.state.display())));
    }
    let mut rc = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = a.oracle {
        rc.oracle = Some(o);
    }
    rc.k = a.k.or(rc.k);
    if let Some(d) = &a.direction {
        rc.direction = Some(parse_direction(d)?);
    }
    rc.max_runs = a.budget.or(rc.max_runs);
    rc.design_size = a.design_size.or(rc.design_size);
    rc.seed = a.seed.or(rc.seed);
    if rc.oracle.is_none() && (rc.k.is_none() && rc.bounds.is_none() || rc.direction.is_none()) {
        return Err(Failure::Usage("give --oracle, or --k and --direction".into()));
    }
    let config = rc.ask_tell()?;
    let id = a.id.unwrap_or_else(|| "campaign".into());
    let mut c = Campaign::new(id, config)?;
    c.attach(&a.state)?;
    println!("created {} with a {}-run initial design", a.state.display(), c.design.len());
    Ok(())
}

fn print_suggestion(s: &Suggestion) {
    let src = match s.source {
        Source::Initial => "initial",
        Source::Sequential => "sequential",
        Source::Manual => "manual",
    };
    let xs: Vec<String> = s.point.x.iter().map(|v| fmt6(*v)).collect();
    let os: Vec<String> = s.point.o.iter().map(|v| v.to_string()).collect();
    println!("next run ({src})");
    println!("  x = ({})", xs.join(", "));
    println!("  o = ({})", os.join(", "));
    if let Some(e) = s.ei {
        println!("  ei = {}", fmt6(e));
    }
    if let Some(p) = &s.prediction {
        println!("  predicted = {} +/- {}", fmt6(p.mean), fmt6(p.sd));
    }
}

fn suggest(a: StateArgs) -> CliResult {
    let mut c = Campaign::load(&a.state)?;
    let s = c.suggest()?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&s).map_err(Error::from)?);
    } else {
        print_suggestion(&s);
    }
    Ok(())
}

fn parse_point(s: &str) -> Result<QSPoint, Failure> {
    let bad = || Failure::Usage(format!("--point must look like \"x1,...,xk;o1,...,ok\", got {s:?}"));
    let (xs, os) = s.split_once(';').ok_or_else(bad)?;
    let x = xs.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?;
    let o = os.split(',').map(|v| v.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?;
    Ok(QSPoint::new(x, o)?)
}

fn tell(a: TellArgs) -> CliResult {
    let mut c = Campaign::load(&a.state)?;
    let (point, manual) = match &a.point {
        Some(p) => (parse_point(p)?, true),
        None => match &c.pending {
            Some(s) => (s.point.clone(), false),
            None => return Err(Failure::Usage("no pending suggestion; run suggest first or pass --point".into())),
        },
    };
    let added = c.observe(&point, a.y, a.nonce.as_deref(), manual)?;
    if added {
        println!("recorded y = {} (run {})", fmt6(a.y), c.n());
    } else {
        println!("nonce already recorded; nothing changed");
    }
    if let Some(i) = &c.incumbent {
        println!("best y = {}", fmt6(i.y));
    }
    if let qsopt::learner::Status::Stopped { reason } = c.status {
        println!("campaign stopped: {}", format!("{reason:?}").to_lowercase());
    }
    Ok(())
}

fn import(a: ImportArgs) -> CliResult {
    let mut c = Campaign::load(&a.state)?;
    let (k, runs) = read_runs(fs::File::open(&a.csv)?)?;
    if k != c.config.k {
        return Err(Failure::Run(format!("CSV has k = {k}, campaign has k = {}", c.config.k)));
    }
    let n = c.import_runs(&runs)?;
    println!("imported {n} runs");
    Ok(())
}

fn export(a: ExportArgs) -> CliResult {
    let c = Campaign::load(&a.state)?;
    c.write_history_csv(output(a.out.as_deref())?)?;
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> CliResult {
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Failure::Usage(format!("bad address: {e}")))?;
    let token = std::env::var("QSOPT_TOKEN").ok();
    let state = Arc::new(AppState::new(&a.data_dir, token)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(serve(addr, state))?;
    Ok(())
}
