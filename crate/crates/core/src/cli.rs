//! `mcmarket` subcommands.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fixtures;
use crate::insider::{classify, insider_compensator_kh, solve_counts, PosteriorOptions, Prefix, ATOM_TOL};
use crate::io::{envelope, fmt_f64, load_envelope_value, load_model, load_path, Header, RunConfig};
use crate::model::{IntensityOverride, MarketModel};
use crate::nflvr::{arbitrage_strategy, flvr_scan, FlvrReport, ScanOptions, Variant};
use crate::noarb::{na_solve, verify_martingale_measure};
use crate::scenario::{dim_chain, scenario_table, support_hull, Scenario, DEFAULT_NMAX};
use crate::simulate::{path_rng, replicate, simulate_with_rng, PathRecord, Start};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mcmarket", version, about = "Markov-chain market model with insider analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model config file, or a builtin fixture name.
    #[arg(short = 'm', long = "model")]
    pub model: String,
    /// Override the model horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Inaccessible,
    Accessible,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a model and echo its normalized form.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Martingale intensities per state, or separating certificates.
    NaSolve {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of the measure change.
    VerifyQ {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Intensity override (JSON `{"rates": [[...]]}`); defaults to the na-solve witness.
        #[arg(long = "override")]
        over: Option<PathBuf>,
    },
    /// Simulate paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Scenario probabilities, dimension chains and supports.
    Scenarios {
        #[command(flatten)]
        common: Common,
        /// Start state label (model initial state by default).
        #[arg(long)]
        start: Option<String>,
        #[arg(long, default_value_t = DEFAULT_NMAX)]
        nmax: usize,
    },
    /// Classify jump `k` of a recorded path for the insider.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value_t = 0)]
        path_index: usize,
        /// Terminal log-prices (comma separated); the path's own by default.
        #[arg(long, allow_hyphen_values = true)]
        ell: Option<String>,
        #[arg(long)]
        k: usize,
    },
    /// Bridge intensities in the up/down Poisson model.
    Compensator {
        #[command(flatten)]
        common: Common,
        #[arg(long = "lambda+")]
        lambda_plus: Option<f64>,
        #[arg(long = "lambda-")]
        lambda_minus: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ell: f64,
        #[arg(long, default_value_t = 20)]
        grid: usize,
        /// Observed path; a bridge path is drawn with `--seed` otherwise.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        nmax: usize,
    },
    /// Scan a path for the first insider free-lunch time.
    Nflvr {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        path: PathBuf,
        #[arg(long, default_value_t = 0)]
        path_index: usize,
        #[arg(long, allow_hyphen_values = true)]
        ell: Option<String>,
        #[arg(long, default_value_t = DEFAULT_NMAX)]
        nmax: usize,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate the strategy behind a failed condition of an nflvr report.
    Arbitrage {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the builtin fixture models.
    Fixtures {
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

/// Parses arguments, runs, writes artifacts; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    if let Ok(v) = std::env::var("MCMARKET_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            // a second build in the same process fails; keep the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn model_of(common: &Common) -> Result<MarketModel> {
    let v = load_model(&common.model)?;
    for w in &v.warnings {
        eprintln!("warning: {w}");
    }
    match common.horizon {
        Some(t) => v.model.with_horizon(t),
        None => Ok(v.model),
    }
}

fn run_config(command: &str, common: Option<&Common>, format: Format) -> RunConfig {
    RunConfig {
        command: command.into(),
        model: common.map(|c| c.model.clone()),
        seed: None,
        n_paths: None,
        n_max: None,
        horizon: common.and_then(|c| c.horizon),
        out: common.and_then(|c| c.out.as_ref().map(|p| p.display().to_string())),
        format: format.name().into(),
    }
}

fn parse_ell(text: Option<&str>, path: &PathRecord) -> Result<Vec<f64>> {
    match text {
        None => Ok(path.terminal_log_prices().to_vec()),
        Some(t) => t
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("cannot parse ell component {s:?}")))
            })
            .collect(),
    }
}

fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Validate { common } => {
            let model = model_of(common)?;
            // no source path in the header, so the echo re-validates to identical bytes
            let mut rc = run_config("validate", Some(common), Format::Json);
            rc.model = None;
            rc.out = None;
            let header = Header::new(&model, rc);
            emit(common.out.as_deref(), &envelope(&header, "model", &model.to_config())?)
        }
        Command::NaSolve { common } => {
            let model = model_of(common)?;
            let sol = na_solve(&model)?;
            let header = Header::new(&model, run_config("na-solve", Some(common), Format::Json));
            emit(common.out.as_deref(), &envelope(&header, "result", &sol)?)
        }
        Command::VerifyQ { common, paths, seed, over } => {
            let model = model_of(common)?;
            let over = match over {
                Some(p) => serde_json::from_str::<IntensityOverride>(&std::fs::read_to_string(p)?)?,
                None => na_solve(&model)?
                    .intensities
                    .ok_or_else(|| Error::InvalidArgument("model has no martingale intensities".into()))?,
            };
            let report = verify_martingale_measure(&model, &over, &Start::Model, *paths, *seed)?;
            let mut rc = run_config("verify-q", Some(common), Format::Json);
            rc.seed = Some(*seed);
            rc.n_paths = Some(*paths);
            let header = Header::new(&model, rc);
            emit(common.out.as_deref(), &envelope(&header, "result", &report)?)
        }
        Command::Simulate { common, paths, seed, format } => {
            let model = model_of(common)?;
            let recs = replicate(*paths, *seed, |_, rng| simulate_with_rng(&model, &Start::Model, rng))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let mut rc = run_config("simulate", Some(common), *format);
            rc.seed = Some(*seed);
            rc.n_paths = Some(*paths);
            let header = Header::new(&model, rc);
            let text = match format {
                Format::Json => envelope(&header, "paths", &recs)?,
                Format::Csv => paths_csv(&model, &header, &recs),
            };
            emit(common.out.as_deref(), &text)
        }
        Command::Scenarios { common, start, nmax } => {
            let model = model_of(common)?;
            let e0 = match start {
                Some(s) => model.state_index(s)?,
                None => model.initial_state(),
            };
            let mut rc = run_config("scenarios", Some(common), Format::Csv);
            rc.n_max = Some(*nmax);
            let header = Header::new(&model, rc);
            emit(common.out.as_deref(), &scenarios_csv(&model, &header, e0, *nmax)?)
        }
        Command::Classify { common, path, path_index, ell, k } => {
            let model = model_of(common)?;
            let rec = load_path(path, *path_index)?;
            let ell = parse_ell(ell.as_deref(), &rec)?;
            if *k == 0 || *k > rec.n_jumps() {
                return Err(Error::InvalidArgument(format!(
                    "k must lie in 1..={} for this path",
                    rec.n_jumps()
                )));
            }
            let h = Scenario::new(rec.states.clone())?;
            let prefix = Prefix::at_jump(&rec, k - 1)?;
            let c = classify(&model, &prefix, &h, &ell)?;
            let header = Header::new(&model, run_config("classify", Some(common), Format::Json));
            emit(common.out.as_deref(), &envelope(&header, "result", &c)?)
        }
        Command::Compensator {
            common,
            lambda_plus,
            lambda_minus,
            ell,
            grid,
            path,
            seed,
            nmax,
        } => {
            let model = model_of(common)?;
            let text = compensator_csv(&model, common, *lambda_plus, *lambda_minus, *ell, *grid, path.as_deref(), *seed, *nmax)?;
            emit(common.out.as_deref(), &text)
        }
        Command::Nflvr {
            common,
            path,
            path_index,
            ell,
            nmax,
            samples,
            seed,
        } => {
            let model = model_of(common)?;
            let rec = load_path(path, *path_index)?;
            let ell = parse_ell(ell.as_deref(), &rec)?;
            let opts = ScanOptions {
                posterior: PosteriorOptions {
                    n_max: *nmax,
                    n_samples: *samples,
                    seed: *seed,
                },
            };
            let report = flvr_scan(&model, &rec, &ell, &opts)?;
            let mut rc = run_config("nflvr", Some(common), Format::Json);
            rc.seed = Some(*seed);
            rc.n_max = Some(*nmax);
            let header = Header::new(&model, rc);
            emit(common.out.as_deref(), &envelope(&header, "result", &report)?)
        }
        Command::Arbitrage {
            report,
            variant,
            eps,
            paths,
            seed,
            out,
        } => {
            let rep: FlvrReport = load_envelope_value(report, "result")?;
            let model = crate::model::validate_model(&rep.model)?.model;
            let (window, xi, v) = match variant {
                VariantArg::Inaccessible => {
                    let (w, xi) = rep
                        .drift_window()
                        .ok_or_else(|| Error::InvalidArgument("report has no drift-condition failure".into()))?;
                    (w, xi, Variant::Inaccessible)
                }
                VariantArg::Accessible => {
                    let (w, xi) = rep.homogeneous_window().ok_or_else(|| {
                        Error::InvalidArgument("report has no homogeneous-condition failure".into())
                    })?;
                    (w, xi, Variant::Accessible { eps: *eps })
                }
            };
            let run = arbitrage_strategy(&model, &rep, &window, &xi, v, *paths, *seed)?;
            let rc = RunConfig {
                command: "arbitrage".into(),
                model: Some(report.display().to_string()),
                seed: Some(*seed),
                n_paths: Some(*paths),
                n_max: Some(rep.options.posterior.n_max),
                horizon: None,
                out: out.as_ref().map(|p| p.display().to_string()),
                format: "csv".into(),
            };
            let header = Header::new(&model, rc);
            let mut s = header.csv_lines();
            let xi_s: Vec<String> = run.xi.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(
                s,
                "# k={} state={} entry={} eps={} xi={}",
                run.k,
                model.label(run.state),
                fmt_f64(run.entry),
                run.eps.map_or("-".into(), fmt_f64),
                xi_s.join(";")
            );
            let _ = writeln!(
                s,
                "# floor={} mean={} fraction_positive={} traded={}",
                fmt_f64(run.floor),
                fmt_f64(run.mean),
                fmt_f64(run.fraction_positive),
                run.traded
            );
            s.push_str("path_id,pnl\n");
            for (i, p) in run.pnl.iter().enumerate() {
                let _ = writeln!(s, "{i},{}", fmt_f64(*p));
            }
            emit(out.as_deref(), &s)
        }
        Command::Fixtures { dir } => {
            std::fs::create_dir_all(dir)?;
            for (name, cfg) in fixtures::all() {
                let model = crate::model::validate_model(&cfg)?.model;
                let mut rc = run_config("fixtures", None, Format::Json);
                rc.model = Some(name.into());
                let header = Header::new(&model, rc);
                let file = dir.join(format!("{name}.json"));
                std::fs::write(&file, envelope(&header, "model", &model.to_config())?)?;
                println!("{}", file.display());
            }
            Ok(())
        }
    }
}

fn paths_csv(model: &MarketModel, header: &Header, recs: &[PathRecord]) -> String {
    let mut s = header.csv_lines();
    s.push_str("path_id,event,time,from_state,to_state");
    for a in model.assets() {
        let _ = write!(s, ",L_{}", a.name());
    }
    s.push('\n');
    let row = |s: &mut String, id: usize, ev: &str, t: f64, from: &str, to: &str, l: &[f64]| {
        let _ = write!(s, "{id},{ev},{},{from},{to}", fmt_f64(t));
        for v in l {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        s.push('\n');
    };
    for (id, p) in recs.iter().enumerate() {
        let e0 = model.label(p.states[0]);
        row(&mut s, id, "start", 0.0, "", e0, p.initial_log_prices());
        for j in 0..p.n_jumps() {
            let (a, b) = (model.label(p.states[j]), model.label(p.states[j + 1]));
            row(&mut s, id, "jump", p.jump_times[j], a, b, p.log_prices_after_jump(j + 1));
        }
        let e = model.label(p.final_state());
        row(&mut s, id, "end", p.horizon, e, e, p.terminal_log_prices());
    }
    s
}

fn scenarios_csv(model: &MarketModel, header: &Header, e0: usize, nmax: usize) -> Result<String> {
    let t = model.horizon();
    let table = scenario_table(model, e0, nmax, t)?;
    let mut s = header.csv_lines();
    let _ = writeln!(s, "# start={} horizon={} tail={}", model.label(e0), fmt_f64(t), fmt_f64(table.tail));
    s.push_str("scenario,n,pi,route,pi_error,dim_chain,support_vertices\n");
    let l0 = model.initial_log_prices();
    for (h, p) in &table.entries {
        let chain: Vec<String> = dim_chain(model, h)?.iter().map(|d| d.to_string()).collect();
        let hull = support_hull(model, h, t, &l0)?;
        let verts: Vec<String> = hull
            .vertices
            .iter()
            .map(|v| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(":"))
            .collect();
        let route = serde_json::to_value(p.route)?;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            h.labels(model).replace(',', " "),
            h.n(),
            fmt_f64(p.value),
            route.as_str().unwrap_or(""),
            fmt_f64(p.error),
            chain.join(" "),
            verts.join(" ")
        );
    }
    Ok(s)
}

/// Up moves of the three-state embedding go `e -> e + 1 (mod 3)`.
fn split_jumps(path: &PathRecord) -> (Vec<f64>, Vec<f64>) {
    let (mut up, mut down) = (Vec::new(), Vec::new());
    for j in 0..path.n_jumps() {
        if path.states[j + 1] == (path.states[j] + 1) % 3 {
            up.push(path.jump_times[j]);
        } else {
            down.push(path.jump_times[j]);
        }
    }
    (up, down)
}

#[allow(clippy::too_many_arguments)]
fn compensator_csv(
    model: &MarketModel,
    common: &Common,
    lambda_plus: Option<f64>,
    lambda_minus: Option<f64>,
    ell: f64,
    grid: usize,
    path: Option<&Path>,
    seed: u64,
    nmax: usize,
) -> Result<String> {
    if model.n_states() != 3 || model.n_assets() != 1 {
        return Err(Error::InvalidModel(
            "the bridge compensator needs the three-state, one-asset up/down model".into(),
        ));
    }
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be positive".into()));
    }
    let lp = lambda_plus.unwrap_or(model.rate(0, 1));
    let lm = lambda_minus.unwrap_or(model.rate(0, 2));
    let (bp, bm) = (model.beta(0, 0, 1), model.beta(0, 0, 2));
    let t_end = model.horizon();
    let target = ell - model.initial_log_prices()[0] - model.mu(0, 0) * t_end;
    let counts = solve_counts(bp, bm, target, nmax, ATOM_TOL);
    if counts.solutions.is_empty() {
        return Err(Error::ZeroPosteriorSupport);
    }
    let observed = match path {
        Some(p) => Some(split_jumps(&load_path(p, 0)?)),
        None => None,
    };
    let mut rc = run_config("compensator", Some(common), Format::Csv);
    rc.seed = Some(seed);
    rc.n_max = Some(nmax);
    let header = Header::new(model, rc);
    let mut s = header.csv_lines();
    let sols: Vec<String> = counts.solutions.iter().map(|(a, b)| format!("{a}:{b}")).collect();
    let _ = writeln!(
        s,
        "# lambda_plus={} lambda_minus={} ell={} unique={} solutions={}",
        fmt_f64(lp),
        fmt_f64(lm),
        fmt_f64(ell),
        counts.unique,
        sols.join(" ")
    );
    s.push_str("n_plus_total,n_minus_total,t,n_plus_before,n_minus_before,intensity_plus,intensity_minus,saturated\n");
    for (idx, &(np, nm)) in counts.solutions.iter().enumerate() {
        let (up, down) = match &observed {
            Some((u, d)) => {
                if u.len() != np || d.len() != nm {
                    continue;
                }
                (u.clone(), d.clone())
            }
            None => {
                // given the counts, jump times are independent uniform order statistics
                let mut rng = path_rng(seed, idx as u64);
                let mut draw = |n: usize| {
                    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * t_end).collect();
                    v.sort_by(f64::total_cmp);
                    v
                };
                let u = draw(np);
                (u, draw(nm))
            }
        };
        for g in 0..grid {
            let t = g as f64 * t_end / grid as f64;
            let before = (up.partition_point(|&x| x < t), down.partition_point(|&x| x < t));
            let i = insider_compensator_kh(lp, lm, t_end, t, before, (np, nm))?;
            let _ = writeln!(
                s,
                "{np},{nm},{},{},{},{},{},{}",
                fmt_f64(t),
                before.0,
                before.1,
                fmt_f64(i.plus),
                fmt_f64(i.minus),
                i.saturated
            );
        }
    }
    Ok(s)
}
