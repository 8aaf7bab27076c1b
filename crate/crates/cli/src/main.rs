//! `mmrw`: decay rates and occupation measures of 2d Markov-modulated
//! random walks from the command line.
//!
//! Results go to stdout (or `--out`), the run header (`# key=value`) and
//! warnings to stderr. Exit status: 0 success, 2 refused input, 1 numeric
//! failure.

mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmrw::decay::{decay_rate_with, domain_contains_with, marginal_decay_rate, Direction};
use mmrw::gamma::{extreme_points, trace_with};
use mmrw::model::validate;
use mmrw::occupation::{
    empirical_decay, functional_equation_residual, mgf_partial, simulate_occupation_with, truncated_fundamental,
    SimulationOptions, State, DEFAULT_TRUNCATION,
};
use mmrw::qbd::{build_qbd, c_expand, cp_estimate, solve_rate_matrix, Alpha};
use mmrw::spectral::chi;
use mmrw::{parse_model, MMRWModel};

use output::{fmt_f64, Cell, Output};

#[derive(Parser)]
#[command(name = "mmrw", version, about = "Decay rates and occupation measures of 2d skip-free Markov-modulated random walks")]
struct Cli {
    /// Model file: {"s0": n, "blocks": {"i,j": [[..]], ..}}.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON instead of plain text or CSV.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report stochasticity, irreducibility and aperiodicity hints and the drift.
    Validate {
        /// Half-width of the finite window used for reachability.
        #[arg(long, default_value_t = 8)]
        window: usize,
    },
    /// Perron root chi(theta) of A_**(theta).
    Chi {
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        theta: [f64; 2],
    },
    /// Upper and lower boundary of Gamma.
    ///
    /// CSV columns: theta1,zeta_lower,zeta_upper.
    GammaBoundary {
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Extreme points of Gamma-bar.
    ///
    /// CSV columns: point,theta1,theta2,flat_segment.
    ExtremePoints,
    /// Directional decay rate; prints the rate, then the argmax.
    DecayRate {
        #[arg(long, value_parser = parse_direction)]
        c: Direction,
    },
    /// Marginal decay rate along a mutually prime direction.
    MarginalDecay {
        #[arg(long, value_parser = parse_direction)]
        c: Direction,
    },
    /// Membership of theta in the convergence domain.
    Domain {
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        theta: [f64; 2],
    },
    /// Truncated occupation measure by a linear solve.
    ///
    /// CSV columns: x1p,x2p,jp,value (phases 1-based).
    Occupation {
        /// x1,x2,j with a 1-based phase j.
        #[arg(long, value_parser = parse_state)]
        origin: State,
        #[arg(long = "L", default_value_t = DEFAULT_TRUNCATION)]
        l: usize,
    },
    /// Monte Carlo occupation estimate with 99% half-widths.
    ///
    /// CSV columns: x1p,x2p,jp,mean,half_width (phases 1-based).
    /// QD_THREADS caps the worker count; estimates do not depend on it.
    Simulate {
        #[arg(long, value_parser = parse_state, default_value = "0,0,1")]
        origin: State,
        #[arg(long = "L", default_value_t = DEFAULT_TRUNCATION)]
        l: usize,
        #[arg(long, default_value_t = 1_000_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Successive log-ratios of the occupation measure along the ray k c.
    ///
    /// CSV columns: k,ratio. The origin must lie on an axis.
    EmpiricalDecay {
        /// Ray direction; one component may be zero.
        #[arg(long, value_parser = parse_ray)]
        c: [u32; 2],
        #[arg(long, value_parser = parse_state, default_value = "0,0,1")]
        origin: State,
        /// Target phase (1-based).
        #[arg(long, default_value_t = 1)]
        phase: usize,
        #[arg(long, default_value_t = 6)]
        kmin: usize,
        #[arg(long, default_value_t = 12)]
        kmax: usize,
        #[arg(long = "L", default_value_t = DEFAULT_TRUNCATION)]
        l: usize,
    },
    /// Truncated matrix moment generating function of the occupation measure.
    ///
    /// CSV columns: j,jp,value (phases 1-based).
    Mgf {
        #[arg(long, value_parser = parse_point, default_value = "0,0")]
        origin: [usize; 2],
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        theta: [f64; 2],
        #[arg(long = "L", default_value_t = DEFAULT_TRUNCATION)]
        l: usize,
    },
    /// Max-norm residual of the functional equation on truncated tables.
    Residual {
        #[arg(long, value_parser = parse_point, default_value = "0,0")]
        origin: [usize; 2],
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        theta: [f64; 2],
        #[arg(long = "L", default_value_t = DEFAULT_TRUNCATION)]
        l: usize,
    },
    /// Rate matrix of a truncated QBD representation (1), (2) or (1,1).
    ///
    /// With --out, R is written as CSV columns row,col,value.
    RateMatrix {
        #[arg(long)]
        alpha: Alpha,
        #[arg(long = "K", default_value_t = 40)]
        k: usize,
    },
    /// log cp of truncated rate matrices against the extreme-point reference.
    ///
    /// CSV columns: alpha,K,log_cp,reference.
    CpCurve {
        #[arg(long)]
        alpha: Alpha,
        #[arg(long = "K", value_delimiter = ',', default_value = "10,20,40")]
        k: Vec<usize>,
    },
    /// c-expanded model as a model JSON file.
    Expand {
        #[arg(long, value_parser = parse_direction)]
        c: Direction,
    },
}

enum Failure {
    Refusal(String),
    Numeric(String),
}

impl From<mmrw::Error> for Failure {
    fn from(e: mmrw::Error) -> Self {
        if e.is_refusal() {
            Failure::Refusal(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, n: usize) -> Result<Vec<T>, String> {
    let v: Vec<T> = s
        .split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| format!("cannot parse `{p}`")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated values, got {}", v.len()));
    }
    Ok(v)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v = parse_list::<f64>(s, 2)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok([v[0], v[1]])
}

fn parse_point(s: &str) -> Result<[usize; 2], String> {
    let v = parse_list::<usize>(s, 2)?;
    Ok([v[0], v[1]])
}

fn parse_ray(s: &str) -> Result<[u32; 2], String> {
    let v = parse_list::<u32>(s, 2)?;
    Ok([v[0], v[1]])
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    let v = parse_ray(s)?;
    Direction::new(v[0], v[1]).map_err(|e| e.to_string())
}

fn parse_state(s: &str) -> Result<State, String> {
    let v = parse_list::<usize>(s, 3)?;
    if v[2] == 0 {
        return Err("phases are numbered from 1".into());
    }
    Ok(State::new(v[0], v[1], v[2] - 1))
}

fn dir_text(c: Direction) -> String {
    format!("{},{}", c.c1, c.c2)
}

fn pair_text(t: [f64; 2]) -> String {
    format!("{},{}", fmt_f64(t[0]), fmt_f64(t[1]))
}

fn state_text(s: State) -> String {
    format!("{},{},{}", s.x1, s.x2, s.phase + 1)
}

fn load_model(path: &Option<PathBuf>) -> Result<MMRWModel, Failure> {
    let path = path.as_ref().ok_or_else(|| Failure::Refusal("--model is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Refusal(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_model(&text)?)
}

/// Worker count after the QD_THREADS cap.
fn effective_workers(requested: Option<usize>) -> Result<usize, Failure> {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut w = requested.unwrap_or(available);
    if let Ok(cap) = std::env::var("QD_THREADS") {
        let cap: usize = cap
            .trim()
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| Failure::Refusal(format!("QD_THREADS must be a positive integer, got `{cap}`")))?;
        w = w.min(cap);
    }
    if w == 0 {
        return Err(Failure::Refusal("--workers must be positive".into()));
    }
    Ok(w)
}

/// Effective flag values for the run header.
fn header(cli: &Cli) -> Vec<(&'static str, String)> {
    let mut h = vec![];
    let model = cli.model.as_ref().map_or("<none>".into(), |p| p.display().to_string());
    let mut push = |k: &'static str, v: String| h.push((k, v));
    match &cli.command {
        Command::Validate { window } => {
            push("command", "validate".into());
            push("window", window.to_string());
        }
        Command::Chi { theta } => {
            push("command", "chi".into());
            push("theta", pair_text(*theta));
        }
        Command::GammaBoundary { points } => {
            push("command", "gamma-boundary".into());
            push("points", points.to_string());
        }
        Command::ExtremePoints => push("command", "extreme-points".into()),
        Command::DecayRate { c } => {
            push("command", "decay-rate".into());
            push("c", dir_text(*c));
        }
        Command::MarginalDecay { c } => {
            push("command", "marginal-decay".into());
            push("c", dir_text(*c));
        }
        Command::Domain { theta } => {
            push("command", "domain".into());
            push("theta", pair_text(*theta));
        }
        Command::Occupation { origin, l } => {
            push("command", "occupation".into());
            push("origin", state_text(*origin));
            push("L", l.to_string());
        }
        Command::Simulate { origin, l, paths, seed, .. } => {
            push("command", "simulate".into());
            push("origin", state_text(*origin));
            push("L", l.to_string());
            push("paths", paths.to_string());
            push("seed", seed.to_string());
        }
        Command::EmpiricalDecay { c, origin, phase, kmin, kmax, l } => {
            push("command", "empirical-decay".into());
            push("c", format!("{},{}", c[0], c[1]));
            push("origin", state_text(*origin));
            push("phase", phase.to_string());
            push("kmin", kmin.to_string());
            push("kmax", kmax.to_string());
            push("L", l.to_string());
        }
        Command::Mgf { origin, theta, l } | Command::Residual { origin, theta, l } => {
            let name = if matches!(cli.command, Command::Mgf { .. }) { "mgf" } else { "residual" };
            push("command", name.into());
            push("origin", format!("{},{}", origin[0], origin[1]));
            push("theta", pair_text(*theta));
            push("L", l.to_string());
        }
        Command::RateMatrix { alpha, k } => {
            push("command", "rate-matrix".into());
            push("alpha", alpha.to_string());
            push("K", k.to_string());
        }
        Command::CpCurve { alpha, k } => {
            push("command", "cp-curve".into());
            push("alpha", alpha.to_string());
            push("K", k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        }
        Command::Expand { c } => {
            push("command", "expand".into());
            push("c", dir_text(*c));
        }
    }
    h.insert(1, ("model", model));
    h
}

fn warn(msg: &str) {
    eprintln!("# warning: {msg}");
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    let model = load_model(&cli.model)?;
    let out = match &cli.command {
        Command::Validate { window } => {
            let r = validate(&model, *window);
            let (a1, a2) = r.drift.as_ref().map_or((f64::NAN, f64::NAN), |d| (d.a1, d.a2));
            Output::Report(vec![
                ("s0", Cell::Int(model.s0() as i64)),
                ("stochastic", Cell::Bool(r.stochastic)),
                ("aperiodic_hint", Cell::Bool(r.aperiodic_hint)),
                ("p_irreducible_hint", Cell::Bool(r.p_irreducible_hint)),
                ("p_plus_irreducible_hint", Cell::Bool(r.p_plus_irreducible_hint)),
                ("drift_a1", Cell::Float(a1)),
                ("drift_a2", Cell::Float(a2)),
                ("negative_drift", Cell::Bool(r.negative_drift)),
                ("window", Cell::Int(r.window_size as i64)),
            ])
        }
        Command::Chi { theta } => Output::Values(vec![("chi", Cell::Float(chi(&model, *theta)?))]),
        Command::GammaBoundary { points } => {
            let g = extreme_points(&model)?;
            let rows = trace_with(&g, *points)?
                .into_iter()
                .map(|s| vec![Cell::Float(s.theta1), Cell::Float(s.zeta_lower), Cell::Float(s.zeta_upper)])
                .collect();
            Output::Table {
                header: vec!["theta1", "zeta_lower", "zeta_upper"],
                rows,
            }
        }
        Command::ExtremePoints => {
            let g = extreme_points(&model)?;
            let points = [
                ("theta_bar_1", g.theta_bar_1),
                ("theta_bar_2", g.theta_bar_2),
                ("theta_bar_11", g.theta_bar_11),
                ("theta_under_1", g.theta_under_1),
                ("theta_under_2", g.theta_under_2),
            ];
            let rows = points
                .iter()
                .map(|(name, p)| {
                    vec![
                        Cell::Text(name.to_string()),
                        Cell::Float(p[0]),
                        Cell::Float(p[1]),
                        Cell::Bool(g.flat_segments.contains(name)),
                    ]
                })
                .collect();
            Output::Table {
                header: vec!["point", "theta1", "theta2", "flat_segment"],
                rows,
            }
        }
        Command::DecayRate { c } => {
            let g = extreme_points(&model)?;
            let r = decay_rate_with(&g, *c)?;
            if r.flat_segment {
                warn("maximizer sits at an end of the boundary arc (flat segment or corner)");
            }
            Output::Values(vec![("rate", Cell::Float(r.rate)), ("argmax", Cell::Pair(r.argmax))])
        }
        Command::MarginalDecay { c } => Output::Values(vec![("rate", Cell::Float(marginal_decay_rate(&model, *c)?))]),
        Command::Domain { theta } => {
            let g = extreme_points(&model)?;
            Output::Values(vec![("inside", Cell::Bool(domain_contains_with(&g, *theta)?))])
        }
        Command::Occupation { origin, l } => {
            let t = truncated_fundamental(&model, *origin, *l)?;
            let rows = t
                .iter()
                .map(|(x1, x2, j, v)| vec![Cell::Int(x1 as i64), Cell::Int(x2 as i64), Cell::Int(j as i64 + 1), Cell::Float(v)])
                .collect();
            Output::Table {
                header: vec!["x1p", "x2p", "jp", "value"],
                rows,
            }
        }
        Command::Simulate { origin, l, paths, seed, workers } => {
            let mut opts = SimulationOptions::new(*paths, *seed, *l);
            opts.workers = effective_workers(*workers)?;
            eprintln!("# workers={}", opts.workers);
            let e = simulate_occupation_with(&model, *origin, &opts)?;
            if e.cap_warning {
                warn(&format!("{} paths hit the step cap of {}", e.capped_paths, opts.step_cap));
            }
            let mut rows = Vec::with_capacity(e.mean.len());
            for x1 in 0..=*l {
                for x2 in 0..=*l {
                    for j in 0..e.s0 {
                        let k = e.index(x1, x2, j);
                        rows.push(vec![
                            Cell::Int(x1 as i64),
                            Cell::Int(x2 as i64),
                            Cell::Int(j as i64 + 1),
                            Cell::Float(e.mean[k]),
                            Cell::Float(e.half_width[k]),
                        ]);
                    }
                }
            }
            Output::Table {
                header: vec!["x1p", "x2p", "jp", "mean", "half_width"],
                rows,
            }
        }
        Command::EmpiricalDecay { c, origin, phase, kmin, kmax, l } => {
            if *phase == 0 {
                return Err(Failure::Refusal("phases are numbered from 1".into()));
            }
            let d = empirical_decay(&model, *origin, *c, phase - 1, *kmin, *kmax, *l)?;
            if let Some(w) = &d.warning {
                warn(w);
            }
            let rows = d.ratios.iter().map(|&(k, r)| vec![Cell::Int(k as i64), Cell::Float(r)]).collect();
            Output::Table {
                header: vec!["k", "ratio"],
                rows,
            }
        }
        Command::Mgf { origin, theta, l } => {
            let m = mgf_partial(&model, (origin[0], origin[1]), *theta, *l)?;
            let mut rows = Vec::new();
            for j in 0..m.nrows() {
                for jp in 0..m.ncols() {
                    rows.push(vec![Cell::Int(j as i64 + 1), Cell::Int(jp as i64 + 1), Cell::Float(m[(j, jp)])]);
                }
            }
            Output::Table {
                header: vec!["j", "jp", "value"],
                rows,
            }
        }
        Command::Residual { origin, theta, l } => {
            let r = functional_equation_residual(&model, (origin[0], origin[1]), *theta, *l)?;
            Output::Values(vec![("residual", Cell::Float(r))])
        }
        Command::RateMatrix { alpha, k } => {
            let t = build_qbd(&model, *alpha, *k)?;
            let rate = solve_rate_matrix(&t)?;
            if let Some(path) = &cli.out {
                let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Numeric(e.to_string()))?;
                let io = |e: csv::Error| Failure::Numeric(e.to_string());
                w.write_record(["row", "col", "value"]).map_err(io)?;
                for r in 0..rate.r.nrows() {
                    for c in 0..rate.r.ncols() {
                        w.write_record([r.to_string(), c.to_string(), fmt_f64(rate.r[(r, c)])]).map_err(io)?;
                    }
                }
                w.flush().map_err(|e| Failure::Numeric(e.to_string()))?;
            }
            let cp = cp_estimate(&rate)?;
            return Ok(Output::Report(vec![
                ("dim", Cell::Int(t.dim() as i64)),
                ("iterations", Cell::Int(rate.iterations as i64)),
                ("residual", Cell::Float(rate.residual)),
                ("spr", Cell::Float(1.0 / cp)),
                ("log_cp", Cell::Float(cp.ln())),
            ]));
        }
        Command::CpCurve { alpha, k } => {
            let g = extreme_points(&model)?;
            let reference = match alpha {
                Alpha::X1 => g.theta_bar_1[0],
                Alpha::X2 => g.theta_bar_2[1],
                Alpha::Diagonal => g.theta_bar_11[0] + g.theta_bar_11[1],
            };
            let mut rows = Vec::new();
            for &kk in k {
                let rate = solve_rate_matrix(&build_qbd(&model, *alpha, kk)?)?;
                rows.push(vec![
                    Cell::Text(alpha.to_string()),
                    Cell::Int(kk as i64),
                    Cell::Float(cp_estimate(&rate)?.ln()),
                    Cell::Float(reference),
                ]);
            }
            Output::Table {
                header: vec!["alpha", "K", "log_cp", "reference"],
                rows,
            }
        }
        Command::Expand { c } => Output::Document(c_expand(&model, *c)?.expanded.to_json()),
    };
    Ok(out)
}

fn emit(cli: &Cli, out: &Output) -> std::io::Result<()> {
    // rate-matrix writes R itself; its summary stays on stdout.
    let to_file = cli.out.as_ref().filter(|_| !matches!(cli.command, Command::RateMatrix { .. }));
    match to_file {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            out.write(&mut w, cli.json)?;
            w.flush()
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            out.write(&mut w, cli.json)?;
            w.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    for (k, v) in header(&cli) {
        eprintln!("# {k}={v}");
    }
    match run(&cli) {
        Ok(out) => match emit(&cli, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: cannot write output: {e}");
                ExitCode::from(1)
            }
        },
        Err(Failure::Refusal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
