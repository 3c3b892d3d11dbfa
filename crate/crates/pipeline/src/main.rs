// SPDX-License-Identifier: Apache-2.0

//! `vfl`: secure vertical federated logistic regression from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 protocol abort,
//! 3 theory check failure.

use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use vfl_clk::{build_clk, match_clks, Linkage, Record};
use vfl_he::{keygen, keygen_insecure};
use vfl_learn::{evaluate, hstack, train_sag_weighted, Dataset, LabelRule, Standardizer, Table, TrainConfig};
use vfl_pipeline::{
    read_clks, read_linkage, run, run_theory, standardize_view, train_config, views, with_intercept, write_clks,
    write_keypair, write_linkage, write_views, Mode, PipelineError, RunConfig,
};
use vfl_protocol::{
    joined, mask_weights, run_coordinator, run_provider_a, run_provider_b, run_session, tcp_endpoint, PartyRole,
    ProviderAData, ProviderBData, SessionParams, TcpAddrs,
};
use vfl_theory::Report;

const COORDINATOR_ADDR: &str = "VFL_COORDINATOR_ADDR";
const PROVIDER_A_ADDR: &str = "VFL_PROVIDER_A_ADDR";

#[derive(Parser)]
#[command(name = "vfl", version, about = "Secure vertical federated logistic regression with CLK entity resolution")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Kv,
}

#[derive(Subcommand)]
enum Command {
    /// End-to-end experiment in the configured mode.
    Run,
    /// Numerical checks of the entity-resolution bounds.
    Theory {
        /// Instances per suite (default: theory.instances).
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Writes the two provider views, the test set and the ground truth.
    Split {
        #[arg(long)]
        out: PathBuf,
    },
    /// Generates a Paillier key pair as `<out>.pub` and `<out>.key`.
    Keygen {
        #[arg(long, default_value_t = 1024)]
        bits: u64,
        #[arg(long)]
        out: String,
        /// Permits keys below 1024 bits.
        #[arg(long)]
        insecure: bool,
    },
    /// Encodes the identifier columns of a CSV as CLKs (`clk.*` settings).
    Clk {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Links two CLK files by Dice similarity (`match.threshold`, `seed`).
    Match {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypted training on linked provider views.
    TrainSecure {
        #[command(flatten)]
        inputs: TrainInputs,
        /// Party to run; `all` runs the three parties in-process. Socket
        /// roles read VFL_COORDINATOR_ADDR and VFL_PROVIDER_A_ADDR.
        #[arg(long, value_enum, default_value_t = Role::All)]
        role: Role,
    },
    /// Plaintext masked training on linked provider views.
    TrainPlain {
        #[command(flatten)]
        inputs: TrainInputs,
    },
}

/// View files as written by `split`: features by the configured column
/// lists, labels as 1/0 in A's label column.
#[derive(Args)]
struct TrainInputs {
    /// Provider A's view.
    #[arg(long)]
    a: Option<PathBuf>,
    /// Provider B's view.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Linkage file written by `match`.
    #[arg(long)]
    linkage: PathBuf,
    /// Held-out set with both feature blocks and the label, for metrics.
    #[arg(long)]
    test: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Role {
    All,
    Coordinator,
    ProviderA,
    ProviderB,
}

enum Failure {
    Usage(String),
    Abort(String),
    Theory,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Protocol(p) => Failure::Abort(p.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

/// Key-value fields rendered like every other report.
struct Fields(Vec<(String, String)>);

impl Report for Fields {
    fn fields(&self) -> Vec<(String, String)> {
        self.0.clone()
    }
}

fn emit(format: Format, title: &str, report: &dyn Report) {
    match format {
        Format::Text => print!("{}", report.text(title)),
        Format::Kv => print!("{}", report.key_values("")),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Abort(msg)) => {
            eprintln!("protocol aborted: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Theory) => {
            eprintln!("theory checks failed");
            ExitCode::from(3)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Run if cfg.mode == Mode::Theory => theory(cli.format, &cfg),
        Command::Run => {
            let report = run(&cfg)?;
            emit(cli.format, &format!("{} run", cfg.mode.name()), &report);
            match report.abort {
                Some(reason) => Err(Failure::Abort(reason)),
                None => Ok(()),
            }
        }
        Command::Theory { instances } => {
            if let Some(n) = instances {
                cfg.theory_instances = *n;
            }
            theory(cli.format, &cfg)
        }
        Command::Split { out } => {
            let v = views(&cfg)?;
            write_views(out, &cfg, &v)?;
            let f = Fields(vec![
                ("rows_a".into(), v.split.a.y.len().to_string()),
                ("rows_b".into(), v.split.b.x.nrows().to_string()),
                ("test_rows".into(), v.test_ids.len().to_string()),
                ("out".into(), out.display().to_string()),
            ]);
            emit(cli.format, "split", &f);
            Ok(())
        }
        Command::Keygen { bits, out, insecure } => {
            let (_, sk) = if *insecure { keygen_insecure(*bits) } else { keygen(*bits) }.map_err(err)?;
            write_keypair(out, &sk)?;
            emit(
                cli.format,
                "keygen",
                &Fields(vec![("bits".into(), bits.to_string()), ("prefix".into(), out.clone())]),
            );
            Ok(())
        }
        Command::Clk { input, out } => {
            let table = Table::read(input).map_err(err)?;
            let cols: Vec<usize> =
                cfg.clk.fields.iter().map(|c| table.column(c)).collect::<vfl_learn::Result<_>>().map_err(err)?;
            let clks: Vec<_> = table
                .rows
                .iter()
                .map(|r| {
                    let rec: Record =
                        cfg.clk.fields.iter().zip(&cols).map(|(k, &c)| (k.clone(), r[c].clone())).collect();
                    build_clk(&rec, &cfg.clk)
                })
                .collect();
            write_clks(out, &clks)?;
            emit(cli.format, "clk", &Fields(vec![("records".into(), clks.len().to_string())]));
            Ok(())
        }
        Command::Match { a, b, out } => {
            let link = match_clks(&read_clks(a)?, &read_clks(b)?, cfg.threshold, cfg.seed).map_err(err)?;
            write_linkage(out, &link)?;
            let f =
                Fields(vec![("rows".into(), link.len().to_string()), ("matches".into(), link.matches().to_string())]);
            emit(cli.format, "match", &f);
            Ok(())
        }
        Command::TrainSecure { inputs, role } => train_secure(cli.format, &cfg, inputs, *role),
        Command::TrainPlain { inputs } => train_plain(cli.format, &cfg, inputs),
    }
}

fn theory(format: Format, cfg: &RunConfig) -> Result<(), Failure> {
    let t = run_theory(cfg.theory_instances, cfg.seed);
    emit(format, "theory checks", &t);
    if t.passed() {
        Ok(())
    } else {
        Err(Failure::Theory)
    }
}

/// A view file's features standardized by their own statistics.
struct View {
    x: DMatrix<f64>,
    y: Option<Vec<f64>>,
    scale: Standardizer,
}

fn read_view(path: Option<&Path>, features: &[String], label: Option<&str>, flag: &str) -> Result<View, Failure> {
    let path = path.ok_or_else(|| Failure::Usage(format!("--{flag} is required for this role")))?;
    let table = Table::read(path).map_err(err)?;
    let mut x = table.numeric(features).map_err(err)?;
    let scale = standardize_view(&mut x)?;
    let y = label.map(|l| table.labels(l, &LabelRule::Binary)).transpose().map_err(err)?;
    Ok(View { x, y, scale })
}

fn provider_a(cfg: &RunConfig, inputs: &TrainInputs, link: &Linkage) -> Result<(ProviderAData, Standardizer), Failure> {
    let v = read_view(inputs.a.as_deref(), &cfg.features_a, Some(&cfg.label), "a")?;
    let x = with_intercept(&v.x);
    check_rows("a", x.nrows(), &link.sigma)?;
    let y = v.y.unwrap_or_default();
    Ok((ProviderAData { x: x.select_rows(&link.sigma), y: link.sigma.iter().map(|&i| y[i]).collect() }, v.scale))
}

fn provider_b(cfg: &RunConfig, inputs: &TrainInputs, link: &Linkage) -> Result<(ProviderBData, Standardizer), Failure> {
    let v = read_view(inputs.b.as_deref(), &cfg.features_b, None, "b")?;
    check_rows("b", v.x.nrows(), &link.tau)?;
    Ok((ProviderBData { x: v.x.select_rows(&link.tau) }, v.scale))
}

fn check_rows(flag: &str, rows: usize, idx: &[usize]) -> Result<(), Failure> {
    match idx.iter().find(|&&i| i >= rows) {
        Some(i) => Err(Failure::Usage(format!("linkage refers to row {i} but --{flag} has {rows} rows"))),
        None => Ok(()),
    }
}

fn test_metrics(cfg: &RunConfig, path: &Path, sa: &Standardizer, sb: &Standardizer) -> Result<Dataset, Failure> {
    let table = Table::read(path).map_err(err)?;
    let (mut xa, mut xb) = (table.numeric(&cfg.features_a).map_err(err)?, table.numeric(&cfg.features_b).map_err(err)?);
    sa.transform(&mut xa);
    sb.transform(&mut xb);
    let y = table.labels(&cfg.label, &LabelRule::Binary).map_err(err)?;
    Dataset::new(hstack(&with_intercept(&xa), &xb), y).map_err(err)
}

fn model_fields(theta: &nalgebra::DVector<f64>, epochs: usize, train: &TrainConfig) -> Vec<(String, String)> {
    vec![
        ("holdout".into(), train.holdout.to_string()),
        ("batch".into(), train.batch.to_string()),
        ("epochs".into(), epochs.to_string()),
        ("theta".into(), theta.iter().map(|v| format!("{v:.9e}")).collect::<Vec<_>>().join(",")),
    ]
}

fn metric_fields(
    cfg: &RunConfig,
    inputs: &TrainInputs,
    theta: &nalgebra::DVector<f64>,
    scales: (&Standardizer, &Standardizer),
) -> Result<Vec<(String, String)>, Failure> {
    let Some(path) = &inputs.test else {
        return Ok(Vec::new());
    };
    let m = evaluate(theta, &test_metrics(cfg, path, scales.0, scales.1)?).map_err(err)?;
    Ok(vec![
        ("accuracy".into(), format!("{:.4}", m.accuracy)),
        ("auc".into(), format!("{:.4}", m.auc)),
        ("f1".into(), format!("{:.4}", m.f1)),
    ])
}

fn train_plain(format: Format, cfg: &RunConfig, inputs: &TrainInputs) -> Result<(), Failure> {
    let link = read_linkage(&inputs.linkage)?;
    let train = train_config(cfg, link.len())?;
    let (a, sa) = provider_a(cfg, inputs, &link)?;
    let (b, sb) = provider_b(cfg, inputs, &link)?;
    let data = joined(&a, &b).map_err(err)?;
    let out = train_sag_weighted(&data, Some(&mask_weights(&link.mask)), &train).map_err(err)?;
    let mut f = model_fields(&out.theta, out.epochs, &train);
    f.extend(metric_fields(cfg, inputs, &out.theta, (&sa, &sb))?);
    emit(format, "plaintext training", &Fields(f));
    Ok(())
}

fn addr(var: &str) -> Result<SocketAddr, Failure> {
    let v = std::env::var(var).map_err(|_| Failure::Usage(format!("{var} is not set")))?;
    v.parse().map_err(|_| Failure::Usage(format!("{var}={v:?} is not a socket address")))
}

fn train_secure(format: Format, cfg: &RunConfig, inputs: &TrainInputs, role: Role) -> Result<(), Failure> {
    if cfg.train.loss != vfl_learn::LossKind::Taylor {
        return Err(Failure::Usage("secure training supports train.loss = taylor only".into()));
    }
    let link = read_linkage(&inputs.linkage)?;
    let train = train_config(cfg, link.len())?;
    let params = SessionParams {
        session: cfg.seed,
        key_bits: cfg.key_bits,
        allow_insecure_key: cfg.allow_insecure_key,
        leakage_ceiling: cfg.leakage_ceiling,
        ..SessionParams::new(link.len(), cfg.features_a.len() + 1, cfg.features_b.len(), train.clone())
    };
    let coordinator_fields = |c: &vfl_protocol::CoordinatorOutput| {
        let mut f = model_fields(&c.theta, c.epochs, &train);
        f.push(("stopped_early".into(), c.stopped_early.to_string()));
        f.push(("leakage.batch_at_most_one_match".into(), format!("{:.6e}", c.batch_leakage)));
        f
    };
    if role == Role::All {
        let (a, sa) = provider_a(cfg, inputs, &link)?;
        let (b, sb) = provider_b(cfg, inputs, &link)?;
        let out = run_session(&params, &link.mask, &a, &b, None).map_err(|f| Failure::Abort(f.error.to_string()))?;
        let mut f = coordinator_fields(&out.coordinator);
        f.extend(metric_fields(cfg, inputs, &out.coordinator.theta, (&sa, &sb))?);
        emit(format, "secure training", &Fields(f));
        return Ok(());
    }

    let addrs = TcpAddrs { coordinator: addr(COORDINATOR_ADDR)?, provider_a: addr(PROVIDER_A_ADDR)? };
    let party = match role {
        Role::Coordinator => PartyRole::Coordinator,
        Role::ProviderA => PartyRole::ProviderA,
        Role::ProviderB => PartyRole::ProviderB,
        Role::All => unreachable!("handled above"),
    };
    let listener = match party {
        PartyRole::Coordinator => Some(TcpListener::bind(addrs.coordinator).map_err(err)?),
        PartyRole::ProviderA => Some(TcpListener::bind(addrs.provider_a).map_err(err)?),
        PartyRole::ProviderB => None,
    };
    let abort = |e: vfl_protocol::ProtocolError| Failure::Abort(e.to_string());
    let mut ep = tcp_endpoint(party, params.session, listener.as_ref(), addrs, params.timeout).map_err(abort)?;
    let f = match party {
        PartyRole::Coordinator => {
            let out = run_coordinator(&params, &link.mask, &mut ep).map_err(|f| abort(f.error))?;
            coordinator_fields(&out)
        }
        PartyRole::ProviderA => {
            let (a, _) = provider_a(cfg, inputs, &link)?;
            let r = run_provider_a(&params, &a, &mut ep).map_err(abort)?;
            vec![
                ("gradient_rounds".into(), r.gradient_rounds.to_string()),
                ("loss_rounds".into(), r.loss_rounds.to_string()),
            ]
        }
        PartyRole::ProviderB => {
            let (b, _) = provider_b(cfg, inputs, &link)?;
            let r = run_provider_b(&params, &b, &mut ep).map_err(abort)?;
            vec![
                ("gradient_rounds".into(), r.gradient_rounds.to_string()),
                ("loss_rounds".into(), r.loss_rounds.to_string()),
            ]
        }
    };
    emit(format, &format!("secure training ({party:?})"), &Fields(f));
    Ok(())
}
