//! Experiment runner for the cluster-Ising QCNN simulation library.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 eigensolver
//! non-convergence, 4 inconclusive Monte-Carlo estimate.

use clap::{Args, Parser, Subcommand};

use spt_qcnn_cli::{config, experiments, output};

use config::{
    ArchKind, ExperimentConfig, ExperimentKind, GsSpec, HamiltonianSpec, LayerName, OutputFormat,
    Phase, SweepAxis, SweepSpec, ThresholdMode,
};
use spt_qcnn::Error;

#[derive(Parser)]
#[command(
    name = "spt-qcnn",
    about = "Cluster-Ising QCNN phase recognition experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<usize>,
    /// Chain length.
    #[arg(long)]
    n: Option<u32>,
    /// Depth list: "2" | "1,2,4" | "1..6" (inclusive).
    #[arg(long)]
    depths: Option<String>,
    #[arg(long, value_parser = parse_phase)]
    phase: Option<Phase>,
    /// Architecture: x-only | alt-xz | alt-cz.
    #[arg(long, value_parser = parse_arch)]
    arch: Option<ArchKind>,
    /// Error channel, e.g. "z:0.03", "x:0.1,y:0.1,z:0.1", "depol:0.015".
    #[arg(long)]
    channel: Option<String>,
    /// Output path for the result record.
    #[arg(long)]
    out: Option<String>,
    /// Output format: csv | json.
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Noisy cluster-state runs on the fast syndrome path (any N).
    ClusterNoise {
        #[command(flatten)]
        common: CommonArgs,
        /// Pure-Z probability grid "start..stop:points" or "a,b,c".
        #[arg(long)]
        grid: Option<String>,
    },
    /// Hamiltonian coupling sweeps on exact ground states (N <= 20).
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Sweep axis: j1 | j2 | h1 | h2.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        #[arg(long)]
        grid: Option<String>,
        /// Base couplings "j1,j2,h1,h2".
        #[arg(long)]
        couplings: Option<String>,
        /// Ground-state solver tolerance.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Threshold error probability of the alternating architecture.
    Threshold {
        #[command(flatten)]
        common: CommonArgs,
        /// Fixed point of the analytic density recursions.
        #[arg(long, conflicts_with = "mc")]
        analytic: bool,
        /// Monte-Carlo bisection on the fast syndrome path.
        #[arg(long)]
        mc: bool,
        #[arg(long)]
        tol: Option<f64>,
        /// Bisection bracket "lo,hi".
        #[arg(long)]
        bracket: Option<String>,
    },
    /// Backpropagated multiscale observable export.
    Backprop {
        #[command(flatten)]
        common: CommonArgs,
        /// Truncation: "none" | "coeff:1e-6" | "terms:100000".
        #[arg(long)]
        truncation: Option<String>,
        /// Skip the conjugated (string-order factored) form.
        #[arg(long)]
        no_conjugate: bool,
    },
    /// Correction-layer truth table export.
    Truthtable {
        #[command(flatten)]
        common: CommonArgs,
        /// Layer: xcorr | zcorr | ccorr.
        #[arg(long, value_parser = parse_layer)]
        layer: Option<LayerName>,
    },
    /// Exact ground state of the cluster-Ising chain.
    Gs {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        couplings: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        /// Split edge degeneracies with a tiny X field on site 1.
        #[arg(long)]
        edge_pinning: bool,
        #[arg(long)]
        max_krylov: Option<usize>,
        /// Amplitude dump path (text header + raw little-endian pairs).
        #[arg(long)]
        dump: Option<String>,
    },
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    match s {
        "zxz" => Ok(Phase::Zxz),
        "zxxxz" => Ok(Phase::Zxxxz),
        other => Err(format!("unknown phase '{other}' (zxz | zxxxz)")),
    }
}

fn parse_arch(s: &str) -> Result<ArchKind, String> {
    match s {
        "x-only" => Ok(ArchKind::XOnly),
        "alt-xz" => Ok(ArchKind::AltXz),
        "alt-cz" => Ok(ArchKind::AltCz),
        other => Err(format!("unknown architecture '{other}'")),
    }
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    match s {
        "j1" => Ok(SweepAxis::J1),
        "j2" => Ok(SweepAxis::J2),
        "h1" => Ok(SweepAxis::H1),
        "h2" => Ok(SweepAxis::H2),
        other => Err(format!("unknown axis '{other}'")),
    }
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("unknown format '{other}'")),
    }
}

fn parse_layer(s: &str) -> Result<LayerName, String> {
    match s {
        "xcorr" => Ok(LayerName::Xcorr),
        "zcorr" => Ok(LayerName::Zcorr),
        "ccorr" => Ok(LayerName::Ccorr),
        other => Err(format!("unknown layer '{other}'")),
    }
}

/// "1..6" (inclusive) or "1,2,4" or "3".
fn parse_depths(s: &str) -> Result<Vec<u32>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let lo: u32 = a.trim().parse().map_err(|_| format!("bad depth '{a}'"))?;
        let hi: u32 = b.trim().parse().map_err(|_| format!("bad depth '{b}'"))?;
        if hi < lo {
            return Err("empty depth range".into());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad depth '{t}'")))
        .collect()
}

/// "start..stop:points" (uniform, inclusive) or "a,b,c".
fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    if let Some((range, count)) = s.split_once(':') {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| format!("bad grid '{s}'"))?;
        let start: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
        let stop: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
        let points: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("bad point count '{count}'"))?;
        if points < 2 {
            return Err("grid needs at least 2 points".into());
        }
        let step = (stop - start) / (points - 1) as f64;
        return Ok((0..points).map(|i| start + step * i as f64).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad number '{t}'")))
        .collect()
}

fn parse_couplings(s: &str) -> Result<HamiltonianSpec, String> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad coupling '{t}'")))
        .collect::<Result<_, String>>()?;
    if vals.len() != 4 {
        return Err("couplings take the form j1,j2,h1,h2".into());
    }
    Ok(HamiltonianSpec {
        j1: vals[0],
        j2: vals[1],
        h1: vals[2],
        h2: vals[3],
    })
}

fn load_base_config(common: &CommonArgs, kind: ExperimentKind) -> Result<ExperimentConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {path}: {e}"))?;
            ExperimentConfig::parse_json(&text)?
        }
        None => ExperimentConfig::parse_json(&format!(
            r#"{{ "experiment": "{}" }}"#,
            serde_json::to_value(kind).unwrap().as_str().unwrap()
        ))?,
    };
    if cfg.experiment != kind {
        return Err(format!(
            "config is for {:?}, subcommand is {:?}",
            cfg.experiment, kind
        ));
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.shots {
        cfg.shots = v;
    }
    if let Some(v) = common.n {
        cfg.n = v;
    }
    if let Some(v) = &common.depths {
        cfg.depths = parse_depths(v)?;
    }
    if let Some(v) = common.phase {
        cfg.phase = v;
    }
    if let Some(v) = common.arch {
        cfg.arch = v;
    }
    if let Some(v) = &common.channel {
        cfg.channel = v.clone();
    }
    if let Some(v) = &common.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = common.format {
        cfg.format = v;
    }
    Ok(cfg)
}

fn build_config(cli: &Command) -> Result<ExperimentConfig, String> {
    Ok(match cli {
        Command::ClusterNoise { common, grid } => {
            let mut cfg = load_base_config(common, ExperimentKind::ClusterNoise)?;
            if let Some(g) = grid {
                cfg.sweep = Some(SweepSpec {
                    axis: SweepAxis::Pz,
                    values: parse_grid(g)?,
                });
            }
            cfg
        }
        Command::Sweep {
            common,
            axis,
            grid,
            couplings,
            tol,
        } => {
            let mut cfg = load_base_config(common, ExperimentKind::Sweep)?;
            if let Some(c) = couplings {
                cfg.hamiltonian = Some(parse_couplings(c)?);
            }
            match (axis, grid) {
                (Some(a), Some(g)) => {
                    cfg.sweep = Some(SweepSpec {
                        axis: *a,
                        values: parse_grid(g)?,
                    });
                }
                (None, None) => {}
                _ => return Err("sweep needs both --axis and --grid (or a config)".into()),
            }
            if let Some(t) = tol {
                cfg.tol = *t;
            }
            cfg
        }
        Command::Threshold {
            common,
            analytic,
            mc,
            tol,
            bracket,
        } => {
            let mut cfg = load_base_config(common, ExperimentKind::Threshold)?;
            let mut spec = cfg.threshold.clone().unwrap_or_default();
            if *analytic {
                spec.mode = ThresholdMode::Analytic;
            }
            if *mc {
                spec.mode = ThresholdMode::Mc;
            }
            if let Some(t) = tol {
                spec.tol = *t;
            }
            if let Some(b) = bracket {
                let (lo, hi) = b
                    .split_once(',')
                    .ok_or_else(|| format!("bad bracket '{b}'"))?;
                spec.bracket = Some((
                    lo.trim().parse().map_err(|_| "bad bracket low".to_string())?,
                    hi.trim().parse().map_err(|_| "bad bracket high".to_string())?,
                ));
            }
            if spec.mode == ThresholdMode::Mc && cfg.shots < 100_000 && common.shots.is_none() {
                // Monte-Carlo probes default to the heavier budget.
                cfg.shots = 100_000;
            }
            if cfg.depths == vec![1, 2] && common.depths.is_none() {
                cfg.depths = vec![4];
            }
            cfg.threshold = Some(spec);
            cfg
        }
        Command::Backprop {
            common,
            truncation,
            no_conjugate,
        } => {
            let mut cfg = load_base_config(common, ExperimentKind::Backprop)?;
            if common.n.is_none() && cfg.n == 1215 {
                cfg.n = 15;
            }
            let mut spec = cfg.backprop.clone().unwrap_or_default();
            if let Some(t) = truncation {
                spec.truncation = match t.as_str() {
                    "none" => config::TruncationSpec::None,
                    other => {
                        if let Some(v) = other.strip_prefix("coeff:") {
                            config::TruncationSpec::Coeff(
                                v.parse().map_err(|_| format!("bad threshold '{v}'"))?,
                            )
                        } else if let Some(v) = other.strip_prefix("terms:") {
                            config::TruncationSpec::MaxTerms(
                                v.parse().map_err(|_| format!("bad term count '{v}'"))?,
                            )
                        } else {
                            return Err(format!("unknown truncation '{other}'"));
                        }
                    }
                };
            }
            if *no_conjugate {
                spec.conjugate = false;
            }
            cfg.backprop = Some(spec);
            cfg
        }
        Command::Truthtable { common, layer } => {
            let mut cfg = load_base_config(common, ExperimentKind::Truthtable)?;
            if common.n.is_none() && cfg.n == 1215 {
                cfg.n = 45;
            }
            if let Some(l) = layer {
                cfg.truthtable = Some(*l);
            }
            if cfg.truthtable.is_none() {
                cfg.truthtable = Some(LayerName::Xcorr);
            }
            cfg
        }
        Command::Gs {
            common,
            couplings,
            tol,
            edge_pinning,
            max_krylov,
            dump,
        } => {
            let mut cfg = load_base_config(common, ExperimentKind::Gs)?;
            if common.n.is_none() && cfg.n == 1215 {
                cfg.n = 15;
            }
            if let Some(c) = couplings {
                cfg.hamiltonian = Some(parse_couplings(c)?);
            }
            let mut spec = cfg.gs.clone().unwrap_or_else(GsSpec::default);
            if let Some(t) = tol {
                spec.tol = *t;
            }
            if *edge_pinning {
                spec.edge_pinning = true;
            }
            if let Some(mk) = max_krylov {
                spec.max_krylov = Some(*mk);
            }
            if let Some(d) = dump {
                spec.dump = Some(d.clone());
            }
            cfg.gs = Some(spec);
            cfg
        }
    })
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Input(_) | Error::Unsupported(_) | Error::Overflow(_) => 2,
        Error::NonConvergence(_) => 3,
        Error::Inconclusive(_) => 4,
        Error::CondViolated(_) => 2,
        Error::Io { .. } => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let cfg = match build_config(&cli.command) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    };
    if let Err(msg) = cfg.validate() {
        eprintln!("error: {msg}");
        std::process::exit(2);
    }
    match experiments::run_experiment(&cfg) {
        Ok(record) => {
            eprintln!(
                "done: {} rows in {} ms (seed {})",
                record.rows.len(),
                record.wall_ms,
                cfg.seed
            );
            if let Some(path) = &cfg.out {
                if let Err(e) = output::emit(&record, cfg.format, path) {
                    eprintln!("error: {e}");
                    std::process::exit(2);
                }
            } else if record.text.is_some() {
                print!("{}", record.text.as_deref().unwrap());
            } else if !record.rows.is_empty() {
                print!("{}", output::csv_text(&record));
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code_for(&e));
        }
    }
}
