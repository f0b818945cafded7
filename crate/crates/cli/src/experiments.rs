//! Experiment orchestration: routes a resolved configuration to the
//! library, drives shot-level parallelism, and aggregates rows.

use serde::Serialize;
use spt_qcnn::decoder::{
    decode_layer, derive_table, Architecture, StateSyndromeSampler, SyndromeString,
};
use spt_qcnn::groundstate::{ground_state_with, LanczosOptions};
use spt_qcnn::heisenberg::{self, BackpropMode};
use spt_qcnn::model::SopKind;
use spt_qcnn::noise::{shot_rng, ChannelSpec};
use spt_qcnn::threshold;
use spt_qcnn::{exec, Error};

use crate::config::{
    ExperimentConfig, ExperimentKind, SweepAxis, ThresholdMode, TruncationSpec,
};

/// One output row of a sweep-style experiment.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub sweep_value: f64,
    pub depth: u32,
    pub y: f64,
    pub y_stderr: f64,
    pub density: f64,
    pub shots: usize,
    pub seed: u64,
}

/// Collected experiment output: the resolved config, data rows and any
/// scalar results; wall-clock stays out of the serialized record so result
/// files are byte-identical across re-runs.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub version: String,
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_state: Option<GroundStateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip)]
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdResult {
    pub mode: String,
    pub p_th: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundStateSummary {
    pub energy: f64,
    pub residual: f64,
    pub gap_estimate: f64,
    pub degenerate: bool,
}

impl ResultRecord {
    fn new(config: &ExperimentConfig) -> Self {
        ResultRecord {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            rows: Vec::new(),
            threshold: None,
            ground_state: None,
            text: None,
            wall_ms: 0,
        }
    }
}

/// Per-grid-point stream seed, decorrelated across points but fully
/// determined by the configured seed.
fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Decodes one syndrome through the deepest requested layer, recording the
/// per-depth output mean and sublattice density.
struct DepthProbe<'a> {
    tables: Vec<&'a spt_qcnn::decoder::DecoderTable>,
    depths: &'a [u32],
    positions: Vec<Vec<u32>>,
    center: u32,
}

impl<'a> DepthProbe<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, Error> {
        let max_depth = *cfg.depths.iter().max().unwrap();
        let deepest = cfg.arch.build(cfg.phase, max_depth);
        deepest.validate(cfg.n)?;
        let tables = deepest
            .layers
            .iter()
            .map(|&l| derive_table(deepest.disentangler, l))
            .collect::<Result<_, _>>()?;
        let positions = cfg
            .depths
            .iter()
            .map(|&d| cfg.arch.build(cfg.phase, d).output_positions(cfg.n))
            .collect();
        Ok(DepthProbe {
            tables,
            depths: &cfg.depths,
            positions,
            center: cfg.n.div_ceil(2),
        })
    }

    /// Returns `(y, density)` per requested depth for one shot.
    fn run(&self, x: &SyndromeString) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.depths.len());
        let mut state = x.clone();
        for (i, table) in self.tables.iter().enumerate() {
            let f = i as u32 + 1;
            state = decode_layer(&state, table, f, self.center);
            if let Some(slot) = self.depths.iter().position(|&d| d == f) {
                let positions = &self.positions[slot];
                let mean = positions
                    .iter()
                    .map(|&p| 1.0 - 2.0 * state.get(p) as u8 as f64)
                    .sum::<f64>()
                    / positions.len() as f64;
                let density = spt_qcnn::decoder::sublattice_density(&state, f, self.center);
                out.push((mean, density));
            }
        }
        out
    }
}

fn aggregate_rows(
    cfg: &ExperimentConfig,
    sweep_value: f64,
    seed: u64,
    per_shot: Vec<Vec<(f64, f64)>>,
) -> Vec<Row> {
    let mut rows = Vec::new();
    for (slot, &depth) in cfg.depths.iter().enumerate() {
        let ys: Vec<f64> = per_shot.iter().map(|v| v[slot].0).collect();
        let ds: Vec<f64> = per_shot.iter().map(|v| v[slot].1).collect();
        let (y, y_stderr) = exec::mean_stderr(&ys);
        let (density, _) = exec::mean_stderr(&ds);
        rows.push(Row {
            sweep_value,
            depth,
            y,
            y_stderr,
            density,
            shots: cfg.shots,
            seed,
        });
    }
    rows
}

fn run_cluster_noise(cfg: &ExperimentConfig, record: &mut ResultRecord) -> Result<(), Error> {
    let base = cfg.channel_spec()?;
    let grid: Vec<f64> = match &cfg.sweep {
        Some(s) => s.values.clone(),
        None => vec![base.pz],
    };
    let probe = DepthProbe::new(cfg)?;
    let kind = cfg.phase.kind();
    let flips = spt_qcnn::decoder::FlipTable::new(kind, cfg.n);
    for (gi, &pz) in grid.iter().enumerate() {
        let ch = ChannelSpec::new(base.px, base.py, pz)?;
        let seed = point_seed(cfg.seed, gi);
        let per_shot: Vec<Vec<(f64, f64)>> = exec::map_shots(cfg.shots, |shot| {
            let mut rng = shot_rng(seed, shot as u64);
            let mut s = SyndromeString::zeros(cfg.n);
            flips.apply_sampled(&ch, &mut rng, &mut s);
            probe.run(&s)
        });
        record.rows.extend(aggregate_rows(cfg, pz, seed, per_shot));
    }
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, record: &mut ResultRecord) -> Result<(), Error> {
    let ch = cfg.channel_spec()?;
    let sweep = cfg.sweep.as_ref().expect("validated");
    let base = cfg.hamiltonian.expect("validated");
    let probe = DepthProbe::new(cfg)?;
    let kind = cfg.phase.kind();
    for (gi, &value) in sweep.values.iter().enumerate() {
        let mut spec = base;
        match sweep.axis {
            SweepAxis::J1 => spec.j1 = value,
            SweepAxis::J2 => spec.j2 = value,
            SweepAxis::H1 => spec.h1 = value,
            SweepAxis::H2 => spec.h2 = value,
            SweepAxis::Pz => unreachable!("validated"),
        }
        let params = spec.params(cfg.n)?;
        let opts = LanczosOptions {
            tol: cfg.tol,
            ..LanczosOptions::default()
        };
        let g = ground_state_with(&params, opts)?;
        let sampler = StateSyndromeSampler::new(&g.state, kind)?;
        let seed = point_seed(cfg.seed, gi);
        let per_shot: Vec<Vec<(f64, f64)>> = exec::map_shots(cfg.shots, |shot| {
            let mut rng = shot_rng(seed, shot as u64);
            let s = sampler.sample_one(&ch, &mut rng);
            probe.run(&s)
        });
        record.rows.extend(aggregate_rows(cfg, value, seed, per_shot));
    }
    Ok(())
}

fn run_threshold(cfg: &ExperimentConfig, record: &mut ResultRecord) -> Result<(), Error> {
    let spec = cfg.threshold.clone().unwrap_or_default();
    let p_th = match spec.mode {
        ThresholdMode::Analytic => threshold::analytic_threshold(),
        ThresholdMode::Mc => {
            let depth = cfg.depths.iter().copied().max().unwrap_or(4).max(4);
            let arch = Architecture::alternating(cfg.phase.kind(), depth);
            match spec.bracket {
                Some((lo, hi)) => threshold::mc_threshold_in(
                    cfg.phase.kind(),
                    &arch,
                    cfg.n,
                    cfg.shots,
                    cfg.seed,
                    spec.tol,
                    (lo, hi),
                )?,
                None => threshold::mc_threshold(
                    cfg.phase.kind(),
                    &arch,
                    cfg.n,
                    cfg.shots,
                    cfg.seed,
                    spec.tol,
                )?,
            }
        }
    };
    println!("p_th = {p_th:.6}");
    record.threshold = Some(ThresholdResult {
        mode: match spec.mode {
            ThresholdMode::Analytic => "analytic".into(),
            ThresholdMode::Mc => "mc".into(),
        },
        p_th,
        tol: spec.tol,
    });
    Ok(())
}

fn run_backprop(cfg: &ExperimentConfig, record: &mut ResultRecord) -> Result<(), Error> {
    let spec = cfg.backprop.clone().unwrap_or_default();
    let depth = cfg.depths.iter().copied().max().unwrap();
    let arch = cfg.arch.build(cfg.phase, depth);
    if arch.disentangler != SopKind::Zxz {
        return Err(Error::Unsupported(
            "expansion export is wired to the CZ-chain (zxz) pipeline".into(),
        ));
    }
    let mode = match spec.truncation {
        TruncationSpec::None => BackpropMode::default(),
        TruncationSpec::Coeff(eps) => BackpropMode::CoeffThreshold(eps),
        TruncationSpec::MaxTerms(k) => BackpropMode::MaxTerms(k),
    };
    let result = heisenberg::backprop(&arch, cfg.n, mode)?;
    let mut text = String::new();
    text.push_str(&format!(
        "# terms: {}  exact: {}\n",
        result.op.term_count(),
        result.exact
    ));
    text.push_str(&result.op.export_text());
    if spec.conjugate {
        let sum = heisenberg::conjugate_by_cz_chain(&result.op);
        text.push_str("# conjugated (string-order factored) form\n");
        text.push_str(&sum.export_text());
    }
    record.text = Some(text);
    Ok(())
}

fn run_truthtable(cfg: &ExperimentConfig, record: &mut ResultRecord) -> Result<(), Error> {
    let layer = cfg
        .truthtable
        .ok_or_else(|| Error::Input("truthtable needs a layer".into()))?;
    let table = derive_table(cfg.phase.kind(), layer.layer())?;
    record.text = Some(table.export_text());
    Ok(())
}

fn run_gs(cfg: &ExperimentConfig, record: &mut ResultRecord) -> Result<(), Error> {
    let spec = cfg.gs.clone().unwrap_or_default();
    let params = cfg.hamiltonian.expect("validated").params(cfg.n)?;
    let mut opts = LanczosOptions {
        tol: spec.tol,
        edge_pinning: spec.edge_pinning,
        ..LanczosOptions::default()
    };
    if let Some(mk) = spec.max_krylov {
        opts.max_krylov = mk;
    }
    let g = ground_state_with(&params, opts)?;
    println!(
        "energy = {:.12}  residual = {:.3e}  gap_estimate = {:.6e}  degenerate = {}",
        g.energy, g.residual, g.gap_estimate, g.degenerate
    );
    if let Some(path) = &spec.dump {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        spt_qcnn::groundstate::write_state_dump(std::io::BufWriter::new(file), &params, &g, path)?;
    }
    record.ground_state = Some(GroundStateSummary {
        energy: g.energy,
        residual: g.residual,
        gap_estimate: g.gap_estimate,
        degenerate: g.degenerate,
    });
    Ok(())
}

/// Runs a validated configuration; deterministic given the seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRecord, Error> {
    cfg.validate().map_err(Error::Input)?;
    let started = std::time::Instant::now();
    let mut record = ResultRecord::new(cfg);
    match cfg.experiment {
        ExperimentKind::ClusterNoise => run_cluster_noise(cfg, &mut record)?,
        ExperimentKind::Sweep => run_sweep(cfg, &mut record)?,
        ExperimentKind::Threshold => run_threshold(cfg, &mut record)?,
        ExperimentKind::Backprop => run_backprop(cfg, &mut record)?,
        ExperimentKind::Truthtable => run_truthtable(cfg, &mut record)?,
        ExperimentKind::Gs => run_gs(cfg, &mut record)?,
    }
    record.wall_ms = started.elapsed().as_millis();
    Ok(record)
}
