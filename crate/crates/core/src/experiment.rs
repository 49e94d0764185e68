//! The three experiment commands and their on-disk artifacts.
//!
//! Every command is a pure function of the resolved configuration: reruns
//! with the same seed write byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::channel::{self, ChannelConfig};
use crate::config::ExperimentConfig;
use crate::data::{self, AttackKind, LabeledDataset, Partition};
use crate::error::{FlccError, Result};
use crate::federate::{self, FederationData, FederationOutcome};
use crate::geometry::{self, CellPlan, Intensity, NodeSite, Region};
use crate::learn::{self, checkpoint, Examples};
use crate::mac::Mode;
use crate::report::{self, Chart, Series};
use crate::rng::{self, domain};

pub const ROUND_LOG: &str = "round_log.csv";
pub const TRUST_LOG: &str = "trust_log.csv";
pub const MAC_TRACE: &str = "mac_trace.csv";
pub const LAYOUT: &str = "layout.csv";
pub const CELLS: &str = "cells.csv";
pub const PARTITION: &str = "partition.csv";
pub const RESOLVED_CONFIG: &str = "config.resolved";
pub const MODEL: &str = "model.bin";
pub const CURVES_SVG: &str = "curves.svg";
pub const PS_CURVE: &str = "ps_curve.csv";
pub const PS_SVG: &str = "ps_curve.svg";
pub const COMPARE_CSV: &str = "compare.csv";
pub const COMPARE_SVG: &str = "compare.svg";

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| FlccError::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FlccError::io(dir, e))
}

/// Node placement, tessellation, channel plan and cell membership.
pub fn build_layout(cfg: &ExperimentConfig) -> Result<(Vec<NodeSite>, CellPlan)> {
    let g = &cfg.geometry;
    let region = Region::new(g.width, g.height)?;
    let plan = geometry::build_hex_tessellation(&region, g.cell_radius)?;
    let plan = geometry::assign_frequencies(&plan, g.num_channels)?;
    let nodes = if g.node_count > 0 {
        geometry::sample_fixed_count(g.node_count, &region, g.untrusted_fraction, g.tx_power, cfg.seed)?
    } else {
        geometry::sample_ppp(Intensity::new(g.lambda)?, &region, g.untrusted_fraction, g.tx_power, cfg.seed)?
    };
    let nodes = geometry::assign_cells(&nodes, &plan)?;
    Ok((nodes, plan))
}

pub fn load_datasets(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let d = &cfg.data;
    let train = data::load_idx(&d.train_images, &d.train_labels)?;
    let test = data::load_idx(&d.test_images, &d.test_labels)?;
    let need = cfg.arch.input_len();
    let (r, c) = train.dims();
    if r * c != need || test.dims() != train.dims() {
        return Err(FlccError::RunInput {
            path: d.train_images.clone(),
            reason: format!(
                "images are {r}x{c} (test {:?}) but {} expects {need} inputs",
                test.dims(),
                cfg.arch
            ),
        });
    }
    Ok((train, test))
}

/// Local datasets and evaluation sets for one federation run.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub partition: Partition,
    pub local: BTreeMap<usize, Examples>,
    pub test: Examples,
    pub validation: Examples,
}

pub fn prepare_data(
    cfg: &ExperimentConfig,
    nodes: &[NodeSite],
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<PreparedData> {
    let ids: Vec<usize> = nodes.iter().map(|n| n.id).collect();
    let mut prng = rng::substream(cfg.seed, &[domain::PARTITION]);
    let partition = data::partition(train.len(), &ids, &cfg.data.partition, &mut prng)?;
    let flip = cfg.attack.filter(|a| a.kind == AttackKind::LabelFlip);
    let local = nodes
        .iter()
        .map(|n| {
            let mut ds = train.subset(&partition[&n.id]);
            if let (Some(atk), geometry::Role::Untrusted) = (flip, n.role) {
                ds = atk.corrupt_dataset(&ds);
            }
            (n.id, ds.to_examples())
        })
        .collect();
    let test_set = if cfg.data.test_size > 0 {
        test.head(cfg.data.test_size)
    } else {
        test.clone()
    };
    if test_set.is_empty() {
        return Err(FlccError::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    Ok(PreparedData {
        partition,
        local,
        validation: test.head(cfg.data.validation_size).to_examples(),
        test: test_set.to_examples(),
    })
}

/// A finished federation run with the inputs needed to export it.
#[derive(Debug, Clone)]
pub struct FlRun {
    pub nodes: Vec<NodeSite>,
    pub plan: CellPlan,
    pub partition: Partition,
    pub outcome: FederationOutcome,
}

/// Runs federated training in `mode` on already loaded data.
pub fn run_fl(
    cfg: &ExperimentConfig,
    mode: Mode,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<FlRun> {
    let (nodes, plan) = build_layout(cfg)?;
    let prepared = prepare_data(cfg, &nodes, train, test)?;
    let initial = learn::init_model(&cfg.arch, cfg.seed)?;
    let mut mac_cfg = cfg.mac;
    mac_cfg.mode = mode;
    let attack = cfg.attack.filter(|a| a.kind != AttackKind::LabelFlip);
    let fed_data = FederationData {
        local: &prepared.local,
        test: &prepared.test,
        validation: &prepared.validation,
        attack,
        initial: &initial,
    };
    let outcome = federate::run_federation(
        &nodes,
        &plan,
        &cfg.channel,
        &mac_cfg,
        &cfg.federation,
        &fed_data,
        cfg.seed,
    )?;
    Ok(FlRun {
        nodes,
        plan,
        partition: prepared.partition,
        outcome,
    })
}

fn sinr_db(s: Option<f64>) -> String {
    match s {
        Some(v) => channel::linear_to_db(v).to_string(),
        None => String::new(),
    }
}

pub fn mac_trace_csv(run: &FlRun) -> String {
    let mut s = String::from("round,node_id,cell_id,channel,attempted,won,sinr_db,success\n");
    for (round, o) in &run.outcome.mac_trace {
        s.push_str(&format!(
            "{round},{},{},{},{},{},{},{}\n",
            o.node_id,
            o.cell_id,
            o.channel.map(|c| c.to_string()).unwrap_or_default(),
            o.attempted,
            o.won_contention,
            sinr_db(o.sinr),
            o.success
        ));
    }
    s
}

pub fn layout_csv(nodes: &[NodeSite]) -> String {
    let mut s = String::from("node_id,x,y,cell_id,role,tx_power\n");
    for n in nodes {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            n.id,
            n.position.x,
            n.position.y,
            n.cell_id.map(|c| c.to_string()).unwrap_or_default(),
            n.role,
            n.tx_power
        ));
    }
    s
}

pub fn cells_csv(plan: &CellPlan) -> String {
    let mut s = String::from("cell_id,cx,cy,channel\n");
    for c in &plan.cells {
        s.push_str(&format!(
            "{},{},{},{}\n",
            c.id,
            c.center.x,
            c.center.y,
            c.channel.map(|c| c.to_string()).unwrap_or_default()
        ));
    }
    s
}

fn curves_svg(label: &str, rounds: &[(f64, f64, f64)]) -> String {
    let acc = rounds.iter().map(|&(r, a, _)| (r, a)).collect();
    let loss = rounds.iter().map(|&(r, _, l)| (r, l)).collect();
    report::render(&[
        Chart {
            title: "Test accuracy".into(),
            x_label: "round".into(),
            y_label: "accuracy".into(),
            series: vec![Series::line(label, acc)],
        },
        Chart {
            title: "Test loss".into(),
            x_label: "round".into(),
            y_label: "cross-entropy".into(),
            series: vec![Series::line(label, loss)],
        },
    ])
}

/// `fl-run`: trains, then writes the round, trust and MAC logs, the layout,
/// the partition manifest, accuracy/loss curves, the resolved configuration
/// and the final model.
pub fn cmd_fl_run(cfg: &ExperimentConfig, mode: Mode, out: &Path) -> Result<FlRun> {
    let (train, test) = load_datasets(cfg)?;
    let run = run_fl(cfg, mode, &train, &test)?;
    ensure_dir(out)?;
    let mut resolved = cfg.clone();
    resolved.mac.mode = mode;
    write(out, RESOLVED_CONFIG, resolved.to_text())?;
    let records = &run.outcome.records;
    write(out, ROUND_LOG, federate::round_log_csv(records))?;
    write(out, TRUST_LOG, federate::trust_log_csv(records))?;
    write(out, MAC_TRACE, mac_trace_csv(&run))?;
    write(out, LAYOUT, layout_csv(&run.nodes))?;
    write(out, CELLS, cells_csv(&run.plan))?;
    write(out, PARTITION, data::partition_manifest(&run.partition))?;
    let pts: Vec<(f64, f64, f64)> = records
        .iter()
        .map(|r| (r.round as f64, r.accuracy, r.loss))
        .collect();
    write(out, CURVES_SVG, curves_svg(&mode.to_string(), &pts))?;
    checkpoint::save(&run.outcome.model, &out.join(MODEL))?;
    Ok(run)
}

/// One row of the success-probability sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsPoint {
    pub t_db: f64,
    pub lambda: f64,
    pub analytic: f64,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub capacity: f64,
}

/// Analytic and simulated success probability over the threshold grid for
/// every configured intensity. Each intensity reuses one random stream
/// across the grid, so simulated curves differ only through the threshold.
pub fn sweep_success_probability(cfg: &ExperimentConfig) -> Result<Vec<PsPoint>> {
    let a = &cfg.analyze;
    let mut out = Vec::new();
    for (li, &lambda) in a.lambdas.iter().enumerate() {
        let intensity = Intensity::new(lambda)?;
        let mc_seed: u64 = rng::substream(cfg.seed, &[domain::MONTE_CARLO, li as u64]).gen();
        for t_db in a.grid() {
            let ch = ChannelConfig {
                sinr_threshold: channel::db_to_linear(t_db),
                ..cfg.channel
            };
            let analytic = channel::analytic_success_probability(
                lambda * ch.active_probability,
                &ch,
                a.distance,
                cfg.geometry.tx_power,
            )?;
            let mc = channel::monte_carlo_success_probability(
                intensity,
                &ch,
                a.distance,
                cfg.geometry.tx_power,
                a.trials,
                mc_seed,
            )?;
            out.push(PsPoint {
                t_db,
                lambda,
                analytic,
                monte_carlo: mc.estimate,
                std_error: mc.std_error,
                capacity: channel::csma_capacity(ch.sinr_threshold, analytic),
            });
        }
    }
    Ok(out)
}

pub fn ps_curve_csv(points: &[PsPoint]) -> String {
    let mut s = String::from("T_dB,lambda,analytic_ps,mc_ps,mc_stderr,capacity\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.t_db, p.lambda, p.analytic, p.monte_carlo, p.std_error, p.capacity
        ));
    }
    s
}

fn ps_svg(points: &[PsPoint], lambdas: &[f64]) -> String {
    let mut ps = Vec::new();
    let mut cap = Vec::new();
    for &l in lambdas {
        let row: Vec<&PsPoint> = points.iter().filter(|p| p.lambda == l).collect();
        ps.push(Series::line(
            format!("analytic, lambda={l}"),
            row.iter().map(|p| (p.t_db, p.analytic)).collect(),
        ));
        ps.push(
            Series::line(
                format!("simulated, lambda={l}"),
                row.iter().map(|p| (p.t_db, p.monte_carlo)).collect(),
            )
            .dashed(),
        );
        cap.push(Series::line(
            format!("lambda={l}"),
            row.iter().map(|p| (p.t_db, p.capacity)).collect(),
        ));
    }
    report::render(&[
        Chart {
            title: "Success probability".into(),
            x_label: "T (dB)".into(),
            y_label: "P(SINR >= T)".into(),
            series: ps,
        },
        Chart {
            title: "Capacity".into(),
            x_label: "T (dB)".into(),
            y_label: "bits/s/Hz".into(),
            series: cap,
        },
    ])
}

/// `net-analyze`: the success-probability sweep as CSV and SVG.
pub fn cmd_net_analyze(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PsPoint>> {
    let points = sweep_success_probability(cfg)?;
    ensure_dir(out)?;
    write(out, RESOLVED_CONFIG, cfg.to_text())?;
    write(out, PS_CURVE, ps_curve_csv(&points))?;
    write(out, PS_SVG, ps_svg(&points, &cfg.analyze.lambdas))?;
    Ok(points)
}

/// Per-round accuracy and loss read back from a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub label: String,
    pub rounds: Vec<(usize, f64, f64)>,
}

pub fn read_round_log(dir: &Path) -> Result<RunSeries> {
    let path = dir.join(ROUND_LOG);
    let bad = |reason: String| FlccError::RunInput {
        path: dir.to_path_buf(),
        reason,
    };
    let mut reader = csv::Reader::from_path(&path).map_err(|e| bad(format!("{ROUND_LOG}: {e}")))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("{ROUND_LOG} has no `{name}` column")))
    };
    let (ri, ai, li) = (col("round")?, col("accuracy")?, col("loss")?);
    let mut rounds = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let parse_err = |what: &str| bad(format!("{ROUND_LOG} row {}: bad {what}", n + 1));
        rounds.push((
            field(ri).parse().map_err(|_| parse_err("round"))?,
            field(ai).parse().map_err(|_| parse_err("accuracy"))?,
            field(li).parse().map_err(|_| parse_err("loss"))?,
        ));
    }
    let mode = fs::read_to_string(dir.join(RESOLVED_CONFIG))
        .ok()
        .and_then(|t| {
            t.lines()
                .find_map(|l| l.strip_prefix("mac.mode = ").map(str::to_string))
        });
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let label = match mode {
        Some(m) => format!("{name} ({m})"),
        None => name,
    };
    Ok(RunSeries { label, rounds })
}

/// `compare`: merges round logs into one CSV and overlays accuracy and loss.
pub fn cmd_compare(dirs: &[PathBuf], out: &Path) -> Result<Vec<RunSeries>> {
    if dirs.len() < 2 {
        return Err(FlccError::InvalidInput(format!(
            "compare needs at least two run directories, got {}",
            dirs.len()
        )));
    }
    let runs = dirs
        .iter()
        .map(|d| read_round_log(d))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(out)?;
    let mut csv = String::from("run,round,accuracy,loss\n");
    for (i, r) in runs.iter().enumerate() {
        for (round, acc, loss) in &r.rounds {
            csv.push_str(&format!("{i},{round},{acc},{loss}\n"));
        }
    }
    write(out, COMPARE_CSV, csv)?;
    let series = |pick: fn(&(usize, f64, f64)) -> f64| -> Vec<Series> {
        runs.iter()
            .enumerate()
            .map(|(i, r)| {
                let s = Series::line(
                    r.label.clone(),
                    r.rounds.iter().map(|p| (p.0 as f64, pick(p))).collect(),
                );
                if i % 2 == 1 {
                    s.dashed()
                } else {
                    s
                }
            })
            .collect()
    };
    let svg = report::render(&[
        Chart {
            title: "Test accuracy".into(),
            x_label: "round".into(),
            y_label: "accuracy".into(),
            series: series(|p| p.1),
        },
        Chart {
            title: "Test loss".into(),
            x_label: "round".into(),
            y_label: "cross-entropy".into(),
            series: series(|p| p.2),
        },
    ]);
    write(out, COMPARE_SVG, svg)?;
    Ok(runs)
}
