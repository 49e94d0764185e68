//! Slotted CSMA/CA with an RTS/CTS abstraction.
//!
//! One FL iteration is one MAC round. Within a cell every node hears every
//! other node, so contention serializes the cell: the unique smallest backoff
//! acquires the channel for the whole round. Ties collide and the colliders
//! redraw from a doubled window (binary exponential backoff). Losers defer to
//! the next round.
//!
//! In [`Mode::Flcc`] each cell winner uplinks on its planned cell channel. In
//! [`Mode::Baseline`] every active node picks one of the `N` channels
//! uniformly at random and senses only that channel, so a cell may carry
//! several uplinks at once and co-channel transmissions anywhere in the
//! network are no longer kept apart by the reuse plan.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::channel::{self, ChannelConfig, LinkDraw};
use crate::error::{FlccError, Result};
use crate::geometry::{CellPlan, NodeSite};
use crate::rng::SimRng;

/// Upper bound on the contention window after doubling.
pub const MAX_CONTENTION_WINDOW: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Flcc,
    Baseline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Flcc => f.write_str("flcc"),
            Mode::Baseline => f.write_str("baseline"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flcc" => Ok(Mode::Flcc),
            "baseline" => Ok(Mode::Baseline),
            other => Err(format!("unknown mode `{other}` (expected flcc or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacConfig {
    pub contention_window: u32,
    pub max_retries: u32,
    /// Probability that a node has an update to send this round.
    pub active_probability: f64,
    pub mode: Mode,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            contention_window: 16,
            max_retries: 4,
            active_probability: 1.0,
            mode: Mode::Flcc,
        }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.contention_window == 0 {
            return Err(FlccError::param("contention_window", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.active_probability) {
            return Err(FlccError::param(
                "active_probability",
                format!("must lie in [0, 1], got {}", self.active_probability),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Contention {
    pub winner: Option<usize>,
    /// Nodes that were part of at least one collision.
    pub colliders: BTreeSet<usize>,
    /// Collisions each contender went through.
    pub retries: BTreeMap<usize, u32>,
}

/// Backoff contention among the nodes of one carrier-sense domain.
pub fn contend(cell_nodes: &[usize], cfg: &MacConfig, rng: &mut SimRng) -> Contention {
    let mut out = Contention::default();
    // (node, remaining backoff, retries)
    let mut pending: Vec<(usize, u32, u32)> = cell_nodes
        .iter()
        .map(|&n| (n, rng.gen_range(0..cfg.contention_window), 0))
        .collect();
    for &n in cell_nodes {
        out.retries.insert(n, 0);
    }

    while !pending.is_empty() {
        let min = pending.iter().map(|p| p.1).min().expect("non-empty");
        let at_min = pending.iter().filter(|p| p.1 == min).count();
        if at_min == 1 {
            out.winner = pending.iter().find(|p| p.1 == min).map(|p| p.0);
            break;
        }
        let mut next = Vec::with_capacity(pending.len());
        for (node, backoff, retries) in pending {
            if backoff > min {
                // Counted down through the idle slots, frozen during the collision.
                next.push((node, backoff - min, retries));
                continue;
            }
            out.colliders.insert(node);
            let retries = retries + 1;
            out.retries.insert(node, retries);
            if retries <= cfg.max_retries {
                let window = cfg
                    .contention_window
                    .saturating_mul(1u32 << retries.min(16))
                    .clamp(1, MAX_CONTENTION_WINDOW);
                next.push((node, rng.gen_range(0..window), retries));
            }
        }
        pending = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionOutcome {
    pub node_id: usize,
    pub cell_id: usize,
    /// Channel the node contended on (FLCC: its cell channel).
    pub channel: Option<usize>,
    pub attempted: bool,
    pub won_contention: bool,
    /// Linear SINR at the node's cell server; only for contention winners.
    pub sinr: Option<f64>,
    pub success: bool,
    pub retries_used: u32,
}

struct Transmission {
    node: usize,
    cell: usize,
    channel: usize,
}

/// Simulates one uplink round and reports one outcome per node, in node order.
pub fn simulate_round(
    nodes: &[NodeSite],
    plan: &CellPlan,
    ch_cfg: &ChannelConfig,
    mac_cfg: &MacConfig,
    rng: &mut SimRng,
) -> Result<Vec<TransmissionOutcome>> {
    mac_cfg.validate()?;
    if plan.num_channels == 0 {
        return Err(FlccError::InvalidLayout("frequencies are not assigned".into()));
    }
    // Carrier-sense groups: the whole cell in FLCC mode, one group per
    // (cell, channel) in baseline mode where each node picks its own channel.
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut outcomes = Vec::with_capacity(nodes.len());
    for (idx, node) in nodes.iter().enumerate() {
        let cell_id = node
            .cell_id
            .filter(|&c| c < plan.len())
            .ok_or_else(|| FlccError::InvalidLayout(format!("node {} has no cell", node.id)))?;
        let attempted = rng.gen::<f64>() < mac_cfg.active_probability;
        if attempted {
            let channel = match mac_cfg.mode {
                Mode::Flcc => plan.channel_of(cell_id).ok_or_else(|| {
                    FlccError::InvalidLayout(format!("cell {cell_id} has no channel"))
                })?,
                Mode::Baseline => rng.gen_range(0..plan.num_channels),
            };
            groups.entry((cell_id, channel)).or_default().push(idx);
        }
        outcomes.push(TransmissionOutcome {
            node_id: node.id,
            cell_id,
            channel: None,
            attempted,
            won_contention: false,
            sinr: None,
            success: false,
            retries_used: 0,
        });
    }

    let mut transmissions = Vec::new();
    for (&(cell, channel), members) in &groups {
        let result = contend(members, mac_cfg, rng);
        for (&idx, &r) in &result.retries {
            outcomes[idx].retries_used = r;
        }
        for &idx in members {
            outcomes[idx].channel = Some(channel);
        }
        if let Some(idx) = result.winner {
            outcomes[idx].won_contention = true;
            transmissions.push(Transmission {
                node: idx,
                cell,
                channel,
            });
        }
    }

    for tx in &transmissions {
        let server = plan.cells[tx.cell].center;
        let me = &nodes[tx.node];
        let target = LinkDraw::new(
            channel::draw_fading(rng),
            me.position.distance(&server).max(ch_cfg.d_min),
        );
        let interferers: Vec<(LinkDraw, f64)> = transmissions
            .iter()
            .filter(|o| o.node != tx.node && o.channel == tx.channel)
            .map(|o| {
                let other = &nodes[o.node];
                let link = LinkDraw::new(
                    channel::draw_fading(rng),
                    other.position.distance(&server).max(ch_cfg.d_min),
                );
                (link, other.tx_power)
            })
            .collect();
        let sample = channel::compute_sinr(&target, me.tx_power, &interferers, ch_cfg)?;
        let out = &mut outcomes[tx.node];
        out.sinr = Some(sample.sinr);
        out.success = sample.succeeds(ch_cfg.sinr_threshold);
    }
    Ok(outcomes)
}

/// Nodes whose uplink cleared the SINR threshold this round.
pub fn successful_set(outcomes: &[TransmissionOutcome]) -> BTreeSet<usize> {
    outcomes
        .iter()
        .filter(|o| o.success)
        .map(|o| o.node_id)
        .collect()
}

/// Fraction of transmissions (contention winners) that were decoded; zero
/// when nobody transmitted.
pub fn success_rate(outcomes: &[TransmissionOutcome]) -> f64 {
    let sent = outcomes.iter().filter(|o| o.won_contention).count();
    if sent == 0 {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.success).count() as f64 / sent as f64
}
