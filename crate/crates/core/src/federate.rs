//! Trust-weighted federated averaging over the simulated MAC.
//!
//! Each round the server broadcasts the global model, every scheduled node
//! trains one local epoch, the MAC decides whose uplink arrives, and the
//! server averages the arrivals with per-device trust weights. Trust is an
//! exponential tracker of a binary reward: an update is rewarded when its
//! direction agrees with the weighted consensus and it does not make
//! held-out loss more than 10% worse. Devices whose score falls below the
//! blacklist threshold are dropped for good.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::ChannelConfig;
use crate::data::AttackSpec;
use crate::error::{FlccError, Result};
use crate::geometry::{CellPlan, NodeSite, Role};
use crate::learn::{self, EvalMetrics, Examples, LocalUpdate, ModelParams, SgdConfig};
use crate::mac::{self, MacConfig, Mode, TransmissionOutcome};
use crate::rng::{self, domain};

/// A submission is penalized when its held-out loss exceeds the previous
/// global model's by more than this factor.
pub const VALIDATION_TOLERANCE: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hierarchy {
    SingleServer,
    CellPlusCloud,
}

impl fmt::Display for Hierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hierarchy::SingleServer => "single",
            Hierarchy::CellPlusCloud => "cell_cloud",
        })
    }
}

impl FromStr for Hierarchy {
    type Err = FlccError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Hierarchy::SingleServer),
            "cell_cloud" => Ok(Hierarchy::CellPlusCloud),
            _ => Err(FlccError::param(
                "hierarchy",
                format!("unknown hierarchy `{s}` (single, cell_cloud)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub max_rounds: usize,
    /// Stop once the mean participant gradient has L2 norm at most this.
    pub epsilon: f64,
    pub trust_learning_rate: f64,
    pub blacklist_threshold: f64,
    pub initial_trust: f64,
    pub hierarchy: Hierarchy,
    pub cloud_blend: f64,
    pub sgd: SgdConfig,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            max_rounds: 300,
            epsilon: 1e-3,
            trust_learning_rate: 0.2,
            blacklist_threshold: 0.05,
            initial_trust: 0.5,
            hierarchy: Hierarchy::SingleServer,
            cloud_blend: 0.5,
            sgd: SgdConfig::default(),
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(FlccError::param("epsilon", "must be >= 0"));
        }
        if !(self.trust_learning_rate > 0.0 && self.trust_learning_rate <= 1.0) {
            return Err(FlccError::param("trust_learning_rate", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.blacklist_threshold) {
            return Err(FlccError::param("blacklist_threshold", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.initial_trust) {
            return Err(FlccError::param("initial_trust", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.cloud_blend) {
            return Err(FlccError::param("cloud_blend", "must lie in [0, 1]"));
        }
        self.sgd.validate()
    }
}

/// Raw per-device scores plus the weights used in the latest aggregation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrustVector {
    pub scores: BTreeMap<usize, f64>,
    pub weights: BTreeMap<usize, f64>,
    pub blacklisted: BTreeSet<usize>,
}

impl TrustVector {
    pub fn new(node_ids: impl IntoIterator<Item = usize>, initial: f64) -> Self {
        TrustVector {
            scores: node_ids.into_iter().map(|id| (id, initial)).collect(),
            ..Default::default()
        }
    }

    pub fn score(&self, id: usize) -> f64 {
        self.scores.get(&id).copied().unwrap_or(0.0)
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.weights.get(&id).copied().unwrap_or(0.0)
    }

    pub fn is_blacklisted(&self, id: usize) -> bool {
        self.blacklisted.contains(&id)
    }
}

/// `p_i = q_i / sum_j q_j` over the participants, uniform when every score
/// is zero. Blacklisted devices get zero.
pub fn normalize_trust(trust: &TrustVector, participants: &[usize]) -> BTreeMap<usize, f64> {
    let score = |id: usize| {
        if trust.is_blacklisted(id) {
            0.0
        } else {
            trust.score(id).max(0.0)
        }
    };
    let total: f64 = participants.iter().map(|&id| score(id)).sum();
    participants
        .iter()
        .map(|&id| {
            let p = if total > 0.0 {
                score(id) / total
            } else {
                1.0 / participants.len() as f64
            };
            (id, p)
        })
        .collect()
}

/// Equal weights, ignoring trust.
pub fn uniform_weights(participants: &[usize]) -> BTreeMap<usize, f64> {
    let p = 1.0 / participants.len() as f64;
    participants.iter().map(|&id| (id, p)).collect()
}

/// `sum_i p_i W_i`, accumulated in the order given.
pub fn aggregate(updates: &[&ModelParams], weights: &[f64]) -> Result<ModelParams> {
    let first = updates.first().ok_or(FlccError::NoParticipants)?;
    if weights.len() != updates.len() {
        return Err(FlccError::InvalidInput(format!(
            "{} weights for {} updates",
            weights.len(),
            updates.len()
        )));
    }
    if let Some(bad) = updates.iter().find(|u| u.arch != first.arch || u.len() != first.len()) {
        return Err(FlccError::InvalidInput(format!(
            "architecture mismatch: {} vs {}",
            bad.arch, first.arch
        )));
    }
    let mut values = vec![0.0; first.len()];
    for (u, &p) in updates.iter().zip(weights) {
        for (v, w) in values.iter_mut().zip(&u.values) {
            *v += p * w;
        }
    }
    Ok(ModelParams {
        values,
        arch: first.arch.clone(),
    })
}

/// Elementwise mean of the gradients.
pub fn mean_gradient(gradients: &[&[f64]]) -> Option<Vec<f64>> {
    let first = gradients.first()?;
    let mut mean = vec![0.0; first.len()];
    for g in gradients {
        for (m, v) in mean.iter_mut().zip(g.iter()) {
            *m += v;
        }
    }
    let n = gradients.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Some(mean)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// True when the L2 norm of the mean gradient is at most `epsilon`. Opposing
/// gradients cancel in the mean, so two devices pulling in exactly opposite
/// directions count as converged. With no gradients there is no evidence and
/// the answer is false.
pub fn check_convergence(gradients: &[&[f64]], epsilon: f64) -> bool {
    match mean_gradient(gradients) {
        Some(mean) => l2_norm(&mean) <= epsilon,
        None => false,
    }
}

/// `blend * cell + (1 - blend) * cloud`.
pub fn cloud_blend(cell: &ModelParams, cloud: &ModelParams, blend: f64) -> Result<ModelParams> {
    if cell.arch != cloud.arch || cell.len() != cloud.len() {
        return Err(FlccError::InvalidInput(format!(
            "architecture mismatch: {} vs {}",
            cell.arch, cloud.arch
        )));
    }
    Ok(ModelParams {
        values: cell
            .values
            .iter()
            .zip(&cloud.values)
            .map(|(a, b)| blend * a + (1.0 - blend) * b)
            .collect(),
        arch: cell.arch.clone(),
    })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        // No direction to disagree with.
        return 1.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// One device's evidence for the trust rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustEvidence {
    pub node_id: usize,
    /// Cosine between the device's update direction and the weighted mean.
    pub alignment: f64,
    pub validation_loss: f64,
}

/// `q <- q + beta (r - q)`, evaluated as `(1 - beta) q + beta r`; scores that fall below the threshold are
/// blacklisted and never change again. Devices without evidence keep
/// their score.
pub fn apply_rewards(
    trust: &mut TrustVector,
    evidence: &[TrustEvidence],
    reference_loss: f64,
    beta: f64,
    blacklist_threshold: f64,
) {
    for e in evidence {
        if trust.is_blacklisted(e.node_id) {
            continue;
        }
        let rewarded =
            e.alignment >= 0.0 && e.validation_loss <= VALIDATION_TOLERANCE * reference_loss;
        let r = if rewarded { 1.0 } else { 0.0 };
        let q = trust.scores.entry(e.node_id).or_insert(0.0);
        *q = (1.0 - beta) * *q + beta * r;
        if *q < blacklist_threshold {
            trust.blacklisted.insert(e.node_id);
        }
    }
}

/// Scores this round's submissions against the weighted consensus and the
/// held-out loss of the model they started from, then applies the reward
/// rule. Update directions are `global - W_i`, the effective gradient each
/// device submitted.
pub fn update_trust(
    trust: &mut TrustVector,
    updates: &[&ModelParams],
    node_ids: &[usize],
    weights: &[f64],
    global: &ModelParams,
    validation: &Examples,
    cfg: &FederationConfig,
) -> Result<Vec<TrustEvidence>> {
    let directions: Vec<Vec<f64>> = updates
        .iter()
        .map(|u| global.values.iter().zip(&u.values).map(|(g, w)| g - w).collect())
        .collect();
    let mut consensus = vec![0.0; global.len()];
    for (d, &p) in directions.iter().zip(weights) {
        for (c, v) in consensus.iter_mut().zip(d) {
            *c += p * v;
        }
    }
    let reference = learn::evaluate(global, validation)?.loss;
    let losses: Vec<f64> = updates
        .par_iter()
        .map(|u| learn::evaluate(u, validation).map(|m| m.loss))
        .collect::<Result<_>>()?;
    let evidence: Vec<TrustEvidence> = node_ids
        .iter()
        .zip(&directions)
        .zip(losses)
        .map(|((&node_id, d), validation_loss)| TrustEvidence {
            node_id,
            alignment: cosine(d, &consensus),
            validation_loss,
        })
        .collect();
    apply_rewards(
        trust,
        &evidence,
        reference,
        cfg.trust_learning_rate,
        cfg.blacklist_threshold,
    );
    Ok(evidence)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustSnapshot {
    pub node_id: usize,
    pub q: f64,
    pub p: f64,
    pub blacklisted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    /// Number of aggregated updates (`A`).
    pub participants: usize,
    pub mac_success_rate: f64,
    pub accuracy: f64,
    pub loss: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub trust: Vec<TrustSnapshot>,
}

/// Everything a federation run needs besides the network layout.
#[derive(Debug, Clone)]
pub struct FederationData<'a> {
    /// Local training set per node id; attackers' sets are already corrupted
    /// when the attack acts on data.
    pub local: &'a BTreeMap<usize, Examples>,
    pub test: &'a Examples,
    /// Held-out subset used by the trust guard.
    pub validation: &'a Examples,
    /// Applied to untrusted nodes' submissions.
    pub attack: Option<AttackSpec>,
    pub initial: &'a ModelParams,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub records: Vec<RoundRecord>,
    pub model: ModelParams,
    pub mac_trace: Vec<(usize, TransmissionOutcome)>,
    pub trust: TrustVector,
}

fn snapshot(trust: &TrustVector, ids: &[usize]) -> Vec<TrustSnapshot> {
    ids.iter()
        .map(|&id| TrustSnapshot {
            node_id: id,
            q: trust.score(id),
            p: trust.weight(id),
            blacklisted: trust.is_blacklisted(id),
        })
        .collect()
}

/// Runs up to `max_rounds` rounds and stops early once the participants'
/// mean gradient satisfies the convergence test.
///
/// In [`Mode::Flcc`] aggregation uses trust weights and blacklisted devices
/// are no longer scheduled; in [`Mode::Baseline`] every arrival gets the same
/// weight and trust is never updated.
pub fn run_federation(
    nodes: &[NodeSite],
    plan: &CellPlan,
    ch_cfg: &ChannelConfig,
    mac_cfg: &MacConfig,
    fed_cfg: &FederationConfig,
    data: &FederationData<'_>,
    seed: u64,
) -> Result<FederationOutcome> {
    fed_cfg.validate()?;
    ch_cfg.validate()?;
    mac_cfg.validate()?;
    if let Some(a) = &data.attack {
        a.validate()?;
    }
    for n in nodes {
        if !data.local.get(&n.id).is_some_and(|d| !d.is_empty()) {
            return Err(FlccError::InvalidInput(format!("node {} has no local data", n.id)));
        }
    }
    let ids: Vec<usize> = nodes.iter().map(|n| n.id).collect();
    let by_id: BTreeMap<usize, &NodeSite> = nodes.iter().map(|n| (n.id, n)).collect();
    let trusting = mac_cfg.mode == Mode::Flcc;
    let hierarchical = fed_cfg.hierarchy == Hierarchy::CellPlusCloud;

    let mut trust = TrustVector::new(ids.iter().copied(), fed_cfg.initial_trust);
    let mut global = data.initial.clone();
    let mut cell_models: BTreeMap<usize, ModelParams> = BTreeMap::new();
    if hierarchical {
        for n in nodes {
            let cell = n.cell_id.ok_or_else(|| {
                FlccError::InvalidLayout(format!("node {} has no cell", n.id))
            })?;
            cell_models.entry(cell).or_insert_with(|| global.clone());
        }
    }
    let mut records = Vec::new();
    let mut mac_trace = Vec::new();

    for round in 1..=fed_cfg.max_rounds {
        let scheduled: Vec<NodeSite> = nodes
            .iter()
            .filter(|n| !(trusting && trust.is_blacklisted(n.id)))
            .cloned()
            .collect();
        let mut mac_rng = rng::substream(seed, &[domain::MAC, round as u64]);
        let outcomes = mac::simulate_round(&scheduled, plan, ch_cfg, mac_cfg, &mut mac_rng)?;
        let success_rate = mac::success_rate(&outcomes);
        let arrived: Vec<usize> = mac::successful_set(&outcomes).into_iter().collect();
        mac_trace.extend(outcomes.into_iter().map(|o| (round, o)));

        // Nodes that did not get through would discard their update, so only
        // arrivals are trained; each node's stream is keyed by (node, round).
        let updates: Vec<LocalUpdate> = arrived
            .par_iter()
            .map(|&id| {
                let start = if hierarchical {
                    &cell_models[&by_id[&id].cell_id.expect("checked")]
                } else {
                    &global
                };
                let mut train_rng = rng::substream(seed, &[domain::TRAIN, id as u64, round as u64]);
                let mut update = learn::local_train(id, start, &data.local[&id], &fed_cfg.sgd, &mut train_rng)?;
                if let (Role::Untrusted, Some(attack)) = (by_id[&id].role, &data.attack) {
                    let mut atk_rng = rng::substream(seed, &[domain::ATTACK, id as u64, round as u64]);
                    update.params = attack.corrupt_update(start, &update.params, &mut atk_rng);
                }
                Ok(update)
            })
            .collect::<Result<_>>()?;

        trust.weights.clear();
        let grads: Vec<&[f64]> = updates.iter().map(|u| u.gradient.as_slice()).collect();
        let grad_norm = mean_gradient(&grads).map(|m| l2_norm(&m)).unwrap_or(0.0);
        let converged = check_convergence(&grads, fed_cfg.epsilon);

        if !updates.is_empty() && !converged {
            if hierarchical {
                let mut groups: BTreeMap<usize, Vec<&LocalUpdate>> = BTreeMap::new();
                for u in &updates {
                    groups.entry(by_id[&u.node_id].cell_id.expect("checked")).or_default().push(u);
                }
                for (cell, members) in groups {
                    let start = cell_models[&cell].clone();
                    let agg = aggregate_group(&mut trust, &members, &start, trusting, data, fed_cfg)?;
                    cell_models.insert(cell, cloud_blend(&agg, &global, fed_cfg.cloud_blend)?);
                }
                let models: Vec<&ModelParams> = cell_models.values().collect();
                let eq = vec![1.0 / models.len() as f64; models.len()];
                global = aggregate(&models, &eq)?;
            } else {
                let members: Vec<&LocalUpdate> = updates.iter().collect();
                let start = global.clone();
                global = aggregate_group(&mut trust, &members, &start, trusting, data, fed_cfg)?;
            }
            if !global.is_finite() {
                return Err(FlccError::NumericalDivergence(format!(
                    "global model became non-finite in round {round}"
                )));
            }
        }

        let EvalMetrics { loss, accuracy } = learn::evaluate(&global, data.test)?;
        records.push(RoundRecord {
            round,
            participants: updates.len(),
            mac_success_rate: success_rate,
            accuracy,
            loss,
            grad_norm,
            converged,
            trust: snapshot(&trust, &ids),
        });
        if converged {
            break;
        }
    }

    Ok(FederationOutcome {
        records,
        model: global,
        mac_trace,
        trust,
    })
}

fn aggregate_group(
    trust: &mut TrustVector,
    members: &[&LocalUpdate],
    start: &ModelParams,
    trusting: bool,
    data: &FederationData<'_>,
    cfg: &FederationConfig,
) -> Result<ModelParams> {
    let ids: Vec<usize> = members.iter().map(|u| u.node_id).collect();
    let weights = if trusting {
        normalize_trust(trust, &ids)
    } else {
        uniform_weights(&ids)
    };
    let p: Vec<f64> = ids.iter().map(|id| weights[id]).collect();
    let params: Vec<&ModelParams> = members.iter().map(|u| &u.params).collect();
    let agg = aggregate(&params, &p)?;
    trust.weights.extend(weights);
    if trusting {
        update_trust(trust, &params, &ids, &p, start, data.validation, cfg)?;
    }
    Ok(agg)
}

/// CSV `round,A,mac_success_rate,accuracy,loss,grad_norm,converged`.
pub fn round_log_csv(records: &[RoundRecord]) -> String {
    let mut s = String::from("round,A,mac_success_rate,accuracy,loss,grad_norm,converged\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.round, r.participants, r.mac_success_rate, r.accuracy, r.loss, r.grad_norm, r.converged
        ));
    }
    s
}

/// CSV `round,node_id,q,p,blacklisted`.
pub fn trust_log_csv(records: &[RoundRecord]) -> String {
    let mut s = String::from("round,node_id,q,p,blacklisted\n");
    for r in records {
        for t in &r.trust {
            s.push_str(&format!("{},{},{},{},{}\n", r.round, t.node_id, t.q, t.p, t.blacklisted));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::ModelArch;

    fn vec_params(values: Vec<f64>) -> ModelParams {
        let arch = ModelArch::Dense {
            inputs: 1,
            hidden: vec![],
            classes: values.len() / 2,
        };
        ModelParams::from_values(&arch, values).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let mut t = TrustVector::new([0, 1, 2], 1.0);
        t.scores.insert(2, 2.0);
        let p = normalize_trust(&t, &[0, 1, 2]);
        assert_eq!(p.values().copied().collect::<Vec<_>>(), vec![0.25, 0.25, 0.5]);
        assert_eq!(normalize_trust(&t, &[1])[&1], 1.0);
        t.blacklisted.insert(0);
        let p = normalize_trust(&t, &[0, 1, 2]);
        assert_eq!(p[&0], 0.0);
        assert!((p[&1] - 1.0 / 3.0).abs() < 1e-15);
        let z = TrustVector::new([0, 1], 0.0);
        assert_eq!(normalize_trust(&z, &[0, 1])[&0], 0.5);
        assert!(normalize_trust(&z, &[]).is_empty());
    }

    #[test]
    fn aggregate_examples() {
        let a = vec_params(vec![0.0, 4.0]);
        let b = vec_params(vec![4.0, 0.0]);
        assert_eq!(aggregate(&[&a, &b], &[0.25, 0.75]).unwrap().values, vec![3.0, 1.0]);
        assert_eq!(aggregate(&[&a], &[1.0]).unwrap(), a);
        assert_eq!(aggregate(&[&a, &a], &[0.9, 0.1]).unwrap().values, a.values);
        assert!(matches!(aggregate(&[], &[]), Err(FlccError::NoParticipants)));
        let c = vec_params(vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(aggregate(&[&a, &c], &[0.5, 0.5]), Err(FlccError::InvalidInput(_))));
    }

    #[test]
    fn convergence_examples() {
        let z = [0.0, 0.0];
        assert!(check_convergence(&[&z], 1e-6));
        assert!(check_convergence(&[&[1.0, 0.0], &[-1.0, 0.0]], 0.0));
        let (a, b) = ([3.0, 0.0], [0.0, 4.0]);
        assert!(check_convergence(&[&a, &b], 2.5));
        assert!(!check_convergence(&[&a, &b], 2.499_999));
        assert!(!check_convergence(&[], 1e9));
    }

    #[test]
    fn cloud_blend_examples() {
        let a = vec_params(vec![2.0, 0.0]);
        let b = vec_params(vec![4.0, 0.0]);
        assert_eq!(cloud_blend(&a, &b, 1.0).unwrap(), a);
        assert_eq!(cloud_blend(&a, &b, 0.5).unwrap().values, vec![3.0, 0.0]);
        let c = vec_params(vec![0.0; 4]);
        assert!(cloud_blend(&a, &c, 0.5).is_err());
    }

    #[test]
    fn unrewarded_device_decays_geometrically_and_is_blacklisted() {
        let mut t = TrustVector::new([0, 1], 0.5);
        let bad = |id| TrustEvidence {
            node_id: id,
            alignment: -1.0,
            validation_loss: 1.0,
        };
        for k in 1..=11 {
            apply_rewards(&mut t, &[bad(0)], 1.0, 0.2, 0.05);
            let closed = 0.5 * 0.8f64.powi(k);
            assert!((t.score(0) - closed).abs() <= 1e-15 * closed, "{} vs {closed}", t.score(0));
            assert_eq!(t.is_blacklisted(0), k >= 11, "round {k}");
        }
        assert_eq!(t.score(1), 0.5);
        let pinned = t.score(0);
        apply_rewards(&mut t, &[TrustEvidence { node_id: 0, alignment: 1.0, validation_loss: 0.0 }], 1.0, 0.2, 0.05);
        assert_eq!(t.score(0), pinned);
    }

    #[test]
    fn identical_updates_are_all_rewarded() {
        let arch = ModelArch::Dense {
            inputs: 2,
            hidden: vec![],
            classes: 2,
        };
        let global = ModelParams::zeros(&arch);
        let w = ModelParams::from_values(&arch, vec![0.1, -0.1, -0.1, 0.1, 0.0, 0.0]).unwrap();
        let val = Examples::from_rows(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]).unwrap();
        let mut t = TrustVector::new([0, 1, 2], 0.5);
        let ev = update_trust(
            &mut t,
            &[&w, &w],
            &[0, 1],
            &[0.5, 0.5],
            &global,
            &val,
            &FederationConfig::default(),
        )
        .unwrap();
        assert!(ev.iter().all(|e| (e.alignment - 1.0).abs() < 1e-12));
        assert!((t.score(0) - 0.6).abs() < 1e-15);
        assert!((t.score(1) - 0.6).abs() < 1e-15);
        assert_eq!(t.score(2), 0.5);
    }

    #[test]
    fn csv_headers() {
        assert_eq!(round_log_csv(&[]), "round,A,mac_success_rate,accuracy,loss,grad_norm,converged\n");
        assert_eq!(trust_log_csv(&[]), "round,node_id,q,p,blacklisted\n");
    }
}
