//! Leader-equilibrium simulation and inefficiency.
//!
//! Message exchange is collapsed to its on-path outcome: a leader's fair coin
//! becomes the action of everyone following it. Inefficiency is twice the
//! fraction of ordered neighbor pairs that mismatch.

mod transitive;

use serde::{Deserialize, Serialize};

pub use transitive::{
    sample_local_transitive, secret_share, selection_probability, simulate_local_transitive,
    LocalTransitiveReport, TorusTiles, TransitiveTrial,
};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::partition::{verify_certificate, PartitionCertificate, StablePartition};
use crate::rng::{self, coin, Purpose, Rng};
use crate::stats::MonteCarloStats;

/// One action in `{-1, +1}` per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(Vec<i8>);

impl ActionProfile {
    pub fn new(actions: Vec<i8>) -> Result<Self> {
        if let Some(a) = actions.iter().find(|&&a| a != 1 && a != -1) {
            return Err(invalid(format!("action {a} is not in {{-1, +1}}")));
        }
        Ok(ActionProfile(actions))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Every action flipped.
    pub fn negated(&self) -> Self {
        ActionProfile(self.0.iter().map(|a| -a).collect())
    }

    /// Each vertex copies the coin of its key; equal keys share a coin.
    fn from_keys(keys: &[usize], coins: &[i8]) -> Self {
        ActionProfile(keys.iter().map(|&k| coins[k]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub actions: ActionProfile,
    pub inefficiency: f64,
}

/// `(2 / ordered |E|) · #{ordered (i, j) ∈ E : a_i ≠ a_j}`.
pub fn inefficiency(g: &Graph, a: &ActionProfile) -> Result<f64> {
    if a.len() != g.n() {
        return Err(invalid(format!(
            "profile has {} actions for {} vertices",
            a.len(),
            g.n()
        )));
    }
    let e = g.ordered_edge_count();
    if e == 0 {
        return Err(Error::UndefinedMetric("graph has no edges".into()));
    }
    let a = a.as_slice();
    let mismatched: usize = (0..g.n())
        .map(|i| g.neighbors(i).iter().filter(|&&j| a[i] != a[j]).count())
        .sum();
    Ok(2.0 * mismatched as f64 / e as f64)
}

/// Expected inefficiency when vertices with equal keys share one fair coin
/// and distinct keys flip independently: every ordered pair with different
/// keys mismatches with probability 1/2.
pub fn exact_inefficiency_from_keys(g: &Graph, keys: &[usize]) -> Result<f64> {
    let e = g.ordered_edge_count();
    if e == 0 {
        return Err(Error::UndefinedMetric("graph has no edges".into()));
    }
    let split: usize = (0..g.n())
        .map(|i| g.neighbors(i).iter().filter(|&&j| keys[i] != keys[j]).count())
        .sum();
    Ok(split as f64 / e as f64)
}

fn check_cert(g: &Graph, cert: &PartitionCertificate) -> Result<()> {
    match verify_certificate(g, cert).violation {
        Some(v) => Err(Error::InvalidCertificate(v.to_string())),
        None => Ok(()),
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        Err(invalid("at least one trial is required"))
    } else {
        Ok(())
    }
}

/// One draw of the private-message leader equilibrium: every community
/// copies an independent fair coin of its leader.
pub fn sample_private_leader(
    g: &Graph,
    labels: &[usize],
    communities: usize,
    rng: &mut Rng,
) -> Result<TrialOutcome> {
    let coins: Vec<i8> = (0..communities).map(|_| coin(rng)).collect();
    let actions = ActionProfile::from_keys(labels, &coins);
    let inefficiency = inefficiency(g, &actions)?;
    Ok(TrialOutcome {
        actions,
        inefficiency,
    })
}

fn collect_stats(outcomes: Vec<Result<TrialOutcome>>, seed: u64) -> Result<MonteCarloStats> {
    let values = outcomes
        .into_iter()
        .map(|o| o.map(|o| o.inefficiency))
        .collect::<Result<Vec<f64>>>()?;
    Ok(MonteCarloStats::from_values(&values, seed))
}

pub fn simulate_private_leader(
    g: &Graph,
    cert: &PartitionCertificate,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloStats> {
    check_cert(g, cert)?;
    check_trials(trials)?;
    let labels = cert.labels(g.n());
    let k = cert.communities.len();
    let outcomes = rng::run_trials(trials, seed, Purpose::PrivateLeader, |_, rng| {
        sample_private_leader(g, &labels, k, rng)
    });
    collect_stats(outcomes, seed)
}

/// Closed-form expectation: ordered cut count over ordered `|E|`.
pub fn exact_private_leader(g: &Graph, cert: &PartitionCertificate) -> Result<f64> {
    check_cert(g, cert)?;
    exact_inefficiency_from_keys(g, &cert.labels(g.n()))
}

/// Coin key per vertex: stable communities are keyed by their leader's
/// public coin; each unassigned vertex gets a private key of its own.
fn public_stable_keys(g: &Graph, sp: &StablePartition) -> Vec<usize> {
    let n = g.n();
    let mut keys: Vec<usize> = (0..n).map(|v| n + v).collect();
    for (c, &l) in sp.stable_communities.iter().zip(&sp.leaders) {
        for v in c.iter() {
            keys[v] = l;
        }
    }
    keys
}

/// Public-message leader play on a stable partition. Members follow their
/// leader's public coin; vertices of `U` play independent fair coins.
pub fn simulate_public_stable(
    g: &Graph,
    sp: &StablePartition,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloStats> {
    sp.validate(g)?;
    check_trials(trials)?;
    let keys = public_stable_keys(g, sp);
    let outcomes = rng::run_trials(trials, seed, Purpose::PublicStable, |_, rng| {
        let coins: Vec<i8> = (0..2 * g.n()).map(|_| coin(rng)).collect();
        let actions = ActionProfile::from_keys(&keys, &coins);
        inefficiency(g, &actions).map(|inefficiency| TrialOutcome {
            actions,
            inefficiency,
        })
    });
    collect_stats(outcomes, seed)
}

/// Closed-form expectation of [`simulate_public_stable`]: ordered deleted
/// count over ordered `|E|`.
pub fn exact_public_stable(g: &Graph, sp: &StablePartition) -> Result<f64> {
    sp.validate(g)?;
    exact_inefficiency_from_keys(g, &public_stable_keys(g, sp))
}

/// Best inefficiency of any `r`-local profile on a long cycle, `1/(2r+1)`.
pub fn cycle_optimal_inefficiency(r: usize) -> f64 {
    1.0 / (2 * r + 1) as f64
}
