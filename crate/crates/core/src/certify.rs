//! Grand coupling of influence distributions and random certificates.
//!
//! Given distributions `μ_i`, shared unit exponentials `E_k` and
//! `L_i = argmin_k E_k / μ_i(k)` make each `L_i` distributed as `μ_i` while
//! `P(L_i ≠ L_j) ≤ 2 d_TV / (1 + d_TV)`. Applied to the Shapley influence
//! distributions of a local strategy profile, deleting every edge whose
//! endpoints disagree on `L` leaves components inside `B_r(L)`.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{self, Graph, VertexSet};
use crate::influence::{
    mean_square_distance, normalize, shapley_influence, total_variation, InfluenceDistribution,
    InputModel, LocalFunction, Variable,
};
use crate::partition::{verify_certificate, PartitionCertificate};
use crate::rng::{self, stream, unit_exponential, Purpose, Rng};
use crate::stats::MonteCarloStats;

/// One distribution per vertex over the same index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<InfluenceDistribution>", into = "Vec<InfluenceDistribution>")]
pub struct DistributionFamily {
    distributions: Vec<InfluenceDistribution>,
    support: Vec<Vec<(usize, f64)>>,
}

impl DistributionFamily {
    pub fn new(distributions: Vec<InfluenceDistribution>) -> Result<Self> {
        let points = distributions.first().map_or(0, |d| d.len());
        for (i, d) in distributions.iter().enumerate() {
            if d.len() != points {
                return Err(Error::InvalidDistribution(format!(
                    "distribution {i} has {} points, expected {points}",
                    d.len()
                )));
            }
            d.validate()
                .map_err(|e| Error::InvalidDistribution(format!("distribution {i}: {e}")))?;
        }
        let support: Vec<Vec<(usize, f64)>> = distributions.iter().map(|d| d.support()).collect();
        if let Some(i) = support.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidDistribution(format!("distribution {i} has empty support")));
        }
        Ok(DistributionFamily {
            distributions,
            support,
        })
    }

    /// Additionally requires `μ_i(B_r(i)) = 1` on `g`.
    pub fn local(g: &Graph, r: usize, distributions: Vec<InfluenceDistribution>) -> Result<Self> {
        if distributions.len() != g.n() {
            return Err(invalid(format!(
                "{} distributions for {} vertices",
                distributions.len(),
                g.n()
            )));
        }
        let family = DistributionFamily::new(distributions)?;
        if family.points() != g.n() {
            return Err(invalid("distributions must live on the vertex set"));
        }
        family.check_local(g, r)?;
        Ok(family)
    }

    pub fn check_local(&self, g: &Graph, r: usize) -> Result<()> {
        for (i, s) in self.support.iter().enumerate() {
            let dist = g.distances(i, Some(r));
            if let Some(&(k, _)) = s.iter().find(|&&(k, _)| dist.get(k).copied().flatten().is_none()) {
                return Err(Error::LocalityViolation {
                    vertex: i,
                    variable: k,
                    radius: r,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.distributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distributions.is_empty()
    }

    /// Size of the index set the distributions live on.
    pub fn points(&self) -> usize {
        self.distributions.first().map_or(0, |d| d.len())
    }

    pub fn distribution(&self, i: usize) -> &InfluenceDistribution {
        &self.distributions[i]
    }
}

impl TryFrom<Vec<InfluenceDistribution>> for DistributionFamily {
    type Error = Error;

    fn try_from(d: Vec<InfluenceDistribution>) -> Result<Self> {
        DistributionFamily::new(d)
    }
}

impl From<DistributionFamily> for Vec<InfluenceDistribution> {
    fn from(f: DistributionFamily) -> Self {
        f.distributions
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSample {
    pub exponentials: Vec<f64>,
    pub leaders: Vec<usize>,
}

/// Exponential race on a caller-supplied generator. Ties go to the lowest
/// index.
pub fn grand_couple_with(family: &DistributionFamily, rng: &mut Rng) -> CouplingSample {
    let exponentials: Vec<f64> = (0..family.points()).map(|_| unit_exponential(rng)).collect();
    let leaders = race(family, &exponentials);
    CouplingSample {
        exponentials,
        leaders,
    }
}

fn race(family: &DistributionFamily, e: &[f64]) -> Vec<usize> {
    family
        .support
        .iter()
        .map(|s| {
            let mut best = (f64::INFINITY, usize::MAX);
            for &(k, p) in s {
                let t = e[k] / p;
                if t < best.0 || (t == best.0 && k < best.1) {
                    best = (t, k);
                }
            }
            best.1
        })
        .collect()
}

pub fn grand_couple(family: &DistributionFamily, seed: u64) -> CouplingSample {
    grand_couple_with(family, &mut stream(seed, Purpose::Coupling, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAudit {
    pub i: usize,
    pub j: usize,
    pub mismatch: MonteCarloStats,
    pub tv: f64,
    /// `2 TV / (1 + TV)`.
    pub bound_sharp: f64,
    /// `2 TV`.
    pub bound_2tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalAudit {
    pub vertex: usize,
    /// Empirical count of each support point, aligned with `expected`.
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// Every support point within three standard errors of its mass.
    pub within_3sigma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingAudit {
    pub trials: usize,
    pub seed: u64,
    pub pairs: Vec<PairAudit>,
    pub marginals: Vec<MarginalAudit>,
}

/// Mismatch rates for `pairs` and marginal goodness of fit for every member
/// of the family, over `trials` independent races.
pub fn coupling_collision_audit(
    family: &DistributionFamily,
    pairs: &[(usize, usize)],
    trials: usize,
    seed: u64,
) -> Result<CouplingAudit> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= family.len() || j >= family.len()) {
        return Err(invalid(format!("pair ({i}, {j}) out of range")));
    }
    let draws: Vec<Vec<usize>> = rng::run_trials(trials, seed, Purpose::Coupling, |_, rng| {
        grand_couple_with(family, rng).leaders
    });

    let pairs = pairs
        .iter()
        .map(|&(i, j)| {
            let values: Vec<f64> = draws
                .iter()
                .map(|l| if l[i] != l[j] { 1.0 } else { 0.0 })
                .collect();
            let tv = total_variation(family.distribution(i), family.distribution(j))?;
            Ok(PairAudit {
                i,
                j,
                mismatch: MonteCarloStats::from_values(&values, seed),
                tv,
                bound_sharp: 2.0 * tv / (1.0 + tv),
                bound_2tv: 2.0 * tv,
            })
        })
        .collect::<Result<_>>()?;

    let t = trials as f64;
    let marginals = (0..family.len())
        .into_par_iter()
        .map(|v| {
            let support = &family.support[v];
            let mut counts = vec![0u64; support.len()];
            for l in &draws {
                let k = support.iter().position(|&(k, _)| k == l[v]).expect("leader in support");
                counts[k] += 1;
            }
            let expected: Vec<f64> = support.iter().map(|&(_, p)| p).collect();
            let chi_square = counts
                .iter()
                .zip(&expected)
                .map(|(&c, &p)| (c as f64 - t * p).powi(2) / (t * p))
                .sum();
            let within_3sigma = counts
                .iter()
                .zip(&expected)
                .all(|(&c, &p)| (c as f64 / t - p).abs() <= 3.0 * (p * (1.0 - p) / t).sqrt());
            MarginalAudit {
                vertex: v,
                counts,
                expected,
                chi_square,
                degrees_of_freedom: support.len() - 1,
                within_3sigma,
            }
        })
        .collect();

    Ok(CouplingAudit {
        trials,
        seed,
        pairs,
        marginals,
    })
}

fn check_profile(g: &Graph, functions: &[LocalFunction]) -> Result<()> {
    if functions.len() != g.n() {
        return Err(invalid(format!(
            "{} functions for {} vertices",
            functions.len(),
            g.n()
        )));
    }
    if let Some(f) = functions.iter().find(|f| f.model().len() != g.n()) {
        return Err(invalid(format!(
            "input model has {} variables, expected one per vertex",
            f.model().len()
        )));
    }
    Ok(())
}

/// Shapley influence distribution of each vertex's function. Variable `k` of
/// the input model belongs to vertex `k`.
pub fn profile_influences(
    g: &Graph,
    r: usize,
    functions: &[LocalFunction],
) -> Result<DistributionFamily> {
    check_profile(g, functions)?;
    let distributions = functions
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let dist = g.distances(i, Some(r));
            if let Some(&k) = f.scope().iter().find(|&&k| dist[k].is_none()) {
                return Err(Error::LocalityViolation {
                    vertex: i,
                    variable: k,
                    radius: r,
                });
            }
            shapley_influence(f)
        })
        .collect::<Result<Vec<_>>>()?;
    DistributionFamily::local(g, r, distributions)
}

/// `(1/|E|) Σ_{(i,j)} ½ E[(X_i - X_j)²]` over ordered edges, with every
/// function standardized first.
pub fn profile_epsilon(g: &Graph, functions: &[LocalFunction]) -> Result<f64> {
    check_profile(g, functions)?;
    if g.ordered_edge_count() == 0 {
        return Err(Error::UndefinedMetric("graph has no edges".into()));
    }
    let x = functions.par_iter().map(normalize).collect::<Result<Vec<_>>>()?;
    let edges: Vec<(usize, usize)> = g.edges().collect();
    // Each undirected edge stands for two ordered pairs of weight ½.
    let total = edges
        .par_iter()
        .map(|&(i, j)| mean_square_distance(&x[i], &x[j]))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>();
    Ok(total / g.ordered_edge_count() as f64)
}

/// Components of `g` after deleting every edge whose endpoints disagree on
/// the leader, as a certificate with the common leader of each component.
pub fn certificate_from_leaders(
    g: &Graph,
    r: usize,
    leaders: &[usize],
) -> Result<PartitionCertificate> {
    let labels = graph::component_labels(g, |i, j| leaders[i] == leaders[j]);
    let communities = graph::group_by_label(&labels);
    let component_leaders = communities
        .iter()
        .map(|c| leaders[c.as_slice()[0]])
        .collect::<Vec<_>>();
    for (c, &l) in communities.iter().zip(&component_leaders) {
        let dist = g.distances(l, Some(r));
        if let Some(v) = c.iter().find(|&v| dist[v].is_none()) {
            return Err(Error::Invariant(format!(
                "vertex {v} lies outside B_{r}({l}) of its component leader"
            )));
        }
    }
    PartitionCertificate::from_communities(g, r, communities, component_leaders)
}

/// One trial of the pipeline.
pub fn sample_certificate(
    g: &Graph,
    r: usize,
    family: &DistributionFamily,
    rng: &mut Rng,
) -> Result<PartitionCertificate> {
    let sample = grand_couple_with(family, rng);
    certificate_from_leaders(g, r, &sample.leaders)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEstimate {
    pub trials: usize,
    pub seed: u64,
    pub mean_cut_fraction: f64,
    pub std_error: f64,
    /// `sqrt(8 ε)` for the supplied `ε`.
    pub bound: f64,
    pub epsilon_input: f64,
    /// Largest distance from a component leader to a member, over all trials.
    pub max_leader_distance: usize,
    /// Largest radius of a sampled component measured from its best member.
    pub max_set_radius: usize,
    pub sample_certificates: Vec<PartitionCertificate>,
}

impl CertificateEstimate {
    /// Mean cut fraction within `k` standard errors of the bound.
    pub fn bound_satisfied(&self, k: f64) -> bool {
        self.mean_cut_fraction <= self.bound + k * self.std_error
    }
}

struct TrialSummary {
    fraction: f64,
    leader_distance: usize,
    set_radius: usize,
    certificate: Option<PartitionCertificate>,
}

/// Runs the pipeline for `trials` independent races and compares the mean
/// ordered cut fraction with `sqrt(8 epsilon)`. The first trial's
/// certificate is kept.
pub fn extract_certificate(
    g: &Graph,
    r: usize,
    family: &DistributionFamily,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<CertificateEstimate> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    if !(epsilon >= 0.0) {
        return Err(invalid(format!("epsilon {epsilon} must be nonnegative")));
    }
    if family.len() != g.n() || family.points() != g.n() {
        return Err(invalid("family must have one distribution per vertex on the vertex set"));
    }
    family.check_local(g, r)?;
    let summaries = rng::run_trials(trials, seed, Purpose::Certify, |t, rng| {
        let cert = sample_certificate(g, r, family, rng)?;
        let check = verify_certificate(g, &cert);
        if !check.valid {
            return Err(Error::Invariant(format!(
                "sampled certificate rejected: {}",
                check.violation.map(|v| v.to_string()).unwrap_or_default()
            )));
        }
        let mut leader_distance = 0;
        let mut set_radius = 0;
        for (c, &l) in cert.communities.iter().zip(&cert.leaders) {
            let dist = g.distances(l, Some(r));
            leader_distance = leader_distance.max(c.iter().filter_map(|v| dist[v]).max().unwrap_or(0));
            set_radius = set_radius.max(graph::set_radius(g, c)?.0);
        }
        Ok(TrialSummary {
            fraction: cert.epsilon_achieved,
            leader_distance,
            set_radius,
            certificate: (t == 0).then_some(cert),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let fractions: Vec<f64> = summaries.iter().map(|s| s.fraction).collect();
    let stats = MonteCarloStats::from_values(&fractions, seed);
    Ok(CertificateEstimate {
        trials,
        seed,
        mean_cut_fraction: stats.mean,
        std_error: stats.std_error,
        bound: (8.0 * epsilon).sqrt(),
        epsilon_input: epsilon,
        max_leader_distance: summaries.iter().map(|s| s.leader_distance).max().unwrap_or(0),
        max_set_radius: summaries.iter().map(|s| s.set_radius).max().unwrap_or(0),
        sample_certificates: summaries.into_iter().filter_map(|s| s.certificate).collect(),
    })
}

/// `X_i = Z_{leader(i)}` with fair `±1` inputs.
pub fn leader_profile(g: &Graph, cert: &PartitionCertificate) -> Result<Vec<LocalFunction>> {
    let model = Arc::new(InputModel::rademacher(g.n()));
    let mut leader = vec![0; g.n()];
    for (c, &l) in cert.communities.iter().zip(&cert.leaders) {
        for v in c.iter() {
            leader[v] = l;
        }
    }
    leader
        .iter()
        .map(|&l| LocalFunction::from_fn(model.clone(), vec![l], |z| z[0]))
        .collect()
}

/// `X_i = Z_i` with fair `±1` inputs.
pub fn iid_profile(g: &Graph) -> Result<Vec<LocalFunction>> {
    let model = Arc::new(InputModel::rademacher(g.n()));
    (0..g.n())
        .map(|i| LocalFunction::from_fn(model.clone(), vec![i], |z| z[0]))
        .collect()
}

/// Leader play where each non-leader ignores the leader with probability
/// `flip` and plays its own fair coin instead.
///
/// Each `Z_i` takes values `0..4`: bit 0 is the coin (`1` for `+1`) and
/// bit 1 marks a deviation, which has probability `flip`.
pub fn perturbed_leader_profile(
    g: &Graph,
    cert: &PartitionCertificate,
    flip: f64,
) -> Result<Vec<LocalFunction>> {
    if !(flip > 0.0 && flip < 1.0) {
        return Err(invalid(format!("flip probability {flip} must lie in (0, 1)")));
    }
    let code = Variable::new(
        vec![0.0, 1.0, 2.0, 3.0],
        vec![(1.0 - flip) / 2.0, (1.0 - flip) / 2.0, flip / 2.0, flip / 2.0],
    )?;
    let model = Arc::new(InputModel::new(vec![code; g.n()]));
    let sign = |z: f64| if (z as u8) & 1 == 1 { 1.0 } else { -1.0 };
    let deviates = |z: f64| (z as u8) & 2 == 2;
    let mut out: Vec<Option<LocalFunction>> = vec![None; g.n()];
    for (c, &l) in cert.communities.iter().zip(&cert.leaders) {
        for v in c.iter() {
            let f = if v == l {
                LocalFunction::from_fn(model.clone(), vec![l], |z| sign(z[0]))?
            } else {
                LocalFunction::from_fn(model.clone(), vec![l, v], |z| {
                    if deviates(z[1]) {
                        sign(z[1])
                    } else {
                        sign(z[0])
                    }
                })?
            };
            out[v] = Some(f);
        }
    }
    out.into_iter()
        .map(|f| f.ok_or_else(|| invalid("certificate does not cover every vertex")))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
}

/// On-disk strategy profile: one input variable and one function per vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileFile {
    pub supports: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    pub functions: Vec<ProfileEntry>,
}

impl ProfileFile {
    pub fn from_functions(functions: &[LocalFunction]) -> Result<Self> {
        let model = functions
            .first()
            .map(|f| f.model().clone())
            .ok_or_else(|| invalid("empty profile"))?;
        if functions.iter().any(|f| f.model() != &model) {
            return Err(invalid("profile functions use different input models"));
        }
        Ok(ProfileFile {
            supports: model.variables().iter().map(|v| v.support.clone()).collect(),
            probs: model.variables().iter().map(|v| v.probs.clone()).collect(),
            functions: functions
                .iter()
                .map(|f| ProfileEntry {
                    scope: f.scope().to_vec(),
                    table: f.table().to_vec(),
                })
                .collect(),
        })
    }

    pub fn into_functions(self) -> Result<Vec<LocalFunction>> {
        let model = Arc::new(InputModel::from_parts(self.supports, self.probs)?);
        self.functions
            .into_iter()
            .map(|e| LocalFunction::new(model.clone(), e.scope, e.table))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

/// Vertices grouped by common value of `leaders`, smallest member first.
pub fn leader_classes(leaders: &[usize]) -> Vec<VertexSet> {
    let mut by_leader: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (v, &l) in leaders.iter().enumerate() {
        by_leader.entry(l).or_default().push(v);
    }
    let mut classes: Vec<VertexSet> = by_leader.into_values().map(VertexSet::new).collect();
    classes.sort_by_key(|c| c.as_slice()[0]);
    classes
}
