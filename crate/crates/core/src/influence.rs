//! Shapley influence distributions of functions of independent inputs.
//!
//! For `X` with mean zero and unit variance, the variance game
//! `v(S) = Var(E[X | Z_S])` has nonnegative Harsanyi dividends summing to 1,
//! and its Shapley values form a probability distribution over the inputs.
//! Everything here is computed by exact summation over the product measure.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default bound on the number of scoped variables.
pub const DEFAULT_SCOPE_CAP: usize = 20;

const PROB_TOL: f64 = 1e-12;
const STANDARD_TOL: f64 = 1e-9;
const DIVIDEND_TOL: f64 = 1e-9;

/// A finite-valued random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Variable {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(invalid("variable with empty support"));
        }
        if support.len() != probs.len() {
            return Err(invalid(format!(
                "support has {} values but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|&&p| !(p > 0.0)) {
            return Err(invalid(format!("probability {p} is not positive")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        for (a, x) in support.iter().enumerate() {
            if support[..a].contains(x) {
                return Err(invalid(format!("repeated support value {x}")));
            }
        }
        Ok(Variable { support, probs })
    }

    /// Fair `±1` coin.
    pub fn rademacher() -> Self {
        Variable {
            support: vec![-1.0, 1.0],
            probs: vec![0.5, 0.5],
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    fn is_rademacher(&self) -> bool {
        let mut s = self.support.clone();
        s.sort_by(f64::total_cmp);
        s == [-1.0, 1.0] && self.probs.iter().all(|p| (p - 0.5).abs() <= PROB_TOL)
    }
}

/// Independent variables `Z_0, Z_1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputModel {
    variables: Vec<Variable>,
}

impl InputModel {
    pub fn new(variables: Vec<Variable>) -> Self {
        InputModel { variables }
    }

    /// `n` independent fair coins.
    pub fn rademacher(n: usize) -> Self {
        InputModel::new(vec![Variable::rademacher(); n])
    }

    pub fn from_parts(supports: Vec<Vec<f64>>, probs: Vec<Vec<f64>>) -> Result<Self> {
        if supports.len() != probs.len() {
            return Err(invalid("supports and probs must have the same length"));
        }
        let variables = supports
            .into_iter()
            .zip(probs)
            .map(|(s, p)| Variable::new(s, p))
            .collect::<Result<_>>()?;
        Ok(InputModel { variables })
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }
}

/// A real function of the scoped variables, tabulated row-major over their
/// supports with the last scoped variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFunction {
    model: Arc<InputModel>,
    scope: Vec<usize>,
    table: Vec<f64>,
}

/// On-disk local function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFunctionFile {
    pub supports: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
}

impl LocalFunction {
    pub fn new(model: Arc<InputModel>, scope: Vec<usize>, table: Vec<f64>) -> Result<Self> {
        for (k, &v) in scope.iter().enumerate() {
            if v >= model.len() {
                return Err(invalid(format!("scope variable {v} not in the input model")));
            }
            if scope[..k].contains(&v) {
                return Err(invalid(format!("scope variable {v} repeated")));
            }
        }
        let size = scope
            .iter()
            .try_fold(1usize, |acc, &v| acc.checked_mul(model.variable(v).len()))
            .ok_or_else(|| invalid("table size overflows"))?;
        if table.len() != size {
            return Err(invalid(format!(
                "table has {} entries, scope needs {size}",
                table.len()
            )));
        }
        if let Some(x) = table.iter().find(|x| !x.is_finite()) {
            return Err(invalid(format!("table entry {x} is not finite")));
        }
        Ok(LocalFunction {
            model,
            scope,
            table,
        })
    }

    /// Builds a table by evaluating `f` on the support values of the scope.
    pub fn from_fn(
        model: Arc<InputModel>,
        scope: Vec<usize>,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let dims: Vec<usize> = scope.iter().map(|&v| model.variable(v).len()).collect();
        let mut table = Vec::with_capacity(dims.iter().product());
        let mut values = vec![0.0; scope.len()];
        for_each_assignment(&dims, |digits| {
            for (k, &d) in digits.iter().enumerate() {
                values[k] = model.variable(scope[k]).support[d];
            }
            table.push(f(&values));
        });
        LocalFunction::new(model, scope, table)
    }

    pub fn model(&self) -> &Arc<InputModel> {
        &self.model
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    fn dims(&self) -> Vec<usize> {
        self.scope.iter().map(|&v| self.model.variable(v).len()).collect()
    }

    fn probs(&self) -> Vec<&[f64]> {
        self.scope
            .iter()
            .map(|&v| self.model.variable(v).probs.as_slice())
            .collect()
    }

    /// `(E[X], Var[X])` under the product measure.
    pub fn mean_and_variance(&self) -> (f64, f64) {
        let probs = self.probs();
        let mut mean = 0.0;
        let mut second = 0.0;
        let mut idx = 0;
        for_each_assignment(&self.dims(), |digits| {
            let w: f64 = digits.iter().zip(&probs).map(|(&d, p)| p[d]).product();
            let x = self.table[idx];
            mean += w * x;
            second += w * x * x;
            idx += 1;
        });
        (mean, (second - mean * mean).max(0.0))
    }

    pub fn is_standardized(&self) -> bool {
        let (m, v) = self.mean_and_variance();
        m.abs() <= STANDARD_TOL && (v - 1.0).abs() <= STANDARD_TOL
    }

    /// The same function tabulated over `scope`, which must contain this
    /// function's scope.
    pub fn extend_to(&self, scope: &[usize]) -> Result<LocalFunction> {
        let position: Vec<usize> = self
            .scope
            .iter()
            .map(|v| {
                scope
                    .iter()
                    .position(|w| w == v)
                    .ok_or_else(|| invalid(format!("variable {v} missing from target scope")))
            })
            .collect::<Result<_>>()?;
        let own_dims = self.dims();
        let mut strides = vec![1usize; self.scope.len()];
        for k in (0..self.scope.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * own_dims[k + 1];
        }
        let dims: Vec<usize> = scope.iter().map(|&v| self.model.variable(v).len()).collect();
        let mut table = Vec::with_capacity(dims.iter().product());
        for_each_assignment(&dims, |digits| {
            let idx: usize = position
                .iter()
                .zip(&strides)
                .map(|(&pos, &stride)| digits[pos] * stride)
                .sum();
            table.push(self.table[idx]);
        });
        LocalFunction::new(self.model.clone(), scope.to_vec(), table)
    }

    pub fn to_file(&self) -> LocalFunctionFile {
        LocalFunctionFile {
            supports: self.model.variables.iter().map(|v| v.support.clone()).collect(),
            probs: self.model.variables.iter().map(|v| v.probs.clone()).collect(),
            scope: self.scope.clone(),
            table: self.table.clone(),
        }
    }

    pub fn from_file(file: LocalFunctionFile) -> Result<Self> {
        let model = InputModel::from_parts(file.supports, file.probs)?;
        LocalFunction::new(Arc::new(model), file.scope, file.table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: LocalFunctionFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        LocalFunction::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_file())?)?;
        Ok(())
    }
}

/// Visits every assignment of a mixed-radix counter, last digit fastest.
fn for_each_assignment(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.contains(&0) {
        return;
    }
    let mut digits = vec![0usize; dims.len()];
    loop {
        f(&digits);
        let mut k = dims.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// Union of two scopes, keeping the first scope's order.
pub fn union_scope(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = a.to_vec();
    out.extend(b.iter().filter(|v| !a.contains(v)));
    out
}

/// `(X - E X) / sqrt(Var X)`.
pub fn normalize(f: &LocalFunction) -> Result<LocalFunction> {
    let (mean, var) = f.mean_and_variance();
    let scale = f.table.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    if var <= 1e-24 * scale * scale {
        return Err(Error::DegenerateFunction);
    }
    let sd = var.sqrt();
    let table = f.table.iter().map(|x| (x - mean) / sd).collect();
    LocalFunction::new(f.model.clone(), f.scope.clone(), table)
}

/// A game on the scoped variables; bit `k` of a coalition mask stands for
/// variable `players[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperativeGame {
    pub players: Vec<usize>,
    pub values: Vec<f64>,
}

impl CooperativeGame {
    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn value(&self, mask: usize) -> f64 {
        self.values[mask]
    }
}

fn check_cap(size: usize, cap: usize) -> Result<()> {
    if size > cap {
        Err(Error::Capacity {
            what: "scope",
            size,
            cap,
        })
    } else {
        Ok(())
    }
}

/// `v(S) = Var(E[f | Z_S])` for every `S` within the scope.
pub fn variance_game(f: &LocalFunction) -> Result<CooperativeGame> {
    variance_game_with_cap(f, DEFAULT_SCOPE_CAP)
}

pub fn variance_game_with_cap(f: &LocalFunction, cap: usize) -> Result<CooperativeGame> {
    let k = f.scope.len();
    check_cap(k, cap)?;
    let (mean, _) = f.mean_and_variance();
    let probs = f.probs();
    let mut values = vec![0.0; 1 << k];
    conditional_second_moments(0, &f.table, &f.dims(), 0, &probs, &mut values);
    for v in values.iter_mut() {
        *v = (*v - mean * mean).max(0.0);
    }
    values[0] = 0.0;
    Ok(CooperativeGame {
        players: f.scope.clone(),
        values,
    })
}

/// Depth-first over variables: each one is either kept or averaged out of
/// the conditional-expectation table. At the leaves, stores `E[g_S²]`.
fn conditional_second_moments(
    t: usize,
    table: &[f64],
    dims: &[usize],
    kept: usize,
    probs: &[&[f64]],
    out: &mut [f64],
) {
    let k = probs.len();
    if t == k {
        let kept_probs: Vec<&[f64]> = (0..k).filter(|i| kept >> i & 1 == 1).map(|i| probs[i]).collect();
        let mut acc = 0.0;
        let mut idx = 0;
        for_each_assignment(dims, |digits| {
            let w: f64 = digits.iter().zip(&kept_probs).map(|(&d, p)| p[d]).product();
            acc += w * table[idx] * table[idx];
            idx += 1;
        });
        out[kept] = acc;
        return;
    }
    conditional_second_moments(t + 1, table, dims, kept | 1 << t, probs, out);

    // Axis t sits after the kept axes that precede it.
    let pos = (kept & ((1 << t) - 1)).count_ones() as usize;
    let outer: usize = dims[..pos].iter().product();
    let inner: usize = dims[pos + 1..].iter().product();
    let size = dims[pos];
    let mut reduced = vec![0.0; outer * inner];
    for o in 0..outer {
        for (a, &p) in probs[t].iter().enumerate().take(size) {
            let base = (o * size + a) * inner;
            for i in 0..inner {
                reduced[o * inner + i] += p * table[base + i];
            }
        }
    }
    let mut smaller = dims.to_vec();
    smaller.remove(pos);
    conditional_second_moments(t + 1, &reduced, &smaller, kept, probs, out);
}

/// Möbius inversion: `d(S) = Σ_{T⊆S} (-1)^{|S∖T|} v(T)`.
pub fn harsanyi_dividends(game: &CooperativeGame) -> Vec<f64> {
    let mut d = game.values.clone();
    for i in 0..game.n() {
        let bit = 1 << i;
        for mask in 0..d.len() {
            if mask & bit != 0 {
                d[mask] -= d[mask ^ bit];
            }
        }
    }
    d
}

/// Zeta transform, the inverse of [`harsanyi_dividends`].
pub fn game_from_dividends(players: Vec<usize>, dividends: &[f64]) -> CooperativeGame {
    let mut v = dividends.to_vec();
    for i in 0..players.len() {
        let bit = 1 << i;
        for mask in 0..v.len() {
            if mask & bit != 0 {
                v[mask] += v[mask ^ bit];
            }
        }
    }
    CooperativeGame { players, values: v }
}

/// Probability per input variable of the ambient model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceDistribution {
    pub probabilities: Vec<f64>,
}

impl InfluenceDistribution {
    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut probabilities = vec![0.0; n];
        probabilities[at] = 1.0;
        InfluenceDistribution { probabilities }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Checks nonnegativity (to `-1e-9`) and unit mass (to `1e-9`).
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.probabilities.iter().find(|&&p| !(p >= -DIVIDEND_TOL)) {
            return Err(Error::InvalidDistribution(format!("negative mass {p}")));
        }
        let total: f64 = self.probabilities.iter().sum();
        if (total - 1.0).abs() > STANDARD_TOL {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(())
    }

    /// Indices with positive mass, paired with their mass.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (k, p))
            .collect()
    }

    /// Largest mass and its index (lowest index on ties), with the gap to
    /// the runner-up.
    pub fn argmax_with_gap(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut second = f64::NEG_INFINITY;
        for (k, &p) in self.probabilities.iter().enumerate() {
            match best {
                Some((_, b)) if p <= b => second = second.max(p),
                Some((_, b)) => {
                    second = b;
                    best = Some((k, p));
                }
                None => best = Some((k, p)),
            }
        }
        best.map(|(k, p)| (k, if second.is_finite() { p - second } else { p }))
    }
}

/// `μ(k) = Σ_{S ∋ k} d(S) / |S|` for the dividends of the variance game of the
/// standardized function, placed on the ambient variable indices.
pub fn shapley_influence(f: &LocalFunction) -> Result<InfluenceDistribution> {
    let x = normalize(f)?;
    let game = variance_game(&x)?;
    let d = harsanyi_dividends(&game);
    if let Some((mask, &v)) = d.iter().enumerate().find(|(_, &v)| v < -DIVIDEND_TOL) {
        return Err(Error::Invariant(format!(
            "negative Harsanyi dividend {v} on coalition {mask:#b}"
        )));
    }
    let mut probabilities = vec![0.0; f.model.len()];
    for (mask, &dv) in d.iter().enumerate().skip(1) {
        let share = dv / mask.count_ones() as f64;
        for (k, &player) in game.players.iter().enumerate() {
            if mask >> k & 1 == 1 {
                probabilities[player] += share;
            }
        }
    }
    Ok(InfluenceDistribution { probabilities })
}

/// Squared Walsh coefficients `f̂(S)²`, indexed by scope masks as in
/// [`CooperativeGame`]. Requires every scoped input to be a fair `±1` coin.
/// The weights sum to `E[f²]`.
pub fn fourier_weights(f: &LocalFunction) -> Result<Vec<f64>> {
    let k = f.scope.len();
    check_cap(k, DEFAULT_SCOPE_CAP)?;
    if let Some(&v) = f.scope.iter().find(|&&v| !f.model.variable(v).is_rademacher()) {
        return Err(Error::UnsupportedBasis(format!(
            "variable {v} is not a fair ±1 coin"
        )));
    }
    let mut h = f.table.clone();
    walsh_hadamard(&mut h);
    let scale = (1usize << k) as f64;
    let mut weights = vec![0.0; 1 << k];
    for (c, &x) in h.iter().enumerate() {
        // Table bit b belongs to scope position k-1-b.
        let mask = (0..k).filter(|b| c >> b & 1 == 1).fold(0, |m, b| m | 1 << (k - 1 - b));
        weights[mask] = (x / scale).powi(2);
    }
    Ok(weights)
}

/// In-place unnormalized fast Walsh–Hadamard transform.
fn walsh_hadamard(a: &mut [f64]) {
    let mut h = 1;
    while h < a.len() {
        for chunk in a.chunks_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// Half the L¹ distance.
pub fn total_variation(mu: &InfluenceDistribution, nu: &InfluenceDistribution) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(invalid(format!(
            "distributions over {} and {} points",
            mu.len(),
            nu.len()
        )));
    }
    Ok(0.5
        * mu
            .probabilities
            .iter()
            .zip(&nu.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

fn same_model(f: &LocalFunction, h: &LocalFunction) -> Result<()> {
    if Arc::ptr_eq(&f.model, &h.model) || f.model == h.model {
        Ok(())
    } else {
        Err(invalid("functions are defined over different input models"))
    }
}

/// `E[(f - h)²]`, summed over the union of the two scopes.
pub fn mean_square_distance(f: &LocalFunction, h: &LocalFunction) -> Result<f64> {
    same_model(f, h)?;
    let scope = union_scope(&f.scope, &h.scope);
    check_cap(scope.len(), DEFAULT_SCOPE_CAP)?;
    let (a, b) = (f.extend_to(&scope)?, h.extend_to(&scope)?);
    let diff: Vec<f64> = a.table.iter().zip(&b.table).map(|(x, y)| x - y).collect();
    let d = LocalFunction::new(f.model.clone(), scope, diff)?;
    let (m, v) = d.mean_and_variance();
    Ok(v + m * m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub tv: f64,
    /// `sqrt(E[(X - Y)²])` for the standardized functions.
    pub l2: f64,
    /// `½ Σ_S |x̂²_S - ŷ²_S|` over coalitions of the union scope.
    pub dividend_bound: f64,
    pub holds: bool,
}

/// Compares `d_TV(μ_X, μ_Y)` with `sqrt(E[(X-Y)²])`. Both functions are
/// standardized first.
pub fn contraction_check(f: &LocalFunction, h: &LocalFunction) -> Result<ContractionCheck> {
    same_model(f, h)?;
    let (x, y) = (normalize(f)?, normalize(h)?);
    let tv = total_variation(&shapley_influence(&x)?, &shapley_influence(&y)?)?;
    let l2 = mean_square_distance(&x, &y)?.sqrt();
    let scope = union_scope(&x.scope, &y.scope);
    let dx = harsanyi_dividends(&variance_game(&x.extend_to(&scope)?)?);
    let dy = harsanyi_dividends(&variance_game(&y.extend_to(&scope)?)?);
    let dividend_bound = 0.5 * dx.iter().zip(&dy).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(ContractionCheck {
        tv,
        l2,
        dividend_bound,
        holds: tv <= l2 + 1e-9,
    })
}

/// Random function of `scope` with table entries uniform on `[-1, 1]`.
pub fn random_function<R: Rng + ?Sized>(
    model: &Arc<InputModel>,
    scope: Vec<usize>,
    rng: &mut R,
) -> Result<LocalFunction> {
    let size = scope.iter().map(|&v| model.variable(v).len()).product();
    let table = (0..size).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    LocalFunction::new(model.clone(), scope, table)
}

/// Between 1 and `max_k` distinct variables out of `n`, in random order.
pub fn random_scope<R: Rng + ?Sized>(n: usize, max_k: usize, rng: &mut R) -> Vec<usize> {
    let k = rng.gen_range(1..=max_k.min(n).max(1));
    rand::seq::index::sample(rng, n, k).into_vec()
}

/// A random function on a random scope, paired with either a noisy copy of
/// itself or an unrelated random function, each case with probability ½.
pub fn random_pair<R: Rng + ?Sized>(
    model: &Arc<InputModel>,
    max_k: usize,
    rng: &mut R,
) -> Result<(LocalFunction, LocalFunction)> {
    let n = model.len();
    let f = random_function(model, random_scope(n, max_k, rng), rng)?;
    let h = if rng.gen::<bool>() {
        let noise = rng.gen_range(0.0..1.0);
        perturb(&f, noise, rng)?
    } else {
        random_function(model, random_scope(n, max_k, rng), rng)?
    };
    Ok((f, h))
}

/// `f` plus independent uniform noise of half-width `noise` per table entry.
pub fn perturb<R: Rng + ?Sized>(f: &LocalFunction, noise: f64, rng: &mut R) -> Result<LocalFunction> {
    let table = f
        .table
        .iter()
        .map(|x| x + noise * rng.gen_range(-1.0..=1.0))
        .collect();
    LocalFunction::new(f.model.clone(), f.scope.clone(), table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;

    fn coins(n: usize) -> Arc<InputModel> {
        Arc::new(InputModel::rademacher(n))
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    // Oracle: Var(E[f | Z_S]) by grouping assignments on the S-coordinates.
    fn brute_variance(f: &LocalFunction, mask: usize) -> f64 {
        let dims = f.dims();
        let probs = f.probs();
        let mut groups: std::collections::HashMap<Vec<usize>, (f64, f64)> = Default::default();
        let mut idx = 0;
        for_each_assignment(&dims, |digits| {
            let w: f64 = digits.iter().zip(&probs).map(|(&d, p)| p[d]).product();
            let key: Vec<usize> = (0..dims.len()).filter(|k| mask >> k & 1 == 1).map(|k| digits[k]).collect();
            let e = groups.entry(key).or_default();
            e.0 += w;
            e.1 += w * f.table[idx];
            idx += 1;
        });
        let mean: f64 = groups.values().map(|(_, s)| s).sum();
        groups.values().map(|(w, s)| w * (s / w - mean).powi(2)).sum()
    }

    #[test]
    fn normalize_examples() {
        let m = coins(1);
        let z = LocalFunction::from_fn(m.clone(), vec![0], |z| z[0]).unwrap();
        assert_eq!(normalize(&z).unwrap(), z);
        let three = LocalFunction::from_fn(m.clone(), vec![0], |z| 3.0 * z[0]).unwrap();
        assert_eq!(normalize(&three).unwrap().table(), z.table());
        let constant = LocalFunction::from_fn(m, vec![0], |_| 2.5).unwrap();
        assert!(matches!(normalize(&constant), Err(Error::DegenerateFunction)));
        let x = normalize(&three).unwrap();
        assert_eq!(normalize(&x).unwrap(), x);
    }

    #[test]
    fn variance_game_examples() {
        let m = coins(2);
        let parity = LocalFunction::from_fn(m.clone(), vec![0, 1], |z| z[0] * z[1]).unwrap();
        let g = variance_game(&parity).unwrap();
        assert_eq!(g.values, vec![0.0, 0.0, 0.0, 1.0]);

        let lin = LocalFunction::from_fn(m, vec![0, 1], |z| (2.0 * z[0] + z[1]) / 5f64.sqrt()).unwrap();
        let g = variance_game(&lin).unwrap();
        assert!(close(g.value(0b01), 0.8));
        assert!(close(g.value(0b10), 0.2));
        assert!(close(g.value(0b11), 1.0));
        for mask in 0..4 {
            assert!(close(g.value(mask), brute_variance(&lin, mask)));
        }
    }

    #[test]
    fn capacity_is_enforced() {
        let m = coins(3);
        let f = LocalFunction::from_fn(m, vec![0, 1, 2], |z| z[0] + z[1] * z[2]).unwrap();
        assert!(matches!(
            variance_game_with_cap(&f, 2),
            Err(Error::Capacity { size: 3, cap: 2, .. })
        ));
    }

    #[test]
    fn dividend_examples() {
        let m = coins(2);
        let parity = LocalFunction::from_fn(m, vec![0, 1], |z| z[0] * z[1]).unwrap();
        assert_eq!(harsanyi_dividends(&variance_game(&parity).unwrap()), vec![0.0, 0.0, 0.0, 1.0]);

        let w = [0.3, 1.2, -0.4];
        let values = (0..8usize)
            .map(|mask| (0..3).filter(|k| mask >> k & 1 == 1).map(|k| w[k]).sum())
            .collect();
        let additive = CooperativeGame { players: vec![0, 1, 2], values };
        let d = harsanyi_dividends(&additive);
        for mask in 0..8usize {
            let want = if mask.count_ones() == 1 { w[mask.trailing_zeros() as usize] } else { 0.0 };
            assert!(close(d[mask], want));
        }
    }

    #[test]
    fn shapley_examples() {
        let m = coins(3);
        let dictator = LocalFunction::from_fn(m.clone(), vec![1], |z| z[0]).unwrap();
        assert_eq!(shapley_influence(&dictator).unwrap().probabilities, vec![0.0, 1.0, 0.0]);

        let parity = LocalFunction::from_fn(m.clone(), vec![0, 1], |z| z[0] * z[1]).unwrap();
        assert_eq!(shapley_influence(&parity).unwrap().probabilities, vec![0.5, 0.5, 0.0]);

        let lin = LocalFunction::from_fn(m, vec![0, 1], |z| (2.0 * z[0] + z[1]) / 5f64.sqrt()).unwrap();
        let mu = shapley_influence(&lin).unwrap();
        assert!(close(mu.probabilities[0], 0.8) && close(mu.probabilities[1], 0.2));
    }

    #[test]
    fn fourier_examples() {
        let m = coins(3);
        let z = LocalFunction::from_fn(m.clone(), vec![0], |z| z[0]).unwrap();
        assert_eq!(fourier_weights(&z).unwrap(), vec![0.0, 1.0]);

        let maj = LocalFunction::from_fn(m.clone(), vec![0, 1, 2], |z| (z[0] + z[1] + z[2]).signum()).unwrap();
        let w = fourier_weights(&normalize(&maj).unwrap()).unwrap();
        for (mask, &x) in w.iter().enumerate() {
            let want = if mask.count_ones() % 2 == 1 { 0.25 } else { 0.0 };
            assert!(close(x, want), "mask {mask:03b}: {x}");
        }

        let biased = Arc::new(InputModel::from_parts(vec![vec![-1.0, 1.0]], vec![vec![0.3, 0.7]]).unwrap());
        let f = LocalFunction::from_fn(biased, vec![0], |z| z[0]).unwrap();
        assert!(matches!(fourier_weights(&f), Err(Error::UnsupportedBasis(_))));
        let ternary = Arc::new(InputModel::from_parts(vec![vec![0.0, 1.0, 2.0]], vec![vec![0.2, 0.3, 0.5]]).unwrap());
        let f = LocalFunction::from_fn(ternary, vec![0], |z| z[0]).unwrap();
        assert!(matches!(fourier_weights(&f), Err(Error::UnsupportedBasis(_))));
    }

    #[test]
    fn general_inputs_are_supported() {
        // Non-identical, non-binary inputs: game values match the oracle and
        // the influence is a probability distribution on the scope.
        let model = Arc::new(
            InputModel::from_parts(
                vec![vec![0.0, 1.0, 5.0], vec![2.0, 3.0], vec![1.0, 4.0, 7.0, 9.0]],
                vec![vec![0.2, 0.5, 0.3], vec![0.9, 0.1], vec![0.1, 0.2, 0.3, 0.4]],
            )
            .unwrap(),
        );
        let f = LocalFunction::from_fn(model.clone(), vec![2, 0], |z| z[0] * z[1] - z[1].powi(2)).unwrap();
        let x = normalize(&f).unwrap();
        let g = variance_game(&x).unwrap();
        for mask in 0..4 {
            assert!((g.value(mask) - brute_variance(&x, mask)).abs() < 1e-12);
        }
        let mu = shapley_influence(&f).unwrap();
        mu.validate().unwrap();
        assert_eq!(mu.probabilities[1], 0.0);
    }

    #[test]
    fn total_variation_examples() {
        let a = InfluenceDistribution { probabilities: vec![0.5, 0.5] };
        let b = InfluenceDistribution { probabilities: vec![0.75, 0.25] };
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        assert_eq!(total_variation(&a, &b).unwrap(), 0.25);
        let p = InfluenceDistribution::point_mass(3, 0);
        let q = InfluenceDistribution::point_mass(3, 2);
        assert_eq!(total_variation(&p, &q).unwrap(), 1.0);
        assert!(total_variation(&a, &p).is_err());
    }

    #[test]
    fn contraction_examples() {
        let m = coins(2);
        let z0 = LocalFunction::from_fn(m.clone(), vec![0], |z| z[0]).unwrap();
        let z1 = LocalFunction::from_fn(m, vec![1], |z| z[0]).unwrap();
        let same = contraction_check(&z0, &z0).unwrap();
        assert_eq!((same.tv, same.l2, same.holds), (0.0, 0.0, true));
        let c = contraction_check(&z0, &z1).unwrap();
        assert!(close(c.tv, 1.0) && close(c.l2, 2f64.sqrt()) && c.holds);

        let other = Arc::new(InputModel::rademacher(2));
        let elsewhere = LocalFunction::from_fn(Arc::new(InputModel::rademacher(3)), vec![0], |z| z[0]).unwrap();
        let mine = LocalFunction::from_fn(other, vec![0], |z| z[0]).unwrap();
        assert!(contraction_check(&mine, &elsewhere).is_err());
    }

    #[test]
    fn extend_to_preserves_values() {
        let m = Arc::new(InputModel::from_parts(vec![vec![0.0, 1.0, 2.0], vec![5.0, 6.0]], vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.5]]).unwrap());
        let f = LocalFunction::from_fn(m.clone(), vec![0], |z| z[0] * 10.0).unwrap();
        let wide = f.extend_to(&[1, 0]).unwrap();
        assert_eq!(wide.table(), &[0.0, 10.0, 20.0, 0.0, 10.0, 20.0]);
        assert_eq!(f.mean_and_variance(), wide.mean_and_variance());
        assert!(f.extend_to(&[1]).is_err());
    }

    #[test]
    fn file_format_roundtrip() {
        let m = coins(3);
        let f = LocalFunction::from_fn(m, vec![2, 0], |z| z[0] - 0.5 * z[1]).unwrap();
        let json = serde_json::to_value(f.to_file()).unwrap();
        assert_eq!(json["scope"], serde_json::json!([2, 0]));
        assert_eq!(json["table"], serde_json::json!([-0.5, -1.5, 1.5, 0.5]));
        let back = LocalFunction::from_file(serde_json::from_value(json).unwrap()).unwrap();
        assert_eq!(back.table(), f.table());
        assert!(LocalFunction::new(coins(2), vec![0, 0], vec![0.0; 4]).is_err());
        assert!(LocalFunction::new(coins(2), vec![0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn argmax_gap() {
        let mu = InfluenceDistribution { probabilities: vec![0.1, 0.6, 0.3] };
        let (k, gap) = mu.argmax_with_gap().unwrap();
        assert_eq!(k, 1);
        assert!(close(gap, 0.3));
    }

    fn arb_binary_function() -> impl Strategy<Value = LocalFunction> {
        (1usize..=6, any::<u64>()).prop_map(|(k, seed)| {
            let mut rng = stream(seed, Purpose::Sweep, 0);
            random_function(&coins(6), (0..k).collect(), &mut rng).unwrap()
        })
    }

    proptest! {
        #[test]
        fn game_values_match_oracle_and_are_monotone(f in arb_binary_function()) {
            let Ok(x) = normalize(&f) else { return Ok(()) };
            let g = variance_game(&x).unwrap();
            let full = g.values.len() - 1;
            prop_assert!((g.value(full) - 1.0).abs() < 1e-9);
            for s in 0..g.values.len() {
                prop_assert!((g.value(s) - brute_variance(&x, s)).abs() < 1e-9);
                for t in 0..g.values.len() {
                    if s & t == s {
                        prop_assert!(g.value(s) <= g.value(t) + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn dividends_roundtrip(values in prop::collection::vec(-3.0f64..3.0, 16)) {
            let mut values = values;
            values[0] = 0.0;
            let game = CooperativeGame { players: vec![0, 1, 2, 3], values };
            let back = game_from_dividends(game.players.clone(), &harsanyi_dividends(&game));
            for (a, b) in back.values.iter().zip(&game.values) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn fourier_equals_mobius_and_parseval(f in arb_binary_function()) {
            let Ok(x) = normalize(&f) else { return Ok(()) };
            let w = fourier_weights(&x).unwrap();
            let d = harsanyi_dividends(&variance_game(&x).unwrap());
            for (a, b) in w.iter().zip(&d) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let mu = shapley_influence(&x).unwrap();
            prop_assert!(mu.validate().is_ok());
            for v in x.scope().len()..6 {
                prop_assert_eq!(mu.probabilities[v], 0.0);
            }
        }

        #[test]
        fn contraction_and_argmax_stability(f in arb_binary_function(), seed in any::<u64>(), noise in 0.0f64..1.0) {
            let mut rng = stream(seed, Purpose::Sweep, 1);
            let h = perturb(&f, noise, &mut rng).unwrap();
            let (Ok(x), Ok(y)) = (normalize(&f), normalize(&h)) else { return Ok(()) };
            let c = contraction_check(&x, &y).unwrap();
            prop_assert!(c.holds, "{:?}", c);
            prop_assert!(c.tv <= c.dividend_bound + 1e-9);
            prop_assert!(c.dividend_bound <= c.l2 + 1e-9);
            let mu_x = shapley_influence(&x).unwrap();
            let mu_y = shapley_influence(&y).unwrap();
            let (ax, gap) = mu_x.argmax_with_gap().unwrap();
            if c.l2 < gap / 2.0 {
                prop_assert_eq!(mu_y.argmax_with_gap().unwrap().0, ax);
            }
        }
    }
}
