use bciqoe_env::{link_outcome, ResourceAction};
use bciqoe_wireless::NetworkParams;

use crate::error::{HarnessError, Result};

pub const MAX_USERS: usize = 3;
pub const MAX_BLOCKS: usize = 4;
pub const MAX_LEVELS: usize = 16;

/// What the classifier contributes to each user's QoE.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierModel {
    /// Always right: `phi_k = 1 - eps_star`.
    Ideal,
    /// Fixed correctness indicators: `phi_k = (1 - eps_star) c_k`.
    Fixed(Vec<f64>),
}

/// A frozen single-step instance and the search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpec {
    pub net: NetworkParams,
    pub h: Vec<f64>,
    /// Load of the serving CPU.
    pub u: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Powers `P_max * i / L` for `i = 1..=L`.
    pub power_levels: usize,
    /// Compute shares `j / L` with `j` summing to `L` over users.
    pub tau_levels: usize,
    pub classifier: ClassifierModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Best mean QoE over users.
    pub value: f64,
    pub action: ResourceAction,
    pub evaluated: usize,
}

/// All ways to write `total` as an ordered sum of `parts` non-negative
/// integers, in lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn check(spec: &OracleSpec) -> Result<()> {
    let k = spec.h.len();
    let bad = |m: String| Err(HarnessError::Oracle(m));
    if k == 0 || k > MAX_USERS {
        return bad(format!("K = {k} outside 1..={MAX_USERS}"));
    }
    if spec.net.m > MAX_BLOCKS {
        return bad(format!("M = {} exceeds {MAX_BLOCKS}", spec.net.m));
    }
    for (name, l) in [("power", spec.power_levels), ("tau", spec.tau_levels)] {
        if l == 0 || l > MAX_LEVELS {
            return bad(format!("{name} grid of {l} levels outside 1..={MAX_LEVELS}"));
        }
    }
    if let ClassifierModel::Fixed(c) = &spec.classifier {
        if c.len() != k {
            return bad(format!("{} classifier indicators for K = {k}", c.len()));
        }
    }
    Ok(())
}

/// Exhaustive search of the per-step QoE over block counts, power grid and
/// compute-share grid, using the environment's own link model. Blocks are
/// handed out as contiguous runs; rates depend only on the counts, so this
/// loses nothing. Ties keep the first point in enumeration order.
pub fn oracle(spec: &OracleSpec) -> Result<OracleResult> {
    check(spec)?;
    let k = spec.h.len();
    let m = spec.net.m;
    let levels: Vec<f64> = (1..=spec.power_levels)
        .map(|i| spec.net.p_max * i as f64 / spec.power_levels as f64)
        .collect();
    let power_grid = compositions_product(levels.len(), k);
    let taus = compositions(spec.tau_levels, k);
    let mut best: Option<(f64, ResourceAction)> = None;
    let mut evaluated = 0;
    for counts in compositions(m, k) {
        let blocks: Vec<usize> = counts.iter().enumerate().flat_map(|(u, &c)| std::iter::repeat_n(u, c)).collect();
        let rho: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
        for pi in &power_grid {
            let p: Vec<f64> = pi.iter().map(|&i| levels[i]).collect();
            for t in &taus {
                let action = ResourceAction {
                    rho: rho.clone(),
                    blocks: blocks.clone(),
                    p: p.clone(),
                    tau: t.iter().map(|&j| j as f64 / spec.tau_levels as f64).collect(),
                    phi_out: vec![],
                };
                let v = value(spec, &action)?;
                evaluated += 1;
                if best.as_ref().is_none_or(|b| v > b.0) {
                    best = Some((v, action));
                }
            }
        }
    }
    let (value, action) = best.expect("grid is non-empty");
    Ok(OracleResult {
        value,
        action,
        evaluated,
    })
}

/// Mean QoE of `action` on the frozen instance.
pub fn value(spec: &OracleSpec, action: &ResourceAction) -> Result<f64> {
    let link = link_outcome(&spec.net, &spec.h, spec.u, action)?;
    let k = spec.h.len();
    let total: f64 = (0..k)
        .map(|i| {
            let c = match &spec.classifier {
                ClassifierModel::Ideal => 1.0,
                ClassifierModel::Fixed(c) => c[i],
            };
            spec.eta1 * link.psi[i] + spec.eta2 * (1.0 - link.eps_star) * c
        })
        .sum();
    Ok(total / k as f64)
}

/// Every index vector in `0..n` of length `k`, lexicographic.
fn compositions_product(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                (0..n).map(move |i| {
                    let mut w = v.clone();
                    w.push(i);
                    w
                })
            })
            .collect();
    }
    out
}
