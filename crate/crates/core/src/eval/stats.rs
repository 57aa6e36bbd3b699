use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest combined sample size for which the Mann–Whitney p-value is
/// computed from the exact permutation distribution.
pub const EXACT_MANN_WHITNEY_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U for the first sample: number of (a, b) pairs with a > b, ties ½.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Doubled midranks (integers) of the pooled sample, plus the tie sizes.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled midrank = i + j + 2
        for &o in &order[i..=j] {
            ranks[o] = (i + j + 2) as u64;
        }
        ties.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, ties)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Mann-Whitney sample"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Mann-Whitney sample"));
    }
    let (na, nb) = (a.len() as u64, b.len() as u64);
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let s_obs: u64 = ranks[..a.len()].iter().sum();
    // 2U = 2R_a - na(na+1); centred at na·nb
    let centre2 = na * (na + 1) + na * nb;
    let dev_obs = s_obs.abs_diff(centre2);
    let u = (s_obs - na * (na + 1)) as f64 / 2.0;

    if n as usize <= EXACT_MANN_WHITNEY_MAX_N {
        // counts[j][s]: subsets of size j with doubled rank sum s
        let max_sum: u64 = ranks.iter().sum();
        let width = max_sum as usize + 1;
        let mut counts = vec![vec![0u64; width]; a.len() + 1];
        counts[0][0] = 1;
        for &r in &ranks {
            for j in (1..=a.len()).rev() {
                let (lo, hi) = counts.split_at_mut(j);
                for s in (r as usize..width).rev() {
                    hi[0][s] += lo[j - 1][s - r as usize];
                }
            }
        }
        let total: u64 = counts[a.len()].iter().sum();
        let extreme: u64 = counts[a.len()]
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as u64).abs_diff(centre2) >= dev_obs)
            .map(|(_, c)| c)
            .sum();
        return Ok(MannWhitney {
            u,
            p: extreme as f64 / total as f64,
            exact: true,
        });
    }

    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
    let variance = naf * nbf / 12.0 * ((nf + 1.0) - tie_term);
    if variance <= 0.0 {
        return Ok(MannWhitney { u, p: 1.0, exact: false });
    }
    let z = ((dev_obs as f64 / 2.0) - 0.5).max(0.0) / libm::sqrt(variance);
    let p = libm::erfc(z / core::f64::consts::SQRT_2).min(1.0);
    Ok(MannWhitney { u, p, exact: false })
}

fn log_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += libm::log(k as f64);
        out.push(acc);
    }
    out
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`.
pub fn fisher_exact(table: [[u64; 2]; 2]) -> Result<f64> {
    let [[a, b], [c, d]] = table;
    let n = a + b + c + d;
    if n == 0 {
        return Err(Error::Empty("contingency table"));
    }
    let (r1, c1) = (a + b, a + c);
    let lf = log_factorials(n);
    let ln_choose = |m: u64, k: u64| lf[m as usize] - lf[k as usize] - lf[(m - k) as usize];
    let log_p = |x: u64| ln_choose(c1, x) + ln_choose(n - c1, r1 - x) - ln_choose(n, r1);
    let lo = r1.saturating_sub(n - c1);
    let hi = r1.min(c1);
    let cutoff = log_p(a) + libm::log1p(1e-7);
    let p: f64 = (lo..=hi)
        .map(log_p)
        .filter(|&lp| lp <= cutoff)
        .map(libm::exp)
        .sum();
    Ok(p.min(1.0))
}
