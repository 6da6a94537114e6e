//! Budget distribution heuristics shared by the cascade controllers.

use crate::actuators::DomainMap;

/// Water-filling grant of `budget` across `requests`, proportional to
/// `weights`, floored at `floor` and capped at each request. Surplus from
/// capped entries is redistributed until exhausted.
///
/// If the budget cannot cover the floors, every entry is granted its floor
/// and `infeasible` is flagged.
pub fn proportional_fill(
    requests: &[f64],
    weights: &[f64],
    budget: f64,
    floor: f64,
) -> (Vec<f64>, bool) {
    let n = requests.len();
    let mut grants = vec![0.0; n];
    let mut remaining = budget;
    for i in 0..n {
        grants[i] = floor.min(requests[i]);
        remaining -= grants[i];
    }
    if remaining <= 0.0 {
        return (grants, true);
    }
    let mut active: Vec<usize> = (0..n).filter(|&i| grants[i] < requests[i]).collect();
    while !active.is_empty() && remaining > 1e-12 {
        let wsum: f64 = active.iter().map(|&i| weights[i].max(1e-12)).sum();
        let mut consumed = 0.0;
        let mut still = Vec::with_capacity(active.len());
        for &i in &active {
            let share = remaining * weights[i].max(1e-12) / wsum;
            let need = requests[i] - grants[i];
            if share >= need {
                grants[i] = requests[i];
                consumed += need;
            } else {
                grants[i] += share;
                consumed += share;
                still.push(i);
            }
        }
        remaining -= consumed;
        // No entry capped: the proportional shares were final.
        if still.len() == active.len() {
            break;
        }
        active = still;
    }
    (grants, false)
}

/// Domain-level heuristic of the fuzzy-cascade controller.
///
/// Domains first take `min(request, P_Dj)`. If the total still exceeds the
/// chip budget, the excess is removed proportionally to a temperature blend
/// (hot domains shed more). Within each domain the grant is split
/// proportionally to the workload proxy, favoring demanding cores.
pub struct FcaDistribution {
    pub granted: Vec<f64>,
    pub floor_infeasible: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn fca_power_distribute(
    core_requests: &[f64],
    workload_proxy: &[f64],
    sensed_t: &[f64],
    domains: &DomainMap,
    p_budget: f64,
    p_domain: &[f64],
    temp_blend_gamma: f64,
    p_floor: f64,
) -> FcaDistribution {
    let n_d = domains.n_domains();
    let mut dom_request = vec![0.0; n_d];
    let mut dom_blend = vec![0.0; n_d];
    for (d, cores) in domains.domains() {
        let mut max_t = f64::NEG_INFINITY;
        let mut sum_t = 0.0;
        for &c in cores {
            dom_request[d] += core_requests[c];
            max_t = max_t.max(sensed_t[c]);
            sum_t += sensed_t[c];
        }
        let mean_t = sum_t / cores.len() as f64;
        dom_blend[d] = temp_blend_gamma * max_t + (1.0 - temp_blend_gamma) * mean_t;
    }

    // Per-rail caps first.
    let mut dom_grant: Vec<f64> = (0..n_d)
        .map(|d| dom_request[d].min(p_domain[d]))
        .collect();

    // Chip-level budget: shed the excess from hot domains first.
    let mut excess: f64 = dom_grant.iter().sum::<f64>() - p_budget;
    let mut floor_infeasible = false;
    if excess > 0.0 {
        let blend_min = dom_blend.iter().cloned().fold(f64::MAX, f64::min);
        let floors: Vec<f64> = domains
            .domains()
            .map(|(_, cores)| cores.len() as f64 * p_floor)
            .collect();
        for _ in 0..=n_d {
            if excess <= 1e-12 {
                break;
            }
            let reducible: Vec<usize> = (0..n_d).filter(|&d| dom_grant[d] > floors[d]).collect();
            if reducible.is_empty() {
                break;
            }
            let wsum: f64 = reducible
                .iter()
                .map(|&d| (dom_blend[d] - blend_min) + 1.0)
                .sum();
            let mut removed = 0.0;
            for &d in &reducible {
                let w = (dom_blend[d] - blend_min) + 1.0;
                let cut = (excess * w / wsum).min(dom_grant[d] - floors[d]);
                dom_grant[d] -= cut;
                removed += cut;
            }
            excess -= removed;
            if removed <= 1e-12 {
                break;
            }
        }
        if excess > 1e-9 {
            floor_infeasible = true;
        }
    }

    // Within each domain: workload-proportional split, floored per core.
    let mut granted = vec![0.0; domains.n_cores()];
    for (d, cores) in domains.domains() {
        if (dom_grant[d] - dom_request[d]).abs() <= 1e-12 {
            for &c in cores {
                granted[c] = core_requests[c];
            }
            continue;
        }
        let reqs: Vec<f64> = cores.iter().map(|&c| core_requests[c]).collect();
        let weights: Vec<f64> = cores.iter().map(|&c| workload_proxy[c]).collect();
        let (g, infeasible) = proportional_fill(&reqs, &weights, dom_grant[d], p_floor);
        floor_infeasible |= infeasible;
        for (k, &c) in cores.iter().enumerate() {
            granted[c] = g[k];
        }
    }
    FcaDistribution {
        granted,
        floor_infeasible,
    }
}
