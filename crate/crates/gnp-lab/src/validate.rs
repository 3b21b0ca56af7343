//! Small-scale oracle and invariant sweep behind `gnp-lab validate`: every
//! engine is checked against an independent ground truth in a few seconds,
//! and the process exits nonzero if anything disagrees.

use serde::Serialize;

use crate::exploration::{
    active_from_walk, explore_explicit, explore_implicit, GnpParams,
};
use crate::graph::{components_union_find, exact_size_distribution, sample_gnp_explicit};
use crate::rng::{derive_stream, log_binom_pmf, sample_binomial, BinomialSpec};
use crate::stats::chi_square_gof;
use crate::walks::{
    q_value, simulate_tau, spitzer_unique_rotation, tau_pmf_exact, WalkParams,
};

#[derive(Clone, Debug, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub master_seed: u64,
    pub version: String,
    pub checks: Vec<ValidationCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check(name: &str, pass: bool, detail: String) -> ValidationCheck {
    ValidationCheck {
        name: name.to_string(),
        pass,
        detail,
    }
}

/// Run the whole sweep. Deterministic in `master_seed`.
pub fn run_validation(master_seed: u64) -> ValidationReport {
    let mut checks = Vec::new();

    // explicit exploration vs union-find, exact equality
    {
        let mut mismatches = 0u64;
        let mut cases = 0u64;
        for (i, &(n, p)) in [(20u64, 0.05), (60, 0.02), (60, 0.2), (40, 0.5)]
            .iter()
            .enumerate()
        {
            for rep in 0..30u64 {
                let mut stream = derive_stream(master_seed, 1_000 + i as u64 * 100 + rep);
                let params = GnpParams::new(n, p).unwrap();
                let graph = sample_gnp_explicit(&params, &mut stream);
                let order: Vec<u64> = (1..=n).collect();
                let out = explore_explicit(n, graph.edges(), &order, false).unwrap();
                if out.sorted_sizes_desc() != components_union_find(&graph) {
                    mismatches += 1;
                }
                cases += 1;
            }
        }
        checks.push(check(
            "explicit_exploration_vs_union_find",
            mismatches == 0,
            format!("{mismatches} mismatches over {cases} graphs"),
        ));
    }

    // implicit exploration vs exhaustive enumeration, chi-square
    {
        let n = 3u64;
        let p = 0.5;
        let replicas = 20_000u64;
        let dist = exact_size_distribution(n, p).unwrap();
        let params = GnpParams::new(n, p).unwrap();
        let keys: Vec<Vec<u64>> = dist.entries.keys().cloned().collect();
        let mut counts = vec![0u64; keys.len()];
        for r in 0..replicas {
            let mut stream = derive_stream(master_seed, 2_000_000 + r);
            let out = explore_implicit(&params, &mut stream, false);
            let sizes = out.sorted_sizes_desc();
            let idx = keys.iter().position(|k| *k == sizes).expect("known multiset");
            counts[idx] += 1;
        }
        let probs: Vec<f64> = keys.iter().map(|k| dist.probability(k)).collect();
        let gof = chi_square_gof(&counts, &probs, 0);
        checks.push(check(
            "implicit_exploration_vs_enumeration",
            gof.passes(0.001),
            format!("chi-square p = {:.4}", gof.p_value),
        ));
    }

    // cycle lemma, exhaustive over {-1,0,1,2}^k, k <= 5, sum -1
    {
        let alphabet = [-1i64, 0, 1, 2];
        let mut tested = 0u64;
        let mut ok = true;
        for k in 1..=5usize {
            let mut seq = vec![0usize; k];
            loop {
                let vals: Vec<i64> = seq.iter().map(|&i| alphabet[i]).collect();
                if vals.iter().sum::<i64>() == -1 {
                    tested += 1;
                    // panics on violation; exercise the result too
                    if spitzer_unique_rotation(&vals).is_err() {
                        ok = false;
                    }
                }
                let mut pos = 0;
                loop {
                    if pos == k {
                        break;
                    }
                    seq[pos] += 1;
                    if seq[pos] < alphabet.len() {
                        break;
                    }
                    seq[pos] = 0;
                    pos += 1;
                }
                if pos == k {
                    break;
                }
            }
        }
        checks.push(check(
            "cycle_lemma_exhaustive",
            ok,
            format!("{tested} sequences, unique rotation each"),
        ));
    }

    // pmf normalization
    {
        let mut worst = 0.0f64;
        for &n in &[1u64, 7, 50, 200] {
            for &p in &[0.1, 0.5, 0.9] {
                let spec = BinomialSpec::new(n, p).unwrap();
                let total: f64 = (0..=n).map(|k| log_binom_pmf(k, &spec).exp()).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
        checks.push(check(
            "binomial_pmf_normalization",
            worst < 1e-12,
            format!("max |sum - 1| = {worst:.2e}"),
        ));
    }

    // sampler vs pmf chi-square
    {
        let n = 20u64;
        let p = 0.1;
        let draws = 20_000u64;
        let spec = BinomialSpec::new(n, p).unwrap();
        let mut stream = derive_stream(master_seed, 3_000_000);
        let mut counts = vec![0u64; n as usize + 1];
        for _ in 0..draws {
            counts[sample_binomial(&mut stream, &spec) as usize] += 1;
        }
        let probs: Vec<f64> = (0..=n).map(|k| log_binom_pmf(k, &spec).exp()).collect();
        let gof = chi_square_gof(&counts, &probs, 0);
        checks.push(check(
            "binomial_sampler_vs_pmf",
            gof.passes(0.001),
            format!("chi-square p = {:.4}", gof.p_value),
        ));
    }

    // tau simulation vs exact pmf chi-square
    {
        let params = WalkParams::new(10, 0.3).unwrap();
        let draws = 20_000u64;
        let t_bins = 60u64;
        let mut counts = vec![0u64; t_bins as usize];
        let mut beyond = 0u64;
        for r in 0..draws {
            let mut stream = derive_stream(master_seed, 4_000_000 + r);
            match simulate_tau(&params, &mut stream, 100_000).hit() {
                Some(t) if t <= t_bins => counts[(t - 1) as usize] += 1,
                _ => beyond += 1,
            }
        }
        let probs: Vec<f64> = (1..=t_bins).map(|t| tau_pmf_exact(t, &params)).collect();
        let gof = chi_square_gof(&counts, &probs, beyond);
        checks.push(check(
            "tau_simulation_vs_exact_pmf",
            gof.passes(0.001),
            format!("chi-square p = {:.4}", gof.p_value),
        ));
    }

    // Wald mean at small scale
    {
        let params = WalkParams::new(10, 0.2).unwrap();
        let draws = 20_000u64;
        let mut sum = 0u64;
        let mut sum_sq = 0u128;
        for r in 0..draws {
            let mut stream = derive_stream(master_seed, 5_000_000 + r);
            let t = simulate_tau(&params, &mut stream, 1_000_000)
                .hit()
                .expect("subcritical walk hits zero");
            sum += t;
            sum_sq += (t as u128) * (t as u128);
        }
        let mean = sum as f64 / draws as f64;
        let var = sum_sq as f64 / draws as f64 - mean * mean;
        let se = (var / draws as f64).sqrt();
        let dev = (mean - 5.0).abs() / se;
        checks.push(check(
            "wald_mean",
            dev <= 4.0,
            format!("mean {mean:.4} vs 5, {dev:.2} standard errors"),
        ));
    }

    // traced-run invariants and the walk identity
    {
        let params = GnpParams::new(500, 1.5 / 500.0).unwrap();
        let mut ok = true;
        let mut detail = String::from("all invariants hold");
        for r in 0..20u64 {
            let mut stream = derive_stream(master_seed, 6_000_000 + r);
            let out = explore_implicit(&params, &mut stream, true);
            let trace = out.trace.as_ref().unwrap();
            let walk: Vec<i64> = trace.iter().map(|s| s.walk).collect();
            let reconstructed = active_from_walk(&walk);
            let mut past_min = i64::MAX;
            for (i, s) in trace.iter().enumerate() {
                let nrec2 = s.neutral == 500 - s.t - s.active;
                let y_rel = s.walk == s.active as i64 - s.finished_components as i64;
                let rec = if s.t >= 1 {
                    (s.active == 0) == (s.walk < past_min)
                } else {
                    true
                };
                let z_rel = if s.t >= 1 {
                    s.finished_components as i64 == -(past_min.min(1)) + 1
                } else {
                    true
                };
                let act = reconstructed[i] == s.active;
                if !(nrec2 && y_rel && rec && z_rel && act) {
                    ok = false;
                    detail = format!("violation at replica {r}, t = {}", s.t);
                    break;
                }
                past_min = past_min.min(s.walk);
            }
            for (j, &t) in out.record_times.iter().enumerate() {
                if trace[t as usize].walk != -(j as i64) {
                    ok = false;
                    detail = format!("record value off at replica {r}, t = {t}");
                }
            }
            if !ok {
                break;
            }
        }
        checks.push(check("exploration_trace_invariants", ok, detail));
    }

    // q stays in (0, 1) and hits the exact m = 2 value
    {
        let mut ok = true;
        for &m in &[2u64, 3, 10, 1000] {
            for &eps in &[0.05, 0.3, 0.9] {
                let q = q_value(&WalkParams::new(m, eps).unwrap());
                ok &= q > 0.0 && q < 1.0;
            }
        }
        let q2 = q_value(&WalkParams::new(2, 0.5).unwrap());
        ok &= (q2 - 0.75).abs() < 1e-12;
        checks.push(check(
            "q_value_range",
            ok,
            format!("q(m=2, eps=0.5) = {q2}"),
        ));
    }

    let pass = checks.iter().all(|c| c.pass);
    ValidationReport {
        master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        checks,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_sweep_passes() {
        let report = run_validation(7);
        for c in &report.checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
        assert!(report.pass);
    }
}
