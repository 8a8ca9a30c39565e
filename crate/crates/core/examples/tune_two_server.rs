// Scratch harness for picking the two-server desk-scale grid. Not shipped.
use rayon::prelude::*;
use tsmdp::agents::{run_tsmdp, TsmdpParams};
use tsmdp::analysis::{decision_regions, epsilon_min, regret_constant, AnalysisConfig};
use tsmdp::families::{build_two_server_mdp, grid_prior, FamilyKind, QueueConfig, TwoServerParams};
use tsmdp::mdp::{PolicyClass, StationaryPolicy};
use tsmdp::affine_fit;

fn envf(name: &str, default: f64) -> f64 {
    std::env::var(name).map(|s| s.parse().unwrap()).unwrap_or(default)
}

fn config() -> QueueConfig<f64> {
    QueueConfig {
        capacity: envf("CAP", 8.0) as usize,
        mu_slow: envf("MUS", 0.2),
        mu_fast: envf("MUF", 0.7),
        cost_slow: 0.0,
        cost_fast: envf("CF", 6.0),
        holding_cost: envf("HOLD", 1.0),
        service_reward: envf("REW", 20.0),
        lambda_cap: 0.9,
    }
}

fn copt(theta: f64) -> Vec<usize> {
    let mdp = build_two_server_mdp(&TwoServerParams { theta }, &config()).unwrap();
    mdp.optimal_policy(&PolicyClass::All).unwrap().policy.actions().to_vec()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("boundary");

    if mode == "boundary" {
        // scan for decision boundaries over a wide theta range
        let mut prev = copt(0.10);
        println!("0.1000 {:?}", prev);
        let mut boundaries = Vec::new();
        for i in 1..=160 {
            let theta = 0.10 + i as f64 * 0.005;
            let cur = copt(theta);
            if cur != prev {
                // bisect
                let (mut lo, mut hi) = (theta - 0.005, theta);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if copt(mid) == prev {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                println!("boundary at {:.12} -> {:?}", hi, cur);
                boundaries.push(hi);
                prev = cur;
            }
        }
        println!("boundaries: {boundaries:?}");
        return;
    }

    if mode == "queue" {
        queue_probe();
        return;
    }

    // mode = "shape": evaluate a candidate grid's regret shape
    let axis: Vec<f64> = candidate_axis();
    let t_idx = axis.iter().position(|&t| (t - theta_star()).abs() < 1e-12).unwrap();
    let qc = config();
    let grid = grid_prior(FamilyKind::TwoServer, &[axis.clone()], &qc, (0.0, 1.0)).unwrap();
    let truth = grid.mdp(t_idx).clone();

    let cfg = AnalysisConfig { epsilon_prime: f64::INFINITY, ..AnalysisConfig::default() };
    let analysis = decision_regions(&grid, t_idx, cfg, &PolicyClass::All).unwrap();
    println!("policies: {}", analysis.profile.n_policies());
    println!("c_star: {}", analysis.regions.c_star);
    for (i, &theta) in axis.iter().enumerate() {
        let own = analysis.profile.value(i, analysis.regions.region_of[i]);
        let dcs = analysis.profile.value(i, analysis.regions.c_star);
        println!(
            "{i:2} theta {theta:.6} region {} D_own {own:.3e} D_c* {dcs:.3e} death~{:.1e}",
            analysis.regions.region_of[i],
            14.0 / dcs.max(1e-300),
        );
    }
    println!("eps_min: {:?}", epsilon_min(&analysis));
    match regret_constant(&analysis, None) {
        Ok(rc) => println!("C = {:.4} (vacuous {})", rc.value, rc.vacuous),
        Err(e) => println!("C error: {e}"),
    }

    // divergence-proportional prior: equalizes each point's total expected
    // contribution, spreading cohort extinctions across time decades
    let weights: Option<Vec<f64>> = if std::env::var("DPRIOR").is_ok() {
        let scale = envf("WSCALE", 100.0);
        let dmax = (0..axis.len())
            .map(|i| analysis.profile.value(i, analysis.regions.c_star))
            .fold(0.0f64, f64::max);
        let w: Vec<f64> = (0..axis.len())
            .map(|i| {
                if i == t_idx {
                    1.0
                } else {
                    scale * analysis.profile.value(i, analysis.regions.c_star) / dmax
                }
            })
            .collect();
        println!("weights: {w:?}");
        Some(w)
    } else {
        None
    };

    let checkpoints: Vec<u64> = vec![1_000, 10_000, 100_000, 1_000_000];
    let n_runs = 50;
    let medians: Vec<Vec<u64>> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let base = envf("SEED", 1000.0) as u64;
            let mut params =
                TsmdpParams::new(&truth, &grid, 0, 1_000_000, &checkpoints, base ^ i);
            params.prior = weights.as_deref();
            params.cycle_cap = envf("ECAP", 1000.0) as u64;
            params.cycle_cap_policy = tsmdp::agents::CycleCapPolicy::Resample;
            let outcome = run_tsmdp(&params).unwrap();
            outcome.result.checkpoints.iter().map(|c| c.suboptimal_steps).collect()
        })
        .collect();
    let mut meds = Vec::new();
    for (j, &t) in checkpoints.iter().enumerate() {
        let mut vals: Vec<u64> = medians.iter().map(|r| r[j]).collect();
        vals.sort();
        let med = vals[n_runs as usize / 2] as f64;
        println!("T={t}: median subopt {med}  (min {} max {})", vals[0], vals[vals.len()-1]);
        meds.push(med);
    }
    let xs: Vec<f64> = checkpoints.iter().map(|&t| (t as f64).ln()).collect();
    let (b, c, r2) = affine_fit(&xs, &meds);
    println!("fit: B={b:.1} C={c:.2} R2={r2:.4}");
}

fn queue_probe() {
    use std::time::Instant;
    use tsmdp::agents::{run_ucrl2, PolicySolutions, Ucrl2Config, Ucrl2Delta, Ucrl2Params};
    use tsmdp::families::QueueParams;

    let qc = QueueConfig {
        capacity: 50,
        mu_slow: 0.3,
        mu_fast: 0.8,
        cost_slow: 0.0,
        cost_fast: 25.0,
        holding_cost: 1.0,
        service_reward: 200.0,
        lambda_cap: 0.95,
    };
    let scale = 50.0;
    let truth =
        build_two_server_mdp_like(&QueueParams { mu_bar: 0.6 * scale, sigma_bar: 0.3 * scale }, &qc);
    let t0 = Instant::now();
    let solution = truth.optimal_policy(&PolicyClass::All).unwrap();
    println!("true solve: gain {:.6} in {:?}", solution.gain, t0.elapsed());
    let chain = truth.induce(&solution.policy).unwrap();
    let pi = chain.stationary_distribution().unwrap();
    let mode = pi.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    println!("pi mode: state {} mass {:.4}", mode.0, mode.1);
    println!("policy: {:?}", solution.policy.actions());

    let mu_axis: Vec<f64> = (1..=19).map(|i| 0.05 * i as f64 * scale).collect();
    let sigma_axis: Vec<f64> = (1..=10).map(|i| 0.2 * i as f64 * scale).collect();
    let t0 = Instant::now();
    let grid = grid_prior(FamilyKind::Queue, &[mu_axis, sigma_axis], &qc, (0.0, 1.0)).unwrap();
    println!("grid build: {:?}", t0.elapsed());
    if std::env::var("DEBUG_GRID").is_ok() {
        for i in 0..grid.len() {
            if let Err(e) = grid.mdp(i).optimal_policy(&PolicyClass::All) {
                println!("grid point {i} ({}): {e}", grid.label(i));
            }
        }
    }
    let t0 = Instant::now();
    let solutions = PolicySolutions::solve(&truth, &grid, &PolicyClass::All).unwrap();
    println!(
        "grid solve: {:?} ({} distinct policies, mu* {:.4})",
        t0.elapsed(),
        solutions.n_policies(),
        solutions.mu_star
    );

    // choose the epoch marker state: for every realized policy the expected
    // return time under the truth should stay manageable
    for s0_candidate in [mode.0, 36, 38, 40, 41, 42, 43, 44, 45] {
        let mut worst = (0.0f64, 0usize);
        let mut self_return = 0.0f64;
        for (c, policy) in solutions.policies.iter().enumerate() {
            let chain = truth.induce(policy).unwrap();
            let hit = chain.expected_hitting_times(s0_candidate);
            match hit {
                Ok(h) => {
                    // expected return time from s0 = 1 + sum q(s0,s') h(s')
                    let ret: f64 = 1.0
                        + (0..chain.n_states())
                            .map(|s2| chain.prob(s0_candidate, s2) * h[s2].min(1e300))
                            .sum::<f64>();
                    if ret > worst.0 {
                        worst = (ret, c);
                    }
                    if c == solutions.c_star {
                        self_return = ret;
                    }
                }
                Err(e) => println!("  s0 {s0_candidate} policy {c}: {e}"),
            }
        }
        println!(
            "s0 {s0_candidate}: worst expected return {:.3e} (policy {}), under c* {:.2}",
            worst.0, worst.1, self_return
        );
    }

    for (name, a) in [("all-SLOW", 0usize), ("all-FAST", 1)] {
        let chain = truth.induce(&StationaryPolicy::constant(51, a)).unwrap();
        let (g, _) = chain.evaluate().unwrap();
        println!("gain({name}) = {g:.6}  (gap {:.6})", solution.gain - g);
    }
    // realized policy gains under the truth
    let mut gains: Vec<(usize, f64)> = solutions
        .policies
        .iter()
        .enumerate()
        .map(|(c, p)| (c, truth.induce(p).unwrap().evaluate().unwrap().0))
        .collect();
    gains.sort_by(|x, y| x.1.total_cmp(&y.1));
    println!("worst realized-policy gains: {:?}", &gains[..4.min(gains.len())]);
    println!("best realized-policy gains: {:?}", &gains[gains.len().saturating_sub(3)..]);

    let s0 = envf("S0", mode.0 as f64) as usize;
    let n_runs = envf("RUNS", 8.0) as u64;

    let horizon = envf("HORIZON", 100_000.0) as u64;
    let checkpoints: Vec<u64> = {
        let mut v: Vec<u64> = vec![10, 100, 1000, 10_000, 100_000, 1_000_000];
        v.retain(|&t| t <= horizon);
        v
    };
    let cap = envf("ECAP", 100.0) as u64;
    let policy_gaps: Vec<f64> = solutions
        .policies
        .iter()
        .map(|p| solution.gain - truth.induce(p).unwrap().evaluate().unwrap().0)
        .collect();
    let t0 = Instant::now();
    let outs: Vec<(f64, Vec<u64>)> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut params = TsmdpParams::new(&truth, &grid, s0, horizon, &checkpoints, 500 + i);
            params.solutions = Some(&solutions);
            params.cycle_cap = cap;
            params.cycle_cap_policy = tsmdp::agents::CycleCapPolicy::Resample;
            let outcome = run_tsmdp(&params).unwrap();
            (
                outcome.result.checkpoints.last().unwrap().pseudo_regret,
                outcome.ledger.steps_per_policy.clone(),
            )
        })
        .collect();
    let ts_regret: Vec<f64> = outs.iter().map(|(r, _)| *r).collect();
    // mean regret attribution: steps under policy c times its gain gap
    let mut attribution = vec![0.0f64; solutions.n_policies()];
    for (_, steps) in &outs {
        for (c, &v) in steps.iter().enumerate() {
            attribution[c] += v as f64 * policy_gaps[c] / n_runs as f64;
        }
    }
    let mut attr: Vec<(usize, f64)> = attribution.into_iter().enumerate().collect();
    attr.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("top regret attributions (policy, mean cost, gap):");
    for (c, cost) in attr.iter().take(8) {
        println!("  policy {c}: cost {cost:.0} gap {:.2}", policy_gaps[*c]);
    }
    let ts_mean = ts_regret.iter().sum::<f64>() / n_runs as f64;
    let sorted = { let mut v = ts_regret.clone(); v.sort_by(f64::total_cmp); v };
    println!(
        "tsmdp {} runs in {:?}: mean regret {:.0} med {:.0} p80 {:.0} max {:.0}",
        n_runs, t0.elapsed(), ts_mean,
        sorted[sorted.len()/2], sorted[(sorted.len()*4)/5], sorted[sorted.len()-1]
    );

    let t0 = Instant::now();
    let ucrl_regret: Vec<f64> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let params = Ucrl2Params {
                true_mdp: &truth,
                config: Ucrl2Config { delta: Ucrl2Delta::Fixed(0.1) },
                s0,
                horizon,
                seed: 900 + i,
                checkpoints: &checkpoints,
            };
            let result = run_ucrl2(&params).unwrap();
            result.checkpoints.last().unwrap().pseudo_regret
        })
        .collect();
    let ucrl_mean = ucrl_regret.iter().sum::<f64>() / n_runs as f64;
    let sorted = { let mut v = ucrl_regret.clone(); v.sort_by(f64::total_cmp); v };
    println!(
        "ucrl2 {} runs in {:?}: mean regret {:.0} med {:.0} p20 {:.0} p80 {:.0} max {:.0}",
        n_runs, t0.elapsed(), ucrl_mean,
        sorted[sorted.len()/2], sorted[sorted.len()/5], sorted[(sorted.len()*4)/5], sorted[sorted.len()-1]
    );
}

fn build_two_server_mdp_like(
    params: &tsmdp::families::QueueParams<f64>,
    qc: &QueueConfig<f64>,
) -> tsmdp::Mdp {
    tsmdp::families::build_queue_mdp(params, qc).unwrap()
}

fn theta_star() -> f64 {
    std::env::var("TSTAR").map(|s| s.parse().unwrap()).unwrap_or(0.44)
}

fn candidate_axis() -> Vec<f64> {
    if let Ok(s) = std::env::var("AXIS") {
        return s.split(',').map(|x| x.parse().unwrap()).collect();
    }
    (0..20).map(|i| 0.30 + 0.30 * i as f64 / 19.0).collect()
}
