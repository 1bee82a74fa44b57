//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Criteria 9-12 read trained checkpoints from `artifacts/` at the
//! workspace root; see the README for the commands that produce them.

use std::path::PathBuf;
use std::sync::OnceLock;

use kdnav::data::synth::{generate, SynthConfig};
use kdnav::data::{augment, cleanse, resample_and_differentiate, CleanseConfig, Sample, SampleSource, TrackSet};
use kdnav::eval::{run_benchmark, BenchmarkConfig, BenchmarkReport, MethodKind, MethodSpec};
use kdnav::geom::Vec2;
use kdnav::nn::{GaussianPolicy, NetSpec, Params, SetBatch, SetNet};
use kdnav::orca::{OrcaController, OrcaParams};
use kdnav::rl::{compute_reward, gae, RewardConfig, StepOutcome};
use kdnav::sim::{
    run_episode, AgentParams, AgentState, AgentStatus, EpisodeConfig, Geometry, GoalRep, Observation, ScenarioKind, ScenarioSpec,
    World,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, ok: bool, detail: String) {
    println!("criterion {n:>2}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn artifacts() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../artifacts")
}

// ---------------------------------------------------------------- 1

/// Scalar evaluation written from the formula, sharing no code with the
/// library.
fn reward_oracle(p0: (f64, f64), p1: (f64, f64), v1: (f64, f64), g: (f64, f64), a: (f64, f64), experts: &[(f64, f64)]) -> f64 {
    let (w_e, w_v, s_e, s_v, vp) = (0.02f64, 0.08f64, -0.85f64, -0.85f64, 1.3f64);
    let _ = p1;
    let mut err = 0.0;
    for e in experts {
        err += ((a.0 - e.0).powi(2) + (a.1 - e.1).powi(2)).sqrt();
    }
    err /= experts.len() as f64;
    let heading = (g.1 - p0.1).atan2(g.0 - p0.0);
    let vstar = (vp * heading.cos(), vp * heading.sin());
    let verr = ((v1.0 - vstar.0).powi(2) + (v1.1 - vstar.1).powi(2)).sqrt();
    w_e * (s_e * err).exp() + w_v * (s_v * verr).exp()
}

#[test]
fn criterion_01_reward_suite() {
    let cfg = RewardConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let base = StepOutcome {
        status: AgentStatus::Active,
        position_before: Vec2::ZERO,
        position_after: Vec2::new(0.156, 0.0),
        velocity_after: Vec2::new(1.3, 0.0),
        goal: Vec2::new(10.0, 0.0),
    };
    let arrived = StepOutcome {
        status: AgentStatus::Arrived,
        ..base
    };
    let ex1 = (compute_reward(&arrived, Vec2::new(0.3, 0.1), &[Vec2::ZERO], &cfg) - 1.0).abs();
    let a = Vec2::new(0.4, -0.2);
    let ex2 = (compute_reward(&base, a, &[a], &cfg) - 0.10).abs();
    let ex3 = (compute_reward(&base, Vec2::new(1.0, 0.0), &[Vec2::ZERO], &cfg) - (0.02 * (-0.85f64).exp() + 0.08)).abs();
    let examples_ok = ex1 < 1e-12 && ex2 < 1e-12 && ex3 < 1e-12 && (0.02 * (-0.85f64).exp() + 0.08 - 0.0885).abs() < 5e-4;

    let mut max_err = 0.0f64;
    for _ in 0..1000 {
        let mut u = |s: f64| rng.random_range(-s..s);
        let p0 = (u(10.0), u(10.0));
        let v1 = (u(2.5), u(2.5));
        let p1 = (p0.0 + 0.12 * v1.0, p0.1 + 0.12 * v1.1);
        let g = (u(10.0), u(10.0));
        let act = (u(2.5), u(2.5));
        let k = rng.random_range(1..=3);
        let experts: Vec<(f64, f64)> = (0..k).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let o = StepOutcome {
            status: AgentStatus::Active,
            position_before: Vec2::new(p0.0, p0.1),
            position_after: Vec2::new(p1.0, p1.1),
            velocity_after: Vec2::new(v1.0, v1.1),
            goal: Vec2::new(g.0, g.1),
        };
        let ev: Vec<Vec2> = experts.iter().map(|e| Vec2::new(e.0, e.1)).collect();
        let got = compute_reward(&o, Vec2::new(act.0, act.1), &ev, &cfg);
        max_err = max_err.max((got - reward_oracle(p0, p1, v1, g, act, &experts)).abs());
    }
    report(
        1,
        examples_ok && max_err <= 1e-12,
        format!("examples errs [{ex1:.1e}, {ex2:.1e}, {ex3:.1e}], max random err {max_err:.2e} (tol 1e-12)"),
    );
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_02_gae_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut max_err = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=50);
        let gamma = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..=n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let (adv, ret) = gae(&rewards, &values, &dones, gamma, lambda).unwrap();
        for t in 0..n {
            // sum over l of (gamma lambda)^l delta_{t+l}, stopping after a terminal step
            let mut sum = 0.0;
            let mut w = 1.0;
            for l in t..n {
                let next = if dones[l] { 0.0 } else { values[l + 1] };
                sum += w * (rewards[l] + gamma * next - values[l]);
                if dones[l] {
                    break;
                }
                w *= gamma * lambda;
            }
            max_err = max_err.max((adv[t] - sum).abs()).max((ret[t] - sum - values[t]).abs());
        }
    }
    report(2, max_err <= 1e-9, format!("max abs err {max_err:.2e} over 500 streams (tol 1e-9)"));
}

// ---------------------------------------------------------------- 3

fn random_obs(rng: &mut ChaCha8Rng, aligned: bool, max_neighbors: usize) -> Observation {
    let mut v = |s: f64| Vec2::new(rng.random_range(-s..s), rng.random_range(-s..s));
    let p = v(3.0);
    let vel = v(1.5);
    let g = v(6.0);
    let k = rng.random_range(0..=max_neighbors);
    let others: Vec<(Vec2, Vec2)> = (0..k)
        .map(|_| {
            let off = Vec2::new(rng.random_range(-2.8..2.8), rng.random_range(-2.8..2.8));
            (p + off, Vec2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
        })
        .collect();
    Observation::build(p, vel, g, others, 4.0, aligned)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst relative error between `analytic` and central differences of
/// `loss`, or `None` when a probe straddles a ReLU kink: the two one-sided
/// differences disagree and the analytic value matches one of them.
fn grad_check<P: Params + Clone>(params: &P, analytic: &P, loss: impl Fn(&P) -> f64) -> Option<f64> {
    let h = 1e-5;
    let an: Vec<f64> = analytic.slices().iter().flat_map(|s| s.iter().copied()).collect();
    let base = loss(params);
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let mut idx = 0;
    for si in 0..probe.slices().len() {
        for j in 0..probe.slices()[si].len() {
            let orig = probe.slices()[si][j];
            probe.slices_mut()[si][j] = orig + h;
            let up = loss(&probe);
            probe.slices_mut()[si][j] = orig - h;
            let down = loss(&probe);
            probe.slices_mut()[si][j] = orig;
            let r = rel(an[idx], (up - down) / (2.0 * h));
            if r > 1e-4 {
                let (fwd, bwd) = ((up - base) / h, (base - down) / h);
                if rel(fwd, bwd) > 1e-2 && rel(an[idx], fwd).min(rel(an[idx], bwd)) <= 1e-4 {
                    return None;
                }
            }
            worst = worst.max(r);
            idx += 1;
        }
    }
    Some(worst)
}

fn expert_draw(rng: &mut ChaCha8Rng) -> Option<f64> {
    let net = SetNet::init(&NetSpec::policy(false), rng);
    let obs: Vec<Observation> = (0..3).map(|_| random_obs(rng, false, 4)).collect();
    let batch = SetBatch::from_observations(&obs).unwrap();
    let targets: Vec<[f64; 2]> = (0..3).map(|_| [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]).collect();
    let loss = |n: &SetNet| {
        let o = n.forward_batch(&batch).unwrap();
        (0..3).map(|i| (o[[i, 0]] - targets[i][0]).powi(2) + (o[[i, 1]] - targets[i][1]).powi(2)).sum::<f64>()
    };
    let (out, cache) = net.forward_train(&batch).unwrap();
    let mut d = out.clone();
    for i in 0..3 {
        for k in 0..2 {
            d[[i, k]] = 2.0 * (out[[i, k]] - targets[i][k]);
        }
    }
    let mut g = net.zeros_like();
    net.backward(&cache, d, &mut g);
    grad_check(&net, &g, loss)
}

/// Weighted log-likelihood, including the log standard deviation.
fn policy_draw(rng: &mut ChaCha8Rng) -> Option<f64> {
    let mut policy = GaussianPolicy::init(&NetSpec::policy(true), 0.5, rng);
    policy.log_std = [rng.random_range(-1.0..0.5), rng.random_range(-1.0..0.5)];
    let obs: Vec<Observation> = (0..3).map(|_| random_obs(rng, true, 4)).collect();
    let batch = SetBatch::from_observations(&obs).unwrap();
    let actions: Vec<Vec2> = (0..3).map(|_| Vec2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))).collect();
    let weights: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let loss = |p: &GaussianPolicy| {
        let m = p.mean.forward_batch(&batch).unwrap();
        (0..3).map(|i| weights[i] * p.log_prob(Vec2::new(m[[i, 0]], m[[i, 1]]), actions[i])).sum::<f64>()
    };
    let (means, cache) = policy.forward_train(&batch).unwrap();
    let mut g = policy.zeros_like();
    policy.backward_log_prob(&cache, &means, &actions, &weights, &mut g);
    grad_check(&policy, &g, loss)
}

fn value_draw(rng: &mut ChaCha8Rng) -> Option<f64> {
    let net = SetNet::init(&NetSpec::value(true), rng);
    let obs: Vec<Observation> = (0..3).map(|_| random_obs(rng, true, 4)).collect();
    let batch = SetBatch::from_observations(&obs).unwrap();
    let targets: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let loss = |n: &SetNet| {
        let o = n.forward_batch(&batch).unwrap();
        (0..3).map(|i| (o[[i, 0]] - targets[i]).powi(2)).sum::<f64>()
    };
    let (out, cache) = net.forward_train(&batch).unwrap();
    let mut d = out.clone();
    for i in 0..3 {
        d[[i, 0]] = 2.0 * (out[[i, 0]] - targets[i]);
    }
    let mut g = net.zeros_like();
    net.backward(&cache, d, &mut g);
    grad_check(&net, &g, loss)
}

#[test]
fn criterion_03_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let roles: [fn(&mut ChaCha8Rng) -> Option<f64>; 3] = [expert_draw, policy_draw, value_draw];
    let mut worst = [0.0f64; 3];
    let mut kinks = 0;
    for (r, draw) in roles.iter().enumerate() {
        let mut valid = 0;
        while valid < 5 {
            match draw(&mut rng) {
                Some(w) => {
                    worst[r] = worst[r].max(w);
                    valid += 1;
                }
                None => kinks += 1,
            }
            assert!(kinks < 20, "too many draws straddle a ReLU kink");
        }
    }
    report(
        3,
        worst.iter().all(|&w| w <= 1e-4),
        format!(
            "worst relative error expert {:.2e}, policy {:.2e}, value {:.2e} over 5 draws each (tol 1e-4; {kinks} kink draws redrawn)",
            worst[0], worst[1], worst[2]
        ),
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_04_permutation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let expert = SetNet::init(&NetSpec::policy(false), &mut rng);
    let policy = SetNet::init(&NetSpec::policy(true), &mut rng);
    let value = SetNet::init(&NetSpec::value(true), &mut rng);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let aligned = i % 2 == 0;
        let obs = random_obs(&mut rng, aligned, 12);
        let mut shuffled = obs.clone();
        shuffled.neighbors.shuffle(&mut rng);
        let nets: Vec<&SetNet> = if aligned { vec![&policy, &value] } else { vec![&expert] };
        for net in nets {
            let a = net.forward(&obs).unwrap();
            let b = net.forward(&shuffled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    report(4, worst <= 1e-6, format!("max output change {worst:.2e} over 1000 shuffles (tol 1e-6)"));
}

// ---------------------------------------------------------------- 5

fn vectors(s: &Sample) -> Vec<Vec2> {
    let o = &s.observation;
    let mut v = vec![o.velocity, s.action];
    if let GoalRep::Relative(g) = o.goal {
        v.push(g);
    }
    for n in &o.neighbors {
        v.push(n.offset);
        v.push(n.rel_velocity);
    }
    v
}

#[test]
fn criterion_05_augmentation_isometry() {
    let cfg = SynthConfig {
        n_pedestrians: 60,
        n_walkers: 45,
        duration: 40.0,
        ..SynthConfig::default()
    };
    let processed = generate(&cfg).iter().filter_map(|r| resample_and_differentiate(r, 0.12)).collect();
    let (mut active, passive) = cleanse(processed, &CleanseConfig::default());
    let ids: Vec<usize> = (0..active.len()).collect();
    active.extend(passive);
    let set = TrackSet::new(active, 0.12);
    let source = SampleSource::new(&set, ids, 4.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..10_000 {
        let s = source.draw(&mut rng);
        let t = augment(&s, &mut rng);
        let (a, b) = (vectors(&s), vectors(&t));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x.norm() - y.norm()).abs());
            checked += 1;
        }
    }
    report(
        5,
        worst <= 1e-12,
        format!("max norm change {worst:.2e} over {checked} vectors in 10000 samples (tol 1e-12)"),
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_06_sim_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut violations = Vec::new();
    let mut total_steps = 0u64;
    for ep in 0..200 {
        let kind = ScenarioKind::ALL[ep % 3];
        let n = rng.random_range(2..=20);
        let spec = kdnav::sim::generate_scenario(kind, n, rng.random(), &Default::default()).unwrap();
        let episode = EpisodeConfig {
            time_limit: 24.0,
            ..EpisodeConfig::default()
        };
        let mut world = World::from_scenario(&spec, AgentParams::default(), episode).unwrap();
        while !world.is_done() {
            let before: Vec<AgentState> = world.agents.clone();
            // noisy goal seeking so arrivals and collisions both happen
            let actions: Vec<Vec2> = world
                .agents
                .iter()
                .map(|a| {
                    let to_goal = (a.goal - a.position).normalized() * rng.random_range(0.0..2.5);
                    to_goal + Vec2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))
                })
                .collect();
            world.step(&actions);
            total_steps += 1;
            let c = world.census();
            if c.total() != n {
                violations.push(format!("episode {ep}: census {c:?} != {n}"));
            }
            for (b, a) in before.iter().zip(&world.agents) {
                if b.status != AgentStatus::Active && a.status != b.status {
                    violations.push(format!("episode {ep}: agent {} left terminal status", a.id));
                }
                if b.status == AgentStatus::Collided && (a.position != b.position || a.velocity != Vec2::ZERO) {
                    violations.push(format!("episode {ep}: collided agent {} moved", a.id));
                }
                if b.status == AgentStatus::Arrived && a.position != b.position {
                    violations.push(format!("episode {ep}: arrived agent {} moved", a.id));
                }
            }
            for a in &world.agents {
                let arrived_seen = world
                    .present_neighbors(a.id)
                    .any(|o| o.status == AgentStatus::Arrived);
                if arrived_seen {
                    violations.push(format!("episode {ep}: agent {} still sees an arrived agent", a.id));
                }
            }
        }
    }
    report(
        6,
        violations.is_empty(),
        format!(
            "{} violations in 200 episodes / {total_steps} steps{}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    );
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_orca_pairwise_safety() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut collisions = 0;
    for _ in 0..10_000 {
        let a0 = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let a1 = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let b0 = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        let b1 = Vec2::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
        if (a0 - b0).norm() < 0.4 || (a1 - b1).norm() < 0.4 || (a0 - a1).norm() < 0.5 || (b0 - b1).norm() < 0.5 {
            continue;
        }
        let spec = ScenarioSpec::from_positions(ScenarioKind::Circle, 0, Geometry::Circle { radius: 6.0 }, &[a0, b0], &[a1, b1]);
        let episode = EpisodeConfig {
            time_limit: 30.0,
            ..EpisodeConfig::default()
        };
        let world = World::from_scenario(&spec, AgentParams::default(), episode).unwrap();
        let trace = run_episode(world, &mut OrcaController::new(OrcaParams::default()));
        collisions += trace.agents.iter().filter(|a| a.status == AgentStatus::Collided).count();
    }
    let spec = ScenarioSpec::head_on(4.0);
    let world = World::from_scenario(&spec, AgentParams::default(), EpisodeConfig::default()).unwrap();
    let trace = run_episode(world, &mut OrcaController::new(OrcaParams::default()));
    let deadlock = trace.agents.iter().all(|a| a.status == AgentStatus::Active) && trace.duration() >= 120.0 - 1e-9;
    report(
        7,
        collisions == 0 && deadlock,
        format!(
            "{collisions} colliding agents in 10000 encounters; head-on deadlock {} after {:.1} s",
            if deadlock { "held" } else { "broken" },
            trace.duration()
        ),
    );
}

// ---------------------------------------------------------------- 8-12

struct Cells {
    report: BenchmarkReport,
}

fn benchmark() -> &'static Cells {
    static CELLS: OnceLock<Cells> = OnceLock::new();
    CELLS.get_or_init(|| {
        let a = artifacts();
        let methods = vec![
            MethodSpec::new(MethodKind::Orca, None),
            MethodSpec::new(MethodKind::Sl, Some(a.join("experts/expert0.json"))),
            MethodSpec::new(MethodKind::RlNoKd, Some(a.join("rl_no_kd/policy_best.json"))),
            MethodSpec::new(MethodKind::Kd, Some(a.join("kd/policy_best.json"))),
        ];
        let report = run_benchmark(&methods, &BenchmarkConfig::default());
        println!("{}", report.table());
        Cells { report }
    })
}

fn success(method: &str, kind: ScenarioKind, n: usize) -> Option<f64> {
    let c = benchmark().report.cell(method, kind, n)?;
    c.success.map(|s| s.mean)
}

fn all_cells() -> Vec<(ScenarioKind, usize)> {
    [20, 24]
        .into_iter()
        .flat_map(|n| ScenarioKind::ALL.into_iter().map(move |k| (k, n)))
        .collect()
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into())
}

#[test]
fn criterion_08_orca_anchor() {
    let c = success("orca", ScenarioKind::Corridor, 20);
    let s = success("orca", ScenarioKind::Square, 20);
    let ok = c.is_some_and(|x| x >= 0.98) && s.is_some_and(|x| x >= 0.98);
    report(8, ok, format!("ORCA 20-corridor {} 20-square {} (need >= 0.98)", fmt(c), fmt(s)));
}

#[test]
fn criterion_09_expert_weakness() {
    let s = success("sl", ScenarioKind::Circle, 24);
    report(9, s.is_some_and(|x| x <= 0.6), format!("SL 24-circle success {} (need <= 0.6)", fmt(s)));
}

#[test]
fn criterion_10_kd_end_to_end() {
    let circle = success("kd", ScenarioKind::Circle, 20);
    let corridor = success("kd", ScenarioKind::Corridor, 20);
    let extra = benchmark()
        .report
        .cell("kd", ScenarioKind::Corridor, 20)
        .and_then(|c| c.extra_distance)
        .map(|s| s.mean);
    let mut beats_sl = true;
    let mut pairs = Vec::new();
    for (k, n) in all_cells() {
        let (kd, sl) = (success("kd", k, n), success("sl", k, n));
        let ok = matches!((kd, sl), (Some(a), Some(b)) if a > b);
        beats_sl &= ok;
        pairs.push(format!("{n}-{}: {} vs {}", k.name(), fmt(kd), fmt(sl)));
    }
    let ok = circle.is_some_and(|x| x >= 0.95)
        && corridor.is_some_and(|x| x >= 0.95)
        && extra.is_some_and(|x| x <= 0.4)
        && beats_sl;
    report(
        10,
        ok,
        format!(
            "KD 20-circle {} (>= 0.95), 20-corridor {} (>= 0.95) extra distance {} m (<= 0.4); KD vs SL [{}]",
            fmt(circle),
            fmt(corridor),
            fmt(extra),
            pairs.join(", ")
        ),
    );
}

#[test]
fn criterion_11_reward_ablation() {
    let a = artifacts().join("ablation");
    let methods: Vec<MethodSpec> = ["full", "distill_only", "velocity_only"]
        .iter()
        .map(|name| {
            let mut m = MethodSpec::new(MethodKind::Kd, Some(a.join(name).join("policy_best.json")));
            m.label = name.to_string();
            m
        })
        .collect();
    let cfg = BenchmarkConfig {
        kinds: vec![ScenarioKind::Circle],
        agent_counts: vec![24],
        ..BenchmarkConfig::default()
    };
    let r = run_benchmark(&methods, &cfg);
    let s = |m: &str| r.cell(m, ScenarioKind::Circle, 24).and_then(|c| c.success).map(|s| s.mean);
    let (full, de, ve) = (s("full"), s("distill_only"), s("velocity_only"));
    let ok = match (full, de, ve) {
        (Some(f), Some(d), Some(v)) => f >= d && f >= v && d < f,
        _ => false,
    };
    report(
        11,
        ok,
        format!(
            "24-circle success full {} distill-only {} velocity-only {} (need full >= both, distill-only < full)",
            fmt(full),
            fmt(de),
            fmt(ve)
        ),
    );
}

#[test]
fn criterion_12_energy_ordering() {
    let mut ok = true;
    let mut pairs = Vec::new();
    for (k, n) in all_cells() {
        let e = |m: &str| {
            benchmark()
                .report
                .cell(m, k, n)
                .and_then(|c| c.energy_efficiency)
                .map(|s| s.mean)
        };
        let (kd, rl) = (e("kd"), e("rl_no_kd"));
        ok &= matches!((kd, rl), (Some(a), Some(b)) if a >= b);
        pairs.push(format!("{n}-{}: {} vs {}", k.name(), fmt(kd), fmt(rl)));
    }
    report(12, ok, format!("energy efficiency KD vs RL [{}]", pairs.join(", ")));
}
