//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! ```text
//! cargo test --release -p hipt-core --test acceptance            # everything
//! cargo test --release -p hipt-core --test acceptance -- jsd gae # name filters
//! ```

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hipt_core::approximator::{
    Activation, Gradient, HeadCotangents, LrSchedule, Network, NetworkSpec, ParamStore, RecurrentCell, RecurrentState,
};
use hipt_core::env::*;
use hipt_core::eval::{record_episodes, self_play_return, split_by_episode, train_bc, BcConfig, EvalError};
use hipt_core::hipt::{
    anneal, evaluate_vs_full_tier, high_level_reward, influence_reward, rollout_episode, sample_partner, train_hipt,
    HiptAgent, HiptConfig, HorizonBounds, InfluenceSchedule, RolloutSettings,
};
use hipt_core::math::kl_divergence;
use hipt_core::policy::{NetworkPolicy, NoisyPolicy, UniformPolicy};
use hipt_core::population::{
    classify_play_styles, crossplay_matrix, jsd_state, train_population, CrossplayMatrix, PartnerPopulation,
    PopulationConfig, SelfPlayTrainer, Tier,
};
use hipt_core::rl_core::{compute_gae, ppo_clip_loss, train_bandit};
use hipt_core::scripted::ScriptedCook;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, width: usize, zeros: bool) -> Vec<f64> {
    let mut w: Vec<f64> =
        (0..width).map(|_| if zeros && rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
    if w.iter().sum::<f64>() == 0.0 {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

// ---------------------------------------------------------------- gradients

const FD_STEP: f64 = 1e-5;

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(n));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

fn gradient_error(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> f64 {
    let net = Network::new(spec.clone()).unwrap();
    let uniform = |rng: &mut ChaCha8Rng, n: usize, s: f64| (0..n).map(|_| rng.random_range(-s..s)).collect::<Vec<_>>();
    let params = ParamStore::new(uniform(rng, net.param_count(), 0.8));
    let x = uniform(rng, spec.input_dim, 1.0);
    let h = RecurrentState::from_vec(uniform(rng, spec.hidden_dim(), 0.9));
    let z = rng.random_range(0..spec.num_priors);
    let w_high = uniform(rng, spec.num_priors, 1.0);
    let w_low = uniform(rng, spec.num_actions, 1.0);
    let w_hidden = uniform(rng, spec.hidden_dim(), 1.0);
    let (wv_high, wv_low) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let loss = |p: &ParamStore, h: &RecurrentState| {
        let (out, nh, _) = net.forward(p, &x, h, Some(z)).unwrap();
        dot(&w_high, &out.high_logits)
            + dot(&w_low, out.low_logits.as_ref().unwrap())
            + wv_high * out.value_high
            + wv_low * out.value_low
            + dot(&w_hidden, nh.as_slice())
    };
    let (_, _, cache) = net.forward(&params, &x, &h, Some(z)).unwrap();
    let cot = HeadCotangents {
        high_logits: Some(w_high.clone()),
        low_logits: Some(w_low.clone()),
        value_high: wv_high,
        value_low: wv_low,
        hidden_out: (spec.hidden_dim() > 0).then(|| w_hidden.clone()),
    };
    let mut grad = Gradient::zeros(params.len());
    let d_hidden = net.backward(&params, &cache, &cot, &mut grad).unwrap();
    let numeric: Vec<f64> = (0..params.len())
        .map(|i| {
            let mut plus = params.clone();
            plus.as_mut_slice()[i] += FD_STEP;
            let mut minus = params.clone();
            minus.as_mut_slice()[i] -= FD_STEP;
            (loss(&plus, &h) - loss(&minus, &h)) / (2.0 * FD_STEP)
        })
        .collect();
    let numeric_h: Vec<f64> = (0..spec.hidden_dim())
        .map(|i| {
            let mut hp = h.as_slice().to_vec();
            hp[i] += FD_STEP;
            let mut hm = h.as_slice().to_vec();
            hm[i] -= FD_STEP;
            (loss(&params, &RecurrentState::from_vec(hp)) - loss(&params, &RecurrentState::from_vec(hm)))
                / (2.0 * FD_STEP)
        })
        .collect();
    rel_err(grad.as_slice(), &numeric).max(rel_err(&d_hidden, &numeric_h))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut gated = 0;
    for i in 0..10 {
        let depth = rng.random_range(0..3);
        let spec = NetworkSpec {
            input_dim: rng.random_range(1..9),
            trunk: (0..depth).map(|_| rng.random_range(1..8)).collect(),
            activation: if i % 3 == 2 { Activation::Relu } else { Activation::Tanh },
            recurrent: if i % 2 == 0 {
                gated += 1;
                RecurrentCell::Gated { hidden: rng.random_range(1..6) }
            } else {
                RecurrentCell::None
            },
            num_priors: rng.random_range(1..5),
            num_actions: 6,
        };
        let err = gradient_error(&spec, &mut rng);
        ensure(err <= 1e-4, || format!("spec {spec:?}: relative error {err:.2e}"))?;
        worst = worst.max(err);
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(60), || format!("took {t:?}"))?;
    Ok(format!("10 specs ({gated} gated), worst relative error {worst:.2e}, {:.1}s", t.as_secs_f64()))
}

// ---------------------------------------------------------------- rewards

fn influence_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut min: f64 = f64::INFINITY;
    for _ in 0..10_000 {
        let nz = rng.random_range(1..7);
        let zeros = rng.random_bool(0.5);
        let high = random_distribution(&mut rng, nz, zeros);
        let low: Vec<Vec<f64>> = (0..nz).map(|_| random_distribution(&mut rng, 6, zeros)).collect();
        let z = rng.random_range(0..nz);
        let r = influence_reward(&high, &low, z);
        ensure(r >= -1e-9 && r.is_finite(), || format!("influence {r} for {high:?} {low:?}"))?;
        if high[z] > 0.0 {
            let marginal: Vec<f64> = (0..6).map(|a| (0..nz).map(|k| high[k] * low[k][a]).sum()).collect();
            let oracle = kl_divergence(&low[z], &marginal);
            ensure((r - oracle).abs() <= 1e-9, || format!("influence {r} vs KL oracle {oracle}"))?;
        }
        min = min.min(r);

        // z-independent low policies.
        let shared = random_distribution(&mut rng, 6, zeros);
        let same = vec![shared; nz];
        let r0 = influence_reward(&high, &same, z);
        ensure(r0.abs() <= 1e-9, || format!("z-independent low policies gave {r0}"))?;
        // Point-mass high policy on z.
        let mut point = vec![0.0; nz];
        point[z] = 1.0;
        let r1 = influence_reward(&point, &low, z);
        ensure(r1.abs() <= 1e-9, || format!("point-mass high policy gave {r1}"))?;
    }
    let ln2 = influence_reward(&[0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0);
    ensure((ln2 - 2f64.ln()).abs() <= 1e-9, || format!("disjoint pair gave {ln2}"))?;
    Ok(format!("10^4 draws, min {min:.3e}; zero cases and ln 2 case exact"))
}

fn segment_reward_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=40);
        let env: Vec<f64> =
            (0..p).map(|_| if rng.random_bool(0.1) { 20.0 } else { rng.random_range(0.0..3.0) }).collect();
        let inf: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..2.0)).collect();
        let alpha = rng.random_range(0.0..2.0);
        let kappa = rng.random_range(1.0..1000.0);
        let mut total = 0.0;
        for k in 0..p {
            total += alpha * env[k] + kappa * inf[k];
        }
        let oracle = total / p as f64;
        let r = high_level_reward(&env, &inf, alpha, kappa, p).map_err(|e| e.to_string())?;
        let err = (r - oracle).abs() / oracle.abs().max(1.0);
        ensure(err <= 1e-12, || format!("segment reward {r} vs oracle {oracle}"))?;
        worst = worst.max(err);
    }
    let s = InfluenceSchedule { kappa_start: 1000.0, kappa_end: 1.0, alpha: 1.0, anneal_steps: 5_000_000 };
    let (k0, k1) = (anneal(&s, 0), anneal(&s, s.anneal_steps));
    ensure(k0 == 1000.0 && k1 == 1.0, || format!("anneal endpoints {k0} -> {k1}"))?;
    Ok(format!("10^3 segments, worst relative error {worst:.1e}; anneal 1000 -> 1 exact"))
}

fn jsd_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(2..7);
        let width = rng.random_range(2..7);
        let members: Vec<Vec<f64>> = (0..n).map(|_| random_distribution(&mut rng, width, true)).collect();
        let v = jsd_state(&members).map_err(|e| e.to_string())?;
        let bound = (n as f64).ln().min((width as f64).ln());
        ensure(v >= 0.0 && v <= bound + 1e-12, || format!("jsd {v} outside [0, {bound}]"))?;
        let h = |p: &[f64]| -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
        let mix: Vec<f64> = (0..width).map(|a| members.iter().map(|m| m[a]).sum::<f64>() / n as f64).collect();
        let oracle = h(&mix) - members.iter().map(|m| h(m)).sum::<f64>() / n as f64;
        ensure((v - oracle).abs() <= 1e-9, || format!("jsd {v} vs oracle {oracle}"))?;
        worst = worst.max((v - oracle).abs());
        let same = vec![members[0].clone(); n];
        let z = jsd_state(&same).map_err(|e| e.to_string())?;
        ensure(z.abs() <= 1e-12, || format!("identical members gave {z}"))?;
    }
    let ln2 = jsd_state(&[vec![1.0, 0.0], vec![0.0, 1.0]]).map_err(|e| e.to_string())?;
    ensure((ln2 - 2f64.ln()).abs() <= 1e-12, || format!("disjoint pair gave {ln2}"))?;
    Ok(format!("10^4 draws, worst oracle gap {worst:.1e}; identical 0, disjoint ln 2"))
}

// ---------------------------------------------------------------- PPO pieces

fn gae_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=10);
        let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-20.0..20.0)).collect();
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let gamma = rng.random_range(0.0..=1.0);
        let mut dones = vec![false; len];
        dones[len - 1] = true;
        let (adv, _) = compute_gae(&rewards, &values, &dones, 99.0, gamma, 1.0);
        for t in 0..len {
            let g: f64 = rewards[t..].iter().enumerate().map(|(k, r)| gamma.powi(k as i32) * r).sum();
            let err = (adv[t] - (g - values[t])).abs();
            ensure(err <= 1e-10, || format!("t={t}: gae {} vs {}", adv[t], g - values[t]))?;
            worst = worst.max(err);
        }
    }
    Ok(format!("10^3 episodes of length <= 10, worst gap {worst:.1e}"))
}

fn clip_spot_values() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let lp: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..0.0)).collect();
    let adv: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
    let s = ppo_clip_loss(&lp, &lp, &adv, 0.2).map_err(|e| e.to_string())?;
    let mean = adv.iter().sum::<f64>() / adv.len() as f64;
    ensure((s.value - mean).abs() <= 1e-12, || format!("ratio 1 gave {} vs mean advantage {mean}", s.value))?;
    let c = ppo_clip_loss(&[1.5f64.ln()], &[0.0], &[1.0], 0.05).map_err(|e| e.to_string())?;
    ensure((c.value - 1.05).abs() <= 1e-12, || format!("clip case gave {}", c.value))?;
    Ok(format!("ratio-1 identity and clipped 1.5 -> {:.12}", c.value))
}

// ---------------------------------------------------------------- rollout structure

fn rollout_structure() -> Outcome {
    let layout = bundled_layout("cramped_room").unwrap();
    let spec = NetworkSpec {
        input_dim: observation_len(&layout),
        trunk: vec![8],
        activation: Activation::Tanh,
        recurrent: RecurrentCell::Gated { hidden: 4 },
        num_priors: 4,
        num_actions: NUM_ACTIONS,
    };
    let agent = HiptAgent::init(spec, 1, HorizonBounds { p_min: 20, p_max: 40 }).map_err(|e| e.to_string())?;
    let settings = RolloutSettings {
        horizon: 400,
        shaping: ShapingConfig::default(),
        kappa: 10.0,
        alpha: 1.0,
        high_uses_shaped: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (mut shortest, mut longest) = (usize::MAX, 0);
    for i in 0..1000 {
        let ep = rollout_episode(&agent, &mut UniformPolicy, &layout, &settings, i % 2, &mut rng)
            .map_err(|e| e.to_string())?;
        let p = ep.executed_horizons();
        ensure(p.iter().sum::<u32>() == 400, || format!("episode {i}: horizons sum to {}", p.iter().sum::<u32>()))?;
        ensure((10..=20).contains(&p.len()), || format!("episode {i}: {} segments", p.len()))?;
        ensure(p[..p.len() - 1].iter().all(|h| (20..=40).contains(h)), || format!("episode {i}: horizons {p:?}"))?;
        ensure(*p.last().unwrap() <= 40, || format!("episode {i}: final segment {}", p.last().unwrap()))?;
        shortest = shortest.min(p.len());
        longest = longest.max(p.len());
    }

    // Partner entries: N = 4 members times 3 tiers.
    let entries = 12;
    let draws = 12_000;
    let mut counts = vec![0u32; entries];
    for _ in 0..draws {
        counts[sample_partner(&mut rng, entries)] += 1;
    }
    let p = 1.0 / entries as f64;
    let (mean, std) = (draws as f64 * p, (draws as f64 * p * (1.0 - p)).sqrt());
    for (k, &c) in counts.iter().enumerate() {
        ensure((c as f64 - mean).abs() <= 3.0 * std, || format!("entry {k} drawn {c} times, expected {mean:.0}"))?;
    }
    Ok(format!(
        "10^3 rollouts, {shortest}..{longest} segments, horizons sum to 400; partner counts {}..{} of {mean:.0} +- {std:.1}",
        counts.iter().min().unwrap(),
        counts.iter().max().unwrap()
    ))
}

// ---------------------------------------------------------------- environment

fn inventory(s: &WorldState) -> [i64; 3] {
    let mut inv = [0i64; 3];
    let items = s.players.iter().map(|p| p.held).chain(s.counters.iter().copied());
    for item in items.flatten() {
        match item {
            Item::Onion => inv[0] += 1,
            Item::Dish => inv[1] += 1,
            Item::Soup => inv[2] += 1,
        }
    }
    inv[0] += s.pots.iter().map(|p| p.onions as i64).sum::<i64>();
    inv
}

fn env_suite() -> Outcome {
    let layouts = bundled_layouts();
    for layout in &layouts {
        let shaping = ShapingConfig::default();
        let a =
            run_episode(&mut UniformPolicy, &mut ScriptedCook, layout, 400, &shaping, 9).map_err(|e| e.to_string())?;
        let b =
            run_episode(&mut UniformPolicy, &mut ScriptedCook, layout, 400, &shaping, 9).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{}: episode not reproducible", layout.name))?;
        let r = replay(&a.log, layout, 400).map_err(|e| format!("{}: {e}", layout.name))?;
        ensure(r.score == a.episode_return, || format!("{}: replay score differs", layout.name))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut total_deliveries = 0u32;
    for e in 0..1000 {
        let layout = &layouts[e % layouts.len()];
        let mut state = reset(layout);
        let mut deliveries = 0u32;
        for _ in 0..DEFAULT_HORIZON {
            let joint = [Action::ALL[rng.random_range(0..6)], Action::ALL[rng.random_range(0..6)]];
            let before = inventory(&state);
            let out =
                step(&state, joint, layout, &ShapingConfig::default(), DEFAULT_HORIZON).map_err(|e| e.to_string())?;
            let count = |f: fn(&Event) -> bool| out.events.iter().filter(|e| f(e)).count() as i64;
            let onions = count(|e| matches!(e, Event::OnionPickup { .. }));
            let dishes = count(|e| matches!(e, Event::DishPickup { .. }));
            let soups = count(|e| matches!(e, Event::SoupPickup { .. }));
            let delivered = count(|e| matches!(e, Event::SoupDelivered { .. }));
            let after = inventory(&out.next_state);
            let expected = [onions - 3 * soups, dishes - soups, soups - delivered];
            let delta = [after[0] - before[0], after[1] - before[1], after[2] - before[2]];
            ensure(delta == expected, || {
                format!("{}: inventory change {delta:?}, events say {expected:?}", layout.name)
            })?;
            ensure(out.sparse_reward as i64 == DELIVERY_REWARD as i64 * delivered, || "sparse reward".into())?;
            let s = &out.next_state;
            ensure(s.players[0].position != s.players[1].position, || "players overlap".into())?;
            ensure(s.players.iter().all(|p| layout.is_walkable(p.position)), || "player off the floor".into())?;
            ensure(s.pots.iter().all(|p| p.onions <= 3 && p.cook_timer <= layout.cook_time), || "pot overflow".into())?;
            ensure(s.counters.iter().all(|c| *c != Some(Item::Soup)), || "soup on a counter".into())?;
            deliveries += delivered as u32;
            state = out.next_state;
        }
        ensure(state.score == DELIVERY_REWARD * deliveries, || {
            format!("score {} for {deliveries} deliveries", state.score)
        })?;
        total_deliveries += deliveries;
    }

    let cramped = bundled_layout("cramped_room").unwrap();
    let ep = run_episode(&mut ScriptedCook, &mut ScriptedCook, &cramped, 400, &ShapingConfig::disabled(), 0)
        .map_err(|e| e.to_string())?;
    ensure(ep.episode_return >= 20, || format!("scripted pair scored {}", ep.episode_return))?;
    Ok(format!(
        "replay digests match on {} layouts; 10^3 random episodes ({total_deliveries} deliveries) keep every invariant; scripted pair scores {}",
        layouts.len(),
        ep.episode_return
    ))
}

// ---------------------------------------------------------------- learning smoke

fn smoke_bandit() -> Outcome {
    let report = train_bandit(0, 200, 0.95).map_err(|e| e.to_string())?;
    let at = report.reached_at.ok_or_else(|| format!("final p = {:.3}", report.trace.last().unwrap_or(&0.0)))?;
    Ok(format!("rewarded arm >= 0.95 after {at} updates"))
}

/// Self-play on the population's per-member budget and stall rule. Every
/// env step of every attempt counts against the 2e6 cap.
fn smoke_self_play() -> Outcome {
    const CAP: u64 = 2_000_000;
    let layout = bundled_layout("cramped_room").unwrap();
    let config = PopulationConfig { env_steps_per_member: POP_STEPS, ..PopulationConfig::default() };
    let rule = config.stall.expect("default stall rule");
    let spec = config.network_spec(&layout);
    let updates = config.updates_per_member();
    let base = config.self_play_shaping(&layout);
    let start = Instant::now();
    let mut total = 0;
    for attempt in 0.. {
        let schedule =
            LrSchedule { start: config.learning_rate, decay: config.lr_decay, total_updates: config.optimizer_steps() };
        let seed = config.member_seed(0, attempt);
        let mut trainer =
            SelfPlayTrainer::new(spec.clone(), seed, schedule, config.ppo.clone()).map_err(|e| e.to_string())?;
        for u in 0..updates {
            let progress = u as f64 / updates as f64;
            let shaping = base.with_scale(shaping_factor(progress, config.shaping_anneal_fraction));
            let data = trainer
                .collect(&layout, config.horizon, &shaping, config.episodes_per_update)
                .map_err(|e| e.to_string())?;
            total += data.env_steps;
            if total > CAP {
                return Err(format!("J_SP stayed below 20 for {CAP} env steps over {} attempts", attempt + 1));
            }
            trainer.update(&data, &[], 0.0, progress).map_err(|e| e.to_string())?;
            if (u + 1) % 10 == 0 {
                let policy =
                    NetworkPolicy::from_spec(spec.clone(), trainer.params.clone()).map_err(|e| e.to_string())?;
                let j = self_play_return(&policy, &layout, config.horizon, 5, u).map_err(|e| e.to_string())?.mean();
                if j >= 20.0 {
                    let t = start.elapsed();
                    ensure(t < Duration::from_secs(1800), || format!("took {t:?}"))?;
                    return Ok(format!(
                        "J_SP {j:.1} after {total} env steps ({} restarts), {:.0}s",
                        attempt,
                        t.as_secs_f64()
                    ));
                }
            }
            if (u + 1) as f64 >= rule.at_fraction * updates as f64 {
                break;
            }
        }
    }
    unreachable!()
}

struct Populations {
    train: PartnerPopulation,
    heldout: PartnerPopulation,
    seconds: f64,
}

const POP_STEPS: u64 = 300_000;

fn populations() -> Result<Populations, String> {
    let layout = bundled_layout("cramped_room").unwrap();
    let start = Instant::now();
    let mut pops = Vec::new();
    for seed in [0, HELDOUT_SEED] {
        let config = PopulationConfig { size: 4, env_steps_per_member: POP_STEPS, seed, ..PopulationConfig::default() };
        pops.push(train_population(&layout, &config, None).map_err(|e| e.to_string())?.population);
    }
    let heldout = pops.pop().unwrap();
    let train = pops.pop().unwrap();
    Ok(Populations { train, heldout, seconds: start.elapsed().as_secs_f64() })
}

const HELDOUT_SEED: u64 = 7;
const HIPT_STEPS: u64 = 800_000;

fn smoke_hipt(pops: &Populations) -> Outcome {
    let layout = bundled_layout("cramped_room").unwrap();
    let config = HiptConfig {
        num_priors: 4,
        trunk: vec![64, 64],
        recurrent: RecurrentCell::None,
        ..HiptConfig::for_layout("cramped_room", HIPT_STEPS)
    };
    let start = Instant::now();
    let run = train_hipt(&pops.train, &layout, &config, None, None).map_err(|e| e.to_string())?;
    ensure(run.env_steps <= 5_000_000, || format!("{} env steps", run.env_steps))?;
    let held =
        evaluate_vs_full_tier(&run.agent, &pops.heldout, &layout, config.horizon, 5, 99).map_err(|e| e.to_string())?;
    ensure(held >= 40.0, || format!("held-out full-tier mean {held:.1} after {} env steps", run.env_steps))?;

    // Training partners were drawn uniformly from the 3N entries.
    let n: u64 = run.partner_counts.iter().sum();
    let p = 1.0 / run.partner_counts.len() as f64;
    let (mean, std) = (n as f64 * p, (n as f64 * p * (1.0 - p)).sqrt());
    for (k, &c) in run.partner_counts.iter().enumerate() {
        ensure((c as f64 - mean).abs() <= 3.0 * std, || format!("entry {k} drawn {c} times of {n}"))?;
    }
    Ok(format!(
        "|Z|=4 vs held-out N=4 full tier: mean return {held:.1} after {} env steps ({:.0}s); populations took {:.0}s",
        run.env_steps,
        start.elapsed().as_secs_f64(),
        pops.seconds
    ))
}

// ---------------------------------------------------------------- population protocol

fn population_protocol(pops: &Populations) -> Outcome {
    let layout = bundled_layout("cramped_room").unwrap();
    for (name, pop) in [("training", &pops.train), ("held-out", &pops.heldout)] {
        for (i, m) in pop.members.iter().enumerate() {
            let ratio = m.j_sp_mid / m.j_sp_full;
            ensure(m.mid_in_band && (0.35..=0.65).contains(&ratio), || {
                format!("{name} member {i}: mid {:.1} of full {:.1}", m.j_sp_mid, m.j_sp_full)
            })?;
        }
    }

    let pop = &pops.train;
    let agents: Vec<_> = (0..pop.len()).map(|i| (format!("m{i}"), pop.policy(i, Tier::Full))).collect();
    let episodes = 10;
    let matrix = crossplay_matrix(&agents, &layout, DEFAULT_HORIZON, episodes, false, 31).map_err(|e| e.to_string())?;
    let mut gaps = Vec::new();
    for (i, (_, policy)) in agents.iter().enumerate() {
        let again =
            self_play_return(policy, &layout, DEFAULT_HORIZON, episodes, 1000 + i as u64).map_err(|e| e.to_string())?;
        let (d, s) = (matrix.mean[i][i], matrix.std[i][i]);
        let pooled = ((s * s + again.std() * again.std()) / 2.0).sqrt();
        let gap = (d - again.mean()).abs();
        ensure(gap <= 2.0 * pooled, || {
            format!("member {i}: diagonal {d:.1} vs re-measured {:.1} (std {pooled:.1})", again.mean())
        })?;
        gaps.push(format!("{d:.0}/{:.0}", again.mean()));
    }

    let block = vec![
        vec![200.0, 20.0, 195.0, 10.0],
        vec![20.0, 180.0, 15.0, 176.0],
        vec![195.0, 15.0, 205.0, 12.0],
        vec![10.0, 176.0, 12.0, 182.0],
    ];
    let fixture = CrossplayMatrix {
        labels: (0..4).map(|i| format!("a{i}")).collect(),
        std: vec![vec![0.0; 4]; 4],
        mean: block,
        episodes: 5,
    };
    let classes = classify_play_styles(&fixture, 0.1).map_err(|e| e.to_string())?.classes;
    ensure(classes == vec![vec![0, 2], vec![1, 3]], || format!("block fixture split into {classes:?}"))?;
    Ok(format!(
        "all 8 mid checkpoints in band; diagonal vs re-measured J_SP {}; block fixture recovered",
        gaps.join(" ")
    ))
}

// ---------------------------------------------------------------- behavior cloning

fn bc_pipeline() -> Outcome {
    let layout = bundled_layout("cramped_room").unwrap();
    let mut partner = NoisyPolicy { inner: ScriptedCook, epsilon: 0.2 };
    let records = record_episodes(&mut ScriptedCook, &mut partner, &layout, 400, 24, 0).map_err(|e| e.to_string())?;
    let (train, heldout) = split_by_episode(&records, 0.25, 1);
    let config = BcConfig { seats: vec![0], ..BcConfig::default() };
    let model = train_bc(&train, &heldout, &layout, &config).map_err(|e| e.to_string())?;
    ensure(model.heldout_accuracy >= 0.99, || format!("held-out accuracy {:.4}", model.heldout_accuracy))?;

    let overlap = [heldout.clone(), train[..400].to_vec()].concat();
    match train_bc(&train, &overlap, &layout, &config) {
        Err(EvalError::EpisodeOverlap(ids)) if ids.len() == 1 => {}
        other => return Err(format!("overlapping split not rejected: {:?}", other.map(|m| m.heldout_accuracy))),
    }
    Ok(format!(
        "held-out accuracy {:.4} on {} episodes; overlapping split rejected",
        model.heldout_accuracy,
        model.heldout_episodes.len()
    ))
}

// ---------------------------------------------------------------- driver

struct Runner {
    filters: Vec<String>,
    failed: usize,
    ran: usize,
}

impl Runner {
    fn wants(&self, name: &str) -> bool {
        self.filters.is_empty() || self.filters.iter().any(|f| name.contains(f.as_str()))
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        if !self.wants(name) {
            return;
        }
        self.ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} [{secs:.1}s]: {detail}"),
            Err(why) => {
                self.failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {why}");
            }
        }
    }
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut r = Runner { filters, failed: 0, ran: 0 };
    r.run("gradient-check", gradient_check);
    r.run("influence-reward", influence_suite);
    r.run("segment-reward", segment_reward_suite);
    r.run("jsd", jsd_suite);
    r.run("gae-oracle", gae_oracle);
    r.run("clip-spot-values", clip_spot_values);
    r.run("rollout-structure", rollout_structure);
    r.run("env", env_suite);
    r.run("smoke-bandit", smoke_bandit);
    r.run("smoke-self-play", smoke_self_play);
    if r.wants("smoke-hipt") || r.wants("population-protocol") {
        match populations() {
            Ok(pops) => {
                r.run("smoke-hipt", || smoke_hipt(&pops));
                r.run("population-protocol", || population_protocol(&pops));
            }
            Err(e) => {
                r.run("smoke-hipt", || Err(format!("population training failed: {e}")));
                r.run("population-protocol", || Err(format!("population training failed: {e}")));
            }
        }
    }
    r.run("bc-pipeline", bc_pipeline);
    println!("{} of {} criteria passed", r.ran - r.failed, r.ran);
    if r.failed > 0 {
        std::process::exit(1);
    }
}
