use hipt_core::approximator::{Activation, NetworkSpec, RecurrentCell};
use hipt_core::env::{bundled_layout, observation_len, ShapingConfig};
use hipt_core::hipt::*;
use hipt_core::math::kl_divergence;
use hipt_core::policy::UniformPolicy;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

fn draw(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<Vec<f64>>, usize) {
    let nz = rng.random_range(1..7);
    let zeros = rng.random_bool(0.5);
    let high = random_distribution(rng, nz, zeros);
    let low: Vec<Vec<f64>> = (0..nz).map(|_| random_distribution(rng, 6, zeros)).collect();
    let z = rng.random_range(0..nz);
    (high, low, z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn influence_is_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (high, low, z) = draw(&mut rng);
        let r = influence_reward(&high, &low, z);
        prop_assert!(r >= -1e-9 && r.is_finite());
        // Independent evaluation where the active prior has mass.
        if high[z] > 0.0 {
            let marginal: Vec<f64> = (0..6).map(|a| (0..high.len()).map(|k| high[k] * low[k][a]).sum()).collect();
            prop_assert!((r - kl_divergence(&low[z], &marginal)).abs() < 1e-9);
        }
    }

    #[test]
    fn marginal_is_a_convex_combination(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (high, low, _) = draw(&mut rng);
        let m = marginal_low_policy(&high, &low);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for a in 0..6 {
            let lo = low.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
            let hi = low.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m[a] >= lo - 1e-12 && m[a] <= hi + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn segment_reward_matches_direct_arithmetic(
        seg in prop::collection::vec((-20.0f64..20.0, 0.0f64..3.0), 1..=40),
        alpha in 0.0f64..2.0,
        kappa in 0.0f64..1000.0,
    ) {
        let env: Vec<f64> = seg.iter().map(|s| s.0).collect();
        let inf: Vec<f64> = seg.iter().map(|s| s.1).collect();
        let mut total = 0.0;
        for k in 0..seg.len() {
            total += alpha * env[k] + kappa * inf[k];
        }
        let oracle = total / seg.len() as f64;
        let r = high_level_reward(&env, &inf, alpha, kappa, seg.len()).unwrap();
        prop_assert!((r - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
    }
}

#[test]
fn reward_spot_values() {
    let low = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    assert!((influence_reward(&[0.5, 0.5], &low, 0) - 2f64.ln()).abs() < 1e-9);
    let same = vec![vec![0.2, 0.8]; 3];
    assert!(influence_reward(&[0.2, 0.3, 0.5], &same, 2).abs() < 1e-9);
    assert!(influence_reward(&[0.0, 1.0], &low, 1).abs() < 1e-9);
    assert_eq!(marginal_low_policy(&[1.0], &[vec![0.3, 0.7]]), vec![0.3, 0.7]);

    let mix = marginal_low_policy(&[0.2, 0.5, 0.3], &[vec![0.1, 0.9], vec![0.6, 0.4], vec![1.0, 0.0]]);
    assert!((mix[0] - (0.02 + 0.3 + 0.3)).abs() < 1e-15);

    assert_eq!(high_level_reward(&[0.0; 3], &[0.0; 3], 1.0, 5.0, 3).unwrap(), 0.0);
    assert!((high_level_reward(&[20.0, 0.0, 4.0], &[1.0, 1.0, 1.0], 1.0, 0.0, 3).unwrap() - 8.0).abs() < 1e-12);
}

#[test]
fn anneal_schedule() {
    let s = InfluenceSchedule { kappa_start: 1000.0, kappa_end: 1.0, alpha: 1.0, anneal_steps: 2_000_000 };
    assert_eq!(anneal(&s, 0), 1000.0);
    assert_eq!(anneal(&s, 1_000_000), 500.5);
    assert_eq!(anneal(&s, 2_000_000), 1.0);
    assert_eq!(s.kappa(9_000_000), 1.0);
}

fn small_agent(num_priors: usize, bounds: HorizonBounds, seed: u64) -> HiptAgent {
    let layout = bundled_layout("cramped_room").unwrap();
    let spec = NetworkSpec {
        input_dim: observation_len(&layout),
        trunk: vec![8],
        activation: Activation::Tanh,
        recurrent: RecurrentCell::Gated { hidden: 4 },
        num_priors,
        num_actions: 6,
    };
    HiptAgent::init(spec, seed, bounds).unwrap()
}

fn settings(horizon: u32, kappa: f64) -> RolloutSettings {
    RolloutSettings { horizon, shaping: ShapingConfig::default(), kappa, alpha: 1.0, high_uses_shaped: true }
}

#[test]
fn rollout_segments_respect_bounds() {
    let layout = bundled_layout("cramped_room").unwrap();
    let agent = small_agent(4, HorizonBounds { p_min: 20, p_max: 40 }, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let ep = rollout_episode(
            &agent,
            &mut UniformPolicy,
            &layout,
            &settings(400, 10.0),
            rng.random_range(0..2),
            &mut rng,
        )
        .unwrap();
        let p = ep.executed_horizons();
        assert_eq!(p.iter().sum::<u32>(), 400);
        assert!((10..=20).contains(&p.len()));
        for &h in &p[..p.len() - 1] {
            assert!((20..=40).contains(&h));
        }
        assert!(*p.last().unwrap() <= 40);
        assert_eq!(ep.low.len(), 400);
        assert_eq!(ep.high.len(), p.len());
        assert!(ep.low.transitions.last().unwrap().done && ep.high.transitions.last().unwrap().done);
        // Every low step of a segment carries that segment's prior.
        let mut t = 0;
        for (h, &len) in ep.high.transitions.iter().zip(p) {
            for s in &ep.low.transitions[t..t + len as usize] {
                assert_eq!(s.prior, Some(h.action));
            }
            t += len as usize;
        }
    }
}

#[test]
fn single_segment_when_bounds_equal_horizon() {
    let layout = bundled_layout("cramped_room").unwrap();
    let agent = small_agent(3, HorizonBounds { p_min: 60, p_max: 60 }, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ep = rollout_episode(&agent, &mut UniformPolicy, &layout, &settings(60, 1.0), 0, &mut rng).unwrap();
    assert_eq!(ep.high.len(), 1);
    assert_eq!(ep.executed_horizons(), &[60]);
}

#[test]
fn segment_reward_uses_the_recorded_streams() {
    let layout = bundled_layout("cramped_room").unwrap();
    let agent = small_agent(4, HorizonBounds { p_min: 5, p_max: 9 }, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ep = rollout_episode(&agent, &mut UniformPolicy, &layout, &settings(100, 37.0), 1, &mut rng).unwrap();
    let mut t = 0;
    for (h, &len) in ep.high.transitions.iter().zip(ep.executed_horizons()) {
        let range = t..t + len as usize;
        let env: Vec<f64> = ep.low.transitions[range.clone()].iter().map(|s| s.reward).collect();
        let expected = high_level_reward(&env, &ep.influence[range], 1.0, 37.0, len as usize).unwrap();
        assert!((h.reward - expected).abs() < 1e-12);
        t += len as usize;
    }
}

#[test]
fn rollout_is_reproducible() {
    let layout = bundled_layout("cramped_room").unwrap();
    let agent = small_agent(4, HorizonBounds::default(), 5);
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rollout_episode(&agent, &mut UniformPolicy, &layout, &settings(200, 100.0), 0, &mut rng).unwrap()
    };
    let (a, b) = (run(9), run(9));
    assert_eq!(a.low, b.low);
    assert_eq!(a.high, b.high);
    assert_eq!(a.influence, b.influence);
}

#[test]
fn one_prior_without_influence_is_flat() {
    let layout = bundled_layout("cramped_room").unwrap();
    let agent = small_agent(1, HorizonBounds::default(), 6);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ep = rollout_episode(&agent, &mut UniformPolicy, &layout, &settings(400, 0.0), 0, &mut rng).unwrap();
    assert!(ep.high.transitions.iter().all(|h| h.action == 0 && h.log_prob == 0.0));
    assert!(ep.influence.iter().all(|&r| r == 0.0));
}

#[test]
fn partner_draws_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let entries = 12;
    let draws = 6000;
    let mut counts = vec![0usize; entries];
    for _ in 0..draws {
        counts[sample_partner(&mut rng, entries)] += 1;
    }
    let p = 1.0 / entries as f64;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - draws as f64 * p).abs() <= 3.0 * sd, "{c}");
    }
}

#[test]
fn policy_wrapper_switches_priors_on_schedule() {
    let layout = bundled_layout("cramped_room").unwrap();
    let agent = small_agent(4, HorizonBounds { p_min: 3, p_max: 5 }, 2);
    let mut policy = agent.policy();
    let ep = hipt_core::env::run_episode(&mut policy, &mut UniformPolicy, &layout, 50, &ShapingConfig::disabled(), 3)
        .unwrap();
    assert_eq!(ep.seats[0].len(), 50);
    let total: u32 = policy.decisions.iter().map(|d| d.1).sum();
    assert!((50..55).contains(&total));
    assert!(policy.decisions.iter().all(|&(z, p)| z < 4 && (3..=5).contains(&p)));
}

#[test]
fn checkpoint_round_trip() {
    let agent = small_agent(5, HorizonBounds { p_min: 20, p_max: 40 }, 8);
    let sidecar = HiptSidecar {
        num_priors: 5,
        p_min: 20,
        p_max: 40,
        influence: InfluenceSchedule::default(),
        kappa: 750.25,
        env_steps: 123_456,
        updates: 77,
    };
    let dir = tempfile::tempdir().unwrap();
    save_hipt_checkpoint(dir.path(), "ckpt", &agent, &sidecar).unwrap();
    let (back, side) = load_hipt_checkpoint(dir.path(), "ckpt").unwrap();
    assert_eq!(back.params, agent.params);
    assert_eq!(back.spec(), agent.spec());
    assert_eq!(side, sidecar);
}

#[test]
fn layout_defaults() {
    assert_eq!(default_num_priors("cramped_room"), 4);
    assert_eq!(default_num_priors("asymmetric_advantages"), 4);
    assert_eq!(default_num_priors("coordination_ring"), 4);
    assert_eq!(default_num_priors("forced_coordination"), 5);
    assert_eq!(default_num_priors("counter_circuit"), 6);
    let c = HiptConfig::for_layout("counter_circuit", 1000);
    assert_eq!((c.num_priors, c.influence.anneal_steps), (6, 1000));
    assert!(HiptConfig { bounds: HorizonBounds { p_min: 50, p_max: 40 }, ..HiptConfig::default() }.validate().is_err());
}

#[test]
fn layout_learning_rates() {
    assert_eq!(layout_learning_rate("cramped_room"), (1e-3, 3.0));
    assert_eq!(layout_learning_rate("asymmetric_advantages"), (1e-3, 3.0));
    assert_eq!(layout_learning_rate("coordination_ring"), (6e-4, 1.5));
    assert_eq!(layout_learning_rate("forced_coordination"), (8e-4, 2.0));
    assert_eq!(layout_learning_rate("counter_circuit"), (8e-4, 3.0));
    let c = HiptConfig::for_layout("coordination_ring", 10);
    assert_eq!((c.learning_rate, c.lr_decay), (6e-4, 1.5));
}
