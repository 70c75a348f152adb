use fr3coex_core::ppo::policy::sigmoid;
use fr3coex_core::ppo::toy::Corridor;
use fr3coex_core::ppo::{train, Environment, Hyperparams};

fn optimal_action_probability(seed: u64) -> (f64, usize) {
    let hp = Hyperparams {
        seed,
        updates: 200,
        ..Hyperparams::default()
    };
    let env = Corridor::default();
    let (best, seq) = env.optimum();
    assert_eq!(best, env.reward_normalizer());
    assert!(seq.iter().all(|&a| a));
    let out = train(|_| Ok(Corridor::default()), &hp, &mut |_, _| Ok(())).unwrap();
    let p = [0usize, 1]
        .iter()
        .map(|&s| {
            let (d, _) = out.params.forward(&Corridor::observe(s)).unwrap();
            sigmoid(d.logits[0])
        })
        .fold(1.0, f64::min);
    (p, out.curve.len())
}

#[test]
fn corridor_converges_for_three_seeds() {
    for seed in 0..3 {
        let (p, n) = optimal_action_probability(seed);
        println!("seed {seed}: p(optimal) = {p:.4} after {n} updates");
        assert!(p > 0.95, "seed {seed}: {p}");
    }
}
