use aggoc_core::aggregative::{evaluate_social, gradient, AggregateVector, SocialCost};
use aggoc_core::dp;
use aggoc_core::rng::CounterRng;
use aggoc_core::synthetic::{self, Shape};
use aggoc_core::MultiplierVector;
use proptest::prelude::*;

fn social() -> impl Strategy<Value = SocialCost> {
    prop_oneof![
        (0.0..3.0f64, -4.0..4.0f64).prop_map(|(alpha, target)| SocialCost::Quadratic { alpha, target }),
        (-3.0..3.0f64).prop_map(|weight| SocialCost::Linear { weight }),
        Just(SocialCost::Zero),
    ]
}

proptest! {
    #[test]
    fn social_cost_is_convex(costs in prop::collection::vec(social(), 1..6), seed in any::<u64>(), w in 0.0..1.0f64) {
        let mut rng = CounterRng::new(seed, 0);
        let a = AggregateVector((0..costs.len()).map(|_| rng.uniform(-5.0, 5.0)).collect());
        let b = AggregateVector((0..costs.len()).map(|_| rng.uniform(-5.0, 5.0)).collect());
        let fa = evaluate_social(&costs, &a).unwrap();
        let fb = evaluate_social(&costs, &b).unwrap();
        let fm = evaluate_social(&costs, &a.lerp(&b, w)).unwrap();
        prop_assert!(fm <= (1.0 - w) * fa + w * fb + 1e-9);
        // First-order condition.
        let g = gradient(&costs, &a).unwrap();
        let lin: f64 = g.0.iter().zip(b.0.iter().zip(&a.0)).map(|(g, (b, a))| g * (b - a)).sum();
        prop_assert!(fb >= fa + lin - 1e-9);
    }

    #[test]
    fn best_response_beats_every_trajectory(seed in 0u64..5000) {
        let inst = synthetic::random_instance(seed, &Shape { agents: (1, 1), ..Shape::default() });
        let agent = &inst.agents[0];
        let mut rng = CounterRng::new(seed, 1);
        let prices = MultiplierVector((0..inst.horizon + 2).map(|_| rng.uniform(-5.0, 5.0)).collect());
        let (best, value) = dp::best_response(agent, &prices).unwrap();
        prop_assert!(inst.is_feasible(0, &best).unwrap());
        for x in agent.trajectories() {
            let cost: f64 = (0..=inst.horizon)
                .map(|t| dp::priced_cost(agent, &prices, t, x.states[t], x.controls[t]).unwrap())
                .sum();
            prop_assert!(value <= cost + 1e-9);
        }
    }
}
