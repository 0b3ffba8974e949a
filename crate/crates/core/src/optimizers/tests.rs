use super::*;
use crate::numerics::Rng;
use crate::schedules::DecayFamily;

fn fixed(eta: f64) -> LrSchedule {
    LrSchedule::fixed(eta).unwrap()
}

fn opt(rule: Rule, eta: f64) -> Optimizer {
    Optimizer::new(OptimizerConfig::new(rule, fixed(eta))).unwrap()
}

fn scalar(x: f64) -> Tensor {
    Tensor::vector(vec![x])
}

fn all_rules() -> Vec<Rule> {
    vec![
        Rule::adamnx(),
        Rule::GeneralizedAdam(DecaySchedule::adam_classic()),
        Rule::GeneralizedAdam(DecaySchedule::adax()),
        Rule::GeneralizedAdam(DecaySchedule::adafactor()),
        Rule::adam_classic(),
        Rule::adamw(),
        Rule::Sgd,
        Rule::momentum_sgd(),
        Rule::radam(),
        Rule::lion(),
    ]
}

#[test]
fn adamnx_first_step_by_hand() {
    let mut o = opt(Rule::adamnx(), 0.1);
    let mut p = vec![scalar(1.0)];
    let info = o.step(&mut p, &[scalar(4.0)]).unwrap();
    assert_eq!(info.t, 1);
    assert_eq!(info.beta2_hat, Some(0.0));
    let slot = &o.state().slots[0];
    assert_eq!(slot.m.data()[0], 4.0);
    assert_eq!(slot.v.data()[0], 16.0);
    let expected = 1.0 - 0.1 * (4.0 / (4.0 + 1e-8));
    assert_eq!(p[0].data()[0], expected);
    assert!((p[0].data()[0] - 0.9).abs() < 1e-9);
}

#[test]
fn classic_first_step_by_hand() {
    let mut o = opt(Rule::adam_classic(), 0.1);
    let mut p = vec![scalar(1.0)];
    o.step(&mut p, &[scalar(4.0)]).unwrap();
    let expected = 1.0 - 0.1 * (4.0 / (4.0 + 1e-8));
    assert!((p[0].data()[0] - expected).abs() < 1e-15);
}

#[test]
fn matrix_decay_only_path() {
    let cfg = OptimizerConfig::new(Rule::adamnx(), fixed(0.1)).with_weight_decay(0.1);
    let mut o = Optimizer::new(cfg).unwrap();
    let mut p = vec![Tensor::matrix(1, 1, vec![1.0]).unwrap()];
    o.step(&mut p, &[Tensor::matrix(1, 1, vec![0.0]).unwrap()]).unwrap();
    assert!((p[0].data()[0] - 0.99).abs() < 1e-15);
}

#[test]
fn zero_gradient_is_a_fixed_point_for_every_rule() {
    for rule in all_rules() {
        let mut o = opt(rule, 0.1);
        let mut p = vec![
            Tensor::vector(vec![1.0, -2.0, 0.5]),
            Tensor::matrix(2, 2, vec![0.3, -0.1, 2.0, 4.0]).unwrap(),
        ];
        let before = p.clone();
        let zeros: Vec<Tensor> = p.iter().map(Tensor::zeros_like).collect();
        for _ in 0..50 {
            o.step(&mut p, &zeros).unwrap();
        }
        assert_eq!(p, before, "{rule:?}");
        for slot in &o.state().slots {
            assert!(slot.m.data().iter().all(|&x| x == 0.0));
            assert!(slot.v.data().iter().all(|&x| x == 0.0));
        }
    }
}

#[test]
fn sgd_step() {
    let mut o = opt(Rule::Sgd, 0.1);
    let mut p = vec![scalar(1.0)];
    o.step(&mut p, &[scalar(2.0)]).unwrap();
    assert!((p[0].data()[0] - 0.8).abs() < 1e-15);
}

#[test]
fn momentum_two_steps() {
    let mut o = opt(Rule::MomentumSgd { mu: 0.9 }, 1.0);
    let mut p = vec![scalar(5.0)];
    o.step(&mut p, &[scalar(1.0)]).unwrap();
    assert_eq!(o.state().slots[0].m.data()[0], 1.0);
    o.step(&mut p, &[scalar(1.0)]).unwrap();
    assert!((o.state().slots[0].m.data()[0] - 1.9).abs() < 1e-15);
    assert!((p[0].data()[0] - (5.0 - 1.0 - 1.9)).abs() < 1e-15);
}

fn random_grads(rng: &mut Rng, like: &[Tensor]) -> Vec<Tensor> {
    like.iter()
        .map(|p| {
            let mut g = p.zeros_like();
            rng.fill_standard_normal(g.data_mut());
            g
        })
        .collect()
}

fn mixed_params() -> Vec<Tensor> {
    vec![
        Tensor::matrix(3, 2, vec![0.5, -1.0, 2.0, 0.1, -0.3, 0.7]).unwrap(),
        Tensor::vector(vec![1.0, -1.0]),
    ]
}

#[test]
fn zero_momentum_is_sgd() {
    for decay in [0.0, 0.05] {
        let mut a = Optimizer::new(
            OptimizerConfig::new(Rule::MomentumSgd { mu: 0.0 }, fixed(0.05)).with_weight_decay(decay),
        )
        .unwrap();
        let mut b =
            Optimizer::new(OptimizerConfig::new(Rule::Sgd, fixed(0.05)).with_weight_decay(decay)).unwrap();
        let mut pa = mixed_params();
        let mut pb = mixed_params();
        let mut rng = Rng::new(11);
        for _ in 0..100 {
            let g = random_grads(&mut rng, &pa);
            a.step(&mut pa, &g).unwrap();
            b.step(&mut pb, &g).unwrap();
        }
        assert_eq!(pa, pb);
    }
}

#[test]
fn adamw_decays_non_matrix_params() {
    let cfg = OptimizerConfig::new(Rule::adamw(), fixed(0.1)).with_weight_decay(0.1);
    let mut o = Optimizer::new(cfg).unwrap();
    let mut p = vec![scalar(1.0)];
    o.step(&mut p, &[scalar(0.0)]).unwrap();
    assert!((p[0].data()[0] - 0.99).abs() < 1e-15);

    let cfg = OptimizerConfig::new(Rule::adamnx(), fixed(0.1)).with_weight_decay(0.1);
    let mut o = Optimizer::new(cfg).unwrap();
    let mut p = vec![scalar(1.0)];
    o.step(&mut p, &[scalar(0.0)]).unwrap();
    assert_eq!(p[0].data()[0], 1.0);
}

#[test]
fn adamw_without_decay_is_classic() {
    let mut a = opt(Rule::adamw(), 0.01);
    let mut b = opt(Rule::adam_classic(), 0.01);
    let mut pa = mixed_params();
    let mut pb = mixed_params();
    let mut rng = Rng::new(3);
    for _ in 0..200 {
        let g = random_grads(&mut rng, &pa);
        a.step(&mut pa, &g).unwrap();
        b.step(&mut pb, &g).unwrap();
    }
    assert_eq!(pa, pb);
}

#[test]
fn adamw_differs_from_classic_only_on_non_matrix() {
    let mk = |rule| Optimizer::new(OptimizerConfig::new(rule, fixed(0.01)).with_weight_decay(0.2)).unwrap();
    let mut a = mk(Rule::adamw());
    let mut b = mk(Rule::adam_classic());
    let mut pa = mixed_params();
    let mut pb = mixed_params();
    let mut rng = Rng::new(21);
    for _ in 0..10 {
        let g = random_grads(&mut rng, &pa);
        a.step(&mut pa, &g).unwrap();
        b.step(&mut pb, &g).unwrap();
    }
    assert_eq!(pa[0], pb[0], "matrix slot must match exactly");
    for (x, y) in pa[1].data().iter().zip(pb[1].data()) {
        assert!((x - y).abs() > 1e-6, "non-matrix slot must differ: {x} vs {y}");
    }
}

#[test]
fn radam_branches() {
    // rho_1 = rho_inf - 2 b / (1 - b) = 1 exactly for any b.
    assert!((radam::rho(0.999, 1) - 1.0).abs() < 1e-9);
    assert!(radam::rho(0.999, 1) < radam::RHO_THRESHOLD);
    assert!((radam::rho_inf(0.999) - 1999.0).abs() < 1e-9);
    assert!((radam::rho(0.999, 200_000) - 1999.0).abs() < 1e-6);
    // mpmath: rho_4 = 3.99750, rho_5 = 4.99600
    assert!(radam::rho(0.999, 4) <= radam::RHO_THRESHOLD);
    assert!((radam::rho(0.999, 5) - 4.995_998_000_401_601).abs() < 1e-9);

    // First step is momentum-only: theta -= lr * m_hat = lr * g.
    let mut o = opt(Rule::radam(), 0.1);
    let mut p = vec![scalar(1.0)];
    o.step(&mut p, &[scalar(4.0)]).unwrap();
    assert!((p[0].data()[0] - (1.0 - 0.4)).abs() < 1e-15);
}

#[test]
fn radam_rectifier_approaches_one() {
    assert!((radam::rectifier(0.999, 1_000_000) - 1.0).abs() < 1e-9);
    let r = radam::rectifier(0.999, 10);
    assert!(r > 0.0 && r < 1.0);
}

#[test]
fn lion_sign_update() {
    let mut o = opt(Rule::lion(), 0.1);
    let mut p = vec![Tensor::vector(vec![0.0, 0.0])];
    o.step(&mut p, &[Tensor::vector(vec![4.0, -2.0])]).unwrap();
    assert_eq!(p[0].data(), &[-0.1, 0.1]);
    let m = o.state().slots[0].m.data();
    assert!((m[0] - 0.04).abs() < 1e-15 && (m[1] + 0.02).abs() < 1e-15);
}

#[test]
fn lion_step_magnitude_is_lr() {
    let mut o = opt(Rule::lion(), 0.03);
    let mut p = vec![Tensor::vector(vec![0.5; 8])];
    let mut rng = Rng::new(8);
    for _ in 0..30 {
        let before = p[0].clone();
        let g = random_grads(&mut rng, &p);
        o.step(&mut p, &g).unwrap();
        for (a, b) in before.data().iter().zip(p[0].data()) {
            assert!(((a - b).abs() - 0.03).abs() < 1e-15);
        }
    }
}

#[test]
fn track_best_examples() {
    let mut s = OptimizerState::new();
    let p1 = vec![scalar(1.0)];
    assert!(s.track_best(2.0, &p1));
    assert_eq!(s.best_loss, 2.0);
    assert!(!s.track_best(2.0, &[scalar(5.0)]));
    assert_eq!(s.best_params.as_ref().unwrap()[0].data()[0], 1.0);

    let mut s = OptimizerState::new();
    for (step, loss) in [3.0, 1.0, 2.0].into_iter().enumerate() {
        s.t = step as u64 + 1;
        s.track_best(loss, &[scalar(step as f64)]);
    }
    assert_eq!(s.best_loss, 1.0);
    assert_eq!(s.best_step, Some(2));
    assert_eq!(s.best_params.unwrap()[0].data()[0], 1.0);
}

#[test]
fn non_finite_gradient_aborts_without_mutation() {
    let mut o = opt(Rule::adamnx(), 0.1);
    let mut p = vec![Tensor::vector(vec![1.0, 2.0])];
    o.step(&mut p, &[Tensor::vector(vec![0.5, 0.5])]).unwrap();
    let (p0, s0) = (p.clone(), o.state().clone());
    let err = o.step(&mut p, &[Tensor::vector(vec![0.5, f64::INFINITY])]).unwrap_err();
    assert_eq!(
        err,
        OptimError::NonFiniteGradient {
            step: 2,
            param: 0,
            index: 1
        }
    );
    assert_eq!(p, p0);
    assert_eq!(o.state(), &s0);
}

#[test]
fn shape_and_arity_errors() {
    let mut o = opt(Rule::Sgd, 0.1);
    let mut p = vec![Tensor::vector(vec![1.0, 2.0])];
    assert!(matches!(o.step(&mut p, &[]), Err(OptimError::ArityMismatch { .. })));
    assert!(matches!(
        o.step(&mut p, &[Tensor::vector(vec![1.0])]),
        Err(OptimError::ShapeMismatch { .. })
    ));
}

#[test]
fn config_validation() {
    let bad_eps = OptimizerConfig::new(Rule::adamnx(), fixed(0.1)).with_eps(0.0);
    assert!(Optimizer::new(bad_eps).is_err());
    let bad_decay = OptimizerConfig::new(Rule::adamnx(), fixed(0.1)).with_weight_decay(-1.0);
    assert!(Optimizer::new(bad_decay).is_err());
    assert!(Optimizer::new(OptimizerConfig::new(Rule::MomentumSgd { mu: 1.0 }, fixed(0.1))).is_err());
    assert!(Optimizer::new(OptimizerConfig::new(
        Rule::AdamClassic {
            beta1: 0.9,
            beta2: 1.0
        },
        fixed(0.1)
    ))
    .is_err());
}

#[test]
fn non_matrix_params_ignore_decay_under_generalized_adam() {
    for family in [
        DecayFamily::AdamNX { beta2: 0.99 },
        DecayFamily::AdamClassic { beta2: 0.999 },
    ] {
        let rule = Rule::GeneralizedAdam(DecaySchedule::new(0.9, family).unwrap());
        let cfg = OptimizerConfig::new(rule, fixed(0.5)).with_weight_decay(3.0);
        let mut o = Optimizer::new(cfg).unwrap();
        let mut p = vec![Tensor::vector(vec![1.0, -4.0]), Tensor::full(&[2, 2, 1], 7.0)];
        let before = p.clone();
        let zeros: Vec<Tensor> = p.iter().map(Tensor::zeros_like).collect();
        for _ in 0..20 {
            o.step(&mut p, &zeros).unwrap();
        }
        assert_eq!(p, before);
    }
}

#[test]
fn lr_schedule_uses_step_counter() {
    let lr = LrSchedule::linear_then_floor(1.0, 0.5, 2).unwrap();
    let mut o = Optimizer::new(OptimizerConfig::new(Rule::Sgd, lr)).unwrap();
    let mut p = vec![scalar(0.0)];
    let a = o.step(&mut p, &[scalar(1.0)]).unwrap();
    let b = o.step(&mut p, &[scalar(1.0)]).unwrap();
    assert_eq!(a.lr, 0.75);
    assert_eq!(b.lr, 0.5);
    assert_eq!(p[0].data()[0], -1.25);
}

mod props {
    use super::*;
    use proptest::prelude::*;
    use crate::numerics::Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn second_moment_stays_nonnegative(seed in any::<u64>(), rule_idx in 0usize..10, scale in 1e-3f64..1e3) {
            let rule = all_rules()[rule_idx];
            let mut o = opt(rule, 1e-3);
            let mut p = mixed_params();
            let mut rng = Rng::new(seed);
            for _ in 0..40 {
                let g: Vec<Tensor> = random_grads(&mut rng, &p)
                    .into_iter()
                    .map(|g| g.scale(scale).unwrap())
                    .collect();
                o.step(&mut p, &g).unwrap();
                for slot in &o.state().slots {
                    prop_assert!(slot.v.data().iter().all(|&x| x >= 0.0));
                }
            }
        }

        #[test]
        fn best_loss_never_increases(losses in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let mut s = OptimizerState::new();
            let mut prev = f64::INFINITY;
            for loss in losses {
                s.track_best(loss, &[scalar(loss)]);
                prop_assert!(s.best_loss <= prev);
                prop_assert_eq!(s.best_params.as_ref().unwrap()[0].data()[0], s.best_loss);
                prev = s.best_loss;
            }
        }
    }
}
