use densemark::geom::{LandmarkSet, Schema};
use densemark::loss::{
    auxiliary_losses_residuals, hybrid_loss, hybrid_loss_residuals, smooth_l1, smooth_l1_grad, wing, wing_grad,
    LossConfig, MseForm,
};
use rand::{Rng, SeedableRng};

fn cfg() -> LossConfig {
    LossConfig::default()
}

#[test]
fn wing_constant_and_branches() {
    let c = cfg();
    let expected_c = 15.0 - 15.0 * 6f64.ln();
    assert!((c.c() - expected_c).abs() <= 1e-12);
    assert_eq!(wing(0.0, &c), 0.0);
    let log_branch = 15.0 * (1.0 + 15.0 / 3.0f64).ln();
    let lin_branch = 15.0 - expected_c;
    assert!((wing(15.0, &c) - log_branch).abs() <= 1e-9);
    assert!((log_branch - lin_branch).abs() <= 1e-9);
    assert!((wing(100.0, &c) - 111.8764).abs() < 1e-4);
    for x in [15.0 - 1e-12, 15.0 + 1e-12, -15.0 + 1e-12] {
        assert!((wing(x, &c) - log_branch).abs() <= 1e-9);
    }
}

#[test]
fn wing_is_even_and_monotone() {
    let c = cfg();
    let mut prev = -1.0;
    for i in 0..=20_000 {
        let x = i as f64 * 0.01;
        assert_eq!(wing(x, &c), wing(-x, &c));
        let v = wing(x, &c);
        assert!(v >= prev);
        prev = v;
    }
}

#[test]
fn wing_grad_fixtures() {
    let c = cfg();
    assert_eq!(wing_grad(0.0, &c), 0.0);
    assert_eq!(wing_grad(3.0, &c), 2.5);
    assert_eq!(wing_grad(-3.0, &c), -2.5);
    assert_eq!(wing_grad(15.0, &c), 1.0);
    assert_eq!(wing_grad(-40.0, &c), -1.0);
}

#[test]
fn wing_grad_matches_central_differences() {
    let c = cfg();
    let h = 1e-6;
    let fd = |x: f64| (wing(x + h, &c) - wing(x - h, &c)) / (2.0 * h);
    assert!((fd(1.0) - wing_grad(1.0, &c)).abs() <= 1e-5 * wing_grad(1.0, &c).abs());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 1000 {
        let x: f64 = rng.gen_range(-100.0..100.0);
        if (x.abs() - 15.0).abs() < 1e-4 || x.abs() < 1e-4 {
            continue;
        }
        let (a, n) = (wing_grad(x, &c), fd(x));
        assert!((a - n).abs() <= 1e-5 * a.abs().max(n.abs()), "x={x}: {a} vs {n}");
        checked += 1;
    }
}

#[test]
fn hybrid_single_residual_fixture() {
    let l = hybrid_loss_residuals(&[1.0], &cfg());
    let expected = 1.5 * 15.0 * (4.0f64 / 3.0).ln() + 0.5;
    assert!((l - expected).abs() <= 1e-12);
    assert!((l - 6.9729).abs() < 1e-3);
    let half = hybrid_loss_residuals(&[1.0], &LossConfig { mse: MseForm::HalfSquare, ..cfg() });
    assert!((half - (expected - 0.25)).abs() <= 1e-12);
}

#[test]
fn hybrid_is_linear_in_weights_and_zero_only_at_equality() {
    let r = [0.3, -2.0, 17.0, 0.0, 5.5, -40.0];
    let base = hybrid_loss_residuals(&r, &cfg());
    let doubled = hybrid_loss_residuals(&r, &LossConfig { w1: 3.0, w2: 1.0, ..cfg() });
    assert!((doubled - 2.0 * base).abs() <= 1e-12 * base);
    assert!(base > 0.0);
    assert_eq!(hybrid_loss_residuals(&[0.0; 6], &cfg()), 0.0);
    let gt = LandmarkSet::new(vec![[1.0, 2.0, 3.0]; 68], Schema::L68).unwrap();
    assert_eq!(hybrid_loss(&gt, &gt, &cfg()).unwrap(), 0.0);
    let other = LandmarkSet::new(vec![[1.0, 2.0, 3.0]; 21], Schema::L21).unwrap();
    assert!(hybrid_loss(&gt, &other, &cfg()).is_err());
}

#[test]
fn auxiliary_fixtures_and_smooth_l1_continuity() {
    let z = auxiliary_losses_residuals(&[0.0]);
    assert_eq!((z.l1, z.l2, z.smooth_l1), (0.0, 0.0, 0.0));
    let one = auxiliary_losses_residuals(&[1.0]);
    assert_eq!((one.l1, one.l2, one.smooth_l1), (1.0, 0.5, 0.5));
    assert_eq!(auxiliary_losses_residuals(&[4.0]).smooth_l1, 3.5);
    let e = 1e-12;
    assert!((smooth_l1(1.0 - e) - smooth_l1(1.0 + e)).abs() <= 1e-9);
    assert!((smooth_l1_grad(1.0 - e) - smooth_l1_grad(1.0 + e)).abs() <= 1e-9);
    assert!((smooth_l1_grad(-1.0 + e) - smooth_l1_grad(-1.0 - e)).abs() <= 1e-9);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(LossConfig { w: 0.0, ..cfg() }.validate().is_err());
    assert!(LossConfig { epsilon: -1.0, ..cfg() }.validate().is_err());
    assert!(LossConfig { w2: -0.1, ..cfg() }.validate().is_err());
}
