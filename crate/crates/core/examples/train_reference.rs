//! Gradient check and training of the reference regressor on synthetic
//! landmark regression, plus the hybrid vs squared-error comparison under
//! heavy-tailed label noise.

use densemark::loss::LossConfig;
use densemark::trainer::{compare_hybrid_vs_l2, gradient_check, train_synthetic, Noise, RegressorSpec, TaskSpec};

fn main() -> densemark::Result<()> {
    let loss = LossConfig::default();
    let spec = RegressorSpec::default();

    let check = gradient_check(&RegressorSpec { hidden: Some(16), ..spec.clone() }, &loss, 100, 1)?;
    println!(
        "gradient check: {} coords, max relative error {:.2e} ({})",
        check.checked,
        check.max_rel_error,
        if check.passed { "pass" } else { "FAIL" }
    );

    let t = std::time::Instant::now();
    let run = train_synthetic(&spec, &TaskSpec::default(), &loss)?;
    println!(
        "noiseless task: {} epochs in {:.1?}, final loss {:.4e}, final NME {:.3e}",
        spec.epochs,
        t.elapsed(),
        run.final_loss,
        run.final_nme
    );
    for (k, l) in run.smoothed_curve.iter().enumerate().step_by(25) {
        println!("  epoch {:>5}  loss {l:.4e}", k * 10);
    }

    let small = RegressorSpec { keypoints: 68, output_dim: 204, samples: 48, ..spec };
    let noisy = TaskSpec { noise: Noise::StudentT { dof: 2.0, scale: 5.0 }, ..Default::default() };
    let c = compare_hybrid_vs_l2(&small, &noisy, &loss)?;
    println!(
        "heavy-tailed noise, held-out wing error: hybrid {:.3} vs L2 {:.3} (NME {:.4} vs {:.4})",
        c.hybrid_wing_error, c.l2_wing_error, c.hybrid_nme, c.l2_nme
    );
    println!("note: {}", c.note);
    Ok(())
}
