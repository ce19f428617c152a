//! Wing loss and the hybrid wing + MSE loss on a few residuals.

use densemark::geom::{LandmarkSet, Schema};
use densemark::loss::{auxiliary_losses, hybrid_loss, wing, wing_grad, LossConfig};

fn main() -> densemark::Result<()> {
    let cfg = LossConfig::default();
    println!("w = {}, epsilon = {}, C = {:.12}", cfg.w, cfg.epsilon, cfg.c());
    println!("{:>8} {:>12} {:>10}", "x", "wing(x)", "wing'(x)");
    for x in [0.0, 0.5, 1.0, 3.0, 10.0, 15.0, 20.0, -20.0] {
        println!("{x:>8} {:>12.6} {:>10.6}", wing(x, &cfg), wing_grad(x, &cfg));
    }

    let gt = LandmarkSet::new(vec![[0.0; 3]; 2], Schema::Custom(2))?;
    let pred = LandmarkSet::new(vec![[1.0, 0.0, 0.0], [0.0, 20.0, 0.0]], Schema::Custom(2))?;
    println!("hybrid loss: {:.5}", hybrid_loss(&pred, &gt, &cfg)?);
    println!("{:?}", auxiliary_losses(&pred, &gt)?);
    Ok(())
}
