//! Step-decayed learning rate and Adam on a quadratic bowl.

use fbank_egl::nn::{adam_step, scheduled_lr, AdamState, TrainSchedule};

fn main() -> fbank_egl::Result<()> {
    let sched = TrainSchedule::default();
    for epoch in [0, 1, 2, 3, 6, 9, 29] {
        println!("epoch {epoch:>2}: lr {:.8}", scheduled_lr(&sched, epoch));
    }

    let target = [3.0, -1.0];
    let mut x = vec![0.0, 0.0];
    let mut state = AdamState::new([2]);
    for step in 0..3000 {
        let grad: Vec<f64> = x.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
        adam_step(&mut [&mut x], &[&grad], &mut state, 0.01)?;
        if step % 1000 == 999 {
            println!("step {}: x = [{:.4}, {:.4}]", step + 1, x[0], x[1]);
        }
    }
    Ok(())
}
