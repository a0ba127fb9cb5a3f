//! Clip decisions from per-segment predictions.

use fbank_egl::egl::majority_vote;

fn main() -> fbank_egl::Result<()> {
    println!("[2, 2, 7, 2] -> {}", majority_vote(&[2, 2, 7, 2], &[])?);
    let scores = vec![vec![0.1, 0.6, 0.3], vec![0.2, 0.1, 0.7]];
    println!("[1, 2], scores favour 2 -> {}", majority_vote(&[1, 2], &scores)?);
    println!("[2, 0], no scores -> {}", majority_vote(&[2, 0], &[])?);
    Ok(())
}
