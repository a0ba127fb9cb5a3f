//! Write a stereo PCM16 WAV, read it back as mono.

use fbank_egl::data::{encode_wav, parse_wav, SampleFormat};

fn main() -> fbank_egl::Result<()> {
    let rate = 8000;
    let interleaved: Vec<f64> = (0..rate)
        .flat_map(|n| {
            let s = (std::f64::consts::TAU * 300.0 * n as f64 / rate as f64).sin() * 0.5;
            [s, -s * 0.5]
        })
        .collect();
    let bytes = encode_wav(&interleaved, 2, rate as u32, SampleFormat::Pcm16);
    let mono = parse_wav(&bytes)?;
    println!(
        "{} bytes, {} Hz, {} samples, {:.2} s, first samples {:?}",
        bytes.len(),
        mono.sample_rate_hz(),
        mono.len(),
        mono.duration_seconds(),
        &mono.samples()[..4]
    );
    match parse_wav(&bytes[..30]) {
        Err(e) => println!("truncated file: {e}"),
        Ok(_) => println!("truncated file parsed?"),
    }
    Ok(())
}
