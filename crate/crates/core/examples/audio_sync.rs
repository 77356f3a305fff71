// Recovers the delay between two recordings of the same room from their
// WAV files.

use gazefuse::pipeline::{estimate_audio_offset, parse_wav, write_wav_i16, MonoAudio, DEFAULT_MAX_LAG_S, DEFAULT_MIN_CONFIDENCE};
use rand::{Rng, SeedableRng};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rate = 8000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    // Clicks and chatter: noise bursts with random gaps.
    let mut room = Vec::new();
    while room.len() < rate * 25 {
        let len = rng.random_range(rate / 20..rate / 3);
        let amp = if rng.random_bool(0.5) { 0.5 } else { 0.0 };
        room.extend((0..len).map(|_| amp * rng.random_range(-1.0f32..1.0)));
    }
    let delay = 0.37;
    let shift = (delay * rate as f64) as usize;
    let a = room[rate..rate * 21].to_vec();
    let b = room[rate - shift..rate * 21 - shift].to_vec();

    let dir = tempfile::tempdir()?;
    let (pa, pb) = (dir.path().join("infant.wav"), dir.path().join("parent.wav"));
    write_wav_i16(&pa, &MonoAudio { rate: rate as u32, samples: a })?;
    write_wav_i16(&pb, &MonoAudio { rate: rate as u32, samples: b })?;

    let est = estimate_audio_offset(&parse_wav(&pa)?, &parse_wav(&pb)?, DEFAULT_MAX_LAG_S, DEFAULT_MIN_CONFIDENCE)?;
    println!("parent lags infant by {:+.3} s (confidence {:.3})", est.offset_s, est.confidence);
    assert!((est.offset_s - delay).abs() < 0.02);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
