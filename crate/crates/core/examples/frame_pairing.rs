// Pairs 30 fps infant frames with 25 fps parent frames at 1 Hz, then keeps
// only ticks where both heads were detected confidently.

use gazefuse::features::HeadBox;
use gazefuse::pipeline::{filter_by_heads, sample_frames, HeadBoxRecord, HeadManifest};
use gazefuse::View;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let infant: Vec<f64> = (0..=300).map(|i| i as f64 / 30.0).collect();
    let parent: Vec<f64> = (0..=260).map(|i| i as f64 / 25.0).collect();
    let offset = 0.4;
    let pairs = sample_frames(&infant, &parent, offset, 1.0)?;
    for p in pairs.iter().take(3) {
        println!("tick {:>4.1}s  infant {:.3}s  parent {:.3}s", p.tick_s, p.infant_s, p.parent_s);
    }

    let bbox = HeadBox::new(0.3, 0.2, 0.6, 0.6)?;
    let mut records = Vec::new();
    for p in &pairs {
        // The parent detector is unsure on odd ticks.
        let parent_conf = if (p.tick_s as i64) % 2 == 1 { 0.6 } else { 0.95 };
        for (view, t, confidence) in [(View::Infant, p.infant_s, 0.99), (View::Parent, p.parent_s, parent_conf)] {
            records.push(HeadBoxRecord { session: "s01".into(), view, timestamp_s: t, bbox, confidence });
        }
    }
    let outcome = filter_by_heads("s01", &pairs, &HeadManifest::new(records), 0.8);
    println!("{} ticks, {} kept, {} below confidence", pairs.len(), outcome.kept.len(), outcome.low_confidence);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
