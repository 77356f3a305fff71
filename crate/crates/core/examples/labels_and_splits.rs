// Annotation intervals to per-tick labels, a temporal split with one
// held-out session, and a balanced test set.

use gazefuse::pipeline::{
    annotations_to_csv, balance_test, label_frames, parse_annotations, temporal_split, EventAnnotation, Quality, SampleRef,
};
use gazefuse::Task;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let events = vec![
        EventAnnotation::new(Task::MutualGaze, 3.0, 9.5, Quality::Confident)?,
        EventAnnotation::new(Task::MutualGaze, 20.0, 31.0, Quality::Confident)?,
        EventAnnotation::new(Task::MutualGaze, 14.2, 15.8, Quality::Ambiguous)?,
    ];
    let csv = annotations_to_csv(&events);
    print!("{csv}");
    let events = parse_annotations(&csv, "example")?;

    let mut samples = Vec::new();
    for session in ["s01", "s02", "s03"] {
        let ticks: Vec<f64> = (0..40).map(f64::from).collect();
        let labeling = label_frames(&ticks, &events, Task::MutualGaze)?;
        for (t, l) in ticks.iter().zip(labeling.labels) {
            samples.push(SampleRef {
                session: session.into(),
                tick_s: *t,
                infant_s: *t,
                parent_s: t + 0.37,
                label: l.label,
                eligibility: l.eligibility,
            });
        }
    }
    let split = temporal_split(&samples, &["s03".to_string()], 0.10, Task::MutualGaze)?;
    println!(
        "train {} / validation {} / test {} / excluded {}",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.excluded.len()
    );
    let balanced = balance_test(&split.test, 0)?;
    let pos = balanced.iter().filter(|s| s.label).count();
    println!("balanced test: {pos} positive, {} negative", balanced.len() - pos);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
