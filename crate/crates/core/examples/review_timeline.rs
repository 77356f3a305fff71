// Builds the review timeline for one session and renders it to SVG.

use gazefuse::eval::{export_timeline, PredictionRecord, TimelineDocument, DEFAULT_TIMELINE_THRESHOLD, DEFAULT_WINDOW_S};
use gazefuse::pipeline::{EventAnnotation, Quality};
use gazefuse::Task;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let truth = vec![
        EventAnnotation::new(Task::MutualGaze, 2.0, 6.5, Quality::Confident)?,
        EventAnnotation::new(Task::JointAttention, 8.0, 9.0, Quality::Ambiguous)?,
    ];
    let preds: Vec<PredictionRecord> = (0..12)
        .map(|k| PredictionRecord {
            session: "s03".into(),
            timestamp_s: k as f64,
            task: Task::MutualGaze,
            probability: if (2..=6).contains(&k) { 0.8 } else { 0.2 },
            label: None,
        })
        .collect();
    let doc = export_timeline("s03", &preds, &truth, DEFAULT_WINDOW_S, DEFAULT_TIMELINE_THRESHOLD)?;
    let text = doc.to_text();
    print!("{}", text.lines().take(10).map(|l| format!("{l}\n")).collect::<String>());
    assert_eq!(TimelineDocument::parse(&text)?, doc);

    let svg = doc.render_svg();
    let faded = svg.matches("fill-opacity=\"0.35\"").count();
    println!("svg: {} bytes, {faded} bars below threshold", svg.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
