// Runs the toy backbone over a raster frame and stores its tokens.

use gazefuse::features::{FeatureStore, HeadBox, RgbImage, ToyBackbone, ToyBackboneConfig};
use gazefuse::View;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut img = RgbImage::filled(32, 32, [100, 100, 100]);
    img.fill_rect(0, 0, 16, 16, [230, 40, 40]);
    let head = HeadBox::new(0.1, 0.1, 0.4, 0.45)?;

    let backbone = ToyBackbone::new(ToyBackboneConfig { grid: 2, out_dim: 8, projection_seed: 0 })?;
    for (i, c) in backbone.cell_features(&img, &head)?.iter().enumerate() {
        println!("cell {i}: rgb ({:.2}, {:.2}, {:.2}) head coverage {:.2}", c[0], c[1], c[2], c[3]);
    }
    let seq = backbone.extract(&img, &head, "s01", View::Infant, 12.0)?;

    let dir = tempfile::tempdir()?;
    let store = FeatureStore::new(dir.path());
    store.write(&seq)?;
    let back = store.read("s01", View::Infant, 12.0)?;
    assert_eq!(back, seq);
    println!("stored {:?} tokens at {}", back.tokens.shape(), store.record_path("s01", View::Infant, 12_000).display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
