//! Sub-sample an episode, pick nine distinct frames with k-center greedy and
//! lay them out on a contact sheet.

use btforge::dataset::build::select_frames;
use btforge::dataset::frames::{coverage_radius, load_image};
use btforge::dataset::{contact_sheet, kcenter_greedy, load_source, synthetic, DatasetConfig, DistanceMetric};

fn main() {
    let points: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 10.0].iter().map(|x| vec![*x]).collect();
    for k in 1..=4 {
        let picked = kcenter_greedy(&points, k, 0, DistanceMetric::Euclidean).unwrap();
        let radius = coverage_radius(&points, &picked, DistanceMetric::Euclidean);
        println!("k={k}: indices {picked:?}, coverage radius {radius}");
    }

    let dir = tempfile::tempdir().expect("temp dir");
    synthetic::write_sources(dir.path(), 1, 95, 3).expect("write frames");
    let source = load_source(&dir.path().join("episode_000")).expect("episode loads");
    let picked = select_frames(&source, &DatasetConfig::default()).expect("enough frames");
    println!("{} frames, stride 10, selected {picked:?}", source.frames.len());

    let images: Vec<_> = picked
        .iter()
        .map(|&i| load_image(&source.frames[i].path).unwrap())
        .collect();
    let sheet = contact_sheet(&images).expect("nine frames");
    let out = dir.path().join("sheet.png");
    sheet.save(&out).expect("write sheet");
    println!(
        "contact sheet {}x{} written to {}",
        sheet.width(),
        sheet.height(),
        out.display()
    );
}

#[test]
fn runs() {
    main();
}
