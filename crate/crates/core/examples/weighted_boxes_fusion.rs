//! Fuses detections from three branches and scores the result against ground truth.
//!
//! ```text
//! cargo run --example weighted_boxes_fusion
//! ```

use ctxfuse::fusion::{detection_loss, weighted_boxes_fusion, ClusterConfMode, FusionParams, LossParams};
use ctxfuse::types::Detection;

fn main() {
    let camera = vec![
        Detection::new(0, [100.0, 100.0, 180.0, 160.0], 0.9),
        Detection::new(1, [300.0, 200.0, 340.0, 290.0], 0.8),
    ];
    let lidar = vec![
        Detection::new(0, [104.0, 98.0, 184.0, 158.0], 0.7),
        Detection::new(2, [500.0, 50.0, 540.0, 80.0], 0.3),
    ];
    let radar = vec![Detection::new(0, [96.0, 104.0, 176.0, 166.0], 0.6)];
    let gt = vec![
        Detection::new(0, [100.0, 100.0, 180.0, 160.0], 1.0),
        Detection::new(1, [300.0, 200.0, 340.0, 290.0], 1.0),
    ];

    for mode in [ClusterConfMode::Mean, ClusterConfMode::Weighted] {
        let params = FusionParams {
            cluster_conf_mode: mode,
            ..FusionParams::default()
        };
        let fused = weighted_boxes_fusion(&[&camera, &lidar, &radar], &params);
        println!("{mode:?}:");
        for d in &fused {
            let [x1, y1, x2, y2] = d.bbox.coords();
            println!(
                "  class {} conf {:.3} box [{x1:.1}, {y1:.1}, {x2:.1}, {y2:.1}]",
                d.class_id, d.confidence
            );
        }
        let loss = detection_loss(&fused, &gt, &LossParams::default());
        println!("  loss {:.4} (cls {:.4}, loc {:.4})", loss.total(), loss.cls_loss, loss.loc_loss);
    }
}
