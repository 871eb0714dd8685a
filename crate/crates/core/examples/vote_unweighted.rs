//! Unweighted super-point voting on noise-free oracle detections.

use liftseg::detect::MembershipMode;
use liftseg::loss::miou_hard;
use liftseg::synth::{generate, SynthSpec, PRESETS};
use liftseg::vote::{assign_labels, score_unweighted, DEFAULT_NULL_THRESHOLD};

fn main() -> liftseg::Result<()> {
    for name in PRESETS {
        let object = generate(&SynthSpec::preset(name, 0)?)?.to_train_object(MembershipMode::Box)?;
        let partition = &object.scene.partition;
        let scores = score_unweighted(partition, &object.visibility, &object.membership, &object.detections, DEFAULT_NULL_THRESHOLD)?;
        let labeling = assign_labels(&scores, partition, DEFAULT_NULL_THRESHOLD);
        let correct = labeling.point_labels().iter().zip(&object.scene.gt).filter(|(a, b)| a == b).count();
        println!(
            "{name:>6}: {} points, {} super points, {} detections, accuracy {:.4}, mIoU {:.4}",
            object.scene.cloud.len(),
            partition.num_super_points(),
            object.detections.len(),
            correct as f64 / object.scene.cloud.len() as f64,
            miou_hard(object.ground_truth(), labeling.point_labels())?
        );
    }
    Ok(())
}
