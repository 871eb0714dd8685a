//! Instance segmentation by super-point merging, scored with mAP50 under
//! box and mask membership.

use liftseg::detect::MembershipMode;
use liftseg::instance::{
    default_adjacency_radius, inclusion_vectors, map50, merge_instances, superpoint_adjacency, InstanceEvalObject,
    DEFAULT_INCLUSION_THRESHOLD,
};
use liftseg::synth::{generate, SynthSpec, PRESETS};
use liftseg::vote::{assign_labels, score_unweighted, DEFAULT_NULL_THRESHOLD};

fn main() -> liftseg::Result<()> {
    for mode in [MembershipMode::Box, MembershipMode::Mask] {
        let mut evals = Vec::new();
        for name in PRESETS {
            for seed in 0..2 {
                let bundle = generate(&SynthSpec::preset(name, seed)?)?;
                let o = bundle.to_train_object(mode)?;
                let partition = &o.scene.partition;
                let scores = score_unweighted(partition, &o.visibility, &o.membership, &o.detections, DEFAULT_NULL_THRESHOLD)?;
                let labeling = assign_labels(&scores, partition, DEFAULT_NULL_THRESHOLD);
                let adjacency = superpoint_adjacency(&o.scene.cloud, partition, default_adjacency_radius(&o.scene.cloud))?;
                let inclusion = inclusion_vectors(partition, &o.visibility, &o.membership, &o.detections, DEFAULT_INCLUSION_THRESHOLD);
                let seg = merge_instances(&labeling, &adjacency, &inclusion)?;
                evals.push(InstanceEvalObject {
                    category: name.to_string(),
                    label_names: o.scene.labels.clone(),
                    predicted: seg.to_instance_set(partition, Some(seg.scores(&scores))),
                    ground_truth: bundle.gt_instances.clone(),
                });
            }
        }
        let ap = map50(&evals);
        println!("{mode:?}: part-aware mAP50 {:.4}, part-agnostic mAP50 {:.4}", ap.part_aware, ap.part_agnostic);
        for (category, v) in &ap.part_aware_per_category {
            println!("  {category:>6}: {v:.4}");
        }
    }
    Ok(())
}
