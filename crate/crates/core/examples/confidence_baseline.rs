//! Detection confidence as the voting weight, against uniform weights, on
//! adversarial bundles where spurious detections are the more confident ones.

use liftseg::detect::MembershipMode;
use liftseg::synth::{generate, NoiseSpec, SynthSpec, PRESETS};
use liftseg::train::{evaluate_confidence_baseline, evaluate_uniform, ConfidenceMode};
use liftseg::vote::DEFAULT_NULL_SCORE;
use liftseg::weightnet::DEFAULT_TAU;

fn main() -> liftseg::Result<()> {
    for name in PRESETS {
        let objects = (0..8)
            .map(|seed| generate(&SynthSpec::preset(name, seed)?.with_noise(NoiseSpec::adversarial()))?.to_train_object(MembershipMode::Box))
            .collect::<liftseg::Result<Vec<_>>>()?;
        println!(
            "{name:>6}: uniform {:.4}, normalized confidence {:.4}, raw confidence {:.4}",
            evaluate_uniform(&objects, DEFAULT_TAU, DEFAULT_NULL_SCORE)?,
            evaluate_confidence_baseline(&objects, ConfidenceMode::Normalized, DEFAULT_TAU, DEFAULT_NULL_SCORE)?,
            evaluate_confidence_baseline(&objects, ConfidenceMode::Raw, DEFAULT_TAU, DEFAULT_NULL_SCORE)?
        );
    }
    Ok(())
}
