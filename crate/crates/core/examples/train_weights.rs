//! Few-shot training of the detection weight network on adversarial
//! synthetic lamps: eight training objects, eight held out.

use liftseg::detect::MembershipMode;
use liftseg::synth::{generate, NoiseSpec, SynthSpec};
use liftseg::train::{evaluate_uniform, predict_weights, train_with_validation, TrainConfig, TrainObject};

fn objects(seeds: std::ops::Range<u64>) -> liftseg::Result<Vec<(TrainObject, Vec<bool>)>> {
    seeds
        .map(|seed| {
            let bundle = generate(&SynthSpec::preset("lamp", seed)?.with_noise(NoiseSpec::adversarial()))?;
            Ok((bundle.to_train_object(MembershipMode::Box)?, bundle.truth.truthful))
        })
        .collect()
}

fn main() -> liftseg::Result<()> {
    let (train, _): (Vec<_>, Vec<_>) = objects(0..8)?.into_iter().unzip();
    let (test, truthful): (Vec<_>, Vec<_>) = objects(100..108)?.into_iter().unzip();
    let cfg = TrainConfig::default();
    let (params, report) = train_with_validation(&train, &test, &cfg)?;

    for epoch in (0..cfg.epochs).step_by(25) {
        println!("epoch {epoch:>3}: loss {:.4}, train mIoU {:.4}", report.loss[epoch], report.train_miou[epoch]);
    }
    println!("held-out mIoU: uniform {:.4}, trained {:.4}", evaluate_uniform(&test, cfg.tau, cfg.null_score)?, report.validation_miou.unwrap_or(0.0));

    let (mut good, mut bad) = (Vec::new(), Vec::new());
    for (o, flags) in test.iter().zip(&truthful) {
        for (w, &t) in predict_weights(&params, o)?.into_iter().zip(flags) {
            if t { good.push(w) } else { bad.push(w) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!("mean weight: truthful {:.2}, spurious {:.2}", mean(&good), mean(&bad));
    Ok(())
}
