//! Renders a synthetic chair from ten viewpoints and reports how many
//! points survive the z-buffer in each view.

use liftseg::geom::{compute_visibility, fixed_viewpoints, VisibilityParams};
use liftseg::synth::{generate, SynthSpec};

fn main() -> liftseg::Result<()> {
    let bundle = generate(&SynthSpec::preset("chair", 0)?)?;
    let cameras = fixed_viewpoints(10)?;
    let n = bundle.scene.cloud.len();

    // Default splat settings against the density-matched ones stored with the bundle.
    for (name, params) in [("default", VisibilityParams::default()), ("matched", bundle.visibility_params())] {
        let vis = compute_visibility(&bundle.scene.cloud, &cameras, params)?;
        let counts: Vec<String> = (0..vis.num_views()).map(|k| format!("{:.2}", vis.visible_count(k) as f64 / n as f64)).collect();
        println!("{name:>8} splat {:.2}px eps {:.4}: visible fraction {}", params.splat_radius, params.depth_epsilon, counts.join(" "));
    }
    Ok(())
}
