//! Latent group Lasso: supports are unions of groups, and the fit returns
//! the group decomposition that attains the norm.

use structsparse::models::{self, Problem};
use structsparse::norms::NormSpec;
use structsparse::solver::{LossKind, SolverConfig};
use structsparse::synth::{self, Scenario, SynthData, SynthSpec};

fn main() -> structsparse::Result<()> {
    let spec = SynthSpec { scenario: Scenario::Latent, n: 80, p: 16, k: 2, sigma: 0.1, seed: 2, ..Default::default() };
    let SynthData::Regression { x, y, w_star, structure, active_groups, .. } = synth::generate(&spec)? else { unreachable!() };
    let structure = structure.expect("latent scenario has groups");
    let problem = Problem::new(x, y, LossKind::Square, NormSpec::LatentGroup { structure: structure.clone() }, 0.0)?;
    let lam = 0.1 * models::lambda_max(&problem)?;
    let fit = models::fit(&problem.with_lambda(lam), &SolverConfig::default())?;
    let active = active_groups.unwrap_or_default();
    println!("planted groups {:?}", active.iter().map(|&g| structure.group(g)).collect::<Vec<_>>());
    println!("true support   {:?}", (0..w_star.len()).filter(|&j| w_star[j] != 0.0).collect::<Vec<_>>());
    println!("fit support    {:?}", fit.support);
    if let Some(dec) = &fit.latent {
        for (g, block) in dec.blocks.iter().enumerate() {
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-8 {
                println!("  group {g:>2} {:?} carries ‖v‖ = {norm:.3}", structure.group(g));
            }
        }
    }
    Ok(())
}
