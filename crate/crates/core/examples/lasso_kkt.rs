//! Lasso on a seeded planted-support problem, certified by its KKT residual.

use structsparse::models::{self, Problem};
use structsparse::norms::NormSpec;
use structsparse::solver::{LossKind, SolverConfig};
use structsparse::synth::{self, Scenario, SynthData, SynthSpec};

fn main() -> structsparse::Result<()> {
    let spec = SynthSpec { scenario: Scenario::Lasso, n: 80, p: 40, k: 4, sigma: 0.1, seed: 1, ..Default::default() };
    let SynthData::Regression { x, y, w_star, .. } = synth::generate(&spec)? else { unreachable!() };
    let problem = Problem::new(x, y, LossKind::Square, NormSpec::L1, 0.0)?;
    let lmax = models::lambda_max(&problem)?;
    for (name, cfg) in [("fista", SolverConfig::default()), ("ista", SolverConfig::ista())] {
        let fit = models::fit(&problem.with_lambda(0.05 * lmax), &SolverConfig { tol: 1e-9, max_iter: 50_000, ..cfg })?;
        let kkt = models::kkt_residual(&problem.with_lambda(0.05 * lmax), &fit).unwrap();
        println!("{name:>5}: {} iterations, objective {:.6}, KKT residual {kkt:.1e}", fit.diagnostics.iterations, fit.diagnostics.objective);
        println!("       support {:?}", fit.support);
    }
    let truth: Vec<usize> = (0..w_star.len()).filter(|&j| w_star[j] != 0.0).collect();
    println!("  true support {truth:?}");
    Ok(())
}
