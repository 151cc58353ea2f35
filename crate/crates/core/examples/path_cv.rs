//! Warm-started regularization path, K-fold cross-validation and the OLS
//! hybrid on a group-sparse problem.

use structsparse::models::{self, PathSpec, Problem};
use structsparse::norms::NormSpec;
use structsparse::solver::{LossKind, SolverConfig};
use structsparse::synth::{self, Scenario, SynthData, SynthSpec};

fn main() -> structsparse::Result<()> {
    let spec = SynthSpec { scenario: Scenario::Group, n: 100, p: 40, k: 2, group_size: 5, sigma: 0.5, seed: 8, ..Default::default() };
    let SynthData::Regression { x, y, w_star, structure, .. } = synth::generate(&spec)? else { unreachable!() };
    let problem = Problem::new(x, y, LossKind::Square, NormSpec::Group { structure: structure.unwrap() }, 0.0)?.with_intercept(true);
    let cfg = SolverConfig::default();
    let grid = PathSpec { n_lambdas: 20, ratio: 1e-2, ..Default::default() };

    let path = models::regularization_path(&problem, &grid, &cfg)?;
    let cold = models::regularization_path(&problem, &PathSpec { warm_start: false, ..grid.clone() }, &cfg)?;
    println!("iterations: warm {} vs cold {}", path.total_iterations(), cold.total_iterations());

    let cv = models::cross_validate(&problem, &grid, 5, 0, &cfg)?;
    println!("{:>10} {:>8} {:>10} {:>8}", "lambda", "support", "cv mean", "cv sd");
    for (row, fit) in cv.table.iter().zip(path.fits()) {
        let mark = if row.lambda == cv.best_lambda { " <" } else { "" };
        println!("{:>10.4} {:>8} {:>10.4} {:>8.4}{mark}", row.lambda, fit.support.len(), row.mean, row.sd);
    }

    let hybrid = models::ols_hybrid(&problem, &path, 5, 0)?;
    let truth: Vec<usize> = (0..w_star.len()).filter(|&j| w_star[j] != 0.0).collect();
    println!("true support    {truth:?}");
    println!("ols hybrid pick {:?} (λ = {:.4})", hybrid.fit.support, hybrid.fit.lambda);
    Ok(())
}
