//! Sparse PCA as dictionary learning: codes in the ℓ2 ball, ℓ1- or
//! interval-penalized atoms, compared against plain PCA.

use structsparse::factorization::{self, FactorizationConfig};
use structsparse::groups::make_intervals;
use structsparse::linalg;
use structsparse::norms::NormSpec;
use structsparse::synth::{self, Scenario, SynthData, SynthSpec};

fn contiguous(d: &[f64]) -> bool {
    let idx: Vec<usize> = (0..d.len()).filter(|&j| d[j].abs() > 1e-8).collect();
    idx.windows(2).all(|w| w[1] == w[0] + 1)
}

fn main() -> structsparse::Result<()> {
    let spec = SynthSpec { scenario: Scenario::Dict, n: 200, p: 24, k: 3, sigma: 0.02, seed: 1, ..Default::default() };
    let SynthData::Dictionary { x, .. } = synth::generate(&spec)? else { unreachable!() };
    let top = linalg::svd(x.view());
    println!("top singular values {:?}", top.s[..4].iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());

    // interval groups stack many weights on each coordinate, hence the smaller λ
    let runs = [("l1", NormSpec::L1, 1e-4), ("intervals", NormSpec::Group { structure: make_intervals(24)? }, 3e-6)];
    for (name, omega_d, lambda) in runs {
        let cfg = FactorizationConfig {
            atoms: 3,
            omega_a: Some(NormSpec::l2(3)?),
            omega_d: Some(omega_d),
            lambda,
            outer_iters: 200,
            seed: 1,
            ..Default::default()
        };
        let f = factorization::fit_factorization(x.view(), &cfg)?;
        let report = factorization::constraint_report(&f)?;
        println!("{name}: objective {:.6} after {} alternations, constraints pass {}", f.objective(), f.outer_iterations, report.pass);
        for k in 0..3 {
            let col = f.d.column(k).to_vec();
            let nnz = col.iter().filter(|v| v.abs() > 1e-8).count();
            println!("  atom {k}: {nnz:>2} nonzeros, contiguous {}", contiguous(&col));
        }
    }
    Ok(())
}
