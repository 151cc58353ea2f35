//! Hierarchical kernel learning over variable subsets: the selected nodes
//! always form a subset-closed family.

use structsparse::hkl::{self, HklOptions, KernelSpec, SubsetDag};
use structsparse::models;
use structsparse::solver::SolverConfig;
use structsparse::synth::{self, Scenario, SynthData, SynthSpec};

fn main() -> structsparse::Result<()> {
    let spec = SynthSpec { scenario: Scenario::Hkl, n: 200, p: 5, sigma: 0.1, seed: 2, ..Default::default() };
    let SynthData::Hkl { x, y, true_subsets } = synth::generate(&spec)? else { unreachable!() };
    let dag = SubsetDag::new(5, 2, 2)?;
    let kernel = KernelSpec::polynomials(2);
    let options = HklOptions::default();
    let features = hkl::build_features(x.view(), &dag, &kernel)?;
    let lmax = models::lambda_max(&hkl::hkl_problem(&features, y.view(), &dag, 0.0, &options)?)?;
    println!("planted hull {true_subsets:?}; {} nodes, {} features", dag.len(), dag.total_dim());
    for frac in [0.5, 0.2, 0.05] {
        let fit = hkl::fit_hkl(x.view(), y.view(), &dag, &kernel, frac * lmax, &options, &SolverConfig::default())?;
        println!("λ = {:.3}·λmax: {:?} (subset-closed {})", frac, fit.selected_subsets(), fit.report.hull_closed);
    }
    Ok(())
}
