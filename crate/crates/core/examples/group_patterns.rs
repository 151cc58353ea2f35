//! Zero patterns induced by different group families: intervals give
//! contiguous supports, rectangles give rectangular supports, trees give
//! rooted subtrees.

use structsparse::groups::{make_intervals, make_rectangles, make_tree_groups, GridShape};
use structsparse::models::{self, Problem};
use structsparse::norms::NormSpec;
use structsparse::solver::{LossKind, SolverConfig};
use structsparse::synth::{self, Rect, Scenario, SynthData, SynthSpec};

fn fit_group(x: ndarray::Array2<f64>, y: ndarray::Array1<f64>, structure: structsparse::groups::GroupStructure, frac: f64) -> structsparse::Result<Vec<f64>> {
    let pr = Problem::new(x, y, LossKind::Square, NormSpec::Group { structure }, 0.0)?;
    let lam = frac * models::lambda_max(&pr)?;
    Ok(models::fit(&pr.with_lambda(lam), &SolverConfig::default())?.w)
}

fn mask(w: &[f64]) -> String {
    w.iter().map(|v| if v.abs() > 1e-8 { '#' } else { '.' }).collect()
}

fn main() -> structsparse::Result<()> {
    let spec = SynthSpec { scenario: Scenario::Interval, n: 60, p: 30, k: 8, sigma: 0.2, seed: 4, ..Default::default() };
    let SynthData::Regression { x, y, w_star, .. } = synth::generate(&spec)? else { unreachable!() };
    let w = fit_group(x, y, make_intervals(30)?, 0.1)?;
    println!("intervals  truth {}\n           fit   {}", mask(&w_star), mask(&w));

    let spec = SynthSpec {
        scenario: Scenario::Rectangle,
        n: 150,
        rows: 8,
        cols: 8,
        sigma: 0.2,
        rect: Some(Rect { r0: 2, r1: 4, c0: 1, c1: 5 }),
        seed: 5,
        ..Default::default()
    };
    let SynthData::Regression { x, y, .. } = synth::generate(&spec)? else { unreachable!() };
    let w = fit_group(x, y, make_rectangles(GridShape::new(8, 8)?, false)?, 0.1)?;
    println!("rectangles");
    for r in 0..8 {
        println!("  {}", mask(&w[r * 8..r * 8 + 8]));
    }

    let spec = SynthSpec { scenario: Scenario::Tree, n: 60, p: 15, k: 5, sigma: 0.1, seed: 6, ..Default::default() };
    let SynthData::Regression { x, y, structure, .. } = synth::generate(&spec)? else { unreachable!() };
    let tree = structure.as_ref().and_then(|s| s.tree()).cloned().expect("tree scenario");
    let w = fit_group(x, y, make_tree_groups(&tree)?, 0.2)?;
    let sel: Vec<bool> = w.iter().map(|v| v.abs() > 1e-8).collect();
    println!("tree       parents {:?}", tree.parents());
    println!("           fit     {}  rooted subtree: {}", mask(&w), tree.is_rooted_subtree(&sel));
    Ok(())
}
