//! Every proximal operator on one input, then the oracle suite.

use structsparse::groups::{make_intervals, make_partition, make_tree_groups, InnerNorm, TreeStructure};
use structsparse::prox;
use structsparse::proxcheck::{run_suite, SuiteOptions};

fn show(name: &str, v: &[f64]) {
    let body: Vec<String> = v.iter().map(|x| format!("{x:+.3}")).collect();
    println!("{name:<18} [{}]", body.join(", "));
}

fn main() -> structsparse::Result<()> {
    let u = [1.2, -0.3, 0.8, 0.1, -1.5, 0.4];
    let t = 0.5;
    show("input", &u);
    show("soft threshold", &prox::prox_l1(&u, t));
    let blocks = make_partition(6, vec![vec![0, 1, 2], vec![3, 4, 5]])?;
    show("group l2", &prox::prox_group(&u, &blocks, t)?);
    show("group linf", &prox::prox_group_linf(&u, &blocks.clone().with_q(InnerNorm::Linf), t)?);
    let tree = TreeStructure::new(vec![None, Some(0), Some(0), Some(1), Some(1), Some(2)])?;
    // nested and overlapping families stack several weights on each coordinate
    let ts = 0.1;
    show("tree t=0.1", &prox::prox_tree(&u, &make_tree_groups(&tree)?, ts)?);
    show("overlap t=0.1", &prox::prox_overlap(&u, &make_intervals(6)?, ts, 1e-12)?);
    show("latent t=0.1", &prox::prox_latent(&u, &make_intervals(6)?, ts, 1e-12)?);
    show("total variation", &prox::prox_tv1d(&u, t));
    show("l1 ball r=1", &prox::project_l1_ball(&u, 1.0));
    show("simplex r=1", &prox::project_simplex(&u, 1.0));

    println!();
    for r in run_suite(&SuiteOptions { cases: 50, ..Default::default() })? {
        println!("{:<34} vs {:<38} {:.1e} {}", r.operator, r.oracle, r.max_deviation, if r.pass { "ok" } else { "FAIL" });
    }
    Ok(())
}
