//! Multiple kernel learning with explicit feature blocks: a group Lasso
//! over sources picks the informative ones.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use structsparse::hkl;
use structsparse::models;
use structsparse::solver::SolverConfig;

fn main() -> structsparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 120;
    let raw: Array1<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    // sources: linear, quadratic, sinusoidal features of the same input, and two noise blocks
    let blocks: Vec<Array2<f64>> = vec![
        Array2::from_shape_fn((n, 1), |(i, _)| raw[i]),
        Array2::from_shape_fn((n, 2), |(i, k)| raw[i].powi(k as i32 + 2)),
        Array2::from_shape_fn((n, 2), |(i, k)| if k == 0 { raw[i].sin() } else { raw[i].cos() }),
        Array2::from_shape_simple_fn((n, 3), || rng.sample::<f64, _>(StandardNormal)),
        Array2::from_shape_simple_fn((n, 3), || rng.sample::<f64, _>(StandardNormal)),
    ];
    let y: Array1<f64> = (0..n).map(|i| 1.5 * raw[i].sin() + 0.5 * raw[i] + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
    let lmax = models::lambda_max(&hkl::mkl_problem(&blocks, y.view(), 0.0)?)?;
    let fit = hkl::mkl_fit(&blocks, y.view(), 0.1 * lmax, &SolverConfig::default())?;
    let names = ["linear", "quadratic", "sinusoid", "noise a", "noise b"];
    for (k, norm) in fit.source_norms.iter().enumerate() {
        println!("{:<10} ‖w‖ = {norm:.4}", names[k]);
    }
    println!("selected sources: {:?}", fit.selected.iter().map(|&k| names[k]).collect::<Vec<_>>());
    Ok(())
}
