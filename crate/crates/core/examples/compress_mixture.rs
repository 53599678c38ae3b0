//! Compresses 500 samples from a two-component mixture down to 12 points,
//! once picking one point per iteration and once picking three.
//!
//! cargo run --release -p quant-core --example compress_mixture

use quant_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mixture = GaussianMixture::isotropic(&[vec![-2.0, 0.0], vec![1.5, 1.0]], 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let candidates = CandidateSet::new(mixture.sample(500, &mut rng))?;
    let ell = median_heuristic(candidates.points(), 1000, 7)?;
    let target = TargetModel::mixture(mixture, Mode::Mmd);
    let ctx = Discrepancy::new(&candidates, &target, KernelSpec::squared_exponential(ell)?)?;
    println!("length-scale {ell:.3}");

    for (algorithm, m, s) in [(Algorithm::Myopic, 12, 1), (Algorithm::Nonmyopic, 4, 3)] {
        let result = select(&ctx, &SelectionConfig::new(algorithm, m, s))?;
        let total_ms: f64 = result.timings_ms.iter().sum();
        println!("\n{} (s = {s}), {total_ms:.1} ms", algorithm.name());
        for (i, (row, mmd)) in result.pi.iter().zip(&result.trace).enumerate() {
            println!("  {:>2}  {:<14} MMD^2 {mmd:.4e}", i + 1, format!("{row:?}"));
        }
    }
    Ok(())
}
