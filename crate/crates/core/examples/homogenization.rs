//! The renormalization map of a nested fractal: fixed point, harmonic
//! matrices and random iterates with heavy-tailed cells.

use reslab::environments::{ConductanceLaw, SamplingMode};
use reslab::homogenize::{fixed_point, harmonic_matrices, random_iterate, QMatrix};
use reslab::network::FractalScheme;

fn main() -> reslab::Result<()> {
    for scheme in [FractalScheme::gasket(), FractalScheme::vicsek()] {
        let k = scheme.boundary_count;
        let fp = fixed_point(&scheme, &QMatrix::uniform(k, 1.0)?, 1e-12, 1000)?;
        println!("{}: rho = {:.6} after {} iterations", scheme.name, fp.rho, fp.iterations);
        let a = harmonic_matrices(&scheme, &fp.q)?;
        println!("  {} harmonic matrices, first row of A_1: {:?}", a.len(), a.get(1).row(0).iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    }

    let scheme = FractalScheme::gasket();
    let law = ConductanceLaw::pareto(0.5);
    let mut previous: Option<QMatrix> = None;
    for n in 1..=4 {
        let it = random_iterate(&scheme, n, &law, SamplingMode::PerCell, 5.0 / 3.0, 200, n as u64)?;
        let drift = previous.as_ref().map(|p| it.mean.distance(p));
        let var = it.variances().into_iter().fold(0.0, f64::max);
        println!("level {n}: mean conductances {:?}, drift {drift:?}, max variance {var:.3}", it.mean.conductances().iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>());
        previous = Some(it.mean);
    }
    Ok(())
}
