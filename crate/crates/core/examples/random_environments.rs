//! Random conductances, trap landscapes, free fields and Poisson measures.

use reslab::environments::{
    fin_laplace_transform, fin_measure, hill_estimator, liouville_measure, mean_inverse, sample_conductances,
    trap_landscape, ConductanceLaw, GffSampler, SamplingMode,
};
use reslab::network::{build_fractal_graph, FractalScheme};
use reslab::resistance::effective_resistance;
use reslab::rng::stream;

fn main() -> reslab::Result<()> {
    let g = build_fractal_graph(&FractalScheme::gasket(), 3)?;
    let net = &g.network;
    let mut rng = stream(7, 0);

    let law = ConductanceLaw::pareto(0.5);
    let env = sample_conductances(net, &law, SamplingMode::PerCell, &mut rng)?;
    let max = env.edges().iter().map(|e| e.conductance).fold(0.0, f64::max);
    println!("per-cell pareto(0.5) conductances: largest {max:.1}");
    let (rho, se) = mean_inverse(&law, 100_000, &mut rng)?;
    println!("E[1/w] = {rho:.4} +- {se:.4} (exact 1/3)");

    let traps = trap_landscape(net, 0.5, &mut rng)?;
    println!("trap landscape: Hill estimate of alpha {:.3}", hill_estimator(&traps, 10)?);

    let sampler = GffSampler::new(net)?;
    let (x, y) = (3, 20);
    let mut acc = 0.0;
    let n = 20_000;
    for _ in 0..n {
        let s = sampler.sample(&mut rng);
        acc += (s.values[x] - s.values[y]).powi(2);
    }
    println!("Var(gamma(x) - gamma(y)) = {:.4}, R(x,y) = {:.4}", acc / n as f64, effective_resistance(net, x, y)?);
    let nu = liouville_measure(&sampler.sample(&mut rng), 0.5, net.measure())?;
    println!("one Liouville measure: total {:.3} (mean {})", nu.iter().sum::<f64>(), net.total_mass());

    let base = vec![1.0 / net.vertex_count() as f64; net.vertex_count()];
    let m = fin_measure(&base, 0.5, 1e-8, &mut rng)?;
    println!("FIN measure: {} atoms, total {:.3}", m.atoms.len(), m.total());
    println!("E exp(-FIN(F)) = {:.4}", fin_laplace_transform(1.0, 0.5, 1.0));
    Ok(())
}
