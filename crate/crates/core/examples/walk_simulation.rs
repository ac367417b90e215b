//! Exact simulation, local times and time changes.

use reslab::network::{build_fractal_graph, FractalScheme};
use reslab::rng::stream;
use reslab::simulate::{additive_functional, csrw, local_times, simulate_vsrw, time_change};

fn main() -> reslab::Result<()> {
    let g = build_fractal_graph(&FractalScheme::gasket(), 2)?;
    let net = &g.network;
    let mut rng = stream(42, 0);

    let path = simulate_vsrw(net, net.root(), 50.0, &mut rng)?;
    println!("VSRW: {} jumps up to T = 50, ends at {}", path.jump_count(), path.states().last().unwrap());

    let ltf = local_times(&path, net)?;
    let total: f64 = ltf.at(50.0)?.iter().zip(net.measure()).map(|(l, m)| l * m).sum();
    println!("sum_x L_T(x) mu(x) = {total:.6} (equals T)");

    // speed up the walk on the corners tenfold
    let mut nu = vec![1.0; net.vertex_count()];
    for c in g.boundary_vertices() {
        nu[c] = 10.0;
    }
    let a = additive_functional(&ltf, &nu)?;
    println!("A_T = {:.3}, inverse at 10: {:?}", a.total(), a.inverse(10.0));
    let changed = time_change(&path, &ltf, &nu, None)?;
    println!("time-changed path: {} jumps, horizon {:.3}", changed.trajectory.jump_count(), changed.trajectory.horizon());

    let c = csrw(net, net.root(), 50.0, &mut rng)?;
    println!("CSRW: {} jumps (degree 4 away from the corners)", c.jump_count());
    if let Some(t) = path.hitting_time(g.boundary_vertices()[1]) {
        println!("first visit to the second corner at t = {t:.3}");
    }
    Ok(())
}
