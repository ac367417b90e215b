//! Effective resistance, traces and the commute-time identity on the gasket.

use reslab::network::{build_fractal_graph, FractalScheme};
use reslab::resistance::{effective_resistance, exact_commute_time, green_killed, resistance_matrix, schur_trace, HeatKernel};

fn main() -> reslab::Result<()> {
    let scheme = FractalScheme::gasket();
    let g = build_fractal_graph(&scheme, 3)?;
    let net = &g.network;
    let corners = g.boundary_vertices();

    let r = resistance_matrix(net)?;
    let a3 = scheme.resistance_factor(3).unwrap();
    println!("corner resistance R_3 = {:.6}, a_3 R_3 = {:.6}", r.get(corners[0], corners[1]), a3 * r.get(corners[0], corners[1]));

    // the trace onto the corners is a triangle with equal conductances
    let t = schur_trace(net, &corners, &[1.0; 3])?;
    for e in t.network.edges() {
        println!("  traced edge {}-{}: conductance {:.6}", e.u, e.v, e.conductance);
    }
    println!("  traced R = {:.6}", effective_resistance(&t.network, 0, 1)?);

    let (x, y) = (corners[0], corners[2]);
    let (to_y, to_x) = exact_commute_time(net, x, y)?;
    println!("commute time {:.4} = R mu(F) = {:.4}", to_y + to_x, r.get(x, y) * net.total_mass());

    let gk = green_killed(net, net.root())?;
    let (u, v) = (5, 17);
    let lhs = 2.0 * gk[(u, v)];
    let rhs = r.get(net.root(), u) + r.get(net.root(), v) - r.get(u, v);
    println!("2 g(x,y) = {lhs:.6}, R(o,x) + R(o,y) - R(x,y) = {rhs:.6}");

    let hk = HeatKernel::new(net)?;
    for t in [0.5, 5.0, 50.0] {
        let p = hk.distribution(net.root(), t)?;
        println!("P(X_{t} = root) = {:.4}", p[net.root()]);
    }
    Ok(())
}
