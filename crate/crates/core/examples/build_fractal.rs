//! Level-n graphs of the built-in fractal schemes and their file formats.
//!
//! `cargo run --example build_fractal -- vicsek 3`

use reslab::network::{build_fractal_graph, read_network, write_network, FractalScheme, NetworkFormat};

fn main() -> reslab::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "gasket".into());
    let level: usize = args.next().map(|s| s.parse().expect("level is an integer")).unwrap_or(3);
    let scheme = FractalScheme::by_name(&name)?;

    println!("{name}: {} maps, {} boundary points", scheme.map_count(), scheme.boundary_count);
    for n in 0..=level {
        let g = build_fractal_graph(&scheme, n)?;
        println!(
            "  level {n}: {:6} vertices {:6} edges, tree: {}, b_n = {:.3e}",
            g.network.vertex_count(),
            g.network.edge_count(),
            g.network.is_tree(),
            scheme.mass_factor(n)
        );
    }

    let g = build_fractal_graph(&scheme, level)?;
    let mut text = Vec::new();
    write_network(&g.network, NetworkFormat::Text, &mut text)?;
    let back = read_network(NetworkFormat::Text, text.as_slice())?;
    assert_eq!(back.edges(), g.network.edges());
    println!("text form: {} bytes, round trip ok", text.len());
    println!("boundary vertices {:?}, root {}", g.boundary_vertices(), g.network.root());
    Ok(())
}
