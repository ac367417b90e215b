//! Distances between successive levels in a common embedding.

use std::sync::Arc;

use reslab::metrics::{common_embedding_gap, gh_vague_gap, hausdorff_distance, prohorov_distance, volume_profile, EmbeddedSpace};
use reslab::network::{build_fractal_graph, FractalScheme};
use reslab::resistance::resistance_matrix;

fn main() -> reslab::Result<()> {
    let scheme = FractalScheme::gasket();
    let top = 5;
    let g = build_fractal_graph(&scheme, top)?;
    let a = scheme.resistance_factor(top).unwrap();
    // a_n R_n restricted to V_m is a_m R_m, so the finest level embeds all others
    let ambient = Arc::new(resistance_matrix(&g.network)?.scaled(a).matrix().clone());
    let root = g.network.root();
    let level_space = |n: usize| -> reslab::Result<EmbeddedSpace> {
        let v = g.level_vertices(n)?;
        let r = v.iter().position(|x| *x == root).unwrap();
        EmbeddedSpace::new(ambient.clone(), v.clone(), vec![scheme.mass_factor(n); v.len()], r)
    };
    let mut prev = level_space(1)?;
    for n in 2..=top {
        let cur = level_space(n)?;
        println!(
            "V_{} -> V_{n}: Hausdorff {:.4}, Prohorov {:.4}, gap {:.4}, GH-vague {:.4}",
            n - 1,
            hausdorff_distance(&prev, &cur)?,
            prohorov_distance(&prev, &cur)?,
            common_embedding_gap(&prev, &cur)?,
            gh_vague_gap(&prev, &cur, &[3.0])?
        );
        prev = cur;
    }
    let radii: Vec<f64> = (0..6).map(|k| 0.05 * 2f64.powi(k)).collect();
    let v = volume_profile(&prev, &[0, 1, 2], &radii)?;
    println!("volume profile {:?}", v.profile.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());
    println!("doubling constant {:.3}, spread across centers {:.3}", v.doubling, v.spread);
    Ok(())
}
