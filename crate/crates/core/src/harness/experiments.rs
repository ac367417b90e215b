use std::collections::VecDeque;

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use super::{ExperimentConfig, ExperimentKind, MarginalMethod, Report, ScalingRule, Table, Walk};
use crate::environments::{
    degree_measure, liouville_measure, mean_inverse, sample_conductances, trap_landscape, ConductanceLaw, GffSampler,
    SamplingMode,
};
use crate::error::{bail, Error, Result};
use crate::homogenize::{fixed_point, random_iterate, QMatrix};
use crate::metrics::{gh_vague_gap, ks_distance, ks_distance_weighted, local_time_modulus, volume_profile, EmbeddedSpace};
use crate::network::{build_fractal_graph, FractalGraph, FractalScheme, ResistanceNetwork};
use crate::resistance::{green_killed, resistance_matrix, GroundedSolver, HeatKernel};
use crate::rng::{stream, SimRng};
use crate::simulate::{local_times, JumpChain, EVENT_CAP};

/// Coordinates on which rescaled marginals are compared.
pub const COORDINATES: [&str; 3] = ["x", "y", "radius"];

/// Replicas handled per parallel batch; bounds the memory of a level.
const BATCH: usize = 512;

/// Draws used for scaling constants estimated from the law.
const CONSTANT_SAMPLES: usize = 200_000;

/// Replica stream for `(level, replica)`; disjoint from the constant-estimation streams.
fn replica_stream(seed: u64, level: usize, replica: usize) -> SimRng {
    stream(seed, ((level as u64 + 1) << 40) | replica as u64)
}

fn auxiliary_stream(seed: u64, purpose: u64) -> SimRng {
    stream(seed, purpose)
}

/// Deterministic parts of one level.
struct Level {
    n: usize,
    graph: FractalGraph,
    /// Columns `x`, `y`, `radius` per vertex; radius is `a_n R_n(root, .)`.
    coordinates: Vec<Vec<f64>>,
}

impl Level {
    fn net(&self) -> &ResistanceNetwork {
        &self.graph.network
    }

    fn root(&self) -> usize {
        self.graph.network.root()
    }
}

/// `R(root, x)` for every `x`: path sums on trees, the killed Green function otherwise.
fn root_resistances(net: &ResistanceNetwork) -> Result<Vec<f64>> {
    let n = net.vertex_count();
    let root = net.root();
    if net.is_tree() {
        let mut r = vec![f64::NAN; n];
        r[root] = 0.0;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &(y, c) in net.neighbors(x) {
                if r[y].is_nan() {
                    r[y] = r[x] + 1.0 / c;
                    queue.push_back(y);
                }
            }
        }
        return Ok(r);
    }
    let g = green_killed(net, root)?;
    Ok((0..n).map(|x| g[(x, x)]).collect())
}

fn prepare_level(scheme: &FractalScheme, n: usize) -> Result<Level> {
    let graph = build_fractal_graph(scheme, n)?;
    let a = scheme.resistance_factor(n).ok_or_else(|| Error::Config(format!("scheme {} has no resistance scale", scheme.name)))?;
    let coords = graph.network.coords().ok_or_else(|| Error::InvalidNetwork("fractal graph without coordinates".into()))?;
    let r = root_resistances(&graph.network)?;
    let coordinates = (0..graph.network.vertex_count())
        .map(|x| vec![coords[x][0], coords[x].get(1).copied().unwrap_or(0.0), a * r[x]])
        .collect();
    Ok(Level { n, graph, coordinates })
}

/// A walk run on each sampled environment: which speed measure, which clock.
struct WalkSpec {
    name: String,
    rule: ScalingRule,
    speed: fn(&Environment) -> Vec<f64>,
}

/// One sampled environment on one level.
struct Environment {
    net: ResistanceNetwork,
    /// Speed measure for the BTM and LBM walks; unused by the conductance walks.
    measure: Vec<f64>,
}

fn environment_measure(e: &Environment) -> Vec<f64> {
    e.measure.clone()
}

fn counting_measure(e: &Environment) -> Vec<f64> {
    e.net.measure().to_vec()
}

fn conductance_degree(e: &Environment) -> Vec<f64> {
    degree_measure(&e.net)
}

/// Time-t laws of every walk from the root: `[walk][time][vertex]`.
fn marginals(env: &Environment, root: usize, walks: &[WalkSpec], times: &[Vec<f64>], method: MarginalMethod, rng: &mut SimRng) -> Result<Vec<Vec<Vec<f64>>>> {
    walks
        .iter()
        .zip(times)
        .map(|(w, ts)| {
            let speed = (w.speed)(env);
            match method {
                MarginalMethod::Exact => {
                    let hk = HeatKernel::with_measure(&env.net, &speed)?;
                    ts.iter().map(|t| hk.distribution(root, *t)).collect()
                }
                MarginalMethod::Simulate => {
                    let chain = JumpChain::new(&env.net, &speed)?;
                    let positions = positions_at(&chain, root, ts, rng)?;
                    Ok(positions
                        .into_iter()
                        .map(|x| {
                            let mut p = vec![0.0; env.net.vertex_count()];
                            p[x] = 1.0;
                            p
                        })
                        .collect())
                }
            }
        })
        .collect()
}

/// States of one path at each of the (ascending) `times`.
fn positions_at(chain: &JumpChain, start: usize, times: &[f64], rng: &mut SimRng) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut x) = (0.0, start);
    let mut next = 0;
    let mut events = 0;
    while next < times.len() {
        let (hold, y) = chain.step(x, rng);
        while next < times.len() && t + hold > times[next] {
            out.push(x);
            next += 1;
        }
        t += hold;
        x = y;
        events += 1;
        if events > EVENT_CAP {
            return Err(Error::EventCap(EVENT_CAP));
        }
    }
    Ok(out)
}

/// Per-level accumulators of the annealed laws, split by replica parity.
struct LevelLaws {
    /// `[walk][time][parity][vertex]`, sums over replicas.
    sums: Vec<Vec<[Vec<f64>; 2]>>,
    counts: [usize; 2],
    /// Kept only for quenched comparisons: `[replica][walk][time][vertex]`.
    per_replica: Vec<Vec<Vec<Vec<f64>>>>,
}

impl LevelLaws {
    fn mixture(&self, w: usize, t: usize) -> Vec<f64> {
        let [a, b] = &self.sums[w][t];
        let total = (self.counts[0] + self.counts[1]) as f64;
        a.iter().zip(b).map(|(x, y)| (x + y) / total).collect()
    }

    fn half(&self, w: usize, t: usize, parity: usize) -> Vec<f64> {
        let c = self.counts[parity].max(1) as f64;
        self.sums[w][t][parity].iter().map(|x| x / c).collect()
    }
}

fn atoms(values: &[Vec<f64>], coordinate: usize, law: &[f64]) -> Vec<(f64, f64)> {
    values.iter().zip(law).map(|(v, p)| (v[coordinate], *p)).collect()
}

/// Runs `sample` for every replica of a level in parallel and accumulates the
/// laws in replica order.
fn level_laws<F>(config: &ExperimentConfig, level: &Level, walks: &[WalkSpec], sample: F) -> Result<LevelLaws>
where
    F: Fn(&mut SimRng) -> Result<Environment> + Sync,
{
    let times: Vec<Vec<f64>> = walks
        .iter()
        .map(|w| config.times.iter().map(|t| w.rule.time(level.n, *t)).collect())
        .collect();
    let v = level.net().vertex_count();
    let mut laws = LevelLaws {
        sums: walks.iter().map(|_| config.times.iter().map(|_| [vec![0.0; v], vec![0.0; v]]).collect()).collect(),
        counts: [0, 0],
        per_replica: Vec::new(),
    };
    for start in (0..config.replicas).step_by(BATCH) {
        let end = (start + BATCH).min(config.replicas);
        let batch: Vec<Vec<Vec<Vec<f64>>>> = (start..end)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_stream(config.seed, level.n, r);
                let env = sample(&mut rng)?;
                marginals(&env, level.root(), walks, &times, config.method, &mut rng)
            })
            .collect::<Result<_>>()?;
        for (i, m) in batch.into_iter().enumerate() {
            let parity = (start + i) % 2;
            laws.counts[parity] += 1;
            for (w, per_time) in m.iter().enumerate() {
                for (t, p) in per_time.iter().enumerate() {
                    for (s, q) in laws.sums[w][t][parity].iter_mut().zip(p) {
                        *s += q;
                    }
                }
            }
            if config.quenched {
                laws.per_replica.push(m);
            }
        }
    }
    log::info!("level {} done: {} replicas", level.n, config.replicas);
    Ok(laws)
}

/// Cross-level KS tables for all walks; records checks and summaries.
fn compare_levels(report: &mut Report, levels: &[Level], laws: &[LevelLaws], walks: &[WalkSpec]) -> Result<()> {
    let names: Vec<&str> = walks.iter().map(|w| w.name.as_str()).collect();
    let mut table = Table::new("ks", &["walk", "time", "coordinate", "level_from", "level_to", "ks", "noise"])
        .with_categories("walk", &names)
        .with_categories("coordinate", &COORDINATES)
        .with_plot("level_to", "ks", &["walk", "coordinate", "time"]);
    let quenched = report.config.quenched;
    let mut qtable = Table::new("ks_quenched", &["walk", "time", "coordinate", "level_from", "level_to", "replica", "ks"])
        .with_categories("walk", &names)
        .with_categories("coordinate", &COORDINATES);
    let times = report.config.times.clone();
    for (w, walk) in walks.iter().enumerate() {
        let mut decreasing = true;
        let mut quenched_decreasing = true;
        for (ti, t) in times.iter().enumerate() {
            for (c, _) in COORDINATES.iter().enumerate() {
                let mut previous = f64::INFINITY;
                let mut previous_q = f64::INFINITY;
                for k in 1..levels.len() {
                    let (lo, hi) = (&levels[k - 1], &levels[k]);
                    let ks = ks_distance_weighted(
                        &atoms(&lo.coordinates, c, &laws[k - 1].mixture(w, ti)),
                        &atoms(&hi.coordinates, c, &laws[k].mixture(w, ti)),
                    )?;
                    // split-half distance within the finer level: the Monte Carlo floor
                    let noise = if laws[k].counts[1] > 0 {
                        ks_distance_weighted(
                            &atoms(&hi.coordinates, c, &laws[k].half(w, ti, 0)),
                            &atoms(&hi.coordinates, c, &laws[k].half(w, ti, 1)),
                        )? / 2.0
                    } else {
                        f64::NAN
                    };
                    table.push(vec![w as f64, *t, c as f64, lo.n as f64, hi.n as f64, ks, noise]);
                    decreasing &= ks < previous;
                    previous = ks;
                    if quenched {
                        let mut mean = 0.0;
                        let count = laws[k].per_replica.len().min(laws[k - 1].per_replica.len());
                        for r in 0..count {
                            let q = ks_distance_weighted(
                                &atoms(&lo.coordinates, c, &laws[k - 1].per_replica[r][w][ti]),
                                &atoms(&hi.coordinates, c, &laws[k].per_replica[r][w][ti]),
                            )?;
                            qtable.push(vec![w as f64, *t, c as f64, lo.n as f64, hi.n as f64, r as f64, q]);
                            mean += q / count as f64;
                        }
                        quenched_decreasing &= mean < previous_q;
                        previous_q = mean;
                    }
                }
                report.summary.insert(format!("ks_last/{}/t={t}/{}", walk.name, COORDINATES[c]), previous);
            }
        }
        report.checks.insert(format!("ks_decreasing/{}", walk.name), decreasing);
        if quenched {
            report.checks.insert(format!("ks_quenched_mean_decreasing/{}", walk.name), quenched_decreasing);
        }
    }
    report.tables.push(table);
    if quenched {
        report.tables.push(qtable);
    }
    Ok(())
}

fn prepare_levels(config: &ExperimentConfig, scheme: &FractalScheme) -> Result<Vec<Level>> {
    config.levels.iter().map(|&n| prepare_level(scheme, n)).collect()
}

/// Runs whichever experiment the configuration names.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let report = match config.experiment {
        ExperimentKind::Btm => run_btm(config),
        ExperimentKind::Lbm => run_lbm(config),
        ExperimentKind::RcmTree | ExperimentKind::RcmFractal => run_rcm(config),
        ExperimentKind::Homogenize => run_homogenize(config),
        ExperimentKind::Diagnostics => run_diagnostics(config),
    }?;
    report.seal()
}

/// Bouchaud trap model: unit conductances, i.i.d. pareto trap depths as speed measure.
///
/// For an index above 1 the traps have finite mean and the clock is that of
/// the variable-speed walk multiplied by the mean depth.
pub fn run_btm(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let scheme = config.scheme()?;
    let alpha = config.alpha.expect("validated");
    let mut report = Report::new(config.clone());
    let rule = if alpha < 1.0 {
        ScalingRule::btm(&scheme, alpha)?
    } else {
        let mean = alpha / (alpha - 1.0);
        report.notes.push(format!("finite-mean traps: clock t / (a_n b_n) times the mean depth {mean}"));
        ScalingRule::vsrw(&scheme)?.with_constant(mean, None, false)
    };
    let walks = vec![WalkSpec { name: "btm".into(), rule: rule.clone(), speed: environment_measure }];
    report.scaling.push(rule);
    let levels = prepare_levels(config, &scheme)?;
    let laws = levels
        .iter()
        .map(|level| {
            level_laws(config, level, &walks, |rng| {
                let measure = if alpha < 1.0 {
                    trap_landscape(level.net(), alpha, rng)?
                } else {
                    let law = ConductanceLaw::pareto(alpha);
                    (0..level.net().vertex_count()).map(|_| law.sample(rng)).collect()
                };
                Ok(Environment { net: level.net().clone(), measure })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    compare_levels(&mut report, &levels, &laws, &walks)?;
    Ok(report)
}

/// Liouville Brownian motion: the walk with speed measure `exp(kappa gamma - ...)`.
///
/// The field is normalized to the limit, so the coupling on level n is
/// `kappa * a_n^(1/2)`. Also tabulates `a_n^(1/2) max gamma`.
pub fn run_lbm(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let scheme = config.scheme()?;
    let kappa = config.kappa.unwrap_or(0.0);
    let mut report = Report::new(config.clone());
    let rule = ScalingRule::lbm(&scheme)?;
    let walks = vec![WalkSpec { name: "lbm".into(), rule: rule.clone(), speed: environment_measure }];
    report.scaling.push(rule);
    let levels = prepare_levels(config, &scheme)?;
    let mut sup_table = Table::new("sup_gff", &["level", "mean", "sd", "q05", "q50", "q95", "ks_to_previous"])
        .with_plot("level", "q50", &[]);
    let mut previous: Option<Vec<f64>> = None;
    let mut laws = Vec::new();
    for level in &levels {
        let a = scheme.resistance_factor(level.n).expect("validated");
        let sampler = GffSampler::new(level.net())?;
        let base = level.net().measure().to_vec();
        let coupling = kappa * a.sqrt();
        laws.push(level_laws(config, level, &walks, |rng| {
            let gff = sampler.sample(rng);
            let measure = liouville_measure(&gff, coupling, &base)?;
            Ok(Environment { net: level.net().clone(), measure })
        })?);
        let mut sups: Vec<f64> = (0..config.replicas)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_stream(config.seed, level.n, r);
                a.sqrt() * sampler.sample(&mut rng).max()
            })
            .collect();
        sups.sort_by(f64::total_cmp);
        let (mean, sd) = mean_sd(&sups);
        let ks = match &previous {
            Some(p) => ks_distance(p, &sups)?,
            None => f64::NAN,
        };
        sup_table.push(vec![level.n as f64, mean, sd, quantile(&sups, 0.05), quantile(&sups, 0.5), quantile(&sups, 0.95), ks]);
        previous = Some(sups);
    }
    compare_levels(&mut report, &levels, &laws, &walks)?;
    report.tables.push(sup_table);
    Ok(report)
}

/// Random conductance model on trees (`rcm_tree`) or fractal cell structures (`rcm_fractal`).
pub fn run_rcm(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let scheme = config.scheme()?;
    let law = config.law()?;
    let tree = config.experiment == ExperimentKind::RcmTree;
    let mode = config.mode.unwrap_or(if tree { SamplingMode::PerEdge } else { SamplingMode::PerCell });
    let top = *config.levels.last().expect("validated");
    let mut report = Report::new(config.clone());

    let mut walks = Vec::new();
    let rho = if tree {
        let (rho, se) = mean_inverse(&law, CONSTANT_SAMPLES, &mut auxiliary_stream(config.seed, 1))?;
        report.summary.insert("rho".into(), rho);
        report.summary.insert("rho_se".into(), se);
        report.notes.push(format!("rho = E[1/w] estimated from {CONSTANT_SAMPLES} draws"));
        Some((rho, se))
    } else {
        None
    };
    for walk in &config.walks {
        let spec = match (walk, rho) {
            (Walk::Vsrw, Some((rho, se))) => {
                WalkSpec { name: "vsrw".into(), rule: ScalingRule::vsrw(&scheme)?.with_constant(rho, Some(se), true), speed: counting_measure }
            }
            (Walk::Vsrw, None) => WalkSpec { name: "vsrw".into(), rule: ScalingRule::vsrw(&scheme)?, speed: counting_measure },
            (Walk::Csrw, rho) => {
                let rule = csrw_rule(config, &scheme, &law, mode, top, rho, &mut report)?;
                WalkSpec { name: "csrw".into(), rule, speed: conductance_degree }
            }
        };
        report.scaling.push(spec.rule.clone());
        walks.push(spec);
    }

    let levels = prepare_levels(config, &scheme)?;
    let laws = levels
        .iter()
        .map(|level| {
            level_laws(config, level, &walks, |rng| {
                let net = sample_conductances(level.net(), &law, mode, rng)?;
                Ok(Environment { measure: Vec::new(), net })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    compare_levels(&mut report, &levels, &laws, &walks)?;
    resistance_homogenization(config, &levels, &law, mode, rho.map(|r| r.0), &mut report)?;
    Ok(report)
}

/// Clock of the constant-speed walk; its constant is estimated from the law.
fn csrw_rule(
    config: &ExperimentConfig,
    scheme: &FractalScheme,
    law: &ConductanceLaw,
    mode: SamplingMode,
    level: usize,
    rho: Option<(f64, f64)>,
    report: &mut Report,
) -> Result<ScalingRule> {
    if let Some(c) = config.time_constant {
        let base = match config.tail_index() {
            Some(a) if !law.has_finite_mean() => ScalingRule::csrw(scheme, a)?,
            _ => ScalingRule::vsrw(scheme)?,
        };
        report.notes.push(format!("csrw constant {c} taken from the configuration"));
        return Ok(ScalingRule { walk: "csrw".into(), ..base.with_constant(c, None, false) });
    }
    if law.has_finite_mean() {
        let rule = ScalingRule { walk: "csrw".into(), formula: "c t / (a_n b_n)".into(), ..ScalingRule::vsrw(scheme)? };
        let (c, se) = finite_mean_constant(config, scheme, law, mode, level, rho.is_some())?;
        report.notes.push(format!("finite-mean law: csrw constant {c} (estimate, se {se})"));
        return Ok(rule.with_constant(c, Some(se), true));
    }
    let alpha = config.tail_index().expect("validated");
    match rho {
        Some((rho, se)) => Ok(ScalingRule {
            formula: "2 rho t / (a_n b_n^(1/alpha))".into(),
            ..ScalingRule::csrw(scheme, alpha)?.with_constant(2.0 * rho, Some(2.0 * se), true)
        }),
        None => {
            let (c0, se) = estimate_c0(scheme, level, law, mode, alpha, config.replicas.max(2000), config.seed)?;
            report.summary.insert("c0_estimate".into(), c0);
            report.summary.insert("c0_se".into(), se);
            report.notes.push(format!("c0 = {c0} is a Monte Carlo estimate (se {se}) from level {level}"));
            Ok(ScalingRule::csrw(scheme, alpha)?.with_constant(c0, Some(se), true))
        }
    }
}

/// `2 E[w] |E_n| / |V_n|` for trees or the mean of `nu_n(F) / |V_n|` for cell sampling.
fn finite_mean_constant(
    config: &ExperimentConfig,
    scheme: &FractalScheme,
    law: &ConductanceLaw,
    mode: SamplingMode,
    level: usize,
    tree: bool,
) -> Result<(f64, f64)> {
    let graph = build_fractal_graph(scheme, level)?;
    let net = &graph.network;
    let v = net.vertex_count() as f64;
    let draws = if tree { CONSTANT_SAMPLES } else { config.replicas.max(2000) };
    let mut rng = auxiliary_stream(config.seed, 2);
    let totals: Vec<f64> = if tree {
        (0..draws).map(|_| law.sample(&mut rng)).map(|w| 2.0 * w * net.edge_count() as f64 / v).collect()
    } else {
        (0..draws)
            .map(|_| sample_conductances(net, law, mode, &mut rng).map(|e| degree_measure(&e).iter().sum::<f64>() / v))
            .collect::<Result<_>>()?
    };
    let (mean, sd) = mean_sd(&totals);
    Ok((mean, sd / (draws as f64).sqrt()))
}

/// Estimate of `c0` in `b_n^(1/alpha) nu_n -> c0 * (alpha-stable measure over mu)`.
///
/// Uses the Laplace functional on the whole space,
/// `E exp(-b_n^(1/alpha) nu_n(F)) ~ exp(-c0^alpha Gamma(1 - alpha) b_n |V_n|)`,
/// with a delta-method standard error.
pub fn estimate_c0(
    scheme: &FractalScheme,
    level: usize,
    law: &ConductanceLaw,
    mode: SamplingMode,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(InvalidArgument, "c0 is defined for alpha in (0, 1), got {alpha}");
    }
    if samples < 2 {
        bail!(InvalidArgument, "need at least two samples");
    }
    let graph = build_fractal_graph(scheme, level)?;
    let net = &graph.network;
    let b = scheme.mass_factor(level);
    let scale = b.powf(1.0 / alpha);
    let mut rng = auxiliary_stream(seed, 3);
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let env = sample_conductances(net, law, mode, &mut rng)?;
            Ok((-scale * degree_measure(&env).iter().sum::<f64>()).exp())
        })
        .collect::<Result<_>>()?;
    let (l, sd) = mean_sd(&values);
    if !(l > 0.0 && l < 1.0) {
        bail!(Numerical, "empirical Laplace transform {l} is degenerate");
    }
    let mass = b * net.vertex_count() as f64;
    let c0 = (-l.ln() / (gamma(1.0 - alpha) * mass)).powf(1.0 / alpha);
    let se = (c0 / (alpha * l * l.ln())).abs() * sd / (samples as f64).sqrt();
    Ok((c0, se))
}

/// `sup_v |a_n R^w_n(root, v) - rho a_n R_n(root, v)|` over the level-1 vertices.
///
/// On fractals `rho` is the mean ratio `R^w / R` fitted on the finest level.
fn resistance_homogenization(
    config: &ExperimentConfig,
    levels: &[Level],
    law: &ConductanceLaw,
    mode: SamplingMode,
    rho: Option<f64>,
    report: &mut Report,
) -> Result<()> {
    let samples = config.replicas.min(200);
    let mut per_level = Vec::new();
    for level in levels {
        let targets: Vec<usize> = level.graph.level_vertices(1.min(level.n))?.into_iter().filter(|v| *v != level.root()).collect();
        let a = config.scheme()?.resistance_factor(level.n).expect("validated");
        let rows: Vec<Vec<(f64, f64)>> = (0..samples)
            .into_par_iter()
            .map(|r| {
                let mut rng = replica_stream(config.seed, level.n, r);
                let env = sample_conductances(level.net(), law, mode, &mut rng)?;
                let random = if env.is_tree() {
                    let all = root_resistances(&env)?;
                    targets.iter().map(|v| all[*v]).collect()
                } else {
                    let solver = GroundedSolver::new(&env, level.root())?;
                    targets
                        .iter()
                        .map(|&v| {
                            let mut rhs = vec![0.0; env.vertex_count()];
                            rhs[v] = 1.0;
                            Ok(solver.solve(&rhs)?[v])
                        })
                        .collect::<Result<Vec<f64>>>()?
                };
                Ok(targets.iter().zip(random).map(|(&v, rw)| (a * rw, level.coordinates[v][2])).collect())
            })
            .collect::<Result<_>>()?;
        per_level.push(rows);
    }
    let fitted = match rho {
        Some(r) => r,
        None => {
            let last = per_level.last().expect("levels nonempty");
            let ratios: Vec<f64> = last.iter().flatten().map(|(rw, r)| rw / r).collect();
            let fit = ratios.iter().sum::<f64>() / ratios.len() as f64;
            report.summary.insert("resistance_ratio_fit".into(), fit);
            report.notes.push(format!("fractal resistance ratio {fit} fitted on level {}", levels.last().unwrap().n));
            fit
        }
    };
    let mut table = Table::new("resistance", &["level", "mean_sup_error", "se", "mean_ratio"]).with_plot("level", "mean_sup_error", &[]);
    let mut previous = f64::INFINITY;
    let mut decreasing = true;
    for (level, rows) in levels.iter().zip(&per_level) {
        let sups: Vec<f64> = rows.iter().map(|row| row.iter().map(|(rw, r)| (rw - fitted * r).abs()).fold(0.0, f64::max)).collect();
        let ratios: Vec<f64> = rows.iter().flatten().map(|(rw, r)| rw / r).collect();
        let (mean, sd) = mean_sd(&sups);
        table.push(vec![level.n as f64, mean, sd / (sups.len() as f64).sqrt(), ratios.iter().sum::<f64>() / ratios.len() as f64]);
        decreasing &= mean < previous;
        previous = mean;
    }
    report.checks.insert("resistance_error_decreasing".into(), decreasing);
    report.tables.push(table);
    Ok(())
}

/// Fixed point of the renormalization map, then random iterates per level.
pub fn run_homogenize(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let scheme = config.scheme()?;
    let law = config.law()?;
    let mode = config.mode.unwrap_or(SamplingMode::PerCell);
    let mut report = Report::new(config.clone());
    let k = scheme.boundary_count;
    let fp = fixed_point(&scheme, &QMatrix::uniform(k, 1.0)?, 1e-12, 10_000)?;
    report.summary.insert("rho".into(), fp.rho);
    report.summary.insert("fixed_point_iterations".into(), fp.iterations as f64);
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let mut columns: Vec<String> = vec!["level".into(), "drift".into(), "max_variance".into(), "mean_variance".into(), "rejection_rate".into()];
    columns.extend(pairs.iter().map(|(i, j)| format!("mean_q{i}{j}")));
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("iterates", &column_refs).with_plot("level", "drift", &[]);
    let mut variance_table = Table::new("variances", &["level", "max_variance"]).with_plot("level", "max_variance", &[]);
    let mut previous: Option<QMatrix> = None;
    let (mut drifts, mut variances) = (Vec::new(), Vec::new());
    for &n in &config.levels {
        let it = random_iterate(&scheme, n, &law, mode, fp.rho, config.replicas, config.seed.wrapping_add(n as u64 * 0x9E37_79B9))?;
        let drift = previous.as_ref().map_or(f64::NAN, |p| it.mean.distance(p));
        let v = it.variances();
        let max_v = v.iter().cloned().fold(0.0, f64::max);
        let mean_v = v.iter().sum::<f64>() / v.len() as f64;
        let mut row = vec![n as f64, drift, max_v, mean_v, it.rejection_rate()];
        row.extend(it.mean.conductances());
        table.push(row);
        variance_table.push(vec![n as f64, max_v]);
        if previous.is_some() {
            drifts.push(drift);
        }
        variances.push(max_v);
        previous = Some(it.mean);
    }
    report.checks.insert("drift_decreasing".into(), drifts.windows(2).all(|w| w[1] < w[0]));
    let factor = variances.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).fold(0.0, f64::max);
    report.summary.insert("worst_variance_ratio".into(), factor);
    report.checks.insert("variance_contracting".into(), variances.windows(2).all(|w| w[1] <= 0.8 * w[0]));
    report.tables.push(table);
    report.tables.push(variance_table);
    Ok(report)
}

/// Volume doubling, local-time moduli and GH-vague gaps across levels, all in
/// the rescaled metric `a_n R_n` with mass `b_n` per vertex.
pub fn run_diagnostics(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let scheme = config.scheme()?;
    let mut report = Report::new(config.clone());
    let top = *config.levels.last().expect("validated");
    let finest = build_fractal_graph(&scheme, top)?;
    let a_top = scheme.resistance_factor(top).expect("validated");
    let ambient = std::sync::Arc::new(resistance_matrix(&finest.network)?.scaled(a_top).matrix().clone());
    let root = finest.network.root();

    let radii: Vec<f64> = (0..8).map(|k| 0.02 * 2f64.powi(k)).collect();
    let mut volume = Table::new("volume", &["level", "doubling", "spread"]).with_plot("level", "doubling", &[]);
    let mut gaps = Table::new("gh_vague", &["level_from", "level_to", "gap"]).with_plot("level_to", "gap", &[]);
    let deltas = [0.05, 0.1, 0.2, 0.4];
    let mut modulus = Table::new("local_time_modulus", &["level", "delta", "q95"]).with_plot("level", "q95", &["delta"]);
    let mut spaces: Vec<EmbeddedSpace> = Vec::new();
    let horizon = config.times.iter().cloned().fold(0.0, f64::max);
    for &n in &config.levels {
        let vertices = finest.level_vertices(n)?;
        let b = scheme.mass_factor(n);
        let space = EmbeddedSpace::new(ambient.clone(), vertices.clone(), vec![b; vertices.len()], vertices.iter().position(|v| *v == root).unwrap_or(0))?;
        let corners: Vec<usize> = finest
            .boundary_vertices()
            .iter()
            .filter_map(|c| vertices.iter().position(|v| v == c))
            .collect();
        let profile = volume_profile(&space, &corners, &radii)?;
        volume.push(vec![n as f64, profile.doubling, profile.spread]);
        if let Some(prev) = spaces.last() {
            let gap = gh_vague_gap(prev, &space, &[space.diameter() + 1.0])?;
            gaps.push(vec![config.levels[spaces.len() - 1] as f64, n as f64, gap]);
        }
        spaces.push(space);

        let graph = build_fractal_graph(&scheme, n)?;
        let a = scheme.resistance_factor(n).expect("validated");
        let r = resistance_matrix(&graph.network)?;
        let t_n = horizon / (a * b);
        let reps = config.replicas.min(200);
        let per: Vec<Vec<f64>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replica_stream(config.seed, n, rep);
                let traj = JumpChain::vsrw(&graph.network)?.trajectory(graph.network.root(), t_n, &mut rng)?;
                let ltf = local_times(&traj, &graph.network)?;
                let scaled: Vec<f64> = deltas.iter().map(|d| d / a).collect();
                Ok(local_time_modulus(&ltf, &r, &scaled, t_n)?.into_iter().map(|(_, m)| a * m).collect())
            })
            .collect::<Result<_>>()?;
        for (i, d) in deltas.iter().enumerate() {
            let mut column: Vec<f64> = per.iter().map(|row| row[i]).collect();
            column.sort_by(f64::total_cmp);
            modulus.push(vec![n as f64, *d, quantile(&column, 0.95)]);
        }
    }
    let doubling = volume.column("doubling").unwrap_or_default();
    let (lo, hi) = doubling.iter().fold((f64::INFINITY, 0.0f64), |(l, h), d| (l.min(*d), h.max(*d)));
    report.checks.insert("doubling_stable_within_2".into(), hi <= 2.0 * lo);
    let gap = gaps.column("gap").unwrap_or_default();
    report.checks.insert("gh_vague_decreasing".into(), gap.windows(2).all(|w| w[1] < w[0]));
    report.tables.push(volume);
    report.tables.push(gaps);
    report.tables.push(modulus);
    Ok(report)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Quantile of sorted data by the nearest-rank rule.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}
