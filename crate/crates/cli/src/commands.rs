use std::path::PathBuf;

use nalgebra::DMatrix;
use rayon::prelude::*;

use deepgeom::boundary::{curvature_vs_depth, LinearReadout};
use deepgeom::expressivity::{
    circle_input_activations, fourier_error_profile, verify_shallow_bound, weight_chaos_empirical, FourierProbe,
};
use deepgeom::geometry::curve_geometry;
use deepgeom::grid::theta_grid;
use deepgeom::meanfield::{curvature_trajectory, length_fixed_point, length_trajectory, phase_grid, CMap};
use deepgeom::simulator::{
    autocorrelation, forward_jet, singular_spectrum, write_network, CircleManifold, JetOrder, NetworkRealization,
};
use deepgeom::stats::mean_var;
use deepgeom::validation::{run_criterion, CRITERION_COUNT};
use deepgeom::EnsembleParams;

use crate::config::{self, parse_list, parse_range, require, Config};
use crate::output::{Cell, Table};
use crate::{CliError, Command, Ensemble, Io, Outcome, Quad, Sim, TOOL};

pub fn io_of(cmd: &Command) -> &Io {
    match cmd {
        Command::LengthMap { io, .. }
        | Command::CMap { io, .. }
        | Command::PhaseGrid { io, .. }
        | Command::Curvature { io, .. }
        | Command::Simulate { io, .. }
        | Command::Autocorr { io, .. }
        | Command::Spectrum { io, .. }
        | Command::Boundary { io, .. }
        | Command::ShallowBound { io, .. }
        | Command::Fourier { io, .. }
        | Command::WeightChaos { io, .. }
        | Command::ValidateAll { io, .. } => io,
    }
}

fn ens_flags(e: &Ensemble) -> Config {
    Config {
        sigma_w: e.sigma_w,
        sigma_b: e.sigma_b,
        nonlinearity: e.nonlinearity.clone(),
        ..Default::default()
    }
}

fn quad_flags(q: &Quad) -> Config {
    Config {
        quadrature: q.quadrature.clone(),
        ..Default::default()
    }
}

fn sim_flags(s: &Sim) -> Config {
    Config {
        width: s.width,
        depth: s.depth,
        seed: s.seed,
        ..Default::default()
    }
}

fn ens_defaults(sigma_w: f64) -> Config {
    Config {
        sigma_w: Some(sigma_w),
        sigma_b: Some(0.3),
        nonlinearity: Some("tanh".into()),
        ..Default::default()
    }
}

fn quad_default() -> Config {
    Config {
        quadrature: Some("resolved".into()),
        ..Default::default()
    }
}

/// Defaults < config file < flags, keeping only the command's keys.
fn resolve(name: &str, io: &Io, flags: Config, defaults: Config, optional: &[&str]) -> Result<Config, CliError> {
    let file = match &io.config {
        Some(p) => config::load(p)?,
        None => Config::default(),
    };
    let mut keys = defaults.keys();
    keys.extend(optional.iter().map(|s| s.to_string()));
    let key_refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    let merged = flags.over(&file).restrict(name, &key_refs)?;
    let mut c = merged.over(&defaults);
    c.tool = Some(TOOL.into());
    c.command = Some(name.into());
    Ok(c)
}

fn done(config: Config, primary: Table) -> Outcome {
    Outcome {
        config,
        primary,
        extra: Vec::new(),
        exit: None,
    }
}

/// Checks shared by the simulation commands.
fn check_sim(c: &Config) -> Result<(), CliError> {
    if let Some(w) = c.width {
        require(w >= 2, "width", "must be >= 2")?;
    }
    if let Some(d) = c.depth {
        require(d >= 1, "depth", "must be >= 1")?;
    }
    if let Some(t) = c.n_theta {
        require(t >= 8, "n_theta", "must be >= 8")?;
    }
    if let Some(s) = c.seeds {
        require(s <= 10_000, "seeds", "must be <= 10000")?;
    }
    Ok(())
}

pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::LengthMap { ens, quad, depth, q0, io } => {
            let flags = Config {
                depth: *depth,
                q0: *q0,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&quad_flags(quad));
            let defaults = Config {
                depth: Some(10),
                q0: Some(1.0),
                ..Default::default()
            }
            .over(&ens_defaults(4.0))
            .over(&quad_default());
            let c = resolve("length-map", io, flags, defaults, &[])?;
            let (p, q) = (c.params()?, c.quad()?);
            let depth = c.n("depth", c.depth)?;
            require(depth >= 1, "depth", "must be >= 1")?;
            let t = length_trajectory(c.f("q0", c.q0)?, depth, &p, &q)?;
            let mut table = Table::new(&["layer", "q_theory"]);
            for (l, v) in t.values.iter().enumerate() {
                table.push(vec![(l + 1).into(), (*v).into()]);
            }
            table.note("q_star", t.q_star);
            table.note(
                "iterations_to_1pct",
                t.iterations_to_1pct.map_or(Cell::from("none"), Cell::from),
            );
            Ok(done(c, table))
        }

        Command::CMap { ens, quad, depth, c0, io } => {
            let flags = Config {
                depth: *depth,
                c0: *c0,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&quad_flags(quad));
            let defaults = Config {
                depth: Some(20),
                c0: Some(0.9),
                ..Default::default()
            }
            .over(&ens_defaults(4.0))
            .over(&quad_default());
            let c = resolve("c-map", io, flags, defaults, &[])?;
            let (p, q) = (c.params()?, c.quad()?);
            let cm = CMap::new(&p, &q)?;
            let t = cm.trajectory(c.f("c0", c.c0)?, c.n("depth", c.depth)?)?;
            let mut table = Table::new(&["layer", "c_theory"]);
            for (l, v) in t.values.iter().enumerate() {
                table.push(vec![(l + 1).into(), (*v).into()]);
            }
            table.note("q_star", t.chi.q_star);
            table.note("c_star", t.c_star);
            table.note("c_star_converged", t.c_star_converged);
            table.note("chi1", t.chi.chi1);
            table.note("chi2", t.chi.chi2);
            Ok(done(c, table))
        }

        Command::PhaseGrid {
            sw,
            sb,
            nonlinearity,
            quad,
            boundary_out,
            io,
        } => {
            let flags = Config {
                sw: sw.clone(),
                sb: sb.clone(),
                nonlinearity: nonlinearity.clone(),
                ..Default::default()
            }
            .over(&quad_flags(quad));
            let defaults = Config {
                sw: Some("0.1:5:50".into()),
                sb: Some("0:1:25".into()),
                nonlinearity: Some("tanh".into()),
                ..Default::default()
            }
            .over(&quad_default());
            let c = resolve("phase-grid", io, flags, defaults, &[])?;
            let sws = parse_range("sw", c.s("sw", &c.sw)?)?;
            let sbs = parse_range("sb", c.s("sb", &c.sb)?)?;
            require(sws.len() >= 2 && sbs.len() >= 2, "sw/sb", "need at least 2 samples per axis")?;
            require(sws[0] > 0.0, "sw", "must be > 0")?;
            require(sbs[0] >= 0.0, "sb", "must be >= 0")?;
            let phi = deepgeom::activations::builtin(c.s("nonlinearity", &c.nonlinearity)?)?;
            let grid = phase_grid(&sws, &sbs, &phi, &c.quad()?)?;
            let mut table = Table::new(&["sigma_w", "sigma_b", "q_star", "c_star", "chi1", "c_star_converged", "status"]);
            for cell in &grid.cells {
                table.push(vec![
                    cell.sigma_w.into(),
                    cell.sigma_b.into(),
                    cell.q_star.into(),
                    cell.c_star.into(),
                    cell.chi1.into(),
                    cell.c_star_converged.into(),
                    cell.error.clone().unwrap_or_else(|| "ok".into()).into(),
                ]);
            }
            let failed = grid.cells.iter().filter(|c| c.error.is_some()).count();
            table.note("failed_cells", failed);
            let mut boundary = Table::new(&["sigma_b", "sigma_w_star", "status"]);
            for (b, r) in &grid.boundary {
                let (v, s) = match r {
                    Ok(v) => (*v, "ok".to_string()),
                    Err(e) => (f64::NAN, e.clone()),
                };
                boundary.push(vec![(*b).into(), v.into(), s.into()]);
            }
            let mut out = done(c, table);
            out.extra.push(("boundary", boundary_out.clone(), boundary));
            Ok(out)
        }

        Command::Curvature {
            ens,
            quad,
            sim,
            n_theta,
            seeds,
            io,
        } => {
            let flags = Config {
                n_theta: *n_theta,
                seeds: *seeds,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&quad_flags(quad))
            .over(&sim_flags(sim));
            let defaults = Config {
                width: Some(1000),
                depth: Some(10),
                seed: Some(0),
                n_theta: Some(1024),
                seeds: Some(1),
                ..Default::default()
            }
            .over(&ens_defaults(4.0))
            .over(&quad_default());
            let c = resolve("curvature", io, flags, defaults, &[])?;
            check_sim(&c)?;
            curvature(c)
        }

        Command::Simulate {
            ens,
            quad,
            sim,
            q0,
            n_theta,
            save_network,
            io,
        } => {
            let flags = Config {
                q0: *q0,
                n_theta: *n_theta,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&quad_flags(quad))
            .over(&sim_flags(sim));
            let defaults = Config {
                width: Some(1000),
                depth: Some(10),
                seed: Some(0),
                q0: Some(1.0),
                n_theta: Some(16),
                ..Default::default()
            }
            .over(&ens_defaults(4.0))
            .over(&quad_default());
            let c = resolve("simulate", io, flags, defaults, &[])?;
            check_sim(&c)?;
            simulate(c, save_network.clone())
        }

        Command::Autocorr {
            ens,
            quad,
            sim,
            n_theta,
            io,
        }
        | Command::Spectrum {
            ens,
            quad,
            sim,
            n_theta,
            io,
        } => {
            let name = if matches!(cmd, Command::Autocorr { .. }) {
                "autocorr"
            } else {
                "spectrum"
            };
            let flags = Config {
                n_theta: *n_theta,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&quad_flags(quad))
            .over(&sim_flags(sim));
            let defaults = Config {
                width: Some(1000),
                depth: Some(10),
                seed: Some(0),
                n_theta: Some(256),
                ..Default::default()
            }
            .over(&ens_defaults(4.0))
            .over(&quad_default());
            let c = resolve(name, io, flags, defaults, &[])?;
            check_sim(&c)?;
            circle_layers(c, name == "autocorr")
        }

        Command::Boundary {
            ens,
            sim,
            points,
            max_iters,
            io,
        } => {
            let flags = Config {
                points: *points,
                max_iters: *max_iters,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&sim_flags(sim));
            let defaults = Config {
                width: Some(100),
                depth: Some(6),
                seed: Some(0),
                points: Some(10),
                max_iters: Some(500),
                ..Default::default()
            }
            .over(&ens_defaults(4.0));
            let c = resolve("boundary", io, flags, defaults, &[])?;
            check_sim(&c)?;
            boundary(c)
        }

        Command::ShallowBound {
            ens,
            width,
            trials,
            q0,
            n_theta,
            seed,
            io,
        } => {
            let flags = Config {
                width: *width,
                trials: *trials,
                q0: *q0,
                n_theta: *n_theta,
                seed: *seed,
                ..Default::default()
            }
            .over(&ens_flags(ens));
            let defaults = Config {
                width: Some(1000),
                trials: Some(100),
                q0: Some(1.0),
                n_theta: Some(512),
                seed: Some(0),
                ..Default::default()
            }
            .over(&ens_defaults(4.0));
            let c = resolve("shallow-bound", io, flags, defaults, &[])?;
            check_sim(&c)?;
            let p = c.params()?;
            let r = verify_shallow_bound(
                c.n("trials", c.trials)?,
                c.n("width", c.width)?,
                p.sigma_w,
                p.sigma_b,
                &p.nonlinearity,
                c.f("q0", c.q0)?,
                c.n("n_theta", c.n_theta)?,
                c.n("seed", c.seed)?,
            )?;
            let mut table = Table::new(&["trial", "length", "bound"]);
            for (i, l) in r.lengths.iter().enumerate() {
                table.push(vec![i.into(), (*l).into(), r.bound.into()]);
            }
            table.note("violations", r.violations);
            table.note("max_length", r.max_length);
            table.note("max_length_norm", r.max_length_norm);
            Ok(done(c, table))
        }

        Command::Fourier {
            ens,
            quad,
            depths,
            width,
            omega_max,
            n_theta,
            ridge,
            seed,
            seeds,
            io,
        } => {
            let flags = Config {
                depths: depths.clone(),
                width: *width,
                omega_max: *omega_max,
                n_theta: *n_theta,
                ridge: *ridge,
                seed: *seed,
                seeds: *seeds,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&quad_flags(quad));
            let defaults = Config {
                depths: Some("1,4,8".into()),
                width: Some(200),
                omega_max: Some(50),
                n_theta: Some(512),
                seed: Some(0),
                seeds: Some(1),
                ..Default::default()
            }
            .over(&ens_defaults(2.5))
            .over(&quad_default());
            let c = resolve("fourier", io, flags, defaults, &["ridge"])?;
            check_sim(&c)?;
            fourier(c)
        }

        Command::WeightChaos {
            ens,
            quad,
            sim,
            deltas,
            n_theta,
            seeds,
            io,
        } => {
            let flags = Config {
                deltas: deltas.clone(),
                n_theta: *n_theta,
                seeds: *seeds,
                ..Default::default()
            }
            .over(&ens_flags(ens))
            .over(&quad_flags(quad))
            .over(&sim_flags(sim));
            let defaults = Config {
                width: Some(1000),
                depth: Some(10),
                seed: Some(0),
                deltas: Some("0:0.5:11".into()),
                n_theta: Some(64),
                seeds: Some(1),
                ..Default::default()
            }
            .over(&ens_defaults(4.0))
            .over(&quad_default());
            let c = resolve("weight-chaos", io, flags, defaults, &[])?;
            check_sim(&c)?;
            weight_chaos(c)
        }

        Command::ValidateAll { criteria, io } => {
            let flags = Config {
                criteria: criteria.clone(),
                ..Default::default()
            };
            let all: Vec<String> = (1..=CRITERION_COUNT).map(|i| i.to_string()).collect();
            let defaults = Config {
                criteria: Some(all.join(",")),
                ..Default::default()
            };
            let c = resolve("validate-all", io, flags, defaults, &[])?;
            let ids: Vec<usize> = parse_list("criteria", c.s("criteria", &c.criteria)?)?;
            for &id in &ids {
                require((1..=CRITERION_COUNT).contains(&id), "criteria", "ids must lie in 1..=10")?;
            }
            let mut table = Table::new(&["id", "name", "passed", "detail"]);
            let mut failed = 0;
            for id in ids {
                let o = run_criterion(id)?;
                // Live progress; timings stay out of the data table.
                eprintln!("{o}");
                if !o.passed {
                    failed += 1;
                }
                table.push(vec![o.id.into(), o.name.into(), o.passed.into(), o.detail.into()]);
            }
            table.note("failed", failed);
            let mut out = done(c, table);
            if failed > 0 {
                out.exit = Some(CliError::Acceptance(failed));
            }
            Ok(out)
        }
    }
}

fn seed_range(c: &Config) -> Result<std::ops::Range<u64>, CliError> {
    let seed = c.n("seed", c.seed)?;
    let seeds = c.n("seeds", c.seeds)?;
    Ok(seed..seed + seeds)
}

fn net_widths(c: &Config) -> Result<Vec<usize>, CliError> {
    Ok(vec![c.n("width", c.width)?; c.n("depth", c.depth)? + 1])
}

fn curvature(c: Config) -> Result<Outcome, CliError> {
    let (p, q) = (c.params()?, c.quad()?);
    let depth = c.n("depth", c.depth)?;
    let width = c.n("width", c.width)?;
    let theory = curvature_trajectory(depth, &p, &q)?;
    let thetas = theta_grid(c.n("n_theta", c.n_theta)?);
    let seeds: Vec<u64> = seed_range(&c)?.collect();
    // Per-seed (ḡ^E, κ̄², L̄^E, L^G) by layer, reduced in seed order.
    let per_seed: Vec<Vec<[f64; 4]>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<[f64; 4]>, CliError> {
            let net = NetworkRealization::sample(&net_widths(&c)?, &p, seed)?;
            let circle = CircleManifold::sample(width, theory.chi.q_star, thetas.clone(), seed)?;
            let mut rows = Vec::with_capacity(depth);
            for rec in forward_jet(&net, &circle.jet()?, JetOrder::Acceleration)? {
                let g = curve_geometry(&rec.to_jet(&thetas)?)?;
                let t = thetas.len() as f64;
                rows.push([
                    g.g_e_norm.iter().sum::<f64>() / t,
                    g.kappa_norm.iter().map(|k| k * k).sum::<f64>() / t,
                    g.le_norm,
                    g.lg,
                ]);
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new(&[
        "layer",
        "g_e_theory",
        "kappa_sq_theory",
        "le_norm_theory",
        "lg_theory",
        "g_e_empirical",
        "kappa_sq_empirical",
        "le_norm_empirical",
        "lg_empirical",
    ]);
    for l in 0..depth {
        let emp: Vec<f64> = (0..4)
            .map(|k| {
                if per_seed.is_empty() {
                    f64::NAN
                } else {
                    per_seed.iter().map(|s| s[l][k]).sum::<f64>() / per_seed.len() as f64
                }
            })
            .collect();
        table.push(vec![
            (l + 1).into(),
            theory.g_e[l].into(),
            theory.kappa_sq[l].into(),
            theory.le_norm[l].into(),
            theory.lg[l].into(),
            emp[0].into(),
            emp[1].into(),
            emp[2].into(),
            emp[3].into(),
        ]);
    }
    table.note("q_star", theory.chi.q_star);
    table.note("chi1", theory.chi.chi1);
    table.note("chi2", theory.chi.chi2);
    table.note("kappa_star_sq", theory.kappa_star_sq);
    Ok(done(c, table))
}

fn simulate(c: Config, save: Option<PathBuf>) -> Result<Outcome, CliError> {
    let (p, q) = (c.params()?, c.quad()?);
    let width = c.n("width", c.width)?;
    let depth = c.n("depth", c.depth)?;
    let q0 = c.f("q0", c.q0)?;
    let seed = c.n("seed", c.seed)?;
    let net = NetworkRealization::sample(&net_widths(&c)?, &p, seed)?;
    if let Some(path) = save {
        let mut f = std::fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        write_network(&net, &mut f)?;
    }
    let thetas = theta_grid(c.n("n_theta", c.n_theta)?);
    let circle = CircleManifold::sample(width, q0, thetas.clone(), seed)?;
    let theory = length_trajectory(q0, depth, &p, &q)?;
    let mut table = Table::new(&["layer", "sample", "theta", "q", "mean", "std", "q_theory"]);
    for rec in net.forward_batch(&circle.points(&thetas))? {
        for (j, col) in rec.h.column_iter().enumerate() {
            let xs: Vec<f64> = col.iter().copied().collect();
            let (m, v) = mean_var(&xs);
            let qv = deepgeom::simulator::empirical_length(&xs)?;
            table.push(vec![
                rec.layer.into(),
                j.into(),
                thetas[j].into(),
                qv.into(),
                m.into(),
                v.sqrt().into(),
                theory.values[rec.layer - 1].into(),
            ]);
        }
    }
    table.note("q_star", theory.q_star);
    Ok(done(c, table))
}

/// Pre-activations `h^1..h^D` of a circle placed at `q*` in layer 1.
fn circle_records(c: &Config, cm: &CMap, p: &EnsembleParams) -> Result<(Vec<f64>, Vec<DMatrix<f64>>), CliError> {
    let q_star = cm.q_star();
    if !(q_star > 0.0) {
        return Err(CliError::Numerical("q* = 0: the circle collapses".into()));
    }
    let seed = c.n("seed", c.seed)?;
    let thetas = theta_grid(c.n("n_theta", c.n_theta)?);
    let net = NetworkRealization::sample(&net_widths(c)?, p, seed)?;
    let h1 = CircleManifold::sample(c.n("width", c.width)?, q_star, thetas.clone(), seed)?.points(&thetas);
    let mut layers = vec![h1.clone()];
    layers.extend(net.propagate_from(1, h1)?);
    Ok((thetas, layers))
}

fn circle_layers(c: Config, autocorr: bool) -> Result<Outcome, CliError> {
    let (p, q) = (c.params()?, c.quad()?);
    let cm = CMap::new(&p, &q)?;
    let q_star = cm.q_star();
    let (thetas, layers) = circle_records(&c, &cm, &p)?;
    let table = if autocorr {
        let mut table = Table::new(&["layer", "lag", "delta_theta", "c_empirical", "c_theory"]);
        let mut theory: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
        for (l, h) in layers.iter().enumerate() {
            if l > 0 {
                theory = theory
                    .iter()
                    .map(|&x| cm.apply(x).map(|v| v.clamp(-1.0, 1.0)))
                    .collect::<Result<_, _>>()?;
            }
            let emp = autocorrelation(h, q_star)?;
            for (k, e) in emp.iter().enumerate() {
                table.push(vec![(l + 1).into(), k.into(), thetas[k].into(), (*e).into(), theory[k].into()]);
            }
        }
        table
    } else {
        let mut table = Table::new(&["layer", "k", "singular_value", "cumulative_fraction"]);
        for (l, h) in layers.iter().enumerate() {
            let s = singular_spectrum(h)?;
            for (k, (v, f)) in s.values.iter().zip(s.cumulative_fractions()).enumerate() {
                table.push(vec![(l + 1).into(), (k + 1).into(), (*v).into(), f.into()]);
            }
        }
        table
    };
    let mut out = done(c, table);
    out.primary.note("q_star", q_star);
    Ok(out)
}

fn boundary(c: Config) -> Result<Outcome, CliError> {
    let p = c.params()?;
    let seed = c.n("seed", c.seed)?;
    let net = NetworkRealization::sample(&net_widths(&c)?, &p, seed)?;
    let readout = LinearReadout::random(c.n("width", c.width)?, seed)?;
    let summary = curvature_vs_depth(&net, &readout, c.n("points", c.points)?, c.n("max_iters", c.max_iters)?, seed)?;
    let mut table = Table::new(&["layer", "which", "index", "kappa_mean", "converged", "attempted"]);
    for s in &summary {
        for (which, vals) in [("top", &s.top), ("bottom", &s.bottom)] {
            for (i, v) in vals.iter().enumerate() {
                table.push(vec![
                    s.layer.into(),
                    which.into(),
                    (i + 1).into(),
                    (*v).into(),
                    s.converged.into(),
                    s.attempted.into(),
                ]);
            }
        }
    }
    let missing = summary.iter().filter(|s| s.missing()).count();
    table.note("layers_without_points", missing);
    Ok(done(c, table))
}

fn fourier(c: Config) -> Result<Outcome, CliError> {
    let (p, q) = (c.params()?, c.quad()?);
    let depths: Vec<usize> = parse_list("depths", c.s("depths", &c.depths)?)?;
    require(depths.iter().all(|&d| d >= 1), "depths", "must all be >= 1")?;
    let width = c.n("width", c.width)?;
    let omega = c.n("omega_max", c.omega_max)?;
    let probe = FourierProbe::new(omega, c.n("n_theta", c.n_theta)?, c.ridge)?;
    let q_star = length_fixed_point(&p, &q)?;
    let q0 = (q_star - p.sigma_b * p.sigma_b) / (p.sigma_w * p.sigma_w);
    require(q0 > 0.0, "sigma_w", "needs q* > sigma_b^2 to place the input circle")?;
    let seeds: Vec<u64> = seed_range(&c)?.collect();
    require(!seeds.is_empty(), "seeds", "must be >= 1")?;
    let mut table = Table::new(&["depth", "frequency", "error"]);
    for &d in &depths {
        let profiles: Vec<Vec<f64>> = seeds
            .par_iter()
            .map(|&seed| -> Result<Vec<f64>, CliError> {
                let net = NetworkRealization::sample(&vec![width; d + 1], &p, seed)?;
                let act = circle_input_activations(&net, q0, &probe.thetas, seed)?;
                Ok(fourier_error_profile(&act, &probe)?.iter().map(|e| e.error).collect())
            })
            .collect::<Result<_, _>>()?;
        for k in 0..=omega {
            let mean = profiles.iter().map(|p| p[k]).sum::<f64>() / profiles.len() as f64;
            table.push(vec![d.into(), k.into(), mean.into()]);
        }
    }
    Ok(done(c, table))
}

fn weight_chaos(c: Config) -> Result<Outcome, CliError> {
    let (p, q) = (c.params()?, c.quad()?);
    let deltas = parse_range("deltas", c.s("deltas", &c.deltas)?)?;
    require(deltas.iter().all(|d| d.abs() <= 1.0), "deltas", "must lie in [-1, 1]")?;
    let depth = c.n("depth", c.depth)?;
    require(depth >= 2, "depth", "must be >= 2")?;
    let widths = vec![c.n("width", c.width)?; depth];
    let seeds: Vec<u64> = seed_range(&c)?.collect();
    require(!seeds.is_empty(), "seeds", "must be >= 1")?;
    let n_theta = c.n("n_theta", c.n_theta)?;
    let fams = seeds
        .iter()
        .map(|&s| weight_chaos_empirical(&p, &widths, &deltas, n_theta, s, &q))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&["delta", "C_theory", "C_empirical"]);
    for (i, d) in deltas.iter().enumerate() {
        let emp = fams.iter().map(|f| f.empirical[i]).sum::<f64>() / fams.len() as f64;
        table.push(vec![(*d).into(), fams[0].theory[i].into(), emp.into()]);
    }
    table.note("q_star", fams[0].q_star);
    Ok(done(c, table))
}
