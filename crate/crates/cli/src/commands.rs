use std::fmt::Write as _;

use serde_json::{json, Value};

use dimprofile::pointcloud::{load_csv, save_csv};
use dimprofile::profile::CapacitySweep;
use dimprofile::stochastic::{FbmSampler, FbmSpec, HolderSpec, ImageMap};
use dimprofile::{
    box_dimension, capacity_sweep, equilibrium, holder_snowflake, image_dimension_experiment, inequality_report,
    mesh_counts, profile_estimate, projection_experiment, resolution, sandwich_report, Check, Generator, IfsSystem,
    KernelSpec, PointSet, Result, ScaleGrid, SolverOptions,
};

use crate::args::{
    BoxdimArgs, CapacityArgs, Command, FbmArgs, GenKind, GridArgs, HolderArgs, ImageGridArgs, ProfileArgs, ProjectArgs,
    RMax, SandwichArgs, SweepSolverArgs,
};

/// What a subcommand produced, before it is wrapped into a report.
pub struct Outcome {
    /// Values chosen at run time (resolved `auto` scales, default exponents).
    pub resolved: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    /// Sweep table for `--format csv`.
    pub table: Option<String>,
}

impl Outcome {
    fn new(resolved: Value, results: Value, checks: Vec<Check>) -> Self {
        Self {
            resolved,
            results,
            checks,
            table: None,
        }
    }
}

pub fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Gen(a) => gen(&a.kind),
        Command::Capacity(a) => capacity(a),
        Command::Boxdim(a) => boxdim(a),
        Command::Profile(a) => profile(a, false),
        Command::Verify(a) => profile(a, true),
        Command::Project(a) => project(a),
        Command::Fbm(a) => fbm(a),
        Command::Holder(a) => holder(a),
        Command::Sandwich(a) => sandwich(a),
    }
}

fn grid_for(p: &PointSet<f64>, g: &GridArgs) -> Result<ScaleGrid<f64>> {
    let r_max = match g.r_max {
        RMax::Auto => resolution(p).diameter,
        RMax::Value(v) => v,
    };
    ScaleGrid::new(r_max, g.levels)
}

fn image_grid_for(img: impl FnOnce() -> Result<PointSet<f64>>, g: &ImageGridArgs) -> Result<ScaleGrid<f64>> {
    let r_max = match g.image_r_max {
        RMax::Auto => resolution(&img()?).diameter,
        RMax::Value(v) => v,
    };
    ScaleGrid::new(r_max, g.image_levels)
}

fn solver(a: &SweepSolverArgs) -> SolverOptions<f64> {
    SolverOptions {
        max_iter: a.max_iter,
        ..SolverOptions::with_tol(a.tol)
    }
}

fn gen(kind: &GenKind) -> Result<Outcome> {
    let (p, output) = match kind {
        GenKind::Grid { n, side, output } => (Generator::with_budget(output.budget).grid(*n, *side)?, output),
        GenKind::Cantor { ratio, level, output } => {
            (Generator::with_budget(output.budget).cantor(*ratio, *level)?, output)
        }
        GenKind::FourCorner { ratio, depth, output } => {
            let system = IfsSystem::four_corner(*ratio)?;
            let p = Generator::with_budget(output.budget).ifs(&system, *depth, &[0.0, 0.0])?;
            (
                p.with_label(format!("four-corner(ratio={ratio}, depth={depth})")),
                output,
            )
        }
        GenKind::Circle { count, output } => (Generator::with_budget(output.budget).circle(*count)?, output),
        GenKind::Product { left, right, output } => {
            let a: PointSet<f64> = load_csv(left)?;
            let b: PointSet<f64> = load_csv(right)?;
            (Generator::with_budget(output.budget).product(&a, &b)?, output)
        }
    };
    save_csv(&p, &output.out)?;
    let stats = resolution(&p);
    let results = json!({
        "label": p.label(),
        "points": p.len(),
        "ambient_dim": p.ambient_dim(),
        "diameter": stats.diameter,
        "median_nn_dist": stats.median_nn_dist,
    });
    Ok(Outcome::new(Value::Null, results, Vec::new()))
}

fn capacity(a: &CapacityArgs) -> Result<Outcome> {
    let p: PointSet<f64> = load_csv(&a.input)?;
    let opts = SolverOptions {
        max_iter: a.max_iter,
        ..SolverOptions::with_tol(a.tol)
    };
    let eq = equilibrium(&p, &KernelSpec::new(a.s, a.r)?, &opts)?;
    let mut results = json!({
        "energy": eq.energy,
        "capacity": eq.capacity,
        "gap": eq.gap,
        "iterations": eq.iterations,
    });
    if a.weights {
        results["weights"] = json!(eq.weights.as_slice());
    }
    let checks = vec![Check::expect(
        "duality_gap",
        eq.gap <= a.tol,
        format!("gap {:e} <= tol {:e}", eq.gap, a.tol),
    )];
    Ok(Outcome::new(Value::Null, results, checks))
}

fn boxdim(a: &BoxdimArgs) -> Result<Outcome> {
    let p: PointSet<f64> = load_csv(&a.input)?;
    let g = grid_for(&p, &a.grid)?;
    let counts = mesh_counts(&p, &g)?;
    let est = box_dimension(&p, &g)?;
    let results = json!({
        "scales": g.scales(),
        "counts": counts.iter().map(|c| c.count).collect::<Vec<_>>(),
        "slope": est.slope,
        "lower": est.lower,
        "upper": est.upper,
        "stderr": est.stderr,
        "ols_slope": est.ols_slope,
    });
    Ok(Outcome::new(json!({ "r_max": g.r_max() }), results, Vec::new()))
}

fn sweep_table(sweeps: &[CapacitySweep<f64>]) -> String {
    let mut out = String::from("s,r,capacity,gap,iterations\n");
    for sw in sweeps {
        for e in &sw.entries {
            writeln!(out, "{},{},{},{},{}", sw.s, e.r, e.capacity, e.gap, e.iterations).expect("writing to a String");
        }
    }
    out
}

fn profile(a: &ProfileArgs, verify: bool) -> Result<Outcome> {
    let p: PointSet<f64> = load_csv(&a.input)?;
    let g = grid_for(&p, &a.grid)?;
    let opts = solver(&a.solver);
    let (sweeps, estimates, mut checks) = if verify {
        let rep = inequality_report(&p, &a.s, &g, &opts)?;
        (rep.sweeps, rep.estimates, rep.checks)
    } else {
        let sweeps =
            a.s.iter()
                .map(|&s| capacity_sweep(&p, s, &g, &opts))
                .collect::<Result<Vec<_>>>()?;
        let estimates = sweeps.iter().map(profile_estimate).collect::<Result<Vec<_>>>()?;
        (sweeps, estimates, Vec::new())
    };
    for sw in &sweeps {
        let bad = sw.monotonicity_violations();
        checks.push(Check::expect(
            format!("capacity_monotone_in_r[s={}]", sw.s),
            bad.is_empty(),
            format!("C_r^s does not drop by more than 2 tol as r halves; violations (r, r/2) = {bad:?}"),
        ));
    }
    let results = json!({
        "fixture": p.label(),
        "s_list": a.s,
        "scales": g.scales(),
        "capacities": sweeps.iter().map(|sw| sw.capacities()).collect::<Vec<_>>(),
        "estimates": estimates,
    });
    Ok(Outcome {
        resolved: json!({ "r_max": g.r_max() }),
        results,
        checks,
        table: Some(sweep_table(&sweeps)),
    })
}

fn sandwich(a: &SandwichArgs) -> Result<Outcome> {
    let p: PointSet<f64> = load_csv(&a.input)?;
    let g = grid_for(&p, &a.grid)?;
    let s = a.s.unwrap_or(p.ambient_dim() as f64);
    let rep = sandwich_report(&p, s, &g, &solver(&a.solver))?;
    let mut table = String::from("r,count,capacity,ratio,log_factor\n");
    for sc in &rep.scales {
        writeln!(
            table,
            "{},{},{},{},{}",
            sc.r, sc.count, sc.capacity, sc.ratio, sc.log_factor
        )
        .expect("writing to a String");
    }
    let checks = rep.checks.clone();
    Ok(Outcome {
        resolved: json!({ "r_max": g.r_max(), "s": s }),
        results: serde_json::to_value(&rep).expect("serializable report"),
        checks,
        table: Some(table),
    })
}

fn project(a: &ProjectArgs) -> Result<Outcome> {
    let p: PointSet<f64> = load_csv(&a.input)?;
    let g = grid_for(&p, &a.grid)?;
    let rep = projection_experiment(&p, a.m, a.num_subspaces, &g, a.seed, &solver(&a.solver))?;
    let per_v: Vec<Value> = rep
        .per_subspace
        .iter()
        .map(|v| {
            json!({
                "seed_index": v.index,
                "dimension": v.estimate.slope,
                "lower": v.estimate.lower,
                "upper": v.estimate.upper,
                "basis": v.basis,
            })
        })
        .collect();
    let results = json!({
        "profile": rep.profile,
        "per_V": per_v,
        "agreement_fraction": rep.agreement_fraction,
        "max_dimension": rep.max_dimension,
    });
    Ok(Outcome::new(json!({ "r_max": g.r_max() }), results, rep.checks))
}

fn fbm(a: &FbmArgs) -> Result<Outcome> {
    let p: PointSet<f64> = load_csv(&a.input)?;
    let g = grid_for(&p, &a.grid)?;
    let spec = FbmSpec::new(a.alpha, a.m, a.seed)?;
    let needs_image = a.image_out.is_some() || a.image_grid.image_r_max == RMax::Auto;
    let first = if needs_image {
        Some(FbmSampler::new(&p, a.alpha)?.sample::<f64>(a.m, a.seed)?)
    } else {
        None
    };
    if let (Some(path), Some(img)) = (&a.image_out, &first) {
        save_csv(img, path)?;
    }
    let ig = image_grid_for(
        || Ok(first.clone().expect("image sampled for auto scale")),
        &a.image_grid,
    )?;
    let rep = image_dimension_experiment(&p, ImageMap::Fbm(spec), a.seeds, &g, &ig, &solver(&a.solver))?;
    let results = json!({
        "predicted": rep.predicted,
        "profile": rep.profile,
        "per_seed_dimensions": rep.per_seed_dimensions,
        "mean": rep.mean,
        "stddev": rep.stddev,
    });
    Ok(Outcome::new(
        json!({ "r_max": g.r_max(), "image_r_max": ig.r_max() }),
        results,
        rep.checks,
    ))
}

fn holder(a: &HolderArgs) -> Result<Outcome> {
    let p: PointSet<f64> = load_csv(&a.input)?;
    let g = grid_for(&p, &a.grid)?;
    let spec = HolderSpec::new(a.alpha)?;
    let (img, _) = holder_snowflake(&p, &spec)?;
    if let Some(path) = &a.image_out {
        save_csv(&img, path)?;
    }
    let ig = image_grid_for(|| Ok(img), &a.image_grid)?;
    let rep = image_dimension_experiment(&p, ImageMap::Holder(spec), 1, &g, &ig, &solver(&a.solver))?;
    let results = json!({
        "predicted": rep.predicted,
        "profile": rep.profile,
        "per_seed_dimensions": rep.per_seed_dimensions,
        "mean": rep.mean,
        "stddev": rep.stddev,
        "holder_constant": rep.holder_constant,
    });
    Ok(Outcome::new(
        json!({ "r_max": g.r_max(), "image_r_max": ig.r_max() }),
        results,
        rep.checks,
    ))
}
