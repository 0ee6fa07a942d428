//! Experiment execution: build the mesh sequence, project at every level,
//! measure errors and constants, write the reports, evaluate assertions.

use std::path::Path;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use feec::analysis::{
    error_report, global_best_approx, patch_stability_ratio, tail_slope, NormSpec,
};
use feec::fespace::{FEFunction, FESpace, Family};
use feec::mesh::SimplicialComplex;
use feec::projection::{broken_projection, average_broken, make_weights, FEFieldView};
use feec::vecproxy::named_space_params;

use crate::config::{boundary_of, parse_boundary, ExperimentConfig, MeshSource, SpaceConfig};

#[derive(Debug)]
pub enum RunError {
    /// exit code 3
    Runtime(String),
    /// exit code 1
    AssertionFailed(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Runtime(msg) => write!(f, "runtime failure: {msg}"),
            RunError::AssertionFailed(msg) => write!(f, "assertion failed: {msg}"),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Runtime(e.to_string())
}

#[derive(Debug, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub h_max: f64,
    pub num_cells: usize,
    pub num_dofs: usize,
    pub errors: Vec<(NormSpec, f64)>,
    pub stability_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub space_family: String,
    pub space_degree: usize,
    pub form_degree: usize,
    pub levels: Vec<LevelReport>,
    pub slopes: Vec<(NormSpec, f64)>,
    /// final-level comparison of conforming and cellwise best approximation
    pub local_vs_global_ratio: f64,
    /// worst relative reproduction error over seeded random space members
    pub projection_property_error: f64,
    /// wall-clock timestamp; excluded from determinism comparisons
    pub timestamp: String,
}

pub fn run_experiment(
    config: &ExperimentConfig,
    output_dir: &Path,
) -> Result<ExperimentReport, RunError> {
    let base: SimplicialComplex = match &config.mesh {
        MeshSource::Generator(name) => feec::mesh::generator(name)
            .ok_or_else(|| RunError::Runtime(format!("unknown generator {name}")))?,
        MeshSource::File { file } => {
            let text = std::fs::read_to_string(file).map_err(runtime)?;
            SimplicialComplex::from_json(&text).map_err(runtime)?
        }
    };
    let (family, r, k) = match &config.space {
        SpaceConfig::Named { name, r } => {
            let (family, k) = named_space_params(name, base.ambient_dim()).map_err(runtime)?;
            (family, *r, k)
        }
        SpaceConfig::Explicit { family, r, k } => (*family, *r, *k),
    };
    let field = feec::fields::field_by_name(&config.field)
        .ok_or_else(|| RunError::Runtime(format!("unknown field {}", config.field)))?;
    if field.ambient_dim() != base.ambient_dim() || field.form_degree() != k {
        return Err(RunError::Runtime(format!(
            "field {} is a {}-form in dimension {}, the space expects a {}-form in dimension {}",
            config.field,
            field.form_degree(),
            field.ambient_dim(),
            k,
            base.ambient_dim()
        )));
    }
    let boundary_choice = parse_boundary(&config.boundary)
        .ok_or_else(|| RunError::Runtime(format!("unknown boundary {}", config.boundary)))?;

    let mut complexes = vec![Arc::new(base)];
    for _ in 1..config.levels {
        let next = complexes.last().unwrap().refine_uniform().map_err(runtime)?;
        complexes.push(Arc::new(next));
    }

    let mut levels = Vec::new();
    let mut last_space: Option<FESpace> = None;
    for (level, complex) in complexes.iter().enumerate() {
        let boundary = boundary_of(boundary_choice, complex);
        let space = FESpace::build(complex.clone(), family, r, k, boundary).map_err(runtime)?;
        let weights =
            make_weights(config.weights, complex, space.boundary(), None).map_err(runtime)?;
        let u = feec::projection::project(&space, field.as_ref(), &weights, config.backend)
            .map_err(runtime)?;
        let report = error_report(&space, &u, field.as_ref(), &config.norms).map_err(runtime)?;
        let stability = patch_stability_ratio(&space, &u, field.as_ref()).map_err(runtime)?;
        log::info!(
            "level {level}: h_max {:.4e}, {} cells, stability ratio {stability:.4}",
            complex.h_max(),
            complex.cell_ids().len()
        );
        levels.push(LevelReport {
            level,
            h_max: complex.h_max(),
            num_cells: complex.cell_ids().len(),
            num_dofs: space.num_active_dofs(),
            errors: report.norms,
            stability_ratio: stability,
        });
        last_space = Some(space);
    }

    let hs: Vec<f64> = levels.iter().map(|l| l.h_max).collect();
    let slopes: Vec<(NormSpec, f64)> = config
        .norms
        .iter()
        .map(|&ns| {
            let errs: Vec<f64> = levels
                .iter()
                .map(|l| l.errors.iter().find(|(m, _)| *m == ns).unwrap().1)
                .collect();
            (ns, if hs.len() >= 2 { tail_slope(&hs, &errs) } else { f64::NAN })
        })
        .collect();

    let final_space = last_space.expect("at least one level");
    let best = global_best_approx(&final_space, field.as_ref()).map_err(runtime)?;
    log::info!("local-vs-global ratio at the finest level: {:.4}", best.ratio);

    // seeded spot check of the projection property on the finest level
    let projection_property_error = {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let complex = final_space.complex().clone();
        let weights = make_weights(config.weights, &complex, final_space.boundary(), None)
            .map_err(runtime)?;
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let mut member = FEFunction::zero(&final_space);
            for v in member.coeffs.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let view = FEFieldView::new(&final_space, &member);
            let broken =
                broken_projection(&final_space, &view, config.backend).map_err(runtime)?;
            let pu = average_broken(&final_space, &broken, &weights).map_err(runtime)?;
            let err = (&pu.coeffs - &member.coeffs).norm() / member.coeffs.norm().max(1e-300);
            worst = worst.max(err);
        }
        worst
    };
    log::info!("projection property spot check: worst relative error {projection_property_error:.3e}");

    let report = ExperimentReport {
        config: config.clone(),
        space_family: match family {
            Family::Full => "P".into(),
            Family::Trimmed => "Pminus".into(),
        },
        space_degree: final_space.degree(),
        form_degree: k,
        levels,
        slopes,
        local_vs_global_ratio: best.ratio,
        projection_property_error,
        timestamp: timestamp(),
    };

    write_outputs(config, &report, output_dir)?;
    check_assertions(config, &report)?;
    Ok(report)
}

fn timestamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{now}")
}

fn write_outputs(
    config: &ExperimentConfig,
    report: &ExperimentReport,
    output_dir: &Path,
) -> Result<(), RunError> {
    std::fs::create_dir_all(output_dir).map_err(runtime)?;
    let output = config.output.clone().unwrap_or_default();
    let json_path = output_dir.join(&output.report);
    let text = serde_json::to_string_pretty(report).map_err(runtime)?;
    std::fs::write(&json_path, text).map_err(runtime)?;

    let csv_path = output_dir.join(&output.csv);
    let mut csv = String::from("level,h_max,norm,space,weights,backend,value,slope\n");
    let space_label = format!(
        "{}_r{}_k{}",
        report.space_family, report.space_degree, report.form_degree
    );
    for lvl in &report.levels {
        for (ns, value) in &lvl.errors {
            let slope = report
                .slopes
                .iter()
                .find(|(m, _)| m == ns)
                .map(|(_, s)| format!("{s:.6}"))
                .unwrap_or_default();
            csv.push_str(&format!(
                "{},{:.12},{},{},{},{},{:.12e},{}\n",
                lvl.level,
                lvl.h_max,
                ns.label(),
                space_label,
                config.weights.label(),
                config.backend.label(),
                value,
                slope
            ));
        }
    }
    std::fs::write(&csv_path, csv).map_err(runtime)?;
    log::info!("wrote {} and {}", json_path.display(), csv_path.display());
    Ok(())
}

fn check_assertions(config: &ExperimentConfig, report: &ExperimentReport) -> Result<(), RunError> {
    if let Some(sa) = &config.assertions.slope {
        let slope = report
            .slopes
            .iter()
            .find(|(ns, _)| *ns == sa.norm)
            .map(|(_, s)| *s)
            .ok_or_else(|| {
                RunError::AssertionFailed(format!("no slope for norm {}", sa.norm.label()))
            })?;
        if (slope - sa.expected).abs() > sa.tol {
            return Err(RunError::AssertionFailed(format!(
                "slope {:.4} outside {} ± {}",
                slope, sa.expected, sa.tol
            )));
        }
        println!(
            "slope check: {:.4} within {} ± {}",
            slope, sa.expected, sa.tol
        );
    }
    if config.assertions.monotone {
        for (ns_idx, ns) in config.norms.iter().enumerate() {
            let _ = ns;
            let errs: Vec<f64> = report
                .levels
                .iter()
                .map(|l| l.errors[ns_idx].1)
                .collect();
            if errs.windows(2).any(|w| w[1] >= w[0]) {
                return Err(RunError::AssertionFailed(format!(
                    "errors are not strictly decreasing: {errs:?}"
                )));
            }
        }
        println!("monotone decrease check: ok");
    }
    if config.assertions.projection_property && report.projection_property_error > 1e-9 {
        return Err(RunError::AssertionFailed(format!(
            "projection property error {:.3e} above 1e-9",
            report.projection_property_error
        )));
    }
    Ok(())
}

/// Stable, sorted listing of everything addressable from a config.
pub fn catalog_listing() -> String {
    let mut out = String::new();
    out.push_str("mesh generators:\n");
    let mut names = feec::mesh::GENERATOR_NAMES.to_vec();
    names.sort_unstable();
    for name in names {
        out.push_str(&format!("  {name}\n"));
    }
    out.push_str("named spaces:\n");
    let mut names = feec::vecproxy::SPACE_NAMES.to_vec();
    names.sort_unstable();
    for name in names {
        out.push_str(&format!("  {name}\n"));
    }
    out.push_str("fields:\n");
    let mut names = feec::fields::FIELD_NAMES.to_vec();
    names.sort_unstable();
    for name in names {
        out.push_str(&format!("  {name}\n"));
    }
    out.push_str("weights: clement, eg\n");
    out.push_str("backends: l2, taylor\n");
    out
}
