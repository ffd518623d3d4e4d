//! The stages of a run. Each writes into its own subdirectory of the output
//! directory and returns the record of what it wrote.

use std::path::{Path, PathBuf};

use dphase::grid::GridField;
use dphase::measure::{
    axiom_probe, capacity_estimate, hausdorff_comparison, singular_set_measures, BoxDomain, CapacityDomain,
    CapacityReport, CapacityTarget, ComparisonReport, DoublePhasePhi, PointCloudSet, SplitMeasures,
};
use dphase::regularity::{
    classify_grid, probe_lattice, reports_csv, summarize, Classification, RegularityReport, RegularitySummary,
};
use dphase::solver::{minimize_constrained, SolveReport};
use dphase::{grid::Region, io};
use serde::{Deserialize, Serialize};

use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult, StageContext};
use crate::manifest::{RunManifest, StageRecord, StageWriter};
use crate::recipes::{build_density, build_grid, build_initial_map, check_field, read_field};

pub const SOLVE_DIR: &str = "solve";
pub const ANALYZE_DIR: &str = "analyze";
pub const MEASURE_DIR: &str = "measure";
pub const AXIOMS_DIR: &str = "axioms";
pub const FIELD_STEM: &str = "field";
pub const FLAGGED_FILE: &str = "flagged.json";

/// Singular reports handed from the analyzer to the measure stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagList {
    /// Lattice spacing of the analyzed field.
    pub spacing: f64,
    pub reports: Vec<RegularityReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityDocument {
    pub summary: RegularitySummary,
    pub reports: Vec<RegularityReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CapacityOutcome {
    Computed(CapacityReport),
    Skipped { reason: String },
}

/// Capacities of the two splits relative to the lattice box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityDocument {
    pub domain: CapacityDomain,
    pub p_split: CapacityOutcome,
    pub q_split: CapacityOutcome,
}

fn manifest_for(loaded: &LoadedConfig, command: &str) -> RunManifest {
    RunManifest::new(command, loaded.hash(), loaded.config.seed)
}

fn finish(mut manifest: RunManifest, records: Vec<StageRecord>, out: &Path) -> CliResult<RunManifest> {
    manifest.stages = records;
    manifest.write(out)?;
    Ok(manifest)
}

fn solve_stage(loaded: &LoadedConfig, out: &Path) -> CliResult<(StageRecord, PathBuf)> {
    let mut stage = StageWriter::begin(out, SOLVE_DIR)?;
    let grid = build_grid(loaded)?;
    let density = build_density(loaded, &grid)?;
    let field0 = build_initial_map(loaded, &grid)?;
    let (field, report): (GridField, SolveReport) =
        minimize_constrained(&density, &field0, &Region::full(&grid), &loaded.config.solver).stage("solve")?;
    let sidecar = io::write_field(&field, &stage.path(FIELD_STEM)).map_err(|e| match e {
        dphase::Error::Io(source) => CliError::io(stage.path(FIELD_STEM), source),
        other => CliError::Stage { stage: "solve", source: other },
    })?;
    stage.record(&sidecar.with_extension("bin"));
    stage.record(&sidecar);
    stage.json("solve_report.json", &report)?;
    Ok((stage.finish(), sidecar))
}

fn analyze_stage(loaded: &LoadedConfig, field_path: &Path, out: &Path) -> CliResult<(StageRecord, PathBuf)> {
    let mut stage = StageWriter::begin(out, ANALYZE_DIR)?;
    let grid = build_grid(loaded)?;
    let field = read_field(field_path)?;
    check_field(&field, &grid, loaded.config.grid.target_dim, field_path, "analyze")?;
    let density = build_density(loaded, field.grid())?;
    let a = &loaded.config.analyzer;
    let probes = probe_lattice(&grid, a.probes_per_axis);
    let reports = classify_grid(&density, &field, &probes, &a.radii, &a.options).stage("analyze")?;
    let summary = summarize(&density, &reports, a.gamma).stage("analyze")?;
    stage.text("regularity.csv", &reports_csv(&reports))?;
    let flagged = FlagList {
        spacing: grid.spacing(),
        reports: reports.iter().filter(|r| r.classification == Classification::Singular).cloned().collect(),
    };
    stage.json("regularity.json", &RegularityDocument { summary, reports })?;
    let flag_path = stage.json(FLAGGED_FILE, &flagged)?;
    Ok((stage.finish(), flag_path))
}

fn read_flags(path: &Path) -> CliResult<FlagList> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse { path: path.to_path_buf(), source })
}

fn split_capacity(
    phi: &DoublePhasePhi,
    split: &SplitMeasures,
    domain: &CapacityDomain,
    loaded: &LoadedConfig,
) -> CliResult<CapacityOutcome> {
    let m = &loaded.config.measure;
    if m.capacity_mesh == 0 {
        return Ok(CapacityOutcome::Skipped { reason: "capacity_mesh is 0".into() });
    }
    let target = if split.points.is_empty() {
        CapacityTarget::Empty
    } else {
        CapacityTarget::Points(PointCloudSet::new(split.points.clone(), 0.0).stage("measure")?)
    };
    match capacity_estimate(phi, &target, domain, m.capacity_mesh, &m.capacity_solver) {
        Ok(report) => Ok(CapacityOutcome::Computed(report)),
        // A flagged point too close to the box boundary for the mesh is a
        // property of the data, not a failed run.
        Err(e @ (dphase::Error::Geometry(_) | dphase::Error::Resolution(_))) => {
            Ok(CapacityOutcome::Skipped { reason: e.to_string() })
        }
        Err(e) => Err(CliError::Stage { stage: "measure", source: e }),
    }
}

fn measure_stage(loaded: &LoadedConfig, flags_path: &Path, out: &Path) -> CliResult<StageRecord> {
    let mut stage = StageWriter::begin(out, MEASURE_DIR)?;
    let flags = read_flags(flags_path)?;
    let grid = build_grid(loaded)?;
    let density = build_density(loaded, &grid)?;
    let m = &loaded.config.measure;
    let report = singular_set_measures(
        &flags.reports,
        &loaded.exponents,
        density.coefficient(),
        loaded.config.exponents.delta,
        &m.kappas,
    )
    .stage("measure")?;
    stage.text("sweep_p.csv", &report.p_split.sweep.to_csv())?;
    stage.text("sweep_q.csv", &report.q_split.sweep.to_csv())?;
    stage.json("measures.json", &report)?;

    let phi = DoublePhasePhi::new(loaded.exponents, density.coefficient().clone(), report.delta).stage("measure")?;
    let domain = CapacityDomain::Box(BoxDomain::new(grid.lower().to_vec(), grid.upper()).stage("measure")?);
    let capacity = CapacityDocument {
        p_split: split_capacity(&phi, &report.p_split, &domain, loaded)?,
        q_split: split_capacity(&phi, &report.q_split, &domain, loaded)?,
        domain,
    };
    stage.json("capacity.json", &capacity)?;

    if m.comparison_coverings > 0 {
        let points: Vec<Vec<f64>> = report.p_split.points.iter().chain(&report.q_split.points).cloned().collect();
        if !points.is_empty() {
            let kept: Vec<f64> = m.kappas.iter().copied().filter(|k| !report.dropped_kappas.contains(k)).collect();
            let set = PointCloudSet::cells(points, grid.spacing()).stage("measure")?;
            let comparison: ComparisonReport =
                hausdorff_comparison(&phi, &set, &kept, m.comparison_coverings, loaded.config.seed).stage("measure")?;
            stage.json("comparison.json", &comparison)?;
        }
    }
    Ok(stage.finish())
}

/// Minimizes from the configured initial map and writes the field and its
/// solve report.
pub fn cmd_solve(loaded: &LoadedConfig, out: &Path) -> CliResult<RunManifest> {
    let (record, _) = solve_stage(loaded, out)?;
    finish(manifest_for(loaded, "solve"), vec![record], out)
}

/// Classifies the probe lattice of the field at `field_path` (a sidecar).
pub fn cmd_analyze(loaded: &LoadedConfig, field_path: &Path, out: &Path) -> CliResult<RunManifest> {
    let (record, _) = analyze_stage(loaded, field_path, out)?;
    finish(manifest_for(loaded, "analyze"), vec![record], out)
}

/// Measures the flagged points listed in `flags_path`.
pub fn cmd_measure(loaded: &LoadedConfig, flags_path: &Path, out: &Path) -> CliResult<RunManifest> {
    let record = measure_stage(loaded, flags_path, out)?;
    finish(manifest_for(loaded, "measure"), vec![record], out)
}

pub fn cmd_pipeline(loaded: &LoadedConfig, out: &Path) -> CliResult<RunManifest> {
    let (solve, field) = solve_stage(loaded, out)?;
    let (analyze, flags) = analyze_stage(loaded, &field, out)?;
    let measure = measure_stage(loaded, &flags, out)?;
    finish(manifest_for(loaded, "pipeline"), vec![solve, analyze, measure], out)
}

/// Probes the structural assumptions of the configured measure density.
/// Failed checks are reported, not raised.
pub fn cmd_probe_axioms(loaded: &LoadedConfig, out: &Path) -> CliResult<RunManifest> {
    let grid = build_grid(loaded)?;
    let density = build_density(loaded, &grid)?;
    let delta = loaded.config.exponents.delta.unwrap_or(0.0);
    let phi = DoublePhasePhi::new(loaded.exponents, density.coefficient().clone(), delta).stage("probe-axioms")?;
    let mut stage = StageWriter::begin(out, AXIOMS_DIR)?;
    let report = axiom_probe(&phi, loaded.config.measure.axiom_budget, loaded.config.seed).stage("probe-axioms")?;
    stage.json("axioms.json", &report)?;
    finish(manifest_for(loaded, "probe-axioms"), vec![stage.finish()], out)
}
