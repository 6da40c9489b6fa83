//! Command-line front end: shape checks, stroke metrics, optimization
//! runs, swim simulation, flow-field export, and SVG/CSV/JSON artifacts.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 non-physical input,
//! 3 optimizer non-convergence. Every command is deterministic for fixed
//! inputs: identical invocations produce byte-identical outputs. The
//! viscosity is fixed at `mu = 1` in all outputs; the drag coefficient
//! does not depend on it.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::SwimError;
use crate::flow::{self, Fluid};
use crate::optimizer::{self, OptimizationConfig, OptimizationResult};
use crate::shape::{ConeStatus, LocatedShape, ShapePoint};
use crate::stroke::{
    circle_stroke, elongated_stroke, squirmer_drag_analytic, Stroke, DEFAULT_QUAD_ORDER,
};
use crate::svg;

/// Cone-classification tolerance used by the CLI, relative to W. Loose
/// enough that coordinates typed with ~6 significant digits still land
/// on the boundary they were aimed at.
const CLI_CONE_TOL: f64 = 1e-6;

/// Entry point for the `swim` binary; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parse `args` (including the program name) and execute. Exposed so
/// tests can drive the CLI in-process.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

#[derive(Parser)]
#[command(
    name = "swim",
    version,
    about = "Two-dimensional low-Reynolds swimmer toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shape-space queries: cone classification and boundary rendering.
    #[command(subcommand)]
    Shape(ShapeCommand),
    /// Stroke metrics and swim simulation.
    #[command(subcommand)]
    Stroke(StrokeCommand),
    /// Search for the minimum-drag stroke on the unit-area sheet.
    Optimize(OptimizeArgs),
    /// Stokes-flow field export.
    #[command(subcommand)]
    Flow(FlowCommand),
    /// Canned parameter scans written as CSV tables.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum ShapeCommand {
    /// Classify (W, Y, Z) against the physical cone and print a JSON
    /// report with the margins, area, and any cusp angles.
    Check(ShapeCheckArgs),
    /// Render the boundary curve as a standalone SVG file.
    Render(ShapeRenderArgs),
}

#[derive(Args)]
struct ShapeCheckArgs {
    #[arg(allow_negative_numbers = true)]
    w: f64,
    #[arg(allow_negative_numbers = true)]
    y: f64,
    #[arg(allow_negative_numbers = true)]
    z: f64,
    /// Classification tolerance relative to W.
    #[arg(long, default_value_t = CLI_CONE_TOL)]
    tol: f64,
}

#[derive(Args)]
struct ShapeRenderArgs {
    #[arg(allow_negative_numbers = true)]
    w: f64,
    #[arg(allow_negative_numbers = true)]
    y: f64,
    #[arg(allow_negative_numbers = true)]
    z: f64,
    /// Horizontal position of the swimmer's center.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x: f64,
    /// Boundary sample count.
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum StrokeCommand {
    /// Print length, displacement, dissipation, period, and drag for a
    /// stroke file as JSON.
    Metrics(StrokeFileArgs),
    /// Render a frame strip of one swim cycle and write the trajectory
    /// X(t) as CSV.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct StrokeFileArgs {
    /// Stroke JSON file: {"nodes": [[W,Y,Z], ...], "times": [...], "period": t}.
    stroke: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Stroke JSON file.
    stroke: PathBuf,
    /// Number of snapshots in the frame strip.
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Output directory for frames.svg and trajectory.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Optional config JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for result.json, trace.csv, stroke.json, chart.svg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FlowCommand {
    /// Evaluate velocity and pressure on a polar grid around the body
    /// and write (x, y, v_x, v_y, p) rows as CSV.
    Field(FlowFieldArgs),
}

#[derive(Args)]
struct FlowFieldArgs {
    #[arg(allow_negative_numbers = true)]
    w: f64,
    #[arg(allow_negative_numbers = true)]
    y: f64,
    #[arg(allow_negative_numbers = true)]
    z: f64,
    #[arg(allow_negative_numbers = true)]
    dw: f64,
    #[arg(allow_negative_numbers = true)]
    dy: f64,
    #[arg(allow_negative_numbers = true)]
    dz: f64,
    /// Outer grid radius in the circle-domain coordinate.
    #[arg(long, default_value_t = 5.0)]
    r_max: f64,
    /// Number of radial rings, spaced uniformly from 1 to r_max.
    #[arg(long, default_value_t = 16)]
    nr: usize,
    /// Number of angular samples per ring.
    #[arg(long, default_value_t = 48)]
    ntheta: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Which table to produce.
    name: ExperimentName,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    /// Treadmill discs of shrinking radius vs the closed-form drag.
    SquirmerScan,
    /// Long thin strokes: drag grows while displacement only grows
    /// logarithmically.
    LargeStroke,
}

fn dispatch(command: Command) -> Result<i32, SwimError> {
    match command {
        Command::Shape(ShapeCommand::Check(args)) => shape_check(&args),
        Command::Shape(ShapeCommand::Render(args)) => shape_render(&args),
        Command::Stroke(StrokeCommand::Metrics(args)) => stroke_metrics(&args),
        Command::Stroke(StrokeCommand::Simulate(args)) => stroke_simulate(&args),
        Command::Optimize(args) => optimize(&args),
        Command::Flow(FlowCommand::Field(args)) => flow_field(&args),
        Command::Experiment(args) => experiment(&args),
    }
}

// ----------------------------------------------------------------------
// shape

#[derive(Serialize)]
struct ShapeReport {
    status: &'static str,
    g1: f64,
    g2: f64,
    g3: f64,
    area: f64,
    cusp_angles: Vec<f64>,
}

fn shape_check(args: &ShapeCheckArgs) -> Result<i32, SwimError> {
    if !args.tol.is_finite() || args.tol < 0.0 {
        return Err(SwimError::InvalidArgument(
            "tolerance must be finite and nonnegative".into(),
        ));
    }
    let shape = ShapePoint::new(args.w, args.y, args.z);
    let status = shape.cone_classify(args.tol);
    let [g1, g2, g3] = shape.cone_margins();
    let (label, cusp_angles) = match status {
        ConeStatus::Interior => ("interior", vec![]),
        ConeStatus::Boundary { cusp_angles } => ("boundary", cusp_angles),
        ConeStatus::Outside => ("outside", vec![]),
    };
    let report = ShapeReport {
        status: label,
        g1,
        g2,
        g3,
        area: shape.area(),
        cusp_angles,
    };
    println!("{}", json_line(&report)?);
    Ok(if label == "outside" { 2 } else { 0 })
}

fn shape_render(args: &ShapeRenderArgs) -> Result<i32, SwimError> {
    let shape = ShapePoint::new(args.w, args.y, args.z);
    if shape.cone_classify(CLI_CONE_TOL).is_outside() {
        return Err(SwimError::NotInterior {
            w: args.w,
            y: args.y,
            z: args.z,
        });
    }
    let located = LocatedShape::new(shape, args.x);
    let scene = svg::shape_scene(&located, args.samples.max(3))?;
    write_text(&args.out, &scene.finish())?;
    Ok(0)
}

// ----------------------------------------------------------------------
// stroke

fn read_stroke(path: &Path) -> Result<Stroke, SwimError> {
    Stroke::from_json(&fs::read_to_string(path)?)
}

fn stroke_metrics(args: &StrokeFileArgs) -> Result<i32, SwimError> {
    let stroke = read_stroke(&args.stroke)?;
    let metrics = stroke.metrics(1.0)?;
    let mut value = serde_json::to_value(&metrics)
        .map_err(|e| SwimError::Parse(e.to_string()))?;
    if metrics.drag.is_none() {
        value.as_object_mut().expect("metrics is an object").insert(
            "reason".into(),
            "net displacement is negligible; drag is undefined".into(),
        );
    }
    println!(
        "{}",
        serde_json::to_string(&value).map_err(|e| SwimError::Parse(e.to_string()))?
    );
    Ok(0)
}

fn stroke_simulate(args: &SimulateArgs) -> Result<i32, SwimError> {
    let stroke = read_stroke(&args.stroke)?;
    if args.frames == 0 {
        return Err(SwimError::InvalidArgument(
            "need at least one frame".into(),
        ));
    }
    // Same sample pitch as the frame strip, so the strip's last frame
    // sits exactly at the CSV's final displacement.
    let boundary_samples = 256;
    let per = (boundary_samples.max(stroke.node_count()) + args.frames - 1) / args.frames;
    let trace = stroke.simulate(args.frames * per)?;
    let mut csv = String::from("t,X\n");
    for (t, located) in &trace.samples {
        let _ = writeln!(csv, "{t},{x}", x = located.x);
    }
    fs::create_dir_all(&args.out)?;
    write_text(&args.out.join("trajectory.csv"), &csv)?;
    let scene = svg::frames_scene(&stroke, args.frames, boundary_samples)?;
    write_text(&args.out.join("frames.svg"), &scene.finish())?;
    Ok(0)
}

// ----------------------------------------------------------------------
// optimize

#[derive(Serialize)]
struct OptimizeSummary {
    drag: f64,
    displacement: f64,
    length: f64,
    contact_arcs: usize,
    el_residual: f64,
    converged: bool,
}

fn optimize(args: &OptimizeArgs) -> Result<i32, SwimError> {
    let config = match &args.config {
        Some(path) => serde_json::from_str::<OptimizationConfig>(&fs::read_to_string(path)?)
            .map_err(|e| SwimError::Parse(e.to_string()))?,
        None => OptimizationConfig::default(),
    };
    let result = optimizer::optimize(&config)?;
    fs::create_dir_all(&args.out)?;
    write_optimize_artifacts(&args.out, &result)?;
    let summary = OptimizeSummary {
        drag: result.drag,
        displacement: result.displacement,
        length: result.length,
        contact_arcs: result.contacts.len(),
        el_residual: result.el_residual,
        converged: result.converged,
    };
    println!("{}", json_line(&summary)?);
    Ok(if result.converged { 0 } else { 3 })
}

fn write_optimize_artifacts(out: &Path, result: &OptimizationResult) -> Result<(), SwimError> {
    let mut json = serde_json::to_string_pretty(result)
        .map_err(|e| SwimError::Parse(e.to_string()))?;
    json.push('\n');
    write_text(&out.join("result.json"), &json)?;

    let mut trace = String::from("level,stage,penalty_weight,objective,merit,infeasibility\n");
    for entry in &result.trace {
        let _ = writeln!(
            trace,
            "{},{},{},{},{},{}",
            entry.level,
            entry.stage,
            entry.penalty_weight,
            entry.objective,
            entry.merit,
            entry.infeasibility
        );
    }
    write_text(&out.join("trace.csv"), &trace)?;

    write_text(&out.join("stroke.json"), &result.stroke.to_json())?;

    let scene = svg::chart_scene(&result.stroke, &result.contacts);
    write_text(&out.join("chart.svg"), &scene.finish())?;
    Ok(())
}

// ----------------------------------------------------------------------
// flow

fn flow_field(args: &FlowFieldArgs) -> Result<i32, SwimError> {
    let shape = ShapePoint::new(args.w, args.y, args.z);
    // Cusped boundaries are refused: the velocity blows up at a cusp.
    if !shape.cone_classify(1e-9).is_interior() {
        return Err(SwimError::NotInterior {
            w: args.w,
            y: args.y,
            z: args.z,
        });
    }
    if !(args.r_max > 1.0) || args.nr < 2 || args.ntheta < 4 {
        return Err(SwimError::InvalidArgument(
            "need r_max > 1, nr >= 2, ntheta >= 4".into(),
        ));
    }
    let fluid = Fluid::new(1.0)?;
    let rate = flow::with_connection(&shape, args.dw, args.dy, args.dz)?;
    let mut csv = String::from("x,y,v_x,v_y,p\n");
    for i in 0..args.nr {
        let radius = 1.0 + (args.r_max - 1.0) * i as f64 / (args.nr - 1) as f64;
        for j in 0..args.ntheta {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / args.ntheta as f64;
            let s = Complex64::from_polar(radius, theta);
            let position = shape.map(s);
            let v = flow::velocity(&shape, &rate, s)?;
            let p = flow::pressure(&shape, &rate, &fluid, s)?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                position.re, position.im, v.re, v.im, p
            );
        }
    }
    write_text(&args.out, &csv)?;
    Ok(0)
}

// ----------------------------------------------------------------------
// experiment

fn experiment(args: &ExperimentArgs) -> Result<i32, SwimError> {
    fs::create_dir_all(&args.out)?;
    match args.name {
        ExperimentName::SquirmerScan => {
            let mut csv = String::from("r,drag,analytic,ratio\n");
            for &r in &[0.2, 0.1, 0.05, 0.02, 0.01] {
                let stroke = circle_stroke(1.0, r, 4096, -1)?;
                let drag = stroke.drag(1.0)?;
                let analytic = squirmer_drag_analytic(1.0, r);
                let _ = writeln!(csv, "{r},{drag},{analytic},{}", drag / analytic);
            }
            write_text(&args.out.join("squirmer_scan.csv"), &csv)?;
        }
        ExperimentName::LargeStroke => {
            let mut csv = String::from("ell,length,displacement,drag\n");
            for &ell in &[10.0, 30.0, 100.0] {
                let stroke = elongated_stroke(ell, 0.5, 1024)?;
                let length = stroke.length();
                let displacement = stroke.displacement(DEFAULT_QUAD_ORDER)?;
                let drag = stroke.drag(1.0)?;
                let _ = writeln!(csv, "{ell},{length},{displacement},{drag}");
            }
            write_text(&args.out.join("large_stroke.csv"), &csv)?;
        }
    }
    Ok(0)
}

// ----------------------------------------------------------------------
// plumbing

fn json_line<T: Serialize>(value: &T) -> Result<String, SwimError> {
    serde_json::to_string(value).map_err(|e| SwimError::Parse(e.to_string()))
}

fn write_text(path: &Path, contents: &str) -> Result<(), SwimError> {
    fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        run_from(std::iter::once("swim").chain(args.iter().copied()))
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(&["no-such-command"]), 1);
        assert_eq!(run(&["shape", "check", "1", "0"]), 1);
        assert_eq!(run(&["experiment", "unknown", "--out", "/tmp/x"]), 1);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(&["--help"]), 0);
        assert_eq!(run(&["shape", "--help"]), 0);
    }

    #[test]
    fn shape_check_exit_codes() {
        assert_eq!(run(&["shape", "check", "1", "0", "0"]), 0);
        assert_eq!(run(&["shape", "check", "1", "2", "0"]), 2);
        // Boundary within the CLI tolerance: coordinates typed to six digits.
        assert_eq!(run(&["shape", "check", "1", "0.2", "0.565685"]), 0);
        assert_eq!(run(&["shape", "check", "1", "-0.2", "0.3"]), 0);
    }

    #[test]
    fn missing_stroke_file_is_io_error() {
        assert_eq!(run(&["stroke", "metrics", "/nonexistent/stroke.json"]), 1);
    }
}
