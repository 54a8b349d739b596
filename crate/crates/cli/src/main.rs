use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use marrdt::harness::{
    compare_table, csv_string, load_scenario_file, render_svg, run_once, run_scenario_with, write_csv, Scenario, Scene,
    SEED_ENV,
};
use marrdt::load_map;

#[derive(Parser)]
#[command(name = "marrdt", version, about = "Multi-robot path planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan and simulate one run, writing trace, scene, SVG and metrics
    Plan {
        scenario: PathBuf,
        /// Output directory (default: out/<scenario name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run index within the batch
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Run the full repetition batch and write a CSV
    Bench {
        scenario: PathBuf,
        /// CSV destination (default: the scenario's output, else results/<name>.csv)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run repetitions one after another for undisturbed timing
        #[arg(long)]
        serial: bool,
        /// Override the number of runs
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Render a saved scene file over a map
    Render {
        scene: PathBuf,
        map: PathBuf,
        /// SVG destination (default: the scene path with an .svg extension)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two scenarios and print their metrics side by side
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        runs: Option<usize>,
    },
}

fn load(path: &Path) -> Result<Scenario> {
    let mut sc = load_scenario_file(path).with_context(|| format!("loading scenario {}", path.display()))?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        sc.override_seed(&seed).with_context(|| SEED_ENV.to_string())?;
    }
    Ok(sc)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn plan(scenario: &Path, out: Option<PathBuf>, run: usize) -> Result<()> {
    let sc = load(scenario)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&sc.name));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let output = run_once(&sc, run, true);
    let scene = Scene::default()
        .with_paths(&sc.starts(), &sc.goals(), &output.paths)
        .with_trajectory(&sc.starts(), &output.trajectory, &output.final_positions);
    let scene_text = format!("{}{}", output.snapshot, scene.extras_text());
    let parsed = Scene::parse(&scene_text).context("re-reading the scene")?;

    write(&dir.join("trace.txt"), &output.trace)?;
    write(&dir.join("scene.txt"), &scene_text)?;
    write(&dir.join("trajectory.txt"), &output.trajectory)?;
    write(&dir.join("plan.svg"), &render_svg(&sc.map, &parsed))?;
    write(
        &dir.join("metrics.csv"),
        &csv_string(std::slice::from_ref(&output.metrics)),
    )?;

    let m = &output.metrics;
    println!(
        "{} run {} seed {}: nodes {} (valid {}, invalid {}), avg path {:.3}, plan {:.4}s, run {:.4}s, collisions {}, arrived {}",
        sc.name, m.run_index, m.seed, m.total_nodes, m.valid_nodes, m.invalid_nodes, m.avg_path_length, m.plan_time,
        m.run_time, m.collisions, m.arrived
    );
    if let Some(f) = &m.failure {
        println!("failure: {f}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn bench(scenario: &Path, out: Option<PathBuf>, serial: bool, runs: Option<usize>) -> Result<()> {
    let mut sc = load(scenario)?;
    if let Some(r) = runs {
        anyhow::ensure!(r > 0, "--runs must be at least 1");
        sc.runs = r;
    }
    let rows = run_scenario_with(&sc, serial);
    let dest = out
        .or_else(|| sc.output.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(format!("{}.csv", sc.name)));
    write_csv(&rows, &dest)?;
    let failures = rows.iter().filter(|r| !r.succeeded()).count();
    println!(
        "{}: {} runs, {} failures, wrote {}",
        sc.name,
        rows.len(),
        failures,
        dest.display()
    );
    Ok(())
}

fn render(scene: &Path, map: &Path, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(scene).with_context(|| format!("reading {}", scene.display()))?;
    let parsed = Scene::parse(&text).with_context(|| format!("parsing {}", scene.display()))?;
    let map_text = std::fs::read_to_string(map).with_context(|| format!("reading {}", map.display()))?;
    let grid = load_map(&map_text).with_context(|| format!("parsing {}", map.display()))?;
    let dest = out.unwrap_or_else(|| scene.with_extension("svg"));
    write(&dest, &render_svg(&grid, &parsed))?;
    println!("wrote {}", dest.display());
    Ok(())
}

fn compare(a: &Path, b: &Path, serial: bool, runs: Option<usize>) -> Result<()> {
    let mut sa = load(a)?;
    let mut sb = load(b)?;
    if let Some(r) = runs {
        anyhow::ensure!(r > 0, "--runs must be at least 1");
        sa.runs = r;
        sb.runs = r;
    }
    let ra = run_scenario_with(&sa, serial);
    let rb = run_scenario_with(&sb, serial);
    print!("{}", compare_table(&sa.name, &ra, &sb.name, &rb));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan { scenario, out, run } => plan(&scenario, out, run),
        Command::Bench {
            scenario,
            out,
            serial,
            runs,
        } => bench(&scenario, out, serial, runs),
        Command::Render { scene, map, out } => render(&scene, &map, out),
        Command::Compare { a, b, serial, runs } => compare(&a, &b, serial, runs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
