use std::path::PathBuf;

use anyhow::{Context, Result};
use causal_cli::config::{Experiment, ExperimentConfig, Overrides};
use causal_cli::render::render_svg;
use causal_cli::{run_experiment, sample_map, Model};
use causal_core::walk::run_walk;
use causal_core::{LazyMap, OffspringDistribution};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "causal", version, about = "Experiments on random causal maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML file with any of the flags below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Offspring law as `count:prob` pairs, e.g. `0:1/4,2:3/4`.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Result<Overrides> {
        let file = match &self.config {
            Some(p) => Overrides::from_file(p)?,
            None => Overrides::default(),
        };
        let flags = Overrides {
            mu: self.mu.clone(),
            depth: self.depth,
            steps: self.steps,
            trials: self.trials,
            k: self.k,
            lambda: self.lambda,
            seed: self.seed,
            out: self.out.clone(),
        };
        Ok(file.merge(flags))
    }
}

#[derive(Args, Clone)]
struct MapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "causal")]
    model: Model,
    /// Trees on each side of tree 0 in half-plane windows.
    #[arg(long, default_value_t = 6)]
    window: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a finite map and write its edge list.
    Sample(MapArgs),
    /// Run one walk on the half-plane and write its trace.
    Walk(Common),
    /// Speed of the walk on the half-plane.
    Speed(Common),
    /// Regeneration increments of half-plane walks.
    Regen(Common),
    /// Root-surrounding geodesic triangles in causal maps.
    Hyper(Common),
    /// Resistance from spine vertices to the boundary of slices.
    Resist(Common),
    /// Peeling exploration bounds.
    Explore(Common),
    /// Frequency of k-bad roots.
    Kbad(Common),
    /// Boundary markers of paired walks.
    Boundary(Common),
    /// Escape probability from a slice spine vertex.
    Escape(Common),
    /// Draw a finite map as SVG.
    Render(MapArgs),
}

struct MapSettings {
    law: OffspringDistribution,
    depth: usize,
    seed: u64,
    out: PathBuf,
}

fn map_settings(c: &Common, default_mu: &str, default_depth: usize) -> Result<MapSettings> {
    let o = c.overrides()?;
    let mu = o.mu.unwrap_or_else(|| default_mu.to_string());
    let law = mu.parse().with_context(|| format!("--mu `{mu}`"))?;
    Ok(MapSettings {
        law,
        depth: o.depth.unwrap_or(default_depth),
        seed: o.seed.unwrap_or(0),
        out: o.out.unwrap_or_else(|| PathBuf::from("out")),
    })
}

fn default_map_mu(model: Model) -> &'static str {
    match model {
        Model::Halfplane => "1:1/2,2:1/2",
        _ => "0:1/4,2:3/4",
    }
}

fn experiment(e: Experiment, c: &Common) -> Result<()> {
    let cfg = ExperimentConfig::resolve(e, c.overrides()?)?;
    let summary = run_experiment(&cfg)?;
    println!("{} ({} trials) -> {}", e, summary.trials, cfg.out_dir.display());
    for m in &summary.metrics {
        println!("  {} = {}", m.metric, m.value);
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sample(a) => {
            let s = map_settings(&a.common, default_map_mu(a.model), 8)?;
            let m = sample_map(a.model, &s.law, s.depth, a.window, s.seed)?;
            std::fs::create_dir_all(&s.out).with_context(|| s.out.display().to_string())?;
            let path = s.out.join("map.txt");
            std::fs::write(&path, m.to_text()).with_context(|| path.display().to_string())?;
            println!("{} vertices, {} edges -> {}", m.n_vertices(), m.edges().len(), path.display());
        }
        Command::Render(a) => {
            let s = map_settings(&a.common, default_map_mu(a.model), 5)?;
            let m = sample_map(a.model, &s.law, s.depth, a.window, s.seed)?;
            std::fs::create_dir_all(&s.out).with_context(|| s.out.display().to_string())?;
            let path = s.out.join("map.svg");
            render_svg(&m, &path)?;
            println!("{} vertices -> {}", m.n_vertices(), path.display());
        }
        Command::Walk(c) => {
            let o = c.overrides()?;
            let mu = o.mu.unwrap_or_else(|| "1:1/2,2:1/2".into());
            let law: OffspringDistribution = mu.parse().with_context(|| format!("--mu `{mu}`"))?;
            let seed = o.seed.unwrap_or(0);
            let mut h = LazyMap::half_plane(&law, seed)?;
            let r = h.root();
            let trace = run_walk(&mut h, r, o.steps.unwrap_or(10_000), o.lambda.unwrap_or(1.0), seed)?;
            let out = o.out.unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            let path = out.join("walk.txt");
            std::fs::write(&path, trace.to_text()).with_context(|| path.display().to_string())?;
            println!("{} steps, final height {} -> {}", trace.steps(), trace.final_height(), path.display());
        }
        Command::Speed(c) => experiment(Experiment::Speed, &c)?,
        Command::Regen(c) => experiment(Experiment::Regen, &c)?,
        Command::Hyper(c) => experiment(Experiment::Hyperbolicity, &c)?,
        Command::Resist(c) => experiment(Experiment::Resistance, &c)?,
        Command::Explore(c) => experiment(Experiment::Explore, &c)?,
        Command::Kbad(c) => experiment(Experiment::Kbad, &c)?,
        Command::Boundary(c) => experiment(Experiment::Boundary, &c)?,
        Command::Escape(c) => experiment(Experiment::Escape, &c)?,
    }
    Ok(())
}
