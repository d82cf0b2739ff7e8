use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gossipchain::engine::{Scenario, SimState};
use gossipchain::metrics::{
    read_sweep_csv, write_chain_dump, write_coverage_csv, write_sweep_csv, TableFormat,
};
use gossipchain::report::build_report;
use gossipchain::sweep::{default_grid, run_point, seeds_for};
use gossipchain::{parse_config, SimConfig};

#[derive(Parser)]
#[command(
    name = "gossipchain",
    version,
    about = "Gossip/blockchain network simulator with a filtering attack"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the overlay and print its statistics.
    Topology {
        #[command(flatten)]
        config: ConfigArgs,
        /// Write the edge list ("u v" per line) here.
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Run one simulation.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Write whitespace-separated tables instead of CSV.
        #[arg(long)]
        gnuplot: bool,
        /// Also write chain.csv with every node's tip.
        #[arg(long)]
        chain_dump: bool,
    },
    /// Run many seeds per attacker count and aggregate coverage.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Comma-separated attacker counts. Defaults to a grid over [0, NODES − 1].
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<u32>>,
        /// Seeds per attacker count, starting at MASTER_SEED.
        #[arg(long, default_value_t = 10)]
        seeds: u32,
        /// Parallel runs. Defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Normalize a sweep and locate the coverage cutoff.
    Report {
        /// Sweep CSV written by `sweep`.
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        nodes: u32,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of KEY=VALUE lines. Unset keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                parse_config(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => SimConfig::default(),
        };
        Ok(base.with_overrides(self.overrides.iter().map(String::as_str))?)
    }
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, env = "GOSSIPCHAIN_OUT", default_value = "out")]
    out_dir: PathBuf,
}

impl OutArgs {
    fn dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(&self.out_dir)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Gnuplot,
}

impl Format {
    fn table(self) -> TableFormat {
        match self {
            Format::Csv => TableFormat::Csv,
            Format::Gnuplot => TableFormat::Gnuplot,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Gnuplot => "dat",
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn topology(config: SimConfig, edges: Option<PathBuf>) -> Result<()> {
    let Scenario { overlay, .. } = Scenario::from_config(&config)?;
    println!("nodes={}", overlay.node_count());
    println!("edges={}", overlay.edge_count());
    println!("mean_degree={:.6}", overlay.mean_degree());
    let degrees =
        (0..overlay.node_count()).map(|i| overlay.neighbors(gossipchain::NodeId(i)).len());
    println!("min_degree={}", degrees.clone().min().unwrap_or(0));
    println!("max_degree={}", degrees.max().unwrap_or(0));
    println!("connected={}", overlay.is_connected());
    if let Some(path) = edges {
        let mut out = create(&path)?;
        overlay.write_edge_list(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn run(config: SimConfig, dir: &Path, format: Format, chain_dump: bool) -> Result<()> {
    fs::write(dir.join("effective.conf"), config.render())?;
    let mut sim = SimState::from_config(config)?;
    sim.run_to_end();
    let metrics = sim.metrics();
    let mut out = create(&dir.join(format!("coverage.{}", format.extension())))?;
    write_coverage_csv(&mut out, &metrics.records, format.table())?;
    let summary = sim.summary(&metrics).render();
    fs::write(dir.join("summary.txt"), &summary)?;
    if chain_dump {
        write_chain_dump(create(&dir.join("chain.csv"))?, &sim.chain_dump())?;
    }
    print!("{summary}");
    Ok(())
}

fn sweep(
    config: SimConfig,
    dir: &Path,
    grid: Option<Vec<u32>>,
    seeds: u32,
    jobs: Option<usize>,
) -> Result<()> {
    if seeds == 0 {
        bail!("--seeds must be ≥ 1");
    }
    if let Some(jobs) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let grid = grid.unwrap_or_else(|| default_grid(config.nodes));
    let seed_list = seeds_for(&config, seeds);
    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir)?;
    fs::write(dir.join("effective.conf"), config.render())?;
    let mut points = Vec::with_capacity(grid.len());
    for &attackers in &grid {
        let path = points_dir.join(format!("attackers-{attackers:05}.csv"));
        let existing = File::open(&path).ok().and_then(|f| read_sweep_csv(f).ok());
        let point = match existing.as_deref() {
            Some([p]) if p.attacker_count == attackers && p.seeds_used == seeds => {
                eprintln!("attackers={attackers}: reusing {}", path.display());
                *p
            }
            _ => {
                let (p, _) = run_point(&config, attackers, &seed_list)?;
                write_sweep_csv(create(&path)?, &[p], TableFormat::Csv)?;
                eprintln!("attackers={attackers}: mean_reached={:.3}", p.mean_reached);
                p
            }
        };
        points.push(point);
    }
    let path = dir.join("sweep.csv");
    write_sweep_csv(create(&path)?, &points, TableFormat::Csv)?;
    println!("{}", path.display());
    Ok(())
}

fn report(sweep: &Path, nodes: u32, format: Format, dir: &Path) -> Result<()> {
    let file = File::open(sweep).with_context(|| format!("opening {}", sweep.display()))?;
    let points = read_sweep_csv(file).with_context(|| format!("reading {}", sweep.display()))?;
    let report = build_report(&points, nodes)?;
    let mut out = create(&dir.join(format!("plot.{}", format.extension())))?;
    report.write_plot_data(&mut out, format.table())?;
    let summary = report.render_summary();
    fs::write(dir.join("cutoff.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Topology { config, edges } => topology(config.load()?, edges),
        Command::Run {
            config,
            out,
            gnuplot,
            chain_dump,
        } => {
            let format = if gnuplot {
                Format::Gnuplot
            } else {
                Format::Csv
            };
            run(config.load()?, out.dir()?, format, chain_dump)
        }
        Command::Sweep {
            config,
            out,
            grid,
            seeds,
            jobs,
        } => sweep(config.load()?, out.dir()?, grid, seeds, jobs),
        Command::Report {
            sweep,
            nodes,
            format,
            out,
        } => report(&sweep, nodes, format, out.dir()?),
    }
}
