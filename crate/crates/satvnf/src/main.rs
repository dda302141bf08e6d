use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use satvnf::checks::{self, Scale};
use satvnf::emit::{self, Format};
use satvnf::harness::{cost_rows, trace_rows, CostRow};
use satvnf::{run_batch, run_online, run_taguchi, Algorithm, Mode, SimulationConfig};

#[derive(Parser)]
#[command(name = "satvnf", version, about = "SFC placement on LEO satellite edge networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One placement round of `--requests` requests per seed.
    Batch(Common),
    /// Slotted simulation with request arrivals and departures.
    Online(Common),
    /// Sweep of d and beam width over several request counts.
    Taguchi {
        #[command(flatten)]
        common: Common,
        /// Request counts to sweep.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
        m_values: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
    },
    /// Runs the property suites and prints one line per suite.
    Check {
        /// Smaller instance counts.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args)]
struct Common {
    /// JSON simulation config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Algorithm::Pgra)]
    algorithm: Algorithm,
    /// Replaces the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; metrics go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Candidate paths per request.
    #[arg(long)]
    d: Option<usize>,
    /// Beam width.
    #[arg(long)]
    beam: Option<usize>,
    /// Requests per batch instance.
    #[arg(long)]
    requests: Option<usize>,
    /// Satellites: 6, 9, 12 or 15.
    #[arg(long)]
    nodes: Option<u32>,
}

impl Common {
    fn load(&self, mode: Mode) -> anyhow::Result<SimulationConfig> {
        let mut c = match &self.config {
            Some(p) => SimulationConfig::load(p)?,
            None => SimulationConfig::default(),
        };
        c.mode = mode;
        if let Some(s) = self.seed {
            c.seeds = vec![s];
        }
        if let Some(d) = self.d {
            c.game.placement.d = d;
        }
        if let Some(b) = self.beam {
            c.game.placement.beam = b;
        }
        if let Some(m) = self.requests {
            c.requests = m;
        }
        if let Some(n) = self.nodes {
            c.set_nodes(n)?;
        }
        c.validate()?;
        if c.seeds.is_empty() {
            bail!("no seeds configured");
        }
        Ok(c)
    }

    fn file(&self, dir: &Path, stem: &str) -> PathBuf {
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        dir.join(format!("{stem}.{ext}"))
    }

    fn write<T: serde::Serialize>(&self, dir: &Path, stem: &str, records: &[T]) -> anyhow::Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let path = self.file(dir, stem);
        emit::emit(records, self.format, &path).with_context(|| format!("writing {}", path.display()))
    }

    fn print<T: serde::Serialize>(&self, records: &[T]) -> anyhow::Result<()> {
        print!("{}", emit::render(records, self.format)?);
        Ok(())
    }
}

fn batch(common: &Common) -> anyhow::Result<()> {
    let c = common.load(Mode::Batch)?;
    let mut metrics = Vec::new();
    for &seed in &c.seeds {
        let run = run_batch(&c, common.algorithm, seed)?;
        if let Some(dir) = &common.out {
            common.write(dir, &format!("costs_seed{seed}"), &cost_rows(&run.outcome.profile))?;
            if let Some(t) = &run.outcome.trace {
                common.write(dir, &format!("trace_seed{seed}"), &trace_rows(t))?;
            }
            emit::emit_json(&run.requests, &dir.join(format!("requests_seed{seed}.json")))?;
            emit::emit_json(&run.graph, &dir.join("graph.json"))?;
        }
        metrics.push(run.metrics);
    }
    match &common.out {
        Some(dir) => common.write(dir, "metrics", &metrics),
        None => common.print(&metrics),
    }
}

fn online(common: &Common) -> anyhow::Result<()> {
    let c = common.load(Mode::Online)?;
    let mut metrics = Vec::new();
    for &seed in &c.seeds {
        let run = run_online(&c, common.algorithm, seed)?;
        if let Some(dir) = &common.out {
            common.write(dir, &format!("timeline_seed{seed}"), &run.timeline)?;
            let costs: Vec<CostRow> = run.slots.iter().flat_map(|s| cost_rows(&s.outcome.profile)).collect();
            common.write(dir, &format!("costs_seed{seed}"), &costs)?;
            let requests: Vec<_> = run.slots.iter().flat_map(|s| s.requests.iter()).collect();
            emit::emit_json(&requests, &dir.join(format!("requests_seed{seed}.json")))?;
            emit::emit_json(&c.build_graph()?, &dir.join("graph.json"))?;
        }
        metrics.extend(run.metrics);
    }
    match &common.out {
        Some(dir) => common.write(dir, "metrics", &metrics),
        None => common.print(&metrics),
    }
}

fn taguchi(common: &Common, m_values: &[usize], repetitions: usize) -> anyhow::Result<()> {
    let c = common.load(Mode::Batch)?;
    let levels = [1, 2, 4, 8];
    let table = run_taguchi(&c, &levels, &levels, m_values, repetitions, c.seeds[0])?;
    match &common.out {
        Some(dir) => {
            common.write(dir, "taguchi", &table.rows)?;
            common.write(dir, "main_effects", &table.main_effects)
        }
        None => {
            common.print(&table.rows)?;
            println!();
            common.print(&table.main_effects)
        }
    }
}

fn check(quick: bool) -> anyhow::Result<()> {
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let outcomes = checks::run_all(scale);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        bail!("{failed} of {} suites failed", outcomes.len());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Batch(c) => batch(&c),
        Command::Online(c) => online(&c),
        Command::Taguchi { common, m_values, repetitions } => taguchi(&common, &m_values, repetitions),
        Command::Check { quick } => check(quick),
    }
}
