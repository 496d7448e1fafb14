//! Command-line front end. The `msnas` binary only forwards to [`run`].
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::{decode_table, encode_table, export_dot, parameter_count, validate_graph, ArchitectureGraph, TABLE5};
use crate::net::{build_baseline, compile, BaselineName};
use crate::proxy::{evaluate, train, ProxyDataset};
use crate::search::{compare_strategies, history_csv, load_checkpoint, save_checkpoint, SearchState, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "msnas", version, about = "Evolve multi-stream video CNN architectures on a synthetic proxy task")]
struct Cli {
    /// Directory all outputs are written to [default: config `output_dir`,
    /// then $MSNAS_OUTPUT_DIR, then ./msnas-out].
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one evolutionary search.
    Evolve(EvolveArgs),
    /// Run several strategies over several seeds and summarise them.
    Compare(CompareArgs),
    /// Build a named baseline or a table file and report on it.
    Build(BuildArgs),
    /// Train and score a single architecture.
    Train(TrainArgs),
    /// Check architecture tables, run configs, checkpoints or dataset files.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: desk or compare.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Candidates trained in parallel.
    #[arg(long)]
    workers: Option<usize>,
    /// Training iterations per candidate.
    #[arg(long)]
    iterations: Option<usize>,
    /// Load the proxy dataset from this file instead of generating it.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Also write the proxy dataset to `dataset.bin` in the output directory.
    #[arg(long)]
    save_dataset: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Evolution rounds after initialisation.
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    init_rounds: Option<usize>,
    /// guided, standard or random.
    #[arg(long)]
    strategy: Option<String>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Stop after this many rounds in total (the checkpoint allows resuming).
    #[arg(long)]
    stop_after: Option<usize>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',', default_value = "guided,standard,random")]
    strategies: Vec<String>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    init_rounds: Option<usize>,
}

#[derive(Args, Debug)]
struct BuildArgs {
    /// Baseline name or path to a table file.
    #[arg(required_unless_present = "table5")]
    target: Option<String>,
    /// Build the shipped four-stem reference architecture.
    #[arg(long)]
    table5: bool,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Write a DOT rendering to the output directory.
    #[arg(long)]
    dot: bool,
    /// Write the table form to the output directory.
    #[arg(long)]
    save: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Table file of the architecture to train.
    arch: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Name of the gate-annotated table written to the output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Files to check; the kind is taken from the extension (.toml, .json, .bin) or else read as a table.
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = std::io::stdout();
    match dispatch(cli, &mut out.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let dir = cli.output_dir;
    match cli.command {
        Command::Evolve(a) => cmd_evolve(a, dir, out),
        Command::Compare(a) => cmd_compare(a, dir, out),
        Command::Build(a) => cmd_build(a, dir, out),
        Command::Train(a) => cmd_train(a, dir, out),
        Command::Validate(a) => cmd_validate(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

impl ConfigArgs {
    fn resolve(&self, flag_dir: Option<PathBuf>) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => RunConfig::desk(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.search.workers = w;
        }
        if let Some(i) = self.iterations {
            cfg.trainer.iterations = i;
        }
        if flag_dir.is_some() {
            cfg.output_dir = flag_dir;
        }
        Ok(cfg)
    }

    fn data(&self, cfg: &RunConfig, dir: &Path) -> Result<Arc<ProxyDataset>> {
        let data = match &self.dataset {
            Some(path) => ProxyDataset::read_from(path)?,
            None => cfg.dataset()?,
        };
        if data.num_classes() != cfg.dataset.num_classes() {
            return Err(Error::Config(format!(
                "dataset has {} classes but the configuration expects {}",
                data.num_classes(),
                cfg.dataset.num_classes()
            )));
        }
        if self.save_dataset {
            data.write_to(&dir.join("dataset.bin"))?;
        }
        Ok(Arc::new(data))
    }
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.resolve_output_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_evolve(a: EvolveArgs, dir: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let mut cfg = a.cfg.resolve(dir)?;
    if let Some(r) = a.rounds {
        cfg.search.rounds = r;
    }
    if let Some(r) = a.init_rounds {
        cfg.search.init_rounds = r;
    }
    if let Some(s) = &a.strategy {
        cfg.strategy = s.parse()?;
    }
    if a.cfg.print_config {
        return emit(out, &cfg.annotated_toml());
    }
    cfg.validate()?;
    let dir = output_dir(&cfg)?;
    let mut state = match &a.resume {
        Some(path) => {
            let s = load_checkpoint(path)?;
            emit(out, &format!("resuming {} seed {} at round {}\n", s.strategy, s.seed, s.round))?;
            s
        }
        None => SearchState::new(cfg.strategy, cfg.seed),
    };
    let setup = cfg.setup_with(a.cfg.data(&cfg, &dir)?);
    write_file(&dir.join("config.toml"), &cfg.annotated_toml())?;
    let ckpt = dir.join("checkpoint.json");
    let total = setup.search.total_rounds();
    let stop = a.stop_after.unwrap_or(total).min(total);
    while state.round < stop {
        let before = state.round;
        setup.step(&mut state)?;
        save_checkpoint(&state, &ckpt)?;
        for h in &state.history[before..] {
            emit(out, &format!("round {:>4}  child {:.4}  top3 {:.4}  best {:.4}  {}\n", h.round, h.child_fitness, h.top3_mean, h.best, h.log))?;
        }
    }
    write_file(&dir.join("history.csv"), &history_csv([&state]))?;
    if let Some(best) = &state.best {
        write_file(&dir.join("best.arch"), &encode_table(&best.graph))?;
        write_file(&dir.join("best.dot"), &export_dot(&best.graph))?;
        emit(out, &format!("best fitness {:.4} after {} rounds; outputs in {}\n", best.fitness, state.round, dir.display()))?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs, dir: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let mut cfg = a.cfg.resolve(dir)?;
    if let Some(r) = a.rounds {
        cfg.search.rounds = r;
    }
    if let Some(r) = a.init_rounds {
        cfg.search.init_rounds = r;
    }
    let strategies: Vec<Strategy> = a.strategies.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    if a.cfg.print_config {
        return emit(out, &cfg.annotated_toml());
    }
    cfg.validate()?;
    let dir = output_dir(&cfg)?;
    let setup = cfg.setup_with(a.cfg.data(&cfg, &dir)?);
    write_file(&dir.join("config.toml"), &cfg.annotated_toml())?;
    let cmp = compare_strategies(&setup, &strategies, &a.seeds)?;
    write_file(&dir.join("compare.csv"), &cmp.csv())?;
    let table = cmp.summary_table();
    write_file(&dir.join("summary.txt"), &table)?;
    emit(out, &table)
}

fn load_arch(path: &Path) -> Result<ArchitectureGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_table(&text)
}

fn cmd_build(a: BuildArgs, dir: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let cfg = a.cfg.resolve(dir)?;
    if a.cfg.print_config {
        return emit(out, &cfg.annotated_toml());
    }
    let (name, g) = if a.table5 {
        ("table5".to_string(), decode_table(TABLE5)?)
    } else {
        let target = a.target.as_deref().unwrap_or_default();
        match target.parse::<BaselineName>() {
            Ok(b) => (b.to_string(), build_baseline(b, cfg.search.budget, &cfg.schedule)?),
            Err(_) if Path::new(target).exists() => {
                let stem = Path::new(target).file_stem().map_or("arch".into(), |s| s.to_string_lossy().into_owned());
                (stem, load_arch(Path::new(target))?)
            }
            Err(_) => return Err(Error::UnknownName(format!("{target} is neither a baseline nor a file"))),
        }
    };
    validate_graph(&g).into_result()?;
    let net_cfg = cfg.net_config();
    let counts = parameter_count(&g, &cfg.schedule, &net_cfg.head)?;
    compile(&g, &net_cfg)?;
    let stems = g.stems().len();
    emit(out, &format!("{name}: valid\n  nodes {} ({stems} stems, {} blocks), edges {}\n", g.num_nodes(), g.num_nodes() - stems, g.num_edges()))?;
    for level in 1..=4u8 {
        emit(out, &format!("  level {level}: {} nodes, C sum {}\n", g.nodes_at_level(level).len(), g.channel_sum(level)))?;
    }
    emit(out, &format!("  parameters {} (block-internal {})\n", counts.total(), counts.block_internal()))?;
    if a.dot || a.save {
        let dir = output_dir(&cfg)?;
        if a.dot {
            let p = dir.join(format!("{name}.dot"));
            write_file(&p, &export_dot(&g))?;
            emit(out, &format!("  wrote {}\n", p.display()))?;
        }
        if a.save {
            let p = dir.join(format!("{name}.arch"));
            write_file(&p, &encode_table(&g))?;
            emit(out, &format!("  wrote {}\n", p.display()))?;
        }
    }
    Ok(())
}

fn cmd_train(a: TrainArgs, dir: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    let cfg = a.cfg.resolve(dir)?;
    if a.cfg.print_config {
        return emit(out, &cfg.annotated_toml());
    }
    cfg.validate()?;
    let g = load_arch(&a.arch)?;
    let dir = output_dir(&cfg)?;
    let data = a.cfg.data(&cfg, &dir)?;
    let net_cfg = cfg.net_config();
    let trainer = crate::proxy::TrainerConfig { seed: cfg.seed, ..cfg.trainer.clone() };
    let mut net = compile(&g, &net_cfg)?;
    let report = train(&mut net, &data.train, &trainer)?;
    let acc = evaluate(&net, &data.val)?;
    if let Some(loss) = report.final_loss() {
        emit(out, &format!("final training loss {loss:.4}\n"))?;
    }
    emit(out, &format!("top1 {:.4}  top5 {:.4}  fitness {:.4}\n", acc.top1, acc.top5, acc.fitness()))?;
    let name = a.out.unwrap_or_else(|| {
        let stem = a.arch.file_stem().map_or("arch".into(), |s| s.to_string_lossy().into_owned());
        format!("{stem}.trained.arch")
    });
    let path = dir.join(name);
    write_file(&path, &encode_table(&net.annotated_graph()))?;
    emit(out, &format!("wrote {}\n", path.display()))
}

fn cmd_validate(a: ValidateArgs, out: &mut dyn Write) -> Result<()> {
    let mut first_err = None;
    for path in &a.files {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let outcome = match ext {
            "toml" => RunConfig::load(path).map(|_| "run config".to_string()),
            "json" => load_checkpoint(path).map(|s| format!("checkpoint at round {}", s.round)),
            "bin" => ProxyDataset::read_from(path)
                .map(|d| format!("dataset, {} train / {} val clips", d.train.len(), d.val.len())),
            _ => load_arch(path).and_then(|g| {
                validate_graph(&g).into_result()?;
                Ok(format!("architecture, {} nodes, {} edges", g.num_nodes(), g.num_edges()))
            }),
        };
        match outcome {
            Ok(what) => emit(out, &format!("{}: ok ({what})\n", path.display()))?,
            Err(e) => {
                emit(out, &format!("{}: {e}\n", path.display()))?;
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}
