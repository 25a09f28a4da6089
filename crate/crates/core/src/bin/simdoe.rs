use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use simdoe::anova::fit_anova;
use simdoe::casestudy::{casestudy_kmm, casestudy_sl, KmmStage, SlScale};
use simdoe::csvio::{read_table, write_design, write_table};
use simdoe::design::{crossed_array, fractional_factorial, full_factorial, report, Word};
use simdoe::effects::{effect_estimates, half_normal};
use simdoe::harness::{run_study, PilotSubset, Registry, RunOptions};
use simdoe::heredity::{expected_counts, sample_pattern, solve_heredity_params};
use simdoe::plot::{histogram_data, render_svg, PlotData, PlotKind};
use simdoe::study::{FactorSpec, StudySpec};
use simdoe::trpd::{factor_indices, robustness_summary_with_penalty};
use simdoe::{Design, Error, Factor, ResponseTable, Result};

#[derive(Parser)]
#[command(name = "simdoe", version, about = "Design and analysis of simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a design and print its alias report.
    #[command(subcommand)]
    Design(DesignCmd),
    /// Execute a study described by a JSON spec.
    Run(RunArgs),
    /// Balanced ANOVA of a response table.
    Anova(AnovaArgs),
    /// Effect estimates of a two-level response table.
    Effects(EffectsArgs),
    /// Half-normal scores of effect estimates.
    Halfnormal(HalfnormalArgs),
    /// Robustness summary over control-factor combinations.
    Trpd(TrpdArgs),
    /// Effect-heredity prior parameters and samples.
    #[command(subcommand)]
    Heredity(HeredityCmd),
    /// Reproduce a worked study.
    #[command(subcommand)]
    Casestudy(CaseCmd),
}

#[derive(Args)]
struct DesignOut {
    /// Design CSV path; stdout when absent (the report then goes to stderr).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the design as JSON, preserving level order and roles.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Highest interaction order shown in the alias table.
    #[arg(long, default_value_t = 3)]
    max_order: usize,
}

#[derive(Subcommand)]
enum DesignCmd {
    /// Every level combination.
    Full {
        /// `name=level1,level2,...`; repeat per factor.
        #[arg(long = "factor", required = true)]
        factors: Vec<String>,
        #[command(flatten)]
        out: DesignOut,
    },
    /// Two-level fraction from generator words such as `ABCE` or `ABD=-1`.
    Fraction {
        #[arg(long = "factor", required = true)]
        factors: Vec<String>,
        #[arg(long = "gen", required = true)]
        generators: Vec<String>,
        #[command(flatten)]
        out: DesignOut,
    },
    /// Control design crossed with a noise design.
    Cross {
        #[arg(long = "control", required = true)]
        control: Vec<String>,
        #[arg(long = "noise", required = true)]
        noise: Vec<String>,
        #[arg(long = "control-gen")]
        control_gen: Vec<String>,
        #[arg(long = "noise-gen")]
        noise_gen: Vec<String>,
        #[command(flatten)]
        out: DesignOut,
    },
}

#[derive(Args)]
struct RunArgs {
    study: PathBuf,
    /// Worker threads (overrides SIMDOE_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Run a subset: `runs:0,5,9`, `every:4` or `first:8`.
    #[arg(long)]
    pilot: Option<String>,
    /// Report failed runs and continue.
    #[arg(long)]
    keep_going: bool,
    /// Output CSV; overrides the study file's `output`, stdout if neither.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    table: PathBuf,
    /// Design JSON fixing level order and roles.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Drop rows at `factor=level`; repeatable.
    #[arg(long)]
    exclude: Vec<String>,
    /// Keep only `factor=l1,l2,...`; repeatable.
    #[arg(long)]
    keep: Vec<String>,
}

#[derive(Args)]
struct AnovaArgs {
    #[command(flatten)]
    input: TableArgs,
    #[arg(long, default_value_t = 2)]
    max_order: usize,
    /// Machine-readable table path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct EffectsArgs {
    #[command(flatten)]
    input: TableArgs,
    #[arg(long)]
    max_order: Option<usize>,
}

#[derive(Args)]
struct HalfnormalArgs {
    #[command(flatten)]
    input: TableArgs,
    #[arg(long)]
    max_order: Option<usize>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Number of largest effects labelled in the SVG.
    #[arg(long, default_value_t = 6)]
    label_top: usize,
}

#[derive(Args)]
struct TrpdArgs {
    #[command(flatten)]
    input: TableArgs,
    /// Comma-separated control factors.
    #[arg(long, value_delimiter = ',', required = true)]
    control: Vec<String>,
    #[arg(long)]
    target: f64,
    /// Weight on squared deviations above target.
    #[arg(long, default_value_t = 1.0)]
    penalty: f64,
    /// Histogram grid (needs exactly two control factors).
    #[arg(long)]
    hist_svg: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    bins: usize,
}

#[derive(Subcommand)]
enum HeredityCmd {
    /// Solve prior parameters from ENE and q.
    Solve {
        #[arg(long)]
        ene: f64,
        #[arg(long)]
        q: usize,
    },
    /// Draw one activity pattern as CSV.
    Sample {
        #[arg(long, default_value_t = 10.0)]
        ene: f64,
        #[arg(long, default_value_t = 20)]
        q: usize,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Full,
    #[value(alias = "no_an")]
    NoAn,
    Cheapo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum CaseCmd {
    /// Re-analysis of the embedded type-I error table.
    Kmm {
        #[arg(long, value_enum, default_value = "full")]
        stage: StageArg,
        /// Directory for the report bundle.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical-learning quarter-fraction study.
    Sl {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn factors(specs: &[String]) -> Result<Vec<Factor>> {
    specs.iter().map(|s| FactorSpec::parse(s)?.build()).collect()
}

fn words(gens: &[String]) -> Result<Vec<Word>> {
    gens.iter().map(|g| Word::parse(g)).collect()
}

fn side(specs: &[String], gens: &[String]) -> Result<Design> {
    if gens.is_empty() {
        full_factorial(factors(specs)?)
    } else {
        fractional_factorial(factors(specs)?, &words(gens)?)
    }
}

fn emit_design(design: &Design, out: &DesignOut) -> Result<()> {
    let text = report(design, out.max_order)?;
    match &out.out {
        Some(p) => {
            write_design(design, File::create(p)?)?;
            print!("{text}");
        }
        None => {
            write_design(design, io::stdout().lock())?;
            eprint!("{text}");
        }
    }
    if let Some(p) = &out.json {
        std::fs::write(p, serde_json::to_string_pretty(design)?)?;
    }
    Ok(())
}

fn load_table(args: &TableArgs) -> Result<ResponseTable> {
    let schema: Option<Vec<Factor>> = match &args.schema {
        Some(p) => {
            let d: Design = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            Some(d.factors().to_vec())
        }
        None => None,
    };
    let mut table = read_table(File::open(&args.table)?, schema.as_deref())?;
    for e in &args.exclude {
        let (f, l) =
            e.split_once('=').ok_or_else(|| Error::Invalid(format!("--exclude `{e}` must look like factor=level")))?;
        table = table.exclude_level(f, l)?;
    }
    for k in &args.keep {
        let (f, ls) =
            k.split_once('=').ok_or_else(|| Error::Invalid(format!("--keep `{k}` must look like factor=l1,l2")))?;
        let labels: Vec<&str> = ls.split(',').collect();
        table = table.keep_levels(f, &labels)?;
    }
    Ok(table)
}

fn write_out(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => io::stdout().lock().write_all(content.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Design(cmd) => match cmd {
            DesignCmd::Full { factors: f, out } => emit_design(&full_factorial(factors(&f)?)?, &out),
            DesignCmd::Fraction { factors: f, generators, out } => {
                emit_design(&fractional_factorial(factors(&f)?, &words(&generators)?)?, &out)
            }
            DesignCmd::Cross { control, noise, control_gen, noise_gen, out } => {
                emit_design(&crossed_array(&side(&control, &control_gen)?, &side(&noise, &noise_gen)?)?, &out)
            }
        },
        Command::Run(args) => {
            let mut spec = StudySpec::load(&args.study)?;
            if let Some(p) = &args.pilot {
                spec.pilot = Some(PilotSubset::parse(p)?);
            }
            let plan = spec.plan()?;
            let opts = RunOptions { workers: args.workers, keep_going: args.keep_going };
            let out = run_study(&plan, &Registry::builtin(), &opts)?;
            for f in &out.failures {
                eprintln!("warning: {f}");
            }
            match args.out.or(spec.output) {
                Some(p) => write_table(&out.table, File::create(p)?)?,
                None => write_table(&out.table, io::stdout().lock())?,
            }
            if out.failures.is_empty() {
                Ok(())
            } else {
                Err(out.failures.into_iter().next().expect("nonempty"))
            }
        }
        Command::Anova(args) => {
            let table = load_table(&args.input)?;
            let a = fit_anova(&table, args.max_order)?;
            print!("{}", a.to_text());
            if let Some(p) = &args.csv {
                a.write_csv(File::create(p)?)?;
            }
            Ok(())
        }
        Command::Effects(args) => {
            let table = load_table(&args.input)?;
            let k = args.max_order.unwrap_or(table.factors().len());
            let mut out = String::from("effect,estimate,aliases\n");
            for e in effect_estimates(&table, k)? {
                let aliases: Vec<String> = e.aliases.iter().map(|(t, _)| t.label(table.factors())).collect();
                out.push_str(&format!("{},{},{}\n", e.label, e.value, aliases.join(" ")));
            }
            write_out(None, &out)
        }
        Command::Halfnormal(args) => {
            let table = load_table(&args.input)?;
            let k = args.max_order.unwrap_or(table.factors().len());
            let points = half_normal(&effect_estimates(&table, k)?)?;
            let mut out = String::from("effect,abs_estimate,quantile\n");
            for p in &points {
                out.push_str(&format!("{},{},{}\n", p.label, p.abs_effect, p.quantile));
            }
            write_out(None, &out)?;
            if let Some(path) = &args.svg {
                let data = PlotData::HalfNormal { points, label_top: args.label_top };
                std::fs::write(path, render_svg(&data, PlotKind::HalfNormal, None)?)?;
            }
            Ok(())
        }
        Command::Trpd(args) => {
            let table = load_table(&args.input)?;
            let control = factor_indices(&table, &args.control)?;
            let s = robustness_summary_with_penalty(&table, &control, args.target, args.penalty)?;
            print!("{}", s.to_text());
            if let Some(path) = &args.hist_svg {
                if control.len() != 2 {
                    return Err(Error::ArityMismatch("histogram grid needs exactly two control factors".into()));
                }
                let data = histogram_data(&table, control[0], control[1], args.bins)?;
                std::fs::write(path, render_svg(&data, PlotKind::HistogramGrid, Some(args.target))?)?;
            }
            Ok(())
        }
        Command::Heredity(cmd) => match cmd {
            HeredityCmd::Solve { ene, q } => {
                let p = solve_heredity_params(ene, q)?;
                let c = expected_counts(&p);
                println!("q,ENE,pi,c1,c2,expected_mains,expected_one_parent,expected_two_parent");
                println!("{},{},{},{},{},{},{},{}", p.q, p.ene, p.pi, p.c1, p.c2, c.mains, c.one_parent, c.two_parent);
                Ok(())
            }
            HeredityCmd::Sample { ene, q, seed } => {
                let p = solve_heredity_params(ene, q)?;
                let pat = sample_pattern(&p, seed);
                let mut out = String::from("kind,i,j\n");
                for i in &pat.active_mains {
                    out.push_str(&format!("main,{i},\n"));
                }
                for (i, j) in &pat.active_interactions {
                    out.push_str(&format!("interaction,{i},{j}\n"));
                }
                write_out(None, &out)
            }
        },
        Command::Casestudy(cmd) => match cmd {
            CaseCmd::Kmm { stage, out } => {
                let stage = match stage {
                    StageArg::Full => KmmStage::Full,
                    StageArg::NoAn => KmmStage::NoAn,
                    StageArg::Cheapo => KmmStage::Cheapo,
                };
                let r = casestudy_kmm(stage)?;
                print!("{}", r.anova.to_text());
                println!();
                print!("{}", r.robustness.to_text());
                if let Some(dir) = out {
                    r.bundle.write_to(&dir)?;
                }
                Ok(())
            }
            CaseCmd::Sl { seed, scale, workers, out } => {
                let scale = match scale {
                    ScaleArg::Desk => SlScale::Desk,
                    ScaleArg::Paper => SlScale::Paper,
                };
                let opts = RunOptions { workers, keep_going: false };
                let r = casestudy_sl(seed, scale, &opts)?;
                print!("{}", r.design_report);
                println!();
                print!("{}", r.bundle.get("effects.csv").unwrap_or_default());
                if let Some(dir) = out {
                    r.bundle.write_to(&dir)?;
                }
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
