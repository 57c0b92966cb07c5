use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lochier_core::bell::{analytic_noise_threshold, build_imix2, build_imix3, extract_from_dual};
use lochier_core::corrdata::{read_table, write_table};
use lochier_core::experiment::{
    detect, random_sweep, robustness, Caps, DatasetSpec, Extra, Level, MeasPreset, StateKind,
};
use lochier_core::localset::{local_bound, local_minimum, lp_membership, Membership};
use lochier_core::moment::{build, entry_report};
use lochier_core::sdp::{parse_key, Certificate};
use lochier_core::{BellFunctional, CorrelationTable, Error, Result, SolverConfig, Verdict};

const EXIT_LOCAL: u8 = 0;
const EXIT_NONLOCAL: u8 = 10;
const EXIT_ERROR: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "lochier", version, about = "Nonlocality detection from few-body correlators")]
struct Cli {
    /// Lift the desk-scale limits on qubits, parties, LP size and enumeration.
    #[arg(long, global = true)]
    cap_override: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a correlator table.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        /// Write the table here instead of only printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether a table admits a PSD moment-matrix completion.
    Detect {
        table: PathBuf,
        #[arg(long, default_value = "2")]
        level: String,
        /// Certificate path, written on a nonlocal verdict. Defaults to `<table>.cert`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop as soon as the sign of λ* is certified.
        #[arg(long)]
        fast: bool,
    },
    /// Bisect the largest white-noise level that is still detected.
    Robustness {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "2")]
        level: String,
        #[arg(long, default_value_t = 1e-3)]
        ptol: f64,
    },
    /// Fraction of random orthogonal settings on the W state detected at level 2.
    Sweep {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Bell functionals.
    Bell {
        #[command(subcommand)]
        action: BellCommand,
    },
    /// Exact local-polytope membership by linear programming.
    LocalCheck { table: PathBuf },
    /// Print the symbolic moment matrix and entry counts.
    Dump {
        table: PathBuf,
        #[arg(long, default_value = "2")]
        level: String,
    },
}

#[derive(Subcommand)]
enum BellCommand {
    /// Value of a functional on a table.
    Eval { functional: PathBuf, table: PathBuf },
    /// Exact local bound by enumeration.
    Bound { functional: PathBuf },
    /// Functional read off a nonlocality certificate.
    Dual {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit one of the built-in inequalities.
    Builtin {
        name: Builtin,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Builtin {
    Imix3,
    Imix2,
}

#[derive(Args)]
struct DataArgs {
    /// w | ghz | graph:line | graph:loop | graph:grid RxC | graph:star
    #[arg(long, default_value = "w")]
    state: String,
    #[arg(long)]
    n: Option<usize>,
    /// xz | xdz | xd | alt | random | random:<seed>
    #[arg(long, default_value = "xz")]
    meas: String,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Largest correlator order. Defaults to min(4, N).
    #[arg(long)]
    order: Option<usize>,
    /// none | fullbody | keys like `<0:0 1:1>;<0:1 2:0>`
    #[arg(long, default_value = "none")]
    extra: String,
    /// Seed for `--meas random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DataArgs {
    fn spec(&self) -> Result<DatasetSpec> {
        let state: StateKind = self.state.parse()?;
        let n = match (self.n, state.implied_n()) {
            (Some(n), _) | (None, Some(n)) => n,
            (None, None) => return Err(Error::InvalidInput("--n is required for this state".into())),
        };
        let meas = if self.meas.trim() == "random" {
            MeasPreset::Random(self.seed)
        } else {
            self.meas.parse()?
        };
        let extra = match self.extra.trim() {
            "none" => Extra::None,
            "fullbody" => Extra::FullBody,
            list => Extra::Keys(
                list.split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(parse_key)
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(DatasetSpec {
            state,
            n,
            meas,
            noise: self.noise,
            order_cap: self.order.unwrap_or(n.min(4)),
            extra,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let caps = if cli.cap_override { Caps::lifted() } else { Caps::default() };
    match run(cli.command, &caps) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(command: Command, caps: &Caps) -> Result<u8> {
    match command {
        Command::Gen { data, out } => {
            let table = data.spec()?.generate(caps)?;
            print_table(&table);
            if let Some(path) = out {
                write_table(&table, &path)?;
                eprintln!("wrote {} correlators to {}", table.len(), path.display());
            }
            Ok(EXIT_LOCAL)
        }
        Command::Detect { table, level, out, fast } => cmd_detect(&table, &level, out, fast, caps),
        Command::Robustness { data, level, ptol } => {
            let spec = data.spec()?;
            let level: Level = level.parse()?;
            let r = robustness(&spec, &level, ptol, &SolverConfig::decision(), caps)?;
            for (p, v, lam) in &r.evaluations {
                println!("p={p:.6}  {v:<12}  lambda*={lam:.6e}");
            }
            println!("p_max = {:.4}  bracket [{:.6}, {:.6})", r.p_max, r.bracket.0, r.bracket.1);
            Ok(EXIT_LOCAL)
        }
        Command::Sweep { n, rounds, seed } => {
            let s = random_sweep(n, rounds, seed, &SolverConfig::decision(), caps)?;
            println!(
                "N={} rounds={} seed={} nonlocal={} inconclusive={}",
                s.n, s.rounds, s.seed, s.nonlocal, s.inconclusive
            );
            println!(
                "p_NL = {:.1}%  95% interval [{:.1}%, {:.1}%]",
                100.0 * s.fraction,
                100.0 * s.interval.0,
                100.0 * s.interval.1
            );
            Ok(EXIT_LOCAL)
        }
        Command::Bell { action } => cmd_bell(action, caps),
        Command::LocalCheck { table } => {
            let table = read_table(&table)?;
            match lp_membership(&table, caps.lp_generators)? {
                Membership::Local { weights } => {
                    let support = weights.iter().filter(|(_, w)| **w > 0.0).count();
                    println!("Local ({support} deterministic strategies in the decomposition)");
                    Ok(EXIT_LOCAL)
                }
                Membership::Nonlocal { infeasibility } => {
                    println!("Nonlocal (phase-one infeasibility {infeasibility:.3e})");
                    Ok(EXIT_NONLOCAL)
                }
            }
        }
        Command::Dump { table, level } => {
            let table = read_table(&table)?;
            let level: Level = level.parse()?;
            let gset = level.generating_set(*table.scenario(), caps)?;
            let (ms, _) = build(&gset, &table)?;
            print!("{}", ms.render_symbolic());
            println!();
            print!("{}", entry_report(&ms));
            Ok(EXIT_LOCAL)
        }
    }
}

fn cmd_detect(path: &Path, level: &str, out: Option<PathBuf>, fast: bool, caps: &Caps) -> Result<u8> {
    let table = read_table(path)?;
    let level: Level = level.parse()?;
    let cfg = if fast { SolverConfig::decision() } else { SolverConfig::default() };
    let d = detect(&table, &level, &cfg, caps, true)?;
    let sol = &d.solution;
    println!("verdict       {}", d.verdict);
    println!("lambda*       {:.9e}", sol.lambda_star);
    println!("lower bound   {:.9e}", sol.lambda_lower);
    println!("status        {} after {} iterations", sol.status.as_str(), sol.iterations);
    println!("matrix size   {}", d.size());
    println!("free entries  {}", d.n_free());
    if !d.structure.ignored_keys().is_empty() {
        println!("unused keys   {}", d.structure.ignored_keys().len());
    }
    match d.verdict {
        Verdict::Nonlocal => {
            let cert_path = out.unwrap_or_else(|| {
                let mut p = path.as_os_str().to_owned();
                p.push(".cert");
                PathBuf::from(p)
            });
            Certificate::new(&d.structure, d.solution.clone()).write(&cert_path)?;
            println!("certificate   {}", cert_path.display());
            Ok(EXIT_NONLOCAL)
        }
        Verdict::Consistent => Ok(EXIT_LOCAL),
        Verdict::Inconclusive => Ok(EXIT_INCONCLUSIVE),
    }
}

fn cmd_bell(action: BellCommand, caps: &Caps) -> Result<u8> {
    match action {
        BellCommand::Eval { functional, table } => {
            let f = BellFunctional::read(&functional)?;
            let table = read_table(&table)?;
            let value = f.evaluate(&table)?;
            println!("value  {value:.12}");
            match f.claimed_bound() {
                Some(b) => {
                    println!("bound  {} {} ({})", b.sense.as_str(), b.value, b.provenance.as_str());
                    if f.violates(value) == Some(true) {
                        println!("violated");
                        if let Ok(p) = analytic_noise_threshold(&f, value) {
                            println!("noise threshold  {p:.6}");
                        }
                        return Ok(EXIT_NONLOCAL);
                    }
                    println!("not violated");
                    Ok(EXIT_LOCAL)
                }
                None => Ok(EXIT_LOCAL),
            }
        }
        BellCommand::Bound { functional } => {
            let f = BellFunctional::read(&functional)?;
            let b = local_bound(&f, caps.enum_bits)?;
            match b.exact {
                Some(v) => println!("local bound  {v}"),
                None => println!("local bound  {:.12}", b.value),
            }
            println!("enumerated generators  {}", b.bits);
            Ok(EXIT_LOCAL)
        }
        BellCommand::Dual { table, cert, out } => {
            let table = read_table(&table)?;
            let cert = Certificate::read(&cert)?;
            let gset = cert.generating_set()?;
            let (ms, inst) = build(&gset, &table)?;
            let mut known: Vec<_> = ms.known_keys().cloned().collect();
            known.sort();
            if known != cert.known_keys || ms.free_vars() != cert.free_vars.as_slice() {
                return Err(Error::InvalidInput(
                    "certificate was produced from a different table or generating set".into(),
                ));
            }
            let f = extract_from_dual(&ms, &inst, &cert.solution, &table, &SolverConfig::default())?;
            println!("{f}");
            println!("value on table  {:.9e}", f.evaluate(&table)?);
            if let Ok(min) = local_minimum(&f, caps.enum_bits) {
                println!("local minimum   {:.9e}", min.value);
            }
            if let Some(path) = out {
                f.write(&path)?;
                eprintln!("wrote functional to {}", path.display());
            }
            Ok(EXIT_NONLOCAL)
        }
        BellCommand::Builtin { name, n, out } => {
            let f = match name {
                Builtin::Imix3 => build_imix3(n)?,
                Builtin::Imix2 => build_imix2(n)?,
            };
            match out {
                Some(path) => {
                    f.write(&path)?;
                    eprintln!("wrote {} terms to {}", f.terms().len(), path.display());
                }
                None => println!("{}", f.to_json()),
            }
            Ok(EXIT_LOCAL)
        }
    }
}

fn print_table(table: &CorrelationTable) {
    let s = table.scenario();
    println!("# N={} m={} entries={}", s.n_parties(), s.n_settings(), table.len());
    let width = table.keys().map(|k| k.to_string().len()).max().unwrap_or(0);
    for (key, value) in table.iter() {
        println!("{:<width$}  {:>16.12}", key.to_string(), value);
    }
}
