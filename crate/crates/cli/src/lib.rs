//! Command-line front end: group files, the identity catalog runner, the
//! subgroup sampler and report rendering.

pub mod catalog;
pub mod group_file;
pub mod report;
pub mod sampler;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pink_forge_core::dickson::{classify, type_set};
use pink_forge_core::lattice::conj_saturate;
use pink_forge_core::pink::{first_reduction, lie_algebra, main_theorem_harness, pink_proell_check, Verdict};
use pink_forge_core::{Ball, Error, FiniteGroup, ModLattice, ResidueRing};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use catalog::{Catalog, DEFAULT_CATALOG};
use group_file::GroupFile;
use report::{levels, Format, Report};
use sampler::{ball_generators, sample_groups, SampleSpec};

pub const DEFAULT_CAP: u64 = 1 << 24;

pub mod exit {
    pub const PASS: i32 = 0;
    pub const FAIL: i32 = 1;
    pub const RESOURCE: i32 = 2;
    pub const USAGE: i32 = 3;
}

#[derive(Debug, Parser)]
#[command(name = "pink-forge", version, about = "Exact computations with open subgroups of SL2(Z_l)^n")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Bound on the number of mod-l image points a closure may reach.
    #[arg(long, global = true, env = "PINK_FORGE_CAP", default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Order of the group generated by a file's generators.
    Closure {
        #[arg(long)]
        file: PathBuf,
        /// Also list every element.
        #[arg(long)]
        dump: bool,
    },
    /// Howell basis of the Lie algebra and the smallest k with l^k sl2^n inside it.
    Lie {
        #[arg(long)]
        file: PathBuf,
    },
    /// Dickson type of each factor of the image mod l.
    Classify {
        #[arg(long)]
        file: PathBuf,
    },
    /// Run a named check.
    Check(CheckArgs),
    /// Write random group files.
    Sample(SampleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckName {
    PinkProell,
    Commutator,
    Goursat,
    ConjSaturate,
    GraphDefect,
    FirstReduction,
    MainTheorem,
    Identities,
}

#[derive(Debug, Args)]
struct GroupArgs {
    /// Group file; otherwise the group is the ball of level --ball in each factor.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    l: Option<u64>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Ball level; defaults to 2 at l = 2 and 1 otherwise. 0 means all of SL2.
    #[arg(long)]
    ball: Option<u32>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(value_enum)]
    name: CheckName,
    #[command(flatten)]
    group: GroupArgs,
    #[arg(long)]
    k: Option<u32>,
    /// Ball levels for `commutator`, one per factor of the iterated commutator.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    /// Uniform pair level for `goursat`, or the W level for `conj-saturate`.
    #[arg(long)]
    s: Option<u32>,
    /// Reduction level for `graph-defect`; valuation bound for `conj-saturate`.
    #[arg(long)]
    t: Option<u32>,
    /// Vector (x,h,y) spanning W for `conj-saturate`; random from --seed if absent.
    #[arg(long, value_delimiter = ',')]
    vector: Option<Vec<u64>>,
    #[arg(long)]
    n1: Option<u32>,
    #[arg(long)]
    n2: Option<u32>,
    /// `default` for the bundled catalog, or a path.
    #[arg(long, default_value = "default")]
    catalog: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    l: u64,
    #[arg(long)]
    m: u32,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    ball: u32,
    #[arg(long, default_value_t = 2)]
    twists: usize,
    /// Draw twists from the kernel of reduction mod l.
    #[arg(long)]
    pro_ell: bool,
    /// Directory for sample-NNN.group files; files go to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Why a command stopped without a report.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Resource(String),
    Fail(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => exit::USAGE,
            Failure::Resource(_) => exit::RESOURCE,
            Failure::Fail(_) => exit::FAIL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Resource(m) | Failure::Fail(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } | Error::NonConvergence { .. } => Failure::Resource(e.to_string()),
            Error::Domain(_) | Error::ShapeMismatch(_) | Error::Precondition(_) => Failure::Usage(e.to_string()),
            _ => Failure::Fail(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(Report, bool), Failure>;

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn passes(v: Verdict) -> bool {
    matches!(v, Verdict::Verified | Verdict::InconclusiveAtPrecision)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Reports go to `out`, diagnostics to `err`; samples printed
/// to `out` push the report to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::PASS };
            let target: &mut dyn Write = if code == exit::PASS { out } else { err };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let (format, cap) = (cli.format, cli.cap);
    let report_to_err = matches!(&cli.command, Command::Sample(a) if a.out.is_none());
    let outcome = match cli.command {
        Command::Closure { file, dump } => closure(&file, dump, cap),
        Command::Lie { file } => lie(&file, cap),
        Command::Classify { file } => classify_cmd(&file, cap),
        Command::Check(args) => check(&args, cap),
        Command::Sample(args) => sample(&args, cap, out),
    };
    match outcome {
        Ok((report, passed)) => {
            let target: &mut dyn Write = if report_to_err { err } else { out };
            let _ = target.write_all(report.render(format).as_bytes());
            if passed {
                exit::PASS
            } else {
                exit::FAIL
            }
        }
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message());
            failure.code()
        }
    }
}

fn read_group_file(path: &Path) -> std::result::Result<GroupFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    GroupFile::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path, cap: u64) -> std::result::Result<(GroupFile, FiniteGroup), Failure> {
    let file = read_group_file(path)?;
    let group = FiniteGroup::closure(file.ring, file.factors, &file.generators, cap)?;
    Ok((file, group))
}

fn ring_from(l: Option<u64>, m: Option<u32>) -> std::result::Result<ResidueRing, Failure> {
    let (Some(l), Some(m)) = (l, m) else {
        return usage("--l and --m are required without --file");
    };
    Ok(ResidueRing::new(l, m)?)
}

fn group_from(args: &GroupArgs, cap: u64) -> std::result::Result<FiniteGroup, Failure> {
    if let Some(path) = &args.file {
        return Ok(load(path, cap)?.1);
    }
    let ring = ring_from(args.l, args.m)?;
    if args.n == 0 {
        return usage("--n must be positive");
    }
    let level = args.ball.unwrap_or(if ring.prime() == 2 { 2 } else { 1 });
    if level > ring.precision() {
        return usage(format!("ball level {level} is above the precision"));
    }
    Ok(FiniteGroup::closure(ring, args.n, &ball_generators(ring, level, args.n)?, cap)?)
}

fn header(command: &str, g: &FiniteGroup) -> Report {
    Report::new(command, g.ring(), g.n(), g.cap())
}

fn order_string(g: &FiniteGroup) -> String {
    let (image, exp) = g.order_factored();
    let l = g.ring().prime() as u128;
    match l.checked_pow(exp).and_then(|p| p.checked_mul(image as u128)) {
        Some(order) => order.to_string(),
        None => format!("{image}*{l}^{exp}"),
    }
}

fn closure(path: &Path, dump: bool, cap: u64) -> Outcome {
    let (file, g) = load(path, cap)?;
    let mut report = header("closure", &g);
    if let Some(label) = &file.label {
        report.push("label", label);
    }
    report.push("generators", file.generators.len());
    report.push("order", order_string(&g));
    report.push("image-order", g.image_order());
    if dump {
        for x in g.elements()? {
            report.push("element", x);
        }
    }
    Ok((report, true))
}

fn lie(path: &Path, cap: u64) -> Outcome {
    let (_, g) = load(path, cap)?;
    let lie = lie_algebra(&g)?;
    let mut report = header("lie", &g);
    report.push("lie-precision", lie.ring().precision());
    report.push("rank", lie.basis().len());
    for b in lie.basis() {
        report.push("basis", b.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    }
    let k = lie.scaled_full_level();
    report.push("k-found", if k < lie.ring().precision() { k.to_string() } else { "none".into() });
    Ok((report, true))
}

fn classify_cmd(path: &Path, cap: u64) -> Outcome {
    let (file, g) = load(path, cap)?;
    let image = g.reduction_image(1)?;
    let mut report = header("classify", &g);
    let mut labels = Vec::new();
    for i in 0..g.n() {
        let factor = image.project(&[i])?;
        let types = type_set(&factor)?;
        let label = match classify(&factor) {
            Ok(t) => t.to_string(),
            Err(Error::Unclassifiable) => "unclassifiable".into(),
            Err(e) => return Err(e.into()),
        };
        report.push(&format!("factor-{i}"), &label);
        report.push(
            &format!("factor-{i}-types"),
            types.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        );
        report.push(&format!("factor-{i}-order"), factor.order());
        labels.push(label);
    }
    let mut passed = true;
    if let Some(expected) = &file.expected_type {
        passed = labels.iter().all(|l| l == expected);
        report.push("expected-type", expected);
        report.push("matches-expected", passed);
    }
    Ok((report, passed))
}

fn smin(l: u64) -> u32 {
    match l {
        2 => 2,
        3 => 1,
        _ => 0,
    }
}

fn check(args: &CheckArgs, cap: u64) -> Outcome {
    match args.name {
        CheckName::PinkProell => {
            let k = args.k.ok_or_else(|| Failure::Usage("pink-proell needs --k".into()))?;
            let g = group_from(&args.group, cap)?;
            let result = pink_proell_check(&g, k)?;
            let mut report = header("check pink-proell", &g);
            report.add_pink(&result);
            Ok((report, passes(result.verdict)))
        }
        CheckName::MainTheorem => {
            let k = args.k.ok_or_else(|| Failure::Usage("main-theorem needs --k".into()))?;
            let g = group_from(&args.group, cap)?;
            let result = main_theorem_harness(&g, k)?;
            let mut report = header("check main-theorem", &g);
            report.add_pink(&result);
            Ok((report, passes(result.verdict)))
        }
        CheckName::Commutator => commutator(args, cap),
        CheckName::Goursat => goursat(args, cap),
        CheckName::ConjSaturate => conj_saturate_cmd(args, cap),
        CheckName::GraphDefect => {
            let g = group_from(&args.group, cap)?;
            let t = args.t.unwrap_or(1);
            let mut report = header("check graph-defect", &g);
            report.push("t", t);
            match g.graph_defect(t)? {
                None => report.push("graph", "yes"),
                Some(x) => {
                    report.push("graph", "no");
                    report.push("defect", x);
                }
            }
            Ok((report, true))
        }
        CheckName::FirstReduction => {
            let g = group_from(&args.group, cap)?;
            if g.n() != 2 {
                return usage("first-reduction needs two factors");
            }
            let best = |i: usize| -> std::result::Result<u32, Failure> {
                Ok(g.project(&[i])?.best_uniform_ball()?.max(1))
            };
            let n1 = match args.n1 {
                Some(v) => v,
                None => best(0)?,
            };
            let n2 = match args.n2 {
                Some(v) => v,
                None => best(1)?,
            };
            let mut report = header("check first-reduction", &g);
            report.push("n1", n1);
            report.push("n2", n2);
            let result = match first_reduction(&g, n1, n2) {
                Ok(r) => r,
                Err(Error::HypothesisUnmet(msg)) => {
                    report.push("note", msg);
                    report.push("verdict", Verdict::HypothesisNotMet);
                    return Ok((report, false));
                }
                Err(e) => return Err(e.into()),
            };
            report.push("case", format!("{:?}", result.case));
            if let Some(levels) = result.claimed_levels {
                report.push("claimed", format!("{},{}", levels[0], levels[1]));
            }
            if let Some(w) = &result.witness {
                report.push("witness", w);
            }
            if let Some(types) = result.subgroup_types {
                report.push("types", format!("{},{}", types[0], types[1]));
            }
            for (name, index) in &result.indices {
                report.push("index", format!("{name} = {index}"));
            }
            for (name, holds) in &result.properties {
                report.push("property", format!("{name}: {holds}"));
            }
            for note in &result.notes {
                report.push("note", note);
            }
            report.push("verdict", result.verdict);
            Ok((report, passes(result.verdict)))
        }
        CheckName::Identities => identities(args, cap),
    }
}

fn commutator(args: &CheckArgs, cap: u64) -> Outcome {
    let ring = ring_from(args.group.l, args.group.m)?;
    let Some(levels_in) = args.levels.clone().filter(|v| v.len() >= 2) else {
        return usage("commutator needs --levels with at least two entries");
    };
    let (l, m) = (ring.prime(), ring.precision());
    let mut report = Report::new("check commutator", ring, 1, cap);
    report.push("levels", levels(&levels_in));
    if let Some(&s) = levels_in.iter().find(|&&s| s < smin(l)) {
        report.push("note", format!("level {s} is below the valid range at l = {l}"));
        report.push("verdict", Verdict::HypothesisNotMet);
        return Ok((report, false));
    }
    if levels_in.iter().any(|&s| s > m) {
        return usage("ball levels must not exceed the precision");
    }
    let ball = |s: u32| -> std::result::Result<FiniteGroup, Failure> {
        Ok(FiniteGroup::closure(ring, 1, &ball_generators(ring, s, 1)?, cap)?)
    };
    let claimed = levels_in.iter().sum::<u32>() + (levels_in.len() as u32 - 1) * ring.v();
    report.push("claimed", claimed);
    if claimed >= m {
        report.push("note", format!("claimed level {claimed} reaches precision {m}"));
        report.push("verdict", Verdict::InconclusiveAtPrecision);
        return Ok((report, true));
    }
    let mut current = ball(levels_in[0])?;
    for &s in &levels_in[1..] {
        current = FiniteGroup::commutator_subgroup(&current, &ball(s)?)?;
    }
    report.push("commutator-order", order_string(&current));
    let verdict = match current.missing_ball_generator(&Ball::uniform(ring, claimed, 1)?)? {
        None => Verdict::Verified,
        Some(missing) => {
            report.push("certificate-missing", missing);
            Verdict::LemmaViolation
        }
    };
    report.push("verdict", verdict);
    Ok((report, passes(verdict)))
}

fn goursat(args: &CheckArgs, cap: u64) -> Outcome {
    let g = group_from(&args.group, cap)?;
    let n = g.n();
    if n < 2 {
        return usage("goursat needs at least two factors");
    }
    let mut pair_levels = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = match args.s {
                Some(s) => s,
                None => g.project(&[i, j])?.best_uniform_ball()?.max(smin(g.ring().prime())),
            };
            pair_levels[i][j] = s;
            pair_levels[j][i] = s;
        }
    }
    let mut report = header("check goursat", &g);
    for (i, row) in pair_levels.iter().enumerate() {
        report.push("pair-levels", format!("{i}: {}", levels(row)));
    }
    let verdict = match g.goursat_combine(&pair_levels) {
        Ok(result) => {
            report.push("claimed", levels(&result.levels));
            report.push(
                "beyond-precision",
                result.beyond_precision.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            );
            for (i, w) in &result.witnesses {
                report.push("witness", format!("{i}: {w}"));
            }
            if result.beyond_precision.is_empty() {
                Verdict::Verified
            } else {
                Verdict::InconclusiveAtPrecision
            }
        }
        Err(Error::HypothesisUnmet(msg)) => {
            report.push("note", msg);
            Verdict::HypothesisNotMet
        }
        Err(Error::LemmaViolation(msg)) => {
            report.push("note", msg);
            Verdict::LemmaViolation
        }
        Err(e) => return Err(e.into()),
    };
    report.push("verdict", verdict);
    Ok((report, passes(verdict)))
}

fn conj_saturate_cmd(args: &CheckArgs, cap: u64) -> Outcome {
    let ring = ring_from(args.group.l, args.group.m)?;
    let s = args.s.unwrap_or(smin(ring.prime()).max(1));
    let t = args.t.unwrap_or(0);
    let vector = match &args.vector {
        Some(v) if v.len() == 3 => v.iter().map(|&x| ring.reduce(x)).collect::<Vec<_>>(),
        Some(_) => return usage("--vector takes three entries"),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let q = ring.modulus();
            let mut v: Vec<u64> = (0..3).map(|_| rng.gen_range(0..q)).collect();
            let slot = rng.gen_range(0..3);
            v[slot] = ring.mul(1 + ring.prime() * rng.gen_range(0..q) % q, ring.prime_power_residue(t.min(ring.precision())));
            v
        }
    };
    let w = ModLattice::span(ring, 3, &[vector.clone()])?;
    let mut report = Report::new("check conj-saturate", ring, 1, cap);
    report.push("s", s);
    report.push("t", t);
    report.push("vector", vector.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    report.push("target", t + 4 * s + 4 * ring.v());
    let verdict = match conj_saturate(&w, s, t) {
        Ok(sat) => {
            report.push("rank", sat.basis().len());
            Verdict::Verified
        }
        Err(Error::LemmaViolation(msg)) => {
            report.push("note", msg);
            Verdict::LemmaViolation
        }
        Err(e) => return Err(e.into()),
    };
    report.push("verdict", verdict);
    Ok((report, passes(verdict)))
}

fn identities(args: &CheckArgs, cap: u64) -> Outcome {
    let text = if args.catalog == "default" {
        DEFAULT_CATALOG.to_string()
    } else {
        std::fs::read_to_string(&args.catalog).map_err(|e| Failure::Usage(format!("{}: {e}", args.catalog)))?
    };
    let catalog = Catalog::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", args.catalog)))?;
    let primes = args.group.l.map_or(vec![2, 3, 5, 7], |l| vec![l]);
    let precision = args.group.m.unwrap_or(8);
    let mut report = Report::default();
    report.push("tool", format!("pink-forge {}", report::VERSION));
    report.push("command", "check identities");
    report.push("l", primes.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    report.push("m", precision);
    report.push("n", 1);
    report.push("cap", cap);
    report.push("verdicts", report::VERDICTS);
    report.push("catalog", &args.catalog);
    let mut all_pass = true;
    let mut checked = 0;
    for l in primes {
        let ring = ResidueRing::new(l, precision)?;
        for result in catalog.run(ring) {
            let status = if result.skipped {
                "skipped".to_string()
            } else if let Some(f) = &result.failure {
                all_pass = false;
                format!("fail ({f})")
            } else {
                checked += result.instances;
                format!("pass ({} instances)", result.instances)
            };
            report.push("identity", format!("{} l={l}: {status}", result.name));
        }
    }
    report.push("instances", checked);
    let verdict = if all_pass { Verdict::Verified } else { Verdict::LemmaViolation };
    report.push("verdict", verdict);
    Ok((report, all_pass))
}

fn sample(args: &SampleArgs, cap: u64, out: &mut dyn Write) -> Outcome {
    let ring = ResidueRing::new(args.l, args.m)?;
    if args.n == 0 || args.ball > args.m {
        return usage("need --n positive and --ball at most --m");
    }
    let spec = SampleSpec {
        ring,
        factors: args.n,
        ball_level: args.ball,
        twists: args.twists,
        pro_ell: args.pro_ell,
        seed: args.seed,
    };
    let files = sample_groups(&spec, args.count)?;
    let mut report = Report::new("sample", ring, args.n, cap);
    report.push("seed", args.seed);
    report.push("count", args.count);
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
            for (i, file) in files.iter().enumerate() {
                let path = dir.join(format!("sample-{i:03}.group"));
                std::fs::write(&path, file.write()).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                report.push("file", path.display());
            }
        }
        None => {
            for file in &files {
                let _ = writeln!(out, "{}", file.write());
            }
        }
    }
    Ok((report, true))
}
