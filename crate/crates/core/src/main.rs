use clap::{Args, Parser, Subcommand};
use shellspec::geometry::{make_domain, DomainSpec, SpaceForm};
use shellspec::harness::{
    convergence_study, fmt_human, run_sweep, verify, write_csv_file, write_json_file, HarnessError, SweepConfig,
    SweepReport,
};
use shellspec::radial::{radial_eigs_with_grid, shell_spectrum, RadialProblem, DEFAULT_GRID};
use shellspec::shape::{extremality_defect, rate_report, DEFAULT_STEP};
use shellspec::spectrum::{lambda_2, Discretization};
use std::path::PathBuf;
use std::process::ExitCode;

/// Dirichlet eigenvalues of eccentric spherical shells in constant-curvature spaces.
#[derive(Parser)]
#[command(name = "shellspec", version)]
struct Cli {
    /// Worker threads; the SHELLSPEC_JOBS environment variable takes precedence.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shell {
    #[arg(long, default_value = "euclidean")]
    form: SpaceForm,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    r0: f64,
    #[arg(long)]
    r1: f64,
}

#[derive(Args, Clone)]
struct Disc {
    /// Target edge length of the coarse mesh [default depends on the form].
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 1)]
    refinements: usize,
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long, default_value_t = shellspec::eigen::DEFAULT_TOL)]
    eig_tol: f64,
}

impl Disc {
    fn build(&self, form: SpaceForm) -> Discretization {
        let mut d = Discretization::default_for(form);
        if let Some(h) = self.h {
            d.h = h;
        }
        d.refinements = self.refinements;
        d.count = self.count;
        d.eig_tol = self.eig_tol;
        d
    }
}

#[derive(Subcommand)]
enum Command {
    /// Separated eigenvalues of the concentric shell.
    Radial {
        #[command(flatten)]
        shell: Shell,
        /// Restrict to one harmonic degree; otherwise list the lowest modes over all degrees.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Low spectrum of one shell.
    Solve {
        #[command(flatten)]
        shell: Shell,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[command(flatten)]
        disc: Disc,
        /// Also report the boundary constancy defect of the second eigenspace (t = 0 only).
        #[arg(long)]
        defect: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sweep the hole offset as described by a JSON configuration.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Record wall-clock times in the CSV.
        #[arg(long)]
        timings: bool,
    },
    /// Hadamard rate of the antisymmetric eigenvalue against finite differences.
    Rate {
        #[command(flatten)]
        shell: Shell,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        delta: f64,
        #[command(flatten)]
        disc: Disc,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sweep and check every claimed property; exits 1 if any check fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        timings: bool,
    },
    /// Eigenvalues on successively refined meshes with observed orders.
    Converge {
        #[command(flatten)]
        shell: Shell,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[command(flatten)]
        disc: Disc,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn domain(s: &Shell, t: f64) -> Result<DomainSpec, HarnessError> {
    Ok(make_domain(s.form, s.dim, s.r0, s.r1, t)?)
}

fn init_pool(jobs: Option<usize>) -> Result<(), String> {
    let env = match std::env::var("SHELLSPEC_JOBS") {
        Ok(v) => Some(v.parse::<usize>().map_err(|_| format!("SHELLSPEC_JOBS={v} is not a thread count"))?),
        Err(_) => None,
    };
    if let Some(n) = env.or(jobs) {
        if n == 0 {
            return Err("thread count must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn print_sweep(report: &SweepReport) {
    println!(
        "{:>8} {:>18} {:>18} {:>18} {:>18} {:>6} {:>18} {:>18}",
        "t", "lambda1", "lambda1_minus", "lambda2_plus", "lambda2", "branch", "rate_hadamard", "rate_fd"
    );
    let opt = |x: Option<f64>| x.map(fmt_human).unwrap_or_else(|| "-".into());
    for r in &report.rows {
        if let Some(e) = &r.error {
            println!("{:>8} error: {e}", r.t);
            continue;
        }
        println!(
            "{:>8} {:>18} {:>18} {:>18} {:>18} {:>6} {:>18} {:>18}",
            r.t,
            opt(r.lambda1.map(|e| e.value)),
            opt(r.lambda1_minus.map(|e| e.value)),
            opt(r.lambda2_plus.map(|e| e.value)),
            opt(r.lambda2.map(|e| e.value)),
            r.branch.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.rate_hadamard),
            opt(r.rate_fd),
        );
    }
    if let Some(o) = &report.oracle {
        println!(
            "radial reference mu_1(1) = {} (relative deviation of lambda2(0): {})",
            fmt_human(o.mu),
            fmt_human(o.relative_error)
        );
    }
}

fn write_outputs(report: &SweepReport, csv: Option<PathBuf>, json: Option<PathBuf>, timings: bool) -> Result<(), HarnessError> {
    if let Some(p) = csv.or_else(|| report.config.csv.clone()) {
        write_csv_file(report, &p, timings)?;
    }
    if let Some(p) = json.or_else(|| report.config.json.clone()) {
        write_json_file(report, &p)?;
    }
    Ok(())
}

fn run(cmd: Command) -> Result<bool, HarnessError> {
    match cmd {
        Command::Radial {
            shell,
            k,
            count,
            grid,
            json,
        } => match k {
            Some(k) => {
                let p = RadialProblem::new(shell.form, shell.dim, k, shell.r0, shell.r1)?;
                let est = radial_eigs_with_grid(&p, count, grid)?;
                println!("{:>3} {:>3} {:>20} {:>12}", "k", "l", "mu", "error");
                for (l, e) in est.iter().enumerate() {
                    println!("{:>3} {:>3} {:>20} {:>12.3e}", k, l + 1, fmt_human(e.value), e.error);
                }
                if let Some(p) = json {
                    write_json_file(&est, &p)?;
                }
            }
            None => {
                let s = shell_spectrum(shell.form, shell.dim, shell.r0, shell.r1, count)?;
                println!("{:>3} {:>3} {:>5} {:>20} {:>12}", "k", "l", "mult", "mu", "error");
                for e in &s.entries {
                    println!("{:>3} {:>3} {:>5} {:>20} {:>12.3e}", e.k, e.l, e.mult, fmt_human(e.mu), e.error);
                }
                if let Some(p) = json {
                    write_json_file(&s, &p)?;
                }
            }
        },
        Command::Solve {
            shell,
            t,
            disc,
            defect,
            json,
        } => {
            let spec = domain(&shell, t)?;
            let d = disc.build(shell.form);
            let r = lambda_2(&spec, &d)?;
            let show = |name: &str, e: &shellspec::spectrum::Estimate| {
                println!(
                    "{name:<14} {:>18}  error {:>10}  extrapolated {}",
                    fmt_human(e.value),
                    e.error.map_or("-".into(), |x| format!("{x:.3e}")),
                    e.extrapolated.map_or("-".into(), fmt_human)
                )
            };
            show("lambda1", &r.lambda1);
            show("lambda1_minus", &r.lambda1_minus);
            show("lambda2_plus", &r.lambda2_plus);
            show("lambda2", &r.lambda2);
            println!(
                "branch {}{}{}  vertices {}  ndof minus {} plus {}",
                r.branch,
                if r.tie { " (tie)" } else { "" },
                if r.gap_unresolved { " (gap unresolved)" } else { "" },
                r.vertices,
                r.ndof_minus,
                r.ndof_plus
            );
            if defect {
                let rep = extremality_defect(&spec, &d)?;
                println!("boundary defect {}", fmt_human(rep.defect));
            }
            if let Some(p) = json {
                write_json_file(&r, &p)?;
            }
        }
        Command::Sweep {
            config,
            csv,
            json,
            timings,
        } => {
            let cfg = SweepConfig::load(&config)?;
            let report = run_sweep(&cfg)?;
            print_sweep(&report);
            write_outputs(&report, csv, json, timings)?;
        }
        Command::Rate {
            shell,
            t,
            delta,
            disc,
            json,
        } => {
            let spec = domain(&shell, t)?;
            let r = rate_report(&spec, &disc.build(shell.form), delta)?;
            println!("hadamard   {:>18}  error {}", fmt_human(r.hadamard_rate), r.hadamard_error.map_or("-".into(), |x| format!("{x:.3e}")));
            println!("finite     {:>18}", fmt_human(r.fd_rate));
            println!("relative gap {}", fmt_human(r.relative_gap));
            if let Some(p) = json {
                write_json_file(&r, &p)?;
            }
        }
        Command::Verify {
            config,
            csv,
            json,
            timings,
        } => {
            let cfg = SweepConfig::load(&config)?;
            let (report, verdict) = verify(&cfg)?;
            print_sweep(&report);
            println!("{verdict}");
            write_outputs(&report, csv, None, timings)?;
            if let Some(p) = json {
                write_json_file(&verdict, &p)?;
            }
            return Ok(verdict.overall);
        }
        Command::Converge {
            shell,
            t,
            levels,
            disc,
            json,
        } => {
            let spec = domain(&shell, t)?;
            let mut d = disc.build(shell.form);
            d.refinements = 0;
            let table = convergence_study(&spec, &d, levels)?;
            println!(
                "{:>10} {:>9} {:>18} {:>18} {:>18} {:>18}",
                "h", "vertices", "lambda1", "lambda1_minus", "lambda2_plus", "lambda2"
            );
            for l in &table.levels {
                println!(
                    "{:>10.3e} {:>9} {:>18} {:>18} {:>18} {:>18}",
                    l.h,
                    l.vertices,
                    fmt_human(l.lambda1),
                    fmt_human(l.lambda1_minus),
                    fmt_human(l.lambda2_plus),
                    fmt_human(l.lambda2)
                );
            }
            let orders = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
            println!("observed order lambda1_minus: {}", orders(&table.order_minus));
            println!("observed order lambda2:       {}", orders(&table.order_lambda2));
            println!("lambda2 extrapolated {}  error {:.3e}", fmt_human(table.extrapolated), table.error);
            if let Some(mu) = table.oracle {
                println!("radial reference {}", fmt_human(mu));
            }
            if let Some(p) = json {
                write_json_file(&table, &p)?;
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_pool(cli.jobs) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
