//! Command-line front end. Every subcommand reads optional TOML configs,
//! applies flag overrides, writes its outputs and `verdicts.json`, and exits
//! with 0 iff every verdict passes (1 on a failed verdict or runtime error,
//! 2 on a usage error).

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use liouville_lab::commands::{run, run_dir, Command, RunFlags};
use liouville_lab::config::{RunConfig, SingularSpec, SurfaceSpec};
use liouville_lab::verdict::VerdictFile;
use liouville_lab::LabError;

#[derive(Parser)]
#[command(name = "liouville-lab", version, about = "Numerical laboratory for singular Liouville equations and Moser-Trudinger inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit Dirichlet-energy and mean slopes along bubble families.
    Bubble(Common),
    /// Moser-Trudinger deficits and bounded-below probes of the energy.
    Mt(Common),
    /// Concentration radius, thresholded mass and barycenters of densities.
    Conc(Common),
    /// Solve the mean-field equation at one value of rho.
    Solve(Common),
    /// Continue solutions along a grid of rho values.
    Scan(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; repeat to schedule several independent runs.
    #[arg(long, short)]
    config: Vec<PathBuf>,
    /// Surface, e.g. `torus:256`, `sphere:16384`, `disk:64` or `disk:64x128`.
    #[arg(long)]
    surface: Option<SurfaceSpec>,
    /// Bubble exponent(s) for `bubble`; repeat for several.
    #[arg(long)]
    alpha: Vec<f64>,
    /// Largest bubble concentration parameter for `bubble`.
    #[arg(long)]
    lmax: Option<f64>,
    /// Mean-field parameter rho.
    #[arg(long)]
    rho: Option<f64>,
    /// Vortex `x,y,alpha` in chart coordinates; repeat for several.
    #[arg(long, value_parser = parse_singular)]
    singular: Vec<SingularSpec>,
    /// Output directory; with several configs each run gets `runN/` below it.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Random seed for sampled densities and point pairs.
    #[arg(long)]
    seed: Option<u64>,
    /// `scan`: continue from trace.jsonl and solution.csv in the output directory.
    #[arg(long)]
    resume: bool,
    /// Maximum number of runs executed concurrently.
    #[arg(long, short, default_value_t = 1)]
    jobs: usize,
}

fn parse_singular(s: &str) -> Result<SingularSpec, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, alpha] => Ok(SingularSpec { chart: [*x, *y], alpha: *alpha }),
        _ => Err(format!("expected x,y,alpha, got {s:?}")),
    }
}

impl Common {
    fn configs(&self) -> Result<Vec<RunConfig>, LabError> {
        let mut cfgs = if self.config.is_empty() {
            vec![RunConfig::default()]
        } else {
            self.config.iter().map(|p| RunConfig::load(p)).collect::<Result<Vec<_>, _>>()?
        };
        let n = cfgs.len();
        for (i, c) in cfgs.iter_mut().enumerate() {
            if self.surface.is_some() {
                c.surface = self.surface;
            }
            if !self.alpha.is_empty() {
                c.bubble.alphas = self.alpha.clone();
            }
            if self.lmax.is_some() {
                c.bubble.lambda_max = self.lmax;
            }
            if self.rho.is_some() {
                c.rho = self.rho;
            }
            if !self.singular.is_empty() {
                c.singular = self.singular.clone();
            }
            if let Some(seed) = self.seed {
                c.seed = seed;
            }
            if let Some(out) = &self.out {
                c.out = run_dir(out, i, n);
            }
        }
        Ok(cfgs)
    }
}

fn exit_code(e: &LabError) -> u8 {
    match e {
        LabError::Usage(_) | LabError::Config(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("LIOUVILLE_LAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (command, common) = match &cli.command {
        Cmd::Bubble(c) => (Command::Bubble, c),
        Cmd::Mt(c) => (Command::Mt, c),
        Cmd::Conc(c) => (Command::Conc, c),
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Scan(c) => (Command::Scan, c),
    };
    let cfgs = match common.configs() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let flags = RunFlags { resume: common.resume };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<VerdictFile, LabError>>>> = Mutex::new((0..cfgs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..common.jobs.clamp(1, cfgs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cfg) = cfgs.get(i) else { break };
                let r = run(command, cfg, flags);
                results.lock().expect("result slot")[i] = Some(r);
            });
        }
    });
    let mut code = 0u8;
    for (cfg, r) in cfgs.iter().zip(results.into_inner().expect("results")) {
        match r.expect("every run reports") {
            Ok(file) => {
                println!("{command} -> {}", cfg.out.display());
                for v in &file.verdicts {
                    println!("  {}", v.line());
                }
                if !file.all_pass {
                    code = code.max(1);
                }
            }
            Err(e) => {
                eprintln!("error ({}): {e}", cfg.out.display());
                code = code.max(exit_code(&e));
            }
        }
    }
    ExitCode::from(code)
}
