//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-5 and 7-10 run the shipped configurations in `configs/`
//! through the same drivers as the `liouville-lab` binary; criterion 6 is a
//! finite-difference check of the gradient; criterion 11 reruns everything
//! and compares the verdict files byte for byte. A criterion passes when
//! every verdict of its runs passes and the first run finishes within the
//! runtime budget. Outputs are kept under `target/tmp/acceptance/`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use liouville_lab::commands::{run, Command, RunFlags};
use liouville_lab::config::RunConfig;
use liouville_lab::export::write_json;
use liouville_lab::functional::{gradient_check, Problem};
use liouville_lab::greens::SingularSet;
use liouville_lab::verdict::{Verdict, VerdictFile};
use liouville_lab::{Field, Node, Result, Surface};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

macro_rules! config {
    ($name:literal) => {
        ($name, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/", $name, ".toml")))
    };
}

enum Job {
    Command(Command, (&'static str, &'static str)),
    Gradient,
}

struct Criterion {
    number: usize,
    title: &'static str,
    budget_s: f64,
    jobs: Vec<Job>,
}

fn criteria() -> Vec<Criterion> {
    use Command::*;
    use Job::Command as C;
    vec![
        Criterion { number: 1, title: "bubble energy law", budget_s: 60.0, jobs: vec![C(Bubble, config!("c01_bubble_energy"))] },
        Criterion { number: 2, title: "Moser-Trudinger sharpness", budget_s: 120.0, jobs: vec![C(Mt, config!("c02_mt_sharpness"))] },
        Criterion { number: 3, title: "Troyanov regime", budget_s: 120.0, jobs: vec![C(Mt, config!("c03_troyanov"))] },
        Criterion { number: 4, title: "concentration map", budget_s: 180.0, jobs: vec![C(Conc, config!("c04_concentration_map"))] },
        Criterion { number: 5, title: "barycenter behavior", budget_s: 120.0, jobs: vec![C(Conc, config!("c05_barycenter"))] },
        Criterion { number: 6, title: "gradient vs central differences", budget_s: 10.0, jobs: vec![Job::Gradient] },
        Criterion { number: 7, title: "subcritical gradient flow", budget_s: 60.0, jobs: vec![C(Solve, config!("c07_subcritical_flow"))] },
        Criterion { number: 8, title: "supercritical existence on the torus", budget_s: 300.0, jobs: vec![C(Solve, config!("c08_supercritical_newton"))] },
        Criterion {
            number: 9,
            title: "mass quantization onset",
            budget_s: 900.0,
            jobs: vec![C(Scan, config!("c09_quantization_regular")), C(Scan, config!("c09_quantization_singular"))],
        },
        Criterion { number: 10, title: "improved-inequality probe", budget_s: 180.0, jobs: vec![C(Mt, config!("c10_improved_inequality"))] },
    ]
}

fn smooth_random(s: &Surface, rng: &mut ChaCha8Rng) -> Field {
    let modes: Vec<(f64, f64, i32, i32)> =
        (0..6).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI), rng.gen_range(-4..5), rng.gen_range(-4..5))).collect();
    Field::from_fn(s.n_nodes(), |i| {
        let [x, y] = s.chart(Node(i));
        modes.iter().map(|&(a, ph, kx, ky)| a * (2.0 * PI * (kx as f64 * x + ky as f64 * y) + ph).cos()).sum()
    })
}

/// Three random fields times three random directions on the 64² torus with
/// one vortex, relative error of the directional derivative below 1e-5.
fn gradient_job(out: &Path) -> Result<VerdictFile> {
    let seed = 6;
    let s = Arc::new(Surface::torus(64)?);
    let p0 = s.snap([0.3, 0.6])?.0;
    let p = Problem::new(s.clone(), SingularSet::single(p0, 0.5)?, 6.0 * PI)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut verdicts = Vec::new();
    for i in 0..3 {
        let u = smooth_random(&s, &mut rng);
        for j in 0..3 {
            let v = smooth_random(&s, &mut rng);
            let c = gradient_check(&p, &u, &v, 1e-5)?;
            verdicts.push(Verdict::at_most(&format!("gradient.field{i}.direction{j}"), c.relative_error, 1e-5, "central differences of I_rho"));
        }
    }
    std::fs::create_dir_all(out)?;
    let file = VerdictFile::new("gradient", seed, verdicts);
    write_json(&out.join("verdicts.json"), &file)?;
    Ok(file)
}

fn job_dir(root: &Path, c: &Criterion, job: &Job) -> PathBuf {
    let sub = match job {
        Job::Command(_, (name, _)) => *name,
        Job::Gradient => "c06_gradient",
    };
    root.join(format!("c{:02}", c.number)).join(sub)
}

fn run_job(job: &Job, out: &Path) -> Result<VerdictFile> {
    match job {
        Job::Command(cmd, (_, text)) => {
            let mut cfg = RunConfig::from_toml(text)?;
            cfg.out = out.to_path_buf();
            run(*cmd, &cfg, RunFlags::default())
        }
        Job::Gradient => gradient_job(out),
    }
}

fn main() -> ExitCode {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&root);
    let (first, second) = (root.join("run1"), root.join("run2"));
    let all = criteria();
    let mut failures = 0;

    for c in &all {
        let start = Instant::now();
        let mut notes = Vec::new();
        let mut ok = true;
        for job in &c.jobs {
            match run_job(job, &job_dir(&first, c, job)) {
                Ok(file) => {
                    for v in file.verdicts.iter().filter(|v| !v.pass) {
                        ok = false;
                        notes.push(format!("failed {}: value {:.6e}, target {:.6e}, tolerance {:.3e}", v.name, v.value, v.target, v.tolerance));
                    }
                }
                Err(e) => {
                    ok = false;
                    notes.push(format!("error: {e}"));
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        if secs > c.budget_s {
            ok = false;
            notes.push(format!("runtime {secs:.1} s exceeds the {:.0} s budget", c.budget_s));
        }
        failures += usize::from(!ok);
        println!("{} criterion {:2} {} [{secs:.1} s / {:.0} s]", if ok { "PASS" } else { "FAIL" }, c.number, c.title, c.budget_s);
        for n in notes {
            println!("      {n}");
        }
    }

    let mut differing = Vec::new();
    for c in &all {
        for job in &c.jobs {
            let b = job_dir(&second, c, job);
            if let Err(e) = run_job(job, &b) {
                differing.push(format!("criterion {} rerun error: {e}", c.number));
                continue;
            }
            let a = std::fs::read(job_dir(&first, c, job).join("verdicts.json"));
            let b = std::fs::read(b.join("verdicts.json"));
            match (a, b) {
                (Ok(a), Ok(b)) if a == b => {}
                _ => differing.push(format!("criterion {}: verdicts.json differs between runs", c.number)),
            }
        }
    }
    let ok = differing.is_empty();
    failures += usize::from(!ok);
    println!("{} criterion 11 determinism of the verdict files across two runs", if ok { "PASS" } else { "FAIL" });
    for d in differing {
        println!("      {d}");
    }

    println!("acceptance: {} of 11 criteria pass; outputs in {}", 11 - failures, root.display());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
