//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use shellspec::geometry::{make_domain, SpaceForm};
use shellspec::harness::{convergence_study, verify, SweepConfig, VerificationVerdict};
use shellspec::radial::{radial_eigs, RadialProblem};
use shellspec::shape::{extremality_defect, rate_report, DEFAULT_STEP};
use shellspec::spectrum::{lambda_2, Discretization};
use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

const ORACLE_TOL: f64 = 5e-3;
const ORACLE_EXTRAPOLATED_TOL: f64 = 1e-3;
const ORACLE_SECONDS: f64 = 60.0;
const RATE_GAP_TOL: f64 = 0.02;
const RADIAL_MARGIN: f64 = 1e-6;
const DEFECT_TOL: f64 = 0.05;
const ORDER_RANGE: (f64, f64) = (1.7, 2.3);

const SHELLS: [(&str, SpaceForm, usize, f64, f64); 4] = [
    ("euclidean2", SpaceForm::Euclidean, 2, 0.5, 1.0),
    ("euclidean3", SpaceForm::Euclidean, 3, 0.5, 1.0),
    ("spherical2", SpaceForm::Spherical, 2, 0.4, 1.2),
    ("hyperbolic2", SpaceForm::Hyperbolic, 2, 0.4, 1.2),
];

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.json"))
}

/// Written straight to stderr so the lines survive output capture.
fn report(label: &str, pass: bool, detail: &str) {
    let line = format!("{} {label}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn single_thread() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()
}

fn oracle_agreement() -> (bool, String) {
    let pool = single_thread();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, form, dim, r0, r1) in SHELLS {
        let spec = make_domain(form, dim, r0, r1, 0.0).unwrap();
        let base = Discretization::default_for(form);
        let start = Instant::now();
        let (coarse, refined) = pool.install(|| {
            let mut d = base;
            d.refinements = 0;
            let c = lambda_2(&spec, &d).unwrap();
            d.refinements = 1;
            (c, lambda_2(&spec, &d).unwrap())
        });
        let secs = start.elapsed().as_secs_f64();
        let mu = radial_eigs(&RadialProblem::new(form, dim, 1, r0, r1).unwrap(), 1).unwrap()[0].value;
        let e0 = (coarse.lambda2.value - mu).abs() / mu;
        let e1 = (refined.lambda2.extrapolated.unwrap() - mu).abs() / mu;
        pass &= e0 <= ORACLE_TOL && e1 <= ORACLE_EXTRAPOLATED_TOL && secs <= ORACLE_SECONDS;
        notes.push(format!("{name} {e0:.2e}/{e1:.2e} in {secs:.1}s"));
    }
    (pass, notes.join(", "))
}

fn summarize(verdicts: &[(&str, VerificationVerdict)], check: &str) -> (bool, String) {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, v) in verdicts {
        match v.check(check) {
            Some(c) => {
                pass &= c.pass;
                notes.push(format!("{name} {:.3e} vs {:.3e}", c.margin, c.tolerance));
            }
            None => {
                pass = false;
                notes.push(format!("{name} missing"));
            }
        }
    }
    (pass, notes.join(", "))
}

fn cli_verify_exit_codes() -> (bool, String) {
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, ..) in SHELLS {
        let out = Command::new(env!("CARGO_BIN_EXE_shellspec"))
            .args(["verify", "--config"])
            .arg(config_path(name))
            .output()
            .unwrap();
        let code = out.status.code().unwrap_or(-1);
        pass &= code == 0;
        notes.push(format!("{name} exit {code}"));
    }
    (pass, notes.join(", "))
}

fn hadamard_consistency() -> (bool, String) {
    let mut pass = true;
    let mut worst = (0.0f64, "");
    for (name, form, dim, r0, r1) in SHELLS {
        for t in [0.1, 0.2, 0.3] {
            let spec = make_domain(form, dim, r0, r1, t).unwrap();
            let r = rate_report(&spec, &Discretization::default_for(form), DEFAULT_STEP).unwrap();
            pass &= r.relative_gap <= RATE_GAP_TOL && r.hadamard_rate < 0.0 && r.fd_rate < 0.0;
            if r.relative_gap > worst.0 {
                worst = (r.relative_gap, name);
            }
        }
    }
    (pass, format!("worst relative gap {:.3e} ({})", worst.0, worst.1))
}

fn radial_comparison() -> (bool, String) {
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for form in [SpaceForm::Euclidean, SpaceForm::Spherical, SpaceForm::Hyperbolic] {
        for n in [2, 3, 4] {
            for r0 in [0.2, 0.5, 0.8] {
                let p0 = RadialProblem::new(form, n, 0, r0, 1.0).unwrap();
                let p1 = RadialProblem::new(form, n, 1, r0, 1.0).unwrap();
                let mu2_0 = radial_eigs(&p0, 2).unwrap()[1];
                let mu1_1 = radial_eigs(&p1, 1).unwrap()[0];
                let margin = mu2_0.value - mu1_1.value;
                pass &= margin > RADIAL_MARGIN;
                worst = worst.min(margin);
            }
        }
    }
    (pass, format!("27 cases, smallest margin {worst:.4e}"))
}

fn extremality() -> (bool, String) {
    let mut pass = true;
    let mut notes = Vec::new();
    for dim in [2, 3] {
        let spec = make_domain(SpaceForm::Euclidean, dim, 0.5, 1.0, 0.0).unwrap();
        let base = Discretization::default_for(SpaceForm::Euclidean);
        let coarse = extremality_defect(&spec, &Discretization::new(base.h, 0)).unwrap().defect;
        let fine = extremality_defect(&spec, &Discretization::new(base.h, 1)).unwrap().defect;
        pass &= coarse <= DEFECT_TOL && fine < coarse;
        notes.push(format!("n={dim} {coarse:.2e} -> {fine:.2e}"));
    }
    (pass, notes.join(", "))
}

fn convergence_order() -> (bool, String) {
    let spec = make_domain(SpaceForm::Euclidean, 2, 0.5, 1.0, 0.2).unwrap();
    let base = Discretization::new(Discretization::default_for(SpaceForm::Euclidean).h, 0);
    let table = convergence_study(&spec, &base, 3).unwrap();
    let p = table.order_minus[0];
    (
        p >= ORDER_RANGE.0 && p <= ORDER_RANGE.1,
        format!("observed order {p:.3}"),
    )
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, jobs: &str| -> Vec<u8> {
        let csv = dir.path().join(format!("{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_shellspec"))
            .env("SHELLSPEC_JOBS", jobs)
            .args(["sweep", "--config"])
            .arg(config_path("euclidean2"))
            .arg("--csv")
            .arg(&csv)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        std::fs::read(csv).unwrap()
    };
    let serial = run("serial", "1");
    let serial_again = run("serial_again", "1");
    let parallel = run("parallel", "4");
    let pass = serial == serial_again && serial == parallel;
    (pass, format!("{} CSV bytes, repeat and 1 vs 4 threads compared", serial.len()))
}

#[test]
fn acceptance() {
    std::io::stderr().write_all(b"\n").unwrap();
    let mut results = Vec::new();
    let (p, d) = oracle_agreement();
    report("oracle agreement at t = 0", p, &d);
    results.push(p);

    let verdicts: Vec<(&str, VerificationVerdict)> = SHELLS
        .iter()
        .map(|(name, ..)| {
            let cfg = SweepConfig::load(&config_path(name)).unwrap();
            (*name, verify(&cfg).unwrap().1)
        })
        .collect();
    let (p, d) = summarize(&verdicts, "lambda2_max_at_zero");
    let (q, e) = cli_verify_exit_codes();
    report("lambda2 maximal at the concentric position", p && q, &format!("{d}; {e}"));
    results.push(p && q);

    let (p, d) = summarize(&verdicts, "lambda1_minus_monotone");
    report("lambda1_minus strictly decreasing", p, &d);
    results.push(p);

    let (p, d) = hadamard_consistency();
    report("Hadamard rate matches finite differences", p, &d);
    results.push(p);

    let (p, d) = radial_comparison();
    report("radial comparison mu2(0) > mu1(1)", p, &d);
    results.push(p);

    let (p, d) = summarize(&verdicts, "lambda1_below_lambda1_minus");
    let (q, e) = summarize(&verdicts, "lambda2_is_branch_min");
    report("branch ordering", p && q, &format!("{d}; {e}"));
    results.push(p && q);

    let (p, d) = extremality();
    report("boundary extremality defect", p, &d);
    results.push(p);

    let (p, d) = convergence_order();
    report("convergence order of lambda1_minus", p, &d);
    results.push(p);

    let (p, d) = determinism();
    report("deterministic sweep output", p, &d);
    results.push(p);

    assert!(results.iter().all(|p| *p), "acceptance criteria failed: {results:?}");
}
