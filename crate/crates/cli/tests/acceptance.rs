//! The ten acceptance criteria, each printed as one PASS/FAIL line. Runs
//! without the libtest harness so the lines are never captured.
//!
//! Runs single-threaded by default; set `KZQ_WORKERS` to use more workers.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use kzquench::dynamics::ModeDensity;
use kzquench::protocols::Branch;
use kzquench::scaling::{kz_reference, theory_exponents};
use kzquench::{
    defect_density, evolve_lindblad, evolve_pure, excitation_probability, make_linear, make_nloai,
    make_oai, sudden_quench, CriticalData, Noise, StepPolicy,
};
use kzquench_cli::commands::{cmd_fit, cmd_noise_sweep, cmd_schedule, cmd_sweep};
use kzquench_cli::fit::{fit_runs, FitModel, FitReport};
use kzquench_cli::runner::{read_runs, RunRecord};
use kzquench_cli::RunConfig;

const ISING: CriticalData = CriticalData::ISING;

fn workers() -> usize {
    std::env::var("KZQ_WORKERS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1)
}

fn config(toml: &str) -> RunConfig {
    let mut c = RunConfig::from_toml_str(toml).expect("acceptance config parses");
    c.run.workers = workers();
    c.run.write_modes = false;
    c
}

fn sweep(toml: &str) -> (String, Vec<RunRecord>) {
    let out = cmd_sweep(&config(toml)).expect("sweep runs");
    assert_eq!(out.failed_runs, 0, "{}", out.report);
    let text = out.file("runs.csv").unwrap().to_string();
    let rows = read_runs(&text).unwrap();
    (text, rows)
}

fn fit(text: &str, model: FitModel) -> FitReport {
    let records = read_runs(text).unwrap();
    fit_runs(&records, model, &ISING).expect("fit succeeds")
}

fn n_of(rows: &[RunRecord], pred: impl Fn(&RunRecord) -> bool) -> Vec<f64> {
    rows.iter()
        .filter(|r| pred(r))
        .map(|r| r.n.unwrap())
        .collect()
}

fn sci(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", cells.join(", "))
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn kz_scaling() -> Verdict {
    let (text, rows) = sweep(
        r#"
[protocol]
kind = "oai"
[zeta]
policy = "fixed"
values = 32.0
[tau]
values = [50.0, 100.0, 200.0, 400.0, 800.0]
[run]
modes = 2000
"#,
    );
    let report = cmd_fit(&RunConfig::default(), &text, FitModel::Kz).unwrap();
    let exponent = fit(&text, FitModel::Kz).exponent;
    let ratio = rows[4].n.unwrap() / kz_reference(800.0);
    assert!(report.report.contains("theory = -0.5"));
    verdict(
        (exponent + 0.5).abs() <= 0.05 && (0.9..=1.1).contains(&ratio),
        format!("exponent {exponent:.4} (target -0.5 +- 0.05), n/n_KZ(800) = {ratio:.4}"),
    )
}

fn initial_coupling_independence() -> Verdict {
    let (_, rows) = sweep(
        r#"
[protocol]
kind = "oai"
g_i = [1.5, 2.0, 3.0, 5.0]
[zeta]
policy = "fixed"
values = 32.0
[tau]
values = 200.0
[run]
modes = 2000
"#,
    );
    let n = n_of(&rows, |_| true);
    let mut worst: f64 = 0.0;
    for a in &n {
        for b in &n {
            worst = worst.max((a - b).abs() / a.min(*b));
        }
    }
    verdict(
        worst <= 0.05,
        format!("n = {n:.5?}, worst pairwise spread {:.2}%", 100.0 * worst),
    )
}

fn sudden_limit() -> Verdict {
    let n = sudden_quench(2.0, 0.0, 2000).unwrap().defect_density;
    verdict(
        (n - 0.375).abs() <= 0.02,
        format!("n = {n:.5} (target 0.375 +- 0.02)"),
    )
}

fn zeta_collapse() -> Verdict {
    let (text, _) = sweep(
        r#"
[protocol]
kind = "oai"
[zeta]
policy = "fixed"
values = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0]
[tau]
values = [500.0, 1000.0, 2000.0]
[run]
modes = 2000
"#,
    );
    let r = fit(&text, FitModel::ZetaCollapse);
    verdict(
        (1.55..=1.90).contains(&r.exponent) && (0.08..=0.15).contains(&r.prefactor),
        format!(
            "x = {:.4}, y = {:.4} from {} points (r2 {:.4})",
            r.prefactor, r.exponent, r.n_points, r.r_squared
        ),
    )
}

fn akz(toml: &str, target: f64, tol: f64) -> Verdict {
    let out = cmd_noise_sweep(&config(toml)).unwrap();
    assert_eq!(out.failed_runs, 0);
    let Some(csv) = out.file("optimal_tau_fit.csv") else {
        return verdict(false, format!("no fit: {}", out.report.replace('\n', "; ")));
    };
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let row = rdr.records().next().unwrap().unwrap();
    let s: f64 = row[1].parse().unwrap();
    let theory: f64 = row[5].parse().unwrap();
    assert!((theory - target).abs() < 1e-12);
    let minima = out
        .file("optimal_tau.csv")
        .unwrap()
        .lines()
        .skip(1)
        .collect::<Vec<_>>()
        .join("; ");
    verdict(
        ((s - target) / target).abs() <= tol,
        format!(
            "s' = {s:.4} vs {target:.4} ({:.2}% off, limit {:.0}%); minima {minima}",
            100.0 * ((s - target) / target).abs(),
            100.0 * tol
        ),
    )
}

fn akz_oai() -> Verdict {
    akz(
        r#"
[protocol]
kind = "oai"
[zeta]
policy = "power"
alpha = 0.25
c = 1.0
[tau]
range = { min = 50.0, max = 5000.0, per_decade = 12 }
[noise]
w = [0.004, 0.008, 0.012, 0.016, 0.02]
[run]
modes = 2000
"#,
        theory_exponents(0.25, 1.0, &ISING).s_oai,
        0.10,
    )
}

fn akz_lq() -> Verdict {
    akz(
        r#"
[protocol]
kind = "lq"
[tau]
range = { min = 10.0, max = 1000.0, per_decade = 12 }
[noise]
w = [0.004, 0.008, 0.012, 0.016, 0.02]
[run]
modes = 2000
"#,
        4.0 / 3.0,
        0.05,
    )
}

fn nonlinear_kz() -> Verdict {
    let (text, rows) = sweep(
        r#"
[protocol]
kind = "nloai"
g_i = 5.0
r = [2.0, 3.0]
regime = "unrestricted"
[zeta]
policy = "fixed"
values = 320.0
[tau]
values = [25.0, 50.0, 100.0, 200.0, 400.0, 800.0]
[run]
modes = 2000
"#,
    );
    let header = text.lines().next().unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (r, target) in [(2.0, -2.0 / 3.0), (3.0, -0.75)] {
        let subset: Vec<&str> = text
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(4) == Some(&r.to_string()))
            .collect();
        let table = format!("{header}\n{}\n", subset.join("\n"));
        let rep = fit(&table, FitModel::Nlkz);
        assert!((rep.theory - target).abs() < 1e-12);
        pass &= (rep.exponent - target).abs() <= 0.05;
        details.push(format!(
            "r={r}: {:.4} (target {target:.4} +- 0.05)",
            rep.exponent
        ));
    }
    assert_eq!(rows.len(), 12);

    // approach from above as zeta grows
    let mut ladder = Vec::new();
    for r in [2.0, 3.0] {
        for tau in [400.0, 800.0] {
            let (_, nloai) = sweep(&format!(
                r#"
[protocol]
kind = "nloai"
g_i = 5.0
r = {r}
regime = "unrestricted"
[zeta]
policy = "fixed"
values = [20.0, 80.0, 320.0]
[tau]
values = {tau}
[run]
modes = 2000
"#
            ));
            let (_, nlq) = sweep(&format!(
                "[protocol]\nkind = \"nlq\"\ng_i = 5.0\nr = {r}\n[tau]\nvalues = {tau}\n[run]\nmodes = 2000\n"
            ));
            let mut n = n_of(&nloai, |_| true);
            n.push(nlq[0].n.unwrap());
            let ordered = n.windows(2).all(|w| w[0] > w[1]);
            pass &= ordered;
            ladder.push(format!(
                "r={r} tau={tau}: {}{}",
                sci(&n),
                if ordered { "" } else { " NOT ordered" }
            ));
        }
    }
    details.push(format!("zeta 20 > 80 > 320 > NLQ: {}", ladder.join("; ")));
    verdict(pass, details.join(", "))
}

fn nloai_beats_nlq_under_noise() -> Verdict {
    let taus = "[200.0, 400.0, 800.0, 1600.0]";
    let (_, nloai) = sweep(&format!(
        "[protocol]\nkind = \"nloai\"\ng_i = 5.0\nr = 2.0\n[zeta]\npolicy = \"fixed\"\nvalues = 80.0\n[tau]\nvalues = {taus}\n[noise]\nw = 0.008\n[run]\nmodes = 2000\n"
    ));
    let (_, nlq) = sweep(&format!(
        "[protocol]\nkind = \"nlq\"\ng_i = 5.0\nr = 2.0\n[tau]\nvalues = {taus}\n[noise]\nw = 0.008\n[run]\nmodes = 2000\n"
    ));
    let a = n_of(&nloai, |_| true);
    let b = n_of(&nlq, |_| true);
    let branch = b.windows(2).all(|w| w[1] > w[0]);
    let below = a.iter().zip(&b).all(|(x, y)| x < y);
    verdict(
        branch && below,
        format!(
            "NLOAI {} vs NLQ {}; NLQ rising with tau_Q: {branch}",
            sci(&a),
            sci(&b)
        ),
    )
}

fn property_suite() -> Verdict {
    let policy = StepPolicy::default();
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    // invariants of noisy states
    let p = make_oai(150.0, 12.0, 2.0, 0.0, ISING).unwrap();
    for &q in &[0.03, 0.8, 2.9] {
        let rho: ModeDensity = evolve_lindblad(&p, q, &Noise::new(0.05), &policy).unwrap();
        let [lo, hi] = rho.eigenvalues();
        check(
            (rho.trace() - 1.0).abs() < 1e-8 && lo >= -1e-10 && hi <= 1.0 + 1e-10,
            "trace/positivity",
        );
        let s = evolve_pure(&p, q, &policy).unwrap();
        check((s.norm_sqr() - 1.0).abs() < 1e-8, "norm");
        let clean = evolve_lindblad(&p, q, &Noise::NONE, &policy).unwrap();
        let a = excitation_probability(&clean, q, 0.0).unwrap();
        let b = excitation_probability(&s, q, 0.0).unwrap();
        check(
            (a - b).abs() < 1e-6,
            "W=0 master equation equals pure evolution",
        );
        let fine =
            excitation_probability(&evolve_pure(&p, q, &policy.halved()).unwrap(), q, 0.0).unwrap();
        check((fine - b).abs() < 1e-6, "step halving");
    }

    // zeta -> infinity limit: row-wise schedule dumps
    let huge = RunConfig::from_toml_str(
        "[protocol]\nregime = \"unrestricted\"\n[zeta]\npolicy = \"fixed\"\nvalues = 1e8\n[tau]\nvalues = 200.0\n",
    )
    .unwrap();
    let lq =
        RunConfig::from_toml_str("[protocol]\nkind = \"lq\"\n[tau]\nvalues = 200.0\n").unwrap();
    let eps = |c: &RunConfig| -> Vec<f64> {
        let out = cmd_schedule(c).unwrap();
        let mut rdr = csv::Reader::from_reader(out.file("schedule.csv").unwrap().as_bytes());
        rdr.records()
            .map(|r| r.unwrap()[1].parse().unwrap())
            .collect()
    };
    let (a, b) = (eps(&huge), eps(&lq));
    let sup = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    check(
        a.len() == b.len() && sup < 1e-3,
        "zeta = 1e8 reduces to the linear ramp",
    );

    // auxiliary timescale identity and the total-time bound
    for (tau, zeta, r) in [
        (100.0, 20.0, 1.0),
        (1000.0, 32.0, 1.0),
        (500.0, 80.0, 2.0),
        (3000.0, 300.0, 3.0),
    ] {
        let p = make_nloai(tau, zeta, r, 2.0, 0.0, ISING).unwrap();
        let (a, b) = p.window();
        for k in 0..=50 {
            let t = a + (b - a) * k as f64 / 50.0;
            let ts = p.timescales(t.clamp(a, b), Branch::Auxiliary).unwrap();
            check(
                (ts.drive / ts.relax - zeta).abs() <= 1e-9 * zeta,
                "auxiliary identity",
            );
        }
        check(p.total_time() <= 2.0 * p.theta().unwrap(), "T <= 2 theta");
    }

    // batched mode integration agrees with the single-mode path
    let batched = defect_density(&p, 64, &Noise::NONE, &policy).unwrap();
    let (q, pq) = batched.modes[5];
    let single = excitation_probability(&evolve_pure(&p, q, &policy).unwrap(), q, 0.0).unwrap();
    check(pq == single, "batched equals single mode");

    // byte-determinism of the CLI across worker counts
    let toml = "[protocol]\nkind = \"oai\"\n[zeta]\npolicy = \"fixed\"\nvalues = [6.0, 12.0]\n[tau]\nvalues = [30.0, 60.0, 120.0]\n[noise]\nw = [0.0, 0.03]\n[run]\nmodes = 300\n";
    let mut one = RunConfig::from_toml_str(toml).unwrap();
    one.run.workers = 1;
    let mut four = one.clone();
    four.run.workers = 4;
    check(
        cmd_sweep(&one).unwrap().files == cmd_sweep(&four).unwrap().files,
        "byte-determinism across workers",
    );
    let sched = RunConfig::from_toml_str("[tau]\nvalues = 100.0\n").unwrap();
    check(
        cmd_schedule(&sched).unwrap().files == cmd_schedule(&sched).unwrap().files,
        "schedule determinism",
    );

    let ok = failures.is_empty();
    verdict(
        ok,
        if ok {
            "all properties hold".into()
        } else {
            format!("failed: {failures:?}")
        },
    )
}

fn landau_zener() -> Verdict {
    let policy = StepPolicy::default();
    let mut worst: f64 = 0.0;
    for tau in [100.0, 200.0] {
        let p = make_linear(tau, 2.0, 0.0, ISING).unwrap();
        for k in 1..=10 {
            let q = 0.005 * k as f64;
            let pq = excitation_probability(&evolve_pure(&p, q, &policy).unwrap(), q, 0.0).unwrap();
            worst = worst.max((pq - (-2.0 * PI * tau * q * q).exp()).abs());
        }
    }
    verdict(
        worst <= 0.02,
        format!("max |p_q - exp(-2 pi tau_Q q^2)| = {worst:.4} (limit 0.02)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("KZ scaling of OAI", kz_scaling),
        ("independence of g_i", initial_coupling_independence),
        ("sudden limit", sudden_limit),
        ("zeta-crossover collapse", zeta_collapse),
        ("AKZ optimal exponent, OAI", akz_oai),
        ("AKZ optimal exponent, LQ", akz_lq),
        ("nonlinear KZ exponents", nonlinear_kz),
        ("NLOAI below NLQ under noise", nloai_beats_nlq_under_noise),
        ("property suite", property_suite),
        ("Landau-Zener modes", landau_zener),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        println!(
            "criterion {:>2} {}: {name}: {} [{:.0} s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
