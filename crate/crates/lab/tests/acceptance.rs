//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so that the lines show
//! up in `cargo test` output.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use szego_core::dynamics::{choose_dt, evolve, Scheme, SimParams};
use szego_core::hs_dot_norm;
use szego_core::oracle::{oracle_hs_norm, t_delta};
use szego_lab::experiments::{
    lax_check, loglog_slope, orbital_stability, simulate, turbulence, verify, Horizon, OrbitalSpec,
    SimulateSpec, Suite, TurbulenceSpec, VerifyReport, VerifySpec,
};
use szego_lab::init::InitSpec;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn conservation() -> Outcome {
    let init = InitSpec::Perturbed {
        m: 1,
        eps: 0.3,
        s: 1.0,
        seed: 1,
    };
    let u0 = init.build(128).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.0, 1.0, 2.0] {
        let p = SimParams::new(0.3, alpha, 128, 1e-3, 10.0)
            .unwrap()
            .with_stride(10);
        // the step-halving rule applied over the whole window, from dt = 1e-3
        let dt = match choose_dt(&u0, &p, 10.0, 4) {
            Ok(dt) => dt,
            Err(e) => {
                parts.push(format!("alpha={alpha}: {e}"));
                ok = false;
                continue;
            }
        };
        let drift = evolve(&u0, &p.clone().with_dt(dt)).unwrap().drift();
        ok &= drift.q < 1e-8 && drift.i < 1e-8 && drift.e < 1e-8;
        parts.push(format!(
            "alpha={alpha} dt={dt:.1e} dQ={:.1e} dI={:.1e} dE={:.1e}",
            drift.q, drift.i, drift.e
        ));
    }
    outcome(ok, parts.join("; "))
}

fn oracle_equivalence() -> Outcome {
    let spec = SimulateSpec {
        init: InitSpec::PlanePlus { m: 1, delta: 0.3 },
        epsilon: 0.3,
        alpha: 0.0,
        n: 2048,
        dt: 1e-3,
        t_final: Horizon::Auto("auto:t_delta".into()),
        scheme: Scheme::Rk4Full,
        stride: 100,
        s: 1.0,
        orbit_mode: None,
        dispersion_off: true,
        auto_dt: false,
    };
    let out = match simulate(&spec) {
        Ok(out) => out,
        Err(f) => return outcome(false, f.error.to_string()),
    };
    let oracle = out
        .report
        .oracle
        .expect("plane-plus data is compared with the oracle");
    let traj = &out.trajectories[0].1;
    let hdot = traj
        .states
        .iter()
        .chain([&traj.final_state])
        .map(|u| (hs_dot_norm(u, 0.5) - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        oracle.relative_l2_error < 1e-6 && hdot < 1e-8,
        format!(
            "rel l2 = {:.2e} (< 1e-6), max |Hdot^1/2 - 1| = {hdot:.2e} (< 1e-8), N = 2048",
            oracle.relative_l2_error
        ),
    )
}

fn daisy_exponent() -> Outcome {
    let deltas = [0.4, 0.2, 0.1];
    let mut ok = true;
    let mut parts = Vec::new();
    for s in [1.0, 2.0] {
        let norms: Vec<f64> = deltas
            .iter()
            .map(|&d| oracle_hs_norm(d, t_delta(d), s).unwrap())
            .collect();
        let slope = loglog_slope(&deltas, &norms).unwrap();
        let target = 1.0 - 2.0 * s;
        ok &= (slope - target).abs() <= 0.15;
        parts.push(format!("s={s}: slope {slope:.4} (target {target})"));
    }
    outcome(ok, parts.join("; "))
}

fn turbulence_tracking() -> Outcome {
    let spec = TurbulenceSpec {
        deltas: vec![0.3],
        nu: 1e-3,
        n: 256,
        dt: 1e-3,
        scheme: Scheme::Strang,
        stride: 100,
    };
    match turbulence(&spec) {
        Ok(out) => {
            let c = &out.report.cases[0];
            outcome(
                (0.8..=1.2).contains(&c.ratio),
                format!(
                    "||U||_H1 / ||V||_H1 = {:.4} ({:.4} / {:.4}) at nu = 1e-3, N = 256",
                    c.ratio, c.h1, c.oracle_h1
                ),
            )
        }
        Err(f) => outcome(false, f.error.to_string()),
    }
}

fn verify_spec(suite: Suite) -> VerifySpec {
    VerifySpec {
        suite,
        m: None,
        n: None,
        alpha_mode: "exact".into(),
        order: 4,
        delta: 0.3,
        eps_list: vec![0.1, 0.05],
        t_final: 50.0,
        dt: 2e-3,
        seed: 0,
    }
}

fn exact_identities() -> Outcome {
    let bracket = verify(&verify_spec(Suite::Bracket)).unwrap();
    let homological = verify(&verify_spec(Suite::Homological)).unwrap();
    let mut detail = format!("bracket N=8 passed={}", bracket.passed());
    if let VerifyReport::Homological { cases, .. } = &homological {
        for c in cases {
            detail.push_str(&format!(
                "; m={} N={} residual={} support_ok={}",
                c.m.unwrap_or(0),
                c.n,
                c.max_residual,
                c.support_ok
            ));
        }
    }
    outcome(bracket.passed() && homological.passed(), detail)
}

fn resonances() -> Outcome {
    let four = verify(&verify_spec(Suite::Resonance)).unwrap();
    let six = verify(&VerifySpec {
        order: 6,
        ..verify_spec(Suite::Resonance)
    })
    .unwrap();
    let mut detail = String::new();
    if let VerifyReport::Resonance { report, .. } = &four {
        detail.push_str(&format!(
            "order 4, N=16: {} tuples, pairing matches = {:?}",
            report.count, report.pairing_matches
        ));
    }
    if let VerifyReport::Resonance { report, .. } = &six {
        detail.push_str(&format!(
            "; order 6, N=12: {} tuples, {} non-trivial with k5 != k6, e.g. {:?}",
            report.count,
            report.nontrivial_k5_ne_k6.len(),
            report.nontrivial_k5_ne_k6.first()
        ));
    }
    outcome(four.passed() && six.passed(), detail)
}

fn lax_invariance() -> Outcome {
    match lax_check(0.3, 3072, 1e-3, 48) {
        Ok(c) => outcome(
            c.nuclear_norm_max_rel_drift < 1e-6 && (c.residual_order - 2.0).abs() <= 0.3,
            format!(
                "Tr|H| rel drift {:.2e} (< 1e-6) over [0, t^delta], residual order {:.3} (2 +- 0.3)",
                c.nuclear_norm_max_rel_drift, c.residual_order
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn normal_form_drift() -> Outcome {
    match verify(&verify_spec(Suite::NormalFormDrift)) {
        Ok(VerifyReport::NormalFormDrift { runs, ratio, .. }) => {
            let r = ratio.unwrap_or(f64::NAN);
            outcome(
                (8.0..=32.0).contains(&r),
                format!(
                    "max dev eps=0.1: {:.3e}, eps=0.05: {:.3e}, ratio {r:.2} (in [8, 32])",
                    runs[0].max_w_deviation, runs[1].max_w_deviation
                ),
            )
        }
        Ok(_) => unreachable!(),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn orbital_exponents() -> Outcome {
    let spec = OrbitalSpec {
        m: 1,
        alphas: vec![0.0, 1.0],
        eps_list: vec![0.2, 0.1, 0.05],
        s: 1.0,
        t_final: 50.0,
        n: 64,
        dt: 1e-3,
        stride: 100,
        seed: 0,
    };
    match orbital_stability(&spec) {
        Ok(out) => {
            let e0 = out.report.fits[0].exponent.unwrap_or(f64::NAN);
            let e1 = out.report.fits[1].exponent.unwrap_or(f64::NAN);
            // alpha = 1 should sit near 1 - 1/2, below the alpha = 0 exponent
            outcome(
                e0 >= 0.85 && e1 < e0 && (e1 - 0.5).abs() <= 0.15,
                format!(
                    "exponent {e0:.3} at alpha=0 (>= 0.85), {e1:.3} at alpha=1 (predicted 0.5)"
                ),
            )
        }
        Err(f) => outcome(false, f.error.to_string()),
    }
}

fn lab(args: &[&str], out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_szego-lab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_default()
}

fn determinism_and_interface() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name);
    let mut parts = Vec::new();
    let mut ok = true;

    let sweep = [
        "orbital-stability",
        "--alpha",
        "0,1",
        "--eps-list",
        "0.2,0.1",
        "--T",
        "5",
        "--n",
        "32",
        "--seed",
        "3",
    ];
    let first = lab(&sweep, &d("a"));
    let second = lab(&[&sweep[..], &["--workers", "1"]].concat(), &d("b"));
    let manifest = d("a").join("manifest.json");
    let replay = lab(
        &["orbital-stability", "--config", manifest.to_str().unwrap()],
        &d("c"),
    );
    let files = [
        "report.json",
        "traj_alpha=0_eps=0.1.csv",
        "traj_alpha=1_eps=0.2.csv",
    ];
    let identical = files.iter().all(|f| {
        let a = read(&d("a"), f);
        !a.is_empty() && a == read(&d("b"), f) && a == read(&d("c"), f)
    });
    ok &= first == 0 && second == 0 && replay == 0 && identical;
    parts.push(format!("replay byte-identical = {identical}"));

    let huge = d("huge.json");
    std::fs::write(&huge, "[[1e30, 0], [1e30, 0]]").unwrap();
    let cases: [(&str, Vec<String>, i32); 5] = [
        (
            "ok",
            vec![
                "simulate".into(),
                "--init".into(),
                "plane:m=1".into(),
                "--n".into(),
                "8".into(),
                "--T".into(),
                "1".into(),
            ],
            0,
        ),
        (
            "bad input",
            vec!["simulate".into(), "--init".into(), "wave:m=1".into()],
            5,
        ),
        (
            "blow-up",
            vec![
                "simulate".into(),
                "--init".into(),
                format!("file:{}", huge.display()),
                "--n".into(),
                "4".into(),
            ],
            3,
        ),
        (
            "infeasible",
            vec!["small-data".into(), "--eps-list".into(), "0.01".into()],
            4,
        ),
        (
            "small divisor",
            [
                "verify",
                "--suite",
                "homological",
                "--m",
                "1",
                "--N",
                "8",
                "--alpha-mode",
                "rational:1/8",
            ]
            .map(String::from)
            .to_vec(),
            2,
        ),
    ];
    for (name, args, want) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let got = lab(&args, &d(name));
        ok &= got == want;
        parts.push(format!("{name} -> {got} (want {want})"));
    }
    outcome(ok, parts.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("conservation", conservation),
        ("oracle equivalence", oracle_equivalence),
        ("daisy exponent", daisy_exponent),
        ("turbulence tracking", turbulence_tracking),
        ("exact normal-form identities", exact_identities),
        ("resonance enumeration", resonances),
        ("Lax invariance", lax_invariance),
        ("normal-form drift scaling", normal_form_drift),
        ("orbital-stability exponents", orbital_exponents),
        ("determinism and interface", determinism_and_interface),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {tag} {name} ({secs:.1} s): {}",
            i + 1,
            result.detail
        );
        failed += usize::from(!result.passed);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
