//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every line is printed even when an earlier criterion fails.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use moduli_core::certify::{random_space, run_certify, CertificateReport, Suite};
use moduli_core::density::{run_density, DensityExperiment};
use moduli_core::manifold::{
    geodesic_space, sample, BaseManifold, ConformalFactor, FourierTerm, MetricField, SampleMode,
    SampledManifold,
};
use moduli_core::search::{derive_seed, rng_from};
use moduli_core::{eps_exact, gh_exact, lip_exact, Tolerance};
use rand::seq::SliceRandom;
use rand::Rng;

const SEED: u64 = 42;
const INEQUALITY_TOL: Tolerance = Tolerance {
    abs: 1e-9,
    rel: 0.0,
};
const ROUNDING_TOL: Tolerance = Tolerance {
    abs: 1e-12,
    rel: 0.0,
};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Check; 9] = [
        ("lemma sandwich", lemma_sandwich),
        ("diameter bounds", diameter_bounds),
        ("pseudo-metric axioms", pseudo_metric_axioms),
        ("topology chain", topology_chain),
        ("sub-multiplicativity", submultiplicativity),
        ("zero distance on isometric copies", isometric_copies),
        ("geodesic fidelity", geodesic_fidelity),
        ("conformal density", conformal_density),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {} {name}: {} ({})",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(k + 1);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn describe(rep: &CertificateReport) -> String {
    rep.entries
        .iter()
        .map(|e| {
            let short = e.name.split_once('/').map_or(e.name.as_str(), |(_, n)| n);
            format!("{short} n={} max={:e}", e.instances, e.max_violation)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn suite(s: Suite, trials: u32, tol: Tolerance, limit: Option<Duration>, min: u64) -> Outcome {
    let (rep, took) = timed(|| run_certify(s, trials, SEED, tol));
    let enough = rep.entries.iter().all(|e| e.instances >= min);
    let in_time = limit.map_or(true, |l| took < l);
    Outcome {
        pass: rep.pass && enough && in_time,
        detail: format!(
            "{trials} trials, seed {SEED}, tol abs {:e} rel {:e}, {:.1?}{}: {}",
            tol.abs,
            tol.rel,
            took,
            limit.map_or(String::new(), |l| format!(" < {l:?}")),
            describe(&rep)
        ),
    }
}

fn lemma_sandwich() -> Outcome {
    suite(
        Suite::LemmaSandwich,
        200,
        INEQUALITY_TOL,
        Some(Duration::from_secs(60)),
        200,
    )
}

fn diameter_bounds() -> Outcome {
    suite(Suite::DiameterBounds, 200, ROUNDING_TOL, None, 200)
}

fn pseudo_metric_axioms() -> Outcome {
    suite(Suite::PseudoMetricAxioms, 100, INEQUALITY_TOL, None, 100)
}

fn topology_chain() -> Outcome {
    suite(
        Suite::TopologyChain,
        20,
        INEQUALITY_TOL,
        Some(Duration::from_secs(600)),
        20,
    )
}

fn submultiplicativity() -> Outcome {
    suite(Suite::Submultiplicativity, 100, INEQUALITY_TOL, None, 100)
}

fn isometric_copies() -> Outcome {
    let mut rng = rng_from(derive_seed(SEED, 6));
    let mut nonzero = 0;
    let trials = 200;
    for _ in 0..trials {
        let n = rng.random_range(1..=5);
        let x = random_space(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let y = x.permuted(&perm).unwrap();
        let values = [
            gh_exact(&x, &y).unwrap().upper,
            eps_exact(&x, &y).unwrap().value,
            lip_exact(&x, &y).unwrap().value.as_f64(),
        ];
        nonzero += values.iter().filter(|&&v| v != 0.0).count();
    }
    Outcome {
        pass: nonzero == 0,
        detail: format!("{trials} permuted copies of 1-5 point spaces, {nonzero} nonzero values, exact zero required"),
    }
}

fn flat_torus_error(side: usize, knn: usize) -> (f64, f64) {
    let field = MetricField::flat(BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 });
    let m: SampledManifold = geodesic_space(
        &field,
        sample(&field, side * side, SampleMode::Grid, 0).unwrap(),
        knn,
    )
    .unwrap();
    let p = m.params();
    let mut worst = 0.0_f64;
    let mut undercut = 0.0_f64;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            let mut exact = f64::INFINITY;
            for a in -1..=1 {
                for b in -1..=1 {
                    let dx = p[j][0] - p[i][0] + a as f64;
                    let dy = p[j][1] - p[i][1] + b as f64;
                    exact = exact.min(dx.hypot(dy));
                }
            }
            let graph = m.space().dist(i, j);
            worst = worst.max((graph - exact).abs() / exact);
            undercut = undercut.max(exact - graph);
        }
    }
    (worst, undercut)
}

fn geodesic_fidelity() -> Outcome {
    let tol = 0.02;
    let ((rel, undercut), took) = timed(|| flat_torus_error(32, 8));
    let (wide, _) = flat_torus_error(32, 48);
    let limit = Duration::from_secs(30);
    Outcome {
        pass: rel <= tol && undercut <= 1e-12 && took < limit,
        detail: format!(
            "32x32 grid, knn 8: max relative error {rel:.4} vs tolerance {tol}, \
             largest undercut {undercut:e}, {took:.1?} < {limit:?}; \
             knn 48 on the same grid reaches {wide:.4}"
        ),
    }
}

fn conformal_density() -> Outcome {
    let unit = BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 };
    let experiment = |target: MetricField| DensityExperiment {
        base: MetricField::flat(unit),
        target,
        degree: 1,
        n_samples: 64,
        knn: 8,
        mode: SampleMode::Grid,
        budget: 25,
        inner_budget: 600,
        final_budget: 20_000,
        seed: 7,
        step: 0.2,
        success_ratio: None,
        recovery_tolerance: None,
    };
    let in_class = MetricField::new(
        unit,
        ConformalFactor {
            constant: 0.071,
            fourier: vec![
                FourierTerm {
                    k: [1, 0],
                    cos: 0.137,
                    sin: 0.0,
                },
                FourierTerm {
                    k: [0, 1],
                    cos: 0.0,
                    sin: -0.083,
                },
            ],
            bumps: Vec::new(),
        },
    )
    .unwrap();
    let bumpy = MetricField::new(
        BaseManifold::FlatTorus { lx: 1.0, ly: 1.2 },
        ConformalFactor {
            constant: 0.2,
            fourier: vec![
                FourierTerm {
                    k: [1, 0],
                    cos: 0.3,
                    sin: 0.0,
                },
                FourierTerm {
                    k: [2, 1],
                    cos: 0.0,
                    sin: 0.15,
                },
            ],
            bumps: Vec::new(),
        },
    )
    .unwrap();

    let mut recover = experiment(in_class.clone());
    let pts = sample(&in_class, recover.n_samples, recover.mode, recover.seed).unwrap();
    let diam = geodesic_space(&in_class, pts, recover.knn)
        .unwrap()
        .space()
        .diameter();
    let budget = 0.02 * diam;
    recover.recovery_tolerance = Some(budget);
    let mut reduce = experiment(bumpy);
    reduce.success_ratio = Some(0.5);

    let ((a, b), took) = timed(|| {
        (
            run_density(&recover).unwrap(),
            run_density(&reduce).unwrap(),
        )
    });
    let limit = Duration::from_secs(900);
    Outcome {
        pass: a.passed && b.passed && took < limit,
        detail: format!(
            "seed 7; in-class target: gh_upper {:.4} -> {:.4} vs budget 0.02*diam = {budget:.4}; \
             out-of-class target: {:.4} -> {:.4}, ratio {:.3} vs 0.5; {took:.1?} < {limit:?}",
            a.initial_upper,
            a.final_upper,
            b.initial_upper,
            b.final_upper,
            b.final_upper / b.initial_upper
        ),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_moduli"))
            .args(["certify", "--suite", "all", "--seed", "42", "--out"])
            .arg(&path)
            .env("RAYON_NUM_THREADS", threads)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        (status.code(), fs::read(&path).unwrap_or_default())
    };
    let runs = [
        run("1", "one.json"),
        run("4", "four.json"),
        run("4", "again.json"),
    ];
    let identical = runs.iter().all(|r| r.1 == runs[0].1) && !runs[0].1.is_empty();
    let codes: Vec<_> = runs.iter().map(|r| r.0).collect();
    Outcome {
        pass: identical,
        detail: format!(
            "certify --suite all --seed 42 on 1, 4 and 4 threads: reports {}, {} bytes, exit codes {codes:?}",
            if identical { "byte-identical" } else { "differ" },
            runs[0].1.len()
        ),
    }
}
