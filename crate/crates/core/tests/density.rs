use moduli_core::density::{run_density, DensityExperiment};
use moduli_core::gh_bound;
use moduli_core::io::parse_json;
use moduli_core::manifold::{
    geodesic_space, sample, BaseManifold, ConformalFactor, FourierTerm, MetricField, SampleMode,
};

const UNIT: BaseManifold = BaseManifold::FlatTorus { lx: 1.0, ly: 1.0 };

fn config(target: &str) -> DensityExperiment {
    parse_json(&format!(
        r#"{{
            "base": {{"base": {{"type": "flat_torus", "lx": 1, "ly": 1}}}},
            "target": {target},
            "n_samples": 25,
            "budget": 14,
            "inner_budget": 300,
            "final_budget": 3000,
            "seed": 5,
            "success_ratio": 0.5
        }}"#
    ))
    .unwrap()
}

#[test]
fn config_defaults() {
    let exp = config(r#"{"base": {"type": "flat_torus", "lx": 1, "ly": 1}}"#);
    assert_eq!(exp.degree, 1);
    assert_eq!(exp.knn, 8);
    assert_eq!(exp.step, 0.2);
    assert_eq!(exp.recovery_tolerance, None);
    assert_eq!(exp.base, MetricField::flat(UNIT));
}

#[test]
fn in_class_target_is_approached() {
    let psi = ConformalFactor {
        constant: 0.071,
        fourier: vec![FourierTerm {
            k: [1, 0],
            cos: 0.137,
            sin: 0.0,
        }],
        bumps: Vec::new(),
    };
    let mut exp = config(r#"{"base": {"type": "flat_torus", "lx": 1, "ly": 1}}"#);
    exp.target = MetricField::new(UNIT, psi).unwrap();
    let first = run_density(&exp).unwrap();
    assert!(
        first.passed,
        "{} -> {}",
        first.initial_upper, first.final_upper
    );
    for w in first.history.windows(2) {
        assert!(w[1].gh_upper <= w[0].gh_upper);
    }
    // Everything but the wall clock is reproducible.
    let again = run_density(&exp).unwrap();
    assert_eq!(first.best, again.best);
    let strip = |r: &moduli_core::density::DensityReport| {
        r.history
            .iter()
            .map(|h| (h.iteration, h.gh_upper, h.gh_lower))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&first), strip(&again));
}

#[test]
fn unreachable_threshold_is_reported_not_raised() {
    let mut exp = config(
        r#"{"base": {"type": "flat_torus", "lx": 1, "ly": 1.5},
            "conformal": {"fourier": [{"k": [2, 1], "cos": 0.3, "sin": 0}]}}"#,
    );
    exp.budget = 2;
    exp.success_ratio = Some(1e-6);
    let rep = run_density(&exp).unwrap();
    assert!(!rep.passed);
    assert!(rep.final_upper > 0.0);
}

#[test]
fn doubling_the_samples_stays_within_the_discretization_budget() {
    // knn = 8 grid graphs overestimate flat distances by at most
    // √(4 - 2√2) - 1 relative, which is the budget for one resolution change.
    let octile = (4.0 - 2.0 * 2f64.sqrt()).sqrt() - 1.0;
    let phi = MetricField::new(
        UNIT,
        ConformalFactor {
            constant: 0.1,
            fourier: vec![FourierTerm {
                k: [1, 0],
                cos: 0.2,
                sin: 0.0,
            }],
            bumps: Vec::new(),
        },
    )
    .unwrap();
    let target: MetricField = parse_json(
        r#"{"base": {"type": "flat_torus", "lx": 1, "ly": 1.2},
            "conformal": {"constant": 0.2, "fourier": [
                {"k": [1, 0], "cos": 0.3, "sin": 0},
                {"k": [2, 1], "cos": 0, "sin": 0.15}]}}"#,
    )
    .unwrap();
    let at = |n: usize| {
        let build = |f: &MetricField| {
            let pts = sample(f, n, SampleMode::Grid, 7).unwrap();
            geodesic_space(f, pts, 8).unwrap().space().clone()
        };
        let (x, y) = (build(&phi), build(&target));
        (gh_bound(&x, &y, 20_000, 3).upper, y.diameter())
    };
    let (coarse, _) = at(64);
    let (fine, diam) = at(128);
    assert!(
        (coarse - fine).abs() <= octile * diam,
        "{coarse} vs {fine}, budget {}",
        octile * diam
    );
}
