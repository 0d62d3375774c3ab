//! Structured PSD solver against interior-point optima stored in `fixtures/sdp_reference.json`.

use hris_loc::sdp_engine::{solve_structured_psd, BlockStructure, Fidelity, SolverSettings, StructuredPsdProblem};
use hris_loc::C64;
use nalgebra::DMatrix;
use serde_json::Value;

fn matrix(v: &Value) -> DMatrix<C64> {
    let rows = |k: &str| -> Vec<Vec<f64>> {
        v[k].as_array()
            .unwrap()
            .iter()
            .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
            .collect()
    };
    let (re, im) = (rows("re"), rows("im"));
    DMatrix::from_fn(re.len(), re[0].len(), |i, j| C64::new(re[i][j], im[i][j]))
}

fn structure(name: &str) -> BlockStructure {
    match name {
        "toeplitz" => BlockStructure::Toeplitz,
        "free" => BlockStructure::FreePsd,
        other => panic!("unknown block structure {other}"),
    }
}

fn cases() -> Vec<(StructuredPsdProblem, f64)> {
    let text = include_str!("fixtures/sdp_reference.json");
    let root: Value = serde_json::from_str(text).unwrap();
    root["cases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            let data = matrix(&c["data"]);
            let problem = match c["kind"].as_str().unwrap() {
                "two_block" => StructuredPsdProblem::two_block_least_squares(
                    structure(c["first"].as_str().unwrap()),
                    structure(c["second"].as_str().unwrap()),
                    data,
                    c["rho"].as_f64().unwrap(),
                )
                .unwrap(),
                "unit_diagonal" => StructuredPsdProblem::unit_diagonal_max(data).unwrap(),
                other => panic!("unknown case kind {other}"),
            };
            (problem, c["objective"].as_f64().unwrap())
        })
        .collect()
}

fn settings() -> SolverSettings {
    SolverSettings { max_iterations: 20_000, primal_tolerance: 1e-8, dual_tolerance: 1e-8, record_trace: true, ..Default::default() }
}

#[test]
fn objectives_match_reference() {
    let cases = cases();
    assert_eq!(cases.len(), 5);
    for (i, (problem, reference)) in cases.iter().enumerate() {
        assert!(problem.blocks.iter().all(|b| b.size <= 8));
        let sol = solve_structured_psd(problem, &settings()).unwrap();
        let rel = (sol.objective - reference).abs() / reference.abs();
        assert!(rel <= 1e-3, "case {i}: {} vs {reference} (rel {rel:.2e})", sol.objective);
    }
}

/// ADMM iterates are not feasible at every step, so the least-squares objective is only nearly
/// monotone: after 50 iterations no step raises it by more than 1e-3 relative. The unit-diagonal
/// case approaches its optimum from above and is left out.
#[test]
fn objective_settles_after_burn_in() {
    for (i, (problem, _)) in cases().iter().enumerate() {
        if matches!(problem.fidelity, Fidelity::Linear(_)) {
            continue;
        }
        let sol = solve_structured_psd(problem, &settings()).unwrap();
        let worst = sol
            .report
            .trace
            .windows(2)
            .skip(50)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1e-12))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-3, "case {i}: objective moved back by {worst:.2e}");
    }
}
