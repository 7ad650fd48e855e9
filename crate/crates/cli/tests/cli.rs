use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use sopf::cases::{random_case, three_bus};
use sopf::evaluator::{default_penalty, evaluate};
use sopf::grid::compute_ptdf;
use sopf::pipeline::{solve_method, Method, SolveOptions};
use sopf::scenarios::{sample, DistributionSpec};
use sopf_cli::files::{read_report, read_solution, report_text, summary_csv, write_solution, ReportMeta, SolutionFile};

fn sopf(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sopf")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.txt");
    assert_eq!(sopf(&["gen-scenarios", "--case", "three_bus", "--count", "0", "--seed", "1", "--out", p(&out)]).0, 2);
    assert_eq!(sopf(&["report", "--out-dir", p(dir.path())]).0, 2);
    assert_eq!(sopf(&["gen-scenarios", "--case", "no_such_case", "--count", "3", "--seed", "1", "--out", p(&out)]).0, 2);
    assert_eq!(sopf(&["gen-scenarios", "--case", "three_bus", "--count", "3", "--out", p(&out)]).0, 2, "seed is required");
    assert_eq!(sopf(&["frobnicate"]).0, 2);
}

#[test]
fn three_bus_workflow_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let case = d.join("three_bus.toml");
    assert_eq!(sopf(&["export-case", "--case", "three_bus", "--out", p(&case)]).0, 0);
    let ins = d.join("in.txt");
    let outs = d.join("out.txt");
    assert_eq!(sopf(&["gen-scenarios", "--case", p(&case), "--count", "6", "--seed", "4", "--out", p(&ins)]).0, 0);
    assert_eq!(sopf(&["gen-scenarios", "--case", p(&case), "--count", "200", "--seed", "5", "--out", p(&outs)]).0, 0);

    for m in ["agc-robust", "agc-jcc", "amgc", "amgc-h"] {
        let od = d.join(m);
        let (code, _, err) =
            sopf(&["solve", "--case", p(&case), "--scenarios", p(&ins), "--method", m, "--epsilon", "0.34", "--out-dir", p(&od)]);
        assert_eq!(code, 0, "{m}: {err}");
        let (code, _, err) = sopf(&[
            "evaluate", "--case", p(&case), "--solution", p(&od.join("solution.toml")), "--scenarios", p(&outs), "--out-dir", p(&od),
        ]);
        assert_eq!(code, 0, "{m}: {err}");
    }
    let reports: Vec<String> = ["agc-robust", "agc-jcc", "amgc", "amgc-h"]
        .iter()
        .map(|m| d.join(m).join("report.csv").to_str().unwrap().to_string())
        .collect();
    let mut args = vec!["report", "--out-dir", p(d)];
    args.extend(reports.iter().map(|s| s.as_str()));
    let (code, stdout, _) = sopf(&args);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout.starts_with("method,A%,M%,D%,E[C]\n"));
    let svg = std::fs::read_to_string(d.join("scatter.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 4 + 4);

    let heuristic = read_solution(&d.join("amgc-h").join("solution.toml")).unwrap().meta.objective;
    let exact = read_solution(&d.join("amgc").join("solution.toml")).unwrap().meta.objective;
    assert!(heuristic >= exact - 1e-6);

    let wild = d.join("wild.txt");
    assert_eq!(sopf(&["gen-scenarios", "--case", p(&case), "--count", "5", "--seed", "1", "--sigma", "3", "--out", p(&wild)]).0, 0);
    let (code, _, err) = sopf(&["solve", "--case", p(&case), "--scenarios", p(&wild), "--method", "agc-robust", "--out-dir", p(&d.join("x"))]);
    assert_eq!(code, 3, "{err}");

    let (code, _, err) = sopf(&["solve", "--case", "desk24", "--scenarios", p(&ins), "--method", "amgc", "--out-dir", p(&d.join("x"))]);
    assert_eq!(code, 1, "case mismatch: {err}");
}

#[test]
fn solver_limit_exits_with_four_and_keeps_the_incumbent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ins = d.join("in.txt");
    assert_eq!(sopf(&["gen-scenarios", "--case", "desk24", "--count", "40", "--seed", "9", "--out", p(&ins)]).0, 0);
    let (code, _, err) = sopf(&[
        "solve", "--case", "desk24", "--scenarios", p(&ins), "--method", "amgc", "--epsilon", "0.05", "--time-limit", "0.000001",
        "--out-dir", p(d),
    ]);
    assert_eq!(code, 4, "{err}");
    let sol = read_solution(&d.join("solution.toml")).unwrap();
    assert_eq!(sol.meta.status, "TimeLimit");
    assert!(sol.meta.objective.is_finite());
}

#[test]
fn reports_from_different_cases_are_refused() {
    let case = three_bus();
    let ptdf = compute_ptdf(&case).unwrap();
    let sc = sample(&case, &DistributionSpec::default(), 5, 1).unwrap();
    let o = solve_method(Method::AgcRobust, &case, &sc, &ptdf, &SolveOptions::default()).unwrap();
    let rep = evaluate(&o.solution.first_stage(), &case, &ptdf, &sc, 4.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, report_text(&ReportMeta::new("agc-robust", "aaaa", 0, 0.0, &rep), &rep)).unwrap();
    std::fs::write(&b, report_text(&ReportMeta::new("agc-robust", "bbbb", 0, 0.0, &rep), &rep)).unwrap();
    let ra = read_report(&a).unwrap();
    assert_eq!(ra.rows.len(), 5);
    assert!(summary_csv(&[ra.clone()]).unwrap().lines().count() == 2);
    assert!(summary_csv(&[ra, read_report(&b).unwrap()]).is_err());
    let (code, _, _) = sopf(&["report", p(&a), p(&b), "--out-dir", p(dir.path())]);
    assert_eq!(code, 1);
}

#[test]
fn experiment_is_byte_for_byte_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let od = dir.path().join(name);
        let (code, _, err) = sopf(&[
            "experiment", "--case", "three_bus", "--in-samples", "6", "--out-samples", "300", "--seed", "11", "--reps", "2",
            "--epsilon", "0.34", "--out-dir", p(&od),
        ]);
        assert_eq!(code, 0, "{err}");
        od
    };
    let a = run("a");
    let b = run("b");
    let mut files = vec!["summary.csv".to_string(), "scatter.svg".to_string()];
    for rep in 0..2 {
        for m in Method::ALL {
            files.push(format!("rep{rep}/{m}/report.csv"));
            files.push(format!("rep{rep}/{m}/solution.toml"));
        }
    }
    for f in files {
        let x = std::fs::read(a.join(&f)).unwrap();
        let y = std::fs::read(b.join(&f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solution_files_round_trip_into_identical_evaluations(seed in 0u64..5000) {
        let case = random_case(seed, 3 + (seed % 6) as usize);
        let ptdf = compute_ptdf(&case).unwrap();
        let ins = sample(&case, &DistributionSpec::default(), 8, seed).unwrap();
        let outs = sample(&case, &DistributionSpec::default(), 60, seed + 1).unwrap();
        let Ok(o) = solve_method(Method::Amgc, &case, &ins, &ptdf, &SolveOptions { epsilon: 0.25, ..Default::default() }) else {
            return Ok(());
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("solution.toml");
        write_solution(&path, &SolutionFile::new(&o, 0.25, &case.content_hash(), 8, Some(seed))).unwrap();
        let back = read_solution(&path).unwrap();
        prop_assert_eq!(&back.first_stage, &o.solution.first_stage());
        let penalty = default_penalty(&case);
        let mem = evaluate(&o.solution.first_stage(), &case, &ptdf, &outs, penalty).unwrap();
        let disk = evaluate(&back.first_stage, &case, &ptdf, &outs, penalty).unwrap();
        prop_assert_eq!(mem.expected_cost.to_bits(), disk.expected_cost.to_bits());
        for (x, y) in mem.records.iter().zip(&disk.records) {
            prop_assert_eq!(x.cost.to_bits(), y.cost.to_bits());
        }
    }
}
