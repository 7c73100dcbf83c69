//! Acceptance criteria, one printed PASS/FAIL line each. Criteria run through the `ase`
//! binary where they concern user-visible behaviour and through the library otherwise.

use std::io::Write;
use std::panic;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use ase_core::ase::DEFAULT_RANK_TOL;
use ase_core::kernels::{normalised, vandermonde_ranks, DEFAULT_VANDERMONDE_TOL};
use ase_core::{auto_scale, auto_scaled_ase, Exponent, MatrixSeries, NodeSet};
use serde_json::Value;

#[path = "../../core/tests/properties.rs"]
mod properties;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    elapsed: Duration,
}

fn ase(args: &[&str]) -> Run {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_ase")).args(args).output().expect("spawn ase");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        elapsed: start.elapsed(),
    }
}

fn json_of(run: &Run, expect_code: i32) -> Result<Value, String> {
    if run.code != expect_code {
        return Err(format!("exit {} (expected {expect_code}): {}", run.code, run.stderr.trim()));
    }
    serde_json::from_str(&run.stdout).map_err(|e| format!("bad json: {e}"))
}

fn exponent(v: &Value) -> f64 {
    v["num"].as_f64().unwrap() / v["den"].as_f64().unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// (valuation, λ̃ list, eigenvector list) per group of an ASE JSON document.
fn groups(doc: &Value) -> Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    doc["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| {
            let vecs = g["vectors"].as_array().unwrap().iter().map(floats).collect();
            (exponent(&g["valuation"]), floats(&g["lambda"]), vecs)
        })
        .collect()
}

fn sizes(doc: &Value) -> Vec<(f64, usize)> {
    groups(doc).into_iter().map(|(v, l, _)| (v, l.len())).collect()
}

/// Σ λ u uᵀ of one group.
fn term(n: usize, lambda: &[f64], vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n]; n];
    for (l, u) in lambda.iter().zip(vectors) {
        for i in 0..n {
            for j in 0..n {
                t[i][j] += l * u[i] * u[j];
            }
        }
    }
    t
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn verify_report(args: &[&str]) -> Result<Value, String> {
    let run = ase(&[&["verify"], args].concat());
    if run.code != 0 && run.code != 3 {
        return Err(format!("verify exit {}: {}", run.code, run.stderr.trim()));
    }
    let doc: Value = serde_json::from_str(&run.stdout).map_err(|e| e.to_string())?;
    check(doc["pass"].as_bool() == Some(true) && run.code == 0, || format!("oracle failed: {}", run.stdout))?;
    Ok(doc)
}

fn statuses(report: &Value) -> Vec<String> {
    report["groups"].as_array().unwrap().iter().map(|g| g["status"].as_str().unwrap().to_string()).collect()
}

fn c1() -> Outcome {
    let path = data("ex2x2.json");
    let k = MatrixSeries::from_json_str(&std::fs::read_to_string(&path).unwrap()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    auto_scaled_ase(&k, DEFAULT_RANK_TOL).map_err(|e| e.to_string())?;
    let lib_time = start.elapsed();
    let run = ase(&["analyze", "--input", path.to_str().unwrap()]);
    let doc = json_of(&run, 0)?;
    let g = groups(&doc);
    check(g.len() == 2, || format!("{} groups", g.len()))?;
    let expected = [(0.0, [1.0, 0.0]), (2.0, [0.0, 1.0])];
    for ((v, l, u), (ev, eu)) in g.iter().zip(expected) {
        check(*v == ev && l.len() == 1 && (l[0] - 1.0).abs() <= 1e-12, || format!("group {v}: {l:?}"))?;
        let err = (u[0][0].abs() - eu[0]).abs().max((u[0][1].abs() - eu[1]).abs());
        check(err <= 1e-12, || format!("vector {u:?}"))?;
    }
    check(lib_time < Duration::from_millis(10), || format!("runtime {lib_time:?}"))?;
    Ok(format!("groups (0,1,e1),(2,1,e2); runtime {lib_time:?} (cli {:?})", run.elapsed))
}

fn c2() -> Outcome {
    let path = data("ex5x5.json");
    let p = path.to_str().unwrap();
    let doc = json_of(&ase(&["analyze", "--input", p]), 0)?;
    let g = groups(&doc);
    let vals: Vec<f64> = g.iter().flat_map(|(v, l, _)| vec![*v; l.len()]).collect();
    check(vals == [0.0, 2.0, 2.0, 4.0, 4.0], || format!("valuations {vals:?}"))?;
    let (s2, s113) = (2f64.sqrt(), 113f64.sqrt());
    let want = [vec![1.0], vec![(1.0 + s2) / 2.0, (1.0 - s2) / 2.0], vec![(9.0 + s113) / 16.0, (9.0 - s113) / 16.0]];
    for ((_, l, _), w) in g.iter().zip(&want) {
        let err = l.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        check(l.len() == w.len() && err <= 1e-10, || format!("λ̃ {l:?} vs {w:?}"))?;
    }
    let u = &g[1].2[0];
    check((u[1].abs() - 0.38).abs() <= 5e-3 && (u[2].abs() - 0.92).abs() <= 5e-3, || format!("eigenvector {u:?}"))?;
    let report = verify_report(&["--input", p, "--tol-coeff", "0.01"])?;
    for gr in report["groups"].as_array().unwrap() {
        check(gr["eps_checked"].as_f64() == Some(1e-4), || format!("checked at {}", gr["eps_checked"]))?;
        check(gr["coeff_rel_err"].as_f64().unwrap() <= 0.01, || format!("coefficient error {}", gr["coeff_rel_err"]))?;
    }
    Ok("valuations (0,2,2,4,4), λ̃ to 1e-10, u=(0.38,0.92), oracle at ε=1e-4".into())
}

fn c3() -> Outcome {
    let path = data("example1.json");
    let k = MatrixSeries::from_json_str(&std::fs::read_to_string(&path).unwrap()).map_err(|e| e.to_string())?;
    let auto = auto_scale(&k.valuation_matrix()).map_err(|e| e.to_string())?;
    let half = Exponent::new(1, 2).map_err(|e| e.to_string())?;
    check(auto.nu == [Exponent::int(0), half, Exponent::int(1)], || format!("ν {:?}", auto.nu))?;
    let doc = json_of(&ase(&["analyze", "--input", path.to_str().unwrap()]), 0)?;
    let g = groups(&doc);
    let lead: Vec<(f64, Vec<f64>)> = g.into_iter().map(|(v, l, _)| (v, l)).collect();
    let ok = lead.len() == 3
        && lead.iter().enumerate().all(|(i, (v, l))| *v == i as f64 && l.len() == 1 && (l[0] - 1.0).abs() <= 1e-12);
    check(ok, || format!("leading terms {lead:?}"))?;
    Ok("ν=(0,1/2,1), leading terms (1,ε,ε²)".into())
}

fn c4() -> Outcome {
    let series = data("ex3x3.json");
    let gkf = data("ex3x3_gkf.json");
    let (s, f) = (series.to_str().unwrap(), gkf.to_str().unwrap());
    let scaled = json_of(&ase(&["analyze", "--input", s, "--mode", "scaled"]), 2)?;
    check(exponent(&scaled["truncated_at"]) == 2.0, || format!("truncated_at {}", scaled["truncated_at"]))?;

    let form: Value = serde_json::from_str(&std::fs::read_to_string(&gkf).unwrap()).unwrap();
    let mat = |v: &Value| v.as_array().unwrap().iter().map(floats).collect::<Vec<_>>();
    let nu: Vec<f64> = form["valuations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| if b["nu"].is_object() { exponent(&b["nu"]) } else { b["nu"].as_f64().unwrap() })
        .collect();
    check(mat(&form["V"]) == [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, -1.0], vec![0.0, 1.0, 1.0]], || "V".into())?;
    check(mat(&form["W"]) == [vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]], || "W".into())?;
    check(nu == [0.0, 1.0, 1.5], || format!("ν {nu:?}"))?;

    let expected = [
        vec![vec![1.0, 0.0, 0.0], vec![0.0; 3], vec![0.0; 3]],
        vec![vec![0.0; 3], vec![0.0, -1.0, -1.0], vec![0.0, -1.0, -1.0]],
        vec![vec![0.0; 3], vec![0.0, 1.0, -1.0], vec![0.0, -1.0, 1.0]],
    ];
    for (input, mode) in [(f, "gkf"), (f, "auto"), (s, "auto")] {
        let doc = json_of(&ase(&["analyze", "--input", input, "--mode", mode]), 0)?;
        check(doc["truncated_at"].is_null(), || format!("{mode}: truncated"))?;
        let g = groups(&doc);
        let lam: Vec<f64> = g.iter().flat_map(|x| x.1.clone()).collect();
        let lam_ok = lam.len() == 3 && lam.iter().zip([1.0, -2.0, 2.0]).all(|(a, b)| (a - b).abs() <= 1e-12);
        check(lam_ok, || format!("{mode}: Schur values {lam:?}"))?;
        for ((_, l, u), t) in g.iter().zip(&expected) {
            let d = max_diff(&term(3, l, u), t);
            check(d <= 1e-12, || format!("{mode}: term error {d:e}"))?;
        }
    }
    Ok("scaled truncates at 2 (exit 2); gkf and auto give (1,-2,2) with exact terms".into())
}

fn c5() -> Outcome {
    let path = data("degenerate.json");
    let p = path.to_str().unwrap();
    let doc = json_of(&ase(&["analyze", "--input", p, "--mode", "iterative"]), 0)?;
    let g = groups(&doc);
    let vals: Vec<f64> = g.iter().flat_map(|(v, l, _)| vec![*v; l.len()]).collect();
    check(vals == [0.0, 2.0, 3.0], || format!("valuations {vals:?}"))?;
    for (i, u) in g.iter().flat_map(|x| x.2.clone()).enumerate() {
        let err = u.iter().enumerate().map(|(j, x)| (x.abs() - f64::from(u8::from(i == j))).abs()).fold(0.0, f64::max);
        check(err <= 1e-12, || format!("U column {i}: {u:?}"))?;
    }
    verify_report(&["--input", p, "--mode", "iterative", "--tol-coeff", "0.01"])?;
    Ok("valuations (0,2,3), U=I, oracle pass".into())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn c6() -> Outcome {
    let run = ase(&[
        "sweep", "--sample", "equispaced:20", "--kernel", "gaussian", "--eps-grid", "1e-2:1e-1:13", "--track-vector", "3",
    ]);
    check(run.code == 0, || format!("exit {}: {}", run.code, run.stderr.trim()))?;
    let (curves, trace) = run.stdout.split_once("\n\n").ok_or("missing vector trace")?;
    let rows: Vec<Vec<f64>> =
        curves.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    let log_eps: Vec<f64> = rows.iter().map(|r| r[0].ln()).collect();
    let mut slopes = Vec::new();
    for (k, want) in [0.0, 2.0, 4.0, 6.0, 8.0].into_iter().enumerate() {
        let ys: Vec<f64> = rows.iter().map(|r| r[k + 1].abs().ln()).collect();
        let s = slope(&log_eps, &ys);
        check((s - want).abs() <= 0.1, || format!("curve {} slope {s:.4}", k + 1))?;
        slopes.push(s);
    }
    let at = trace
        .lines()
        .skip(1)
        .find(|l| l.split(',').next().and_then(|e| e.parse::<f64>().ok()) == Some(1e-2))
        .ok_or("no trace row at ε=1e-2")?;
    let angle: f64 = at.split(',').nth(1).unwrap().parse().unwrap();
    check(angle < 2e-2, || format!("u3 angle {angle:e}"))?;
    check(run.elapsed < Duration::from_secs(5), || format!("runtime {:?}", run.elapsed))?;
    let shown: Vec<String> = slopes.iter().map(|s| format!("{s:.3}")).collect();
    Ok(format!("slopes ({}), u3 angle {angle:.2e}, runtime {:?}", shown.join(","), run.elapsed))
}

fn c7() -> Outcome {
    let mut verifiable = 0;
    let mut total = 0;
    for seed in ["0", "1", "2"] {
        let args = ["--sample", "uniform:10", "--dim", "2", "--seed", seed, "--kernel", "gaussian"];
        let doc = json_of(&ase(&[&["kernel"], &args[..]].concat()), 0)?;
        let got = sizes(&doc);
        check(got == [(0.0, 1), (2.0, 2), (4.0, 3), (6.0, 4)], || format!("seed {seed}: {got:?}"))?;
        let report = verify_report(&[&args[..], &["--tol-coeff", "0.01", "--tol-angle", "1e-2"]].concat())?;
        let st = statuses(&report);
        check(!st.iter().any(|s| s == "fail"), || format!("seed {seed}: {st:?}"))?;
        verifiable += st.iter().filter(|s| *s == "pass").count();
        total += st.len();
    }
    Ok(format!("sizes (1,2,3,4) at (0,2,4,6); {verifiable}/{total} groups verifiable, all pass"))
}

fn c8() -> Outcome {
    for n in ["12", "16", "20"] {
        let sample = format!("cubic:{n}");
        let doc = json_of(&ase(&["kernel", "--sample", &sample, "--kernel", "gaussian"]), 0)?;
        let got = sizes(&doc);
        let counts: Vec<usize> = got.iter().map(|x| x.1).collect();
        check(counts.starts_with(&[1, 2, 3, 3]), || format!("{sample}: {got:?}"))?;
        check(got.iter().filter(|(v, _)| *v >= 8.0).all(|(_, c)| *c <= 3), || format!("{sample}: {got:?}"))?;
    }
    let n = 15;
    let circle = NodeSet::circle(n, 0).map_err(|e| e.to_string())?;
    let ranks = vandermonde_ranks(&normalised(&circle).0, 7, DEFAULT_VANDERMONDE_TOL);
    let want: Vec<usize> = (0..=7).map(|j| (2 * j + 1).min(n)).collect();
    check(ranks == want, || format!("circle ranks {ranks:?}"))?;
    let doc = json_of(&ase(&["kernel", "--sample", "circle:15", "--kernel", "gaussian"]), 0)?;
    let counts: Vec<usize> = sizes(&doc).iter().map(|x| x.1).collect();
    check(counts[0] == 1 && counts[1..].iter().all(|&c| c == 2), || format!("circle sizes {counts:?}"))?;
    let cumulative: Vec<usize> = counts.iter().scan(0, |acc, c| Some(*acc + c).inspect(|s| *acc = *s)).collect();
    check(cumulative == want, || format!("cumulative sizes {cumulative:?}"))?;
    Ok("cubic (1,2,3,3,…) with groups ≤3 from valuation 8; circle (1,2,2,…) with rank 2j+1".into())
}

fn c9() -> Outcome {
    let args = |k: &'static str| vec!["--sample", "uniform:6", "--dim", "2", "--kernel", k];
    let exp = json_of(&ase(&[&["kernel"], &args("exponential")[..]].concat()), 0)?;
    check(sizes(&exp) == [(0.0, 1), (1.0, 5)], || format!("exponential {:?}", sizes(&exp)))?;
    let report = verify_report(&[&args("exponential")[..], &["--tol-coeff", "0.01"]].concat())?;
    check(statuses(&report).iter().all(|s| s == "pass"), || format!("exponential {:?}", statuses(&report)))?;
    for g in report["groups"].as_array().unwrap() {
        let v = exponent(&g["valuation"]);
        let worst = floats(&g["slopes"]).iter().map(|s| (s - v).abs()).fold(0.0, f64::max);
        check(worst <= 0.05, || format!("exponential slope off by {worst}"))?;
    }
    let mat = json_of(&ase(&[&["kernel"], &args("matern2")[..]].concat()), 0)?;
    check(sizes(&mat) == [(0.0, 1), (2.0, 2), (3.0, 3)], || format!("matern2 {:?}", sizes(&mat)))?;
    let report = verify_report(&[&args("matern2")[..], &["--tol-coeff", "0.01"]].concat())?;
    check(statuses(&report).iter().all(|s| s == "pass"), || format!("matern2 {:?}", statuses(&report)))?;
    Ok("exponential (1,5) at (0,1); matern2 (1,2,3) at (0,2,3); both oracle-verified".into())
}

fn c10() -> Outcome {
    check(properties::CASES >= 200, || format!("{} cases", properties::CASES))?;
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let start = Instant::now();
    let mut failed = Vec::new();
    let mut count = 0;
    for (suite, tests) in properties::SUITES {
        for (name, f) in tests.iter() {
            count += 1;
            if panic::catch_unwind(*f).is_err() {
                failed.push(format!("{suite}/{name}"));
            }
        }
    }
    let elapsed = start.elapsed();
    panic::set_hook(hook);
    check(failed.is_empty(), || format!("failed: {}", failed.join(", ")))?;
    check(elapsed < Duration::from_secs(60), || format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "{} suites, {count} properties, {} cases each, seed {:#x}, {elapsed:.2?}",
        properties::SUITES.len(),
        properties::CASES,
        properties::SEED
    ))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("2x2 example", c1),
        ("5x5 example", c2),
        ("fractional scaling example", c3),
        ("3x3 truncation and GKF", c4),
        ("degenerate leading term", c5),
        ("equispaced gaussian sweep", c6),
        ("random planar gaussian", c7),
        ("non-unisolvent nodes", c8),
        ("finitely smooth kernels", c9),
        ("property suites", c10),
    ];
    let mut failures = Vec::new();
    std::io::stderr().write_all(b"\n").unwrap();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures.push(i + 1);
                ("FAIL", d)
            }
        };
        let line = format!("[{tag}] C{} {name}: {detail}\n", i + 1);
        std::io::stderr().write_all(line.as_bytes()).unwrap();
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
