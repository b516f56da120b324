//! End-to-end acceptance checks. Prints one `[PASS]`/`[FAIL]` line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use baoii::analytic::{
    assemble_cycle_time, delta_baoii, k_lambda_threshold, k_m_threshold, t_closed,
    tau_closed_forms,
};
use baoii::ctmc::{self, fixture};
use baoii::experiments::{
    cmd_simulate, cmd_sweep, cmd_validate, Figure, Scenario, SweepTable, TAU_GRID_D, TAU_GRID_M,
    TAU_GRID_P,
};
use baoii::optimizer::{crossover_rate, grid_optimal_p, log_space, P_GRID_STEP};
use baoii::simulator::{self, SimConfig, StopRule};
use baoii::state::{self, BitPattern};
use baoii::trace::{self, AoiiRule, Timeline};
use baoii::{CostModel, EntityId, InfoState, RateParams};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn state_space() -> Outcome {
    let start = Instant::now();
    let mut valid = Vec::new();
    let mut rejected = 0;
    for bits in BitPattern::all() {
        match (state::is_valid(bits), InfoState::from_bits(bits)) {
            (true, Ok(s)) => valid.push(s),
            (false, Err(_)) => rejected += 1,
            (v, r) => return Err(format!("{bits}: is_valid = {v} but from_bits = {r:?}")),
        }
    }
    let elapsed = start.elapsed();
    valid.sort_by_key(|s| s.index());
    ensure(valid == InfoState::ALL.to_vec(), format!("valid states {valid:?}"))?;
    ensure(rejected == 7, format!("{rejected} patterns rejected"))?;
    ensure(elapsed < Duration::from_millis(1), format!("took {elapsed:?}"))?;
    Ok(format!("9 valid, 7 rejected in {elapsed:?}"))
}

fn generator_fidelity() -> Outcome {
    use fixture::RateClass::*;
    let mut classes = BTreeMap::new();
    for (_, _, c) in fixture::EDGES {
        *classes.entry(c).or_insert(0) += 1;
    }
    let expected = BTreeMap::from([
        (Drift, 12),
        (MeasureOnly1, 3),
        (Transmit1, 6),
        (MeasureOnly2, 3),
        (Transmit2, 6),
    ]);
    ensure(classes == expected, format!("fixture rate classes {classes:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..20 {
        let params = RateParams::new(
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..0.99),
        )
        .map_err(|e| e.to_string())?;
        let built = ctmc::build_generator(&params).map_err(|e| e.to_string())?;
        let fixed = fixture::generator(&params);
        for from in InfoState::ALL {
            for to in InfoState::ALL {
                if built.rate(from, to) != fixed.rate(from, to) {
                    return Err(format!(
                        "set {i} {params:?}: q({from},{to}) = {} vs fixture {}",
                        built.rate(from, to),
                        fixed.rate(from, to)
                    ));
                }
            }
        }
        let edges = built.edges().len();
        ensure(edges == 30, format!("set {i}: {edges} edges"))?;
    }
    Ok("30 edges, rate classes 12/3/6/3/6, exact match on 20 random sets".into())
}

fn closed_forms() -> Outcome {
    let checks = [
        ("delta_baoii(1, 1)", delta_baoii(1.0, 1.0), 0.75),
        ("delta_baoii(1, 0.5)", delta_baoii(1.0, 0.5), 1.0),
        ("delta_baoii(2, 1)", delta_baoii(2.0, 1.0), 0.375),
        ("k_lambda threshold(1)", k_lambda_threshold(1.0), 0.25),
        ("k_m threshold(1, 2)", k_m_threshold(1.0, 2.0), 0.125),
        ("T(1, 1, 1)", t_closed(1.0, 1.0, 1.0), 1.5),
    ];
    for (name, got, want) in checks {
        let got = got.map_err(|e| format!("{name}: {e}"))?;
        ensure(close(got, want, 1e-12), format!("{name} = {got}, expected {want}"))?;
    }
    Ok("six values exact to 1e-12".into())
}

fn printed_appendix(out: &Path) -> Outcome {
    let s = Scenario::parse("cycles = 20000").map_err(|e| e.to_string())?;
    let v = cmd_validate(&s, out).map_err(|e| e.to_string())?;
    let table = std::fs::read_to_string(&v.discrepancy_path)
        .map_err(|e| format!("discrepancy table missing: {e}"))?;
    ensure(
        table.starts_with("d,m,p,quantity,printed,computed,rel_diff\n"),
        "discrepancy table header",
    )?;
    let mut worst: f64 = 0.0;
    for p in TAU_GRID_P {
        for d in TAU_GRID_D {
            for m in TAU_GRID_M {
                let params = RateParams::symmetric(d, m, p).map_err(|e| e.to_string())?;
                let tau = tau_closed_forms(&params).map_err(|e| e.to_string())?;
                let t = assemble_cycle_time(&params, &tau).map_err(|e| e.to_string())?;
                let want = 1.0 / m + 1.0 / (2.0 * p * m);
                worst = worst.max((t - want).abs() / want);
            }
        }
    }
    ensure(worst <= 1e-9, format!("cycle assembly off by {worst:e}"))?;
    let grid = TAU_GRID_P.len() * TAU_GRID_D.len() * TAU_GRID_M.len();
    ensure(
        !v.discrepancies.iter().any(|r| r.quantity == "T_assembled"),
        "assembly listed as a discrepancy",
    )?;
    Ok(format!(
        "assembly within {worst:.1e} on {grid} points; {} printed-system deviations tabulated in {}",
        v.discrepancies.len(),
        v.discrepancy_path.display()
    ))
}

fn policy_threshold() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut boundary = 0;
    for m in [0.5, 1.0, 2.0, 5.0, 10.0] {
        let threshold = 1.0 / (4.0 * m * m);
        for kl in log_space(1e-4, 10.0, 30) {
            let costs = CostModel::new(5e-4, kl).map_err(|e| e.to_string())?;
            let best = grid_optimal_p(m, &costs, P_GRID_STEP).map_err(|e| e.to_string())?;
            let p_exact = (1.0 / (2.0 * m * kl.sqrt())).min(1.0);
            cases += 1;
            if 1.0 - p_exact <= P_GRID_STEP && kl > threshold {
                boundary += 1;
                continue;
            }
            let is_one = best.argmin == 1.0;
            ensure(
                is_one == (kl <= threshold),
                format!("m = {m}, k_lambda = {kl:e}: grid argmin p = {}", best.argmin),
            )?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;
    Ok(format!("{cases} cases ({boundary} within one grid step of the boundary) in {elapsed:?}"))
}

fn column(t: &SweepTable, name: &str) -> Result<usize, String> {
    t.column(name).ok_or_else(|| format!("no column {name}"))
}

fn crossover(out: &Path) -> Outcome {
    let rate = crossover_rate(1e-3).map_err(|e| e.to_string())?;
    ensure(close(rate, 15.81, 0.005), format!("crossover {rate}"))?;
    ensure(20.0 / rate <= 1.3, format!("20 Hz / {rate} exceeds 1.3"))?;

    let s = Scenario::parse("k_m = 5e-4\nk_lambda = 1e-3").map_err(|e| e.to_string())?;
    let sweep = cmd_sweep(&s, Figure::Fig5, None, out).map_err(|e| e.to_string())?;
    let t = &sweep.table;
    let (cm, cp, cb) = (column(t, "m")?, column(t, "p")?, column(t, "is_best_p")?);
    let best = |m: f64| {
        t.rows
            .iter()
            .find(|r| r[cm] == m && r[cb] == 1.0)
            .map(|r| r[cp])
            .ok_or_else(|| format!("no best p at m = {m}"))
    };
    let (b10, b20) = (best(10.0)?, best(20.0)?);
    ensure(b10 == 1.0, format!("best p at 10 Hz is {b10}"))?;
    ensure(b20 != 1.0, "p = 1 still optimal at 20 Hz")?;
    Ok(format!(
        "crossover {rate:.2} Hz (20/{rate:.2} = {:.3}); best p {b10} at 10 Hz, {b20} at 20 Hz",
        20.0 / rate
    ))
}

fn simulation_vs_numeric() -> Outcome {
    let start = Instant::now();
    let params = RateParams::symmetric(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let config = SimConfig::new(params, 11, StopRule::Cycles(100_000));
    let report = simulator::run(&config).map_err(|e| e.to_string())?;
    ensure(report.cycles_completed >= 100_000, "too few cycles")?;
    let e = &report.error_period;
    ensure(
        e.within(1.5, 3.0),
        format!("error period {} +/- {} vs 1.5", e.mean, e.std_err),
    )?;
    let gen = ctmc::build_generator(&params).map_err(|e| e.to_string())?;
    let pi = ctmc::stationary(&gen).map_err(|e| e.to_string())?;
    for s in InfoState::ALL {
        let occ = report.occupancy_of(s);
        let target = pi.get(s);
        ensure(
            (occ.value - target).abs() <= 3.0 * occ.std_err + 1e-12,
            format!("occupancy {s}: {} +/- {} vs {target}", occ.value, occ.std_err),
        )?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!(
        "T = {:.4} +/- {:.4} over {} cycles, occupancy within 3 sigma, {elapsed:?}",
        e.mean, e.std_err, report.cycles_completed
    ))
}

fn drift_dependence(out: &Path) -> Outcome {
    let s = Scenario::parse("d = 2\nm = 1\np = 1\ncycles = 100000").map_err(|e| e.to_string())?;
    let v = cmd_validate(&s, out).map_err(|e| e.to_string())?;
    let row = v
        .report
        .find("error_period", "T")
        .ok_or("no error_period/T row")?;
    let (analytic, numeric) = (row.analytic.ok_or("no analytic")?, row.numeric.ok_or("no numeric")?);
    let (sim, se) = (row.simulated.ok_or("no simulated")?, row.sim_std_err.ok_or("no std err")?);
    ensure(close(analytic, 1.5, 1e-12), format!("analytic {analytic}"))?;
    ensure(close(numeric, 2.0, 1e-9), format!("numeric {numeric}"))?;
    ensure((sim - numeric).abs() <= 3.0 * se, format!("simulated {sim} +/- {se}"))?;
    let (dn, da) = (
        row.sim_minus_numeric().ok_or("no sim - numeric")?,
        row.sim_minus_analytic().ok_or("no sim - analytic")?,
    );
    let csv = std::fs::read_to_string(&v.report_path).map_err(|e| e.to_string())?;
    let line = csv
        .lines()
        .find(|l| l.starts_with("error_period,T,"))
        .ok_or("row missing from validation.csv")?;
    ensure(
        line.contains(&dn.to_string()) && line.contains(&da.to_string()),
        "deltas missing from validation.csv",
    )?;
    Ok(format!(
        "analytic 1.5, numeric {numeric}, simulated {sim:.4} +/- {se:.4}; sim - numeric {dn:+.4}, sim - analytic {da:+.4} ({})",
        row.status
    ))
}

fn fig3_trace() -> Outcome {
    let r = trace::evaluate(&Timeline::fig3(), EntityId::One, &AoiiRule::OwnMeasurementResets);
    let seq: Vec<&str> = r.segments.iter().map(|s| s.state.name()).collect();
    ensure(
        seq == ["O", "A", "O", "B", "E", "Gamma", "Phi"],
        format!("state sequence {seq:?}"),
    )?;
    let resets = r.baoii.resets();
    ensure(resets == [(3.0, 1.5), (8.0, 4.0)], format!("resets {resets:?}"))?;
    Ok("O,A,O,B,E,Gamma,Phi; BAoII resets (3, 1.5) and (8, 4)".into())
}

fn fig4_data(out: &Path) -> Outcome {
    let sweep = cmd_sweep(&Scenario::default(), Figure::Fig4, None, out).map_err(|e| e.to_string())?;
    let mut reader = csv::Reader::from_path(&sweep.path).map_err(|e| e.to_string())?;
    let mut cells: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| e.to_string());
        let (m, p, v) = (num(0)?, num(1)?, num(2)?);
        let want = (2.0 * p + 1.0) / (4.0 * p * m);
        ensure(close(v, want, 1e-12), format!("m = {m}, p = {p}: {v} vs {want}"))?;
        cells.entry(p.to_bits()).or_default().push((m, v));
    }
    let ps: Vec<f64> = cells.keys().map(|&b| f64::from_bits(b)).collect();
    ensure(ps == [0.1, 0.4, 0.7, 1.0], format!("p values {ps:?}"))?;
    let series: Vec<&Vec<(f64, f64)>> = cells.values().collect();
    for s in &series {
        ensure(s.len() == 100, format!("{} points per series", s.len()))?;
        ensure(
            close(s[0].0, 0.1, 1e-15) && close(s[99].0, 10.0, 1e-12),
            format!("m range [{}, {}]", s[0].0, s[99].0),
        )?;
        ensure(s.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1), "not decreasing in m")?;
    }
    for i in 0..100 {
        ensure(
            series.windows(2).all(|w| w[1][i].1 < w[0][i].1),
            format!("not decreasing in p at m = {}", series[0][i].0),
        )?;
    }
    Ok(format!("400 cells match to 1e-12, strictly decreasing in m and p ({})", sweep.path.display()))
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    names.sort();
    for n in &names {
        let x = std::fs::read(a.join(n)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(n)).map_err(|e| format!("{}: {e}", n.to_string_lossy()))?;
        ensure(x == y, format!("{} differs", n.to_string_lossy()))?;
    }
    let other = std::fs::read_dir(b).map_err(|e| e.to_string())?.count();
    ensure(other == names.len(), "different file sets")?;
    Ok(names.len())
}

fn determinism(out: &Path) -> Outcome {
    let scenario = out.join("scenario.txt");
    std::fs::write(&scenario, "d = 1\nm = 1\np = 0.5\nseed = 42\ncycles = 20000\nevents = true\n")
        .map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_baoii");
    for run in ["cli_a", "cli_b"] {
        let status = Command::new(bin)
            .arg("--out")
            .arg(out.join(run))
            .arg("simulate")
            .arg("--config")
            .arg(&scenario)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(
            status.status.success(),
            format!("{run}: {}", String::from_utf8_lossy(&status.stderr)),
        )?;
    }
    let cli = same_files(&out.join("cli_a"), &out.join("cli_b"))?;

    let s = Scenario::load(Some(&scenario), &[]).map_err(|e| e.to_string())?;
    for run in ["lib_a", "lib_b"] {
        cmd_simulate(&s, &out.join(run)).map_err(|e| e.to_string())?;
    }
    let lib = same_files(&out.join("lib_a"), &out.join("lib_b"))?;
    same_files(&out.join("cli_a"), &out.join("lib_a"))?;
    Ok(format!("{cli} files identical across binary runs, {lib} across library runs"))
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = dir.path();
    let criteria: Vec<(&str, Check)> = vec![
        ("state space enumeration", Box::new(state_space)),
        ("generator matches transcribed diagram", Box::new(generator_fidelity)),
        ("closed-form values", Box::new(closed_forms)),
        ("printed reset-time appendix", Box::new(|| printed_appendix(&out.join("appendix")))),
        ("optimal p threshold", Box::new(policy_threshold)),
        ("transmit-every-measurement crossover", Box::new(|| crossover(&out.join("fig5")))),
        ("simulation against numeric engine", Box::new(simulation_vs_numeric)),
        ("error period grows with drift", Box::new(|| drift_dependence(&out.join("drift")))),
        ("example timeline trace", Box::new(fig3_trace)),
        ("BAoII sweep data", Box::new(|| fig4_data(&out.join("fig4")))),
        ("deterministic simulation output", Box::new(|| determinism(out))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
