//! Plot-ready parameter sweeps.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use super::{csv_string, fmt_f64, input, numeric, write_atomic, ExperimentError, Scenario};
use crate::analytic::{self, AnalyticError};
use crate::ctmc;
use crate::optimizer::{self, log_space};
use crate::params::{CostModel, RateParams};
use crate::state::InfoState;

pub const FIG4_P: [f64; 4] = [0.1, 0.4, 0.7, 1.0];
pub const FIG5_P: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 1.0];
pub const FIG6_M: [f64; 5] = [1.0, 10.0, 20.0, 50.0, 100.0];
pub const FIG7_P: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 1.0];
pub const FIG8_ETA: [f64; 5] = [0.5, 1.0, 2.0, 10.0, 100.0];
pub const DEFAULT_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Mean BAoII against `m` for four values of `p`.
    Fig4,
    /// Total cost against `m = 1..100` for five values of `p`.
    Fig5,
    /// `p*` against `k_m` with `k_lambda = 2 k_m`.
    Fig6,
    /// `m*` against `k_m` with `k_lambda = 2 k_m`.
    Fig7,
    /// Largest measurement cost keeping `p = 1` optimal, against `m`.
    Fig8,
    /// The scenario's own axis and quantity.
    Custom,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
        Figure::Fig8,
        Figure::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Custom => "custom",
        }
    }

    pub fn file_name(self) -> String {
        format!("sweep_{}.csv", self.name())
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s.trim())
            .ok_or_else(|| input(format!("unknown figure {s:?}; expected fig4..fig8 or custom")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        csv_string(
            &header,
            self.rows.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()),
        )
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub path: PathBuf,
    pub table: SweepTable,
}

fn table(header: &[&str], rows: Vec<Vec<f64>>) -> SweepTable {
    SweepTable {
        header: header.iter().map(|s| s.to_string()).collect(),
        rows,
    }
}

/// Divergence becomes `inf`; anything else is a numeric failure.
fn value(r: Result<f64, AnalyticError>) -> Result<f64, ExperimentError> {
    match r {
        Ok(v) => Ok(v),
        Err(e) if e.is_divergence() => Ok(f64::INFINITY),
        Err(e) => Err(numeric(e)),
    }
}

fn ratio_costs(k_m: f64) -> Result<CostModel, ExperimentError> {
    CostModel::with_ratio(k_m, 2.0).map_err(input)
}

/// Evaluate every cell of `grid` in parallel, keeping grid order.
fn par_rows<T: Sync, R: Send>(
    grid: &[T],
    f: impl Fn(&T) -> Result<R, ExperimentError> + Sync + Send,
) -> Result<Vec<R>, ExperimentError> {
    grid.par_iter().map(f).collect()
}

fn cross<A: Copy, B: Copy>(outer: &[A], inner: &[B]) -> Vec<(A, B)> {
    outer
        .iter()
        .flat_map(|&a| inner.iter().map(move |&b| (a, b)))
        .collect()
}

/// Names accepted by the custom sweep's `quantity` key.
pub fn quantity_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "delta_baoii",
        "t_closed",
        "t_printed_system",
        "t_numeric",
        "mean_cycle",
        "cost_k",
        "cost_c",
        "p_star",
        "m_star",
        "k_lambda_threshold",
        "k_m_threshold",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(InfoState::ALL.iter().map(|s| format!("pi_{}", s.name())));
    names
}

fn quantity(name: &str, params: &RateParams, costs: &CostModel) -> Result<f64, ExperimentError> {
    let m = params.m1;
    let p = params.p;
    let ctmc_value = |f: fn(&ctmc::ErrorPeriod) -> f64| {
        ctmc::expected_error_period(params, crate::state::EntityId::One)
            .map(|ep| f(&ep))
            .map_err(numeric)
    };
    match name {
        "delta_baoii" => value(analytic::delta_baoii(m, p)),
        "t_closed" => value(analytic::t_closed(params.m1, params.m2, p)),
        "t_printed_system" => value(
            analytic::solve_printed_tau_system(params)
                .and_then(|tau| analytic::assemble_cycle_time(params, &tau)),
        ),
        "t_numeric" => ctmc_value(|ep| ep.mean),
        "mean_cycle" => ctmc_value(|ep| ep.mean_cycle),
        "cost_k" => value(analytic::cost_k(m, p, costs)),
        "cost_c" => value(analytic::total_cost(m, p, costs)),
        "p_star" => optimizer::optimal_p(m, costs)
            .map(|r| r.argmin)
            .map_err(numeric),
        "m_star" => match optimizer::optimal_m(p, costs) {
            Ok(r) => Ok(r.argmin),
            Err(optimizer::OptimizerError::Unbounded) => Ok(f64::INFINITY),
            Err(e) => Err(numeric(e)),
        },
        "k_lambda_threshold" => value(analytic::k_lambda_threshold(m)),
        "k_m_threshold" => {
            let eta = costs.eta.unwrap_or(costs.k_lambda / costs.k_m);
            value(analytic::k_m_threshold(m, eta))
        }
        other => {
            let state = other
                .strip_prefix("pi_")
                .and_then(|s| s.parse::<InfoState>().ok())
                .ok_or_else(|| {
                    input(format!(
                        "unknown quantity {other:?}; expected one of {}",
                        quantity_names().join(", ")
                    ))
                })?;
            let gen = ctmc::build_generator(params).map_err(numeric)?;
            Ok(ctmc::stationary(&gen).map_err(numeric)?.get(state))
        }
    }
}

fn custom(scenario: &Scenario) -> Result<SweepTable, ExperimentError> {
    let axis = scenario
        .axis
        .as_ref()
        .ok_or_else(|| input("custom sweep needs `sweep`, `from` and `to` in the scenario"))?;
    let name = scenario
        .quantity
        .clone()
        .ok_or_else(|| input("custom sweep needs `quantity` in the scenario"))?;
    if !quantity_names().contains(&name) {
        return Err(input(format!(
            "unknown quantity {name:?}; expected one of {}",
            quantity_names().join(", ")
        )));
    }
    let xs = axis.values();
    let rows = par_rows(&xs, |&x| {
        let mut s = scenario.clone();
        match axis.name.as_str() {
            "d" => s.d = x,
            "m" => {
                s.m1 = x;
                s.m2 = x;
            }
            "m1" => s.m1 = x,
            "m2" => s.m2 = x,
            "p" => s.p = x,
            "k_m" => s.k_m = x,
            "k_lambda" => {
                s.k_lambda = Some(x);
                s.eta = None;
            }
            "eta" => {
                s.eta = Some(x);
                s.k_lambda = None;
            }
            other => return Err(input(format!("unknown sweep axis {other:?}"))),
        }
        let params = s.params()?;
        let costs = s.costs()?;
        Ok(vec![x, quantity(&name, &params, &costs)?])
    })?;
    Ok(table(&[axis.name.as_str(), name.as_str()], rows))
}

/// Rows of `figure` for `scenario`; `points` overrides the default grid
/// resolution along the swept axis.
pub fn sweep_rows(
    scenario: &Scenario,
    figure: Figure,
    points: Option<usize>,
) -> Result<SweepTable, ExperimentError> {
    let n = points.unwrap_or(DEFAULT_POINTS);
    if n < 2 {
        return Err(input("a sweep needs at least 2 points"));
    }
    match figure {
        Figure::Fig4 => {
            let grid = cross(&FIG4_P, &log_space(0.1, 10.0, n));
            let rows = par_rows(&grid, |&(p, m)| Ok(vec![m, p, value(analytic::delta_baoii(m, p))?]))?;
            Ok(table(&["m", "p", "delta_baoii"], rows))
        }
        Figure::Fig5 => {
            let costs = scenario.costs()?;
            let ms: Vec<f64> = (1..=n)
                .map(|i| 1.0 + 99.0 * (i - 1) as f64 / (n - 1) as f64)
                .collect();
            let rows: Vec<Vec<Vec<f64>>> = par_rows(&ms, |&m| {
                let cs: Vec<f64> = FIG5_P
                    .iter()
                    .map(|&p| value(analytic::total_cost(m, p, &costs)))
                    .collect::<Result<_, _>>()?;
                let best = cs
                    .iter()
                    .enumerate()
                    .fold(0, |b, (i, &c)| if c < cs[b] { i } else { b });
                let p_star = optimizer::optimal_p(m, &costs).map_err(numeric)?.argmin;
                FIG5_P
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        Ok(vec![
                            m,
                            p,
                            costs.k_m,
                            costs.k_lambda,
                            value(analytic::cost_k(m, p, &costs))?,
                            cs[i],
                            f64::from(u8::from(i == best)),
                            p_star,
                        ])
                    })
                    .collect::<Result<Vec<_>, ExperimentError>>()
            })?;
            Ok(table(
                &["m", "p", "k_m", "k_lambda", "K", "C", "is_best_p", "p_star"],
                rows.into_iter().flatten().collect(),
            ))
        }
        Figure::Fig6 => {
            let grid = cross(&FIG6_M, &log_space(1e-6, 1.0, n));
            let rows = par_rows(&grid, |&(m, k_m)| {
                let costs = ratio_costs(k_m)?;
                let r = optimizer::optimal_p(m, &costs).map_err(numeric)?;
                Ok(vec![k_m, costs.k_lambda, m, r.argmin, r.objective])
            })?;
            Ok(table(&["k_m", "k_lambda", "m", "p_star", "C_star"], rows))
        }
        Figure::Fig7 => {
            let grid = cross(&FIG7_P, &log_space(1e-6, 1.0, n));
            let rows = par_rows(&grid, |&(p, k_m)| {
                let costs = ratio_costs(k_m)?;
                let r = optimizer::optimal_m(p, &costs).map_err(numeric)?;
                Ok(vec![k_m, costs.k_lambda, p, r.argmin, r.objective])
            })?;
            Ok(table(&["k_m", "k_lambda", "p", "m_star", "C_star"], rows))
        }
        Figure::Fig8 => {
            let grid = cross(&FIG8_ETA, &log_space(0.01, 100.0, n));
            let rows = par_rows(&grid, |&(eta, m)| {
                Ok(vec![m, eta, value(analytic::k_m_threshold(m, eta))?])
            })?;
            Ok(table(&["m", "eta", "k_m_max"], rows))
        }
        Figure::Custom => custom(scenario),
    }
}

/// Compute a sweep and write it to `out_dir/sweep_<figure>.csv`.
pub fn cmd_sweep(
    scenario: &Scenario,
    figure: Figure,
    points: Option<usize>,
    out_dir: &Path,
) -> Result<SweepOutput, ExperimentError> {
    let table = sweep_rows(scenario, figure, points)?;
    let path = write_atomic(out_dir, &figure.file_name(), &table.to_csv())?;
    Ok(SweepOutput { path, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_rows(f: Figure) -> SweepTable {
        sweep_rows(&Scenario::default(), f, None).unwrap()
    }

    #[test]
    fn fig4_matches_formula_and_decreases() {
        let t = default_rows(Figure::Fig4);
        assert_eq!(t.rows.len(), 400);
        for r in &t.rows {
            assert!((r[2] - (2.0 * r[1] + 1.0) / (4.0 * r[1] * r[0])).abs() < 1e-12);
        }
        for block in t.rows.chunks(100) {
            assert!(block.windows(2).all(|w| w[1][2] < w[0][2]));
        }
        let at = |p: f64, i: usize| t.rows.iter().filter(|r| r[1] == p).nth(i).unwrap()[2];
        for i in 0..100 {
            assert!(FIG4_P.windows(2).all(|w| at(w[1], i) < at(w[0], i)));
        }
    }

    #[test]
    fn fig5_best_p_switches_between_10_and_20_hz() {
        let t = default_rows(Figure::Fig5);
        let best = |m: f64| {
            t.rows
                .iter()
                .find(|r| r[0] == m && r[6] == 1.0)
                .map(|r| r[1])
                .unwrap()
        };
        assert_eq!(best(10.0), 1.0);
        assert_eq!(best(20.0), 0.75);
        assert!(t.rows.iter().all(|r| r[2] == 5e-4 && r[3] == 1e-3));
    }

    #[test]
    fn optimum_sweeps_use_doubled_transmission_cost() {
        for f in [Figure::Fig6, Figure::Fig7] {
            let t = default_rows(f);
            assert!(t.rows.iter().all(|r| (r[1] - 2.0 * r[0]).abs() < 1e-18));
        }
        let t = default_rows(Figure::Fig8);
        assert!(t.rows.iter().all(|r| (r[2] - 1.0 / (4.0 * r[1] * r[0] * r[0])).abs() <= 1e-12 * r[2]));
    }

    #[test]
    fn custom_sweep_and_errors() {
        let s = Scenario::parse("sweep = p\nfrom = 0\nto = 1\npoints = 3\nquantity = delta_baoii").unwrap();
        let t = sweep_rows(&s, Figure::Custom, None).unwrap();
        assert_eq!(t.header, vec!["p", "delta_baoii"]);
        assert_eq!(t.rows[0][1], f64::INFINITY);
        assert_eq!(t.rows[2][1], 0.75);
        assert!(t.to_csv().contains("0,inf\n"));

        let s = Scenario::parse("sweep = d\nfrom = 0.5\nto = 2\npoints = 2\nquantity = t_numeric").unwrap();
        let t = sweep_rows(&s, Figure::Custom, None).unwrap();
        assert!((t.rows[1][1] - 2.0).abs() < 1e-12);

        let s = Scenario::parse("sweep = m\nfrom = 1\nto = 2\nquantity = pi_E").unwrap();
        assert!(sweep_rows(&s, Figure::Custom, None).is_ok());

        let bad = Scenario::parse("sweep = m\nfrom = 1\nto = 2\nquantity = nope").unwrap();
        assert_eq!(sweep_rows(&bad, Figure::Custom, None).unwrap_err().exit_code(), 2);
        assert!(sweep_rows(&Scenario::default(), Figure::Custom, None).is_err());
        assert!("fig9".parse::<Figure>().is_err());
    }

    #[test]
    fn sweep_file_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_sweep(&Scenario::default(), Figure::Fig4, Some(10), dir.path()).unwrap();
        let text = std::fs::read_to_string(&out.path).unwrap();
        assert!(text.starts_with("m,p,delta_baoii\n"));
        assert_eq!(text.lines().count(), 41);
    }
}
