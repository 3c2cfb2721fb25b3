//! Region sweeps, report rendering and the fixed counterexample run behind
//! the `osa` binary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use osa_core::conditions::{finite_condition, infinite_condition, ConditionReport};
use osa_core::dp::{evaluate_policy, optimal_value, HorizonSpec};
use osa_core::{Action, BeliefState, ChannelModel, OsaError, PolicySpec, Regime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] OsaError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 invalid parameters, 3 scale guard, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(OsaError::ScaleGuard(_)) => 3,
            CliError::Core(_) | CliError::Json(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepRegime {
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepHorizon {
    Finite { beta: f64 },
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub regime: SweepRegime,
    pub grid_step: f64,
    pub horizon: SweepHorizon,
}

impl SweepConfig {
    pub fn new(k: usize, m: usize, n: usize, regime: SweepRegime, horizon: SweepHorizon) -> Self {
        Self {
            k,
            m,
            n,
            regime,
            grid_step: 0.02,
            horizon,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 0.25) {
            return Err(OsaError::InvalidParameter(format!(
                "grid step must lie in (0, 0.25], got {}",
                self.grid_step
            ))
            .into());
        }
        if let SweepHorizon::Finite { beta } = self.horizon {
            if !(0.0..=1.0).contains(&beta) {
                return Err(OsaError::InvalidParameter(format!(
                    "need 0 <= beta <= 1, got {beta}"
                ))
                .into());
            }
        }
        Ok(())
    }

    /// Grid coordinates `0, step, 2 step, ...` up to 1.
    pub fn axis(&self) -> Vec<f64> {
        let count = (1.0 / self.grid_step + 1e-9).floor() as usize;
        (0..=count)
            .map(|i| ((i as f64 * self.grid_step) * 1e12).round() / 1e12)
            .collect()
    }

    /// `(p01, p11)` cells in the regime's half of the unit square, `p01`
    /// outer, `p11` inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let axis = self.axis();
        let mut cells = Vec::new();
        for &p01 in &axis {
            for &p11 in &axis {
                let keep = match self.regime {
                    SweepRegime::Positive => p11 >= p01,
                    SweepRegime::Negative => p11 < p01,
                    SweepRegime::Both => true,
                };
                if keep {
                    cells.push((p01, p11));
                }
            }
        }
        cells
    }

    /// The condition report for one cell.
    pub fn condition(&self, p01: f64, p11: f64) -> CliResult<ConditionReport> {
        let model = ChannelModel::new(p11, p01)?;
        Ok(match self.horizon {
            SweepHorizon::Finite { beta } => {
                finite_condition(&model, self.k, self.m, self.n, beta)?
            }
            SweepHorizon::Infinite => infinite_condition(&model, self.k, self.m, self.n)?,
        })
    }
}

/// One sweep cell. Reals are stored at the 10 significant digits written
/// to CSV, so parsing a written table gives back the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p01: f64,
    pub p11: f64,
    pub r_upper: f64,
    pub r_lower: f64,
    pub lhs: f64,
    pub threshold: f64,
    pub satisfied: bool,
    pub unconditional: bool,
}

pub const CSV_HEADER: &str = "p01,p11,r_upper,r_lower,lhs,threshold,satisfied,unconditional";

/// Rounds to 10 significant digits.
pub fn sig10(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

pub fn region_sweep(config: &SweepConfig) -> CliResult<Vec<SweepRow>> {
    config.validate()?;
    config
        .cells()
        .par_iter()
        .map(|&(p01, p11)| {
            let r = config.condition(p01, p11)?;
            Ok(SweepRow {
                p01: sig10(p01),
                p11: sig10(p11),
                r_upper: sig10(r.r_upper),
                r_lower: sig10(r.r_lower),
                lhs: sig10(r.lhs),
                threshold: sig10(r.threshold),
                satisfied: r.satisfied,
                unconditional: r.unconditional,
            })
        })
        .collect()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<W: io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    if rows.is_empty() {
        buf.extend_from_slice(CSV_HEADER.as_bytes());
        buf.push(b'\n');
    } else {
        write_rows(rows, &mut buf).expect("writing to memory");
    }
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> CliResult<()> {
    write_file(path, sweep_csv_string(rows).as_bytes())
}

pub fn parse_sweep_csv<R: io::Read>(input: R) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn read_sweep_csv(path: &Path) -> CliResult<Vec<SweepRow>> {
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sweep_csv(file).map_err(csv_err(path))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 48.0;

/// Static scatter of the sweep over the unit square: `p01` across, `p11`
/// up, the diagonal `p11 = p01`, one marker class per verdict.
pub fn sweep_svg(config: &SweepConfig, rows: &[SweepRow]) -> String {
    let full = SVG_SIZE + 2.0 * SVG_MARGIN;
    let x = |p: f64| SVG_MARGIN + p * SVG_SIZE;
    let y = |p: f64| SVG_MARGIN + (1.0 - p) * SVG_SIZE;
    let r = (config.grid_step * SVG_SIZE * 0.35).clamp(1.0, 6.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    s.push_str(
        "<style>.axis{stroke:#000;stroke-width:1}.diag{stroke:#888;stroke-dasharray:4 3}\
         .satisfied{fill:#2a7}.unsatisfied{fill:#c33}text{font:12px sans-serif}</style>\n",
    );
    let title = match config.horizon {
        SweepHorizon::Finite { beta } => format!(
            "(k, m) = ({}, {}), N = {}, finite horizon, beta = {beta}",
            config.k, config.m, config.n
        ),
        SweepHorizon::Infinite => format!(
            "(k, m) = ({}, {}), N = {}, infinite horizon",
            config.k, config.m, config.n
        ),
    };
    let _ = writeln!(s, r#"<text x="{}" y="20">{title}</text>"#, SVG_MARGIN);
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        x(0.0),
        y(0.0),
        x(0.0),
        y(1.0)
    );
    let _ = writeln!(
        s,
        r#"<line class="diag" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{tick}</text>"#,
            x(tick),
            y(0.0) + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick}</text>"#,
            x(0.0) - 6.0,
            y(tick) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">p01</text>"#,
        x(0.5),
        full - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.2}" transform="rotate(-90 12 {:.2})" text-anchor="middle">p11</text>"#,
        y(0.5),
        y(0.5)
    );
    for row in rows {
        let class = if row.satisfied {
            "satisfied"
        } else {
            "unsatisfied"
        };
        let _ = writeln!(
            s,
            r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="{r:.2}"/>"#,
            x(row.p01),
            y(row.p11)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// The fixed five-channel example where exploring first beats myopic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub p11: f64,
    pub p01: f64,
    pub beta: f64,
    pub steps: usize,
    pub belief: BeliefState,
    pub myopic_value: f64,
    pub deviation_action: Action,
    pub deviation_value: f64,
    pub difference: f64,
    pub optimal_value: f64,
    pub optimal_first_actions: Vec<Action>,
    pub myopic_optimal: bool,
}

impl CounterexampleReport {
    pub fn verdict(&self) -> &'static str {
        if self.myopic_optimal {
            "myopic optimal"
        } else {
            "myopic NOT optimal"
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "N = 5, k = 2, m = 1, beta = {}, T = {}, p11 = {}, p01 = {}",
            self.beta, self.steps, self.p11, self.p01
        );
        let _ = writeln!(s, "belief          {:?}", self.belief.omegas());
        let _ = writeln!(s, "W{{1,2}} myopic   {:.8}", self.myopic_value);
        let _ = writeln!(
            s,
            "W{} first     {:.8}",
            self.deviation_action, self.deviation_value
        );
        let _ = writeln!(s, "difference      {:.8}", self.difference);
        let firsts: Vec<String> = self
            .optimal_first_actions
            .iter()
            .map(|a| a.to_string())
            .collect();
        let _ = writeln!(
            s,
            "optimum         {:.8} via {}",
            self.optimal_value,
            firsts.join(" ")
        );
        let _ = writeln!(s, "verdict         {}", self.verdict());
        s
    }
}

pub fn run_counterexample() -> CliResult<CounterexampleReport> {
    let (p11, p01, beta, steps) = (0.9, 0.1, 0.8, 5);
    let model = ChannelModel::new(p11, p01)?;
    let belief = BeliefState::new(vec![0.99, 0.95, 0.9, 0.9, 0.9])?;
    let horizon = HorizonSpec::finite(steps, beta)?;
    let myopic = evaluate_policy(&model, &belief, &PolicySpec::myopic(2, 1)?, &horizon)?.value;
    let action = Action::from_one_based(&[1, 3], 5)?;
    let deviate = evaluate_policy(
        &model,
        &belief,
        &PolicySpec::fixed_first(action.clone(), 1)?,
        &horizon,
    )?
    .value;
    let opt = optimal_value(&model, &belief, 2, 1, &horizon)?;
    let myopic_first = Action::from_one_based(&[1, 2], 5)?;
    Ok(CounterexampleReport {
        p11,
        p01,
        beta,
        steps,
        belief,
        myopic_value: myopic,
        deviation_action: action,
        deviation_value: deviate,
        difference: deviate - myopic,
        optimal_value: opt.value,
        myopic_optimal: opt.first_actions.contains(&myopic_first),
        optimal_first_actions: opt.first_actions,
    })
}

/// Regime label used in text reports.
pub fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::Positive => "positive (p11 >= p01)",
        Regime::Negative => "negative (p11 < p01)",
    }
}

/// Caps the rayon pool from `OSA_THREADS` when set to a positive integer.
pub fn configure_threads() {
    if let Some(n) = std::env::var("OSA_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
