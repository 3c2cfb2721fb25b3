use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use osa_cli::*;
use osa_core::dp::{
    deviation_audit, evaluate_policy, infinite_value_truncated, optimal_value, AuditBeliefs,
    AuditConfig, AuditHorizon, HorizonSpec,
};
use osa_core::sim::{simulate, SimConfig};
use osa_core::{Action, BeliefState, ChannelModel, OsaError, PolicyKind, PolicySpec};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "osa", version, about = "Myopic sensing in multichannel opportunistic access")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the sufficient conditions for one parameter set.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        /// Number of steps, or `inf`.
        #[arg(long, default_value = "inf")]
        horizon: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Value of a policy, or the exhaustive optimum.
    Value {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        #[arg(long, default_value = "10")]
        horizon: String,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        /// Initial beliefs `w1,w2,...`; defaults to the stationary belief.
        #[arg(long, value_delimiter = ',')]
        ordered_belief: Option<Vec<f64>>,
        /// `myopic`, `optimal`, `random` or `fixed:1,3`.
        #[arg(long, default_value = "myopic")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Reproduce the five-channel example where exploring beats myopic.
    Counterexample {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Search for a profitable one-step deviation from myopic.
    Audit {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        #[arg(long, default_value = "inf")]
        horizon: String,
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        /// Depth of the belief lattice.
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Audit this belief only instead of the lattice.
        #[arg(long, value_delimiter = ',')]
        ordered_belief: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Monte Carlo estimate of a policy's discounted or average reward.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        #[arg(long, default_value = "10")]
        horizon: String,
        #[arg(long, value_delimiter = ',')]
        ordered_belief: Option<Vec<f64>>,
        #[arg(long, default_value = "myopic")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
        /// Report the per-step average reward instead of the discounted sum.
        #[arg(long)]
        average: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate the condition over a (p01, p11) grid.
    Sweep {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, value_enum, default_value_t = SweepRegime::Both)]
        regime: SweepRegime,
        #[arg(long, default_value_t = 0.02)]
        grid_step: f64,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        #[arg(long, default_value = "inf")]
        horizon: String,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    p11: f64,
    #[arg(long)]
    p01: f64,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
}

impl ModelArgs {
    fn model(&self) -> Result<ChannelModel, OsaError> {
        ChannelModel::new(self.p11, self.p01)
    }

    fn belief(&self, given: &Option<Vec<f64>>) -> Result<BeliefState, OsaError> {
        match given {
            Some(w) => {
                let b = BeliefState::new(w.clone())?;
                if b.len() != self.n {
                    return Err(OsaError::LengthMismatch {
                        what: "belief",
                        expected: self.n,
                        got: b.len(),
                    });
                }
                Ok(b)
            }
            None => {
                let w = self.model()?.stationary().ok_or_else(|| {
                    OsaError::InvalidParameter(
                        "no stationary belief for this model; pass --ordered-belief".into(),
                    )
                })?;
                BeliefState::uniform(self.n, w)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
    Svg,
}

enum Steps {
    Finite(usize),
    Infinite,
}

fn parse_horizon(s: &str) -> Result<Steps, OsaError> {
    match s {
        "inf" | "infinite" => Ok(Steps::Infinite),
        _ => s
            .parse::<usize>()
            .ok()
            .filter(|&t| t >= 1)
            .map(Steps::Finite)
            .ok_or_else(|| {
                OsaError::InvalidParameter(format!(
                    "horizon must be a positive step count or `inf`, got `{s}`"
                ))
            }),
    }
}

fn parse_policy(s: &str, k: usize, m: usize, n: usize, seed: u64) -> Result<PolicySpec, OsaError> {
    let kind = match s {
        "myopic" => PolicyKind::Myopic,
        "optimal" => PolicyKind::ExhaustiveOptimal,
        "random" => PolicyKind::Random { seed },
        _ => match s.strip_prefix("fixed:") {
            Some(list) => {
                let chans = list
                    .split(',')
                    .map(|c| c.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| OsaError::InvalidParameter(format!("bad channel list: {e}")))?;
                PolicyKind::FixedFirstThenMyopic(Action::from_one_based(&chans, n)?)
            }
            None => {
                return Err(OsaError::InvalidParameter(format!(
                    "unknown policy `{s}`; use myopic, optimal, random or fixed:i,j"
                )))
            }
        },
    };
    PolicySpec::new(kind, k, m)
}

fn emit<T: Serialize>(format: Format, value: &T, text: impl FnOnce() -> String) -> CliResult<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Format::Text => print!("{}", text()),
        Format::Csv | Format::Svg => {
            return Err(OsaError::InvalidParameter(
                "csv and svg output are only available for `sweep`".into(),
            )
            .into())
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Check {
            model,
            beta,
            horizon,
            format,
        } => {
            let ch = model.model()?;
            let report = match parse_horizon(&horizon)? {
                Steps::Finite(_) => osa_core::conditions::finite_condition(
                    &ch, model.k, model.m, model.n, beta,
                )?,
                Steps::Infinite => {
                    osa_core::conditions::infinite_condition(&ch, model.k, model.m, model.n)?
                }
            };
            emit(format, &report, || {
                let mut s = format!(
                    "regime      {}\nR upper     {:.10}\nR lower     {:.10}\nlhs         {:.10}\nthreshold   {:.10}\nsatisfied   {}\n",
                    regime_name(report.regime),
                    report.r_upper,
                    report.r_lower,
                    report.lhs,
                    report.threshold,
                    report.satisfied
                );
                if report.unconditional {
                    s.push_str("k >= N - 1: myopic is optimal without conditions\n");
                }
                if let Some(t) = report.table_variant_satisfied {
                    s.push_str(&format!("table form  {t}\n"));
                }
                if let Some(d) = &report.diagnostic {
                    s.push_str(&format!("note        {d}\n"));
                }
                s.push_str(&format!("scope       {}\n", report.belief_domain_note));
                s
            })
        }
        Command::Value {
            model,
            beta,
            horizon,
            epsilon,
            ordered_belief,
            policy,
            seed,
            format,
        } => {
            let ch = model.model()?;
            let belief = model.belief(&ordered_belief)?;
            let spec = parse_policy(&policy, model.k, model.m, model.n, seed)?;
            let result = match parse_horizon(&horizon)? {
                Steps::Finite(t) => {
                    let h = HorizonSpec::finite(t, beta)?;
                    match spec.kind {
                        PolicyKind::ExhaustiveOptimal => {
                            optimal_value(&ch, &belief, model.k, model.m, &h)?
                        }
                        _ => evaluate_policy(&ch, &belief, &spec, &h)?,
                    }
                }
                Steps::Infinite => infinite_value_truncated(&ch, &belief, &spec, beta, epsilon)?,
            };
            emit(format, &result, || {
                let mut s = format!(
                    "value       {:.10}\nsteps       {}\n",
                    result.value, result.steps
                );
                if result.error_bound > 0.0 {
                    s.push_str(&format!("error bound {:.3e}\n", result.error_bound));
                }
                if !result.first_actions.is_empty() {
                    let a: Vec<String> =
                        result.first_actions.iter().map(|a| a.to_string()).collect();
                    s.push_str(&format!("best first  {}\n", a.join(" ")));
                }
                s
            })
        }
        Command::Counterexample { format } => {
            let report = run_counterexample()?;
            emit(format, &report, || report.render())
        }
        Command::Audit {
            model,
            beta,
            horizon,
            epsilon,
            depth,
            ordered_belief,
            format,
        } => {
            let ch = model.model()?;
            let horizon = match parse_horizon(&horizon)? {
                Steps::Finite(steps) => AuditHorizon::Finite { steps },
                Steps::Infinite => AuditHorizon::Infinite { epsilon },
            };
            let beliefs = match &ordered_belief {
                Some(_) => AuditBeliefs::Explicit(vec![model.belief(&ordered_belief)?]),
                None => AuditBeliefs::Lattice { depth },
            };
            let report = deviation_audit(
                &ch,
                &AuditConfig {
                    n: model.n,
                    k: model.k,
                    m: model.m,
                    beta,
                    horizon,
                    beliefs,
                },
            )?;
            emit(format, &report, || {
                let mut s = format!(
                    "profitable  {}\nbest gain   {:.3e}\nthreshold   {:.3e}\nbeliefs     {}\nsteps       {}\n",
                    report.profitable_found,
                    report.gain,
                    report.threshold,
                    report.beliefs_audited,
                    report.steps
                );
                if let (Some(b), Some(a)) = (&report.witness_belief, &report.witness_action) {
                    s.push_str(&format!("witness     {:?} sensing {a}\n", b.omegas()));
                }
                s
            })
        }
        Command::Simulate {
            model,
            beta,
            horizon,
            ordered_belief,
            policy,
            seed,
            replications,
            average,
            format,
        } => {
            let ch = model.model()?;
            let belief = model.belief(&ordered_belief)?;
            let spec = parse_policy(&policy, model.k, model.m, model.n, seed)?;
            let steps = match parse_horizon(&horizon)? {
                Steps::Finite(t) => t,
                Steps::Infinite => {
                    return Err(OsaError::InvalidParameter(
                        "simulation needs a finite horizon".into(),
                    )
                    .into())
                }
            };
            let config = if average {
                SimConfig::average(steps, replications, seed)
            } else {
                SimConfig::discounted(steps, beta, replications, seed)
            };
            let result = simulate(&ch, &belief, &spec, &config)?;
            emit(format, &result, || {
                format!(
                    "mean        {:.8}\nstd error   {:.3e}\n95% CI      [{:.8}, {:.8}]\n",
                    result.mean, result.std_error, result.ci95.0, result.ci95.1
                )
            })
        }
        Command::Sweep {
            k,
            m,
            n,
            regime,
            grid_step,
            beta,
            horizon,
            out,
            format,
        } => {
            let horizon = match parse_horizon(&horizon)? {
                Steps::Finite(_) => SweepHorizon::Finite { beta },
                Steps::Infinite => SweepHorizon::Infinite,
            };
            let config = SweepConfig {
                k,
                m,
                n,
                regime,
                grid_step,
                horizon,
            };
            let rows = region_sweep(&config)?;
            let body = match format {
                Format::Csv => sweep_csv_string(&rows),
                Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
                Format::Svg => sweep_svg(&config, &rows),
                Format::Text => {
                    let sat = rows.iter().filter(|r| r.satisfied).count();
                    format!("{sat} of {} cells satisfy the condition\n", rows.len())
                }
            };
            match out {
                Some(path) => write_file(&path, body.as_bytes()),
                None => {
                    print!("{body}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
