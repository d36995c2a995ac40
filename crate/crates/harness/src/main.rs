//! `mcvd` command-line interface.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mcvd_core::particle::SimConfig;
use mcvd_core::threshold::threshold_schedule;
use mcvd_harness::config::{Power, Settings};
use mcvd_harness::validate::{halving_check, model_cross_check, particle_checks};
use mcvd_harness::{emit_report, run_sweep};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "mcvd",
    version,
    about = "Molecular communication via diffusion link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the hitting probabilities p_k.
    Channel {
        #[command(flatten)]
        common: Common,
        /// Number of slots to tabulate.
        #[arg(long, default_value_t = 100)]
        k_max: usize,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the detection threshold schedule.
    Threshold {
        #[command(flatten)]
        common: Common,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a BER sweep and write ber.csv and ber.svg.
    Ber {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Cross-check the channel model against the particle simulator.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Molecules released for the single-release checks.
        #[arg(long, default_value_t = 100_000)]
        molecules: usize,
        /// Repetitions of the message for the slot-mean check.
        #[arg(long, default_value_t = 200)]
        reps: usize,
        /// Output file for the check table (stdout only when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags mirroring the configuration keys. Lists are comma-separated.
#[derive(Args, Default)]
struct Common {
    /// Plain-text `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Receiver radius (µm, or with a um/mm/nm suffix).
    #[arg(long)]
    rr: Option<String>,
    /// Transmitter distance from the receiver centre.
    #[arg(long)]
    r0: Option<String>,
    /// Diffusion coefficient in µm²/s.
    #[arg(long)]
    diff_coef: Option<String>,
    /// Symbol duration (s, or with an ms/us suffix).
    #[arg(long)]
    ts: Option<String>,
    /// Counting-noise variance.
    #[arg(long)]
    sigma_c2: Option<String>,
    /// bcsk, bmosk, mtsk.
    #[arg(long)]
    scheme: Option<String>,
    /// Power adjustment on/off.
    #[arg(long)]
    pa: Option<String>,
    /// normalized or literal.
    #[arg(long)]
    pa_rule: Option<String>,
    /// PA residual memory K.
    #[arg(long)]
    k_mem: Option<String>,
    /// Average power per symbol.
    #[arg(long, conflicts_with = "m")]
    pbar: Option<String>,
    /// Molecules per emitted symbol.
    #[arg(long)]
    m: Option<String>,
    /// Probability of a 1 bit.
    #[arg(long)]
    p1: Option<String>,
    #[arg(long)]
    n_bits: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    max_trials: Option<String>,
    #[arg(long)]
    min_errors: Option<String>,
    /// DFF receiver memory S.
    #[arg(long)]
    s_mem: Option<String>,
    /// Thresholds computed exactly before the fitted curve.
    #[arg(long)]
    i_exact: Option<String>,
    /// per-index, constant-kappa[:N], binned[:W].
    #[arg(long)]
    strategy: Option<String>,
    /// schedule, dff, empirical.
    #[arg(long)]
    detector: Option<String>,
    /// gaussian or particle.
    #[arg(long)]
    physics: Option<String>,
    /// Particle-simulation step.
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    training_bits: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

impl Common {
    fn settings(&self) -> anyhow::Result<Settings> {
        let mut settings = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Settings::parse(&text)?
            }
            None => Settings::default(),
        };
        let flags = [
            ("rr", &self.rr),
            ("r0", &self.r0),
            ("diff-coef", &self.diff_coef),
            ("ts", &self.ts),
            ("sigma-c2", &self.sigma_c2),
            ("scheme", &self.scheme),
            ("pa", &self.pa),
            ("pa-rule", &self.pa_rule),
            ("k-mem", &self.k_mem),
            ("pbar", &self.pbar),
            ("m", &self.m),
            ("p1", &self.p1),
            ("n-bits", &self.n_bits),
            ("trials", &self.trials),
            ("max-trials", &self.max_trials),
            ("min-errors", &self.min_errors),
            ("s-mem", &self.s_mem),
            ("i-exact", &self.i_exact),
            ("strategy", &self.strategy),
            ("detector", &self.detector),
            ("physics", &self.physics),
            ("dt", &self.dt),
            ("training-bits", &self.training_bits),
            ("seed", &self.seed),
        ];
        let mut cli = Settings::default();
        for (key, value) in flags {
            if let Some(v) = value {
                cli.set(key, v)?;
            }
        }
        // A power given on the command line replaces the file's, whichever key it used.
        if cli.get("pbar").is_some() || cli.get("m").is_some() {
            settings.remove("pbar");
            settings.remove("m");
        }
        settings.merge(&cli);
        Ok(settings)
    }
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Channel { common, k_max, out } => {
            let cfg = common.settings()?.base()?;
            if k_max == 0 {
                bail!("k-max must be positive");
            }
            let profile = cfg.channel.hitting_probabilities(k_max);
            let mut w = output(out.as_ref())?;
            writeln!(w, "k,p_k")?;
            for (k, p) in profile.p().iter().enumerate() {
                writeln!(w, "{},{p}", k + 1)?;
            }
            w.flush()?;
        }
        Command::Threshold { common, out } => {
            let settings = common.settings()?;
            let cfg = settings.base()?;
            let m = match settings.get("m") {
                Some(m) => m.parse::<f64>().context("m")?,
                None => {
                    let pbar = match (settings.get("pbar"), cfg.power) {
                        (Some(p), _) => p.parse::<f64>().context("pbar")?,
                        (None, Power::Pbar(p)) => p,
                        (None, Power::M(m)) => cfg.scheme.average_power(m, cfg.prior),
                    };
                    cfg.scheme.nominal_m(pbar, cfg.prior)
                }
            };
            let profile = cfg
                .channel
                .hitting_probabilities(cfg.n_bits.max(cfg.i_exact));
            let schedule =
                threshold_schedule(&profile, m, cfg.prior, cfg.noise, cfg.i_exact, cfg.strategy)?;
            let mut w = output(out.as_ref())?;
            schedule.write_csv(&mut w, cfg.n_bits)?;
            w.flush()?;
        }
        Command::Ber { common, out } => {
            let configs = common.settings()?.expand()?;
            let results = run_sweep(&configs)?;
            for r in &results {
                eprintln!(
                    "{} pa={:?} S={:?} pbar={} M={:.3} ber={:.3e} ±{:.1e} ({} errors / {} bits)",
                    r.scheme,
                    r.pa,
                    r.s_mem,
                    r.pbar,
                    r.m,
                    r.ber,
                    r.ci_halfwidth,
                    r.n_errors,
                    r.n_bits_total
                );
            }
            let (csv, svg) = emit_report(&results, &out)?;
            println!("{}", csv.display());
            println!("{}", svg.display());
        }
        Command::Validate {
            common,
            molecules,
            reps,
            out,
        } => {
            let settings = common.settings()?;
            let cfg = settings.base()?;
            let ts = cfg.channel.symbol_duration();
            let dt = if settings.get("dt").is_some() {
                cfg.dt
            } else {
                1e-4f64.min(ts / 100.0)
            };
            let sim = SimConfig::new(dt, molecules, ts, cfg.seed)?;
            let m = match settings.get("m") {
                Some(m) => m.parse::<f64>().context("m")?,
                None => 10.0,
            };
            let mut checks = particle_checks(&cfg.channel, &sim);
            checks.push(halving_check(&cfg.channel, &sim));
            checks.push(model_cross_check(
                &cfg.channel,
                m,
                cfg.n_bits,
                reps,
                cfg.seed,
            )?);
            let mut table = String::from("check,value,target,tol,pass\n");
            for c in &checks {
                println!("{c}");
                table.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.name, c.value, c.target, c.tol, c.pass
                ));
            }
            if let Some(path) = out {
                fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?;
            }
            if checks.iter().any(|c| !c.pass) {
                bail!(
                    "{} of {} checks failed",
                    checks.iter().filter(|c| !c.pass).count(),
                    checks.len()
                );
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
