use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use eos_core::{Dd, LemmaId, Precision, Real, Xy};
use eos_lab::config::{self, ConfigError, Params};
use eos_lab::output::{write_all, Format, Table};
use eos_lab::{adapt, contrast, cx, grid, phases, residual, sweep, vector, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "eos-lab", version, about = "Edge-of-stability experiments on the quartic scalar model")]
#[command(arg_required_else_help = true, propagate_version = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Global {
    /// Step size.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Step budget (GD steps, or 2-step pairs for tracked runs).
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// `key = value` file; command-line values override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one parameter, `key=value`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// One labelled GD trajectory.
    Run {
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        y0: Option<f64>,
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// Final sharpness over a grid of initialisations (columns are `x₀y₀ - 1`).
    Grid {
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
    },
    /// Several step sizes from one initialisation, plus the fixed-region check.
    Adapt {
        /// Comma-separated step sizes.
        #[arg(long)]
        etas: Option<String>,
        /// Also run the desk-scale companion of the fixed-region check.
        #[arg(long)]
        empirical: bool,
    },
    /// Check suites: lemma residual bounds, remainder scaling, the c ≈ x
    /// identities, or tracked phase runs.
    Verify {
        #[arg(long, value_enum, default_value = "lemmas")]
        suite: Suite,
        /// Lemma name or `all`.
        #[arg(long)]
        lemma: Option<String>,
        /// Fixed κ; omitted, each lemma samples its own window.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Seeded batch of the rank-1 factorisation protocol.
    Vector {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Attractor of GD across step sizes or starting points.
    Sweep {
        #[arg(long)]
        param: Option<String>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Degree-4 against degree-2 conic fits.
    Contrast {
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        a0: Option<f64>,
        #[arg(long)]
        b0: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Lemmas,
    Scaling,
    Cx,
    Phases,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) => Failure::Runtime(e.into()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<eos_core::Error> for Failure {
    fn from(e: eos_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

/// What a command produced: its tables and whether its checks held.
struct Outcome {
    tables: Vec<Table>,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `eos-lab --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Run { .. } => "run",
        Cmd::Grid { .. } => "grid",
        Cmd::Adapt { .. } => "adapt",
        Cmd::Verify { .. } => "verify",
        Cmd::Vector { .. } => "vector",
        Cmd::Sweep { .. } => "sweep",
        Cmd::Contrast { .. } => "contrast",
    }
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    let g = &cli.global;
    let mut params = Params::new(match &g.config {
        Some(p) => config::load(p)?,
        None => Default::default(),
    });
    for kv in &g.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(Failure::Usage(format!("--set expects key=value, got {kv:?}")));
        };
        params.set(k.trim(), v.trim());
    }
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            params.set(k, v);
        }
    };
    flag("eta", g.eta.map(|v| v.to_string()));
    flag("steps", g.steps.map(|v| v.to_string()));
    flag("seed", g.seed.map(|v| v.to_string()));
    match &cli.cmd {
        Cmd::Run { x0, y0, record_every } => {
            flag("x0", x0.map(|v| v.to_string()));
            flag("y0", y0.map(|v| v.to_string()));
            flag("record_every", record_every.map(|v| v.to_string()));
        }
        Cmd::Grid { nx, ny } => {
            flag("nx", nx.map(|v| v.to_string()));
            flag("ny", ny.map(|v| v.to_string()));
        }
        Cmd::Adapt { etas, empirical } => {
            flag("etas", etas.clone());
            if *empirical {
                flag("empirical", Some("true".into()));
            }
        }
        Cmd::Verify { lemma, kappa, samples, .. } => {
            flag("lemma", lemma.clone());
            flag("kappa", kappa.map(|v| v.to_string()));
            flag("samples", samples.map(|v| v.to_string()));
        }
        Cmd::Vector { runs, dim } => {
            flag("runs", runs.map(|v| v.to_string()));
            flag("dim", dim.map(|v| v.to_string()));
        }
        Cmd::Sweep { param, from, to, n } => {
            flag("param", param.clone());
            flag("from", from.map(|v| v.to_string()));
            flag("to", to.map(|v| v.to_string()));
            flag("n", n.map(|v| v.to_string()));
        }
        Cmd::Contrast { pairs, a0, b0 } => {
            flag("pairs", pairs.map(|v| v.to_string()));
            flag("a0", a0.map(|v| v.to_string()));
            flag("b0", b0.map(|v| v.to_string()));
        }
    }

    // Checks that only mean anything in double-double default to it.
    let extended_default = matches!(&cli.cmd, Cmd::Verify { suite, .. } if matches!(suite, Suite::Lemmas | Suite::Cx));
    let precision = match g.precision {
        Some(PrecisionArg::Double) => Precision::Double,
        Some(PrecisionArg::Extended) => Precision::Extended,
        None if extended_default => Precision::Extended,
        None => Precision::Double,
    };
    let format: Format = g.format.parse().map_err(Failure::Usage)?;
    let seed: u64 = params.get("seed", 0)?;

    let out = match precision {
        Precision::Extended => dispatch::<Dd>(&cli.cmd, &mut params, seed)?,
        _ => dispatch::<f64>(&cli.cmd, &mut params, seed)?,
    };
    let echo = params.finish()?;
    let mut manifest = RunManifest::new(command_name(&cli.cmd), echo, seed, precision.as_str());
    let paths = write_all(&g.out, &mut manifest, &out.tables, format)
        .with_context(|| format!("writing to {}", g.out.display()))?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    println!("manifest {} ({})", manifest.id, if out.passed { "checks passed" } else { "CHECKS FAILED" });
    Ok(out.passed)
}

fn dispatch<T: Real>(cmd: &Cmd, p: &mut Params, seed: u64) -> Result<Outcome, Failure> {
    match cmd {
        Cmd::Run { .. } => cmd_run::<T>(p),
        Cmd::Grid { .. } => cmd_grid::<T>(p),
        Cmd::Adapt { .. } => cmd_adapt::<T>(p),
        Cmd::Verify { suite, .. } => match suite {
            Suite::Lemmas => cmd_lemmas::<T>(p, seed),
            Suite::Scaling => cmd_scaling::<T>(p),
            Suite::Cx => cmd_cx::<T>(p, seed),
            Suite::Phases => cmd_phases::<T>(p, seed),
        },
        Cmd::Vector { .. } => cmd_vector(p, seed),
        Cmd::Sweep { .. } => cmd_sweep::<T>(p),
        Cmd::Contrast { .. } => cmd_contrast::<T>(p),
    }
}

fn cmd_run<T: Real>(p: &mut Params) -> Result<Outcome, Failure> {
    let eta = p.get("eta", 0.2)?;
    let x0 = p.get("x0", 2.6)?;
    let y0 = p.get("y0", 1.001 / 2.6)?;
    let steps = p.get("steps", 50_000usize)?;
    let eps = p.get("eps", 1e-10)?;
    let every = p.get("record_every", 2usize)?;
    let delta = p.get("delta", eos_core::DEFAULT_DELTA)?;
    let (track, table) = phases::labelled_run::<T>(Xy::new(x0, y0), eta, steps, eps, every, delta);
    let seq: Vec<&str> = track.label_sequence.iter().map(|l| l.as_str()).collect();
    println!("labels: {}", seq.join(" > "));
    println!("final: {} after {} steps", track.final_label, 2 * track.pairs);
    Ok(Outcome {
        tables: vec![table],
        passed: true,
    })
}

fn cmd_grid<T: Real>(p: &mut Params) -> Result<Outcome, Failure> {
    let eta = p.get("eta", 0.2)?;
    let d = grid::GridSpec::figure(eta);
    let spec = grid::GridSpec {
        x_range: (p.get("x_min", d.x_range.0)?, p.get("x_max", d.x_range.1)?),
        y_range: (p.get("b_min", d.y_range.0)?, p.get("b_max", d.y_range.1)?),
        y_axis: grid::YAxis::Offset,
        nx: p.get("nx", d.nx)?,
        ny: p.get("ny", d.ny)?,
        eta,
        max_steps: p.get("steps", d.max_steps)?,
        eps_stop: p.get("eps", d.eps_stop)?,
        k: p.get("k", d.k)?,
    };
    let cells = grid::sharpness_concentration_grid::<T>(&spec).map_err(Failure::Usage)?;
    let s = grid::summarize(&cells);
    for (class, n) in &s.counts {
        println!("{:>13}: {n}", class.as_str());
    }
    println!(
        "theorem region: {}/{} tight; a0 > 0 and converged: {}/{} tight, {} stopped on an unstable minimum",
        s.theorem_region_tight, s.theorem_region, s.above_center_tight, s.above_center_converged, s.above_center_unstable
    );
    Ok(Outcome {
        tables: vec![grid::grid_table(&spec, &cells)],
        passed: s.passes(),
    })
}

fn cmd_adapt<T: Real>(p: &mut Params) -> Result<Outcome, Failure> {
    let etas = p.get_list("etas", adapt::FIGURE_ETAS.to_vec())?;
    if etas.is_empty() || etas.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
        return Err(Failure::Usage("etas must lie in (0, 1/2)".into()));
    }
    let init = adapt::figure_init();
    let init = Xy::new(p.get("x0", init.x)?, p.get("y0", init.y)?);
    let steps = p.get("steps", 200_000usize)?;
    let eps = p.get("eps", 1e-10)?;
    let every = p.get("record_every", 100usize)?;
    let k = p.get("k", eos_core::DEFAULT_K)?;
    let alpha = p.get("alpha", 0.9 * adapt::alpha_ceiling(k))?;
    let n_region = p.get("region_etas", 20usize)?;
    let runs = adapt::sharpness_adaptivity::<T>(&etas, init, steps, eps, every);
    for r in &runs {
        println!("eta {:.6}: sharpness {:.6} (2/eta = {:.6}) {}", r.eta, r.final_sharpness, 2.0 / r.eta, r.stop.as_str());
    }
    let region = adapt::region_inclusion(alpha, k, n_region)?;
    let contained = region.iter().filter(|r| r.contained).count();
    println!("fixed region contained for {contained}/{} step sizes", region.len());
    let mut passed = runs.iter().all(|r| r.in_window) && contained == region.len();
    let mut tables = vec![
        adapt::summary_table(&runs),
        adapt::trace_table(&runs),
        adapt::inclusion_table(&region),
    ];
    if p.get("empirical", false)? {
        let d = adapt::EmpiricalRegion::default();
        let e = adapt::EmpiricalRegion {
            alpha: p.get("empirical_alpha", d.alpha)?,
            k_eff: p.get("empirical_k", d.k_eff)?,
            n_eta: p.get("empirical_etas", d.n_eta)?,
            n_x: p.get("empirical_x0s", d.n_x)?,
            b0: p.get("empirical_b0", d.b0)?,
            max_steps: p.get("empirical_steps", d.max_steps)?,
            eps_stop: p.get("empirical_eps", d.eps_stop)?,
        };
        let cells = adapt::empirical_region(&e);
        let ok = cells.iter().filter(|c| c.in_window).count();
        println!("empirical region: {ok}/{} in window", cells.len());
        passed &= ok == cells.len();
        tables.push(adapt::empirical_table(&cells));
    }
    Ok(Outcome { tables, passed })
}

fn cmd_lemmas<T: Real>(p: &mut Params, seed: u64) -> Result<Outcome, Failure> {
    let name: String = p.get("lemma", "all".to_string())?;
    let lemmas = if name == "all" {
        LemmaId::ALL.to_vec()
    } else {
        match LemmaId::parse(&name) {
            Some(l) => vec![l],
            None => {
                let names: Vec<&str> = LemmaId::ALL.iter().map(|l| l.name()).collect();
                return Err(Failure::Usage(format!("unknown lemma {name:?}; one of all, {}", names.join(", "))));
            }
        }
    };
    let kappa = match p.get("kappa", String::from("window"))?.as_str() {
        "window" => residual::KappaChoice::Window,
        v => residual::KappaChoice::Fixed(
            v.parse()
                .ok()
                .filter(|k: &f64| *k > 0.0)
                .ok_or_else(|| Failure::Usage(format!("bad kappa {v:?}")))?,
        ),
    };
    let spec = residual::StudySpec {
        samples: p.get("samples", 10_000usize)?,
        kappa,
        k: p.get("k", eos_core::DEFAULT_K)?,
        delta: p.get("delta", eos_core::DEFAULT_DELTA)?,
        seed,
    };
    let (rows, summary) = residual::residual_study::<T>(&lemmas, &spec)?;
    for s in &summary {
        println!(
            "{:>10}: {}/{} satisfied, max ratio {:.3e}, kappa [{:.3e}, {:.3e}]{}",
            s.lemma.name(),
            s.satisfied,
            s.samples,
            s.max_ratio,
            s.kappa_range.0,
            s.kappa_range.1,
            if s.clamped { " (moved into the lemma's own window)" } else { "" }
        );
    }
    Ok(Outcome {
        passed: summary.iter().all(residual::LemmaSummary::all_satisfied),
        tables: vec![residual::samples_table(&rows), residual::summary_table(&summary)],
    })
}

fn cmd_scaling<T: Real>(p: &mut Params) -> Result<Outcome, Failure> {
    let range = (p.get("kappa_min", 0.01)?, p.get("kappa_max", 0.05)?);
    let n = p.get("points", 9usize)?;
    let tol = p.get("tolerance", 0.3)?;
    let fits = residual::scaling_fit::<T>(range, n)?;
    for f in &fits {
        println!("{:>3}: fitted order {:.3}, expected {} ({})", f.coordinate, f.fitted, f.expected, f.monomial);
    }
    Ok(Outcome {
        passed: fits.iter().all(|f| f.within(tol)),
        tables: vec![residual::scaling_table(&fits)],
    })
}

fn cmd_cx<T: Real>(p: &mut Params, seed: u64) -> Result<Outcome, Failure> {
    let n = p.get("samples", 10_000usize)?;
    let range = (p.get("kappa_min", cx::CX_KAPPA.0)?, p.get("kappa_max", cx::CX_KAPPA.1)?);
    let k = p.get("k", eos_core::DEFAULT_K)?;
    let rows = cx::cx_approx_check::<T>(n, range, k, seed);
    let pass = rows.iter().filter(|r| r.status == cx::CxStatus::Pass).count();
    let fail = rows.iter().filter(|r| r.status == cx::CxStatus::Fail).count();
    println!("{pass} pass, {fail} fail, {} skipped", rows.len() - pass - fail);
    Ok(Outcome {
        passed: fail == 0 && pass > 0,
        tables: vec![cx::cx_table(&rows)],
    })
}

fn cmd_phases<T: Real>(p: &mut Params, seed: u64) -> Result<Outcome, Failure> {
    let kappa = p.get("kappa", 0.03)?;
    let mut study = phases::PhaseStudy::desk(kappa, p.get("runs", 100usize)?, seed);
    study.params.k = p.get("k", study.params.k)?;
    study.params.enforce_kappa = p.get("enforce_kappa", study.params.enforce_kappa)?;
    study.params.eps = p.get("eps", study.params.eps)?;
    study.max_pairs = p.get("steps", study.max_pairs)?;
    let runs = phases::phase_study::<T>(&study);
    let ordered = runs.iter().filter(|r| r.ordered()).count();
    let clean = runs.iter().filter(|r| r.bounds.all_passed()).count();
    println!("{ordered}/{} runs in phase order; {clean} with every applicable bound met", runs.len());
    let mut names: Vec<&str> = runs.iter().flat_map(|r| r.bounds.failed().map(|c| c.name)).collect();
    names.sort_unstable();
    names.dedup();
    if !names.is_empty() {
        println!("failed bounds: {}", names.join(", "));
    }
    Ok(Outcome {
        passed: ordered == runs.len() && clean == runs.len() && runs.iter().all(|r| !r.band_violated),
        tables: vec![phases::runs_table(&study, &runs), phases::bounds_table(&runs)],
    })
}

fn cmd_vector(p: &mut Params, seed: u64) -> Result<Outcome, Failure> {
    let mut cfg = eos_core::VectorProtocolConfig::new(
        p.get("dim", 50usize)?,
        p.get("eta", 1e-3)?,
        p.get("k", eos_core::DEFAULT_K)?,
        p.get("t_p", 40_000usize)?,
        seed,
    )?;
    cfg.eps = p.get("eps", cfg.eps)?;
    cfg.delta_0 = p.get("delta_0", cfg.delta_0)?;
    cfg.max_steps = p.get("steps", cfg.max_steps)?;
    cfg.trace_every = p.get("trace_every", 0usize)?;
    let n = p.get("runs", 200usize)?;
    let min_rate = p.get("min_success_rate", 0.9)?;
    if !cfg.within_theorem_range() {
        eprintln!("note: step size is outside the theorem's hypothesis; checking its conclusion only");
    }
    let runs = vector::vector_batch(&cfg, seed, n);
    let s = vector::summarize(&runs);
    println!(
        "{}/{} runs reached the target inside the window; contraction violations {}/{}; perturbation rel. error <= {:.2e}",
        s.successes, s.runs, s.contraction_violations, s.contraction_checked, s.max_perturb_rel_err
    );
    let mut tables = vec![vector::runs_table(&runs)];
    if cfg.trace_every > 0 {
        tables.push(vector::trace_table(&runs));
    }
    Ok(Outcome {
        passed: s.runs > 0 && s.success_rate() >= min_rate && s.contraction_violations == 0 && s.max_perturb_rel_err < 1e-12,
        tables,
    })
}

fn cmd_sweep<T: Real>(p: &mut Params) -> Result<Outcome, Failure> {
    let param: sweep::SweepParam = p
        .get("param", "eta".to_string())?
        .parse()
        .map_err(Failure::Usage)?;
    let (from, to) = match param {
        sweep::SweepParam::Eta => (0.05, 0.45),
        sweep::SweepParam::X0 => (1.5, 4.0),
    };
    let init = adapt::figure_init();
    let spec = sweep::SweepSpec {
        param,
        range: (p.get("from", from)?, p.get("to", to)?),
        n: p.get("n", 200usize)?,
        eta: if param == sweep::SweepParam::X0 { p.get("eta", 0.2)? } else { 0.0 },
        init: if param == sweep::SweepParam::Eta {
            Xy::new(p.get("x0", init.x)?, p.get("y0", init.y)?)
        } else {
            init
        },
        b0: if param == sweep::SweepParam::X0 { p.get("b0", 1e-3)? } else { 0.0 },
        steps: p.get("steps", 20_000usize)?,
        transient: p.get("transient", 10_000usize)?,
    };
    let pts = sweep::bifurcation_sweep::<T>(&spec).map_err(Failure::Usage)?;
    let mut counts = std::collections::BTreeMap::new();
    for q in &pts {
        *counts.entry(q.attractor.label()).or_insert(0usize) += 1;
    }
    for (k, v) in counts {
        println!("{k:>12}: {v}");
    }
    Ok(Outcome {
        tables: vec![sweep::sweep_table(&spec, &pts)],
        passed: true,
    })
}

fn cmd_contrast<T: Real>(p: &mut Params) -> Result<Outcome, Failure> {
    let eta = p.get("eta", 0.01)?;
    let specs = match (p.get("a0", f64::NAN)?, p.get("b0", f64::NAN)?) {
        (a, b) if a.is_nan() && b.is_nan() => contrast::paired_specs(eta, p.get("pairs", 20usize)?),
        (a, b) if a.is_nan() || b.is_nan() => return Err(Failure::Usage("give both a0 and b0, or neither".into())),
        (a, b) => vec![contrast::ContrastSpec::new(eta, a, b)],
    };
    let specs: Vec<_> = {
        let steps = p.get("steps", 5_000_000usize)?;
        specs.into_iter().map(|s| contrast::ContrastSpec { max_steps: steps, ..s }).collect()
    };
    if specs.is_empty() {
        bail_usage("pairs must be >= 1")?;
    }
    let runs = contrast::paired_contrast::<T>(&specs)?;
    let ok = runs.iter().filter(|r| r.separates()).count();
    println!("{ok}/{} pairs: parabola fits degree 4 better, ellipse fits degree 2 better", runs.len());
    Ok(Outcome {
        passed: ok == runs.len(),
        tables: vec![contrast::fit_table(&runs), contrast::trace_table(&runs)],
    })
}

fn bail_usage(msg: &str) -> Result<(), Failure> {
    Err(Failure::Usage(msg.to_string()))
}

