//! Subcommands. Each one is a pure function of the config and its input files to its
//! output files and exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use loopsplit_core::connection_maps::{
    dress_pair, dress_plus, integrate_potential, merge, split, tau_merge, FrameField, IntegrateOptions, NodeReport,
    PolynomialPotential,
};
use loopsplit_core::factorization::{birkhoff_left_auto, birkhoff_left, birkhoff_right, birkhoff_right_auto, tau_iwasawa, BirkhoffResult};
use loopsplit_core::spaceforms::{example_sphere_frame, extract_immersion, nonflat_to_flat, torus_flat_frame, TorusParams};
use loopsplit_core::symmetries::{Reality, SymmetrySpec};
use loopsplit_core::{LaurentLoop, C64};
use serde::de::DeserializeOwned;

use crate::config::{parse_config, Convention, RunConfig};
use crate::emit::{emit_diagnostics, emit_mesh, immersion_csv, reports_csv, write_file, Header};
use crate::error::{exit, CliError, CliResult};
use crate::harness::{determinism, render_csv, run_criterion, run_numeric, Settings};
use crate::lambda::parse_lambda;

#[derive(Debug, Parser)]
#[command(name = "loopsplit", version, about = "Loop-group factorizations, DPW-style frame pipelines and space-form immersions")]
pub struct Cli {
    /// JSON run configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Multiplies every numerical tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub tol_scale: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FactorKind {
    /// `g = g_- g_+`
    Left,
    /// `g = g_+ g_-`
    Right,
    /// `g = z y_+` with `τz = z`
    Iwasawa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    /// The deforming family of round spheres in S³.
    S3Spheres,
    /// Its flat partner surface in H³.
    H3Flat,
    /// A flat torus-type frame on the configured target.
    FlatTorus,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Birkhoff or τ-Iwasawa factorization of a single loop.
    Factorize {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "left")]
        kind: FactorKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `F = G_- G_+ = F_+ F_-` at every node.
    Split {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        g_minus: Option<PathBuf>,
        #[arg(long)]
        f_plus: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Recombines `(G_-, F_+)` into a frame.
    Merge {
        #[arg(long)]
        g_minus: Option<PathBuf>,
        #[arg(long)]
        f_plus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// The τ-fixed frame paired with a based plus frame.
    IwasawaMerge {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Dressing by `g_-` alone or by the pair `(g_-, g_+)`.
    Dress {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        g_minus: Option<PathBuf>,
        #[arg(long)]
        g_plus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Integrates a polynomial potential from the base node.
    Integrate {
        #[arg(long)]
        potential: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Evaluates a frame at λ and writes the immersion.
    Immerse {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Built-in frames with closed forms.
    Example {
        #[arg(long, value_enum)]
        name: ExampleName,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long)]
        diag: Option<PathBuf>,
    },
    /// Runs the acceptance suite and prints a pass/fail table.
    Verify {
        /// CSV with one row per metric.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only these criteria (1-9); skips the repeat-run comparison.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

struct Ctx<'a> {
    cfg: RunConfig,
    seed: u64,
    tol_scale: f64,
    stdout: &'a mut (dyn Write + Send),
}

impl Ctx<'_> {
    fn header(&self, command: &str) -> Header {
        Header { command: command.into(), seed: self.seed, tolerances: self.cfg.tolerances.describe() }
    }

    fn say(&mut self, line: impl AsRef<str>) {
        // Printing is best effort; a closed pipe must not change the exit code.
        let _ = writeln!(self.stdout, "{}", line.as_ref());
    }
}

fn required(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Validation(format!("missing {what}: pass a flag or set it in the config")))
}

fn pick(flag: &Option<PathBuf>, fallback: &Option<PathBuf>) -> Option<PathBuf> {
    flag.clone().or_else(|| fallback.clone())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Parse {
        path: format!("{}: {}", path.display(), e.path()),
        message: e.into_inner().to_string(),
    })
}

fn read_frame(path: &Path) -> CliResult<FrameField> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    FrameField::from_json(&text).map_err(|e| CliError::Parse { path: path.display().to_string(), message: e.to_string() })
}

fn write_frame(path: &Path, f: &FrameField) -> CliResult<()> {
    write_file(path, f.to_json().as_bytes())
}

fn masked(reports: &[NodeReport]) -> usize {
    reports.iter().filter(|r| r.masked).count()
}

fn write_reports(ctx: &Ctx, command: &str, path: Option<PathBuf>, f: &FrameField, reports: &[NodeReport], extra: &[String]) -> CliResult<()> {
    if let Some(p) = path {
        emit_diagnostics(&reports_csv(&f.grid, reports, &ctx.header(command), extra), &p)?;
    }
    Ok(())
}

fn birkhoff_json(r: &BirkhoffResult, kind: &str) -> serde_json::Value {
    serde_json::json!({
        "kind": kind,
        "minus": r.minus,
        "plus": r.plus,
        "residual": r.residual,
        "condition": r.condition,
        "window": r.window,
    })
}

fn factorize(ctx: &mut Ctx, input: &Option<PathBuf>, kind: FactorKind, out: &Option<PathBuf>) -> CliResult<usize> {
    let g: LaurentLoop = read_json(&required(input, &ctx.cfg.inputs.loop_, "input loop")?)?;
    let tol = ctx.cfg.tolerances.factorization;
    let value = match kind {
        FactorKind::Left => {
            let r = match ctx.cfg.window {
                Some(n) => birkhoff_left(&g, n, tol)?,
                None => birkhoff_left_auto(&g, tol)?,
            };
            birkhoff_json(&r, "left")
        }
        FactorKind::Right => {
            let r = match ctx.cfg.window {
                Some(n) => birkhoff_right(&g, n, tol)?,
                None => birkhoff_right_auto(&g, tol)?,
            };
            birkhoff_json(&r, "right")
        }
        FactorKind::Iwasawa => {
            let r = tau_iwasawa(&g, &ctx.cfg.symmetry, &ctx.cfg.iwasawa())?;
            serde_json::json!({
                "kind": "iwasawa",
                "z": r.z,
                "y_plus": r.y,
                "k": LaurentLoop::constant(r.k_const.clone()),
                "reconstruction": r.reconstruction,
                "tau_fixedness": r.tau_fixedness,
                "condition": r.condition,
                "window": r.window,
            })
        }
    };
    let text = serde_json::to_string_pretty(&value).expect("factor records serialize");
    match pick(out, &ctx.cfg.outputs.factors) {
        Some(p) => write_file(&p, text.as_bytes())?,
        None => ctx.say(text),
    }
    Ok(0)
}

fn order_text(o: Option<loopsplit_core::connection_maps::ConnectionOrder>) -> String {
    match o {
        Some(o) if o.zero => "zero".into(),
        Some(o) => format!("({}, {})", o.lo, o.hi),
        None => "unmeasured".into(),
    }
}

fn immerse_and_emit(ctx: &mut Ctx, command: &str, f: &FrameField, lambda: C64, mesh: Option<PathBuf>, diag: Option<PathBuf>) -> CliResult<usize> {
    let target = f.group.unwrap_or_else(|| ctx.cfg.group());
    let im = extract_immersion(f, lambda, &target)?;
    let header = ctx.header(command);
    let mut partial = im.masked_count();
    if let Some(p) = mesh {
        let vertices = emit_mesh(&im, &header, &p)?;
        if vertices == 0 {
            ctx.say("warning: every node is masked; the mesh holds only its header");
            partial = partial.max(1);
        }
    }
    if let Some(p) = diag {
        emit_diagnostics(&immersion_csv(&im, &header), &p)?;
    }
    let k: Vec<f64> = im.diagnostics.iter().filter_map(|d| d.gauss_curvature).collect();
    if !k.is_empty() {
        let lo = k.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ctx.say(format!("gauss curvature in [{lo:.6e}, {hi:.6e}] over {} nodes", k.len()));
    }
    ctx.say(format!("quadric defect {:.3e}, masked nodes {}", im.max_quadric(), im.masked_count()));
    Ok(partial)
}

fn example(ctx: &mut Ctx, name: ExampleName, lambda: &Option<String>, out: &Option<PathBuf>, mesh: &Option<PathBuf>, diag: &Option<PathBuf>) -> CliResult<usize> {
    let grid = ctx.cfg.grid.clone();
    let (frame, default_lambda) = match name {
        ExampleName::S3Spheres => (example_sphere_frame(&grid), C64::from_polar(1.0, 0.3)),
        ExampleName::H3Flat => {
            let s = SymmetrySpec::new(2, 1, Reality::Rm1);
            let out = nonflat_to_flat(&example_sphere_frame(&grid), &s, &ctx.cfg.pipeline())?;
            (out.frame, C64::new(0.0, 2.0))
        }
        ExampleName::FlatTorus => {
            let reality = match ctx.cfg.convention {
                Convention::A1 => Reality::R1,
                Convention::A2 => Reality::R2,
            };
            let params = TorusParams { rotation: 0.4, normal: 0.6, p: vec![1.0, 0.2], q: vec![-0.1, 0.8] };
            let f = torus_flat_frame(&grid, &ctx.cfg.group(), reality, &params)?;
            (f, reality.locus_point().expect("flat realities have a locus"))
        }
    };
    if let Some(p) = pick(out, &ctx.cfg.outputs.frame) {
        write_frame(&p, &frame)?;
    }
    let mesh = pick(mesh, &ctx.cfg.outputs.mesh);
    let diag = pick(diag, &ctx.cfg.outputs.diagnostics);
    let masked = frame.masked_count();
    if mesh.is_some() || diag.is_some() || lambda.is_some() {
        let l = match lambda {
            Some(t) => parse_lambda(t)?,
            None => default_lambda,
        };
        return Ok(masked.max(immerse_and_emit(ctx, "example", &frame, l, mesh, diag)?));
    }
    Ok(masked)
}

fn verify(ctx: &mut Ctx, out: &Option<PathBuf>, only: &[u32]) -> CliResult<i32> {
    let s = Settings { seed: ctx.seed, tol_scale: ctx.tol_scale };
    let mut results = if only.is_empty() {
        run_numeric(s)
    } else {
        let mut v = Vec::new();
        for &id in only {
            v.push(run_criterion(id, s).ok_or_else(|| CliError::Validation(format!("--only: no criterion {id} (use 1-9)")))?);
        }
        v
    };
    if only.is_empty() {
        let d = determinism(s, &results);
        results.push(d);
    }
    for r in &results {
        ctx.say(r.line());
    }
    let passed = results.iter().filter(|r| r.passed()).count();
    ctx.say(format!("{passed}/{} criteria passed (seed {})", results.len(), s.seed));
    if let Some(p) = pick(out, &ctx.cfg.outputs.diagnostics) {
        write_file(&p, render_csv(&results, s).as_bytes())?;
    }
    Ok(if passed == results.len() { exit::SUCCESS } else { exit::NUMERICAL })
}

fn dispatch(ctx: &mut Ctx, command: &Command) -> CliResult<i32> {
    let cfg = ctx.cfg.clone();
    let masked_nodes = match command {
        Command::Factorize { input, kind, out } => factorize(ctx, input, *kind, out)?,
        Command::Split { input, g_minus, f_plus, diag } => {
            let f = read_frame(&required(input, &cfg.inputs.frame, "input frame")?)?;
            let s = split(&f, &cfg.pipeline());
            if let Some(p) = pick(g_minus, &cfg.outputs.g_minus) {
                write_frame(&p, &s.g_minus)?;
            }
            if let Some(p) = pick(f_plus, &cfg.outputs.f_plus) {
                write_frame(&p, &s.f_plus)?;
            }
            let extra = [format!("order_minus={}", order_text(s.order_minus)), format!("order_plus={}", order_text(s.order_plus))];
            write_reports(ctx, "split", pick(diag, &cfg.outputs.diagnostics), &f, &s.reports, &extra)?;
            ctx.say(format!("G_- order {}, F_+ order {}", extra[0], extra[1]));
            masked(&s.reports)
        }
        Command::Merge { g_minus, f_plus, out, diag } => {
            let gm = read_frame(&required(g_minus, &cfg.inputs.g_minus, "G_- frame")?)?;
            let fp = read_frame(&required(f_plus, &cfg.inputs.f_plus, "F_+ frame")?)?;
            let m = merge(&gm, &fp, &cfg.pipeline())?;
            if let Some(p) = pick(out, &cfg.outputs.frame) {
                write_frame(&p, &m.frame)?;
            }
            let extra = [format!("order={}", order_text(m.order))];
            write_reports(ctx, "merge", pick(diag, &cfg.outputs.diagnostics), &m.frame, &m.reports, &extra)?;
            ctx.say(format!("merged frame {}", extra[0]));
            masked(&m.reports)
        }
        Command::IwasawaMerge { input, out, diag } => {
            let fp = read_frame(&required(input, &cfg.inputs.f_plus, "F_+ frame")?)?;
            let m = tau_merge(&fp, &cfg.symmetry, &cfg.tau_merge());
            if let Some(p) = pick(out, &cfg.outputs.frame) {
                write_frame(&p, &m.frame)?;
            }
            let extra = [format!("order={}", order_text(m.order)), format!("tau_residual={:e}", m.tau_residual)];
            write_reports(ctx, "iwasawa-merge", pick(diag, &cfg.outputs.diagnostics), &m.frame, &m.reports, &extra)?;
            ctx.say(format!("tau-merged frame {}, {}", extra[0], extra[1]));
            masked(&m.reports)
        }
        Command::Dress { input, g_minus, g_plus, out, diag } => {
            let f = read_frame(&required(input, &cfg.inputs.frame, "input frame")?)?;
            let gm: LaurentLoop = read_json(&required(g_minus, &cfg.inputs.g_minus, "g_- loop")?)?;
            let (frame, reports) = match pick(g_plus, &cfg.inputs.g_plus) {
                Some(p) => {
                    let gp: LaurentLoop = read_json(&p)?;
                    let o = dress_pair(&gm, &gp, &f, &cfg.pipeline())?;
                    (o.frame, o.reports)
                }
                None => dress_plus(&gm, &f, &cfg.pipeline()),
            };
            if let Some(p) = pick(out, &cfg.outputs.frame) {
                write_frame(&p, &frame)?;
            }
            write_reports(ctx, "dress", pick(diag, &cfg.outputs.diagnostics), &frame, &reports, &[])?;
            masked(&reports)
        }
        Command::Integrate { potential, out, diag } => {
            let pot: PolynomialPotential = read_json(&required(potential, &cfg.inputs.potential, "potential")?)?;
            let opts = IntegrateOptions {
                window: cfg.integration_window,
                tol_mc: Some(cfg.tolerances.mc),
                group: Some(cfg.group()).filter(|g| g.dim() == pot.n),
                ..Default::default()
            };
            let r = integrate_potential(&pot, &cfg.grid, &opts)?;
            if let Some(p) = pick(out, &cfg.outputs.frame) {
                write_frame(&p, &r.frame)?;
            }
            let reports: Vec<NodeReport> =
                r.frame.values.iter().map(|v| if v.is_some() { NodeReport::ok(0.0, 1.0) } else { NodeReport { masked: true, ..NodeReport::ok(0.0, 1.0) } }).collect();
            let extra = [format!("holonomy={:e}", r.holonomy), format!("mc_residual={:e}", r.mc.max)];
            write_reports(ctx, "integrate", pick(diag, &cfg.outputs.diagnostics), &r.frame, &reports, &extra)?;
            ctx.say(format!("integrated {} nodes, {}", r.frame.grid.len(), extra[1]));
            r.frame.masked_count()
        }
        Command::Immerse { input, lambda, mesh, diag } => {
            let f = read_frame(&required(input, &cfg.inputs.frame, "input frame")?)?;
            let l = match lambda {
                Some(t) => parse_lambda(t)?,
                None => *cfg.parsed_lambdas()?.first().ok_or_else(|| CliError::Validation("no lambda: pass --lambda or set lambdas".into()))?,
            };
            immerse_and_emit(ctx, "immerse", &f, l, pick(mesh, &cfg.outputs.mesh), pick(diag, &cfg.outputs.diagnostics))?
        }
        Command::Example { name, lambda, out, mesh, diag } => example(ctx, *name, lambda, out, mesh, diag)?,
        Command::Verify { out, only } => return verify(ctx, out, only),
    };
    Ok(if masked_nodes > 0 { exit::PARTIAL } else { exit::SUCCESS })
}

fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> CliResult<i32> {
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(CliError::Validation("--tol-scale must be positive".into()));
    }
    if cli.threads == Some(0) {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    cfg.tolerances = cfg.tolerances.scaled(cli.tol_scale);
    let seed = cli.seed.unwrap_or(cfg.seed);
    let mut ctx = Ctx { cfg, seed, tol_scale: cli.tol_scale, stdout };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&mut ctx, &cli.command))
}

/// Parses `args` (including the program name) and runs the command, returning the exit
/// code. Errors go to stderr.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::SUCCESS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
