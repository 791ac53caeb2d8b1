use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use spt_core::assembler::{compare, extrapolate_zero_range, load_references, Tolerance};
use spt_core::interaction::{compute_scattering_length, tune_unitarity};
use spt_core::pauli::partition_function;
use spt_core::{Cache, Error, Pipeline, SweepRow, SweepTable, SystemSpec};

use crate::config::{ConfigError, Format, ModelSpec, RunConfig};
use crate::{CacheAction, Command, Window};

pub const EXIT_OUTSIDE_TOLERANCE: u8 = 1;
pub const EXIT_CONFIG: u8 = 3;
const EXIT_INPUT: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;
const EXIT_ORACLE: u8 = 6;
const EXIT_IO: u8 = 7;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(Error),
    Io(PathBuf, io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Core(e) => e.fmt(f),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(Error::Csv(e))
    }
}

fn innermost(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } => innermost(source),
        e => e,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(..) => EXIT_IO,
            CliError::Core(e) => match innermost(e) {
                Error::InvalidInput(_) | Error::DimensionMismatch(_) => EXIT_INPUT,
                Error::OracleMismatch { .. } => EXIT_ORACLE,
                Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::EmptyOverlap => EXIT_IO,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(path.to_path_buf(), e))
}

struct Ctx {
    cfg: RunConfig,
    pipeline: Pipeline,
    out: Box<dyn Write>,
}

impl Ctx {
    fn scale(&self, e: f64) -> f64 {
        e * self.cfg.energy_scale()
    }

    fn unit(&self) -> &'static str {
        self.cfg.energy_unit()
    }

    fn json(&mut self, value: &impl Serialize) -> Result<()> {
        serde_json::to_writer_pretty(&mut self.out, value)?;
        writeln!(self.out)?;
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(&mut self.out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn spec(&self) -> Result<SystemSpec> {
        let model = self.cfg.model()?.build()?;
        Ok(self.cfg.single_spec(&model)?)
    }
}

/// `13.0` rather than `13` or `13.000000000000002`.
fn num(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

pub fn dispatch(command: Command, cfg: RunConfig) -> Result<u8> {
    // Open every output before any work starts.
    let out: Box<dyn Write> = match &cfg.output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let plot = match &command {
        Command::Sweep { plot_data, .. } | Command::Extrapolate { plot_data, .. } => {
            plot_data.as_deref().map(create).transpose()?
        }
        _ => None,
    };
    let mut pipeline = Pipeline::new().with_oracle_check(cfg.oracle_check);
    if let Some(dir) = &cfg.cache_dir {
        pipeline = pipeline.with_cache(Cache::open(dir)?);
    }
    let mut ctx = Ctx { cfg, pipeline, out };
    let code = match command {
        Command::Tune => tune(&mut ctx)?,
        Command::Minimize => minimize(&mut ctx)?,
        Command::Modes => modes(&mut ctx)?,
        Command::Energy => energy(&mut ctx)?,
        Command::Sweep { compare, .. } => sweep(&mut ctx, compare.as_deref(), plot)?,
        Command::Spectrum { window } => spectrum(&mut ctx, window)?,
        Command::Partition { beta, window } => partition(&mut ctx, &beta, window)?,
        Command::Extrapolate { ranges, .. } => extrapolate(&mut ctx, &ranges, plot)?,
        Command::Compare {
            references,
            table,
            abs_tol,
            rel_tol,
        } => compare_cmd(
            &mut ctx,
            &references,
            table.as_deref(),
            Tolerance {
                absolute: abs_tol,
                relative: rel_tol,
            },
        )?,
        Command::Cache { action } => cache(&mut ctx, action)?,
    };
    ctx.out.flush()?;
    Ok(code)
}

fn tune(ctx: &mut Ctx) -> Result<u8> {
    let model = ctx.cfg.model()?;
    let Some(r) = model.range() else {
        return Err(ConfigError(
            "tune requires a square-well model (--model unitary --r R)".into(),
        )
        .into());
    };
    let t = tune_unitarity(r).map_err(|e| e.in_stage("tune"))?;
    let check = compute_scattering_length(t.v_depth, r).map_err(|e| e.in_stage("tune"))?;
    #[derive(Serialize)]
    struct Row {
        range: f64,
        v_depth: f64,
        depth_parameter: f64,
        inverse_scattering_length: f64,
        numerical_inverse_scattering_length: f64,
        iterations: usize,
    }
    let row = Row {
        range: r,
        v_depth: t.v_depth,
        depth_parameter: t.depth_parameter,
        inverse_scattering_length: t.inverse_scattering_length,
        numerical_inverse_scattering_length: check.numerical_inverse_scattering_length,
        iterations: t.iterations,
    };
    match ctx.cfg.format {
        Format::Json => ctx.json(&row)?,
        Format::Csv => ctx.csv(&[row])?,
        Format::Text => {
            let o = &mut ctx.out;
            writeln!(o, "range R            {}", num(row.range))?;
            writeln!(o, "well depth V0      {:.12} ħω_ho", row.v_depth)?;
            writeln!(o, "depth parameter b  {:.12}", row.depth_parameter)?;
            writeln!(
                o,
                "1/a_s (closed)     {:.3e} 1/a_ho",
                row.inverse_scattering_length
            )?;
            writeln!(
                o,
                "1/a_s (integrated) {:.3e} 1/a_ho",
                row.numerical_inverse_scattering_length
            )?;
            writeln!(o, "bisection steps    {}", row.iterations)?;
        }
    }
    Ok(0)
}

fn minimize(ctx: &mut Ctx) -> Result<u8> {
    let spec = ctx.spec()?;
    let (blocks, _) = ctx.pipeline.building_blocks(&spec)?;
    let m = &blocks.minimum;
    let frame = spec.frame()?;
    match ctx.cfg.format {
        Format::Json => ctx.json(m)?,
        Format::Csv => {
            #[derive(Serialize)]
            struct Row {
                n: usize,
                r_infinity: f64,
                gamma_infinity: f64,
                e_infinity: f64,
                pair_weight: f64,
                gradient_norm: f64,
                iterations: usize,
            }
            ctx.csv(&[Row {
                n: m.n,
                r_infinity: m.r_infinity,
                gamma_infinity: m.gamma_infinity,
                e_infinity: m.e_infinity,
                pair_weight: m.pair_weight,
                gradient_norm: m.gradient_norm,
                iterations: m.iterations,
            }])?
        }
        Format::Text => {
            let o = &mut ctx.out;
            writeln!(o, "N = {} ({} up, {} down)", m.n, spec.n_up, spec.n_down)?;
            writeln!(
                o,
                "r_inf          {:.12} (scaled), {:.12} a_ho",
                m.r_infinity,
                frame.unscale_length(m.r_infinity)
            )?;
            writeln!(o, "gamma_inf      {:.12}", m.gamma_infinity)?;
            writeln!(o, "E_inf          {:.12} (scaled)", m.e_infinity)?;
            writeln!(o, "pair weight    {}", num(m.pair_weight))?;
            writeln!(o, "gradient norm  {:.3e}", m.gradient_norm)?;
            writeln!(o, "iterations     {}", m.iterations)?;
        }
    }
    Ok(0)
}

fn modes(ctx: &mut Ctx) -> Result<u8> {
    let spec = ctx.spec()?;
    let (blocks, _) = ctx.pipeline.building_blocks(&spec)?;
    let frame = spec.frame()?;
    let s = &blocks.spectrum;
    #[derive(Serialize)]
    struct Row {
        mode: String,
        multiplicity: usize,
        lambda: f64,
        omega_scaled: f64,
        quantum: f64,
        radial_weight: f64,
        v0: f64,
    }
    let rows: Vec<Row> = s
        .roots
        .iter()
        .map(|r| Row {
            mode: r.mode.label().to_string(),
            multiplicity: r.multiplicity,
            lambda: r.lambda,
            omega_scaled: r.omega,
            quantum: ctx.scale(frame.unscale_energy(frame.delta * r.omega)),
            radial_weight: r.radial_weight,
            v0: s.v0,
        })
        .collect();
    match ctx.cfg.format {
        Format::Json => {
            let v = json!({ "n": s.n, "v0": s.v0, "energy_unit": ctx.unit(), "modes": rows });
            ctx.json(&v)?
        }
        Format::Csv => ctx.csv(&rows)?,
        Format::Text => {
            let unit = ctx.unit();
            let o = &mut ctx.out;
            writeln!(o, "N = {}", s.n)?;
            writeln!(
                o,
                "{:<5} {:>12} {:>18} {:>18} {:>10}",
                "mode",
                "multiplicity",
                "omega (scaled)",
                format!("quantum ({unit})"),
                "radial"
            )?;
            for r in &rows {
                writeln!(
                    o,
                    "{:<5} {:>12} {:>18.12} {:>18.12} {:>10.6}",
                    r.mode, r.multiplicity, r.omega_scaled, r.quantum, r.radial_weight
                )?;
            }
            writeln!(o, "v0 = {:.12}", s.v0)?;
        }
    }
    Ok(0)
}

fn energy(ctx: &mut Ctx) -> Result<u8> {
    let spec = ctx.spec()?;
    let r = ctx.pipeline.run(&spec)?;
    let e = ctx.scale(r.energy.total_unscaled);
    match ctx.cfg.format {
        Format::Json => {
            let v = json!({ "energy": e, "energy_unit": ctx.unit(), "result": r });
            ctx.json(&v)?
        }
        Format::Csv => {
            let mut row = SweepRow::from_result(&r);
            row.energy = Some(e);
            ctx.csv(&[row])?
        }
        Format::Text => {
            let unit = ctx.unit();
            let o = &mut ctx.out;
            writeln!(
                o,
                "N = {} ({} up, {} down)",
                spec.n_particles(),
                spec.n_up,
                spec.n_down
            )?;
            writeln!(o, "E = {} {unit}", num(e))?;
            writeln!(
                o,
                "  E_inf (scaled)      {:.12}",
                r.energy.e_infinity_scaled
            )?;
            writeln!(
                o,
                "  harmonic (scaled)   {:.12}",
                r.energy.harmonic_term_scaled
            )?;
            writeln!(o, "  occupancy           {}", r.occupancy)?;
            writeln!(o, "  oscillator filling  {}", r.configuration.summary())?;
            if r.pauli_promotion > 0 {
                writeln!(
                    o,
                    "  filling promoted by {} shell unit(s): minimal fillings have odd angular sum",
                    r.pauli_promotion
                )?;
            }
        }
    }
    Ok(0)
}

fn sweep_specs(ctx: &Ctx) -> Result<(SystemSpec, Vec<usize>)> {
    let model = ctx.cfg.model()?.build()?;
    let specs = ctx.cfg.specs(&model)?;
    let ns = specs.iter().map(SystemSpec::n_particles).collect();
    Ok((specs[0].clone(), ns))
}

fn scaled_table(ctx: &Ctx, table: &SweepTable) -> SweepTable {
    if ctx.cfg.hw.is_none() {
        return table.clone();
    }
    let rows = table
        .rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.energy = r.energy.map(|e| ctx.scale(e));
            r
        })
        .collect();
    SweepTable::new(rows)
}

fn write_table(ctx: &mut Ctx, table: &SweepTable) -> Result<()> {
    match ctx.cfg.format {
        Format::Json => {
            ctx.out.write_all(table.to_json()?.as_bytes())?;
            writeln!(ctx.out)?;
        }
        Format::Csv => table.write_csv(&mut ctx.out)?,
        Format::Text => {
            let unit = ctx.unit();
            let o = &mut ctx.out;
            writeln!(
                o,
                "{:>3} {:>4} {:>4} {:>16} {:>12} {:>14} {:>14}  {:<16} promotion",
                "N",
                "up",
                "down",
                format!("E ({unit})"),
                "dE",
                "r_inf",
                "gamma_inf",
                "occupancy"
            )?;
            for r in &table.rows {
                match (r.energy, r.occupancy()) {
                    (Some(e), Some(occ)) => writeln!(
                        o,
                        "{:>3} {:>4} {:>4} {:>16.10} {:>12} {:>14.10} {:>14.10}  {:<16} {}",
                        r.n,
                        r.n_up,
                        r.n_down,
                        e,
                        r.first_difference.map_or("-".into(), |d| format!("{d:.6}")),
                        r.r_infinity.unwrap_or(f64::NAN),
                        r.gamma_infinity.unwrap_or(f64::NAN),
                        occ.to_string(),
                        r.pauli_promotion.unwrap_or(0)
                    )?,
                    _ => writeln!(
                        o,
                        "{:>3} {:>4} {:>4}  failed: {}",
                        r.n,
                        r.n_up,
                        r.n_down,
                        r.error.as_deref().unwrap_or("?")
                    )?,
                }
            }
            let d = &table.diagnostics;
            writeln!(
                o,
                "increasing: {}, staggering: {} (alternation {:.2}), even-odd gap {:.6}",
                d.monotone_increasing, d.staggering, d.alternation_fraction, d.even_odd_gap
            )?;
        }
    }
    Ok(())
}

fn write_report(w: &mut dyn Write, report: &spt_core::ComparisonReport) -> io::Result<()> {
    writeln!(
        w,
        "{:>3} {:>14} {:>10} {:>10} {:>10} {:>9}  source",
        "N", "E", "E_ref", "dE", "allowed", "within"
    )?;
    for r in &report.rows {
        writeln!(
            w,
            "{:>3} {:>14.8} {:>10.4} {:>10.4} {:>10.4} {:>9}  {}",
            r.n, r.energy, r.energy_ref, r.absolute, r.allowed, r.within, r.source
        )?;
    }
    writeln!(
        w,
        "mean |dE| {:.4}, max |dE| {:.4}, rms {:.4}, relative trend {:.3e} per particle, all within: {}",
        report.mean_absolute, report.max_absolute, report.rms, report.relative_trend, report.all_within
    )
}

fn report_out(ctx: &mut Ctx, report: &spt_core::ComparisonReport) -> Result<u8> {
    // Tables keep their machine-readable form; the report goes to stderr.
    if ctx.cfg.format == Format::Text {
        writeln!(ctx.out)?;
        write_report(&mut ctx.out, report)?;
    } else {
        write_report(&mut io::stderr().lock(), report)?;
    }
    Ok(if report.all_within {
        0
    } else {
        EXIT_OUTSIDE_TOLERANCE
    })
}

fn sweep(ctx: &mut Ctx, refs: Option<&Path>, plot: Option<BufWriter<File>>) -> Result<u8> {
    let references = refs.map(load_references).transpose()?;
    let (template, ns) = sweep_specs(ctx)?;
    let table = ctx.pipeline.sweep(&template, &ns)?;
    let shown = scaled_table(ctx, &table);
    write_table(ctx, &shown)?;
    if let Some(mut p) = plot {
        shown.write_plot_series(&mut p)?;
        p.flush()?;
    }
    match references {
        Some(refs) => {
            let report = compare(&table, &refs, Tolerance::DIGITIZED)?;
            report_out(ctx, &report)
        }
        None => Ok(0),
    }
}

fn e_max(ctx: &Ctx, spec: &SystemSpec, window: Window) -> Result<f64> {
    Ok(match window.e_max {
        Some(e) => e,
        None => ctx.pipeline.run(spec)?.energy.total_unscaled + window.window,
    })
}

fn spectrum(ctx: &mut Ctx, window: Window) -> Result<u8> {
    let spec = ctx.spec()?;
    let table = ctx.pipeline.spectrum(&spec, e_max(ctx, &spec, window)?)?;
    #[derive(Serialize)]
    struct Row {
        energy: f64,
        degeneracy: String,
        occupancy: String,
        filling: String,
    }
    let rows: Vec<Row> = table
        .levels
        .iter()
        .map(|l| Row {
            energy: ctx.scale(l.energy),
            degeneracy: l.degeneracy.to_string(),
            occupancy: l.occupancy.to_string(),
            filling: l.configuration.summary(),
        })
        .collect();
    match ctx.cfg.format {
        Format::Json => ctx.json(&table)?,
        Format::Csv => ctx.csv(&rows)?,
        Format::Text => {
            let unit = ctx.unit();
            let top = ctx.scale(table.e_max);
            let o = &mut ctx.out;
            writeln!(
                o,
                "{:>16} {:>14}  {:<16} filling",
                format!("E ({unit})"),
                "degeneracy",
                "occupancy"
            )?;
            for r in &rows {
                writeln!(
                    o,
                    "{:>16.10} {:>14}  {:<16} {}",
                    r.energy, r.degeneracy, r.occupancy, r.filling
                )?;
            }
            writeln!(
                o,
                "{} levels up to {}; {} cut just above",
                rows.len(),
                num(top),
                table.boundary_count
            )?;
        }
    }
    Ok(0)
}

fn partition(ctx: &mut Ctx, betas: &[f64], window: Window) -> Result<u8> {
    let spec = ctx.spec()?;
    let table = ctx.pipeline.spectrum(&spec, e_max(ctx, &spec, window)?)?;
    let rows = betas
        .iter()
        .map(|&b| partition_function(&table, b))
        .collect::<spt_core::Result<Vec<_>>>()?;
    match ctx.cfg.format {
        Format::Json => {
            let v = json!({ "ground_energy": ctx.scale(table.ground_energy), "ground_degeneracy": table.ground_degeneracy().to_string(), "points": rows });
            ctx.json(&v)?
        }
        Format::Csv => ctx.csv(&rows)?,
        Format::Text => {
            let o = &mut ctx.out;
            writeln!(o, "ground degeneracy {}", table.ground_degeneracy())?;
            writeln!(o, "{:>10} {:>20} {:>12}", "beta", "Z", "tail bound")?;
            for p in &rows {
                let flag = if p.tail_exceeds_tolerance {
                    "  (truncation significant)"
                } else {
                    ""
                };
                writeln!(
                    o,
                    "{:>10} {:>20.12} {:>12.3e}{flag}",
                    num(p.beta),
                    p.z,
                    p.tail_bound
                )?;
            }
        }
    }
    Ok(0)
}

fn extrapolate(ctx: &mut Ctx, ranges: &[f64], plot: Option<BufWriter<File>>) -> Result<u8> {
    if !matches!(ctx.cfg.model()?, ModelSpec::Unitary(_)) {
        return Err(ConfigError(
            "extrapolate re-tunes the well at each range; use --model unitary".into(),
        )
        .into());
    }
    let spec = ctx.spec()?;
    let fit = extrapolate_zero_range(&ctx.pipeline, &spec, ranges)?;
    if let Some(mut p) = plot {
        writeln!(p, "# R E")?;
        for (r, e) in &fit.points {
            writeln!(p, "{r} {}", ctx.scale(*e))?;
        }
        p.flush()?;
    }
    #[derive(Serialize)]
    struct Row {
        range: f64,
        energy: f64,
    }
    match ctx.cfg.format {
        Format::Json => ctx.json(&fit)?,
        Format::Csv => {
            let rows: Vec<Row> = fit
                .points
                .iter()
                .map(|&(range, e)| Row {
                    range,
                    energy: ctx.scale(e),
                })
                .collect();
            ctx.csv(&rows)?
        }
        Format::Text => {
            let unit = ctx.unit();
            let (e0, slope) = (ctx.scale(fit.e0), ctx.scale(fit.slope));
            let o = &mut ctx.out;
            for (r, e) in &fit.points {
                writeln!(
                    o,
                    "R = {:<8} E = {:.10}",
                    num(*r),
                    e * ctx.cfg.energy_scale()
                )?;
            }
            writeln!(o, "E(R -> 0) = {e0:.10} {unit}, slope {slope:.6}")?;
            if let Some(c) = fit.curvature {
                writeln!(
                    o,
                    "quadratic fit used, curvature {:.6}",
                    ctx.cfg.energy_scale() * c
                )?;
            }
            writeln!(
                o,
                "residual {:.3e}{}",
                fit.residual,
                if fit.non_monotone {
                    ", E(R) not monotone"
                } else {
                    ""
                }
            )?;
        }
    }
    Ok(0)
}

fn read_table(path: &Path) -> Result<SweepTable> {
    let file = File::open(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(SweepTable::from_json(&io::read_to_string(file)?)?)
    } else {
        Ok(SweepTable::read_csv(file)?)
    }
}

fn compare_cmd(ctx: &mut Ctx, refs: &Path, table: Option<&Path>, tol: Tolerance) -> Result<u8> {
    let references = load_references(refs)?;
    let table = match table {
        Some(p) => read_table(p)?,
        None => {
            let (template, ns) = sweep_specs(ctx)?;
            ctx.pipeline.sweep(&template, &ns)?
        }
    };
    let report = compare(&table, &references, tol)?;
    match ctx.cfg.format {
        Format::Json => ctx.json(&report)?,
        Format::Csv => ctx.csv(&report.rows)?,
        Format::Text => write_report(&mut ctx.out, &report)?,
    }
    Ok(if report.all_within {
        0
    } else {
        EXIT_OUTSIDE_TOLERANCE
    })
}

fn cache(ctx: &mut Ctx, action: CacheAction) -> Result<u8> {
    let Some(cache) = ctx.pipeline.cache() else {
        return Err(
            ConfigError("no cache directory (use --cache-dir or SPT_CACHE_DIR)".into()).into(),
        );
    };
    match action {
        CacheAction::List => {
            let entries = cache.list()?;
            #[derive(Serialize)]
            struct Row<'a> {
                key: &'a str,
                model: &'a str,
                n_up: usize,
                n_down: usize,
                conventions: &'a str,
                created_at: u64,
            }
            let rows: Vec<Row> = entries
                .iter()
                .map(|e| Row {
                    key: &e.key,
                    model: &e.model,
                    n_up: e.n_up,
                    n_down: e.n_down,
                    conventions: &e.conventions,
                    created_at: e.created_at,
                })
                .collect();
            match ctx.cfg.format {
                Format::Json => ctx.json(&rows)?,
                Format::Csv => ctx.csv(&rows)?,
                Format::Text => {
                    for r in &rows {
                        writeln!(
                            ctx.out,
                            "{}  N = {:>2} ({} up, {} down)  {}",
                            &r.key[..12],
                            r.n_up + r.n_down,
                            r.n_up,
                            r.n_down,
                            r.model
                        )?;
                    }
                    writeln!(ctx.out, "{} entries", rows.len())?;
                }
            }
        }
        CacheAction::Clear => {
            let n = cache.clear()?;
            writeln!(ctx.out, "removed {n} entries")?;
        }
    }
    Ok(0)
}
