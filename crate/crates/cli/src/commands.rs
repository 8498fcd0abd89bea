use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use magnetomech::dynamics::{
    self, measure_growth_rate, params_hash, write_snapshot, AtomicState, Model, Perturbation,
    PerturbationTarget, RunError, RunOutput, SimConfig,
};
use magnetomech::lsa::{
    self, InstabilityMode, OrientationOptions, Relaxation, ThresholdResult, MOLASSES_BRACKET,
    PERIOD_BRACKET,
};
use magnetomech::physics::{ballistic_rate, sat_to_intensity, AtomSpecies, Derived};
use magnetomech::spectral::TransverseGrid;
use rayon::prelude::*;

use crate::config::{Config, Value};
use crate::table::{Cell, Table};
use crate::{CliError, Provenance};

fn with_header(prov: &Provenance, columns: &[&str]) -> Table {
    let mut t = Table::new(columns.iter().copied());
    t.comments = prov.header();
    t
}

fn emit(table: &Table, target: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    if target == "-" {
        table.write_to(stdout)?;
    } else {
        let f = File::create(target).map_err(|e| CliError::Runtime(format!("{target}: {e}")))?;
        table.write_to(BufWriter::new(f))?;
    }
    Ok(())
}

fn intensity(species: &AtomSpecies, s0: Option<f64>, delta: f64) -> Option<f64> {
    s0.map(|s| sat_to_intensity(s, delta, species))
}

fn threshold_cells(species: &AtomSpecies, th: &ThresholdResult, delta: f64) -> [Cell; 3] {
    [
        th.s0_th.into(),
        intensity(species, th.s0_th, delta).into(),
        th.exists().into(),
    ]
}

fn describe(options: &OrientationOptions) -> String {
    let mut parts = vec![if options.include_optomech { "combined" } else { "magnetic" }];
    if options.include_molasses {
        parts.push("molasses");
    }
    if options.relaxation == Relaxation::Ballistic {
        parts.push("ballistic");
    }
    parts.join("+")
}

pub fn lsa(prov: &Provenance, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &prov.config;
    let species = cfg.species();
    let p = cfg.params()?;
    let explicit = cfg.sin_theta()?;
    let opts = cfg.orientation_options();
    let sin_dens = explicit.unwrap_or(lsa::optimal_sin_theta(InstabilityMode::Density, p.delta));
    let sin_or = explicit.unwrap_or(lsa::optimal_sin_theta(InstabilityMode::Orientation, p.delta));

    let mut t = with_header(
        prov,
        &[
            "mode",
            "variant",
            "sin_theta",
            "s0_th",
            "I_th_mW_cm2",
            "exists",
            "p0_th_per_s",
            "numerator_per_s",
            "denominator",
        ],
    );
    let mut rows = vec![("density", String::new(), sin_dens, lsa::threshold_density(&species, &p, sin_dens)?)];
    let mut variants = vec![OrientationOptions {
        include_optomech: false,
        ..opts
    }];
    if opts.relaxation == Relaxation::Diffusive {
        variants.push(OrientationOptions {
            include_optomech: true,
            ..opts
        });
    }
    for v in variants {
        rows.push((
            "orientation",
            describe(&v),
            sin_or,
            lsa::threshold_orientation(&species, &p, sin_or, v)?,
        ));
    }

    let mut notes = Vec::new();
    for (mode, variant, _, th) in &rows {
        for (name, v) in th.decay_terms.iter().chain(&th.drive_terms) {
            notes.push(format!("term {mode}{}{variant} {name} = {v:e}", if variant.is_empty() { "" } else { " " }));
        }
    }
    notes.push(match lsa::min_b0(p.delta, p.reflectivity) {
        Ok(b) => format!("min_b0 = {b}"),
        Err(e) => format!("min_b0 = ({e})"),
    });
    if opts.relaxation == Relaxation::Diffusive {
        let cp = lsa::crossover_period(&species, &p, sin_dens, opts, PERIOD_BRACKET);
        notes.push(match cp {
            Ok(l) => format!("crossover_period_um = {}", l * 1e6),
            Err(e) => format!("crossover_period_um = ({e})"),
        });
        let cm = lsa::crossover_molasses(&species, &p, sin_dens, opts, MOLASSES_BRACKET);
        notes.push(match cm {
            Ok(s) => format!("crossover_molasses_sat = {s}"),
            Err(e) => format!("crossover_molasses_sat = ({e})"),
        });
    }
    t.comments.extend(notes);

    for (mode, variant, sin, th) in rows {
        let [s0, i, ex] = threshold_cells(&species, &th, p.delta);
        t.push(vec![
            mode.into(),
            variant.as_str().into(),
            Cell::Num(sin),
            s0,
            i,
            ex,
            th.p0_th.into(),
            Cell::Num(th.numerator),
            Cell::Num(th.denominator),
        ]);
    }
    emit(&t, cfg.word("output"), stdout)
}

const SWEEP_COLUMNS: [&str; 12] = [
    "s0_magnetic",
    "s0_optomech",
    "s0_combined_neg",
    "s0_combined_pos",
    "I_magnetic_mW_cm2",
    "I_optomech_mW_cm2",
    "I_combined_neg_mW_cm2",
    "I_combined_pos_mW_cm2",
    "exists_magnetic",
    "exists_optomech",
    "exists_combined_neg",
    "exists_combined_pos",
];

/// Magnetic, optomechanical and combined (both detuning signs) thresholds.
fn sweep_row(cfg: &Config) -> Result<Vec<Cell>, CliError> {
    let species = cfg.species();
    let p = cfg.params()?;
    let explicit = cfg.sin_theta()?;
    let opts = cfg.orientation_options();
    let orient_sin = |delta| explicit.unwrap_or(lsa::optimal_sin_theta(InstabilityMode::Orientation, delta));

    let mag_opts = OrientationOptions {
        include_optomech: false,
        ..opts
    };
    let mag = lsa::threshold_orientation(&species, &p, orient_sin(p.delta), mag_opts)?.s0_th;
    let dens_sin = explicit.unwrap_or(lsa::optimal_sin_theta(InstabilityMode::Density, p.delta));
    let om = lsa::threshold_density(&species, &p, dens_sin)?.s0_th;
    let combined = |delta: f64| -> Result<Option<f64>, CliError> {
        if opts.relaxation == Relaxation::Ballistic {
            return Ok(None);
        }
        let q = magnetomech::SystemParams { delta, ..p };
        let o = OrientationOptions {
            include_optomech: true,
            ..opts
        };
        Ok(lsa::threshold_orientation(&species, &q, orient_sin(delta), o)?.s0_th)
    };
    let neg = combined(-p.delta.abs())?;
    let pos = combined(p.delta.abs())?;
    let d = p.delta.abs();
    let values = [(mag, p.delta), (om, p.delta), (neg, -d), (pos, d)];
    let mut row: Vec<Cell> = values.iter().map(|(s, _)| Cell::from(*s)).collect();
    row.extend(values.iter().map(|(s, delta)| Cell::from(intensity(&species, *s, *delta))));
    row.extend(values.iter().map(|(s, _)| Cell::from(s.is_some())));
    Ok(row)
}

fn sweep_table(prov: &Provenance, base: &Config, key: &str, values: &[f64]) -> Result<Table, CliError> {
    let mut columns = vec![key];
    columns.extend(SWEEP_COLUMNS);
    let mut t = with_header(prov, &columns);
    let rows: Vec<Vec<Cell>> = values
        .par_iter()
        .map(|v| {
            let mut cfg = base.clone();
            cfg.set(key, Value::Num(*v));
            let mut row = vec![Cell::Num(*v)];
            row.extend(sweep_row(&cfg)?);
            Ok(row)
        })
        .collect::<Result<_, CliError>>()?;
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

fn sweep_values(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let (a, b) = (cfg.num("sweep_from"), cfg.num("sweep_to"));
    let n = cfg.usize("sweep_points")?;
    if n == 0 {
        return Err(CliError::Config("sweep_points must be at least 1".into()));
    }
    let log = cfg.word("sweep_scale") == "log";
    if log && !(a > 0.0 && b > 0.0) {
        return Err(CliError::Config("log sweeps need positive end points".into()));
    }
    Ok((0..n)
        .map(|i| {
            let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            if log {
                (a.ln() + f * (b.ln() - a.ln())).exp()
            } else {
                a + f * (b - a)
            }
        })
        .collect())
}

pub fn sweep(prov: &Provenance, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &prov.config;
    let key = cfg.word("sweep_param").to_string();
    let values = sweep_values(cfg)?;
    let t = sweep_table(prov, cfg, &key, &values)?;
    emit(&t, cfg.word("output"), stdout)
}

fn range(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

fn output_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.word("output_dir"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn rate_table(prov: &Provenance) -> Result<Table, CliError> {
    let species = prov.config.species();
    let mut t = with_header(
        prov,
        &[
            "lattice_period_um",
            "ballistic_rate_290uK_per_s",
            "diffusive_rate_290uK_fitted_per_s",
            "ballistic_rate_120uK_per_s",
            "diffusive_rate_120uK_fitted_per_s",
            "diffusive_rate_290uK_molasses_per_s",
            "diffusive_rate_120uK_molasses_per_s",
        ],
    );
    t.comment("fitted D: 8.7e-7 m^2/s at 290 uK, 3e-7 m^2/s at 120 uK");
    let detuning = prov.config.num("molasses_detuning");
    let molasses_d = |t_uk: f64| {
        magnetomech::physics::molasses_derived(&species, detuning, t_uk * 1e-6).map(|m| m.diff)
    };
    let (d290, d120) = (molasses_d(290.0)?, molasses_d(120.0)?);
    for period_um in range(10.0, 200.0, 5.0) {
        let period = period_um * 1e-6;
        let q2 = (2.0 * std::f64::consts::PI / period).powi(2);
        t.push(vec![
            Cell::Num(period_um),
            Cell::Num(ballistic_rate(period, 290e-6, &species)?),
            Cell::Num(8.7e-7 * q2),
            Cell::Num(ballistic_rate(period, 120e-6, &species)?),
            Cell::Num(3e-7 * q2),
            Cell::Num(d290 * q2),
            Cell::Num(d120 * q2),
        ]);
    }
    Ok(t)
}

fn figure_list(which: &str) -> Vec<&'static str> {
    let all = ["fig4", "fig5a", "fig5b", "fig6", "fig7"];
    all.into_iter().filter(|f| which == "all" || *f == which).collect()
}

pub fn figures(prov: &Provenance, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &prov.config;
    let dir = output_dir(cfg)?;
    let species = cfg.species();
    let mut written = Vec::new();
    let mut save = |name: &str, table: Table| -> Result<(), CliError> {
        let path = dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        table.write_to(BufWriter::new(f))?;
        written.push(path);
        Ok(())
    };
    let temperatures = range(50.0, 350.0, 10.0);
    for fig in figure_list(cfg.word("figure")) {
        match fig {
            "fig4" => save("fig4.csv", rate_table(prov)?)?,
            "fig5a" => {
                for b0 in [80.0, 70.0] {
                    let mut c = cfg.clone();
                    c.set("b0", Value::Num(b0));
                    save(&format!("fig5a_b0_{b0}.csv"), sweep_table(prov, &c, "temperature_uK", &temperatures)?)?;
                }
            }
            "fig5b" => {
                let mut c = cfg.clone();
                c.set("b0", Value::Num(69.31));
                save("fig5b.csv", sweep_table(prov, &c, "temperature_uK", &temperatures)?)?;
            }
            "fig6" => {
                let mut t = sweep_table(prov, cfg, "lattice_period_um", &range(5.0, 100.0, 1.0))?;
                let p = cfg.params()?;
                let sin = cfg.sin_theta()?.unwrap_or(1.0);
                let opts = cfg.orientation_options();
                for (label, o) in [
                    ("combined", OrientationOptions { include_optomech: true, ..opts }),
                    ("magnetic", OrientationOptions { include_optomech: false, ..opts }),
                ] {
                    t.comment(match lsa::crossover_period(&species, &p, sin, o, PERIOD_BRACKET) {
                        Ok(l) => format!("crossover_period_um ({label}) = {}", l * 1e6),
                        Err(e) => format!("crossover_period_um ({label}) = ({e})"),
                    });
                }
                save("fig6.csv", t)?;
            }
            "fig7" => {
                let mut t = sweep_table(prov, cfg, "molasses_sat", &range(0.0, 2e-3, 5e-5))?;
                let p = cfg.params()?;
                let sin = cfg.sin_theta()?.unwrap_or(1.0);
                t.comment(
                    match lsa::crossover_molasses(&species, &p, sin, cfg.orientation_options(), MOLASSES_BRACKET) {
                        Ok(s) => format!("crossover_molasses_sat = {s}"),
                        Err(e) => format!("crossover_molasses_sat = ({e})"),
                    },
                );
                save("fig7.csv", t)?;
            }
            _ => unreachable!(),
        }
    }
    for path in written {
        writeln!(stdout, "wrote {}", path.display())?;
    }
    Ok(())
}

struct SimSetup {
    model: Model,
    config: SimConfig,
    derived: Derived,
    sin_theta: f64,
}

fn sim_setup(cfg: &Config) -> Result<SimSetup, CliError> {
    let species = cfg.species();
    let mut p = cfg.params()?;
    let opts = cfg.orientation_options();
    if !opts.include_molasses {
        p.molasses_sat = 0.0;
    }
    let model = Model {
        species,
        params: p,
        relaxation: opts.relaxation,
        optomech: opts.include_optomech,
        repump: opts.repump,
    };
    let sin_theta = Derived::new(&species, &p)?.theta.sin();
    let reference = match cfg.word("pump_reference") {
        "density" => Some(lsa::threshold_density(&species, &p, sin_theta)?),
        "orientation" => {
            let o = OrientationOptions {
                include_molasses: true,
                ..opts
            };
            Some(lsa::threshold_orientation(&species, &p, sin_theta, o)?)
        }
        _ => None,
    };
    if let Some(th) = reference {
        let s = th.s0_th.ok_or_else(|| {
            CliError::Config(format!(
                "pump_reference {}: no threshold at sin Θ = {sin_theta:.4}",
                cfg.word("pump_reference")
            ))
        })?;
        p.pump_sat = cfg.num("pump_factor") * s;
    }
    let model = Model { params: p, ..model };
    let grid = TransverseGrid::new(
        cfg.usize("dims")?,
        cfg.usize("grid_points")?,
        p.lattice_period,
        cfg.usize("periods")?,
    )?;
    let target = match cfg.word("perturbation") {
        "density" => PerturbationTarget::Density,
        "noise" => PerturbationTarget::Noise,
        _ => PerturbationTarget::Orientation,
    };
    let config = SimConfig {
        grid,
        dt: cfg.num_or_word("dt_ns").map(|ns| ns * 1e-9),
        n_steps: cfg.usize("steps")?,
        seed: cfg.int("seed"),
        perturbation: Perturbation {
            target,
            amplitude: cfg.num("perturbation_amplitude"),
        },
        snapshot_every: cfg.usize("snapshot_every")?,
        diagnostics_every: cfg.usize("diagnostics_every")?.max(1),
        abort_on_invariant_violation: cfg.flag("abort_on_violation"),
    };
    Ok(SimSetup {
        derived: Derived::new(&species, &p)?,
        model,
        config,
        sin_theta,
    })
}

fn write_state(path: &Path, state: &AtomicState, grid: &TransverseGrid, hash: &str) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    write_snapshot(&mut w, state, grid, hash)?;
    w.flush()?;
    Ok(())
}

fn write_run(prov: &Provenance, setup: &SimSetup, out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let hash = params_hash(&setup.model);
    let grid = &setup.config.grid;
    let mut paths = Vec::new();
    let diag = dir.join("diagnostics.csv");
    let f = File::create(&diag).map_err(|e| CliError::Runtime(format!("{}: {e}", diag.display())))?;
    let mut w = BufWriter::new(f);
    for line in prov.header() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "# pump_sat_effective = {}", setup.model.params.pump_sat)?;
    writeln!(w, "# dt = {}", out.dt)?;
    writeln!(w, "# params_hash = {hash}")?;
    for warning in &out.warnings {
        writeln!(w, "# warning: {warning}")?;
    }
    out.diagnostics.write_csv(&mut w)?;
    w.flush()?;
    paths.push(diag);
    let every = setup.config.snapshot_every.max(1);
    for (i, s) in out.snapshots.iter().enumerate() {
        let path = dir.join(format!("snapshot_{:07}.dat", i * every));
        write_state(&path, s, grid, &hash)?;
        paths.push(path);
    }
    let final_path = dir.join("final.dat");
    write_state(&final_path, &out.final_state, grid, &hash)?;
    paths.push(final_path);
    Ok(paths)
}

fn execute(setup: &SimSetup) -> Result<RunOutput, (Option<Box<RunOutput>>, CliError)> {
    dynamics::run(setup.model, &setup.config).map_err(|e| match e {
        RunError::Setup(e) => (None, CliError::from(e)),
        RunError::Aborted(a) => (Some(Box::new(a.partial)), CliError::Runtime(a.error.to_string())),
    })
}

pub fn simulate(prov: &Provenance, stdout: &mut dyn Write) -> Result<(), CliError> {
    let setup = sim_setup(&prov.config)?;
    let dir = output_dir(&prov.config)?;
    let (out, failure) = match execute(&setup) {
        Ok(out) => (out, None),
        Err((Some(partial), err)) => (*partial, Some(err)),
        Err((None, err)) => return Err(err),
    };
    let paths = write_run(prov, &setup, &out, &dir)?;
    if let Some(last) = out.diagnostics.last() {
        writeln!(
            stdout,
            "steps {} t = {:e} s amp_rho_q = {:e} amp_w_q = {:e} max_w = {}",
            last.step, last.time, last.amp_rho_q, last.amp_w_q, last.max_w
        )?;
    }
    for p in paths {
        writeln!(stdout, "wrote {}", p.display())?;
    }
    failure.map_or(Ok(()), Err)
}

pub fn growth(prov: &Provenance, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &prov.config;
    let setup = sim_setup(cfg)?;
    let density = match setup.config.perturbation.target {
        PerturbationTarget::Density => true,
        PerturbationTarget::Orientation => false,
        PerturbationTarget::Noise => {
            return Err(CliError::Config("growth needs a density or orientation perturbation".into()))
        }
    };
    let out = execute(&setup).map_err(|(_, e)| e)?;
    let from = cfg.num_or_word("fit_from_us").map_or(f64::NEG_INFINITY, |us| us * 1e-6);
    let to = cfg.num_or_word("fit_to_us").map_or(f64::INFINITY, |us| us * 1e-6);
    let (times, amps): (Vec<f64>, Vec<f64>) = out
        .diagnostics
        .records
        .iter()
        .filter(|r| r.time >= from && r.time <= to)
        .map(|r| (r.time, if density { r.amp_rho_q } else { r.amp_w_q }))
        .unzip();
    let fit = measure_growth_rate(&times, &amps)?;

    let m = &setup.model;
    let d = &setup.derived;
    let analytic = if density {
        lsa::growth_rate_density(&m.species, &m.params, d.q, d.p0, setup.sin_theta)?.rate
    } else {
        let o = OrientationOptions {
            include_optomech: m.optomech,
            include_molasses: true,
            relaxation: m.relaxation,
            repump: m.repump,
        };
        lsa::growth_rate_orientation(&m.species, &m.params, d.q, d.p0, d.p_m, setup.sin_theta, o)?.rate
    };
    let mut t = with_header(
        prov,
        &[
            "mode",
            "pump_sat",
            "sin_theta",
            "measured_rate_per_s",
            "analytic_rate_per_s",
            "relative_error",
            "fit_residual",
            "fit_points",
        ],
    );
    t.push(vec![
        (if density { "density" } else { "orientation" }).into(),
        Cell::Num(m.params.pump_sat),
        Cell::Num(setup.sin_theta),
        Cell::Num(fit.rate),
        Cell::Num(analytic),
        Cell::Num((fit.rate - analytic).abs() / analytic.abs()),
        Cell::Num(fit.residual),
        Cell::Int(fit.points as u64),
    ]);
    emit(&t, cfg.word("output"), stdout)
}
