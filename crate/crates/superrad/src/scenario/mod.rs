//! Configuration-driven prepare → pulse → decay runs, sweeps and exports.

pub mod config;
pub mod output;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{Cell, Method, OneOrMany, ScenarioConfig};
use output::{fmt, CellRecord, Conventions, CsvWriter, Manifest};

use crate::angular::Axis;
use crate::error::{Error, Result};
use crate::lindblad::{ed_basis, evolve, EvolveOptions, PSDensityMatrix};
use crate::ode::Tolerances;
use crate::operators::Channel;
use crate::potential::{self, DarkSearch, PotentialSpec};
use crate::semiclassical::cumulant::{Cumulant, CumulantState};
use crate::semiclassical::twa::{twa_ensemble, TwaOptions};
use crate::semiclassical::{pulse_single_atom, Decoupling, MeanField, OneBodyState, Probes, Sample};
use crate::spectra::{effective_blocks, eigendecompose};
use crate::symspace::{coherent_state, coherent_support, PSBasis};

/// Everything one grid cell produced.
#[derive(Clone, Debug)]
pub struct CellResult {
    /// Times in units of `1/(NΓ)`.
    pub samples: Vec<Sample>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub histogram: Option<Vec<(f64, f64)>>,
    pub distributions: Vec<(String, BTreeMap<i64, f64>)>,
    pub warnings: Vec<String>,
}

/// Scalar summary of a cell, used by sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n_e_initial: f64,
    pub n_e_final: f64,
    /// Largest `Σ_γ ⟨D⁺_γ D⁻_γ⟩` over the decay channels.
    pub peak_emission: f64,
    pub t_peak: f64,
    /// First time `n_e` has dropped by 0.01 from its initial value.
    pub t_onset: f64,
}

fn channel_slot(c: Channel) -> usize {
    Channel::ALL.iter().position(|&x| x == c).expect("named channel")
}

impl CellResult {
    pub fn summary(&self, channels: &[Channel]) -> Summary {
        let first = self.samples.first().map_or(f64::NAN, |s| s.n_e);
        let last = self.samples.last().map_or(f64::NAN, |s| s.n_e);
        let mut peak = f64::NEG_INFINITY;
        let mut t_peak = f64::NAN;
        for s in &self.samples {
            let e: f64 = channels.iter().map(|&c| s.emission[channel_slot(c)]).sum();
            if e > peak {
                peak = e;
                t_peak = s.time;
            }
        }
        let t_onset = self.samples.iter().find(|s| first - s.n_e > 0.01).map_or(f64::NAN, |s| s.time);
        Summary {
            n_e_initial: first,
            n_e_final: last,
            peak_emission: peak,
            t_peak,
            t_onset,
        }
    }
}

fn pulsed_state(cfg: &ScenarioConfig, cell: &Cell) -> Result<Vec<Complex64>> {
    let psi = cfg.single_atom_state()?;
    Ok(match (cfg.drive_operator(), &cfg.drive) {
        (Some(op), Some(d)) => pulse_single_atom(&psi, &op, cell.theta0_pi * std::f64::consts::PI, d.phase),
        _ => psi,
    })
}

/// Exact runs seed the basis with the full support of the coherent state.
fn ed_seeds(cfg: &ScenarioConfig, n: u32, psi: &[Complex64]) -> Result<Vec<crate::symspace::Occupation>> {
    let used = psi.iter().filter(|a| a.norm() > 0.0).count() as u64;
    let size = crate::symspace::ps_dimension(n as u64, used);
    let cap = cfg.ed.max_basis;
    if size > cap as u128 {
        return Err(Error::Resource {
            what: format!("support of the initial product state for N = {n}"),
            requested: usize::try_from(size).unwrap_or(usize::MAX),
            cap,
        });
    }
    Ok(coherent_support(&cfg.level, n, psi))
}

fn tolerances(cfg: &ScenarioConfig) -> Tolerances {
    Tolerances::new(cfg.integration.rtol, cfg.integration.atol)
}

/// Simulate one cell.
pub fn run_cell(cfg: &ScenarioConfig, cell: &Cell) -> Result<CellResult> {
    let n = cell.atoms;
    let nf = n as f64;
    let gen = cfg.generator(cell);
    let rate = nf * cfg.physics.gamma;
    let scaled = cfg.scaled_grid();
    let grid: Vec<f64> = scaled.iter().map(|t| t / rate).collect();
    let psi = pulsed_state(cfg, cell)?;
    let level = cfg.level;
    let axis = cfg.physics.basis;
    let mut out = CellResult {
        samples: Vec::new(),
        n_traj: None,
        seed: None,
        histogram: None,
        distributions: Vec::new(),
        warnings: Vec::new(),
    };
    match cfg.method {
        Method::Ed => {
            let basis = ed_basis(&gen, ed_seeds(cfg, n, &psi)?, n, &cfg.limits())?;
            let v = coherent_state(&basis, &psi)?;
            let rho = PSDensityMatrix::from_pure(basis, &v, Some(&gen), cfg.ed.coherences)?;
            let opts = EvolveOptions {
                tol: tolerances(cfg),
                ..EvolveOptions::default()
            };
            let ev = evolve(&rho, &gen, &grid, &opts)?;
            out.samples = ev
                .samples
                .iter()
                .map(|o| Sample {
                    time: o.time,
                    n_e: o.n_e,
                    populations: o.populations.clone(),
                    emission: o.emission,
                })
                .collect();
            out.warnings = ev.warnings;
            if cfg.ed.distributions {
                out.distributions.push(("excitations".into(), ev.final_state.excitation_distribution()));
            }
            if let Some([a, b]) = &cfg.ed.imbalance {
                let (ia, ib) = (level.parse_label(a)?, level.parse_label(b)?);
                out.distributions.push((format!("imbalance_{a}_{b}"), ev.final_state.imbalance_distribution(ia, ib)));
            }
        }
        Method::Mf => {
            let groups = cfg.groups(cell);
            let state = OneBodyState::product(level, axis, &psi, groups.clone())?;
            let mf = MeanField::new(&gen, groups, cfg.physics.decoupling)?;
            out.samples = mf.evolve(&state, &grid, &tolerances(cfg))?.samples;
        }
        Method::Twa => {
            let mf = MeanField::new(&gen, cfg.groups(cell), Decoupling::Factorized)?;
            let opts = TwaOptions {
                n_traj: cfg.twa.n_traj,
                seed: cell.seed,
                tol: tolerances(cfg),
            };
            let res = twa_ensemble(&mf, &psi, &grid, &opts)?;
            if res.negative_trajectories > 0 {
                out.warnings.push(format!(
                    "{} trajectories ended with a negative population (min {:e})",
                    res.negative_trajectories, res.min_population
                ));
            }
            if cfg.twa.histogram_bins > 0 {
                out.histogram = Some(res.histogram(cfg.twa.histogram_bins, 0.0, 1.0));
            }
            out.n_traj = Some(res.n_traj);
            out.seed = Some(res.seed);
            out.samples = res.samples;
        }
        Method::Cumulant => {
            let cu = Cumulant::new(&gen, nf, 1.0)?;
            let (samples, _, _) = cu.evolve(&CumulantState::product(&psi, nf), &grid, &tolerances(cfg))?;
            out.samples = samples;
        }
        Method::ThetaOde => {
            let drive = cfg.drive_operator().ok_or_else(|| Error::domain("theta-ode needs a drive"))?;
            let psi0 = cfg.single_atom_state()?;
            let weights = cfg.site_weights(cell).unwrap_or_else(|| vec![1.0]);
            let pot = potential::potential_from_state(&level, axis, &psi0, &drive, weights)?.rescaled(nf);
            let theta0 = cell.theta0_pi * std::f64::consts::PI;
            let flow = potential::theta_flow(&pot, theta0, cfg.physics.gamma, &grid)?;
            let groups = cfg.groups(cell);
            let probes = Probes::new(&level, axis);
            out.samples = flow
                .iter()
                .map(|f| {
                    let psi_t = pulse_single_atom(&psi0, &drive, f.theta, 0.0);
                    let st = OneBodyState::product(level, axis, &psi_t, groups.clone())?;
                    Ok(Sample {
                        time: f.time,
                        n_e: f.n_e,
                        populations: st.populations(),
                        emission: probes.emission(st.ell(), &st.groups, &st.data),
                    })
                })
                .collect::<Result<_>>()?;
        }
    }
    for s in &mut out.samples {
        s.time *= rate;
    }
    Ok(out)
}

fn timeseries_header(cfg: &ScenarioConfig) -> Vec<String> {
    let mut h = vec!["time_ngt".to_string(), "n_e".into()];
    h.extend((0..cfg.level.ell()).map(|i| format!("pop_{}", cfg.level.label(i))));
    h.extend(Channel::ALL.iter().map(|c| format!("emission_{}", c.name())));
    h.extend(["method".into(), "n_traj".into(), "seed".into()]);
    h
}

fn write_cell_files(cfg: &ScenarioConfig, hash: &str, cell: &Cell, res: &CellResult, dir: &Path) -> Result<Vec<String>> {
    let base = format!("{}_{}_{}", cfg.output.prefix, cfg.method.name(), cell.tag());
    let mut files = Vec::new();
    let path = dir.join(format!("{base}.csv"));
    let mut w = CsvWriter::create(&path, hash, &timeseries_header(cfg))?;
    let n_traj = res.n_traj.map_or(String::new(), |x| x.to_string());
    let seed = res.seed.map_or(String::new(), |x| x.to_string());
    for s in &res.samples {
        let mut row = vec![fmt(s.time), fmt(s.n_e)];
        row.extend(s.populations.iter().map(|&p| fmt(p)));
        row.extend(s.emission.iter().map(|&e| fmt(e)));
        row.extend([cfg.method.name().to_string(), n_traj.clone(), seed.clone()]);
        w.row(&row)?;
    }
    w.flush()?;
    files.push(path.display().to_string());
    if let Some(hist) = &res.histogram {
        let path = dir.join(format!("{base}_histogram.csv"));
        let mut w = CsvWriter::create(&path, hash, &["n_e".into(), "density".into()])?;
        for (x, d) in hist {
            w.row(&[fmt(*x), fmt(*d)])?;
        }
        w.flush()?;
        files.push(path.display().to_string());
    }
    for (name, dist) in &res.distributions {
        let path = dir.join(format!("{base}_{name}.csv"));
        let mut w = CsvWriter::create(&path, hash, &["value".into(), "probability".into()])?;
        for (k, p) in dist {
            w.row(&[k.to_string(), fmt(*p)])?;
        }
        w.flush()?;
        files.push(path.display().to_string());
    }
    Ok(files)
}

fn manifest(cfg: &ScenarioConfig, hash: &str, command: &str, start: Instant, files: Vec<String>, cells: Vec<CellRecord>) -> Result<Manifest> {
    Ok(Manifest {
        config_hash: hash.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        conventions: Conventions::default(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files,
        cells,
        config: cfg.to_toml()?,
    })
}

fn output_dir(cfg: &ScenarioConfig, dir: Option<&Path>) -> PathBuf {
    dir.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf)
}

fn manifest_path(cfg: &ScenarioConfig, dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("{}_{command}_manifest.json", cfg.output.prefix))
}

/// Run every cell, writing one time series per cell. Fails on the first
/// failing cell.
pub fn run(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<Manifest> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.hash()?;
    let dir = output_dir(cfg, dir);
    let cells = cfg.cells();
    let results: Vec<Result<CellResult>> = cells.par_iter().map(|c| run_cell(cfg, c)).collect();
    let mut records = Vec::new();
    let mut all_files = Vec::new();
    for (cell, res) in cells.iter().zip(results) {
        let res = res?;
        let files = write_cell_files(cfg, &hash, cell, &res, &dir)?;
        all_files.extend(files.iter().cloned());
        records.push(CellRecord {
            index: cell.index,
            tag: cell.tag(),
            status: "ok".into(),
            files,
            warnings: res.warnings,
        });
    }
    let m = manifest(cfg, &hash, "run", start, all_files, records)?;
    m.write(manifest_path(cfg, &dir, "run"))?;
    Ok(m)
}

fn sweep_header() -> Vec<String> {
    [
        "cell", "atoms", "theta0_pi", "delta_z", "chi", "n_sites", "seed", "method", "status", "n_e_initial", "n_e_final", "peak_emission", "t_peak_ngt", "t_onset_ngt", "message",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn sweep_row(cfg: &ScenarioConfig, cell: &Cell, res: &Result<CellResult>) -> Vec<String> {
    let opt = |x: Option<String>| x.unwrap_or_default();
    let mut row = vec![
        cell.index.to_string(),
        cell.atoms.to_string(),
        fmt(cell.theta0_pi),
        opt(cell.delta_z.map(fmt)),
        fmt(cell.chi),
        opt(cell.n_sites.map(|x| x.to_string())),
        cell.seed.to_string(),
        cfg.method.name().to_string(),
    ];
    match res {
        Ok(r) => {
            let s = r.summary(&cfg.physics.channels);
            row.push("ok".into());
            row.extend([s.n_e_initial, s.n_e_final, s.peak_emission, s.t_peak, s.t_onset].map(fmt));
            row.push(r.warnings.join("; "));
        }
        Err(e) => {
            row.push("failed".into());
            row.extend(std::iter::repeat_n(String::new(), 5));
            row.push(e.to_string());
        }
    }
    row
}

/// Long-format summary over the grid. Rows already present in the output
/// are skipped; failing cells are flagged and the sweep continues.
pub fn sweep(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<Manifest> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.hash()?;
    let dir = output_dir(cfg, dir);
    let path = dir.join(format!("{}_sweep.csv", cfg.output.prefix));
    let header = sweep_header();
    let mut done: BTreeSet<usize> = BTreeSet::new();
    let mut writer = match output::read_existing(&path)? {
        Some(existing) => {
            if existing.hash.as_deref() != Some(hash.as_str()) || existing.header != header {
                return Err(Error::Validation(vec![format!(
                    "{} was written by a different configuration; remove it or change output.prefix",
                    path.display()
                )]));
            }
            for r in &existing.rows {
                let mut parts = r.split(',');
                let idx = parts.next().and_then(|s| s.parse().ok());
                let status = parts.nth(7);
                if let (Some(i), Some("ok")) = (idx, status) {
                    done.insert(i);
                }
            }
            CsvWriter::append(&path)?
        }
        None => CsvWriter::create(&path, &hash, &header)?,
    };
    let todo: Vec<Cell> = cfg.cells().into_iter().filter(|c| !done.contains(&c.index)).collect();
    let mut records = Vec::new();
    // cells run concurrently in chunks; rows are written in cell order
    let chunk = rayon::current_num_threads().max(1);
    for part in todo.chunks(chunk) {
        let results: Vec<Result<CellResult>> = part.par_iter().map(|c| run_cell(cfg, c)).collect();
        for (cell, res) in part.iter().zip(&results) {
            writer.row(&sweep_row(cfg, cell, res))?;
            records.push(CellRecord {
                index: cell.index,
                tag: cell.tag(),
                status: match res {
                    Ok(_) => "ok".into(),
                    Err(e) => format!("failed: {e}"),
                },
                files: vec![],
                warnings: res.as_ref().map(|r| r.warnings.clone()).unwrap_or_default(),
            });
        }
        writer.flush()?;
    }
    let m = manifest(cfg, &hash, "sweep", start, vec![path.display().to_string()], records)?;
    m.write(manifest_path(cfg, &dir, "sweep"))?;
    Ok(m)
}

/// Eigen decay rates of the effective non-Hermitian Hamiltonian in the ∥
/// basis, one CSV per configuration.
pub fn spectrum(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<Manifest> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.hash()?;
    let dir = output_dir(cfg, dir);
    let path = dir.join(format!("{}_spectrum.csv", cfg.output.prefix));
    let header: Vec<String> = ["atoms", "block", "n_e", "n_a", "twice_m", "rate", "decay_rate", "energy_shift", "renyi", "dark"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut w = CsvWriter::create(&path, &hash, &header)?;
    let channels: Vec<_> = cfg.spectrum.channels.iter().map(|c| c.raising(&cfg.level, Axis::Par)).collect();
    let mut records = Vec::new();
    for (i, n) in cfg.atoms.values().into_iter().enumerate() {
        let want = cfg.spectrum.n_e;
        let level = cfg.level;
        let basis = PSBasis::enumerate_where(
            level,
            Axis::Par,
            n,
            |occ| want.is_none_or(|k| level.excited_indices().map(|j| occ[j]).sum::<u32>() == k),
            &cfg.limits(),
        )?;
        let spec = eigendecompose(effective_blocks(&basis, &channels, &cfg.limits())?, n)?;
        for r in &spec.records {
            let dark = r.is_dark(n);
            if cfg.spectrum.dark_only && !dark {
                continue;
            }
            let opt = |x: Option<i64>| x.map_or(String::new(), |v| v.to_string());
            w.row(&[
                n.to_string(),
                r.block.to_string(),
                r.k.to_string(),
                opt(r.sector.n_a.map(i64::from)),
                opt(r.sector.twice_m.map(i64::from)),
                fmt(r.rate),
                fmt(r.decay_rate(cfg.physics.gamma)),
                fmt(r.energy_shift(cfg.physics.chi)),
                fmt(r.renyi),
                dark.to_string(),
            ])?;
        }
        records.push(CellRecord {
            index: i,
            tag: format!("N{n}"),
            status: format!("ok: {} states, {} excited dark", spec.records.len(), spec.excited_dark_count()),
            files: vec![],
            warnings: vec![],
        });
    }
    w.flush()?;
    let m = manifest(cfg, &hash, "spectrum", start, vec![path.display().to_string()], records)?;
    m.write(manifest_path(cfg, &dir, "spectrum"))?;
    Ok(m)
}

/// Potential, stationary points and optional dark-state search for the
/// configured drive.
pub fn potential(cfg: &ScenarioConfig, dir: Option<&Path>) -> Result<Manifest> {
    cfg.validate()?;
    let start = Instant::now();
    let hash = cfg.hash()?;
    let dir = output_dir(cfg, dir);
    let drive_cfg = cfg
        .drive
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["potential export needs a [drive] section".into()]))?;
    let drive = cfg.drive_operator().expect("drive present");
    let orth_channel = cfg.potential.orthogonal.unwrap_or(drive_cfg.channel.orthogonal());
    let orth = orth_channel.raising(&cfg.level, cfg.physics.basis);
    let psi = cfg.single_atom_state()?;
    let level = cfg.level;
    let axis = cfg.physics.basis;
    let pi = std::f64::consts::PI;
    let [lo, hi] = cfg.potential.window_pi.map(|x| x * pi);

    // site configurations are the only grid axis that changes V
    let mut site_sets: Vec<(String, Option<Vec<f64>>)> = Vec::new();
    for c in cfg.cells() {
        let tag = c.n_sites.map_or("homogeneous".to_string(), |n| format!("sites{n}"));
        if !site_sets.iter().any(|(t, _)| *t == tag) {
            site_sets.push((tag, cfg.site_weights(&c)));
        }
    }
    let mut files = Vec::new();
    let mut records = Vec::new();
    for (i, (tag, weights)) in site_sets.into_iter().enumerate() {
        let mean_sq = weights.as_ref().map_or(1.0, |w| w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64);
        let pot: PotentialSpec = potential::potential_from_state(&level, axis, &psi, &drive, weights.unwrap_or_else(|| vec![1.0]))?;
        let base = format!("{}_potential_{tag}", cfg.output.prefix);
        let path = dir.join(format!("{base}.csv"));
        let header: Vec<String> = ["theta", "theta_pi", "V", "dV", "d2V", "U_curvature_at_theta0", "orthogonal_dipole"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut w = CsvWriter::create(&path, &hash, &header)?;
        let np = cfg.potential.points;
        for k in 0..np {
            let th = lo + (hi - lo) * k as f64 / (np - 1) as f64;
            let st = OneBodyState::homogeneous(level, axis, &pulse_single_atom(&psi, &drive, th, 0.0), 1.0)?;
            let oc = potential::orthogonal_curvature(&st, &orth)?;
            w.row(&[
                fmt(th),
                fmt(th / pi),
                fmt(pot.value(th)),
                fmt(pot.slope(th)),
                fmt(pot.curvature(th)),
                fmt(oc.curvature * mean_sq),
                fmt(oc.dipole),
            ])?;
        }
        w.flush()?;
        files.push(path.display().to_string());

        let path = dir.join(format!("{base}_stationary.csv"));
        let header: Vec<String> = ["theta", "theta_pi", "V", "n_e", "order", "kind", "delay_order", "U_curvature"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut w = CsvWriter::create(&path, &hash, &header)?;
        for p in pot.stationary_points(lo, hi) {
            let st = OneBodyState::homogeneous(level, axis, &pulse_single_atom(&psi, &drive, p.theta, 0.0), 1.0)?;
            let oc = potential::orthogonal_curvature(&st, &orth)?;
            let kind = serde_json::to_value(p.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            w.row(&[
                fmt(p.theta),
                fmt(p.theta / pi),
                fmt(p.value),
                fmt(pot.excited_fraction(p.theta)),
                p.order.to_string(),
                kind,
                p.order.saturating_sub(2).to_string(),
                fmt(oc.curvature * mean_sq),
            ])?;
        }
        w.flush()?;
        files.push(path.display().to_string());
        records.push(CellRecord {
            index: i,
            tag,
            status: "ok".into(),
            files: vec![],
            warnings: vec![],
        });
    }
    if cfg.potential.dark_search {
        let report = potential::find_mf_dark_two_pol(&DarkSearch {
            channels: [drive.clone(), orth],
            excited_fraction: cfg.potential.excited_fraction,
            support: vec![],
            starts: cfg.potential.starts,
            seed: cfg.twa.seed,
        })?;
        let path = dir.join(format!("{}_dark_states.json", cfg.output.prefix));
        let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        files.push(path.display().to_string());
    }
    let m = manifest(cfg, &hash, "potential", start, files, records)?;
    m.write(manifest_path(cfg, &dir, "potential"))?;
    Ok(m)
}

/// Validation plus a dry resource check of exact runs.
pub fn check(cfg: &ScenarioConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.method == Method::Ed {
        for cell in cfg.cells() {
            let psi = pulsed_state(cfg, &cell)?;
            ed_basis(&cfg.generator(&cell), ed_seeds(cfg, cell.atoms, &psi)?, cell.atoms, &cfg.limits())?;
        }
    }
    Ok(())
}
