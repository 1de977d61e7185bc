//! Config-driven runs behind the command-line front end.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Comparison, Config, GeneratorForm, MethodConfig};
use crate::diagnostics::{trace_distance, RegionClass};
use crate::error::{Error, Result};
use crate::exact::exact_record_u0;
use crate::generator::{
    convergence_monitor, fixed_point_iterate, generator_orders_direct, generator_orders_recursive, propagator_orders,
    validity_limit, GeneratorOrder,
};
use crate::kernel::{KernelBuilder, KernelOrder, Scheme};
use crate::liouville_fock::{algebra_defects, build_dot_operators, build_superfermions_with_flip, DotSystem, InvariantDefect};
use crate::model::{ModelParams, Reservoir, Sign, Spin, TimeGrid};
use crate::propagation::{solve_generator_path, solve_time_local, solve_time_nonlocal, EvolutionRecord, Method, Route};
use crate::superop::{SuperOp, DIM};

pub const ALGEBRA_TOL: f64 = 1e-12;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs the invariant suite on a generic interacting dot; `flip` corrupts one
/// superfermion for mutation testing.
pub fn algebra_check(flip: bool) -> Vec<InvariantDefect> {
    let params = ModelParams {
        epsilon: 0.7,
        u: 2.3,
        reservoirs: vec![Reservoir::new(0.5, 0.1, 1.0), Reservoir::new(0.5, -0.3, 0.4)],
    };
    let ops = build_dot_operators(&params);
    let sf = build_superfermions_with_flip(&ops, flip.then_some((Sign::Plus, Sign::Minus, Spin::Down)));
    algebra_defects(&params, &ops, &sf)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPointSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub diverged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    pub monitor_max: f64,
    /// first time at which the monitor reaches one
    pub monitor_limit_t: Option<f64>,
    /// renormalized series at `U = 0`, exact at second order
    pub series_terminates: bool,
    pub within_validity: bool,
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub record: EvolutionRecord,
    pub fixed_point: Option<FixedPointSummary>,
    /// present for the perturbative generator route
    pub validity: Option<ValidityReport>,
}

pub fn kernel_orders(sys: &DotSystem, grid: &TimeGrid, method: &MethodConfig) -> (SuperOp, Vec<KernelOrder>) {
    let builder = KernelBuilder::new(sys, grid, method.scheme);
    (builder.reference().clone(), builder.orders(method.order))
}

pub fn generator_orders(reference: &SuperOp, kernels: &[KernelOrder], grid: &TimeGrid, form: GeneratorForm) -> Result<GeneratorOrder> {
    match form {
        GeneratorForm::Direct => generator_orders_direct(reference, kernels, grid),
        GeneratorForm::Recursive => {
            let props = propagator_orders(reference, kernels, grid)?;
            generator_orders_recursive(reference, kernels, &props)
        }
    }
}

pub fn run_method(params: &ModelParams, grid: &TimeGrid, method: &MethodConfig) -> Result<MethodRun> {
    let sys = DotSystem::new(params);
    let (reference, kernels) = kernel_orders(&sys, grid, method);
    let rho0 = method.initial_state.density();
    let tag = Method {
        scheme: method.scheme,
        route: method.route,
        order: method.order,
    };
    let (record, fixed_point) = match method.route {
        Route::Kernel => (solve_time_nonlocal(&reference, &kernels, grid, &rho0)?, None),
        Route::Generator => {
            let gen = generator_orders(&reference, &kernels, grid, method.generator_form)?;
            (solve_time_local(&gen, &rho0)?, None)
        }
        Route::FixedPoint => {
            let out = fixed_point_iterate(&reference, &kernels, grid, None, method.max_iters, method.tol)?;
            let summary = FixedPointSummary {
                iterations: out.iterations(),
                final_residual: out.final_residual(),
                converged: out.converged,
                diverged: out.diverged,
            };
            (solve_generator_path(&out.generator, grid, tag, &rho0)?, Some(summary))
        }
    };
    let validity = match method.route {
        Route::Kernel | Route::FixedPoint => None,
        Route::Generator => {
            let props = propagator_orders(&reference, &kernels, grid)?;
            let monitor = convergence_monitor(&reference, &props);
            let limit = validity_limit(&monitor);
            let series_terminates = method.scheme == Scheme::Renormalized && params.u == 0.0;
            Some(ValidityReport {
                monitor_max: monitor.iter().copied().fold(0.0, f64::max),
                monitor_limit_t: limit.map(|k| grid.t(k)),
                series_terminates,
                within_validity: limit.is_none() || series_terminates,
            })
        }
    };
    Ok(MethodRun {
        record,
        fixed_point,
        validity,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<R: Serialize> {
    pub program: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Config,
    pub outputs: Vec<PathBuf>,
    pub results: R,
}

impl<R: Serialize> Manifest<R> {
    pub fn new(command: &'static str, config: &Config, outputs: Vec<PathBuf>, results: R) -> Self {
        Manifest {
            program: env!("CARGO_PKG_NAME"),
            version: VERSION,
            command,
            config: config.clone(),
            outputs,
            results,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Domain(format!("manifest: {e}")))?;
        fs::write(path, text + "\n").map_err(|source| io_error(path, source))
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| io_error(dir, source))?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| io_error(path, source))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|source| io_error(path, source))
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagateResults {
    pub max_trace_defect: f64,
    pub max_hermiticity_defect: f64,
    pub fixed_point: Option<FixedPointSummary>,
    pub validity: Option<ValidityReport>,
}

/// Writes the trajectory CSV and manifest; returns the manifest path.
pub fn propagate(cfg: &Config) -> Result<(PathBuf, MethodRun)> {
    let mut run = run_method(&cfg.model, &cfg.grid, &cfg.method)?;
    run.record.annotate(cfg.method.physicality_tol);
    let csv = cfg.output.path(".csv");
    let ops = build_dot_operators(&cfg.model);
    write_with(&csv, |w| run.record.write_csv(&ops, w))?;
    let results = PropagateResults {
        max_trace_defect: run.record.max_trace_defect(),
        max_hermiticity_defect: run.record.max_hermiticity_defect(),
        fixed_point: run.fixed_point,
        validity: run.validity,
    };
    let manifest = cfg.output.path(".json");
    Manifest::new("propagate", cfg, vec![csv], results).write(&manifest)?;
    Ok((manifest, run))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatmapRow {
    pub temperature: f64,
    pub t: f64,
    /// distance to the exact state, when compared
    pub trace_distance: Option<f64>,
    pub min_choi_eig: f64,
    pub region: RegionClass,
    pub trace_defect: f64,
    pub hermiticity_defect: f64,
}

pub const HEATMAP_HEADER: &str = "T_over_Gamma,t_times_Gamma,trace_distance_to_exact,min_choi_eig,region_class";

/// Heatmap samples at `t_k`, `k = stride, 2·stride, …`, for every temperature,
/// in input order.
pub fn sweep_rows(
    params: &ModelParams,
    grid: &TimeGrid,
    method: &MethodConfig,
    temperatures: &[f64],
    compare: Comparison,
    stride: usize,
) -> Result<Vec<HeatmapRow>> {
    let compare = compare == Comparison::ExactU0 && params.u == 0.0;
    let stride = stride.max(1);
    let blocks = temperatures
        .par_iter()
        .map(|&temp| {
            let p = params.with_temperature(temp);
            let run = run_method(&p, grid, method)?;
            let exact = if compare {
                Some(exact_record_u0(&p, grid, &method.initial_state.density())?)
            } else {
                None
            };
            (stride..grid.len())
                .step_by(stride)
                .map(|k| {
                    let d = run.record.step_diagnostics(k, method.physicality_tol);
                    let dist = match &exact {
                        Some(e) => Some(trace_distance(&run.record.trajectory[k], &e.trajectory[k])?),
                        None => None,
                    };
                    Ok(HeatmapRow {
                        temperature: temp,
                        t: grid.t(k),
                        trace_distance: dist,
                        min_choi_eig: d.min_choi_eig,
                        region: d.region,
                        trace_defect: d.trace_defect,
                        hermiticity_defect: d.hermiticity_defect,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

pub fn write_heatmap<W: Write>(rows: &[HeatmapRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HEATMAP_HEADER}")?;
    for r in rows {
        write!(out, "{},{},", r.temperature, r.t)?;
        if let Some(d) = r.trace_distance {
            write!(out, "{d:e}")?;
        }
        writeln!(out, ",{:e},{}", r.min_choi_eig, r.region)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResults {
    pub temperatures: Vec<f64>,
    pub rows: usize,
    pub non_physical_rows: usize,
}

pub fn sweep(cfg: &Config) -> Result<(PathBuf, Vec<HeatmapRow>)> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep: missing [sweep] section".into()))?;
    let temperatures = sweep.temperature_list()?;
    let rows = sweep_rows(&cfg.model, &cfg.grid, &cfg.method, &temperatures, sweep.compare, sweep.stride)?;
    let csv = cfg.output.path(".csv");
    write_with(&csv, |w| write_heatmap(&rows, w))?;
    let results = SweepResults {
        temperatures,
        rows: rows.len(),
        non_physical_rows: rows.iter().filter(|r| !r.region.is_physical()).count(),
    };
    let manifest = cfg.output.path(".json");
    Manifest::new("sweep", cfg, vec![csv], results).write(&manifest)?;
    Ok((manifest, rows))
}

/// Nonzero entries of a superoperator as `[row, col, re, im]`.
fn sparse_entries(op: &SuperOp) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for row in 0..DIM {
        for col in 0..DIM {
            let v = op.get(row, col);
            if v.re != 0.0 || v.im != 0.0 {
                out.push((row, col, v.re, v.im));
            }
        }
    }
    out
}

pub fn write_samples<W: Write>(samples: &[SuperOp], stride: usize, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,row,col,re,im")?;
    for k in (0..samples.len()).step_by(stride.max(1)) {
        for row in 0..DIM {
            for col in 0..DIM {
                let v = samples[k].get(row, col);
                writeln!(out, "{k},{row},{col},{:e},{:e}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct DumpPart {
    pub order: u8,
    pub file: PathBuf,
    /// time-independent part, nonzero entries `(row, col, re, im)`
    pub local: Vec<(usize, usize, f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DumpResults {
    pub reference: Vec<(usize, usize, f64, f64)>,
    pub parts: Vec<DumpPart>,
    pub max_trace_defect: f64,
}

fn dump(cfg: &Config, command: &'static str, prefix: &str, parts: Vec<(u8, SuperOp, &[SuperOp])>, reference: &SuperOp, defect: f64) -> Result<PathBuf> {
    let mut out = Vec::new();
    for (order, local, samples) in parts {
        let file = cfg.output.path(&format!("_{prefix}{order}.csv"));
        write_with(&file, |w| write_samples(samples, cfg.output.stride, w))?;
        out.push(DumpPart {
            order,
            file,
            local: sparse_entries(&local),
        });
    }
    let results = DumpResults {
        reference: sparse_entries(reference),
        parts: out,
        max_trace_defect: defect,
    };
    let files = results.parts.iter().map(|p| p.file.clone()).collect();
    let manifest = cfg.output.path(".json");
    Manifest::new(command, cfg, files, results).write(&manifest)?;
    Ok(manifest)
}

/// Writes one CSV per kernel order with its regular part.
pub fn dump_kernel(cfg: &Config) -> Result<PathBuf> {
    let sys = DotSystem::new(&cfg.model);
    let (reference, kernels) = kernel_orders(&sys, &cfg.grid, &cfg.method);
    let defect = kernels.iter().map(KernelOrder::max_trace_defect).fold(0.0, f64::max);
    let parts = kernels.iter().map(|k| (k.order, k.local.clone(), k.regular.as_slice())).collect();
    dump(cfg, "dump-kernel", "K", parts, &reference, defect)
}

/// Writes one CSV per generator order; the constant part goes to the manifest.
pub fn dump_generator(cfg: &Config) -> Result<PathBuf> {
    let sys = DotSystem::new(&cfg.model);
    let (reference, kernels) = kernel_orders(&sys, &cfg.grid, &cfg.method);
    let gen = generator_orders(&reference, &kernels, &cfg.grid, cfg.method.generator_form)?;
    let parts = gen
        .orders
        .iter()
        .enumerate()
        .map(|(i, o)| (2 * i as u8 + 2, SuperOp::zero(), o.as_slice()))
        .collect();
    dump(cfg, "dump-generator", "G", parts, &gen.constant, gen.max_trace_defect())
}
