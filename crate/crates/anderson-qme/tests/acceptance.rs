//! Acceptance run: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use anderson_qme::config::{Comparison, GeneratorForm, InitialState, MethodConfig};
use anderson_qme::diagnostics::{trace_distance, DEFAULT_TOL};
use anderson_qme::exact::{exact_generator_u0, exact_kernel_route_u0, exact_record_u0, resonant_level_occupation};
use anderson_qme::generator::{fixed_point_iterate, generator_orders_direct, generator_orders_recursive, propagator_orders};
use anderson_qme::kernel::{KernelBuilder, Scheme};
use anderson_qme::liouville_fock::DotSystem;
use anderson_qme::propagation::{empty_dot, occupation, EvolutionRecord, Route};
use anderson_qme::runner::{algebra_check, run_method, sweep_rows, HeatmapRow, ALGEBRA_TOL};
use anderson_qme::{ModelParams, Reservoir, Spin, SuperOp, TimeGrid};

const TRACE_TOL: f64 = 1e-10;

/// Trace and Hermiticity defects of every trajectory produced along the way.
#[derive(Default)]
struct Defects {
    runs: Vec<(String, f64, f64)>,
}

impl Defects {
    fn record(&mut self, label: &str, rec: &EvolutionRecord) {
        self.runs
            .push((label.to_string(), rec.max_trace_defect(), rec.max_hermiticity_defect()));
    }

    fn rows(&mut self, label: &str, rows: &[HeatmapRow]) {
        let tr = rows.iter().map(|r| r.trace_defect).fold(0.0, f64::max);
        let he = rows.iter().map(|r| r.hermiticity_defect).fold(0.0, f64::max);
        self.runs.push((label.to_string(), tr, he));
    }
}

fn fig1(temperature: f64) -> ModelParams {
    ModelParams {
        epsilon: 2.0,
        u: 0.0,
        reservoirs: vec![Reservoir::new(0.5, 0.0, temperature), Reservoir::new(0.5, -0.2, temperature)],
    }
}

fn method(scheme: Scheme, route: Route, order: u8) -> MethodConfig {
    MethodConfig {
        scheme,
        route,
        order,
        initial_state: InitialState::Empty,
        generator_form: GeneratorForm::Direct,
        max_iters: 30,
        tol: 1e-6,
        physicality_tol: DEFAULT_TOL,
    }
}

fn max_distance(a: &EvolutionRecord, b: &EvolutionRecord) -> f64 {
    a.trajectory
        .iter()
        .zip(&b.trajectory)
        .map(|(x, y)| trace_distance(x, y).unwrap())
        .fold(0.0, f64::max)
}

fn algebra() -> (bool, String) {
    let start = Instant::now();
    let defects = algebra_check(false);
    let secs = start.elapsed().as_secs_f64();
    let worst = defects.iter().map(|d| d.max_defect).fold(0.0, f64::max);
    let covered = ["64 pairs", "8 squares", "creators", "supervacuum"]
        .iter()
        .all(|k| defects.iter().any(|d| d.name.contains(k)));
    (
        covered && worst < ALGEBRA_TOL && secs < 1.0,
        format!("{} invariants, max defect {worst:.2e} (< 1e-12), {secs:.3} s (< 1 s)", defects.len()),
    )
}

fn kernel_route_exactness(defects: &mut Defects) -> (bool, String) {
    let p = fig1(1.0);
    let grid = TimeGrid::new(0.005, 2000).unwrap();
    let start = Instant::now();
    let kernel = exact_kernel_route_u0(&p, &grid, &empty_dot()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let exact = exact_record_u0(&p, &grid, &empty_dot()).unwrap();
    defects.record("renormalized kernel K4, U=0", &kernel);
    defects.record("exact generator, U=0", &exact);
    let d = max_distance(&kernel, &exact);
    (
        d < 1e-3 && secs < 60.0,
        format!("max trace distance {d:.2e} (< 1e-3) over t <= 10, kernel route {secs:.1} s (< 60 s)"),
    )
}

fn g4_ren_sup(step: f64, count: usize) -> f64 {
    let grid = TimeGrid::new(step, count).unwrap();
    let sys = DotSystem::new(&fig1(1.0));
    let b = KernelBuilder::new(&sys, &grid, Scheme::Renormalized);
    let gen = generator_orders_direct(b.reference(), &b.orders(4), &grid).unwrap();
    gen.order(4)
        .unwrap()
        .iter()
        .map(SuperOp::norm_spectral)
        .fold(0.0, f64::max)
}

/// The residual is the O(h²) quadrature error, so it is checked on h = 0.0025
/// and the h = 0.005 value is reported for the convergence ratio.
fn fourth_order_nullity() -> (bool, String) {
    let coarse = g4_ren_sup(0.005, 2000);
    let fine = g4_ren_sup(0.0025, 4000);
    (
        fine < 1e-6,
        format!(
            "max_k ||G4_ren(t_k)||_2 = {fine:.2e} (< 1e-6) at h = 0.0025, t <= 10; {coarse:.2e} at h = 0.005 (ratio {:.2})",
            coarse / fine
        ),
    )
}

fn relative_sup(a: &[SuperOp], b: &[SuperOp]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm_max()).fold(0.0, f64::max);
    let scale = b.iter().map(SuperOp::norm_max).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn route_equivalence() -> (bool, String) {
    let mut rng = StdRng::seed_from_u64(20260415);
    let grid = TimeGrid::new(0.01, 500).unwrap();
    let (mut worst2, mut worst4) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let share: f64 = rng.gen_range(0.2..0.8);
        let temperature = rng.gen_range(0.3..3.0);
        let p = ModelParams {
            epsilon: rng.gen_range(-4.0..4.0),
            u: rng.gen_range(0.0..8.0),
            reservoirs: vec![
                Reservoir::new(share, rng.gen_range(-1.0..1.0), temperature),
                Reservoir::new(1.0 - share, rng.gen_range(-1.0..1.0), temperature),
            ],
        };
        let sys = DotSystem::new(&p);
        for scheme in [Scheme::Bare, Scheme::Renormalized] {
            let b = KernelBuilder::new(&sys, &grid, scheme);
            let ks = b.orders(4);
            let props = propagator_orders(b.reference(), &ks, &grid).unwrap();
            let rec = generator_orders_recursive(b.reference(), &ks, &props).unwrap();
            let dir = generator_orders_direct(b.reference(), &ks, &grid).unwrap();
            worst2 = worst2.max(relative_sup(rec.order(2).unwrap(), dir.order(2).unwrap()));
            worst4 = worst4.max(relative_sup(rec.order(4).unwrap(), dir.order(4).unwrap()));
        }
    }
    (
        worst2 < 1e-6 && worst4 < 1e-4,
        format!("5 random sets x 2 schemes: order 2 {worst2:.2e} (< 1e-6), order 4 {worst4:.2e} (< 1e-4)"),
    )
}

fn fixed_point(defects: &mut Defects) -> (bool, String) {
    let p = fig1(5.0);
    let grid = TimeGrid::new(0.005, 2000).unwrap();
    let sys = DotSystem::new(&p);
    let b = KernelBuilder::new(&sys, &grid, Scheme::Renormalized);
    let out = fixed_point_iterate(b.reference(), &b.orders(4), &grid, None, 30, 1e-6).unwrap();
    let exact = exact_generator_u0(&p, &grid).unwrap();
    let err = out
        .generator
        .iter()
        .enumerate()
        .map(|(k, g)| g.max_abs_diff(&exact.total(k)))
        .fold(0.0, f64::max);
    let m = method(Scheme::Renormalized, Route::FixedPoint, 4);
    defects.record("fixed point, U=0, T=5", &run_method(&p, &grid, &m).unwrap().record);
    (
        out.converged && out.iterations() <= 30 && out.final_residual() < 1e-6 && err < 1e-5,
        format!(
            "{} iterations, residual {:.2e} (< 1e-6), max deviation from exact {err:.2e} (< 1e-5)",
            out.iterations(),
            out.final_residual()
        ),
    )
}

fn cp_heatmaps(defects: &mut Defects) -> (bool, String) {
    let start = Instant::now();
    let grid = TimeGrid::new(0.01, 1000).unwrap();
    let temps: Vec<f64> = (0..25).map(|i| 0.1 * 100f64.powf(i as f64 / 24.0)).collect();
    let sweep = |scheme, route, order| {
        sweep_rows(&fig1(1.0), &grid, &method(scheme, route, order), &temps, Comparison::ExactU0, 5).unwrap()
    };
    let k2 = sweep(Scheme::Bare, Route::Kernel, 2);
    let k4 = sweep(Scheme::Bare, Route::Kernel, 4);
    let g4 = sweep(Scheme::Bare, Route::Generator, 4);
    let secs = start.elapsed().as_secs_f64();
    defects.rows("bare K2 sweep", &k2);
    defects.rows("bare K4 sweep", &k4);
    defects.rows("bare G4 sweep", &g4);
    let non_cp = |rows: &[HeatmapRow]| rows.iter().filter(|r| r.min_choi_eig < -DEFAULT_TOL).count();
    let k2_cold = k2
        .iter()
        .filter(|r| r.temperature <= 0.3 && r.min_choi_eig < -DEFAULT_TOL)
        .count();
    let g4_bad = g4.iter().filter(|r| !r.region.is_physical()).count();
    let (a2, a4) = (non_cp(&k2), non_cp(&k4));
    (
        k2.len() == 25 * 200 && k2_cold > 0 && g4_bad == 0 && a4 < a2,
        format!(
            "25 T x 200 t: K2 non-CP cells at T <= 0.3: {k2_cold} (> 0); G4 non-physical cells: {g4_bad} (= 0); \
             non-CP area K4 {a4} < K2 {a2}; {secs:.0} s (< 1800 s)"
        ),
    )
}

fn symmetry_point(defects: &mut Defects) -> (bool, String) {
    let p = ModelParams {
        epsilon: -5.0,
        u: 10.0,
        reservoirs: vec![Reservoir::new(0.5, 0.0, 1.0), Reservoir::new(0.5, 0.0, 1.0)],
    };
    let grid = TimeGrid::new(0.005, 2000).unwrap();
    let ops = DotSystem::new(&p).ops;
    let mut ok = true;
    let mut parts = Vec::new();
    for scheme in [Scheme::Bare, Scheme::Renormalized] {
        for route in [Route::Kernel, Route::Generator] {
            let rec = run_method(&p, &grid, &method(scheme, route, 4)).unwrap().record;
            defects.record(&format!("{} {} 4, symmetric point", scheme.name(), route.name()), &rec);
            let n = occupation(&rec, &ops, Spin::Up)[grid.count];
            ok &= (n - 0.5).abs() <= 0.01;
            parts.push(format!("{}/{} {n:.4}", scheme.name(), route.name()));
        }
    }
    (ok, format!("<n>(10) = {} (0.5 +- 0.01)", parts.join(", ")))
}

fn monitor(defects: &mut Defects) -> (bool, String) {
    let p = ModelParams {
        epsilon: 2.0,
        u: 10.0,
        reservoirs: vec![Reservoir::new(0.5, 0.0, 0.5), Reservoir::new(0.5, 0.0, 0.5)],
    };
    let grid = TimeGrid::new(0.005, 2000).unwrap();
    let run = run_method(&p, &grid, &method(Scheme::Renormalized, Route::Generator, 4)).unwrap();
    defects.record("renormalized generator 4, U=10, T=0.5", &run.record);
    let v = run.validity.unwrap();
    let crossed = v.monitor_limit_t.is_some_and(|t| t < 10.0);
    (
        crossed && !v.within_validity,
        format!(
            "monitor reaches 1 at t = {:?} (< 10), flagged outside validity: {}",
            v.monitor_limit_t,
            !v.within_validity
        ),
    )
}

fn trace_preservation(defects: &Defects) -> (bool, String) {
    let worst_tr = defects.runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let worst_he = defects.runs.iter().map(|r| r.2).fold(0.0, f64::max);
    let bad: Vec<&str> = defects
        .runs
        .iter()
        .filter(|r| !(r.1 < TRACE_TOL && r.2 < TRACE_TOL))
        .map(|r| r.0.as_str())
        .collect();
    (
        bad.is_empty(),
        format!(
            "{} runs: max |Tr rho - 1| {worst_tr:.2e}, max Hermiticity defect {worst_he:.2e} (< 1e-10){}",
            defects.runs.len(),
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    )
}

fn fermi_oracle(defects: &mut Defects) -> (bool, String) {
    let p = ModelParams {
        epsilon: 2.0,
        u: 0.0,
        reservoirs: vec![Reservoir::new(1.0, 0.0, 1.0)],
    };
    let grid = TimeGrid::new(0.01, 2000).unwrap();
    let rec = exact_record_u0(&p, &grid, &empty_dot()).unwrap();
    defects.record("exact generator, single lead", &rec);
    let ops = DotSystem::new(&p).ops;
    let n = occupation(&rec, &ops, Spin::Up)[grid.count];
    let oracle = resonant_level_occupation(&p, Spin::Up).unwrap();
    (
        (n - oracle).abs() < 1e-3,
        format!("<n>(20) = {n:.6}, quadrature {oracle:.6}, |diff| {:.1e} (< 1e-3)", (n - oracle).abs()),
    )
}

fn main() -> ExitCode {
    let mut defects = Defects::default();
    let mut results: Vec<(&str, (bool, String))> = vec![("algebra suite", algebra())];
    results.push(("U=0 kernel route exactness", kernel_route_exactness(&mut defects)));
    results.push(("fourth-order renormalized generator vanishes at U=0", fourth_order_nullity()));
    results.push(("direct vs recursive generator routes", route_equivalence()));
    results.push(("fixed-point convergence", fixed_point(&mut defects)));
    results.push(("CP phenomenology heatmaps", cp_heatmaps(&mut defects)));
    results.push(("symmetry-point stationarity", symmetry_point(&mut defects)));
    results.push(("convergence monitor flags the time-local result", monitor(&mut defects)));
    let fermi = fermi_oracle(&mut defects);
    results.push(("trace preservation and Hermiticity", trace_preservation(&defects)));
    results.push(("Fermi-occupation oracle", fermi));

    let mut failed = 0;
    for (i, (name, (ok, detail))) in results.iter().enumerate() {
        println!("{} [{:>2}] {name}: {detail}", if *ok { "PASS" } else { "FAIL" }, i + 1);
        failed += usize::from(!ok);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
