//! Named experiments and single-shot estimators.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dclab::dcgauge::{
    control_check, control_value_iteration, dc_lower_bound, embedded_dc_chain, umd_lower_bound, ConstantEstimate,
    ControlGridSpec, ControlStatus, SearchConfig, SignMode,
};
use dclab::factorize::{gamma2_l1_linf, min_dominating_form, DominationConfig, DominationObjective, Gamma2Config};
use dclab::io::{matrix_to_string, write_witness, Witness};
use dclab::quadform::{counterexample_form, duality_form, NormedSpace, QuadraticForm, SymOperator, Variant};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{fmt_p, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::report::ResultRow;

/// Rows in deterministic `(p, dim)` order plus the expectations that failed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub violations: Vec<CliError>,
}

fn search_config(cfg: &ExperimentConfig) -> SearchConfig {
    SearchConfig { restarts: cfg.restarts, steps: cfg.steps, seed: cfg.seed, warm_start: None }
}

fn spectral_norm(t: &DMatrix<f64>) -> f64 {
    t.clone().symmetric_eigen().eigenvalues.amax()
}

fn witness_path(cfg: &ExperimentConfig, p: &str, dim: usize, kind: &str) -> Option<PathBuf> {
    cfg.out.as_ref().map(|dir| dir.join(format!("{}_p{p}_m{dim}_{kind}.txt", cfg.scenario)))
}

fn save_witness(path: Option<&Path>, est: &ConstantEstimate) -> CliResult<String> {
    let Some(path) = path else { return Ok(String::new()) };
    let mut w = BufWriter::new(File::create(path)?);
    write_witness(&mut w, &Witness { martingale: est.witness.clone(), signs: est.signs.clone() })?;
    Ok(path.display().to_string())
}

fn save_text(path: Option<&Path>, text: &str) -> CliResult<String> {
    let Some(path) = path else { return Ok(String::new()) };
    std::fs::write(path, text)?;
    Ok(path.display().to_string())
}

struct RowBase<'a> {
    cfg: &'a ExperimentConfig,
    p: String,
    dim: usize,
}

impl RowBase<'_> {
    fn row(&self, kind: &str, value: f64, started: Instant, witness: String) -> ResultRow {
        ResultRow {
            scenario: self.cfg.scenario.clone(),
            p: self.p.clone(),
            dim: self.dim,
            depth: self.cfg.depth,
            kind: kind.to_string(),
            value,
            seed: self.cfg.seed,
            restarts: self.cfg.restarts,
            wall_ms: started.elapsed().as_millis(),
            witness,
        }
    }
}

/// The canonical hard form for exponent `p`: the Hadamard counterexample on
/// `ℓ₁ ⊕₁ ℓ₁` for `p = 1`, the duality pairing on `ℓ_p ⊕₁ ℓ_p*` otherwise.
pub fn hard_form(p: f64, m: usize) -> CliResult<(QuadraticForm, NormedSpace)> {
    if p == 1.0 {
        Ok(counterexample_form(m, Variant::Hadamard)?)
    } else {
        Ok(duality_form(&NormedSpace::lp(m, p)?)?)
    }
}

/// Dc lower bounds over increasing dims, each search warm-started from the
/// previous witness embedded into the larger space.
fn dc_curve(
    cfg: &ExperimentConfig,
    p: f64,
    form: impl Fn(usize) -> CliResult<(QuadraticForm, NormedSpace)>,
) -> CliResult<Vec<(ResultRow, QuadraticForm)>> {
    let mut out = Vec::with_capacity(cfg.dims.len());
    let mut prev: Option<ConstantEstimate> = None;
    for &m in &cfg.dims {
        let started = Instant::now();
        let (q, space) = form(m)?;
        let mut search = search_config(cfg);
        if let Some(prev) = &prev {
            search.warm_start =
                Some(prev.witness.map_linear(&dclab::quadform::block_embedding(prev.dim / 2, m)?)?);
        }
        let est = embedded_dc_chain(&[(q.clone(), space)], cfg.depth, &search)?.remove(0);
        let base = RowBase { cfg, p: fmt_p(p), dim: m };
        let witness = save_witness(witness_path(cfg, &base.p, m, "dc").as_deref(), &est)?;
        out.push((base.row("dc", est.value, started, witness), q));
        prev = Some(est);
    }
    Ok(out)
}

fn check_ceiling(name: &str, rows: &[ResultRow], ceiling: impl Fn(&ResultRow) -> f64, tol: f64) -> Vec<CliError> {
    rows.iter()
        .filter(|r| r.value > ceiling(r) + tol)
        .map(|r| {
            CliError::expectation(
                name,
                format!("p={} dim={} value {} exceeds ceiling {}", r.p, r.dim, r.value, ceiling(r)),
            )
        })
        .collect()
}

/// `v_{i+1} > (1 - slack) v_i` along the dims.
fn check_growth(name: &str, rows: &[ResultRow], slack: f64) -> Vec<CliError> {
    rows.windows(2)
        .filter(|w| !(w[1].value > (1.0 - slack) * w[0].value))
        .map(|w| {
            CliError::expectation(
                name,
                format!(
                    "p={}: value {} at dim {} does not exceed {} at dim {} (slack {slack})",
                    w[0].p, w[1].value, w[1].dim, w[0].value, w[0].dim
                ),
            )
        })
        .collect()
}

fn ensure_out(cfg: &ExperimentConfig) -> CliResult<()> {
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn collect(cells: Vec<CliResult<Outcome>>) -> CliResult<Outcome> {
    let mut all = Outcome::default();
    for cell in cells {
        let cell = cell?;
        all.rows.extend(cell.rows);
        all.violations.extend(cell.violations);
    }
    Ok(all)
}

/// For each `p`: dc lower bounds of the canonical hard form and the
/// minimal dominating-form ratio `value/‖T‖` across dims. Expectations:
/// for `p = 2` both stay below the Hilbert ceilings (`2‖T‖₂` and `1`), for
/// `p = 1` both grow with the dimension.
pub fn run_trichotomy(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    cfg.validate(cfg.p.contains(&1.0))?;
    ensure_out(cfg)?;
    let cells: Vec<CliResult<Outcome>> = cfg
        .p
        .par_iter()
        .map(|&p| {
            let dc = dc_curve(cfg, p, |m| hard_form(p, m))?;
            let mut dom_rows = Vec::with_capacity(dc.len());
            let mut violations = Vec::new();
            for (row, q) in &dc {
                let started = Instant::now();
                let (_, space) = hard_form(p, row.dim)?;
                let objective = DominationObjective::for_space(&space);
                let cert = min_dominating_form(q.op(), objective, &DominationConfig::default())?;
                if cert.min_margin() < -1e-9 {
                    violations.push(CliError::expectation(
                        "dominating form certificate",
                        format!("p={} dim={} margin {}", row.p, row.dim, cert.min_margin()),
                    ));
                }
                let ratio = cert.value / objective.eval(q.matrix());
                let text = format!(
                    "# objective {}\n# value {}\n# margins {} {}\n{}",
                    objective.as_str(),
                    cert.value,
                    cert.margins.0,
                    cert.margins.1,
                    matrix_to_string(cert.s.matrix())
                );
                let base = RowBase { cfg, p: row.p.clone(), dim: row.dim };
                let witness = save_text(witness_path(cfg, &base.p, row.dim, "dominate").as_deref(), &text)?;
                dom_rows.push(base.row("dominate", ratio, started, witness));
            }
            let dc_rows: Vec<ResultRow> = dc.iter().map(|(r, _)| r.clone()).collect();
            if p == 2.0 {
                let norms: Vec<f64> = dc.iter().map(|(_, q)| spectral_norm(q.matrix())).collect();
                let idx = |r: &ResultRow| cfg.dims.iter().position(|&d| d == r.dim).expect("row dim from the list");
                violations.extend(check_ceiling("p=2 dc below 2‖T‖₂", &dc_rows, |r| 2.0 * norms[idx(r)], cfg.tol));
                violations.extend(check_ceiling("p=2 dominating ratio below 1", &dom_rows, |_| 1.0, 1e-6));
            }
            if p == 1.0 {
                violations.extend(check_growth("p=1 dc increasing in dim", &dc_rows, cfg.slack));
                violations.extend(check_growth("p=1 dominating ratio increasing in dim", &dom_rows, cfg.slack));
            }
            let mut rows = dc_rows;
            rows.extend(dom_rows);
            Ok(Outcome { rows, violations })
        })
        .collect();
    collect(cells)
}

/// Dc lower bounds for the pairing `Q(x, x*) = x*(x)` on `ℓ_p^m ⊕₁ ℓ_{p*}^m`.
/// Expectations: bounded by `2·½` for `p = 2`, nondecreasing for `p = 1`.
pub fn run_duality(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    cfg.validate(false)?;
    ensure_out(cfg)?;
    let cells: Vec<CliResult<Outcome>> = cfg
        .p
        .par_iter()
        .map(|&p| {
            let dc = dc_curve(cfg, p, |m| Ok(duality_form(&NormedSpace::lp(m, p)?)?))?;
            let rows: Vec<ResultRow> = dc.into_iter().map(|(r, _)| r).collect();
            let mut violations = Vec::new();
            if p == 2.0 {
                violations.extend(check_ceiling("p=2 duality dc below 1", &rows, |_| 1.0, cfg.tol));
            }
            if p == 1.0 {
                violations.extend(check_growth("p=1 duality dc nondecreasing in dim", &rows, cfg.slack));
            }
            Ok(Outcome { rows, violations })
        })
        .collect();
    collect(cells)
}

/// A symmetric operator and its ambient space for the single-shot commands.
#[derive(Debug, Clone)]
pub struct Target {
    pub matrix: DMatrix<f64>,
    pub space: NormedSpace,
}

/// Named forms: `identity`, `ones`, `swap` (½ of the coordinate swap on `ℓ_p²`),
/// `duality`, `hadamard`, `fullsign`.
pub fn named_target(form: &str, dim: usize, p: f64) -> CliResult<Target> {
    let lp = || NormedSpace::lp(dim, p);
    let (matrix, space) = match form {
        "identity" => (DMatrix::identity(dim, dim), lp()?),
        "ones" => (DMatrix::from_element(dim, dim, 1.0), lp()?),
        "swap" => (DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]), NormedSpace::lp(2, p)?),
        "duality" => {
            let (q, s) = duality_form(&lp()?)?;
            (q.matrix().clone(), s)
        }
        "hadamard" | "fullsign" => {
            let (q, s) = counterexample_form(dim, form.parse()?)?;
            (q.matrix().clone(), s)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown form {other:?} (identity | ones | swap | duality | hadamard | fullsign)"
            )))
        }
    };
    Ok(Target { matrix, space })
}

pub fn matrix_target(path: &Path, p: f64) -> CliResult<Target> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let matrix = dclab::io::read_matrix(std::io::BufReader::new(file))?;
    let space = NormedSpace::lp(matrix.ncols(), p)?;
    Ok(Target { matrix, space })
}

fn single_base<'a>(cfg: &'a ExperimentConfig, target: &Target) -> RowBase<'a> {
    RowBase { cfg, p: fmt_p(cfg.p[0]), dim: target.matrix.ncols() }
}

pub fn estimate_dc(cfg: &ExperimentConfig, target: &Target) -> CliResult<Outcome> {
    ensure_out(cfg)?;
    let started = Instant::now();
    let q = QuadraticForm::new(SymOperator::new(target.matrix.clone())?);
    let est = dc_lower_bound(&q, &target.space, cfg.depth, &search_config(cfg))?;
    let base = single_base(cfg, target);
    let witness = save_witness(witness_path(cfg, &base.p, base.dim, "dc").as_deref(), &est)?;
    let mut violations = Vec::new();
    if est.max_evaluated > est.value + 1e-9 * (1.0 + est.value) {
        violations.push(CliError::expectation(
            "witness attains the reported maximum",
            format!("search saw {} but the witness gives {}", est.max_evaluated, est.value),
        ));
    }
    Ok(Outcome { rows: vec![base.row("dc", est.value, started, witness)], violations })
}

pub fn estimate_umd(cfg: &ExperimentConfig, target: &Target, y: &NormedSpace, mode: SignMode) -> CliResult<Outcome> {
    ensure_out(cfg)?;
    let started = Instant::now();
    let est = umd_lower_bound(&target.matrix, &target.space, y, cfg.depth, mode, &search_config(cfg))?;
    let base = single_base(cfg, target);
    let kind = est.kind.as_str();
    let witness = save_witness(witness_path(cfg, &base.p, base.dim, kind).as_deref(), &est)?;
    Ok(Outcome { rows: vec![base.row(kind, est.value, started, witness)], violations: Vec::new() })
}

pub fn gamma2(cfg: &ExperimentConfig, target: &Target, rank: Option<usize>) -> CliResult<Outcome> {
    ensure_out(cfg)?;
    let started = Instant::now();
    let gcfg = Gamma2Config { rank, restarts: cfg.restarts, seed: cfg.seed, ..Gamma2Config::default() };
    let est = gamma2_l1_linf(&target.matrix, &gcfg)?;
    let mut violations = Vec::new();
    let residual = (&est.b * &est.a - &target.matrix).amax();
    if residual > 1e-8 || est.value < est.lower_bound - 1e-12 {
        violations.push(CliError::expectation(
            "gamma2 factorization reproduces the matrix",
            format!("residual {residual:e}, value {} vs lower bound {}", est.value, est.lower_bound),
        ));
    }
    let text = format!(
        "# value {}\n# lower_bound {}\n# A\n{}# B\n{}",
        est.value,
        est.lower_bound,
        matrix_to_string(&est.a),
        matrix_to_string(&est.b)
    );
    let mut base = single_base(cfg, target);
    base.p = String::new();
    let witness = save_text(witness_path(cfg, "", base.dim, "gamma2").as_deref(), &text)?;
    Ok(Outcome { rows: vec![base.row("gamma2", est.value, started, witness)], violations })
}

pub fn dominate(cfg: &ExperimentConfig, target: &Target, objective: Option<DominationObjective>) -> CliResult<Outcome> {
    ensure_out(cfg)?;
    let started = Instant::now();
    let objective = objective.unwrap_or_else(|| DominationObjective::for_space(&target.space));
    let t = SymOperator::new(target.matrix.clone())?;
    let cert = min_dominating_form(&t, objective, &DominationConfig::default())?;
    let mut violations = Vec::new();
    if cert.min_margin() < -1e-9 {
        violations.push(CliError::expectation("dominating form certificate", format!("margin {}", cert.min_margin())));
    }
    let text = format!(
        "# objective {}\n# value {}\n# margins {} {}\n{}",
        objective.as_str(),
        cert.value,
        cert.margins.0,
        cert.margins.1,
        matrix_to_string(cert.s.matrix())
    );
    let base = single_base(cfg, target);
    let witness = save_text(witness_path(cfg, &base.p, base.dim, "dominate").as_deref(), &text)?;
    Ok(Outcome { rows: vec![base.row("dominate", cert.value, started, witness)], violations })
}

/// Scalar functions for `control-fn`, in one or two variables.
pub fn control_phi(name: &str, dim: usize) -> CliResult<fn(&[f64]) -> f64> {
    let f: fn(&[f64]) -> f64 = match name {
        "neg-square" => |x| -x.iter().map(|v| v * v).sum::<f64>(),
        "square" => |x| x.iter().map(|v| v * v).sum::<f64>(),
        "zero" => |_| 0.0,
        "cross" if dim == 2 => |x| 2.0 * x[0] * x[1],
        "cross" => return Err(CliError::Config("phi = cross needs --dim 2".into())),
        other => {
            return Err(CliError::Config(format!("unknown phi {other:?} (neg-square | square | zero | cross)")))
        }
    };
    Ok(f)
}

#[derive(Debug, Clone)]
pub struct ControlArgs {
    pub phi: String,
    pub rho_scale: f64,
    pub radius: f64,
    pub step: f64,
    pub increments: Vec<f64>,
    pub tol: f64,
    pub max_sweeps: usize,
}

/// Value iteration for a control function of `phi` under the budget
/// `rho = rho_scale·‖x‖²`. The reported value is `max ψ/ρ` over the nonzero
/// nodes, i.e. the share of the budget the fixpoint uses.
pub fn control_fn(cfg: &ExperimentConfig, dim: usize, args: &ControlArgs) -> CliResult<Outcome> {
    if !(1..=2).contains(&dim) {
        return Err(CliError::Config(format!("control grids are 1- or 2-dimensional, got {dim}")));
    }
    ensure_out(cfg)?;
    let started = Instant::now();
    let phi = control_phi(&args.phi, dim)?;
    let scale = args.rho_scale;
    let rho = move |x: &[f64]| scale * x.iter().map(|v| v * v).sum::<f64>();
    let increments: Vec<Vec<f64>> = match dim {
        1 => args.increments.iter().flat_map(|&u| [vec![u], vec![-u]]).collect(),
        _ => args
            .increments
            .iter()
            .flat_map(|&u| {
                [[u, 0.0], [0.0, u], [u, u], [u, -u]].into_iter().flat_map(|v| [v.to_vec(), vec![-v[0], -v[1]]])
            })
            .collect(),
    };
    let spec = ControlGridSpec { dims: dim, radius: args.radius, step: args.step, increments };
    let vi = control_value_iteration(&phi, &rho, &spec, args.tol, args.max_sweeps)?;
    let mut violations = Vec::new();
    match vi.status {
        ControlStatus::Converged => {
            if !control_check(&phi, &vi.grid, &vi.grid.all_pairs(), 1e-9)? {
                violations.push(CliError::expectation("fixpoint is a control function", "control check failed"));
            }
        }
        ControlStatus::MaxSweeps => violations.push(CliError::expectation(
            "value iteration converges",
            format!("{} sweeps, last change {:e}", vi.sweeps, vi.last_change),
        )),
        ControlStatus::Negative { min } => violations.push(CliError::expectation(
            "control function exists within the budget",
            format!("iterate went negative ({min:e}) after {} sweeps", vi.sweeps),
        )),
    }
    let mut share: f64 = 0.0;
    let mut text = String::from("# coords..., psi\n");
    for idx in 0..vi.grid.len() {
        let x = vi.grid.coords(idx);
        let psi = vi.grid.node_value(idx);
        let budget = rho(&x);
        if budget > 0.0 {
            share = share.max(psi / budget);
        }
        let coords: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        text.push_str(&format!("{},{psi}\n", coords.join(",")));
    }
    let base = RowBase { cfg, p: String::new(), dim };
    let witness = save_text(witness_path(cfg, "", dim, "control").as_deref(), &text)?;
    Ok(Outcome { rows: vec![base.row("control", share.max(0.0), started, witness)], violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(scenario: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(scenario);
        cfg.depth = 3;
        cfg.restarts = 2;
        cfg.steps = 60;
        cfg
    }

    #[test]
    fn swap_target_dominates_at_half() {
        let mut cfg = quick("dominate");
        cfg.p = vec![2.0];
        let t = named_target("swap", 2, 2.0).unwrap();
        let out = dominate(&cfg, &t, Some(DominationObjective::Spectral)).unwrap();
        assert!((out.rows[0].value - 0.5).abs() < 1e-4);
        assert!(out.violations.is_empty());
    }

    #[test]
    fn duality_hilbert_rows_below_ceiling() {
        let mut cfg = quick("duality");
        cfg.p = vec![2.0];
        cfg.dims = vec![1, 2];
        let out = run_duality(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.violations.is_empty());
        assert!(out.rows.iter().all(|r| r.value <= 1.0 + 1e-9));
    }

    #[test]
    fn growth_check_names_the_expectation() {
        let mut cfg = quick("x");
        cfg.dims = vec![2, 4];
        let base = RowBase { cfg: &cfg, p: "1".into(), dim: 2 };
        let t = Instant::now();
        let rows = vec![base.row("dc", 2.0, t, String::new()), RowBase { dim: 4, ..base }.row("dc", 1.5, t, String::new())];
        let v = check_growth("p=1 dc increasing in dim", &rows, 0.02);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("p=1 dc increasing in dim"));
        assert_eq!(v[0].exit_code(), 1);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        assert_eq!(named_target("circle", 2, 2.0).unwrap_err().exit_code(), 2);
        assert!(control_phi("cross", 1).is_err());
    }
}
