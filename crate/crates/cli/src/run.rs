//! Mode drivers. Each writes its files under the configured output
//! directory and returns whether the run counts as a success.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use povm_lab::annealer::{anneal, random_interior_povm, restart_rng, write_trace_csv, AnnealContext};
use povm_lab::basis::{gell_mann_basis, OrthonormalBasis, ParameterPattern};
use povm_lab::catalog::{conditional_sic_report, example_qutrit_csic, oracle_suite};
use povm_lab::linalg::hermitian_eigenvalues;
use povm_lab::objective::DacmEvaluator;
use povm_lab::povm::{parse_povm_text, write_povm_text, Povm};
use povm_lab::rankone::{
    overlap_spread_and_residual, phases_to_povm, refine_with_restarts, write_phases_csv, RefineConfig,
};
use povm_lab::statespace::{cluster_states, generate_grid, select_cluster, Cluster, GridSpec};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Mode};

/// Largest acceptable `‖Σ E_i − I‖_F` for a refined rank-one POVM.
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// Tolerance of the `verify` oracle suite.
pub const VERIFY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] povm_lab::Error),
    #[error("refinement did not converge: {0}")]
    Unconverged(String),
}

impl RunError {
    /// 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use povm_lab::Error as E;
        match self {
            RunError::Config(_) | RunError::Io { .. } => 2,
            RunError::Core(
                E::Parse { .. } | E::BudgetExceeded { .. } | E::UnsupportedDimension(_) | E::EmptyClusterSelection(_),
            ) => 2,
            RunError::Core(_) | RunError::Unconverged(_) => 3,
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    debug!("wrote {}", path.display());
    Ok(path)
}

fn read_file(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

struct Setup {
    basis: OrthonormalBasis<f64>,
    pattern: ParameterPattern<f64>,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self, RunError> {
        Ok(Setup {
            basis: gell_mann_basis(cfg.dim)?,
            pattern: cfg.pattern()?,
        })
    }

    fn grid_spec(&self, cfg: &ExperimentConfig) -> GridSpec<f64> {
        let mut spec = GridSpec::with_default_bound(cfg.grid.points_per_axis, self.pattern.clone(), &self.basis);
        if let Some(b) = cfg.grid.bound {
            spec.bound = b;
        }
        spec
    }

    fn cluster(&self, cfg: &ExperimentConfig) -> Result<Cluster<f64>, RunError> {
        let states = generate_grid(&self.grid_spec(cfg), &self.basis)?;
        let clusters = cluster_states(&states, cfg.grid.cells, &self.basis)?;
        let chosen = select_cluster(&clusters, &cfg.cluster_policy(), &self.basis)?;
        info!(
            "grid: {} states in {} clusters; using key {:?} with {} members",
            states.len(),
            clusters.len(),
            chosen.key,
            chosen.len()
        );
        Ok(chosen.clone())
    }
}

/// Runs the configured mode. `Ok(false)` only for a failed `verify`.
pub fn run(cfg: &ExperimentConfig) -> Result<bool, RunError> {
    match cfg.mode {
        Mode::Verify => Ok(run_verify()?),
        Mode::Anneal => run_anneal(cfg).map(|_| true),
        Mode::Refine => run_refine(cfg).map(|_| true),
        Mode::GridInfo => run_gridinfo(cfg).map(|_| true),
    }
}

fn run_verify() -> Result<bool, RunError> {
    let checks = oracle_suite(VERIFY_TOL)?;
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag}  {:<width$}  {:.3e}", c.name, c.deviation);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    Ok(failed == 0)
}

fn run_anneal(cfg: &ExperimentConfig) -> Result<(), RunError> {
    let setup = Setup::new(cfg)?;
    let cluster = setup.cluster(cfg)?;
    let m = setup.pattern.unknown_count() + 1;
    let initial = match &cfg.initial_povm {
        Some(path) => {
            let p: Povm<f64> = parse_povm_text(&read_file(path)?)?;
            if p.len() != m || p.dim() != cfg.dim {
                return Err(ConfigError::Inconsistent(format!(
                    "{}: expected {m} elements of dimension {}, found {} of dimension {}",
                    path.display(),
                    cfg.dim,
                    p.len(),
                    p.dim()
                ))
                .into());
            }
            p
        }
        None => random_interior_povm(&setup.basis, m, cfg.init_radius, &mut restart_rng(cfg.anneal.rng_seed))?,
    };

    let outcome = anneal(
        &cfg.anneal,
        AnnealContext {
            initial: &initial,
            cluster: &cluster,
            basis: &setup.basis,
            pattern: &setup.pattern,
        },
    )?;
    info!(
        "anneal: best DACM {:.6e}, final DACM {:.6e}, {} skipped variants",
        outcome.best_dacm, outcome.final_dacm, outcome.skipped_variants
    );

    prepare_dir(&cfg.output.dir)?;
    write_file(&cfg.output.dir, &cfg.output.trace, &write_trace_csv(&outcome.trace))?;
    write_file(&cfg.output.dir, &cfg.output.povm, &write_povm_text(&outcome.best))?;

    let metrics = outcome.best.metrics()?;
    let report = conditional_sic_report(&outcome.best, &setup.pattern, &setup.basis, cfg.report_tolerance)?;
    let mut text = String::new();
    writeln!(text, "mode      anneal").unwrap();
    writeln!(text, "seed      {}", cfg.anneal.rng_seed).unwrap();
    writeln!(text, "cluster   {:?} ({} members)", cluster.key, cluster.len()).unwrap();
    writeln!(text, "best_dacm {:e}", outcome.best_dacm).unwrap();
    writeln!(text, "sigma     {:e}", metrics.sigma).unwrap();
    writeln!(text, "delta     {:e}", metrics.delta).unwrap();
    writeln!(text, "Delta     {:e}", metrics.big_delta).unwrap();
    text.push('\n');
    text.push_str(&report.to_text());
    write_file(&cfg.output.dir, &cfg.output.report, &text)?;
    print!("{text}");
    Ok(())
}

fn run_refine(cfg: &ExperimentConfig) -> Result<(), RunError> {
    let setup = Setup::new(cfg)?;
    let m = setup.pattern.unknown_count() + 1;
    let rc = RefineConfig {
        anneal: cfg.anneal.clone(),
        weight: cfg.refine.weight,
        max_evaluations: cfg.refine.max_evaluations,
    };
    let outcomes = refine_with_restarts(cfg.dim, m, &rc, cfg.refine.restarts)?;
    for (r, o) in outcomes.iter().enumerate() {
        info!(
            "restart {r}: objective {:.3e} after {} evaluations",
            o.objective, o.evaluations
        );
    }
    let best = outcomes
        .iter()
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("at least one restart");
    let (spread, residual) = overlap_spread_and_residual(&best.phi_best);
    let completeness = residual.sqrt();
    let (povm, _) = phases_to_povm(&best.phi_best);

    prepare_dir(&cfg.output.dir)?;
    write_file(&cfg.output.dir, &cfg.output.phases, &write_phases_csv(&best.phi_best))?;
    write_file(&cfg.output.dir, &cfg.output.povm, &write_povm_text(&povm))?;

    let mut text = String::new();
    writeln!(text, "mode          refine").unwrap();
    writeln!(text, "seed          {}", cfg.anneal.rng_seed).unwrap();
    writeln!(text, "restarts      {}", cfg.refine.restarts).unwrap();
    writeln!(text, "objective     {:e}", best.objective).unwrap();
    writeln!(text, "overlap_spread {:e}", spread).unwrap();
    writeln!(text, "completeness  {:e}", completeness).unwrap();
    if completeness < COMPLETENESS_TOL {
        let cluster = setup.cluster(cfg)?;
        let evaluator = DacmEvaluator::new(&cluster, setup.pattern.clone())?;
        let dacm = evaluator.evaluate(&povm, &setup.basis)?;
        writeln!(text, "dacm          {:e}", dacm).unwrap();
        if cfg.dim == 3 {
            let reference = evaluator.evaluate(&example_qutrit_csic(), &setup.basis)?;
            writeln!(text, "dacm_catalog  {:e}", reference).unwrap();
        }
        text.push('\n');
        let report = conditional_sic_report(&povm, &setup.pattern, &setup.basis, cfg.report_tolerance)?;
        text.push_str(&report.to_text());
    }
    write_file(&cfg.output.dir, &cfg.output.report, &text)?;
    print!("{text}");
    if completeness < COMPLETENESS_TOL {
        Ok(())
    } else {
        Err(RunError::Unconverged(format!(
            "completeness residual {completeness:e} above {COMPLETENESS_TOL:e}"
        )))
    }
}

fn run_gridinfo(cfg: &ExperimentConfig) -> Result<(), RunError> {
    let setup = Setup::new(cfg)?;
    let mut text = String::new();
    writeln!(text, "# index\tgenerator\tstatus").unwrap();
    for k in 1..=setup.basis.len() {
        let status = match setup.pattern.known_indices().iter().position(|&i| i == k) {
            Some(p) => format!("known = {}", setup.pattern.known_values()[p]),
            None => "unknown".to_string(),
        };
        writeln!(text, "# {k}\t{}\t{status}", setup.basis.label(k)).unwrap();
    }
    let spec = setup.grid_spec(cfg);
    let states = generate_grid(&spec, &setup.basis)?;
    let clusters = cluster_states(&states, cfg.grid.cells, &setup.basis)?;
    writeln!(
        text,
        "# {} of {} grid points are states; bound {}",
        states.len(),
        spec.candidate_count(),
        spec.bound
    )
    .unwrap();
    let mut table = String::from("key\tmembers\teigenvalues\n");
    for c in clusters.values() {
        let rho = setup.basis.bloch_to_state(&c.members[0])?;
        let ev = hermitian_eigenvalues(&rho)?;
        let key: Vec<String> = c.key.iter().map(|k| k.to_string()).collect();
        let ev: Vec<String> = ev.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(table, "{}\t{}\t{}", key.join(","), c.len(), ev.join(",")).unwrap();
    }
    prepare_dir(&cfg.output.dir)?;
    write_file(&cfg.output.dir, &cfg.output.clusters, &table)?;
    print!("{text}{table}");
    Ok(())
}
