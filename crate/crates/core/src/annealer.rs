//! Simulated annealing over POVMs.
//!
//! Each step perturbs the coordinate form of the first N elements, forms
//! every old/new combination, closes each with `E_m = I − Σ E_j`, and walks
//! the valid variants with Glauber acceptance on log DACM. The perturbation
//! scale and the temperature decay geometrically; the temperature is kicked
//! up by `reheat_factor` on every `reheat_every`-th step.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{OrthonormalBasis, ParameterPattern};
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::objective::DacmEvaluator;
use crate::povm::{complete_povm, Povm, PovmElementCoords, CONSTRUCTION_TOL};
use crate::scalar::Real;
use crate::statespace::Cluster;

/// Consecutive all-skipped steps after which a run is aborted.
pub const MAX_SKIPPED_STEPS: usize = 100;

pub const TRACE_HEADER: &str = "step,log_dacm,sigma,delta,Delta,temperature,s";

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealConfig<T> {
    pub total_steps: usize,
    pub s0: T,
    pub s_decay: T,
    pub t0: T,
    pub t_decay: T,
    pub reheat_every: usize,
    pub reheat_factor: T,
    pub max_resample: usize,
    pub rng_seed: u64,
    pub trace_every: usize,
    /// Also perturb the weights `a0`; off gives the shape-only search.
    pub perturb_a0: bool,
}

impl<T: Real> Default for AnnealConfig<T> {
    fn default() -> Self {
        AnnealConfig {
            total_steps: 20_000,
            s0: T::lit(0.2),
            s_decay: T::lit(0.9995),
            t0: T::one(),
            t_decay: T::lit(0.999),
            reheat_every: 1000,
            reheat_factor: T::lit(5.0),
            max_resample: 1000,
            rng_seed: 0,
            trace_every: 100,
            perturb_a0: true,
        }
    }
}

impl<T: Real> AnnealConfig<T> {
    pub fn check(&self) -> Result<()> {
        let unit = |x: T| x > T::zero() && x <= T::one();
        let problems = [
            (self.s0 > T::zero() && self.s0.is_finite(), "s0 must be positive"),
            (unit(self.s_decay), "s_decay must lie in (0, 1]"),
            (self.t0 > T::zero() && self.t0.is_finite(), "t0 must be positive"),
            (unit(self.t_decay), "t_decay must lie in (0, 1]"),
            (self.reheat_every >= 1, "reheat_every must be at least 1"),
            (
                self.reheat_factor >= T::one() && self.reheat_factor.is_finite(),
                "reheat_factor must be at least 1",
            ),
            (self.max_resample >= 1, "max_resample must be at least 1"),
            (self.trace_every >= 1, "trace_every must be at least 1"),
        ];
        match problems.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::ContractViolation((*msg).into())),
            None => Ok(()),
        }
    }

    /// Perturbation scale `s0·s_decay^t`.
    pub fn scale_at(&self, step: usize) -> T {
        self.s0 * self.s_decay.powf(T::from_count(step))
    }

    /// `t0·t_decay^t`, times `reheat_factor` when `t` is a positive multiple
    /// of `reheat_every`.
    pub fn temperature_at(&self, step: usize) -> T {
        let base = self.t0 * self.t_decay.powf(T::from_count(step));
        if step > 0 && step.is_multiple_of(self.reheat_every) {
            base * self.reheat_factor
        } else {
            base
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord<T> {
    pub step: usize,
    pub log_dacm: T,
    pub sigma: T,
    pub delta: T,
    pub big_delta: T,
    pub temperature: T,
    pub s: T,
}

/// Adds `N(0, s²)` noise to every coordinate of `a`, redrawing until
/// `I + â·σ` is positive semidefinite; with `perturb_a0` the weight gets the
/// same noise, redrawn until positive.
pub fn perturb_element<T: Real, R: Rng + ?Sized>(
    c: &PovmElementCoords<T>,
    s: T,
    max_resample: usize,
    perturb_a0: bool,
    basis: &OrthonormalBasis<T>,
    rng: &mut R,
) -> Result<PovmElementCoords<T>> {
    if s.is_nan() || s <= T::zero() {
        return Err(Error::ContractViolation("perturbation scale must be positive".into()));
    }
    let tol = T::tol(CONSTRUCTION_TOL);
    let mut a = None;
    for _ in 0..max_resample {
        let cand: Vec<T> = c.a.iter().map(|&x| x + s * T::standard_normal(rng)).collect();
        if min_eigenvalue(&basis.expand(T::one(), &cand)?)? >= -tol {
            a = Some(cand);
            break;
        }
    }
    let a = a.ok_or(Error::ResampleExhausted(max_resample))?;
    let a0 = if perturb_a0 {
        (0..max_resample)
            .map(|_| c.a0 + s * T::standard_normal(rng))
            .find(|&x| x > T::zero())
            .ok_or(Error::ResampleExhausted(max_resample))?
    } else {
        c.a0
    };
    Ok(PovmElementCoords::new(a0, a))
}

/// One closed old/new combination.
#[derive(Clone, Debug)]
pub struct Variant<T> {
    /// `choice[j]` is true when element j comes from the new list.
    pub choice: Vec<bool>,
    pub coords: Vec<PovmElementCoords<T>>,
    pub povm: Povm<T>,
}

impl<T> Variant<T> {
    pub fn is_unchanged(&self) -> bool {
        self.choice.iter().all(|&c| !c)
    }
}

/// Every choice vector in lexicographic order (old = 0, new = 1) whose
/// closure is a valid POVM. Positions where new equals old are only taken
/// from the old list, so no candidate appears twice.
pub fn enumerate_variants<T: Real>(
    old: &[PovmElementCoords<T>],
    new: &[PovmElementCoords<T>],
    basis: &OrthonormalBasis<T>,
) -> Result<Vec<Variant<T>>> {
    if old.len() != new.len() {
        return Err(Error::DimensionMismatch {
            expected: old.len(),
            found: new.len(),
        });
    }
    let n = old.len();
    let same: Vec<bool> = old.iter().zip(new).map(|(o, w)| o == w).collect();
    let old_m = old.iter().map(|c| c.to_element(basis)).collect::<Result<Vec<_>>>()?;
    let new_m = new.iter().map(|c| c.to_element(basis)).collect::<Result<Vec<_>>>()?;

    let choices: Vec<Vec<bool>> = (0..1usize << n)
        .map(|bits| (0..n).map(|j| bits >> (n - 1 - j) & 1 == 1).collect::<Vec<bool>>())
        .filter(|choice| choice.iter().zip(&same).all(|(&c, &s)| !(c && s)))
        .collect();
    let closed: Vec<Option<Variant<T>>> = choices
        .into_par_iter()
        .map(|choice| {
            let elements = (0..n)
                .map(|j| if choice[j] { new_m[j].clone() } else { old_m[j].clone() })
                .collect();
            match complete_povm(elements) {
                Ok(povm) => {
                    let coords = (0..n)
                        .map(|j| if choice[j] { new[j].clone() } else { old[j].clone() })
                        .collect();
                    Ok(Some(Variant { choice, coords, povm }))
                }
                Err(Error::ClosureNotPositive(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    Ok(closed.into_iter().flatten().collect())
}

/// `1 / (1 + exp((log_new − log_old)/T))`, evaluated without overflow.
pub fn glauber_probability<T: Real>(log_new: T, log_old: T, temperature: T) -> T {
    let x = (log_new - log_old) / temperature;
    if x >= T::zero() {
        let e = (-x).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + x.exp())
    }
}

/// Accepts with [`glauber_probability`] using one uniform draw.
pub fn glauber_accept<T: Real, R: Rng + ?Sized>(dacm_new: T, dacm_old: T, temperature: T, rng: &mut R) -> Result<bool> {
    let finite_pos = |x: T| x > T::zero() && x.is_finite();
    if !finite_pos(dacm_new) || !finite_pos(dacm_old) || !finite_pos(temperature) {
        return Err(Error::ContractViolation(format!(
            "Glauber acceptance needs positive finite inputs, got {dacm_new}, {dacm_old}, T = {temperature}"
        )));
    }
    let p = glauber_probability(dacm_new.ln(), dacm_old.ln(), temperature);
    Ok(T::unit_uniform(rng) < p)
}

/// Inputs of one annealing run.
#[derive(Clone, Copy, Debug)]
pub struct AnnealContext<'a, T> {
    pub initial: &'a Povm<T>,
    pub cluster: &'a Cluster<T>,
    pub basis: &'a OrthonormalBasis<T>,
    pub pattern: &'a ParameterPattern<T>,
}

#[derive(Clone, Debug)]
pub struct AnnealOutcome<T> {
    pub best: Povm<T>,
    pub best_dacm: T,
    pub final_povm: Povm<T>,
    pub final_dacm: T,
    pub trace: Vec<TraceRecord<T>>,
    /// Best-so-far log DACM at each trace record.
    pub best_log_dacm: Vec<T>,
    /// Variants dropped because their design was singular or their
    /// covariance degenerate.
    pub skipped_variants: usize,
    pub exhausted_resamples: usize,
}

fn record<T: Real>(step: usize, povm: &Povm<T>, dacm: T, temperature: T, s: T) -> Result<TraceRecord<T>> {
    let m = povm.metrics()?;
    Ok(TraceRecord {
        step,
        log_dacm: dacm.ln(),
        sigma: m.sigma,
        delta: m.delta,
        big_delta: m.big_delta,
        temperature,
        s,
    })
}

pub fn anneal<T: Real>(config: &AnnealConfig<T>, ctx: AnnealContext<'_, T>) -> Result<AnnealOutcome<T>> {
    config.check()?;
    let big_n = ctx.pattern.unknown_count();
    if ctx.cluster.is_empty() {
        return Err(Error::ContractViolation("annealing needs a nonempty cluster".into()));
    }
    if ctx.initial.len() != big_n + 1 {
        return Err(Error::ContractViolation(format!(
            "initial POVM has {} elements, expected {}",
            ctx.initial.len(),
            big_n + 1
        )));
    }
    let evaluator = DacmEvaluator::new(ctx.cluster, ctx.pattern.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    // Re-close so that the held POVM is exactly the closure of its coordinates.
    let mut coords = ctx.initial.coords(ctx.basis, big_n)?;
    let mut current = complete_povm(coords.iter().map(|c| c.to_element(ctx.basis)).collect::<Result<_>>()?)?;
    let mut current_dacm = evaluator.evaluate_coords(&coords)?;
    let mut best = current.clone();
    let mut best_dacm = current_dacm;

    let mut trace = Vec::new();
    let mut best_log = Vec::new();
    let mut skipped_variants = 0;
    let mut exhausted_resamples = 0;
    let mut idle_steps = 0;

    for step in 1..=config.total_steps {
        let s = config.scale_at(step);
        let temperature = config.temperature_at(step);

        let mut proposal = Vec::with_capacity(big_n);
        for c in &coords {
            match perturb_element(c, s, config.max_resample, config.perturb_a0, ctx.basis, &mut rng) {
                Ok(p) => proposal.push(p),
                Err(Error::ResampleExhausted(_)) => {
                    exhausted_resamples += 1;
                    proposal.push(c.clone());
                }
                Err(e) => return Err(e),
            }
        }

        let variants: Vec<Variant<T>> = enumerate_variants(&coords, &proposal, ctx.basis)?
            .into_iter()
            .filter(|v| !v.is_unchanged())
            .collect();
        let scores: Vec<Option<T>> = variants
            .par_iter()
            .map(|v| match evaluator.evaluate_coords(&v.coords) {
                Ok(d) => Ok(Some(d)),
                Err(Error::SingularDesign(_) | Error::NonPositiveObjective(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;

        let skipped = scores.iter().filter(|s| s.is_none()).count();
        skipped_variants += skipped;
        if !variants.is_empty() && skipped == variants.len() {
            idle_steps += 1;
            if idle_steps >= MAX_SKIPPED_STEPS {
                return Err(Error::AnnealAborted(step));
            }
        } else {
            idle_steps = 0;
        }

        for (v, score) in variants.into_iter().zip(scores) {
            let Some(d) = score else { continue };
            if glauber_accept(d, current_dacm, temperature, &mut rng)? {
                if d < best_dacm {
                    best = v.povm.clone();
                    best_dacm = d;
                }
                coords = v.coords;
                current = v.povm;
                current_dacm = d;
            }
        }

        if step == 1 || step % config.trace_every == 0 || step == config.total_steps {
            trace.push(record(step, &current, current_dacm, temperature, s)?);
            best_log.push(best_dacm.ln());
        }
    }

    Ok(AnnealOutcome {
        best,
        best_dacm,
        final_povm: current,
        final_dacm: current_dacm,
        trace,
        best_log_dacm: best_log,
        skipped_variants,
        exhausted_resamples,
    })
}

/// Generator for starting points of restart `seed`. It uses a different
/// ChaCha stream than the search itself, so a run seeded with the same
/// number draws independent numbers for its initial state and its moves.
pub fn restart_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// A POVM with `m` elements near `I/m`: the first `m − 1` get weight `1/m`
/// and a random direction of norm `radius·r`, where r is the pure-state
/// shape radius; the last closes the sum. The radius halves until the
/// closure is positive.
pub fn random_interior_povm<T: Real, R: Rng + ?Sized>(
    basis: &OrthonormalBasis<T>,
    m: usize,
    radius: T,
    rng: &mut R,
) -> Result<Povm<T>> {
    if m < 2 {
        return Err(Error::ContractViolation("a random POVM needs at least two elements".into()));
    }
    let len = basis.len();
    let n = basis.dim();
    // I + a·σ stays PSD for |a| ≤ √(n/(n−1)) in any traceless direction
    let shape_radius = (T::from_count(n) / T::from_count(n - 1)).sqrt();
    let weight = T::one() / T::from_count(m);
    let mut r = radius;
    for _ in 0..60 {
        let first = (0..m - 1)
            .map(|_| {
                let dir: Vec<T> = (0..len).map(|_| T::standard_normal(rng)).collect();
                let norm = dir.iter().map(|&x| x * x).sum::<T>().sqrt();
                let a = dir.iter().map(|&x| x / norm * r * shape_radius).collect();
                PovmElementCoords::new(weight, a).to_element(basis)
            })
            .collect::<Result<Vec<_>>>()?;
        match complete_povm(first) {
            Ok(p) => return Ok(p),
            Err(Error::ClosureNotPositive(_)) => r *= T::lit(0.5),
            Err(e) => return Err(e),
        }
    }
    Err(Error::ResampleExhausted(60))
}

pub fn write_trace_csv<T: Real>(trace: &[TraceRecord<T>]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step, r.log_dacm, r.sigma, r.delta, r.big_delta, r.temperature, r.s
        )
        .expect("write to String");
    }
    out
}

pub fn parse_trace_csv<T: Real>(text: &str) -> Result<Vec<TraceRecord<T>>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{TRACE_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields, found {}", f.len())));
        }
        let step = f[0].parse().map_err(|_| bad(format!("bad step `{}`", f[0])))?;
        let mut v = [T::zero(); 6];
        for (slot, s) in v.iter_mut().zip(&f[1..]) {
            *slot = s.parse().map_err(|_| bad(format!("bad number `{s}`")))?;
        }
        out.push(TraceRecord {
            step,
            log_dacm: v[0],
            sigma: v[1],
            delta: v[2],
            big_delta: v[3],
            temperature: v[4],
            s: v[5],
        });
    }
    Ok(out)
}
