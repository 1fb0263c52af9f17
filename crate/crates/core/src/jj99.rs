//! Variational upper bound on the finding likelihood of the unaugmented
//! network, after Jaakkola and Jordan.
//!
//! Every positive finding's factor `1 - exp(-x)` is replaced by its conjugate
//! upper bound `exp(ξ x - f*(ξ))`, which makes the joint factorize over
//! diseases. Minimizing the bound over `ξ > 0` gives a convex problem in `ξ`;
//! it is solved in `η = ln ξ` with L-BFGS. Unobserved findings are ignored.

use std::cell::{Cell, RefCell};

use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason, TerminationStatus};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::check_findings;
use crate::model::{Bn2oNetwork, ModelError};
use crate::numeric::{log_add_exp, logit, sigmoid};
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: u64 = 1000;
const RESTARTS: usize = 5;
/// Largest line-search step in η. Some cases have their infimum only as
/// `ξ_i → 0`, and an unbounded step then runs into overflow.
const MAX_STEP: f64 = 1e3;
/// Cost and gradient evaluations allowed per optimizer iteration.
const EVALS_PER_ITER: u64 = 50;

#[derive(Debug, Error)]
pub enum Jj99Error {
    #[error("variational parameter {index} is {value}; must be positive")]
    NonPositiveXi { index: usize, value: f64 },
    #[error("expected {expected} variational parameters, found {found}")]
    XiLength { expected: usize, found: usize },
    #[error("no convergence after {} iterations (gradient norm {})", .0.iterations, .0.grad_norm)]
    NotConverged(Box<VariationalState>),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Optimized variational parameters for one case. `xi[n]` belongs to
/// `pos[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub pos: Vec<usize>,
    pub xi: Vec<f64>,
    /// `ln B(ξ)`, an upper bound on `ln P(F⁺, F⁻)`.
    pub bound: f64,
    pub log_odds: Vec<f64>,
    pub prior_log_odds: Vec<f64>,
    pub iterations: u64,
    pub grad_norm: f64,
    pub converged: bool,
}

impl VariationalState {
    /// `σ(l̂_k)`.
    pub fn marginals(&self) -> Vec<f64> {
        self.log_odds.iter().map(|&l| sigmoid(l)).collect()
    }
}

/// `f*(ξ) = (1+ξ) ln(1+ξ) - ξ ln ξ`, the conjugate of `x ↦ ln(1 - e^{-x})`.
pub fn conjugate(xi: f64) -> f64 {
    (1.0 + xi) * xi.ln_1p() - xi * xi.ln()
}

/// `d f*/dξ = ln((1+ξ)/ξ)`.
fn conjugate_deriv(xi: f64) -> f64 {
    xi.recip().ln_1p()
}

struct PosTerm {
    theta0: f64,
    parents: Vec<(usize, f64)>,
}

/// One case with everything that does not depend on `ξ` folded in.
struct Problem {
    prior_log_odds: Vec<f64>,
    ln_prior: Vec<f64>,
    ln_not_prior: Vec<f64>,
    /// `-Σ_{j∈F⁻} θ_jk`
    neg_shift: Vec<f64>,
    /// `-Σ_{j∈F⁻} θ_j0`
    neg_const: f64,
    pos: Vec<PosTerm>,
}

impl Problem {
    fn new<S: Scalar>(net: &Bn2oNetwork<S>, pos: &[usize], neg: &[usize]) -> Result<Self, ModelError> {
        check_findings(net, pos, neg)?;
        let prior: Vec<f64> = net.prior().iter().map(|p| p.as_f64()).collect();
        let mut neg_shift = vec![0.0; prior.len()];
        let mut neg_const = 0.0;
        for &j in neg {
            let f = net.finding(j);
            neg_const -= net.theta0()[j].as_f64();
            for (&k, &t) in f.parents.iter().zip(&f.theta) {
                neg_shift[k] -= t.as_f64();
            }
        }
        let pos = pos
            .iter()
            .map(|&i| {
                let f = net.finding(i);
                PosTerm {
                    theta0: net.theta0()[i].as_f64(),
                    parents: f.parents.iter().zip(&f.theta).map(|(&k, &t)| (k, t.as_f64())).collect(),
                }
            })
            .collect();
        Ok(Self {
            prior_log_odds: prior.iter().map(|&p| logit(p)).collect(),
            ln_prior: prior.iter().map(|p| p.ln()).collect(),
            ln_not_prior: prior.iter().map(|p| (-p).ln_1p()).collect(),
            neg_shift,
            neg_const,
            pos,
        })
    }

    /// `s_k = Σ_{i∈F⁺} ξ_i θ_ik - Σ_{j∈F⁻} θ_jk`
    fn shifts(&self, xi: &[f64]) -> Vec<f64> {
        let mut s = self.neg_shift.clone();
        for (term, &x) in self.pos.iter().zip(xi) {
            for &(k, t) in &term.parents {
                s[k] += x * t;
            }
        }
        s
    }

    fn value(&self, xi: &[f64]) -> f64 {
        let s = self.shifts(xi);
        let mut v = self.neg_const;
        for (term, &x) in self.pos.iter().zip(xi) {
            v += x * term.theta0 - conjugate(x);
        }
        for k in 0..s.len() {
            v += log_add_exp(self.ln_not_prior[k], self.ln_prior[k] + s[k]);
        }
        v
    }

    /// Gradient with respect to `ξ`.
    fn grad_xi(&self, xi: &[f64]) -> Vec<f64> {
        let s = self.shifts(xi);
        let r: Vec<f64> = s
            .iter()
            .zip(&self.prior_log_odds)
            .map(|(&s, &p)| sigmoid(p + s))
            .collect();
        self.pos
            .iter()
            .zip(xi)
            .map(|(term, &x)| {
                term.theta0 - conjugate_deriv(x) + term.parents.iter().map(|&(k, t)| t * r[k]).sum::<f64>()
            })
            .collect()
    }

    fn log_odds(&self, xi: &[f64]) -> Vec<f64> {
        self.shifts(xi)
            .iter()
            .zip(&self.prior_log_odds)
            .map(|(s, p)| p + s)
            .collect()
    }
}

/// The problem in `η = ln ξ`, with an evaluation budget so a misbehaving
/// line search cannot spin forever. Keeps the best point it has seen.
struct InLogSpace<'a> {
    problem: &'a Problem,
    evals: &'a Cell<u64>,
    budget: u64,
    best: &'a RefCell<(f64, Vec<f64>)>,
}

impl InLogSpace<'_> {
    fn spend(&self) -> Result<(), argmin::core::Error> {
        let n = self.evals.get() + 1;
        self.evals.set(n);
        if n > self.budget {
            return Err(argmin::core::Error::msg("evaluation budget exhausted"));
        }
        Ok(())
    }
}

impl CostFunction for InLogSpace<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, eta: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        self.spend()?;
        let xi: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let v = self.problem.value(&xi);
        let mut best = self.best.borrow_mut();
        if v < best.0 {
            *best = (v, eta.clone());
        }
        Ok(v)
    }
}

impl Gradient for InLogSpace<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, eta: &Vec<f64>) -> Result<Vec<f64>, argmin::core::Error> {
        self.spend()?;
        let xi: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        Ok(self.problem.grad_xi(&xi).iter().zip(&xi).map(|(g, x)| g * x).collect())
    }
}

fn check_xi(xi: &[f64], expected: usize) -> Result<(), Jj99Error> {
    if xi.len() != expected {
        return Err(Jj99Error::XiLength {
            expected,
            found: xi.len(),
        });
    }
    match xi.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        Some(index) => Err(Jj99Error::NonPositiveXi {
            index,
            value: xi[index],
        }),
        None => Ok(()),
    }
}

/// `ln B(ξ) ≥ ln P(F⁺, F⁻)`; `xi[n]` pairs with `pos[n]`.
pub fn bound_log<S: Scalar>(net: &Bn2oNetwork<S>, pos: &[usize], neg: &[usize], xi: &[f64]) -> Result<f64, Jj99Error> {
    check_xi(xi, pos.len())?;
    Ok(Problem::new(net, pos, neg)?.value(xi))
}

/// `l̂_k = p_k + Σ_{i∈F⁺} ξ_i θ_ik - Σ_{j∈F⁻} θ_jk`.
pub fn posterior_log_odds<S: Scalar>(
    net: &Bn2oNetwork<S>,
    pos: &[usize],
    neg: &[usize],
    xi: &[f64],
) -> Result<Vec<f64>, Jj99Error> {
    check_xi(xi, pos.len())?;
    Ok(Problem::new(net, pos, neg)?.log_odds(xi))
}

/// Minimizes the bound from `ξ = 1`. Stops when one iteration changes the
/// bound by less than `tolerance · max(1, |bound at ξ = 1|)`.
pub fn optimize<S: Scalar>(
    net: &Bn2oNetwork<S>,
    pos: &[usize],
    neg: &[usize],
    tolerance: f64,
    max_iters: u64,
) -> Result<VariationalState, Jj99Error> {
    let problem = Problem::new(net, pos, neg)?;
    let finish = |xi: Vec<f64>, iterations, grad_norm, converged| VariationalState {
        pos: pos.to_vec(),
        bound: problem.value(&xi),
        log_odds: problem.log_odds(&xi),
        prior_log_odds: problem.prior_log_odds.clone(),
        xi,
        iterations,
        grad_norm,
        converged,
    };
    if pos.is_empty() {
        return Ok(finish(vec![], 0, 0.0, true));
    }

    let scale = problem.value(&vec![1.0; pos.len()]).abs().max(1.0);
    let mut eta = vec![0.0; pos.len()];
    let mut iterations = 0;
    let mut converged = false;
    // A line search that overshoots into overflow ends the run early; restart
    // from the best point with fresh curvature memory.
    for _ in 0..RESTARTS {
        let line_search = MoreThuenteLineSearch::new()
            .with_bounds(f64::EPSILON.sqrt(), MAX_STEP)
            .map_err(|e| Jj99Error::Optimizer(e.to_string()))?;
        let solver = LBFGS::new(line_search, 10)
            .with_tolerance_cost(tolerance * scale)
            .and_then(|s| s.with_tolerance_grad(tolerance.sqrt() * scale))
            .map_err(|e| Jj99Error::Optimizer(e.to_string()))?;
        let remaining = max_iters - iterations;
        let evals = Cell::new(0);
        let xi: Vec<f64> = eta.iter().map(|e: &f64| e.exp()).collect();
        let best = RefCell::new((problem.value(&xi), eta.clone()));
        let cost = InLogSpace {
            problem: &problem,
            evals: &evals,
            budget: remaining.saturating_mul(EVALS_PER_ITER),
            best: &best,
        };
        let res = Executor::new(cost, solver)
            .configure(|state| state.param(eta.clone()).max_iters(remaining))
            .run();
        let Ok(res) = res else {
            // budget exhausted inside a line search
            eta.clone_from(&best.borrow().1);
            iterations = max_iters;
            break;
        };
        let state = res.state();
        if let Some(best) = state.get_best_param().or_else(|| state.get_param()) {
            eta.clone_from(best);
        }
        iterations += state.get_iter();
        match state.get_termination_status() {
            TerminationStatus::Terminated(TerminationReason::SolverConverged) => {
                converged = true;
                break;
            }
            TerminationStatus::Terminated(TerminationReason::SolverExit(_)) if iterations < max_iters => {}
            _ => break,
        }
    }
    let xi: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
    let grad_norm = problem
        .grad_xi(&xi)
        .iter()
        .zip(&xi)
        .map(|(g, x)| (g * x).powi(2))
        .sum::<f64>()
        .sqrt();
    let out = finish(xi, iterations, grad_norm, converged);
    if !out.bound.is_finite() {
        return Err(Jj99Error::Optimizer(format!("bound is {}", out.bound)));
    }
    if converged {
        Ok(out)
    } else {
        Err(Jj99Error::NotConverged(Box::new(out)))
    }
}
