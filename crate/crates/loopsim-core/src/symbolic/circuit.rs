//! Symbolic propagation of quadratures through measurement-based circuits.
//!
//! Each live mode carries a pair of [`QuadExpr`]s for (x, p) written in the
//! initial symbols. Beam splitters share one radical pair (s_R, s_T); a
//! homodyne step records the measured combination, solves it for one initial
//! symbol, and eliminates that symbol from every surviving mode, which is
//! exactly the measure-and-substitute bookkeeping used to derive feedforward
//! identities.

use alloc::format;
use alloc::vec::Vec;
use num_rational::BigRational;

use super::expr::{QuadExpr, Var};
use crate::{Error, Result};

/// One step of a symbolic circuit.
#[derive(Debug, Clone)]
pub enum CircuitStep {
    /// Two-mode coupler; `a` keeps the retained port, `b` the tap port:
    /// `a' = s_R a - s_T b`, `b' = s_T a + s_R b`.
    BeamSplit { a: usize, b: usize },
    /// Phase-space rotation by `quarter_turns * 90` degrees.
    PhaseShift { mode: usize, quarter_turns: i32 },
    /// Homodyne of `coef_x * x + coef_p * p` on one mode. The result is
    /// named `outcome`; the relation is solved for the initial symbol
    /// `solve_for`, which is substituted away. The mode is consumed.
    Measure {
        mode: usize,
        coef_x: QuadExpr,
        coef_p: QuadExpr,
        outcome: Var,
        solve_for: Var,
    },
    /// Classical feedforward displacement on one mode.
    Displace {
        mode: usize,
        dx: QuadExpr,
        dp: QuadExpr,
    },
}

/// Measured combination, in initial symbols, for post-hoc back-substitution
/// of outcome symbols.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub outcome: Var,
    pub expression: QuadExpr,
}

/// Result of propagating a circuit: surviving modes and what was measured.
#[derive(Debug, Clone)]
pub struct Propagation {
    modes: Vec<Option<(QuadExpr, QuadExpr)>>,
    pub measurements: Vec<MeasurementRecord>,
}

impl Propagation {
    pub fn mode(&self, index: usize) -> Result<&(QuadExpr, QuadExpr)> {
        self.modes
            .get(index)
            .and_then(|m| m.as_ref())
            .ok_or_else(|| Error::BadModeIndex(format!("mode {index} absent or consumed")))
    }

    /// Replaces every remaining outcome symbol by its measured expression.
    pub fn back_substitute(&self, expr: &QuadExpr) -> Result<QuadExpr> {
        let mut out = expr.clone();
        for rec in self.measurements.iter().rev() {
            out = out.substitute(rec.outcome, &rec.expression)?;
        }
        Ok(out)
    }
}

/// Propagates `steps` over modes initialized to the given (x, p) symbol
/// pairs.
pub fn propagate(initial: &[(Var, Var)], steps: &[CircuitStep]) -> Result<Propagation> {
    let mut modes: Vec<Option<(QuadExpr, QuadExpr)>> = initial
        .iter()
        .map(|&(x, p)| Some((QuadExpr::var(x), QuadExpr::var(p))))
        .collect();
    let mut measurements: Vec<MeasurementRecord> = Vec::new();

    let live = |modes: &Vec<Option<(QuadExpr, QuadExpr)>>, i: usize| -> Result<(QuadExpr, QuadExpr)> {
        modes
            .get(i)
            .and_then(|m| m.clone())
            .ok_or_else(|| Error::BadModeIndex(format!("mode {i} absent or consumed")))
    };

    for step in steps {
        match step {
            CircuitStep::BeamSplit { a, b } => {
                if a == b {
                    return Err(Error::BadModeIndex(format!("beam splitter on mode {a} twice")));
                }
                let (xa, pa) = live(&modes, *a)?;
                let (xb, pb) = live(&modes, *b)?;
                let sr = QuadExpr::var(Var::SqrtR);
                let st = QuadExpr::var(Var::SqrtT);
                let xa2 = sr.mul(&xa).sub(&st.mul(&xb));
                let pa2 = sr.mul(&pa).sub(&st.mul(&pb));
                let xb2 = st.mul(&xa).add(&sr.mul(&xb));
                let pb2 = st.mul(&pa).add(&sr.mul(&pb));
                modes[*a] = Some((xa2, pa2));
                modes[*b] = Some((xb2, pb2));
            }
            CircuitStep::PhaseShift {
                mode,
                quarter_turns,
            } => {
                let (x, p) = live(&modes, *mode)?;
                modes[*mode] = Some(match quarter_turns.rem_euclid(4) {
                    0 => (x, p),
                    1 => (p.neg(), x),
                    2 => (x.neg(), p.neg()),
                    _ => (p, x.neg()),
                });
            }
            CircuitStep::Measure {
                mode,
                coef_x,
                coef_p,
                outcome,
                solve_for,
            } => {
                let (x, p) = live(&modes, *mode)?;
                let measured = coef_x.mul(&x).add(&coef_p.mul(&p));
                if measurements.iter().any(|r| r.outcome == *outcome) {
                    return Err(Error::SymbolicStructure(format!(
                        "outcome symbol {} reused",
                        outcome.name()
                    )));
                }
                // measured = c * solve_for + rest, with c a unit monomial
                let c = measured.linear_coefficient(*solve_for);
                if c.is_zero() {
                    return Err(Error::NotSolvable(format!(
                        "measured combination has no linear {} part",
                        solve_for.name()
                    )));
                }
                if measured.max_degree(*solve_for) > 1 {
                    return Err(Error::NotSolvable(format!(
                        "measured combination is nonlinear in {}",
                        solve_for.name()
                    )));
                }
                let rest = measured.sub(&c.mul(&QuadExpr::var(*solve_for)));
                let solved = QuadExpr::var(*outcome).sub(&rest).div_unit(&c)?;
                measurements.push(MeasurementRecord {
                    outcome: *outcome,
                    expression: measured,
                });
                modes[*mode] = None;
                for slot in modes.iter_mut() {
                    if let Some((mx, mp)) = slot.take() {
                        *slot = Some((
                            mx.substitute(*solve_for, &solved)?,
                            mp.substitute(*solve_for, &solved)?,
                        ));
                    }
                }
            }
            CircuitStep::Displace { mode, dx, dp } => {
                let (x, p) = live(&modes, *mode)?;
                modes[*mode] = Some((x.add(dx), p.add(dp)));
            }
        }
    }

    Ok(Propagation {
        modes,
        measurements,
    })
}

/// Sum over mode pairs of the fundamental bracket of two linear expressions:
/// `{f, g} = sum_m (df/dx_m dg/dp_m - df/dp_m dg/dx_m)`. Valid for the
/// linear stage of a circuit; a canonical output pair must give exactly 1.
pub fn poisson_bracket(
    f: &QuadExpr,
    g: &QuadExpr,
    mode_symbols: &[(Var, Var)],
    reflectivity: Option<&BigRational>,
) -> Result<QuadExpr> {
    let mut acc = QuadExpr::zero();
    for &(x, p) in mode_symbols {
        let a = f.linear_coefficient(x);
        let b = f.linear_coefficient(p);
        let c = g.linear_coefficient(x);
        let d = g.linear_coefficient(p);
        acc = acc.add(&a.mul(&d).sub(&b.mul(&c)));
    }
    acc.reduce(reflectivity)
}
