//! Derived feedforward identities, proved exactly.
//!
//! Two workhorse derivations live here. The first propagates the
//! loop's measure-and-displace squeezer and exposes the gain that cancels
//! the measurement back-action, which pins the reflectivity-to-squeezing
//! map used by the compiler. The second verifies the three-mode cubic-gate
//! wiring: coupler, homodyne, coupler, homodyne with outcome-dependent
//! angle, then a quadratic feedforward, reproducing the target input-output
//! relations term for term.

use alloc::format;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

use super::circuit::{propagate, CircuitStep};
use super::expr::{QuadExpr, Var};
use crate::{Error, Result};

const MODE_IN: usize = 0;
const MODE_CPG: usize = 1;
const MODE_SQ: usize = 2;

/// Outcome of the symbolic squeezer derivation.
///
/// The circuit is: couple the input to a p-squeezed ancilla, read x on the
/// tap port, displace the retained port by `g * q` in x with the gain left
/// symbolic. The q coefficient of the output must vanish for the map to be
/// deterministic; solving it yields `g = s_T/s_R` and the output pair
/// `x -> x/s_R`, `p -> s_R p` (plus the ancilla noise term on p).
#[derive(Debug, Clone)]
pub struct SqueezerLaw {
    /// Output x with the gain still symbolic.
    pub x_out_open: QuadExpr,
    /// Coefficient of the outcome symbol in `x_out_open`; zero iff the gain
    /// takes the derived value.
    pub outcome_coefficient: QuadExpr,
    /// The unique back-action-cancelling gain, `s_T / s_R`.
    pub required_gain: QuadExpr,
    /// Output x at the required gain: `x_in / s_R`.
    pub x_out: QuadExpr,
    /// Output p (gain-independent): `s_R p_in - s_T p_sq`.
    pub p_out: QuadExpr,
}

/// Propagates the measurement-induced squeezer with a symbolic gain and
/// solves for the value that removes the outcome dependence.
pub fn derive_squeezer_law() -> Result<SqueezerLaw> {
    let steps = [
        CircuitStep::BeamSplit { a: 0, b: 1 },
        CircuitStep::Measure {
            mode: 1,
            coef_x: QuadExpr::one(),
            coef_p: QuadExpr::zero(),
            outcome: Var::Q,
            solve_for: Var::XSq,
        },
        CircuitStep::Displace {
            mode: 0,
            dx: QuadExpr::var(Var::Gain).mul(&QuadExpr::var(Var::Q)),
            dp: QuadExpr::zero(),
        },
    ];
    let prop = propagate(&[(Var::XIn, Var::PIn), (Var::XSq, Var::PSq)], &steps)?;
    let (x_open, p_out) = prop.mode(0)?.clone();

    let outcome_coefficient = x_open.linear_coefficient(Var::Q);
    // coefficient is g - s_T/s_R; the root in g is s_T/s_R
    let gain_part = outcome_coefficient.linear_coefficient(Var::Gain);
    if !gain_part.equivalent(&QuadExpr::one(), None)? {
        return Err(Error::SymbolicStructure(format!(
            "unexpected gain dependence: {}",
            outcome_coefficient.render()
        )));
    }
    let required_gain = outcome_coefficient
        .substitute(Var::Gain, &QuadExpr::zero())?
        .neg();
    let x_out = x_open.substitute(Var::Gain, &required_gain)?;
    if !x_out.linear_coefficient(Var::Q).is_zero_identity(None)? {
        return Err(Error::SymbolicStructure(
            "derived gain fails to cancel the outcome term".into(),
        ));
    }
    Ok(SqueezerLaw {
        x_out_open: x_open,
        outcome_coefficient,
        required_gain,
        x_out,
        p_out,
    })
}

/// Exact proof record for the cubic-gate wiring.
#[derive(Debug, Clone)]
pub struct CubicProof {
    /// Cubicity used, or `None` when kept symbolic.
    pub gamma: Option<BigRational>,
    /// Coupler reflectivity used, or `None` when kept symbolic.
    pub reflectivity: Option<BigRational>,
    /// Derived output x in initial symbols (outcomes back-substituted).
    pub x_out: QuadExpr,
    /// Derived output p in initial symbols.
    pub p_out: QuadExpr,
    /// Target output x: `x_in + s_T x_sq`.
    pub target_x: QuadExpr,
    /// Target output p, including the ancilla nullifier combination and the
    /// residual coupling to the squeezed ancilla.
    pub target_p: QuadExpr,
    /// `x_out - target_x` before the zero test (unreduced).
    pub residual_x: QuadExpr,
    /// `p_out - target_p` before the zero test (unreduced).
    pub residual_p: QuadExpr,
    /// Both residuals vanish identically.
    pub passed: bool,
}

fn gamma_expr(gamma: Option<&BigRational>) -> QuadExpr {
    match gamma {
        Some(g) => QuadExpr::constant(g.clone()),
        None => QuadExpr::var(Var::Gamma),
    }
}

/// Builds and propagates the cubic-gate circuit, then checks the derived
/// input-output relations against the target forms. `gamma` and
/// `reflectivity` may each be pinned to a rational or left symbolic; the
/// radical relations are applied exactly in either case.
pub fn verify_cubic_identity(
    gamma: Option<&BigRational>,
    reflectivity: Option<&BigRational>,
) -> Result<CubicProof> {
    if let Some(r) = reflectivity {
        if r <= &BigRational::zero() || r >= &BigRational::one() {
            return Err(Error::BadParameter(format!(
                "reflectivity {r} outside (0, 1)"
            )));
        }
    }
    let g = gamma_expr(gamma);
    let three_g = g.scale(&BigRational::from_integer(BigInt::from(3)));
    let six_g = g.scale(&BigRational::from_integer(BigInt::from(6)));

    // Second homodyne reads p + 2*mu*x with mu = 3 gamma (R/T^(3/2)) q.
    let mu2 = six_g.mul(&QuadExpr::term(
        BigRational::one(),
        &[(Var::SqrtR, 2), (Var::SqrtT, -3), (Var::Q, 1)],
    ));
    // Feedforward gains: g1 = s_T on x; g2 = s_T/s_R and g3 = 3 gamma (T-R)/T
    // on p, the latter multiplying the squared first outcome.
    let g1 = QuadExpr::var(Var::SqrtT);
    let g2 = QuadExpr::term(BigRational::one(), &[(Var::SqrtT, 1), (Var::SqrtR, -1)]);
    let g3 = three_g.mul(
        &QuadExpr::one().sub(&QuadExpr::term(
            BigRational::one(),
            &[(Var::SqrtR, 2), (Var::SqrtT, -2)],
        )),
    );

    let steps = [
        // half-turn lock phases on both ancillas
        CircuitStep::PhaseShift {
            mode: MODE_CPG,
            quarter_turns: 2,
        },
        CircuitStep::PhaseShift {
            mode: MODE_SQ,
            quarter_turns: 2,
        },
        CircuitStep::BeamSplit {
            a: MODE_IN,
            b: MODE_CPG,
        },
        CircuitStep::Measure {
            mode: MODE_CPG,
            coef_x: QuadExpr::one(),
            coef_p: QuadExpr::zero(),
            outcome: Var::Q,
            solve_for: Var::XCpg,
        },
        CircuitStep::BeamSplit {
            a: MODE_IN,
            b: MODE_SQ,
        },
        CircuitStep::Measure {
            mode: MODE_SQ,
            coef_x: mu2,
            coef_p: QuadExpr::one(),
            outcome: Var::Y,
            solve_for: Var::PSq,
        },
        CircuitStep::Displace {
            mode: MODE_IN,
            dx: g1.mul(&QuadExpr::var(Var::Q)),
            dp: g2
                .mul(&QuadExpr::var(Var::Y))
                .add(&g3.mul(&QuadExpr::term(BigRational::one(), &[(Var::Q, 2)]))),
        },
    ];
    let prop = propagate(
        &[
            (Var::XIn, Var::PIn),
            (Var::XCpg, Var::PCpg),
            (Var::XSq, Var::PSq),
        ],
        &steps,
    )?;
    let (x_raw, p_raw) = prop.mode(MODE_IN)?;
    let x_out = prop.back_substitute(x_raw)?;
    let p_out = prop.back_substitute(p_raw)?;

    // Targets, written in the same radical symbols.
    let target_x = QuadExpr::var(Var::XIn).add(&g1.mul(&QuadExpr::var(Var::XSq)));
    let target_p = QuadExpr::var(Var::PIn)
        .add(&three_g.mul(&QuadExpr::term(BigRational::one(), &[(Var::XIn, 2)])))
        .add(&QuadExpr::term(
            BigRational::one(),
            &[(Var::PCpg, 1), (Var::SqrtT, 1), (Var::SqrtR, -1)],
        ))
        .sub(&three_g.mul(&QuadExpr::term(
            BigRational::one(),
            &[(Var::XCpg, 2), (Var::SqrtR, 2), (Var::SqrtT, -2)],
        )))
        .sub(&six_g.mul(
            &QuadExpr::term(
                BigRational::one(),
                &[(Var::XIn, 1), (Var::SqrtR, 2), (Var::SqrtT, -1)],
            )
            .sub(&QuadExpr::term(
                BigRational::one(),
                &[(Var::XCpg, 1), (Var::SqrtR, 3), (Var::SqrtT, -2)],
            ))
            .mul(&QuadExpr::var(Var::XSq)),
        ));

    let residual_x = x_out.sub(&target_x);
    let residual_p = p_out.sub(&target_p);
    let passed = residual_x.is_zero_identity(reflectivity)?
        && residual_p.is_zero_identity(reflectivity)?;
    Ok(CubicProof {
        gamma: gamma.cloned(),
        reflectivity: reflectivity.cloned(),
        x_out,
        p_out,
        target_x,
        target_p,
        residual_x,
        residual_p,
        passed,
    })
}

/// Result of substituting the ancilla nullifier and silencing the squeezed
/// ancilla in the derived relations.
#[derive(Debug, Clone)]
pub struct IdealLimitProof {
    /// `x_out - x_in` after the substitutions (must vanish).
    pub x_residual: QuadExpr,
    /// `p_out - (p_in + 3 gamma x_in^2)` after the substitutions.
    pub p_residual: QuadExpr,
    /// Ancilla cubicity that closes the identity: `gamma (R/T)^(3/2)`.
    pub gamma_anc: QuadExpr,
    pub passed: bool,
}

/// Checks that with the ancilla nullifier `p_cpg = 3 gamma_anc x_cpg^2`,
/// the matched ancilla cubicity, and the squeezed ancilla taken to the
/// zero-noise limit, the wiring reduces to the pure cubic phase map.
pub fn ideal_limit_check() -> Result<IdealLimitProof> {
    let proof = verify_cubic_identity(None, None)?;
    let gamma_anc = QuadExpr::term(
        BigRational::one(),
        &[(Var::Gamma, 1), (Var::SqrtR, 3), (Var::SqrtT, -3)],
    );
    let nullifier = QuadExpr::term(
        BigRational::from_integer(BigInt::from(3)),
        &[(Var::GammaAnc, 1), (Var::XCpg, 2)],
    );
    let subst = |e: &QuadExpr| -> Result<QuadExpr> {
        e.substitute(Var::PCpg, &nullifier)?
            .substitute(Var::GammaAnc, &gamma_anc)?
            .substitute(Var::XSq, &QuadExpr::zero())
    };
    let x_lim = subst(&proof.x_out)?;
    let p_lim = subst(&proof.p_out)?;
    let x_residual = x_lim.sub(&QuadExpr::var(Var::XIn));
    let p_residual = p_lim.sub(&QuadExpr::var(Var::PIn)).sub(&QuadExpr::term(
        BigRational::from_integer(BigInt::from(3)),
        &[(Var::Gamma, 1), (Var::XIn, 2)],
    ));
    let passed =
        x_residual.is_zero_identity(None)? && p_residual.is_zero_identity(None)?;
    Ok(IdealLimitProof {
        x_residual,
        p_residual,
        gamma_anc,
        passed,
    })
}

/// Reflectivity solving `gamma_anc = gamma (R/T)^(3/2)` for the coupler.
#[derive(Debug, Clone)]
pub struct NullifierSolution {
    pub reflectivity: f64,
    /// Exact value when the cubicity ratio is a perfect rational cube.
    pub exact: Option<BigRational>,
}

fn perfect_cube_root(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let root = n.cbrt();
    if &(&root * &root * &root) == n {
        Some(root)
    } else {
        None
    }
}

/// Inverts the nullifier matching condition: given the gate cubicity and
/// the available ancilla cubicity, find the coupler reflectivity. With
/// `c = (gamma_anc/gamma)^(2/3)` the answer is `R = c/(1 + c)`; the result
/// is exact when the ratio is a perfect cube of a rational.
pub fn nullifier_solve(
    gamma_gate: &BigRational,
    gamma_anc: &BigRational,
) -> Result<NullifierSolution> {
    if gamma_gate.is_zero() {
        return Err(Error::BadParameter("gate cubicity must be nonzero".into()));
    }
    if gamma_anc.is_zero() {
        return Err(Error::BadParameter(
            "ancilla cubicity must be nonzero".into(),
        ));
    }
    let ratio = gamma_anc / gamma_gate;
    if ratio.is_negative() {
        return Err(Error::NotSolvable(
            "ancilla cubicity must share the gate sign".into(),
        ));
    }
    let exact = match (
        perfect_cube_root(ratio.numer()),
        perfect_cube_root(ratio.denom()),
    ) {
        (Some(a), Some(b)) => {
            let c = BigRational::new(&a * &a, &b * &b);
            Some(&c / (BigRational::one() + &c))
        }
        _ => None,
    };
    let reflectivity = match &exact {
        Some(r) => r
            .to_f64()
            .ok_or(Error::NonFinite("reflectivity conversion"))?,
        None => {
            let rf = ratio.to_f64().ok_or(Error::NonFinite("cubicity ratio"))?;
            let c = Float::powf(rf, 2.0 / 3.0);
            c / (1.0 + c)
        }
    };
    Ok(NullifierSolution {
        reflectivity,
        exact,
    })
}
