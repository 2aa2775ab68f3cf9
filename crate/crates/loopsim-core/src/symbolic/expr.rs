//! Exact multivariate expressions for quadrature bookkeeping.
//!
//! Expressions are Laurent polynomials over the rationals in a fixed symbol
//! set: mode quadratures, measurement outcomes, gate parameters, and the two
//! radicals `s_R = sqrt(R)`, `s_T = sqrt(T)` of the beam-splitter
//! reflectivity. Radicals obey `s_R^2 + s_T^2 = 1`; with a numeric rational
//! reflectivity they fold to `s_R^2 = R`, `s_T^2 = 1 - R`. Negative exponents
//! are allowed (the loop identities divide by `s_R`), which is sound because
//! the radicals are strictly positive for reflectivities in (0, 1).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

/// Symbols available to quadrature expressions, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(usize)]
pub enum Var {
    /// Input-mode x quadrature.
    XIn,
    /// Input-mode p quadrature.
    PIn,
    /// Cubic-resource ancilla x quadrature.
    XCpg,
    /// Cubic-resource ancilla p quadrature.
    PCpg,
    /// Squeezed-ancilla x quadrature.
    XSq,
    /// Squeezed-ancilla p quadrature.
    PSq,
    /// First homodyne outcome.
    Q,
    /// Second homodyne outcome.
    Y,
    /// Target cubicity.
    Gamma,
    /// Ancilla cubicity.
    GammaAnc,
    /// Undetermined feedforward gain.
    Gain,
    /// sqrt of the beam-splitter reflectivity R.
    SqrtR,
    /// sqrt of the transmissivity T = 1 - R.
    SqrtT,
}

pub const N_VARS: usize = 13;

pub const ALL_VARS: [Var; N_VARS] = [
    Var::XIn,
    Var::PIn,
    Var::XCpg,
    Var::PCpg,
    Var::XSq,
    Var::PSq,
    Var::Q,
    Var::Y,
    Var::Gamma,
    Var::GammaAnc,
    Var::Gain,
    Var::SqrtR,
    Var::SqrtT,
];

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::XIn => "x_in",
            Var::PIn => "p_in",
            Var::XCpg => "x_cpg",
            Var::PCpg => "p_cpg",
            Var::XSq => "x_sq",
            Var::PSq => "p_sq",
            Var::Q => "q",
            Var::Y => "y",
            Var::Gamma => "gamma",
            Var::GammaAnc => "gamma_anc",
            Var::Gain => "g",
            Var::SqrtR => "s_R",
            Var::SqrtT => "s_T",
        }
    }
}

/// Exponent vector of one monomial, indexed by [`ALL_VARS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mono([i16; N_VARS]);

impl Mono {
    pub const ONE: Mono = Mono([0; N_VARS]);

    pub fn of(var: Var) -> Self {
        let mut e = [0i16; N_VARS];
        e[var as usize] = 1;
        Mono(e)
    }

    pub fn exponent(&self, var: Var) -> i16 {
        self.0[var as usize]
    }

    fn with_exponent(mut self, var: Var, e: i16) -> Self {
        self.0[var as usize] = e;
        self
    }

    fn mul(&self, other: &Mono) -> Mono {
        let mut e = self.0;
        for (lhs, rhs) in e.iter_mut().zip(other.0) {
            *lhs += rhs;
        }
        Mono(e)
    }

    fn inverse(&self) -> Mono {
        Mono(self.0.map(|p| -p))
    }
}

/// Exact rational Laurent polynomial over [`Var`] symbols. Canonical form by
/// construction: monomials sorted, like terms merged, zero coefficients
/// dropped, so canonicalization is idempotent and equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuadExpr {
    terms: BTreeMap<Mono, BigRational>,
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl QuadExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Self::constant(big(n))
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Mono::ONE, c);
        }
        Self { terms }
    }

    pub fn var(v: Var) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Mono::of(v), big(1));
        Self { terms }
    }

    /// Single term `c * prod(var^exp)`.
    pub fn term(c: BigRational, powers: &[(Var, i16)]) -> Self {
        let mut mono = Mono::ONE;
        for &(v, e) in powers {
            mono = mono.with_exponent(v, mono.exponent(v) + e);
        }
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(mono, c);
        }
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    fn insert(&mut self, mono: Mono, coeff: BigRational) {
        if coeff.is_zero() {
            return;
        }
        use alloc::collections::btree_map::Entry;
        match self.terms.entry(mono) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &coeff;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(*m, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.insert(*m, -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.insert(*m, -c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.insert(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero();
        for (m, k) in &self.terms {
            out.insert(*m, k * c);
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Division by an expression that must be a single monomial term (a unit
    /// of the Laurent ring).
    pub fn div_unit(&self, unit: &Self) -> Result<Self> {
        if unit.terms.len() != 1 {
            return Err(Error::SymbolicStructure(format!(
                "division requires a one-term divisor, got {} terms",
                unit.terms.len()
            )));
        }
        let (mono, coeff) = unit.terms.iter().next().unwrap();
        let inv_mono = mono.inverse();
        let inv_coeff = BigRational::one() / coeff.clone();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out.insert(m.mul(&inv_mono), c * &inv_coeff);
        }
        Ok(out)
    }

    /// Replaces `var` by `replacement` (exponents of `var` must be
    /// nonnegative wherever it appears).
    pub fn substitute(&self, var: Var, replacement: &Self) -> Result<Self> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            if e < 0 {
                return Err(Error::SymbolicStructure(format!(
                    "cannot substitute into negative power {}^{e}",
                    var.name()
                )));
            }
            if e == 0 {
                out.insert(*m, c.clone());
                continue;
            }
            let rest = Self {
                terms: [(m.with_exponent(var, 0), c.clone())].into_iter().collect(),
            };
            out = out.add(&rest.mul(&replacement.pow(e as u32)));
        }
        Ok(out)
    }

    /// Coefficient (an expression in the remaining symbols) of `var^1`,
    /// taken over the terms where `var` appears exactly linearly.
    pub fn linear_coefficient(&self, var: Var) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m.exponent(var) == 1 {
                out.insert(m.with_exponent(var, 0), c.clone());
            }
        }
        out
    }

    /// Largest power of `var` appearing (0 for absent).
    pub fn max_degree(&self, var: Var) -> i16 {
        self.terms
            .keys()
            .map(|m| m.exponent(var))
            .max()
            .unwrap_or(0)
    }

    /// True when every term is degree one in the given symbols jointly (a
    /// homogeneous linear combination of them).
    pub fn is_linear_in(&self, vars: &[Var]) -> bool {
        self.terms.keys().all(|m| {
            let deg: i32 = vars.iter().map(|&v| m.exponent(v) as i32).sum();
            deg == 1 && vars.iter().all(|&v| m.exponent(v) >= 0)
        })
    }

    /// Folds radical powers. With `Some(r)`: `s_R^2 -> r`, `s_T^2 -> 1 - r`
    /// numerically, leaving radical exponents in {0, 1}. With `None`
    /// (symbolic reflectivity): `s_T` powers outside {0, 1} are rewritten via
    /// `s_T^2 = 1 - s_R^2`, which requires the expression to be free of
    /// negative `s_T` powers (clear them first, see [`Self::is_zero_identity`]).
    pub fn reduce(&self, reflectivity: Option<&BigRational>) -> Result<Self> {
        match reflectivity {
            Some(r) => {
                if r <= &BigRational::zero() || r >= &BigRational::one() {
                    return Err(Error::BadParameter(format!(
                        "reflectivity {r} outside (0, 1)"
                    )));
                }
                let t = BigRational::one() - r;
                let mut out = Self::zero();
                for (m, c) in &self.terms {
                    let er = m.exponent(Var::SqrtR);
                    let et = m.exponent(Var::SqrtT);
                    let (kr, rr) = (er.div_euclid(2), er.rem_euclid(2));
                    let (kt, rt) = (et.div_euclid(2), et.rem_euclid(2));
                    let mono = m
                        .with_exponent(Var::SqrtR, rr)
                        .with_exponent(Var::SqrtT, rt);
                    let coeff = c * r.pow(kr as i32) * t.pow(kt as i32);
                    out.insert(mono, coeff);
                }
                Ok(out)
            }
            None => {
                let mut out = Self::zero();
                for (m, c) in &self.terms {
                    let et = m.exponent(Var::SqrtT);
                    if et < 0 {
                        return Err(Error::SymbolicStructure(format!(
                            "symbolic reduction cannot clear s_T^{et}"
                        )));
                    }
                    let (k, rem) = (et.div_euclid(2), et.rem_euclid(2));
                    // (1 - s_R^2)^k expanded binomially
                    let one_minus = Self::one().sub(&Self::term(big(1), &[(Var::SqrtR, 2)]));
                    let factor = one_minus.pow(k as u32);
                    let base = Self {
                        terms: [(m.with_exponent(Var::SqrtT, rem), c.clone())]
                            .into_iter()
                            .collect(),
                    };
                    out = out.add(&base.mul(&factor));
                }
                Ok(out)
            }
        }
    }

    /// Exact zero test modulo the radical relations. For numeric
    /// reflectivity the reduced form must be empty term-by-term. For
    /// symbolic reflectivity the expression is first multiplied by a power
    /// of each radical to clear negative exponents (sound: the quotient ring
    /// by `s_R^2 + s_T^2 - 1` is an integral domain and the radicals are
    /// nonzero), then reduced against `s_T^2 = 1 - s_R^2`.
    pub fn is_zero_identity(&self, reflectivity: Option<&BigRational>) -> Result<bool> {
        if self.terms.is_empty() {
            return Ok(true);
        }
        match reflectivity {
            Some(r) => Ok(self.reduce(Some(r))?.is_zero()),
            None => {
                let min_r = self
                    .terms
                    .keys()
                    .map(|m| m.exponent(Var::SqrtR))
                    .min()
                    .unwrap_or(0)
                    .min(0);
                let min_t = self
                    .terms
                    .keys()
                    .map(|m| m.exponent(Var::SqrtT))
                    .min()
                    .unwrap_or(0)
                    .min(0);
                let shift = Self::term(big(1), &[(Var::SqrtR, -min_r), (Var::SqrtT, -min_t)]);
                Ok(self.mul(&shift).reduce(None)?.is_zero())
            }
        }
    }

    /// Equality modulo the radical relations.
    pub fn equivalent(&self, other: &Self, reflectivity: Option<&BigRational>) -> Result<bool> {
        self.sub(other).is_zero_identity(reflectivity)
    }

    fn fmt_term(mono: &Mono, coeff: &BigRational, out: &mut String) {
        let mut parts: Vec<String> = Vec::new();
        let abs = coeff.abs();
        if !abs.is_one() {
            parts.push(format!("{abs}"));
        }
        for v in ALL_VARS {
            let e = mono.exponent(v);
            if e == 0 {
                continue;
            }
            // render even radical powers through R and T
            if v == Var::SqrtR || v == Var::SqrtT {
                let base = if v == Var::SqrtR { "R" } else { "T" };
                let (pairs, rem) = (e.div_euclid(2), e.rem_euclid(2));
                if rem == 1 {
                    parts.push(String::from(v.name()));
                }
                match pairs {
                    0 => {}
                    1 => parts.push(String::from(base)),
                    p => parts.push(format!("{base}^{p}")),
                }
                continue;
            }
            match e {
                1 => parts.push(String::from(v.name())),
                _ => parts.push(format!("{}^{e}", v.name())),
            }
        }
        if parts.is_empty() {
            parts.push(format!("{abs}"));
        }
        out.push_str(&parts.join("*"));
    }
}

use alloc::string::ToString;

impl fmt::Display for QuadExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut out = String::new();
        // descending monomial order leads with the earliest-listed symbols
        for (i, (mono, coeff)) in self.terms.iter().rev().enumerate() {
            if i == 0 {
                if coeff.is_negative() {
                    out.push('-');
                }
            } else {
                out.push_str(if coeff.is_negative() { " - " } else { " + " });
            }
            Self::fmt_term(mono, coeff, &mut out);
        }
        f.write_str(&out)
    }
}

/// Shorthand rational from an integer pair.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl QuadExpr {
    /// Deterministic rendering used in proof records.
    pub fn render(&self) -> String {
        self.to_string()
    }
}
