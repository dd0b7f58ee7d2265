//! How-provenance polynomials in N[X] over edge symbols.
//!
//! A [`Polynomial`] keeps its monomials in canonical order: higher degree first,
//! then by the descending-sorted factor list compared ascending. That order is
//! what the text form prints, so golden strings are stable.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::store::EdgeId;

/// Product of edge symbols with positive exponents, factors sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    factors: Vec<(EdgeId, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn symbol(e: EdgeId) -> Self {
        Self {
            factors: vec![(e, 1)],
        }
    }

    /// Builds a monomial from arbitrary `(edge, exponent)` pairs; zero exponents
    /// are dropped and repeated edges are combined.
    pub fn from_factors(factors: impl IntoIterator<Item = (EdgeId, u32)>) -> Self {
        let mut map = BTreeMap::new();
        for (e, k) in factors {
            *map.entry(e).or_insert(0) += k;
        }
        Self {
            factors: map.into_iter().filter(|&(_, k)| k > 0).collect(),
        }
    }

    pub fn factors(&self) -> &[(EdgeId, u32)] {
        &self.factors
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    /// Total degree, counting exponents.
    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|&(_, k)| k).sum()
    }

    pub fn exponent(&self, e: EdgeId) -> u32 {
        self.factors
            .binary_search_by_key(&e, |&(id, _)| id)
            .map_or(0, |i| self.factors[i].1)
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.exponent(e) > 0
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.factors.iter().map(|&(e, _)| e)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.factors, &other.factors);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial { factors: out }
    }

    fn expanded_desc(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.factors
            .iter()
            .rev()
            .flat_map(|&(e, k)| std::iter::repeat_n(e, k as usize))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .degree()
            .cmp(&self.degree())
            .then_with(|| self.expanded_desc().cmp(other.expanded_desc()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (i, &(e, k)) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{e}")?;
            if k > 1 {
                write!(f, "^{k}")?;
            }
        }
        Ok(())
    }
}

/// Sum of monomials with natural-number coefficients. The empty sum is 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, u64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_monomial(Monomial::one())
    }

    pub fn symbol(e: EdgeId) -> Self {
        Self::from_monomial(Monomial::symbol(e))
    }

    pub fn from_monomial(m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(m, 1);
        Self { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, u64)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Monomials with their coefficients, in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, u64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> u64 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    pub fn add_term(&mut self, m: Monomial, c: u64) {
        if c > 0 {
            *self.terms.entry(m).or_insert(0) += c;
        }
    }

    pub fn add_assign(&mut self, other: &Polynomial) {
        for (m, &c) in &other.terms {
            self.add_term(m.clone(), c);
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                out.add_term(a.mul(b), ca * cb);
            }
        }
        out
    }

    /// Multiplies every monomial by one more occurrence of `e`.
    pub fn mul_symbol(&self, e: EdgeId) -> Polynomial {
        let s = Monomial::symbol(e);
        Polynomial {
            terms: self.terms.iter().map(|(m, &c)| (m.mul(&s), c)).collect(),
        }
    }

    /// Value under `deleted ↦ 0`, every other symbol ↦ 1: true iff some
    /// monomial avoids the deleted edge.
    pub fn evaluate_under_deletion(&self, deleted: EdgeId) -> bool {
        self.terms.keys().any(|m| !m.contains(deleted))
    }

    /// Drops every monomial that mentions `deleted`.
    pub fn prune(&self, deleted: EdgeId) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| !m.contains(deleted))
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }

    /// In-place [`prune`](Self::prune); returns whether anything was removed.
    pub fn prune_in_place(&mut self, deleted: EdgeId) -> bool {
        let before = self.terms.len();
        self.terms.retain(|m, _| !m.contains(deleted));
        self.terms.len() != before
    }

    /// Removes the monomials mentioning `deleted` and returns them, or `None`
    /// when there were none.
    pub fn extract(&mut self, deleted: EdgeId) -> Option<Polynomial> {
        let mut gone = BTreeMap::new();
        self.terms.retain(|m, c| {
            if m.contains(deleted) {
                gone.insert(m.clone(), *c);
                false
            } else {
                true
            }
        });
        (!gone.is_empty()).then_some(Polynomial { terms: gone })
    }

    /// Edges of `removed` that no longer occur in `self`.
    pub fn orphaned_edges(&self, removed: &Polynomial) -> Vec<EdgeId> {
        removed
            .edges()
            .into_iter()
            .filter(|&f| !self.mentions(f))
            .collect()
    }

    pub fn mentions(&self, e: EdgeId) -> bool {
        self.terms.keys().any(|m| m.contains(e))
    }

    /// Every edge symbol occurring in some monomial.
    pub fn edges(&self) -> BTreeSet<EdgeId> {
        self.terms.keys().flat_map(Monomial::edges).collect()
    }

    /// Why-provenance: the set of witness edge sets.
    pub fn why(&self) -> BTreeSet<BTreeSet<EdgeId>> {
        self.terms.keys().map(|m| m.edges().collect()).collect()
    }

    /// Image in B[X]: exponents and coefficients forced to 1.
    pub fn collapse_idempotent(&self) -> Polynomial {
        Polynomial::from_terms(
            self.terms
                .keys()
                .map(|m| (Monomial::from_factors(m.edges().map(|e| (e, 1))), 1))
                .collect::<BTreeMap<_, _>>(),
        )
    }

    /// Divides each coefficient by the exponent `e` has in its monomial.
    ///
    /// Panics if a monomial lacks `e` or a division is inexact.
    pub(crate) fn divide_by_exponent_of(&mut self, e: EdgeId) {
        for (m, c) in self.terms.iter_mut() {
            let k = m.exponent(e) as u64;
            assert!(
                k > 0 && *c % k == 0,
                "inexact division of {c} by {k} for {m}"
            );
            *c /= k;
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, &c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            match (c, m.is_one()) {
                (1, _) => write!(f, "{m}")?,
                (c, true) => write!(f, "{c}")?,
                (c, false) => write!(f, "{c}*{m}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid polynomial token `{token}`")]
pub struct ParsePolynomialError {
    token: String,
}

impl FromStr for Polynomial {
    type Err = ParsePolynomialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |t: &str| ParsePolynomialError {
            token: t.to_owned(),
        };
        let s = s.trim();
        if s == "0" {
            return Ok(Polynomial::zero());
        }
        let mut out = Polynomial::zero();
        for term in s.split(" + ") {
            let mut coeff = 1u64;
            let mut factors = Vec::new();
            for (i, tok) in term.trim().split('*').enumerate() {
                if let Some(rest) = tok.strip_prefix('e') {
                    let (id, exp) = match rest.split_once('^') {
                        Some((id, exp)) => (id, exp.parse::<u32>().map_err(|_| bad(tok))?),
                        None => (rest, 1),
                    };
                    let id = id.parse::<u64>().map_err(|_| bad(tok))?;
                    if exp == 0 {
                        return Err(bad(tok));
                    }
                    factors.push((EdgeId(id), exp));
                } else if i == 0 {
                    coeff = tok.parse().map_err(|_| bad(tok))?;
                    if coeff == 0 {
                        return Err(bad(tok));
                    }
                } else {
                    return Err(bad(tok));
                }
            }
            out.add_term(Monomial::from_factors(factors), coeff);
        }
        Ok(out)
    }
}
