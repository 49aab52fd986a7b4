//! Integer affine polynomials over named indexes.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unbound index `{0}`")]
pub struct UnboundIndex(pub String);

/// `constant + Σ coeff·index`. Zero coefficients are never stored, so two
/// equal polynomials always compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Affine {
    terms: BTreeMap<String, i64>,
    constant: i64,
}

impl Affine {
    pub fn constant(c: i64) -> Self {
        Affine {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self::term(name, 1)
    }

    pub fn term(name: impl Into<String>, coeff: i64) -> Self {
        let mut a = Self::zero();
        a.add_term(name, coeff);
        a
    }

    pub fn from_terms<S: Into<String>>(terms: impl IntoIterator<Item = (S, i64)>, constant: i64) -> Self {
        let mut a = Self::constant(constant);
        for (n, c) in terms {
            a.add_term(n, c);
        }
        a
    }

    pub fn add_term(&mut self, name: impl Into<String>, coeff: i64) {
        if coeff == 0 {
            return;
        }
        let name = name.into();
        let entry = self.terms.entry(name.clone()).or_insert(0);
        *entry += coeff;
        if *entry == 0 {
            self.terms.remove(&name);
        }
    }

    pub fn get_constant(&self) -> i64 {
        self.constant
    }

    pub fn set_constant(&mut self, c: i64) {
        self.constant = c;
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.terms.get(name).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, i64)> + '_ {
        self.terms.iter().map(|(n, c)| (n.as_str(), *c))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.terms.keys().map(String::as_str)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn uses(&self, name: &str) -> bool {
        self.terms.contains_key(name)
    }

    /// The expression without its constant part.
    pub fn linear(&self) -> Affine {
        Affine {
            terms: self.terms.clone(),
            constant: 0,
        }
    }

    pub fn eval(&self, env: &BTreeMap<String, i64>) -> Result<i64, UnboundIndex> {
        self.eval_with(|n| env.get(n).copied())
    }

    pub fn eval_with(&self, mut lookup: impl FnMut(&str) -> Option<i64>) -> Result<i64, UnboundIndex> {
        let mut acc = self.constant;
        for (name, coeff) in &self.terms {
            let v = lookup(name).ok_or_else(|| UnboundIndex(name.clone()))?;
            acc += coeff * v;
        }
        Ok(acc)
    }

    /// Replaces every bound index by its expression; unbound indexes stay.
    pub fn substitute(&self, bindings: &BTreeMap<String, Affine>) -> Affine {
        let mut out = Affine::constant(self.constant);
        for (name, coeff) in &self.terms {
            match bindings.get(name) {
                Some(expr) => out += expr.clone() * *coeff,
                None => out.add_term(name.clone(), *coeff),
            }
        }
        out
    }

    /// Renames indexes; names missing from the map are kept.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Affine {
        let mut out = Affine::constant(self.constant);
        for (name, coeff) in &self.terms {
            let n = map.get(name).cloned().unwrap_or_else(|| name.clone());
            out.add_term(n, *coeff);
        }
        out
    }

    /// Minimum and maximum over a box of inclusive per-index bounds.
    pub fn bounds_with(&self, mut range: impl FnMut(&str) -> Option<(i64, i64)>) -> Result<(i64, i64), UnboundIndex> {
        let mut lo = self.constant;
        let mut hi = self.constant;
        for (name, &c) in &self.terms {
            let (a, b) = range(name).ok_or_else(|| UnboundIndex(name.clone()))?;
            if c >= 0 {
                lo += c * a;
                hi += c * b;
            } else {
                lo += c * b;
                hi += c * a;
            }
        }
        Ok((lo, hi))
    }

    /// Writes the expression with terms in the order given by `order`
    /// (remaining names alphabetically), constant first or last.
    pub fn write_ordered(&self, f: &mut impl fmt::Write, order: &[&str], constant_first: bool) -> fmt::Result {
        let mut items: Vec<(i64, Option<&str>)> = Vec::with_capacity(self.terms.len() + 1);
        let mut seen = Vec::new();
        for name in order {
            if let Some(&c) = self.terms.get(*name) {
                if !seen.contains(name) {
                    items.push((c, Some(*name)));
                    seen.push(*name);
                }
            }
        }
        for (name, &c) in &self.terms {
            if !seen.contains(&name.as_str()) {
                items.push((c, Some(name.as_str())));
            }
        }
        if self.constant != 0 || items.is_empty() {
            if constant_first {
                items.insert(0, (self.constant, None));
            } else {
                items.push((self.constant, None));
            }
        }
        for (i, (c, name)) in items.iter().enumerate() {
            let mag = c.unsigned_abs();
            if i == 0 {
                if *c < 0 {
                    f.write_str("-")?;
                }
            } else if *c < 0 {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            match name {
                None => write!(f, "{mag}")?,
                Some(n) if mag == 1 => f.write_str(n)?,
                Some(n) => write!(f, "{mag}*{n}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_ordered(f, &[], false)
    }
}

impl From<i64> for Affine {
    fn from(c: i64) -> Self {
        Affine::constant(c)
    }
}

impl AddAssign for Affine {
    fn add_assign(&mut self, rhs: Affine) {
        self.constant += rhs.constant;
        for (n, c) in rhs.terms {
            self.add_term(n, c);
        }
    }
}

impl Add for Affine {
    type Output = Affine;
    fn add(mut self, rhs: Affine) -> Affine {
        self += rhs;
        self
    }
}

impl Add<i64> for Affine {
    type Output = Affine;
    fn add(mut self, rhs: i64) -> Affine {
        self.constant += rhs;
        self
    }
}

impl Sub for Affine {
    type Output = Affine;
    fn sub(self, rhs: Affine) -> Affine {
        self + (-rhs)
    }
}

impl Sub<i64> for Affine {
    type Output = Affine;
    fn sub(mut self, rhs: i64) -> Affine {
        self.constant -= rhs;
        self
    }
}

impl Neg for Affine {
    type Output = Affine;
    fn neg(self) -> Affine {
        self * -1
    }
}

impl Mul<i64> for Affine {
    type Output = Affine;
    fn mul(self, k: i64) -> Affine {
        if k == 0 {
            return Affine::zero();
        }
        Affine {
            terms: self.terms.into_iter().map(|(n, c)| (n, c * k)).collect(),
            constant: self.constant * k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Affine::constant(7).eval(&env(&[])).unwrap(), 7);
        let e = Affine::term("x", 3) - 1;
        assert_eq!(e.eval(&env(&[("x", 2)])).unwrap(), 5);
        let c = Affine::from_terms([("xo", 1), ("x", 1), ("i", 1)], -1);
        assert_eq!(c.eval(&env(&[("xo", 0), ("x", 0), ("i", 0)])).unwrap(), -1);
    }

    #[test]
    fn eval_unbound() {
        let e = Affine::var("q");
        assert_eq!(e.eval(&env(&[])), Err(UnboundIndex("q".into())));
    }

    #[test]
    fn zero_terms_vanish() {
        let e = Affine::var("x") - Affine::var("x");
        assert!(e.is_constant());
        assert_eq!(e, Affine::zero());
    }

    #[test]
    fn substitute_examples() {
        let tile: BTreeMap<String, Affine> =
            [("x".to_string(), Affine::term("xo", 3) + Affine::var("xi"))].into_iter().collect();
        assert_eq!(Affine::var("x").substitute(&tile), Affine::term("xo", 3) + Affine::var("xi"));
        let e = Affine::from_terms([("x", 1), ("i", 1)], -1);
        let expect = Affine::from_terms([("xo", 3), ("xi", 1), ("i", 1)], -1);
        assert_eq!(e.substitute(&tile), expect);
        assert_eq!(Affine::var("x").substitute(&BTreeMap::new()), Affine::var("x"));
    }

    #[test]
    fn printing() {
        let e = Affine::from_terms([("x", 1), ("i", 1)], -1);
        let mut s = String::new();
        e.write_ordered(&mut s, &["x", "i"], true).unwrap();
        assert_eq!(s, "-1 + x + i");
        s.clear();
        (Affine::term("x", 3) - 1).write_ordered(&mut s, &[], false).unwrap();
        assert_eq!(s, "3*x - 1");
        s.clear();
        Affine::from_terms([("x", -1), ("i", -1)], 12).write_ordered(&mut s, &["x", "i"], true).unwrap();
        assert_eq!(s, "12 - x - i");
        assert_eq!(Affine::zero().to_string(), "0");
        assert_eq!(Affine::term("y", -2).to_string(), "-2*y");
    }

    const NAMES: [&str; 4] = ["a", "b", "c", "d"];

    fn arb_affine() -> impl Strategy<Value = Affine> {
        (prop::collection::vec((0..4usize, -5i64..6), 0..5), -20i64..20).prop_map(|(ts, c)| {
            Affine::from_terms(ts.into_iter().map(|(i, k)| (NAMES[i], k)), c)
        })
    }

    proptest! {
        #[test]
        fn substitution_commutes_with_evaluation(
            e in arb_affine(),
            b0 in arb_affine(),
            b1 in arb_affine(),
            vals in prop::collection::vec(-50i64..50, 4),
        ) {
            let env: BTreeMap<String, i64> = NAMES.iter().zip(&vals).map(|(n, v)| (n.to_string(), *v)).collect();
            let bindings: BTreeMap<String, Affine> =
                [("a".to_string(), b0.clone()), ("c".to_string(), b1.clone())].into_iter().collect();
            let mut extended = env.clone();
            extended.insert("a".into(), b0.eval(&env).unwrap());
            extended.insert("c".into(), b1.eval(&env).unwrap());
            prop_assert_eq!(e.substitute(&bindings).eval(&env).unwrap(), e.eval(&extended).unwrap());
        }

        #[test]
        fn bounds_contain_every_point(e in arb_affine(), vals in prop::collection::vec(0i64..4, 4)) {
            let env: BTreeMap<String, i64> = NAMES.iter().zip(&vals).map(|(n, v)| (n.to_string(), *v)).collect();
            let (lo, hi) = e.bounds_with(|_| Some((0, 3))).unwrap();
            let v = e.eval(&env).unwrap();
            prop_assert!(lo <= v && v <= hi);
        }
    }
}
