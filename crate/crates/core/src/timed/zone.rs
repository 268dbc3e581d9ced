//! Zones as difference bound matrices.
//!
//! A zone over clocks `x1..xn` is stored as an (n+1)x(n+1) matrix of bounds
//! on differences `xi - xj`, with index 0 the constant reference clock.  The
//! operations follow Bengtsson & Yi, "Timed Automata: Semantics, Algorithms
//! and Tools"; canonical form is maintained by shortest-path closure after
//! every mutation.
//!
//! Bounds carry exact rationals rather than integers so the same matrix type
//! serves both the integer-constant decision procedures and the online state
//! estimator, which slices zones at arbitrary rational instants.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;

use crate::timed::constraint::{ClockConstraint, Relation};
use crate::timed::ta::Rational;

/// Upper bound on a clock difference: `< v`, `<= v`, or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    Lt(Rational),
    Le(Rational),
    Inf,
}

use Bound::*;

impl Bound {
    pub const ZERO: Bound = Le(Ratio::new_raw(0, 1));

    fn add(self, other: Bound) -> Bound {
        match (self, other) {
            (Inf, _) | (_, Inf) => Inf,
            (Le(a), Le(b)) => Le(a + b),
            (Le(a), Lt(b)) | (Lt(a), Le(b)) | (Lt(a), Lt(b)) => Lt(a + b),
        }
    }

    pub fn value(self) -> Option<Rational> {
        match self {
            Inf => None,
            Le(v) | Lt(v) => Some(v),
        }
    }
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A tighter constraint is smaller: `< v` before `<= v`, infinity last.
impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Inf, Inf) => Ordering::Equal,
            (Inf, _) => Ordering::Greater,
            (_, Inf) => Ordering::Less,
            (Le(a), Le(b)) | (Lt(a), Lt(b)) => a.cmp(b),
            (Lt(a), Le(b)) => {
                if a == b {
                    Ordering::Less
                } else {
                    a.cmp(b)
                }
            }
            (Le(a), Lt(b)) => {
                if a == b {
                    Ordering::Greater
                } else {
                    a.cmp(b)
                }
            }
        }
    }
}

/// Canonical, possibly empty zone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Zone {
    clocks: usize,
    /// Row-major (clocks+1)^2 matrix; entry (i,j) bounds `xi - xj`.
    m: Vec<Bound>,
    empty: bool,
}

impl Zone {
    fn dim(&self) -> usize {
        self.clocks + 1
    }

    fn at(&self, i: usize, j: usize) -> Bound {
        self.m[i * self.dim() + j]
    }

    fn set(&mut self, i: usize, j: usize, b: Bound) {
        let d = self.dim();
        self.m[i * d + j] = b;
    }

    /// Zone containing exactly the all-zeros valuation.
    pub fn zero(clocks: usize) -> Zone {
        let dim = clocks + 1;
        Zone { clocks, m: vec![Bound::ZERO; dim * dim], empty: false }
    }

    /// All valuations with non-negative clocks.
    pub fn universe(clocks: usize) -> Zone {
        let dim = clocks + 1;
        let mut z = Zone { clocks, m: vec![Inf; dim * dim], empty: false };
        for i in 0..dim {
            z.set(i, i, Bound::ZERO);
        }
        for j in 1..dim {
            z.set(0, j, Bound::ZERO);
        }
        z.close();
        z
    }

    pub fn clock_count(&self) -> usize {
        self.clocks
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Upper bound of clock `c` (automaton index), lower bound as the bound
    /// on `-c`.
    pub fn upper(&self, c: usize) -> Bound {
        self.at(c + 1, 0)
    }

    pub fn lower(&self, c: usize) -> Bound {
        self.at(0, c + 1)
    }

    /// Shortest-path closure; sets the empty flag on a negative cycle.
    fn close(&mut self) {
        if self.empty {
            return;
        }
        let dim = self.dim();
        for k in 0..dim {
            for i in 0..dim {
                if self.at(i, k) == Inf {
                    continue;
                }
                for j in 0..dim {
                    let via = self.at(i, k).add(self.at(k, j));
                    if via < self.at(i, j) {
                        self.set(i, j, via);
                    }
                }
            }
        }
        for i in 0..dim {
            if self.at(i, i) < Bound::ZERO {
                self.empty = true;
                return;
            }
        }
    }

    fn clamp_if_empty(&mut self) {
        if self.empty {
            self.m.fill(Lt(Ratio::new_raw(-1, 1)));
        }
    }

    /// Conjoins `clock rel value`; exact rational constants allowed.
    pub fn and_rational(&mut self, clock: usize, rel: Relation, value: Rational) {
        if self.empty {
            return;
        }
        let x = clock + 1;
        let tighten = |z: &mut Zone, i: usize, j: usize, b: Bound| {
            if b < z.at(i, j) {
                z.set(i, j, b);
            }
        };
        match rel {
            Relation::Lt => tighten(self, x, 0, Lt(value)),
            Relation::Le => tighten(self, x, 0, Le(value)),
            Relation::Gt => tighten(self, 0, x, Lt(-value)),
            Relation::Ge => tighten(self, 0, x, Le(-value)),
            Relation::Eq => {
                tighten(self, x, 0, Le(value));
                tighten(self, 0, x, Le(-value));
            }
        }
        self.close();
        self.clamp_if_empty();
    }

    /// Conjoins a constraint, resolving clock names through `resolve`.
    /// Returns false (and empties the zone) if a clock is unknown.
    pub fn and_constraint(
        &mut self,
        c: &ClockConstraint,
        resolve: impl Fn(&str) -> Option<usize>,
    ) -> bool {
        for atom in &c.atoms {
            match resolve(&atom.clock) {
                Some(i) => self.and_rational(
                    i,
                    atom.rel,
                    Rational::from_integer(atom.constant as i64),
                ),
                None => {
                    self.empty = true;
                    self.clamp_if_empty();
                    return false;
                }
            }
        }
        true
    }

    /// Delay closure: all futures of contained valuations (upper bounds of
    /// clocks released).
    pub fn up(&mut self) {
        if self.empty {
            return;
        }
        let dim = self.dim();
        for i in 1..dim {
            self.set(i, 0, Inf);
        }
        self.close();
    }

    /// Past closure: all non-negative pasts of contained valuations.
    pub fn down(&mut self) {
        if self.empty {
            return;
        }
        let dim = self.dim();
        for j in 1..dim {
            let mut b = Bound::ZERO;
            for i in 1..dim {
                if i != j {
                    b = b.min(self.at(i, j));
                }
            }
            self.set(0, j, b);
        }
        self.close();
    }

    /// Removes every constraint on `clock` except non-negativity.
    pub fn free(&mut self, clock: usize) {
        if self.empty {
            return;
        }
        let x = clock + 1;
        let dim = self.dim();
        for i in 0..dim {
            if i != x {
                self.set(x, i, Inf);
                let b = self.at(i, 0);
                self.set(i, x, b);
            }
        }
        self.set(x, 0, Inf);
        self.set(0, x, Bound::ZERO);
        self.close();
    }

    /// Resets `clock` to 0.
    pub fn reset(&mut self, clock: usize) {
        if self.empty {
            return;
        }
        let x = clock + 1;
        let dim = self.dim();
        for i in 0..dim {
            if i != x {
                let to = self.at(0, i);
                let from = self.at(i, 0);
                self.set(x, i, to);
                self.set(i, x, from);
            }
        }
        self.set(x, 0, Bound::ZERO);
        self.set(0, x, Bound::ZERO);
        // Copying rows of a canonical matrix keeps it canonical.
    }

    /// Entrywise minimum (set intersection).
    pub fn intersect(&self, other: &Zone) -> Zone {
        assert_eq!(self.clocks, other.clocks);
        if self.empty {
            return self.clone();
        }
        if other.empty {
            return other.clone();
        }
        let mut out = self.clone();
        for i in 0..self.m.len() {
            out.m[i] = out.m[i].min(other.m[i]);
        }
        out.close();
        out.clamp_if_empty();
        out
    }

    /// Set inclusion `other ⊆ self`, on canonical forms.
    pub fn includes(&self, other: &Zone) -> bool {
        assert_eq!(self.clocks, other.clocks);
        if other.empty {
            return true;
        }
        if self.empty {
            return false;
        }
        self.m.iter().zip(&other.m).all(|(s, o)| o <= s)
    }

    /// Maximal-bound extrapolation: bounds above a clock's maximal constant
    /// are released, lower bounds below its negation are clipped.  `None`
    /// exempts a clock.  Sound and complete for reachability of
    /// diagonal-free automata.
    pub fn extrapolate(&mut self, max: &[Option<i64>]) {
        if self.empty {
            return;
        }
        assert_eq!(max.len(), self.clocks);
        let dim = self.dim();
        let mut changed = false;
        for i in 0..dim {
            for j in 0..dim {
                if i == j {
                    continue;
                }
                let b = self.at(i, j);
                if i >= 1 {
                    if let Some(ci) = max[i - 1] {
                        if b > Le(Rational::from_integer(ci)) && b != Inf {
                            self.set(i, j, Inf);
                            changed = true;
                            continue;
                        }
                    }
                }
                if j >= 1 {
                    if let Some(cj) = max[j - 1] {
                        if b < Lt(Rational::from_integer(-cj)) {
                            self.set(i, j, Lt(Rational::from_integer(-cj)));
                            changed = true;
                        }
                    }
                }
            }
        }
        if changed {
            self.close();
        }
    }

    /// Drops a clock from the matrix (projection of a canonical zone).
    pub fn project_out(&self, clock: usize) -> Zone {
        let x = clock + 1;
        let dim = self.dim();
        let keep: Vec<usize> = (0..dim).filter(|&i| i != x).collect();
        let mut out = Zone {
            clocks: self.clocks - 1,
            m: Vec::with_capacity((dim - 1) * (dim - 1)),
            empty: self.empty,
        };
        for &i in &keep {
            for &j in &keep {
                out.m.push(self.at(i, j));
            }
        }
        out
    }

    /// Adds a fresh clock, unconstrained except `>= 0`, as the last index.
    pub fn extend_with_clock(&self) -> Zone {
        let dim = self.dim();
        let ndim = dim + 1;
        let mut out = Zone {
            clocks: self.clocks + 1,
            m: vec![Inf; ndim * ndim],
            empty: self.empty,
        };
        for i in 0..dim {
            for j in 0..dim {
                out.m[i * ndim + j] = self.at(i, j);
            }
        }
        out.m[dim * ndim + dim] = Bound::ZERO;
        out.m[dim] = Bound::ZERO; // row 0: new clock >= 0
        out.close();
        out
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return write!(f, "empty");
        }
        let mut parts = Vec::new();
        for i in 0..self.clocks {
            let (lo, up) = (self.lower(i), self.upper(i));
            let mut s = String::new();
            match lo {
                Le(v) => s.push_str(&format!("{}<=", -v)),
                Lt(v) => s.push_str(&format!("{}<", -v)),
                Inf => {}
            }
            s.push_str(&format!("x{i}"));
            match up {
                Le(v) => s.push_str(&format!("<={v}")),
                Lt(v) => s.push_str(&format!("<{v}")),
                Inf => {}
            }
            parts.push(s);
        }
        write!(f, "{}", parts.join(", "))
    }
}
