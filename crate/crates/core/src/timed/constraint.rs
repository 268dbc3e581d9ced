//! Diagonal-free clock constraints: conjunctions of comparisons between a
//! single clock and a natural constant, written `x<c`, `x<=c`, `x==c`,
//! `x>c`, `x>=c` and joined with `&&`.  `true` is the empty conjunction.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Lt,
    Le,
    Eq,
    Gt,
    Ge,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "==",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }

    /// Usable in a location invariant (upper bounds only).
    pub fn is_upper(self) -> bool {
        matches!(self, Relation::Lt | Relation::Le)
    }
}

/// One comparison `clock rel constant`.  Clocks are referenced by name here;
/// automata resolve them to indices when attached.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub clock: String,
    pub rel: Relation,
    pub constant: u64,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.clock, self.rel.as_str(), self.constant)
    }
}

/// Conjunction of atoms; the empty conjunction is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ClockConstraint {
    pub atoms: Vec<Atom>,
}

impl ClockConstraint {
    pub fn truth() -> Self {
        ClockConstraint { atoms: Vec::new() }
    }

    pub fn single(clock: impl Into<String>, rel: Relation, constant: u64) -> Self {
        ClockConstraint { atoms: vec![Atom { clock: clock.into(), rel, constant }] }
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Conjunction of two constraints.
    pub fn and(&self, other: &ClockConstraint) -> ClockConstraint {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        ClockConstraint { atoms }
    }

    pub fn push(&mut self, clock: impl Into<String>, rel: Relation, constant: u64) {
        self.atoms.push(Atom { clock: clock.into(), rel, constant });
    }

    /// True when every atom only bounds its clock from above.
    pub fn upper_bounds_only(&self) -> bool {
        self.atoms.iter().all(|a| a.rel.is_upper())
    }

    pub fn clocks(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(|a| a.clock.as_str())
    }

    /// Renames every clock through `f`.
    pub fn rename_clocks(&self, f: impl Fn(&str) -> String) -> ClockConstraint {
        ClockConstraint {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { clock: f(&a.clock), rel: a.rel, constant: a.constant })
                .collect(),
        }
    }

    /// Multiplies every constant by `factor` (used when moving to a finer
    /// time base).
    pub fn scale_constants(&self, factor: u64) -> ClockConstraint {
        ClockConstraint {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { clock: a.clock.clone(), rel: a.rel, constant: a.constant * factor })
                .collect(),
        }
    }

    /// Parses the guard grammar.  `context` names the enclosing edge or
    /// location in error messages.
    pub fn parse(text: &str, context: &str) -> Result<ClockConstraint> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(Error::input(format!("{context}: empty constraint")));
        }
        if trimmed == "true" {
            return Ok(ClockConstraint::truth());
        }
        let mut atoms = Vec::new();
        for (i, part) in trimmed.split("&&").enumerate() {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::input(format!(
                    "{context}: empty conjunct {} in `{text}`",
                    i + 1
                )));
            }
            atoms.push(parse_atom(part, context, text)?);
        }
        Ok(ClockConstraint { atoms })
    }
}

impl fmt::Display for ClockConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "true");
        }
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join(" && "))
    }
}

fn parse_atom(part: &str, context: &str, whole: &str) -> Result<Atom> {
    // Two-character operators first so `<=` is not read as `<` + `=c`.
    const OPS: [(&str, Relation); 5] = [
        ("<=", Relation::Le),
        (">=", Relation::Ge),
        ("==", Relation::Eq),
        ("<", Relation::Lt),
        (">", Relation::Gt),
    ];
    for (op, rel) in OPS {
        if let Some(pos) = part.find(op) {
            let clock = part[..pos].trim();
            let value = part[pos + op.len()..].trim();
            if clock.is_empty() {
                return Err(Error::input(format!(
                    "{context}: missing clock before `{op}` in `{whole}`"
                )));
            }
            if value.starts_with('=') {
                return Err(Error::input(format!(
                    "{context}: malformed operator near column {} in `{whole}` (use <=, >=, ==)",
                    pos + 1
                )));
            }
            let constant: u64 = value.parse().map_err(|_| {
                Error::input(format!(
                    "{context}: `{value}` is not a natural constant in `{whole}`"
                ))
            })?;
            return Ok(Atom { clock: clock.to_string(), rel, constant });
        }
    }
    Err(Error::input(format!(
        "{context}: `{part}` is not of the form clock<op>constant in `{whole}`"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_conjunctions_and_true() {
        let c = ClockConstraint::parse("x>=6 && x<=8", "edge 0").unwrap();
        assert_eq!(c.atoms.len(), 2);
        assert_eq!(c.atoms[0], Atom { clock: "x".into(), rel: Relation::Ge, constant: 6 });
        assert!(ClockConstraint::parse("true", "e").unwrap().is_true());
        assert!(ClockConstraint::parse(" x == 1 ", "e").is_ok());
    }

    #[test]
    fn rejects_garbage() {
        assert!(ClockConstraint::parse("x=1", "e").is_err());
        assert!(ClockConstraint::parse("x << 3", "e").is_err());
        assert!(ClockConstraint::parse("x<=-1", "e").is_err());
        assert!(ClockConstraint::parse("x<1 &&", "e").is_err());
        assert!(ClockConstraint::parse("", "e").is_err());
    }

    #[test]
    fn display_round_trips() {
        let c = ClockConstraint::parse("x>=6 && y<8", "e").unwrap();
        assert_eq!(ClockConstraint::parse(&c.to_string(), "e").unwrap(), c);
        assert_eq!(ClockConstraint::truth().to_string(), "true");
    }
}
