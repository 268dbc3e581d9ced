//! Event alphabets split into observable and unobservable parts, plus the
//! silent label used internally once unobservable events are hidden.

use serde::Serialize;

use crate::error::{Error, Result};

/// Reserved spelling of the silent label in model files and exports.
pub const SILENT_NAME: &str = "eps";

/// Edge label: either a named event or the silent step.
///
/// The silent label is not an event of the alphabet; it is what unobservable
/// behaviour is renamed to by the hiding and twin constructions, and what a
/// model file's `"eps"` edge label parses to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Silent,
    Event(String),
}

impl Label {
    pub fn event(name: impl Into<String>) -> Self {
        Label::Event(name.into())
    }

    pub fn is_silent(&self) -> bool {
        matches!(self, Label::Silent)
    }

    /// Event name, or `None` for the silent label.
    pub fn name(&self) -> Option<&str> {
        match self {
            Label::Silent => None,
            Label::Event(e) => Some(e),
        }
    }

    /// Display form used in DOT exports and diagnostics.
    pub fn display(&self) -> &str {
        match self {
            Label::Silent => SILENT_NAME,
            Label::Event(e) => e,
        }
    }
}

/// Partition of the event set into observable and unobservable events,
/// with an optional distinguished fault event.
///
/// Declaration order is preserved; all iteration follows it, which keeps
/// constructions deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventAlphabet {
    pub observable: Vec<String>,
    pub unobservable: Vec<String>,
    pub fault: Option<String>,
}

impl EventAlphabet {
    pub fn new(
        observable: Vec<String>,
        unobservable: Vec<String>,
        fault: Option<String>,
    ) -> Result<Self> {
        let alphabet = EventAlphabet { observable, unobservable, fault };
        alphabet.validate()?;
        Ok(alphabet)
    }

    /// Checks disjointness, the fault declaration and the reserved `eps` name.
    pub fn validate(&self) -> Result<()> {
        for name in self.observable.iter().chain(&self.unobservable) {
            if name == SILENT_NAME {
                return Err(Error::input(format!(
                    "event name `{SILENT_NAME}` is reserved for the silent label"
                )));
            }
            if name.is_empty() {
                return Err(Error::input("empty event name"));
            }
        }
        for (i, name) in self.observable.iter().enumerate() {
            if self.observable[..i].contains(name) {
                return Err(Error::input(format!("event `{name}` declared twice")));
            }
            if self.unobservable.contains(name) {
                return Err(Error::input(format!(
                    "event `{name}` declared both observable and unobservable"
                )));
            }
        }
        for (i, name) in self.unobservable.iter().enumerate() {
            if self.unobservable[..i].contains(name) {
                return Err(Error::input(format!("event `{name}` declared twice")));
            }
        }
        if let Some(f) = &self.fault {
            if !self.contains(f) {
                return Err(Error::input(format!(
                    "fault event `{f}` is not a declared event"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.observable.iter().any(|e| e == name)
            || self.unobservable.iter().any(|e| e == name)
    }

    pub fn is_observable(&self, name: &str) -> bool {
        self.observable.iter().any(|e| e == name)
    }

    /// True when the label carries the fault event.
    pub fn is_fault(&self, label: &Label) -> bool {
        match (label.name(), &self.fault) {
            (Some(n), Some(f)) => n == f,
            _ => false,
        }
    }

    /// True when the label survives projection onto the observable events.
    pub fn label_observable(&self, label: &Label) -> bool {
        label.name().map_or(false, |n| self.is_observable(n))
    }

    /// The fault name, or an input error for operations that require one.
    pub fn require_fault(&self) -> Result<&str> {
        self.fault
            .as_deref()
            .ok_or_else(|| Error::input("model declares no fault event"))
    }

    /// All declared events, observable first, in declaration order.
    pub fn all_events(&self) -> impl Iterator<Item = &String> {
        self.observable.iter().chain(self.unobservable.iter())
    }

    /// Picks a name not colliding with any declared event, starting from
    /// `base` and appending digits as needed.
    pub fn fresh_event(&self, base: &str) -> String {
        if !self.contains(base) && base != SILENT_NAME {
            return base.to_string();
        }
        let mut i = 0u32;
        loop {
            let candidate = format!("{base}{i}");
            if !self.contains(&candidate) {
                return candidate;
            }
            i += 1;
        }
    }
}
