//! Pass/fail records with the measured value, the target and the tolerance,
//! so that every quantitative claim in an output file can be re-checked.

use serde::{Deserialize, Serialize};

/// How `value` is compared against `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|value - target| <= tolerance · |target|`
    Relative,
    /// `|value - target| <= tolerance`
    Absolute,
    /// `value <= target`
    AtMost,
    /// `value > target`
    Above,
    /// `value == target` for booleans encoded as 0/1.
    Holds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    /// Where the target comes from: a closed form, an asymptotic law, an
    /// invariant of the discretization, ...
    pub basis: String,
    pub pass: bool,
}

impl Verdict {
    fn make(name: &str, value: f64, target: f64, tolerance: f64, comparison: Comparison, basis: &str) -> Self {
        let pass = match comparison {
            Comparison::Relative => (value - target).abs() <= tolerance * target.abs(),
            Comparison::Absolute => (value - target).abs() <= tolerance,
            Comparison::AtMost => value <= target,
            Comparison::Above => value > target,
            Comparison::Holds => value == target,
        };
        Verdict {
            name: name.to_string(),
            value,
            target,
            tolerance,
            comparison,
            basis: basis.to_string(),
            pass: pass && value.is_finite(),
        }
    }

    pub fn relative(name: &str, value: f64, target: f64, tolerance: f64, basis: &str) -> Self {
        Self::make(name, value, target, tolerance, Comparison::Relative, basis)
    }

    pub fn absolute(name: &str, value: f64, target: f64, tolerance: f64, basis: &str) -> Self {
        Self::make(name, value, target, tolerance, Comparison::Absolute, basis)
    }

    pub fn at_most(name: &str, value: f64, bound: f64, basis: &str) -> Self {
        Self::make(name, value, bound, 0.0, Comparison::AtMost, basis)
    }

    pub fn above(name: &str, value: f64, bound: f64, basis: &str) -> Self {
        Self::make(name, value, bound, 0.0, Comparison::Above, basis)
    }

    pub fn holds(name: &str, condition: bool, basis: &str) -> Self {
        Self::make(name, condition as u8 as f64, 1.0, 0.0, Comparison::Holds, basis)
    }

    /// `PASS`/`FAIL` line for logs.
    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        let rel = match self.comparison {
            Comparison::Relative => format!("within {:.3} relative of", self.tolerance),
            Comparison::Absolute => format!("within {:.3e} of", self.tolerance),
            Comparison::AtMost => "<=".to_string(),
            Comparison::Above => ">".to_string(),
            Comparison::Holds => return format!("{tag} {}: {} ({})", self.name, if self.value == 1.0 { "holds" } else { "does not hold" }, self.basis),
        };
        format!("{tag} {}: {} {rel} {} ({})", self.name, num(self.value), num(self.target), self.basis)
    }
}

fn num(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{x:.4e}")
    } else {
        format!("{x:.6}")
    }
}

/// The verdict file written by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub command: String,
    pub seed: u64,
    pub all_pass: bool,
    pub verdicts: Vec<Verdict>,
}

impl VerdictFile {
    pub fn new(command: &str, seed: u64, verdicts: Vec<Verdict>) -> Self {
        let all_pass = verdicts.iter().all(|v| v.pass);
        VerdictFile { command: command.to_string(), seed, all_pass, verdicts }
    }

    pub fn find(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Verdict::relative("a", 1.04, 1.0, 0.05, "x").pass);
        assert!(!Verdict::relative("a", 1.06, 1.0, 0.05, "x").pass);
        assert!(Verdict::absolute("a", -0.1, 0.0, 0.1, "x").pass);
        assert!(Verdict::at_most("a", 1.0, 1.0, "x").pass);
        assert!(!Verdict::above("a", 1.0, 1.0, "x").pass);
        assert!(Verdict::holds("a", true, "x").pass);
        assert!(!Verdict::holds("a", false, "x").pass);
        assert!(!Verdict::at_most("a", f64::NAN, 1.0, "x").pass);
    }

    #[test]
    fn file_aggregates() {
        let f = VerdictFile::new("t", 0, vec![Verdict::holds("a", true, "x"), Verdict::holds("b", false, "x")]);
        assert!(!f.all_pass);
        assert!(f.find("b").is_some());
        assert!(f.verdicts[0].line().starts_with("PASS a"));
    }
}
