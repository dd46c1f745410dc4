//! Domain-general functions available to how-search.
//!
//! Values travel as strings; each function parses non-negative integers and
//! is undefined (returns `None`) on anything else, on negative results and
//! on inexact division.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct FunctionSpec {
    pub id: &'static str,
    pub arity: usize,
    pub commutative: bool,
    eval: fn(&[i64]) -> Option<i64>,
}

impl std::fmt::Debug for FunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionSpec")
            .field("id", &self.id)
            .field("arity", &self.arity)
            .field("commutative", &self.commutative)
            .finish()
    }
}

impl FunctionSpec {
    pub fn apply_num(&self, args: &[i64]) -> Option<i64> {
        debug_assert_eq!(args.len(), self.arity);
        (self.eval)(args).filter(|v| *v >= 0)
    }

    /// String-level semantics.
    pub fn apply(&self, args: &[&str]) -> Option<String> {
        if args.len() != self.arity {
            return None;
        }
        let nums = args.iter().map(|a| parse_value(a)).collect::<Option<Vec<_>>>()?;
        self.apply_num(&nums).map(|v| v.to_string())
    }
}

/// Parses a non-negative decimal integer. Leading zeros are accepted.
pub fn parse_value(s: &str) -> Option<i64> {
    if s.is_empty() || s.len() > 15 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn add(a: &[i64]) -> Option<i64> {
    a[0].checked_add(a[1])
}
fn add3(a: &[i64]) -> Option<i64> {
    a[0].checked_add(a[1])?.checked_add(a[2])
}
fn subtract(a: &[i64]) -> Option<i64> {
    a[0].checked_sub(a[1])
}
fn multiply(a: &[i64]) -> Option<i64> {
    a[0].checked_mul(a[1])
}
fn divide(a: &[i64]) -> Option<i64> {
    if a[1] == 0 || a[0] % a[1] != 0 {
        None
    } else {
        Some(a[0] / a[1])
    }
}
fn tens(a: &[i64]) -> Option<i64> {
    Some((a[0] / 10) % 10)
}
fn ones(a: &[i64]) -> Option<i64> {
    Some(a[0] % 10)
}

const ALL: [FunctionSpec; 7] = [
    FunctionSpec { id: "Add", arity: 2, commutative: true, eval: add },
    FunctionSpec { id: "Add3", arity: 3, commutative: true, eval: add3 },
    FunctionSpec { id: "Subtract", arity: 2, commutative: false, eval: subtract },
    FunctionSpec { id: "Divide", arity: 2, commutative: false, eval: divide },
    FunctionSpec { id: "Multiply", arity: 2, commutative: true, eval: multiply },
    FunctionSpec { id: "GetTensPlace", arity: 1, commutative: false, eval: tens },
    FunctionSpec { id: "GetOnesPlace", arity: 1, commutative: false, eval: ones },
];

/// An immutable set of functions. Function indices are stable for the
/// lifetime of the registry.
#[derive(Debug, Clone)]
pub struct Registry {
    funcs: Vec<FunctionSpec>,
}

/// Which registry functions to enable; loaded from a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistryConfig {
    pub functions: Vec<String>,
}

impl Registry {
    /// Add, Add3, Subtract, Divide, Multiply, GetTensPlace, GetOnesPlace.
    pub fn default_registry() -> Registry {
        Registry { funcs: ALL.to_vec() }
    }

    pub fn from_ids<S: AsRef<str>>(ids: &[S]) -> Result<Registry> {
        let mut funcs = Vec::new();
        for id in ids {
            let id = id.as_ref();
            let f = ALL
                .iter()
                .find(|f| f.id == id)
                .ok_or_else(|| Error::Config(format!("unknown function {id:?}")))?;
            if !funcs.iter().any(|g: &FunctionSpec| g.id == f.id) {
                funcs.push(f.clone());
            }
        }
        Ok(Registry { funcs })
    }

    pub fn from_config(cfg: &RegistryConfig) -> Result<Registry> {
        Registry::from_ids(&cfg.functions)
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn functions(&self) -> &[FunctionSpec] {
        &self.funcs
    }

    pub fn get(&self, id: &str) -> Option<&FunctionSpec> {
        self.funcs.iter().find(|f| f.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.funcs.iter().position(|f| f.id == id)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::default_registry()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(id: &str, args: &[&str]) -> Option<String> {
        Registry::default_registry().get(id).unwrap().apply(args)
    }

    #[test]
    fn default_registry_has_seven_functions() {
        let r = Registry::default_registry();
        let ids: Vec<_> = r.functions().iter().map(|f| f.id).collect();
        assert_eq!(
            ids,
            ["Add", "Add3", "Subtract", "Divide", "Multiply", "GetTensPlace", "GetOnesPlace"]
        );
    }

    #[test]
    fn integer_semantics() {
        assert_eq!(call("Add", &["7", "5"]).as_deref(), Some("12"));
        assert_eq!(call("Add3", &["1", "7", "5"]).as_deref(), Some("13"));
        assert_eq!(call("Multiply", &["10", "9"]).as_deref(), Some("90"));
        assert_eq!(call("Subtract", &["7", "5"]).as_deref(), Some("2"));
        assert_eq!(call("Subtract", &["5", "7"]), None);
        assert_eq!(call("Divide", &["4", "0"]), None);
        assert_eq!(call("Divide", &["7", "2"]), None);
        assert_eq!(call("Divide", &["8", "2"]).as_deref(), Some("4"));
        assert_eq!(call("Add", &["x", "1"]), None);
        assert_eq!(call("Add", &["", "1"]), None);
    }

    #[test]
    fn digit_extraction_matches_string_indexing() {
        // Oracle: index into the decimal rendering.
        for n in 0..1000u32 {
            let s = n.to_string();
            let b = s.as_bytes();
            let ones = (b[b.len() - 1] as char).to_string();
            let tens = if b.len() >= 2 { (b[b.len() - 2] as char).to_string() } else { "0".to_string() };
            assert_eq!(call("GetOnesPlace", &[&s]).unwrap(), ones);
            assert_eq!(call("GetTensPlace", &[&s]).unwrap(), tens);
        }
        assert_eq!(call("GetTensPlace", &["7"]).as_deref(), Some("0"));
    }

    #[test]
    fn commutative_functions_ignore_argument_order() {
        let r = Registry::default_registry();
        for f in r.functions().iter().filter(|f| f.commutative) {
            for a in 0..12 {
                for b in 0..12 {
                    let mut args = vec![a, b, 3];
                    args.truncate(f.arity);
                    let mut rev = args.clone();
                    rev.reverse();
                    assert_eq!(f.apply_num(&args), f.apply_num(&rev), "{}", f.id);
                }
            }
        }
    }

    #[test]
    fn registry_from_config() {
        let r = Registry::from_ids(&["Add", "GetOnesPlace"]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(Registry::from_ids(&["Equals"]).is_err());
    }
}
