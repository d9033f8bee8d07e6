//! Plain-text `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. A problem file names
//! each field with one of the built-in forms:
//!
//! ```text
//! base      = case1                      # optional starting point
//! d1        = affine_squared 1 1 0.02 0  # scale * (c0 + cx x + cy y)^2
//! d2        = constant 0.1
//! u1        = affine 0.5 0.01 0          # c0 + cx x + cy y
//! u2        = affine -0.5 0 -0.01
//! mu        = constant 0.01
//! exact     = sin_bubble                 # or any field form, or `none`
//! source    = manufactured               # or any field form
//! dirichlet = exact                      # or any field form
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::{
    Affine, AffineSquared, Constant, FieldRef, ProblemDefinition, SinBubble, Source,
};

/// Parsed `key = value` pairs with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "empty key".into(),
                });
            }
            if entries
                .insert(key.clone(), (i + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(l, _)| *l)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses a value with `FromStr`, reporting the key's line on failure.
    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Parse {
                line: self.line(key),
                message: format!("bad value `{v}` for `{key}`"),
            }),
        }
    }

    /// Fails on any key outside `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Parse {
                line: self.line(k),
                message: format!(
                    "unknown key `{k}` (expected one of: {})",
                    allowed.join(", ")
                ),
            }),
            None => Ok(()),
        }
    }
}

/// Parses one field description such as `affine 0.5 0.01 0`.
pub fn parse_field(spec: &str, line: usize) -> Result<FieldRef> {
    let mut words = spec.split_whitespace();
    let form = words.next().unwrap_or("");
    let args: Vec<f64> = words
        .map(|w| {
            w.parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number `{w}` in `{spec}`"),
            })
        })
        .collect::<Result<_>>()?;
    let arity = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(Error::Parse {
                line,
                message: format!("`{form}` takes {n} numbers, got {}", args.len()),
            })
        }
    };
    Ok(match form {
        "constant" => {
            arity(1)?;
            Arc::new(Constant(args[0]))
        }
        "affine" => {
            arity(3)?;
            Arc::new(Affine::new(args[0], args[1], args[2]))
        }
        "affine_squared" => {
            arity(4)?;
            Arc::new(AffineSquared::new(args[0], args[1], args[2], args[3]))
        }
        "sin_bubble" => {
            arity(0)?;
            Arc::new(SinBubble)
        }
        other => {
            return Err(Error::Parse {
                line,
                message: format!(
                    "unknown field form `{other}` (expected constant, affine, affine_squared or sin_bubble)"
                ),
            })
        }
    })
}

const PROBLEM_KEYS: &[&str] = &[
    "name",
    "base",
    "d1",
    "d2",
    "u1",
    "u2",
    "mu",
    "exact",
    "source",
    "dirichlet",
];

/// Builds a problem from a parsed config. Unspecified fields come from `base`
/// (default: zero advection and reaction, unit diffusion, zero source).
pub fn problem_from_config(kv: &KeyValues) -> Result<ProblemDefinition> {
    kv.reject_unknown(PROBLEM_KEYS)?;
    let mut p = match kv.get("base") {
        Some(name) => ProblemDefinition::builtin(name).map_err(|_| Error::Parse {
            line: kv.line("base"),
            message: format!("unknown base `{name}`"),
        })?,
        None => ProblemDefinition::constant(1.0, [0.0, 0.0], 0.0),
    };
    p.name = kv.get("name").unwrap_or("custom").to_string();

    let field = |key: &str| {
        kv.get(key)
            .map(|v| parse_field(v, kv.line(key)))
            .transpose()
    };
    if let Some(f) = field("d1")? {
        p.d1 = f;
    }
    if let Some(f) = field("d2")? {
        p.d2 = f;
    }
    if let Some(f) = field("u1")? {
        p.u1 = f;
    }
    if let Some(f) = field("u2")? {
        p.u2 = f;
    }
    if let Some(f) = field("mu")? {
        p.mu = f;
    }
    match kv.get("exact") {
        Some("none") => p.exact = None,
        Some(v) => p.exact = Some(parse_field(v, kv.line("exact"))?),
        None => {}
    }
    match kv.get("source") {
        Some("manufactured") => {
            if p.exact.is_none() {
                return Err(Error::Parse {
                    line: kv.line("source"),
                    message: "`source = manufactured` needs an exact solution".into(),
                });
            }
            p.source = Source::Manufactured;
        }
        Some(v) => p.source = Source::Field(parse_field(v, kv.line("source"))?),
        None => {}
    }
    match kv.get("dirichlet") {
        Some("exact") => match &p.exact {
            Some(c) => p.dirichlet = c.clone(),
            None => {
                return Err(Error::Parse {
                    line: kv.line("dirichlet"),
                    message: "`dirichlet = exact` needs an exact solution".into(),
                })
            }
        },
        Some(v) => p.dirichlet = parse_field(v, kv.line("dirichlet"))?,
        None => {}
    }
    p.check_positive_diffusion()?;
    Ok(p)
}

pub fn load_problem(path: &Path) -> Result<ProblemDefinition> {
    problem_from_config(&KeyValues::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_rejects_duplicates() {
        let kv = KeyValues::parse("# header\n a = 1 # trailing\n\nB=two words\n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("two words"));
        assert_eq!(kv.line("b"), 4);
        assert!(KeyValues::parse("a = 1\na = 2\n").is_err());
        assert!(KeyValues::parse("just words\n").is_err());
    }

    #[test]
    fn field_forms() {
        let f = parse_field("affine_squared 2 1 0.5 0", 1).unwrap();
        assert_eq!(f.value([1.0, 0.3]), 2.0 * 1.5 * 1.5);
        assert!(parse_field("affine 1 2", 1).is_err());
        assert!(parse_field("cubic 1", 1).is_err());
        assert!(parse_field("constant x", 1).is_err());
    }

    #[test]
    fn config_reproduces_case1_fields() {
        let text = "
            d1 = affine_squared 1 1 0.02 0
            d2 = affine_squared 0.1 1 0 0.02
            u1 = affine 0.5 0.01 0
            u2 = affine -0.5 0 -0.01
            mu = constant 0.01
            exact = sin_bubble
            source = manufactured
            dirichlet = exact
        ";
        let p = problem_from_config(&KeyValues::parse(text).unwrap()).unwrap();
        let reference = ProblemDefinition::case1();
        for pt in [[0.2, 0.7], [0.9, 0.1], [0.5, 0.5]] {
            assert!((p.source_at(pt) - reference.source_at(pt)).abs() < 1e-15);
            assert_eq!(p.coefficients(pt), reference.coefficients(pt));
        }
        assert_eq!(p.sup_bounds(), reference.sup_bounds());
    }

    #[test]
    fn base_with_override() {
        let kv = KeyValues::parse("base = case2\nmu = constant 3\n").unwrap();
        let p = problem_from_config(&kv).unwrap();
        assert_eq!(p.coefficients([0.5, 0.5]).mu, 3.0);
        assert!(p.exact.is_some());
    }

    #[test]
    fn config_errors() {
        for text in [
            "colour = blue\n",
            "source = manufactured\n",
            "dirichlet = exact\n",
            "d1 = constant -1\n",
            "base = case9\n",
        ] {
            let kv = KeyValues::parse(text).unwrap();
            assert!(problem_from_config(&kv).is_err(), "{text}");
        }
    }
}
