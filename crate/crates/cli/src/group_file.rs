//! Line-oriented group files.
//!
//! ```text
//! prime=5
//! precision=1
//! factors=1
//! label=sl2-f5
//! gen=1,1,0,1
//! gen=1,0,1,1
//! ```
//!
//! The three header lines come first, then optional `label=`,
//! `expected-type=` and `pro-ell=` lines, then one `gen=` line per
//! generator with 4n residues, factor by factor, each matrix row-major.
//! Blank lines and lines starting with `#` are skipped on reading and not
//! written back.

use std::fmt::Write as _;

use pink_forge_core::{GroupElement, Mat2, ResidueRing};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing header '{0}='")]
    MissingHeader(&'static str),
    #[error("{0}")]
    Invalid(String),
}

const METADATA_KEYS: [&str; 3] = ["label", "expected-type", "pro-ell"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupFile {
    pub ring: ResidueRing,
    pub factors: usize,
    pub generators: Vec<GroupElement>,
    pub label: Option<String>,
    pub expected_type: Option<String>,
    pub pro_ell: Option<bool>,
}

impl GroupFile {
    pub fn new(ring: ResidueRing, factors: usize, generators: Vec<GroupElement>) -> Self {
        Self { ring, factors, generators, label: None, expected_type: None, pro_ell: None }
    }

    pub fn parse(text: &str) -> Result<Self, GroupFileError> {
        let mut headers: [Option<u64>; 3] = [None; 3];
        let mut meta: [Option<String>; 3] = [None, None, None];
        let mut raw_gens: Vec<(usize, Vec<u64>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let syntax = |message: String| GroupFileError::Syntax { line, message };
            let (key, value) = body.split_once('=').ok_or_else(|| syntax("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let number = |v: &str| v.parse::<u64>().map_err(|e| syntax(format!("{key}: {e}")));
            match key {
                "prime" | "precision" | "factors" => {
                    let slot = ["prime", "precision", "factors"].iter().position(|k| *k == key).unwrap();
                    if headers[slot].replace(number(value)?).is_some() {
                        return Err(syntax(format!("duplicate '{key}'")));
                    }
                }
                "gen" => {
                    let entries = value.split(',').map(|v| number(v.trim())).collect::<Result<Vec<_>, _>>()?;
                    raw_gens.push((line, entries));
                }
                _ => {
                    let Some(slot) = METADATA_KEYS.iter().position(|k| *k == key) else {
                        return Err(syntax(format!("unknown key '{key}'")));
                    };
                    if meta[slot].replace(value.to_string()).is_some() {
                        return Err(syntax(format!("duplicate '{key}'")));
                    }
                }
            }
        }
        let [prime, precision, factors] = headers;
        let prime = prime.ok_or(GroupFileError::MissingHeader("prime"))?;
        let precision = precision.ok_or(GroupFileError::MissingHeader("precision"))?;
        let factors = factors.ok_or(GroupFileError::MissingHeader("factors"))? as usize;
        if factors == 0 {
            return Err(GroupFileError::Invalid("factors must be positive".into()));
        }
        let precision = u32::try_from(precision).map_err(|_| GroupFileError::Invalid("precision too large".into()))?;
        let ring = ResidueRing::new(prime, precision).map_err(|e| GroupFileError::Invalid(e.to_string()))?;
        let mut generators = Vec::with_capacity(raw_gens.len());
        for (line, entries) in raw_gens {
            let syntax = |message: String| GroupFileError::Syntax { line, message };
            if entries.len() != 4 * factors {
                return Err(syntax(format!("expected {} residues, found {}", 4 * factors, entries.len())));
            }
            if let Some(bad) = entries.iter().find(|&&x| x >= ring.modulus()) {
                return Err(syntax(format!("residue {bad} is not below {}", ring.modulus())));
            }
            for (f, chunk) in entries.chunks(4).enumerate() {
                let det = Mat2::from_residues(ring, [chunk[0], chunk[1], chunk[2], chunk[3]]).det();
                if det.residue() != 1 % ring.modulus() {
                    return Err(syntax(format!("factor {f} has determinant {}", det.residue())));
                }
            }
            generators.push(GroupElement::from_residues(ring, &entries).map_err(|e| syntax(e.to_string()))?);
        }
        let [label, expected_type, pro_ell] = meta;
        let pro_ell = match pro_ell.as_deref() {
            None => None,
            Some("true") => Some(true),
            Some("false") => Some(false),
            Some(other) => return Err(GroupFileError::Invalid(format!("pro-ell must be true or false, not '{other}'"))),
        };
        Ok(Self { ring, factors, generators, label, expected_type, pro_ell })
    }

    pub fn write(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "prime={}", self.ring.prime());
        let _ = writeln!(out, "precision={}", self.ring.precision());
        let _ = writeln!(out, "factors={}", self.factors);
        if let Some(label) = &self.label {
            let _ = writeln!(out, "label={label}");
        }
        if let Some(t) = &self.expected_type {
            let _ = writeln!(out, "expected-type={t}");
        }
        if let Some(p) = self.pro_ell {
            let _ = writeln!(out, "pro-ell={p}");
        }
        for g in &self.generators {
            let entries: Vec<String> = g.residues().iter().map(u64::to_string).collect();
            let _ = writeln!(out, "gen={}", entries.join(","));
        }
        out
    }
}
