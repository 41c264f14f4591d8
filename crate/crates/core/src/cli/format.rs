//! Output documents and their canonical text form.
//!
//! Every real number is written with 12 significant digits. Parsing a
//! document back and writing it again reproduces the same bytes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::mdab::{MdabConfig, MdabResult};

pub const SCHEMA_VERSION: &str = "1";

const SIG_DIGITS: usize = 12;

/// Writes `x` with 12 significant digits, positionally for moderate
/// exponents and in scientific form otherwise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return format!("0.{}", "0".repeat(SIG_DIGITS - 1));
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    if !(-6..SIG_DIGITS as i32).contains(&exp) {
        return format!("{sign}{mantissa}e{exp}");
    }
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if exp < 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let split = exp as usize + 1;
        let frac = &digits[split..];
        if frac.is_empty() {
            format!("{sign}{digits}.0")
        } else {
            format!("{sign}{}.{frac}", &digits[..split])
        }
    }
}

/// A real number serialized through [`format_sig`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Sig(pub f64);

impl fmt::Display for Sig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_sig(self.0))
    }
}

impl Serialize for Sig {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let n = serde_json::Number::from_str(&format_sig(self.0)).map_err(serde::ser::Error::custom)?;
        n.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Sig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Sig(Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::INFINITY)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSummary {
    pub n: u32,
    pub k: usize,
    pub flip_eps: Sig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomEntry {
    pub location: Vec<Sig>,
    pub weight: Sig,
    pub distinct_permutations: u64,
    pub expanded_weight_each: Sig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub outer_iterations: usize,
    pub adds: usize,
    pub moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaidDocument {
    pub schema_version: String,
    pub spec: SpecSummary,
    pub config_digest: String,
    pub capacity_bits: Sig,
    pub capacity_nats: Sig,
    pub dual_bound_nats: Sig,
    pub gap_nats: Sig,
    pub ordered_atoms: Vec<AtomEntry>,
    pub support_size_m: usize,
    pub trace_summary: TraceSummary,
}

impl CaidDocument {
    pub fn new(result: &MdabResult, config_digest: &str) -> Self {
        CaidDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            spec: SpecSummary {
                n: result.spec.n,
                k: result.spec.k,
                flip_eps: Sig(result.spec.flip_eps),
            },
            config_digest: config_digest.to_string(),
            capacity_bits: Sig(result.capacity_bits()),
            capacity_nats: Sig(result.capacity_nats),
            dual_bound_nats: Sig(result.dual_bound_nats),
            gap_nats: Sig(result.gap_nats),
            ordered_atoms: result
                .ordered_atoms
                .iter()
                .map(|(p, w)| {
                    let perms = p.permutation_count();
                    AtomEntry {
                        location: p.as_slice().iter().map(|&v| Sig(v)).collect(),
                        weight: Sig(*w),
                        distinct_permutations: perms,
                        expanded_weight_each: Sig(w / perms as f64),
                    }
                })
                .collect(),
            support_size_m: result.support_size_m,
            trace_summary: TraceSummary {
                outer_iterations: result.trace.len(),
                adds: result.adds(),
                moves: result.moves(),
            },
        }
    }
}

/// SHA-256 of the solver settings that influence results. The execution
/// mode is left out since both modes give identical output.
pub fn config_digest(cfg: &MdabConfig) -> String {
    let canonical = cfg.clone().with_execution(Default::default());
    let text = serde_json::to_string(&canonical).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document serializes");
    s.push('\n');
    s
}

/// Comma-separated rows with a header, LF line endings.
pub struct Csv {
    out: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Csv { out }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.out.push_str(&fields.join(","));
        self.out.push('\n');
    }

    pub fn line(&mut self, text: &str) {
        self.out.push_str(text);
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}
