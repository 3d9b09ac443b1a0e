//! Flat key/value configuration files and the exact parsers shared with the
//! CLI flags. Exponents stay rational end to end; every problem found in a
//! file is reported, not just the first.

use crate::geometry::Rat;
use crate::sharpness::{ExperimentConfig, Theorem};
use crate::{Error, ExponentData, Result, WeightMode};
use num_rational::Ratio;
use num_traits::Zero;
use std::collections::BTreeMap;
use std::path::Path;

/// Output format of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Parse(format!("format must be csv or json, got {other:?}"))),
        }
    }
}

/// Fully resolved run parameters of an experiment subcommand.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub exponents: ExponentData,
    pub eps_list: Vec<Rat>,
    pub mesh_level: u32,
    pub root_lo: i64,
    pub root_hi: i64,
    pub scan_level: Option<i32>,
    pub seed: u64,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn experiment(&self, theorem: Theorem) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.exponents.clone(), theorem);
        cfg.eps_list = self.eps_list.clone();
        cfg.mesh_level = self.mesh_level;
        cfg.root_lo = self.root_lo;
        cfg.root_hi = self.root_hi;
        cfg.scan_level = self.scan_level;
        cfg
    }
}

/// Parse a rational written as `a/b` or as an integer.
pub fn parse_rational(s: &str) -> Result<Rat> {
    let s = s.trim();
    let mk_err = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let n: i128 = num.trim().parse().map_err(|_| mk_err())?;
        let d: i128 = den.trim().parse().map_err(|_| mk_err())?;
        if d == 0 {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(Ratio::new(n, d))
    } else {
        let n: i128 = s.parse().map_err(|_| mk_err())?;
        Ok(Ratio::from_integer(n))
    }
}

/// Parse a comma list of rationals.
pub fn parse_rational_list(s: &str) -> Result<Vec<Rat>> {
    s.split(',').map(parse_rational).collect()
}

/// Parse an eps specification: either a geometric range `2^-3..2^-10` or a
/// comma list of rationals.
pub fn parse_eps_list(s: &str) -> Result<Vec<Rat>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let lo = parse_pow2(a)?;
        let hi = parse_pow2(b)?;
        if lo < hi {
            return Err(Error::Parse(format!(
                "eps range must go from larger to smaller: {s:?}"
            )));
        }
        let mut out = Vec::new();
        let mut e = lo;
        while e >= hi {
            out.push(e);
            e /= 2;
        }
        return Ok(out);
    }
    let list = parse_rational_list(s)?;
    if list.iter().any(|e| *e <= Rat::zero()) {
        return Err(Error::Parse("eps values must be positive".into()));
    }
    Ok(list)
}

fn parse_pow2(s: &str) -> Result<Rat> {
    let s = s.trim();
    if let Some(exp) = s.strip_prefix("2^") {
        let k: i32 = exp
            .parse()
            .map_err(|_| Error::Parse(format!("bad power of two: {s:?}")))?;
        return Ok(crate::geometry::pow2(k));
    }
    parse_rational(s)
}

/// Parse a root interval `lo..hi` with integer endpoints.
pub fn parse_root(s: &str) -> Result<(i64, i64)> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Parse(format!("root must be lo..hi, got {s:?}")))?;
    let lo: i64 = a.trim().parse().map_err(|_| Error::Parse(format!("bad root bound {a:?}")))?;
    let hi: i64 = b.trim().parse().map_err(|_| Error::Parse(format!("bad root bound {b:?}")))?;
    if hi <= lo {
        return Err(Error::Parse(format!("empty root {s:?}")));
    }
    Ok((lo, hi))
}

const KNOWN_KEYS: &[&str] = &[
    "n", "m", "alpha", "p", "q", "eps_list", "mesh_level", "root", "scan_level", "seed",
    "format", "mode",
];

/// Load a flat `key = value` file. Unknown keys, missing keys, unparsable
/// values, and exponent inconsistencies are all collected and reported
/// together.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    let mut problems: Vec<String> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                let key = k.trim().to_string();
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    problems.push(format!("line {}: unknown key {key:?}", lineno + 1));
                } else if kv.insert(key.clone(), v.trim().to_string()).is_some() {
                    problems.push(format!("line {}: duplicate key {key:?}", lineno + 1));
                }
            }
            None => problems.push(format!("line {}: expected key = value", lineno + 1)),
        }
    }

    macro_rules! take {
        ($key:literal) => {
            match kv.get($key) {
                Some(v) => Some(v.as_str()),
                None => {
                    problems.push(format!("missing key {:?}", $key));
                    None
                }
            }
        };
    }

    let n = take!("n").and_then(|v| match v.parse::<u32>() {
        Ok(n) if n >= 1 => Some(n),
        _ => {
            problems.push(format!("n must be a positive integer, got {v:?}"));
            None
        }
    });
    let m = take!("m").and_then(|v| match v.parse::<usize>() {
        Ok(m) if m >= 1 => Some(m),
        _ => {
            problems.push(format!("m must be a positive integer, got {v:?}"));
            None
        }
    });
    let alpha = take!("alpha").and_then(|v| match parse_rational(v) {
        Ok(a) => Some(a),
        Err(e) => {
            problems.push(format!("alpha: {e}"));
            None
        }
    });
    let p = take!("p").and_then(|v| match parse_rational_list(v) {
        Ok(p) => Some(p),
        Err(e) => {
            problems.push(format!("p: {e}"));
            None
        }
    });
    let q = kv.get("q").map(|v| parse_rational(v)).transpose().unwrap_or_else(|e| {
        problems.push(format!("q: {e}"));
        None
    });
    let mode = match kv.get("mode").map(String::as_str) {
        None | Some("homogeneous") => WeightMode::Homogeneous,
        Some("two-weight") => WeightMode::TwoWeight,
        Some(other) => {
            problems.push(format!("mode must be homogeneous or two-weight, got {other:?}"));
            WeightMode::Homogeneous
        }
    };
    let eps_list = take!("eps_list").and_then(|v| match parse_eps_list(v) {
        Ok(e) => Some(e),
        Err(e) => {
            problems.push(format!("eps_list: {e}"));
            None
        }
    });
    let mesh_level = take!("mesh_level").and_then(|v| match v.parse::<u32>() {
        Ok(l) => Some(l),
        _ => {
            problems.push(format!("mesh_level must be an integer, got {v:?}"));
            None
        }
    });
    let root = take!("root").and_then(|v| match parse_root(v) {
        Ok(r) => Some(r),
        Err(e) => {
            problems.push(format!("root: {e}"));
            None
        }
    });
    let scan_level = match kv.get("scan_level") {
        Some(v) => match v.parse::<i32>() {
            Ok(l) => Some(l),
            Err(_) => {
                problems.push(format!("scan_level must be an integer, got {v:?}"));
                None
            }
        },
        None => None,
    };
    let seed = take!("seed").and_then(|v| match v.parse::<u64>() {
        Ok(s) => Some(s),
        _ => {
            problems.push(format!("seed must be an unsigned integer, got {v:?}"));
            None
        }
    });
    let format = take!("format").and_then(|v| match v.parse::<OutputFormat>() {
        Ok(f) => Some(f),
        Err(e) => {
            problems.push(format!("{e}"));
            None
        }
    });

    // exponent consistency, checked exactly
    let exponents = match (n, m, alpha, p) {
        (Some(n), Some(m), Some(alpha), Some(p)) => {
            if p.len() != m {
                problems.push(format!("p lists {} exponents but m = {m}", p.len()));
                None
            } else {
                let built = match (mode, q) {
                    (WeightMode::TwoWeight, Some(q)) => ExponentData::two_weight(n, alpha, p, q),
                    (WeightMode::TwoWeight, None) => Err(Error::InvalidExponents(
                        "two-weight mode requires q".into(),
                    )),
                    (WeightMode::Homogeneous, Some(q)) => {
                        ExponentData::homogeneous_with_q(n, alpha, p, q).map_err(|_| {
                            Error::InvalidExponents(
                                "q violates 1/p_1 + ... + 1/p_m = 1/q + alpha/n".into(),
                            )
                        })
                    }
                    (WeightMode::Homogeneous, None) => ExponentData::homogeneous(n, alpha, p),
                };
                match built {
                    Ok(e) => Some(e),
                    Err(e) => {
                        problems.push(e.to_string());
                        None
                    }
                }
            }
        }
        _ => None,
    };

    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let (root_lo, root_hi) = root.unwrap();
    Ok(RunConfig {
        exponents: exponents.unwrap(),
        eps_list: eps_list.unwrap(),
        mesh_level: mesh_level.unwrap(),
        root_lo,
        root_hi,
        scan_level,
        seed: seed.unwrap(),
        format: format.unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rat;

    const MINIMAL: &str = "\
n = 1
m = 2
alpha = 1/2
p = 4/3,4
eps_list = 2^-3..2^-10
mesh_level = 10
root = -2..2
seed = 42
format = csv
";

    #[test]
    fn minimal_file_derives_q() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.exponents.q(), rat(2, 1));
        assert_eq!(cfg.eps_list.len(), 8);
        assert_eq!(cfg.eps_list[0], rat(1, 8));
        assert_eq!(cfg.format, OutputFormat::Csv);
    }

    #[test]
    fn inconsistent_q_names_the_relation() {
        let text = format!("{MINIMAL}q = 3\n");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1/p_1 + ... + 1/p_m = 1/q + alpha/n"), "{msg}");
    }

    #[test]
    fn two_weight_mode_accepts_p_le_q_without_homogeneity() {
        let text = format!("{MINIMAL}q = 3\nmode = two-weight\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.exponents.mode(), WeightMode::TwoWeight);
        assert_eq!(cfg.exponents.q(), rat(3, 1));
    }

    #[test]
    fn all_problems_reported_together() {
        let text = "n = 0\nm = 2\nalpha = x\np = 2,2\nbogus = 1\neps_list = 2^-3..2^-4\nmesh_level = 6\nroot = -1..1\nseed = 1\nformat = csv\n";
        let err = parse_config(text).unwrap_err();
        match err {
            Error::Config(problems) => {
                assert!(problems.len() >= 3, "{problems:?}");
                assert!(problems.iter().any(|p| p.contains("unknown key")));
                assert!(problems.iter().any(|p| p.contains("alpha")));
                assert!(problems.iter().any(|p| p.contains('n')));
            }
            other => panic!("expected Config, got {other}"),
        }
    }

    #[test]
    fn eps_parsers() {
        assert_eq!(parse_eps_list("2^-3..2^-5").unwrap(), vec![rat(1, 8), rat(1, 16), rat(1, 32)]);
        assert_eq!(parse_eps_list("1/4,1/8").unwrap(), vec![rat(1, 4), rat(1, 8)]);
        assert!(parse_eps_list("2^-5..2^-3").is_err());
        assert!(parse_rational("4/0").is_err());
        assert_eq!(parse_root("-2..2").unwrap(), (-2, 2));
    }
}
