//! Line-oriented `key = value` run configuration.
//!
//! Every key has a default; a config file overrides defaults and command
//! flags override the file. Unknown keys are rejected with the offending
//! line. The effective configuration is echoed verbatim into the run
//! manifest, and feeding those lines back reproduces the run byte for byte.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub enum ConfigError {
    UnknownKey { key: String, line: Option<String> },
    Parse { key: String, value: String, expected: &'static str },
    Range { key: String, message: String },
    BadLine { line_no: usize, line: String },
    Model(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey { key, line } => match line {
                Some(l) => write!(f, "unknown key `{key}` in line: {l}"),
                None => write!(f, "unknown key `{key}`"),
            },
            ConfigError::Parse { key, value, expected } => {
                write!(f, "key `{key}`: cannot parse `{value}` as {expected}")
            }
            ConfigError::Range { key, message } => write!(f, "key `{key}`: {message}"),
            ConfigError::BadLine { line_no, line } => {
                write!(f, "line {line_no}: expected `key = value`, got: {line}")
            }
            ConfigError::Model(msg) => write!(f, "disorder model: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// (key, default) registry. Keys mirror CLI flags (`--key value`).
pub const KEYS: &[(&str, &str)] = &[
    ("K", "2"),
    ("dist", "cauchy"),
    ("dist.mean", "0"),
    ("dist.std", "1"),
    ("dist.location", "0"),
    ("dist.scale", "1"),
    ("dist.breakpoints", "-1,0,1"),
    ("dist.heights", "0.5,0.5"),
    ("dist.moment_exponent", "0.5"),
    ("lambda", "0.3"),
    ("E", "0"),
    ("eta", "1e-3"),
    ("etas", "1e-2,3e-3,1e-3,3e-4,1e-4"),
    ("s", "0.5"),
    ("s_grid", "-0.25,-0.1,-0.05,0,0.05,0.1,0.25,0.4,0.5,0.6,0.7,0.8,0.9,0.95"),
    ("t_grid", "2,5,10,40"),
    ("n", "48"),
    ("chains", "2000"),
    ("pool", "20000"),
    ("sweeps", "120"),
    ("trials", "10000"),
    ("depth", "4"),
    ("alpha", "0.9"),
    ("beta", "0.5"),
    ("edge.window", "0.02"),
    ("edge.points", "5"),
    ("lifshitz.r", "5"),
    ("lifshitz.deltas", "0.3:0.9:14"),
    ("ray.r", "8"),
    ("ray.alpha", "0.015625"),
    ("resonance.n", "6"),
    ("resonance.mode", "lyapunov"),
    ("resonance.kappa", "0.1"),
    ("resonance.epsilon", "0.01"),
    ("resonance.sample_sites", "0"),
    ("ldp.s", "0.25"),
    ("ldp.epsilon", "0.05"),
    ("ldp.n_grid", "50,100,200"),
    ("dump_greens", "false"),
    ("seed", "1"),
    ("workers", "0"),
    ("out", "out"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: String,
    map: BTreeMap<String, String>,
}

/// Parse file contents plus flag overrides into a validated config.
pub fn parse_config(
    subcommand: &str,
    file_contents: &str,
    flags: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let mut map: BTreeMap<String, String> =
        KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    for (line_no, raw) in file_contents.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::BadLine { line_no: line_no + 1, line: raw.to_string() });
        };
        let key = key.trim();
        let value = value.trim();
        if !map.contains_key(key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line: Some(raw.to_string()),
            });
        }
        map.insert(key.to_string(), value.to_string());
    }
    for (key, value) in flags {
        if !map.contains_key(key.as_str()) {
            return Err(ConfigError::UnknownKey { key: key.clone(), line: None });
        }
        map.insert(key.clone(), value.clone());
    }
    let config = RunConfig { subcommand: subcommand.to_string(), map };
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn get(&self, key: &str) -> &str {
        self.map
            .get(key)
            .unwrap_or_else(|| panic!("key `{key}` missing from registry"))
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get(key).parse().map_err(|_| ConfigError::Parse {
            key: key.into(),
            value: self.get(key).into(),
            expected: "a real number",
        })
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.get(key).parse().map_err(|_| ConfigError::Parse {
            key: key.into(),
            value: self.get(key).into(),
            expected: "a nonnegative integer",
        })
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key).parse().map_err(|_| ConfigError::Parse {
            key: key.into(),
            value: self.get(key).into(),
            expected: "a 64-bit integer",
        })
    }

    pub fn u32(&self, key: &str) -> Result<u32, ConfigError> {
        self.get(key).parse().map_err(|_| ConfigError::Parse {
            key: key.into(),
            value: self.get(key).into(),
            expected: "a 32-bit integer",
        })
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(ConfigError::Parse {
                key: key.into(),
                value: other.into(),
                expected: "a boolean",
            }),
        }
    }

    /// Comma-separated reals.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| ConfigError::Parse {
                    key: key.into(),
                    value: s.into(),
                    expected: "a real number",
                })
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| ConfigError::Parse {
                    key: key.into(),
                    value: s.into(),
                    expected: "an integer",
                })
            })
            .collect()
    }

    /// Grid syntax: a scalar, `start:stop:count`, or a comma list.
    pub fn grid(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.get(key);
        if raw.contains(':') {
            let parts: Vec<&str> = raw.split(':').collect();
            if parts.len() != 3 {
                return Err(ConfigError::Parse {
                    key: key.into(),
                    value: raw.into(),
                    expected: "start:stop:count",
                });
            }
            let bad = |v: &str| ConfigError::Parse {
                key: key.into(),
                value: v.into(),
                expected: "start:stop:count",
            };
            let start: f64 = parts[0].trim().parse().map_err(|_| bad(parts[0]))?;
            let stop: f64 = parts[1].trim().parse().map_err(|_| bad(parts[1]))?;
            let count: usize = parts[2].trim().parse().map_err(|_| bad(parts[2]))?;
            if count < 1 {
                return Err(ConfigError::Range { key: key.into(), message: "count must be >= 1".into() });
            }
            if count == 1 {
                return Ok(vec![start]);
            }
            return Ok((0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect());
        }
        self.f64_list(key)
    }

    /// The disorder model described by the `dist.*` and `lambda` keys.
    /// `dist = none` means the free operator (λ forced to 0).
    pub fn model(&self) -> Result<Option<bethe::disorder::DisorderModel>, ConfigError> {
        self.model_with_lambda(self.f64("lambda")?)
    }

    /// Same family at an explicit strength (grid scans vary λ per cell).
    pub fn model_with_lambda(
        &self,
        lambda: f64,
    ) -> Result<Option<bethe::disorder::DisorderModel>, ConfigError> {
        let wrap = |r: Result<bethe::disorder::DisorderModel, bethe::disorder::DisorderError>| {
            r.map(Some).map_err(|e| ConfigError::Model(e.to_string()))
        };
        match self.get("dist") {
            "none" => {
                if lambda != 0.0 {
                    return Err(ConfigError::Range {
                        key: "lambda".into(),
                        message: "dist = none requires lambda = 0".into(),
                    });
                }
                Ok(None)
            }
            "gaussian" => {
                let mut m =
                    wrap(bethe::disorder::DisorderModel::gaussian(self.f64("dist.mean")?, self.f64("dist.std")?, lambda))?;
                set_sigma(&mut m, self.f64("dist.moment_exponent")?);
                Ok(m)
            }
            "cauchy" => {
                let mut m = wrap(bethe::disorder::DisorderModel::cauchy(
                    self.f64("dist.location")?,
                    self.f64("dist.scale")?,
                    lambda,
                ))?;
                set_sigma(&mut m, self.f64("dist.moment_exponent")?);
                Ok(m)
            }
            "uniform" => {
                let mut m = wrap(bethe::disorder::DisorderModel::uniform_symmetric(lambda))?;
                set_sigma(&mut m, self.f64("dist.moment_exponent")?);
                Ok(m)
            }
            "piecewise" => {
                let mut m = wrap(bethe::disorder::DisorderModel::piecewise_constant(
                    self.f64_list("dist.breakpoints")?,
                    self.f64_list("dist.heights")?,
                    lambda,
                ))?;
                set_sigma(&mut m, self.f64("dist.moment_exponent")?);
                Ok(m)
            }
            other => Err(ConfigError::Parse {
                key: "dist".into(),
                value: other.into(),
                expected: "one of gaussian|cauchy|uniform|piecewise|none",
            }),
        }
    }

    /// Numeric range checks shared by all subcommands.
    fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &str, message: &str| ConfigError::Range {
            key: key.into(),
            message: message.into(),
        };
        if self.u32("K")? < 2 {
            return Err(range("K", "branching number must be at least 2"));
        }
        // lambda is a grid for phase-scan and a scalar elsewhere
        let lambdas = self.grid("lambda")?;
        if lambdas.iter().any(|&l| l < 0.0) {
            return Err(range("lambda", "disorder strength must be nonnegative"));
        }
        if self.get("dist") == "none" && lambdas.iter().any(|&l| l != 0.0) {
            return Err(range("lambda", "dist = none requires lambda = 0"));
        }
        self.grid("E")?;
        if self.f64("eta")? <= 0.0 {
            return Err(range("eta", "imaginary part must be positive"));
        }
        let etas = self.f64_list("etas")?;
        if etas.is_empty() || etas.iter().any(|&e| e <= 0.0) {
            return Err(range("etas", "every eta must be positive"));
        }
        if etas.windows(2).any(|w| w[0] <= w[1]) {
            return Err(range("etas", "sequence must be strictly decreasing"));
        }
        for key in ["alpha", "beta"] {
            let v = self.f64(key)?;
            if !(0.0 < v && v < 1.0) {
                return Err(range(key, "must lie in (0,1)"));
            }
        }
        let sigma = self.f64("dist.moment_exponent")?;
        if !(0.0 < sigma && sigma < 1.0) {
            return Err(range("dist.moment_exponent", "must lie in (0,1)"));
        }
        let s_grid = self.f64_list("s_grid")?;
        if s_grid.iter().any(|&s| s >= 1.0) {
            return Err(range("s_grid", "fractional exponents must stay below 1"));
        }
        if s_grid.iter().any(|&s| s > 0.95) {
            return Err(range("s_grid", "grid is capped at s = 0.95"));
        }
        let s = self.f64("s")?;
        if !(0.0 < s && s < 1.0) {
            return Err(range("s", "must lie in (0,1)"));
        }
        if self.usize("pool")? < 1000 {
            return Err(range("pool", "population size below 1000"));
        }
        if self.usize("sweeps")? < 1 {
            return Err(range("sweeps", "need at least one sweep"));
        }
        if self.subcommand == "resonance" && self.get("resonance.mode") == "large-deviation" {
            let kappa = self.f64("resonance.kappa")?;
            if !(0.0 < kappa && kappa < 0.25) {
                return Err(range("resonance.kappa", "thinning parameter must lie in (0, 1/4)"));
            }
        }
        Ok(())
    }

    /// Effective configuration as sorted `key = value` lines; this is the
    /// manifest echo and a valid config file reproducing the run.
    pub fn echo_lines(&self) -> Vec<String> {
        self.map.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.map
    }
}

fn set_sigma(m: &mut Option<bethe::disorder::DisorderModel>, sigma: f64) {
    if let Some(model) = m {
        model.moment_exponent = sigma;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = parse_config("lyapunov", "", &[]).unwrap();
        assert_eq!(cfg.get("K"), "2");
        assert!(cfg.model().unwrap().is_some());
    }

    #[test]
    fn flags_override_file() {
        let cfg = parse_config(
            "lyapunov",
            "lambda = 0.3\n",
            &[("lambda".to_string(), "0.5".to_string())],
        )
        .unwrap();
        assert_eq!(cfg.get("lambda"), "0.5");
        assert!(cfg.echo_lines().iter().any(|l| l == "lambda = 0.5"));
    }

    #[test]
    fn unknown_keys_and_ranges_are_rejected() {
        let err = parse_config("dos", "bogus = 1\n", &[]).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
        let err = parse_config("dos", "eta = -1\n", &[]).unwrap_err();
        match err {
            ConfigError::Range { key, .. } => assert_eq!(key, "eta"),
            other => panic!("wrong error {other}"),
        }
    }

    #[test]
    fn grid_syntax() {
        let cfg = parse_config("dos", "E = -1:1:5\n", &[]).unwrap();
        assert_eq!(cfg.grid("E").unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let cfg = parse_config("dos", "E = 0.25\n", &[]).unwrap();
        assert_eq!(cfg.grid("E").unwrap(), vec![0.25]);
        let cfg = parse_config("dos", "E = 1,2,3\n", &[]).unwrap();
        assert_eq!(cfg.grid("E").unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn none_model_requires_zero_lambda() {
        assert!(parse_config("lyapunov", "dist = none\nlambda = 0\n", &[]).is_ok());
        assert!(parse_config("lyapunov", "dist = none\nlambda = 0.1\n", &[]).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config("dos", "# comment\n\nlambda = 0.7 # trailing\n", &[]).unwrap();
        assert_eq!(cfg.get("lambda"), "0.7");
    }
}
