use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use kamtori::fourier::{parse_frequency, GOLDEN, SQRT2};
use kamtori::geometry::SymplecticMapModel;
use kamtori::torus::FrameInverse;
use kamtori::whisker::Branch;
use kamtori::RotationVector;

/// A problem with the configuration; reported with exit status 3.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub const KEYS: &[&str] = &[
    "model", "epsilon", "a", "omega", "N", "tol", "lambda_tol", "divisor_floor", "twist_floor", "max_iter",
    "counterterm", "frame", "from", "to", "step", "out", "log", "summary", "torus", "splitting", "branch", "L",
    "rho", "s_max", "conjugacy_tol", "whisker_newton", "n_theta", "n_s",
];

/// Flat `key = value` text; `#` starts a comment.
pub fn parse_kv(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim().trim_matches('"'));
        if !KEYS.contains(&k) {
            return Err(bad(format!("line {}: unknown key '{k}'", i + 1)));
        }
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    parse_kv(&text)
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Schedule {
    /// Parameter values `from, from + step, ...` up to and including `to`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        // snapped to 12 decimals so that 0.1 * 3 reads back as 0.3
        let snap = |x: f64| format!("{x:.12}").parse::<f64>().unwrap_or(x);
        let mut v: Vec<f64> = (0..=n).map(|i| snap(self.from + i as f64 * self.step)).collect();
        if (v[n] - self.to).abs() > 1e-12 * self.step.abs() {
            v.push(self.to);
        } else {
            v[n] = self.to;
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: String,
    pub epsilon: f64,
    pub a: f64,
    pub omega: String,
    pub n: usize,
    pub tol: f64,
    pub lambda_tol: f64,
    pub divisor_floor: f64,
    pub twist_floor: f64,
    pub max_iter: usize,
    pub counterterm: bool,
    pub frame: FrameInverse,
    pub schedule: Option<Schedule>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub torus: Option<PathBuf>,
    pub splitting: Option<PathBuf>,
    pub branch: Branch,
    pub order: usize,
    /// `None` picks the balanced scale.
    pub rho: Option<f64>,
    pub s_max: f64,
    pub conjugacy_tol: f64,
    pub whisker_newton: bool,
    pub n_theta: usize,
    pub n_s: usize,
}

struct Reader<'a>(&'a BTreeMap<String, String>);

impl Reader<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> anyhow::Result<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad(format!("cannot parse {key} = '{v}'"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> anyhow::Result<bool> {
        match self.0.get(key).map(|s| s.as_str()) {
            None => Ok(default),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(v) => Err(bad(format!("{key} must be true or false, got '{v}'"))),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.0.get(key).map(PathBuf::from)
    }

    fn positive(&self, key: &str, default: f64) -> anyhow::Result<f64> {
        let v: f64 = self.get(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(bad(format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> anyhow::Result<Self> {
        let r = Reader(map);
        let n: usize = r.get("N", 256)?;
        if !n.is_power_of_two() || n < 8 {
            return Err(bad(format!("N must be a power of two (at least 8), got {n}")));
        }
        let frame = match r.get("frame", "shortcut".to_string())?.as_str() {
            "shortcut" => FrameInverse::Shortcut,
            "exact" => FrameInverse::Exact,
            other => return Err(bad(format!("frame must be shortcut or exact, got '{other}'"))),
        };
        let schedule = match (map.get("from"), map.get("to"), map.get("step")) {
            (None, None, None) => None,
            (Some(_), Some(_), Some(_)) => {
                let s = Schedule { from: r.get("from", 0.0)?, to: r.get("to", 0.0)?, step: r.get("step", 0.0)? };
                if !(s.step != 0.0 && (s.to - s.from) * s.step > 0.0 && s.step.is_finite()) {
                    return Err(bad("schedule must be monotone: step must be nonzero and point from 'from' to 'to'"));
                }
                Some(s)
            }
            _ => return Err(bad("a schedule needs all of from, to and step")),
        };
        let branch = Branch::parse(&r.get("branch", "stable".to_string())?).map_err(|e| bad(e.to_string()))?;
        let rho = match map.get("rho").map(|s| s.as_str()) {
            None | Some("auto") => None,
            Some(_) => Some(r.positive("rho", 1.0)?),
        };
        let order: usize = r.get("L", 10)?;
        if order < 1 {
            return Err(bad("L must be at least 1"));
        }
        let cfg = RunConfig {
            model: r.get("model", "standard".to_string())?,
            epsilon: r.get("epsilon", 0.0)?,
            a: r.get("a", 1.0)?,
            omega: r.get("omega", "golden".to_string())?,
            n,
            tol: r.positive("tol", 1e-12)?,
            lambda_tol: r.positive("lambda_tol", 1e-10)?,
            divisor_floor: r.positive("divisor_floor", 1e-9)?,
            twist_floor: r.positive("twist_floor", 1e-8)?,
            max_iter: r.get("max_iter", 30)?,
            counterterm: r.flag("counterterm", false)?,
            frame,
            schedule,
            out: r.path("out"),
            log: r.path("log"),
            summary: r.path("summary"),
            torus: r.path("torus"),
            splitting: r.path("splitting"),
            branch,
            order,
            rho,
            s_max: r.positive("s_max", 0.2)?,
            conjugacy_tol: r.positive("conjugacy_tol", 1e-9)?,
            whisker_newton: r.flag("whisker_newton", false)?,
            n_theta: r.get("n_theta", 64)?,
            n_s: r.get("n_s", 21)?,
        };
        cfg.model()?;
        cfg.rotation()?;
        Ok(cfg)
    }

    pub fn model(&self) -> anyhow::Result<SymplecticMapModel> {
        SymplecticMapModel::from_name(&self.model, self.a, self.epsilon).map_err(|e| bad(e.to_string()))
    }

    /// Named frequencies expand to their 32-digit decimal strings.
    pub fn rotation(&self) -> anyhow::Result<RotationVector> {
        let digits = match self.omega.as_str() {
            "golden" => GOLDEN,
            "sqrt2" => SQRT2,
            other => other,
        };
        let w = parse_frequency(digits).map_err(|e| bad(format!("omega: {e}")))?;
        RotationVector::from_scan(vec![w], 2000).map_err(|e| bad(format!("omega: {e}")))
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> anyhow::Result<&'a PathBuf> {
        value.as_ref().ok_or_else(|| bad(format!("missing required setting '{key}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> anyhow::Result<RunConfig> {
        RunConfig::from_map(&parse_kv(text)?)
    }

    #[test]
    fn defaults_are_valid() {
        let c = cfg("").unwrap();
        assert_eq!(c.n, 256);
        assert_eq!(c.tol, 1e-12);
        assert!(c.rho.is_none());
    }

    #[test]
    fn rejects_non_power_of_two() {
        let e = cfg("N = 1000").unwrap_err();
        assert!(e.downcast_ref::<ConfigError>().unwrap().0.contains("power of two"));
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["tol = -1", "frame = fancy", "from = 0\nto = 1", "from = 0\nto = 1\nstep = -0.1", "nonsense = 3", "N"] {
            assert!(cfg(text).unwrap_err().downcast_ref::<ConfigError>().is_some(), "{text}");
        }
    }

    #[test]
    fn comments_and_quotes() {
        let c = cfg("# header\nmodel = \"rotator_pendulum\"  # trailing\nepsilon=0.05\n").unwrap();
        assert_eq!(c.model().unwrap().name(), "rotator_pendulum");
        assert_eq!(c.epsilon, 0.05);
    }

    #[test]
    fn schedule_includes_endpoint() {
        let s = Schedule { from: 0.0, to: 0.5, step: 0.1 };
        let v = s.values();
        assert_eq!(v.len(), 6);
        assert_eq!(v[5], 0.5);
        assert_eq!(v[3], 0.3);
        let s = Schedule { from: 0.0, to: 0.25, step: 0.1 };
        assert_eq!(s.values(), vec![0.0, 0.1, 0.2, 0.25]);
    }

    #[test]
    fn named_frequency_matches_constant() {
        let c = cfg("omega = golden").unwrap();
        assert!((c.rotation().unwrap().omega[0] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-16);
        assert!(cfg("omega = 0.5").is_err());
    }
}
