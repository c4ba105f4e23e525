//! TOML experiment files and function literals.

use std::fs;
use std::path::{Path, PathBuf};

use anderson_lab_core::estimators::{DEFAULT_ETAS, DEFAULT_MOMENT};
use anderson_lab_core::funcalc::BvFunction;
use anderson_lab_core::model::{ModelConfig, Site};
use anderson_lab_core::overlap::DEFAULT_ZERO_THRESHOLD;
use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// Contents of a config file. Only `[model]` is required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelConfig,
    #[serde(default)]
    pub estimators: EstimatorSection,
    #[serde(default)]
    pub overlap: OverlapSection,
    #[serde(default)]
    pub funcalc: FuncalcSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    /// Realizations per estimate.
    pub n: usize,
    /// Fractional moment `s` of the FMB scan.
    pub moment: f64,
    pub etas: Vec<f64>,
    /// Schatten exponent for kernel and boundary scans.
    pub schatten_p: f64,
    /// Explicit site pairs; overrides `--distances` and `--offsets`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairEntry>>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection { n: 500, moment: DEFAULT_MOMENT, etas: DEFAULT_ETAS.to_vec(), schatten_p: 1.0, pairs: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    #[serde(with = "site_list")]
    pub a: Site,
    #[serde(with = "site_list")]
    pub b: Site,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapSection {
    pub zero_threshold: f64,
}

impl Default for OverlapSection {
    fn default() -> Self {
        OverlapSection { zero_threshold: DEFAULT_ZERO_THRESHOLD }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuncalcSection {
    /// Function literal used when `--function` is not given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
}

mod site_list {
    use anderson_lab_core::model::Site;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(site: &Site, s: S) -> Result<S::Ok, S::Error> {
        if site[1] == 0 {
            s.collect_seq([site[0]])
        } else {
            s.collect_seq(site.iter())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Site, D::Error> {
        match Vec::<i64>::deserialize(d)?.as_slice() {
            [x] => Ok([*x, 0]),
            [x, y] => Ok([*x, *y]),
            _ => Err(D::Error::custom("site must have one or two coordinates")),
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, LabError> {
        let config: ConfigFile = toml::from_str(text).map_err(|e| LabError::Config(e.message().to_string()))?;
        config.model.validate().map_err(|e| LabError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses `indicator(E)`, `interval(E1,E2)`, `ramp(E,width)`,
/// `constant(c)`, `zero` or `table(path)`. Table paths are resolved
/// against `base`; the file holds `x,y` rows.
pub fn parse_function(literal: &str, base: Option<&Path>) -> Result<BvFunction, LabError> {
    let bad = |why: &str| LabError::Config(format!("function literal `{literal}`: {why}"));
    let s = literal.trim();
    if s == "zero" {
        return Ok(BvFunction::zero());
    }
    let open = s.find('(').ok_or_else(|| bad("expected name(args)"))?;
    if !s.ends_with(')') {
        return Err(bad("missing closing parenthesis"));
    }
    let name = s[..open].trim();
    let inner = &s[open + 1..s.len() - 1];
    if name == "table" {
        let rel = PathBuf::from(inner.trim());
        let path = match base {
            Some(b) if rel.is_relative() => b.join(rel),
            _ => rel,
        };
        return read_table(&path).map_err(|e| bad(&e));
    }
    let args: Vec<f64> = inner
        .split(',')
        .map(|a| a.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("arguments must be numbers"))?;
    let core = |r: anderson_lab_core::Result<BvFunction>| r.map_err(|e| bad(&e.to_string()));
    match (name, args.as_slice()) {
        ("indicator", [e]) => Ok(BvFunction::indicator(*e)),
        ("interval", [a, b]) => core(BvFunction::interval(*a, *b)),
        ("ramp", [e, w]) => core(BvFunction::ramp(*e, *w)),
        ("constant", [c]) => Ok(BvFunction::constant(*c)),
        ("indicator" | "interval" | "ramp" | "constant", _) => Err(bad("wrong number of arguments")),
        _ => Err(bad("unknown function")),
    }
}

fn read_table(path: &Path) -> Result<BvFunction, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() != 2 {
            return Err(format!("{}: rows must have two columns", path.display()));
        }
        let x: f64 = record[0].parse().map_err(|_| format!("bad number `{}`", &record[0]))?;
        let y: f64 = record[1].parse().map_err(|_| format!("bad number `{}`", &record[1]))?;
        points.push((x, y));
    }
    BvFunction::table(points).map_err(|e| e.to_string())
}

/// A comma list `a,b,c` or an inclusive linear grid `lo:hi:count`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, LabError> {
    let bad = || LabError::Config(format!("grid `{text}`: expected `a,b,...` or `lo:hi:count`"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect(),
        [lo, hi, count] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            match count {
                0 => Err(bad()),
                1 => Ok(vec![lo]),
                _ => Ok((0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()),
            }
        }
        _ => Err(bad()),
    }
}

pub fn parse_ints(text: &str) -> Result<Vec<i64>, LabError> {
    text.split(',')
        .map(|v| v.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| LabError::Config(format!("`{text}`: expected a comma list of integers")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[model]
dimension = 1
sites_per_side = 40
coupling = 5.0
perturbation_strength = 0.5
seed = 17
perturbation = [{ site = [0], value = 1.0 }]

[model.tolerances]
eig_tol = 1e-10
kernel_tol = 1e-6
det_tol = 1e-8

[estimators]
n = 20
pairs = [{ a = [-2], b = [2] }]
"#;

    #[test]
    fn round_trip_is_lossless() {
        let c = ConfigFile::parse(SAMPLE).unwrap();
        assert_eq!(c.model.sites_per_side, 40);
        assert_eq!(c.estimators.n, 20);
        assert_eq!(c.estimators.pairs.as_ref().unwrap()[0].a, [-2, 0]);
        let again = ConfigFile::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = SAMPLE.replace("coupling = 5.0", "coupling = 5.0\ncuopling = 1.0");
        let err = ConfigFile::parse(&text).unwrap_err().to_string();
        assert!(err.contains("cuopling"), "{err}");
        let text = SAMPLE.replace("n = 20", "n = 20\nrealizations = 3");
        assert!(ConfigFile::parse(&text).unwrap_err().to_string().contains("realizations"));
    }

    #[test]
    fn invalid_model_is_config_error() {
        let text = SAMPLE.replace("coupling = 5.0", "coupling = -1.0");
        assert!(matches!(ConfigFile::parse(&text), Err(LabError::Config(_))));
    }

    #[test]
    fn function_literals() {
        assert_eq!(parse_function("indicator(1.5)", None).unwrap(), BvFunction::indicator(1.5));
        assert_eq!(parse_function(" ramp(1, 0.5) ", None).unwrap(), BvFunction::ramp(1.0, 0.5).unwrap());
        assert_eq!(parse_function("interval(0,1)", None).unwrap(), BvFunction::interval(0.0, 1.0).unwrap());
        assert_eq!(parse_function("zero", None).unwrap(), BvFunction::zero());
        assert!(parse_function("indicator(1,2)", None).is_err());
        assert!(parse_function("sine(1)", None).is_err());
        assert!(parse_function("ramp(1,-1)", None).is_err());
    }

    #[test]
    fn table_literal_reads_relative_path() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "# x,y\n0,1\n1,0\n").unwrap();
        let f = parse_function("table(f.csv)", Some(dir.path())).unwrap();
        assert_eq!(f.eval(0.5), 0.5);
        assert!(parse_function("table(missing.csv)", Some(dir.path())).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("0:1").is_err());
        assert_eq!(parse_ints("-2,4").unwrap(), vec![-2, 4]);
    }
}
