//! TOML run configuration.
//!
//! ```toml
//! [material]
//! N = 2
//! sigma = [[0, 1], [1, 0]]
//! mu = [[0, 1], [1, 0]]
//!
//! [scales]
//! gamma = "auto"
//! beta = "auto"
//!
//! [grid]
//! dim = 2
//! sizes = [256, 256]
//!
//! [scheme]
//! h = 1e-4
//! steps = 200
//!
//! [initial]
//! kind = "disk"
//! radius = 0.3
//!
//! [output]
//! dir = "out"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::kernel::{compute_coefficients, suggest_scales, KernelCoefficients, MaterialSpec};
use crate::presets::{InitialCondition, PRESET_NAMES};
use crate::scheme::{SchemeConfig, TieBreak};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    material: RawMaterial,
    #[serde(default)]
    scales: RawScales,
    grid: RawGrid,
    scheme: RawScheme,
    initial: RawInitial,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterial {
    #[serde(rename = "N")]
    n: usize,
    sigma: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ScaleValue {
    Value(f64),
    Keyword(String),
}

impl Default for ScaleValue {
    fn default() -> Self {
        Self::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScales {
    #[serde(default)]
    gamma: ScaleValue,
    #[serde(default)]
    beta: ScaleValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: usize,
    sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    h: f64,
    steps: usize,
    #[serde(default = "default_tie_break")]
    tie_break: String,
    #[serde(default)]
    record_every: usize,
}

fn default_tie_break() -> String {
    "lowest-index".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inside: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outside: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_dir")]
    dir: PathBuf,
    /// Write `probes.csv` with radius and interface measurements.
    #[serde(default)]
    probes: bool,
    /// Write a PGM preview next to every snapshot.
    #[serde(default = "default_true")]
    pgm: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            probes: false,
            pgm: true,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub probes: bool,
    pub pgm: bool,
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub material: MaterialSpec,
    pub coeffs: KernelCoefficients,
    /// Whether the scales came from `suggest_scales`.
    pub auto_scales: bool,
    pub grid: GridSpec,
    pub scheme: SchemeConfig,
    pub initial: InitialCondition,
    pub output: OutputConfig,
    echo: RawConfig,
}

fn field_err(path: &str, message: impl Into<String>) -> Error {
    Error::ConfigField {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    /// TOML with every default filled in and `auto` scales replaced by the
    /// values actually used.
    pub fn echo(&self) -> String {
        let mut text = String::new();
        if self.auto_scales {
            text += "# scales resolved from \"auto\"\n";
        }
        text + &toml::to_string(&self.echo).expect("config serializes")
    }

    /// Replaces the preset's RNG seed, for presets that have one.
    pub fn override_seed(&mut self, seed: u64) {
        if let InitialCondition::Voronoi { seed: s, .. } = &mut self.initial {
            *s = seed;
            self.echo.initial.seed = Some(seed);
        }
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.output.dir = dir.clone();
        self.echo.output.dir = dir;
    }
}

/// Parses and resolves a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::ConfigParse {
            line,
            message: e.message().to_string(),
        }
    })?;
    resolve(raw)
}

fn resolve(mut raw: RawConfig) -> Result<RunConfig> {
    let m = &raw.material;
    for (name, rows) in [("sigma", &m.sigma), ("mu", &m.mu)] {
        if rows.len() != m.n || rows.iter().any(|r| r.len() != m.n) {
            return Err(field_err(
                &format!("material.{name}"),
                format!("expected a {n}x{n} matrix for N = {n}", n = m.n),
            ));
        }
    }
    let material = MaterialSpec::from_rows(&m.sigma, &m.mu).map_err(|e| match e {
        Error::Asymmetric { name, .. } | Error::MaterialEntry { name, .. } => {
            field_err(&format!("material.{name}"), e.to_string())
        }
        other => field_err("material", other.to_string()),
    })?;

    let (gamma, beta, auto_scales) = match (&raw.scales.gamma, &raw.scales.beta) {
        (ScaleValue::Value(g), ScaleValue::Value(b)) => (*g, *b, false),
        (ScaleValue::Keyword(g), ScaleValue::Keyword(b)) if g == "auto" && b == "auto" => {
            let (g, b) = suggest_scales(&material).map_err(|e| field_err("scales", e.to_string()))?;
            (g, b, true)
        }
        _ => {
            return Err(field_err(
                "scales",
                "gamma and beta must both be numbers or both be \"auto\"",
            ))
        }
    };
    let coeffs = compute_coefficients(&material, gamma, beta).map_err(|e| field_err("scales", e.to_string()))?;
    raw.scales = RawScales {
        gamma: ScaleValue::Value(gamma),
        beta: ScaleValue::Value(beta),
    };

    if raw.grid.sizes.len() != raw.grid.dim {
        return Err(field_err(
            "grid.sizes",
            format!("{} sizes for dim = {}", raw.grid.sizes.len(), raw.grid.dim),
        ));
    }
    let grid = GridSpec::new(&raw.grid.sizes).map_err(|e| field_err("grid", e.to_string()))?;

    let s = &raw.scheme;
    if !(s.h.is_finite() && s.h > 0.0) {
        return Err(field_err("scheme.h", format!("must be positive, got {}", s.h)));
    }
    if s.steps == 0 {
        return Err(field_err("scheme.steps", "must be at least 1"));
    }
    let tie_break: TieBreak = s
        .tie_break
        .parse()
        .map_err(|e: Error| field_err("scheme.tie_break", e.to_string()))?;
    let scheme = SchemeConfig {
        h: s.h,
        steps: s.steps,
        tie_break,
        record_every: s.record_every,
        keep_reports: false,
    };

    let initial = initial_condition(&mut raw.initial, grid.dim())?;
    initial
        .build(&grid, material.num_phases())
        .map_err(|e| field_err("initial", e.to_string()))?;

    let output = OutputConfig {
        dir: raw.output.dir.clone(),
        probes: raw.output.probes,
        pgm: raw.output.pgm,
    };
    Ok(RunConfig {
        material,
        coeffs,
        auto_scales,
        grid,
        scheme,
        initial,
        output,
        echo: raw,
    })
}

/// Builds the preset, writing defaults back into `raw` for the echo.
fn initial_condition(raw: &mut RawInitial, dim: usize) -> Result<InitialCondition> {
    let path = |key: &str| format!("initial.{key}");
    let allowed: &[&str] = match raw.kind.as_str() {
        "disk" => &["radius", "center", "inside", "outside"],
        "stripe" => &["axis", "offset", "width", "inside", "outside"],
        "mercedes" => &["center", "phases", "rotation"],
        "voronoi" => &["seeds", "seed"],
        "raw" => &["path"],
        other => {
            return Err(field_err(
                "initial.kind",
                format!("unknown preset {other:?}; available presets: {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    let present = [
        ("radius", raw.radius.is_some()),
        ("center", raw.center.is_some()),
        ("inside", raw.inside.is_some()),
        ("outside", raw.outside.is_some()),
        ("axis", raw.axis.is_some()),
        ("offset", raw.offset.is_some()),
        ("width", raw.width.is_some()),
        ("phases", raw.phases.is_some()),
        ("rotation", raw.rotation.is_some()),
        ("seeds", raw.seeds.is_some()),
        ("seed", raw.seed.is_some()),
        ("path", raw.path.is_some()),
    ];
    if let Some((key, _)) = present.iter().find(|(k, set)| *set && !allowed.contains(k)) {
        return Err(field_err(&path(key), format!("not a parameter of the {} preset", raw.kind)));
    }
    let positive = |key: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(field_err(&path(key), format!("must be positive, got {v}")))
        }
    };
    Ok(match raw.kind.as_str() {
        "disk" => {
            let radius = positive("radius", *raw.radius.get_or_insert(0.25))?;
            let center = raw.center.get_or_insert_with(|| vec![0.5; dim]).clone();
            if center.len() != dim {
                return Err(field_err(&path("center"), format!("expected {dim} coordinates")));
            }
            InitialCondition::Disk {
                radius,
                center,
                inside: *raw.inside.get_or_insert(1),
                outside: *raw.outside.get_or_insert(0),
            }
        }
        "stripe" => InitialCondition::Stripe {
            axis: *raw.axis.get_or_insert(0),
            offset: *raw.offset.get_or_insert(0.25),
            width: positive("width", *raw.width.get_or_insert(0.5))?,
            inside: *raw.inside.get_or_insert(1),
            outside: *raw.outside.get_or_insert(0),
        },
        "mercedes" => {
            let c = raw.center.get_or_insert_with(|| vec![0.5, 0.5]).clone();
            let p = raw.phases.get_or_insert_with(|| vec![0, 1, 2]).clone();
            let center: [f64; 2] = c
                .try_into()
                .map_err(|_| field_err(&path("center"), "expected 2 coordinates"))?;
            let phases: [usize; 3] = p
                .try_into()
                .map_err(|_| field_err(&path("phases"), "expected 3 phase indices"))?;
            let rotation = *raw.rotation.get_or_insert(0.0);
            if !rotation.is_finite() {
                return Err(field_err(&path("rotation"), "must be finite"));
            }
            InitialCondition::Mercedes {
                center,
                phases,
                rotation,
            }
        }
        "voronoi" => InitialCondition::Voronoi {
            seeds: *raw.seeds.get_or_insert(64),
            seed: *raw.seed.get_or_insert(0),
        },
        _ => InitialCondition::Raw {
            path: raw
                .path
                .clone()
                .ok_or_else(|| field_err(&path("path"), "raw preset needs a snapshot path"))?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[material]
N = 2
sigma = [[0, 1], [1, 0]]
mu = [[0, 1], [1, 0]]

[scales]
gamma = "auto"
beta = "auto"

[grid]
dim = 2
sizes = [256, 256]

[scheme]
h = 1e-4
steps = 200

[initial]
kind = "disk"
radius = 0.3
"#;

    fn expect_field(text: &str, path: &str) -> String {
        match parse_config(text) {
            Err(Error::ConfigField { path: p, message }) => {
                assert_eq!(p, path, "{message}");
                message
            }
            other => panic!("expected error at {path}, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_resolves_auto_scales() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!((c.coeffs.gamma, c.coeffs.beta), (2.0, 0.5));
        assert!(c.auto_scales);
        let echo = c.echo();
        assert!(echo.contains("gamma = 2.0") && echo.contains("beta = 0.5"), "{echo}");
        // The echo parses back to the same run.
        let again = parse_config(&echo).unwrap();
        assert_eq!(again.initial, c.initial);
        assert_eq!(again.scheme, c.scheme);
    }

    #[test]
    fn asymmetric_sigma_names_the_field() {
        let text = MINIMAL.replace("sigma = [[0, 1], [1, 0]]", "sigma = [[0, 1], [2, 0]]");
        expect_field(&text, "material.sigma");
    }

    #[test]
    fn phase_count_mismatch() {
        let text = MINIMAL.replace("N = 2", "N = 3");
        expect_field(&text, "material.sigma");
    }

    #[test]
    fn unknown_preset_lists_available() {
        let text = MINIMAL.replace("kind = \"disk\"", "kind = \"hexagon\"");
        let msg = expect_field(&text, "initial.kind");
        for name in PRESET_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = MINIMAL.replace("steps = 200", "steps = = 200");
        match parse_config(&text) {
            Err(Error::ConfigParse { line, .. }) => assert_eq!(line, 17),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("steps = 200", "steps = 200\nbogus = 1");
        assert!(matches!(parse_config(&text), Err(Error::ConfigParse { line: 18, .. })));
    }

    #[test]
    fn mixed_scales_rejected() {
        let text = MINIMAL.replace("gamma = \"auto\"", "gamma = 4.0");
        expect_field(&text, "scales");
    }

    #[test]
    fn foreign_preset_parameter_rejected() {
        let text = MINIMAL.replace("radius = 0.3", "radius = 0.3\nseeds = 4");
        expect_field(&text, "initial.seeds");
    }

    #[test]
    fn seed_override() {
        let text = MINIMAL
            .replace("kind = \"disk\"\nradius = 0.3", "kind = \"voronoi\"\nseeds = 8\nseed = 1");
        let mut c = parse_config(&text).unwrap();
        c.override_seed(99);
        assert_eq!(c.initial, InitialCondition::Voronoi { seeds: 8, seed: 99 });
        assert!(c.echo().contains("seed = 99"));
    }
}
