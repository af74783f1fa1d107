//! TOML run configuration. Every field is optional; command-line flags win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ecp_core::grid::Span;
use ecp_core::homodyne::QuadratureConvention;
use ecp_core::linalg::C64;
use ecp_core::state::SchmidtTriple;
use serde::Deserialize;

use crate::CliError;

/// Norm error that is fixed up with a warning instead of rejected.
pub const AUTO_NORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    /// Exact Fourier-basis detection.
    #[default]
    Ideal,
    /// Detection through the composed beam-splitter network.
    Composed,
}

/// A coefficient written as a number or as a complex literal like `"0.5+0.2i"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CoeffValue {
    Real(f64),
    Text(String),
}

impl CoeffValue {
    fn to_complex(&self) -> Result<C64, CliError> {
        match self {
            CoeffValue::Real(x) => Ok(C64::new(*x, 0.0)),
            CoeffValue::Text(s) => parse_complex(s),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomodyneSection {
    pub probe_amp: Option<f64>,
    pub theta: Option<f64>,
    pub theta2: Option<f64>,
    pub gamma_t: Option<f64>,
    pub convention: Option<QuadratureConvention>,
    pub ideal_detection: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub kind: Option<Network>,
    pub eps: Option<f64>,
    pub d_omega: Option<f64>,
    pub d_phi: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub alpha: Option<String>,
    pub gamma_t: Option<String>,
    pub theta: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsSection {
    pub eps: Option<String>,
    pub delta: Option<String>,
    pub omega: Option<f64>,
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub coeffs: Option<Vec<CoeffValue>>,
    pub phases: Option<Vec<f64>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub chunk_size: Option<u64>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub homodyne: HomodyneSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub optics: OpticsSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

/// Parses `1`, `-0.5`, `0.3+0.4i`, `2i`.
pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let t = s.trim();
    C64::from_str(t)
        .ok()
        .filter(|c| c.re.is_finite() && c.im.is_finite())
        .ok_or_else(|| CliError::Validation(format!("bad coefficient {s:?}")))
}

/// Comma-separated coefficients.
pub fn parse_coeff_list(s: &str) -> Result<Vec<CoeffValue>, CliError> {
    Ok(s.split(',').map(|x| CoeffValue::Text(x.trim().to_string())).collect())
}

/// Comma-separated reals.
pub fn parse_reals(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Validation(format!("bad number {x:?}")))
        })
        .collect()
}

/// `start:stop:points` or a single value.
pub fn parse_span(s: &str) -> Result<Span, CliError> {
    let parts = parse_reals_sep(s, ':')?;
    let span = match parts.as_slice() {
        [x] => Span::point(*x),
        [a, b, n] if n.fract() == 0.0 && *n >= 1.0 => Span::new(*a, *b, *n as usize)?,
        _ => return Err(CliError::Validation(format!("bad range {s:?}, expected start:stop:points"))),
    };
    Ok(span)
}

fn parse_reals_sep(s: &str, sep: char) -> Result<Vec<f64>, CliError> {
    s.split(sep)
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Validation(format!("bad number {x:?} in {s:?}")))
        })
        .collect()
}

/// Builds the triple. Inputs with a norm error below [`AUTO_NORMALIZE_TOL`]
/// are rescaled and `warn` is called; larger errors are rejected.
pub fn resolve_coeffs(
    values: &[CoeffValue],
    phases: Option<&[f64]>,
    warn: &mut dyn FnMut(String),
) -> Result<SchmidtTriple, CliError> {
    if values.len() != 3 {
        return Err(CliError::Validation(format!("expected three coefficients, got {}", values.len())));
    }
    let mut c = [C64::new(0.0, 0.0); 3];
    for (slot, v) in c.iter_mut().zip(values) {
        *slot = v.to_complex()?;
    }
    if let Some(p) = phases {
        if p.len() != 3 {
            return Err(CliError::Validation(format!("expected three phases, got {}", p.len())));
        }
        for i in 0..3 {
            c[i] *= C64::from_polar(1.0, p[i]);
        }
    }
    let norm_sqr: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    let off = (norm_sqr - 1.0).abs();
    if off > AUTO_NORMALIZE_TOL {
        return Err(CliError::Validation(format!("coefficients have squared norm {norm_sqr}, not 1")));
    }
    if off > ecp_core::state::NORM_TOL {
        warn(format!("coefficients have squared norm {norm_sqr}; rescaling to 1"));
    }
    Ok(SchmidtTriple::normalized(c[0], c[1], c[2])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.3+0.4i").unwrap(), C64::new(0.3, 0.4));
        assert_eq!(parse_complex(" 1 ").unwrap(), C64::new(1.0, 0.0));
        assert!(parse_complex("x").is_err());
        assert!(parse_complex("inf").is_err());
    }

    #[test]
    fn spans() {
        assert_eq!(parse_span("0.35").unwrap().values(), vec![0.35]);
        assert_eq!(parse_span("0:1:3").unwrap().values(), vec![0.0, 0.5, 1.0]);
        assert!(parse_span("0:1").is_err());
        assert!(parse_span("0:1:2.5").is_err());
        assert!(parse_span("0:1:0").is_err());
    }

    #[test]
    fn normalization_policy() {
        let mut warnings = Vec::new();
        let mut warn = |s: String| warnings.push(s);
        let exact = parse_coeff_list("0.6,0.8,0").unwrap();
        resolve_coeffs(&exact, None, &mut warn).unwrap();
        let near = parse_coeff_list("0.57735,0.57735,0.57735").unwrap();
        let t = resolve_coeffs(&near, None, &mut warn).unwrap();
        assert!((t.alpha().re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let far = parse_coeff_list("1,1,1").unwrap();
        assert!(resolve_coeffs(&far, None, &mut warn).is_err());
        assert!(resolve_coeffs(&exact[..2], None, &mut warn).is_err());
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn phases_rotate_coefficients() {
        let v = parse_coeff_list("0.6,0.8,0").unwrap();
        let t = resolve_coeffs(&v, Some(&[0.0, std::f64::consts::FRAC_PI_2, 0.0]), &mut |_| {}).unwrap();
        assert!((t.beta() - C64::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn file_config() {
        let cfg: FileConfig = toml::from_str(
            r#"
            coeffs = [0.6, "0.8i", 0]
            trials = 10
            [homodyne]
            probe_amp = 50.0
            convention = "FIGURE_2X"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.trials, Some(10));
        assert_eq!(cfg.homodyne.convention, Some(QuadratureConvention::Figure2x));
        let t = resolve_coeffs(cfg.coeffs.as_ref().unwrap(), None, &mut |_| {}).unwrap();
        assert_eq!(t.beta(), C64::new(0.0, 0.8));
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
