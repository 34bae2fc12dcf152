use std::path::{Path, PathBuf};

use quasilattice::cutproject::{silver_window, IfsSystem};
use quasilattice::diffraction::DEFAULT_FLOOR;
use quasilattice::substitution::{parse_word, SILVER_SEED};
use quasilattice::{CutProjectScheme, DeformationKind, DeformationMap, Letter, Real, SubstitutionRule, Window};
use serde::Deserialize;

use crate::error::CliError;

/// Scheme overrides; everything defaults to the silver-mean chain.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    /// Substitution images and interval lengths.
    pub rule: Option<SubstitutionRule>,
    /// Legal seed `left|right` for the fixed point, as two words.
    pub seed: Option<[String; 2]>,
    /// IFS for the `windows` command.
    pub ifs: Option<IfsSystem>,
    /// Letter windows `[W_a, W_b]`.
    pub letter_windows: Option<[Window; 2]>,
    /// Unlabeled window, used when letter windows are absent.
    pub window: Option<Window>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub deformation: Option<DeformationKind>,
    pub radius: Option<f64>,
    pub k_max: Option<f64>,
    pub intensity_floor: Option<f64>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Seed for randomized sampling; every current command is deterministic
    /// without it.
    pub seed: Option<u64>,
    #[serde(default)]
    pub allow_overlap: bool,
    /// Wave numbers compared by `compare`, as the first `n` elements of the
    /// dual module ordered by modulus.
    pub compare_count: Option<usize>,
}

pub const DEFAULT_RADIUS: f64 = 100.0;
pub const DEFAULT_KMAX: f64 = 2.0;
pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_COMPARE_COUNT: usize = 20;

/// Flag values; each one set wins over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub radius: Option<f64>,
    pub alpha: Option<String>,
    pub beta: Option<String>,
    pub k_max: Option<f64>,
    pub floor: Option<f64>,
    pub svg: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub allow_overlap: bool,
}

/// A validated run.
#[derive(Clone, Debug)]
pub struct Run {
    pub rule: SubstitutionRule,
    pub seed: (Vec<Letter>, Vec<Letter>),
    pub ifs: IfsSystem,
    pub scheme: CutProjectScheme,
    pub deformation: DeformationMap,
    pub radius: f64,
    pub k_max: f64,
    pub floor: f64,
    pub out: PathBuf,
    pub svg: Option<PathBuf>,
    pub allow_overlap: bool,
    pub compare_count: usize,
    /// Echoed into summaries so a recorded config reproduces the run.
    pub rng_seed: Option<u64>,
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_real(name: &str, s: &str) -> Result<Real, CliError> {
    s.parse::<Real>()
        .map_err(|_| CliError::Config(format!("cannot parse --{name} value `{s}`")))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn resolve(self, flags: Overrides) -> Result<Run, CliError> {
        let radius = positive("radius", flags.radius.or(self.radius).unwrap_or(DEFAULT_RADIUS))?;
        let k_max = positive("k_max", flags.k_max.or(self.k_max).unwrap_or(DEFAULT_KMAX))?;
        let floor = flags.floor.or(self.intensity_floor).unwrap_or(DEFAULT_FLOOR);
        if !(floor.is_finite() && floor >= 0.0) {
            return Err(CliError::Config(format!("intensity floor must be >= 0, got {floor}")));
        }

        let rule = self.scheme.rule.unwrap_or_else(SubstitutionRule::silver_mean);
        let seed = match &self.scheme.seed {
            Some([l, r]) => (parse_word(l)?, parse_word(r)?),
            None => (SILVER_SEED.0.to_vec(), SILVER_SEED.1.to_vec()),
        };
        let scheme = match (self.scheme.letter_windows, self.scheme.window) {
            (Some([w_a, w_b]), _) => CutProjectScheme::from_letter_windows(w_a, w_b)?,
            (None, Some(w)) => CutProjectScheme::from_window(w),
            (None, None) => CutProjectScheme::silver_mean(),
        };
        let ifs = self.scheme.ifs.unwrap_or_else(IfsSystem::silver_mean);

        let kind = match (flags.alpha.as_deref(), flags.beta.as_deref(), self.deformation) {
            (None, None, Some(kind)) => kind,
            (alpha, beta, base) => {
                let (base_alpha, base_beta) = match base {
                    Some(DeformationKind::Affine { alpha, beta }) => (alpha, beta),
                    _ => (Real::Exact(0.into()), Real::Exact(0.into())),
                };
                DeformationKind::Affine {
                    alpha: alpha.map(|s| parse_real("alpha", s)).transpose()?.unwrap_or(base_alpha),
                    beta: beta.map(|s| parse_real("beta", s)).transpose()?.unwrap_or(base_beta),
                }
            }
        };
        let domain = if scheme.window().is_interval() {
            scheme.window().clone()
        } else {
            silver_window()
        };
        let deformation = DeformationMap::new(kind, domain)?;

        Ok(Run {
            rule,
            seed,
            ifs,
            scheme,
            deformation,
            radius,
            k_max,
            floor,
            out: flags.out.or(self.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            svg: flags.svg.or(self.svg),
            allow_overlap: flags.allow_overlap || self.allow_overlap,
            compare_count: self.compare_count.unwrap_or(DEFAULT_COMPARE_COUNT),
            rng_seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use quasilattice::AlgebraicNumber;

    #[test]
    fn flags_win_over_config() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"radius": 50, "deformation": {"kind": "affine", "alpha": 0.25, "beta": "1/2"}, "k_max": 1.5}"#,
        )
        .unwrap();
        let run = cfg
            .resolve(Overrides {
                radius: Some(20.0),
                alpha: Some("3-2*sqrt2".into()),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(run.radius, 20.0);
        assert_eq!(run.k_max, 1.5);
        let (alpha, beta) = run.deformation.affine_params().unwrap();
        assert_eq!(alpha, Real::Exact(AlgebraicNumber::new(3, -2, 1).unwrap()));
        assert_eq!(beta, Real::Exact(AlgebraicNumber::rational(1, 2).unwrap()));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |o: Overrides| RunConfig::default().resolve(o).unwrap_err();
        assert!(matches!(bad(Overrides { radius: Some(0.0), ..Default::default() }), CliError::Config(_)));
        assert!(matches!(bad(Overrides { k_max: Some(-1.0), ..Default::default() }), CliError::Config(_)));
        assert!(matches!(bad(Overrides { alpha: Some("x".into()), ..Default::default() }), CliError::Config(_)));
        assert!(serde_json::from_str::<RunConfig>(r#"{"radius": 1, "typo": 2}"#).is_err());
    }

    #[test]
    fn pwl_config() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"deformation": {"kind": "pwl", "points": [[-1, 0], [0, 0.1], [1, 0]]}}"#).unwrap();
        let run = cfg.resolve(Overrides::default()).unwrap();
        assert!(run.deformation.affine_params().is_none());
    }
}
