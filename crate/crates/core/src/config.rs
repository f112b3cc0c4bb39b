//! JSON run configuration: named presets plus one section per subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EllipticPropagator;
use crate::observability::{CandidateMix, HypothesisConstants, PacketMix, QuadratureOptions, UncertaintyOptions};
use crate::ou::{kolmogorov, MatrixTrack, OUPropagator, OUSystem, ShearOptions};
use crate::spectral::GridSpec;
use crate::symbol::NonAutonomousSymbol;
use crate::thickness::{halfline_family, periodic_stripes, BoxRegion, ObservationSet, SetFamily};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    /// Used when neither `--out` nor `OBSLAB_OUT_DIR` is set.
    #[serde(default)]
    pub out_dir: Option<String>,
    pub presets: BTreeMap<String, Preset>,
    #[serde(default)]
    pub ellipticity: EllipticityCfg,
    #[serde(default)]
    pub kernel_check: KernelCheckCfg,
    #[serde(default)]
    pub propagate: PropagateCfg,
    #[serde(default)]
    pub thickness: ThicknessCfg,
    #[serde(default)]
    pub uncertainty: UncertaintyCfg,
    #[serde(default)]
    pub dissipation: DissipationCfg,
    #[serde(default)]
    pub cobs: CobsCfg,
    #[serde(default)]
    pub observe: ObserveCfg,
    #[serde(default)]
    pub falsify: FalsifyCfg,
    #[serde(default)]
    pub ou_check: OuCheckCfg,
    #[serde(default)]
    pub ou_observe: OuObserveCfg,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Elliptic {
        symbol: NonAutonomousSymbol,
        grid: GridSpec,
    },
    Sets {
        family: FamilySpec,
        grid: GridSpec,
        #[serde(rename = "T")]
        horizon: f64,
    },
    Ou {
        /// `"kolmogorov"` builds the block matrices; otherwise `A` and `B` are required.
        #[serde(default)]
        preset: Option<String>,
        #[serde(default = "one")]
        block: usize,
        #[serde(rename = "A", default)]
        a: Option<MatrixTrack>,
        #[serde(rename = "B", default)]
        b: Option<MatrixTrack>,
        #[serde(rename = "T")]
        horizon: f64,
        grid: GridSpec,
        /// Small-time window on which `q_{t,s}` must be positive definite.
        window: f64,
        #[serde(default)]
        shear: ShearOptions,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Stripes {
        #[serde(default)]
        axis: usize,
        period: f64,
        width: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `[0, X)` on the first half of the horizon, `[-X, 0)` on the second.
    Halfline,
    /// Constant `{x_axis < 0}`.
    LeftHalf {
        #[serde(default)]
        axis: usize,
    },
    Boxes {
        boxes: Vec<BoxRegion>,
    },
}

impl FamilySpec {
    pub fn build(&self, grid: GridSpec, horizon: f64) -> Result<SetFamily> {
        match self {
            FamilySpec::Stripes { axis, period, width, offset } => {
                SetFamily::constant(horizon, periodic_stripes(grid, *axis, *period, *width, *offset)?)
            }
            FamilySpec::Halfline => halfline_family(grid, horizon),
            FamilySpec::LeftHalf { axis } => {
                if *axis >= grid.dim() {
                    return Err(Error::Config(format!("left_half axis {axis} out of range")));
                }
                let a = *axis;
                SetFamily::constant(horizon, ObservationSet::from_predicate(grid, |x| x[a] < 0.0))
            }
            FamilySpec::Boxes { boxes } => SetFamily::constant(horizon, ObservationSet::from_boxes(grid, boxes)?),
        }
    }
}

fn one() -> usize {
    1
}

macro_rules! defaults {
    ($name:ident { $($(#[$m:meta])* $field:ident : $ty:ty = $value:expr),* $(,)? }) => {
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $($(#[$m])* pub $field: $ty,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $value,)* }
            }
        }
    };
}

fn pairs(v: &[(f64, f64)]) -> Vec<(f64, f64)> {
    v.to_vec()
}

defaults!(EllipticityCfg {
    preset: String = "heat".into(),
    directions: usize = crate::symbol::DEFAULT_DIRECTIONS,
    /// Gårding constant as a fraction of the ellipticity constant.
    c0_fraction: f64 = 0.5,
});

defaults!(KernelCheckCfg {
    preset: String = "heat".into(),
    pairs: Vec<(f64, f64)> = pairs(&[(0.0, 0.05), (0.0, 0.25), (0.2, 0.7), (0.5, 1.0), (0.0, 1.0)]),
    c0_fraction: f64 = 0.5,
});

defaults!(PropagateCfg {
    preset: String = "heat".into(),
    s: f64 = 0.0,
    t: f64 = 0.25,
    center: Vec<f64> = vec![0.0],
    width: f64 = 1.0,
    freq: Vec<f64> = vec![0.0],
    cocycle_triples: usize = 100,
    cocycle_tolerance: f64 = 1e-12,
});

defaults!(ThicknessCfg {
    preset: String = "halfline".into(),
    sides: Vec<f64> = vec![1.0],
    rho: f64 = 0.5,
    expect_uniform: Option<bool> = None,
    expect_mean: Option<bool> = None,
});

defaults!(UncertaintyCfg {
    preset: String = "stripes".into(),
    lambdas: Vec<f64> = log_space(1.0, 10.0, 10),
    window: Vec<f64> = vec![1.0],
    options: UncertaintyOptions = UncertaintyOptions::default(),
});

defaults!(DissipationCfg {
    preset: String = "heat".into(),
    lambdas: Vec<f64> = vec![8.0, 11.0, 16.0, 22.0, 32.0, 45.0, 64.0],
    gaps: Vec<f64> = vec![0.05, 0.1, 0.2, 0.4, 0.8],
    /// Relative tolerance on `γ₂ ≈ m` and `γ₃ ≈ 1`.
    tolerance: f64 = 0.1,
});

defaults!(CobsCfg {
    constants: HypothesisConstants = HypothesisConstants {
        d0: 1.0, d1: 1.0, gamma1: 1.0, d2: 1.0, d3: 1.0, gamma2: 2.0, gamma3: 1.0,
        growth: 1.0, omega: 0.0, c_norm: 1.0, theta: 0.5,
    },
    horizon: f64 = 1.0,
    r: f64 = 2.0,
    time_set: Option<Vec<(f64, f64)>> = None,
});

defaults!(ObserveCfg {
    preset: String = "heat".into(),
    /// Grid override; the preset grid otherwise.
    grid: Option<GridSpec> = Some(GridSpec::new(1, 16.0, 512).expect("valid grid")),
    family: FamilySpec = FamilySpec::Stripes { axis: 0, period: 1.0, width: 0.5, offset: 0.0 },
    uncertainty_lambdas: Vec<f64> = log_space(1.0, 10.0, 10),
    window: Vec<f64> = vec![1.0],
    dissipation_lambdas: Vec<f64> = vec![8.0, 11.0, 16.0, 22.0, 32.0, 45.0],
    gaps: Vec<f64> = vec![0.05, 0.1, 0.2, 0.4, 0.8],
    growth_pairs: Vec<(f64, f64)> = pairs(&[(0.0, 0.5), (0.0, 1.0), (0.3, 0.4)]),
    c_norm: f64 = 1.0,
    theta: f64 = 0.5,
    time_set: Option<Vec<(f64, f64)>> = None,
    r: f64 = 2.0,
    p: f64 = 2.0,
    candidates: CandidateMix = CandidateMix { count: 500, band: 8.0, seed: 1 },
    quadrature: QuadratureOptions = QuadratureOptions::default(),
});

defaults!(FalsifyCfg {
    preset: String = "heat_long".into(),
    family: FamilySpec = FamilySpec::LeftHalf { axis: 0 },
    width: f64 = 1.0,
    shifts: Vec<f64> = (0..=8).map(f64::from).collect(),
    r: f64 = 2.0,
    p: f64 = 2.0,
    min_growth: f64 = 10.0,
    max_leakage: f64 = 1e-10,
    quadrature: QuadratureOptions = QuadratureOptions::default(),
});

defaults!(OuCheckCfg {
    preset: String = "kolmogorov".into(),
    samples: usize = 20,
    k_max: usize = 4,
    p_values: Vec<f64> = vec![1.25, 2.0, 4.0],
    lambdas: Vec<f64> = vec![4.0, 6.0, 8.0, 11.0, 16.0],
    gaps: Vec<f64> = vec![0.05, 0.1, 0.2, 0.3, 0.5],
    liouville_tolerance: f64 = 1e-9,
    cocycle_tolerance: f64 = 1e-10,
});

defaults!(OuObserveCfg {
    preset: String = "kolmogorov".into(),
    refinements: Vec<usize> = vec![64, 128, 256],
    family: FamilySpec = FamilySpec::Stripes { axis: 0, period: 1.0, width: 0.5, offset: 0.0 },
    candidates: PacketMix = PacketMix { count: 16, band: 0.5, width: (1.25, 2.0), seed: 3 },
    r: f64 = 2.0,
    p: f64 = 2.0,
    quadrature: QuadratureOptions = QuadratureOptions { order: 8, panel_fraction: 0.25 },
    max_growth: f64 = 2.0,
});

pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64)).collect()
}

impl Config {
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|source| Error::Json { path: origin.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Ok((Self::from_bytes(&bytes, path)?, bytes))
    }

    pub fn preset(&self, name: &str) -> Result<&Preset> {
        self.presets.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.presets.keys().map(String::as_str).collect();
            Error::Config(format!("unknown preset `{name}` (known: {})", known.join(", ")))
        })
    }

    pub fn symbol(&self, name: &str) -> Result<(NonAutonomousSymbol, GridSpec)> {
        match self.preset(name)? {
            Preset::Elliptic { symbol, grid } => Ok((symbol.clone(), *grid)),
            _ => Err(Error::Config(format!("preset `{name}` is not an elliptic symbol"))),
        }
    }

    pub fn elliptic(&self, name: &str, grid: Option<GridSpec>) -> Result<EllipticPropagator> {
        match self.preset(name)? {
            Preset::Elliptic { symbol, grid: g } => EllipticPropagator::new(symbol.clone(), grid.unwrap_or(*g)),
            _ => Err(Error::Config(format!("preset `{name}` is not an elliptic symbol"))),
        }
    }

    pub fn family(&self, name: &str) -> Result<SetFamily> {
        match self.preset(name)? {
            Preset::Sets { family, grid, horizon } => family.build(*grid, *horizon),
            _ => Err(Error::Config(format!("preset `{name}` is not a set family"))),
        }
    }

    /// OU system, its preset grid, window and shear options.
    pub fn ou(&self, name: &str) -> Result<(OUSystem, GridSpec, f64, ShearOptions)> {
        match self.preset(name)? {
            Preset::Ou { preset, block, a, b, horizon, grid, window, shear } => {
                let sys = match (preset.as_deref(), a, b) {
                    (Some("kolmogorov"), None, None) => kolmogorov(*block, *horizon)?,
                    (None, Some(a), Some(b)) => OUSystem::new(a.clone(), b.clone(), *horizon)?,
                    (Some(p), None, None) => return Err(Error::Config(format!("unknown OU preset `{p}`"))),
                    _ => return Err(Error::Config(format!("OU preset `{name}` needs either `preset` or both `A` and `B`"))),
                };
                Ok((sys, *grid, *window, *shear))
            }
            _ => Err(Error::Config(format!("preset `{name}` is not an OU system"))),
        }
    }

    pub fn ou_propagator(&self, name: &str, grid: Option<GridSpec>) -> Result<OUPropagator> {
        let (sys, g, window, shear) = self.ou(name)?;
        OUPropagator::new(sys, grid.unwrap_or(g), window, shear)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"presets": {"heat": {"kind": "elliptic",
        "symbol": {"d": 1, "m": 2, "T": 1.0, "coeffs": [{"alpha": [2], "re": [-1.0]}]},
        "grid": {"d": 1, "X": 20.0, "N": 256}}}}"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = Config::from_bytes(MINIMAL.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(c.observe.candidates.count, 500);
        assert!(c.elliptic("heat", None).is_ok());
        assert!(matches!(c.elliptic("quartic", None), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_field_reports_position() {
        let bad = MINIMAL.replace("\"presets\"", "\"seeed\": 1, \"presets\"");
        let err = Config::from_bytes(bad.as_bytes(), Path::new("mem")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("seeed") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1.0, 10.0, 10);
        assert_eq!(v.len(), 10);
        assert!((v[9] - 10.0).abs() < 1e-12 && v[0] == 1.0);
    }
}
