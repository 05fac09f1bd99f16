//! Run configuration: TOML file merged with command-line overrides.

use std::path::Path;

use planar_period::expr::parse;
use planar_period::fields::builtin_system;
use planar_period::flow::{CycleOptions, Tolerances};
use planar_period::liecalc::Univariate;
use planar_period::period::{build_normalizer, AnalysisOptions, NormalizerKind, Routes, ScanOptions, Spacing};
use planar_period::verify::VerifyOptions;
use planar_period::{Point, SystemDef, VectorField};
use serde::Deserialize;

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "PLANAR_PERIOD_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Format, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "both" => Ok(Format::Both),
            _ => Err(format!("unknown format `{}` (csv, json or both)", s)),
        }
    }
}

/// Every key is optional; flags given on the command line win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in registry name, e.g. `twowell` or `rotational:2+sin(u)`.
    pub system: Option<String>,
    /// Inline first integral.
    pub h: Option<String>,
    /// Inline vector field components.
    pub p: Option<String>,
    pub q: Option<String>,
    /// Reciprocal integrating factor for inline P/Q systems.
    pub kappa: Option<String>,
    pub center: Option<[f64; 2]>,

    pub routes: Option<String>,
    /// Route-A normalizer family: gradient, kappa, separable or zeta:<expr in h>.
    pub family: Option<String>,
    pub h_range: Option<[f64; 2]>,
    pub levels: Option<usize>,
    pub spacing: Option<Spacing>,

    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub ret_radius: Option<f64>,
    pub t_max: Option<f64>,
    pub fd_delta: Option<f64>,
    pub consistency_rtol: Option<f64>,
    pub consistency_atol: Option<f64>,

    pub out: Option<String>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    /// Extra field for `verify`, written `(P, Q)`.
    pub normalizer: Option<String>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {}", path.display(), e))?;
        toml::from_str(&text).map_err(|e| format!("{}: {}", path.display(), e))
    }

    /// Fields set in `other` replace ours.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(self, other;
            system, h, p, q, kappa, center, routes, family, h_range, levels, spacing,
            rtol, atol, ret_radius, t_max, fd_delta, consistency_rtol, consistency_atol,
            out, format, workers, seed, samples, normalizer);
    }

    pub fn validate(&self) -> Result<(), String> {
        let inline_h = self.h.is_some();
        let inline_pq = self.p.is_some() || self.q.is_some();
        if self.p.is_some() != self.q.is_some() {
            return Err("inline systems need both `p` and `q`".into());
        }
        if self.system.is_some() && (inline_h || inline_pq || self.kappa.is_some()) {
            return Err("give either a built-in `system` or an inline definition, not both".into());
        }
        if self.system.is_none() && !inline_h && !inline_pq {
            return Err("no system given (use --system, or h / p,q in the config)".into());
        }
        if self.kappa.is_some() && !inline_pq {
            return Err("`kappa` applies to inline P/Q systems only".into());
        }
        self.validate_settings()
    }

    /// Checks that do not depend on the system definition.
    pub fn validate_settings(&self) -> Result<(), String> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("ret_radius", self.ret_radius),
            ("t_max", self.t_max),
            ("fd_delta", self.fd_delta),
            ("consistency_rtol", self.consistency_rtol),
            ("consistency_atol", self.consistency_atol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("`{}` must be positive, got {}", name, v));
                }
            }
        }
        if let Some(n) = self.levels {
            if n < 2 {
                return Err(format!("`levels` must be at least 2, got {}", n));
            }
        }
        if let Some([lo, hi]) = self.h_range {
            if !(lo < hi) {
                return Err(format!("empty level range {}:{}", lo, hi));
            }
        }
        if self.workers == Some(0) {
            return Err("`workers` must be at least 1".into());
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<SystemDef, String> {
        self.validate()?;
        let err = |e: planar_period::Error| e.to_string();
        let mut sys = if let Some(name) = &self.system {
            builtin_system(name).map_err(err)?
        } else {
            let center = self.center.map_or(Point::new(0.0, 0.0), Point::from);
            let h = self.h.as_deref().map(parse).transpose().map_err(err)?;
            let mut s = match (&self.p, &self.q) {
                (Some(p), Some(q)) => {
                    let k = self.kappa.as_deref().map(parse).transpose().map_err(err)?;
                    SystemDef::from_components("inline", &parse(p).map_err(err)?, &parse(q).map_err(err)?, h.as_ref(), k.as_ref())
                        .map_err(err)?
                }
                _ => SystemDef::from_hamiltonian("inline", h.as_ref().expect("validated")).map_err(err)?,
            };
            s.center_hint = Some(center);
            s
        };
        if let (Some(c), Some(_)) = (self.center, &self.system) {
            sys.center_hint = Some(Point::from(c));
        }
        Ok(sys)
    }

    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            rtol: self.rtol.unwrap_or(d.rtol),
            atol: self.atol.unwrap_or(d.atol),
        }
    }

    pub fn cycle_options(&self) -> CycleOptions {
        let d = CycleOptions::default();
        CycleOptions {
            tol: self.tolerances(),
            ret_radius: self.ret_radius.or(d.ret_radius),
            t_max: self.t_max.unwrap_or(d.t_max),
        }
    }

    pub fn analysis_options(&self, sys: &SystemDef) -> Result<AnalysisOptions, String> {
        let d = AnalysisOptions::default();
        let routes = match &self.routes {
            Some(r) => r.parse::<Routes>().map_err(|e| e.to_string())?,
            None => Routes::default(),
        };
        let normalizer = match &self.family {
            Some(f) => Some(build_normalizer(sys, &parse_family(f)?).map_err(|e| e.to_string())?),
            None => None,
        };
        Ok(AnalysisOptions {
            cycle: self.cycle_options(),
            routes,
            normalizer,
            fd_delta: self.fd_delta,
            consistency_rtol: self.consistency_rtol.unwrap_or(d.consistency_rtol),
            consistency_atol: self.consistency_atol.unwrap_or(d.consistency_atol),
            ..d
        })
    }

    pub fn scan_options(&self, sys: &SystemDef) -> Result<ScanOptions, String> {
        Ok(ScanOptions {
            analysis: self.analysis_options(sys)?,
            spacing: self.spacing.unwrap_or_default(),
            workers: self.workers,
            ..ScanOptions::default()
        })
    }

    pub fn verify_options(&self) -> Result<VerifyOptions, String> {
        let d = VerifyOptions::default();
        let extra = self.normalizer.as_deref().map(parse_pair).transpose()?;
        Ok(VerifyOptions {
            samples: self.samples.unwrap_or(d.samples),
            seed: self.seed.unwrap_or(d.seed),
            levels: self.h_range.map(|[a, b]| (a, b)),
            extra_normalizer: extra,
            cycle: self.cycle_options(),
            ..d
        })
    }
}

fn parse_family(s: &str) -> Result<NormalizerKind, String> {
    let (head, arg) = match s.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (s.trim(), None),
    };
    match (head, arg) {
        ("gradient", None) => Ok(NormalizerKind::Gradient),
        ("kappa", None) => Ok(NormalizerKind::Kappa),
        ("separable", None) => Ok(NormalizerKind::Separable),
        ("zeta", Some(z)) => Ok(NormalizerKind::Zeta(Univariate::parse(z).map_err(|e| e.to_string())?)),
        _ => Err(format!("unknown normalizer family `{}`", s)),
    }
}

/// `(P, Q)` with the comma at parenthesis depth one.
pub fn parse_pair(s: &str) -> Result<VectorField, String> {
    let t = s.trim();
    let inner = t
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("expected `(P, Q)`, got `{}`", s))?;
    let mut depth = 0i32;
    let mut split = None;
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                if split.is_some() {
                    return Err(format!("expected two components in `{}`", s));
                }
                split = Some(i);
            }
            _ => {}
        }
    }
    let i = split.ok_or_else(|| format!("expected two components in `{}`", s))?;
    VectorField::parse(&inner[..i], &inner[i + 1..]).map_err(|e| e.to_string())
}

/// `lo:hi`.
pub fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{}`", s))?;
    let lo = a.trim().parse::<f64>().map_err(|e| format!("`{}`: {}", a, e))?;
    let hi = b.trim().parse::<f64>().map_err(|e| format!("`{}`: {}", b, e))?;
    Ok([lo, hi])
}

/// `x,y`.
pub fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected x,y, got `{}`", s))?;
    let x = a.trim().parse::<f64>().map_err(|e| format!("`{}`: {}", a, e))?;
    let y = b.trim().parse::<f64>().map_err(|e| format!("`{}`: {}", b, e))?;
    Ok([x, y])
}
