//! Experiment configuration: a flat, line-oriented `key = value` file with
//! dotted keys.
//!
//! ```text
//! # comment
//! grid.M = 128
//! manifold.kind = sphere
//! manifold.dim = 3
//! solver.dt = 1e-3
//! initial.kind = perturbation
//! initial.base = 0, 0, 1
//! ```
//!
//! Vectors are comma-separated. Unknown keys, duplicates and keys that the
//! chosen variant does not use are rejected with the offending key named.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{FlowFormulation, InitialDatum, RecordOptions, Scheme, SolverOptions};
use crate::grid::CircleGrid;
use crate::manifold::{ManifoldDescriptor, DEFAULT_GAUSS_ORDER, DEFAULT_NEWTON_MAX_ITER, DEFAULT_NEWTON_TOL};

/// Target manifold selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    Sphere { dim: usize },
    Ellipsoid { axes: Vec<f64> },
    Torus { major: f64, minor: f64 },
    EmbeddedCircle { center: [f64; 3], normal: [f64; 3], radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub manifold: ManifoldSpec,
    pub tube_radius: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub formulation: FlowFormulation,
    pub solver: SolverOptions,
    pub initial: InitialDatum,
    pub record: RecordOptions,
    pub output_dir: PathBuf,
    /// Times at which u is written to `snapshots/`.
    pub snapshot_times: Vec<f64>,
    pub calibration_file: PathBuf,
    /// The parsed key/value pairs, echoed into the manifest.
    pub raw: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::config(format!("line {}", lineno + 1), "empty key"));
            }
            if raw.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::config(k, "duplicate key"));
            }
        }
        Self::from_map(raw)
    }

    fn from_map(raw: BTreeMap<String, String>) -> Result<Self> {
        let mut r = Reader {
            map: &raw,
            used: BTreeSet::new(),
        };

        let m: usize = r.required("grid.M")?;
        if CircleGrid::new(m).is_err() {
            return Err(Error::config("grid.M", format!("{m} is not an even node count >= 8")));
        }

        let kind: String = r.required("manifold.kind")?;
        let manifold = match kind.as_str() {
            "sphere" => ManifoldSpec::Sphere {
                dim: r.optional("manifold.dim")?.unwrap_or(3),
            },
            "ellipsoid" => ManifoldSpec::Ellipsoid {
                axes: r.vector("manifold.axes", None)?,
            },
            "torus" => ManifoldSpec::Torus {
                major: r.required("manifold.major")?,
                minor: r.required("manifold.minor")?,
            },
            "embedded_circle" => ManifoldSpec::EmbeddedCircle {
                center: r.triple("manifold.center", [0.0; 3])?,
                normal: r.triple("manifold.normal", [0.0, 0.0, 1.0])?,
                radius: r.optional("manifold.radius")?.unwrap_or(1.0),
            },
            other => return Err(Error::config("manifold.kind", format!("unknown manifold `{other}`"))),
        };
        let tube_radius = r.optional("manifold.tube_radius")?;
        let newton_tol = r.optional("manifold.newton_tol")?.unwrap_or(DEFAULT_NEWTON_TOL);
        let newton_max_iter = r.optional("manifold.newton_max_iter")?.unwrap_or(DEFAULT_NEWTON_MAX_ITER);

        let formulation = r.parsed("flow.formulation", FlowFormulation::Projection)?;

        let defaults = SolverOptions::default();
        let solver = SolverOptions {
            dt: r.optional("solver.dt")?.unwrap_or(defaults.dt),
            scheme: r.parsed("solver.scheme", Scheme::ImexEuler)?,
            reproject: r.optional("solver.reproject")?.unwrap_or(false),
            t_end: r.optional("solver.t_end")?.unwrap_or(defaults.t_end),
            constraint_abort_threshold: r
                .optional("solver.abort_threshold")?
                .unwrap_or(defaults.constraint_abort_threshold),
            gauss_order: r.optional("solver.gauss_order")?.unwrap_or(DEFAULT_GAUSS_ORDER),
        };
        solver.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let key = if name == "constraint_abort_threshold" { "abort_threshold" } else { name };
                Error::config(format!("solver.{key}"), reason)
            }
            other => other,
        })?;

        let initial = initial_datum(&mut r)?;

        let record = RecordOptions {
            stride: r.optional("diagnostics.stride")?.unwrap_or(1),
            radii: r.vector("diagnostics.radii", Some(vec![0.1]))?,
            formulation_gaps: r.optional("diagnostics.formulation_gaps")?.unwrap_or(false),
        };
        if record.stride == 0 {
            return Err(Error::config("diagnostics.stride", "must be positive"));
        }
        if record.radii.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::config("diagnostics.radii", "radii must be positive"));
        }

        let output_dir = PathBuf::from(r.optional::<String>("output.dir")?.unwrap_or_else(|| "out".into()));
        let snapshot_times = r.vector("output.snapshot_times", Some(Vec::new()))?;
        if snapshot_times.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::config("output.snapshot_times", "times must be non-negative"));
        }
        let calibration_file = PathBuf::from(
            r.optional::<String>("calibration.file")?
                .unwrap_or_else(|| "calibration.json".into()),
        );

        if let Some(k) = raw.keys().find(|k| !r.used.contains(k.as_str())) {
            return Err(Error::config(k.clone(), "unknown key or not used by the selected variant"));
        }

        let cfg = ExperimentConfig {
            m,
            manifold,
            tube_radius,
            newton_tol,
            newton_max_iter,
            formulation,
            solver,
            initial,
            record,
            output_dir,
            snapshot_times,
            calibration_file,
            raw: raw.clone(),
        };
        let n = cfg.manifold()?;
        if !cfg.formulation.applies_to(&n) {
            return Err(Error::config(
                "flow.formulation",
                format!("`{}` does not apply to {}", cfg.formulation, n.name()),
            ));
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> CircleGrid {
        CircleGrid::new(self.m).expect("validated at parse time")
    }

    /// The target descriptor; parameter errors are reported as config errors.
    pub fn manifold(&self) -> Result<ManifoldDescriptor> {
        let as_config = |e: Error| Error::config("manifold", e.to_string());
        let mut n = match &self.manifold {
            ManifoldSpec::Sphere { dim } => ManifoldDescriptor::sphere(*dim),
            ManifoldSpec::Ellipsoid { axes } => ManifoldDescriptor::ellipsoid(axes.clone()),
            ManifoldSpec::Torus { major, minor } => ManifoldDescriptor::torus(*major, *minor),
            ManifoldSpec::EmbeddedCircle { center, normal, radius } => {
                ManifoldDescriptor::embedded_circle(*center, *normal, *radius)
            }
        }
        .map_err(as_config)?;
        if let Some(d) = self.tube_radius {
            n = n.with_tube_radius(d).map_err(as_config)?;
        }
        n.with_newton(self.newton_tol, self.newton_max_iter).map_err(as_config)
    }
}

fn initial_datum(r: &mut Reader<'_>) -> Result<InitialDatum> {
    let kind: String = r.required("initial.kind")?;
    Ok(match kind.as_str() {
        "constant" => InitialDatum::Constant {
            point: r.vector("initial.point", None)?,
        },
        "perturbation" => InitialDatum::Perturbation {
            base: r.vector("initial.base", None)?,
            eps: r.required("initial.eps")?,
            a: r.vector("initial.a", None)?,
            b: r.vector("initial.b", None)?,
        },
        "random_perturbation" => InitialDatum::RandomPerturbation {
            base: r.vector("initial.base", None)?,
            eps: r.required("initial.eps")?,
            modes: r.optional("initial.modes")?.unwrap_or(4),
            seed: r.required("initial.seed")?,
        },
        "poisson_bump" => InitialDatum::PoissonBump {
            base: r.vector("initial.base", None)?,
            eps: r.required("initial.eps")?,
            rho: r.required("initial.rho")?,
            a: r.vector("initial.a", None)?,
            b: r.vector("initial.b", None)?,
        },
        "bump" => InitialDatum::Bump {
            base: r.vector("initial.base", None)?,
            direction: r.vector("initial.direction", None)?,
            amplitude: r.required("initial.amplitude")?,
            width: r.required("initial.width")?,
            center: r.optional("initial.center")?.unwrap_or(0.0),
        },
        "great_circle" => InitialDatum::GreatCircle {
            winding: r.optional("initial.winding")?.unwrap_or(1),
        },
        "torus_loop" => InitialDatum::TorusLoop {
            p: r.required("initial.p")?,
            q: r.required("initial.q")?,
            phase: r.optional("initial.phase")?.unwrap_or(0.0),
        },
        other => return Err(Error::config("initial.kind", format!("unknown generator `{other}`"))),
    })
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
    used: BTreeSet<&'static str>,
}

impl Reader<'_> {
    fn raw(&mut self, key: &'static str) -> Option<&str> {
        self.used.insert(key);
        self.map.get(key).map(String::as_str)
    }

    fn optional<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn required<T: FromStr>(&mut self, key: &'static str) -> Result<T> {
        self.optional(key)?.ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn parsed<T: FromStr<Err = String>>(&mut self, key: &'static str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: String| Error::config(key, e)),
        }
    }

    fn vector(&mut self, key: &'static str, default: Option<Vec<f64>>) -> Result<Vec<f64>> {
        let Some(v) = self.raw(key) else {
            return default.ok_or_else(|| Error::config(key, "missing required key"));
        };
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::config(key, format!("cannot parse `{s}` as a number")))
            })
            .collect()
    }

    fn triple(&mut self, key: &'static str, default: [f64; 3]) -> Result<[f64; 3]> {
        let v = self.vector(key, Some(default.to_vec()))?;
        v.try_into()
            .map_err(|_| Error::config(key, "expected three components"))
    }
}
