use std::fs;
use std::path::{Path, PathBuf};

use diffspline::diffeo::{Diffeo, Interpolation};
use diffspline::error::Error;
use diffspline::solver::{Boundary, GridSettings, KnotSequence, ProblemSettings};
use diffspline::spectral::io::read_field;
use diffspline::spectral::{GridSpec, Momentum, VectorField};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::{CliError, CliResult};

/// A parsed config file and the directory its relative paths resolve against.
pub(crate) struct ConfigFile {
    pub dir: PathBuf,
    pub root: Map<String, Value>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let root = match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return Err(Error::Format(format!("{}: config must be a JSON object", path.display())).into()),
            Err(e) => return Err(Error::Format(format!("{}: {e}", path.display())).into()),
        };
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { dir, root })
    }

    pub fn required(path: Option<&Path>, command: &str) -> CliResult<Self> {
        match path {
            Some(p) => Self::read(p),
            None => Err(CliError::Usage(format!("`{command}` needs --config PATH"))),
        }
    }

    /// Removes `key` and decodes it, naming the key on failure.
    pub fn take<T: DeserializeOwned>(&mut self, key: &str) -> CliResult<Option<T>> {
        match self.root.remove(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v)
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }

    /// Decodes everything not yet taken as `T`, which must reject unknown keys itself.
    pub fn rest<T: DeserializeOwned>(self) -> CliResult<T> {
        serde_json::from_value(Value::Object(self.root)).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn resolve(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BoundaryFiles {
    pub phi0: Option<String>,
    pub v0: Option<String>,
    pub phi1: Option<String>,
    pub v1: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct KnotFiles {
    pub times: Vec<f64>,
    pub targets: Vec<String>,
    pub initial_speed_weight: f64,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum Init {
    #[default]
    Zero,
    Random,
}

pub(crate) const DEFAULT_INIT_AMPLITUDE: f64 = 0.01;

/// A spline or sequence config before any field file is read.
pub(crate) struct SplineConfig {
    pub file: ConfigFile,
    pub settings: ProblemSettings,
    pub grid: GridSpec,
    pub boundary: BoundaryFiles,
    pub knots: Option<KnotFiles>,
    pub init: Init,
    pub init_amplitude: f64,
}

impl SplineConfig {
    /// Parses and validates the numerical settings; no field files are touched.
    pub fn parse(mut file: ConfigFile) -> CliResult<Self> {
        let boundary = file.take("boundary")?.unwrap_or_default();
        let knots: Option<KnotFiles> = file.take("knots")?;
        let init = file.take("init")?.unwrap_or_default();
        let init_amplitude = file.take("init_amplitude")?.unwrap_or(DEFAULT_INIT_AMPLITUDE);
        let settings: ProblemSettings = serde_json::from_value(Value::Object(std::mem::take(&mut file.root)))
            .map_err(|e| CliError::Usage(format!("config: {e}")))?;
        let grid = settings.validate()?;
        if let Some(k) = &knots {
            if k.times.len() != k.targets.len() {
                return Err(CliError::Usage(format!(
                    "config key `knots`: {} times but {} targets",
                    k.times.len(),
                    k.targets.len()
                )));
            }
            if !(k.initial_speed_weight > 0.0 && k.initial_speed_weight.is_finite()) {
                return Err(Error::Validation(format!(
                    "initial_speed_weight must be positive, got {}",
                    k.initial_speed_weight
                ))
                .into());
            }
        }
        Ok(Self {
            file,
            settings,
            grid,
            boundary,
            knots,
            init,
            init_amplitude,
        })
    }

    pub fn load_boundary(&self) -> CliResult<Boundary> {
        let b = &self.boundary;
        let diffeo = |p: &Option<String>| -> CliResult<Diffeo> {
            match p {
                Some(p) => Ok(Diffeo::read(&self.file.resolve(p))?),
                None => Ok(Diffeo::identity(&self.grid)),
            }
        };
        let field = |p: &Option<String>| -> CliResult<VectorField> {
            match p {
                Some(p) => Ok(read_field(&self.file.resolve(p))?.0),
                None => Ok(VectorField::zeros(&self.grid)),
            }
        };
        Ok(Boundary {
            phi0: diffeo(&b.phi0)?,
            v0: field(&b.v0)?,
            phi1: diffeo(&b.phi1)?,
            v1: field(&b.v1)?,
        })
    }

    pub fn load_knots(&self) -> CliResult<KnotSequence> {
        let k = self
            .knots
            .as_ref()
            .ok_or_else(|| CliError::Usage("config key `knots` is required for `sequence`".into()))?;
        let targets = k
            .targets
            .iter()
            .map(|p| Diffeo::read(&self.file.resolve(p)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(KnotSequence::new(k.times.clone(), targets, k.initial_speed_weight)?)
    }
}

/// Geodesic shooting from the identity.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GeodesicConfig {
    pub grid: GridSettings,
    pub s: f64,
    pub time_steps: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
    /// Initial momentum field file.
    pub momentum: Option<String>,
    /// Initial velocity field file, used instead of `momentum`.
    pub velocity: Option<String>,
}

pub(crate) enum InitialData {
    Momentum(Momentum),
    Velocity(VectorField),
}

impl GeodesicConfig {
    pub fn source(&self) -> CliResult<(&'static str, &str)> {
        match (&self.momentum, &self.velocity) {
            (Some(m), None) => Ok(("momentum", m)),
            (None, Some(v)) => Ok(("velocity", v)),
            (Some(_), Some(_)) => Err(CliError::Usage(
                "config keys `momentum` and `velocity` are exclusive".into(),
            )),
            (None, None) => Err(CliError::Usage("config needs key `momentum` or `velocity`".into())),
        }
    }

    pub fn load(&self, file: &ConfigFile) -> CliResult<InitialData> {
        let (kind, path) = self.source()?;
        let path = file.resolve(path);
        Ok(match kind {
            "momentum" => InitialData::Momentum(read_field(&path)?.0),
            _ => InitialData::Velocity(read_field(&path)?.0),
        })
    }
}
