//! Declarative key = value files for metrics, symmetry candidates and ad-hoc
//! systems. Field-valued entries use the expression grammar and get exact
//! derivatives through the dual-number backend.

use qfi_core::catalog::{self, TodaParams};
use qfi_core::error::{Error, Result};
use qfi_core::expr;
use qfi_core::field::{covector_from_components, ComponentSym2, CovectorField, ScalarField, Sym2Field};
use qfi_core::geometry::MetricSpec;
use std::collections::HashMap;
use std::sync::Arc;

/// Parsed key = value file preserving insertion order; `#` starts a comment.
pub struct SpecFile {
    pub entries: Vec<(String, String)>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<SpecFile> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.iter().any(|(k, _)| *k == key) {
                return Err(Error::Parse(format!("duplicate key `{key}`")));
            }
            entries.push((key, value));
        }
        Ok(SpecFile { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Parse(format!("`{key}` is not a number: `{v}`"))),
        }
    }

    pub fn get_vec(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let parts: Result<Vec<f64>> = v
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Parse(format!("bad number in `{key}`: `{p}`")))
                    })
                    .collect();
                Ok(Some(parts?))
            }
        }
    }

    /// Expression parameters declared as `param.<name> = value`.
    pub fn params(&self) -> Result<HashMap<String, f64>> {
        let mut out = HashMap::new();
        for (k, v) in &self.entries {
            if let Some(name) = k.strip_prefix("param.") {
                let num = v
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("`{k}` is not a number: `{v}`")))?;
                out.insert(name.to_string(), num);
            }
        }
        Ok(out)
    }

    /// Reject keys outside the allowed vocabulary (prefix `param.` and
    /// `fi.` entries are always allowed where stated).
    pub fn check_keys(&self, allowed: &[&str], allow_fi: bool) -> Result<()> {
        for (k, _) in &self.entries {
            let ok = allowed.contains(&k.as_str())
                || k.starts_with("param.")
                || (allow_fi && k.starts_with("fi."));
            if !ok {
                return Err(Error::Parse(format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

/// Resolve a metric id (with optional parameters from the file) to a
/// MetricSpec.
pub fn resolve_metric(id: &str, file: &SpecFile) -> Result<MetricSpec> {
    match id {
        "e2" => Ok(catalog::euclidean(2)),
        "const-curvature" => {
            let k = file.get_f64("k")?.unwrap_or(1.0);
            if k == 0.0 {
                return Err(Error::BadConfig("const-curvature needs k != 0".into()));
            }
            Ok(catalog::constant_curvature(k))
        }
        "no-kv" => Ok(catalog::no_kv_metric()),
        "flat-lorentzian" => Ok(catalog::flat_lorentzian_x()),
        "toda" => {
            let p = TodaParams {
                k1: file.get_f64("k1")?.unwrap_or(1.0),
                k2: file.get_f64("k2")?.unwrap_or(1.0),
                b1: file.get_f64("b1")?.unwrap_or(1.0),
                b2: file.get_f64("b2")?.unwrap_or(2.0),
                b3: file.get_f64("b3")?.unwrap_or(1.0),
            };
            catalog::toda_metric(&p)
        }
        "off-diagonal" => {
            let src = file
                .get("f")
                .ok_or_else(|| Error::BadConfig("off-diagonal metric needs `f = <expr>`".into()))?;
            let f = expr::scalar_field_2d(src, &file.params()?)?;
            Ok(catalog::off_diagonal(f, "off-diagonal"))
        }
        other => Err(Error::UnknownFamily(other.into())),
    }
}

pub fn scalar_from(file: &SpecFile, key: &str) -> Result<Option<Arc<dyn ScalarField>>> {
    match file.get(key) {
        None => Ok(None),
        Some(src) => Ok(Some(expr::scalar_field_2d(src, &file.params()?)?)),
    }
}

pub fn covector_from(file: &SpecFile, kx: &str, ky: &str) -> Result<Arc<dyn CovectorField>> {
    let cx = scalar_from(file, kx)?
        .ok_or_else(|| Error::BadConfig(format!("missing `{kx} = <expr>`")))?;
    let cy = scalar_from(file, ky)?
        .ok_or_else(|| Error::BadConfig(format!("missing `{ky} = <expr>`")))?;
    Ok(covector_from_components(vec![cx, cy]))
}

pub fn sym2_from(file: &SpecFile, prefix: &str) -> Result<Arc<dyn Sym2Field>> {
    let xx = scalar_from(file, &format!("{prefix}xx"))?
        .ok_or_else(|| Error::BadConfig(format!("missing `{prefix}xx = <expr>`")))?;
    let xy = scalar_from(file, &format!("{prefix}xy"))?
        .unwrap_or_else(|| qfi_core::field::zero_scalar(2));
    let yy = scalar_from(file, &format!("{prefix}yy"))?
        .ok_or_else(|| Error::BadConfig(format!("missing `{prefix}yy = <expr>`")))?;
    Ok(Arc::new(ComponentSym2::new(2, vec![xx, xy, yy])))
}
