//! Hierarchical solver parameters addressed by dotted paths.
//!
//! The tree nests the parameters of each component under its parent, the
//! way a composed solver is built: `solver.*` configures the outer Krylov
//! method, `precond.*` the local AMG, `precond.usolver.*` and
//! `precond.psolver.*` the velocity and pressure solvers of the block
//! preconditioner, and `deflation.*` the coarse space. Every key has a
//! default; unknown keys are rejected with their full path.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

fn amg_defaults() -> Value {
    json!({
        "coarsening": {
            "type": "smoothed_aggregation",
            "eps_strong": 0.08,
            "omega": 2.0 / 3.0
        },
        "relax": {
            "type": "damped_jacobi",
            "damping": 0.8
        },
        "coarse_enough": 500
    })
}

/// Default tree. Every accepted key appears here.
pub fn defaults() -> Value {
    let mut precond = amg_defaults();
    let p = precond.as_object_mut().unwrap();
    p.insert(
        "usolver".into(),
        json!({
            "solver": { "type": "gmres", "tol": 1e-3, "maxiter": 5, "M": 50 }
        }),
    );
    p.insert(
        "psolver".into(),
        json!({
            "isolver": { "type": "fgmres", "tol": 1e-2, "maxiter": 20, "M": 50 },
            "local": amg_defaults(),
            "deflation": { "kind": "constant" }
        }),
    );
    json!({
        "solver": {
            "type": "bicgstab2",
            "tol": 1e-6,
            "maxiter": 500,
            "M": 50
        },
        "precond": precond,
        "deflation": {
            "kind": "constant",
            "inexact": false,
            "coarse_tol": 1e-8
        },
        "runtime": {
            "threads": 1
        }
    })
}

/// Validated parameter tree.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    tree: Value,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tree: defaults() }
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) if n.is_u64() => "non-negative integer",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Whether `new` may replace a default value `old`.
fn compatible(old: &Value, new: &Value) -> bool {
    match (old, new) {
        (Value::Bool(_), Value::Bool(_)) | (Value::String(_), Value::String(_)) => true,
        (Value::Number(o), Value::Number(n)) => !o.is_u64() || n.is_u64(),
        (Value::Object(_), Value::Object(_)) => true,
        _ => false,
    }
}

fn merge(base: &mut Value, overlay: &Map<String, Value>, prefix: &str) -> Result<()> {
    for (key, value) in overlay {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let slot = base
            .as_object_mut()
            .and_then(|m| m.get_mut(key))
            .ok_or_else(|| Error::config(&path, "unknown key"))?;
        if !compatible(slot, value) {
            return Err(Error::config(
                &path,
                format!("expected {}, found {}", kind_of(slot), kind_of(value)),
            ));
        }
        match value {
            Value::Object(sub) => merge(slot, sub, &path)?,
            v => *slot = v.clone(),
        }
    }
    Ok(())
}

impl SolverConfig {
    /// Parses a JSON object and merges it over the defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config("", "configuration must be a JSON object"))?;
        let mut cfg = Self::default();
        merge(&mut cfg.tree, obj, "")?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            line: 0,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_json_str(&text)
    }

    /// Merges another JSON object over the current values.
    pub fn merge_json(&mut self, overlay: &Value) -> Result<()> {
        let obj = overlay
            .as_object()
            .ok_or_else(|| Error::config("", "overlay must be a JSON object"))?;
        let mut tree = self.tree.clone();
        merge(&mut tree, obj, "")?;
        self.tree = tree;
        Ok(())
    }

    pub fn get(&self, path: &str) -> Result<&Value> {
        let mut node = &self.tree;
        for key in path.split('.') {
            node = node.get(key).ok_or_else(|| Error::config(path, "unknown key"))?;
        }
        Ok(node)
    }

    /// Sets a leaf value; the key must exist and the type must match.
    pub fn set(&mut self, path: &str, value: Value) -> Result<()> {
        let mut node = &mut self.tree;
        for key in path.split('.') {
            node = node.get_mut(key).ok_or_else(|| Error::config(path, "unknown key"))?;
        }
        if node.is_object() || !compatible(node, &value) {
            return Err(Error::config(
                path,
                format!("expected {}, found {}", kind_of(node), kind_of(&value)),
            ));
        }
        *node = value;
        Ok(())
    }

    pub fn get_f64(&self, path: &str) -> Result<f64> {
        self.get(path)?
            .as_f64()
            .ok_or_else(|| Error::config(path, "expected a number"))
    }

    pub fn get_usize(&self, path: &str) -> Result<usize> {
        self.get(path)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::config(path, "expected a non-negative integer"))
    }

    pub fn get_str(&self, path: &str) -> Result<&str> {
        self.get(path)?
            .as_str()
            .ok_or_else(|| Error::config(path, "expected a string"))
    }

    pub fn get_bool(&self, path: &str) -> Result<bool> {
        self.get(path)?
            .as_bool()
            .ok_or_else(|| Error::config(path, "expected a boolean"))
    }

    pub fn as_value(&self) -> &Value {
        &self.tree
    }

    /// Pretty JSON with keys in sorted order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.tree).expect("config tree serializes")
    }

    /// Worker-thread count per subdomain.
    pub fn threads(&self) -> Result<usize> {
        let t = self.get_usize("runtime.threads")?;
        if t == 0 {
            return Err(Error::config("runtime.threads", "must be at least 1"));
        }
        Ok(t)
    }
}
