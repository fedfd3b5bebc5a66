//! Versioned JSON snapshots of trained models.

use std::collections::BTreeMap;
use std::path::Path;

use cpsnn::linalg::Matrix;
use cpsnn::{AnyModel, Error, ModelHyperparams, ModelKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub format_version: u32,
    pub kind: ModelKind,
    pub seed: u64,
    /// Tensor name to dimensions: `[rows, cols]` for matrices, `[len]` for vectors.
    pub shapes: BTreeMap<String, Vec<usize>>,
    pub hyper: ModelHyperparams,
    pub model: AnyModel,
}

fn mat(m: &Matrix) -> Vec<usize> {
    vec![m.rows, m.cols]
}

fn shapes_of(model: &AnyModel) -> BTreeMap<String, Vec<usize>> {
    let mut s = BTreeMap::new();
    let mut put = |k: &str, v: Vec<usize>| {
        s.insert(k.to_string(), v);
    };
    match model {
        AnyModel::Cpsnn(p) => {
            put("w", mat(&p.w));
            put("w_c", mat(&p.w_c));
            put("b_c", vec![p.b_c.len()]);
            put("w_out", mat(&p.w_out));
            put("b_out", vec![p.b_out.len()]);
            put("mixing", vec![p.mixing.len()]);
        }
        AnyModel::SnnFixed(p) => {
            put("w", mat(&p.w));
            put("w_out", mat(&p.w_out));
            put("b_out", vec![p.b_out.len()]);
        }
        AnyModel::SnnAdaptive(p) => {
            put("w", mat(&p.w));
            put("u", mat(&p.u));
            put("a", vec![p.a.len()]);
            put("w_out", mat(&p.w_out));
            put("b_out", vec![p.b_out.len()]);
        }
    }
    s
}

impl Snapshot {
    pub fn new(model: AnyModel, hyper: ModelHyperparams, seed: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: model.kind(),
            seed,
            shapes: shapes_of(&model),
            hyper,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    /// Reads a snapshot, checking the format version before anything else
    /// and the recorded shapes against the stored tensors.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        let found = raw.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| {
            CliError::Data(format!("{}: missing format_version", path.display()))
        })?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::FormatVersion {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            }
            .into());
        }
        let snap: Snapshot = serde_json::from_value(raw)?;
        if snap.kind != snap.model.kind() || snap.shapes != shapes_of(&snap.model) {
            return Err(CliError::Data(format!("{}: header does not match stored tensors", path.display())));
        }
        snap.model.check_shapes(&snap.hyper)?;
        Ok(snap)
    }
}
