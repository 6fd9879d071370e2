//! JSON interchange format for colligations.
//!
//! Matrices are row-major nested arrays of `[re, im]` pairs. A space with the
//! canonical Gram `diag(I_pos, -I_neg)` omits the `gram` field; files written by
//! [`SystemFile::to_json`] are in canonical form and survive a load/save cycle
//! byte for byte.

use serde::{Deserialize, Serialize};

use crate::colligation::Colligation;
use crate::error::{Error, Result};
use crate::indefinite::SignatureSpace;
use crate::linalg::{max_abs, CMat, C64};

pub const FORMAT_VERSION: u32 = 1;

/// Row-major matrix of `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub pos: usize,
    pub neg: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<JsonMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesSpec {
    pub state: SpaceSpec,
    pub input: SpaceSpec,
    pub output: SpaceSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub format_version: u32,
    pub spaces: SpacesSpec,
    #[serde(rename = "A")]
    pub a: JsonMatrix,
    #[serde(rename = "B")]
    pub b: JsonMatrix,
    #[serde(rename = "C")]
    pub c: JsonMatrix,
    #[serde(rename = "D")]
    pub d: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

pub fn matrix_to_json(m: &CMat) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// Reads a matrix of known shape; `path` names the field in error messages.
pub fn matrix_from_json(data: &JsonMatrix, rows: usize, cols: usize, path: &str) -> Result<CMat> {
    if data.len() != rows {
        return Err(Error::Parse(format!("{path}: {} rows, expected {rows}", data.len())));
    }
    let mut m = CMat::zeros(rows, cols);
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Parse(format!("{path}[{i}]: {} entries, expected {cols}", row.len())));
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Parse(format!("{path}[{i}][{j}]: non-finite entry")));
            }
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

fn space_to_spec(s: &SignatureSpace) -> SpaceSpec {
    let canonical = SignatureSpace::canonical(s.pos_index(), s.neg_index());
    let gram = if max_abs(&(s.gram() - canonical.gram())) == 0.0 { None } else { Some(matrix_to_json(s.gram())) };
    SpaceSpec { pos: s.pos_index(), neg: s.neg_index(), gram }
}

fn space_from_spec(spec: &SpaceSpec, path: &str) -> Result<SignatureSpace> {
    let n = spec.pos + spec.neg;
    let Some(g) = &spec.gram else {
        return Ok(SignatureSpace::canonical(spec.pos, spec.neg));
    };
    let gram = matrix_from_json(g, n, n, &format!("{path}.gram"))?;
    let space = SignatureSpace::new(gram).map_err(|e| Error::Parse(format!("{path}.gram: {e}")))?;
    if space.signature() != (spec.pos, spec.neg) {
        return Err(Error::Parse(format!(
            "{path}.gram: signature {:?} does not match declared ({}, {})",
            space.signature(),
            spec.pos,
            spec.neg
        )));
    }
    Ok(space)
}

impl SystemFile {
    pub fn from_colligation(sys: &Colligation, metadata: Option<Metadata>) -> Self {
        SystemFile {
            format_version: FORMAT_VERSION,
            spaces: SpacesSpec {
                state: space_to_spec(sys.state()),
                input: space_to_spec(sys.input()),
                output: space_to_spec(sys.output()),
            },
            a: matrix_to_json(sys.a()),
            b: matrix_to_json(sys.b()),
            c: matrix_to_json(sys.c()),
            d: matrix_to_json(sys.d()),
            metadata,
        }
    }

    pub fn to_colligation(&self) -> Result<Colligation> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "format_version: {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let state = space_from_spec(&self.spaces.state, "spaces.state")?;
        let input = space_from_spec(&self.spaces.input, "spaces.input")?;
        let output = space_from_spec(&self.spaces.output, "spaces.output")?;
        let (n, m, p) = (state.dim(), input.dim(), output.dim());
        let a = matrix_from_json(&self.a, n, n, "A")?;
        let b = matrix_from_json(&self.b, n, m, "B")?;
        let c = matrix_from_json(&self.c, p, n, "C")?;
        let d = matrix_from_json(&self.d, p, m, "D")?;
        Colligation::new(state, input, output, a, b, c, d)
    }

    /// Parses JSON text; syntax errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system files always serialize");
        s.push('\n');
        s
    }
}

pub fn load_system(text: &str) -> Result<(Colligation, Option<Metadata>)> {
    let file = SystemFile::parse(text)?;
    let sys = file.to_colligation()?;
    Ok((sys, file.metadata))
}

pub fn save_system(sys: &Colligation, metadata: Option<Metadata>) -> String {
    SystemFile::from_colligation(sys, metadata).to_json()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{mixed_example, reciprocal_blaschke_example};
    use crate::linalg::from_real;

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let meta = Metadata { name: Some("mixed".into()), seed: Some(7), provenance: None };
        let text = save_system(&mixed_example(), Some(meta));
        let (sys, meta) = load_system(&text).unwrap();
        assert_eq!(save_system(&sys, meta), text);
        assert!(text.ends_with("}\n"));
        // Only the state Gram of this example is off the canonical ordering.
        assert_eq!(text.matches("\"gram\"").count(), 1);
    }

    #[test]
    fn explicit_gram_survives() {
        let sys = reciprocal_blaschke_example(0.5).unwrap();
        let g = SignatureSpace::new(from_real(1, 1, &[-2.0])).unwrap();
        let sys = sys.with_state_gram(g.gram().clone()).unwrap();
        let text = save_system(&sys, None);
        assert!(text.contains("gram"));
        let (back, _) = load_system(&text).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn shape_errors_name_the_field() {
        let mut file = SystemFile::from_colligation(&mixed_example(), None);
        file.b.pop();
        let err = file.to_colligation().unwrap_err();
        assert!(err.to_string().contains("B: 1 rows, expected 2"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = SystemFile::parse("{\n  \"format_version\": 1,\n  oops\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn declared_signature_must_match_gram() {
        let mut file = SystemFile::from_colligation(&mixed_example(), None);
        file.spaces.state.gram = Some(vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]]);
        assert!(file.to_colligation().is_err());
    }
}
