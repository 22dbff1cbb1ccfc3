//! JSON encodings.
//!
//! A complex scalar is `[re, im]`, a matrix is a list of rows, an
//! [`AlgebraElement`] is `{"blocks": [matrix, …]}`. Everything that reads
//! untrusted input funnels through the `parse_*` functions below, which
//! never panic and enforce all type invariants.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, BlockAlgebra};
use crate::error::{invalid, Error, Result};
use crate::jordan::JordanIso;
use crate::linalg::CMatrix;
use crate::standard_form::ConeVector;
use crate::states::NormalState;

/// Largest block dimension accepted from JSON input.
pub const MAX_BLOCK_DIM: usize = 64;
/// Largest number of blocks accepted from JSON input.
pub const MAX_BLOCKS: usize = 64;

pub(crate) type MatrixWire = Vec<Vec<[f64; 2]>>;

pub(crate) fn matrix_to_wire(m: &CMatrix) -> MatrixWire {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn matrix_from_wire(rows: &MatrixWire) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(invalid("empty matrix"));
    }
    if n > MAX_BLOCK_DIM {
        return Err(invalid(format!("matrix dimension {n} exceeds {MAX_BLOCK_DIM}")));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(invalid(format!("row {i} has length {}, expected {n}", rows[i].len())));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &[re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(invalid(format!("entry ({i},{j}) is not finite")));
            }
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

fn blocks_from_wire(blocks: &[MatrixWire]) -> Result<Vec<CMatrix>> {
    if blocks.len() > MAX_BLOCKS {
        return Err(invalid(format!(
            "{} blocks exceed the limit of {MAX_BLOCKS}",
            blocks.len()
        )));
    }
    blocks.iter().map(matrix_from_wire).collect()
}

#[derive(Clone, Serialize, Deserialize)]
pub(crate) struct ElementWire {
    blocks: Vec<MatrixWire>,
}

impl From<AlgebraElement> for ElementWire {
    fn from(x: AlgebraElement) -> Self {
        Self {
            blocks: x.blocks().iter().map(matrix_to_wire).collect(),
        }
    }
}

impl TryFrom<ElementWire> for AlgebraElement {
    type Error = Error;
    fn try_from(w: ElementWire) -> Result<Self> {
        AlgebraElement::from_blocks(blocks_from_wire(&w.blocks)?)
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub(crate) struct StateWire {
    algebra: BlockAlgebra,
    blocks: Vec<MatrixWire>,
}

impl From<NormalState> for StateWire {
    fn from(s: NormalState) -> Self {
        Self {
            algebra: s.algebra().clone(),
            blocks: s.blocks().iter().map(matrix_to_wire).collect(),
        }
    }
}

impl TryFrom<StateWire> for NormalState {
    type Error = Error;
    fn try_from(w: StateWire) -> Result<Self> {
        if w.algebra.num_blocks() > MAX_BLOCKS || w.algebra.block_dims().iter().any(|&n| n > MAX_BLOCK_DIM) {
            return Err(invalid("algebra exceeds input size limits"));
        }
        NormalState::new(&w.algebra, blocks_from_wire(&w.blocks)?)
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub(crate) struct ConeWire {
    blocks: Vec<MatrixWire>,
    in_cone: bool,
}

impl From<ConeVector> for ConeWire {
    fn from(v: ConeVector) -> Self {
        Self {
            in_cone: v.in_cone(),
            blocks: v.blocks().iter().map(matrix_to_wire).collect(),
        }
    }
}

impl TryFrom<ConeWire> for ConeVector {
    type Error = Error;
    fn try_from(w: ConeWire) -> Result<Self> {
        let v = ConeVector::from_element(AlgebraElement::from_blocks(blocks_from_wire(&w.blocks)?)?);
        if w.in_cone && !v.in_cone() {
            return Err(invalid("vector is flagged in_cone but is not positive semidefinite"));
        }
        Ok(v)
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub(crate) struct JordanBlockWire {
    pub(crate) unitary: MatrixWire,
    pub(crate) transposed: bool,
}

#[derive(Clone, Serialize, Deserialize)]
pub(crate) struct JordanWire {
    pub(crate) perm: Vec<usize>,
    pub(crate) blocks: Vec<JordanBlockWire>,
}

impl From<JordanIso> for JordanWire {
    fn from(j: JordanIso) -> Self {
        Self {
            perm: j.perm().to_vec(),
            blocks: j
                .unitaries()
                .iter()
                .zip(j.transposed())
                .map(|(u, &t)| JordanBlockWire {
                    unitary: matrix_to_wire(u),
                    transposed: t,
                })
                .collect(),
        }
    }
}

impl TryFrom<JordanWire> for JordanIso {
    type Error = Error;
    fn try_from(w: JordanWire) -> Result<Self> {
        if w.blocks.len() > MAX_BLOCKS {
            return Err(invalid("too many blocks"));
        }
        let unitaries = w
            .blocks
            .iter()
            .map(|b| matrix_from_wire(&b.unitary))
            .collect::<Result<Vec<_>>>()?;
        let transposed = w.blocks.iter().map(|b| b.transposed).collect();
        JordanIso::from_parts(w.perm, unitaries, transposed)
    }
}

/// A state map named on the command line.
#[derive(Clone, Debug)]
pub enum MapSpec {
    /// The predual of a Jordan *-isomorphism.
    Jordan(JordanIso),
    /// The built-in segment-swapping counterexample on `M_dim`.
    Counterexample { dim: usize },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MapSpecWire {
    Name(String),
    Builtin { builtin: String, dim: Option<usize> },
    Jordan(JordanWire),
}

/// Parse `BlockAlgebra` JSON.
pub fn parse_algebra(text: &str) -> Result<BlockAlgebra> {
    let a: BlockAlgebra = serde_json::from_str(text)?;
    if a.num_blocks() > MAX_BLOCKS || a.block_dims().iter().any(|&n| n > MAX_BLOCK_DIM) {
        return Err(invalid("algebra exceeds input size limits"));
    }
    Ok(a)
}

pub fn parse_element(text: &str) -> Result<AlgebraElement> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_state(text: &str) -> Result<NormalState> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_cone_vector(text: &str) -> Result<ConeVector> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_jordan_iso(text: &str) -> Result<JordanIso> {
    Ok(serde_json::from_str(text)?)
}

/// Map specification: a `JordanIso` object, the string `"counterexample"`
/// (dimension 2), or `{"builtin": "counterexample", "dim": n}`.
pub fn parse_map_spec(text: &str) -> Result<MapSpec> {
    let counterexample = |dim: usize| {
        if (2..=MAX_BLOCK_DIM).contains(&dim) {
            Ok(MapSpec::Counterexample { dim })
        } else {
            Err(invalid(format!(
                "counterexample dimension {dim} outside 2..={MAX_BLOCK_DIM}"
            )))
        }
    };
    match serde_json::from_str::<MapSpecWire>(text)? {
        MapSpecWire::Name(name) if name == "counterexample" => counterexample(2),
        MapSpecWire::Builtin { builtin, dim } if builtin == "counterexample" => counterexample(dim.unwrap_or(2)),
        MapSpecWire::Name(other) | MapSpecWire::Builtin { builtin: other, .. } => {
            Err(invalid(format!("unknown builtin map {other:?}")))
        }
        MapSpecWire::Jordan(w) => Ok(MapSpec::Jordan(w.try_into()?)),
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
