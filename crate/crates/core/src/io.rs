//! JSON formats. Matrices are row-major nested arrays with complex entries
//! written as `[re, im]` pairs.
//!
//! Deserializing a validated type runs its constructor, so malformed input
//! (non-unitary basis, non-normalized state, incomplete POVM, …) is rejected
//! at parse time. [`RawQuantumClock`] skips the state checks for callers
//! that want to inspect an invalid state.

use crate::channels::{CovariantChoi, GradedKraus, KrausOp};
use crate::clock::{ClassicalCircleClock, HamiltonianSpec, QuantumClock};
use crate::error::{Result, TempusError};
use crate::fisher::Povm;
use crate::linalg::{c64, CMatrix};
use serde::{Deserialize, Serialize};

/// Complex matrix as rows of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        MatrixJson((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }
}

impl TryFrom<MatrixJson> for CMatrix {
    type Error = TempusError;

    fn try_from(value: MatrixJson) -> Result<CMatrix> {
        let rows = value.0.len();
        let cols = value.0.first().map_or(0, Vec::len);
        if let Some(bad) = value.0.iter().find(|r| r.len() != cols) {
            return Err(TempusError::DimensionMismatch { expected: cols, found: bad.len() });
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| c64(value.0[i][j][0], value.0[i][j][1])))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianJson {
    pub eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<MatrixJson>,
}

impl From<HamiltonianSpec> for HamiltonianJson {
    fn from(h: HamiltonianSpec) -> Self {
        let basis = (!h.has_identity_basis()).then(|| MatrixJson::from(h.basis()));
        HamiltonianJson { eigenvalues: h.eigenvalues().to_vec(), basis }
    }
}

impl TryFrom<HamiltonianJson> for HamiltonianSpec {
    type Error = TempusError;

    fn try_from(value: HamiltonianJson) -> Result<Self> {
        match value.basis {
            None => Ok(HamiltonianSpec::diagonal(value.eigenvalues)),
            Some(basis) => HamiltonianSpec::new(value.eigenvalues, basis.try_into()?),
        }
    }
}

/// Quantum clock fields without the state validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawQuantumClock {
    pub rho: MatrixJson,
    #[serde(flatten)]
    pub hamiltonian: HamiltonianJson,
}

impl RawQuantumClock {
    /// Pairs the state with its Hamiltonian checking dimensions only.
    pub fn into_unchecked(self) -> Result<QuantumClock> {
        QuantumClock::unchecked(self.rho.try_into()?, self.hamiltonian.try_into()?)
    }
}

impl From<QuantumClock> for RawQuantumClock {
    fn from(c: QuantumClock) -> Self {
        RawQuantumClock { rho: MatrixJson::from(c.rho()), hamiltonian: c.hamiltonian().clone().into() }
    }
}

impl TryFrom<RawQuantumClock> for QuantumClock {
    type Error = TempusError;

    fn try_from(value: RawQuantumClock) -> Result<Self> {
        QuantumClock::new(value.rho.try_into()?, value.hamiltonian.try_into()?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawClassicalClock {
    pub density: Vec<f64>,
    pub omega: f64,
}

impl From<ClassicalCircleClock> for RawClassicalClock {
    fn from(c: ClassicalCircleClock) -> Self {
        RawClassicalClock { density: c.density().to_vec(), omega: c.omega() }
    }
}

impl TryFrom<RawClassicalClock> for ClassicalCircleClock {
    type Error = TempusError;

    fn try_from(value: RawClassicalClock) -> Result<Self> {
        ClassicalCircleClock::new(value.density, value.omega)
    }
}

/// Either kind of clock, tagged by `"type"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AnyClock {
    Quantum(QuantumClock),
    Classical(ClassicalCircleClock),
}

/// Clock file contents before validation, for reporting on invalid input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RawClock {
    Quantum(RawQuantumClock),
    Classical(RawClassicalClock),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmJson {
    pub outcomes: Vec<f64>,
    pub effects: Vec<MatrixJson>,
}

impl From<Povm> for PovmJson {
    fn from(p: Povm) -> Self {
        PovmJson { outcomes: p.outcomes().to_vec(), effects: p.effects().iter().map(MatrixJson::from).collect() }
    }
}

impl TryFrom<PovmJson> for Povm {
    type Error = TempusError;

    fn try_from(value: PovmJson) -> Result<Self> {
        let effects = value.effects.into_iter().map(CMatrix::try_from).collect::<Result<Vec<_>>>()?;
        Povm::new(value.outcomes, effects)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausJson {
    pub shift: i64,
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradedKrausJson {
    pub kraus: Vec<KrausJson>,
    pub h_in: HamiltonianJson,
    pub h_out: HamiltonianJson,
}

impl From<GradedKraus> for GradedKrausJson {
    fn from(g: GradedKraus) -> Self {
        use crate::channels::Channel;
        GradedKrausJson {
            kraus: g.ops().iter().map(|o| KrausJson { shift: o.shift, matrix: MatrixJson::from(&o.matrix) }).collect(),
            h_in: g.h_in().clone().into(),
            h_out: g.h_out().clone().into(),
        }
    }
}

impl TryFrom<GradedKrausJson> for GradedKraus {
    type Error = TempusError;

    fn try_from(value: GradedKrausJson) -> Result<Self> {
        let ops = value
            .kraus
            .into_iter()
            .map(|k| Ok(KrausOp { shift: k.shift, matrix: k.matrix.try_into()? }))
            .collect::<Result<Vec<_>>>()?;
        GradedKraus::new(ops, value.h_in.try_into()?, value.h_out.try_into()?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiBlockJson {
    pub shift: i64,
    /// (output level, input level) index pairs in the energy bases.
    pub pairs: Vec<[usize; 2]>,
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariantChoiJson {
    pub h_in: HamiltonianJson,
    pub h_out: HamiltonianJson,
    pub blocks: Vec<ChoiBlockJson>,
}

impl From<CovariantChoi> for CovariantChoiJson {
    fn from(c: CovariantChoi) -> Self {
        use crate::channels::Channel;
        let layout = c.layout();
        let blocks = layout
            .shifts()
            .iter()
            .enumerate()
            .map(|(b, &shift)| ChoiBlockJson {
                shift,
                pairs: layout.pairs(b).iter().map(|&(m, n)| [m, n]).collect(),
                matrix: MatrixJson::from(&c.blocks()[b]),
            })
            .collect();
        CovariantChoiJson { h_in: c.h_in().clone().into(), h_out: c.h_out().clone().into(), blocks }
    }
}

impl CovariantChoiJson {
    /// Places the blocks checking layout and sizes only, so that channels
    /// failing CP or TP can still be inspected.
    pub fn into_unchecked(self) -> Result<CovariantChoi> {
        let h_in: HamiltonianSpec = self.h_in.try_into()?;
        let h_out: HamiltonianSpec = self.h_out.try_into()?;
        let layout = crate::channels::ShiftLayout::new(&h_in, &h_out)?;
        let mut dense = layout.zero_blocks();
        for block in self.blocks {
            let b = layout
                .block_of_shift(block.shift)
                .ok_or_else(|| TempusError::InvalidArgument(format!("no level pair has shift {}", block.shift)))?;
            let expected: Vec<[usize; 2]> = layout.pairs(b).iter().map(|&(m, n)| [m, n]).collect();
            if block.pairs != expected {
                return Err(TempusError::InvalidArgument(format!("pairs of shift {} do not match the spectra", block.shift)));
            }
            dense[b] = block.matrix.try_into()?;
        }
        CovariantChoi::from_layout(layout, dense, h_in, h_out)
    }
}

impl TryFrom<CovariantChoiJson> for CovariantChoi {
    type Error = TempusError;

    fn try_from(value: CovariantChoiJson) -> Result<Self> {
        let unchecked = value.into_unchecked()?;
        use crate::channels::Channel;
        CovariantChoi::new(unchecked.nonzero_blocks(), unchecked.h_in().clone(), unchecked.h_out().clone())
    }
}

/// f64 fields that may be infinite: finite values are plain numbers,
/// infinities are the strings "+inf" / "-inf".
pub mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_f64(*value)
        } else if value.is_nan() {
            serializer.serialize_str("nan")
        } else if *value > 0.0 {
            serializer.serialize_str("+inf")
        } else {
            serializer.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "+inf" | "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable value")
}

pub fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> std::result::Result<T, serde_json::Error> {
    serde_json::from_str(text)
}
