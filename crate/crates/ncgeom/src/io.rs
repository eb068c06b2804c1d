//! Text serialization of triples.
//!
//! Matrices are stored as `{rows, cols, re, im}` with row-major flat arrays.
//! Floats are written in shortest round-trip form, so save followed by load
//! reproduces every entry bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix};
use crate::triple::{
    ChainTerm, ChartHint, Factor, FibreDecomposition, HochschildChain, RealStructure, SamplePoint,
    SpectralTriple, TripleParts, VolumeForm,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorDoc {
    Name(String),
    Matrix(MatrixDoc),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    pub name: String,
    pub matrix: MatrixDoc,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub coeff_re: f64,
    pub coeff_im: f64,
    pub factors: Vec<FactorDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleDoc {
    pub degree: usize,
    pub terms: Vec<TermDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDoc {
    pub label: String,
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FibresDoc {
    pub points: Vec<PointDoc>,
    pub indices: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealStructureDoc {
    pub matrix: MatrixDoc,
    pub conjugates: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierVolumeDoc {
    pub zero_mode: usize,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartHintDoc {
    pub label: String,
    pub names: Vec<String>,
    pub coordinates: Vec<FactorDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<String>>,
}

/// The on-disk triple document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleDoc {
    pub name: String,
    pub hilbert_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimed_dimension: Option<usize>,
    pub commutative_flag: bool,
    pub generators: Vec<GeneratorDoc>,
    pub dirac: MatrixDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<MatrixDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_structure: Option<RealStructureDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<CycleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibres: Option<FibresDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume_fourier: Option<FourierVolumeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_distance: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atlas_hint: Option<Vec<ChartHintDoc>>,
}

fn matrix_doc(m: &ComplexMatrix) -> MatrixDoc {
    MatrixDoc {
        rows: m.dim(),
        cols: m.dim(),
        re: m.as_slice().iter().map(|z| z.re).collect(),
        im: m.as_slice().iter().map(|z| z.im).collect(),
    }
}

fn matrix_from(d: &MatrixDoc, field: &str) -> Result<ComplexMatrix> {
    if d.rows != d.cols {
        return Err(Error::Schema(format!(
            "{field}: matrix is {}×{}, expected square",
            d.rows, d.cols
        )));
    }
    let n = d.rows * d.cols;
    if d.re.len() != n || d.im.len() != n {
        return Err(Error::Schema(format!(
            "{field}: expected {n} entries in `re` and `im`, found {} and {}",
            d.re.len(),
            d.im.len()
        )));
    }
    let data = d.re.iter().zip(&d.im).map(|(&r, &i)| c64(r, i)).collect();
    ComplexMatrix::new(d.rows, data).map_err(|e| Error::Schema(format!("{field}: {e}")))
}

fn factor_doc(f: &Factor) -> FactorDoc {
    match f {
        Factor::Generator(n) => FactorDoc::Name(n.clone()),
        Factor::Matrix(m) => FactorDoc::Matrix(matrix_doc(m)),
    }
}

fn factor_from(d: &FactorDoc, field: &str) -> Result<Factor> {
    Ok(match d {
        FactorDoc::Name(n) => Factor::Generator(n.clone()),
        FactorDoc::Matrix(m) => Factor::Matrix(matrix_from(m, field)?),
    })
}

pub fn to_document(triple: &SpectralTriple) -> TripleDoc {
    let p = triple.parts();
    let (volume_weights, volume_fourier) = match &p.volume {
        Some(VolumeForm::Weights(w)) => (Some(w.clone()), None),
        Some(VolumeForm::Fourier { zero_mode, total }) => (
            None,
            Some(FourierVolumeDoc {
                zero_mode: *zero_mode,
                total: *total,
            }),
        ),
        None => (None, None),
    };
    TripleDoc {
        name: p.name.clone(),
        hilbert_dim: triple.dim(),
        claimed_dimension: p.claimed_dimension,
        commutative_flag: p.commutative,
        generators: p
            .generators
            .iter()
            .map(|(n, m)| GeneratorDoc {
                name: n.clone(),
                matrix: matrix_doc(m),
            })
            .collect(),
        dirac: matrix_doc(&p.dirac),
        grading: p.grading.as_ref().map(matrix_doc),
        real_structure: p.real_structure.as_ref().map(|j| RealStructureDoc {
            matrix: matrix_doc(&j.matrix),
            conjugates: j.conjugates,
        }),
        cycle: p.cycle.as_ref().map(|c| CycleDoc {
            degree: c.degree(),
            terms: c
                .terms()
                .iter()
                .map(|t| TermDoc {
                    coeff_re: t.coefficient.re,
                    coeff_im: t.coefficient.im,
                    factors: t.factors.iter().map(factor_doc).collect(),
                })
                .collect(),
        }),
        fibres: p.fibres.as_ref().map(|f| FibresDoc {
            points: f
                .points()
                .iter()
                .map(|pt| PointDoc {
                    label: pt.label.clone(),
                    coords: pt.coords.clone(),
                })
                .collect(),
            indices: f.all_fibres().to_vec(),
        }),
        volume_weights,
        volume_fourier,
        boundary_distance: p.boundary_distance.clone(),
        atlas_hint: p.atlas_hint.as_ref().map(|hs| {
            hs.iter()
                .map(|h| ChartHintDoc {
                    label: h.label.clone(),
                    names: h.names.clone(),
                    coordinates: h.coordinates.iter().map(factor_doc).collect(),
                    domain: h.domain.clone(),
                })
                .collect()
        }),
    }
}

pub fn from_document(doc: &TripleDoc) -> Result<SpectralTriple> {
    let dirac = matrix_from(&doc.dirac, "dirac")?;
    if dirac.dim() != doc.hilbert_dim {
        return Err(Error::Schema(format!(
            "hilbert_dim is {} but dirac is {}×{}",
            doc.hilbert_dim,
            dirac.dim(),
            dirac.dim()
        )));
    }
    let mut parts = TripleParts::new(&doc.name, dirac);
    parts.claimed_dimension = doc.claimed_dimension;
    parts.commutative = doc.commutative_flag;
    parts.generators = doc
        .generators
        .iter()
        .enumerate()
        .map(|(k, g)| {
            Ok((
                g.name.clone(),
                matrix_from(&g.matrix, &format!("generators[{k}].matrix"))?,
            ))
        })
        .collect::<Result<_>>()?;
    parts.grading = doc
        .grading
        .as_ref()
        .map(|g| matrix_from(g, "grading"))
        .transpose()?;
    parts.real_structure = doc
        .real_structure
        .as_ref()
        .map(|j| {
            Ok::<_, Error>(RealStructure {
                matrix: matrix_from(&j.matrix, "real_structure.matrix")?,
                conjugates: j.conjugates,
            })
        })
        .transpose()?;
    parts.cycle = match &doc.cycle {
        None => None,
        Some(c) => {
            let terms = c
                .terms
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let factors = t
                        .factors
                        .iter()
                        .enumerate()
                        .map(|(i, f)| factor_from(f, &format!("cycle.terms[{k}].factors[{i}]")))
                        .collect::<Result<_>>()?;
                    Ok(ChainTerm {
                        coefficient: c64(t.coeff_re, t.coeff_im),
                        factors,
                    })
                })
                .collect::<Result<_>>()?;
            Some(
                HochschildChain::new(c.degree, terms)
                    .map_err(|e| Error::Schema(format!("cycle: {e}")))?,
            )
        }
    };
    parts.fibres = doc
        .fibres
        .as_ref()
        .map(|f| {
            let points = f
                .points
                .iter()
                .map(|p| SamplePoint {
                    label: p.label.clone(),
                    coords: p.coords.clone(),
                })
                .collect();
            FibreDecomposition::new(points, f.indices.clone(), doc.hilbert_dim)
        })
        .transpose()?;
    parts.volume = match (&doc.volume_weights, &doc.volume_fourier) {
        (Some(_), Some(_)) => {
            return Err(Error::Schema(
                "volume_weights and volume_fourier are mutually exclusive".into(),
            ))
        }
        (Some(w), None) => Some(VolumeForm::Weights(w.clone())),
        (None, Some(f)) => Some(VolumeForm::Fourier {
            zero_mode: f.zero_mode,
            total: f.total,
        }),
        (None, None) => None,
    };
    parts.boundary_distance = doc.boundary_distance.clone();
    parts.atlas_hint = doc
        .atlas_hint
        .as_ref()
        .map(|hs| {
            hs.iter()
                .enumerate()
                .map(|(k, h)| {
                    Ok(ChartHint {
                        label: h.label.clone(),
                        names: h.names.clone(),
                        coordinates: h
                            .coordinates
                            .iter()
                            .enumerate()
                            .map(|(i, f)| {
                                factor_from(f, &format!("atlas_hint[{k}].coordinates[{i}]"))
                            })
                            .collect::<Result<_>>()?,
                        domain: h.domain.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    SpectralTriple::new(parts)
}

/// Pretty-printed document.
pub fn to_json(triple: &SpectralTriple) -> String {
    serde_json::to_string_pretty(&to_document(triple)).expect("documents always serialize")
}

/// Parses a document, reporting the failing field path and position.
pub fn from_json(text: &str) -> Result<SpectralTriple> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: TripleDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Schema(format!(
            "line {}, column {}, field `{path}`: {inner}",
            inner.line(),
            inner.column()
        ))
    })?;
    from_document(&doc)
}

pub fn save(triple: &SpectralTriple, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(triple) + "\n")?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SpectralTriple> {
    from_json(&std::fs::read_to_string(path)?)
}

/// SHA-256 of the compact document, hex encoded.
pub fn fingerprint(triple: &SpectralTriple) -> String {
    let text = serde_json::to_string(&to_document(triple)).expect("documents always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}
