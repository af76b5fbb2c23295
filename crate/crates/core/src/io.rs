//! JSON interchange for forms and pairs.
//!
//! A form is `{"degree": d, "terms": [{"exp": [i, j, k], "re": a, "im": b}]}`
//! with `im` optional. A pair is `{"d": d, "diag": [...], "sym": [[...]]}`
//! where `sym` holds the full symmetric matrix or just its upper-triangle
//! rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detmap::SymPair;
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::ternary::TernaryForm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub exp: [u32; 3],
    pub re: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub im: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormJson {
    pub degree: usize,
    pub terms: Vec<TermJson>,
}

impl From<&TernaryForm> for FormJson {
    fn from(f: &TernaryForm) -> Self {
        let terms = f
            .terms()
            .filter(|(_, c)| *c != C64::new(0.0, 0.0))
            .map(|((i, j, k), c)| TermJson {
                exp: [i as u32, j as u32, k as u32],
                re: c.re,
                im: c.im,
            })
            .collect();
        Self {
            degree: f.degree(),
            terms,
        }
    }
}

impl TryFrom<&FormJson> for TernaryForm {
    type Error = Error;

    /// Repeated exponents add up.
    fn try_from(j: &FormJson) -> Result<Self> {
        if j.terms.iter().any(|t| t.exp.iter().sum::<u32>() as usize != j.degree) {
            return Err(Error::InhomogeneousInput);
        }
        if j.terms.iter().any(|t| !(t.re.is_finite() && t.im.is_finite())) {
            return Err(Error::Format("non-finite coefficient".into()));
        }
        TernaryForm::from_terms(j.degree, j.terms.iter().map(|t| (t.exp, C64::new(t.re, t.im))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJson {
    pub d: usize,
    pub diag: Vec<f64>,
    pub sym: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_im: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sym_im: Option<Vec<Vec<f64>>>,
}

impl From<&SymPair> for PairJson {
    fn from(z: &SymPair) -> Self {
        let d = z.order();
        let re = z.r_re();
        let (diag_im, sym_im) = if z.max_imag() == 0.0 {
            (None, None)
        } else {
            (
                Some(z.diag().iter().map(|c| c.im).collect()),
                Some((0..d).map(|j| (0..d).map(|k| z.r(j, k).im).collect()).collect()),
            )
        };
        Self {
            d,
            diag: z.diag_re(),
            sym: re,
            diag_im,
            sym_im,
        }
    }
}

/// Full square rows, or upper-triangle rows of lengths `d, d-1, ..., 1`.
fn square(d: usize, rows: &[Vec<f64>], what: &str) -> Result<Vec<Vec<f64>>> {
    if rows.len() != d {
        return Err(Error::Format(format!("{what}: expected {d} rows, got {}", rows.len())));
    }
    if rows.iter().all(|r| r.len() == d) {
        return Ok(rows.to_vec());
    }
    if rows.iter().enumerate().all(|(j, r)| r.len() == d - j) {
        let mut m = vec![vec![0.0; d]; d];
        for (j, r) in rows.iter().enumerate() {
            for (off, &v) in r.iter().enumerate() {
                m[j][j + off] = v;
                m[j + off][j] = v;
            }
        }
        return Ok(m);
    }
    Err(Error::Format(format!("{what}: rows are neither square nor upper-triangular")))
}

impl TryFrom<&PairJson> for SymPair {
    type Error = Error;

    fn try_from(j: &PairJson) -> Result<Self> {
        let d = j.d;
        if d == 0 || j.diag.len() != d {
            return Err(Error::Format(format!("diag must have {d} entries")));
        }
        let re = square(d, &j.sym, "sym")?;
        let im = match &j.sym_im {
            Some(rows) => square(d, rows, "sym_im")?,
            None => vec![vec![0.0; d]; d],
        };
        let dim = match &j.diag_im {
            Some(v) if v.len() == d => v.clone(),
            Some(_) => return Err(Error::Format("diag_im length".into())),
            None => vec![0.0; d],
        };
        let diag = (0..d).map(|k| C64::new(j.diag[k], dim[k])).collect();
        let r: Vec<Vec<C64>> = (0..d)
            .map(|a| (0..d).map(|b| C64::new(re[a][b], im[a][b])).collect())
            .collect();
        SymPair::new(diag, &r)
    }
}

pub fn form_to_string(f: &TernaryForm) -> Result<String> {
    Ok(serde_json::to_string_pretty(&FormJson::from(f))?)
}

pub fn form_from_str(s: &str) -> Result<TernaryForm> {
    let j: FormJson = serde_json::from_str(s)?;
    TernaryForm::try_from(&j)
}

pub fn pair_to_string(z: &SymPair) -> Result<String> {
    Ok(serde_json::to_string_pretty(&PairJson::from(z))?)
}

pub fn pair_from_str(s: &str) -> Result<SymPair> {
    let j: PairJson = serde_json::from_str(s)?;
    SymPair::try_from(&j)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes via a sibling temporary file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(format!("{}: {e}", path.display()))
    })
}
