//! Structured-text (TOML) records for cylindrical functions and generators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::families::{BranchSum, BranchTerm, ExampleUk};
use super::function::{Component, CylindricalFunction, Rotation};
use crate::error::{Error, Result};
use crate::eval::{QEvaluator, Stack};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub multiplicity: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero: bool,
    #[serde(default)]
    pub re: Vec<f64>,
    #[serde(default)]
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationRecord {
    pub n: usize,
    /// Rows of the skew generator.
    pub generator: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylindricalRecord {
    pub q: usize,
    pub m: usize,
    pub k0: usize,
    pub q0: usize,
    pub components: Vec<ComponentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<RotationRecord>,
}

fn complex_vec(re: &[f64], im: &[f64]) -> Result<Vec<Complex64>> {
    if re.len() != im.len() {
        return Err(Error::Format("re and im arrays differ in length".into()));
    }
    Ok(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

impl From<&CylindricalFunction> for CylindricalRecord {
    fn from(phi: &CylindricalFunction) -> Self {
        let components = phi
            .components()
            .iter()
            .map(|c| match &c.coeff {
                Some(v) => ComponentRecord {
                    multiplicity: c.multiplicity,
                    zero: false,
                    re: v.iter().map(|z| z.re).collect(),
                    im: v.iter().map(|z| z.im).collect(),
                },
                None => ComponentRecord { multiplicity: c.multiplicity, zero: true, re: vec![], im: vec![] },
            })
            .collect();
        let rotation = phi.rotation().map(|r| RotationRecord {
            n: r.n(),
            generator: r.generator().chunks(r.n()).map(|row| row.to_vec()).collect(),
        });
        CylindricalRecord { q: phi.q(), m: phi.m(), k0: phi.k0(), q0: phi.q0(), components, rotation }
    }
}

impl CylindricalRecord {
    pub fn build(&self) -> Result<CylindricalFunction> {
        let comps = self
            .components
            .iter()
            .map(|c| {
                if c.zero {
                    Ok(Component::zero(c.multiplicity))
                } else {
                    Ok(Component::new(complex_vec(&c.re, &c.im)?, c.multiplicity))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let phi = CylindricalFunction::new(self.q, self.m, self.k0, self.q0, comps)?;
        match &self.rotation {
            None => Ok(phi),
            Some(r) => {
                if r.generator.len() != r.n {
                    return Err(Error::Format("rotation generator needs n rows".into()));
                }
                let flat: Vec<f64> = r.generator.iter().flatten().copied().collect();
                Ok(phi.with_rotation(Rotation::new(r.n, flat)?))
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("record serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub k0: usize,
    pub q0: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// A named analytic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorRecord {
    Cylinder(CylindricalRecord),
    Uk {
        q: usize,
        k: f64,
    },
    Sum {
        terms: Vec<TermRecord>,
        #[serde(default)]
        constant: Option<Vec<f64>>,
    },
    /// Union of the value sets of the parts.
    Stack {
        parts: Vec<GeneratorRecord>,
    },
}

impl GeneratorRecord {
    pub fn build(&self) -> Result<Box<dyn QEvaluator + Send>> {
        Ok(match self {
            GeneratorRecord::Cylinder(r) => Box::new(r.build()?),
            GeneratorRecord::Uk { q, k } => Box::new(ExampleUk::new(*q, *k)?),
            GeneratorRecord::Sum { terms, constant } => {
                let terms = terms
                    .iter()
                    .map(|t| Ok(BranchTerm { k0: t.k0, q0: t.q0, coeff: complex_vec(&t.re, &t.im)? }))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(BranchSum::new(terms, constant.clone())?)
            }
            GeneratorRecord::Stack { parts } => {
                Box::new(Stack::new(parts.iter().map(|p| p.build()).collect::<Result<_>>()?)?)
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("record serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}
