//! JSON parameter manifests with bit-exact reload.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::scalar::Scalar;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Named tensors in a fixed order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterManifest {
    pub tensors: Vec<TensorRecord>,
}

impl ParameterManifest {
    pub fn from_named<'a, T: Scalar>(named: impl IntoIterator<Item = (String, &'a Tensor<T>)>) -> Self {
        Self {
            tensors: named
                .into_iter()
                .map(|(name, t)| TensorRecord {
                    name,
                    shape: t.shape(),
                    values: t.data().iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn get<T: Scalar>(&self, name: &str) -> Result<Tensor<T>> {
        let rec = self
            .tensors
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::InvalidParameter(format!("checkpoint has no tensor named {name}")))?;
        Tensor::from_vec(
            rec.shape[0],
            rec.shape[1],
            rec.values.iter().map(|&v| T::of(v)).collect(),
        )
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|r| r.name.as_str())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let t = Tensor::from_vec(2, 2, vec![0.1, -1e-300, std::f64::consts::PI, 1.0 / 3.0]).unwrap();
        let m = ParameterManifest::from_named([("w".to_string(), &t)]);
        let back = ParameterManifest::from_json(&m.to_json().unwrap()).unwrap();
        let u: Tensor<f64> = back.get("w").unwrap();
        assert!(t.data().iter().zip(u.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(back.get::<f64>("missing").is_err());
    }
}
