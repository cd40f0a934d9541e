//! Named weight tensors and their on-disk container.
//!
//! Files use the safetensors layout: an 8-byte little-endian header length,
//! a JSON header mapping each tensor name to `{dtype, shape, data_offsets}`,
//! then the raw little-endian `f32` payload. Names follow the graph's
//! parameter naming, e.g. `encoder/block2/unit1/conv2/weights` with kernels
//! stored as `[kh, kw, c_in, c_out]`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use super::graph::{NetworkGraph, ParamKind, Role};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Xavier-uniform kernels, zero biases, identity normalisation.
    pub fn xavier(graph: &NetworkGraph, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = WeightStore::new();
        for p in graph.params() {
            let t = match p.kind {
                ParamKind::Kernel => {
                    let limit = (6.0 / (p.fans.0 + p.fans.1) as f64).sqrt() as f32;
                    let data = (0..p.numel()).map(|_| rng.gen_range(-limit..limit)).collect();
                    Tensor::from_vec(&p.shape, data).expect("numel matches shape")
                }
                ParamKind::Gamma | ParamKind::MovingVariance => Tensor::filled(&p.shape, 1.0),
                ParamKind::Bias | ParamKind::Beta | ParamKind::MovingMean => Tensor::zeros(&p.shape),
            };
            store.insert(p.name, t);
        }
        store
    }

    /// All learnable tensors zero; moving variances one.
    pub fn zeros(graph: &NetworkGraph) -> Self {
        let mut store = WeightStore::new();
        for p in graph.params() {
            let v = if p.kind == ParamKind::MovingVariance { 1.0 } else { 0.0 };
            store.insert(p.name, Tensor::filled(&p.shape, v));
        }
        store
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Option<Tensor> {
        self.tensors.insert(name.into(), tensor)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Weights(format!("missing tensor {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Weights(format!("missing tensor {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    /// Checks that every tensor the graph needs is present with the right shape.
    pub fn check_compatible(&self, graph: &NetworkGraph) -> Result<()> {
        for p in graph.params() {
            let t = self.get(&p.name)?;
            if t.shape() != p.shape.as_slice() {
                return Err(Error::Weights(format!(
                    "{} has shape {:?}, graph expects {:?}",
                    p.name,
                    t.shape(),
                    p.shape
                )));
            }
        }
        Ok(())
    }

    /// Copies the encoder tensors of `source` into this store.
    ///
    /// Returns the number of tensors imported. Every encoder tensor must be
    /// present in `source` with the graph's shape.
    pub fn import_encoder(&mut self, graph: &NetworkGraph, source: &WeightStore) -> Result<usize> {
        let mut n = 0;
        for layer in graph.layers.iter().filter(|l| l.role == Role::Encoder) {
            for p in layer.params() {
                let t = source.get(&p.name)?;
                if t.shape() != p.shape.as_slice() {
                    return Err(Error::Weights(format!(
                        "pretrained {} has shape {:?}, expected {:?}",
                        p.name,
                        t.shape(),
                        p.shape
                    )));
                }
                self.insert(p.name, t.clone());
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let views = self
            .tensors
            .iter()
            .map(|(name, t)| {
                let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
                (name.clone(), t.shape().to_vec(), bytes)
            })
            .collect::<Vec<_>>();
        let mut entries = Vec::with_capacity(views.len());
        for (name, shape, bytes) in &views {
            let view = TensorView::new(Dtype::F32, shape.clone(), bytes)
                .map_err(|e| Error::SafeTensors(e.to_string()))?;
            entries.push((name.clone(), view));
        }
        safetensors::serialize(entries, &None::<HashMap<String, String>>)
            .map_err(|e| Error::SafeTensors(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let st = SafeTensors::deserialize(bytes).map_err(|e| Error::SafeTensors(e.to_string()))?;
        let mut store = WeightStore::new();
        for (name, view) in st.tensors() {
            if view.dtype() != Dtype::F32 {
                return Err(Error::Weights(format!("{name}: expected F32, found {:?}", view.dtype())));
            }
            let data = view
                .data()
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            store.insert(name, Tensor::from_vec(view.shape(), data)?);
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
