//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SINT1" | u32 version | u64 manifest_len | manifest (JSON)
//!         | u64 payload_len | payload | sha256(manifest || payload)
//! ```
//!
//! The payload is a sequence of arrays, each written as `u32 ndim`, `ndim`
//! `u64` extents and then the `f32` values in row-major order. The manifest
//! names the arrays, repeats their shapes and carries everything that is not
//! a parameter array.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::classifier::{half_squared_error, ActivationRecords, ClassifierModel};
use crate::engine::{Dense, Network, NetworkSpec, Params};
use crate::introspector::{AutoencoderModel, EstimatorModel};
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SINT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    kind: String,
    arrays: Vec<ArrayEntry>,
    meta: Value,
}

/// Named `f32` arrays travelling with a manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArraySet {
    entries: Vec<(String, ArrayD<f32>)>,
}

impl ArraySet {
    pub fn push(&mut self, name: impl Into<String>, array: ArrayD<f32>) {
        self.entries.push((name.into(), array));
    }

    pub fn take(&mut self, name: &str) -> Result<ArrayD<f32>> {
        let i = self
            .entries
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Container(format!("missing array `{name}`")))?;
        Ok(self.entries.remove(i).1)
    }

    pub fn take1(&mut self, name: &str) -> Result<Array1<f32>> {
        self.take(name)?
            .into_dimensionality()
            .map_err(|_| Error::Shape(format!("array `{name}` is not 1-D")))
    }

    pub fn take2(&mut self, name: &str) -> Result<Array2<f32>> {
        self.take(name)?
            .into_dimensionality()
            .map_err(|_| Error::Shape(format!("array `{name}` is not 2-D")))
    }
}

/// Something that can be written to and read from a container.
pub trait Persist: Sized {
    const KIND: &'static str;

    fn to_parts(&self) -> Result<(Value, ArraySet)>;

    fn from_parts(meta: Value, arrays: ArraySet) -> Result<Self>;
}

pub fn encode_container<M: Persist>(model: &M) -> Result<Vec<u8>> {
    let (meta, arrays) = model.to_parts()?;
    let manifest = Manifest {
        kind: M::KIND.to_string(),
        arrays: arrays
            .entries
            .iter()
            .map(|(name, a)| ArrayEntry {
                name: name.clone(),
                shape: a.shape().to_vec(),
            })
            .collect(),
        meta,
    };
    let manifest = serde_json::to_vec(&manifest)?;
    let mut payload = Vec::new();
    for (_, a) in &arrays.entries {
        payload.extend_from_slice(&(a.ndim() as u32).to_le_bytes());
        for &d in a.shape() {
            payload.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in a.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(manifest.len() + payload.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let mut h = Sha256::new();
    h.update(&manifest);
    h.update(&payload);
    out.extend_from_slice(&h.finalize());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Container("truncated container".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Container("length overflows usize".into()))
    }
}

/// Reads a container's kind without validating the rest.
pub fn peek_kind(bytes: &[u8]) -> Result<String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(5)? != MAGIC {
        return Err(Error::Container("bad magic".into()));
    }
    r.u32()?;
    let n = r.u64()?;
    let m: Manifest = serde_json::from_slice(r.take(n)?)?;
    Ok(m.kind)
}

/// `source` names the container in error messages.
pub fn decode_container<M: Persist>(bytes: &[u8], source: &str) -> Result<M> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(5)? != MAGIC {
        return Err(Error::Container(format!("{source}: bad magic")));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let n = r.u64()?;
    let manifest_bytes = r.take(n)?;
    let n = r.u64()?;
    let payload = r.take(n)?;
    let digest = r.take(32)?;
    if r.pos != bytes.len() {
        return Err(Error::Container(format!("{source}: trailing bytes")));
    }
    let mut h = Sha256::new();
    h.update(manifest_bytes);
    h.update(payload);
    if h.finalize().as_slice() != digest {
        return Err(Error::Checksum(source.to_string()));
    }
    let manifest: Manifest = serde_json::from_slice(manifest_bytes)?;
    if manifest.kind != M::KIND {
        return Err(Error::Kind {
            expected: M::KIND.to_string(),
            found: manifest.kind,
        });
    }
    let mut p = Reader {
        bytes: payload,
        pos: 0,
    };
    let mut arrays = ArraySet::default();
    for entry in &manifest.arrays {
        let ndim = p.u32()? as usize;
        let shape = (0..ndim).map(|_| p.u64()).collect::<Result<Vec<_>>>()?;
        if shape != entry.shape {
            return Err(Error::Shape(format!(
                "array `{}`: manifest shape {:?} but payload shape {:?}",
                entry.name, entry.shape, shape
            )));
        }
        let count: usize = shape.iter().product();
        let raw = p.take(count.checked_mul(4).ok_or_else(|| {
            Error::Container("array too large".into())
        })?)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let a = ArrayD::from_shape_vec(IxDyn(&shape), values)
            .map_err(|e| Error::Shape(e.to_string()))?;
        arrays.push(entry.name.clone(), a);
    }
    if p.pos != payload.len() {
        return Err(Error::Container(format!("{source}: payload longer than manifest")));
    }
    M::from_parts(manifest.meta, arrays)
}

pub fn save_model<M: Persist>(model: &M, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_container(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model<M: Persist>(path: impl AsRef<Path>) -> Result<M> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes, &path.display().to_string())
}

fn push_params(arrays: &mut ArraySet, prefix: &str, params: &Params<f32>) {
    for (i, d) in params.layers.iter().enumerate() {
        arrays.push(format!("{prefix}{i}.weight"), d.weight.clone().into_dyn());
        arrays.push(format!("{prefix}{i}.bias"), d.bias.clone().into_dyn());
    }
}

fn take_network(arrays: &mut ArraySet, prefix: &str, spec: NetworkSpec) -> Result<Network<f32>> {
    let layers = (0..spec.layers.len())
        .map(|i| {
            Ok(Dense {
                weight: arrays.take2(&format!("{prefix}{i}.weight"))?,
                bias: arrays.take1(&format!("{prefix}{i}.bias"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(spec, Params { layers })
}

fn meta_field<T: serde::de::DeserializeOwned>(meta: &Value, key: &str) -> Result<T> {
    let v = meta
        .get(key)
        .ok_or_else(|| Error::Container(format!("manifest lacks `{key}`")))?;
    Ok(serde_json::from_value(v.clone())?)
}

impl Persist for ClassifierModel {
    const KIND: &'static str = "classifier";

    fn to_parts(&self) -> Result<(Value, ArraySet)> {
        let mut arrays = ArraySet::default();
        push_params(&mut arrays, "layer", &self.params);
        let meta = serde_json::json!({ "spec": self.spec, "history": self.history });
        Ok((meta, arrays))
    }

    fn from_parts(meta: Value, mut arrays: ArraySet) -> Result<Self> {
        let net = take_network(&mut arrays, "layer", meta_field(&meta, "spec")?)?;
        let mut m = ClassifierModel::new(net.spec, net.params)?;
        m.history = meta_field(&meta, "history")?;
        Ok(m)
    }
}

impl Persist for AutoencoderModel {
    const KIND: &'static str = "autoencoder";

    fn to_parts(&self) -> Result<(Value, ArraySet)> {
        let mut arrays = ArraySet::default();
        push_params(&mut arrays, "encoder", &self.encoder.params);
        push_params(&mut arrays, "decoder", &self.decoder.params);
        arrays.push("mean", self.mean.clone().into_dyn());
        arrays.push("std", self.std.clone().into_dyn());
        let meta = serde_json::json!({
            "encoder": self.encoder.spec,
            "decoder": self.decoder.spec,
            "mmd_weight": self.mmd_weight,
            "history": self.history,
        });
        Ok((meta, arrays))
    }

    fn from_parts(meta: Value, mut arrays: ArraySet) -> Result<Self> {
        let encoder = take_network(&mut arrays, "encoder", meta_field(&meta, "encoder")?)?;
        let decoder = take_network(&mut arrays, "decoder", meta_field(&meta, "decoder")?)?;
        let mean = arrays.take1("mean")?;
        let std = arrays.take1("std")?;
        let mut m = AutoencoderModel::new(encoder, decoder, meta_field(&meta, "mmd_weight")?, mean, std)?;
        m.history = meta_field(&meta, "history")?;
        Ok(m)
    }
}

impl Persist for EstimatorModel {
    const KIND: &'static str = "estimator";

    fn to_parts(&self) -> Result<(Value, ArraySet)> {
        let mut arrays = ArraySet::default();
        push_params(&mut arrays, "layer", &self.network.params);
        let meta = serde_json::json!({
            "spec": self.network.spec,
            "target_floor": self.target_floor,
            "history": self.history,
        });
        Ok((meta, arrays))
    }

    fn from_parts(meta: Value, mut arrays: ArraySet) -> Result<Self> {
        let net = take_network(&mut arrays, "layer", meta_field(&meta, "spec")?)?;
        let mut m = EstimatorModel::new(net, meta_field(&meta, "target_floor")?)?;
        m.history = meta_field(&meta, "history")?;
        Ok(m)
    }
}

/// Errors are not stored; they are recomputed from the outputs on load with
/// the same function that produced them.
impl Persist for ActivationRecords {
    const KIND: &'static str = "records";

    fn to_parts(&self) -> Result<(Value, ArraySet)> {
        let mut arrays = ArraySet::default();
        arrays.push("hidden", self.hidden.clone().into_dyn());
        arrays.push("outputs", self.outputs.clone().into_dyn());
        let meta = serde_json::json!({
            "sample_ids": self.sample_ids,
            "labels": self.labels,
            "cycles": self.cycles,
        });
        Ok((meta, arrays))
    }

    fn from_parts(meta: Value, mut arrays: ArraySet) -> Result<Self> {
        let hidden = arrays.take2("hidden")?;
        let outputs = arrays.take2("outputs")?;
        let sample_ids: Vec<usize> = meta_field(&meta, "sample_ids")?;
        let labels: Vec<u8> = meta_field(&meta, "labels")?;
        let cycles: Vec<Option<usize>> = meta_field(&meta, "cycles")?;
        let n = hidden.nrows();
        if outputs.nrows() != n || sample_ids.len() != n || labels.len() != n || cycles.len() != n {
            return Err(Error::Shape("record fields differ in length".into()));
        }
        if labels.iter().any(|&l| l as usize >= outputs.ncols()) {
            return Err(Error::Container("record label out of range".into()));
        }
        let errors = outputs
            .rows()
            .into_iter()
            .zip(&labels)
            .map(|(r, &l)| half_squared_error(r, l as usize))
            .collect();
        Ok(ActivationRecords {
            sample_ids,
            hidden,
            labels,
            outputs,
            errors,
            cycles,
        })
    }
}
