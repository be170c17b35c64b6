use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{class_density, expected_latent, GridConfig};
use crate::classifier::ClassifierModel;
use crate::engine::{NetworkSpec, Params, Scalar};
use crate::introspector::{AutoencoderModel, LatentPoint};
use crate::{Error, Result};

/// Expected latent of one class and the activation pattern decoded from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedPattern {
    pub class: usize,
    pub e_z: LatentPoint,
    pub e_h: Vec<f32>,
}

/// Decoded pattern at `z`, in the classifier's activation units.
pub fn expected_activation(ae: &AutoencoderModel, z: LatentPoint) -> Result<Array1<f32>> {
    let x = ae.decode(z)?.insert_axis(ndarray::Axis(0));
    Ok(ae.destandardize(x.view())?.row(0).to_owned())
}

/// One pattern per class `0..num_classes`, from the latents of that class.
pub fn expected_patterns(
    ae: &AutoencoderModel,
    latents: &[LatentPoint],
    labels: &[u8],
    num_classes: usize,
    grid: &GridConfig,
) -> Result<Vec<ExpectedPattern>> {
    if latents.len() != labels.len() {
        return Err(Error::Shape("latents and labels differ in length".into()));
    }
    (0..num_classes)
        .map(|k| {
            let pts: Vec<LatentPoint> = latents
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l as usize == k)
                .map(|(p, _)| *p)
                .collect();
            let e_z = expected_latent(&class_density(&pts, k, grid)?);
            let e_h = expected_activation(ae, e_z)?.to_vec();
            Ok(ExpectedPattern { class: k, e_z, e_h })
        })
        .collect()
}

/// Which class each hidden unit prefers, and the per-layer orderings that
/// group units by that class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitAssignment {
    pub layer_widths: Vec<usize>,
    /// Preferred class per unit, layers laid end to end in original order.
    pub classes: Vec<usize>,
    /// `permutations[l][new] = old` within layer `l`.
    pub permutations: Vec<Vec<usize>>,
}

fn check_permutation(perm: &[usize], width: usize) -> Result<()> {
    if perm.len() != width {
        return Err(Error::InvalidInput(format!(
            "permutation of length {} for a layer of width {width}",
            perm.len()
        )));
    }
    let mut seen = vec![false; width];
    for &p in perm {
        if p >= width || seen[p] {
            return Err(Error::InvalidInput(format!(
                "not a permutation of 0..{width}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

impl UnitAssignment {
    pub fn validate(&self) -> Result<()> {
        if self.permutations.len() != self.layer_widths.len() {
            return Err(Error::InvalidInput("one permutation per layer required".into()));
        }
        if self.classes.len() != self.layer_widths.iter().sum::<usize>() {
            return Err(Error::InvalidInput("one class per unit required".into()));
        }
        for (perm, &w) in self.permutations.iter().zip(&self.layer_widths) {
            check_permutation(perm, w)?;
        }
        Ok(())
    }

    pub fn inverse(&self) -> UnitAssignment {
        let permutations = self
            .permutations
            .iter()
            .map(|perm| {
                let mut inv = vec![0; perm.len()];
                for (new, &old) in perm.iter().enumerate() {
                    inv[old] = new;
                }
                inv
            })
            .collect();
        UnitAssignment {
            layer_widths: self.layer_widths.clone(),
            classes: self.permute_units(&self.classes),
            permutations,
        }
    }

    /// Reorders a per-unit vector (layers end to end) into sorted order.
    pub fn permute_units<T: Copy>(&self, values: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(values.len());
        let mut offset = 0;
        for (perm, &w) in self.permutations.iter().zip(&self.layer_widths) {
            out.extend(perm.iter().map(|&old| values[offset + old]));
            offset += w;
        }
        out
    }
}

/// Assigns every unit to the class with the largest expected activation
/// (lowest class on ties), then orders each layer by class ascending,
/// activation descending and original index ascending.
pub fn sort_units(patterns: &[ExpectedPattern], layer_widths: &[usize]) -> Result<UnitAssignment> {
    if patterns.is_empty() {
        return Err(Error::InvalidInput("no expected patterns".into()));
    }
    let total: usize = layer_widths.iter().sum();
    for (k, p) in patterns.iter().enumerate() {
        if p.class != k {
            return Err(Error::InvalidInput(format!(
                "pattern {k} is labelled class {}",
                p.class
            )));
        }
        if p.e_h.len() != total {
            return Err(Error::Shape(format!(
                "pattern of length {} for {total} hidden units",
                p.e_h.len()
            )));
        }
    }
    let classes: Vec<usize> = (0..total)
        .map(|i| {
            let mut best = 0;
            for k in 1..patterns.len() {
                if patterns[k].e_h[i] > patterns[best].e_h[i] {
                    best = k;
                }
            }
            best
        })
        .collect();
    let mut permutations = Vec::with_capacity(layer_widths.len());
    let mut offset = 0;
    for &w in layer_widths {
        let mut perm: Vec<usize> = (0..w).collect();
        let key = |u: usize| {
            let c = classes[offset + u];
            (c, patterns[c].e_h[offset + u])
        };
        perm.sort_by(|&a, &b| {
            let (ca, va) = key(a);
            let (cb, vb) = key(b);
            ca.cmp(&cb)
                .then_with(|| vb.total_cmp(&va))
                .then_with(|| a.cmp(&b))
        });
        permutations.push(perm);
        offset += w;
    }
    Ok(UnitAssignment {
        layer_widths: layer_widths.to_vec(),
        classes,
        permutations,
    })
}

/// Reorders the hidden units of a dense stack without changing its function:
/// rows of `W_l` and `b_l`, and columns of `W_{l+1}`.
pub fn permute_hidden_units<T: Scalar>(
    spec: &NetworkSpec,
    params: &Params<T>,
    permutations: &[Vec<usize>],
) -> Result<Params<T>> {
    params.check_shapes(spec)?;
    let widths = spec.hidden_widths();
    if permutations.len() != widths.len() {
        return Err(Error::InvalidInput(format!(
            "{} permutations for {} hidden layers",
            permutations.len(),
            widths.len()
        )));
    }
    for (perm, &w) in permutations.iter().zip(&widths) {
        check_permutation(perm, w)?;
    }
    let mut out = params.clone();
    for (l, perm) in permutations.iter().enumerate() {
        // Columns of this layer may already follow the previous permutation.
        let src = out.layers[l].clone();
        let dst = &mut out.layers[l];
        for (new, &old) in perm.iter().enumerate() {
            dst.weight.row_mut(new).assign(&src.weight.row(old));
            dst.bias[new] = src.bias[old];
        }
        // The next layer reads the already permuted outputs.
        let next_src: Array2<T> = out.layers[l + 1].weight.clone();
        let next = &mut out.layers[l + 1].weight;
        for (new, &old) in perm.iter().enumerate() {
            next.column_mut(new).assign(&next_src.column(old));
        }
    }
    Ok(out)
}

pub fn apply_permutation(
    model: &ClassifierModel,
    assignment: &UnitAssignment,
) -> Result<ClassifierModel> {
    assignment.validate()?;
    if assignment.layer_widths != model.spec.hidden_widths() {
        return Err(Error::Shape(
            "assignment does not match the classifier's hidden layers".into(),
        ));
    }
    let params = permute_hidden_units(&model.spec, &model.params, &assignment.permutations)?;
    let mut out = ClassifierModel::new(model.spec.clone(), params)?;
    out.history = model.history.clone();
    Ok(out)
}
