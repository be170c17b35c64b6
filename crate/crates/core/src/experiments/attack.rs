use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Stack;
use crate::classifier::{argmax, ClassifierModel};
use crate::datasets::NUM_CLASSES;
use crate::engine::{backward_batch, forward_batch, Mode};
use crate::introspector::LatentPoint;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub eps: f64,
    pub max_steps: usize,
    /// Keep stepping after the target label is first reached.
    pub continue_after_success: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            eps: 0.01,
            max_steps: 100,
            continue_after_success: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackStep {
    pub step: usize,
    pub input_hash: String,
    pub z: LatentPoint,
    pub y_hat: Vec<f32>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrajectory {
    pub sample_id: usize,
    pub target: usize,
    pub eps: f64,
    /// Step 0 is the unmodified input.
    pub steps: Vec<AttackStep>,
    pub success: bool,
    pub success_step: Option<usize>,
}

/// sha256 of the input's little-endian bytes, hex encoded.
pub fn input_hash(x: ArrayView1<f32>) -> String {
    let mut h = Sha256::new();
    for v in x.iter() {
        h.update(v.to_le_bytes());
    }
    h.finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `sign` with `sign(0) = 0`.
fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Outputs and `dE_adv/dx` for `E_adv = 0.5 |t - y_hat|^2`, dropout off.
fn adversarial_gradient(
    model: &ClassifierModel,
    x: &Array1<f32>,
    target: usize,
) -> Result<(Array1<f32>, Array1<f32>)> {
    let xb = x.view().insert_axis(Axis(0));
    let trace = forward_batch(&model.spec, &model.params, xb, Mode::Eval)?;
    let y = trace.output().row(0).to_owned();
    let mut d_out = Array2::zeros((1, y.len()));
    for (k, &v) in y.iter().enumerate() {
        let t = if k == target { 1.0 } else { 0.0 };
        d_out[[0, k]] = v - t;
    }
    let (_, d_in) = backward_batch(&model.spec, &model.params, &trace, d_out.view())?;
    Ok((y, d_in.row(0).to_owned()))
}

/// Targeted iterative FGSM: `x <- x - eps * sign(dE_adv/dx)`, inputs left
/// unclipped.
pub fn fgsm_attack(
    stack: Stack<'_>,
    x: ArrayView1<f32>,
    sample_id: usize,
    target: usize,
    config: &AttackConfig,
) -> Result<AttackTrajectory> {
    if target >= NUM_CLASSES {
        return Err(Error::InvalidInput(format!("target class {target} out of range")));
    }
    if !(config.eps >= 0.0 && config.eps.is_finite()) {
        return Err(Error::InvalidConfig("eps must be non-negative".into()));
    }
    let model = stack.classifier;
    let eps = config.eps as f32;
    let mut x = x.to_owned();
    let mut steps = Vec::with_capacity(config.max_steps + 1);
    let mut success_step = None;
    for step in 0..=config.max_steps {
        let (y, grad) = adversarial_gradient(model, &x, target)?;
        let label = argmax(y.as_slice().expect("contiguous row"));
        let h = stack.classifier_hidden(&x)?;
        steps.push(AttackStep {
            step,
            input_hash: input_hash(x.view()),
            z: stack.autoencoder.encode(h.view())?,
            y_hat: y.to_vec(),
            label,
        });
        if label == target && success_step.is_none() {
            success_step = Some(step);
        }
        if step == config.max_steps || (success_step.is_some() && !config.continue_after_success) {
            break;
        }
        x.zip_mut_with(&grad, |v, &g| *v -= eps * sign(g));
    }
    Ok(AttackTrajectory {
        sample_id,
        target,
        eps: config.eps,
        steps,
        success: success_step.is_some(),
        success_step,
    })
}

impl Stack<'_> {
    fn classifier_hidden(&self, x: &Array1<f32>) -> Result<Array1<f32>> {
        let xb = x.view().insert_axis(Axis(0));
        let trace = forward_batch(&self.classifier.spec, &self.classifier.params, xb, Mode::Eval)?;
        Ok(trace.hidden_concat().row(0).to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::tests::random_stack;

    #[test]
    fn sign_of_zero_is_zero() {
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-0.0), 0.0);
        assert_eq!(sign(3.0), 1.0);
        assert_eq!(sign(-1e-30), -1.0);
    }

    #[test]
    fn zero_eps_is_stationary() {
        let owned = random_stack(8);
        let data = crate::classifier::tests::toy_dataset(10, 2);
        let start = owned.stack().read(data.inputs().view()).unwrap().labels[4];
        let target = (start + 1) % 10;
        let cfg = AttackConfig {
            eps: 0.0,
            max_steps: 5,
            continue_after_success: false,
        };
        let t = fgsm_attack(owned.stack(), data.input(4), 4, target, &cfg).unwrap();
        assert_eq!(t.steps.len(), 6);
        assert!(!t.success);
        assert!(t.steps.iter().all(|s| s.input_hash == t.steps[0].input_hash));
        let t = fgsm_attack(owned.stack(), data.input(4), 4, start, &cfg).unwrap();
        assert_eq!(t.success_step, Some(0));
        assert_eq!(t.steps.len(), 1);
    }

    #[test]
    fn each_step_moves_by_eps_in_sup_norm() {
        let owned = random_stack(9);
        let data = crate::classifier::tests::toy_dataset(10, 3);
        let x0 = data.input(2).to_owned();
        let start = owned.stack().read(data.inputs().view()).unwrap().labels[2];
        let target = (start + 3) % 10;
        let (_, g) = adversarial_gradient(&owned.classifier, &x0, target).unwrap();
        let cfg = AttackConfig {
            eps: 0.01,
            max_steps: 1,
            continue_after_success: true,
        };
        let t = fgsm_attack(owned.stack(), x0.view(), 2, target, &cfg).unwrap();
        assert_eq!(t.steps.len(), 2);
        let mut x1 = x0.clone();
        x1.zip_mut_with(&g, |v, &gi| *v -= 0.01 * sign(gi));
        assert_eq!(t.steps[1].input_hash, input_hash(x1.view()));
        for (a, (b, gi)) in x1.iter().zip(x0.iter().zip(g.iter())) {
            let d = (a - b).abs();
            if *gi != 0.0 {
                assert!((d - 0.01).abs() < 1e-6);
            } else {
                assert_eq!(d, 0.0);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let owned = random_stack(10);
        let data = crate::classifier::tests::toy_dataset(3, 3);
        let x = data.input(1).to_owned();
        let (_, g) = adversarial_gradient(&owned.classifier, &x, 6).unwrap();
        let m64 = owned.classifier.params.cast::<f64>();
        let loss = |x: &Array1<f64>| {
            let y = crate::engine::predict_batch(
                &owned.classifier.spec,
                &m64,
                x.view().insert_axis(Axis(0)),
            )
            .unwrap();
            y.row(0)
                .iter()
                .enumerate()
                .map(|(k, &v)| 0.5 * (v - if k == 6 { 1.0 } else { 0.0 }).powi(2))
                .sum::<f64>()
        };
        let x64 = x.mapv(|v| v as f64);
        for &i in &[0usize, 100, 400, 783] {
            let h = 1e-5;
            let mut p = x64.clone();
            p[i] += h;
            let mut m = x64.clone();
            m[i] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            assert!((fd - g[i] as f64).abs() < 1e-4 * fd.abs().max(1e-3), "{fd} {}", g[i]);
        }
    }

    #[test]
    fn bad_target_is_rejected() {
        let owned = random_stack(11);
        let x = Array1::zeros(784);
        assert!(fgsm_attack(owned.stack(), x.view(), 0, 10, &AttackConfig::default()).is_err());
    }
}
