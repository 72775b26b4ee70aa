//! Adam with bias correction.

use super::params::ModelParams;
use super::{Scalar, Tensor};
use crate::error::Error;
use crate::Result;

#[derive(Copy, Clone, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Marker struct re-exported for API clarity; state lives in [`ModelParams`].
pub struct Adam;

/// One Adam step over every parameter tensor. `grads[i]` pairs with
/// parameter `i`; `None` means no gradient flowed this step (parameter is
/// left untouched, moments included).
///
/// A non-finite gradient rejects the whole step and reports which tensor
/// produced it; parameters and moments are left exactly as they were.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &[Option<Tensor<T>>],
    cfg: &AdamConfig,
) -> Result<()> {
    assert_eq!(grads.len(), params.len(), "gradient list length mismatch");
    for (i, g) in grads.iter().enumerate() {
        if let Some(g) = g {
            if !g.all_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite gradient for parameter '{}'; step rejected",
                    params.name(i)
                )));
            }
        }
    }

    params.adam_t += 1;
    let t = params.adam_t;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let lr = T::from_f64(cfg.lr);
    let eps = T::from_f64(cfg.eps);
    let wd = T::from_f64(cfg.weight_decay);
    let bc1 = T::one() - T::from_f64(cfg.beta1.powi(t as i32));
    let bc2 = T::one() - T::from_f64(cfg.beta2.powi(t as i32));

    for i in 0..params.len() {
        let Some(g) = &grads[i] else { continue };
        let (p, m, v) = params.entry_mut(i);
        for (((pv, gv), mv), vv) in p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice().iter_mut())
            .zip(v.as_mut_slice().iter_mut())
        {
            let grad = *gv + wd * *pv;
            *mv = b1 * *mv + (T::one() - b1) * grad;
            *vv = b2 * *vv + (T::one() - b2) * grad * grad;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    for i in 0..params.len() {
        if grads[i].is_some() && !params.tensor_at(i).all_finite() {
            return Err(Error::Numerical(format!(
                "parameter '{}' became non-finite after the optimizer step",
                params.name(i)
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensornet::params::{ArchConfig, LayerType, ModelParams};

    fn tiny_params() -> ModelParams<f64> {
        let arch = ArchConfig {
            layer_type: LayerType::Mlp,
            input_dim: 1,
            hidden_dim: 1,
            num_layers: 1,
            heads: 1,
            dec_hidden_dim: 1,
            dropout: 0.0,
            attn_dropout: 0.0,
        };
        ModelParams::init(&arch, 0)
    }

    #[test]
    fn first_step_is_bias_corrected_sign_update() {
        let mut params = tiny_params();
        let i = params.index_of("enc.0.w").unwrap();
        let before = params.tensor_at(i).get(0, 0);
        let mut grads: Vec<Option<Tensor<f64>>> = vec![None; params.len()];
        grads[i] = Some(Tensor::scalar(1.0));
        let cfg = AdamConfig {
            lr: 1e-3,
            weight_decay: 0.0,
            ..Default::default()
        };
        adam_step(&mut params, &grads, &cfg).unwrap();
        let after = params.tensor_at(i).get(0, 0);
        // hat(m)/sqrt(hat(v)) = g/|g| at t=1, so the update is -lr (up to eps)
        assert!(
            ((after - before) + 1e-3).abs() < 1e-6,
            "update {}",
            after - before
        );
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = tiny_params();
        let snapshot: Vec<f64> = (0..params.len())
            .flat_map(|i| params.tensor_at(i).as_slice().to_vec())
            .collect();
        let grads: Vec<Option<Tensor<f64>>> = (0..params.len())
            .map(|i| {
                let (r, c) = params.tensor_at(i).shape();
                Some(Tensor::zeros(r, c))
            })
            .collect();
        adam_step(&mut params, &grads, &AdamConfig::default()).unwrap();
        let now: Vec<f64> = (0..params.len())
            .flat_map(|i| params.tensor_at(i).as_slice().to_vec())
            .collect();
        assert_eq!(snapshot, now);
    }

    #[test]
    fn non_finite_gradient_rejects_step() {
        let mut params = tiny_params();
        let i = params.index_of("enc.0.w").unwrap();
        let before = params.tensor_at(i).get(0, 0);
        let mut grads: Vec<Option<Tensor<f64>>> = vec![None; params.len()];
        grads[i] = Some(Tensor::scalar(f64::NAN));
        let err = adam_step(&mut params, &grads, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert_eq!(params.tensor_at(i).get(0, 0), before);
        assert_eq!(params.adam_t, 0);
    }

    #[test]
    fn identical_gradient_sequences_give_identical_params() {
        let run = || {
            let mut params = tiny_params();
            let i = params.index_of("enc.0.w").unwrap();
            for k in 0..10 {
                let mut grads: Vec<Option<Tensor<f64>>> = vec![None; params.len()];
                grads[i] = Some(Tensor::scalar(0.1 * (k as f64 + 1.0)));
                adam_step(&mut params, &grads, &AdamConfig::default()).unwrap();
            }
            params.tensor_at(i).get(0, 0)
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
