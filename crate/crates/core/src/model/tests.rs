use super::*;
use crate::tensor::grad_check_at;

/// 16×16 configuration small enough for exhaustive finite differences.
fn tiny(placement: ArpPlacement) -> VsNetConfig {
    VsNetConfig {
        input_size: 16,
        widths: vec![2, 3, 4, 5],
        arp_window: 3,
        arp_placement: placement,
        seed: 11,
        ..VsNetConfig::desk_scale()
    }
}

fn frame(config: &VsNetConfig, seed: u64) -> Tensor {
    let s = config.input_size;
    let data = crate::tensor::gaussian_buffer(config.in_channels * s * s, seed, 0.3)
        .unwrap()
        .into_iter()
        .map(|v| (v + 0.5).clamp(0.0, 1.0))
        .collect();
    Tensor::new(&[1, config.in_channels, s, s], data).unwrap()
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn closed_form_count_matches_built_model() {
    for config in [
        VsNetConfig::desk_scale(),
        VsNetConfig::micro(),
        tiny(ArpPlacement::Bottleneck),
        tiny(ArpPlacement::InputFrames),
        VsNetConfig {
            vae_enabled: false,
            ..VsNetConfig::desk_scale()
        },
    ] {
        let model = VsNet::build(config.clone()).unwrap();
        assert_eq!(model.param_count(), config.param_count(), "{config:?}");
    }
}

#[test]
fn documented_counts() {
    assert_eq!(VsNetConfig::full_scale().param_count(), 3_491_778);
    assert_eq!(VsNetConfig::desk_scale().param_count(), 46_231);
    assert_eq!(VsNetConfig::micro().param_count(), 99_955);
    assert!(VsNetConfig::desk_scale().param_count() < 300_000);
    assert_eq!(ParamSet::new().scalar_count(), 0);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = VsNetConfig::desk_scale();
    let cases = [
        VsNetConfig { input_size: 60, ..base.clone() },
        VsNetConfig { widths: vec![], ..base.clone() },
        VsNetConfig { widths: vec![8, 0, 4, 4], ..base.clone() },
        VsNetConfig { dropout: 1.0, ..base.clone() },
        VsNetConfig { arp_window: 0, ..base.clone() },
        VsNetConfig { dilation: 0, ..base.clone() },
        VsNetConfig { decoder_widths: Some(vec![1]), ..base },
    ];
    for c in cases {
        assert!(matches!(VsNet::build(c), Err(Error::InvalidConfig(_))));
    }
}

#[test]
fn builds_are_deterministic_and_f32_exact() {
    let a = VsNet::build(VsNetConfig::desk_scale()).unwrap();
    let b = VsNet::build(VsNetConfig::desk_scale()).unwrap();
    assert_eq!(a.params(), b.params());
    let c = VsNet::build(VsNetConfig {
        seed: 1,
        ..VsNetConfig::desk_scale()
    })
    .unwrap();
    assert_ne!(a.params(), c.params());
    for p in a.params().iter() {
        assert!(p.data.iter().all(|&v| v == v as f32 as f64));
    }
}

#[test]
fn parameter_names_are_unique_and_ordered() {
    let model = VsNet::build(VsNetConfig::desk_scale()).unwrap();
    let names: Vec<&str> = model.params().iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names[0], "encoder.0.depthwise");
    assert_eq!(*names.last().unwrap(), "head.bias");
    assert!(names.contains(&"fuse.weight") && names.contains(&"logvar.weight"));
}

#[test]
fn encode_shapes_at_desk_scale() {
    let config = VsNetConfig::desk_scale();
    let model = VsNet::build(config.clone()).unwrap();
    let enc = model
        .encode(&model.bind(false), &frame(&config, 1), Mode::Inference)
        .unwrap();
    let sides: Vec<usize> = enc.skips.iter().map(|s| s.shape()[2]).collect();
    assert_eq!(sides, [64, 32, 16, 8]);
    assert_eq!(enc.skips[3].shape(), &[1, 64, 8, 8]);
    assert_eq!(enc.mu.shape(), &[1, 64, 4, 4]);
    assert_eq!(enc.logvar.unwrap().shape(), &[1, 64, 4, 4]);
}

#[test]
fn zero_input_with_zero_biases_gives_zero_mean() {
    let config = VsNetConfig::desk_scale();
    let model = VsNet::build(config.clone()).unwrap();
    let zero = Tensor::zeros(&[1, 3, 64, 64]).unwrap();
    let enc = model.encode(&model.bind(false), &zero, Mode::Inference).unwrap();
    assert!(enc.mu.data().iter().all(|&v| v == 0.0));
}

#[test]
fn inference_is_deterministic_and_in_range() {
    let config = VsNetConfig::desk_scale();
    let model = VsNet::build(config.clone()).unwrap();
    let frames: Vec<Tensor> = (0..5).map(|t| frame(&config, t)).collect();
    let a = model.predict(&frames).unwrap();
    let b = model.predict(&frames).unwrap();
    assert_eq!(a.data(), b.data());
    assert_eq!(a.shape(), &[1, 1, 64, 64]);
    assert!(a.data().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn training_mode_is_seeded() {
    let config = VsNetConfig::desk_scale();
    let model = VsNet::build(config.clone()).unwrap();
    let p = model.bind(false);
    let frames: Vec<Tensor> = (0..5).map(|t| frame(&config, t)).collect();
    let run = |seed| {
        model
            .forward_window(&p, &frames, Mode::Training { seed })
            .unwrap()
            .saliency
    };
    assert_eq!(run(3).data(), run(3).data());
    assert_ne!(run(3).data(), run(4).data());
}

#[test]
fn reparameterize_modes() {
    let mu = Tensor::randn(&[1, 2, 3, 3], 1, 1.0).unwrap();
    let logvar = Tensor::full(&[1, 2, 3, 3], 0.0).unwrap();
    assert_eq!(reparameterize(&mu, &logvar, false, 5).unwrap().data(), mu.data());
    let tiny_var = Tensor::full(&[1, 2, 3, 3], -40.0).unwrap();
    let z = reparameterize(&mu, &tiny_var, true, 5).unwrap();
    assert!(max_abs_diff(&z, &mu) < 1e-8);
    assert!(reparameterize(&mu, &Tensor::zeros(&[2]).unwrap(), true, 5).is_err());
}

#[test]
fn reparameterized_noise_has_unit_variance() {
    let n = 100_000;
    let mu = Tensor::full(&[n], 2.0).unwrap();
    let logvar = Tensor::zeros(&[n]).unwrap();
    let z = reparameterize(&mu, &logvar, true, 9).unwrap();
    let d: Vec<f64> = z.data().iter().map(|v| v - 2.0).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    assert!((0.98..=1.02).contains(&var), "variance {var}");
}

#[test]
fn window_of_one_is_the_single_frame_path() {
    for placement in [ArpPlacement::Bottleneck, ArpPlacement::InputFrames] {
        let config = VsNetConfig {
            arp_window: 1,
            ..tiny(placement)
        };
        let model = VsNet::build(config.clone()).unwrap();
        let p = model.bind(false);
        let f = frame(&config, 2);
        let window = model.forward_window(&p, std::slice::from_ref(&f), Mode::Inference).unwrap();
        let single = model.forward_frame(&p, &f, Mode::Inference).unwrap();
        assert_eq!(window.saliency.data(), single.saliency.data());
    }
}

#[test]
fn static_windows_match_the_single_frame_path() {
    for placement in [ArpPlacement::Bottleneck, ArpPlacement::InputFrames] {
        let config = VsNetConfig {
            input_size: 64,
            arp_window: 5,
            ..tiny(placement)
        };
        let model = VsNet::build(config.clone()).unwrap();
        let p = model.bind(false);
        let f = frame(&config, 4);
        let window = model.forward_window(&p, &vec![f.clone(); 5], Mode::Inference).unwrap();
        let single = model.forward_frame(&p, &f, Mode::Inference).unwrap();
        assert!(max_abs_diff(&window.saliency, &single.saliency) < 1e-6);
    }
}

#[test]
fn frame_order_matters() {
    let config = VsNetConfig::desk_scale();
    let model = VsNet::build(config.clone()).unwrap();
    // brightness ramp over the window
    let frames: Vec<Tensor> = (0..5)
        .map(|t| frame(&config, 7).add_scalar(0.1 * t as f64))
        .collect();
    let mut swapped = frames.clone();
    swapped.swap(0, 4);
    let a = model.predict(&frames).unwrap();
    let b = model.predict(&swapped).unwrap();
    assert!(max_abs_diff(&a, &b) > 1e-6);
}

#[test]
fn wrong_window_and_frame_shapes_are_errors() {
    let config = VsNetConfig::desk_scale();
    let model = VsNet::build(config.clone()).unwrap();
    let f = frame(&config, 0);
    assert!(model.predict(&[f.clone(), f.clone()]).is_err());
    let small = Tensor::zeros(&[1, 3, 32, 32]).unwrap();
    assert!(model.predict(&vec![small; 5]).is_err());
    let p = model.bind(false);
    let enc = model.encode(&p, &f, Mode::Inference).unwrap();
    assert!(model.decode(&p, &enc.mu, &enc.skips[1..]).is_err());
}

fn total_loss_through_model(model: &VsNet, p: &[Tensor], frames: &[Tensor]) -> Result<Tensor> {
    let pred = model.forward_window(p, frames, Mode::Training { seed: 3 })?;
    let target = Tensor::new(
        pred.saliency.shape(),
        (0..pred.saliency.numel()).map(|i| ((i / 5) % 2) as f64).collect(),
    )?;
    // BCE + soft IoU + KL, written inline to keep this module independent
    let s = pred.saliency.clamp(1e-7, 1.0 - 1e-7)?;
    let one_minus_t = target.neg().add_scalar(1.0);
    let bce = target
        .mul(&s.log()?)?
        .add(&one_minus_t.mul(&s.neg().add_scalar(1.0).log()?)?)?
        .mean()
        .neg();
    let inter = s.mul(&target)?.sum();
    let union = s.add(&target)?.sub(&s.mul(&target)?)?.sum();
    let iou = inter.div(&union)?.neg().add_scalar(1.0);
    let logvar = pred.logvar.expect("vae enabled");
    let kl = logvar
        .add_scalar(1.0)
        .sub(&pred.mu.mul(&pred.mu)?)?
        .sub(&logvar.exp())?
        .mean()
        .scalar_mul(-0.5);
    bce.add(&iou)?.add(&kl.scalar_mul(0.1))
}

/// Zero biases put dead channels exactly on the relu kink; finite differences
/// need every pre-activation away from it.
fn with_random_biases(mut model: VsNet) -> VsNet {
    for (i, p) in model.params_mut().iter_mut().enumerate() {
        if p.shape.len() == 1 {
            p.data = crate::tensor::gaussian_buffer(p.numel(), 1000 + i as u64, 0.1).unwrap();
        }
    }
    model
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for placement in [ArpPlacement::Bottleneck, ArpPlacement::InputFrames] {
        let config = tiny(placement);
        let model = with_random_biases(VsNet::build(config.clone()).unwrap());
        let frames: Vec<Tensor> = (0..3).map(|t| frame(&config, 20 + t)).collect();
        let base = model.bind(false);
        for (i, param) in model.params().iter().enumerate() {
            let f = |x: &Tensor| {
                let mut p = base.clone();
                p[i] = x.clone();
                total_loss_through_model(&model, &p, &frames)
            };
            let probe: Vec<usize> = (0..param.numel()).step_by(1 + param.numel() / 12).collect();
            let check = grad_check_at(f, &base[i], 1e-6, 1e-3, &probe).unwrap();
            assert!(check.passed(), "{placement:?} {}: {check:?}", param.name);
        }
    }
}

#[test]
fn every_parameter_receives_a_gradient() {
    let config = tiny(ArpPlacement::Bottleneck);
    let model = VsNet::build(config.clone()).unwrap();
    let frames: Vec<Tensor> = (0..3).map(|t| frame(&config, t)).collect();
    let p = model.bind(true);
    total_loss_through_model(&model, &p, &frames)
        .unwrap()
        .backward()
        .unwrap();
    for (t, param) in p.iter().zip(model.params().iter()) {
        let g = t.grad().unwrap_or_else(|| panic!("no gradient for {}", param.name));
        if param.name.starts_with("encoder") {
            assert!(g.iter().any(|&v| v != 0.0), "zero gradient for {}", param.name);
        }
    }
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let config = VsNetConfig::desk_scale();
    let model = VsNet::build(config.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.vsnt");
    model.save(&path).unwrap();
    let loaded = VsNet::load(&path, Some(config.clone())).unwrap();
    assert_eq!(loaded.params(), model.params());
    let frames: Vec<Tensor> = (0..5).map(|t| frame(&config, t)).collect();
    assert_eq!(
        model.predict(&frames).unwrap().data(),
        loaded.predict(&frames).unwrap().data()
    );
}

#[test]
fn architecture_is_inferred_from_a_checkpoint() {
    for config in [
        VsNetConfig::micro(),
        VsNetConfig {
            vae_enabled: false,
            ..tiny(ArpPlacement::InputFrames)
        },
    ] {
        let model = VsNet::build(config.clone()).unwrap();
        let inferred = VsNetConfig::infer_from_params(model.params(), &config).unwrap();
        assert_eq!(inferred.widths, config.widths);
        assert_eq!(inferred.resolved_decoder_widths(), config.resolved_decoder_widths());
        assert_eq!(inferred.vae_enabled, config.vae_enabled);
        assert_eq!(inferred.arp_placement, config.arp_placement);
        assert_eq!(inferred.param_count(), config.param_count());
    }
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let model = VsNet::build(VsNetConfig::desk_scale()).unwrap();
    let err = VsNet::from_params(VsNetConfig::micro(), model.params().clone());
    assert!(matches!(err, Err(Error::Checkpoint(_))));
}

#[test]
fn dilated_model_runs() {
    let config = VsNetConfig {
        dilation: 2,
        ..VsNetConfig::desk_scale()
    };
    let model = VsNet::build(config.clone()).unwrap();
    let frames: Vec<Tensor> = (0..5).map(|t| frame(&config, t)).collect();
    assert_eq!(model.predict(&frames).unwrap().shape(), &[1, 1, 64, 64]);
}

#[test]
fn config_json_rejects_unknown_fields() {
    let json = serde_json::to_string(&VsNetConfig::micro()).unwrap();
    let back: VsNetConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, VsNetConfig::micro());
    assert!(serde_json::from_str::<VsNetConfig>(r#"{"widthz": [1]}"#).is_err());
    let partial: VsNetConfig = serde_json::from_str(r#"{"arp_placement": "input_frames"}"#).unwrap();
    assert_eq!(partial.arp_placement, ArpPlacement::InputFrames);
}
