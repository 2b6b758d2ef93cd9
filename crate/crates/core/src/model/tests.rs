use super::*;
use crate::activations::suite::random_params;
use crate::activations::{act_backward_params, ActivationId, ActivationKind};
use crate::gradcheck::{finite_diff_grad, rel_error};
use crate::rng::Rng;
use crate::tensor::Tensor;

fn small_spec(slot0: ActivationId) -> ModelSpec {
    ModelSpec::parse(&format!(
        "stochact-model 1\ninput 1 6 6\nclasses 3\nconv2d 2 3 1 1\nact 0 {} {}\nmaxpool 2\nflatten\ndense 4\nact 1 relu 1\ndense 3\nsoftmax\n",
        slot0.kind, slot0.max_input
    ))
    .unwrap()
}

fn random_batch(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.unit()).collect()).unwrap()
}

fn flat_params(state: &ModelState) -> Vec<f64> {
    state
        .layers()
        .iter()
        .flat_map(|l| l.blocks())
        .flat_map(|b| b.iter().copied())
        .collect()
}

fn set_flat(state: &mut ModelState, flat: &[f64]) {
    let mut off = 0;
    for layer in state.layers_mut() {
        for block in layer.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }
}

fn loss_of(state: &ModelState, x: &Tensor, labels: &[usize]) -> f64 {
    let (_, cache) = forward_pass(state, x).unwrap();
    backward_pass(state, &cache, labels).unwrap().loss
}

#[test]
fn spec_text_round_trip() {
    let spec = ModelSpec::default_backbone([1, 16, 16], 10);
    let text = spec.to_text();
    let back = ModelSpec::parse(&text).unwrap();
    assert_eq!(back, spec);
    assert_eq!(back.to_text(), text);
    assert_eq!(list_activation_slots(&back), vec![0, 1, 2]);

    let s255 = spec.with_all_slots(ActivationId::new(ActivationKind::MeluK8, 255.0));
    assert_eq!(ModelSpec::parse(&s255.to_text()).unwrap(), s255);
}

#[test]
fn spec_validation() {
    let no_slots = ModelSpec::parse("stochact-model 1\ninput 4\nclasses 2\ndense 2\nsoftmax\n").unwrap();
    assert!(list_activation_slots(&no_slots).is_empty());

    for bad in [
        "stochact-model 1\ninput 4\nclasses 2\ndense 2\n",
        "stochact-model 1\ninput 4\nclasses 2\ndense 3\nsoftmax\n",
        "stochact-model 1\ninput 4\nclasses 2\nconv2d 2 3 1 1\ndense 2\nsoftmax\n",
        "stochact-model 1\ninput 4\nclasses 2\nact 0 relu 1\nact 0 elu 1\ndense 2\nsoftmax\n",
        "stochact-model 1\ninput 4\nclasses 2\nact 0 relu 7\ndense 2\nsoftmax\n",
        "stochact-model 1\ninput 4\nclasses 2\ndense 2\nsoftmax\nsoftmax\n",
        "stochact-model 1\ninput 1 2 2\nclasses 2\nconv2d 1 5 1 0\nflatten\ndense 2\nsoftmax\n",
        "stochact-model 1\ninput 4\nclasses 2\nbogus 1\nsoftmax\n",
        "sact-model\ninput 4\nclasses 2\ndense 2\nsoftmax\n",
    ] {
        assert!(
            matches!(ModelSpec::parse(bad), Err(crate::Error::Config(_))),
            "accepted {bad:?}"
        );
    }
}

#[test]
fn build_is_deterministic() {
    let spec = ModelSpec::default_backbone([1, 12, 12], 4);
    let a = build_model(&spec, &mut Rng::new(9)).unwrap();
    let b = build_model(&spec, &mut Rng::new(9)).unwrap();
    let c = build_model(&spec, &mut Rng::new(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.is_finite());
}

#[test]
fn default_backbone_outputs_distribution() {
    let spec = ModelSpec::default_backbone([1, 32, 32], 10);
    let state = build_model(&spec, &mut Rng::new(1)).unwrap();
    let x = random_batch(&[3, 1, 32, 32], &mut Rng::new(2));
    let probs = predict(&state, &x).unwrap();
    assert_eq!(probs.shape(), &[3, 10]);
    for i in 0..3 {
        let s: f64 = probs.row(i).iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn dense_only_spec_is_accepted() {
    let spec = ModelSpec::parse(
        "stochact-model 1\ninput 5\nclasses 3\ndense 7\nact 0 elu 1\ndense 3\nsoftmax\n",
    )
    .unwrap();
    let state = build_model(&spec, &mut Rng::new(0)).unwrap();
    let out = predict(&state, &random_batch(&[2, 5], &mut Rng::new(1))).unwrap();
    assert_eq!(out.shape(), &[2, 3]);
}

#[test]
fn gap_layer_runs_and_differentiates() {
    let spec = ModelSpec::parse(
        "stochact-model 1\ninput 2 4 4\nclasses 2\nconv2d 3 3 1 1\nact 0 swish 1\ngap\ndense 2\nsoftmax\n",
    )
    .unwrap();
    let state = build_model(&spec, &mut Rng::new(4)).unwrap();
    let x = random_batch(&[2, 2, 4, 4], &mut Rng::new(5));
    let labels = [1, 0];
    let (_, cache) = forward_pass(&state, &x).unwrap();
    let analytic = backward_pass(&state, &cache, &labels).unwrap().grads.flatten();
    let theta = flat_params(&state);
    let fd = finite_diff_grad(
        |t| {
            let mut s = state.clone();
            set_flat(&mut s, t.data());
            loss_of(&s, &x, &labels)
        },
        &Tensor::vector(theta),
        Some(1e-5),
    );
    for (a, n) in analytic.iter().zip(fd.data()) {
        assert!(rel_error(*a, *n) < 1e-3, "{a} vs {n}");
    }
}

#[test]
fn batch_of_one_matches_batched_row() {
    let spec = ModelSpec::default_backbone([1, 8, 8], 5);
    let state = build_model(&spec, &mut Rng::new(3)).unwrap();
    let x = random_batch(&[4, 1, 8, 8], &mut Rng::new(4));
    let all = predict(&state, &x).unwrap();
    for i in 0..4 {
        let one = predict(&state, &x.select_rows(&[i])).unwrap();
        assert_eq!(one.row(0), all.row(i));
    }
    assert_eq!(predict(&state, &x).unwrap(), all);
}

#[test]
fn rejects_wrong_input_shape() {
    let spec = ModelSpec::default_backbone([1, 8, 8], 5);
    let state = build_model(&spec, &mut Rng::new(3)).unwrap();
    let x = Tensor::zeros(&[2, 1, 8, 7]);
    assert!(matches!(predict(&state, &x), Err(crate::Error::Dimension(_))));
    assert!(matches!(forward_pass(&state, &Tensor::zeros(&[1, 8, 8])), Err(crate::Error::Dimension(_))));
}

/// Straight-line re-evaluation of conv(2,3x3,pad 1) -> relu -> maxpool 2 ->
/// flatten -> dense 3 -> relu -> dense 2 -> softmax on one 1x4x4 image.
fn scalar_oracle(state: &ModelState, img: &[f64]) -> Vec<f64> {
    let (cw, cb) = match &state.layers()[0] {
        LayerParams::Conv { weight, bias } => (weight.data(), bias.data()),
        _ => unreachable!(),
    };
    let mut conv = [[[0.0f64; 4]; 4]; 2];
    for (o, plane) in conv.iter_mut().enumerate() {
        for (i, row) in plane.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = cb[o];
                for ki in 0..3 {
                    for kj in 0..3 {
                        let (ii, jj) = (i as i64 + ki as i64 - 1, j as i64 + kj as i64 - 1);
                        if (0..4).contains(&ii) && (0..4).contains(&jj) {
                            acc += cw[o * 9 + ki * 3 + kj] * img[ii as usize * 4 + jj as usize];
                        }
                    }
                }
                *cell = if acc > 0.0 { acc } else { 0.0 };
            }
        }
    }
    let mut flat = Vec::new();
    for plane in &conv {
        for pi in 0..2 {
            for pj in 0..2 {
                let m = [
                    plane[2 * pi][2 * pj],
                    plane[2 * pi][2 * pj + 1],
                    plane[2 * pi + 1][2 * pj],
                    plane[2 * pi + 1][2 * pj + 1],
                ];
                flat.push(m.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            }
        }
    }
    let dense = |layer: &LayerParams, input: &[f64], out: usize| -> Vec<f64> {
        let (w, b) = match layer {
            LayerParams::Dense { weight, bias } => (weight.data(), bias.data()),
            _ => unreachable!(),
        };
        (0..out)
            .map(|j| b[j] + (0..input.len()).map(|i| input[i] * w[i * out + j]).sum::<f64>())
            .collect()
    };
    let h: Vec<f64> = dense(&state.layers()[4], &flat, 3).into_iter().map(|v| v.max(0.0)).collect();
    let z = dense(&state.layers()[6], &h, 2);
    let m = z[0].max(z[1]);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s = e[0] + e[1];
    e.iter().map(|v| v / s).collect()
}

#[test]
fn forward_matches_scalar_oracle() {
    let spec = ModelSpec::parse(
        "stochact-model 1\ninput 1 4 4\nclasses 2\nconv2d 2 3 1 1\nact 0 relu 1\nmaxpool 2\nflatten\ndense 3\nact 1 relu 1\ndense 2\nsoftmax\n",
    )
    .unwrap();
    let mut state = build_model(&spec, &mut Rng::new(12)).unwrap();
    // nonzero biases so they are exercised too
    let mut r = Rng::new(13);
    for layer in state.layers_mut() {
        if let LayerParams::Conv { bias, .. } | LayerParams::Dense { bias, .. } = layer {
            for v in bias.data_mut() {
                *v = r.uniform(-0.2, 0.2);
            }
        }
    }
    let x = random_batch(&[3, 1, 4, 4], &mut r);
    let probs = predict(&state, &x).unwrap();
    for i in 0..3 {
        let want = scalar_oracle(&state, x.row(i));
        for (a, b) in probs.row(i).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn end_to_end_gradients_for_every_kind() {
    for kind in ActivationKind::ALL {
        for m in if kind.uses_max_input() { vec![1.0, 255.0] } else { vec![1.0] } {
            let spec = small_spec(ActivationId::new(kind, m));
            let mut rng = Rng::new(crate::seed_path!(77, kind.name(), m as u64));
            let mut state = build_model(&spec, &mut rng).unwrap();
            // move slot 0 off its initial values so every parameter matters
            if let LayerParams::Activation(p) = &mut state.layers_mut()[1] {
                *p = random_params(kind, m, 2, &mut rng).unwrap();
                if kind.uses_max_input() && m == 255.0 {
                    // put the hat/hinge structure where the inputs live
                    for q in &mut p.learnable {
                        if q.name == "b" || q.name.starts_with("t_") {
                            for v in &mut q.values {
                                *v /= 255.0;
                            }
                        }
                    }
                }
            }
            let x = random_batch(&[2, 1, 6, 6], &mut rng);
            let labels = [0, 2];
            let (_, cache) = forward_pass(&state, &x).unwrap();
            let analytic = backward_pass(&state, &cache, &labels).unwrap().grads.flatten();
            let theta = flat_params(&state);
            assert_eq!(analytic.len(), theta.len());
            let fd = finite_diff_grad(
                |t| {
                    let mut s = state.clone();
                    set_flat(&mut s, t.data());
                    loss_of(&s, &x, &labels)
                },
                &Tensor::vector(theta),
                Some(1e-5),
            );
            let worst = analytic
                .iter()
                .zip(fd.data())
                .map(|(a, n)| rel_error(*a, *n))
                .fold(0.0, f64::max);
            assert!(worst < 1e-3, "{kind} maxInput {m}: rel error {worst}");
        }
    }
}

#[test]
fn confident_correct_prediction_has_zero_gradient() {
    let spec = ModelSpec::parse("stochact-model 1\ninput 2\nclasses 2\ndense 2\nsoftmax\n").unwrap();
    let mut state = build_model(&spec, &mut Rng::new(0)).unwrap();
    if let LayerParams::Dense { weight, bias } = &mut state.layers_mut()[0] {
        weight.data_mut().copy_from_slice(&[0.0, 0.0, 0.0, 0.0]);
        bias.data_mut().copy_from_slice(&[0.0, 2000.0]);
    }
    let x = Tensor::new(vec![2, 2], vec![0.3, 0.1, -0.5, 0.9]).unwrap();
    let (_, cache) = forward_pass(&state, &x).unwrap();
    let b = backward_pass(&state, &cache, &[1, 1]).unwrap();
    assert_eq!(b.loss, 0.0);
    assert!(b.grads.flatten().iter().all(|g| *g == 0.0));
}

#[test]
fn slot_gradients_match_isolated_activation_backward() {
    let spec = small_spec(ActivationId::new(ActivationKind::Aplu, 1.0));
    let mut rng = Rng::new(21);
    let mut state = build_model(&spec, &mut rng).unwrap();
    if let LayerParams::Activation(p) = &mut state.layers_mut()[1] {
        *p = random_params(ActivationKind::Aplu, 1.0, 2, &mut rng).unwrap();
    }
    let x = random_batch(&[2, 1, 6, 6], &mut rng);
    let (_, cache) = forward_pass(&state, &x).unwrap();
    let b = backward_pass(&state, &cache, &[1, 2]).unwrap();
    assert_eq!(b.slot_upstream.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1]);
    let p = state.slot_params(0).unwrap();
    let mut want = act_backward_params(p, cache.input(1), &b.slot_upstream[0].1).unwrap();
    p.add_penalty_grad(&mut want);
    match b.grads.layer(1) {
        LayerParams::Activation(g) => assert_eq!(g.learnable, want),
        other => panic!("unexpected {other:?}"),
    }
    assert!((b.loss - b.data_loss - p.penalty()).abs() < 1e-15);
}

#[test]
fn stale_cache_is_rejected() {
    let spec = ModelSpec::default_backbone([1, 8, 8], 3);
    let mut state = build_model(&spec, &mut Rng::new(1)).unwrap();
    let x = random_batch(&[2, 1, 8, 8], &mut Rng::new(2));
    let (_, cache) = forward_pass(&state, &x).unwrap();
    assert!(backward_pass(&state, &cache, &[0, 1]).is_ok());
    state.apply_constraints();
    assert!(matches!(backward_pass(&state, &cache, &[0, 1]), Err(crate::Error::Contract(_))));
    let other = build_model(&spec, &mut Rng::new(1)).unwrap();
    assert!(matches!(backward_pass(&other, &cache, &[0, 1]), Err(crate::Error::Contract(_))));
    let (_, fresh) = forward_pass(&state, &x).unwrap();
    assert!(matches!(backward_pass(&state, &fresh, &[0]), Err(crate::Error::Contract(_))));
    assert!(matches!(backward_pass(&state, &fresh, &[0, 3]), Err(crate::Error::Contract(_))));
}

#[test]
fn swapping_kinds_preserves_shapes() {
    let base = ModelSpec::default_backbone([1, 8, 8], 4);
    let shapes = base.layer_shapes().unwrap();
    let x = random_batch(&[2, 1, 8, 8], &mut Rng::new(0));
    for kind in ActivationKind::ALL {
        let spec = base.with_all_slots(ActivationId::new(kind, 255.0));
        assert_eq!(spec.layer_shapes().unwrap(), shapes);
        let state = build_model(&spec, &mut Rng::new(1)).unwrap();
        let (_, cache) = forward_pass(&state, &x).unwrap();
        let (_, base_cache) = forward_pass(&build_model(&base, &mut Rng::new(1)).unwrap(), &x).unwrap();
        for i in 0..spec.layers.len() {
            assert_eq!(cache.output(i).shape(), base_cache.output(i).shape());
        }
    }
}

#[test]
fn persistence_round_trip_is_bit_exact() {
    let spec = ModelSpec::default_backbone([1, 8, 8], 3).with_all_slots(ActivationId::new(ActivationKind::Aplu, 255.0));
    let state = build_model(&spec, &mut Rng::new(5)).unwrap();
    let mut buf = Vec::new();
    write_model(&state, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"SACT");
    let back = read_model(buf.as_slice()).unwrap();
    assert_eq!(back, state);
    let x = random_batch(&[2, 1, 8, 8], &mut Rng::new(6));
    let (a, b) = (predict(&state, &x).unwrap(), predict(&back, &x).unwrap());
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));

    let mut again = Vec::new();
    write_model(&back, &mut again).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn persistence_rejects_damaged_files() {
    let spec = ModelSpec::default_backbone([1, 8, 8], 3);
    let state = build_model(&spec, &mut Rng::new(5)).unwrap();
    let mut buf = Vec::new();
    write_model(&state, &mut buf).unwrap();

    for cut in [0, 3, 7, 20, buf.len() / 2, buf.len() - 1] {
        assert!(matches!(read_model(&buf[..cut]), Err(crate::Error::Incompatible(_))), "cut {cut}");
    }
    let mut wrong_version = buf.clone();
    wrong_version[4..8].copy_from_slice(&2u32.to_le_bytes());
    let err = read_model(wrong_version.as_slice()).unwrap_err();
    assert!(err.to_string().contains("version 2"), "{err}");

    let mut bad_magic = buf.clone();
    bad_magic[0] = b'X';
    assert!(matches!(read_model(bad_magic.as_slice()), Err(crate::Error::Incompatible(_))));

    let mut extra = buf.clone();
    extra.push(0);
    assert!(matches!(read_model(extra.as_slice()), Err(crate::Error::Incompatible(_))));
}

#[test]
fn persistence_via_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.sact");
    let spec = ModelSpec::default_backbone([1, 8, 8], 3);
    let state = build_model(&spec, &mut Rng::new(8)).unwrap();
    save_model(&state, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), state);
    assert!(load_model(dir.path().join("missing.sact")).is_err());
}
