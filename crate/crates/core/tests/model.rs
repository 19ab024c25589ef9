use ndarray::{Array1, Array2};
use proptest::prelude::*;
use quizsmith::seq2seq::{
    forward_logits, gradients, sgd_step, softmax, token_losses, weighted_loss, ModelParams, TokenId, Vocab,
    WeightedExample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vocab(words: usize) -> Vocab {
    Vocab::with_words((0..words).map(|i| format!("w{i}"))).unwrap()
}

fn random_params(vocab: Vocab, rng: &mut ChaCha8Rng) -> ModelParams {
    let v = vocab.len();
    let u = Array2::from_shape_fn((v, v), |_| rng.random_range(-1.0..1.0));
    let w = Array2::from_shape_fn((v, v), |_| rng.random_range(-1.0..1.0));
    let b = Array1::from_shape_fn(v, |_| rng.random_range(-1.0..1.0));
    ModelParams::from_parts(vocab, u, w, b).unwrap()
}

fn random_target(v: &Vocab, rng: &mut ChaCha8Rng) -> Vec<TokenId> {
    let len = rng.random_range(0..4);
    let mut t: Vec<TokenId> = (0..len).map(|_| rng.random_range(3..v.len())).collect();
    t.push(v.eos());
    t
}

/// Cross-entropy written out with explicit sums over the raw logits.
fn oracle_losses(p: &ModelParams, input: &[TokenId], target: &[TokenId]) -> Vec<f64> {
    let v = p.vocab_size();
    let mut x = vec![0.0; v];
    for &t in input {
        x[t] += 1.0 / input.len() as f64;
    }
    let mut prev = p.vocab().bos();
    let mut out = Vec::new();
    for &t in target {
        let logits: Vec<f64> = (0..v)
            .map(|i| (0..v).map(|j| p.u[[i, j]] * x[j]).sum::<f64>() + p.w[[i, prev]] + p.b[i])
            .collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        out.push(z.ln() - logits[t]);
        prev = t;
    }
    out
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v = vocab(2);
        let params = random_params(v.clone(), &mut rng);
        let inputs: Vec<Vec<TokenId>> = (0..2).map(|_| vec![rng.random_range(0..v.len())]).collect();
        let targets: Vec<Vec<TokenId>> = (0..2).map(|_| random_target(&v, &mut rng)).collect();
        let batch: Vec<WeightedExample> = (0..2)
            .map(|i| WeightedExample {
                input: &inputs[i],
                target: &targets[i],
                weight: rng.random_range(0.1..1.0),
            })
            .collect();
        let g = gradients(&params, &batch).unwrap();
        let loss_at = |p: &ModelParams| weighted_loss(p, &batch).unwrap();
        let check = |analytic: f64, set: &dyn Fn(&mut ModelParams, f64)| {
            let mut plus = params.clone();
            set(&mut plus, h);
            let mut minus = params.clone();
            set(&mut minus, -h);
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            if analytic.abs().max(numeric.abs()) > 1e-6 {
                rel_err(analytic, numeric)
            } else {
                0.0
            }
        };
        let n = params.vocab_size();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max(check(g.u[[i, j]], &|p, d| p.u[[i, j]] += d));
                worst = worst.max(check(g.w[[i, j]], &|p, d| p.w[[i, j]] += d));
            }
            worst = worst.max(check(g.b[i], &|p, d| p.b[i] += d));
        }
    }
    assert!(worst < 1e-6, "worst relative error {worst}");
}

#[test]
fn hand_gradient_two_symbols() {
    // V = 4 with two zero logits rows; the target is EOS from BOS, so
    // dL/db = softmax(0) - onehot(eos) = [1/4, 1/4, -3/4, 1/4].
    let v = Vocab::new(["<pad>", "<bos>", "<eos>", "x"]).unwrap();
    let p = ModelParams::zeros(v.clone());
    let target = [v.eos()];
    let g = gradients(
        &p,
        &[WeightedExample {
            input: &[],
            target: &target,
            weight: 1.0,
        }],
    )
    .unwrap();
    assert_eq!(g.b.to_vec(), vec![0.25, 0.25, -0.75, 0.25]);
    assert_eq!(g.w.column(v.bos()).to_vec(), vec![0.25, 0.25, -0.75, 0.25]);
    assert!(g.u.iter().all(|&x| x == 0.0));
}

#[test]
fn losses_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let v = vocab(3);
        let p = random_params(v.clone(), &mut rng);
        let input: Vec<TokenId> = (0..rng.random_range(0..3))
            .map(|_| rng.random_range(0..v.len()))
            .collect();
        let target = random_target(&v, &mut rng);
        let got = token_losses(&p, &input, &target).unwrap();
        for (a, b) in got.iter().zip(oracle_losses(&p, &input, &target)) {
            assert!((a - b).abs() < 1e-12);
            assert!(*a >= 0.0);
        }
    }
}

#[test]
fn zero_params_give_uniform_losses() {
    let v = vocab(1);
    let p = ModelParams::zeros(v.clone());
    let target = [3, v.eos()];
    for l in token_losses(&p, &[3], &target).unwrap() {
        assert!((l - 4f64.ln()).abs() < 1e-12);
    }
    assert!(forward_logits(&p, &[], v.bos()).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn repeated_example_loss_decreases() {
    let v = vocab(4);
    let mut p = ModelParams::zeros(v.clone());
    let input = [3];
    let target = [4, 5, 6, v.eos()];
    let batch = [WeightedExample {
        input: &input,
        target: &target,
        weight: 1.0,
    }];
    let mut last = weighted_loss(&p, &batch).unwrap();
    for _ in 0..50 {
        p = sgd_step(&p, &gradients(&p, &batch).unwrap(), 0.1).unwrap();
        let now = weighted_loss(&p, &batch).unwrap();
        assert!(now < last);
        last = now;
    }
}

#[test]
fn sgd_arithmetic() {
    let v = vocab(1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_params(v.clone(), &mut rng);
    let zero = gradients(&p, &[]).unwrap();
    assert_eq!(sgd_step(&p, &zero, 0.5).unwrap(), p);
    let mut g = zero.clone();
    g.u.assign(&p.u);
    g.w.assign(&p.w);
    g.b.assign(&p.b);
    let cleared = sgd_step(&p, &g, 1.0).unwrap();
    assert!(cleared
        .u
        .iter()
        .chain(cleared.w.iter())
        .chain(cleared.b.iter())
        .all(|&x| x == 0.0));
    // two steps of 0.1 on a constant gradient of 1
    let mut ones = zero;
    ones.b.fill(1.0);
    let twice = sgd_step(&sgd_step(&p, &ones, 0.1).unwrap(), &ones, 0.1).unwrap();
    for (a, b) in twice.b.iter().zip(p.b.iter()) {
        assert!((a - (b - 0.2)).abs() < 1e-15);
    }
    assert!(sgd_step(&p, &g, 0.0).is_err());
}

#[test]
fn params_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random_params(vocab(2), &mut rng);
    let text = serde_json::to_string(&p.to_json()).unwrap();
    let back = ModelParams::from_json(serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back, p);
}

proptest! {
    #[test]
    fn softmax_sums_to_one(logits in prop::collection::vec(-50.0f64..50.0, 1..20)) {
        let s = softmax(Array1::from(logits).view());
        prop_assert!((s.sum() - 1.0).abs() < 1e-12);
        prop_assert!(s.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn zero_weight_gives_zero_gradient(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vocab(2);
        let p = random_params(v.clone(), &mut rng);
        let target = random_target(&v, &mut rng);
        let g = gradients(&p, &[WeightedExample { input: &[3], target: &target, weight: 0.0 }]).unwrap();
        prop_assert!(g.u.iter().chain(g.w.iter()).chain(g.b.iter()).all(|&x| x == 0.0));
    }
}
