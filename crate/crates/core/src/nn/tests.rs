use rand::Rng;

use super::*;
use crate::seed;

fn random(shape: (usize, usize, usize, usize), seed_: u64) -> Tensor {
    let mut rng = seed::rng(seed_);
    Tensor::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Central-difference check of `sum(build(inputs) * weights)` against the
/// tape's gradient for every input element.
fn check<F>(inputs: Vec<Tensor>, build: F)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let forward = |vals: &[Tensor]| -> (Tape, Vec<Var>, Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = build(&mut tape, &vars);
        (tape, vars, out)
    };
    let (tape, vars, out) = forward(&inputs);
    let weights = random(tape.value(out).dim(), 99);
    let objective = |vals: &[Tensor]| {
        let (t, _, o) = forward(vals);
        (t.value(o) * &weights).sum()
    };
    let grads = tape.backward(out, weights.clone()).unwrap();
    let h = 1e-6;
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads
            .wrt(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].dim()));
        for idx in 0..inputs[k].len() {
            let mut plus = inputs.clone();
            let mut minus = inputs.clone();
            plus[k].as_slice_mut().unwrap()[idx] += h;
            minus[k].as_slice_mut().unwrap()[idx] -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let a = analytic.as_slice().unwrap()[idx];
            assert!(
                (a - numeric).abs() <= 1e-6 * (1.0 + a.abs().max(numeric.abs())),
                "input {k} element {idx}: analytic {a} numeric {numeric}"
            );
        }
    }
}

#[test]
fn conv_gradients() {
    for (stride, pad, k) in [(1, 1, 3), (2, 1, 3), (1, 0, 1), (1, 2, 5)] {
        check(
            vec![
                random((2, 3, 6, 5), 1),
                random((4, 3, k, k), 2),
                random((4, 1, 1, 1), 3),
            ],
            |t, v| t.conv2d(v[0], v[1], Some(v[2]), stride, pad).unwrap(),
        );
    }
}

#[test]
fn conv_matches_direct_loop() {
    let x = random((1, 2, 5, 5), 4);
    let w = random((3, 2, 3, 3), 5);
    let mut tape = Tape::new();
    let (xv, wv) = (tape.leaf(x.clone()), tape.leaf(w.clone()));
    let out = tape.conv2d(xv, wv, None, 2, 1).unwrap();
    let y = tape.value(out);
    assert_eq!(y.dim(), (1, 3, 3, 3));
    for co in 0..3 {
        for oy in 0..3 {
            for ox in 0..3 {
                let mut acc = 0.0;
                for ci in 0..2 {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let iy = (oy * 2 + ky) as isize - 1;
                            let ix = (ox * 2 + kx) as isize - 1;
                            if (0..5).contains(&iy) && (0..5).contains(&ix) {
                                acc += w[[co, ci, ky, kx]] * x[[0, ci, iy as usize, ix as usize]];
                            }
                        }
                    }
                }
                assert!((acc - y[[0, co, oy, ox]]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn elementwise_gradients() {
    check(vec![random((1, 2, 3, 3), 6), random((1, 2, 3, 3), 7)], |t, v| {
        let s = t.scaled_add(v[0], v[1], 0.3).unwrap();
        let a = t.add(s, v[1]).unwrap();
        t.leaky_relu(a, 0.2)
    });
    check(
        vec![random((1, 2, 3, 3), 8), Tensor::from_elem((1, 1, 1, 1), 0.25)],
        |t, v| t.prelu(v[0], v[1]),
    );
    let mask = random((1, 2, 3, 3), 9);
    check(vec![random((1, 2, 3, 3), 10)], move |t, v| {
        t.mask(v[0], mask.clone()).unwrap()
    });
    check(vec![random((2, 3, 2, 2), 11)], |t, v| {
        t.channel_scale(v[0], vec![1.0, -2.0, 0.5]).unwrap()
    });
}

#[test]
fn structural_gradients() {
    check(vec![random((2, 2, 3, 3), 12), random((2, 3, 3, 3), 13)], |t, v| {
        t.concat(&[v[0], v[1], v[0]]).unwrap()
    });
    check(vec![random((1, 8, 2, 3), 14)], |t, v| t.pixel_shuffle(v[0], 2).unwrap());
    check(vec![random((2, 2, 5, 4), 15)], |t, v| t.max_pool2(v[0]).unwrap());
    check(vec![random((2, 3, 4, 2), 16)], |t, v| t.global_avg_pool(v[0]));
    check(
        vec![
            random((3, 4, 1, 1), 17),
            random((2, 4, 1, 1), 18),
            random((2, 1, 1, 1), 19),
        ],
        |t, v| t.linear(v[0], v[1], v[2]).unwrap(),
    );
}

#[test]
fn parameter_gradients_accumulate_across_uses() {
    let w = random((2, 2, 3, 3), 20);
    let x = random((1, 2, 4, 4), 21);
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let w1 = tape.param(0, &w);
    let a = tape.conv2d(xv, w1, None, 1, 1).unwrap();
    let w2 = tape.param(0, &w);
    let b = tape.conv2d(a, w2, None, 1, 1).unwrap();
    let g = tape.backward(b, Tensor::ones((1, 2, 4, 4))).unwrap();
    assert!(g.wrt(xv).is_none());
    let collected = g.collect_params(&tape, &[(2, 2, 3, 3)]);
    let expect = g.wrt(w1).unwrap() + g.wrt(w2).unwrap();
    assert_eq!(collected[0], expect);
}

#[test]
fn shuffle_index_formula_and_inverse() {
    // four constant channels 0,1,2,3 tile as [[0,1],[2,3]]
    let x = Tensor::from_shape_fn((1, 4, 2, 2), |(_, c, _, _)| c as f64);
    let y = pixel_shuffle(&x, 2).unwrap();
    assert_eq!(y.dim(), (1, 1, 4, 4));
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(y[[0, 0, i, j]], ((i % 2) * 2 + j % 2) as f64);
        }
    }
    let z = random((2, 12, 3, 5), 22);
    assert_eq!(pixel_unshuffle(&pixel_shuffle(&z, 2).unwrap(), 2).unwrap(), z);
    assert_eq!(pixel_shuffle(&z, 1).unwrap(), z);
    assert!(pixel_shuffle(&random((1, 6, 2, 2), 23), 2).is_err());
}

#[test]
fn shape_errors() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros((1, 3, 4, 4)));
    let w = tape.leaf(Tensor::zeros((2, 4, 3, 3)));
    assert!(tape.conv2d(x, w, None, 1, 1).is_err());
    let y = tape.leaf(Tensor::zeros((1, 3, 4, 5)));
    assert!(tape.add(x, y).is_err());
    assert!(tape.backward(x, Tensor::zeros((1, 1, 1, 1))).is_err());
}
