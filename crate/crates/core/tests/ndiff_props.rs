//! Every differentiable primitive against central differences, plus
//! linearity and determinism of the backward pass.

use proptest::prelude::*;
use uniex::ndiff::{grad_check, Array, Graph, ParamStore, Var, MASK_NEG};
use uniex::Result;

const TOL: f64 = 1e-6;
const STEP: f64 = 1e-5;

fn arr(shape: &[usize], data: &[f64]) -> Array {
    Array::new(shape.to_vec(), data.to_vec()).unwrap()
}

/// `sum(y * w)` for a fixed pseudo-random `w`, so that ops with a constant
/// sum (softmax, layer norm) still have informative gradients.
fn weighted_sum(g: &mut Graph, y: Var) -> Result<Var> {
    let shape = g.shape(y).to_vec();
    let w = Array::from_fn(&shape, |i| ((i * 37 + 11) % 17) as f64 / 17.0 - 0.4);
    let w = g.constant(w);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn check(store: &ParamStore, f: impl Fn(&mut Graph, &ParamStore) -> Result<Var>) -> f64 {
    grad_check(store, STEP, None, f).unwrap().max_rel_error
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn store(pairs: Vec<(&str, Array)>) -> ParamStore {
    let mut s = ParamStore::new();
    for (k, v) in pairs {
        s.insert(k, v);
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_and_transpose(a in values(6), b in values(12)) {
        let s = store(vec![("a", arr(&[2, 3], &a)), ("b", arr(&[4, 3], &b))]);
        let e = check(&s, |g, p| {
            let a = g.param(p, "a")?;
            let b = g.param(p, "b")?;
            let bt = g.transpose(b)?;
            let y = g.matmul(a, bt)?;
            weighted_sum(g, y)
        });
        prop_assert!(e < TOL, "{e}");
    }

    #[test]
    fn bmm(a in values(12), b in values(12)) {
        let s = store(vec![("a", arr(&[2, 2, 3], &a)), ("b", arr(&[2, 3, 2], &b))]);
        let e = check(&s, |g, p| {
            let a = g.param(p, "a")?;
            let b = g.param(p, "b")?;
            let y = g.bmm(a, b)?;
            weighted_sum(g, y)
        });
        prop_assert!(e < TOL, "{e}");
    }

    #[test]
    fn add_mul_bias_scale(a in values(6), b in values(6), c in values(3)) {
        let s = store(vec![("a", arr(&[2, 3], &a)), ("b", arr(&[2, 3], &b)), ("c", arr(&[3], &c))]);
        let e = check(&s, |g, p| {
            let a = g.param(p, "a")?;
            let b = g.param(p, "b")?;
            let c = g.param(p, "c")?;
            let x = g.add(a, b)?;
            let y = g.mul(x, a)?;
            let z = g.add_bias(y, c)?;
            let z = g.scale(z, -1.5);
            weighted_sum(g, z)
        });
        prop_assert!(e < TOL, "{e}");
    }

    #[test]
    fn pointwise_nonlinearities(a in values(8)) {
        let s = store(vec![("a", arr(&[8], &a))]);
        for which in 0..3 {
            let e = check(&s, |g, p| {
                let a = g.param(p, "a")?;
                let y = match which {
                    0 => g.sigmoid(a),
                    1 => g.tanh(a),
                    _ => g.gelu(a),
                };
                weighted_sum(g, y)
            });
            prop_assert!(e < TOL, "op {which}: {e}");
        }
    }

    #[test]
    fn softmax_with_and_without_mask(a in values(9)) {
        let s = store(vec![("a", arr(&[3, 3], &a))]);
        let mask = arr(&[3, 3], &[0.0, MASK_NEG, 0.0, 0.0, 0.0, 0.0, MASK_NEG, MASK_NEG, 0.0]);
        for m in [None, Some(&mask)] {
            let e = check(&s, |g, p| {
                let a = g.param(p, "a")?;
                let y = g.softmax(a, m)?;
                weighted_sum(g, y)
            });
            prop_assert!(e < TOL, "{e}");
        }
    }

    #[test]
    fn layer_norm(x in values(8), gamma in values(4), beta in values(4)) {
        let s = store(vec![("x", arr(&[2, 4], &x)), ("g", arr(&[4], &gamma)), ("b", arr(&[4], &beta))]);
        let e = check(&s, |g, p| {
            let x = g.param(p, "x")?;
            let ga = g.param(p, "g")?;
            let be = g.param(p, "b")?;
            let y = g.layer_norm(x, ga, be, 1e-5)?;
            weighted_sum(g, y)
        });
        prop_assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn gather_reshape_permute(t in values(12), idx in prop::collection::vec(0usize..4, 1..6)) {
        let s = store(vec![("t", arr(&[4, 3], &t))]);
        let e = check(&s, |g, p| {
            let t = g.param(p, "t")?;
            let r = g.gather(t, &idx)?;
            let n = idx.len();
            let r = g.reshape(r, &[n, 3, 1])?;
            let r = g.permute(r, &[2, 0, 1])?;
            weighted_sum(g, r)
        });
        prop_assert!(e < TOL, "{e}");
    }

    #[test]
    fn masked_bce(x in values(6), y in prop::collection::vec(prop::bool::ANY, 6), v in prop::collection::vec(prop::bool::ANY, 6)) {
        let s = store(vec![("x", arr(&[6], &x))]);
        let target = Array::from_fn(&[6], |i| if y[i] { 1.0 } else { 0.0 });
        let valid = Array::from_fn(&[6], |i| if v[i] { 1.0 } else { 0.0 });
        let e = check(&s, |g, p| {
            let x = g.param(p, "x")?;
            let pr = g.sigmoid(x);
            g.bce_sum(pr, &target, &valid)
        });
        prop_assert!(e < TOL, "{e}");
    }

    #[test]
    fn gradients_are_linear(a in values(6), k1 in -2.0f64..2.0, k2 in -2.0f64..2.0) {
        let s = store(vec![("a", arr(&[6], &a))]);
        let grad = |k1: f64, k2: f64| {
            let mut g = Graph::new();
            let x = g.param(&s, "a").unwrap();
            let f = g.tanh(x);
            let f = g.scale(f, k1);
            let h = g.mul(x, x).unwrap();
            let h = g.scale(h, k2);
            let y = g.add(f, h).unwrap();
            let l = g.sum(y);
            let gr = g.backward(l).unwrap();
            gr.get(x).unwrap().clone()
        };
        let both = grad(k1, k2);
        let f = grad(1.0, 0.0);
        let h = grad(0.0, 1.0);
        for i in 0..6 {
            let want = k1 * f.data()[i] + k2 * h.data()[i];
            prop_assert!((both.data()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_is_deterministic(a in values(9)) {
        let s = store(vec![("a", arr(&[3, 3], &a))]);
        let run = || {
            let mut g = Graph::new();
            let x = g.param(&s, "a").unwrap();
            let y = g.softmax(x, None).unwrap();
            let z = g.matmul(y, x).unwrap();
            let l = weighted_sum(&mut g, z).unwrap();
            g.param_grads(&g.backward(l).unwrap())
        };
        prop_assert_eq!(run(), run());
    }
}

#[test]
fn gelu_uses_the_tanh_approximation() {
    let mut g = Graph::new();
    let x = g.constant(arr(&[2], &[1.0, -1.0]));
    let y = g.gelu(x);
    // 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))) at +-1
    assert!((g.value(y).data()[0] - 0.841_191_990_607_477_3).abs() < 1e-12);
    assert!((g.value(y).data()[1] + 0.158_808_009_392_522_7).abs() < 1e-12);
}

#[test]
fn masked_entries_get_no_gradient() {
    let s = store(vec![("a", arr(&[1, 3], &[0.3, 1.1, -0.4]))]);
    let mask = arr(&[1, 3], &[0.0, MASK_NEG, 0.0]);
    let mut g = Graph::new();
    let x = g.param(&s, "a").unwrap();
    let y = g.softmax(x, Some(&mask)).unwrap();
    let l = weighted_sum(&mut g, y).unwrap();
    let gr = g.backward(l).unwrap();
    assert_eq!(gr.get(x).unwrap().data()[1], 0.0);
}
