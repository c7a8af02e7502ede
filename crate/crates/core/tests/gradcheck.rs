//! Analytic gradients against central finite differences.

use intent_core::autodiff::{init_params, Arch, Ctx, Graph, ParamStore, Tensor, Var};
use intent_testkit::{central_difference, max_relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
/// Denominator floor: entries whose gradients are both below this are
/// compared on an absolute scale, since their differences are roundoff.
const FLOOR: f64 = 1e-6;

trait Build: for<'p> Fn(&mut Graph<'p>, &'p ParamStore) -> Var {}
impl<F: for<'p> Fn(&mut Graph<'p>, &'p ParamStore) -> Var> Build for F {}

fn loss_at(store: &ParamStore, build: &impl Build) -> f64 {
    let mut g = Graph::new();
    let l = build(&mut g, store);
    g.value(l).scalar()
}

/// Worst relative error over every parameter entry.
fn check(store: &ParamStore, build: &impl Build) -> f64 {
    let mut g = Graph::new();
    let l = build(&mut g, store);
    let grads = g.backward(l, store).unwrap();
    let mut worst: f64 = 0.0;
    let mut probe = store.clone();
    for id in 0..store.len() {
        let x = store.tensor(id).data().to_vec();
        let numeric = central_difference(
            |v| {
                probe.tensor_mut(id).data_mut().copy_from_slice(v);
                loss_at(&probe, build)
            },
            &x,
            H,
        );
        probe.tensor_mut(id).data_mut().copy_from_slice(&x);
        let err = max_relative_error(grads.get(id), &numeric, FLOOR);
        assert!(err < TOL, "parameter {} error {err:e}", store.name(id));
        worst = worst.max(err);
    }
    worst
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

/// Parameters named `p0`, `p1`, ... with the given shapes.
fn store(seed: u64, shapes: &[(usize, usize)]) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    for (i, &(r, c)) in shapes.iter().enumerate() {
        s.insert(format!("p{i}"), random(&mut rng, r, c)).unwrap();
    }
    s
}

/// Contracts a node with fixed random weights into a scalar.
fn project(g: &mut Graph<'_>, v: Var, seed: u64) -> Var {
    let t = g.value(v);
    let (r, c) = (t.rows(), t.cols());
    let w = g.input(random(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc), r, c));
    let m = g.mul(v, w).unwrap();
    g.sum_all(m)
}

/// Pins the closure signature so parameters borrow for the graph's lifetime.
fn hr<F: for<'p> Fn(&mut Graph<'p>, &'p ParamStore) -> Var>(f: F) -> F {
    f
}

fn op_check(shapes: &[(usize, usize)], f: impl Fn(&mut Graph<'_>, &[Var]) -> Var) {
    for seed in 0..3 {
        let s = store(seed, shapes);
        let build = hr(|g, st| {
            let vars: Vec<Var> = (0..st.len()).map(|i| g.param(st, i)).collect();
            let out = f(g, &vars);
            project(g, out, seed)
        });
        check(&s, &build);
    }
}

#[test]
fn matmul() {
    op_check(&[(3, 4), (4, 5)], |g, v| g.matmul(v[0], v[1]).unwrap());
}

#[test]
fn matmul_nt() {
    op_check(&[(3, 4), (5, 4)], |g, v| g.matmul_nt(v[0], v[1]).unwrap());
}

#[test]
fn matmul_with_itself() {
    op_check(&[(4, 4)], |g, v| g.matmul(v[0], v[0]).unwrap());
}

#[test]
fn add_and_broadcast() {
    op_check(&[(3, 4), (3, 4), (1, 4)], |g, v| {
        let s = g.add(v[0], v[1]).unwrap();
        g.add_row(s, v[2]).unwrap()
    });
}

#[test]
fn mul_and_scale() {
    op_check(&[(2, 5), (2, 5)], |g, v| {
        let m = g.mul(v[0], v[1]).unwrap();
        g.scale(m, -1.7)
    });
}

#[test]
fn relu_away_from_kink() {
    op_check(&[(3, 6)], |g, v| {
        // Shift by a constant so no entry sits within a step of zero.
        let x = g.value(v[0]).clone();
        let shift: Vec<f64> = x.data().iter().map(|a| if a.abs() < 0.01 { 0.05 } else { 0.0 }).collect();
        let c = g.input(Tensor::matrix(3, 6, shift).unwrap());
        let y = g.add(v[0], c).unwrap();
        g.relu(y)
    });
}

#[test]
fn softmax_rows() {
    op_check(&[(3, 5)], |g, v| g.softmax(v[0]));
}

#[test]
fn layer_norm() {
    op_check(&[(3, 6), (1, 6), (1, 6)], |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5).unwrap());
}

#[test]
fn transpose() {
    op_check(&[(3, 5)], |g, v| g.transpose(v[0]));
}

#[test]
fn concat_and_slice() {
    op_check(&[(2, 3), (2, 4), (1, 7)], |g, v| {
        let c = g.concat(&[v[0], v[1]], 1).unwrap();
        let r = g.concat(&[c, v[2]], 0).unwrap();
        let a = g.slice_cols(r, 1, 6).unwrap();
        g.slice_rows(a, 1, 3).unwrap()
    });
}

#[test]
fn embedding_lookup() {
    op_check(&[(5, 3)], |g, v| g.embedding(v[0], &[4, 0, 4, 2]).unwrap());
}

#[test]
fn cross_entropy() {
    op_check(&[(1, 7)], |g, v| g.cross_entropy(v[0], 3).unwrap());
}

#[test]
fn mse() {
    op_check(&[(1, 4)], |g, v| g.mse(v[0], &[0.5, -1.0, 2.0, 0.0]).unwrap());
}

#[test]
fn cosine_loss() {
    op_check(&[(1, 6)], |g, v| g.cosine_loss(v[0], &[0.3, -0.2, 0.9, 0.0, 0.1, -0.5], 1e-8).unwrap());
}

#[test]
fn attention_block() {
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        for p in ["q", "k", "v", "o"] {
            s.insert(format!("att.{p}.w"), random(&mut rng, 8, 8)).unwrap();
            if p != "k" {
                s.insert(format!("att.{p}.b"), random(&mut rng, 1, 8)).unwrap();
            }
        }
        let xq = random(&mut rng, 2, 8);
        let xkv = random(&mut rng, 5, 8);
        let build = hr(|g, st| {
            let mut cx = Ctx::new(g, st);
            let q = cx.g.input(xq.clone());
            let kv = cx.g.input(xkv.clone());
            let out = cx.attention("att", q, kv, 2).unwrap();
            project(g, out, seed)
        });
        check(&s, &build);
    }
}

/// The spot configuration: one encoder and one decoder layer, d_model 16,
/// a window of 4 events (3 input rows plus the query row).
fn network_arch() -> Arch {
    Arch {
        in_dim: 32,
        query_dim: 9,
        d_model: 16,
        heads: 4,
        ffn: 32,
        out_dim: 26,
        learned_query: false,
    }
}

/// Runs the full-network check for one seed and returns the worst error.
pub fn network_gradient_error(seed: u64) -> f64 {
    let arch = network_arch();
    let mut s = init_params(&arch, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + 1);
    // Move biases and norm gains off their initial constants.
    for id in 0..s.len() {
        for x in s.tensor_mut(id).data_mut() {
            *x += rng.random_range(-0.1..0.1);
        }
    }
    let input = random(&mut rng, 3, arch.in_dim);
    let query = random(&mut rng, 1, arch.query_dim);
    let target = (seed as usize * 7) % arch.out_dim;
    let build = hr(|g, st| {
        let mut cx = Ctx::new(g, st);
        let out = cx.forward(&arch, input.clone(), Some(query.clone())).unwrap();
        let ce = g.cross_entropy(out, target).unwrap();
        let proj = project(g, out, seed);
        g.add(ce, proj).unwrap()
    });
    check(&s, &build)
}

#[test]
fn full_network_twenty_seeds() {
    let worst = (0..20).map(network_gradient_error).fold(0.0, f64::max);
    println!("worst relative error {worst:e}");
    assert!(worst < TOL);
}
