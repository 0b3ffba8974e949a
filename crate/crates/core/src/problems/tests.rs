use super::*;
use std::sync::Arc;

fn v(x: &[f64]) -> Vec<Tensor> {
    vec![Tensor::vector(x.to_vec())]
}

fn random_point(rng: &mut Rng, like: &[Tensor], scale: f64) -> Vec<Tensor> {
    like.iter()
        .map(|p| {
            let mut t = p.zeros_like();
            rng.fill_standard_normal(t.data_mut());
            t.scale(scale).unwrap()
        })
        .collect()
}

fn blobs(seed: u64) -> Arc<Dataset> {
    Arc::new(make_blobs(60, 4, 5, 1.0, &mut Rng::new(seed)).unwrap())
}

#[test]
fn quadratic_examples() {
    let q = Quadratic::new(1, 1.0);
    let (f, g) = q.loss_and_grad(&v(&[3.0]), &Batch::Full);
    assert_eq!(f, 4.5);
    assert_eq!(g[0].data(), &[3.0]);
    let (f, g) = q.loss_and_grad(&v(&[0.0]), &Batch::Full);
    assert_eq!((f, g[0].data()[0]), (0.0, 0.0));

    let q = Quadratic::new(2, 100.0);
    assert_eq!(q.diag(), &[1.0, 100.0]);
    let (_, g) = q.loss_and_grad(&v(&[1.0, 1.0]), &Batch::Full);
    assert_eq!(g[0].data(), &[1.0, 100.0]);

    let q = Quadratic::new(10, 10.0);
    assert!((q.diag()[9] - 10.0).abs() < 1e-12);
    assert!(q.diag().windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn rosenbrock_examples() {
    let r = Rosenbrock::new(2);
    let (f, g) = r.loss_and_grad(&v(&[1.0, 1.0]), &Batch::Full);
    assert_eq!(f, 0.0);
    assert_eq!(g[0].data(), &[0.0, 0.0]);
    assert_eq!(r.loss(&v(&[0.0, 0.0]), &Batch::Full), 1.0);

    let r5 = Rosenbrock::new(5);
    let (f, g) = r5.loss_and_grad(&v(&[1.0; 5]), &Batch::Full);
    assert_eq!(f, 0.0);
    assert!(g[0].data().iter().all(|&x| x == 0.0));

    let p = v(&[-1.2, 1.0]);
    let (_, g) = r.loss_and_grad(&p, &Batch::Full);
    let fd = fd_gradient(&r, &p, &Batch::Full, DEFAULT_FD_STEP);
    assert!(relative_error(&g, &fd) < 1e-6);
    // closed form at (-1.2, 1): (-215.6, -88)
    assert!((g[0].data()[0] + 215.6).abs() < 1e-10);
    assert!((g[0].data()[1] + 88.0).abs() < 1e-10);
}

#[test]
fn fd_on_quadratic_is_exact_to_rounding() {
    let q = Quadratic::new(6, 50.0);
    let mut rng = Rng::new(1);
    for _ in 0..5 {
        let base = q.init_params(&mut rng);
        let p = random_point(&mut rng, &base, 2.0);
        let (_, g) = q.loss_and_grad(&p, &Batch::Full);
        let fd = fd_gradient(&q, &p, &Batch::Full, DEFAULT_FD_STEP);
        assert!(relative_error(&g, &fd) < 1e-9);
    }
}

struct Constant;

impl Problem for Constant {
    fn name(&self) -> &str {
        "constant"
    }
    fn init_params(&self, _rng: &mut Rng) -> Vec<Tensor> {
        v(&[1.0, 2.0])
    }
    fn loss_and_grad(&self, params: &[Tensor], _batch: &Batch) -> (f64, Vec<Tensor>) {
        (3.25, vec![params[0].zeros_like()])
    }
}

#[test]
fn fd_of_constant_is_zero() {
    let fd = fd_gradient(&Constant, &v(&[0.3, -7.0]), &Batch::Full, 1e-3);
    assert_eq!(fd[0].data(), &[0.0, 0.0]);
}

#[test]
fn zero_logreg_loss_is_ln_c() {
    let data = blobs(2);
    let lr = LogReg::new(data.clone(), 0.0);
    let p = lr.init_params(&mut Rng::new(0));
    assert_eq!(p[0].shape(), &[5, 4]);
    assert_eq!(p[0].kind(), crate::ParamKind::Matrix);
    assert_eq!(p[1].kind(), crate::ParamKind::NonMatrix);
    let loss = lr.loss(&p, &Batch::Full);
    assert!((loss - 4f64.ln()).abs() < 1e-14);
}

#[test]
fn mlp_with_zero_hidden_weights_and_input() {
    let features = Tensor::zeros(&[6, 3]);
    let data = Arc::new(Dataset::new(features, vec![0, 1, 2, 3, 4, 5], 6).unwrap());
    let mlp = Mlp::new(data, &[4]);
    let mut p = mlp.init_params(&mut Rng::new(1));
    p[0] = p[0].zeros_like();
    assert!((mlp.loss(&p, &Batch::Full) - 6f64.ln()).abs() < 1e-14);
}

#[test]
fn classifier_gradients_match_fd() {
    let data = blobs(4);
    let mut rng = Rng::new(17);
    let logreg = LogReg::new(data.clone(), 0.0);
    let logreg_l2 = LogReg::new(data.clone(), 0.3);
    let mlp = Mlp::new(data.clone(), &[7, 5]);
    let batch = Batch::Indices(vec![3, 17, 9, 40, 41, 0, 59]);
    for problem in [&logreg as &dyn Problem, &logreg_l2, &mlp] {
        for _ in 0..3 {
            let base = problem.init_params(&mut rng);
            let p = random_point(&mut rng, &base, 0.5);
            for b in [&Batch::Full, &batch] {
                let (_, g) = problem.loss_and_grad(&p, b);
                let fd = fd_gradient(problem, &p, b, DEFAULT_FD_STEP);
                let err = relative_error(&g, &fd);
                assert!(err < 1e-6, "{}: {err}", problem.name());
            }
        }
    }
}

#[test]
fn loss_ignores_batch_order() {
    let data = blobs(5);
    let mlp = Mlp::new(data, &[6]);
    let p = mlp.init_params(&mut Rng::new(2));
    let a = mlp.loss(&p, &Batch::Indices(vec![1, 2, 3, 10, 20]));
    let b = mlp.loss(&p, &Batch::Indices(vec![20, 3, 10, 2, 1]));
    assert!((a - b).abs() <= 1e-14 * a.abs());
}

#[test]
fn blobs_are_seeded_and_balanced() {
    let a = make_blobs(100, 5, 3, 0.5, &mut Rng::new(9)).unwrap();
    let b = make_blobs(100, 5, 3, 0.5, &mut Rng::new(9)).unwrap();
    let c = make_blobs(100, 5, 3, 0.5, &mut Rng::new(10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.features, c.features);
    for k in 0..5 {
        assert_eq!(a.labels.iter().filter(|&&y| y == k).count(), 20);
    }
    assert_eq!(a.seed, Some(9));
}

#[test]
fn blobs_domain_errors() {
    let mut rng = Rng::new(1);
    assert!(make_blobs(10, 1, 3, 1.0, &mut rng).is_err());
    assert!(make_blobs(3, 4, 3, 1.0, &mut rng).is_err());
    assert!(make_blobs(10, 2, 0, 1.0, &mut rng).is_err());
    assert!(make_blobs(10, 2, 3, -1.0, &mut rng).is_err());
}

#[test]
fn zero_spread_points_sit_on_centers() {
    let ds = make_blobs(40, 4, 6, 0.0, &mut Rng::new(3)).unwrap();
    for i in 4..40 {
        assert_eq!(ds.row(i), ds.row(i % 4));
    }
    let norm: f64 = ds.row(0).iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((norm - CENTER_RADIUS).abs() < 1e-12);

    // nearest-center classification is exact, and its scores as probabilities give 0 error
    let centers: Vec<&[f64]> = (0..4).map(|c| ds.row(c)).collect();
    let mut scores = Vec::new();
    for i in 0..40 {
        for c in &centers {
            let d2: f64 = ds.row(i).iter().zip(*c).map(|(a, b)| (a - b) * (a - b)).sum();
            scores.push(-d2);
        }
    }
    let probs = Tensor::matrix(40, 4, scores).unwrap();
    assert_eq!(topk_error(&probs, &ds.labels, 1).unwrap(), 0.0);
}

#[test]
fn dataset_csv_round_trip() {
    let ds = make_blobs(12, 3, 4, 1.0, &mut Rng::new(77)).unwrap();
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("x0,x1,x2,x3,label\n"));
    let back = Dataset::read_csv(&buf[..], Some(3)).unwrap();
    assert_eq!(back.features, ds.features);
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.seed, None);
    assert!(Dataset::read_csv("x0,label\n1.0,2,3\n".as_bytes(), None).is_err());
    assert!(Dataset::read_csv("x0,label\nfoo,1\n".as_bytes(), None).is_err());
}

#[test]
fn epoch_batches_partition_the_data() {
    let n = 103;
    let batches = epoch_batches(n, 10, &mut Rng::new(4)).unwrap();
    assert_eq!(batches.len(), 11);
    let mut seen: Vec<usize> = batches
        .iter()
        .flat_map(|b| match b {
            Batch::Indices(ix) => ix.clone(),
            Batch::Full => unreachable!(),
        })
        .collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..n).collect::<Vec<_>>());

    let full = epoch_batches(n, n, &mut Rng::new(4)).unwrap();
    assert_eq!(full.len(), 1);
    assert_eq!(full[0].len_in(n), n);

    let mut r1 = Rng::new(8);
    let mut r2 = Rng::new(8);
    let a: Vec<_> = (0..2).map(|_| epoch_batches(50, 7, &mut r1).unwrap()).collect();
    let b: Vec<_> = (0..2).map(|_| epoch_batches(50, 7, &mut r2).unwrap()).collect();
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);

    assert!(epoch_batches(5, 0, &mut r1).is_err());
    assert!(epoch_batches(5, 6, &mut r1).is_err());
}

// Probability rows and expected miss counts come from a brute-force
// Python count that sorts each row by (-p, class index).
const TOPK_ROWS: [[f64; 10]; 8] = [
    [0.62, 0.74, 0.8, 0.94, 0.74, 0.92, 0.03, 0.47, 0.94, 0.65],
    [0.9, 0.11, 0.47, 0.25, 0.54, 0.57, 0.01, 0.22, 0.28, 0.92],
    [0.77, 0.16, 0.8, 0.87, 0.62, 0.13, 0.0, 0.87, 0.21, 0.22],
    [0.98, 0.87, 0.29, 0.96, 0.54, 0.68, 0.2, 0.94, 0.69, 0.97],
    [0.89, 0.3, 0.36, 0.17, 0.15, 0.07, 0.3, 0.6, 0.0, 0.68],
    [0.1; 10],
    [0.75, 0.84, 0.02, 0.79, 0.37, 0.58, 0.01, 0.05, 0.18, 0.96],
    [0.2, 0.76, 0.93, 0.94, 0.34, 0.35, 0.52, 0.78, 0.11, 0.75],
];
const TOPK_LABELS: [usize; 8] = [5, 4, 7, 6, 1, 4, 5, 8];
const TOPK_MISSES: [usize; 10] = [8, 7, 6, 5, 2, 2, 2, 2, 2, 0];

#[test]
fn topk_matches_brute_force_counts() {
    let probs = Tensor::matrix(8, 10, TOPK_ROWS.iter().flatten().copied().collect()).unwrap();
    for k in 1..=10 {
        let e = topk_error(&probs, &TOPK_LABELS, k).unwrap();
        assert_eq!(e, TOPK_MISSES[k - 1] as f64 / 8.0, "k={k}");
    }
}

#[test]
fn topk_simple_cases() {
    let p = Tensor::matrix(1, 3, vec![0.1, 0.7, 0.2]).unwrap();
    assert_eq!(topk_error(&p, &[1], 1).unwrap(), 0.0);
    assert_eq!(topk_error(&p, &[0], 1).unwrap(), 1.0);
    assert_eq!(topk_error(&p, &[0], 2).unwrap(), 1.0);
    assert_eq!(topk_error(&p, &[0], 3).unwrap(), 0.0);
    assert!(topk_error(&p, &[0, 1], 1).is_err());
    assert!(topk_error(&p, &[0], 0).is_err());
    assert!(topk_error(&p, &[0], 4).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn topk_nonincreasing_in_k(vals in prop::collection::vec(0.0f64..1.0, 7 * 6), labels in prop::collection::vec(0usize..6, 7)) {
            let probs = Tensor::matrix(7, 6, vals).unwrap();
            let mut prev = 1.0;
            for k in 1..=6 {
                let e = topk_error(&probs, &labels, k).unwrap();
                prop_assert!(e <= prev);
                prev = e;
            }
            prop_assert_eq!(prev, 0.0);
        }
    }
}
