use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weighted_gibbs::models::{corrupt_image, GaussianTarget, IsingDenoiseTarget};
use weighted_gibbs::{
    run_chain, step, ChainConfig, Error, GibbsModel, Scheduler, SelectionWeights,
    SystematicScheduler, UniformScheduler, WeightedScheduler,
};

/// Joint table over `d` binary variables; conditionals read straight off the table.
struct TableModel {
    d: usize,
    probs: Vec<f64>,
}

impl TableModel {
    fn code(state: &[u8]) -> usize {
        state
            .iter()
            .enumerate()
            .map(|(i, &b)| (b as usize) << i)
            .sum()
    }
}

impl GibbsModel for TableModel {
    type State = Vec<u8>;

    fn dimension(&self) -> usize {
        self.d
    }

    fn update<R: Rng + ?Sized>(&self, state: &mut Vec<u8>, index: usize, rng: &mut R) {
        let mut s = state.clone();
        s[index] = 0;
        let p0 = self.probs[Self::code(&s)];
        s[index] = 1;
        let p1 = self.probs[Self::code(&s)];
        state[index] = (rng.gen::<f64>() * (p0 + p1) >= p0) as u8;
    }

    fn scalar_summary(&self, state: &Vec<u8>, index: usize) -> f64 {
        state[index] as f64
    }

    fn record(&self, state: &Vec<u8>, out: &mut Vec<f64>) {
        out.push(Self::code(state) as f64);
    }

    fn record_width(&self) -> usize {
        1
    }
}

fn identity_gaussian(d: usize) -> GaussianTarget {
    GaussianTarget::new(DVector::zeros(d), DMatrix::identity(d, d)).unwrap()
}

fn schedulers(d: usize) -> Vec<Box<dyn Scheduler>> {
    vec![
        Box::new(SystematicScheduler::new(d)),
        Box::new(UniformScheduler::new(d)),
        Box::new(WeightedScheduler::new(d, Default::default()).unwrap()),
    ]
}

#[test]
fn one_dimensional_model_always_selects_its_variable() {
    let model = identity_gaussian(1);
    for mut s in schedulers(1) {
        let cfg = ChainConfig::new(10, 3);
        let trace = run_chain(&model, &mut s, &cfg, vec![0.0]).unwrap();
        assert_eq!(trace.selected_indices, vec![0; 10], "{}", s.name());
    }
}

#[test]
fn systematic_order_without_initial_sweeps() {
    let model = identity_gaussian(3);
    let mut s = SystematicScheduler::new(3);
    let cfg = ChainConfig::new(6, 1).with_initial_sweeps(0);
    let trace = run_chain(&model, &mut s, &cfg, vec![0.0; 3]).unwrap();
    assert_eq!(trace.selected_indices, vec![0, 1, 2, 0, 1, 2]);
}

#[test]
fn initial_sweeps_are_sequential() {
    let model = identity_gaussian(4);
    let mut s = UniformScheduler::new(4);
    let cfg = ChainConfig::new(20, 1).with_initial_sweeps(2);
    let trace = run_chain(&model, &mut s, &cfg, vec![0.0; 4]).unwrap();
    assert_eq!(&trace.selected_indices[..8], &[0, 1, 2, 3, 0, 1, 2, 3]);
}

// Under uniform scan on N(0, I) a coordinate is redrawn with probability 1/2 per
// step, so rho_k = 2^-k and the integrated autocorrelation time is
// 1 + 2 * sum 2^-k = 3. Standard error of a coordinate mean over 1e4 steps is
// sqrt(3 / 1e4) ~= 0.0173. Selection frequency has sd sqrt(0.25 / 1e4) = 0.005.
#[test]
fn uniform_scan_on_standard_normal() {
    let model = identity_gaussian(2);
    let mut s = UniformScheduler::new(2);
    let cfg = ChainConfig::new(10_000, 17).with_initial_sweeps(0);
    let trace = run_chain(&model, &mut s, &cfg, vec![0.0; 2]).unwrap();
    let se = (3.0f64 / 1e4).sqrt();
    for j in 0..2 {
        let col = trace.column(j, 0);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() <= 5.0 * se, "coordinate {j}: mean {mean}");
    }
    for f in trace.selection_frequencies(2) {
        assert!((0.45..=0.55).contains(&f), "{f}");
    }
}

#[test]
fn trace_row_count_follows_thinning() {
    let model = identity_gaussian(3);
    let mut s = UniformScheduler::new(3);
    let cfg = ChainConfig::new(100, 1).with_thinning(7).with_burn_in(20);
    let trace = run_chain(&model, &mut s, &cfg, vec![0.0; 3]).unwrap();
    assert_eq!(trace.rows(), 100 / 7);
    assert_eq!(trace.samples.len(), 14 * 3);
    assert_eq!(trace.recorded_steps[0], 7);
    assert_eq!(trace.burn_in_rows, 2);
    assert_eq!(trace.selected_indices.len(), 100);
    assert!(trace.selected_indices.iter().all(|&i| i < 3));
}

#[test]
fn reproducible_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let truth: Vec<i8> = (0..64)
        .map(|i| if (i / 8 + i % 8) % 3 == 0 { 1 } else { -1 })
        .collect();
    let y = corrupt_image(&truth, 0.8, &mut rng).unwrap();
    let model = IsingDenoiseTarget::new(8, 8, y, 1.0, 0.8).unwrap();
    let init = model.sign_of_observed();
    let cfg = ChainConfig::from_sweeps(64, 30, 5, 1, 1234);
    for make in [0, 1, 2] {
        let run = || {
            let mut s = schedulers(64).remove(make);
            run_chain(&model, &mut s, &cfg, init.clone()).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        let bytes = |t: &weighted_gibbs::ChainTrace| {
            t.samples
                .iter()
                .flat_map(|v| v.to_le_bytes())
                .collect::<Vec<u8>>()
        };
        assert_eq!(bytes(&a), bytes(&b));
    }
}

#[test]
fn model_noise_stream_is_independent_of_scheduler() {
    // With a 1-variable model every scheduler picks the same index, so the
    // chains must coincide exactly even though the weighted and uniform
    // schedulers consume scheduler-stream randomness and systematic does not.
    let model = identity_gaussian(1);
    let cfg = ChainConfig::new(500, 77);
    let traces: Vec<_> = schedulers(1)
        .into_iter()
        .map(|mut s| run_chain(&model, &mut s, &cfg, vec![0.0]).unwrap().samples)
        .collect();
    assert_eq!(traces[0], traces[1]);
    assert_eq!(traces[1], traces[2]);
}

#[test]
fn at_most_one_coordinate_changes_per_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth: Vec<i8> = (0..36).map(|i| if i % 5 < 2 { 1 } else { -1 }).collect();
    let y = corrupt_image(&truth, 1.0, &mut rng).unwrap();
    let model = IsingDenoiseTarget::new(6, 6, y, 1.0, 1.0).unwrap();
    let mut s = WeightedScheduler::new(36, Default::default()).unwrap();
    let cfg = ChainConfig::new(5_000, 8);
    let init = model.sign_of_observed();
    let trace = run_chain(&model, &mut s, &cfg, init.clone()).unwrap();
    let mut prev: Vec<f64> = init.iter().map(|&v| v as f64).collect();
    for r in 0..trace.rows() {
        let row = trace.row(r);
        let changed: Vec<usize> = (0..36).filter(|&j| row[j] != prev[j]).collect();
        assert!(changed.len() <= 1);
        if let Some(&j) = changed.first() {
            assert_eq!(j, trace.selected_indices[r] as usize);
        }
        prev = row.to_vec();
    }
}

#[test]
fn step_touches_only_its_coordinate() {
    let model = GaussianTarget::new(
        DVector::zeros(3),
        DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 3.0]),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut state = vec![0.3, -1.1, 2.4];
    for i in [0, 2, 1, 1, 0] {
        let before = state.clone();
        step(&model, &mut state, i, &mut rng).unwrap();
        for j in (0..3).filter(|&j| j != i) {
            assert_eq!(before[j].to_bits(), state[j].to_bits());
        }
    }
    assert!(matches!(
        step(&model, &mut state, 3, &mut rng),
        Err(Error::IndexOutOfRange {
            index: 3,
            dimension: 3
        })
    ));
}

#[test]
fn rejects_bad_inputs() {
    let model = identity_gaussian(3);
    let mut s = UniformScheduler::new(3);
    assert!(matches!(
        run_chain(&model, &mut s, &ChainConfig::new(10, 1), vec![0.0; 2]),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(matches!(
        run_chain(&model, &mut s, &ChainConfig::new(0, 1), vec![0.0; 3]),
        Err(Error::InvalidConfig(_))
    ));
    assert!(run_chain(
        &model,
        &mut s,
        &ChainConfig::new(10, 1).with_burn_in(10),
        vec![0.0; 3]
    )
    .is_err());
    let mut wrong = UniformScheduler::new(4);
    assert!(run_chain(&model, &mut wrong, &ChainConfig::new(10, 1), vec![0.0; 3]).is_err());
}

/// Upper 0.1% point of chi-square with 3 degrees of freedom.
const CHI2_3DF_999: f64 = 16.266;

// Correlated 2x2 table sampled under fixed non-uniform weights. Recording every
// 10th of 1e5 steps keeps the 1e4 recorded states close to independent.
#[test]
fn fixed_nonuniform_weights_leave_target_invariant() {
    let raw = [3.0, 1.0, 1.5, 4.5];
    let z: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|r| r / z).collect();
    let model = TableModel {
        d: 2,
        probs: probs.clone(),
    };
    for q in [[0.8, 0.2], [0.3, 0.7]] {
        let mut s = UniformScheduler::with_weights(SelectionWeights::new(q.to_vec()).unwrap());
        let cfg = ChainConfig::new(100_000, 31)
            .with_thinning(10)
            .with_initial_sweeps(0);
        let trace = run_chain(&model, &mut s, &cfg, vec![0, 0]).unwrap();
        let mut counts = [0.0; 4];
        for v in &trace.samples {
            counts[*v as usize] += 1.0;
        }
        let n = trace.rows() as f64;
        let chi2: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(c, p)| (c - n * p).powi(2) / (n * p))
            .sum();
        assert!(
            chi2 < CHI2_3DF_999,
            "q = {q:?}: chi2 = {chi2}, counts {counts:?}"
        );
    }
}
