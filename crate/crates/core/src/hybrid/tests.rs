use ndarray::Array2;

use super::*;
use crate::benchmarks::GaussianMixtureTask;
use crate::estimators::{CriticConfig, CriticKind};
use crate::proposals::{CondGaussian, MarginalReference, PqClassifier};
use crate::quantization::Quantizer;
use crate::rng::rng_from_seed;

fn small_critic() -> CriticConfig {
    CriticConfig {
        kind: CriticKind::Separable,
        hidden: vec![16],
        embedding_dim: 4,
    }
}

fn mixture_data(n: usize, seed: u64) -> SampleBatch {
    GaussianMixtureTask {
        n_stacks: 2,
        ..Default::default()
    }
    .sample(n, &mut rng_from_seed(seed))
}

fn proposals(data: &SampleBatch) -> Vec<Proposal> {
    let quantizer = Quantizer::fit_sign(data.x.view());
    let n_codes = quantizer.n_codes();
    vec![
        Proposal::MarginalProduct,
        Proposal::CondGaussian {
            model: CondGaussian::new(data.x_dim(), data.y_dim(), &[16], 5),
            reference: MarginalReference::Entropy(2.5),
        },
        Proposal::Pq {
            quantizer,
            classifier: PqClassifier::new(data.y_dim(), n_codes, 6),
        },
    ]
}

fn hybrid(proposal: Proposal, critic: Critic, kind: EstimatorKind, b: usize) -> HybridEstimator {
    HybridEstimator::new(proposal, critic, EstimatorConfig::new(kind), b, None, 1e-3)
}

#[test]
fn constant_critic_reports_the_proposal_estimate() {
    let data = mixture_data(500, 1);
    for proposal in proposals(&data) {
        for kind in EstimatorKind::ALL {
            // equal scores cancel exactly only where a shift leaves the bound unchanged
            let k = if kind.shift_invariant() { 1.5 } else { 0.0 };
            for critic_kind in [CriticKind::Joint, CriticKind::Separable] {
                let config = CriticConfig {
                    kind: critic_kind,
                    ..small_critic()
                };
                let critic = Critic::constant(&config, 2, 2, k);
                let set = TrainingSet::new(data.clone(), &proposal).unwrap();
                let mut est = hybrid(proposal.clone(), critic, kind, 16).with_learning_rates(0.0, 1e-3);
                let mut rng = rng_from_seed(2);
                for step in 1..=5 {
                    let before = est.clone();
                    let mut probe = rng.clone();
                    let batch = before.draw_batch(&set, &mut probe).unwrap();
                    let out = est.hybrid_step(&set, step, &mut rng).unwrap();
                    assert_eq!(out.estimate.discriminative_part, 0.0, "{kind} {}", proposal.kind());
                    assert_eq!(out.estimate.total, before.proposal().generative_part(&batch));
                }
            }
        }
    }
}

#[test]
fn single_code_contributes_nothing() {
    let data = mixture_data(300, 3);
    let quantizer = Quantizer::fit_kmeans(data.x.view(), 1, None, &mut rng_from_seed(0)).unwrap();
    assert_eq!(quantizer.code_entropy(), 0.0);
    let proposal = Proposal::Pq {
        quantizer,
        classifier: PqClassifier::new(2, 1, 0),
    };
    let set = TrainingSet::new(data, &proposal).unwrap();
    let critic = Critic::new(&small_critic(), 2, 2, 4);
    let mut est = hybrid(proposal, critic, EstimatorKind::Smile, 16);
    let mut rng = rng_from_seed(5);
    for step in 1..=10 {
        let e = est.hybrid_step(&set, step, &mut rng).unwrap().estimate;
        assert_eq!(e.generative_part, 0.0);
        assert_eq!(e.total, e.discriminative_part);
    }
}

#[test]
fn critic_update_ignores_the_proposal() {
    let data = mixture_data(400, 7);
    let quantizer = Quantizer::fit_sign(data.x.view());
    let critic = Critic::new(&small_critic(), 2, 2, 8);
    let run = |classifier_seed: u64| {
        let proposal = Proposal::Pq {
            quantizer: quantizer.clone(),
            classifier: PqClassifier::new(2, quantizer.n_codes(), classifier_seed),
        };
        let set = TrainingSet::new(data.clone(), &proposal).unwrap();
        let mut est = hybrid(proposal, critic.clone(), EstimatorKind::Nwj, 16);
        est.hybrid_step(&set, 1, &mut rng_from_seed(9)).unwrap();
        est
    };
    let (a, b) = (run(1), run(2));
    assert_ne!(a.proposal().parameters(), b.proposal().parameters());
    assert_eq!(a.critic().params(), b.critic().params());
    assert_ne!(a.critic().params(), critic.params());
}

#[test]
fn proposal_update_ignores_the_critic() {
    let data = mixture_data(400, 7);
    for proposal in proposals(&data).into_iter().skip(1) {
        let set = TrainingSet::new(data.clone(), &proposal).unwrap();
        let run = |critic_seed: u64| {
            let critic = Critic::new(&small_critic(), 2, 2, critic_seed);
            let mut est = hybrid(proposal.clone(), critic, EstimatorKind::Mine, 16);
            est.hybrid_step(&set, 1, &mut rng_from_seed(10)).unwrap();
            est
        };
        let (a, b) = (run(1), run(2));
        assert_ne!(a.critic().params(), b.critic().params());
        assert_eq!(a.proposal().parameters(), b.proposal().parameters());
        assert_ne!(a.proposal().parameters(), proposal.parameters());
    }
}

#[test]
fn every_step_decomposes_and_training_is_deterministic() {
    let data = mixture_data(600, 11);
    let config = FitConfig {
        iterations: 60,
        curve_every: 20,
    };
    for proposal in proposals(&data) {
        let set = TrainingSet::new(data.clone(), &proposal).unwrap();
        let fit = || {
            let critic = Critic::new(&small_critic(), 2, 2, 12);
            let mut est = hybrid(proposal.clone(), critic, EstimatorKind::Infonce, 32);
            let mut totals = Vec::new();
            let report = est
                .two_step_fit(&set, &config, &mut rng_from_seed(13), |_, o| {
                    let e = o.estimate;
                    assert_eq!(e.total, e.generative_part + e.discriminative_part);
                    totals.push(e.total);
                })
                .unwrap();
            (report, totals)
        };
        let (a, totals) = fit();
        assert_eq!(totals.len(), 60);
        assert_eq!(a.curve.iter().map(|r| r.step).collect::<Vec<_>>(), vec![20, 40, 60]);
        assert_eq!(a, fit().0);
    }
}

#[test]
fn code_draw_frequencies_match_the_empirical_law() {
    let codes: Vec<usize> = (0..1000).map(|r| [0, 0, 1, 2, 2, 2, 3][r % 7]).collect();
    let data = SampleBatch::new(Array2::zeros((1000, 1)), Array2::zeros((1000, 1))).with_codes(codes);
    let index = CodeIndex::from_batch(&data, 4);
    let probs = index.draw_probabilities();
    let mut counts = [0usize; 4];
    let mut rng = rng_from_seed(17);
    let n = 100_000;
    for _ in 0..n {
        counts[index.draw_code(&mut rng).unwrap()] += 1;
    }
    for c in 0..4 {
        let se = (probs[c] * (1.0 - probs[c]) / n as f64).sqrt();
        assert!((counts[c] as f64 / n as f64 - probs[c]).abs() < 3.0 * se, "code {c}");
    }
}

#[test]
fn frozen_evaluation_is_repeatable() {
    let data = mixture_data(500, 19);
    let proposal = proposals(&data).pop().unwrap();
    let set = TrainingSet::new(data, &proposal).unwrap();
    let est = hybrid(proposal, Critic::new(&small_critic(), 2, 2, 1), EstimatorKind::Smile, 16);
    let a = est.evaluate_frozen(&set, 32, 4).unwrap();
    assert_eq!(a.len(), 32);
    assert_eq!(a, est.evaluate_frozen(&set, 32, 4).unwrap());
    assert_ne!(a, est.evaluate_frozen(&set, 32, 5).unwrap());
}

#[test]
fn oversized_negative_count_resamples() {
    let data = mixture_data(100, 2);
    let set = TrainingSet::new(data, &Proposal::MarginalProduct).unwrap();
    let critic = Critic::new(&small_critic(), 2, 2, 1);
    let mut est = HybridEstimator::new(Proposal::MarginalProduct, critic, EstimatorConfig::default(), 8, Some(20), 1e-3);
    let out = est.hybrid_step(&set, 1, &mut rng_from_seed(0)).unwrap();
    assert_eq!(out.estimate.n_proposal, 20);
}

#[test]
fn non_finite_scores_abort_with_diagnostics() {
    let data = mixture_data(100, 2);
    let set = TrainingSet::new(data, &Proposal::MarginalProduct).unwrap();
    let critic = Critic::constant(&small_critic(), 2, 2, f64::NAN);
    let mut est = hybrid(Proposal::MarginalProduct, critic, EstimatorKind::Nwj, 8);
    match est.hybrid_step(&set, 42, &mut rng_from_seed(0)) {
        Err(Error::NonFinite { step, component, last_scores }) => {
            assert_eq!((step, component), (42, "critic"));
            assert_eq!(last_scores.len(), 8);
        }
        other => panic!("expected an abort, got {other:?}"),
    }
}

#[test]
fn curve_csv_has_the_documented_columns() {
    let rows = vec![CurveRow {
        step: 100,
        estimator: EstimatorKind::NwjInfonce,
        proposal: ProposalKind::Pq,
        generative_part: 0.5,
        discriminative_part: 0.25,
        total: 0.75,
    }];
    let mut out = Vec::new();
    write_curve(&mut out, &rows).unwrap();
    assert_eq!(
        String::from_utf8(out).unwrap(),
        "step,estimator,proposal,generative_part,discriminative_part,total\n100,nwj-infonce,pq,0.5,0.25,0.75\n"
    );
}

#[test]
fn learns_zero_information_for_independent_variables() {
    let mut rng = rng_from_seed(23);
    let x = Array2::from_shape_simple_fn((20_000, 1), || rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
    let y = Array2::from_shape_simple_fn((20_000, 1), || rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
    let set = TrainingSet::new(SampleBatch::new(x, y), &Proposal::MarginalProduct).unwrap();
    for kind in [EstimatorKind::Infonce, EstimatorKind::Smile] {
        let critic = Critic::new(&CriticConfig { hidden: vec![64], ..small_critic() }, 1, 1, 3);
        let mut est = HybridEstimator::new(Proposal::MarginalProduct, critic, EstimatorConfig::new(kind), 64, None, 5e-4);
        let config = FitConfig {
            iterations: 5_000,
            curve_every: 0,
        };
        est.two_step_fit(&set, &config, &mut rng_from_seed(24), |_, _| {}).unwrap();
        let evals = est.evaluate_frozen(&set, 128, 25).unwrap();
        let mean = evals.iter().map(|e| e.total).sum::<f64>() / evals.len() as f64;
        assert!(mean.abs() < 0.05, "{kind}: {mean}");
    }
}
