use cnerkit::corpus::build_vocab;
use cnerkit::crf::{brute_force, log_partition, sequence_score, viterbi, DecodeConstraint};
use cnerkit::numcore::{Tape, Tensor};
use cnerkit::synthetic::Synthesizer;
use cnerkit::tagset::first_bio_violation;
use cnerkit::trainer::Example;
use cnerkit::{Model, NerAlphabet, TrainingConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tensor(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::new(rows, cols, data).unwrap()
}

fn crf_instance() -> impl Strategy<Value = (Tensor, Tensor, Vec<f64>)> {
    (1usize..=5, 1usize..=4).prop_flat_map(|(n, l)| {
        (
            prop::collection::vec(-3.0..3.0f64, n * l),
            prop::collection::vec(-3.0..3.0f64, l * l),
            prop::collection::vec(-3.0..3.0f64, l),
        )
            .prop_map(move |(e, t, s)| (tensor(n, l, e), tensor(l, l, t), s))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dynamic_programs_match_enumeration((e, t, s) in crf_instance()) {
        let bf = brute_force(&e, &t, &s).unwrap();
        prop_assert!((log_partition(&e, &t, &s) - bf.log_partition).abs() < 1e-9);
        let (path, score) = viterbi(&e, &t, &s, None);
        prop_assert_eq!(&path, &bf.best);
        prop_assert!((score - sequence_score(&e, &t, &s, &path).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn log_partition_bounds_every_path((e, t, s) in crf_instance()) {
        let z = log_partition(&e, &t, &s);
        let (path, _) = viterbi(&e, &t, &s, None);
        prop_assert!(sequence_score(&e, &t, &s, &path).unwrap() <= z + 1e-12);
    }

    #[test]
    fn constrained_decoding_is_well_formed(data in prop::collection::vec(-3.0..3.0f64, 6 * 5), trans in prop::collection::vec(-3.0..3.0f64, 25)) {
        let alphabet = NerAlphabet::new(["PER", "ORG"]);
        let constraint = DecodeConstraint {
            allowed: alphabet.transition_mask(),
            allowed_start: alphabet.start_mask(),
        };
        let (path, _) = viterbi(&tensor(6, 5, data), &tensor(5, 5, trans), &[0.0; 5], Some(&constraint));
        let labels: Vec<_> = path.iter().map(|&i| alphabet.label(i).unwrap().clone()).collect();
        prop_assert_eq!(first_bio_violation(&labels), None);
    }

    #[test]
    fn joint_loss_is_affine_in_lambda(seed in 0u64..1000) {
        let data = Synthesizer::new(2).unwrap().generate(3, 0.0, true, seed).unwrap();
        let alphabet = NerAlphabet::new(data.entity_types.iter().cloned());
        let config = TrainingConfig { embed_dim: 4, filters: 4, hidden: 3, seed, ..TrainingConfig::default() };
        let mut model = Model::new(config, build_vocab(&data, 1), alphabet, None).unwrap();
        let ex: Vec<Example> = data.sentences().map(|l| model.example(l).unwrap()).collect();
        let batch: Vec<&Example> = ex.iter().collect();
        let mut at = |lambda: f64| {
            model.config.lambda = lambda;
            let mut tape = Tape::new();
            let v = model.joint_loss(&mut tape, &batch, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            tape.scalar(v).unwrap()
        };
        let (a, mid, b) = (at(0.0), at(0.4), at(0.9));
        // line through λ = 0 and λ = 0.9
        let cws = (b - 0.1 * a) / 0.9;
        prop_assert!((mid - (0.6 * a + 0.4 * cws)).abs() < 1e-8 * (1.0 + a.abs() + cws.abs()));
    }
}
