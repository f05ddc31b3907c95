use multilstm::data::{audit_rules, synth_generate, Dataset, SynthSpec};
use multilstm::eval::{mean_ap_at_offset, predict_dataset};
use multilstm::model::{consolidate_outputs, stream_head_scores, AnyModel, ModelKind, ModelSpec, MultiLstmConfig};
use multilstm::numeric::{sigmoid_matrix, Matrix, SeededRng};
use multilstm::train::{fit, Checkpoint, TrainConfig};

const SPEC: &str = r#"
feature_dim = 6
noise = 0.5
frames_per_video = 70
train_videos = 5
test_videos = 3

[[classes]]
name = "walk"
spontaneous = { count = [1, 3], duration = [3, 9] }

[[classes]]
name = "stop"
gain = 0.0

[[classes]]
name = "wave"
spontaneous = { count = [1, 2], duration = [2, 5] }

[[classes]]
name = "greet"

[[rules]]
kind = "sequence"
trigger = "walk"
consequence = "stop"
lag = [2, 4]
extra_duration = [0, 2]

[[rules]]
kind = "hierarchy"
parent = "greet"
children = ["wave", "stop"]
"#;

fn spec(kind: ModelKind) -> ModelSpec {
    ModelSpec {
        kind,
        input_dim: 6,
        classes: 4,
        multilstm: MultiLstmConfig { hidden: 7, attention_units: 3, input_window: 4, output_window: 3, ..MultiLstmConfig::default() },
    }
}

#[test]
fn generated_data_survives_a_disk_round_trip() {
    let s = SynthSpec::from_toml(SPEC).unwrap();
    let data = synth_generate(&s, &SeededRng::new(21)).unwrap();
    assert!(audit_rules(&s, &data.train).unwrap().is_empty());
    let dir = tempfile::tempdir().unwrap();
    data.train.save(dir.path()).unwrap();
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back, data.train);
}

#[test]
fn streamed_predictions_match_whole_sequence_for_every_model() {
    let mut rng = SeededRng::new(5);
    let xs = Matrix::random_uniform(70, 6, 1.0, &mut rng);
    for kind in [ModelKind::SingleFrame, ModelKind::Lstm, ModelKind::MultiLstm] {
        let model = AnyModel::init(&spec(kind), &mut rng).unwrap();
        let full = model.predict(&xs).unwrap();
        for chunk in [1, 7, 32, 70] {
            let heads = match &model {
                AnyModel::SingleFrame(m) => stream_head_scores(m, &xs, chunk),
                AnyModel::Lstm(m) => stream_head_scores(m, &xs, chunk),
                AnyModel::MultiLstm(m) => stream_head_scores(m, &xs, chunk),
            }
            .unwrap();
            let probs: Vec<Matrix> = heads.iter().map(sigmoid_matrix).collect();
            assert_eq!(consolidate_outputs(&probs).unwrap(), full, "{kind:?} chunk {chunk}");
        }
    }
}

#[test]
fn no_state_leaks_between_videos() {
    let s = SynthSpec::from_toml(SPEC).unwrap();
    let data = synth_generate(&s, &SeededRng::new(8)).unwrap();
    let model = AnyModel::init(&spec(ModelKind::MultiLstm), &mut SeededRng::new(2)).unwrap();
    let before = predict_dataset(&model, &data.test, 1).unwrap();
    let mut altered = data.test.clone();
    let f = altered.videos[0].features.as_mut().unwrap();
    f.data_mut().iter_mut().for_each(|v| *v = -*v + 0.5);
    let after = predict_dataset(&model, &altered, 1).unwrap();
    assert_ne!(before[0], after[0]);
    assert_eq!(before[1..], after[1..]);
    // worker count does not change anything
    assert_eq!(predict_dataset(&model, &data.test, 3).unwrap(), before);
}

#[test]
fn training_is_reproducible_and_checkpoints_reload() {
    let s = SynthSpec::from_toml(SPEC).unwrap();
    let data = synth_generate(&s, &SeededRng::new(13)).unwrap();
    let config = TrainConfig { epochs: 3, minibatch: 16, seed: 11, ..TrainConfig::default() };
    let zero = TrainConfig { epochs: 0, ..config.clone() };
    let (untrained, log0) = fit(&spec(ModelKind::MultiLstm), &data.train, &zero).unwrap();
    let init = AnyModel::init(&spec(ModelKind::MultiLstm), &mut SeededRng::new(11)).unwrap();
    assert_eq!(untrained.model, init);
    assert_eq!(log0.len(), 1);

    let (a, log_a) = fit(&spec(ModelKind::MultiLstm), &data.train, &config).unwrap();
    let (b, log_b) = fit(&spec(ModelKind::MultiLstm), &data.train, &config).unwrap();
    assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.len(), 4);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    a.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let labels = data.test.labels().unwrap();
    let p1 = predict_dataset(&a.model, &data.test, 1).unwrap();
    let p2 = predict_dataset(&loaded.model, &data.test, 1).unwrap();
    assert_eq!(p1, p2);
    let r = mean_ap_at_offset(&p1, &labels, 0).unwrap();
    assert!((0.0..=1.0).contains(&r.map));
}
