//! Trains the three architectures on a synthetic spec and reports test mAP.
//!
//! `cargo run --release --example desk_experiment -- <spec.toml> [hidden] [epochs] [lr] [W] [N]`

use std::time::Instant;

use multilstm::data::{synth_generate, SynthSpec};
use multilstm::eval::{mean_ap_at_offset, predict_dataset};
use multilstm::model::{ModelKind, ModelSpec, MultiLstmConfig};
use multilstm::numeric::SeededRng;
use multilstm::train::{fit, RmsPropConfig, TrainConfig};

fn main() -> multilstm::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let spec = SynthSpec::from_toml(&std::fs::read_to_string(arg(1, "crates/core/tests/data/desk.toml")).unwrap())?;
    let hidden: usize = arg(2, "32").parse().unwrap();
    let epochs: usize = arg(3, "10").parse().unwrap();
    let lr: f64 = arg(4, "0.003").parse().unwrap();
    let w: usize = arg(5, "5").parse().unwrap();
    let n: usize = arg(6, "8").parse().unwrap();
    let data = synth_generate(&spec, &SeededRng::new(1))?;
    let test_labels = data.test.labels()?;
    for kind in [ModelKind::SingleFrame, ModelKind::Lstm, ModelKind::MultiLstm] {
        let started = Instant::now();
        let model_spec = ModelSpec {
            kind,
            input_dim: spec.feature_dim,
            classes: spec.classes.len(),
            multilstm: MultiLstmConfig { hidden, attention_units: 16, input_window: w, output_window: n, ..MultiLstmConfig::default() },
        };
        let config = TrainConfig {
            epochs,
            seed: 3,
            optimizer: RmsPropConfig { learning_rate: lr, ..RmsPropConfig::default() },
            ..TrainConfig::default()
        };
        let (ck, log) = fit(&model_spec, &data.train, &config)?;
        let preds = predict_dataset(&ck.model, &data.test, 1)?;
        let report = mean_ap_at_offset(&preds, &test_labels, 0)?;
        let per: Vec<String> = report.per_class.iter().map(|a| format!("{:.3}", a.unwrap_or(f64::NAN))).collect();
        println!(
            "{kind:?}: mAP {:.4} [{}] loss {:.4}->{:.4} in {:.1}s",
            report.map,
            per.join(" "),
            log[0],
            log[log.len() - 1],
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
