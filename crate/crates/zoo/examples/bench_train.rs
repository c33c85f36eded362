use bdf_zoo::dataset::{synth_shapes, Split};
use bdf_model::train::{train_classifier, TrainConfig};
use bdf_model::SmallCnn;
use std::time::Instant;

fn main() {
    let train = synth_shapes(1024, 32, 32, Split::Train, 1);
    let mut model = SmallCnn::<f32>::new(32, 32, 3, 10, 1);
    let cfg = TrainConfig { epochs: 1, batch_size: 64, lr: 1e-3, seed: 1 };
    let t0 = Instant::now();
    train_classifier(&mut model, &train.images, &train.labels, &cfg).unwrap();
    let dt = t0.elapsed();
    println!("1 epoch / 1024 images: {:.2?} ({:.1} img/s)", dt, 1024.0 / dt.as_secs_f64());
}
