use grasp_core::gqcnn::{init_params, loss_and_gradients, predict, Batch, NetworkParams, NetworkSpec};
use std::time::Instant;

fn main() {
    for spec in std::env::args().skip(1).map(|n| NetworkSpec::by_name(&n).unwrap()) {
        let p: NetworkParams<f32> = init_params(&spec, 1).unwrap();
        let n = 128;
        let b = Batch {
            images: (0..n * 1024).map(|i| ((i % 97) as f32) / 97.0).collect(),
            depths: vec![0.1; n],
            labels: (0..n).map(|i| i % 3 == 0).collect(),
        };
        let t = Instant::now();
        let (l, _) = loss_and_gradients(&p, &b).unwrap();
        let train = t.elapsed().as_secs_f64();
        let t = Instant::now();
        predict(&p, &b.images, &b.depths).unwrap();
        println!("{}: loss {l:.3}, train batch {train:.2}s, predict batch {:.2}s", spec.name, t.elapsed().as_secs_f64());
    }
}
