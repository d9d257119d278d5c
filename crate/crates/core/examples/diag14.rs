use netdp::gossip::GossipMatrix;
use netdp::graph::gen_erdos_renyi;
use netdp::rng::{self, stream};

fn main() {
    let n = 2000;
    let q = (n as f64).ln() / n as f64;
    for trial in 0..10u64 {
        let seed = rng::derive_seed(700, stream::TRIAL, trial);
        let g = gen_erdos_renyi(n, q, rng::derive_seed(seed, stream::GRAPH_GEN, 0)).unwrap();
        let w = GossipMatrix::hamilton(&g);
        let t0 = std::time::Instant::now();
        let lam = w.spectral_gap().unwrap();
        let k = netdp::optim::k_rounds(lam, n, 0.25, 0.0, 32.0, 8).unwrap();
        println!("trial {trial}: lambda={lam:.5} K={k} (eig {:?})", t0.elapsed());
    }
}
