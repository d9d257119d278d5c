fn main() {
    let g = netdp::graph::gen_hypercube(4).unwrap();
    let w = netdp::gossip::GossipMatrix::hamilton(&g);
    println!("built, computing gap...");
    let t0 = std::time::Instant::now();
    match w.spectral_gap() {
        Ok(gap) => println!("gap={gap} in {:?}", t0.elapsed()),
        Err(e) => println!("err={e} in {:?}", t0.elapsed()),
    }
    let lz = w.lazy();
    let t0 = std::time::Instant::now();
    println!("lazy gap={:?} in {:?}", lz.spectral_gap(), t0.elapsed());
}
