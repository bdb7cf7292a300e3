use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use riverine_core::eigen::*;
use riverine_core::operator::assemble_samples;
use riverine_core::profiles::*;
use riverine_core::steady::find_qstar;
use riverine_core::stability::ThetaCache;
use riverine_core::*;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut worst4096 = 0.0f64;
    let mut worst8192 = 0.0f64;
    let mut worst_dense = 0.0f64;
    for _ in 0..50 {
        let d = 10f64.powf(rng.gen_range(-0.52..0.48));
        let q = rng.gen_range(0.0..1.5);
        let a0 = rng.gen_range(0.5..2.5);
        let a1 = rng.gen_range(-1.0..1.0);
        let a2 = rng.gen_range(-0.8..0.8);
        let a3 = rng.gen_range(-0.5..0.5);
        let h = move |x: f64| a0 + a1 * x + a2 * (std::f64::consts::PI * x).cos() + a3 * (2.0 * x).sin();
        {
            let g = Grid::new(128).unwrap();
            let hv: Vec<f64> = g.nodes().iter().map(|&x| h(x)).collect();
            let op = assemble_samples(d, q, &hv, &g).unwrap();
            let pair = principal_eigen(&op).unwrap();
            let dense = dense_sigma1(&op);
            let rel = (pair.sigma1 - dense).abs() / dense.abs().max(1.0);
            worst_dense = worst_dense.max(rel);
        }
        for (n, worst) in [(4096usize, &mut worst4096), (8192, &mut worst8192)] {
            let g = Grid::new(n).unwrap();
            let hv: Vec<f64> = g.nodes().iter().map(|&x| h(x)).collect();
            let op = assemble_samples(d, q, &hv, &g).unwrap();
            let pair = principal_eigen(&op).unwrap();
            let rq = rayleigh_quotient(&pair.phi1, &op).unwrap();
            *worst = worst.max((rq - pair.sigma1).abs());
        }
    }
    println!("worst dense rel (n=128): {worst_dense:.3e}");
    println!("worst |RQ - sigma| n=4096: {worst4096:.3e}  n=8192: {worst8192:.3e}");

    // invasion candidates
    let (r1, k1) = p1();
    let (r2, k2) = p2();
    let r4 = parse_profile("exp(3*x)").unwrap();
    let k4 = parse_profile("1 + 0.9*x").unwrap();
    let g = Grid::new(256).unwrap();
    let cases: Vec<(&str, &Profile, &Profile, f64, f64, f64, f64)> = vec![
        ("I a", &r1, &k1, 1.0, 1.0, 1.0, 0.05),
        ("I b", &r1, &k1, 1.0, 1.0, 1.0, 0.82),
        ("I c", &r1, &k1, 1.0, 0.3, 0.5, 0.10),
        ("I d", &r1, &k1, 1.0, 3.0, 2.0, 0.90),
        ("II a", &r4, &k4, 1.53, 0.02, 0.05, 0.10),
        ("II b", &r4, &k4, 1.53, 1.0, 0.2, 0.05),
        ("II c", &r4, &k4, 1.53, 0.02, 0.3, 0.50),
        ("III a", &r1, &k1, 1.878, 0.1, 0.5, 0.05),
        ("IV a", &r2, &k2, 2.1, 1.0, 0.5, 0.10),
        ("IV b", &r2, &k2, 2.1, 0.05, 0.02, 0.05),
        ("IV c", &r2, &k2, 2.1, 0.05, 1.0, 0.30),
        ("V a", &r2, &k2, 2.6, 1.0, 1.0, 0.20),
        ("V b", &r2, &k2, 2.6, 0.1, 0.3, 0.60),
        ("I e", &r1, &k1, 1.0, 0.5, 1.5, 0.30),
    ];
    for (name, r, k, gamma, mu, nu, frac) in cases {
        let qstar = find_qstar(mu, r, &g).unwrap().qstar;
        let mut cache = ThetaCache::new(mu, r, k, &g, qstar).unwrap();
        let q = frac * qstar;
        let s = cache.invasion_sigma(nu, q, 1.0, gamma).unwrap();
        println!("{name}: mu={mu} nu={nu} q={q:.4} sigma={s:+.5}");
    }
}
