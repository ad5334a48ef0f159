mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psda::vmf::fit_ml;
use psda::{rho, UnitVec, VmfParams};

use common::random_unit;

#[test]
fn density_integrates_to_one_d3() {
    let p = VmfParams::new(UnitVec::new(vec![0.0, 0.6, 0.8]).unwrap(), 2.5).unwrap();
    let xs = VmfParams::uniform(3).sample(1_000_000, 9);
    let vals: Vec<f64> = xs
        .iter()
        .map(|x| p.log_density_rel_uniform(x).unwrap().exp())
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn density_at_mode_d3() {
    // C(k)/C(0) = k / sinh k for d = 3
    let mu = UnitVec::basis(3, 2);
    let p = VmfParams::new(mu.clone(), 1.0).unwrap();
    let want = (1.0 / 1f64.sinh()).ln() + 1.0;
    assert!((p.log_density_rel_uniform(&mu).unwrap() - want).abs() < 1e-14);
    assert_eq!(VmfParams::uniform(3).log_density_rel_uniform(&mu).unwrap(), 0.0);
}

#[test]
fn mean_vector_norm_is_rho() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &k in &[0.0, 0.1, 3.0, 80.0] {
        let p = VmfParams::new(random_unit(12, &mut rng), k).unwrap();
        let m = p.mean_vector();
        let n = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - rho(p.order(), k).unwrap()).abs() < 1e-15);
        assert!(n < 1.0);
    }
    let p = VmfParams::new(UnitVec::basis(3, 0), 1.0).unwrap();
    assert!((p.mean_vector()[0] - (1.0 / 1f64.tanh() - 1.0)).abs() < 1e-14);
}

fn recovery_error(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mu = random_unit(16, &mut rng);
    let p = VmfParams::new(mu.clone(), 20.0).unwrap();
    let fit = fit_ml(&p.sample(n, seed)).unwrap();
    ((fit.kappa() - 20.0).abs() / 20.0, fit.mu().dot(&mu))
}

#[test]
fn fit_recovers_sampler_parameters() {
    let (err_small, _) = recovery_error(1_000, 4);
    let (err_large, align) = recovery_error(100_000, 4);
    assert!(err_large < 0.02, "kappa error {err_large}");
    assert!(align > 0.999, "mu alignment {align}");
    assert!(err_large < err_small, "{err_large} vs {err_small}");
}

#[test]
fn fit_depends_only_on_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = VmfParams::new(random_unit(5, &mut rng), 4.0).unwrap();
    let mut xs = p.sample(50, 8);
    let a = fit_ml(&xs).unwrap();
    xs.shuffle(&mut rng);
    let b = fit_ml(&xs).unwrap();
    assert!((a.kappa() - b.kappa()).abs() <= 1e-12 * a.kappa());

    // Two unit vectors m +- s u with u orthogonal to the mean m have mean m.
    let mut m = vec![0.0; 5];
    for x in &xs {
        for (a, b) in m.iter_mut().zip(x.as_slice()) {
            *a += b / xs.len() as f64;
        }
    }
    let mn = m.iter().map(|x| x * x).sum::<f64>();
    let r = random_unit(5, &mut rng);
    let proj = r.as_slice().iter().zip(&m).map(|(a, b)| a * b).sum::<f64>() / mn;
    let u: Vec<f64> = r.as_slice().iter().zip(&m).map(|(a, b)| a - proj * b).collect();
    let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = (1.0 - mn).sqrt();
    let p1 = UnitVec::new(m.iter().zip(&u).map(|(a, b)| a + s * b / un).collect()).unwrap();
    let p2 = UnitVec::new(m.iter().zip(&u).map(|(a, b)| a - s * b / un).collect()).unwrap();
    let c = fit_ml(&[p1, p2]).unwrap();
    assert!((a.kappa() - c.kappa()).abs() <= 1e-9 * a.kappa());
    assert!(a.mu().dot(c.mu()) > 1.0 - 1e-12);
}

#[test]
fn uniform_sampler_mean_is_small() {
    let xs = VmfParams::uniform(8).sample(100_000, 12);
    let mut m = vec![0.0; 8];
    for x in &xs {
        for (a, b) in m.iter_mut().zip(x.as_slice()) {
            *a += b / xs.len() as f64;
        }
    }
    assert!(m.iter().map(|x| x * x).sum::<f64>().sqrt() < 0.02);
}

proptest! {
    #[test]
    fn samples_are_unit_and_reproducible(dim in 2usize..40, k in 0.0f64..1e4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = VmfParams::new(random_unit(dim, &mut rng), k).unwrap();
        let a = p.sample(20, seed);
        prop_assert_eq!(&a, &p.sample(20, seed));
        for x in &a {
            let n = x.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() <= 1e-6);
        }
    }
}
