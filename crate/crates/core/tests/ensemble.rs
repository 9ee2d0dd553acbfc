use ehcs::container::{ensemble_container, ensemble_from_container, instance_container, instance_from_container, Container};
use ehcs::ensemble::*;
use ehcs::rng::{stream_from_seed, Role, SeedNode};
use ehcs::stochastic::TruncatedGaussianParams;
use ehcs::{CMatrix, Complex64};

fn tg_config(n: usize, k: usize, p: f64) -> NetworkConfig {
    let tg = TruncatedGaussianParams::new(0.2, 0.1).unwrap();
    NetworkConfig::new(n, k, p, 0.0, Basis::Dft, PowerModel::Stochastic(tg)).unwrap()
}

fn max_dev_from_identity(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let g = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[test]
fn bases_are_unitary() {
    for basis in [Basis::Dft, Basis::Dct, Basis::Identity] {
        for n in [1, 4, 8, 17] {
            let psi = unitary_basis(n, &basis).unwrap();
            assert!(max_dev_from_identity(&psi) < 1e-12, "{basis} n={n}");
        }
    }
    let psi = unitary_basis(8, &Basis::Dft).unwrap();
    for i in 0..8 {
        assert!((psi[(i, 0)].norm() - 1.0 / 8f64.sqrt()).abs() < 1e-15);
    }
    assert!("wavelet".parse::<Basis>().is_err());
}

#[test]
fn sigma_normalization() {
    let mut rng = stream_from_seed(201);
    let config = tg_config(500, 5, 0.8);
    let pattern = build_power_pattern(&config, &mut rng).unwrap();
    let sigma = build_sigma(&pattern, &unitary_basis(500, &Basis::Dft).unwrap()).unwrap();
    assert!((sigma.norm_squared() / 500.0 - 1.0).abs() < 1e-10);

    let homog = PowerPattern::new(vec![0.3; 12], 0.0).unwrap();
    for basis in [Basis::Dft, Basis::Dct] {
        let s = build_sigma(&homog, &unitary_basis(12, &basis).unwrap()).unwrap();
        assert!(max_dev_from_identity(&s) < 1e-10);
    }

    let two = PowerPattern::new(vec![2.0, 0.0], 0.0).unwrap();
    let s = build_sigma(&two, &unitary_basis(2, &Basis::Identity).unwrap()).unwrap();
    assert!((s[(0, 0)].re - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(s[(1, 1)], Complex64::new(0.0, 0.0));
}

#[test]
fn stochastic_pattern_average_power() {
    let tg = TruncatedGaussianParams::new(0.2, 0.1).unwrap();
    let config = tg_config(500, 5, 0.8);
    let pattern = build_power_pattern(&config, &mut stream_from_seed(202)).unwrap();
    let se = (tg.variance() / 500.0).sqrt();
    assert!((pattern.p_ave - tg.mean()).abs() < 3.0 * se);

    let mut p = pattern.clone();
    p.set_sigma2(p.p_ave / 10f64.powf(2.5));
    assert!((p.snr_db() - 25.0).abs() < 1e-12);
}

#[test]
fn explicit_power_model() {
    let n = 10;
    let model = PowerModel::Explicit { b: vec![0.5; n], nu: vec![2.0; n], energy: vec![1.0; n] };
    let config = NetworkConfig::new(n, 2, 0.8, 0.0, Basis::Dft, model).unwrap();
    let pattern = build_power_pattern(&config, &mut stream_from_seed(0)).unwrap();
    assert!(pattern.gamma.iter().all(|g| (*g - 0.8 * 0.5 * 4.0).abs() < 1e-15));
    assert!(pattern.is_homogeneous());

    let model = PowerModel::Explicit { b: vec![2.0; n], nu: vec![1.0; n], energy: vec![1.0; n] };
    assert!(matches!(
        NetworkConfig::new(n, 2, 0.8, 0.0, Basis::Dft, model),
        Err(ehcs::Error::EnergyConstraint { .. })
    ));
}

#[test]
fn z_tilde_statistics() {
    let mut rng = stream_from_seed(203);
    let (m, n) = (100, 500);
    let z = sample_z_tilde(m, n, 0.8, &mut rng).unwrap();
    let zeros = z.iter().filter(|v| **v == Complex64::new(0.0, 0.0)).count() as f64 / (m * n) as f64;
    assert!((zeros - 0.2).abs() < 0.01, "zero fraction {zeros}");

    let dense = sample_z_tilde(m, n, 1.0, &mut rng).unwrap();
    assert_eq!(dense.iter().filter(|v| **v == Complex64::new(0.0, 0.0)).count(), 0);

    // Rows of sqrt(m) Z are isotropic: E ||row||^2 = n.
    let norms: Vec<f64> = (0..m).map(|i| m as f64 * z.row(i).norm_squared()).collect();
    let mean = norms.iter().sum::<f64>() / m as f64;
    let var = norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    assert!((mean - n as f64).abs() < 3.0 * (var / m as f64).sqrt(), "mean row norm {mean}");
}

#[test]
fn physical_factorization_matches_direct() {
    let config = tg_config(64, 3, 0.8);
    let node = SeedNode::root(7);
    let pattern = build_power_pattern(&config, &mut node.stream(Role::Pattern)).unwrap();
    let m = 40;
    let direct = ensemble_from_pattern(&config, pattern.clone(), m, &mut node.stream(Role::Channel)).unwrap();
    let channel = build_physical_channel(&config, &pattern, m, &mut node.stream(Role::Channel)).unwrap();
    let via = ensemble_from_physical(&config, pattern, &channel).unwrap();
    assert!((&direct.a_mat - &via.a_mat).norm() < 1e-10 * direct.a_mat.norm());
    assert!((direct.physical_z() - &channel.z).norm() < 1e-10 * channel.z.norm());
    // A = Z Sigma also for the dense path.
    let dense = &direct.z_tilde * &direct.sigma_mat;
    assert!((&dense - &direct.a_mat).norm() < 1e-10 * dense.norm());
}

#[test]
fn sparse_instances() {
    let config = tg_config(500, 5, 0.8);
    let mut rng = stream_from_seed(204);
    let ens = build_sensing_ensemble(&config, 60, &mut rng).unwrap();
    let inst = sample_sparse_instance(&ens, &config, &mut rng, AmplitudeMode::UnitNorm).unwrap();
    assert_eq!(inst.x.iter().filter(|v| v.norm() > 0.0).count(), 5);
    assert!((inst.x.norm() - 1.0).abs() < 1e-12);
    // Noiseless: y = A x exactly.
    assert!((&ens.a_mat * &inst.x - &inst.y).norm() < 1e-14);

    let (x, support) = sample_sparse_signal(50, 1, AmplitudeMode::UnitNorm, &mut rng).unwrap();
    assert!((x[support[0]].norm() - 1.0).abs() < 1e-15);
    let (x, support) = sample_sparse_signal(50, 4, AmplitudeMode::UnitModulus, &mut rng).unwrap();
    assert!(support.iter().all(|&s| (x[s].norm() - 1.0).abs() < 1e-15));

    let bad = NetworkConfig { k: 250, ..config.clone() };
    assert!(sample_sparse_instance(&ens, &bad, &mut rng, AmplitudeMode::UnitNorm).is_err());

    let mut noisy = ens.clone();
    noisy.pattern.set_snr_db(25.0);
    let sd = noisy.noise_variance();
    assert!((sd - 1.0 / (60.0 * 10f64.powf(2.5))).abs() < 1e-18);
}

#[test]
fn container_roundtrip() {
    let config = tg_config(32, 2, 0.8);
    let mut rng = stream_from_seed(205);
    let ens = build_sensing_ensemble(&config, 12, &mut rng).unwrap();
    let inst = sample_sparse_instance(&ens, &config, &mut rng, AmplitudeMode::UnitModulus).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.ehcs");
    ensemble_container(&ens, Some(205)).write(&path).unwrap();
    let back = ensemble_from_container(&Container::read(&path).unwrap()).unwrap();
    assert_eq!(back.a_mat, ens.a_mat);
    assert_eq!(back.z_tilde, ens.z_tilde);
    assert_eq!(back.sigma_mat, ens.sigma_mat);
    assert_eq!(back.pattern, ens.pattern);
    assert_eq!(back.basis, "dft");

    let c = instance_container(&inst, None);
    let back = instance_from_container(&Container::from_bytes(&c.to_bytes().unwrap()).unwrap()).unwrap();
    assert_eq!(back.x, inst.x);
    assert_eq!(back.y, inst.y);
    assert_eq!(back.support, inst.support);
    assert!(ensemble_from_container(&c).is_err());
}
