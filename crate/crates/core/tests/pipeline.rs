use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use randmoll_core::maximal::maximal_operator;
use randmoll_core::randomness::{Atom, MeanLaw, ScalarLaw};
use randmoll_core::transport::{mollify, mollify_at};
use randmoll_core::{
    AveragedKernel, FamilyKind, FamilySpec, GridFunction, JointDistributionSpec, JointForm, MollifyPath, Profile,
    ProfileKind, Strategy,
};

fn atoms() -> Vec<Atom> {
    vec![
        Atom { s: 0.5, y: vec![0.2], weight: 0.25 },
        Atom { s: 1.0, y: vec![0.2], weight: 0.75 },
    ]
}

// The same Π written as atoms and as a product of a discrete dilation with a
// point shift; the atom sum is exact, so it is the oracle for the others.
#[test]
fn representations_of_one_law_agree() {
    let phi = Profile::normalized(ProfileKind::Gaussian, 1).unwrap();
    let exact = AveragedKernel::new(
        phi.clone(),
        JointDistributionSpec::new(JointForm::Atoms(atoms()), 1).unwrap(),
        Strategy::AtomsExact,
    )
    .unwrap();
    let product = JointForm::Product {
        variance: ScalarLaw::Discrete(vec![(0.5, 0.25), (1.0, 0.75)]),
        mean: MeanLaw::Dirac(vec![0.2]),
    };
    let spec = JointDistributionSpec::new(product, 1).unwrap();
    let quad = AveragedKernel::new(phi.clone(), spec.clone(), Strategy::default()).unwrap();
    let mc = AveragedKernel::new(phi, spec, Strategy::MonteCarlo { samples: 20_000, seed: 9 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = [rng.random_range(-3.0..3.0)];
        let want = exact.eval(&x).unwrap();
        assert!((quad.eval(&x).unwrap() - want).abs() <= 1e-9 * want.max(1.0));
        let est = mc.eval_estimate(&x).unwrap();
        assert!((est.value - want).abs() <= 4.0 * est.std_error + 1e-12, "x = {x:?}");
    }
    assert!((exact.kernel_mass().unwrap() - 1.0).abs() < 1e-12);
    assert!((quad.kernel_mass().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn mollification_paths_and_pointwise_route_agree() {
    let phi = Profile::normalized(ProfileKind::Indicator, 1).unwrap();
    let family = FamilySpec::new(FamilyKind::UniformVariance { s_max: 1.0 }, 1, 8).unwrap();
    let k = AveragedKernel::new(phi, family.member(4).unwrap(), Strategy::default()).unwrap();
    let f = GridFunction::from_fn(1, &[-4.0], &[4.0], &[512], |x| (1.0 - x[0].abs()).max(0.0)).unwrap();
    let direct = mollify(&k, &f, MollifyPath::Direct).unwrap();
    let fft = mollify(&k, &f, MollifyPath::FastConvolution).unwrap();
    for i in direct.trusted_indices() {
        let (a, b) = (direct.values.samples()[i], fft.values.samples()[i]);
        assert!((a - b).abs() < 1e-12, "cell {i}: {a} vs {b}");
    }
    for i in (0..f.len()).step_by(37) {
        let at = mollify_at(&k, &f, &f.center(i)).unwrap();
        assert!((at.value - direct.values.samples()[i]).abs() < 1e-6, "cell {i}");
    }
}

// 𝓜f is a supremum over j of |m_j f|, so it dominates each member and
// stays below ‖f‖_∞ for a unit-mass nonnegative kernel.
#[test]
fn maximal_operator_dominates_members() {
    let phi = Profile::normalized(ProfileKind::Gaussian, 1).unwrap();
    let family = FamilySpec::new(FamilyKind::UniformVariance { s_max: 1.0 }, 1, 16).unwrap();
    let f = GridFunction::from_fn(1, &[-6.0], &[6.0], &[384], |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 }).unwrap();
    let m = maximal_operator(&family, &phi, &f, 16, MollifyPath::FastConvolution).unwrap();
    for j in [1u32, 3, 16] {
        let k = AveragedKernel::new(phi.clone(), family.member(j).unwrap(), Strategy::default()).unwrap();
        let mj = mollify(&k, &f, MollifyPath::FastConvolution).unwrap();
        for i in m.trusted_indices() {
            assert!(m.values.samples()[i] + 1e-12 >= mj.values.samples()[i].abs());
        }
    }
    assert!(m.values.sup_norm() <= f.sup_norm() + 1e-9);
}
