use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn bs(bits: &[u8]) -> BitString {
    BitString::from_u8s(bits).unwrap()
}

fn seed(run: u64) -> SeedSpec {
    SeedSpec::new(2024, run, StreamTag::Environment)
}

fn identity_problem(version: ProblemVersion, n: usize) -> DynBinValProblem {
    DynBinValProblem::with_transform(version, InstanceTransform::identity(n), 1).unwrap()
}

#[test]
fn binval_exact_examples() {
    assert_eq!(binval_exact(&BitString::ones(5), &[4, 2, 0, 1, 3]).unwrap(), 31);
    assert_eq!(binval_exact(&bs(&[1, 0, 1]), &[0, 1, 2]).unwrap(), 5);
    // pi = (2, 1, 3) in 1-based form
    assert_eq!(binval_exact(&bs(&[1, 0, 1]), &[1, 0, 2]).unwrap(), 6);
    let p: Vec<u32> = (0..63).collect();
    assert!(binval_exact(&BitString::zeros(63), &p).is_err());
}

#[test]
fn evaluate_identity_by_hand() {
    let mut p = identity_problem(ProblemVersion::PowersOfTwo, 3);
    p.set_environment(EnvState::Weights(vec![1.0, 2.0, 4.0])).unwrap();
    assert_eq!(p.evaluate(&bs(&[1, 0, 1])).unwrap(), 5.0);
    assert_eq!(p.evaluate(&bs(&[0, 0, 0])).unwrap(), 0.0);
    assert_eq!(p.eval_count(), 2);
}

#[test]
fn evaluate_zero_image_is_translate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = InstanceTransform::sample(&mut rng, 20, 5).unwrap();
    let mut p = DynBinValProblem::with_transform(ProblemVersion::Uniform, t.clone(), 3).unwrap();
    // the input whose image is all zeros is the complement of the optimum
    let x = p.optimum().complement();
    assert_eq!(t.apply(&x).unwrap(), BitString::zeros(20));
    assert_eq!(p.evaluate(&x).unwrap(), t.translate);
}

#[test]
fn rank_version_rejects_evaluate_and_weights_reject_rank() {
    let mut r = identity_problem(ProblemVersion::Rank, 4);
    assert!(matches!(r.evaluate(&BitString::zeros(4)), Err(Error::Contract(_))));
    let mut u = identity_problem(ProblemVersion::Uniform, 4);
    assert!(matches!(u.rank_fresh(&[BitString::zeros(4)]), Err(Error::Contract(_))));
    assert!(matches!(u.evaluate(&BitString::zeros(5)), Err(Error::LengthMismatch { .. })));
}

#[test]
fn rank_hand_example() {
    let mut p = identity_problem(ProblemVersion::Rank, 3);
    p.set_environment(EnvState::Permutation(vec![0, 1, 2])).unwrap();
    let pop = [bs(&[1, 0, 0]), bs(&[0, 1, 1])];
    let r = p.rank_fresh(&pop).unwrap();
    assert_eq!(r.order, vec![1, 0]);
    assert!(!r.has_ties());
    assert_eq!(p.eval_count(), 2);
}

#[test]
fn rank_identical_strings_tie_stably() {
    let mut p = identity_problem(ProblemVersion::Rank, 6);
    let x = bs(&[1, 0, 1, 1, 0, 0]);
    let pop = vec![x.clone(); 4];
    let r = p.rank_fresh(&pop).unwrap();
    assert_eq!(r.order, vec![0, 1, 2, 3]);
    assert_eq!(r.level, vec![0; 4]);
    assert!(r.has_ties());
}

#[test]
fn all_ones_always_first() {
    let mut p = identity_problem(ProblemVersion::Rank, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        p.step();
        let mut pop: Vec<BitString> = (0..7).map(|_| BitString::random(&mut rng, 40).unwrap()).collect();
        pop.insert(3, BitString::ones(40));
        let r = p.rank_fresh(&pop).unwrap();
        assert_eq!(r.order[0], 3);
    }
}

#[test]
fn rank_charges_only_unranked_candidates() {
    let mut p = identity_problem(ProblemVersion::Rank, 8);
    let a = BitString::zeros(8);
    let b = BitString::ones(8);
    let g = p.environment().generation;
    let cands = [
        Candidate { genome: &a, ranked_in: Some(g) },
        Candidate { genome: &b, ranked_in: None },
    ];
    let r = p.rank(&cands).unwrap();
    assert_eq!(r.charged, vec![false, true]);
    assert_eq!(p.eval_count(), 1);
    p.step();
    p.rank(&cands).unwrap();
    assert_eq!(p.eval_count(), 3);
}

#[test]
fn step_single_dimension_is_identity() {
    let mut p = identity_problem(ProblemVersion::Rank, 1);
    for _ in 0..10 {
        p.step();
        assert_eq!(p.environment().permutation().unwrap(), &[0]);
    }
    assert_eq!(p.environment().generation, 10);
}

#[test]
fn step_is_deterministic_and_free() {
    for version in ProblemVersion::ALL {
        let mut a = DynBinValProblem::new(version, 30, 2, seed(5)).unwrap();
        let mut b = DynBinValProblem::new(version, 30, 2, seed(5)).unwrap();
        for _ in 0..5 {
            a.step();
            b.step();
        }
        assert_eq!(a.environment(), b.environment());
        assert_eq!(a.eval_count(), 0);
    }
}

#[test]
fn step_permutations_are_uniform() {
    let mut p = identity_problem(ProblemVersion::Rank, 3);
    let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
    for _ in 0..10_000 {
        p.step();
        *counts.entry(p.environment().permutation().unwrap().to_vec()).or_default() += 1;
    }
    assert_eq!(counts.len(), 6);
    for (perm, c) in counts {
        let f = c as f64 / 10_000.0;
        assert!((f - 1.0 / 6.0).abs() <= 0.02, "{perm:?} frequency {f}");
    }
}

#[test]
fn make_problem_identity_instance() {
    let p = make_problem(ProblemVersion::Rank, 3, 1, seed(0)).unwrap();
    assert_eq!(p.transform().var_permutation, vec![0, 1, 2]);
    assert_eq!(p.transform().xor_mask, BitString::zeros(3));
    assert_eq!(p.optimum(), &BitString::ones(3));
    assert!(make_problem(ProblemVersion::Rank, 3, 0, seed(0)).is_err());
    assert!(make_problem(ProblemVersion::Rank, 0, 1, seed(0)).is_err());
}

#[test]
fn make_problem_is_deterministic() {
    for version in ProblemVersion::ALL {
        let a = make_problem(version, 50, 7, seed(3)).unwrap();
        let b = make_problem(version, 50, 7, seed(3)).unwrap();
        assert_eq!(a.transform(), b.transform());
        assert_eq!(a.environment(), b.environment());
        assert_eq!(a.descriptor(), b.descriptor());
    }
}

#[test]
fn transform_shared_across_runs_of_an_instance() {
    let a = make_problem(ProblemVersion::Pareto, 50, 4, seed(0)).unwrap();
    let b = make_problem(ProblemVersion::Pareto, 50, 4, seed(1)).unwrap();
    assert_eq!(a.transform(), b.transform());
    assert_ne!(a.environment(), b.environment());
}

#[test]
fn fifteen_distinct_masks() {
    let masks: HashSet<String> = (2..=16)
        .map(|id| {
            make_problem(ProblemVersion::Rank, 100, id, seed(0))
                .unwrap()
                .transform()
                .xor_mask
                .to_string()
        })
        .collect();
    assert_eq!(masks.len(), 15);
}

#[test]
fn optimum_of_complement_mask_is_zeros() {
    let mut t = InstanceTransform::identity(9);
    t.xor_mask = BitString::ones(9);
    t.instance_id = 2;
    let p = DynBinValProblem::with_transform(ProblemVersion::Rank, t, 0).unwrap();
    assert_eq!(p.optimum(), &BitString::zeros(9));
}

#[test]
fn optimum_maximizes_every_weight_version() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for version in [ProblemVersion::Uniform, ProblemVersion::PowersOfTwo, ProblemVersion::Pareto] {
        for instance in [1, 2, 9] {
            let mut p = make_problem(version, 64, instance, seed(instance as u64)).unwrap();
            let opt = p.optimum().clone();
            let best = p.evaluate(&opt).unwrap();
            let w_sum: f64 = p.environment().weights().unwrap().iter().sum();
            let t = p.transform();
            assert!((best - (t.scale * w_sum + t.translate)).abs() <= 1e-9 * best.abs().max(1.0));
            for _ in 0..1000 {
                let x = BitString::random(&mut rng, 64).unwrap();
                if x != opt {
                    assert!(p.evaluate(&x).unwrap() < best);
                }
            }
        }
    }
}

#[test]
fn is_optimum_survives_steps() {
    for version in ProblemVersion::ALL {
        let mut p = make_problem(version, 33, 6, seed(1)).unwrap();
        let opt = p.optimum().clone();
        let mut near = opt.clone();
        near.flip(17);
        assert!(p.is_optimum(&opt).unwrap());
        assert!(!p.is_optimum(&near).unwrap());
        for _ in 0..10 {
            p.step();
        }
        assert!(p.is_optimum(&opt).unwrap());
        assert!(!p.is_optimum(&near).unwrap());
        assert_eq!(p.eval_count(), 0);
        assert!(p.is_optimum(&BitString::zeros(32)).is_err());
    }
}

#[test]
fn powers_of_two_sum_within_bound() {
    for n in [1usize, 5, 100, 1000, 1024] {
        let mut p = make_problem(ProblemVersion::PowersOfTwo, n, 1, seed(n as u64)).unwrap();
        let bound = n as f64 * (1u64 << powers_of_two_max_exponent(n)) as f64;
        for _ in 0..20 {
            p.step();
            let v = p.evaluate(&BitString::ones(n)).unwrap();
            assert!(v <= bound && bound <= 4_294_967_296.0);
        }
    }
}

#[test]
fn rank_matches_exact_oracle_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for n in [1usize, 2, 5, 10, 20] {
        for trial in 0..200u64 {
            let mut p = make_problem(ProblemVersion::Rank, n, 1 + (trial % 5) as u32, seed(trial)).unwrap();
            p.step();
            let size = rng.random_range(1..=32);
            let pop: Vec<BitString> = (0..size).map(|_| BitString::random(&mut rng, n).unwrap()).collect();
            let prio = p.environment().permutation().unwrap().to_vec();
            let exact: Vec<u64> = pop
                .iter()
                .map(|x| binval_exact(&p.transform().apply(x).unwrap(), &prio).unwrap())
                .collect();
            let r = p.rank_fresh(&pop).unwrap();
            for w in r.order.windows(2) {
                assert!(exact[w[0]] >= exact[w[1]]);
                if exact[w[0]] == exact[w[1]] {
                    assert!(w[0] < w[1], "ties must keep input order");
                }
            }
        }
    }
}

#[test]
fn monotone_in_every_environment() {
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for version in ProblemVersion::ALL {
        for case in 0..1000u64 {
            let n = rng.random_range(1..=80);
            let mut p = make_problem(version, n, 1 + (case % 4) as u32, seed(case)).unwrap();
            for _ in 0..rng.random_range(0..3) {
                p.step();
            }
            let x = BitString::random(&mut rng, n).unwrap();
            let y = p.transform().apply(&x).unwrap();
            // a "zero bit" is an input position whose image bit is 0
            let f = p.transform().folded();
            let zeros: Vec<usize> = (0..n).filter(|&i| !y.get(f.target_index[i] as usize)).collect();
            let Some(&pos) = zeros.get(rng.random_range(0..zeros.len().max(1))) else {
                continue;
            };
            let mut better = x.clone();
            better.flip(pos);
            if version.is_rank() {
                assert_eq!(p.compare(&better, &x).unwrap(), Ordering::Greater);
            } else {
                assert!(p.evaluate(&better).unwrap() > p.evaluate(&x).unwrap());
            }
        }
    }
}

#[test]
fn scaling_never_changes_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for trial in 0..100u64 {
        let version = [ProblemVersion::Uniform, ProblemVersion::PowersOfTwo, ProblemVersion::Pareto][(trial % 3) as usize];
        let mut t = InstanceTransform::sample(&mut rng, 30, 2).unwrap();
        let mut plain = t.clone();
        plain.scale = 1.0;
        plain.translate = 0.0;
        t.scale = rng.random_range(0.2..=5.0);
        let mut a = DynBinValProblem::with_transform(version, t, trial).unwrap();
        let mut b = DynBinValProblem::with_transform(version, plain, trial).unwrap();
        let pop: Vec<BitString> = (0..20).map(|_| BitString::random(&mut rng, 30).unwrap()).collect();
        let argsort = |p: &mut DynBinValProblem| {
            let f: Vec<f64> = pop.iter().map(|x| p.evaluate(x).unwrap()).collect();
            let mut idx: Vec<usize> = (0..pop.len()).collect();
            idx.sort_by(|&i, &j| f[j].total_cmp(&f[i]));
            idx
        };
        assert_eq!(argsort(&mut a), argsort(&mut b));
    }
}

#[test]
fn eval_count_matches_calls() {
    let mut p = make_problem(ProblemVersion::Pareto, 10, 2, seed(0)).unwrap();
    let x = BitString::zeros(10);
    for k in 1..=25 {
        p.evaluate(&x).unwrap();
        assert_eq!(p.eval_count(), k);
        if k % 7 == 0 {
            p.step();
        }
    }
}

#[test]
fn version_names_round_trip() {
    for v in ProblemVersion::ALL {
        assert_eq!(v.name().parse::<ProblemVersion>().unwrap(), v);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, format!("\"{}\"", v.name()));
    }
    assert_eq!("Power2".parse::<ProblemVersion>().unwrap(), ProblemVersion::PowersOfTwo);
    assert!("onemax".parse::<ProblemVersion>().is_err());
}
