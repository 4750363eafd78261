use balayage::engine::McParams;
use balayage::geometry::{Ball, BallUnion, DomainSpec, OpenSet};
use balayage::kernels::{sample_exit_classical, KernelSpec};
use balayage::measure::WeightedMeasure;
use balayage::pipeline::corollary::near_difference;
use balayage::pipeline::grid_approx::GridApproxOptions;
use balayage::pipeline::jensen::newton_sphere_average;
use balayage::pipeline::{
    approximate_open_balayage, harnack_audit, jensen_demo, run_corollary_1_4, skorokhod_demo, CorollaryInput,
    ExperimentReport, GridApproxInput, HarnackInput, JensenInput, PathParams, PipelineOverrides, SkorokhodInput,
};
use balayage::potential::{standard_dictionary, Dictionary, PotentialKind, PotentialSpec};
use balayage::rng::walk_rng;
use balayage::Point;

fn p(c: &[f64]) -> Point {
    Point::new(c)
}

fn assert_passed(rep: &ExperimentReport) {
    let failed: Vec<_> = rep.failed_checks().iter().map(|c| format!("{} ({} vs {})", c.name, c.value, c.bound)).collect();
    assert!(failed.is_empty(), "{}: {failed:?}", rep.experiment);
}

#[test]
fn sphere_average_of_an_inside_pole_matches_sampling() {
    let k = KernelSpec::classical(3).unwrap();
    let b = Ball { center: p(&[0.0, 0.0, 0.0]), radius: 1.0 };
    let q = PotentialSpec::new("inside", PotentialKind::NewtonKernel { pole: p(&[0.3, 0.0, 0.0]) });
    let x = p(&[0.2, 0.1, -0.1]);
    let exact = newton_sphere_average(&q, &b, &x, &k).unwrap();
    let n = 200_000;
    let mut rng = walk_rng(3, 0);
    let vals: Vec<f64> = (0..n).map(|_| q.eval(&sample_exit_classical(&b, &x, &mut rng), &k).unwrap()).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - exact).abs() < 4.0 * (var / n as f64).sqrt(), "{mean} vs {exact}");
    // strictly below the value at x: the pole is inside the ball
    assert!(exact < q.eval(&x, &k).unwrap());

    let centred = PotentialSpec::new("c", PotentialKind::NewtonKernel { pole: b.center });
    assert_eq!(newton_sphere_average(&centred, &b, &x, &k), Some(1.0));
    let outside = PotentialSpec::new("o", PotentialKind::NewtonKernel { pole: p(&[2.0, 0.0, 0.0]) });
    assert_eq!(newton_sphere_average(&outside, &b, &x, &k), None);
}

#[test]
fn jensen_single_ball() {
    let k = KernelSpec::classical(3).unwrap();
    let dict = Dictionary::new(
        vec![
            PotentialSpec::new("far", PotentialKind::NewtonKernel { pole: p(&[3.0, 0.0, 0.0]) }),
            PotentialSpec::new("inside", PotentialKind::NewtonKernel { pole: p(&[0.3, 0.0, 0.0]) }).with_cap(10.0),
        ],
        PotentialSpec::new("p", PotentialKind::NewtonKernel { pole: p(&[0.0, 0.0, 0.0]) }).with_scale(0.5).with_cap(1.0),
        &k,
    )
    .unwrap();
    let rep = jensen_demo(&JensenInput {
        x: p(&[0.0, 0.0, 0.0]),
        omega: &OpenSet::ball(p(&[0.0, 0.0, 0.0]), 2.0),
        a: &[Ball { center: p(&[0.0, 0.0, 0.0]), radius: 1.0 }],
        domain: &DomainSpec::full_space(3),
        kernel: &k,
        dict: &dict,
        mc: &McParams::default().with_samples(20_000).with_seed(2),
    })
    .unwrap();
    assert_passed(&rep);
    assert!(rep.checks.iter().any(|c| c.name == "strict-gap:inside"));
}

#[test]
fn near_difference_examples() {
    let sets = [Ball { center: p(&[0.4, 0.0]), radius: 1.5 }, Ball { center: p(&[-0.4, 0.0]), radius: 1.5 }];
    let w = OpenSet::balls(sets.to_vec());
    let tiny = |x: f64, y: f64| Ball { center: p(&[x, y]), radius: 0.01 };
    // deep inside U₁ ∩ U₂
    assert!(!near_difference(&tiny(0.0, 0.0), &sets, &w, 4));
    // just inside U₁ near its left sphere point (-1.1, 0), which lies in U₂ ⊂ W
    assert!(near_difference(&tiny(-1.0, 0.0), &sets, &w, 4));
    assert!(!near_difference(&tiny(-1.0, 0.0), &sets, &w, 20));
    // outside W
    assert!(!near_difference(&tiny(3.0, 0.0), &sets, &w, 4));
}

#[test]
fn skorokhod_two_balls_classical() {
    let k = KernelSpec::classical(3).unwrap();
    let domain = DomainSpec::full_space(3);
    let c = BallUnion::new(vec![
        Ball { center: p(&[0.0, 0.0, 0.0]), radius: 0.6 },
        Ball { center: p(&[1.6, 0.0, 0.0]), radius: 0.5 },
    ])
    .unwrap();
    let x = p(&[0.8, 1.0, 0.0]);
    let dict = standard_dictionary(&k, &domain, &x, &c.centers(), &[(p(&[0.8, 0.5, 0.0]), 0.8)], 0.2).unwrap();
    let rep = skorokhod_demo(&SkorokhodInput {
        nu: &WeightedMeasure::dirac(x),
        c: &c,
        domain: &domain,
        kernel: &k,
        dict: &dict,
        mc: &McParams::default().with_samples(5000).with_seed(8),
        path: &PathParams::default(),
    })
    .unwrap();
    assert_passed(&rep);
}

#[test]
fn corollary_with_identical_sets_sweeps_onto_the_complement() {
    let k = KernelSpec::classical(3).unwrap();
    let u = Ball { center: p(&[0.0, 0.0, 0.0]), radius: 1.0 };
    let rep = run_corollary_1_4(&CorollaryInput {
        nu: &WeightedMeasure::dirac(p(&[0.2, 0.0, 0.0])),
        sets: &[u, u],
        lambda: &[0.3, 0.7],
        eta: 0.1,
        ladder: &[1, 2],
        domain: &DomainSpec::full_space(3),
        kernel: &k,
        mc: &McParams::default().with_samples(5000).with_seed(4),
        overrides: &PipelineOverrides::default(),
    })
    .unwrap();
    assert_passed(&rep);
    assert_eq!(rep.checks.iter().filter(|c| c.name.starts_with("empty-neighbourhood-agreement")).count(), 2);
}

#[test]
fn corollary_rejects_atoms_outside_the_intersection() {
    let k = KernelSpec::classical(3).unwrap();
    let sets = [Ball { center: p(&[0.5, 0.0, 0.0]), radius: 1.0 }, Ball { center: p(&[-0.5, 0.0, 0.0]), radius: 1.0 }];
    let err = run_corollary_1_4(&CorollaryInput {
        nu: &WeightedMeasure::dirac(p(&[1.2, 0.0, 0.0])),
        sets: &sets,
        lambda: &[0.5, 0.5],
        eta: 0.1,
        ladder: &[1],
        domain: &DomainSpec::full_space(3),
        kernel: &k,
        mc: &McParams::default().with_samples(100),
        overrides: &PipelineOverrides::default(),
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn planar_riesz_grid_ladder_converges() {
    let k = KernelSpec::new(2, 1.0).unwrap();
    let domain = DomainSpec::full_space(2);
    let x = p(&[-1.0, 0.0]);
    let poles = [p(&[-2.0, 0.0]), p(&[-1.0, 1.5]), p(&[-1.0, -1.5])];
    let dict = standard_dictionary(&k, &domain, &x, &poles, &[(p(&[0.0, 0.0]), 3.0)], 0.3).unwrap();
    let options = GridApproxOptions { offset: None, scale: 0.4, ladder: vec![4, 8, 16], relative_tolerance: None };
    let rep = approximate_open_balayage(&GridApproxInput {
        nu: &WeightedMeasure::dirac(x),
        u: &OpenSet::ball(p(&[1.0, 0.0]), 1.5),
        w: &OpenSet::ball(p(&[0.0, 0.0]), 4.0),
        domain: &domain,
        kernel: &k,
        dict: &dict,
        options: &options,
        mc: &McParams::default().with_samples(20_000).with_seed(5),
    })
    .unwrap();
    assert_passed(&rep);
    let d: Vec<f64> = rep.distances.iter().map(|d| d.distance).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn harnack_audit_without_swept_checks() {
    for k in [KernelSpec::classical(2).unwrap(), KernelSpec::new(2, 0.5).unwrap()] {
        let rep = harnack_audit(&HarnackInput {
            kernel: &k,
            deltas: &[0.05, 0.3],
            triples: 5000,
            domain: None,
            mc: &McParams::default(),
        })
        .unwrap();
        assert_passed(&rep);
        assert_eq!(rep.checks.len(), 4);
    }
}
