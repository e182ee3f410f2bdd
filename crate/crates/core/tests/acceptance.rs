//! Acceptance suite. Runs every criterion in sequence, prints one line per
//! criterion and fails if any of them fails.
//!
//! Run with `cargo test -p hflow-core --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use hflow_core::flows::{fejer_slacks, ppa_run, resolvent_path, semigroup_fixed, StepSchedule};
use hflow_core::functionals::Functional;
use hflow_core::geometry::{cat0_slack, Edge, GeodesicSegment, Isometry, Matrix, MetricTree, Point, Ray, Space};
use hflow_core::mosco::{envelope_resolvent_gaps, wijsman_gaps, FunctionalFamily, SetFamily};
use hflow_core::prox::{envelope_chain_slack, resolve};
use hflow_core::varying::{ar_axioms_check, semigroup_ar_check, ArInstance, VaryingFamily};
use hflow_core::weak::{default_probes, opial_slack, weak_limit_score};
use hflow_core::{ConvexSet, SequenceWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sample_tree() -> MetricTree {
    let labels = (0..8).map(|i| format!("v{i}")).collect();
    let e = |u, v, length| Edge { u, v, length };
    MetricTree::new(
        labels,
        vec![
            e(0, 1, 1.0),
            e(0, 2, 0.5),
            e(0, 3, 2.0),
            e(1, 4, 0.7),
            e(1, 5, 1.2),
            e(3, 6, 0.3),
            e(3, 7, 0.9),
        ],
    )
    .unwrap()
}

fn backends() -> Vec<Space> {
    vec![
        Space::Euclidean { dim: 3 },
        Space::Hyperboloid { dim: 2 },
        Space::tree(sample_tree()),
        Space::Spd { n: 2 },
        Space::Product(vec![Space::Euclidean { dim: 2 }, Space::tree(MetricTree::star(3, 1.0).unwrap())]),
    ]
}

/// A functional on a backend, with the set its domain is confined to.
struct Case {
    label: &'static str,
    space: Space,
    f: Functional,
    domain: Option<ConvexSet>,
}

fn domain_of(f: &Functional) -> Option<ConvexSet> {
    match f {
        Functional::Indicator(set) => Some(set.clone()),
        Functional::WeightedSum { terms, .. } => terms.iter().find_map(|(t, _)| domain_of(t)),
        _ => None,
    }
}

fn catalogue() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xca7a);
    let mut out = Vec::new();
    let mut add = |label, space: Space, f: Functional| {
        let domain = domain_of(&f);
        out.push(Case { label, space, f, domain });
    };
    let pd = Space::pd_norm(Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()).unwrap();
    let star = Space::tree(MetricTree::star(3, 1.0).unwrap());
    let tree = Space::tree(sample_tree());
    let hyp = Space::Hyperboloid { dim: 2 };
    let spd = Space::Spd { n: 2 };
    let e2 = Space::Euclidean { dim: 2 };
    let line = Space::Euclidean { dim: 1 };
    let prod = Space::Product(vec![Space::Euclidean { dim: 2 }, Space::Hyperboloid { dim: 1 }]);
    for space in [&e2, &pd, &hyp, &tree, &spd, &prod] {
        let anchors: Vec<Point> = (0..3).map(|_| space.sample_point(&mut rng, 1.5)).collect();
        add("squared distance", space.clone(), Functional::squared_distance(anchors[0].clone(), 1.5));
        add("distance", space.clone(), Functional::distance(anchors[1].clone(), 0.8));
        add("median", space.clone(), Functional::uniform_fermat_weber(anchors.clone(), 1).unwrap());
        add("barycenter", space.clone(), Functional::uniform_fermat_weber(anchors.clone(), 2).unwrap());
        add(
            "ball",
            space.clone(),
            Functional::Indicator(ConvexSet::Ball {
                center: anchors[2].clone(),
                radius: 0.7,
            }),
        );
    }
    add(
        "segment",
        e2.clone(),
        Functional::Indicator(ConvexSet::Segment {
            start: Point::vector([-1.0, 0.0]),
            end: Point::vector([1.0, 1.0]),
        }),
    );
    add("interval", line.clone(), Functional::Indicator(ConvexSet::Interval { lo: -0.5, hi: 1.0 }));
    add(
        "tree span",
        tree.clone(),
        Functional::Indicator(ConvexSet::TreeSpan {
            points: vec![Point::node(4), Point::node(6), Point::on_edge(1, 0.2)],
        }),
    );
    add(
        "busemann",
        e2.clone(),
        Functional::Busemann(Ray::Directed {
            base: Point::vector([0.0, 0.0]),
            direction: vec![1.0, 2.0],
        }),
    );
    add(
        "busemann",
        hyp.clone(),
        Functional::Busemann(Ray::Directed {
            base: hyp.origin(),
            direction: vec![0.0, 1.0, -0.5],
        }),
    );
    add(
        "busemann",
        tree.clone(),
        Functional::Busemann(Ray::Toward {
            base: Point::node(0),
            leaf: 7,
        }),
    );
    add("rotation displacement", e2.clone(), Functional::Displacement(Isometry::rotation2(0.7)));
    add("translation displacement", e2.clone(), Functional::Displacement(Isometry::translation(vec![0.5, -0.2])));
    add(
        "leaf swap displacement",
        star.clone(),
        Functional::Displacement(Isometry::TreeAutomorphism { perm: vec![0, 2, 1, 3] }),
    );
    add(
        "distance plus ball",
        e2.clone(),
        Functional::sum(vec![
            (Functional::distance(Point::vector([2.0, 0.0]), 1.0), 1.0),
            (
                Functional::Indicator(ConvexSet::Ball {
                    center: Point::vector([0.0, 0.0]),
                    radius: 1.0,
                }),
                1.0,
            ),
        ])
        .unwrap(),
    );
    add(
        "median on star",
        star.clone(),
        Functional::uniform_fermat_weber((1..=3).map(Point::node).collect(), 1).unwrap(),
    );
    out
}

fn start_point(case: &Case, rng: &mut ChaCha8Rng) -> Point {
    let p = case.space.sample_point(rng, 1.5);
    match &case.domain {
        Some(set) => set.project(&case.space, &p),
        None => p,
    }
}

fn criterion_1() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut names = Vec::new();
    for (i, space) in backends().iter().enumerate() {
        let min = (0..100u64)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                rng.set_stream(chunk);
                (0..1000)
                    .map(|_| {
                        let p = space.sample_point(&mut rng, 2.0);
                        let seg = GeodesicSegment {
                            start: space.sample_point(&mut rng, 2.0),
                            end: space.sample_point(&mut rng, 2.0),
                        };
                        let t = rng.random_range(0.0..=1.0);
                        cat0_slack(space, &p, &seg, t).unwrap()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min);
        names.push(format!("{} {min:.1e}", space.name()));
        worst = worst.min(min);
    }
    outcome(worst >= -1e-9, format!("min slack per backend: {}", names.join(", ")))
}

fn half_square() -> (Space, Functional) {
    (Space::Euclidean { dim: 1 }, Functional::squared_distance(Point::scalar(0.0), 1.0))
}

fn criterion_2() -> Outcome {
    let (s, f) = half_square();
    let y = semigroup_fixed(&s, &f, &Point::scalar(1.0), 1.0, 10_000, 1e-14).unwrap();
    let err = (y.as_vector().unwrap()[0] - (-1.0f64).exp()).abs();
    // closed-form oracle for the recursion
    let recursion = (1.0 + 1e-4f64).powi(-10_000);
    let drift = (y.as_vector().unwrap()[0] - recursion).abs();
    outcome(err <= 1e-4 && drift <= 1e-12, format!("|S − e⁻¹| = {err:.2e}, |S − (1+t/n)⁻ⁿ| = {drift:.1e}"))
}

fn criterion_3() -> Outcome {
    let (s, f) = half_square();
    let x = Point::scalar(1.0);
    let slope = f.known_slope(&s, &x).unwrap();
    assert_eq!(slope, 1.0);
    let reference = semigroup_fixed(&s, &f, &x, 1.0, 10_000, 1e-14).unwrap();
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=100 {
        let y = semigroup_fixed(&s, &f, &x, 1.0, n, 1e-14).unwrap();
        let bound = hflow_core::flows::error_bound(1.0, slope, n) + 1e-6;
        worst = worst.max(s.dist(&y, &reference) - bound);
    }
    outcome(worst <= 0.0, format!("max (error − bound) over n ≤ 100: {worst:.3e}"))
}

fn criterion_4() -> Outcome {
    let cases = catalogue();
    let draws: Vec<(usize, f64, f64)> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xc4a1);
            rng.set_stream(i);
            let k = rng.random_range(0..cases.len());
            let case = &cases[k];
            let x = start_point(case, &mut rng);
            let lambda = 10f64.powf(rng.random_range(-1.0..=1.0));
            let s = envelope_chain_slack(&case.space, &case.f, &x, lambda)
                .unwrap_or_else(|e| panic!("{} on {}: {e}", case.label, case.space.name()));
            (k, s.s1, s.s2.unwrap_or(f64::INFINITY))
        })
        .collect();
    let (k, s1, _) = draws.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let s2 = draws.iter().map(|d| d.2).fold(f64::INFINITY, f64::min);
    outcome(
        s1 >= -1e-8,
        format!(
            "min s₁ = {s1:.2e} ({} on {}), min registered s₂ = {s2:.2e}",
            cases[k].label,
            cases[k].space.name()
        ),
    )
}

fn criterion_5() -> Outcome {
    let seq = FunctionalFamily::TranslatedQuadratic.sequence().unwrap();
    let grid: Vec<usize> = (1..=1000).collect();
    let r = envelope_resolvent_gaps(&seq, &Point::scalar(2.0), 1.0, &grid, 1e-14).unwrap();
    let mut worst: f64 = 0.0;
    for &(n, env, res) in &r.gaps {
        let n = n as f64;
        // Jⁿ = (2 + 1/n)/2, envelope (2 − 1/n)²/4 against 1
        worst = worst.max((res - 1.0 / (2.0 * n)).abs());
        worst = worst.max((env - (1.0 / n - 1.0 / (4.0 * n * n))).abs());
    }
    outcome(
        worst <= 1e-9 && r.gaps.len() == 1000,
        format!("max deviation from closed forms: {worst:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let grid: Vec<usize> = (1..=1000).collect();
    let r = wijsman_gaps(&SetFamily::NestedIntervals, &Point::scalar(2.0), &grid, 1e-12).unwrap();
    let worst = r
        .gaps
        .iter()
        .map(|&(n, d, p)| (d - 1.0 / n as f64).abs().max((p - 1.0 / n as f64).abs()))
        .fold(0.0, f64::max);
    outcome(worst <= 1e-12, format!("max deviation from 1/n: {worst:.1e}"))
}

fn criterion_7() -> Outcome {
    let tripod = Space::tree(MetricTree::star(3, 1.0).unwrap());
    let tips: Vec<Point> = (1..=3).map(Point::node).collect();
    let f = Functional::uniform_fermat_weber(tips.clone(), 1).unwrap();
    // brute-force oracle: grid of resolution 1e-4 over the three legs
    let mut best = (f64::INFINITY, Point::node(0));
    for leg in 0..3 {
        for k in 0..=10_000 {
            let p = Point::on_edge(leg, k as f64 * 1e-4);
            let v = f.value(&tripod, &p);
            if v < best.0 {
                best = (v, p);
            }
        }
    }
    let median = best.1;
    let mut details = Vec::new();
    let mut pass = tripod.dist(&median, &Point::node(0)) == 0.0;
    for tip in &tips {
        let traj = ppa_run(&tripod, &f, tip, &StepSchedule::Harmonic { c: 1.0 }, 10_000, 1e-12, Some(&median)).unwrap();
        let hit = traj
            .records
            .iter()
            .find(|r| r.reference_distance.unwrap() <= 1e-2)
            .map(|r| r.n);
        let fejer = fejer_slacks(&tripod, &traj, std::slice::from_ref(&median))
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        pass &= hit.is_some() && fejer >= -1e-9;
        details.push(format!("{:?}: {} steps", tip, hit.map_or("never".into(), |n| n.to_string())));
        details.push(format!("fejér {fejer:.1e}"));
    }
    outcome(pass, details.join(", "))
}

fn criterion_8() -> Outcome {
    let spd = Space::Spd { n: 2 };
    let a = Matrix::diag(&[4.0, 1.0]);
    let b = Matrix::diag(&[0.25, 1.0]);
    // oracle: A^{1/2}(A^{-1/2} B A^{-1/2})^{1/2} A^{1/2} via eigendecompositions
    let ra = a.sym_apply(f64::sqrt);
    let ria = a.sym_apply(|v| 1.0 / v.sqrt());
    let inner = (&(&ria * &b) * &ria).symmetrized().sym_apply(f64::sqrt);
    let mid = Point::Matrix((&(&ra * &inner) * &ra).symmetrized());
    let identity = Point::Matrix(Matrix::identity(2));
    let f = Functional::uniform_fermat_weber(vec![Point::Matrix(a.clone()), Point::Matrix(b)], 2).unwrap();
    let lambdas = [1.0, 10.0, 100.0, 1000.0];
    let at_mean = resolvent_path(&spd, &f, &mid, &lambdas, 1e-12).unwrap();
    let end = spd.dist(&at_mean.last().unwrap().point, &identity);
    let oracle = spd.dist(&mid, &identity);
    // From A the exact resolvent lies at distance ln4/(2λ + 1) from the mean.
    let from_a = resolvent_path(&spd, &f, &Point::Matrix(a), &lambdas, 1e-12).unwrap();
    let rate = from_a
        .records
        .iter()
        .map(|r| (spd.dist(&r.point, &identity) - 4f64.ln() / (2.0 * r.lambda + 1.0)).abs())
        .fold(0.0, f64::max);
    outcome(
        end <= 1e-6 && oracle <= 1e-12 && rate <= 1e-8,
        format!("d(end, I) from the mean = {end:.1e}, oracle d(mid, I) = {oracle:.1e}, from A: max |d − ln4/(2λ+1)| = {rate:.1e}"),
    )
}

fn criterion_9() -> Outcome {
    let star = Space::tree(MetricTree::star(100, 1.0).unwrap());
    let center = Point::node(0);
    let probes = default_probes(&star, &center);
    // tips of branches 9..=100; probes sit on branches 1..=8
    let tail = SequenceWindow::new((9..=100).map(Point::node).collect(), 9).unwrap();
    let score = weak_limit_score(&star, &tail, &center, &probes).unwrap();
    let min_dist = tail.points.iter().map(|p| star.dist(p, &center)).fold(f64::INFINITY, f64::min);
    let opial = [0.1, 0.25, 0.5, 0.9]
        .iter()
        .map(|&s| (opial_slack(&star, &tail, &center, &Point::on_edge(0, s)) - s).abs())
        .fold(0.0, f64::max);
    outcome(
        score <= 1e-9 && (min_dist - 1.0).abs() <= 1e-12 && opial <= 1e-9,
        format!("score {score:.1e}, min tail distance {min_dist}, Opial deviation {opial:.1e}"),
    )
}

fn criterion_10() -> Outcome {
    let inst = ArInstance::ScaledTripod;
    let fam = VaryingFamily::QuadraticAnchor {
        anchor: Point::node(1),
        weight: 2.0,
    }
    .sequence(&inst)
    .unwrap();
    let grid: Vec<usize> = (1..=200).collect();
    let x = Point::on_edge(1, 0.5);
    let sem = semigroup_ar_check(&inst, &fam, &x, 1.0, &grid, 100, 1e-12).unwrap();
    let sem_worst = sem
        .gaps
        .iter()
        .map(|&(n, _, g)| g - (3.0 / n as f64 + 1e-2))
        .fold(f64::NEG_INFINITY, f64::max);
    let axioms = grid
        .par_iter()
        .map(|&n| {
            let r = ar_axioms_check(&inst, n, 1000, 1e-12).unwrap();
            r.a3_residual.max(r.a4_residual).max(r.distortion) - 2.0 / n as f64
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    outcome(
        sem_worst <= 0.0 && axioms <= 1e-12,
        format!("max (sem gap − bound) {sem_worst:.2e}, max (residual − 2/n) {axioms:.2e}"),
    )
}

fn criterion_11() -> Outcome {
    let cases = catalogue();
    let per_case: Vec<(f64, f64)> = cases
        .par_iter()
        .enumerate()
        .map(|(k, case)| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x11 + k as u64);
            let (mut res, mut sem) = (f64::INFINITY, f64::INFINITY);
            for i in 0..1000 {
                let x = case.space.sample_point(&mut rng, 1.5);
                let y = case.space.sample_point(&mut rng, 1.5);
                let lambda = 10f64.powf(rng.random_range(-1.0..=1.0));
                let d = case.space.dist(&x, &y);
                let jx = resolve(&case.space, &case.f, &x, lambda).unwrap();
                let jy = resolve(&case.space, &case.f, &y, lambda).unwrap();
                res = res.min(d - case.space.dist(&jx, &jy));
                if i % 10 == 0 {
                    let (x, y) = (start_point(case, &mut rng), start_point(case, &mut rng));
                    let sx = semigroup_fixed(&case.space, &case.f, &x, 1.0, 4, 1e-12).unwrap();
                    let sy = semigroup_fixed(&case.space, &case.f, &y, 1.0, 4, 1e-12).unwrap();
                    sem = sem.min(case.space.dist(&x, &y) - case.space.dist(&sx, &sy));
                }
            }
            (res, sem)
        })
        .collect();
    let res = per_case.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let sem = per_case.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    outcome(
        res >= -1e-7 && sem >= -1e-7,
        format!("{} families, min resolvent slack {res:.1e}, min semigroup slack {sem:.1e}", cases.len()),
    )
}

#[test]
fn acceptance_suite() {
    type Criterion = (usize, &'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "CAT(0) certification", 10, criterion_1),
        (2, "gradient-flow exactness", 1, criterion_2),
        (3, "discretization error estimate", 2, criterion_3),
        (4, "envelope slope chain", 10, criterion_4),
        (5, "Mosco: envelopes and resolvents", 1, criterion_5),
        (6, "Mosco: distances and projections to sets", 1, criterion_6),
        (7, "tripod median by PPA", 5, criterion_7),
        (8, "SPD barycenter", 2, criterion_8),
        (9, "weak but not strong convergence", 1, criterion_9),
        (10, "semigroups on varying spaces", 20, criterion_10),
        (11, "nonexpansiveness", 30, criterion_11),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = o.pass && in_time;
        println!(
            "acceptance {id:>2} {} {name}: {} [{:.2} s of {budget} s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
