//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion with
//! the measured quantities and exits nonzero if any criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use owqc::engine::ZFamilyWeights;
use owqc::gates::{cz_of, four_node_matrix, quarter_turns, rot1, shear_of, squeeze_of, wrap_angle};
use owqc::matrix::{
    blockwise_invert_lower, blockwise_invert_upper, max_abs, max_abs_diff, symplectic_defect, BlockPartition2x2, Mat,
};
use owqc::search::{infeasibility_probe, two_node_family, SearchBudget};
use owqc::*;
use rand::Rng;

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn inf_norm(m: &Mat) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn fourier(m: usize) -> Mat {
    let mut f = Mat::zeros(2 * m, 2 * m);
    for i in 0..m {
        f[(i, m + i)] = -1.0;
        f[(m + i, i)] = 1.0;
    }
    f
}

fn blockwise_inversion() -> Outcome {
    let mut r = rng(1);
    let (mut worst, mut agree, mut both, mut inverted) = (0.0f64, 0.0f64, 0, 0);
    for _ in 0..1000 {
        let n = r.random_range(2..=12);
        let k = r.random_range(1..n);
        let m = Mat::from_fn(n, n, |i, j| r.random_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 });
        let b = BlockPartition2x2::split(&m, k).unwrap();
        let id = Mat::identity(n, n);
        let up = blockwise_invert_upper(&b).ok();
        let lo = blockwise_invert_lower(&b).ok();
        for inv in up.iter().chain(lo.iter()) {
            worst = worst.max(inf_norm(&(inv * &m - &id)));
            inverted += 1;
        }
        if let (Some(u), Some(l)) = (&up, &lo) {
            agree = agree.max(max_abs_diff(u, l));
            both += 1;
        }
    }
    outcome(
        worst < 1e-9 && agree < 1e-9 && both > 0,
        format!("{inverted} inversions, worst residual {worst:.2e}, formulas agree to {agree:.2e} on {both}"),
    )
}

fn variant_agreement() -> Outcome {
    let mut r = rng(2);
    let (mut count, mut worst, mut tried) = (0, 0.0f64, 0);
    while count < 200 && tried < 2000 {
        tried += 1;
        let layout = if tried % 2 == 0 { Layout::Case1 } else { Layout::Case3 };
        let m = r.random_range(1..=3);
        let l = r.random_range(1..=3);
        let p = random_partition(layout, m, l, &mut r);
        let model = random_model(p.order().len(), &mut r);
        let a = random_angles(&p, &mut r);
        let (Ok(u), Ok(lw)) =
            (solve_auto(&model, &p, &a, Some(Variant::Upper)), solve_auto(&model, &p, &a, Some(Variant::Lower)))
        else {
            continue;
        };
        worst = worst.max(max_abs_diff(&u.u_tilde, &lw.u_tilde)).max(max_abs_diff(&u.e_on_yr, &lw.e_on_yr));
        count += 1;
    }
    outcome(
        count == 200 && worst < 1e-9,
        format!("{count} configurations with both pivots, max difference {worst:.2e}"),
    )
}

fn symplecticity() -> Outcome {
    let mut r = rng(3);
    let (mut count, mut over, mut worst, mut size_at_worst, mut scaled) = (0, 0, 0.0f64, 0.0f64, 0.0f64);
    let mut record = |u: &Mat| {
        let d = symplectic_defect(u).unwrap();
        over += usize::from(d >= 1e-9);
        scaled = scaled.max(d / max_abs(u).max(1.0).powi(2));
        if d > worst {
            worst = d;
            size_at_worst = max_abs(u);
        }
        count += 1;
    };
    for layout in [Layout::Case1, Layout::Case2, Layout::Case3] {
        for _ in 0..200 {
            let m = r.random_range(1..=3);
            let l = if layout == Layout::Case2 { 0 } else { r.random_range(1..=3) };
            let p = random_partition(layout, m, l, &mut r);
            let model = random_model(p.order().len(), &mut r);
            let a = random_angles(&p, &mut r);
            if let Ok(s) = solve_auto(&model, &p, &a, None) {
                record(&s.u_tilde);
            }
        }
    }
    for _ in 0..100 {
        let w = [r.random_range(-1.5..1.5), r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)];
        let t = angles(3, &mut r);
        if let Ok(s) = three_node_family(w[0], w[1], w[2], t[0], t[1], t[2]) {
            record(&s.u_tilde);
        }
    }
    for j in 1..=5u8 {
        for _ in 0..40 {
            let t = angles(4, &mut r);
            let a = FourNodeAngles { theta3: t[0], theta4: t[1], theta_plus: t[2], theta_minus: t[3] };
            if let Ok(s) = four_node_transform(j, &a) {
                record(&s.u_tilde);
            }
        }
    }
    outcome(
        count >= 500 && worst < 1e-9,
        format!(
            "{count} instances, {over} with defect >= 1e-9, worst {worst:.2e} at max|U| = {size_at_worst:.1e}; worst defect / max|U|^2 {scaled:.1e}"
        ),
    )
}

fn cz_recovery() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let m = 1 + k % 4;
        let w = random_adjacency(m, &mut r);
        let mut a = Mat::zeros(2 * m, 2 * m);
        for i in 0..m {
            a[(i, m + i)] = -1.0;
            a[(m + i, i)] = -1.0;
        }
        a.view_mut((m, m), (m, m)).copy_from(&w);
        let model = build_cluster(&ClusterGraph::new(a).unwrap(), None).unwrap();
        let p = NodePartition::new((0..m).collect(), (m..2 * m).collect(), vec![]);
        let angles = MeasurementAngles::from_plus_minus(&vec![0.0; m], &vec![FRAC_PI_2; m], vec![]);
        let s = solve_case2(&model, &p, &angles).unwrap();
        worst = worst.max(max_abs_diff(&s.u_tilde, &cz_of(&w).unwrap()));
    }
    outcome(worst < 1e-10, format!("50 instances up to m = 4, max |U - CZ[A22]| {worst:.2e}"))
}

fn cz_with_squeezing() -> Outcome {
    let mut r = rng(5);
    let (mut general, mut decoupled, mut count) = (0.0f64, 0.0f64, 0);
    let half = -(2.0_f64.ln()) / 2.0;
    for _ in 0..100 {
        let m = r.random_range(1..=3);
        let l = r.random_range(1..=3);
        let p = random_partition(Layout::Case1, m, l, &mut r);
        let model = random_model(m + l, &mut r);
        let th = angles(l, &mut r);
        let Ok(s) = case1_cz_squeeze(&model, &p, &th) else { continue };
        // against the dense elimination of every homodyne equation at Θ_in = 0
        let a = MeasurementAngles::case1(vec![0.0; m], th);
        let (u, _) = direct_solve(model.adjacency(), &p, &a).unwrap();
        let want = squeeze_of(&vec![half; m]) * shear_of(&s.intermediates["P"]).unwrap();
        general = general.max(max_abs_diff(&u, &want)).max(max_abs_diff(&s.u_tilde, &u));
        count += 1;
    }
    for m in 1..=3 {
        for _ in 0..10 {
            let n = m + 2;
            let mut a = random_adjacency(n, &mut r);
            for i in 0..m {
                for j in m..n {
                    a[(i, j)] = 0.0;
                    a[(j, i)] = 0.0;
                }
            }
            let model = build_cluster(&ClusterGraph::new(a.clone()).unwrap(), None).unwrap();
            let p = NodePartition::direct((0..m).collect(), (m..n).collect());
            let th = angles(2, &mut r);
            let s = case1_cz_squeeze(&model, &p, &th).unwrap();
            let a11 = a.view((0, 0), (m, m)).into_owned();
            let want = squeeze_of(&vec![half; m]) * cz_of(&a11).unwrap();
            let (u, _) = direct_solve(model.adjacency(), &p, &MeasurementAngles::case1(vec![0.0; m], th)).unwrap();
            decoupled = decoupled.max(max_abs_diff(&s.u_tilde, &want)).max(max_abs_diff(&u, &want));
        }
    }
    outcome(
        general < 1e-10 && decoupled < 1e-10 && count >= 50,
        format!("S(-ln2/2)CZ[P] on {count} graphs to {general:.2e}; CZ[A11] with A12 = 0 to {decoupled:.2e}"),
    )
}

fn fourier_probe() -> Outcome {
    let one = SchemeFamily::new(
        &ClusterGraph::from_edges(2, &[(0, 1, 1.0)]).unwrap(),
        NodePartition::direct(vec![0], vec![1]),
    )
    .unwrap();
    let square = SchemeFamily::new(
        &ClusterGraph::from_edges(4, &[(0, 2, 1.0), (2, 3, 1.0), (3, 1, 1.0), (0, 1, 1.0)]).unwrap(),
        NodePartition::direct(vec![0, 1], vec![2, 3]),
    )
    .unwrap();
    let f1 = infeasibility_probe(&one, &fourier(1), 10_000, 100, 6).best_residual;
    let f2 = infeasibility_probe(&square, &fourier(2), 10_000, 100, 6).best_residual;
    let c1 = infeasibility_probe(&two_node_family(1.0).unwrap(), &fourier(1), 10_000, 100, 6).best_residual;
    let pair = SchemeFamily::new(
        &ClusterGraph::from_edges(4, &[(0, 2, -1.0), (1, 3, -1.0)]).unwrap(),
        NodePartition::new(vec![0, 1], vec![2, 3], vec![]),
    )
    .unwrap();
    let c2 = infeasibility_probe(&pair, &fourier(2), 10_000, 100, 6).best_residual;
    outcome(
        f1 > 0.05 && f2 > 0.05 && c1 < 1e-6 && c2 < 1e-6,
        format!("case-1 floors {f1:.3} (m = 1), {f2:.3} (m = 2); case-2 controls {c1:.1e}, {c2:.1e}"),
    )
}

fn four_node_search() -> Outcome {
    let rep = search_four_node(&FourNodeSettings::default()).unwrap();
    let universal: Vec<_> = rep.classes.iter().filter(|c| c.universal).collect();
    let all_matched = universal
        .iter()
        .all(|c| c.matched_template.as_ref().is_some_and(|m| m.transform_residual < 1e-9 && m.error_residual < 1e-9));
    outcome(
        rep.universal_classes == 5 && all_matched,
        format!(
            "{} universal classes of {} (need 5); {} match a template transform, {} also match its error; templates covered {:?}",
            rep.universal_classes,
            rep.classes.len(),
            rep.template_classes,
            rep.error_matched_classes,
            rep.templates_covered
        ),
    )
}

fn four_node_decomposition() -> Outcome {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    let mut misses = 0;
    for j in 1..=5u8 {
        let (l, p) = quarter_turns(j).unwrap();
        let mut found = 0;
        while found < 200 {
            // a feasible pair is read off a template matrix at random angles
            let t3 = r.random_range(-PI..PI);
            let t4 = r.random_range(-PI..PI);
            let a = FourNodeAngles { theta3: t3, theta4: t4, theta_plus: 0.0, theta_minus: FRAC_PI_2 };
            let Ok(u) = four_node_matrix(j, &a) else { continue };
            if max_abs(&u) > 20.0 {
                continue;
            }
            let f = euler_decompose(&(rot1(FRAC_PI_2 * l as f64) * &u)).unwrap();
            let reps = [
                (f.phi1, f.r),
                (wrap_angle(f.phi1 + PI), f.r),
                (wrap_angle(f.phi1 + FRAC_PI_2), -f.r),
                (wrap_angle(f.phi1 - FRAC_PI_2), -f.r),
            ];
            let solved =
                reps.iter().find_map(|&(phi1, rr)| four_node_angles_for(j, phi1, rr).ok().map(|s| (phi1, rr, s)));
            let Some((phi1, rr, (ang, phi2))) = solved else {
                misses += 1;
                continue;
            };
            let want = rot1(-FRAC_PI_2 * l as f64 + phi1) * squeeze_of(&[rr]) * rot1(phi2 - FRAC_PI_2 * p as f64);
            let got = four_node_matrix(j, &ang).unwrap();
            worst = worst.max(max_abs_diff(&got, &want));
            found += 1;
        }
    }
    let mut round = 0.0f64;
    for _ in 0..1000 {
        let e =
            EulerFactors { phi1: r.random_range(-PI..PI), r: r.random_range(-2.0..2.0), phi2: r.random_range(-PI..PI) };
        let m = e.reconstruct();
        round = round.max(max_abs_diff(&euler_decompose(&m).unwrap().reconstruct(), &m));
    }
    outcome(
        worst < 1e-9 && round < 1e-9 && misses == 0,
        format!("5 x 200 feasible pairs to {worst:.2e} ({misses} without a branch); 1000 round trips to {round:.2e}"),
    )
}

fn z_family() -> Outcome {
    let mut r = rng(9);
    let mut worst = 0.0f64;
    let mut distinct = true;
    for a23 in [0.5, 1.0, 2.0] {
        let ws: Vec<ZFamilyWeights> = (1..=10).map(|z| three_node_weights_for_z(z, a23).unwrap()).collect();
        for (k, w) in ws.iter().enumerate() {
            let z = (k + 1) as f64;
            for _ in 0..10 {
                let theta = r.random_range(-PI..PI);
                let s =
                    three_node_family(w.a12, w.a13, w.a23, w.theta3, w.theta_plus_for(theta), w.theta_minus).unwrap();
                let target = z_target(z, theta);
                worst = worst.max(max_abs_diff(&s.u_tilde, &target));
            }
            for v in &ws[k + 1..] {
                if (v.a12 - w.a12).abs() < 1e-12 && (v.a13 - w.a13).abs() < 1e-12 {
                    distinct = false;
                }
            }
        }
    }
    outcome(
        worst < 1e-9 && distinct,
        format!("30 weight sets x 10 angles to {worst:.2e}; weight pairs distinct: {distinct}"),
    )
}

fn two_node_vs_templates() -> Outcome {
    let targets: Vec<Mat> = owqc::search::euler_targets(100, 10).iter().map(EulerFactors::reconstruct).collect();
    let budget = SearchBudget::default();
    let two = universality_score(&two_node_family(1.0).unwrap(), &targets, &budget).score;
    let templates: Vec<f64> =
        (1..=5u8).map(|j| universality_score(&TemplateFamily { config_id: j }, &targets, &budget).score).collect();
    outcome(
        two < 0.2 && templates.iter().all(|&s| s == 1.0),
        format!("two-node score {two:.2}; template scores {templates:?}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(11);
    let (mut count, mut worst, mut worst_abs) = (0, 0.0f64, 0.0f64);
    let mut programs = Vec::new();
    while count < 60 {
        let layout = [Layout::Case1, Layout::Case2, Layout::Case3][count % 3];
        let m = r.random_range(1..=2);
        let l = match layout {
            Layout::Case2 => 0,
            Layout::Case1 => m,
            Layout::Case3 => r.random_range(1..=2),
        };
        let p = random_partition(layout, m, l, &mut r);
        let n = p.order().len();
        let program = SchemeProgram {
            model: random_model(n, &mut r),
            angles: random_angles(&p, &mut r),
            partition: p,
            input_state: GaussianState::new(
                nalgebra::DVector::from_fn(2 * m, |_, _| r.random_range(-1.0..1.0)),
                Mat::identity(2 * m, 2 * m) * r.random_range(0.25..1.0),
            )
            .unwrap(),
            squeezing: db_to_r(r.random_range(3.0..15.0)),
        };
        let Ok(sol) = solve_auto(&program.model, &program.partition, &program.angles, None) else { continue };
        let stats = simulate_owqc(&program, SimulationMode::CovarianceExact, None).unwrap();
        let d = compare_with_analytic(&sol, &program, &stats, 1e-9, true).unwrap();
        worst = worst.max(d.relative_defect);
        worst_abs = worst_abs.max(d.covariance_defect);
        if programs.len() < 3 && program.partition.layout() == layout {
            programs.push((sol, program));
        }
        count += 1;
    }
    let mut mc_worst = 0.0f64;
    let mut sigma = 0.0f64;
    for (sol, program) in &programs {
        let settings = MonteCarloSettings { samples: 100_000, seed: 12, sampler: Sampler::Sobol };
        let stats = simulate_owqc(program, SimulationMode::MonteCarlo, Some(settings)).unwrap();
        let d = compare_with_analytic(sol, program, &stats, 1e-3, true).unwrap();
        mc_worst = mc_worst.max(d.relative_defect);
        sigma = sigma.max(d.max_sigma.unwrap_or(0.0));
    }
    outcome(
        worst < 1e-9 && mc_worst < 1e-3 && sigma < 3.0,
        format!(
            "exact on {count} configs: relative {worst:.2e} (absolute {worst_abs:.2e}); Monte Carlo 1e5 on {}: relative {mc_worst:.2e}, max {sigma:.1} sigma",
            programs.len()
        ),
    )
}

fn reduction_chain() -> Outcome {
    let mut r = rng(12);
    let (mut count, mut worst, mut tried) = (0, 0.0f64, 0);
    while count < 100 && tried < 1000 {
        tried += 1;
        let m = r.random_range(1..=3);
        let l = r.random_range(1..=3);
        let n = 2 * m + l;
        let mut a = random_adjacency(n, &mut r);
        for i in 0..2 * m {
            for j in 2 * m..n {
                a[(i, j)] = 0.0;
                a[(j, i)] = 0.0;
            }
        }
        let model = build_cluster(&ClusterGraph::new(a.clone()).unwrap(), None).unwrap();
        let p3 = NodePartition::new((0..m).collect(), (m..2 * m).collect(), (2 * m..n).collect());
        let a3 = random_angles(&p3, &mut r);
        let sub =
            build_cluster(&ClusterGraph::new(a.view((0, 0), (2 * m, 2 * m)).into_owned()).unwrap(), None).unwrap();
        let p2 = NodePartition::new((0..m).collect(), (m..2 * m).collect(), vec![]);
        let a2 = MeasurementAngles::ports(a3.input_port.clone(), a3.cluster_port.clone(), vec![]);
        let (Ok(two), Ok(three)) = (solve_case2(&sub, &p2, &a2), solve_auto(&model, &p3, &a3, None)) else { continue };
        let e_tail = three.e_on_yr.columns(2 * m, l).amax();
        let e_head = max_abs_diff(&three.e_on_yr.columns(0, 2 * m).into_owned(), &two.e_on_yr);
        worst = worst.max(max_abs_diff(&three.u_tilde, &two.u_tilde)).max(e_head).max(e_tail);
        count += 1;
    }
    outcome(count == 100 && worst < 1e-9, format!("{count} instances, max difference in (U, E) {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("blockwise inversion", blockwise_inversion, Some(Duration::from_secs(5))),
        ("variant agreement", variant_agreement, Some(Duration::from_secs(30))),
        ("symplecticity", symplecticity, None),
        ("CZ recovery", cz_recovery, None),
        ("CZ with squeezing", cz_with_squeezing, None),
        ("Fourier infeasibility", fourier_probe, None),
        ("four-node search", four_node_search, Some(Duration::from_secs(600))),
        ("four-node decomposition", four_node_decomposition, None),
        ("three-node z-family", z_family, None),
        ("two-node non-universality", two_node_vs_templates, None),
        ("oracle equivalence", oracle_equivalence, Some(Duration::from_secs(120))),
        ("reduction chain", reduction_chain, None),
    ];
    let only: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut failed = 0;
    for (k, (name, run, limit)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let mut o = run();
        let took = start.elapsed();
        if let Some(limit) = limit {
            if took > *limit {
                o.pass = false;
                o.detail.push_str(&format!("; over the {} s limit", limit.as_secs()));
            }
        }
        println!(
            "{} {:>2} {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            took.as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("{failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
