use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vmm_core::config::{RunConfig, Spacing};
use vmm_core::critical::{morse_from_hessian, refine, CriticalPointRecord, RefineOptions};
use vmm_core::deform::{build_chart, deform_phi, CutoffZeta};
use vmm_core::entropy::{
    accepted_indices, beta_prime_estimate, classify_entropy_sigmas, select_entropy_sigmas,
    EntropySchedule,
};
use vmm_core::functionals::{self, make_loop_length, LoopConfig, SurfaceChart};
use vmm_core::model::entropy_sigma_max;
use vmm_core::perturb::{perturb_functional, sample_tilt};
use vmm_core::sweepout::{estimate_width_curve, tighten, Sweepout, WidthCurve};
use vmm_core::*;

fn double_well() -> functionals::Problem {
    functionals::build("double_well").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn viscous_value_nondecreasing_in_sigma(x in -2.0..2.0f64, y in -2.0..2.0f64, mut s in prop::collection::vec(0.0..1.0f64, 20)) {
        let fam = double_well().viscous.unwrap();
        let p = Point::new(vec![x, y]).unwrap();
        s.sort_by(f64::total_cmp);
        let v: Vec<f64> = s.iter().map(|&s| evaluate_viscous(&fam, s, &p).unwrap()).collect();
        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn entropy_bound_strictly_decreasing(a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let lo = (-std::f64::consts::E.powi(2)).exp();
        let hi = entropy_sigma_max();
        let (a, b) = (lo + (hi - lo) * a.min(b), lo + (hi - lo) * a.max(b));
        prop_assume!(b - a > 1e-9);
        let f = |s| entropy_bound(s, EntropyForm::Derivative).unwrap();
        prop_assert!(f(a) > f(b));
    }

    #[test]
    fn loop_energies_invariant_under_cyclic_relabeling(shift in 1usize..16, seed in any::<u64>(), which in 0usize..3) {
        let key = ["torus_loop:R=2,r=0.5,N=16", "ellipsoid_loop:a=1,c=0.5,N=16", "alpha_loop:N=16,target=flat"][which];
        let p = functionals::build(key).unwrap();
        let x = p.sample_point(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = 16;
        let y = Vector::from_fn(2 * n, |k, _| x[(k + 2 * shift) % (2 * n)]);
        for h in p.handles() {
            prop_assert_eq!(h.value(&x).unwrap(), h.value(&y).unwrap());
        }
    }

    #[test]
    fn loop_length_invariant_under_rigid_motion(axis in prop::array::uniform3(-3.0..3.0f64), t in prop::array::uniform3(-5.0..5.0f64), seed in any::<u64>()) {
        let chart = SurfaceChart::torus(2.0, 0.5).unwrap();
        let r: Matrix3<f64> = Rotation3::from_scaled_axis(Vector3::from(axis)).into_inner();
        let moved = chart.clone().with_rigid_motion(r, Vector3::from(t));
        let a = make_loop_length(LoopConfig::closed(chart, 16).unwrap());
        let b = make_loop_length(LoopConfig::closed(moved, 16).unwrap());
        let p = functionals::build("torus_loop:R=2,r=0.5,N=16").unwrap();
        let x = p.sample_point(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((a.value(&x).unwrap() - b.value(&x).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn morse_index_invariant_under_rotation(vals in prop::collection::vec((0.1..10.0f64, any::<bool>()), 2..8), seed in any::<u64>()) {
        let n = vals.len();
        let d = Matrix::from_diagonal(&Vector::from_iterator(n, vals.iter().map(|&(l, neg)| if neg { -l } else { l })));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Matrix::from_fn(n, n, |_, _| rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal));
        let q = g.qr().q();
        let h = &q * &d * q.transpose();
        let h = (&h + h.transpose()) * 0.5;
        let tol = ToleranceProfile::default();
        let a = morse_from_hessian(&d, &tol).unwrap();
        let b = morse_from_hessian(&h, &tol).unwrap();
        prop_assert_eq!(a.index, b.index);
        prop_assert_eq!(a.index, vals.iter().filter(|v| v.1).count());
    }

    #[test]
    fn refine_is_idempotent(x in -0.3..0.3f64, y in -0.3..0.3f64) {
        let p = double_well();
        let opts = RefineOptions::default();
        let a = refine(&Point::new(vec![x, y]).unwrap(), &*p.family, 0.01, &opts).unwrap();
        let b = refine(&a.point, &*p.family, 0.01, &opts).unwrap();
        prop_assert!(a.point.distance(&b.point) < opts.tol_grad);
    }

    #[test]
    fn record_entropy_residual_recomputes(x in -2.0..2.0f64, y in -2.0..2.0f64, s in 0.001..0.06f64) {
        let p = double_well();
        let pt = Point::new(vec![x, y]).unwrap();
        let r = CriticalPointRecord::evaluate(&pt, &*p.family, s, &ToleranceProfile::default(), None).unwrap();
        let g = x.powi(4) + y.powi(4);
        let l = (1.0 / s).ln();
        let expected = s * s * g - 1.0 / (l * l.ln());
        let got = r.entropy_residual.unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn tilt_is_c1_small(seed in any::<u64>(), e in 0usize..3) {
        let eps = [1e-1, 1e-2, 1e-3][e];
        let p = functionals::build("monkey_saddle:confine=1,c=0").unwrap();
        let f = p.viscous.as_ref().unwrap().at(0.01);
        let origin = Point::new(vec![0.0, 0.0]).unwrap();
        let spec = sample_tilt(&[origin], 0.2, eps, seed).unwrap();
        let ft = perturb_functional(&f, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..10_000 {
            let x = Vector::from_fn(2, |_, _| rand::Rng::random_range(&mut rng, -0.6..0.6));
            let dv = (ft.value(&x).unwrap() - f.value(&x).unwrap()).abs();
            let dg = (ft.gradient(&x).unwrap() - f.gradient(&x).unwrap()).norm();
            prop_assert!(dv <= eps && dg <= eps, "dv {dv:e} dg {dg:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tighten_never_raises_sup_and_keeps_boundary(mx in -0.9..0.9f64, my in -1.0..1.0f64) {
        let p = double_well();
        let a = Vector::from_vec(vec![-1.0, 0.0]);
        let b = Vector::from_vec(vec![1.0, 0.0]);
        let m = Vector::from_vec(vec![mx, my]);
        let s = Sweepout::polyline(&[a, m, b], 17).unwrap();
        let t = tighten(&s, &*p.family, 0.01, 200).unwrap();
        prop_assert!(t.sup_trace.windows(2).all(|w| w[1] <= w[0]));
        for i in 0..s.len() {
            if s.is_boundary(i) {
                let (u, v) = (s.frame(i), t.sweepout.frame(i));
                prop_assert!(u.iter().zip(v.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
    }

    #[test]
    fn deform_phi_is_identity_outside_the_cylinder(seed in any::<u64>()) {
        let p = double_well();
        let opts = RefineOptions::default();
        let tol = ToleranceProfile::default();
        let x0 = refine(&Point::new(vec![0.01, 0.01]).unwrap(), &*p.family, 0.0, &opts).unwrap();
        let rec = CriticalPointRecord::evaluate(&x0.point, &*p.family, 0.0, &tol, None).unwrap();
        let chart = build_chart(&rec, &*p.family, 0.0, &tol, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reach = 4.0 * chart.r2;
        for _ in 0..1000 {
            let x = Vector::from_fn(2, |_, _| rand::Rng::random_range(&mut rng, -reach..reach));
            if !chart.in_cylinder(&x, 2.0 * chart.r1, chart.r2) {
                prop_assert_eq!(deform_phi(&x, &chart, &CutoffZeta), x);
            }
        }
    }

    #[test]
    fn accepted_schedule_indices_recur(kind in 0usize..5, c in 0.1..10.0f64) {
        let beta = move |s: f64| match kind {
            0 => 1.0 + c * s,
            1 => 1.0 + c * s.sqrt(),
            2 => 1.0 + c * (s / 0.01).floor(),
            3 => 1.0 + c * s + if s >= 0.03 { c } else { 0.0 },
            _ => 1.0,
        };
        let schedule = EntropySchedule::new(16, 100_000).unwrap();
        let inc = schedule.increments(beta);
        for len in [1_000, 10_000, 100_000] {
            prop_assert!(!accepted_indices(&inc[..len], &schedule.b[..len]).is_empty());
        }
        for len in (20_000..=100_000).step_by(10_000) {
            let acc = accepted_indices(&inc[..len], &schedule.b[..len]);
            prop_assert!(acc.iter().any(|&k| k >= len / 2), "no accepted index in [{}, {len})", len / 2);
        }
    }

    #[test]
    fn selection_stable_under_refinement(kind in 0usize..2, c in 0.5..20.0f64, n in 20usize..60) {
        let beta = move |s: f64| if kind == 0 { 1.0 + c * s } else { 1.0 + c * s.sqrt() };
        let grid = |m: usize| -> Vec<f64> { (0..m).map(|i| 0.005 + 0.055 * i as f64 / (m - 1) as f64).collect() };
        let curve = |g: Vec<f64>| {
            let b = g.iter().map(|&s| beta(s)).collect();
            WidthCurve::from_samples(g, b).unwrap()
        };
        let coarse = curve(grid(n));
        let fine = curve(grid(2 * n - 1));
        let kept = select_entropy_sigmas(&fine).unwrap();
        for cert in classify_entropy_sigmas(&coarse, 2).unwrap() {
            if cert.slack > 0.1 * cert.bound && fine.index_of(cert.sigma).is_some_and(|i| i + 2 < fine.len()) {
                prop_assert!(kept.iter().any(|k| (k.sigma - cert.sigma).abs() < 1e-15), "sigma {} dropped", cert.sigma);
            }
        }
    }

    #[test]
    fn certificate_slack_recomputes_exactly(c in 0.5..20.0f64, n in 20usize..60) {
        let g: Vec<f64> = (0..n).map(|i| 0.005 + 0.055 * i as f64 / (n - 1) as f64).collect();
        let b = g.iter().map(|&s| 1.0 + c * s.sqrt()).collect();
        let curve = WidthCurve::from_samples(g, b).unwrap();
        for cert in classify_entropy_sigmas(&curve, 2).unwrap() {
            let w = cert.stencil[2] - cert.sigma;
            let est = beta_prime_estimate(&curve, cert.sigma, w).unwrap();
            let bound = entropy_bound(cert.sigma, EntropyForm::Derivative).unwrap();
            prop_assert_eq!(cert.slack, bound - est);
        }
    }

    #[test]
    fn config_round_trip_is_fixed_point(seed in 0..=i64::MAX as u64, d in 1usize..3, frames in 16usize..80, points in 3usize..40, lin in any::<bool>(), zero in any::<bool>(), hi in 0.02..0.065f64) {
        let mut cfg = RunConfig { seed, d, ..RunConfig::default() };
        cfg.sweepout.frames = frames;
        cfg.grid.points = points;
        cfg.grid.max = hi;
        cfg.grid.include_zero = zero;
        cfg.grid.spacing = if lin { Spacing::Linear } else { Spacing::Geometric };
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text, &[]).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml_string(), text);
    }
}

#[test]
fn warm_started_width_curve_dominates_beta0() {
    let p = double_well();
    let seed = p.seed_sweepout(33).unwrap();
    let grid: Vec<f64> = (0..10).map(|i| 0.006 * i as f64).collect();
    let curve = estimate_width_curve(&seed, &*p.family, &grid, 3000, false).unwrap();
    assert!(curve.betas.iter().all(|&b| b >= curve.betas[0] - 1e-9));
}

#[test]
fn quadratic_saddle_width_is_exact() {
    let p = functionals::build("quadratic_saddle:neg=1,pos=1").unwrap();
    let seed = p.seed_sweepout(33).unwrap();
    let curve = estimate_width_curve(&seed, &*p.family, &[0.0, 0.01, 0.02], 3000, false).unwrap();
    assert!(curve.beta0().abs() <= 1e-6);
}
