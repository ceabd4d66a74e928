use nalgebra::Matrix2xX;
use proptest::prelude::*;
use tpstext::bezier::{eval_curve, fit_side};
use tpstext::dataio::{
    generate_synthetic, make_correspondences, parse_generic_json, split_sides, to_generic_json, Source,
    SyntheticSpec, TextInstance,
};
use tpstext::geometry::{perspective_from_left_edge, polygon_area};
use tpstext::losses::{ba_loss, make_border_mask, reg_loss, relax, RegInstance};
use tpstext::metrics::{iou, tiou};
use tpstext::tps::{decode, fit, make_fiducials, BasisGrid, Correspondences, Distribution};
use tpstext::{FiducialConfig, Point, Polygon, TpsParams};

fn cross() -> FiducialConfig {
    make_fiducials(Distribution::Cross, 8).unwrap()
}

fn rotate(p: Point, theta: f64) -> Point {
    let (s, c) = theta.sin_cos();
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

prop_compose! {
    fn tps_params()(
        theta in 0.0..std::f64::consts::TAU,
        sx in 20.0..200.0f64,
        sy in 20.0..200.0f64,
        off in (-300.0..300.0f64, -300.0..300.0f64),
        w in proptest::collection::vec(-0.2..0.2f64, 16),
    ) -> TpsParams {
        let (s, c) = theta.sin_cos();
        let lin = [[c * sx, -s * sy], [s * sx, c * sy]];
        let t = Matrix2xX::from_fn(11, |r, col| match col {
            0 => if r == 0 { off.0 } else { off.1 },
            1 | 2 => lin[r][col - 1],
            _ => w[2 * (col - 3) + r],
        });
        TpsParams::new(cross(), t).unwrap()
    }
}

prop_compose! {
    /// A rotated rectangle with its vertices nudged, listed clockwise in image coordinates.
    fn quad()(
        o in (0.0..400.0f64, 0.0..400.0f64),
        theta in -1.0..1.0f64,
        w in 40.0..300.0f64,
        h in 10.0..60.0f64,
        jitter in proptest::collection::vec(-3.0..3.0f64, 8),
    ) -> Vec<Point> {
        let u = rotate(Point::new(w, 0.0), theta);
        let v = rotate(Point::new(0.0, h), theta);
        let o = Point::new(o.0, o.1);
        [o, o + u, o + u + v, o + v]
            .iter()
            .enumerate()
            .map(|(i, &p)| p + Point::new(jitter[2 * i], jitter[2 * i + 1]))
            .collect()
    }
}

fn bent(seed: u64, angle: f64) -> TextInstance {
    let spec = SyntheticSpec { seed, perspective_angle_deg: angle, text_height: 20.0, ..Default::default() };
    generate_synthetic(&spec).unwrap().instance
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn area_is_rigid_invariant_and_scales_quadratically(
        pts in quad(),
        theta in -3.0..3.0f64,
        shift in (-1e3..1e3f64, -1e3..1e3f64),
        scale in 0.1..10.0f64,
    ) {
        let poly = Polygon::new(pts).unwrap();
        let a = polygon_area(&poly).unwrap();
        let moved = poly.map(|p| rotate(p, theta) + Point::new(shift.0, shift.1)).unwrap();
        prop_assert!((polygon_area(&moved).unwrap() - a).abs() <= 1e-9 * a);
        let scaled = poly.map(|p| p * scale).unwrap();
        prop_assert!((polygon_area(&scaled).unwrap() - a * scale * scale).abs() <= 1e-9 * a * scale * scale);
    }

    #[test]
    fn zero_angle_perspective_fixes_vertices(pts in quad(), w in 100.0..2000.0f64, h in 100.0..2000.0f64) {
        let hom = perspective_from_left_edge(0.0, w, h, w).unwrap();
        for p in pts {
            prop_assert!(hom.apply(p).dist(p) < 1e-9);
        }
    }

    #[test]
    fn decode_is_linear_in_params(a in tps_params(), b in tps_params(), alpha in -2.0..2.0f64, beta in -2.0..2.0f64) {
        let mix = TpsParams::new(cross(), a.matrix() * alpha + b.matrix() * beta).unwrap();
        let (ga, gb, gm) = (decode(&a, 5, 7).unwrap(), decode(&b, 5, 7).unwrap(), decode(&mix, 5, 7).unwrap());
        for ((pa, pb), pm) in ga.points().iter().zip(gb.points()).zip(gm.points()) {
            let expected = *pa * alpha + *pb * beta;
            prop_assert!(pm.dist(expected) <= 1e-9 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn basis_is_shared_across_params(a in tps_params(), b in tps_params()) {
        let grid = BasisGrid::new(&cross(), 4, 9).unwrap();
        let before = grid.phi().clone();
        grid.decode(&a).unwrap();
        grid.decode(&b).unwrap();
        prop_assert_eq!(grid.phi(), &before);
        let (shared, fresh) = (grid.decode(&a).unwrap(), decode(&a, 4, 9).unwrap());
        prop_assert_eq!(shared.points(), fresh.points());
    }

    #[test]
    fn refit_recovers_params(truth in tps_params(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let source: Vec<Point> = (0..64).map(|_| Point::new(rng.random(), rng.random())).collect();
        let target = source.iter().map(|&s| truth.apply(s)).collect();
        let f = fit(truth.config(), &Correspondences::new(source, target).unwrap(), 0.0).unwrap();
        prop_assert!((f.params.matrix() - truth.matrix()).abs().max() < 1e-6);
    }

    #[test]
    fn fit_is_similarity_equivariant(
        seed in 0u64..1000,
        theta in -3.0..3.0f64,
        scale in 0.2..5.0f64,
        shift in (-500.0..500.0f64, -500.0..500.0f64),
    ) {
        let split = split_sides(&bent(seed, 0.0)).unwrap();
        let corr = make_correspondences(&split, 32).unwrap();
        let q = |p: Point| rotate(p, theta) * scale + Point::new(shift.0, shift.1);
        let (source, target): (Vec<Point>, Vec<Point>) = corr.iter().map(|(s, t)| (s, q(t))).unzip();
        let moved = Correspondences::new(source, target).unwrap();
        let a = decode(&fit(&cross(), &corr, 1e-8).unwrap().params, 6, 16).unwrap();
        let b = decode(&fit(&cross(), &moved, 1e-8).unwrap().params, 6, 16).unwrap();
        let extent = 20.0 * 8.0 * scale;
        for (pa, pb) in a.points().iter().zip(b.points()) {
            prop_assert!(q(*pa).dist(*pb) <= 1e-6 * extent);
        }
    }

    #[test]
    fn bezier_side_passes_ends_and_stays_in_hull(
        ys in proptest::collection::vec(-20.0..20.0f64, 12),
        t in 0.0..=1.0f64,
    ) {
        let n = ys.len();
        let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let pts: Vec<Point> = ts.iter().zip(&ys).map(|(&t, &y)| Point::new(200.0 * t, y)).collect();
        let ctrl = fit_side(&pts, &ts, 3).unwrap();
        prop_assert_eq!(eval_curve(&ctrl, 0.0), pts[0]);
        prop_assert_eq!(eval_curve(&ctrl, 1.0), pts[n - 1]);
        prop_assert!(hull_excess(&ctrl, eval_curve(&ctrl, t)) <= 1e-9);
    }

    #[test]
    fn bezier_side_fit_is_affine_equivariant(
        ys in proptest::collection::vec(-20.0..20.0f64, 10),
        m in proptest::array::uniform4(-2.0..2.0f64),
        shift in (-100.0..100.0f64, -100.0..100.0f64),
    ) {
        prop_assume!((m[0] * m[3] - m[1] * m[2]).abs() > 0.1);
        let a = |p: Point| Point::new(m[0] * p.x + m[1] * p.y + shift.0, m[2] * p.x + m[3] * p.y + shift.1);
        let n = ys.len();
        let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let pts: Vec<Point> = ts.iter().zip(&ys).map(|(&t, &y)| Point::new(150.0 * t, y)).collect();
        let moved: Vec<Point> = pts.iter().map(|&p| a(p)).collect();
        let c1 = fit_side(&pts, &ts, 3).unwrap();
        let c2 = fit_side(&moved, &ts, 3).unwrap();
        for (p, q) in c1.iter().zip(&c2) {
            prop_assert!(a(*p).dist(*q) < 1e-7);
        }
    }

    #[test]
    fn relaxation_never_drops_when_threshold_drops(m in 0.0..=1.0f64, lo in 0.01..1.0f64, hi in 0.01..1.0f64) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        prop_assert!(relax(m, lo) >= relax(m, hi));
    }

    #[test]
    fn ba_loss_is_bounded(pts in quad(), probes in proptest::collection::vec((-20.0..820.0f64, -20.0..820.0f64), 1..40)) {
        let poly = Polygon::new(pts).unwrap();
        let mask = make_border_mask(&poly, 20.0, 800, 800, 0.6, 0.8).unwrap();
        let points: Vec<Point> = probes.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let loss = ba_loss(&mask, &points).unwrap().loss;
        prop_assert!((0.0..=1.0).contains(&loss));
        // vertices sit on the border, where the relaxed mask is exactly 1
        let on_border: Vec<Point> = poly.points().iter().map(|p| Point::new(p.x.round(), p.y.round())).collect();
        let plateau: Vec<Point> = on_border.into_iter().filter(|p| mask.relaxed.get(p.x as usize, p.y as usize) == 1.0).collect();
        prop_assume!(!plateau.is_empty());
        prop_assert_eq!(ba_loss(&mask, &plateau).unwrap().loss, 0.0);
    }

    #[test]
    fn reg_loss_ignores_instance_order(quads in proptest::collection::vec(quad(), 2..6), rot in 1usize..5) {
        let data: Vec<_> = quads
            .iter()
            .map(|q| {
                let poly = Polygon::new(q.clone()).unwrap();
                let mask = make_border_mask(&poly, 20.0, 800, 800, 0.6, 0.8).unwrap();
                let boundary: Vec<Point> = q.iter().map(|p| *p + Point::new(1.5, -0.7)).collect();
                (poly, mask, boundary)
            })
            .collect();
        let insts: Vec<RegInstance> = data
            .iter()
            .map(|(poly, mask, boundary)| RegInstance {
                boundary,
                corners: [boundary[0], boundary[1], boundary[2], boundary[3]],
                mask,
                gt_corners: [poly.points()[0], poly.points()[1], poly.points()[2], poly.points()[3]],
                area: polygon_area(poly).unwrap(),
            })
            .collect();
        let mut rotated = insts.clone();
        rotated.rotate_left(rot % insts.len());
        let mut reversed = insts.clone();
        reversed.reverse();
        let base = reg_loss(&insts).unwrap();
        prop_assert_eq!(base, reg_loss(&rotated).unwrap());
        prop_assert_eq!(base, reg_loss(&reversed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tiou_terms_are_penalized_iou_and_swap(a in quad(), b in quad()) {
        let (pa, pb) = (Polygon::new(a).unwrap(), Polygon::new(b).unwrap());
        let i = iou(&pa, &pb, 256).unwrap();
        let (r, p) = tiou(&pa, &pb, 256).unwrap();
        prop_assert!(r <= i + 1e-15 && p <= i + 1e-15);
        let (r2, p2) = tiou(&pb, &pa, 256).unwrap();
        prop_assert!((r - p2).abs() < 1e-12 && (p - r2).abs() < 1e-12);
    }

    #[test]
    fn scores_survive_rigid_motion(
        pts in quad(),
        theta in -3.0..3.0f64,
        shift in (-300.0..300.0f64, -300.0..300.0f64),
        nudge in (-6.0..6.0f64, -6.0..6.0f64),
    ) {
        let gt = Polygon::new(pts).unwrap();
        let pred = gt.map(|p| p + Point::new(nudge.0, nudge.1)).unwrap();
        let m = |p: Point| rotate(p, theta) + Point::new(shift.0, shift.1);
        let (gm, pm) = (gt.map(m).unwrap(), pred.map(m).unwrap());
        prop_assert!((iou(&pred, &gt, 512).unwrap() - iou(&pm, &gm, 512).unwrap()).abs() < 0.01);
        let (r, p) = tiou(&pred, &gt, 512).unwrap();
        let (rm, pmm) = tiou(&pm, &gm, 512).unwrap();
        prop_assert!((r - rm).abs() < 0.01 && (p - pmm).abs() < 0.01);
    }

    #[test]
    fn generic_json_round_trips_exactly(
        quads in proptest::collection::vec(quad(), 1..5),
        ids in proptest::collection::vec("[a-zA-Z0-9_ -]{1,12}", 5),
        words in proptest::collection::vec(proptest::option::of("\\PC{0,10}"), 5),
    ) {
        let instances: Vec<TextInstance> = quads
            .into_iter()
            .enumerate()
            .map(|(i, q)| TextInstance::new(ids[i].clone(), q, words[i].clone(), Source::Generic).unwrap())
            .collect();
        let once = parse_generic_json(&to_generic_json(&instances).unwrap()).unwrap().instances;
        let twice = parse_generic_json(&to_generic_json(&once).unwrap()).unwrap().instances;
        prop_assert_eq!(&once, &instances);
        prop_assert_eq!(&twice, &instances);
    }

    #[test]
    fn synthetic_generation_is_deterministic(seed in any::<u64>(), angle in 0.0..80.0f64) {
        prop_assert_eq!(bent(seed, angle), bent(seed, angle));
    }

    #[test]
    fn correspondences_keep_corners_exact(seed in any::<u64>(), angle in 0.0..80.0f64) {
        let split = split_sides(&bent(seed, angle)).unwrap();
        let corr = make_correspondences(&split, 32).unwrap();
        for c in split.corners() {
            prop_assert!(corr.iter().any(|(_, t)| t == c));
        }
    }
}

/// Distance by which `p` lies outside the convex hull of `pts` (0 inside).
fn hull_excess(pts: &[Point], p: Point) -> f64 {
    let mut sorted = pts.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Point> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        for &q in sorted.iter() {
            while hull.len() >= start + 2 && (hull[hull.len() - 1] - hull[hull.len() - 2]).cross(q - hull[hull.len() - 2]) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
        if pass == 0 {
            sorted.reverse();
        }
    }
    if hull.len() < 3 {
        return hull.windows(2).map(|w| tpstext::geometry::point_segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
    }
    let outside = (0..hull.len()).any(|i| (hull[(i + 1) % hull.len()] - hull[i]).cross(p - hull[i]) < 0.0);
    if !outside {
        return 0.0;
    }
    (0..hull.len())
        .map(|i| tpstext::geometry::point_segment_distance(p, hull[i], hull[(i + 1) % hull.len()]))
        .fold(f64::INFINITY, f64::min)
}
