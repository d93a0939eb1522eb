use castelet_core::clips::{palindrome_time, sample_palindrome};
use castelet_core::fsm::{StateLabel, DEFAULT_FADE_DURATION};
use castelet_core::retarget::{bind_map, RetargetMap};
use castelet_core::scene::{cast_shadow, project_shadow_point, Screen};
use castelet_core::*;
use proptest::prelude::*;

fn unit_quat() -> impl Strategy<Value = Quat> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
        .prop_map(|(w, x, y, z)| Quat::new(w, x, y, z).normalized())
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose(joints: usize) -> impl Strategy<Value = Pose> {
    (vec3(2.0), prop::collection::vec(unit_quat(), joints)).prop_map(|(root_translation, rotations)| Pose {
        root_translation,
        rotations,
    })
}

proptest! {
    #[test]
    fn slerp_stays_unit_and_hits_endpoints(a in unit_quat(), b in unit_quat(), w in 0.0f64..=1.0) {
        let q = a.slerp(b, w);
        prop_assert!(q.is_unit(1e-12));
        prop_assert!(a.slerp(b, 0.0).angle_to(a) < 1e-7);
        prop_assert!(a.slerp(b, 1.0).angle_to(b) < 1e-7);
        // Shortest arc: the path never exceeds the direct geodesic.
        prop_assert!(a.angle_to(q) + q.angle_to(b) <= a.angle_to(b) + 1e-9);
    }

    #[test]
    fn lerp_pose_endpoints_are_exact(a in pose(4), b in pose(4)) {
        prop_assert_eq!(lerp_pose(&a, &b, 0.0).unwrap(), a.clone());
        prop_assert_eq!(lerp_pose(&a, &b, 1.0).unwrap(), b);
    }

    #[test]
    fn pose_distance_is_a_metric(a in pose(3), b in pose(3), c in pose(3)) {
        let d = |x: &Pose, y: &Pose| pose_distance(x, y).unwrap();
        prop_assert!(d(&a, &a) < 1e-7);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
    }

    #[test]
    fn split_then_reassemble_is_identity(
        poses in prop::collection::vec(pose(2), 8..40),
        a in 0.05f64..0.95,
        b in 0.05f64..0.95,
    ) {
        let take = Take::new("t", "sk", 1.0 / 30.0, poses).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let d = take.duration();
        match split_take(&take, lo * d, hi * d, ["s", "a", "e"]) {
            Ok((s, act, e)) => {
                prop_assert_eq!(pose_distance(s.last(), act.first()).unwrap(), 0.0);
                prop_assert_eq!(pose_distance(act.last(), e.first()).unwrap(), 0.0);
                let back = reassemble("t", &[&s, &act, &e]).unwrap();
                prop_assert_eq!(back, take);
            }
            Err(ClipError::SegmentTooShort { .. }) | Err(ClipError::CutOutOfRange { .. }) => {}
            Err(other) => prop_assert!(false, "unexpected {other:?}"),
        }
    }

    #[test]
    fn palindrome_time_stays_in_clip(d in 0.01f64..10.0, t in 0.0f64..100.0) {
        let u = palindrome_time(d, t);
        prop_assert!((0.0..=d).contains(&u));
        prop_assert!((palindrome_time(d, t + 2.0 * d) - u).abs() < 1e-9 * (1.0 + t));
    }

    #[test]
    fn shadow_points_lie_on_plane_and_ray(
        n in vec3(1.0).prop_filter_map("unit", |v| v.normalized()),
        d in -3.0f64..3.0,
        light in vec3(5.0),
        p in vec3(5.0),
    ) {
        if let Some(s) = project_shadow_point(light, n, d, p) {
            prop_assert!((n.dot(s) - d).abs() < 1e-9 * (1.0 + s.length()));
            let cross = (p - light).cross(s - light).length();
            prop_assert!(cross <= 1e-9 * (1.0 + (p - light).length() * (s - light).length()));
        }
    }
}

fn library() -> ClipLibrary {
    let ramp = |from: f64, to: f64, n: usize| -> Vec<Pose> {
        (0..n)
            .map(|i| Pose {
                root_translation: Vec3::ZERO,
                rotations: vec![Quat::from_axis_angle(Vec3::Z, from + (to - from) * i as f64 / (n - 1) as f64)],
            })
            .collect()
    };
    let ft = 1.0 / 60.0;
    let mut lib = ClipLibrary::new();
    for (id, from, to) in [("i0", 0.0, 0.1), ("i1", 1.0, 1.1), ("i2", 2.0, 2.1)] {
        lib.insert(AnimationClip::idle(id, "sk", ft, ramp(from, to, 20)).unwrap()).unwrap();
    }
    for (id, from, to, s, e) in [("a1", 0.1, 1.0, "i0", "i1"), ("a2", 1.1, 2.0, "i1", "i2"), ("a3", 2.1, 0.0, "i2", "i0")] {
        lib.insert(AnimationClip::action(id, "sk", ft, ramp(from, to, 40), s, e).unwrap()).unwrap();
    }
    lib
}

#[derive(Clone, Debug)]
enum Ev {
    Go(usize),
    Suspend,
    Live(bool),
    Tick(f64),
}

fn event() -> impl Strategy<Value = Ev> {
    prop_oneof![
        (0usize..3).prop_map(Ev::Go),
        Just(Ev::Suspend),
        any::<bool>().prop_map(Ev::Live),
        (0.001f64..0.2).prop_map(Ev::Tick),
        (0.001f64..0.2).prop_map(Ev::Tick),
        (0.001f64..0.2).prop_map(Ev::Tick),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn fsm_follows_graph_and_mixes_convexly(events in prop::collection::vec(event(), 1..120)) {
        let lib = library();
        let sk = Skeleton::new(vec![Joint::new("root", None, Vec3::ZERO)]).unwrap();
        let bind = bind_map(&RetargetMap::by_shared_names(&sk, &sk), &sk, &sk).unwrap();
        let mut f = OavFsm::new("sk", 1, "i0", DEFAULT_FADE_DURATION, &lib).unwrap().with_live_binding(bind).unwrap();
        let mut label = StateLabel::Idle;
        let stream = Pose { root_translation: Vec3::ZERO, rotations: vec![Quat::from_axis_angle(Vec3::X, 0.3)] };
        for ev in events {
            match ev {
                Ev::Go(i) => drop(f.trigger_action(["a1", "a2", "a3"][i], &lib).unwrap()),
                Ev::Suspend => drop(f.suspend(&lib).unwrap()),
                Ev::Live(on) => drop(f.set_live(on, &lib).unwrap()),
                Ev::Tick(dt) => {
                    let (p, s) = f.tick(dt, &lib, Some(&stream)).unwrap();
                    for (from, to) in &s.transitions {
                        prop_assert_eq!(*from, label);
                        prop_assert!(from.may_become(*to), "{:?} -> {:?}", from, to);
                        label = *to;
                    }
                    prop_assert_eq!(label, s.state.label());
                    prop_assert!(s.mix.iter().all(|m| m.weight >= 0.0));
                    prop_assert!((s.mix_sum() - 1.0).abs() < 1e-6);
                    prop_assert!(p.rotations[0].is_unit(1e-9));
                }
            }
        }
    }
}

#[test]
fn palindrome_has_no_wrap_jump() {
    // 30° start/end mismatch at 60 Hz.
    let ft = 1.0 / 60.0;
    let n = 61;
    let poses: Vec<Pose> = (0..n)
        .map(|i| Pose {
            root_translation: Vec3::ZERO,
            rotations: vec![Quat::from_axis_angle(Vec3::Y, 30f64.to_radians() * i as f64 / (n - 1) as f64)],
        })
        .collect();
    let idle = AnimationClip::idle("i", "sk", ft, poses).unwrap();
    let intra = idle
        .poses()
        .windows(2)
        .map(|w| pose_distance(&w[0], &w[1]).unwrap())
        .fold(0.0, f64::max);
    let mut prev = sample_palindrome(&idle, 0.0).unwrap();
    let mut worst = 0.0f64;
    for k in 1..400 {
        let p = sample_palindrome(&idle, k as f64 * ft).unwrap();
        worst = worst.max(pose_distance(&prev, &p).unwrap());
        prev = p;
    }
    assert!((worst - intra).abs() < 1e-9, "{worst} vs {intra}");
}

#[test]
fn flat_polygon_shadow_matches_similar_triangles() {
    let screen = Screen {
        name: "s".into(),
        normal: Vec3::Y,
        d: 0.0,
        bounds: vec![
            Vec3::new(-50.0, 0.0, -50.0),
            Vec3::new(-50.0, 0.0, 50.0),
            Vec3::new(50.0, 0.0, 50.0),
            Vec3::new(50.0, 0.0, -50.0),
        ],
        translucency: 1.0,
    };
    let light = Vec3::new(0.3, 6.0, -0.2);
    let verts = vec![Vec3::new(1.0, 2.0, 0.0), Vec3::new(2.0, 2.0, 1.0), Vec3::new(0.5, 2.0, 2.0)];
    let sh = cast_shadow(light, &screen, &verts, &[vec![0, 1, 2]]).unwrap();
    for (s, p) in sh.outline.iter().zip(&verts) {
        let expect = light + (*p - light) * 1.5;
        assert!((*s - expect).length() < 1e-9);
    }
}
