use super::*;
use crate::skeleton::Joint;
use crate::skin::SilhouetteMesh;
use alloc::string::ToString;
use alloc::vec;

const SQUARE: [[f64; 2]; 4] = [[-0.5, 0.0], [0.5, 0.0], [0.5, 1.0], [-0.5, 1.0]];

fn oav(id: &str, visible: bool, casts_shadow: bool) -> OavInstance {
    let skeleton = Skeleton::new(vec![Joint::new("root", None, Vec3::ZERO)]).unwrap();
    let mesh = SilhouetteMesh::new(SQUARE.to_vec(), vec![vec![0, 1, 2, 3]], vec![vec![(0, 1.0)]; 4])
        .unwrap()
        .bind(&skeleton)
        .unwrap();
    OavInstance {
        id: id.into(),
        skeleton,
        mesh,
        position: Vec3::ZERO,
        yaw: 0.0,
        visible,
        casts_shadow,
        tint: Rgba::new(0.8, 0.6, 0.2, 0.5),
    }
}

fn screen(half: f64) -> Screen {
    Screen {
        name: "back".into(),
        normal: Vec3::Z,
        d: -2.0,
        bounds: vec![
            Vec3::new(-half, -half, -2.0),
            Vec3::new(half, -half, -2.0),
            Vec3::new(half, half, -2.0),
            Vec3::new(-half, half, -2.0),
        ],
        translucency: 0.6,
    }
}

/// Screen at z = -2, light at z = 2, flat avatar at z = 0.
fn scene(oavs: Vec<OavInstance>) -> CasteletScene {
    CasteletScene {
        stage: Stage {
            min: Vec3::new(-5.0, 0.0, -3.0),
            max: Vec3::new(5.0, 5.0, 3.0),
        },
        screens: vec![screen(10.0)],
        lights: vec![PointLight {
            name: "key".into(),
            position: Vec3::new(0.0, 0.0, 2.0),
            enabled: true,
        }],
        oavs,
        camera: Camera {
            projection: Projection::Orthographic { view_height: 10.0 },
            position: Vec3::new(0.0, 0.0, 10.0),
            look: -Vec3::Z,
            up: Vec3::Y,
            viewport: [1000.0, 1000.0],
        },
    }
}

fn compose(s: &CasteletScene) -> RenderFrame {
    compose_frame(s, &vec![Pose::identity(1); s.oavs.len()], 0, 0.0).unwrap()
}

fn kinds(f: &RenderFrame) -> Vec<LayerSource> {
    let mut k: Vec<_> = f.layers.iter().map(|l| l.source.clone()).collect();
    k.sort();
    k
}

fn sil(id: &str) -> LayerSource {
    LayerSource::Silhouette { oav: id.into() }
}

fn shadow(id: &str) -> LayerSource {
    LayerSource::Shadow {
        oav: id.into(),
        light: "key".into(),
        screen: "back".into(),
    }
}

#[test]
fn flag_matrix() {
    for (visible, casts) in [(false, false), (false, true), (true, false), (true, true)] {
        let f = compose(&scene(vec![oav("a", visible, casts)]));
        let mut expect = Vec::new();
        if visible {
            expect.push(sil("a"));
        }
        if casts {
            expect.push(shadow("a"));
        }
        expect.sort();
        assert_eq!(kinds(&f), expect, "visible={visible} casts={casts}");
    }
}

#[test]
fn shadow_is_silhouette_scaled_by_two() {
    let s = scene(vec![oav("a", false, true)]);
    let verts = s.oavs[0].skin(&Pose::identity(1)).unwrap();
    let sh = cast_shadow(s.lights[0].position, &s.screens[0], &verts, s.oavs[0].mesh.mesh().polygons()).unwrap();
    assert_eq!(sh.outline.len(), 4);
    for (p, [x, y]) in sh.outline.iter().zip(SQUARE) {
        assert!((*p - Vec3::new(2.0 * x, 2.0 * y, -2.0)).length() < 1e-9);
    }
    // Orthographic: 100 viewport units per meter, y down.
    let f = compose(&s);
    for (p, [x, y]) in f.layers[0].polygon.iter().zip(SQUARE) {
        assert!((p[0] - (500.0 + 200.0 * x)).abs() < 1e-9);
        assert!((p[1] - (500.0 - 200.0 * y)).abs() < 1e-9);
    }
    assert_eq!(f.layers[0].color, Rgba::new(0.0, 0.0, 0.0, 0.6 * 0.5));
}

#[test]
fn painter_order_puts_screen_behind() {
    let f = compose(&scene(vec![oav("a", true, true)]));
    assert_eq!(f.layers[0].source, shadow("a"));
    assert_eq!(f.layers[0].depth, 12.0);
    assert_eq!(f.layers[1].source, sil("a"));
    assert!(f.layers.windows(2).all(|w| w[0].depth >= w[1].depth));
}

#[test]
fn effects_toggle_only_their_layers() {
    let s = scene(vec![oav("a", false, true), oav("b", true, true)]);
    let base = compose(&s);
    let lit = apply_scene_effect(&s, &SceneEffect::SetVisible { oav: "a".into(), visible: true }).unwrap();
    let mut expect = kinds(&base);
    expect.push(sil("a"));
    expect.sort();
    assert_eq!(kinds(&compose(&lit)), expect);
    let dark = apply_scene_effect(&s, &SceneEffect::SetCastsShadow { oav: "b".into(), casts_shadow: false }).unwrap();
    assert_eq!(kinds(&compose(&dark)), vec![sil("b"), shadow("a")]);
    assert_eq!(
        apply_scene_effect(&s, &SceneEffect::SetVisible { oav: "zz".into(), visible: true }),
        Err(SceneError::UnknownTarget { kind: "oav", name: "zz".into() })
    );
    assert_eq!(
        apply_scene_effect(&s, &SceneEffect::MoveLight { light: "fill".into(), position: Vec3::ZERO }).unwrap_err(),
        SceneError::UnknownTarget { kind: "light", name: "fill".into() }
    );
}

#[test]
fn shadow_area_shrinks_as_light_recedes() {
    let s = scene(vec![oav("a", false, true)]);
    let mut prev = f64::INFINITY;
    for step in 1..=20 {
        let z = 0.5 * step as f64;
        let moved = apply_scene_effect(&s, &SceneEffect::MoveLight { light: "key".into(), position: Vec3::new(0.0, 0.0, z) }).unwrap();
        let area = signed_area(&compose(&moved).layers[0].polygon).abs();
        // Magnification (z + 2) / z, squared, times 1 m² at 100 units per meter.
        let m = (z + 2.0) / z;
        assert!((area - m * m * 1e4).abs() < 1e-6, "z={z}");
        assert!(area < prev);
        prev = area;
    }
}

#[test]
fn clipped_to_screen_and_dropped_when_off_screen() {
    let mut s = scene(vec![oav("a", false, true)]);
    s.screens[0] = screen(1.0);
    let f = compose(&s);
    for p in &f.layers[0].polygon {
        assert!(p[0] >= 400.0 - 1e-9 && p[0] <= 600.0 + 1e-9 && p[1] >= 400.0 - 1e-9 && p[1] <= 600.0 + 1e-9);
    }
    assert!((signed_area(&f.layers[0].polygon).abs() - 200.0 * 100.0).abs() < 1e-6);
    s.apply(&SceneEffect::MoveOav { oav: "a".into(), position: Vec3::new(3.0, 0.0, 0.0), yaw: 0.0 }).unwrap();
    assert!(compose(&s).layers.is_empty());
}

#[test]
fn partial_projection_drops_layer() {
    // Turned edge-on: the square spans z in [-0.5, 0.5] and the light sits
    // inside that span, so half the vertices face away from the screen.
    let mut s = scene(vec![oav("a", false, true)]);
    s.oavs[0].yaw = core::f64::consts::FRAC_PI_2;
    s.lights[0].position = Vec3::new(-1.0, 0.5, 0.0);
    assert!(compose(&s).layers.is_empty());
}

#[test]
fn disabled_light_casts_nothing_and_warns() {
    let mut s = scene(vec![oav("a", true, true)]);
    s.lights[0].enabled = false;
    assert_eq!(kinds(&compose(&s)), vec![sil("a")]);
    assert_eq!(s.validate().unwrap(), vec![SceneWarning::NoEnabledLight]);
}

#[test]
fn validation_errors() {
    let mut s = scene(vec![oav("a", true, true)]);
    assert!(s.validate().unwrap().is_empty());
    s.screens[0].normal = Vec3::new(0.0, 0.0, 1.001);
    assert_eq!(s.validate(), Err(SceneError::NonUnitNormal("back".into())));
    s.screens[0] = screen(1.0);
    s.screens[0].bounds[2].z = -1.0;
    assert_eq!(s.validate(), Err(SceneError::BadBounds("back".into())));
    s.screens[0] = screen(1.0);
    s.oavs.push(oav("a", true, false));
    assert_eq!(s.validate(), Err(SceneError::DuplicateName { kind: "oav", name: "a".to_string() }));
    s.oavs.pop();
    assert_eq!(
        s.apply(&SceneEffect::SetTranslucency { screen: "back".into(), translucency: 1.5 }),
        Err(SceneError::BadTranslucency(1.5))
    );
    assert_eq!(s.screens[0].translucency, 0.6);
}

#[test]
fn missing_pose_is_an_error() {
    let s = scene(vec![oav("a", true, true), oav("b", true, true)]);
    assert_eq!(
        compose_frame(&s, &[Pose::identity(1)], 0, 0.0),
        Err(SceneError::MissingPose { expected: 2, got: 1 })
    );
}

#[test]
fn compose_is_pure() {
    let mut s = scene(vec![oav("a", true, true), oav("b", false, true)]);
    s.oavs[1].position = Vec3::new(0.7, 0.2, 0.3);
    s.oavs[1].yaw = 0.4;
    let mut p = Pose::identity(1);
    p.rotations[0] = Quat::from_axis_angle(Vec3::new(0.1, 0.2, 1.0), 0.3);
    let a = compose_frame(&s, &[p.clone(), p.clone()], 7, 0.07).unwrap();
    let b = compose_frame(&s, &[p.clone(), p], 7, 0.07).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.tick, 7);
}
