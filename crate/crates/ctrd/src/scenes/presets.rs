//! Ready-made scenes used by the examples, tests, and experiment harness.

use std::collections::BTreeMap;

use crate::math::{Aabb, Vec3};
use crate::scenes::{ChangeSet, Primitive, PrimitiveKind, SceneSpec, TransientSpec};

fn base_bbox() -> Aabb {
    Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0))
}

fn base_primitives() -> Vec<Primitive> {
    vec![
        // Ground slab.
        Primitive {
            kind: PrimitiveKind::Box,
            center: Vec3::new(0.0, -0.7, 0.0),
            size: Vec3::new(0.8, 0.15, 0.8),
            color: [0.55, 0.52, 0.48],
            density: 24.0,
        },
        Primitive {
            kind: PrimitiveKind::Sphere,
            center: Vec3::new(-0.35, -0.1, 0.1),
            size: Vec3::new(0.3, 0.3, 0.3),
            color: [0.85, 0.2, 0.15],
            density: 18.0,
        },
        Primitive {
            kind: PrimitiveKind::Box,
            center: Vec3::new(0.4, -0.25, -0.2),
            size: Vec3::new(0.22, 0.3, 0.22),
            color: [0.2, 0.35, 0.85],
            density: 18.0,
        },
        Primitive {
            kind: PrimitiveKind::Sphere,
            center: Vec3::new(0.1, 0.3, 0.35),
            size: Vec3::new(0.22, 0.22, 0.22),
            color: [0.25, 0.8, 0.3],
            density: 18.0,
        },
    ]
}

/// Default three-timestep scene: new viewing arcs every step, a lighting
/// change at t=1, and a geometry change (new object + moved sphere) at t=2.
pub fn demo_scene() -> SceneSpec {
    SceneSpec {
        bbox: base_bbox(),
        background: [0.0, 0.0, 0.0],
        falloff: 0.0625,
        primitives: base_primitives(),
        timesteps: vec![
            ChangeSet::default(),
            ChangeSet {
                color_scale: BTreeMap::from([
                    (0usize, [1.3, 1.05, 0.75]),
                    (1usize, [0.55, 0.65, 1.5]),
                    (3usize, [1.25, 1.1, 0.9]),
                ]),
                ..ChangeSet::default()
            },
            ChangeSet {
                add: vec![Primitive {
                    kind: PrimitiveKind::Box,
                    center: Vec3::new(-0.3, 0.42, -0.3),
                    size: Vec3::new(0.18, 0.18, 0.18),
                    color: [0.9, 0.85, 0.2],
                    density: 18.0,
                }],
                translate: BTreeMap::from([(1usize, Vec3::new(0.3, 0.2, -0.15))]),
                ..ChangeSet::default()
            },
        ],
        transients: Vec::new(),
    }
}

/// Three timesteps whose only differences are strong lighting changes;
/// geometry is frozen. Exercises the appearance-embedding ablation.
pub fn appearance_scene() -> SceneSpec {
    SceneSpec {
        bbox: base_bbox(),
        background: [0.0, 0.0, 0.0],
        falloff: 0.0625,
        primitives: base_primitives(),
        timesteps: vec![
            ChangeSet::default(),
            ChangeSet {
                color_scale: BTreeMap::from([
                    (0usize, [0.35, 0.35, 0.4]),
                    (1usize, [0.35, 0.35, 0.4]),
                    (2usize, [0.35, 0.35, 0.4]),
                    (3usize, [0.35, 0.35, 0.4]),
                ]),
                ..ChangeSet::default()
            },
            ChangeSet {
                color_scale: BTreeMap::from([
                    (0usize, [3.4, 2.2, 0.9]),
                    (1usize, [3.4, 2.2, 0.9]),
                    (2usize, [3.4, 2.2, 0.9]),
                    (3usize, [3.4, 2.2, 0.9]),
                ]),
                ..ChangeSet::default()
            },
        ],
        transients: Vec::new(),
    }
}

/// Demo scene plus a bright transient sphere sweeping through the t=1 scan.
pub fn transient_scene() -> SceneSpec {
    let mut spec = demo_scene();
    spec.transients.push(TransientSpec {
        timestep: 1,
        primitive: Primitive {
            kind: PrimitiveKind::Sphere,
            center: Vec3::new(0.0, 0.05, 0.0),
            size: Vec3::new(0.16, 0.16, 0.16),
            color: [0.95, 0.95, 0.95],
            density: 60.0,
        },
        path_from: Vec3::new(-0.45, 0.0, 0.3),
        path_to: Vec3::new(0.45, 0.0, -0.3),
    });
    spec
}

/// Looks up a preset by name.
pub fn by_name(name: &str) -> Option<SceneSpec> {
    match name {
        "demo" => Some(demo_scene()),
        "appearance" => Some(appearance_scene()),
        "transient" => Some(transient_scene()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["demo", "appearance", "transient"];
