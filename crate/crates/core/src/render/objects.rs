//! Procedural object families with a shared canonical orientation: length
//! along X, width along Y, up along Z, centered on the origin.

use super::geom::Vec3;
use super::mesh::TriMesh;
use crate::rng::SplitMix64;

/// Every generated object fits inside this radius.
pub const OBJECT_RADIUS: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Vehicle,
    Chair,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Vehicle => "vehicle",
            Family::Chair => "chair",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "vehicle" => Some(Family::Vehicle),
            "chair" => Some(Family::Chair),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub body_height: f64,
    pub wheel_radius: f64,
    pub wheel_width: f64,
    pub cabin_length: f64,
    pub cabin_offset: f64,
    pub cabin_height: f64,
    pub cabin_width: f64,
    pub body_color: [f64; 3],
    pub cabin_color: [f64; 3],
    pub wheel_color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChairParams {
    pub seat_width: f64,
    pub seat_depth: f64,
    pub seat_thickness: f64,
    pub seat_height: f64,
    pub leg_thickness: f64,
    pub back_height: f64,
    pub back_thickness: f64,
    pub seat_color: [f64; 3],
    pub back_color: [f64; 3],
    pub leg_color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectParams {
    Vehicle(VehicleParams),
    Chair(ChairParams),
}

fn color(rng: &mut SplitMix64) -> [f64; 3] {
    [rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)]
}

pub fn sample_params(family: Family, seed: u64) -> ObjectParams {
    let mut rng = SplitMix64::new(seed);
    match family {
        Family::Vehicle => {
            let length = rng.uniform(0.75, 1.1);
            let body_color = color(&mut rng);
            let g = rng.uniform(0.05, 0.25);
            ObjectParams::Vehicle(VehicleParams {
                length,
                width: rng.uniform(0.36, 0.5),
                body_height: rng.uniform(0.1, 0.22),
                wheel_radius: rng.uniform(0.06, 0.11),
                wheel_width: rng.uniform(0.05, 0.09),
                cabin_length: length * rng.uniform(0.3, 0.65),
                cabin_offset: length * rng.uniform(-0.15, 0.15),
                cabin_height: rng.uniform(0.08, 0.2),
                cabin_width: rng.uniform(0.75, 0.95),
                body_color,
                cabin_color: [
                    body_color[0] * 0.4 + 0.1,
                    body_color[1] * 0.4 + 0.1,
                    body_color[2] * 0.4 + 0.15,
                ],
                wheel_color: [g, g, g],
            })
        }
        Family::Chair => ObjectParams::Chair(ChairParams {
            seat_width: rng.uniform(0.35, 0.5),
            seat_depth: rng.uniform(0.35, 0.5),
            seat_thickness: rng.uniform(0.03, 0.07),
            seat_height: rng.uniform(0.3, 0.45),
            leg_thickness: rng.uniform(0.03, 0.06),
            back_height: rng.uniform(0.25, 0.45),
            back_thickness: rng.uniform(0.03, 0.06),
            seat_color: color(&mut rng),
            back_color: color(&mut rng),
            leg_color: color(&mut rng),
        }),
    }
}

fn vehicle_mesh(p: &VehicleParams) -> TriMesh {
    let (hl, hw) = (p.length / 2.0, p.width / 2.0);
    let floor = p.wheel_radius * 0.9;
    let roof = floor + p.body_height;
    let mut m = TriMesh::cuboid(Vec3::new(-hl, -hw, floor), Vec3::new(hl, hw, roof), p.body_color);
    let chw = hw * p.cabin_width;
    let cx0 = (p.cabin_offset - p.cabin_length / 2.0).max(-hl);
    let cx1 = (p.cabin_offset + p.cabin_length / 2.0).min(hl);
    m.append(&TriMesh::cuboid(
        Vec3::new(cx0, -chw, roof),
        Vec3::new(cx1, chw, roof + p.cabin_height),
        p.cabin_color,
    ));
    let wx = hl - p.wheel_radius * 1.4;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            let c = Vec3::new(sx * wx, sy * (hw - p.wheel_width * 0.35), p.wheel_radius);
            m.append(&TriMesh::cylinder_y(c, p.wheel_radius, p.wheel_width, 12, p.wheel_color));
        }
    }
    m
}

fn chair_mesh(p: &ChairParams) -> TriMesh {
    let (hw, hd) = (p.seat_width / 2.0, p.seat_depth / 2.0);
    let top = p.seat_height;
    let mut m = TriMesh::cuboid(
        Vec3::new(-hd, -hw, top - p.seat_thickness),
        Vec3::new(hd, hw, top),
        p.seat_color,
    );
    let t = p.leg_thickness;
    for &(x, y) in &[(-hd, -hw), (-hd, hw - t), (hd - t, -hw), (hd - t, hw - t)] {
        m.append(&TriMesh::cuboid(
            Vec3::new(x, y, 0.0),
            Vec3::new(x + t, y + t, top - p.seat_thickness),
            p.leg_color,
        ));
    }
    m.append(&TriMesh::cuboid(
        Vec3::new(-hd, -hw, top),
        Vec3::new(-hd + p.back_thickness, hw, top + p.back_height),
        p.back_color,
    ));
    m
}

/// Mesh for given parameters, centered on its bounding box and shrunk if it
/// would exceed [`OBJECT_RADIUS`].
pub fn build_mesh(params: &ObjectParams) -> TriMesh {
    let mut m = match params {
        ObjectParams::Vehicle(p) => vehicle_mesh(p),
        ObjectParams::Chair(p) => chair_mesh(p),
    };
    let (lo, hi) = m.bounds().expect("objects are non-empty");
    m.translate(-(lo + hi) * 0.5);
    let r = m.max_radius();
    if r > OBJECT_RADIUS {
        // A hair inside the bound so rounding never pushes a vertex past it.
        m.scale(OBJECT_RADIUS * (1.0 - 1e-9) / r);
    }
    m
}

pub fn gen_object(family: Family, seed: u64) -> TriMesh {
    build_mesh(&sample_params(family, seed))
}
