use super::geom::Vec3;
use crate::error::{Error, Result};

/// Indexed triangle mesh with per-vertex colors in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub colors: Vec<[f64; 3]>,
}

impl TriMesh {
    pub fn validate(&self) -> Result<()> {
        if self.colors.len() != self.vertices.len() {
            return Err(Error::Invalid(format!(
                "{} colors for {} vertices",
                self.colors.len(),
                self.vertices.len()
            )));
        }
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::Invalid(format!("triangle {t:?} indexes past {n} vertices")));
        }
        Ok(())
    }

    pub fn append(&mut self, other: &TriMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.colors.extend_from_slice(&other.colors);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
    }

    pub fn max_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn translate(&mut self, d: Vec3) {
        for v in &mut self.vertices {
            *v = *v + d;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.vertices {
            *v = *v * s;
        }
    }

    /// Axis-aligned box between two corners.
    pub fn cuboid(lo: Vec3, hi: Vec3, color: [f64; 3]) -> TriMesh {
        let vertices: Vec<Vec3> = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { lo.x } else { hi.x },
                    if i & 2 == 0 { lo.y } else { hi.y },
                    if i & 4 == 0 { lo.z } else { hi.z },
                )
            })
            .collect();
        #[rustfmt::skip]
        let triangles = vec![
            [0, 2, 1], [1, 2, 3], // z = lo
            [4, 5, 6], [5, 7, 6], // z = hi
            [0, 1, 4], [1, 5, 4], // y = lo
            [2, 6, 3], [3, 6, 7], // y = hi
            [0, 4, 2], [2, 4, 6], // x = lo
            [1, 3, 5], [3, 7, 5], // x = hi
        ];
        TriMesh {
            colors: vec![color; 8],
            vertices,
            triangles,
        }
    }

    /// Closed cylinder with its axis along +Y.
    pub fn cylinder_y(center: Vec3, radius: f64, length: f64, segments: usize, color: [f64; 3]) -> TriMesh {
        let mut m = TriMesh::default();
        let half = length / 2.0;
        for side in [-half, half] {
            m.vertices.push(center + Vec3::new(0.0, side, 0.0));
            for s in 0..segments {
                let a = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                m.vertices.push(center + Vec3::new(radius * a.cos(), side, radius * a.sin()));
            }
        }
        let ring = segments as u32 + 1;
        for s in 0..segments as u32 {
            let (a, b) = (1 + s, 1 + (s + 1) % segments as u32);
            m.triangles.push([0, b, a]);
            m.triangles.push([ring, ring + a, ring + b]);
            m.triangles.push([a, b, ring + a]);
            m.triangles.push([b, ring + b, ring + a]);
        }
        m.colors = vec![color; m.vertices.len()];
        m
    }

    /// Latitude-longitude sphere with poles on ±Z. Longitude 0 passes
    /// through `+X`, so `(radius, 0, 0)` is a vertex.
    pub fn uv_sphere(radius: f64, rings: usize, segments: usize, color: [f64; 3]) -> TriMesh {
        let mut m = TriMesh::default();
        for r in 0..=rings {
            let lat = std::f64::consts::PI * (r as f64 / rings as f64 - 0.5);
            for s in 0..segments {
                let lon = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
                m.vertices.push(Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()) * radius);
            }
        }
        let seg = segments as u32;
        for r in 0..rings as u32 {
            for s in 0..seg {
                let a = r * seg + s;
                let b = r * seg + (s + 1) % seg;
                let c = a + seg;
                let d = b + seg;
                m.triangles.push([a, b, d]);
                m.triangles.push([a, d, c]);
            }
        }
        m.colors = vec![color; m.vertices.len()];
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_valid() {
        let c = TriMesh::cuboid(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 2.0, 3.0), [1.0, 0.0, 0.0]);
        c.validate().unwrap();
        assert_eq!(c.triangles.len(), 12);
        let (lo, hi) = c.bounds().unwrap();
        assert_eq!(lo, Vec3::new(-1.0, -1.0, -1.0));
        assert_eq!(hi, Vec3::new(1.0, 2.0, 3.0));
        TriMesh::cylinder_y(Vec3::default(), 0.1, 0.2, 12, [0.0; 3]).validate().unwrap();
        let s = TriMesh::uv_sphere(0.5, 16, 32, [1.0; 3]);
        s.validate().unwrap();
        assert!((s.max_radius() - 0.5).abs() < 1e-12);
        assert!(s.vertices.contains(&Vec3::new(0.5, 0.0, 0.0)));
    }

    #[test]
    fn cuboid_faces_point_outward() {
        let c = TriMesh::cuboid(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0), [1.0; 3]);
        for t in &c.triangles {
            let [a, b, d] = t.map(|i| c.vertices[i as usize]);
            let n = (b - a).cross(d - a);
            let centroid = (a + b + d) * (1.0 / 3.0);
            assert!(n.dot(centroid) > 0.0, "{t:?}");
        }
    }

    #[test]
    fn append_offsets_indices() {
        let mut a = TriMesh::cuboid(Vec3::default(), Vec3::new(1.0, 1.0, 1.0), [0.0; 3]);
        let b = a.clone();
        a.append(&b);
        a.validate().unwrap();
        assert_eq!(a.triangles[12], [8, 10, 9]);
    }

    #[test]
    fn bad_index_rejected() {
        let m = TriMesh {
            vertices: vec![Vec3::default(); 2],
            triangles: vec![[0, 1, 2]],
            colors: vec![[0.0; 3]; 2],
        };
        assert!(m.validate().is_err());
    }
}
