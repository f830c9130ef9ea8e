use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::fresnel::Material;
use super::PropagationError;

/// One of the six planar faces of an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    XMin,
    XMax,
    YMin,
    YMax,
    /// Floor.
    ZMin,
    /// Ceiling.
    ZMax,
}

impl Surface {
    pub const ALL: [Surface; 6] = [
        Surface::XMin,
        Surface::XMax,
        Surface::YMin,
        Surface::YMax,
        Surface::ZMin,
        Surface::ZMax,
    ];

    pub fn new(axis: usize, high: bool) -> Self {
        Self::ALL[axis * 2 + usize::from(high)]
    }

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    pub fn name(self) -> &'static str {
        match self {
            Surface::XMin => "x_min",
            Surface::XMax => "x_max",
            Surface::YMin => "y_min",
            Surface::YMax => "y_max",
            Surface::ZMin => "floor",
            Surface::ZMax => "ceiling",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxRoom {
    min: Vector3<f64>,
    max: Vector3<f64>,
    materials: [Material; 6],
}

impl BoxRoom {
    pub fn new(
        min: Vector3<f64>,
        max: Vector3<f64>,
        materials: [Material; 6],
    ) -> Result<Self, PropagationError> {
        for axis in 0..3 {
            if !(min[axis].is_finite() && max[axis].is_finite() && max[axis] > min[axis]) {
                return Err(PropagationError::InvalidRoomExtent { axis });
            }
        }
        for (surface, m) in Surface::ALL.iter().zip(&materials) {
            if !m.is_valid() {
                return Err(PropagationError::InvalidMaterial(surface.name()));
            }
        }
        Ok(Self {
            min,
            max,
            materials,
        })
    }

    pub fn min(&self) -> Vector3<f64> {
        self.min
    }

    pub fn max(&self) -> Vector3<f64> {
        self.max
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn material(&self, surface: Surface) -> &Material {
        &self.materials[surface as usize]
    }

    pub fn materials(&self) -> &[Material; 6] {
        &self.materials
    }

    pub fn contains_strictly(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] > self.min[a] && p[a] < self.max[a])
    }

    /// All mirror images of `source` with at most `max_order` reflections
    /// in total, ordered by reflection count and then by lattice index.
    pub(crate) fn images(&self, source: &Vector3<f64>, max_order: u32) -> Vec<Image> {
        let per_axis: Vec<Vec<AxisImage>> = (0..3)
            .map(|a| axis_images(source[a] - self.min[a], self.max[a] - self.min[a], max_order))
            .collect();
        let mut out = Vec::new();
        for ix in &per_axis[0] {
            for iy in &per_axis[1] {
                for iz in &per_axis[2] {
                    let order = ix.reflections + iy.reflections + iz.reflections;
                    if order > max_order {
                        continue;
                    }
                    let position = if order == 0 {
                        *source
                    } else {
                        Vector3::new(
                            self.min.x + ix.local,
                            self.min.y + iy.local,
                            self.min.z + iz.local,
                        )
                    };
                    out.push(Image {
                        position,
                        reflections: [ix.reflections, iy.reflections, iz.reflections],
                        key: (order, [ix.key, iy.key, iz.key]),
                    });
                }
            }
        }
        out.sort_by_key(|i| i.key);
        out
    }

    /// Walls crossed by the unfolded straight segment `image -> rx`, in
    /// travel order.
    pub(crate) fn bounce_sequence(&self, image: &Vector3<f64>, rx: &Vector3<f64>) -> Vec<Surface> {
        let mut hits: Vec<(f64, Surface)> = Vec::new();
        for axis in 0..3 {
            let len = self.max[axis] - self.min[axis];
            let from = image[axis] - self.min[axis];
            let to = rx[axis] - self.min[axis];
            if from == to {
                continue;
            }
            let (lo, hi) = if from < to { (from, to) } else { (to, from) };
            let first = (lo / len).floor() as i64 + 1;
            let last = (hi / len).ceil() as i64 - 1;
            for j in first..=last {
                let plane = j as f64 * len;
                let t = (plane - from) / (to - from);
                hits.push((t, Surface::new(axis, j.rem_euclid(2) == 1)));
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        hits.into_iter().map(|(_, s)| s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Room {
    FreeSpace,
    Box(BoxRoom),
}

impl Room {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        match self {
            Room::FreeSpace => true,
            Room::Box(b) => b.contains_strictly(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Image {
    pub position: Vector3<f64>,
    pub reflections: [u32; 3],
    key: (u32, [(i64, i8); 3]),
}

#[derive(Debug, Clone, Copy)]
struct AxisImage {
    local: f64,
    reflections: u32,
    key: (i64, i8),
}

/// Images of a point at local coordinate `u` in `[0, len]` along one axis:
/// `2 m len + s u`, reflected `|2m|` times for `s = +1` and `|2m - 1|` times
/// for `s = -1`.
fn axis_images(u: f64, len: f64, max_order: u32) -> Vec<AxisImage> {
    let bound = i64::from(max_order);
    let mut out = Vec::new();
    for m in -bound..=bound {
        for s in [1i8, -1] {
            let reflections = if s == 1 { (2 * m).abs() } else { (2 * m - 1).abs() } as u32;
            if reflections <= max_order {
                out.push(AxisImage {
                    local: 2.0 * m as f64 * len + f64::from(s) * u,
                    reflections,
                    key: (m, s),
                });
            }
        }
    }
    out
}
