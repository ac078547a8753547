//! Ray/primitive intersection. Every function returns the smallest
//! strictly positive ray parameter `t` of `origin + t·dir`, if any.

use nalgebra::Vector3;

pub fn ray_sphere(origin: &Vector3<f64>, dir: &Vector3<f64>, center: &Vector3<f64>, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let a = dir.norm_squared();
    let b = dir.dot(&oc);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    // Citardauq form avoids cancellation for the near root.
    let q = -(b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return None;
    }
    let (t0, t1) = {
        let x = q / a;
        let y = c / q;
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    };
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

/// Slab test against an axis-aligned box. A ray starting inside the box
/// reports its exit point.
pub fn ray_aabb(origin: &Vector3<f64>, dir: &Vector3<f64>, min: &Vector3<f64>, max: &Vector3<f64>) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let o = origin[axis];
        let d = dir[axis];
        if d == 0.0 {
            if o < min[axis] || o > max[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (a, b) = {
            let t1 = (min[axis] - o) * inv;
            let t2 = (max[axis] - o) * inv;
            if t1 <= t2 {
                (t1, t2)
            } else {
                (t2, t1)
            }
        };
        t_near = t_near.max(a);
        t_far = t_far.min(b);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > 0.0 {
        Some(t_near)
    } else if t_far > 0.0 {
        Some(t_far)
    } else {
        None
    }
}

/// Horizontal plane `z = z0`.
pub fn ray_plane_z(origin: &Vector3<f64>, dir: &Vector3<f64>, z0: f64) -> Option<f64> {
    if dir.z == 0.0 {
        return None;
    }
    let t = (z0 - origin.z) / dir.z;
    (t > 0.0 && t.is_finite()).then_some(t)
}
