//! Exact convex hull area (2-D) and volume (3-D).

use std::collections::HashSet;

/// Hull measure and whether the input was degenerate (affinely dependent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullMeasure {
    pub volume: f64,
    pub degenerate: bool,
    /// Number of hull vertices (2-D) or faces (3-D).
    pub facets: usize,
}

impl HullMeasure {
    fn degenerate() -> Self {
        Self {
            volume: 0.0,
            degenerate: true,
            facets: 0,
        }
    }
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Area of the convex hull of 2-D points (Andrew's monotone chain).
pub fn hull_area(points: &[[f64; 2]]) -> HullMeasure {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return HullMeasure::degenerate();
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let area = hull
        .iter()
        .zip(hull.iter().cycle().skip(1))
        .map(|(a, b)| a[0] * b[1] - a[1] * b[0])
        .sum::<f64>()
        / 2.0;
    if hull.len() < 3 || area <= 0.0 {
        return HullMeasure::degenerate();
    }
    HullMeasure {
        volume: area,
        degenerate: false,
        facets: hull.len(),
    }
}

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn len3(a: V3) -> f64 {
    dot3(a, a).sqrt()
}

struct Face {
    v: [usize; 3],
    /// Unit outward normal and plane offset.
    normal: V3,
    offset: f64,
}

fn make_face(pts: &[V3], v: [usize; 3], inside: V3) -> Face {
    let n = cross(sub(pts[v[1]], pts[v[0]]), sub(pts[v[2]], pts[v[0]]));
    let l = len3(n);
    let mut normal = [n[0] / l, n[1] / l, n[2] / l];
    let mut v = v;
    if dot3(normal, sub(inside, pts[v[0]])) > 0.0 {
        v.swap(1, 2);
        normal = [-normal[0], -normal[1], -normal[2]];
    }
    Face {
        v,
        normal,
        offset: dot3(normal, pts[v[0]]),
    }
}

/// Volume of the convex hull of 3-D points (incremental construction).
pub fn hull_volume(points: &[V3]) -> HullMeasure {
    let n = points.len();
    if n < 4 {
        return HullMeasure::degenerate();
    }
    let scale = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let eps = 1e-10 * scale;

    // Initial tetrahedron: extreme point, farthest point, farthest from the
    // line, farthest from the plane.
    let i0 = (0..n)
        .min_by(|&a, &b| points[a][0].total_cmp(&points[b][0]))
        .expect("nonempty");
    let i1 = (0..n)
        .max_by(|&a, &b| len3(sub(points[a], points[i0])).total_cmp(&len3(sub(points[b], points[i0]))))
        .expect("nonempty");
    if len3(sub(points[i1], points[i0])) <= eps {
        return HullMeasure::degenerate();
    }
    let dir = sub(points[i1], points[i0]);
    let line_dist = |p: V3| len3(cross(dir, sub(p, points[i0]))) / len3(dir);
    let i2 = (0..n)
        .max_by(|&a, &b| line_dist(points[a]).total_cmp(&line_dist(points[b])))
        .expect("nonempty");
    if line_dist(points[i2]) <= eps {
        return HullMeasure::degenerate();
    }
    let pn = cross(dir, sub(points[i2], points[i0]));
    let pn_len = len3(pn);
    let plane_dist = |p: V3| dot3(pn, sub(p, points[i0])).abs() / pn_len;
    let i3 = (0..n)
        .max_by(|&a, &b| plane_dist(points[a]).total_cmp(&plane_dist(points[b])))
        .expect("nonempty");
    if plane_dist(points[i3]) <= eps {
        return HullMeasure::degenerate();
    }

    let inside = {
        let s = [i0, i1, i2, i3].iter().fold([0.0; 3], |acc, &i| {
            [acc[0] + points[i][0], acc[1] + points[i][1], acc[2] + points[i][2]]
        });
        [s[0] / 4.0, s[1] / 4.0, s[2] / 4.0]
    };
    let mut faces: Vec<Face> = [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]]
        .into_iter()
        .map(|v| make_face(points, v, inside))
        .collect();

    for (pi, &p) in points.iter().enumerate() {
        if [i0, i1, i2, i3].contains(&pi) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| dot3(f.normal, p) - f.offset > eps)
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut visible_edges = HashSet::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
            for e in 0..3 {
                visible_edges.insert((f.v[e], f.v[(e + 1) % 3]));
            }
        }
        let mut horizon = Vec::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, v)| **v) {
            for e in 0..3 {
                let (a, b) = (f.v[e], f.v[(e + 1) % 3]);
                if !visible_edges.contains(&(b, a)) {
                    horizon.push((a, b));
                }
            }
        }
        let mut kept: Vec<Face> = faces
            .into_iter()
            .zip(visible)
            .filter(|(_, v)| !v)
            .map(|(f, _)| f)
            .collect();
        for (a, b) in horizon {
            kept.push(make_face(points, [a, b, pi], inside));
        }
        faces = kept;
    }

    let volume = faces
        .iter()
        .map(|f| {
            let [a, b, c] = f.v.map(|i| sub(points[i], inside));
            dot3(a, cross(b, c))
        })
        .sum::<f64>()
        / 6.0;
    HullMeasure {
        volume: volume.abs(),
        degenerate: false,
        facets: faces.len(),
    }
}
