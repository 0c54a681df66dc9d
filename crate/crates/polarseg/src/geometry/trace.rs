//! Boundary tracing: outer contour of the largest 8-connected component.
//!
//! The trace follows pixel edges on the corner lattice, so the resulting
//! polygon encloses exactly the component's pixels. Re-rasterizing it
//! reproduces the component (holes filled, since hole loops are dropped).

use std::collections::HashMap;

use super::{BitMask, Contour, GeometryError, Point};

pub(super) fn extract_contour(mask: &BitMask) -> Result<Contour, GeometryError> {
    if mask.is_empty() {
        return Err(GeometryError::EmptyMask);
    }
    let (member, count) = largest_component(mask);
    if count < 2 {
        // A lone pixel carries no usable contour.
        return Err(GeometryError::DegenerateContour);
    }

    let loops = boundary_loops(mask, &member);
    let outer = loops
        .into_iter()
        .max_by(|a, b| {
            signed_area(a)
                .partial_cmp(&signed_area(b))
                .expect("lattice areas are finite")
        })
        .expect("component with pixels has a boundary");

    Contour::new(merge_collinear(outer))
}

/// Membership bitmap and pixel count of the largest 8-connected component.
/// Ties go to the component found first in row-major scan order.
fn largest_component(mask: &BitMask) -> (Vec<bool>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![0u32; w * h];
    let mut sizes: Vec<usize> = vec![0]; // index 0 = background
    let mut stack: Vec<(usize, usize)> = Vec::new();

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || label[y * w + x] != 0 {
                continue;
            }
            let id = sizes.len() as u32;
            sizes.push(0);
            stack.push((x, y));
            label[y * w + x] = id;
            while let Some((cx, cy)) = stack.pop() {
                *sizes.last_mut().unwrap() += 1;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = cx as i64 + dx;
                        let ny = cy as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let (nx, ny) = (nx as usize, ny as usize);
                        if mask.get(nx, ny) && label[ny * w + nx] == 0 {
                            label[ny * w + nx] = id;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
        }
    }

    let best = (1..sizes.len()).max_by_key(|&i| (sizes[i], usize::MAX - i));
    let best = best.expect("mask verified non-empty");
    let member = label.iter().map(|&l| l == best as u32).collect();
    (member, sizes[best])
}

type Vertex = (i64, i64);

struct Edge {
    from: Vertex,
    to: Vertex,
}

/// Closed loops of directed boundary edges. Edges keep the component on the
/// side that makes outer loops positively oriented under the shoelace sum,
/// so hole loops come out negative and can be discarded by area.
fn boundary_loops(mask: &BitMask, member: &[bool]) -> Vec<Vec<Point>> {
    let (w, h) = (mask.width(), mask.height());
    let inside = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && member[y as usize * w + x as usize]
    };

    let mut edges: Vec<Edge> = Vec::new();
    let mut out_at: HashMap<Vertex, Vec<usize>> = HashMap::new();
    let push = |edges: &mut Vec<Edge>, out_at: &mut HashMap<_, Vec<usize>>, from, to| {
        out_at.entry(from).or_default().push(edges.len());
        edges.push(Edge { from, to });
    };

    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !inside(x, y) {
                continue;
            }
            if !inside(x, y - 1) {
                push(&mut edges, &mut out_at, (x, y), (x + 1, y));
            }
            if !inside(x + 1, y) {
                push(&mut edges, &mut out_at, (x + 1, y), (x + 1, y + 1));
            }
            if !inside(x, y + 1) {
                push(&mut edges, &mut out_at, (x + 1, y + 1), (x, y + 1));
            }
            if !inside(x - 1, y) {
                push(&mut edges, &mut out_at, (x, y + 1), (x, y));
            }
        }
    }

    // The successor of each edge is fixed: unique when one edge leaves the
    // vertex; at pinch corners (two diagonal pixels sharing a vertex) the
    // clockwise-most turn merges both pixels into a single loop.
    let successor = |cur: usize| -> usize {
        let e = &edges[cur];
        let outs = &out_at[&e.to];
        if outs.len() == 1 {
            return outs[0];
        }
        let din = (e.to.0 - e.from.0, e.to.1 - e.from.1);
        *outs
            .iter()
            .find(|&&j| {
                let o = &edges[j];
                let dout = (o.to.0 - o.from.0, o.to.1 - o.from.1);
                din.0 * dout.1 - din.1 * dout.0 < 0
            })
            .expect("pinch vertex always offers a clockwise turn")
    };

    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut pts = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            pts.push(Point::new(
                edges[cur].from.0 as f64,
                edges[cur].from.1 as f64,
            ));
            let next = successor(cur);
            if next == start {
                break;
            }
            cur = next;
        }
        loops.push(pts);
    }
    loops
}

fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    let mut sum = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        sum += p.x * q.y - q.x * p.y;
    }
    0.5 * sum
}

/// Drop vertices interior to straight runs of the staircase.
fn merge_collinear(points: Vec<Point>) -> Vec<Point> {
    let n = points.len();
    let mut kept = Vec::with_capacity(n);
    for i in 0..n {
        let prev = points[(i + n - 1) % n];
        let cur = points[i];
        let next = points[(i + 1) % n];
        let cross = (cur.x - prev.x) * (next.y - cur.y) - (cur.y - prev.y) * (next.x - cur.x);
        if cross != 0.0 {
            kept.push(cur);
        }
    }
    kept
}
