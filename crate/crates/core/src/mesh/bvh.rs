//! Axis-aligned bounding-volume hierarchy over triangles.

use crate::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    /// Squared distance from `p` to the box; 0 inside.
    pub fn dist2(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = (self.min[k] - p[k]).max(p[k] - self.max[k]).max(0.0);
            d += e * e;
        }
        d
    }
}

#[derive(Clone, Debug)]
enum Node {
    Inner {
        bounds: Aabb,
        left: usize,
        right: usize,
    },
    Leaf {
        bounds: Aabb,
        start: usize,
        end: usize,
    },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Inner { bounds, .. } | Node::Leaf { bounds, .. } => bounds,
        }
    }
}

/// Binary BVH with median splits along the widest centroid axis.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle ids in leaf order.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(tri_boxes: &[Aabb]) -> Self {
        let mut order: Vec<u32> = (0..tri_boxes.len() as u32).collect();
        let centroids: Vec<Vec3> = tri_boxes.iter().map(|b| (b.min + b.max) * 0.5).collect();
        let mut nodes = Vec::with_capacity(2 * tri_boxes.len() / LEAF_SIZE + 1);
        if !tri_boxes.is_empty() {
            build_node(
                &mut nodes,
                &mut order,
                0,
                tri_boxes.len(),
                tri_boxes,
                &centroids,
            );
        }
        Bvh { nodes, order }
    }

    /// Returns the triangle minimising `dist2(tri)`, ties broken by lowest id,
    /// together with that squared distance. `dist2` may return extra data
    /// through `T`.
    pub fn nearest<T, F>(&self, p: &Vec3, mut dist2: F) -> Option<(u32, f64, T)>
    where
        F: FnMut(u32) -> (f64, T),
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(u32, f64, T)> = None;
        let mut stack = vec![(0usize, self.nodes[0].bounds().dist2(p))];
        while let Some((ni, bd)) = stack.pop() {
            if let Some((_, bd2, _)) = &best {
                if bd > *bd2 {
                    continue;
                }
            }
            match &self.nodes[ni] {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[*start..*end] {
                        let (d, extra) = dist2(t);
                        let better = match &best {
                            None => true,
                            Some((bt, bd2, _)) => d < *bd2 || (d == *bd2 && t < *bt),
                        };
                        if better {
                            best = Some((t, d, extra));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().dist2(p);
                    let dr = self.nodes[*right].bounds().dist2(p);
                    // push the farther child first so the nearer one is visited next
                    if dl <= dr {
                        stack.push((*right, dr));
                        stack.push((*left, dl));
                    } else {
                        stack.push((*left, dl));
                        stack.push((*right, dr));
                    }
                }
            }
        }
        best
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Vec3],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cb = Aabb::empty();
    for &t in &order[start..end] {
        bounds.merge(&boxes[t as usize]);
        cb.grow(&centroids[t as usize]);
    }
    let idx = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return idx;
    }
    let ext = cb.max - cb.min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |a, b| {
        centroids[*a as usize][axis]
            .total_cmp(&centroids[*b as usize][axis])
            .then(a.cmp(b))
    });
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build_node(nodes, order, start, mid, boxes, centroids);
    let right = build_node(nodes, order, mid, end, boxes, centroids);
    nodes[idx] = Node::Inner {
        bounds,
        left,
        right,
    };
    idx
}
