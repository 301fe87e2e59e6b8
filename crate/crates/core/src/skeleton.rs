//! The articulated body model: a tree of joints with limb lengths, the
//! limb-length compatibility term, and 3D pose containers.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VolumeGrid;

/// Relative slack applied to both ends of a limb-length band so that
/// distances computed along different floating-point paths agree.
pub const BAND_REL_SLACK: f64 = 1e-9;

/// Tolerance `ε` around each limb length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Millimeters(f64),
    /// One voxel pitch of the inference grid (the largest axis pitch).
    VoxelPitch,
}

impl Tolerance {
    pub fn resolve(self, grid: &VolumeGrid) -> f64 {
        match self {
            Tolerance::Millimeters(mm) => mm,
            Tolerance::VoxelPitch => grid.pitch().max(),
        }
    }
}

/// Whether `distance` lies in `[length - tol, length + tol]` (inclusive).
#[inline]
pub fn in_limb_band(length: f64, tolerance: f64, distance: f64) -> bool {
    let hi = length + tolerance;
    let lo = length - tolerance;
    let slack = BAND_REL_SLACK * hi.abs();
    distance >= lo - slack && distance <= hi + slack
}

/// A named pair of joints evaluated by PCP.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub name: String,
    pub joints: (usize, usize),
}

/// Why an edge list is not a spanning tree.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeDiagnostic {
    EdgeOutOfRange { edge: (usize, usize), joints: usize },
    SelfLoop(usize),
    /// Joints along a cycle, in order.
    Cycle(Vec<usize>),
    /// Joint sets of each connected component.
    Disconnected(Vec<Vec<usize>>),
    Empty,
}

impl fmt::Display for TreeDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeDiagnostic::EdgeOutOfRange { edge, joints } => {
                write!(f, "edge {edge:?} references a joint outside 0..{joints}")
            }
            TreeDiagnostic::SelfLoop(j) => write!(f, "self-loop on joint {j}"),
            TreeDiagnostic::Cycle(c) => write!(f, "cycle through joints {c:?}"),
            TreeDiagnostic::Disconnected(parts) => {
                write!(f, "graph has {} disconnected components: {parts:?}", parts.len())
            }
            TreeDiagnostic::Empty => write!(f, "skeleton has no joints"),
        }
    }
}

/// Checks that `edges` form a connected acyclic graph on `num_joints` nodes.
pub fn validate_tree(num_joints: usize, edges: &[(usize, usize)]) -> Result<(), TreeDiagnostic> {
    if num_joints == 0 {
        return Err(TreeDiagnostic::Empty);
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); num_joints];
    for &(i, j) in edges {
        if i >= num_joints || j >= num_joints {
            return Err(TreeDiagnostic::EdgeOutOfRange {
                edge: (i, j),
                joints: num_joints,
            });
        }
        if i == j {
            return Err(TreeDiagnostic::SelfLoop(i));
        }
        // A path already joining i and j closes a cycle with this edge.
        if let Some(path) = find_path(&adjacency, i, j) {
            return Err(TreeDiagnostic::Cycle(path));
        }
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut component = vec![usize::MAX; num_joints];
    let mut groups = Vec::new();
    for start in 0..num_joints {
        if component[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        component[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if component[v] == usize::MAX {
                    component[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    if groups.len() > 1 {
        return Err(TreeDiagnostic::Disconnected(groups));
    }
    Ok(())
}

fn find_path(adjacency: &[Vec<usize>], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; adjacency.len()];
    prev[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &v in &adjacency[u] {
            if prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}

/// Rooted traversal of a skeleton tree.
#[derive(Debug, Clone)]
pub struct Traversal {
    pub root: usize,
    /// Joints in breadth-first order from the root.
    pub order: Vec<usize>,
    /// `(parent joint, edge index)` for every joint except the root.
    pub parent: Vec<Option<(usize, usize)>>,
    pub children: Vec<Vec<(usize, usize)>>,
}

/// A tree-structured body model.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joint_names: Vec<String>,
    edges: Vec<(usize, usize)>,
    limb_lengths: Vec<f64>,
    tolerance: Tolerance,
    parts: Vec<Part>,
}

impl Skeleton {
    pub fn new(
        joint_names: Vec<String>,
        edges: Vec<(usize, usize)>,
        limb_lengths: Vec<f64>,
        tolerance: Tolerance,
        parts: Vec<Part>,
    ) -> Result<Self> {
        validate_tree(joint_names.len(), &edges).map_err(|d| Error::Skeleton(d.to_string()))?;
        if limb_lengths.len() != edges.len() {
            return Err(Error::Skeleton(format!(
                "{} limb lengths for {} edges",
                limb_lengths.len(),
                edges.len()
            )));
        }
        if let Some((k, l)) = limb_lengths.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Skeleton(format!("edge {:?} has non-positive length {l}", edges[k])));
        }
        if let Tolerance::Millimeters(eps) = tolerance {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::Skeleton(format!("tolerance {eps} must be non-negative")));
            }
        }
        let n = joint_names.len();
        if let Some(p) = parts.iter().find(|p| p.joints.0 >= n || p.joints.1 >= n) {
            return Err(Error::Skeleton(format!("part `{}` references an unknown joint", p.name)));
        }
        Ok(Skeleton {
            joint_names,
            edges,
            limb_lengths,
            tolerance,
            parts,
        })
    }

    pub fn num_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn limb_lengths(&self) -> &[f64] {
        &self.limb_lengths
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tolerance
    }

    pub fn with_tolerance(mut self, tolerance: Tolerance) -> Result<Self> {
        if let Tolerance::Millimeters(eps) = tolerance {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::Skeleton(format!("tolerance {eps} must be non-negative")));
            }
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn with_limb_lengths(self, limb_lengths: Vec<f64>) -> Result<Self> {
        Skeleton::new(self.joint_names, self.edges, limb_lengths, self.tolerance, self.parts)
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    /// Index of an edge in either orientation.
    pub fn edge_index(&self, edge: (usize, usize)) -> Option<usize> {
        self.edges
            .iter()
            .position(|&(i, j)| (i, j) == edge || (j, i) == edge)
    }

    pub fn limb_length(&self, edge: (usize, usize)) -> Result<f64> {
        self.edge_index(edge)
            .map(|k| self.limb_lengths[k])
            .ok_or_else(|| Error::InvalidInput(format!("edge {edge:?} is not in the skeleton")))
    }

    /// The limb-length prior `p(s_i, s_j)`: 1 inside the band, 0 outside.
    pub fn pairwise_compatibility(&self, edge: (usize, usize), distance: f64, tolerance_mm: f64) -> Result<f64> {
        let length = self.limb_length(edge)?;
        Ok(if in_limb_band(length, tolerance_mm, distance) { 1.0 } else { 0.0 })
    }

    /// Root joint for depth-relative targets: `pelvis` when present, else `neck`, else joint 0.
    pub fn default_root(&self) -> usize {
        self.joint_index("pelvis")
            .or_else(|| self.joint_index("neck"))
            .unwrap_or(0)
    }

    /// A hub joint (maximum degree, lowest index on ties) to root message passing.
    pub fn hub_joint(&self) -> usize {
        let mut degree = vec![0usize; self.num_joints()];
        for &(i, j) in &self.edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        (0..degree.len()).max_by_key(|&j| (degree[j], usize::MAX - j)).unwrap_or(0)
    }

    pub fn traversal(&self, root: usize) -> Traversal {
        let n = self.num_joints();
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, k) in &adjacency[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = Some((u, k));
                    children[u].push((v, k));
                    queue.push_back(v);
                }
            }
        }
        Traversal {
            root,
            order,
            parent,
            children,
        }
    }

    /// Fourteen-joint body model without a pelvis joint; the hips hang off the neck.
    pub fn body14() -> Skeleton {
        let names = [
            "head",
            "neck",
            "right_shoulder",
            "right_elbow",
            "right_wrist",
            "left_shoulder",
            "left_elbow",
            "left_wrist",
            "right_hip",
            "right_knee",
            "right_ankle",
            "left_hip",
            "left_knee",
            "left_ankle",
        ];
        let limbs = [
            ("neck", "head", 250.0),
            ("neck", "right_shoulder", 180.0),
            ("right_shoulder", "right_elbow", 280.0),
            ("right_elbow", "right_wrist", 250.0),
            ("neck", "left_shoulder", 180.0),
            ("left_shoulder", "left_elbow", 280.0),
            ("left_elbow", "left_wrist", 250.0),
            ("neck", "right_hip", 520.0),
            ("right_hip", "right_knee", 430.0),
            ("right_knee", "right_ankle", 420.0),
            ("neck", "left_hip", 520.0),
            ("left_hip", "left_knee", 430.0),
            ("left_knee", "left_ankle", 420.0),
        ];
        build_named(&names, &limbs)
    }

    /// Fifteen-joint variant with a pelvis joint between the neck and the hips.
    pub fn body15() -> Skeleton {
        let names = [
            "head",
            "neck",
            "right_shoulder",
            "right_elbow",
            "right_wrist",
            "left_shoulder",
            "left_elbow",
            "left_wrist",
            "pelvis",
            "right_hip",
            "right_knee",
            "right_ankle",
            "left_hip",
            "left_knee",
            "left_ankle",
        ];
        let limbs = [
            ("neck", "head", 250.0),
            ("neck", "right_shoulder", 180.0),
            ("right_shoulder", "right_elbow", 280.0),
            ("right_elbow", "right_wrist", 250.0),
            ("neck", "left_shoulder", 180.0),
            ("left_shoulder", "left_elbow", 280.0),
            ("left_elbow", "left_wrist", 250.0),
            ("neck", "pelvis", 500.0),
            ("pelvis", "right_hip", 110.0),
            ("right_hip", "right_knee", 430.0),
            ("right_knee", "right_ankle", 420.0),
            ("pelvis", "left_hip", 110.0),
            ("left_hip", "left_knee", 430.0),
            ("left_knee", "left_ankle", 420.0),
        ];
        build_named(&names, &limbs)
    }
}

fn build_named(names: &[&str], limbs: &[(&str, &str, f64)]) -> Skeleton {
    let idx = |n: &str| names.iter().position(|x| *x == n).expect("known joint");
    let edges = limbs.iter().map(|(a, b, _)| (idx(a), idx(b))).collect();
    let lengths = limbs.iter().map(|(_, _, l)| *l).collect();
    let part_defs = [
        ("head", "head", "neck"),
        ("right upper arm", "right_shoulder", "right_elbow"),
        ("left upper arm", "left_shoulder", "left_elbow"),
        ("right lower arm", "right_elbow", "right_wrist"),
        ("left lower arm", "left_elbow", "left_wrist"),
        ("right upper leg", "right_hip", "right_knee"),
        ("left upper leg", "left_hip", "left_knee"),
        ("right lower leg", "right_knee", "right_ankle"),
        ("left lower leg", "left_knee", "left_ankle"),
    ];
    let parts = part_defs
        .iter()
        .map(|(name, a, b)| Part {
            name: name.to_string(),
            joints: (idx(a), idx(b)),
        })
        .collect();
    Skeleton::new(
        names.iter().map(|s| s.to_string()).collect(),
        edges,
        lengths,
        Tolerance::VoxelPitch,
        parts,
    )
    .expect("built-in skeleton is valid")
}

/// Joint positions of one frame, with a presence flag per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose3D {
    pub positions: Vec<Vector3<f64>>,
    pub present: Vec<bool>,
}

impl Pose3D {
    pub fn new(positions: Vec<Vector3<f64>>, present: Vec<bool>) -> Result<Self> {
        if positions.len() != present.len() {
            return Err(Error::InvalidInput("positions and presence flags differ in length".into()));
        }
        if positions
            .iter()
            .zip(&present)
            .any(|(p, &on)| on && p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidInput("present joint with non-finite position".into()));
        }
        Ok(Pose3D { positions, present })
    }

    /// All joints present.
    pub fn complete(positions: Vec<Vector3<f64>>) -> Self {
        let present = vec![true; positions.len()];
        Pose3D { positions, present }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn get(&self, joint: usize) -> Option<&Vector3<f64>> {
        self.present
            .get(joint)
            .copied()
            .unwrap_or(false)
            .then(|| &self.positions[joint])
    }
}

/// Median of `values`; even counts average the two middle values.
pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Per-edge median of observed endpoint distances.
pub fn estimate_limb_lengths(poses: &[Pose3D], edges: &[(usize, usize)]) -> Result<Vec<f64>> {
    let mut missing = Vec::new();
    let mut lengths = Vec::with_capacity(edges.len());
    for &(i, j) in edges {
        let mut dists: Vec<f64> = poses
            .iter()
            .filter_map(|p| Some((p.get(i)? - p.get(j)?).norm()))
            .collect();
        match median(&mut dists) {
            Some(m) => lengths.push(m),
            None => missing.push((i, j)),
        }
    }
    if !missing.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no pose observes both endpoints of edges {missing:?}"
        )));
    }
    Ok(lengths)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub length_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartRecord {
    pub name: String,
    pub from: String,
    pub to: String,
}

/// On-disk skeleton document. A missing `epsilon_mm` means one voxel pitch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonDocument {
    pub joints: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_mm: Option<f64>,
    #[serde(default)]
    pub parts: Vec<PartRecord>,
}

impl Skeleton {
    pub fn to_document(&self) -> SkeletonDocument {
        let name = |i: usize| self.joint_names[i].clone();
        SkeletonDocument {
            joints: self.joint_names.clone(),
            edges: self
                .edges
                .iter()
                .zip(&self.limb_lengths)
                .map(|(&(i, j), &l)| EdgeRecord {
                    from: name(i),
                    to: name(j),
                    length_mm: l,
                })
                .collect(),
            epsilon_mm: match self.tolerance {
                Tolerance::Millimeters(mm) => Some(mm),
                Tolerance::VoxelPitch => None,
            },
            parts: self
                .parts
                .iter()
                .map(|p| PartRecord {
                    name: p.name.clone(),
                    from: name(p.joints.0),
                    to: name(p.joints.1),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &SkeletonDocument) -> Result<Self> {
        let index: HashMap<&str, usize> = doc
            .joints
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        if index.len() != doc.joints.len() {
            return Err(Error::Skeleton("duplicate joint names".into()));
        }
        let lookup = |n: &str| {
            index
                .get(n)
                .copied()
                .ok_or_else(|| Error::Skeleton(format!("unknown joint `{n}`")))
        };
        let mut edges = Vec::new();
        let mut lengths = Vec::new();
        for e in &doc.edges {
            edges.push((lookup(&e.from)?, lookup(&e.to)?));
            lengths.push(e.length_mm);
        }
        let parts = doc
            .parts
            .iter()
            .map(|p| {
                Ok(Part {
                    name: p.name.clone(),
                    joints: (lookup(&p.from)?, lookup(&p.to)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let tolerance = doc.epsilon_mm.map_or(Tolerance::VoxelPitch, Tolerance::Millimeters);
        Skeleton::new(doc.joints.clone(), edges, lengths, tolerance, parts)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let doc: SkeletonDocument = crate::io::read_json(path)?;
        Skeleton::from_document(&doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_json(path, &self.to_document())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(lengths: &[f64], eps: f64) -> Skeleton {
        let n = lengths.len() + 1;
        Skeleton::new(
            (0..n).map(|i| format!("j{i}")).collect(),
            (0..n - 1).map(|i| (i, i + 1)).collect(),
            lengths.to_vec(),
            Tolerance::Millimeters(eps),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn compatibility_examples() {
        let s = chain(&[300.0], 10.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 300.0, 10.0).unwrap(), 1.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 311.0, 10.0).unwrap(), 0.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 290.0, 10.0).unwrap(), 1.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 310.0, 10.0).unwrap(), 1.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 289.9, 10.0).unwrap(), 0.0);
        // symmetric in the endpoints
        assert_eq!(s.pairwise_compatibility((1, 0), 290.0, 10.0).unwrap(), 1.0);
        assert!(s.pairwise_compatibility((0, 2), 300.0, 10.0).is_err());
    }

    #[test]
    fn zero_tolerance_is_a_sphere() {
        let s = chain(&[300.0], 0.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 300.0, 0.0).unwrap(), 1.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 300.0 * (1.0 + 1e-12), 0.0).unwrap(), 1.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 300.0 * (1.0 + 1e-8), 0.0).unwrap(), 0.0);
        assert_eq!(s.pairwise_compatibility((0, 1), 299.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn tree_validation_examples() {
        assert_eq!(validate_tree(3, &[(0, 1), (1, 2)]), Ok(()));
        match validate_tree(3, &[(0, 1), (1, 2), (2, 0)]) {
            Err(TreeDiagnostic::Cycle(c)) => {
                assert_eq!(c.len(), 3);
                assert!(c.contains(&0) && c.contains(&1) && c.contains(&2));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
        assert_eq!(
            validate_tree(4, &[(0, 1), (2, 3)]),
            Err(TreeDiagnostic::Disconnected(vec![vec![0, 1], vec![2, 3]]))
        );
        assert_eq!(validate_tree(2, &[(1, 1)]), Err(TreeDiagnostic::SelfLoop(1)));
        assert!(matches!(validate_tree(2, &[(0, 5)]), Err(TreeDiagnostic::EdgeOutOfRange { .. })));
        assert_eq!(validate_tree(1, &[]), Ok(()));
    }

    #[test]
    fn skeleton_rejects_bad_lengths_and_parts() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(Skeleton::new(names.clone(), vec![(0, 1)], vec![0.0], Tolerance::VoxelPitch, vec![]).is_err());
        assert!(Skeleton::new(names.clone(), vec![(0, 1)], vec![1.0], Tolerance::Millimeters(-1.0), vec![]).is_err());
        let bad_part = Part {
            name: "x".into(),
            joints: (0, 7),
        };
        assert!(Skeleton::new(names, vec![(0, 1)], vec![1.0], Tolerance::VoxelPitch, vec![bad_part]).is_err());
    }

    #[test]
    fn limb_length_medians() {
        let pose = |d: f64| Pose3D::complete(vec![Vector3::zeros(), Vector3::new(0.0, 0.0, d)]);
        assert_eq!(estimate_limb_lengths(&[pose(300.0)], &[(0, 1)]).unwrap(), vec![300.0]);
        let odd: Vec<_> = [290.0, 310.0, 300.0].iter().map(|&d| pose(d)).collect();
        assert_eq!(estimate_limb_lengths(&odd, &[(0, 1)]).unwrap(), vec![300.0]);
        let even: Vec<_> = [320.0, 290.0, 310.0, 300.0].iter().map(|&d| pose(d)).collect();
        assert_eq!(estimate_limb_lengths(&even, &[(0, 1)]).unwrap(), vec![305.0]);
    }

    #[test]
    fn unobserved_edge_is_reported() {
        let p = Pose3D::new(vec![Vector3::zeros(), Vector3::zeros()], vec![true, false]).unwrap();
        let err = estimate_limb_lengths(&[p], &[(0, 1)]).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"));
    }

    #[test]
    fn body_models_are_trees() {
        let b14 = Skeleton::body14();
        assert_eq!(b14.num_joints(), 14);
        assert_eq!(b14.edges().len(), 13);
        assert_eq!(b14.default_root(), b14.joint_index("neck").unwrap());
        assert_eq!(b14.hub_joint(), b14.joint_index("neck").unwrap());
        let b15 = Skeleton::body15();
        assert_eq!(b15.num_joints(), 15);
        assert_eq!(b15.default_root(), b15.joint_index("pelvis").unwrap());
    }

    #[test]
    fn traversal_covers_tree() {
        let s = Skeleton::body14();
        let t = s.traversal(0);
        assert_eq!(t.order.len(), 14);
        assert!(t.parent[0].is_none());
        for &j in &t.order[1..] {
            let (p, k) = t.parent[j].unwrap();
            let e = s.edges()[k];
            assert!(e == (p, j) || e == (j, p));
        }
    }

    #[test]
    fn document_round_trip() {
        let s = Skeleton::body15().with_tolerance(Tolerance::Millimeters(12.5)).unwrap();
        assert_eq!(Skeleton::from_document(&s.to_document()).unwrap(), s);
        let mut doc = s.to_document();
        doc.edges.push(EdgeRecord {
            from: "head".into(),
            to: "left_ankle".into(),
            length_mm: 10.0,
        });
        assert!(Skeleton::from_document(&doc).is_err());
    }
}
