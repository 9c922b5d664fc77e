//! Persistence diagrams of filtered cubical complexes.
//!
//! The main path is standard column reduction of the boundary matrix over
//! the two-element field, processed in the complex's sorted order with the
//! clearing optimization. Columns are kept as sorted id lists and merged by
//! symmetric difference.
//!
//! [`betti_oracle`] is an independent check: it counts connected components
//! with union-find and recovers the first Betti number from the Euler
//! characteristic, never touching the reduction. [`d0_pairs_union_find`]
//! re-derives the dimension-0 pairing with the elder rule, again without
//! the boundary matrix; both agree with the reduction on every input.
//!
//! The one component that never dies is reported as an essential point
//! with death 1.0, the end of the filtration range.

use std::io::Write;
use std::path::Path;

use serde_json::json;

use crate::cubical::{build_complex, FilteredComplex};
use crate::imageio::GrayImage;

#[derive(Debug, thiserror::Error)]
pub enum PersistenceError {
    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A single birth/death pair in filtration coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePoint {
    pub birth: f64,
    pub death: f64,
    pub dim: u8,
    pub essential: bool,
}

impl PersistencePoint {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Persistence diagram split by homology dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub d0: Vec<PersistencePoint>,
    pub d1: Vec<PersistencePoint>,
}

/// Raw output of the boundary-matrix reduction: `(birth_cell, death_cell)`
/// id pairs (zero-persistence pairs included) and the unpaired cells.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub pairs: Vec<(usize, usize)>,
    pub essential: Vec<usize>,
}

/// Column reduction over GF(2) in sorted order, top dimension first so
/// that every pairing clears the birth column of the dimension below.
pub fn reduce_complex(complex: &FilteredComplex) -> Reduction {
    let cells = complex.cells();
    let order = complex.sorted_order();
    let n = cells.len();

    let mut rank_of = vec![0usize; n];
    for (r, &id) in order.iter().enumerate() {
        rank_of[id] = r;
    }

    // low -> rank of the column that holds that low
    let mut killer_of_low = vec![usize::MAX; n];
    let mut reduced: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut paired_as_birth = vec![false; n];
    let mut paired_as_death = vec![false; n];
    let mut pairs = Vec::new();
    let mut essential = Vec::new();

    for dim in [2u8, 1u8] {
        for r in 0..n {
            let cell = &cells[order[r]];
            if cell.dim != dim || paired_as_birth[r] {
                continue;
            }
            let mut col: Vec<usize> = cell.boundary().iter().map(|&b| rank_of[b]).collect();
            col.sort_unstable();
            loop {
                match col.last() {
                    None => {
                        essential.push(order[r]);
                        break;
                    }
                    Some(&low) => {
                        let killer = killer_of_low[low];
                        if killer == usize::MAX {
                            killer_of_low[low] = r;
                            paired_as_birth[low] = true;
                            paired_as_death[r] = true;
                            pairs.push((order[low], order[r]));
                            reduced[r] = Some(col);
                            break;
                        }
                        col = symmetric_difference(&col, reduced[killer].as_ref().unwrap());
                    }
                }
            }
        }
    }

    for r in 0..n {
        if cells[order[r]].dim == 0 && !paired_as_birth[r] {
            debug_assert!(!paired_as_death[r]);
            essential.push(order[r]);
        }
    }

    Reduction { pairs, essential }
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Computes the 0- and 1-dimensional persistence diagram. Zero-persistence
/// pairs are dropped; the surviving connected component becomes an
/// essential point with death 1.0.
pub fn compute_diagram(complex: &FilteredComplex) -> PersistenceDiagram {
    let cells = complex.cells();
    let reduction = reduce_complex(complex);

    let mut diagram = PersistenceDiagram::default();
    for (birth_cell, death_cell) in reduction.pairs {
        let birth = cells[birth_cell].value;
        let death = cells[death_cell].value;
        if birth == death {
            continue;
        }
        let point = PersistencePoint {
            birth,
            death,
            dim: cells[birth_cell].dim,
            essential: false,
        };
        match point.dim {
            0 => diagram.d0.push(point),
            1 => diagram.d1.push(point),
            _ => unreachable!("no cells of dimension 3"),
        }
    }
    for cell in reduction.essential {
        // a full rectangular grid has exactly one essential class, in dim 0
        debug_assert_eq!(cells[cell].dim, 0);
        diagram.d0.push(PersistencePoint {
            birth: cells[cell].value,
            death: 1.0,
            dim: 0,
            essential: true,
        });
    }

    let by_coords = |a: &PersistencePoint, b: &PersistencePoint| {
        a.birth
            .total_cmp(&b.birth)
            .then(a.death.total_cmp(&b.death))
            .then(a.essential.cmp(&b.essential))
    };
    diagram.d0.sort_by(by_coords);
    diagram.d1.sort_by(by_coords);
    diagram
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if the two were already in the same set.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Betti numbers `(b0, b1)` of the thresholded subcomplex, computed
/// independently of the reduction: components by union-find over vertices
/// and edges, then `b1 = b0 - chi` with `chi = #V - #E + #F` (a planar
/// subcomplex has no 2-cycles). Empty subcomplex gives `(0, 0)`.
pub fn betti_oracle(image: &GrayImage, alpha: f64) -> Result<(usize, usize), PersistenceError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PersistenceError::ThresholdOutOfRange(alpha));
    }
    let complex = build_complex(image);
    let cells = complex.cells();
    let present = complex.at_threshold(alpha).expect("alpha validated");
    if present.is_empty() {
        return Ok((0, 0));
    }

    let mut uf = UnionFind::new(complex.vertex_count());
    let (mut v, mut e, mut f) = (0usize, 0usize, 0usize);
    for &id in &present {
        match cells[id].dim {
            0 => v += 1,
            1 => {
                e += 1;
                uf.union(cells[id].boundary()[0], cells[id].boundary()[1]);
            }
            _ => f += 1,
        }
    }
    let mut roots: Vec<usize> = present
        .iter()
        .filter(|&&id| cells[id].dim == 0)
        .map(|&id| uf.find(id))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    let b0 = roots.len();
    let chi = v as i64 - e as i64 + f as i64;
    let b1 = b0 as i64 - chi;
    debug_assert!(b1 >= 0);
    Ok((b0, b1 as usize))
}

/// Number of features of the given dimension alive at each threshold:
/// points with `birth <= t < death`, plus essential points with
/// `birth <= t`.
pub fn betti_curve(
    diagram: &PersistenceDiagram,
    dim: u8,
    thresholds: &[f64],
) -> Result<Vec<usize>, PersistenceError> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(PersistenceError::UnsortedThresholds);
    }
    if let Some(&t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(PersistenceError::ThresholdOutOfRange(t));
    }
    let points = match dim {
        0 => &diagram.d0,
        _ => &diagram.d1,
    };
    Ok(thresholds
        .iter()
        .map(|&t| {
            points
                .iter()
                .filter(|p| p.birth <= t && (t < p.death || p.essential))
                .count()
        })
        .collect())
}

/// Dimension-0 pairing via the elder rule, independent of the reduction.
/// Walks cells in sorted order; an edge that merges two components kills
/// the component with the younger birth vertex (ties resolved by the total
/// order). Returns `(pairs, essential_vertices)` by cell id, including
/// zero-persistence pairs.
pub fn d0_pairs_union_find(complex: &FilteredComplex) -> (Vec<(usize, usize)>, Vec<usize>) {
    let cells = complex.cells();
    let order = complex.sorted_order();
    let nv = complex.vertex_count();

    let mut rank_of = vec![0usize; cells.len()];
    for (r, &id) in order.iter().enumerate() {
        rank_of[id] = r;
    }

    let mut uf = UnionFind::new(nv);
    // birth rank of the component represented by each root
    let mut birth_rank: Vec<usize> = (0..nv).map(|v| rank_of[v]).collect();

    let mut pairs = Vec::new();
    for &id in order {
        let cell = &cells[id];
        if cell.dim != 1 {
            continue;
        }
        let (u, v) = (cell.boundary()[0], cell.boundary()[1]);
        let (ru, rv) = (uf.find(u), uf.find(v));
        if ru == rv {
            continue; // creates a 1-cycle, handled by dimension-1 pairing
        }
        let (elder, younger) = if birth_rank[ru] <= birth_rank[rv] {
            (ru, rv)
        } else {
            (rv, ru)
        };
        pairs.push((order[birth_rank[younger]], id));
        let elder_birth = birth_rank[elder];
        uf.union(ru, rv);
        birth_rank[uf.find(ru)] = elder_birth;
    }

    let mut roots: Vec<usize> = (0..nv).map(|v| uf.find(v)).collect();
    roots.sort_unstable();
    roots.dedup();
    let essential = roots.iter().map(|&r| order[birth_rank[r]]).collect();
    (pairs, essential)
}

/// Serializes a diagram as `{"d0": [[birth, death, essential], ...],
/// "d1": [[birth, death], ...]}`.
pub fn diagram_to_json(diagram: &PersistenceDiagram) -> serde_json::Value {
    let d0: Vec<serde_json::Value> = diagram
        .d0
        .iter()
        .map(|p| json!([p.birth, p.death, p.essential]))
        .collect();
    let d1: Vec<serde_json::Value> = diagram
        .d1
        .iter()
        .map(|p| json!([p.birth, p.death]))
        .collect();
    json!({ "d0": d0, "d1": d1 })
}

pub fn write_diagram_json(
    path: &Path,
    diagram: &PersistenceDiagram,
) -> Result<(), PersistenceError> {
    let io_err = |source| PersistenceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    let text = serde_json::to_string_pretty(&diagram_to_json(diagram)).expect("valid json");
    file.write_all(text.as_bytes()).map_err(io_err)?;
    file.write_all(b"\n").map_err(io_err)
}
