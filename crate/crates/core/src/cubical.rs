//! Filtered cubical complexes of grayscale images.
//!
//! A pixel at row `i`, column `j` becomes the unit square `[i,i+1] x
//! [j,j+1]` (a 2-cell). Its filtration value is `g(i,j) = 1 - X[i,j]`, so
//! bright pixels enter the filtration first. Edges and vertices take the
//! minimum `g` over the pixel squares they bound (the lower-star
//! extension), which makes every sublevel set closed under taking
//! boundaries.
//!
//! Cell ids are dense and laid out per dimension: vertices first, then
//! horizontal edges, then vertical edges, then squares. For an `H x W`
//! image there are `(H+1)(W+1)` vertices, `(H+1)W + H(W+1)` edges and
//! `H*W` squares.
//!
//! Everything lives in filtration coordinates `alpha in [0, 1]`. To map a
//! value back to pixel intensity use `v = 1 - alpha`.

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::imageio::GrayImage;

#[derive(Debug, thiserror::Error)]
pub enum CubicalError {
    #[error("threshold {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
}

/// One cell of the complex. Its boundary lists the ids of its
/// codimension-one faces: empty for a vertex, two vertices for an edge,
/// four edges for a square. Boundaries are stored inline (a complex holds
/// thousands of cells, so per-cell heap allocation is noticeable when
/// featurizing in parallel).
#[derive(Debug, Clone)]
pub struct Cell {
    pub id: usize,
    pub dim: u8,
    pub value: f64,
    faces: [usize; 4],
}

impl Cell {
    fn new(id: usize, dim: u8, value: f64, faces: [usize; 4]) -> Self {
        Cell {
            id,
            dim,
            value,
            faces,
        }
    }

    pub fn boundary(&self) -> &[usize] {
        let len = match self.dim {
            0 => 0,
            1 => 2,
            _ => 4,
        };
        &self.faces[..len]
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Cell", 4)?;
        s.serialize_field("id", &self.id)?;
        s.serialize_field("dim", &self.dim)?;
        s.serialize_field("value", &self.value)?;
        s.serialize_field("boundary", self.boundary())?;
        s.end()
    }
}

/// All cells of an image grid together with a filtration-compatible total
/// order (sorted by `(value, dim, id)`, so faces precede cofaces at ties).
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    height: usize,
    width: usize,
    cells: Vec<Cell>,
    sorted_order: Vec<usize>,
}

impl FilteredComplex {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Cell ids sorted by `(value, dim, id)`; every cell appears after all
    /// of its boundary cells.
    pub fn sorted_order(&self) -> &[usize] {
        &self.sorted_order
    }

    pub fn vertex_count(&self) -> usize {
        (self.height + 1) * (self.width + 1)
    }

    pub fn edge_count(&self) -> usize {
        (self.height + 1) * self.width + self.height * (self.width + 1)
    }

    pub fn square_count(&self) -> usize {
        self.height * self.width
    }

    /// Ids of all cells with filtration value `<= alpha`, ascending. The
    /// result is a subcomplex: it is closed under taking boundaries.
    pub fn at_threshold(&self, alpha: f64) -> Result<Vec<usize>, CubicalError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CubicalError::AlphaOutOfRange(alpha));
        }
        Ok(self
            .cells
            .iter()
            .filter(|c| c.value <= alpha)
            .map(|c| c.id)
            .collect())
    }
}

struct GridIndex {
    height: usize,
    width: usize,
}

impl GridIndex {
    fn vertex(&self, r: usize, c: usize) -> usize {
        r * (self.width + 1) + c
    }

    /// Horizontal edge from vertex (r, c) to (r, c+1); r in [0, H], c in [0, W).
    fn hedge(&self, r: usize, c: usize) -> usize {
        (self.height + 1) * (self.width + 1) + r * self.width + c
    }

    /// Vertical edge from vertex (r, c) to (r+1, c); r in [0, H), c in [0, W].
    fn vedge(&self, r: usize, c: usize) -> usize {
        (self.height + 1) * (self.width + 1)
            + (self.height + 1) * self.width
            + r * (self.width + 1)
            + c
    }

    /// Square of pixel (i, j); i in [0, H), j in [0, W).
    fn square(&self, i: usize, j: usize) -> usize {
        (self.height + 1) * (self.width + 1)
            + (self.height + 1) * self.width
            + self.height * (self.width + 1)
            + i * self.width
            + j
    }
}

/// Builds the filtered cubical complex of an image.
pub fn build_complex(image: &GrayImage) -> FilteredComplex {
    let (h, w) = (image.height(), image.width());
    let grid = GridIndex {
        height: h,
        width: w,
    };
    let total = (h + 1) * (w + 1) + (h + 1) * w + h * (w + 1) + h * w;
    let mut cells: Vec<Cell> = Vec::with_capacity(total);

    // pixel filtration value, g = 1 - intensity
    let g = |i: usize, j: usize| 1.0 - image.get(i, j);

    // minimum g over the pixel squares cofacing a face; `rows`/`cols` give
    // the candidate pixel coordinates, out-of-grid ones are skipped
    let min_over = |rows: &[isize], cols: &[isize]| -> f64 {
        let mut m = f64::INFINITY;
        for &i in rows {
            for &j in cols {
                if i >= 0 && (i as usize) < h && j >= 0 && (j as usize) < w {
                    m = m.min(g(i as usize, j as usize));
                }
            }
        }
        m
    };

    for r in 0..=h {
        for c in 0..=w {
            cells.push(Cell::new(
                grid.vertex(r, c),
                0,
                min_over(&[r as isize - 1, r as isize], &[c as isize - 1, c as isize]),
                [0; 4],
            ));
        }
    }
    for r in 0..=h {
        for c in 0..w {
            cells.push(Cell::new(
                grid.hedge(r, c),
                1,
                min_over(&[r as isize - 1, r as isize], &[c as isize]),
                [grid.vertex(r, c), grid.vertex(r, c + 1), 0, 0],
            ));
        }
    }
    for r in 0..h {
        for c in 0..=w {
            cells.push(Cell::new(
                grid.vedge(r, c),
                1,
                min_over(&[r as isize], &[c as isize - 1, c as isize]),
                [grid.vertex(r, c), grid.vertex(r + 1, c), 0, 0],
            ));
        }
    }
    for i in 0..h {
        for j in 0..w {
            cells.push(Cell::new(
                grid.square(i, j),
                2,
                g(i, j),
                [
                    grid.hedge(i, j),
                    grid.hedge(i + 1, j),
                    grid.vedge(i, j),
                    grid.vedge(i, j + 1),
                ],
            ));
        }
    }

    debug_assert!(cells.iter().enumerate().all(|(i, c)| c.id == i));
    debug_assert!(cells
        .iter()
        .all(|c| c.boundary().iter().all(|&b| cells[b].value <= c.value)));

    let mut sorted_order: Vec<usize> = (0..cells.len()).collect();
    sorted_order.sort_unstable_by(|&a, &b| {
        cells[a]
            .value
            .total_cmp(&cells[b].value)
            .then(cells[a].dim.cmp(&cells[b].dim))
            .then(a.cmp(&b))
    });

    FilteredComplex {
        height: h,
        width: w,
        cells,
        sorted_order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn image(h: usize, w: usize, px: &[f64]) -> GrayImage {
        GrayImage::new(h, w, px.to_vec()).unwrap()
    }

    fn random_image(h: usize, w: usize, rng: &mut SplitMix64) -> GrayImage {
        // byte-quantized so threshold ties actually occur
        let px = (0..h * w)
            .map(|_| rng.next_below(256) as f64 / 255.0)
            .collect();
        GrayImage::new(h, w, px).unwrap()
    }

    #[test]
    fn single_pixel_propagates_value_everywhere() {
        let complex = build_complex(&image(1, 1, &[0.7]));
        assert_eq!(complex.vertex_count(), 4);
        assert_eq!(complex.edge_count(), 4);
        assert_eq!(complex.square_count(), 1);
        for cell in complex.cells() {
            assert!((cell.value - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_cell_counts() {
        let complex = build_complex(&image(2, 2, &[0.1, 0.2, 0.3, 0.4]));
        assert_eq!(complex.square_count(), 4);
        assert_eq!(complex.edge_count(), 12);
        assert_eq!(complex.vertex_count(), 9);
        assert_eq!(complex.cells().len(), 25);
    }

    #[test]
    fn shared_edge_takes_minimum_over_cofaces() {
        // 1x2 image: pixels 1.0 and 0.0 -> g values 0.0 and 1.0; the shared
        // vertical edge must take min(0.0, 1.0) = 0.0.
        let complex = build_complex(&image(1, 2, &[1.0, 0.0]));
        let grid = GridIndex {
            height: 1,
            width: 2,
        };
        let shared = grid.vedge(0, 1);
        assert_eq!(complex.cells()[shared].value, 0.0);
        assert_eq!(complex.cells()[grid.square(0, 0)].value, 0.0);
        assert_eq!(complex.cells()[grid.square(0, 1)].value, 1.0);
    }

    #[test]
    fn threshold_one_is_everything_and_zero_is_brightest() {
        let img = image(2, 2, &[1.0, 0.5, 0.25, 0.0]);
        let complex = build_complex(&img);
        assert_eq!(complex.at_threshold(1.0).unwrap().len(), 25);
        // alpha = 0: only the closure of the brightest pixel (value 1.0)
        let at_zero = complex.at_threshold(0.0).unwrap();
        assert_eq!(at_zero.len(), 9); // 1 square + 4 edges + 4 vertices
    }

    #[test]
    fn threshold_out_of_range_is_an_error() {
        let complex = build_complex(&image(1, 1, &[0.5]));
        assert!(matches!(
            complex.at_threshold(1.5),
            Err(CubicalError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            complex.at_threshold(-0.1),
            Err(CubicalError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn face_values_match_minimum_over_pixel_cofaces_exhaustively() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..20 {
            let img = random_image(5, 5, &mut rng);
            let complex = build_complex(&img);
            let grid = GridIndex {
                height: 5,
                width: 5,
            };
            // independent geometric enumeration of pixel cofaces
            for r in 0..=5usize {
                for c in 0..=5usize {
                    let mut expect = f64::INFINITY;
                    for (di, dj) in [(0i64, 0i64), (0, 1), (1, 0), (1, 1)] {
                        let i = r as i64 - di;
                        let j = c as i64 - dj;
                        if (0..5).contains(&i) && (0..5).contains(&j) {
                            expect = expect.min(1.0 - img.get(i as usize, j as usize));
                        }
                    }
                    assert_eq!(complex.cells()[grid.vertex(r, c)].value, expect);
                }
            }
            for r in 0..=5usize {
                for c in 0..5usize {
                    let mut expect = f64::INFINITY;
                    for di in [1i64, 0] {
                        let i = r as i64 - di;
                        if (0..5).contains(&i) {
                            expect = expect.min(1.0 - img.get(i as usize, c));
                        }
                    }
                    assert_eq!(complex.cells()[grid.hedge(r, c)].value, expect);
                }
            }
        }
    }

    #[test]
    fn sorted_order_respects_boundaries() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..20 {
            let img = random_image(4, 6, &mut rng);
            let complex = build_complex(&img);
            let mut rank = vec![0usize; complex.cells().len()];
            for (r, &id) in complex.sorted_order().iter().enumerate() {
                rank[id] = r;
            }
            for cell in complex.cells() {
                for &b in cell.boundary() {
                    assert!(
                        rank[b] < rank[cell.id],
                        "boundary cell {b} not before {}",
                        cell.id
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn thresholded_sets_are_closed_and_nested(
            seed in 0u64..1000,
            h in 1usize..5,
            w in 1usize..5,
        ) {
            let mut rng = SplitMix64::new(seed);
            let img = random_image(h, w, &mut rng);
            let complex = build_complex(&img);
            let mut previous: Vec<usize> = Vec::new();
            for step in 0..=4 {
                let alpha = step as f64 / 4.0;
                let ids = complex.at_threshold(alpha).unwrap();
                let present: std::collections::HashSet<usize> = ids.iter().copied().collect();
                for &id in &ids {
                    for &b in complex.cells()[id].boundary() {
                        prop_assert!(present.contains(&b), "not closed under boundary");
                    }
                }
                for &id in &previous {
                    prop_assert!(present.contains(&id), "not nested");
                }
                previous = ids;
            }
        }
    }
}
