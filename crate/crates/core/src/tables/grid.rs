use std::collections::VecDeque;

/// Marker for texels no integrated ray ever reached.
pub const SENTINEL: f32 = -f32::MAX;

pub fn is_sentinel<const N: usize>(v: &[f32; N]) -> bool {
    v[0] == SENTINEL
}

/// Row-major texel grid: `data[row * width + col]`, columns along `s`,
/// rows along `t`. Keeps a hole-filled copy for interpolation.
#[derive(Debug, Clone)]
pub struct Grid<const N: usize> {
    width: usize,
    height: usize,
    data: Vec<[f32; N]>,
    filled: Vec<[f32; N]>,
}

impl<const N: usize> PartialEq for Grid<N> {
    fn eq(&self, o: &Self) -> bool {
        self.width == o.width
            && self.height == o.height
            && self.data.len() == o.data.len()
            && self
                .data
                .iter()
                .zip(&o.data)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

impl<const N: usize> Grid<N> {
    /// `segments` are column ranges that hole filling must not cross.
    pub fn new(width: usize, height: usize, data: Vec<[f32; N]>, segments: &[(usize, usize)]) -> Self {
        assert_eq!(data.len(), width * height);
        let filled = fill_holes(width, height, &data, segments);
        Grid {
            width,
            height,
            data,
            filled,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[[f32; N]] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize) -> [f32; N] {
        self.data[row * self.width + col]
    }

    pub fn filled(&self, col: usize, row: usize) -> [f32; N] {
        self.filled[row * self.width + col]
    }

    /// Bilinear interpolation of the filled grid inside columns `[c0, c0 + n)`.
    /// `x` in `[0, n-1]` and `y` in `[0, height-1]` are fractional texel indices.
    pub fn bilinear(&self, c0: usize, n: usize, x: f64, y: f64) -> Option<[f64; N]> {
        let (i, fx) = split(x, n);
        let (j, fy) = split(y, self.height);
        let i1 = (i + 1).min(n - 1);
        let j1 = (j + 1).min(self.height - 1);
        let a = self.filled(c0 + i, j);
        let b = self.filled(c0 + i1, j);
        let c = self.filled(c0 + i, j1);
        let d = self.filled(c0 + i1, j1);
        if [a, b, c, d].iter().any(is_sentinel) {
            return None;
        }
        let mut out = [0.0; N];
        for k in 0..N {
            let top = lerp(a[k] as f64, b[k] as f64, fx);
            let bottom = lerp(c[k] as f64, d[k] as f64, fx);
            out[k] = lerp(top, bottom, fy);
        }
        Some(out)
    }
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else {
        a + (b - a) * f
    }
}

fn split(x: f64, n: usize) -> (usize, f64) {
    if n < 2 {
        return (0, 0.0);
    }
    let x = x.clamp(0.0, (n - 1) as f64);
    // x ≥ 0, so truncation is floor without the libm call.
    let i = (x as usize).min(n - 2);
    (i, x - i as f64)
}

/// Replaces sentinel texels with their nearest valid neighbour (4-connected
/// breadth-first distance) within each column segment.
fn fill_holes<const N: usize>(
    width: usize,
    height: usize,
    data: &[[f32; N]],
    segments: &[(usize, usize)],
) -> Vec<[f32; N]> {
    let mut out = data.to_vec();
    for &(c0, c1) in segments {
        let mut queue = VecDeque::new();
        let mut seen = vec![false; width * height];
        for row in 0..height {
            for col in c0..c1 {
                let k = row * width + col;
                if !is_sentinel(&data[k]) {
                    seen[k] = true;
                    queue.push_back((col, row));
                }
            }
        }
        while let Some((col, row)) = queue.pop_front() {
            let v = out[row * width + col];
            let mut visit = |c: usize, r: usize| {
                let k = r * width + c;
                if !seen[k] {
                    seen[k] = true;
                    out[k] = v;
                    queue.push_back((c, r));
                }
            };
            if col > c0 {
                visit(col - 1, row);
            }
            if col + 1 < c1 {
                visit(col + 1, row);
            }
            if row > 0 {
                visit(col, row - 1);
            }
            if row + 1 < height {
                visit(col, row + 1);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holes_take_nearest_value_within_segment() {
        let s = [SENTINEL, SENTINEL];
        let data = vec![[1.0, 1.0], s, s, [4.0, 4.0]];
        let g = Grid::new(4, 1, data, &[(0, 2), (2, 4)]);
        assert_eq!(g.filled(1, 0), [1.0, 1.0]);
        assert_eq!(g.filled(2, 0), [4.0, 4.0]);
        // The raw data keeps the sentinel.
        assert!(is_sentinel(&g.get(1, 0)));
    }

    #[test]
    fn bilinear_hits_texel_centres_exactly() {
        let data: Vec<[f32; 2]> = (0..12).map(|k| [k as f32 * 0.1, -(k as f32)]).collect();
        let g = Grid::new(4, 3, data, &[(0, 4)]);
        for row in 0..3 {
            for col in 0..4 {
                let v = g.bilinear(0, 4, col as f64, row as f64).unwrap();
                assert_eq!(v[0], g.get(col, row)[0] as f64);
                assert_eq!(v[1], g.get(col, row)[1] as f64);
            }
        }
        let mid = g.bilinear(0, 4, 0.5, 0.5).unwrap();
        assert!((mid[1] + 2.5).abs() < 1e-6);
    }

    #[test]
    fn empty_segment_stays_sentinel() {
        let s = [SENTINEL];
        let g = Grid::new(2, 2, vec![s; 4], &[(0, 2)]);
        assert!(g.bilinear(0, 2, 0.3, 0.3).is_none());
    }
}
