use crate::error::{Error, Result};

/// Sorted reconstruction values for one dimension with `levels` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FsqGrid {
    levels: u32,
    values: Vec<f64>,
}

impl FsqGrid {
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Position of the grid value nearest to `x`; ties go to the larger value.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &g) in self.values.iter().enumerate() {
            let d = (x - g).abs();
            if d <= best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

/// Uniform grid on [-1, 1] with `levels` points.
///
/// Odd counts are symmetric and include both endpoints (5 -> -1, -0.5, 0,
/// 0.5, 1). Even counts use step `2 / levels`, keep 0 and the upper endpoint,
/// and drop -1 (8 -> -0.75, ..., 0.75, 1).
pub fn fsq_grid(levels: u32) -> Result<FsqGrid> {
    if levels < 2 {
        return Err(Error::config(format!(
            "FSQ level count must be at least 2, got {levels}"
        )));
    }
    let l = levels as f64;
    let values = (0..levels)
        .map(|i| {
            let i = i as f64;
            if levels % 2 == 1 {
                (2.0 * i - (l - 1.0)) / (l - 1.0)
            } else {
                (2.0 * i - (l - 2.0)) / l
            }
        })
        .collect();
    Ok(FsqGrid { levels, values })
}

/// Mixed-radix composition, first digit most significant.
pub fn fsq_index(digits: &[u32], levels: &[u32]) -> Result<u32> {
    if digits.len() != levels.len() {
        return Err(Error::shape(
            format!("{} digits", levels.len()),
            digits.len(),
        ));
    }
    let mut index: u64 = 0;
    for (i, (&d, &l)) in digits.iter().zip(levels).enumerate() {
        if d >= l {
            return Err(Error::OutOfRange {
                what: format!("digit {i}"),
                value: d as u64,
                limit: l as u64,
            });
        }
        index = index * l as u64 + d as u64;
    }
    u32::try_from(index).map_err(|_| Error::config("codebook size exceeds u32"))
}

/// Inverse of [`fsq_index`].
pub fn fsq_digits(index: u32, levels: &[u32]) -> Result<Vec<u32>> {
    let size: u64 = levels.iter().map(|&l| l as u64).product();
    if index as u64 >= size {
        return Err(Error::OutOfRange {
            what: "FSQ index".into(),
            value: index as u64,
            limit: size,
        });
    }
    let mut rest = index;
    let mut digits = vec![0; levels.len()];
    for (slot, &l) in digits.iter_mut().zip(levels).rev() {
        *slot = rest % l;
        rest /= l;
    }
    Ok(digits)
}

/// Per-dimension level counts, grouped into codebooks. Each group's codebook
/// size is the product of its level counts.
#[derive(Debug, Clone, PartialEq)]
pub struct FsqSpec {
    groups: Vec<Vec<u32>>,
    grids: Vec<FsqGrid>,
}

impl Default for FsqSpec {
    /// 32 dimensions as 8 groups of `[8, 5, 5, 5]`: 8 codebooks of 1000 codes.
    fn default() -> Self {
        Self::uniform(&[8, 5, 5, 5], 8).expect("valid default")
    }
}

impl FsqSpec {
    pub fn new(groups: Vec<Vec<u32>>) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
            return Err(Error::config("FSQ needs at least one non-empty group"));
        }
        let grids = groups
            .iter()
            .flatten()
            .map(|&l| fsq_grid(l))
            .collect::<Result<Vec<_>>>()?;
        for g in &groups {
            let size: u64 = g.iter().map(|&l| l as u64).product();
            if size > u32::MAX as u64 {
                return Err(Error::config(format!(
                    "FSQ group {g:?} has more than 2^32 codes"
                )));
            }
        }
        Ok(Self { groups, grids })
    }

    /// `count` identical groups with the given per-dimension levels.
    pub fn uniform(group_levels: &[u32], count: usize) -> Result<Self> {
        Self::new(vec![group_levels.to_vec(); count])
    }

    pub fn groups(&self) -> &[Vec<u32>] {
        &self.groups
    }

    pub fn dims(&self) -> usize {
        self.grids.len()
    }

    pub fn num_codebooks(&self) -> usize {
        self.groups.len()
    }

    pub fn codebook_size(&self, group: usize) -> u32 {
        self.groups[group].iter().product()
    }

    /// Shared codebook size if every group has the same one.
    pub fn uniform_codebook_size(&self) -> Option<u32> {
        let first = self.codebook_size(0);
        (1..self.num_codebooks())
            .all(|g| self.codebook_size(g) == first)
            .then_some(first)
    }

    pub fn grid(&self, dim: usize) -> &FsqGrid {
        &self.grids[dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsqQuantized {
    pub values: Vec<f64>,
    pub indices: Vec<u32>,
}

const RANGE_TOLERANCE: f64 = 1e-9;

/// Snaps each component of a [-1, 1]-bounded vector to its dimension's grid.
pub fn fsq_quantize(v: &[f64], spec: &FsqSpec) -> Result<FsqQuantized> {
    if v.len() != spec.dims() {
        return Err(Error::shape(format!("{} dims", spec.dims()), v.len()));
    }
    if let Some((i, x)) = v
        .iter()
        .enumerate()
        .find(|(_, x)| x.is_nan() || x.abs() > 1.0 + RANGE_TOLERANCE)
    {
        return Err(Error::input(format!(
            "component {i} = {x} lies outside [-1, 1]"
        )));
    }
    let mut values = Vec::with_capacity(v.len());
    let mut indices = Vec::with_capacity(spec.num_codebooks());
    let mut digits = Vec::new();
    let mut dim = 0;
    for levels in spec.groups() {
        digits.clear();
        for _ in levels {
            let grid = spec.grid(dim);
            let pos = grid.nearest(v[dim].clamp(-1.0, 1.0));
            values.push(grid.values()[pos]);
            digits.push(pos as u32);
            dim += 1;
        }
        indices.push(fsq_index(&digits, levels)?);
    }
    Ok(FsqQuantized { values, indices })
}

/// Concatenated grid values for one index per group.
pub fn fsq_dequantize(indices: &[u32], spec: &FsqSpec) -> Result<Vec<f64>> {
    if indices.len() != spec.num_codebooks() {
        return Err(Error::shape(
            format!("{} indices", spec.num_codebooks()),
            indices.len(),
        ));
    }
    let mut out = Vec::with_capacity(spec.dims());
    let mut dim = 0;
    for (&index, levels) in indices.iter().zip(spec.groups()) {
        for d in fsq_digits(index, levels)? {
            out.push(spec.grid(dim).values()[d as usize]);
            dim += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grids_match_reference_sets() {
        assert_eq!(fsq_grid(5).unwrap().values(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(
            fsq_grid(8).unwrap().values(),
            &[-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(fsq_grid(3).unwrap().values(), &[-1.0, 0.0, 1.0]);
        assert_eq!(fsq_grid(2).unwrap().values(), &[0.0, 1.0]);
        assert!(fsq_grid(1).is_err());
    }

    #[test]
    fn nearest_examples() {
        let g5 = fsq_grid(5).unwrap();
        let g8 = fsq_grid(8).unwrap();
        assert_eq!(g5.values()[g5.nearest(0.3)], 0.5);
        assert_eq!(g5.values()[g5.nearest(0.0)], 0.0);
        assert_eq!(
            fsq_grid(7).unwrap().values()[fsq_grid(7).unwrap().nearest(0.0)],
            0.0
        );
        assert_eq!(g8.values()[g8.nearest(0.9)], 1.0);
        // Exact midpoints go up.
        assert_eq!(g5.values()[g5.nearest(0.25)], 0.5);
        assert_eq!(g5.values()[g5.nearest(-0.75)], -0.5);
        assert_eq!(g8.values()[g8.nearest(-1.0)], -0.75);
    }

    #[test]
    fn index_examples() {
        let levels = [8, 5, 5, 5];
        assert_eq!(fsq_index(&[0, 0, 0, 0], &levels).unwrap(), 0);
        assert_eq!(fsq_index(&[7, 4, 4, 4], &levels).unwrap(), 999);
        assert_eq!(fsq_index(&[1, 0, 0, 0], &levels).unwrap(), 125);
        assert!(fsq_index(&[8, 0, 0, 0], &levels).is_err());
        assert!(fsq_index(&[0, 5, 0, 0], &levels).is_err());
        assert!(fsq_digits(1000, &levels).is_err());
        assert_eq!(fsq_digits(125, &levels).unwrap(), vec![1, 0, 0, 0]);
    }

    #[test]
    fn default_spec_shape() {
        let spec = FsqSpec::default();
        assert_eq!(spec.dims(), 32);
        assert_eq!(spec.num_codebooks(), 8);
        assert_eq!(spec.uniform_codebook_size(), Some(1000));
        let eights = (0..32).filter(|&d| spec.grid(d).levels() == 8).count();
        assert_eq!(eights, 8);
    }

    #[test]
    fn out_of_range_component_rejected() {
        let spec = FsqSpec::uniform(&[5], 1).unwrap();
        assert!(fsq_quantize(&[1.0 + 1e-10], &spec).is_ok());
        assert!(fsq_quantize(&[1.0 + 1e-6], &spec).is_err());
        assert!(fsq_quantize(&[f64::NAN], &spec).is_err());
    }

    #[test]
    fn dequantize_rejects_bad_index() {
        let spec = FsqSpec::default();
        let mut idx = vec![0; 8];
        idx[3] = 1000;
        assert!(matches!(
            fsq_dequantize(&idx, &spec),
            Err(Error::OutOfRange { .. })
        ));
    }

    proptest! {
        #[test]
        fn index_digits_bijection(levels in proptest::collection::vec(2u32..9, 1..5), seed in any::<u32>()) {
            let size: u32 = levels.iter().product();
            let i = seed % size;
            let digits = fsq_digits(i, &levels).unwrap();
            prop_assert_eq!(fsq_index(&digits, &levels).unwrap(), i);
        }

        #[test]
        fn quantize_is_idempotent(v in proptest::collection::vec(-1.0f64..=1.0, 32)) {
            let spec = FsqSpec::default();
            let q = fsq_quantize(&v, &spec).unwrap();
            let again = fsq_quantize(&q.values, &spec).unwrap();
            prop_assert_eq!(&again, &q);
            prop_assert_eq!(fsq_dequantize(&q.indices, &spec).unwrap(), q.values);
        }
    }
}
