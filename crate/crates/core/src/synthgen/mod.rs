//! Synthetic combinatorial content x style embedding dataset.
//!
//! Ground-truth content and style factors live on the unit sphere of a small
//! factor space. A fixed random two-layer map with a bilinear mixing term
//! (the "entangler") turns every (content, style) pair into one unit-norm
//! embedding, and per-view Gaussian noise stands in for within-class
//! variation. The grid is complete: every content appears under every style.

mod format;

pub use format::{read_grid, read_grid_bytes, write_grid, write_grid_bytes, GridManifest};

use crate::error::{Error, Result};
use crate::math::{self, Mat};
use crate::rng::ChaCha8Rng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// Unit-norm latent identities for every content and style class.
#[derive(Debug, Clone)]
pub struct FactorSet {
    pub content_factors: Mat,
    pub style_factors: Mat,
    pub factor_dim: usize,
    pub seed: u64,
}

/// Fixed random map from a (content, style) factor pair to one embedding.
///
/// `embed(c, s) = normalize(tanh(C·tanh(A·c + B·s + b1) + D·(c ⊙ P·s) + b2))`
///
/// The elementwise `c ⊙ P·s` term couples the two factors multiplicatively,
/// so no linear projection of the embedding recovers either factor alone.
#[derive(Debug, Clone)]
pub struct EntanglerParams {
    pub a: Mat,
    pub b: Mat,
    pub p: Mat,
    pub c: Mat,
    pub d: Mat,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub factor_dim: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub seed: u64,
}

/// Where a grid's embeddings came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    Imported,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Synthetic => "synthetic",
            Provenance::Imported => "imported",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Provenance::Synthetic),
            "imported" => Ok(Provenance::Imported),
            other => Err(Error::format(
                "provenance",
                format!("expected \"synthetic\" or \"imported\", found {other:?}"),
            )),
        }
    }
}

/// Complete content x style x view tensor of unit-norm embeddings.
///
/// Stored as f32 so the in-memory values are exactly what the on-disk format
/// holds; all arithmetic widens to f64.
#[derive(Debug, Clone)]
pub struct EmbeddingGrid {
    z: Vec<f32>,
    pub n_contents: usize,
    pub n_styles: usize,
    pub n_views: usize,
    pub embed_dim: usize,
    pub content_ids: Vec<u32>,
    pub style_ids: Vec<u32>,
    pub noise_sigma: f64,
    pub provenance: Provenance,
    pub seed: u64,
}

impl EmbeddingGrid {
    /// Assemble a grid from a raw payload, enforcing completeness and unit
    /// norms (tolerance 1e-4, matching the import path).
    pub fn from_parts(
        z: Vec<f32>,
        n_contents: usize,
        n_styles: usize,
        n_views: usize,
        embed_dim: usize,
        noise_sigma: f64,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        let expected = n_contents * n_styles * n_views * embed_dim;
        if z.len() != expected {
            return Err(Error::format(
                "payload",
                format!(
                    "expected {expected} floats for {n_contents}x{n_styles}x{n_views}x{embed_dim}, found {}",
                    z.len()
                ),
            ));
        }
        let grid = EmbeddingGrid {
            z,
            n_contents,
            n_styles,
            n_views,
            embed_dim,
            content_ids: (0..n_contents as u32).collect(),
            style_ids: (0..n_styles as u32).collect(),
            noise_sigma,
            provenance,
            seed,
        };
        grid.validate_norms(1e-4)?;
        Ok(grid)
    }

    fn offset(&self, content: usize, style: usize, view: usize) -> usize {
        ((content * self.n_styles + style) * self.n_views + view) * self.embed_dim
    }

    /// Raw f32 embedding of one cell view.
    pub fn embedding(&self, content: usize, style: usize, view: usize) -> &[f32] {
        let o = self.offset(content, style, view);
        &self.z[o..o + self.embed_dim]
    }

    /// One cell view widened to f64 (exact).
    pub fn embedding_f64(&self, content: usize, style: usize, view: usize) -> Vec<f64> {
        self.embedding(content, style, view)
            .iter()
            .map(|&v| v as f64)
            .collect()
    }

    /// Mean over views of one cell, in f64. Not renormalized.
    pub fn cell_mean(&self, content: usize, style: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.embed_dim];
        for v in 0..self.n_views {
            for (acc, &x) in out.iter_mut().zip(self.embedding(content, style, v)) {
                *acc += x as f64;
            }
        }
        let inv = 1.0 / self.n_views as f64;
        for x in out.iter_mut() {
            *x *= inv;
        }
        out
    }

    pub fn payload(&self) -> &[f32] {
        &self.z
    }

    pub fn n_cells(&self) -> usize {
        self.n_contents * self.n_styles
    }

    fn validate_norms(&self, tol: f64) -> Result<()> {
        for i in 0..self.n_contents {
            for j in 0..self.n_styles {
                for v in 0..self.n_views {
                    let e = self.embedding(i, j, v);
                    let mut s = 0.0f64;
                    for &x in e {
                        if !x.is_finite() {
                            return Err(Error::format(
                                "embedding",
                                format!("non-finite value in cell ({i}, {j}, {v})"),
                            ));
                        }
                        s += (x as f64) * (x as f64);
                    }
                    let n = s.sqrt();
                    if (n - 1.0).abs() > tol {
                        return Err(Error::format(
                            "embedding",
                            format!("cell ({i}, {j}, {v}) has norm {n:.6}, expected 1 within {tol}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Content-only partition of a grid: every style appears on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_contents: Vec<usize>,
    pub test_contents: Vec<usize>,
}

/// Per-row index metadata of a triplet batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletIndices {
    /// Target content class (i).
    pub content: usize,
    /// Target style class (j).
    pub style: usize,
    /// Arbitrary style carried by the content reference (a).
    pub content_ref_style: usize,
    /// Arbitrary content carried by the style reference (b).
    pub style_ref_content: usize,
    pub content_ref_view: usize,
    pub style_ref_view: usize,
    /// The single view shared by both halves of the merged endpoint.
    pub merged_view: usize,
}

/// Paired flow endpoints: `x0 = [z(i,a) | z(b,j)]`, `x1 = [z(i,j) | z(i,j)]`.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    pub x0: Mat,
    pub x1: Mat,
    pub indices: Vec<TripletIndices>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draw unit-norm content and style factor rows from an isotropic Gaussian.
pub fn generate_factors(
    n_contents: usize,
    n_styles: usize,
    factor_dim: usize,
    seed: u64,
) -> Result<FactorSet> {
    if n_contents < 2 {
        return Err(Error::invalid_argument(format!(
            "n_contents must be >= 2, got {n_contents}"
        )));
    }
    if n_styles < 2 {
        return Err(Error::invalid_argument(format!(
            "n_styles must be >= 2, got {n_styles}"
        )));
    }
    if factor_dim < 2 {
        return Err(Error::invalid_argument(format!(
            "factor_dim must be >= 2, got {factor_dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let content_factors = unit_rows(&mut rng, n_contents, factor_dim);
    let style_factors = unit_rows(&mut rng, n_styles, factor_dim);
    Ok(FactorSet {
        content_factors,
        style_factors,
        factor_dim,
        seed,
    })
}

fn unit_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Mat {
    let mut m = Mat::zeros(n, dim);
    for r in 0..n {
        loop {
            let row = m.row_mut(r);
            for x in row.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            if math::normalize_in_place(row) > 1e-12 {
                break;
            }
        }
    }
    m
}

impl EntanglerParams {
    /// Draw a fixed entangler; every matrix uses scale `1/sqrt(fan_in)`.
    pub fn generate(factor_dim: usize, hidden_dim: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize, cols: usize, fan_in: usize| -> Mat {
            let scale = 1.0 / (fan_in as f64).sqrt();
            let mut m = Mat::zeros(rows, cols);
            for v in m.data_mut().iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v = g * scale;
            }
            m
        };
        let a = draw(hidden_dim, factor_dim, factor_dim);
        let b = draw(hidden_dim, factor_dim, factor_dim);
        let p = draw(factor_dim, factor_dim, factor_dim);
        let c = draw(embed_dim, hidden_dim, hidden_dim);
        let d = draw(embed_dim, factor_dim, factor_dim);
        let b1 = draw(1, hidden_dim, factor_dim).data().to_vec();
        let b2 = draw(1, embed_dim, hidden_dim).data().to_vec();
        EntanglerParams {
            a,
            b,
            p,
            c,
            d,
            b1,
            b2,
            factor_dim,
            hidden_dim,
            embed_dim,
            seed,
        }
    }
}

/// Map one (content, style) factor pair to a unit-norm embedding.
pub fn entangle(entangler: &EntanglerParams, content: &[f64], style: &[f64]) -> Result<Vec<f64>> {
    if content.len() != entangler.factor_dim || style.len() != entangler.factor_dim {
        return Err(Error::invalid_argument(format!(
            "factor vectors must have dim {}, got {} and {}",
            entangler.factor_dim,
            content.len(),
            style.len()
        )));
    }
    let mut hidden = math::matvec(&entangler.a, content);
    let bs = math::matvec(&entangler.b, style);
    for ((h, b), b1) in hidden.iter_mut().zip(bs).zip(&entangler.b1) {
        *h = (*h + b + b1).tanh();
    }
    let ps = math::matvec(&entangler.p, style);
    let mixed: Vec<f64> = content.iter().zip(ps).map(|(c, p)| c * p).collect();

    let mut out = math::matvec(&entangler.c, &hidden);
    let dm = math::matvec(&entangler.d, &mixed);
    for ((o, d), b2) in out.iter_mut().zip(dm).zip(&entangler.b2) {
        *o = (*o + d + b2).tanh();
    }
    if math::normalize_in_place(&mut out) <= 1e-12 {
        return Err(Error::degenerate(
            "entangled embedding collapsed to the zero vector before normalization",
        ));
    }
    Ok(out)
}

/// Build the complete grid: `z[i,j,v] = normalize(entangle(c_i, s_j) + noise)`.
pub fn build_grid(
    factors: &FactorSet,
    entangler: &EntanglerParams,
    n_views: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<EmbeddingGrid> {
    if n_views < 1 {
        return Err(Error::invalid_argument("n_views must be >= 1"));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::invalid_argument(format!(
            "noise_sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    if factors.factor_dim != entangler.factor_dim {
        return Err(Error::invalid_argument(format!(
            "factor_dim mismatch: factors {} vs entangler {}",
            factors.factor_dim, entangler.factor_dim
        )));
    }
    let n_contents = factors.content_factors.rows();
    let n_styles = factors.style_factors.rows();
    let embed_dim = entangler.embed_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Vec::with_capacity(n_contents * n_styles * n_views * embed_dim);
    for i in 0..n_contents {
        for j in 0..n_styles {
            let base = entangle(
                entangler,
                factors.content_factors.row(i),
                factors.style_factors.row(j),
            )?;
            for _v in 0..n_views {
                let mut e = base.clone();
                if noise_sigma > 0.0 {
                    for x in e.iter_mut() {
                        let g: f64 = rng.sample(StandardNormal);
                        *x += noise_sigma * g;
                    }
                }
                math::normalize_in_place(&mut e);
                z.extend(e.iter().map(|&x| x as f32));
            }
        }
    }
    EmbeddingGrid::from_parts(
        z,
        n_contents,
        n_styles,
        n_views,
        embed_dim,
        noise_sigma,
        Provenance::Synthetic,
        seed,
    )
}

/// Shuffle contents by seed and keep `round(train_fraction * n)` of them for
/// training, clamped so both sides stay nonempty. Styles are never split.
pub fn split_grid(grid: &EmbeddingGrid, train_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid_argument(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if grid.n_contents < 2 {
        return Err(Error::invalid_argument(
            "splitting requires at least 2 contents",
        ));
    }
    let mut order: Vec<usize> = (0..grid.n_contents).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates, written out so the draw sequence is pinned.
    for k in (1..order.len()).rev() {
        let swap_with = rng.gen_range(0..=k);
        order.swap(k, swap_with);
    }
    let n = grid.n_contents;
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train_contents: Vec<usize> = order[..n_train].to_vec();
    let mut test_contents: Vec<usize> = order[n_train..].to_vec();
    train_contents.sort_unstable();
    test_contents.sort_unstable();
    Ok(DatasetSplit {
        train_contents,
        test_contents,
    })
}

/// Sample one asymmetric triplet batch from the training contents.
///
/// Per row the draw order is fixed: target content i, target style j,
/// reference style a, reference content b, then the three view indices.
pub fn sample_triplet_batch(
    grid: &EmbeddingGrid,
    split: &DatasetSplit,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TripletBatch> {
    if batch_size == 0 {
        return Err(Error::invalid_argument("batch_size must be >= 1"));
    }
    if split.train_contents.is_empty() {
        return Err(Error::invalid_state("split has no training contents"));
    }
    if grid.n_styles == 0 || grid.n_views == 0 {
        return Err(Error::invalid_state("grid has no styles or views"));
    }
    let d = grid.embed_dim;
    let mut x0 = Mat::zeros(batch_size, 2 * d);
    let mut x1 = Mat::zeros(batch_size, 2 * d);
    let mut indices = Vec::with_capacity(batch_size);
    for r in 0..batch_size {
        let content = split.train_contents[rng.gen_range(0..split.train_contents.len())];
        let style = rng.gen_range(0..grid.n_styles);
        let content_ref_style = rng.gen_range(0..grid.n_styles);
        let style_ref_content = split.train_contents[rng.gen_range(0..split.train_contents.len())];
        let content_ref_view = rng.gen_range(0..grid.n_views);
        let style_ref_view = rng.gen_range(0..grid.n_views);
        let merged_view = rng.gen_range(0..grid.n_views);

        let row0 = x0.row_mut(r);
        for (dst, &src) in row0[..d]
            .iter_mut()
            .zip(grid.embedding(content, content_ref_style, content_ref_view))
        {
            *dst = src as f64;
        }
        for (dst, &src) in row0[d..]
            .iter_mut()
            .zip(grid.embedding(style_ref_content, style, style_ref_view))
        {
            *dst = src as f64;
        }
        let row1 = x1.row_mut(r);
        for (dst, &src) in row1[..d]
            .iter_mut()
            .zip(grid.embedding(content, style, merged_view))
        {
            *dst = src as f64;
        }
        let (first, second) = row1.split_at_mut(d);
        second.copy_from_slice(first);

        indices.push(TripletIndices {
            content,
            style,
            content_ref_style,
            style_ref_content,
            content_ref_view,
            style_ref_view,
            merged_view,
        });
    }
    Ok(TripletBatch { x0, x1, indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cosine, norm};
    use crate::rng::{stream, tags};

    fn small_grid(noise: f64, n_views: usize) -> EmbeddingGrid {
        let factors = generate_factors(4, 3, 4, 11).unwrap();
        let entangler = EntanglerParams::generate(4, 16, 8, 12);
        build_grid(&factors, &entangler, n_views, noise, 13).unwrap()
    }

    #[test]
    fn factors_are_unit_and_deterministic() {
        let f1 = generate_factors(2, 2, 4, 7).unwrap();
        let f2 = generate_factors(2, 2, 4, 7).unwrap();
        assert_eq!(f1.content_factors, f2.content_factors);
        assert_eq!(f1.style_factors, f2.style_factors);
        for r in 0..2 {
            assert!((norm(f1.content_factors.row(r)) - 1.0).abs() < 1e-6);
            assert!((norm(f1.style_factors.row(r)) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn factors_pairwise_distinct() {
        // brute-force pairwise scan over the generated rows
        let f = generate_factors(64, 12, 16, 1).unwrap();
        let mut min_cos_dist = f64::INFINITY;
        for i in 0..64 {
            for j in (i + 1)..64 {
                let c = 1.0 - cosine(f.content_factors.row(i), f.content_factors.row(j));
                min_cos_dist = min_cos_dist.min(c);
            }
        }
        assert!(min_cos_dist > 0.0, "duplicate content factors");
    }

    #[test]
    fn factors_reject_bad_counts() {
        assert!(matches!(
            generate_factors(1, 2, 4, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_factors(2, 1, 4, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_factors(2, 2, 1, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn entangle_deterministic_unit_norm() {
        let e = EntanglerParams::generate(4, 16, 8, 3);
        let c = [0.5, -0.5, 0.5, -0.5];
        let s = [0.5, 0.5, -0.5, -0.5];
        let z1 = entangle(&e, &c, &s).unwrap();
        let z2 = entangle(&e, &c, &s).unwrap();
        assert_eq!(z1, z2);
        assert!((norm(&z1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn entangle_rejects_dim_mismatch() {
        let e = EntanglerParams::generate(4, 16, 8, 3);
        assert!(matches!(
            entangle(&e, &[1.0, 0.0], &[0.0, 1.0, 0.0, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn entangled_grid_outputs_pairwise_distinct() {
        // brute-force pairwise distances over a 12x64 factor grid
        let f = generate_factors(64, 12, 16, 1).unwrap();
        let e = EntanglerParams::generate(16, 128, 64, 2);
        let mut outputs = Vec::with_capacity(64 * 12);
        for i in 0..64 {
            for j in 0..12 {
                outputs.push(
                    entangle(&e, f.content_factors.row(i), f.style_factors.row(j)).unwrap(),
                );
            }
        }
        let mut min_dist = f64::INFINITY;
        for i in 0..outputs.len() {
            for j in (i + 1)..outputs.len() {
                let d = crate::math::euclidean(&outputs[i], &outputs[j]);
                min_dist = min_dist.min(d);
            }
        }
        assert!(min_dist > 1e-3, "min pairwise distance {min_dist}");
    }

    #[test]
    fn zero_noise_collapses_views() {
        let g = small_grid(0.0, 3);
        for i in 0..g.n_contents {
            for j in 0..g.n_styles {
                let v0 = g.embedding(i, j, 0);
                for v in 1..g.n_views {
                    assert_eq!(v0, g.embedding(i, j, v));
                }
            }
        }
    }

    #[test]
    fn grid_embeddings_unit_norm_and_deterministic() {
        let g1 = small_grid(0.05, 2);
        let g2 = small_grid(0.05, 2);
        assert_eq!(g1.payload(), g2.payload());
        for i in 0..g1.n_contents {
            for j in 0..g1.n_styles {
                for v in 0..g1.n_views {
                    let n = norm(&g1.embedding_f64(i, j, v));
                    assert!((n - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn within_cell_similarity_beats_cross_cell() {
        // brute-force cell statistics on the default-shaped grid
        let factors = generate_factors(64, 12, 16, 1).unwrap();
        let entangler = EntanglerParams::generate(16, 128, 64, 2);
        let g = build_grid(&factors, &entangler, 8, 0.05, 3).unwrap();
        let mut within = (0.0, 0usize);
        let mut cross = (0.0, 0usize);
        // sample of cells is enough; keep it cheap but exhaustive within cells
        for i in 0..8 {
            for j in 0..g.n_styles {
                for v in 0..g.n_views {
                    for w in (v + 1)..g.n_views {
                        within.0 += cosine(&g.embedding_f64(i, j, v), &g.embedding_f64(i, j, w));
                        within.1 += 1;
                    }
                }
                let other_j = (j + 1) % g.n_styles;
                let other_i = (i + 1) % 8;
                cross.0 += cosine(
                    &g.embedding_f64(i, j, 0),
                    &g.embedding_f64(other_i, other_j, 0),
                );
                cross.1 += 1;
            }
        }
        let within_mean = within.0 / within.1 as f64;
        let cross_mean = cross.0 / cross.1 as f64;
        assert!(
            within_mean > cross_mean,
            "within {within_mean} <= cross {cross_mean}"
        );
    }

    #[test]
    fn split_respects_fraction_and_clamp() {
        let factors = generate_factors(10, 2, 4, 5).unwrap();
        let entangler = EntanglerParams::generate(4, 8, 8, 6);
        let g = build_grid(&factors, &entangler, 1, 0.0, 7).unwrap();
        let s = split_grid(&g, 0.7, 42).unwrap();
        assert_eq!(s.train_contents.len(), 7);
        assert_eq!(s.test_contents.len(), 3);

        let factors2 = generate_factors(2, 2, 4, 5).unwrap();
        let g2 = build_grid(&factors2, &entangler, 1, 0.0, 7).unwrap();
        let s2 = split_grid(&g2, 0.99, 42).unwrap();
        assert_eq!(s2.train_contents.len(), 1);
        assert_eq!(s2.test_contents.len(), 1);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let g = small_grid(0.0, 1);
        let s1 = split_grid(&g, 0.5, 9).unwrap();
        let s2 = split_grid(&g, 0.5, 9).unwrap();
        assert_eq!(s1, s2);
        let mut all: Vec<usize> = s1
            .train_contents
            .iter()
            .chain(&s1.test_contents)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..g.n_contents).collect::<Vec<_>>());
    }

    #[test]
    fn triplet_rows_match_metadata_cells() {
        let g = small_grid(0.05, 2);
        let split = split_grid(&g, 0.5, 3).unwrap();
        let mut rng = stream(1, tags::TRAIN);
        let batch = sample_triplet_batch(&g, &split, 64, &mut rng).unwrap();
        let d = g.embed_dim;
        for (r, ix) in batch.indices.iter().enumerate() {
            assert!(split.train_contents.contains(&ix.content));
            assert!(split.train_contents.contains(&ix.style_ref_content));
            let row0 = batch.x0.row(r);
            let row1 = batch.x1.row(r);
            let want_first =
                g.embedding_f64(ix.content, ix.content_ref_style, ix.content_ref_view);
            let want_second = g.embedding_f64(ix.style_ref_content, ix.style, ix.style_ref_view);
            let want_merged = g.embedding_f64(ix.content, ix.style, ix.merged_view);
            assert_eq!(&row0[..d], want_first.as_slice());
            assert_eq!(&row0[d..], want_second.as_slice());
            assert_eq!(&row1[..d], want_merged.as_slice());
            // both halves of the merged endpoint are bitwise identical
            assert_eq!(&row1[..d], &row1[d..]);
        }
    }

    #[test]
    fn degenerate_single_cell_grid_samples_from_that_cell() {
        // hand-assembled 1x1 grid; the generator itself requires >= 2 classes
        let mut e = vec![0.0f32; 8];
        e[0] = 1.0;
        let g = EmbeddingGrid::from_parts(e, 1, 1, 1, 8, 0.0, Provenance::Imported, 0).unwrap();
        let split = DatasetSplit {
            train_contents: vec![0],
            test_contents: vec![],
        };
        let mut rng = stream(0, tags::TRAIN);
        let batch = sample_triplet_batch(&g, &split, 5, &mut rng).unwrap();
        for r in 0..5 {
            assert_eq!(batch.x0.row(r), batch.x1.row(r));
        }
    }

    #[test]
    fn empty_split_is_invalid_state() {
        let g = small_grid(0.0, 1);
        let split = DatasetSplit {
            train_contents: vec![],
            test_contents: (0..g.n_contents).collect(),
        };
        let mut rng = stream(0, tags::TRAIN);
        assert!(matches!(
            sample_triplet_batch(&g, &split, 4, &mut rng),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn style_sampling_is_uniform_by_chi_square() {
        // empirical frequency count vs the uniform oracle:
        // chi-square over 12 styles, 99th percentile of chi2(11) is 24.725
        let factors = generate_factors(64, 12, 16, 1).unwrap();
        let entangler = EntanglerParams::generate(16, 32, 16, 2);
        let g = build_grid(&factors, &entangler, 2, 0.0, 3).unwrap();
        let split = split_grid(&g, 0.7, 1).unwrap();
        let mut rng = stream(123, tags::TRAIN);
        let n: usize = 100_000;
        let mut counts = vec![0usize; g.n_styles];
        let mut drawn = 0;
        while drawn < n {
            let take = 1000.min(n - drawn);
            let batch = sample_triplet_batch(&g, &split, take, &mut rng).unwrap();
            for ix in &batch.indices {
                counts[ix.style] += 1;
            }
            drawn += take;
        }
        let expected = n as f64 / g.n_styles as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 24.725, "chi-square statistic {chi2} too large");
    }
}
