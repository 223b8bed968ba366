//! Real block-diagonalizing similarity transform, eigenvalue classification,
//! PBH detectability tests and per-node source sets.
//!
//! The built-in decomposition covers diagonalizable system matrices: the
//! transform is assembled from (complex) eigenvector null spaces, with each
//! conjugate pair realized as a real 2x2 rotation-scaling block
//! `D(a, b) = [a b; -b a]`. Defective matrices are supported through a
//! user-supplied transform which is validated against the residual bound.

use std::collections::BTreeSet;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::plant::LtiPlant;
use crate::NodeId;

/// Relative eigenvalue clustering tolerance: two computed eigenvalues are the
/// same mode if they are within `1e-8 * max(1, ||A||_inf)`.
pub fn eigen_tolerance(a: &DMatrix<f64>) -> f64 {
    1e-8 * norm_inf(a).max(1.0)
}

/// Residual bound for accepted decompositions: `||TM - AT||_inf <= tol`.
pub fn basis_tolerance(a: &DMatrix<f64>) -> f64 {
    1e-8 * norm_inf(a) * a.nrows() as f64
}

fn norm_inf(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One eigenvalue (or conjugate pair) of the system matrix together with its
/// coordinates in the block-diagonal form.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBlock {
    /// canonical representative; for conjugate pairs, the one with
    /// nonnegative imaginary part
    pub eigenvalue: Complex<f64>,
    pub is_real: bool,
    pub algebraic_multiplicity: usize,
    pub geometric_multiplicity: usize,
    /// `a_A(λ)` if real, `2 a_A(λ)` otherwise
    pub block_dimension: usize,
    /// start of this block's coordinates within z
    pub offset: usize,
    /// `|λ| >= 1`
    pub is_unstable: bool,
}

impl EigenBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.block_dimension
    }
}

/// Clusters raw eigenvalues into modes: real eigenvalues and canonical
/// (nonnegative-imaginary) representatives of conjugate pairs, each with its
/// algebraic multiplicity.
fn cluster_eigenvalues(raw: &DVector<Complex<f64>>, tol: f64) -> Vec<(Complex<f64>, bool, usize)> {
    let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
    for &lambda in raw.iter() {
        let canonical = if lambda.im.abs() <= tol {
            Complex::new(lambda.re, 0.0)
        } else {
            Complex::new(lambda.re, lambda.im.abs())
        };
        match clusters
            .iter_mut()
            .find(|(rep, _)| (rep - canonical).norm() <= tol)
        {
            Some((rep, count)) => {
                // running mean keeps the representative stable
                *rep = (*rep * *count as f64 + canonical) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((canonical, 1)),
        }
    }
    clusters
        .into_iter()
        .map(|(rep, count)| {
            let is_real = rep.im <= tol;
            let rep = if is_real {
                Complex::new(rep.re, 0.0)
            } else {
                rep
            };
            // a conjugate pair contributes both members to the cluster
            let mult = if is_real { count } else { count / 2 };
            (rep, is_real, mult)
        })
        .collect()
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|x| Complex::new(x, 0.0))
}

/// Orthonormal-ish basis of the (right) null space of a complex matrix, via
/// SVD; vectors are the right singular vectors of near-zero singular values.
fn complex_null_space(m: &DMatrix<Complex<f64>>) -> Vec<DVector<Complex<f64>>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("SVD with v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-8 * smax.max(1e-300);
    let mut out = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            let v: DVector<Complex<f64>> = v_t.row(i).map(|x| x.conj()).transpose();
            out.push(normalize_phase(v));
        }
    }
    out
}

fn real_null_space(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("SVD with v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-8 * smax.max(1e-300);
    let mut out = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= tol {
            let mut v: DVector<f64> = v_t.row(i).transpose();
            // fix the sign so the decomposition is reproducible
            let lead = v.iter().cloned().fold(0.0, |acc: f64, x| {
                if x.abs() > acc.abs() {
                    x
                } else {
                    acc
                }
            });
            if lead < 0.0 {
                v = -v;
            }
            out.push(v);
        }
    }
    out
}

/// Rotates a complex vector so its largest-magnitude entry is real positive.
fn normalize_phase(v: DVector<Complex<f64>>) -> DVector<Complex<f64>> {
    let lead = v
        .iter()
        .cloned()
        .fold(Complex::new(0.0, 0.0), |acc: Complex<f64>, x| {
            if x.norm() > acc.norm() {
                x
            } else {
                acc
            }
        });
    if lead.norm() == 0.0 {
        return v;
    }
    let phase = lead / lead.norm();
    v.map(|x| x / phase)
}

fn mode_order_key(lambda: Complex<f64>, is_real: bool) -> (u8, f64, f64) {
    // non-real blocks first by (re, im) ascending, then real ascending
    if is_real {
        (1, lambda.re, 0.0)
    } else {
        (0, lambda.re, lambda.im)
    }
}

/// Builds the real block-diagonalization `T M = A T` for a diagonalizable
/// matrix. Blocks are laid out in a fixed canonical order so every node
/// derives the same transform.
pub fn decompose(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<EigenBlock>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Config(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let tol = eigen_tolerance(a);
    let mut modes = cluster_eigenvalues(&a.complex_eigenvalues(), tol);
    modes.sort_by(|x, y| {
        mode_order_key(x.0, x.1)
            .partial_cmp(&mode_order_key(y.0, y.1))
            .unwrap()
    });

    let mut t = DMatrix::<f64>::zeros(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut blocks = Vec::new();
    let mut offset = 0;
    for (lambda, is_real, alg) in modes {
        let geo;
        let dim;
        if is_real {
            let shifted = a - DMatrix::identity(n, n) * lambda.re;
            let null = real_null_space(&shifted);
            geo = null.len();
            if geo < alg {
                return Err(Error::DefectiveEigenvalue {
                    re: lambda.re,
                    im: 0.0,
                    alg,
                    geo,
                });
            }
            dim = alg;
            for (k, v) in null.iter().take(alg).enumerate() {
                t.set_column(offset + k, v);
                m[(offset + k, offset + k)] = lambda.re;
            }
        } else {
            let shifted = to_complex(a) - to_complex(&DMatrix::identity(n, n)) * lambda;
            let null = complex_null_space(&shifted);
            geo = null.len();
            if geo < alg {
                return Err(Error::DefectiveEigenvalue {
                    re: lambda.re,
                    im: lambda.im,
                    alg,
                    geo,
                });
            }
            dim = 2 * alg;
            for (k, v) in null.iter().take(alg).enumerate() {
                let col = offset + 2 * k;
                t.set_column(col, &v.map(|x| x.re));
                t.set_column(col + 1, &v.map(|x| x.im));
                m[(col, col)] = lambda.re;
                m[(col, col + 1)] = lambda.im;
                m[(col + 1, col)] = -lambda.im;
                m[(col + 1, col + 1)] = lambda.re;
            }
        }
        blocks.push(EigenBlock {
            eigenvalue: lambda,
            is_real,
            algebraic_multiplicity: alg,
            geometric_multiplicity: geo,
            block_dimension: dim,
            offset,
            is_unstable: lambda.norm() >= 1.0,
        });
        offset += dim;
    }
    debug_assert_eq!(offset, n);

    let residual = norm_inf(&(&t * &m - a * &t));
    if residual > basis_tolerance(a) {
        return Err(Error::Internal(format!(
            "decomposition residual {residual:.3e} exceeds tolerance"
        )));
    }
    if t.clone().try_inverse().is_none() {
        return Err(Error::Internal(
            "computed transform is singular (eigenvectors not independent)".into(),
        ));
    }
    Ok((t, m, blocks))
}

/// Numerical PBH detectability test for one eigenvalue: true iff the stacked
/// matrix `[A - λI; C]` has full column rank. Stable eigenvalues are
/// detectable by convention for every observation matrix.
pub fn pbh_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>, eigenvalue: Complex<f64>) -> bool {
    if eigenvalue.norm() < 1.0 {
        return true;
    }
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "system matrix must be square");
    assert_eq!(c.ncols(), n, "observation matrix column mismatch");
    let mut stacked = DMatrix::<Complex<f64>>::zeros(n + c.nrows(), n);
    for i in 0..n {
        for j in 0..n {
            stacked[(i, j)] = Complex::new(a[(i, j)], 0.0);
        }
        stacked[(i, i)] -= eigenvalue;
    }
    for i in 0..c.nrows() {
        for j in 0..n {
            stacked[(n + i, j)] = Complex::new(c[(i, j)], 0.0);
        }
    }
    numerical_rank(&stacked) == n
}

fn numerical_rank(m: &DMatrix<Complex<f64>>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = 1e-8 * smax;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Stacks the observation matrices of the given nodes.
pub fn stacked_observation(plant: &LtiPlant, nodes: &[NodeId]) -> DMatrix<f64> {
    let n = plant.state_dim();
    let rows: usize = nodes
        .iter()
        .map(|&i| plant.observations()[i].nrows())
        .sum();
    let mut c = DMatrix::zeros(rows, n);
    let mut at = 0;
    for &i in nodes {
        let ci = &plant.observations()[i];
        c.view_mut((at, 0), (ci.nrows(), n)).copy_from(ci);
        at += ci.nrows();
    }
    c
}

/// Detectability of `(A, C_J)` where `C_J` stacks the observations of
/// `nodes`: PBH must pass for every unstable eigenvalue of A.
pub fn is_detectable_stacked(plant: &LtiPlant, nodes: &[NodeId]) -> bool {
    let a = plant.a_matrix();
    let c = stacked_observation(plant, nodes);
    let tol = eigen_tolerance(a);
    cluster_eigenvalues(&a.complex_eigenvalues(), tol)
        .into_iter()
        .filter(|&(lambda, _, _)| lambda.norm() >= 1.0)
        .all(|(lambda, _, _)| pbh_detectable(a, &c, lambda))
}

/// Real similarity transform plus per-node detectability classification and
/// per-block source sets.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    transform: DMatrix<f64>,
    transform_inv: DMatrix<f64>,
    block_form: DMatrix<f64>,
    blocks: Vec<EigenBlock>,
    detectable_sets: Vec<BTreeSet<usize>>,
    undetectable_sets: Vec<BTreeSet<usize>>,
    source_sets: Vec<BTreeSet<NodeId>>,
    omega_u: BTreeSet<usize>,
}

impl SpectralBasis {
    pub fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn transform_inv(&self) -> &DMatrix<f64> {
        &self.transform_inv
    }

    pub fn block_form(&self) -> &DMatrix<f64> {
        &self.block_form
    }

    pub fn blocks(&self) -> &[EigenBlock] {
        &self.blocks
    }

    pub fn state_dim(&self) -> usize {
        self.transform.nrows()
    }

    /// Block ids locally detectable by `node` (O_i).
    pub fn detectable_set(&self, node: NodeId) -> &BTreeSet<usize> {
        &self.detectable_sets[node]
    }

    /// Block ids not locally detectable by `node` (the complement of O_i).
    pub fn undetectable_set(&self, node: NodeId) -> &BTreeSet<usize> {
        &self.undetectable_sets[node]
    }

    /// Source nodes of block `j` (all nodes, for stable blocks).
    pub fn source_set(&self, block: usize) -> &BTreeSet<NodeId> {
        &self.source_sets[block]
    }

    /// Unstable blocks with at least one non-source node; exactly the blocks
    /// that need consensus-based estimation.
    pub fn omega_u(&self) -> &BTreeSet<usize> {
        &self.omega_u
    }

    /// Submatrix of M for one block.
    pub fn block_submatrix(&self, block: usize) -> DMatrix<f64> {
        let b = &self.blocks[block];
        self.block_form
            .view((b.offset, b.offset), (b.block_dimension, b.block_dimension))
            .into()
    }

    /// Observation matrix of `node` in the transformed coordinates,
    /// `C_i * T`.
    pub fn transformed_observation(&self, plant: &LtiPlant, node: NodeId) -> DMatrix<f64> {
        &plant.observations()[node] * &self.transform
    }
}

fn classify(plant: &LtiPlant, t: DMatrix<f64>, m: DMatrix<f64>, blocks: Vec<EigenBlock>) -> Result<SpectralBasis> {
    let transform_inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Config("supplied transform is singular".into()))?;
    let node_count = plant.node_count();
    let all_nodes: BTreeSet<NodeId> = (0..node_count).collect();
    let mut detectable_sets = vec![BTreeSet::new(); node_count];
    let mut undetectable_sets = vec![BTreeSet::new(); node_count];
    let mut source_sets = vec![BTreeSet::new(); blocks.len()];
    let mut omega_u = BTreeSet::new();
    for (j, block) in blocks.iter().enumerate() {
        for node in 0..node_count {
            let c = &plant.observations()[node];
            if pbh_detectable(plant.a_matrix(), c, block.eigenvalue) {
                detectable_sets[node].insert(j);
            } else {
                undetectable_sets[node].insert(j);
            }
        }
        if block.is_unstable {
            source_sets[j] = (0..node_count)
                .filter(|&i| detectable_sets[i].contains(&j))
                .collect();
            if source_sets[j] != all_nodes {
                omega_u.insert(j);
            }
        } else {
            source_sets[j] = all_nodes.clone();
        }
    }
    Ok(SpectralBasis {
        transform: t,
        transform_inv,
        block_form: m,
        blocks,
        detectable_sets,
        undetectable_sets,
        source_sets,
        omega_u,
    })
}

/// Decomposes the plant's system matrix and classifies every block per node.
pub fn build_basis(plant: &LtiPlant) -> Result<SpectralBasis> {
    let (t, m, blocks) = decompose(plant.a_matrix())?;
    classify(plant, t, m, blocks)
}

/// Builds the basis from a user-supplied transform and block form; the
/// residual `||TM - AT||_inf` is validated and the block layout is read off
/// the block-diagonal structure of M.
pub fn build_basis_with(
    plant: &LtiPlant,
    t: DMatrix<f64>,
    m: DMatrix<f64>,
) -> Result<SpectralBasis> {
    let a = plant.a_matrix();
    let n = a.nrows();
    if t.nrows() != n || t.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::Config(
            "supplied T and M must match the state dimension".into(),
        ));
    }
    let residual = norm_inf(&(&t * &m - a * &t));
    let tol = basis_tolerance(a);
    if residual > tol {
        return Err(Error::Config(format!(
            "supplied basis residual {residual:.3e} exceeds tolerance {tol:.3e}"
        )));
    }
    let blocks = blocks_from_block_form(&m)?;
    classify(plant, t, m, blocks)
}

/// Reads the eigenvalue-block layout off a real block-diagonal matrix.
/// Adjacent irreducible diagonal blocks sharing an eigenvalue are merged into
/// one mode block.
pub fn blocks_from_block_form(m: &DMatrix<f64>) -> Result<Vec<EigenBlock>> {
    let n = m.nrows();
    let tol = eigen_tolerance(m);
    // irreducible diagonal spans: grow until no coupling crosses the edge
    let mut spans = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        loop {
            let mut grown = false;
            for r in start..end {
                for c in end..n {
                    if m[(r, c)].abs() > tol || m[(c, r)].abs() > tol {
                        end = end.max(c + 1);
                        grown = true;
                    }
                }
            }
            if !grown {
                break;
            }
        }
        // entries left of the span must vanish (block diagonality)
        for r in start..end {
            for c in 0..start {
                if m[(r, c)].abs() > tol || m[(c, r)].abs() > tol {
                    return Err(Error::Config(
                        "supplied M is not block diagonal".into(),
                    ));
                }
            }
        }
        spans.push((start, end));
        start = end;
    }

    // classify each span, then merge adjacent spans with equal eigenvalues
    let mut blocks: Vec<EigenBlock> = Vec::new();
    for (s, e) in spans {
        let dim = e - s;
        let sub: DMatrix<f64> = m.view((s, s), (dim, dim)).into();
        let modes = cluster_eigenvalues(&sub.complex_eigenvalues(), tol);
        if modes.len() != 1 {
            return Err(Error::Config(format!(
                "diagonal block at offset {s} mixes distinct eigenvalues"
            )));
        }
        let (lambda, is_real, alg) = modes[0];
        if !is_real && dim % 2 != 0 {
            return Err(Error::Config(format!(
                "complex block at offset {s} has odd dimension {dim}"
            )));
        }
        let shifted = to_complex(&sub) - to_complex(&DMatrix::identity(dim, dim)) * lambda;
        let geo = complex_null_space(&shifted).len();
        match blocks.last_mut() {
            Some(prev)
                if (prev.eigenvalue - lambda).norm() <= tol && prev.is_real == is_real =>
            {
                prev.algebraic_multiplicity += alg;
                prev.geometric_multiplicity += geo;
                prev.block_dimension += dim;
            }
            _ => blocks.push(EigenBlock {
                eigenvalue: lambda,
                is_real,
                algebraic_multiplicity: alg,
                geometric_multiplicity: geo,
                block_dimension: dim,
                offset: s,
                is_unstable: lambda.norm() >= 1.0,
            }),
        }
    }
    Ok(blocks)
}

/// Verdict of the per-block source cardinality requirement `|S_j| >= 2f+1`.
#[derive(Debug, Clone)]
pub struct SourceCardinalityReport {
    pub required: usize,
    /// (block id, |S_j|, pass) for every unstable block with S_j != V
    pub entries: Vec<(usize, usize, bool)>,
    pub all_pass: bool,
}

/// Checks the necessary source-count condition for tolerating `f`
/// adversaries: every consensus-estimated block needs at least `2f+1`
/// source nodes.
pub fn check_source_cardinality(basis: &SpectralBasis, f: usize) -> SourceCardinalityReport {
    let required = 2 * f + 1;
    let entries: Vec<(usize, usize, bool)> = basis
        .omega_u()
        .iter()
        .map(|&j| {
            let size = basis.source_set(j).len();
            (j, size, size >= required)
        })
        .collect();
    let all_pass = entries.iter().all(|&(_, _, ok)| ok);
    SourceCardinalityReport {
        required,
        entries,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{scalar_demo_plant, two_mode_plant};
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};

    #[test]
    fn decompose_diagonal_matrix() {
        let a = DMatrix::from_diagonal(&dvector![2.0, 0.5]);
        let (t, m, blocks) = decompose(&a).unwrap();
        assert_eq!(blocks.len(), 2);
        assert!(blocks.iter().all(|b| b.is_real));
        // real blocks ascending: 0.5 before 2
        assert_eq!(blocks[0].eigenvalue.re, 0.5);
        assert_eq!(blocks[1].eigenvalue.re, 2.0);
        assert!(!blocks[0].is_unstable);
        assert!(blocks[1].is_unstable);
        let residual = (&t * &m - &a * &t).amax();
        assert!(residual <= basis_tolerance(&a));
        assert_eq!(m[(0, 0)], 0.5);
        assert_eq!(m[(1, 1)], 2.0);
    }

    #[test]
    fn decompose_rotation_gives_single_complex_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let (_t, m, blocks) = decompose(&a).unwrap();
        assert_eq!(blocks.len(), 1);
        let b = &blocks[0];
        assert!(!b.is_real);
        assert_eq!(b.block_dimension, 2);
        assert!((b.eigenvalue - Complex::new(0.0, 1.0)).norm() <= 1e-10);
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((m - expected).amax() <= 1e-10);
    }

    #[test]
    fn decompose_random_with_conjugate_pair() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            // rotation block plus two real modes, conjugated by random P
            let angle: f64 = rng.gen_range(0.1..3.0);
            let scale: f64 = rng.gen_range(0.5..2.0);
            let mut core = DMatrix::zeros(4, 4);
            core[(0, 0)] = scale * angle.cos();
            core[(0, 1)] = scale * angle.sin();
            core[(1, 0)] = -scale * angle.sin();
            core[(1, 1)] = scale * angle.cos();
            core[(2, 2)] = rng.gen_range(-2.0..-1.2);
            core[(3, 3)] = rng.gen_range(1.2..2.0);
            let p = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let Some(p_inv) = p.clone().try_inverse() else {
                continue;
            };
            let a = &p * core * p_inv;
            let (t, m, blocks) = decompose(&a).unwrap();
            assert_eq!(blocks.iter().map(|b| b.block_dimension).sum::<usize>(), 4);
            let residual = norm_inf(&(&t * &m - &a * &t));
            assert!(residual <= 1e-8 * norm_inf(&a) * 4.0, "residual {residual}");
        }
    }

    #[test]
    fn defective_matrix_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        match decompose(&a) {
            Err(Error::DefectiveEigenvalue { re, alg, geo, .. }) => {
                assert!((re - 2.0).abs() <= 1e-8);
                assert_eq!(alg, 2);
                assert_eq!(geo, 1);
            }
            other => panic!("expected defective error, got {other:?}"),
        }
    }

    #[test]
    fn pbh_diagonal_example() {
        let a = DMatrix::from_diagonal(&dvector![2.0, 3.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(pbh_detectable(&a, &c, Complex::new(2.0, 0.0)));
        assert!(!pbh_detectable(&a, &c, Complex::new(3.0, 0.0)));
    }

    #[test]
    fn pbh_stable_always_detectable() {
        let a = DMatrix::from_diagonal(&dvector![0.5, 0.2]);
        let c = DMatrix::zeros(0, 2);
        assert!(pbh_detectable(&a, &c, Complex::new(0.5, 0.0)));
    }

    #[test]
    fn two_mode_source_sets() {
        let plant = two_mode_plant();
        let basis = build_basis(&plant).unwrap();
        assert_eq!(basis.blocks().len(), 2);
        // blocks ordered ascending: eigenvalue 2 is block 0, eigenvalue 3 is
        // block 1
        let s0: BTreeSet<NodeId> = [0, 1, 2].into_iter().collect();
        let s1: BTreeSet<NodeId> = [7, 8, 9].into_iter().collect();
        assert_eq!(basis.source_set(0), &s0);
        assert_eq!(basis.source_set(1), &s1);
        assert_eq!(basis.omega_u().len(), 2);
    }

    #[test]
    fn scalar_demo_basis() {
        let plant = scalar_demo_plant();
        let basis = build_basis(&plant).unwrap();
        assert_eq!(basis.blocks().len(), 1);
        let sources: BTreeSet<NodeId> = [0, 1, 2].into_iter().collect();
        assert_eq!(basis.source_set(0), &sources);
        assert_eq!(basis.omega_u().iter().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn stable_plant_has_empty_omega_u() {
        let a = DMatrix::from_diagonal(&dvector![0.5, -0.3]);
        let plant = LtiPlant::new(a, vec![DMatrix::zeros(0, 2)], DVector::zeros(2)).unwrap();
        let basis = build_basis(&plant).unwrap();
        assert!(basis.omega_u().is_empty());
        assert!(basis.undetectable_set(0).is_empty());
    }

    #[test]
    fn source_cardinality_report() {
        let plant = two_mode_plant();
        let basis = build_basis(&plant).unwrap();
        let ok = check_source_cardinality(&basis, 1);
        assert!(ok.all_pass);
        let fail = check_source_cardinality(&basis, 2);
        assert!(!fail.all_pass);
        assert!(fail.entries.iter().all(|&(_, size, pass)| pass == (size >= 5)));
    }

    #[test]
    fn conjugate_symmetry_of_pbh() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(2..=5);
            let a: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let c = DMatrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
            for lambda in a.complex_eigenvalues().iter() {
                if lambda.im.abs() > 1e-12 {
                    assert_eq!(
                        pbh_detectable(&a, &c, *lambda),
                        pbh_detectable(&a, &c, lambda.conj())
                    );
                }
            }
        }
    }

    #[test]
    fn similarity_preserves_detectability() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let mut done = 0;
        while done < 100 {
            let n = rng.gen_range(2..=5);
            let a: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let Ok((t, m, blocks)) = decompose(&a) else {
                continue;
            };
            let c = DMatrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
            let c_bar = &c * &t;
            for b in &blocks {
                assert_eq!(
                    pbh_detectable(&a, &c, b.eigenvalue),
                    pbh_detectable(&m, &c_bar, b.eigenvalue),
                    "mismatch at eigenvalue {}",
                    b.eigenvalue
                );
            }
            done += 1;
        }
    }

    #[test]
    fn block_layout_roundtrip_from_m() {
        let plant = two_mode_plant();
        let (t, m, blocks) = decompose(plant.a_matrix()).unwrap();
        let parsed = blocks_from_block_form(&m).unwrap();
        assert_eq!(parsed.len(), blocks.len());
        for (a, b) in parsed.iter().zip(blocks.iter()) {
            assert_eq!(a.offset, b.offset);
            assert_eq!(a.block_dimension, b.block_dimension);
            assert!((a.eigenvalue - b.eigenvalue).norm() <= 1e-8);
        }
        // user-supplied path accepts the same decomposition
        let basis = build_basis_with(&plant, t, m).unwrap();
        assert_eq!(basis.blocks().len(), 2);
    }

    #[test]
    fn user_supplied_jordan_block_accepted() {
        // defective matrix with explicit basis: A already in real Jordan form
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let c = DMatrix::identity(2, 2);
        let plant = LtiPlant::new(a.clone(), vec![c], DVector::zeros(2)).unwrap();
        assert!(build_basis(&plant).is_err());
        let basis = build_basis_with(&plant, DMatrix::identity(2, 2), a).unwrap();
        assert_eq!(basis.blocks().len(), 1);
        assert_eq!(basis.blocks()[0].algebraic_multiplicity, 2);
        assert_eq!(basis.blocks()[0].geometric_multiplicity, 1);
    }
}
