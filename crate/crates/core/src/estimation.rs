//! Per-node estimator: a Luenberger observer on the locally detectable
//! subspace and a trimmed-mean consensus filter on the remaining eigen
//! blocks.
//!
//! The observer gain defaults to dead-beat: observable poles are placed at
//! zero through a similarity (Sylvester) construction on the observable part
//! of the observability decomposition, while detectable-but-unobservable
//! poles (necessarily stable) are left untouched.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::plant::LtiPlant;
use crate::spectral::SpectralBasis;
use crate::NodeId;

/// Rows of the transformed state covered by the node's detectable blocks, in
/// ascending order.
fn detectable_rows(basis: &SpectralBasis, node: NodeId) -> Vec<usize> {
    basis
        .detectable_set(node)
        .iter()
        .flat_map(|&j| basis.blocks()[j].range())
        .collect()
}

fn select_rows_cols(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Solves the Sylvester equation `X A - F X = G C` by vectorization
/// (Kronecker form); returns `None` when the linear system is singular.
fn solve_sylvester(
    a: &DMatrix<f64>,
    f: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let (q, n) = (f.nrows(), a.nrows());
    // vec(XA) = (A^T ⊗ I) vec(X); vec(FX) = (I ⊗ F) vec(X)
    let lhs = a.transpose().kronecker(&DMatrix::identity(q, q))
        - DMatrix::identity(n, n).kronecker(f);
    let b = DVector::from_column_slice(rhs.as_slice());
    lhs.lu().solve(&b).map(|x| DMatrix::from_column_slice(q, n, x.as_slice()))
}

/// Dead-beat observer gain for an observable pair `(a, c)`: returns `L` with
/// `a - L c` nilpotent (or, when zero is already an eigenvalue of `a`,
/// similar to a stable diagonal with small distinct entries).
fn place_observer_poles(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = a.nrows();
    if q == 0 || c.nrows() == 0 {
        return Ok(DMatrix::zeros(q, c.nrows()));
    }
    // target dynamics F: nilpotent shift when spectra allow, otherwise small
    // distinct stable poles disjoint from spec(a)
    let eigs: Vec<f64> = a.complex_eigenvalues().iter().map(|l| l.norm()).collect();
    let zero_is_eig = eigs.iter().any(|&m| m <= 1e-9);
    let f_target = if !zero_is_eig {
        DMatrix::from_fn(q, q, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
    } else {
        let mut poles = Vec::new();
        let mut candidate = 0.01;
        while poles.len() < q {
            if !eigs.iter().any(|&m| (m - candidate).abs() <= 1e-6) {
                poles.push(candidate);
            }
            candidate += 0.01;
        }
        DMatrix::from_diagonal(&DVector::from_vec(poles))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e_52e5);
    for _ in 0..16 {
        let g = DMatrix::from_fn(q, c.nrows(), |_, _| rng.gen_range(-1.0..1.0));
        let rhs = &g * c;
        let Some(x) = solve_sylvester(a, &f_target, &rhs) else {
            continue;
        };
        let Some(x_inv) = x.clone().try_inverse() else {
            continue;
        };
        let l = x_inv * &g;
        if spectral_radius(&(a - &l * c)) < 1.0 {
            return Ok(l);
        }
    }
    Err(Error::Internal(
        "observer pole placement failed for an observable pair".into(),
    ))
}

/// Observer gain for the node's detectable subsystem `(M_O, C_O)`: dead-beat
/// on the observable part, zero correction on the (stable) unobservable
/// part. Shape: `dim(O_i) x r_i`.
pub fn design_observer_gain(
    basis: &SpectralBasis,
    plant: &LtiPlant,
    node: NodeId,
) -> Result<DMatrix<f64>> {
    let rows = detectable_rows(basis, node);
    let d = rows.len();
    let c_full = basis.transformed_observation(plant, node);
    let m_o = select_rows_cols(basis.block_form(), &rows, &rows);
    let c_o = DMatrix::from_fn(c_full.nrows(), d, |i, j| c_full[(i, rows[j])]);
    let p = c_o.nrows();
    if d == 0 || p == 0 {
        let l = DMatrix::zeros(d, p);
        if spectral_radius(&m_o) >= 1.0 && d > 0 {
            return Err(Error::Internal(
                "detectable subsystem unstable but node has no measurements".into(),
            ));
        }
        return Ok(l);
    }

    // observability decomposition of (m_o, c_o): Q = [observable | kernel]
    let mut obs = DMatrix::zeros(p * d, d);
    let mut power = DMatrix::identity(d, d);
    for k in 0..d {
        obs.view_mut((k * p, 0), (p, d)).copy_from(&(&c_o * &power));
        power = &power * &m_o;
    }
    let svd = obs.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-8 * smax.max(1e-300);
    let mut obs_dirs: Vec<usize> = Vec::new();
    let mut ker_dirs: Vec<usize> = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            obs_dirs.push(i);
        } else {
            ker_dirs.push(i);
        }
    }
    let qn = obs_dirs.len();
    let mut q_mat = DMatrix::zeros(d, d);
    for (col, &i) in obs_dirs.iter().chain(ker_dirs.iter()).enumerate() {
        q_mat.set_column(col, &v_t.row(i).transpose());
    }
    // x = Q x̃ with x̃ = [observable; unobservable]
    let m_t = q_mat.transpose() * &m_o * &q_mat;
    let c_t = &c_o * &q_mat;
    let a11: DMatrix<f64> = m_t.view((0, 0), (qn, qn)).into();
    let a22: DMatrix<f64> = m_t.view((qn, qn), (d - qn, d - qn)).into();
    let c1: DMatrix<f64> = c_t.view((0, 0), (p, qn)).into();
    if spectral_radius(&a22) >= 1.0 {
        return Err(Error::Internal(
            "unobservable part of a detectable subsystem is unstable".into(),
        ));
    }
    let l1 = place_observer_poles(&a11, &c1)?;
    let mut l_t = DMatrix::zeros(d, p);
    l_t.view_mut((0, 0), (qn, p)).copy_from(&l1);
    let l = q_mat * l_t;
    let rho = spectral_radius(&(&m_o - &l * &c_o));
    if rho >= 1.0 {
        return Err(Error::Internal(format!(
            "closed-loop observer spectral radius {rho} >= 1"
        )));
    }
    Ok(l)
}

/// Outcome of the per-component trim-and-average filter: the filtered block
/// vector and the senders whose values were replaced by 0.
pub struct FilterOutcome {
    pub filtered: DVector<f64>,
    pub flagged: BTreeSet<NodeId>,
}

/// Per-component trimmed mean over the accepted neighbors' block estimates.
///
/// Missing or non-finite entries are replaced by 0 and the sender flagged;
/// per component, values are sorted descending (ties by ascending sender
/// id), the top `f` and bottom `f` are discarded, and the survivors are
/// averaged uniformly.
pub fn lfre_filter(
    accepted: &[NodeId],
    received: &BTreeMap<NodeId, Option<DVector<f64>>>,
    f: usize,
    dim: usize,
) -> Result<FilterOutcome> {
    if accepted.len() < 2 * f + 1 {
        return Err(Error::Config(format!(
            "{} accepted neighbors cannot tolerate f = {f} (need {})",
            accepted.len(),
            2 * f + 1
        )));
    }
    let mut flagged = BTreeSet::new();
    // sanitized per-sender vectors, in accepted order
    let mut values: Vec<(NodeId, DVector<f64>)> = Vec::with_capacity(accepted.len());
    for &sender in accepted {
        let sanitized = match received.get(&sender) {
            Some(Some(v)) if v.len() == dim => {
                let mut v = v.clone();
                let mut bad = false;
                for x in v.iter_mut() {
                    if !x.is_finite() {
                        *x = 0.0;
                        bad = true;
                    }
                }
                if bad {
                    flagged.insert(sender);
                }
                v
            }
            _ => {
                flagged.insert(sender);
                DVector::zeros(dim)
            }
        };
        values.push((sender, sanitized));
    }
    let mut filtered = DVector::zeros(dim);
    for m in 0..dim {
        let mut column: Vec<(f64, NodeId)> =
            values.iter().map(|(id, v)| (v[m], *id)).collect();
        column.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("sanitized values are finite")
                .then(a.1.cmp(&b.1))
        });
        let survivors = &column[f..column.len() - f];
        filtered[m] = survivors.iter().map(|&(v, _)| v).sum::<f64>() / survivors.len() as f64;
    }
    Ok(FilterOutcome { filtered, flagged })
}

/// One node's estimator state in the transformed coordinates.
#[derive(Debug, Clone)]
pub struct NodeEstimator<'a> {
    node: NodeId,
    basis: &'a SpectralBasis,
    observer_gain: DMatrix<f64>,
    z: DVector<f64>,
    /// accepted in-neighbors per consensus-estimated block
    accepted: BTreeMap<usize, Vec<NodeId>>,
    flagged: BTreeSet<NodeId>,
    o_rows: Vec<usize>,
    m_o: DMatrix<f64>,
    c_o: DMatrix<f64>,
}

impl<'a> NodeEstimator<'a> {
    /// Builds the estimator with the given accepted-neighbor sets (one entry
    /// per block the node cannot detect locally) and an optional gain
    /// override in place of the dead-beat default.
    pub fn new(
        basis: &'a SpectralBasis,
        plant: &LtiPlant,
        node: NodeId,
        accepted: BTreeMap<usize, Vec<NodeId>>,
        gain_override: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let o_rows = detectable_rows(basis, node);
        let m_o = select_rows_cols(basis.block_form(), &o_rows, &o_rows);
        let c_full = basis.transformed_observation(plant, node);
        let c_o = DMatrix::from_fn(c_full.nrows(), o_rows.len(), |i, j| c_full[(i, o_rows[j])]);
        let observer_gain = match gain_override {
            Some(l) => {
                if l.nrows() != o_rows.len() || l.ncols() != c_o.nrows() {
                    return Err(Error::Config(format!(
                        "gain override for node {node} has shape {}x{}, expected {}x{}",
                        l.nrows(),
                        l.ncols(),
                        o_rows.len(),
                        c_o.nrows()
                    )));
                }
                let rho = spectral_radius(&(&m_o - &l * &c_o));
                if rho >= 1.0 {
                    return Err(Error::Config(format!(
                        "gain override for node {node} leaves spectral radius {rho} >= 1"
                    )));
                }
                l
            }
            None => design_observer_gain(basis, plant, node)?,
        };
        for &j in accepted.keys() {
            if basis.detectable_set(node).contains(&j) {
                return Err(Error::Config(format!(
                    "node {node} was given consensus neighbors for locally detectable block {j}"
                )));
            }
        }
        Ok(NodeEstimator {
            node,
            basis,
            observer_gain,
            z: DVector::zeros(basis.state_dim()),
            accepted,
            flagged: BTreeSet::new(),
            o_rows,
            m_o,
            c_o,
        })
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn observer_gain(&self) -> &DMatrix<f64> {
        &self.observer_gain
    }

    /// Current estimate in the transformed (block) coordinates.
    pub fn z_estimate(&self) -> &DVector<f64> {
        &self.z
    }

    /// Sets the initial estimate, given in the transformed coordinates.
    pub fn set_initial_z(&mut self, z0: DVector<f64>) -> Result<()> {
        if z0.len() != self.z.len() {
            return Err(Error::Config(format!(
                "initial estimate has length {}, expected {}",
                z0.len(),
                self.z.len()
            )));
        }
        self.z = z0;
        Ok(())
    }

    /// Estimate of one block, as a contiguous sub-vector.
    pub fn block_estimate(&self, block: usize) -> DVector<f64> {
        let r = self.basis.blocks()[block].range();
        self.z.rows(r.start, r.len()).into()
    }

    pub fn flagged(&self) -> &BTreeSet<NodeId> {
        &self.flagged
    }

    pub fn accepted(&self, block: usize) -> Option<&Vec<NodeId>> {
        self.accepted.get(&block)
    }

    /// Luenberger update of the detectable-subspace estimate:
    /// `ẑ_O <- M_O ẑ_O + L (y - C_O ẑ_O)`.
    pub fn observer_step(&mut self, measurement: &DVector<f64>) -> Result<()> {
        if measurement.len() != self.c_o.nrows() {
            return Err(Error::Config(format!(
                "node {} received a measurement of length {}, expected {}",
                self.node,
                measurement.len(),
                self.c_o.nrows()
            )));
        }
        if measurement.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "node {} sensor produced a non-finite measurement",
                self.node
            )));
        }
        let z_o = DVector::from_fn(self.o_rows.len(), |i, _| self.z[self.o_rows[i]]);
        let innovation = measurement - &self.c_o * &z_o;
        let next = &self.m_o * &z_o + &self.observer_gain * innovation;
        for (i, &row) in self.o_rows.iter().enumerate() {
            self.z[row] = next[i];
        }
        Ok(())
    }

    /// Trim-filter update of one consensus-estimated block:
    /// `ẑ^(j) <- M^(j) · filter(received)`.
    pub fn lfre_step(
        &mut self,
        block: usize,
        received: &BTreeMap<NodeId, Option<DVector<f64>>>,
        f: usize,
    ) -> Result<()> {
        let accepted = self.accepted.get(&block).ok_or_else(|| {
            Error::Config(format!(
                "node {} has no accepted neighbors for block {block}",
                self.node
            ))
        })?;
        let range = self.basis.blocks()[block].range();
        let outcome = lfre_filter(accepted, received, f, range.len())?;
        self.flagged.extend(outcome.flagged.iter().copied());
        let next = self.basis.block_submatrix(block) * outcome.filtered;
        for (i, row) in range.enumerate() {
            self.z[row] = next[i];
        }
        Ok(())
    }

    /// Estimate in the original state coordinates, `x̂ = T ẑ`.
    pub fn full_estimate(&self) -> DVector<f64> {
        self.basis.transform() * &self.z
    }
}
