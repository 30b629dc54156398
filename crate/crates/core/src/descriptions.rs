//! Two descriptions of a prepared particle next to `N` indistinguishable
//! environment particles: the plain product `Psi ⊗ psi` (first way) and its
//! tau-symmetrization (second way). Under separation status the first is
//! recovered from the second by projecting one slot onto `psi`, and a meter
//! restricted to the registered subspace gives the same Born statistics in
//! both.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_norm, orthonormal_columns, CMatrix, CVector, StateVector, C64};
use crate::meter::Meter;
use crate::multiparticle::{
    cyclic_expansion, embed_op, permute_slots, symmetrize, tensor_and_symmetrize, MultiOperator, MultiState,
    Statistics, SYMMETRY_TOL,
};
use crate::report::fmt_f64;
use crate::separation::{contraction_residual_at_slot, EnvironmentObject, DEFAULT_TOL};

/// `Psi ⊗ psi` with no symmetrization across the environment/system boundary.
#[derive(Clone, Debug)]
pub struct FirstWayState {
    env: MultiState,
    sys: StateVector,
    joint: MultiState,
}

impl FirstWayState {
    pub fn env(&self) -> &MultiState {
        &self.env
    }

    pub fn sys(&self) -> &StateVector {
        &self.sys
    }

    /// The joint vector on `N + 1` slots, system in the last slot.
    pub fn joint(&self) -> &MultiState {
        &self.joint
    }
}

fn check_env(env: &MultiState, psi: &StateVector, statistics: Statistics) -> Result<()> {
    if env.single_space() != psi.space() {
        return Err(Error::DimensionMismatch {
            expected: env.single_dim(),
            found: psi.dim(),
        });
    }
    if let Some(s) = env.statistics() {
        if s != statistics {
            return Err(Error::StatisticsMismatch(format!(
                "environment tagged {s:?}, requested {statistics:?}"
            )));
        }
    }
    let defect = env.symmetry_defect(statistics);
    if defect > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { defect });
    }
    Ok(())
}

pub fn first_way(env: &MultiState, psi: &StateVector, statistics: Statistics) -> Result<FirstWayState> {
    check_env(env, psi, statistics)?;
    let mut env = env.clone();
    env.tag(statistics)?;
    let joint = MultiState::from_amplitudes(
        env.single_space(),
        env.particles() + 1,
        env.amplitudes().kronecker(psi.amplitudes()),
    )?;
    Ok(FirstWayState {
        env,
        sys: psi.clone(),
        joint,
    })
}

/// `N_exch S(Psi ⊗ psi)` together with its ingredients.
#[derive(Clone, Debug)]
pub struct SecondWayState {
    state: MultiState,
    env: MultiState,
    psi: StateVector,
    statistics: Statistics,
    n_exch: f64,
    cyclic_coefficient: f64,
}

impl SecondWayState {
    pub fn state(&self) -> &MultiState {
        &self.state
    }

    pub fn amplitudes(&self) -> &CVector {
        self.state.amplitudes()
    }

    pub fn env(&self) -> &MultiState {
        &self.env
    }

    pub fn psi(&self) -> &StateVector {
        &self.psi
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    /// Inverse norm of the symmetrized product before renormalization.
    pub fn n_exch(&self) -> f64 {
        self.n_exch
    }

    /// Normalizer of the cyclic sum over the slot holding `psi`,
    /// computed from that sum directly. Equals `1/sqrt(N+1)` under separation.
    pub fn cyclic_coefficient(&self) -> f64 {
        self.cyclic_coefficient
    }

    pub fn particles(&self) -> usize {
        self.state.particles()
    }
}

pub fn second_way(env: &MultiState, psi: &StateVector, statistics: Statistics) -> Result<SecondWayState> {
    check_env(env, psi, statistics)?;
    let (state, n_exch) = tensor_and_symmetrize(&[env, &MultiState::from(psi)], statistics)?;
    let (_, cyclic_coefficient) = cyclic_expansion(env, psi, statistics)?;
    Ok(SecondWayState {
        state,
        env: env.clone(),
        psi: psi.clone(),
        statistics,
        n_exch,
        cyclic_coefficient,
    })
}

/// Projects `slot` onto `psi` and renormalizes. Returns the joint vector and
/// the renormalization factor `nu`.
pub fn recover_at_slot(sw: &SecondWayState, psi: &StateVector, slot: usize) -> Result<(CVector, f64)> {
    let n = sw.particles();
    if psi.space() != sw.state.single_space() {
        return Err(Error::DimensionMismatch {
            expected: sw.state.single_dim(),
            found: psi.dim(),
        });
    }
    let projector = psi.amplitudes() * psi.amplitudes().adjoint();
    let op = embed_op(&projector, slot, n)?;
    let projected = op.apply(sw.amplitudes());
    let norm = projected.norm();
    if norm < 1e-12 {
        return Err(Error::RecoveryDegenerate { norm });
    }
    Ok((projected.unscale(norm), 1.0 / norm))
}

/// Recovery through the last slot, split back into environment and system.
/// Returns the state and `nu`.
pub fn recover_first(sw: &SecondWayState, psi: &StateVector) -> Result<(FirstWayState, f64)> {
    let n = sw.particles();
    let (joint, nu) = recover_at_slot(sw, psi, n - 1)?;
    let d = psi.dim();
    let rest = joint.len() / d;
    // the last slot is proportional to psi, so contracting it with psi* leaves the environment
    let env_amp = CVector::from_fn(rest, |r, _| {
        (0..d)
            .map(|l| joint[r * d + l] * psi.amplitudes()[l].conj())
            .sum::<C64>()
    });
    let mut env = MultiState::from_amplitudes(psi.space(), n - 1, env_amp)?;
    // a violated separation leaves an environment that need not be symmetric
    let _ = env.tag(sw.statistics);
    let joint = MultiState::from_amplitudes(psi.space(), n, joint)?;
    Ok((
        FirstWayState {
            env,
            sys: psi.clone(),
            joint,
        },
        nu,
    ))
}

/// Moves slot `from` to the last position, keeping the order of the others.
pub fn move_slot_to_end(v: &CVector, d: usize, n: usize, from: usize) -> CVector {
    // result(i_0..i_{n-1}) = v(i_{sigma(0)}, ..): slot `from` of v reads the last index
    let sigma: Vec<usize> = (0..n)
        .map(|s| match s.cmp(&from) {
            std::cmp::Ordering::Less => s,
            std::cmp::Ordering::Equal => n - 1,
            std::cmp::Ordering::Greater => s - 1,
        })
        .collect();
    permute_slots(v, d, n, &sigma)
}

/// `Pi'_k = sum_l (Pi_ss Pi_k Pi_ss)^(l)` over `N + 1` slots.
///
/// When `Pi_ss` is built from eigenprojectors the compression equals `Pi_k Pi_ss`.
pub fn secondway_projector(k: usize, meter: &Meter, env_particles: usize) -> Result<MultiOperator> {
    let single = truncated_eigen(meter, k)?;
    let n = env_particles + 1;
    let mut acc = embed_op(&single, 0, n)?;
    for l in 1..n {
        acc = acc.plus(&embed_op(&single, l, n)?)?;
    }
    Ok(acc)
}

fn truncated_eigen(meter: &Meter, k: usize) -> Result<CMatrix> {
    Ok(crate::meter::eigen_effect(meter, k)?.matrix().clone())
}

/// Orthonormal basis of `span{ S(Psi ⊗ psi') : psi' in H_ss }`.
pub fn working_sector_basis(env: &MultiState, meter: &Meter, statistics: Statistics) -> Result<Vec<CVector>> {
    let d = env.single_dim();
    let n = env.particles() + 1;
    let columns: Vec<CVector> = meter
        .pi_ss()
        .range_basis()
        .iter()
        .map(|b| symmetrize(&env.amplitudes().kronecker(b), d, n, statistics))
        .collect();
    if columns.is_empty() {
        return Ok(Vec::new());
    }
    Ok(orthonormal_columns(&CMatrix::from_columns(&columns), 1e-10))
}

/// `max_v |(P^2 - P) v|_max` over the given vectors.
pub fn idempotency_defect_on(op: &MultiOperator, vectors: &[CVector]) -> f64 {
    let m = op.matrix();
    vectors
        .iter()
        .map(|v| {
            let pv = m * v;
            crate::linalg::vec_max_norm(&(m * &pv - pv))
        })
        .fold(0.0, f64::max)
}

/// Full-space defect `|P^2 - P|_max`.
pub fn idempotency_defect(op: &MultiOperator) -> f64 {
    let m = op.matrix();
    max_norm(&(m * m - m))
}

/// The product-basis vector with the largest `|(P^2 - P) v|_max`.
pub fn idempotency_counterexample(op: &MultiOperator) -> (usize, f64) {
    let m = op.matrix();
    let sq = m * m - m;
    (0..sq.ncols())
        .map(|c| (c, sq.column(c).iter().map(|z| z.norm()).fold(0.0, f64::max)))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub index: usize,
    pub value: f64,
    pub first_way: f64,
    pub second_way: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypotheses {
    pub psi_in_registered_subspace: bool,
    pub separated: bool,
    pub environment_outside_registered_subspace: bool,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.psi_in_registered_subspace && self.separated && self.environment_outside_registered_subspace
    }
}

/// Per-eigenvalue comparison of first-way and second-way registration probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub max_deviation: f64,
    pub hypotheses: Hypotheses,
    pub hypothesis_violated: bool,
    pub separation_residual: f64,
    pub n_exch: f64,
    pub cyclic_coefficient: f64,
}

impl EquivalenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value,first_way,second_way,deviation\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.index,
                fmt_f64(r.value),
                fmt_f64(r.first_way),
                fmt_f64(r.second_way),
                fmt_f64(r.deviation)
            ));
        }
        out
    }
}

/// Diagnostic: always produces a report, stamping it when a hypothesis fails.
pub fn born_equivalence_report(
    env: &MultiState,
    psi: &StateVector,
    meter: &Meter,
    statistics: Statistics,
) -> Result<EquivalenceReport> {
    if meter.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: meter.dim(),
            found: psi.dim(),
        });
    }
    let fw = first_way(env, psi, statistics)?;
    let sw = second_way(env, psi, statistics)?;
    let pi_ss = meter.pi_ss().matrix();
    let n_env = env.particles();
    let n = n_env + 1;

    let outside = crate::linalg::vec_max_norm(&(psi.amplitudes() - pi_ss * psi.amplitudes()));
    let object = EnvironmentObject::from_pure("environment", statistics, env)?;
    let separation_residual = contraction_residual_at_slot(&object, psi.amplitudes(), 0)?;
    let env_overlap = max_norm(&(pi_ss * env.one_body_density()));
    let hypotheses = Hypotheses {
        psi_in_registered_subspace: outside < DEFAULT_TOL,
        separated: separation_residual < DEFAULT_TOL,
        environment_outside_registered_subspace: env_overlap < DEFAULT_TOL,
    };

    let mut rows = Vec::new();
    for (k, &value) in meter.measure().eigenvalues().iter().enumerate() {
        let e = truncated_eigen(meter, k)?;
        let sys_op = embed_op(&e, n - 1, n)?;
        let fw_amp = fw.joint.amplitudes();
        let first = crate::linalg::real_part_checked(fw_amp.dotc(&sys_op.apply(fw_amp)))?;
        let p = secondway_projector(k, meter, n_env)?;
        let second = crate::linalg::real_part_checked(sw.amplitudes().dotc(&p.apply(sw.amplitudes())))?;
        rows.push(EquivalenceRow {
            index: k,
            value,
            first_way: first,
            second_way: second,
            deviation: (first - second).abs(),
        });
    }
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        rows,
        max_deviation,
        hypothesis_violated: !hypotheses.hold(),
        hypotheses,
        separation_residual,
        n_exch: sw.n_exch,
        cyclic_coefficient: sw.cyclic_coefficient,
    })
}
