use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::*;
use super::{gate, stats_label, sweep_cases, ReportBuilder};
use crate::descriptions::{
    born_equivalence_report, first_way, idempotency_defect_on, recover_first, second_way, secondway_projector,
    working_sector_basis,
};
use crate::dynamics::{compatibility_report, Hamiltonian};
use crate::error::Result;
use crate::fock::{additive_fock_observable, fock_expectation, two_particle_state, FockSpace};
use crate::linalg::{overlap_modulus, CMatrix, HermitianObservable, HilbertSpace, StateVector};
use crate::meter::{
    classify_state, coarse_grain, registered_distribution, sample_registrations, BorelSet, FrequencyRecord, Meter,
    Registered, RegisteredDistribution, SpectralMeasure,
};
use crate::multiparticle::{additive_embed, tensor_and_symmetrize, MultiState, Statistics};
use crate::random::{random_admissible_hamiltonian, random_separated_instance, random_unitary, trial_rng};
use crate::report::to_canonical_json;
use crate::separation::{
    contraction_residual_at_slot, has_separation_status, Environment, EnvironmentObject, SeparationReport,
};

const SIGMA_BOUND: f64 = 4.0;

/// Largest `|f - p| / sigma` over the registered outcomes and the no-response
/// channel; zero-variance channels must match exactly.
fn sampling_z(dist: &RegisteredDistribution, rec: &FrequencyRecord) -> f64 {
    let shots = rec.shots as f64;
    let mut pairs: Vec<(f64, u64)> = dist
        .outcomes
        .iter()
        .map(|o| o.probability)
        .zip(rec.outcomes.iter().map(|o| o.count))
        .collect();
    pairs.push((dist.no_response, rec.no_response));
    pairs
        .into_iter()
        .map(|(p, count)| {
            let f = count as f64 / shots;
            let sigma = (p * (1.0 - p) / shots).sqrt();
            let gap = (f - p).abs();
            if sigma > 1e-9 {
                gap / sigma
            } else if gap < 1e-9 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// The sidecar's `seed` is the sampler seed derived from `master_seed`, so
/// `sample_registrations` with that seed reproduces the counts.
fn record_sampling(
    b: &mut ReportBuilder,
    master_seed: u64,
    prefix: &str,
    dist: &RegisteredDistribution,
    rec: &FrequencyRecord,
) -> Result<()> {
    b.below(
        format!("{prefix}.sampling_within_4_sigma"),
        sampling_z(dist, rec),
        SIGMA_BOUND,
    );
    b.file(format!("{prefix}.frequencies.csv"), rec.to_csv());
    let mut sidecar = rec.sidecar();
    sidecar["master_seed"] = master_seed.into();
    b.file(
        format!("{prefix}.frequencies.json"),
        crate::report::canonical_json(&sidecar),
    );
    Ok(())
}

fn status_of(cfg: &ScenarioConfig, psi: &StateVector, env: &Environment) -> Result<SeparationReport> {
    let r = has_separation_status(psi, env, cfg.separation_tolerance)?;
    gate(cfg, &r)?;
    Ok(r)
}

fn single_env(label: &str, env: &MultiState, stats: Statistics) -> Result<Environment> {
    Environment::new(vec![EnvironmentObject::from_pure(label, stats, env)?])
}

fn seed_for(cfg: &ScenarioConfig, stream: u64) -> u64 {
    trial_rng(cfg.seed, stream).random()
}

fn probability_of_value(dist: &RegisteredDistribution, value: f64) -> f64 {
    dist.outcomes
        .iter()
        .filter(|o| (o.value - value).abs() < 1e-12)
        .map(|o| o.probability)
        .sum()
}

#[derive(Serialize)]
struct TwoLabRow {
    statistics: &'static str,
    expectation: f64,
    predicted: f64,
    remote_contribution: f64,
    noise: &'static str,
}

pub(crate) fn two_lab(cfg: &ScenarioConfig, c: &TwoLabConfig, b: &mut ReportBuilder) -> Result<()> {
    let space = HilbertSpace::new(c.dim)?;
    let meter = c.meter.build("meter", &space)?;
    let [k, l] = c.modes;
    let o = &c.meter.observable;
    let tol = cfg.tol(1e-12);
    let mut rows = Vec::new();
    for (si, stats) in c.statistics.expand().into_iter().enumerate() {
        let tag = stats_label(stats);
        // a complete meter sees the sum over both occupied modes, wherever lab B is
        let fock = FockSpace::new(c.dim, stats, c.n_max)?;
        let observable = additive_fock_observable(&fock, o)?;
        let state = two_particle_state(&fock, k, l)?;
        let expectation = fock_expectation(&state, &observable)?;
        let predicted = o[k] + o[l];
        b.below(
            format!("{tag}.complete_expectation"),
            (expectation - predicted).abs(),
            tol,
        );

        // the same number from the symmetrized two-particle wave function
        let ek = MultiState::from(&StateVector::basis(&space, k)?);
        let el = MultiState::from(&StateVector::basis(&space, l)?);
        let (pair, _) = tensor_and_symmetrize(&[&ek, &el], stats)?;
        let dense = additive_embed(&crate::linalg::diagonal(o), 2)?;
        let v = pair.amplitudes();
        let first_quantized = v.dotc(&dense.apply(v)).re;
        b.below(
            format!("{tag}.fock_matches_wave_function"),
            (first_quantized - expectation).abs(),
            tol,
        );
        let remote = expectation - o[k];
        rows.push(TwoLabRow {
            statistics: tag,
            expectation,
            predicted,
            remote_contribution: remote,
            noise: if remote.abs() > tol {
                "remote mode contributes"
            } else {
                "no remote contribution"
            },
        });

        // the incomplete meter: lab A's particle prepared in mode k, lab B's in mode l
        let psi = StateVector::basis(&space, k)?;
        let env = single_env("lab_b", &el, stats)?;
        let status = status_of(cfg, &psi, &env)?;
        b.table(format!("{tag}.separation"), &status)?;
        let dist = registered_distribution(&meter, &psi.density())?;
        let registered_k = c.meter.registered.as_ref().is_none_or(|r| r.contains(&k));
        let expected = if registered_k { 1.0 } else { 0.0 };
        b.below(
            format!("{tag}.prepared_mode_probability"),
            (probability_of_value(&dist, o[k]) - expected).abs(),
            tol,
        );
        b.below(
            format!("{tag}.no_response"),
            (dist.no_response - (1.0 - expected)).abs(),
            tol,
        );
        b.table(format!("{tag}.distribution"), &dist)?;
        if !meter.is_complete() {
            let eq = born_equivalence_report(&el, &psi, &meter, stats)?;
            b.table(format!("{tag}.equivalence"), &eq)?;
            if eq.hypothesis_violated {
                b.above(format!("{tag}.remote_disturbance_demonstrated"), eq.max_deviation, 0.01);
            } else {
                b.below(
                    format!("{tag}.no_remote_contribution"),
                    eq.max_deviation,
                    cfg.tol(1e-10),
                );
            }
        }
        let rec = sample_registrations(&meter, &psi.density(), cfg.shots, seed_for(cfg, si as u64))?;
        record_sampling(b, cfg.seed, tag, &dist, &rec)?;
    }
    b.table("expectations", rows)?;
    Ok(())
}

#[derive(Serialize)]
struct GridRow {
    label: String,
    detector_probabilities: Vec<f64>,
    response_probability: f64,
    no_response: f64,
    no_response_frequency: f64,
    class: crate::meter::DomainClass,
    predicate_admits: Option<bool>,
}

/// Position meter on a line of cells, coarse-grained onto sub-detectors; it
/// responds only inside the detectors.
pub fn grid_meter(cells: usize, detectors: &[[usize; 2]]) -> Result<Meter> {
    let space = HilbertSpace::new(cells)?;
    let positions: Vec<f64> = (0..cells).map(|i| i as f64).collect();
    let position = HermitianObservable::diagonal(&space, &positions)?;
    let fine = SpectralMeasure::of(&position);
    let mut partition: Vec<BorelSet> = detectors
        .iter()
        .map(|&[a, b]| BorelSet::interval(a as f64 - 0.5, b as f64 - 0.5))
        .collect();
    let covered = partition.iter().fold(BorelSet::empty(), |acc, x| acc.union(x));
    let mut gap_start = None;
    for i in 0..=cells {
        let free = i < cells && !covered.contains(i as f64);
        match (free, gap_start) {
            (true, None) => gap_start = Some(i),
            (false, Some(s)) => {
                partition.push(BorelSet::interval(s as f64 - 0.5, i as f64 - 0.5));
                gap_start = None;
            }
            _ => {}
        }
    }
    let coarse = coarse_grain(&fine, &partition)?;
    let observable = HermitianObservable::new(&space, coarse.observable_matrix())?;
    Meter::with_measure(
        "detector_grid",
        observable,
        coarse,
        Registered::EigenIndices((0..detectors.len()).collect()),
    )
}

pub(crate) fn detector_grid(cfg: &ScenarioConfig, c: &DetectorGridConfig, b: &mut ReportBuilder) -> Result<()> {
    let space = HilbertSpace::new(c.cells)?;
    let mut meter = grid_meter(c.cells, &c.detectors)?;
    if let Some(p) = &c.predicate {
        meter = meter.with_predicate(p.build(c.cells)?);
    }
    let tol = cfg.tol(1e-12);
    let mut rows = Vec::new();
    for (i, s) in c.states.iter().enumerate() {
        let psi = s.build(&space)?;
        let tag = format!("state.{}", s.label);
        status_of(cfg, &psi, &Environment::empty())?;
        let rho = psi.density();
        let dist = registered_distribution(&meter, &rho)?;
        // oracle: direct sums of |psi(lambda)|^2 over each detector's cells
        let direct: Vec<f64> = c
            .detectors
            .iter()
            .map(|&[a, b]| (a..b).map(|x| psi.amplitudes()[x].norm_sqr()).sum())
            .collect();
        let engine: Vec<f64> = (0..c.detectors.len()).map(|j| dist.probability_of(j)).collect();
        let gap = direct
            .iter()
            .zip(&engine)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        b.below(format!("{tag}.detector_probabilities"), gap, tol);
        let response: f64 = direct.iter().sum();
        b.below(
            format!("{tag}.no_response"),
            (dist.no_response - (1.0 - response)).abs(),
            tol,
        );
        let rec = sample_registrations(&meter, &rho, cfg.shots, seed_for(cfg, i as u64))?;
        if response < 1e-12 {
            b.holds(
                format!("{tag}.born_zero"),
                rec.no_response == rec.shots,
                format!("{} of {} shots without response", rec.no_response, rec.shots),
            );
        }
        record_sampling(b, cfg.seed, &tag, &dist, &rec)?;
        rows.push(GridRow {
            label: s.label.clone(),
            detector_probabilities: engine,
            response_probability: dist.registered_total(),
            no_response: dist.no_response,
            no_response_frequency: rec.no_response_frequency(),
            class: classify_state(&meter, &rho)?,
            predicate_admits: meter.predicate().map(|p| p.admits(&psi)),
        });
    }
    b.table("states", rows)?;
    Ok(())
}

#[derive(Serialize)]
struct TrialRow {
    trial: u64,
    dim: usize,
    env_particles: usize,
    statistics: &'static str,
    separation_residual: f64,
    round_trip_defect: f64,
    born_deviation: f64,
    normalization_error: f64,
    nu_error: f64,
}

fn sweep_trial(cfg: &ScenarioConfig, cases: &[(usize, usize, Statistics)], trial: u64) -> Result<TrialRow> {
    let (d, n, stats) = cases[(trial % cases.len() as u64) as usize];
    let mut rng = trial_rng(cfg.seed, trial);
    let inst = random_separated_instance(d, n, stats, &mut rng)?;
    let env = single_env("environment", &inst.env, stats)?;
    let status = status_of(cfg, &inst.psi, &env)?;
    let fw = first_way(&inst.env, &inst.psi, stats)?;
    let sw = second_way(&inst.env, &inst.psi, stats)?;
    let (rec, nu) = recover_first(&sw, &inst.psi)?;
    let eq = born_equivalence_report(&inst.env, &inst.psi, &inst.meter, stats)?;
    let expected = 1.0 / ((n + 1) as f64).sqrt();
    Ok(TrialRow {
        trial,
        dim: d,
        env_particles: n,
        statistics: stats_label(stats),
        separation_residual: status.max_residual(),
        round_trip_defect: 1.0 - overlap_modulus(rec.joint().amplitudes(), fw.joint().amplitudes()),
        born_deviation: eq.max_deviation,
        normalization_error: (sw.cyclic_coefficient() - expected).abs(),
        nu_error: (nu - 1.0 / expected).abs(),
    })
}

pub(crate) fn equivalence(cfg: &ScenarioConfig, c: &EquivalenceConfig, b: &mut ReportBuilder) -> Result<()> {
    if let Some(inst) = &c.instance {
        let space = HilbertSpace::new(inst.dim)?;
        let meter = inst.meter.build("meter", &space)?;
        let psi = inst.psi.build(&space)?;
        for stats in inst.statistics.expand() {
            let tag = format!("instance.{}", stats_label(stats));
            let env_state = build_env_state(&inst.environment, &space, stats)?;
            let env = single_env("environment", &env_state, stats)?;
            let status = status_of(cfg, &psi, &env)?;
            b.table(format!("{tag}.separation"), &status)?;
            let eq = born_equivalence_report(&env_state, &psi, &meter, stats)?;
            b.file(format!("{tag}.equivalence.csv"), eq.to_csv());
            b.file(format!("{tag}.equivalence.json"), to_canonical_json(&eq)?);
            b.table(format!("{tag}.equivalence"), &eq)?;
            if eq.hypothesis_violated && cfg.expect_violation {
                b.above(format!("{tag}.violation_demonstrated"), eq.max_deviation, 0.01);
                continue;
            }
            b.below(format!("{tag}.max_deviation"), eq.max_deviation, cfg.tol(1e-10));
            let n = env_state.particles();
            b.below(
                format!("{tag}.normalization"),
                (eq.cyclic_coefficient - 1.0 / ((n + 1) as f64).sqrt()).abs(),
                cfg.tol(1e-10),
            );
            let fw = first_way(&env_state, &psi, stats)?;
            let sw = second_way(&env_state, &psi, stats)?;
            let (rec, _) = recover_first(&sw, &psi)?;
            b.below(
                format!("{tag}.round_trip_defect"),
                1.0 - overlap_modulus(rec.joint().amplitudes(), fw.joint().amplitudes()),
                cfg.tol(1e-10),
            );
            let sector = working_sector_basis(&env_state, &meter, stats)?;
            let mut worst: f64 = 0.0;
            for k in 0..meter.measure().eigenvalues().len() {
                worst = worst.max(idempotency_defect_on(&secondway_projector(k, &meter, n)?, &sector));
            }
            b.below(format!("{tag}.projector_idempotent_on_sector"), worst, cfg.tol(1e-10));
        }
    }
    if let Some(sweep) = &c.sweep {
        let cases = sweep_cases(sweep);
        let rows = (0..sweep.trials)
            .into_par_iter()
            .map(|t| sweep_trial(cfg, &cases, t))
            .collect::<Result<Vec<_>>>()?;
        let worst = |f: fn(&TrialRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        b.below(
            "sweep.round_trip_defect",
            worst(|r| r.round_trip_defect),
            cfg.tol(1e-10),
        );
        b.below("sweep.born_deviation", worst(|r| r.born_deviation), cfg.tol(1e-10));
        b.below(
            "sweep.normalization_error",
            worst(|r| r.normalization_error),
            cfg.tol(1e-10),
        );
        b.below(
            "sweep.separation_residual",
            worst(|r| r.separation_residual),
            cfg.separation_tolerance,
        );
        let mut csv = String::from(
            "trial,dim,env_particles,statistics,separation_residual,round_trip_defect,born_deviation,normalization_error,nu_error\n",
        );
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.trial,
                r.dim,
                r.env_particles,
                r.statistics,
                crate::report::fmt_f64(r.separation_residual),
                crate::report::fmt_f64(r.round_trip_defect),
                crate::report::fmt_f64(r.born_deviation),
                crate::report::fmt_f64(r.normalization_error),
                crate::report::fmt_f64(r.nu_error)
            ));
        }
        b.file("sweep.csv", csv);
        b.table("sweep", rows)?;
    }
    Ok(())
}

pub(crate) fn dynamics(cfg: &ScenarioConfig, c: &DynamicsConfig, b: &mut ReportBuilder) -> Result<()> {
    let space = HilbertSpace::new(c.dim)?;
    let meter = c.meter.build("meter", &space)?;
    let psi = c.psi.build(&space)?;
    let times = c.times.points()?;
    let pi_ss = meter.pi_ss().matrix().clone();
    for (si, stats) in c.statistics.expand().into_iter().enumerate() {
        let tag = stats_label(stats);
        let env_state = build_env_state(&c.environment, &space, stats)?;
        let env = single_env("environment", &env_state, stats)?;
        let status = status_of(cfg, &psi, &env)?;
        b.table(format!("{tag}.separation"), &status)?;
        let slots = env_state.particles() + 1;
        let h = match &c.hamiltonian {
            HamiltonianSpec::Zero => {
                let dim = crate::multiparticle::product_dim(c.dim, slots);
                Hamiltonian::new(CMatrix::zeros(dim, dim), c.dim, slots, stats, &pi_ss)?
            }
            HamiltonianSpec::Additive { single } => {
                let h1 = HamiltonianSpec::single_matrix(single, c.dim)?;
                Hamiltonian::additive(&h1, slots, stats, &pi_ss)?
            }
            HamiltonianSpec::AdmissibleRandom => {
                let mut rng = trial_rng(cfg.seed, si as u64);
                let m = random_admissible_hamiltonian(&pi_ss, slots, &mut rng);
                Hamiltonian::new(m, c.dim, slots, stats, &pi_ss)?
            }
        };
        let report = compatibility_report(&h, &env_state, &psi, &meter, &times)?;
        b.file(format!("{tag}.dynamics.csv"), report.to_csv());
        b.table(format!("{tag}.dynamics"), &report)?;
        let flags = h.flags();
        b.holds(
            format!("{tag}.symmetrizer_commutes"),
            flags.commutes_with_symmetrizer,
            format!("|[H, S]|_max = {:e}", flags.symmetrizer_deviation),
        );
        let drift = report.rows.iter().map(|r| r.status_drift).fold(0.0, f64::max);
        if cfg.expect_violation {
            b.above(format!("{tag}.status_change_demonstrated"), report.max_deviation, 0.01);
        } else {
            b.below(
                format!("{tag}.trajectory_deviation"),
                report.max_deviation,
                cfg.tol(1e-8),
            );
            b.below(format!("{tag}.status_projector_drift"), drift, 1e-9);
        }
    }
    Ok(())
}

pub(crate) fn separation_check(cfg: &ScenarioConfig, c: &SeparationCheckConfig, b: &mut ReportBuilder) -> Result<()> {
    let space = HilbertSpace::new(c.dim)?;
    let psi = c.psi.build(&space)?;
    for (si, stats) in c.statistics.expand().into_iter().enumerate() {
        let tag = stats_label(stats);
        let env = build_environment(&c.environment, &space, stats)?;
        let report = has_separation_status(&psi, &env, cfg.separation_tolerance)?;
        b.file(format!("{tag}.separation.json"), to_canonical_json(&report)?);
        b.table(format!("{tag}.separation"), &report)?;
        if cfg.expect_violation {
            b.holds(
                format!("{tag}.violation_demonstrated"),
                !report.separated,
                report.summary(),
            );
        } else {
            gate(cfg, &report)?;
            b.holds(format!("{tag}.separated"), report.separated, report.summary());
        }

        // every primed slot gives the same residual
        let mut slot_gap: f64 = 0.0;
        for (obj, verdict) in env.objects().iter().zip(&report.objects) {
            for slot in 1..obj.particles() {
                let r = contraction_residual_at_slot(obj, psi.amplitudes(), slot)?;
                slot_gap = slot_gap.max((r - verdict.residual).abs());
            }
        }
        b.below(format!("{tag}.slot_independence"), slot_gap, cfg.tol(1e-12));

        // residuals are invariant under a common single-particle unitary
        let mut rng = trial_rng(cfg.seed, si as u64);
        let u = random_unitary(c.dim, &mut rng);
        let rotated_psi = StateVector::normalized(&space, &u * psi.amplitudes())?;
        let rotated = has_separation_status(&rotated_psi, &env.transformed(&u)?, cfg.separation_tolerance)?;
        let gap = report
            .objects
            .iter()
            .zip(&rotated.objects)
            .map(|(a, r)| (a.residual - r.residual).abs())
            .fold(0.0, f64::max);
        b.below(format!("{tag}.basis_independence"), gap, cfg.tol(1e-12));
        b.holds(
            format!("{tag}.verdict_basis_independent"),
            rotated.separated == report.separated,
            format!("rotated verdict: {}", rotated.summary()),
        );
    }
    Ok(())
}
