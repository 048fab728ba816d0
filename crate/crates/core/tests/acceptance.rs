//! Acceptance suite: every release criterion at its stated tolerance, one
//! pass/fail line per criterion.
//!
//! Run with `cargo test -p spem --test acceptance -- --nocapture` to see the
//! per-criterion lines as they complete. Criteria run sequentially and share
//! one trained-parameter cache, mirroring production use where sweeps reuse
//! a single training pass per depth.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use spem::bench::{self, ExperimentConfig, ParamCache};
use spem::circuit::{identity_params, AnsatzSpec, ParamVector};
use spem::mitigate::{build_full_calibration, mitigate, Backend, MitigationPolicy};
use spem::noisesim::{
    derive_seed, run_matrix_density, run_trajectories, NoiseModel, OutcomeDistribution, ShotPlan,
};
use spem::nonherm::{
    embedded_evolution, evolution_operator, exact_reference, ideal_success_probability,
    post_select, z_magnetization, TfiParams, TimeGrid,
};
use spem::numkit::{self, basis_state, expm, herm_eig, psd_sqrt, vec_norm, ComplexMatrix};
use spem::varopt::finite_diff_gradient;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

const SEED: u64 = 7;

fn tuned_cfg(layers: usize) -> ExperimentConfig {
    let base = ExperimentConfig::default();
    ExperimentConfig {
        layers,
        seed: SEED,
        train: spem::varopt::TrainConfig {
            restarts: 16,
            max_iterations: 600,
            early_stop_cost: 2e-4,
            ..base.train
        },
        ..base
    }
}

struct Harness {
    cache: ParamCache,
    failures: Vec<String>,
}

impl Harness {
    fn run(
        &mut self,
        index: usize,
        name: &str,
        budget: Option<Duration>,
        body: impl FnOnce(&mut ParamCache) -> Result<String, String>,
    ) {
        let start = Instant::now();
        let outcome = body(&mut self.cache);
        let elapsed = start.elapsed();
        let budget_ok = budget.is_none_or(|b| elapsed <= b);
        match (&outcome, budget_ok) {
            (Ok(detail), true) => {
                println!("criterion {index} ({name}): PASS [{elapsed:.1?}] {detail}");
            }
            (Ok(detail), false) => {
                println!(
                    "criterion {index} ({name}): FAIL [{elapsed:.1?} over budget {budget:?}] {detail}"
                );
                self.failures.push(format!(
                    "criterion {index}: runtime {elapsed:.1?} over budget"
                ));
            }
            (Err(reason), _) => {
                println!("criterion {index} ({name}): FAIL [{elapsed:.1?}] {reason}");
                self.failures.push(format!("criterion {index}: {reason}"));
            }
        }
    }
}

#[test]
fn acceptance_criteria() {
    let mut harness = Harness {
        cache: ParamCache::in_memory(),
        failures: Vec::new(),
    };

    harness.run(
        1,
        "dilation correctness",
        Some(Duration::from_secs(5)),
        |_| criterion_1(),
    );
    harness.run(
        2,
        "oracle equivalence",
        Some(Duration::from_secs(10)),
        |_| criterion_2(),
    );
    harness.run(
        3,
        "training convergence",
        Some(Duration::from_secs(600)),
        criterion_3,
    );
    harness.run(
        4,
        "noise sweep reproduction",
        Some(Duration::from_secs(900)),
        criterion_4,
    );
    harness.run(
        5,
        "readout-vs-full comparison",
        Some(Duration::from_secs(300)),
        criterion_5,
    );
    harness.run(6, "calibration identity", None, |_| criterion_6());
    harness.run(7, "forward-backward consistency", None, |_| criterion_7());
    harness.run(8, "artifact determinism", None, |_| criterion_8());
    harness.run(9, "numerics suite", None, |_| criterion_9());

    assert!(
        harness.failures.is_empty(),
        "{} acceptance criterion(s) failed:\n  {}",
        harness.failures.len(),
        harness.failures.join("\n  ")
    );
}

fn grid_times() -> Vec<f64> {
    TimeGrid::default().times()
}

/// Dilation unitarity and exact top-left block over the full time grid.
fn criterion_1() -> Result<String, String> {
    let tfi = TfiParams::default();
    let mut worst_unitarity: f64 = 0.0;
    let mut worst_block: f64 = 0.0;
    for t in grid_times() {
        let u_h = evolution_operator(&tfi, t).map_err(|e| e.to_string())?;
        let emb = embedded_evolution(&tfi, t).map_err(|e| e.to_string())?;
        let q = &emb.matrix;
        let unitarity = q
            .adjoint()
            .matmul(q)
            .fro_distance(&ComplexMatrix::identity(32));
        let block = q
            .block(0, 16, 0, 16)
            .fro_distance(&u_h.scale(Complex64::new(emb.u, 0.0)));
        worst_unitarity = worst_unitarity.max(unitarity);
        worst_block = worst_block.max(block);
    }
    if worst_unitarity > 1e-9 {
        return Err(format!("unitarity residual {worst_unitarity:.3e} > 1e-9"));
    }
    if worst_block > 1e-8 {
        return Err(format!("top-left block residual {worst_block:.3e} > 1e-8"));
    }
    Ok(format!(
        "max unitarity residual {worst_unitarity:.2e}, max block residual {worst_block:.2e}"
    ))
}

/// Post-selected ideal execution of the exact dilation against brute force.
fn criterion_2() -> Result<String, String> {
    let tfi = TfiParams::default();
    let psi0 = tfi.initial_state_index();
    let mut worst_tv: f64 = 0.0;
    let mut worst_success_gap: f64 = 0.0;
    for t in grid_times() {
        let u_h = evolution_operator(&tfi, t).map_err(|e| e.to_string())?;
        let emb = embedded_evolution(&tfi, t).map_err(|e| e.to_string())?;
        let dist = run_matrix_density(&emb.matrix, psi0, &NoiseModel::noiseless())
            .map_err(|e| e.to_string())?;
        let (kept, success) = post_select(&dist).map_err(|e| e.to_string())?;

        let mut brute = u_h.mul_vec(&basis_state(16, psi0));
        let norm = vec_norm(&brute);
        for z in brute.iter_mut() {
            *z /= norm;
        }
        let brute_dist =
            OutcomeDistribution::probability(brute.iter().map(|z| z.norm_sqr()).collect())
                .map_err(|e| e.to_string())?;
        worst_tv = worst_tv.max(kept.total_variation(&brute_dist));

        let expected_success = emb.u * emb.u * norm * norm;
        worst_success_gap = worst_success_gap.max((success - expected_success).abs());
        debug_assert!((expected_success - ideal_success_probability(&emb, &tfi)).abs() < 1e-9);
    }
    if worst_tv > 1e-9 {
        return Err(format!("total variation {worst_tv:.3e} > 1e-9"));
    }
    if worst_success_gap > 1e-9 {
        return Err(format!(
            "success probability gap {worst_success_gap:.3e} > 1e-9"
        ));
    }
    Ok(format!(
        "max TV {worst_tv:.2e}, max success gap {worst_success_gap:.2e}"
    ))
}

/// Training convergence: n=2 cost gate, n=8 cost gate, and the sampled
/// magnetization of the converged (n=8) circuit against the exact curve.
fn criterion_3(cache: &mut ParamCache) -> Result<String, String> {
    let cfg2 = tuned_cfg(2);
    let steps2 = cache
        .get_or_train_evolution(&cfg2)
        .map_err(|e| e.to_string())?;
    let worst2 = steps2.iter().map(|s| s.cost).fold(0.0, f64::max);
    if worst2 > 0.02 {
        return Err(format!("n=2 worst cost {worst2:.3e} > 0.02"));
    }

    let cfg8 = tuned_cfg(8);
    let steps8 = cache
        .get_or_train_evolution(&cfg8)
        .map_err(|e| e.to_string())?;
    let worst8 = steps8.iter().map(|s| s.cost).fold(0.0, f64::max);
    if worst8 > 1e-3 {
        return Err(format!("n=8 worst cost {worst8:.3e} > 1e-3"));
    }

    let exact = exact_reference(&cfg8.tfi, &cfg8.grid).map_err(|e| e.to_string())?;
    let spec8 = cfg8.spec();
    let psi0 = cfg8.tfi.initial_state_index();
    let mut worst_z: f64 = 0.0;
    for (k, step) in steps8.iter().enumerate() {
        let params =
            ParamVector::from_vec(&spec8, step.params.clone()).map_err(|e| e.to_string())?;
        let plan = ShotPlan::new(32000, derive_seed(SEED, 0x53_0000 + k as u64))
            .map_err(|e| e.to_string())?;
        let dist = run_trajectories(&spec8, &params, psi0, &NoiseModel::noiseless(), &plan)
            .map_err(|e| e.to_string())?;
        let (kept, _) = post_select(&dist).map_err(|e| e.to_string())?;
        worst_z = worst_z.max((z_magnetization(&kept) - exact[k]).abs());
    }
    if worst_z > 0.05 {
        return Err(format!("sampled n=8 <Z> off by {worst_z:.3e} > 0.05"));
    }

    // Depth 2 is expressivity-limited (48 parameters vs 62 target degrees of
    // freedom); report its noiseless magnetization gap for the record.
    let spec2 = cfg2.spec();
    let mut n2_gap: f64 = 0.0;
    for (k, step) in steps2.iter().enumerate() {
        let params =
            ParamVector::from_vec(&spec2, step.params.clone()).map_err(|e| e.to_string())?;
        let dist = spem::noisesim::run_ideal(&spec2, &params, psi0).map_err(|e| e.to_string())?;
        let (kept, _) = post_select(&dist).map_err(|e| e.to_string())?;
        n2_gap = n2_gap.max((z_magnetization(&kept) - exact[k]).abs());
    }

    Ok(format!(
        "n=2 worst cost {worst2:.2e}, n=8 worst cost {worst8:.2e}, n=8 sampled <Z> gap {worst_z:.3}, (n=2 noiseless <Z> gap {n2_gap:.3})"
    ))
}

/// The error-rate x depth sweep with density-exact calibration:
/// (a) raw deviation grows from the easiest to the hardest cell (ratio >= 2),
/// (b) full mitigation stays at or below 0.05 everywhere,
/// (c) full recovers at least half of raw wherever p >= 0.009.
fn criterion_4(cache: &mut ParamCache) -> Result<String, String> {
    let mut cfg = tuned_cfg(2);
    cfg.sweep_cx_errors = vec![0.003, 0.006, 0.009, 0.012, 0.015];
    cfg.sweep_layers = vec![2, 3, 4, 5];
    let rows = bench::sweep(&cfg, cache).map_err(|e| e.to_string())?;

    let cell = |p: f64, n: usize| {
        rows.iter()
            .find(|r| (r.p - p).abs() < 1e-12 && r.n == n)
            .expect("cell present")
    };
    let mut problems = Vec::new();

    let first = cell(0.003, 2).dev_raw;
    let last = cell(0.015, 5).dev_raw;
    let ratio = last / first;
    if ratio < 2.0 {
        problems.push(format!(
            "(a) endpoint raw ratio {ratio:.2} < 2 (raw {first:.4} -> {last:.4})"
        ));
    }

    for row in &rows {
        let full = row.dev_full.expect("full mode requested");
        if full > 0.05 {
            problems.push(format!(
                "(b) dev_full {:.4} > 0.05 at (p={}, n={})",
                full, row.p, row.n
            ));
        }
        if row.p >= 0.009 && full > 0.5 * row.dev_raw {
            problems.push(format!(
                "(c) dev_full {:.4} > 0.5 x dev_raw {:.4} at (p={}, n={})",
                full, row.dev_raw, row.p, row.n
            ));
        }
    }

    let detail = format!("endpoint raw ratio {ratio:.2}, {} cells", rows.len());
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

/// Readout-only mitigation is the weaker correction at p = 0.012 for deep
/// circuits: it never beats full mitigation and recovers less than 30% of
/// the raw-to-full gap.
fn criterion_5(cache: &mut ParamCache) -> Result<String, String> {
    let mut problems = Vec::new();
    let mut recoveries = String::new();
    for n in [3usize, 4, 5] {
        let mut cfg = tuned_cfg(n);
        cfg.noise = NoiseModel::new(0.012, 0.01).map_err(|e| e.to_string())?;
        let prepared = bench::prepare(&cfg, cache).map_err(|e| e.to_string())?;
        let records = bench::execute(&cfg, &prepared).map_err(|e| e.to_string())?;
        let exact: Vec<f64> = records.iter().map(|r| r.z_exact).collect();
        let avg_dev = |values: Vec<f64>| -> f64 {
            exact
                .iter()
                .zip(values)
                .map(|(e, v)| (e - v).abs())
                .sum::<f64>()
                / exact.len() as f64
        };
        let dev_raw = avg_dev(records.iter().map(|r| r.z_raw).collect());
        let dev_readout = avg_dev(records.iter().map(|r| r.z_readout.unwrap()).collect());
        let dev_full = avg_dev(records.iter().map(|r| r.z_full.unwrap()).collect());

        if dev_readout < dev_full {
            problems.push(format!(
                "n={n}: dev_readout {dev_readout:.4} < dev_full {dev_full:.4}"
            ));
        }
        let recovery = (dev_raw - dev_readout) / (dev_raw - dev_full);
        if !recovery.is_finite() || recovery >= 0.3 {
            problems.push(format!("n={n}: readout recovery {recovery:.3} >= 0.3"));
        }
        let _ = write!(recoveries, "n={n}: {:.1}% ", recovery * 100.0);
    }
    if problems.is_empty() {
        Ok(format!("readout recovery {}< 30%", recoveries))
    } else {
        Err(problems.join("; "))
    }
}

/// Zero-noise full calibration is the identity on both backends.
fn criterion_6() -> Result<String, String> {
    let spec = AnsatzSpec::default_chain(2);
    let idp = identity_params(&spec);
    let noiseless = NoiseModel::noiseless();

    let dens = build_full_calibration(&spec, &idp, &noiseless, Backend::Density, None)
        .map_err(|e| e.to_string())?;
    let mut worst_dens: f64 = 0.0;
    for i in 0..32 {
        for j in 0..32 {
            let want = if i == j { 1.0 } else { 0.0 };
            worst_dens = worst_dens.max((dens.entry(j, i) - want).abs());
        }
    }
    if worst_dens > 1e-12 {
        return Err(format!(
            "density calibration off identity by {worst_dens:.3e}"
        ));
    }

    let plan = ShotPlan::new(32000, derive_seed(SEED, 0xCA1)).map_err(|e| e.to_string())?;
    let traj = build_full_calibration(&spec, &idp, &noiseless, Backend::Trajectory, Some(&plan))
        .map_err(|e| e.to_string())?;
    let shots = 32000f64;
    let mut worst_sigma: f64 = 0.0;
    for i in 0..32 {
        for j in 0..32 {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = traj.entry(j, i);
            // 3-sigma multinomial bound around the true entry (0 or 1; the
            // binomial variance vanishes, so any deviation is a failure
            // beyond floating-point dust).
            let sigma = (want * (1.0 - want) / shots).sqrt();
            let excess = ((got - want).abs() - 3.0 * sigma).max(0.0);
            worst_sigma = worst_sigma.max(excess);
        }
    }
    if worst_sigma > 1e-12 {
        return Err(format!(
            "trajectory calibration violates 3-sigma bounds by {worst_sigma:.3e}"
        ));
    }
    Ok(format!(
        "density max |M - I| = {worst_dens:.1e}, trajectory within multinomial bounds"
    ))
}

/// mitigate(M v, M) recovers v for 100 random probability vectors.
fn criterion_7() -> Result<String, String> {
    let spec = AnsatzSpec::default_chain(2);
    let idp = identity_params(&spec);
    let noise = NoiseModel::new(0.012, 0.01).map_err(|e| e.to_string())?;
    let m = build_full_calibration(&spec, &idp, &noise, Backend::Density, None)
        .map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 0xF0));
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let raw: Vec<f64> = (0..32).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let v: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let noisy = OutcomeDistribution::probability(m.apply(&v)).map_err(|e| e.to_string())?;
        let back = mitigate(&noisy, &m, MitigationPolicy::Simplex).map_err(|e| e.to_string())?;
        for (got, want) in back.weights().iter().zip(&v) {
            worst = worst.max((got - want).abs());
        }
    }
    if worst > 1e-8 {
        return Err(format!("round-trip error {worst:.3e} > 1e-8"));
    }
    Ok(format!("max round-trip error {worst:.2e} over 100 vectors"))
}

/// Byte-identical CSV artifacts from repeated CLI runs with equal seeds,
/// including a rerun against a warm parameter cache.
fn criterion_8() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_spem");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config_path = dir.path().join("bench.conf");
    std::fs::write(
        &config_path,
        "layers = 2\nsteps = 6\nrestarts = 4\nmax_iterations = 300\nearly_stop_cost = 1e-6\n\
         backend = trajectory\nshots = 4000\nsweep_cx_errors = 0.003, 0.012\nsweep_layers = 2\n",
    )
    .map_err(|e| e.to_string())?;

    let invoke = |subcommand: &str, out: &std::path::Path| -> Result<(), String> {
        let status = std::process::Command::new(bin)
            .args([
                subcommand,
                "--config",
                config_path.to_str().unwrap(),
                "--seed",
                "7",
                "--out",
                out.to_str().unwrap(),
            ])
            .stdout(std::process::Stdio::null())
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("{subcommand} exited with {status}"));
        }
        Ok(())
    };

    for (subcommand, artifact) in [("run", "run.csv"), ("sweep", "sweep.csv")] {
        let out_a = dir.path().join(format!("{subcommand}-a"));
        let out_b = dir.path().join(format!("{subcommand}-b"));
        invoke(subcommand, &out_a)?;
        invoke(subcommand, &out_b)?;
        let bytes_a = std::fs::read(out_a.join(artifact)).map_err(|e| e.to_string())?;
        let bytes_b = std::fs::read(out_b.join(artifact)).map_err(|e| e.to_string())?;
        if bytes_a != bytes_b {
            return Err(format!("{artifact} differs between fresh runs"));
        }
        // Third run against out_a's populated cache: the cache-hit path must
        // reproduce the same bytes.
        invoke(subcommand, &out_a)?;
        let bytes_c = std::fs::read(out_a.join(artifact)).map_err(|e| e.to_string())?;
        if bytes_a != bytes_c {
            return Err(format!("{artifact} differs after cache-hit rerun"));
        }
    }
    Ok("run.csv and sweep.csv byte-identical across fresh and cached runs".to_string())
}

/// Numerics: expm against an eigendecomposition oracle (Hermitian and
/// similarity-transformed non-normal cases), psd_sqrt round trip, and
/// finite-difference gradients against step-halving extrapolation.
fn criterion_9() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, 0x99));
    let n = 8usize;
    let random = |rng: &mut ChaCha8Rng| {
        ComplexMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    };

    let mut worst_expm: f64 = 0.0;
    for scale in [0.5, 5.0, 50.0] {
        // Hermitian case: oracle via spectral decomposition.
        let a = random(&mut rng);
        let h = a.add(&a.adjoint()).scale(Complex64::new(0.5, 0.0));
        let h = h.scale(Complex64::new(scale / h.one_norm(), 0.0));
        let (vals, v) = herm_eig(&h).map_err(|e| e.to_string())?;
        let exp_diag = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(vals[i].exp(), 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let oracle = v.matmul(&exp_diag).matmul(&v.adjoint());
        let got = expm(&h).map_err(|e| e.to_string())?;
        worst_expm = worst_expm.max(got.fro_distance(&oracle) / oracle.frobenius_norm());

        // Non-normal case: A = S D S^-1 with known exponential S e^D S^-1.
        let (q1, _) = numkit::qr_positive(&random(&mut rng)).map_err(|e| e.to_string())?;
        let (q2, _) = numkit::qr_positive(&random(&mut rng)).map_err(|e| e.to_string())?;
        let stretch = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0 + i as f64 / (n - 1) as f64, 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let s = q1.matmul(&stretch).matmul(&q2);
        let d = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(
                    scale * (rng.random::<f64>() - 0.5),
                    scale * (rng.random::<f64>() - 0.5),
                )
            } else {
                Complex64::ZERO
            }
        });
        let exp_d = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                d[(i, i)].exp()
            } else {
                Complex64::ZERO
            }
        });
        // S D S^-1 and S e^D S^-1 through LU solves of S X = B.
        let solve_right = |b: &ComplexMatrix| -> Result<ComplexMatrix, String> {
            // X = S^-1 B column by column via real/imag splitting is
            // wasteful; reuse the complex LU through numkit::solve on the
            // adjoint system instead: X = (S^-1 B), solve S x = b per column.
            let mut x = ComplexMatrix::zeros(n, n);
            for col in 0..n {
                let rhs: Vec<Complex64> = (0..n).map(|r| b[(r, col)]).collect();
                let sol = numkit_complex_solve(&s, &rhs)?;
                for r in 0..n {
                    x[(r, col)] = sol[r];
                }
            }
            Ok(x)
        };
        let a_nn = s
            .matmul(&d)
            .matmul(&solve_right(&ComplexMatrix::identity(n))?);
        let oracle_nn = s
            .matmul(&exp_d)
            .matmul(&solve_right(&ComplexMatrix::identity(n))?);
        let got_nn = expm(&a_nn).map_err(|e| e.to_string())?;
        worst_expm = worst_expm.max(got_nn.fro_distance(&oracle_nn) / oracle_nn.frobenius_norm());
    }
    if worst_expm > 1e-9 {
        return Err(format!("expm relative error {worst_expm:.3e} > 1e-9"));
    }

    let mut worst_sqrt: f64 = 0.0;
    for _ in 0..5 {
        let b = random(&mut rng);
        let s0 = b.adjoint().matmul(&b);
        let s0 = s0.scale(Complex64::new(1.0 / s0.one_norm(), 0.0));
        let back = psd_sqrt(&s0.matmul(&s0)).map_err(|e| e.to_string())?;
        worst_sqrt = worst_sqrt.max(back.fro_distance(&s0));
    }
    if worst_sqrt > 1e-7 {
        return Err(format!("psd_sqrt round-trip error {worst_sqrt:.3e} > 1e-7"));
    }

    // Gradient check on the training cost of a small circuit.
    let spec = AnsatzSpec::chain(3, 1).map_err(|e| e.to_string())?;
    let tfi = TfiParams::new(2, 1.0, 1.5, -0.5).map_err(|e| e.to_string())?;
    let emb = embedded_evolution(&tfi, 4.0).map_err(|e| e.to_string())?;
    let target_col = emb.matrix.column(tfi.initial_state_index());
    let spec_c = spec.clone();
    let f = move |x: &[f64]| {
        let params = ParamVector::from_vec(&spec_c, x.to_vec()).expect("fixed length");
        let state = spem::circuit::apply_circuit_to_basis(&spec_c, &params, 3).expect("valid");
        (1.0 - numkit::vec_inner(&state, &target_col).norm()).max(0.0)
    };
    let mut point = vec![0.0; spec.param_count()];
    for (i, v) in point.iter_mut().enumerate() {
        *v = 0.3 * ((i as f64 * 0.7).sin());
    }
    let g1 = finite_diff_gradient(&f, &point, 1e-4);
    let g2 = finite_diff_gradient(&f, &point, 5e-5);
    let refined: Vec<f64> = g1
        .iter()
        .zip(&g2)
        .map(|(a, b)| (4.0 * b - a) / 3.0)
        .collect();
    let g = finite_diff_gradient(&f, &point, 1e-6);
    let mut worst_grad: f64 = 0.0;
    for (got, want) in g.iter().zip(&refined) {
        worst_grad = worst_grad.max((got - want).abs());
    }
    if worst_grad > 1e-5 {
        return Err(format!(
            "gradient extrapolation gap {worst_grad:.3e} > 1e-5"
        ));
    }

    Ok(format!(
        "expm rel {worst_expm:.1e}, psd_sqrt {worst_sqrt:.1e}, gradient {worst_grad:.1e}"
    ))
}

/// Complex linear solve through the public QR factorization (kept local to
/// the suite so the expm oracle stays independent of the expm code path).
fn numkit_complex_solve(s: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>, String> {
    let (q, r) = numkit::qr_positive(s).map_err(|e| e.to_string())?;
    let n = b.len();
    // y = Q^dag b, then back-substitute R x = y.
    let y = q.adjoint().mul_vec(b);
    let mut x = y;
    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in (k + 1)..n {
            acc -= r[(k, j)] * x[j];
        }
        x[k] = acc / r[(k, k)];
    }
    Ok(x)
}
