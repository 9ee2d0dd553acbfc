//! One runner per experiment kind.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde_json::json;

use super::config::{ExperimentKind, ExperimentSpec};
use super::output::{Cell, Table};
use super::stats::{linear_fit, mean_se, quantile, spearman};
use super::{Arm, GridPoint, RunOutput, TrialRecord};
use crate::ensemble::{build_power_pattern, build_sigma, equivalent_matrix, sample_noise, sample_sparse_signal, unitary_basis, Basis, PowerPattern};
use crate::error::{param, Result};
use crate::linalg::matvec;
use crate::recovery::{bpdn_solve, mse, SolverMode, SolverOptions};
use crate::rng::{Role, SeedNode};
use crate::spectra::{circulant_pair_extremes, restricted_eigs_sampled_gram, Gram, RestrictedSpectrum, SpectrumMethod};
use crate::theory::{achievable_delay_detail, ld_exponent, BoundConstants, DelayQuery};
use crate::{CMatrix, CVector};

pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    spec.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| param(format!("cannot start worker pool: {e}")))?;
    let workers = pool.current_num_threads();
    let partial = pool.install(|| match spec.kind {
        ExperimentKind::MseSweep | ExperimentKind::HomogVsInhomog => run_mse(spec),
        ExperimentKind::EigCdf => run_eig_cdf(spec),
        ExperimentKind::TailScaling | ExperimentKind::LdVerify => run_tail(spec),
        ExperimentKind::DelayCurve => run_delay(spec),
    })?;
    Ok(RunOutput {
        kind: spec.kind,
        spec_hash: spec.spec_hash(),
        master_seed: spec.master_seed,
        tables: partial.tables,
        records: partial.records,
        summary: partial.summary,
        solves: partial.solves,
        nonconverged: partial.nonconverged,
        elapsed: start.elapsed(),
        workers,
    })
}

/// Reruns one trial and returns its records at `grid_index` (one per arm).
/// For the tail kinds `trial` indexes the realizations of that grid point.
pub fn replay(spec: &ExperimentSpec, grid_index: usize, trial: u64) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let grid = grid_points(spec);
    if grid_index >= grid.len() {
        return Err(param(format!("grid index {grid_index} out of range ({} points)", grid.len())));
    }
    let records = match spec.kind {
        ExperimentKind::MseSweep | ExperimentKind::HomogVsInhomog => MseContext::new(spec)?.trial(trial)?,
        ExperimentKind::EigCdf => EigContext::new(spec)?.trial(trial)?,
        ExperimentKind::TailScaling | ExperimentKind::LdVerify => {
            let p = grid[grid_index];
            let ctx = TailContext::new(spec, p.n.expect("tail point has n"), p.k.expect("tail point has k"), p.d.expect("tail point has d"))?;
            let t0 = Instant::now();
            let (rho_max, rho_min) = ctx.realization(trial)?;
            vec![TrialRecord {
                experiment: spec.kind,
                grid_index,
                point: p,
                arm: None,
                trial,
                seed: ctx.node.child(trial).id(),
                mse: None,
                iterations: None,
                converged: None,
                residual: None,
                rho_max: Some(rho_max),
                rho_min: Some(rho_min),
                elapsed_us: t0.elapsed().as_micros() as u64,
            }]
        }
        ExperimentKind::DelayCurve => return Err(param("delay-curve is deterministic and has no trials")),
    };
    Ok(records.into_iter().filter(|r| r.grid_index == grid_index).collect())
}

/// Grid points in table order.
pub fn grid_points(spec: &ExperimentSpec) -> Vec<GridPoint> {
    let s = &spec.sweep;
    let mut out = Vec::new();
    match spec.kind {
        ExperimentKind::MseSweep | ExperimentKind::HomogVsInhomog => {
            for &k in &s.k {
                for &snr in &s.snr_db {
                    for &m in &s.m {
                        out.push(GridPoint { m: Some(m), k: Some(k), snr_db: Some(snr), ..Default::default() });
                    }
                }
            }
        }
        ExperimentKind::EigCdf => {
            for d in spec.d_values() {
                for &k in &s.k {
                    out.push(GridPoint { k: Some(k), d: Some(d), n: Some(spec.network.n), ..Default::default() });
                }
            }
        }
        ExperimentKind::TailScaling | ExperimentKind::LdVerify => {
            for &k in &s.k {
                for &t in &s.t {
                    for d in spec.d_values() {
                        for n in spec.n_values() {
                            out.push(GridPoint { k: Some(k), t: Some(t), d: Some(d), n: Some(n), ..Default::default() });
                        }
                    }
                }
            }
        }
        ExperimentKind::DelayCurve => {
            for &k in &s.k {
                for &snr in &s.snr_db {
                    for &eps in &s.epsilon {
                        out.push(GridPoint { k: Some(k), snr_db: Some(snr), epsilon: Some(eps), ..Default::default() });
                    }
                }
            }
        }
    }
    out
}

struct Partial {
    tables: Vec<Table>,
    records: Vec<TrialRecord>,
    summary: serde_json::Value,
    solves: u64,
    nonconverged: u64,
}

fn kind_node(spec: &ExperimentSpec) -> SeedNode {
    SeedNode::root(spec.master_seed).child_str(spec.kind.as_str())
}

/// `Σ` when the dense path is needed; the DFT path only uses `γ`.
fn sigma_for(pattern: &PowerPattern, psi: &Option<CMatrix>) -> Result<CMatrix> {
    match psi {
        Some(psi) => build_sigma(pattern, psi),
        None => Ok(CMatrix::zeros(0, 0)),
    }
}

fn dense_basis(basis: &Basis, n: usize) -> Result<Option<CMatrix>> {
    if matches!(basis, Basis::Dft) {
        Ok(None)
    } else {
        unitary_basis(n, basis).map(Some)
    }
}

fn snr_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

struct MseContext<'a> {
    spec: &'a ExperimentSpec,
    grid: Vec<GridPoint>,
    arms: Vec<Arm>,
    m_max: usize,
    psi: Option<CMatrix>,
}

impl<'a> MseContext<'a> {
    fn new(spec: &'a ExperimentSpec) -> Result<Self> {
        let arms = if spec.kind == ExperimentKind::HomogVsInhomog {
            vec![Arm::Homogeneous, Arm::Inhomogeneous]
        } else {
            vec![Arm::Network]
        };
        Ok(MseContext {
            spec,
            grid: grid_points(spec),
            arms,
            m_max: *spec.sweep.m.iter().max().expect("validated non-empty"),
            psi: dense_basis(&spec.network.basis, spec.network.n)?,
        })
    }

    fn trial(&self, trial: u64) -> Result<Vec<TrialRecord>> {
        let spec = self.spec;
        let n = spec.network.n;
        let node = kind_node(spec).child(trial);
        let config = spec.network.config(n, spec.sweep.k[0], None)?;
        let z_full = crate::ensemble::sample_z_tilde(self.m_max, n, config.p, &mut node.stream(Role::Channel))?;
        let noise = sample_noise(self.m_max, 1.0, &mut node.stream(Role::Noise));
        let mut signals = BTreeMap::new();
        for &k in &spec.sweep.k {
            let mut rng = node.child_str("signal").child(k as u64).stream(Role::Support);
            signals.insert(k, sample_sparse_signal(n, k, spec.amplitude, &mut rng)?.0);
        }
        let mut records = Vec::with_capacity(self.grid.len() * self.arms.len());
        for &arm in &self.arms {
            let pattern = match arm {
                Arm::Homogeneous => PowerPattern::new(vec![1.0; n], 0.0)?,
                Arm::Network | Arm::Inhomogeneous => build_power_pattern(&config, &mut node.stream(Role::Pattern))?,
            };
            let sigma = sigma_for(&pattern, &self.psi)?;
            let a_full = equivalent_matrix(&z_full, &sigma, &pattern, &config.basis);
            for (gi, p) in self.grid.iter().enumerate() {
                let t0 = Instant::now();
                let (m, k, snr_db) = (p.m.unwrap(), p.k.unwrap(), p.snr_db.unwrap());
                let x = &signals[&k];
                let scale = (self.m_max as f64 / m as f64).sqrt();
                let a_m: CMatrix = a_full.rows(0, m) * Complex::new(scale, 0.0);
                let std = if snr_db.is_infinite() { 0.0 } else { (1.0 / (m as f64 * snr_linear(snr_db))).sqrt() };
                let mut y = CVector::zeros(m);
                matvec(&a_m, x.as_slice(), y.as_mut_slice());
                for i in 0..m {
                    y[i] += noise[i] * std;
                }
                let sv = &spec.solver;
                let options = SolverOptions {
                    mode: SolverMode::Constrained { eta: sv.noise_slack * (m as f64).sqrt() * std },
                    max_iterations: sv.max_iterations,
                    tolerance: sv.tolerance,
                    step_rule: sv.step_rule,
                    continuation: true,
                };
                let mut solver_rng = node.child(gi as u64).stream(Role::Solver);
                let result = bpdn_solve(&a_m, &y, &options, Some(&mut solver_rng))?;
                records.push(TrialRecord {
                    experiment: spec.kind,
                    grid_index: gi,
                    point: *p,
                    arm: Some(arm),
                    trial,
                    seed: node.id(),
                    mse: Some(mse(&result.x_hat, x)),
                    iterations: Some(result.iterations),
                    converged: Some(result.converged),
                    residual: Some(result.final_residual),
                    rho_max: None,
                    rho_min: None,
                    elapsed_us: t0.elapsed().as_micros() as u64,
                });
            }
        }
        Ok(records)
    }
}

fn collect_trials<T: Send>(count: u64, f: impl Fn(u64) -> Result<Vec<T>> + Sync + Send) -> Result<Vec<T>> {
    let nested: Vec<Vec<T>> = (0..count).into_par_iter().map(f).collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| (a.grid_index, a.arm, a.trial).cmp(&(b.grid_index, b.arm, b.trial)));
}

fn run_mse(spec: &ExperimentSpec) -> Result<Partial> {
    let ctx = MseContext::new(spec)?;
    let mut records = collect_trials(spec.trials, |t| ctx.trial(t))?;
    sort_records(&mut records);
    let solves = records.len() as u64;
    let nonconverged = records.iter().filter(|r| r.converged == Some(false)).count() as u64;

    // mse[arm][grid][trial]
    let g = ctx.grid.len();
    let trials = spec.trials as usize;
    let mut by_arm: BTreeMap<Arm, Vec<Vec<f64>>> = BTreeMap::new();
    let mut iters: BTreeMap<Arm, Vec<Vec<f64>>> = BTreeMap::new();
    let mut failed: BTreeMap<Arm, Vec<u64>> = BTreeMap::new();
    for &arm in &ctx.arms {
        by_arm.insert(arm, vec![Vec::with_capacity(trials); g]);
        iters.insert(arm, vec![Vec::with_capacity(trials); g]);
        failed.insert(arm, vec![0; g]);
    }
    let mean_ms = records.iter().map(|r| r.elapsed_us as f64).sum::<f64>() / records.len().max(1) as f64 / 1000.0;
    for r in &records {
        let arm = r.arm.expect("mse records carry an arm");
        by_arm.get_mut(&arm).unwrap()[r.grid_index].push(r.mse.unwrap());
        iters.get_mut(&arm).unwrap()[r.grid_index].push(r.iterations.unwrap() as f64);
        if r.converged == Some(false) {
            failed.get_mut(&arm).unwrap()[r.grid_index] += 1;
        }
    }

    let mut tables = Vec::new();
    let summary;
    if spec.kind == ExperimentKind::MseSweep {
        let mse_g = &by_arm[&Arm::Network];
        let mut main = Table::new(
            "main",
            &["k", "snr_db", "m", "trials", "mse_mean", "mse_se", "iterations_mean", "nonconverged"],
        );
        let mut means = Vec::with_capacity(g);
        for (gi, p) in ctx.grid.iter().enumerate() {
            let (mean, se) = mean_se(&mse_g[gi]);
            means.push(mean);
            main.push(vec![
                p.k.into(),
                p.snr_db.into(),
                p.m.into(),
                trials.into(),
                mean.into(),
                se.into(),
                mean_se(&iters[&Arm::Network][gi]).0.into(),
                failed[&Arm::Network][gi].into(),
            ]);
        }
        let mut trend = Table::new("trend", &["k", "snr_db", "points", "spearman_m_mse"]);
        let mut curves = Vec::new();
        for &k in &spec.sweep.k {
            for &snr in &spec.sweep.snr_db {
                let idx: Vec<usize> =
                    (0..g).filter(|&i| ctx.grid[i].k == Some(k) && ctx.grid[i].snr_db == Some(snr)).collect();
                let ms: Vec<f64> = idx.iter().map(|&i| ctx.grid[i].m.unwrap() as f64).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| means[i]).collect();
                let rho = spearman(&ms, &ys);
                trend.push(vec![k.into(), snr.into(), idx.len().into(), rho.into()]);
                curves.push(json!({"k": k, "snr_db": snr, "spearman": rho}));
            }
        }
        tables.push(main);
        tables.push(trend);
        summary = json!({"curves": curves, "mean_solve_ms": mean_ms});
    } else {
        let hom = &by_arm[&Arm::Homogeneous];
        let inh = &by_arm[&Arm::Inhomogeneous];
        let mut main = Table::new(
            "main",
            &[
                "k",
                "snr_db",
                "m",
                "trials",
                "mse_homogeneous",
                "se_homogeneous",
                "mse_inhomogeneous",
                "se_inhomogeneous",
                "gap",
                "gap_se",
                "nonconverged",
            ],
        );
        for (gi, p) in ctx.grid.iter().enumerate() {
            let (mh, sh) = mean_se(&hom[gi]);
            let (mi, si) = mean_se(&inh[gi]);
            let diffs: Vec<f64> = inh[gi].iter().zip(&hom[gi]).map(|(a, b)| a - b).collect();
            let (gap, gap_se) = mean_se(&diffs);
            main.push(vec![
                p.k.into(),
                p.snr_db.into(),
                p.m.into(),
                trials.into(),
                mh.into(),
                sh.into(),
                mi.into(),
                si.into(),
                gap.into(),
                gap_se.into(),
                (failed[&Arm::Homogeneous][gi] + failed[&Arm::Inhomogeneous][gi]).into(),
            ]);
        }
        // Per-trial gap averaged over the m grid, then its mean and SE.
        let mut gap_table = Table::new("gap", &["k", "snr_db", "points", "mean_gap", "mean_gap_se"]);
        let mut gaps = Vec::new();
        for &k in &spec.sweep.k {
            for &snr in &spec.sweep.snr_db {
                let idx: Vec<usize> =
                    (0..g).filter(|&i| ctx.grid[i].k == Some(k) && ctx.grid[i].snr_db == Some(snr)).collect();
                let per_trial: Vec<f64> = (0..trials)
                    .map(|t| idx.iter().map(|&i| inh[i][t] - hom[i][t]).sum::<f64>() / idx.len() as f64)
                    .collect();
                let (mean, se) = mean_se(&per_trial);
                gap_table.push(vec![k.into(), snr.into(), idx.len().into(), mean.into(), se.into()]);
                gaps.push(json!({"k": k, "snr_db": snr, "mean_gap": mean, "mean_gap_se": se}));
            }
        }
        tables.push(main);
        tables.push(gap_table);
        summary = json!({"gaps": gaps, "mean_solve_ms": mean_ms});
    }
    Ok(Partial { tables, records, summary, solves, nonconverged })
}

struct EigContext<'a> {
    spec: &'a ExperimentSpec,
    grid: Vec<GridPoint>,
    ds: Vec<f64>,
    psi: Option<CMatrix>,
    fft: Arc<dyn Fft<f64>>,
}

impl<'a> EigContext<'a> {
    fn new(spec: &'a ExperimentSpec) -> Result<Self> {
        let n = spec.network.n;
        Ok(EigContext {
            spec,
            grid: grid_points(spec),
            ds: spec.d_values(),
            psi: dense_basis(&spec.network.basis, n)?,
            fft: FftPlanner::new().plan_fft_forward(n),
        })
    }

    fn trial(&self, trial: u64) -> Result<Vec<TrialRecord>> {
        let spec = self.spec;
        let n = spec.network.n;
        let node = kind_node(spec).child(trial);
        let mut records = Vec::with_capacity(self.grid.len());
        let nk = spec.sweep.k.len();
        for (di, &d) in self.ds.iter().enumerate() {
            let d_node = node.child_str("d").child(di as u64);
            let uses_d = if spec.network.homogeneity().is_some() { Some(d) } else { None };
            let config = spec.network.config(n, spec.sweep.k[0], uses_d)?;
            let pattern = build_power_pattern(&config, &mut d_node.stream(Role::Pattern))?;
            let gram = match &self.psi {
                None => Gram::dft_circulant_with(&pattern.gamma, self.fft.as_ref())?,
                Some(psi) => Gram::from_sigma(&build_sigma(&pattern, psi)?),
            };
            for (ki, &k) in spec.sweep.k.iter().enumerate() {
                let t0 = Instant::now();
                let mut rng = d_node.child_str("k").child(k as u64).stream(Role::Spectrum);
                let s = restricted_eigs_sampled_gram(&gram, k, spec.sweep.supports, &mut rng)?;
                let gi = di * nk + ki;
                records.push(TrialRecord {
                    experiment: spec.kind,
                    grid_index: gi,
                    point: self.grid[gi],
                    arm: None,
                    trial,
                    seed: node.id(),
                    mse: None,
                    iterations: None,
                    converged: None,
                    residual: None,
                    rho_max: Some(s.rho_max),
                    rho_min: Some(s.rho_min),
                    elapsed_us: t0.elapsed().as_micros() as u64,
                });
            }
        }
        Ok(records)
    }
}

const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

fn run_eig_cdf(spec: &ExperimentSpec) -> Result<Partial> {
    let ctx = EigContext::new(spec)?;
    let mut records = collect_trials(spec.trials, |t| ctx.trial(t))?;
    sort_records(&mut records);
    let mut main = Table::new(
        "main",
        &[
            "d",
            "k",
            "realizations",
            "supports",
            "rho_max_min",
            "rho_max_q05",
            "rho_max_q25",
            "rho_max_median",
            "rho_max_q75",
            "rho_max_q95",
            "rho_min_q05",
            "rho_min_q25",
            "rho_min_median",
            "rho_min_q75",
            "rho_min_q95",
            "rho_min_max",
        ],
    );
    let mut points = Vec::new();
    for (gi, p) in ctx.grid.iter().enumerate() {
        let mut hi: Vec<f64> = records.iter().filter(|r| r.grid_index == gi).map(|r| r.rho_max.unwrap()).collect();
        let mut lo: Vec<f64> = records.iter().filter(|r| r.grid_index == gi).map(|r| r.rho_min.unwrap()).collect();
        hi.sort_by(f64::total_cmp);
        lo.sort_by(f64::total_cmp);
        let mut row: Vec<Cell> = vec![p.d.into(), p.k.into(), hi.len().into(), spec.sweep.supports.into(), hi[0].into()];
        row.extend(QUANTILES.iter().map(|&q| Cell::from(quantile(&hi, q))));
        row.extend(QUANTILES.iter().map(|&q| Cell::from(quantile(&lo, q))));
        row.push(lo[lo.len() - 1].into());
        main.push(row);
        points.push(json!({
            "d": p.d, "k": p.k,
            "rho_max_median": quantile(&hi, 0.5),
            "rho_min_median": quantile(&lo, 0.5),
            "rho_max_min": hi[0],
        }));
    }
    Ok(Partial { tables: vec![main], records, summary: json!({"points": points}), solves: 0, nonconverged: 0 })
}

/// Realizations of `(ρ_max, ρ_min)` at one `(n, k, d)`.
struct TailContext<'a> {
    spec: &'a ExperimentSpec,
    n: usize,
    k: usize,
    d: f64,
    node: SeedNode,
    psi: Option<CMatrix>,
    fft: Arc<dyn Fft<f64>>,
}

impl<'a> TailContext<'a> {
    fn new(spec: &'a ExperimentSpec, n: usize, k: usize, d: f64) -> Result<Self> {
        let node = kind_node(spec).child_str(&format!("k={k};d={d};n={n}"));
        Ok(TailContext {
            spec,
            n,
            k,
            d,
            node,
            psi: dense_basis(&spec.network.basis, n)?,
            fft: FftPlanner::new().plan_fft_forward(n),
        })
    }

    /// `k = 2` over the DFT basis is exact; otherwise the extremes over the
    /// singletons and `supports` sampled supports.
    fn realization(&self, trial: u64) -> Result<(f64, f64)> {
        let node = self.node.child(trial);
        let uses_d = self.spec.network.homogeneity().map(|_| self.d);
        let config = self.spec.network.config(self.n, self.k, uses_d)?;
        let pattern = build_power_pattern(&config, &mut node.stream(Role::Pattern))?;
        let gram = match &self.psi {
            None => Gram::dft_circulant_with(&pattern.gamma, self.fft.as_ref())?,
            Some(psi) => Gram::from_sigma(&build_sigma(&pattern, psi)?),
        };
        if let (Gram::Circulant(c), 2) = (&gram, self.k) {
            return Ok(circulant_pair_extremes(c));
        }
        let s = restricted_eigs_sampled_gram(&gram, self.k, self.spec.sweep.supports, &mut node.stream(Role::Spectrum))?;
        Ok((s.rho_max, s.rho_min))
    }
}

struct TailEstimate {
    trials: u64,
    exceedances: u64,
}

/// Adaptive estimates of `P(ρ_max > 1 + t)` for every `t`, sharing the
/// realizations. Each threshold stops at the first batch boundary with at
/// least `target_exceedances` hits, or at the trial cap.
fn tail_estimates(spec: &ExperimentSpec, ctx: &TailContext, ts: &[f64]) -> Result<Vec<TailEstimate>> {
    let cap = spec.trials;
    let batch = spec.tail.batch;
    let mut est: Vec<TailEstimate> = ts.iter().map(|_| TailEstimate { trials: 0, exceedances: 0 }).collect();
    let mut done = vec![false; ts.len()];
    let mut used = 0u64;
    while used < cap && done.iter().any(|d| !d) {
        let size = batch.min(cap - used);
        let rho: Vec<f64> = (used..used + size)
            .into_par_iter()
            .map(|t| ctx.realization(t).map(|r| r.0))
            .collect::<Result<_>>()?;
        used += size;
        for (i, &t) in ts.iter().enumerate() {
            if done[i] {
                continue;
            }
            est[i].trials = used;
            est[i].exceedances += rho.iter().filter(|r| **r > 1.0 + t).count() as u64;
            done[i] = est[i].exceedances >= spec.tail.target_exceedances;
        }
    }
    Ok(est)
}

fn run_tail(spec: &ExperimentSpec) -> Result<Partial> {
    let ts = spec.sweep.t.clone();
    let ds = spec.d_values();
    let ns = spec.n_values();
    // (k, d, n) → one estimate per t
    let mut estimates: BTreeMap<(usize, usize, usize), Vec<TailEstimate>> = BTreeMap::new();
    for &k in &spec.sweep.k {
        for (di, &d) in ds.iter().enumerate() {
            for &n in &ns {
                let ctx = TailContext::new(spec, n, k, d)?;
                estimates.insert((k, di, n), tail_estimates(spec, &ctx, &ts)?);
            }
        }
    }
    let ld = spec.kind == ExperimentKind::LdVerify;
    let mut columns = vec!["k", "t", "d", "n", "trials", "exceedances", "p_hat", "log_p", "low_confidence", "in_fit"];
    if ld {
        columns.extend(["log_p_over_n", "bound_log_over_n", "rule_of_three_log_over_n", "consistent"]);
    }
    let mut main = Table::new("main", &columns);
    let mut fit = Table::new(
        "fit",
        &["k", "t", "d", "points", "slope", "intercept", "slope_ratio", "expected_ratio", "ratio_error"],
    );
    let n_fit = ((ns.len() as f64 * spec.tail.fit_fraction).ceil() as usize).max(1);
    let mut sorted_ns = ns.clone();
    sorted_ns.sort_unstable();
    let fit_ns: Vec<usize> = sorted_ns[sorted_ns.len() - n_fit..].to_vec();
    let largest_n = *sorted_ns.last().expect("validated non-empty");
    let mut fits = Vec::new();
    let mut ld_checks = Vec::new();

    for &k in &spec.sweep.k {
        for (ti, &t) in ts.iter().enumerate() {
            let mut slopes: Vec<Option<f64>> = Vec::new();
            for (di, &d) in ds.iter().enumerate() {
                let (mut xs, mut ys) = (Vec::new(), Vec::new());
                for &n in &ns {
                    let e = &estimates[&(k, di, n)][ti];
                    let p_hat = e.exceedances as f64 / e.trials as f64;
                    let log_p = if e.exceedances > 0 { Some(p_hat.ln()) } else { None };
                    let in_fit = log_p.is_some() && fit_ns.contains(&n);
                    if in_fit {
                        xs.push(n as f64);
                        ys.push(log_p.unwrap());
                    }
                    let mut row: Vec<Cell> = vec![
                        k.into(),
                        t.into(),
                        d.into(),
                        n.into(),
                        e.trials.into(),
                        e.exceedances.into(),
                        p_hat.into(),
                        log_p.into(),
                        (e.exceedances < spec.tail.min_exceedances).into(),
                        in_fit.into(),
                    ];
                    if ld {
                        let e_kt = ld_exponent(k, t);
                        let bound = -d * d * e_kt * e_kt;
                        let log_over_n = log_p.map_or(f64::NEG_INFINITY, |l| l / n as f64);
                        let rule3 = (3.0 / e.trials as f64).min(1.0).ln() / n as f64;
                        let consistent = log_over_n <= bound + spec.tail.slack;
                        row.extend([log_over_n.into(), bound.into(), rule3.into(), consistent.into()]);
                        if n == largest_n {
                            ld_checks.push(json!({
                                "k": k, "t": t, "d": d, "n": n,
                                "trials": e.trials, "exceedances": e.exceedances,
                                "log_p_over_n": log_p.map(|l| l / n as f64),
                                "bound_log_over_n": bound,
                                "rule_of_three_log_over_n": rule3,
                                "consistent": consistent,
                            }));
                        }
                    }
                    main.push(row);
                }
                let line = linear_fit(&xs, &ys);
                slopes.push(line.map(|l| l.1));
                let first = slopes[0];
                let ratio = match (line, first) {
                    (Some((_, s)), Some(s0)) => Some(s / s0),
                    _ => None,
                };
                let expected = (d / ds[0]).powi(2);
                fit.push(vec![
                    k.into(),
                    t.into(),
                    d.into(),
                    xs.len().into(),
                    line.map(|l| l.1).into(),
                    line.map(|l| l.0).into(),
                    ratio.into(),
                    expected.into(),
                    ratio.map(|r| r / expected - 1.0).into(),
                ]);
                fits.push(json!({
                    "k": k, "t": t, "d": d, "points": xs.len(),
                    "slope": line.map(|l| l.1), "slope_ratio": ratio, "expected_ratio": expected,
                }));
            }
        }
    }
    let total: u64 = estimates.values().map(|v| v.iter().map(|e| e.trials).max().unwrap_or(0)).sum();
    Ok(Partial {
        tables: vec![main, fit],
        records: Vec::new(),
        summary: json!({"fits": fits, "ld_checks": ld_checks, "realizations": total, "fit_n": fit_ns}),
        solves: 0,
        nonconverged: 0,
    })
}

fn run_delay(spec: &ExperimentSpec) -> Result<Partial> {
    let b = &spec.bounds;
    let constants = BoundConstants::new(b.c1, b.c2)?;
    let mut main = Table::new(
        "main",
        &["k", "snr_db", "epsilon", "epsilon_th", "delta_star", "beta_tilde", "delay"],
    );
    for p in grid_points(spec) {
        let k = p.k.unwrap();
        let query = DelayQuery {
            epsilon: p.epsilon.unwrap(),
            snr_ave: snr_linear(p.snr_db.unwrap()),
            spectrum: RestrictedSpectrum::new(k, b.rho_max, b.rho_min, SpectrumMethod::ExactEnumeration, 0),
            k,
            n: spec.network.n,
            p: spec.network.p,
            constants,
        };
        let e = achievable_delay_detail(&query)?;
        main.push(vec![
            k.into(),
            p.snr_db.into(),
            p.epsilon.into(),
            e.epsilon_th.into(),
            e.delta_star.into(),
            e.beta_tilde.into(),
            e.delay.into(),
        ]);
    }
    Ok(Partial { tables: vec![main], records: Vec::new(), summary: json!({}), solves: 0, nonconverged: 0 })
}
