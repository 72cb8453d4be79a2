//! Clarity per unit energy as a function of the sensing time `T`.

use std::path::Path;

use anyhow::Result;
use clarity_core::belief::ClosedFormCoefficients;
use clarity_core::info::ClarityValue;
use serde::Serialize;

use super::Report;
use crate::config::ScenarioConfig;
use crate::output::CsvWriter;

/// `E(T) = p₀ + p₁ T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyModel {
    pub p0: f64,
    pub p1: f64,
}

impl EnergyModel {
    pub fn energy(&self, t: f64) -> f64 {
        self.p0 + self.p1 * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    pub t_star: f64,
    pub q_at_t_star: f64,
    pub energy_at_t_star: f64,
    pub ratio_at_t_star: f64,
    /// The ratio still increases at the end of the sweep (e.g. `p₁ = 0`);
    /// `t_star` is then the sweep end, not an interior optimum.
    pub unbounded: bool,
    pub k: f64,
    pub q_inf: f64,
    pub gain_10_20: f64,
    pub gain_160_320: f64,
}

pub struct EnergySweep {
    pub times: Vec<f64>,
    pub clarity: Vec<f64>,
    pub energy: Vec<f64>,
    pub summary: EnergySummary,
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub fn sweep(cfg: &ScenarioConfig) -> Result<EnergySweep> {
    let (gain, noise, process_noise) = (cfg.real("channel.C"), cfg.real("channel.R"), cfg.real("channel.Q"));
    let q0 = ClarityValue::new(cfg.real("clarity.q0"))?;
    let model = EnergyModel {
        p0: cfg.real("energy.p0"),
        p1: cfg.real("energy.p1"),
    };
    if model.p0 == 0.0 && model.p1 == 0.0 {
        anyhow::bail!("energy model is identically zero; the clarity/energy ratio is undefined");
    }
    let curve = ClosedFormCoefficients::new(q0, gain, noise, process_noise)?;
    let ratio = |t: f64| curve.eval(t) / model.energy(t);

    let step = cfg.real("sweep.t_step");
    let n = (cfg.real("sweep.t_max") / step).floor() as usize;
    if n < 3 {
        anyhow::bail!("sweep needs at least three points; increase sweep.t_max or reduce sweep.t_step");
    }
    let times: Vec<f64> = (1..=n).map(|i| i as f64 * step).collect();
    let clarity: Vec<f64> = times.iter().map(|&t| curve.eval(t)).collect();
    let energy: Vec<f64> = times.iter().map(|&t| model.energy(t)).collect();
    let ratios: Vec<f64> = clarity.iter().zip(&energy).map(|(q, e)| q / e).collect();
    let best = (0..n).fold(0, |b, i| if ratios[i] > ratios[b] { i } else { b });

    let unbounded = best == n - 1;
    let t_star = if unbounded {
        times[n - 1]
    } else {
        let lo = if best == 0 { 0.0 } else { times[best - 1] };
        golden_section_max(ratio, lo, times[best + 1], 1e-9)
    };
    let summary = EnergySummary {
        t_star,
        q_at_t_star: curve.eval(t_star),
        energy_at_t_star: model.energy(t_star),
        ratio_at_t_star: ratio(t_star),
        unbounded,
        k: curve.k,
        q_inf: curve.q_inf,
        gain_10_20: curve.eval(20.0) / curve.eval(10.0) - 1.0,
        gain_160_320: curve.eval(320.0) / curve.eval(160.0) - 1.0,
    };
    Ok(EnergySweep {
        times,
        clarity,
        energy,
        summary,
    })
}

pub fn run(cfg: &ScenarioConfig, dir: &Path) -> Result<Report> {
    let sweep = sweep(cfg)?;
    let mut csv = CsvWriter::create(
        &dir.join("pareto.csv"),
        &[("T", "s"), ("q", ""), ("energy", "J"), ("clarity_per_energy", "1/J"), ("q_inf", "")],
    )?;
    for i in 0..sweep.times.len() {
        csv.row(&[
            sweep.times[i],
            sweep.clarity[i],
            sweep.energy[i],
            sweep.clarity[i] / sweep.energy[i],
            sweep.summary.q_inf,
        ])?;
    }
    let pareto = csv.finish()?;
    if sweep.summary.unbounded {
        log::warn!("clarity/energy ratio is still increasing at T = {} s; optimum unbounded", sweep.summary.t_star);
    }
    log::info!("T* = {:.3} s, q(T*) = {:.4}", sweep.summary.t_star, sweep.summary.q_at_t_star);
    Ok(Report {
        results: serde_json::to_value(&sweep.summary)?,
        files: vec![pareto],
    })
}
