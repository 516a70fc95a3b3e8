//! Deterministic synthetic ground truth.
//!
//! Stands in for a real design-space sweep: every synthetic design is
//! "synthesized" at each requested clock period on each device, producing a
//! canonical HLS report, and then "implemented" under both optimization goals
//! by a hidden function that maps the report to post-implementation
//! LUT/FF/DSP/BRAM and Fmax.
//!
//! The hidden function (power-law inflation of the HLS estimates with
//! saturating interaction terms, plus a critical-path model for Fmax) is a
//! test oracle with the right structural properties. It is not a model of
//! real FPGA tools.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Category, Dataset, DatasetError, Goal, Sample, Targets};
use crate::manifest::{flatten, Manifest};
use crate::report::{HlsReport, MemoryStats, MuxStats, OpKind, OpStat, ResourceCounts, UtilComponent, Utilization};
use crate::rng::{mix_seed, SeededRng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceClass {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub id: String,
    pub class: DeviceClass,
    pub available: ResourceCounts,
    /// Logic delay multiplier relative to the fastest part.
    pub delay_factor: f64,
}

/// Parameters of the synthetic oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub devices: Vec<DeviceProfile>,
    /// Seeds the per-category hidden coefficients.
    pub coefficient_seed: u64,
    /// Relative standard deviation of the multiplicative target noise.
    pub noise: f64,
    /// Area multiplier applied under the TPA goal.
    pub tpa_area_factor: f64,
    /// Fmax multiplier applied under the TPA goal.
    pub tpa_fmax_factor: f64,
    /// Requested clock periods in ns.
    pub clock_periods: Vec<f64>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            devices: vec![
                DeviceProfile {
                    id: "xc7a100tfgg484-3".into(),
                    class: DeviceClass::Low,
                    available: ResourceCounts {
                        lut: 63_400,
                        ff: 126_800,
                        dsp: 240,
                        bram: 270,
                    },
                    delay_factor: 1.0,
                },
                DeviceProfile {
                    id: "xc7k420tffv901-3".into(),
                    class: DeviceClass::Medium,
                    available: ResourceCounts {
                        lut: 260_600,
                        ff: 521_200,
                        dsp: 1_680,
                        bram: 1_670,
                    },
                    delay_factor: 0.86,
                },
                DeviceProfile {
                    id: "xc7vx980tffg1930-2".into(),
                    class: DeviceClass::High,
                    available: ResourceCounts {
                        lut: 612_000,
                        ff: 1_224_000,
                        dsp: 3_600,
                        bram: 3_000,
                    },
                    delay_factor: 0.93,
                },
            ],
            coefficient_seed: 0x5EED_C0EF,
            noise: 0.05,
            tpa_area_factor: 0.82,
            tpa_fmax_factor: 0.9,
            clock_periods: vec![1.0, 2.0, 4.0, 5.0, 10.0],
        }
    }
}

impl OracleSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.into()));
        if self.devices.len() != 3 {
            return bad("exactly three device profiles are required");
        }
        for w in self.devices.windows(2) {
            let (a, b) = (&w[0].available, &w[1].available);
            if !(a.lut < b.lut && a.ff < b.ff && a.dsp < b.dsp && a.bram < b.bram) {
                return bad("device availabilities must increase low < medium < high");
            }
        }
        if self.devices.iter().any(|d| d.available.lut == 0 || d.delay_factor <= 0.0) {
            return bad("device availabilities and delay factors must be positive");
        }
        if !(self.noise >= 0.0 && self.noise < 0.3) {
            return bad("noise must be in [0, 0.3)");
        }
        if self.clock_periods.is_empty() || self.clock_periods.iter().any(|p| !(*p > 0.0)) {
            return bad("clock periods must be positive");
        }
        if !(self.tpa_area_factor > 0.0 && self.tpa_fmax_factor > 0.0) {
            return bad("goal factors must be positive");
        }
        Ok(())
    }
}

/// Operation widths the generator emits.
pub const OP_WIDTHS: [u32; 4] = [8, 16, 32, 64];

/// Per-category hidden coefficients.
#[derive(Debug, Clone, Copy)]
struct Regime {
    lut_scale: f64,
    lut_exp: f64,
    lut_mux: f64,
    ff_scale: f64,
    ff_exp: f64,
    ff_pipe: f64,
    dsp_scale: f64,
    bram_scale: f64,
    path_scale: f64,
    path_size: f64,
    /// Weight of the nonlinear terms; small for the "mathematical" regime.
    nonlinearity: f64,
}

fn regimes(seed: u64) -> [Regime; 4] {
    let mut out = [Regime {
        lut_scale: 0.0,
        lut_exp: 0.0,
        lut_mux: 0.0,
        ff_scale: 0.0,
        ff_exp: 0.0,
        ff_pipe: 0.0,
        dsp_scale: 0.0,
        bram_scale: 0.0,
        path_scale: 0.0,
        path_size: 0.0,
        nonlinearity: 0.0,
    }; 4];
    for (i, cat) in Category::ALL.into_iter().enumerate() {
        let mut r = SeededRng::derive(seed, i as u64);
        let nonlinearity = if cat == Category::Math { 0.25 } else { r.uniform_in(0.8, 1.2) };
        out[i] = Regime {
            lut_scale: r.uniform_in(1.1, 1.6),
            lut_exp: 1.0 - nonlinearity * r.uniform_in(0.03, 0.08),
            lut_mux: nonlinearity * r.uniform_in(0.25, 0.5),
            ff_scale: r.uniform_in(1.05, 1.4),
            ff_exp: 1.0 - nonlinearity * r.uniform_in(0.02, 0.06),
            ff_pipe: nonlinearity * r.uniform_in(0.2, 0.45),
            dsp_scale: r.uniform_in(0.9, 1.2),
            bram_scale: r.uniform_in(0.9, 1.3),
            path_scale: r.uniform_in(0.85, 1.1),
            path_size: nonlinearity * r.uniform_in(0.25, 0.45),
            nonlinearity,
        };
    }
    out
}

/// Design-level latent parameters.
#[derive(Debug, Clone)]
struct Design {
    name: String,
    category: Category,
    ops: Vec<OpStat>,
    mem_words: u64,
    mem_width: u64,
    mux_inputs: u64,
    mux_width: u64,
    /// Fraction of the datapath inside sub-module instances.
    instance_frac: f64,
    /// Resource sharing factor applied by binding.
    share: f64,
    /// Unpipelined logic depth in ns on the fastest device.
    logic_delay: f64,
    /// How close to the requested clock the scheduler aims.
    aggressiveness: f64,
    uncertainty_ratio: f64,
    memory_partition: f64,
}

/// Presence probability and log-mean count for each (category, kind).
fn op_profile(cat: Category, kind: OpKind) -> (f64, f64) {
    use Category::*;
    use OpKind::*;
    match (cat, kind) {
        (Ml, Add) => (0.95, 2.6),
        (Ml, Mul) => (0.95, 2.3),
        (Ml, Cmp) => (0.7, 1.5),
        (Ml, Sub) => (0.5, 1.2),
        (Ml, Div) => (0.2, 0.5),
        (Ml, Logic) => (0.4, 1.0),
        (Ml, Shift) => (0.4, 1.0),
        (ImageVideo, Add) => (0.95, 2.4),
        (ImageVideo, Sub) => (0.8, 1.8),
        (ImageVideo, Cmp) => (0.9, 2.0),
        (ImageVideo, Mul) => (0.6, 1.4),
        (ImageVideo, Shift) => (0.6, 1.3),
        (ImageVideo, Logic) => (0.5, 1.2),
        (ImageVideo, Div) => (0.15, 0.4),
        (Crypto, Logic) => (0.98, 3.0),
        (Crypto, Shift) => (0.95, 2.4),
        (Crypto, Add) => (0.8, 1.8),
        (Crypto, Cmp) => (0.5, 1.0),
        (Crypto, Sub) => (0.3, 0.8),
        (Crypto, Mul) => (0.2, 0.6),
        (Crypto, Div) => (0.05, 0.3),
        (Math, Mul) => (0.9, 2.0),
        (Math, Add) => (0.9, 2.1),
        (Math, Div) => (0.6, 1.1),
        (Math, Sub) => (0.7, 1.5),
        (Math, Cmp) => (0.6, 1.2),
        (Math, Logic) => (0.3, 0.8),
        (Math, Shift) => (0.4, 0.9),
    }
}

/// Width mix per category; never emits 8-bit divides or 64-bit compares.
fn width_allowed(kind: OpKind, width: u32) -> bool {
    !matches!((kind, width), (OpKind::Div, 8) | (OpKind::Cmp, 64))
}

fn width_weight(cat: Category, width: u32) -> f64 {
    match (cat, width) {
        (Category::ImageVideo, 8) => 1.0,
        (Category::ImageVideo, 16) => 0.8,
        (Category::ImageVideo, 32) => 0.5,
        (Category::ImageVideo, _) => 0.15,
        (Category::Crypto, 8) => 0.6,
        (Category::Crypto, 32) => 0.9,
        (Category::Crypto, 64) => 0.8,
        (Category::Crypto, _) => 0.4,
        (Category::Ml, 16) => 0.9,
        (Category::Ml, 32) => 0.9,
        (Category::Ml, _) => 0.35,
        (Category::Math, 32) => 1.0,
        (Category::Math, 64) => 0.7,
        (Category::Math, _) => 0.35,
    }
}

fn gen_design(index: usize, seed: u64) -> Design {
    let mut r = SeededRng::derive(seed, index as u64);
    let category = Category::ALL[index % 4];
    let scale = r.normal() * 0.5;
    let mut ops = Vec::new();
    for kind in OpKind::ALL {
        let (p, mu) = op_profile(category, kind);
        for width in OP_WIDTHS {
            if !width_allowed(kind, width) {
                continue;
            }
            let presence = p * width_weight(category, width);
            if r.bernoulli(presence) {
                let count = (mu + scale + 0.9 * r.normal()).exp().round().max(1.0) as u64;
                ops.push(OpStat {
                    kind,
                    bitwidth: width,
                    count: count.min(400),
                });
            }
        }
    }
    if ops.is_empty() {
        ops.push(OpStat {
            kind: OpKind::Add,
            bitwidth: 32,
            count: 1,
        });
    }
    let total_ops: u64 = ops.iter().map(|o| o.count).sum();
    let mem_words = r.uniform_in(5.0, 12.5).exp().round() as u64;
    let mem_width = [8u64, 16, 32, 64][r.below(4)];
    let mux_inputs = ((total_ops as f64).powf(0.75) * r.uniform_in(0.4, 1.6)).round().max(2.0) as u64;
    let mux_width = (mux_inputs as f64 * r.uniform_in(4.0, 28.0)).round() as u64;
    Design {
        name: format!("{}_{index:03}", category_prefix(category)),
        category,
        ops,
        mem_words,
        mem_width,
        mux_inputs,
        mux_width,
        instance_frac: r.uniform_in(0.0, 0.6),
        share: r.uniform_in(0.45, 1.25),
        logic_delay: (3.0f64.ln() + 0.35 * r.normal()).exp(),
        aggressiveness: r.uniform(),
        uncertainty_ratio: r.uniform_in(0.08, 0.27),
        memory_partition: r.uniform_in(0.5, 2.0),
    }
}

fn category_prefix(c: Category) -> &'static str {
    match c {
        Category::Ml => "ml",
        Category::ImageVideo => "img",
        Category::Crypto => "crypto",
        Category::Math => "math",
    }
}

fn lut_per_bit(kind: OpKind, width: u32) -> f64 {
    match kind {
        OpKind::Add | OpKind::Sub => 1.0,
        OpKind::Cmp => 0.55,
        OpKind::Logic => 0.9,
        OpKind::Shift => 0.35 * (width as f64).log2(),
        OpKind::Div => 0.6 * width as f64,
        OpKind::Mul if width <= 8 => 0.8 * width as f64,
        OpKind::Mul => 0.15 * width as f64,
    }
}

fn dsp_per_mul(width: u32) -> f64 {
    match width {
        0..=8 => 0.0,
        9..=18 => 1.0,
        19..=36 => 3.0,
        _ => 9.0,
    }
}

/// Runs the synthetic HLS step for one (design, clock, device).
fn synthesize(d: &Design, period: f64, dev: &DeviceProfile, seed: u64) -> HlsReport {
    let mut r = SeededRng::new(seed);
    let inst = d.instance_frac;
    let logic_delay = d.logic_delay * dev.delay_factor;
    // Tighter clocks pipeline deeper: more registers, fewer shared operators.
    let depth = (logic_delay / period).clamp(0.2, 5.0);
    let estimated = (period * (0.62 + 0.33 * d.aggressiveness) * (1.0 + 0.04 * r.normal()))
        .max(logic_delay / (1.0 + depth).sqrt() * (1.0 + 0.05 * r.uniform()))
        .max(0.3);
    let estimated = (estimated * 1000.0).round() / 1000.0;

    let mut expr_lut = 0.0;
    let mut mul_dsp = 0.0;
    let mut bits = 0.0;
    for o in &d.ops {
        let c = o.count as f64;
        expr_lut += c * o.bitwidth as f64 * lut_per_bit(o.kind, o.bitwidth);
        if o.kind == OpKind::Mul {
            mul_dsp += c * dsp_per_mul(o.bitwidth);
        }
        bits += c * o.bitwidth as f64;
    }
    let share = d.share * (1.0 + 0.25 * depth).recip().sqrt();
    let mem_bits = (d.mem_words * d.mem_width) as f64;
    let jitter = |r: &mut SeededRng| 1.0 + 0.03 * r.normal();

    let mut comps = [ResourceCounts::default(); 7];
    let set = |comps: &mut [ResourceCounts; 7], c: UtilComponent, f: &dyn Fn(&mut ResourceCounts)| {
        f(&mut comps[c.index()]);
    };
    let dsp_direct = (mul_dsp * (1.0 - inst) * share.max(0.6)).round() as u64;
    set(&mut comps, UtilComponent::Dsp, &|c| c.dsp = dsp_direct);
    let expr = (expr_lut * (1.0 - inst) * share * jitter(&mut r)).round() as u64;
    let expr_dsp = if mul_dsp > 0.0 && d.category == Category::Ml {
        (0.1 * d.ops.iter().filter(|o| o.kind == OpKind::Add).map(|o| o.count).sum::<u64>() as f64).round() as u64
    } else {
        0
    };
    set(&mut comps, UtilComponent::Expression, &|c| {
        c.lut = expr;
        c.dsp = expr_dsp;
    });
    let inst_lut = (expr_lut * inst * 1.15 * jitter(&mut r) + 40.0 * inst * d.ops.len() as f64).round() as u64;
    let inst_ff = (bits * inst * depth.sqrt() * 1.3 * jitter(&mut r)).round() as u64;
    let inst_dsp = (mul_dsp * inst).round() as u64;
    let inst_bram = if inst > 0.3 { (mem_bits * 0.15 / 18432.0).ceil() as u64 } else { 0 };
    set(&mut comps, UtilComponent::Instance, &|c| {
        c.lut = inst_lut;
        c.ff = inst_ff;
        c.dsp = inst_dsp;
        c.bram = inst_bram;
    });
    let (mem_bram, mem_lut, mem_ff) = if d.mem_words >= 512 {
        let banks = (mem_bits / 18432.0 * d.memory_partition).ceil().max(1.0);
        (banks as u64, (8.0 * banks * d.memory_partition).round() as u64, (2.0 * banks).round() as u64)
    } else {
        (0, (mem_bits / 32.0).ceil() as u64, (d.mem_width as f64 * 0.5).round() as u64)
    };
    set(&mut comps, UtilComponent::Memory, &|c| {
        c.bram = mem_bram;
        c.lut = mem_lut;
        c.ff = mem_ff;
    });
    let mux_lut = (d.mux_width as f64 * (d.mux_inputs as f64).log2().max(1.0) * 0.45 * jitter(&mut r)).round() as u64;
    set(&mut comps, UtilComponent::Multiplexer, &|c| c.lut = mux_lut);
    let reg_ff = (bits * (1.0 - inst) * (0.35 + 0.6 * depth) * jitter(&mut r) + 2.0 * d.mux_inputs as f64).round() as u64;
    set(&mut comps, UtilComponent::Register, &|c| c.ff = reg_ff);

    let mut used = comps.iter().fold(ResourceCounts::default(), |a, c| a.add(c));
    // Designs that overflow the part are clipped to its capacity.
    for res in crate::report::Resource::ALL {
        if used.get(res) > dev.available.get(res) {
            used.set(res, dev.available.get(res));
        }
    }

    HlsReport {
        device_id: dev.id.clone(),
        target_clock_period: period,
        estimated_clock_period: estimated,
        clock_uncertainty: (period * d.uncertainty_ratio * 1000.0).round() / 1000.0,
        utilization: Utilization {
            components: comps,
            used,
            available: dev.available,
        },
        op_stats: d.ops.clone(),
        memory_stats: MemoryStats {
            words: d.mem_words,
            bits: d.mem_words * d.mem_width,
        },
        mux_stats: MuxStats {
            inputs: d.mux_inputs,
            bitwidth: d.mux_width,
        },
    }
}

/// Noise-free post-implementation results for one report and goal.
fn hidden_targets(rep: &HlsReport, d: &Design, dev: &DeviceProfile, goal: Goal, spec: &OracleSpec, reg: &Regime) -> Targets {
    let u = &rep.utilization;
    let lut_hls = u.used.lut as f64;
    let ff_hls = u.used.ff as f64;
    let nl = reg.nonlinearity;
    let mux = d.mux_inputs as f64;
    let tight = (rep.estimated_clock_period / rep.target_clock_period).min(2.0);
    let class_lut = match dev.class {
        DeviceClass::Low => 1.06,
        DeviceClass::Medium => 1.0,
        DeviceClass::High => 0.97,
    };
    let (area, speed) = match goal {
        Goal::Tp => (1.0, 1.0),
        Goal::Tpa => (spec.tpa_area_factor, spec.tpa_fmax_factor),
    };

    let lut = reg.lut_scale
        * (lut_hls + 50.0).powf(reg.lut_exp)
        * (1.0 + reg.lut_mux * (mux / 60.0).tanh())
        * (1.0 + 0.15 * nl * (tight - 0.8))
        * class_lut
        * area;
    let ff = reg.ff_scale
        * (ff_hls + 30.0).powf(reg.ff_exp)
        * (1.0 + reg.ff_pipe * (1.0 / (1.0 + (2.0 - 2.0 * tight).exp())))
        * area.sqrt();
    let dsp = if u.used.dsp == 0 {
        0.0
    } else {
        reg.dsp_scale * u.used.dsp as f64 * (1.0 + 0.12 * nl * (u.used.dsp as f64 / 40.0).tanh())
    };
    let bram = if u.used.bram == 0 {
        0.0
    } else {
        reg.bram_scale * u.used.bram as f64 * (0.85 + 0.3 * nl * (d.mem_words as f64 / 8192.0).tanh())
    };
    let size = (lut_hls / 1000.0).ln_1p();
    let route = match dev.class {
        DeviceClass::Low => 0.35,
        DeviceClass::Medium => 0.2,
        DeviceClass::High => 0.45,
    };
    let critical = reg.path_scale * (0.55 * rep.estimated_clock_period + 0.25 * d.logic_delay * dev.delay_factor)
        + reg.path_size * size * (1.0 + 0.5 * nl * (mux / 40.0).tanh())
        + route
        + 0.3 * nl * (d.mem_words as f64 / 4096.0).tanh();
    let fmax = 1000.0 / critical * speed;
    Targets {
        lut,
        ff,
        dsp: dsp * area.max(0.95),
        bram,
        fmax,
    }
}

/// A generated design point: its report and the samples for both goals.
#[derive(Debug, Clone)]
pub struct GeneratedPoint {
    pub design: String,
    pub category: Category,
    pub report: HlsReport,
    pub samples: [Sample; 2],
}

/// Generates every (design, clock, device) point with its report.
///
/// Ordering is design-major, then clock, then device; each point yields a TP
/// and a TPA sample.
pub fn gen_points(spec: &OracleSpec, n_designs: usize, manifest: &Manifest, seed: u64) -> Result<Vec<GeneratedPoint>, SynthError> {
    spec.validate()?;
    if n_designs == 0 {
        return Err(SynthError::InvalidParams("n_designs must be at least 1".into()));
    }
    let regs = regimes(spec.coefficient_seed);
    let points: Vec<Vec<GeneratedPoint>> = (0..n_designs)
        .into_par_iter()
        .map(|i| {
            let d = gen_design(i, seed);
            let reg = regs[Category::ALL.iter().position(|c| *c == d.category).unwrap()];
            let mut out = Vec::new();
            for (ci, &period) in spec.clock_periods.iter().enumerate() {
                for (vi, dev) in spec.devices.iter().enumerate() {
                    let point_seed = mix_seed(mix_seed(seed, i as u64), (ci * 16 + vi) as u64);
                    let report = synthesize(&d, period, dev, point_seed);
                    let features = flatten(&report, manifest).values;
                    let mut noise_rng = SeededRng::derive(point_seed, 0xA11CE);
                    let samples = Goal::ALL.map(|goal| {
                        let mut t = hidden_targets(&report, &d, dev, goal, spec, &reg);
                        for target in crate::dataset::Target::ALL {
                            let f = (1.0 + spec.noise * noise_rng.normal()).max(0.5);
                            t.set(target, t.get(target) * f);
                        }
                        Sample {
                            features: features.clone(),
                            targets: t,
                            goal,
                            device_id: dev.id.clone(),
                            requested_period: period,
                            design: d.name.clone(),
                            category: Some(d.category),
                        }
                    });
                    out.push(GeneratedPoint {
                        design: d.name.clone(),
                        category: d.category,
                        report,
                        samples,
                    });
                }
            }
            out
        })
        .collect();
    Ok(points.into_iter().flatten().collect())
}

/// Generates the dataset (`n_designs x clocks x devices x 2` samples).
pub fn gen_dataset(spec: &OracleSpec, n_designs: usize, manifest: &Manifest, seed: u64) -> Result<Dataset, SynthError> {
    let points = gen_points(spec, n_designs, manifest, seed)?;
    let samples = points.into_iter().flat_map(|p| p.samples).collect();
    let mut ds = Dataset::new(samples, manifest.id())?;
    ds.split_seed = seed;
    Ok(ds)
}

/// Writes `dataset.csv` and `reports/<design>/<device>_<period>ns.rpt`
/// under `dir`. Files are written to a temporary name and renamed.
pub fn write_benchmark(dir: &Path, spec: &OracleSpec, n_designs: usize, manifest: &Manifest, seed: u64) -> Result<Dataset, SynthError> {
    let points = gen_points(spec, n_designs, manifest, seed)?;
    fs::create_dir_all(dir.join("reports"))?;
    for p in &points {
        let design_dir = dir.join("reports").join(&p.design);
        fs::create_dir_all(&design_dir)?;
        let name = format!("{}_{}ns.rpt", p.report.device_id, p.report.target_clock_period);
        write_atomic(&design_dir.join(name), p.report.to_text().as_bytes())?;
    }
    let samples = points.into_iter().flat_map(|p| p.samples).collect();
    let mut ds = Dataset::new(samples, manifest.id())?;
    ds.split_seed = seed;
    write_atomic(&dir.join("dataset.csv"), ds.to_csv_string().as_bytes())?;
    Ok(ds)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::parse_report;

    #[test]
    fn full_grid_size() {
        let m = Manifest::default_v1();
        let ds = gen_dataset(&OracleSpec::default(), 90, &m, 1).unwrap();
        assert_eq!(ds.len(), 90 * 5 * 3 * 2);
        assert_eq!(ds.dim(), 183);
    }

    #[test]
    fn deterministic_in_seed() {
        let m = Manifest::default_v1();
        let a = gen_dataset(&OracleSpec::default(), 6, &m, 11).unwrap().to_csv_string();
        let b = gen_dataset(&OracleSpec::default(), 6, &m, 11).unwrap().to_csv_string();
        let c = gen_dataset(&OracleSpec::default(), 6, &m, 12).unwrap().to_csv_string();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn reports_round_trip_through_the_parser() {
        let m = Manifest::default_v1();
        for p in gen_points(&OracleSpec::default(), 8, &m, 3).unwrap() {
            let parsed = parse_report(&p.report.to_text()).unwrap();
            assert_eq!(parsed, p.report);
            assert_eq!(flatten(&parsed, &m).values, p.samples[0].features);
        }
    }

    #[test]
    fn noiseless_targets_equal_hidden_function() {
        let m = Manifest::default_v1();
        let spec = OracleSpec {
            noise: 0.0,
            ..OracleSpec::default()
        };
        let regs = regimes(spec.coefficient_seed);
        let points = gen_points(&spec, 4, &m, 5).unwrap();
        for (k, p) in points.iter().enumerate() {
            let design_index = k / (spec.clock_periods.len() * spec.devices.len());
            let d = gen_design(design_index, 5);
            let dev = spec.devices.iter().find(|x| x.id == p.report.device_id).unwrap();
            let reg = regs[Category::ALL.iter().position(|c| *c == d.category).unwrap()];
            for s in &p.samples {
                assert_eq!(s.targets, hidden_targets(&p.report, &d, dev, s.goal, &spec, &reg));
            }
        }
    }

    #[test]
    fn invalid_params() {
        let m = Manifest::default_v1();
        let spec = OracleSpec {
            noise: -0.1,
            ..OracleSpec::default()
        };
        assert!(matches!(gen_dataset(&spec, 2, &m, 0), Err(SynthError::InvalidParams(_))));
        assert!(matches!(gen_dataset(&OracleSpec::default(), 0, &m, 0), Err(SynthError::InvalidParams(_))));
        let mut spec = OracleSpec::default();
        spec.devices.swap(0, 2);
        assert!(matches!(gen_dataset(&spec, 2, &m, 0), Err(SynthError::InvalidParams(_))));
    }

    #[test]
    fn every_category_present() {
        let m = Manifest::default_v1();
        let ds = gen_dataset(&OracleSpec::default(), 8, &m, 2).unwrap();
        for c in Category::ALL {
            assert!(ds.samples.iter().any(|s| s.category == Some(c)));
        }
    }

    #[test]
    fn hls_underestimates_lut_on_average() {
        let m = Manifest::default_v1();
        let spec = OracleSpec::default();
        let points = gen_points(&spec, 40, &m, 4).unwrap();
        let under = points
            .iter()
            .filter(|p| (p.report.utilization.used.lut as f64) < p.samples[0].targets.lut)
            .count();
        let mean_ratio = points
            .iter()
            .map(|p| p.samples[0].targets.lut / p.report.utilization.used.lut.max(1) as f64)
            .sum::<f64>()
            / points.len() as f64;
        assert!(under * 2 > points.len(), "{under}/{}", points.len());
        assert!(mean_ratio > 1.0, "mean ratio {mean_ratio}");
    }
}
