//! Simulated timing oracle and maximum-frequency search.
//!
//! A [`WnsLandscape`] tabulates worst negative slack against requested
//! frequency for a set of implementation strategies. Real timing closure is
//! not monotone in the requested clock: slack fluctuates, so bisection on the
//! pass/fail predicate can settle below frequencies that would pass. The
//! searches here reproduce that behavior and the scan-based remedy.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Goal;
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum TimingError {
    #[error("non-positive minimum period: target {target_period} ns - WNS {wns} ns <= 0")]
    NonPositivePeriod { target_period: f64, wns: f64 },
    #[error("no passing point in [{lo}, {hi}] MHz")]
    NoPassingPoint { lo: u32, hi: u32 },
    #[error("no strategy has a passing point")]
    AllStrategiesFail,
    #[error("invalid landscape parameters: {0}")]
    InvalidParams(String),
    #[error("{freq} MHz is outside [{lo}, {hi}] or off the {precision} MHz grid")]
    OffGrid { freq: u32, lo: u32, hi: u32, precision: u32 },
    #[error("strategy {0} does not exist")]
    NoSuchStrategy(usize),
    #[error("malformed landscape: {0}")]
    Malformed(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `1000 / (target_period - wns)`: the frequency (MHz) implied by a run at
/// `target_period` ns that closed with slack `wns` ns.
pub fn reference_frequency(target_period: f64, wns: f64) -> Result<f64, TimingError> {
    let min_period = target_period - wns;
    if !(target_period > 0.0) || !(min_period > 0.0) {
        return Err(TimingError::NonPositivePeriod { target_period, wns });
    }
    Ok(1000.0 / min_period)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub name: String,
    pub lut_count: u64,
    /// WNS in ns at each grid frequency, lowest frequency first.
    pub wns: Vec<f64>,
}

/// Generator parameters, kept with generated landscapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeParams {
    pub lo: u32,
    pub hi: u32,
    pub precision: u32,
    pub n_strategies: usize,
    /// Critical path (ns) of the nominal strategy.
    pub critical_path: f64,
    /// Multiplier on the `1000 / f - critical_path` trend.
    pub trend_slope: f64,
    /// Bound on the fluctuation, ns.
    pub amplitude: f64,
    pub n_waves: usize,
    /// Range of fluctuation periods, MHz.
    pub wave_period: (f64, f64),
    /// Relative spread of per-strategy critical paths.
    pub timing_spread: f64,
    pub base_luts: f64,
    /// Range of per-strategy LUT multipliers.
    pub lut_multiplier: (f64, f64),
}

impl Default for LandscapeParams {
    fn default() -> Self {
        Self {
            lo: 150,
            hi: 1173,
            precision: 1,
            n_strategies: 25,
            critical_path: 3.0,
            trend_slope: 1.0,
            amplitude: 0.05,
            n_waves: 4,
            wave_period: (6.0, 40.0),
            timing_spread: 0.08,
            base_luts: 5000.0,
            lut_multiplier: (0.8, 1.3),
        }
    }
}

impl LandscapeParams {
    pub fn validate(&self) -> Result<(), TimingError> {
        let bad = |m: &str| Err(TimingError::InvalidParams(m.into()));
        if self.lo == 0 || self.lo >= self.hi || self.precision == 0 || !(self.hi - self.lo).is_multiple_of(self.precision) {
            return bad("need 0 < lo < hi with hi - lo a multiple of precision");
        }
        if self.n_strategies == 0 {
            return bad("need at least one strategy");
        }
        if !(self.amplitude >= 0.0) {
            return bad("amplitude must be non-negative");
        }
        if !(self.critical_path > 0.0 && self.trend_slope > 0.0 && self.base_luts >= 1.0) {
            return bad("critical path, trend slope and base LUTs must be positive");
        }
        if !(self.wave_period.0 > 0.0 && self.wave_period.0 <= self.wave_period.1) {
            return bad("wave period range must be positive and ordered");
        }
        if !(self.timing_spread >= 0.0 && self.timing_spread < 1.0) {
            return bad("timing spread must be in [0, 1)");
        }
        if !(self.lut_multiplier.0 > 0.0 && self.lut_multiplier.0 <= self.lut_multiplier.1) {
            return bad("LUT multiplier range must be positive and ordered");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WnsLandscape {
    pub lo: u32,
    pub hi: u32,
    pub precision: u32,
    /// Window used by [`minerva_search`] for its initial bisection.
    pub search_window: (u32, u32),
    pub seed: u64,
    pub params: Option<LandscapeParams>,
    pub strategies: Vec<StrategyProfile>,
}

/// One oracle evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub freq: u32,
    pub wns: f64,
}

impl Probe {
    pub fn passes(&self) -> bool {
        self.wns >= 0.0
    }
}

impl WnsLandscape {
    pub fn grid_len(&self) -> usize {
        ((self.hi - self.lo) / self.precision) as usize + 1
    }

    pub fn freqs(&self) -> impl Iterator<Item = u32> + '_ {
        (self.lo..=self.hi).step_by(self.precision as usize)
    }

    pub fn on_grid(&self, f: u32) -> bool {
        f >= self.lo && f <= self.hi && (f - self.lo).is_multiple_of(self.precision)
    }

    fn off_grid(&self, freq: u32) -> TimingError {
        TimingError::OffGrid {
            freq,
            lo: self.lo,
            hi: self.hi,
            precision: self.precision,
        }
    }

    pub fn wns_at(&self, strategy: usize, f: u32) -> Result<f64, TimingError> {
        let s = self.strategies.get(strategy).ok_or(TimingError::NoSuchStrategy(strategy))?;
        if !self.on_grid(f) {
            return Err(self.off_grid(f));
        }
        Ok(s.wns[((f - self.lo) / self.precision) as usize])
    }

    fn probe(&self, strategy: usize, f: u32, log: &mut Vec<Probe>) -> Result<bool, TimingError> {
        let wns = self.wns_at(strategy, f)?;
        log.push(Probe { freq: f, wns });
        Ok(wns >= 0.0)
    }

    /// Nearest grid point to `f`, clamped to the range.
    pub fn snap(&self, f: f64) -> u32 {
        let k = ((f - self.lo as f64) / self.precision as f64).round().max(0.0);
        (self.lo + k as u32 * self.precision).min(self.hi)
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        let bad = |m: String| Err(TimingError::Malformed(m));
        if self.lo == 0 || self.lo >= self.hi || self.precision == 0 || !(self.hi - self.lo).is_multiple_of(self.precision) {
            return bad(format!("grid [{}, {}] step {}", self.lo, self.hi, self.precision));
        }
        if self.strategies.is_empty() {
            return bad("no strategies".into());
        }
        let (a, b) = self.search_window;
        if !(self.on_grid(a) && self.on_grid(b) && a < b) {
            return bad(format!("search window [{a}, {b}]"));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if s.lut_count == 0 {
                return bad(format!("strategy {i} has zero LUTs"));
            }
            if s.wns.len() != self.grid_len() || s.wns.iter().any(|w| !w.is_finite()) {
                return bad(format!("strategy {i} WNS table"));
            }
        }
        Ok(())
    }

    /// The bundled landscape whose bisection settles at 346 MHz while the
    /// +-64 MHz scan around 333 MHz finds 389 MHz.
    pub fn icepole_like() -> Self {
        let json = include_str!("../fixtures/landscapes/icepole_like/landscape.json");
        let csv = include_str!("../fixtures/landscapes/icepole_like/strategy_00.csv");
        from_parts(json, &[csv.to_string()]).expect("bundled landscape is valid")
    }

    /// Writes `landscape.json` and one `strategy_NN.csv` per strategy.
    pub fn save(&self, dir: &Path) -> Result<(), TimingError> {
        fs::create_dir_all(dir)?;
        let meta = Sidecar {
            lo: self.lo,
            hi: self.hi,
            precision: self.precision,
            search_window: self.search_window,
            seed: self.seed,
            params: self.params.clone(),
            strategies: self
                .strategies
                .iter()
                .map(|s| SidecarStrategy {
                    name: s.name.clone(),
                    lut_count: s.lut_count,
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
        json.push('\n');
        crate::synth::write_atomic(&dir.join("landscape.json"), json.as_bytes())?;
        for (i, s) in self.strategies.iter().enumerate() {
            let mut csv = String::from("freq_mhz,wns_ns\n");
            for (f, w) in self.freqs().zip(&s.wns) {
                let _ = writeln!(csv, "{f},{w}");
            }
            crate::synth::write_atomic(&dir.join(format!("strategy_{i:02}.csv")), csv.as_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, TimingError> {
        let json = fs::read_to_string(dir.join("landscape.json"))?;
        let meta: Sidecar = serde_json::from_str(&json).map_err(|e| TimingError::Malformed(e.to_string()))?;
        let csvs = (0..meta.strategies.len())
            .map(|i| fs::read_to_string(dir.join(format!("strategy_{i:02}.csv"))))
            .collect::<Result<Vec<_>, _>>()?;
        from_parts(&json, &csvs)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SidecarStrategy {
    name: String,
    lut_count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    lo: u32,
    hi: u32,
    precision: u32,
    search_window: (u32, u32),
    seed: u64,
    params: Option<LandscapeParams>,
    strategies: Vec<SidecarStrategy>,
}

fn from_parts(json: &str, csvs: &[String]) -> Result<WnsLandscape, TimingError> {
    let meta: Sidecar = serde_json::from_str(json).map_err(|e| TimingError::Malformed(e.to_string()))?;
    let mut strategies = Vec::new();
    for (i, (s, text)) in meta.strategies.into_iter().zip(csvs).enumerate() {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| TimingError::Malformed(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["freq_mhz", "wns_ns"] {
            return Err(TimingError::Malformed(format!("strategy {i}: header must be freq_mhz,wns_ns")));
        }
        let mut wns = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| TimingError::Malformed(e.to_string()))?;
            let f: u32 = rec[0].trim().parse().map_err(|_| TimingError::Malformed(format!("strategy {i} row {row}: frequency")))?;
            let expected = meta.lo + row as u32 * meta.precision;
            if f != expected {
                return Err(TimingError::Malformed(format!("strategy {i} row {row}: expected {expected} MHz, got {f}")));
            }
            wns.push(rec[1].trim().parse().map_err(|_| TimingError::Malformed(format!("strategy {i} row {row}: WNS")))?);
        }
        strategies.push(StrategyProfile {
            name: s.name,
            lut_count: s.lut_count,
            wns,
        });
    }
    let l = WnsLandscape {
        lo: meta.lo,
        hi: meta.hi,
        precision: meta.precision,
        search_window: meta.search_window,
        seed: meta.seed,
        params: meta.params,
        strategies,
    };
    l.validate()?;
    Ok(l)
}

/// A seed whose default-parameter landscape makes bisection settle below
/// the true maximum on strategy 0 (344 vs 352 MHz).
pub const SUBOPTIMAL_SEED: u64 = 21;

/// Seeded landscape: `WNS(f) = slope * (1000 / f - path_s) + wave_s(f)`,
/// where `wave_s` is a sum of sinusoids whose amplitudes add up to at most
/// `amplitude`.
pub fn gen_landscape(p: &LandscapeParams, seed: u64) -> Result<WnsLandscape, TimingError> {
    p.validate()?;
    let strategies = (0..p.n_strategies)
        .map(|s| {
            let mut r = SeededRng::derive(seed, s as u64);
            let path = p.critical_path * (1.0 + p.timing_spread * r.uniform_in(-1.0, 1.0));
            let luts = (p.base_luts * r.uniform_in(p.lut_multiplier.0, p.lut_multiplier.1)).round().max(1.0) as u64;
            let weights: Vec<f64> = (0..p.n_waves).map(|_| r.uniform_in(0.2, 1.0)).collect();
            let total: f64 = weights.iter().sum();
            let waves: Vec<(f64, f64, f64)> = weights
                .iter()
                .map(|w| {
                    let a = if total > 0.0 { p.amplitude * w / total } else { 0.0 };
                    let period = r.uniform_in(p.wave_period.0, p.wave_period.1);
                    (a, period, r.uniform_in(0.0, std::f64::consts::TAU))
                })
                .collect();
            let wns = (p.lo..=p.hi)
                .step_by(p.precision as usize)
                .map(|f| {
                    let f = f as f64;
                    let wave: f64 = waves.iter().map(|(a, per, ph)| a * (std::f64::consts::TAU * f / per + ph).sin()).sum();
                    p.trend_slope * (1000.0 / f - path) + wave
                })
                .collect();
            StrategyProfile {
                name: format!("strategy_{s:02}"),
                lut_count: luts,
                wns,
            }
        })
        .collect();
    Ok(WnsLandscape {
        lo: p.lo,
        hi: p.hi,
        precision: p.precision,
        search_window: (p.lo, p.hi),
        seed,
        params: Some(p.clone()),
        strategies,
    })
}

/// Outcome of a bisection, with every probe in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionTrace {
    pub fmax: u32,
    pub probes: Vec<Probe>,
}

impl BisectionTrace {
    /// The probe at the returned frequency.
    pub fn best_probe(&self) -> Probe {
        *self.probes.iter().find(|p| p.freq == self.fmax).expect("fmax was probed")
    }
}

/// Bisection on the pass predicate `WNS >= 0` between `lo` and `hi`.
/// Returns the highest passing frequency it probed.
pub fn binary_search_fmax(l: &WnsLandscape, strategy: usize, lo: u32, hi: u32, precision: u32) -> Result<BisectionTrace, TimingError> {
    if lo >= hi || precision == 0 || !precision.is_multiple_of(l.precision) {
        return Err(TimingError::InvalidParams(format!("window [{lo}, {hi}] step {precision}")));
    }
    let mut probes = Vec::new();
    if !l.probe(strategy, lo, &mut probes)? {
        return Err(TimingError::NoPassingPoint { lo, hi });
    }
    if l.probe(strategy, hi, &mut probes)? {
        return Ok(BisectionTrace { fmax: hi, probes });
    }
    let (mut pass, mut fail) = (lo, hi);
    while fail - pass > precision {
        let steps = (fail - pass) / precision;
        let mid = pass + (steps / 2) * precision;
        if l.probe(strategy, mid, &mut probes)? {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(BisectionTrace { fmax: pass, probes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTrace {
    pub fmax: u32,
    pub rows: Vec<Probe>,
}

impl ScanTrace {
    /// `freq_mhz,wns_ns,pass` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_mhz,wns_ns,pass\n");
        for p in &self.rows {
            let _ = writeln!(s, "{},{},{}", p.freq, p.wns, u8::from(p.passes()));
        }
        s
    }
}

/// Every frequency in `[center - radius, center + radius]` at `precision`.
pub fn exhaustive_scan(l: &WnsLandscape, strategy: usize, center: u32, radius: u32, precision: u32) -> Result<ScanTrace, TimingError> {
    if precision == 0 || !precision.is_multiple_of(l.precision) {
        return Err(TimingError::InvalidParams(format!("precision {precision}")));
    }
    let (a, b) = (center.saturating_sub(radius), center + radius);
    scan_window(l, strategy, a, b, precision)
}

fn scan_window(l: &WnsLandscape, strategy: usize, a: u32, b: u32, precision: u32) -> Result<ScanTrace, TimingError> {
    for f in [a, b] {
        if !l.on_grid(f) {
            return Err(l.off_grid(f));
        }
    }
    let mut rows = Vec::new();
    let mut best = None;
    for f in (a..=b).step_by(precision as usize) {
        if l.probe(strategy, f, &mut rows)? {
            best = Some(f);
        }
    }
    match best {
        Some(fmax) => Ok(ScanTrace { fmax, rows }),
        None => Err(TimingError::NoPassingPoint { lo: a, hi: b }),
    }
}

/// Per-strategy record of a [`minerva_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub strategy: usize,
    pub bisection_fmax: Option<u32>,
    pub reference_mhz: Option<f64>,
    pub fmax: Option<u32>,
    pub score: Option<f64>,
    pub probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub goal: Goal,
    pub achieved_fmax: u32,
    pub strategy_id: usize,
    pub lut_count: u64,
    /// MHz for TP, MHz per LUT for TPA.
    pub score: f64,
    pub probes: usize,
    pub per_strategy: Vec<StrategyOutcome>,
}

pub fn goal_score(goal: Goal, fmax: u32, luts: u64) -> f64 {
    match goal {
        Goal::Tp => fmax as f64,
        Goal::Tpa => fmax as f64 / luts as f64,
    }
}

/// Per strategy: bisect the search window, derive a reference frequency from
/// the best probe's slack, scan +-64 MHz around it (clipped to the grid), and
/// keep the best passing point. Returns the strategy with the highest goal
/// score; ties go to the lowest index.
pub fn minerva_search(l: &WnsLandscape, goal: Goal) -> Result<SearchResult, TimingError> {
    const RADIUS: u32 = 64;
    let (wlo, whi) = l.search_window;
    let mut per_strategy = Vec::new();
    let mut best: Option<(usize, u32, f64)> = None;
    for s in 0..l.strategies.len() {
        let mut out = StrategyOutcome {
            strategy: s,
            bisection_fmax: None,
            reference_mhz: None,
            fmax: None,
            score: None,
            probes: 0,
        };
        match binary_search_fmax(l, s, wlo, whi, l.precision) {
            Err(TimingError::NoPassingPoint { .. }) => {
                out.probes = 1;
            }
            Err(e) => return Err(e),
            Ok(bis) => {
                out.probes = bis.probes.len();
                out.bisection_fmax = Some(bis.fmax);
                let p = bis.best_probe();
                let reference = reference_frequency(1000.0 / p.freq as f64, p.wns)?;
                out.reference_mhz = Some(reference);
                let c = l.snap(reference);
                let a = c.saturating_sub(RADIUS).max(l.lo);
                let a = l.snap(a as f64);
                let b = (c + RADIUS).min(l.hi);
                let b = l.snap(b as f64);
                let mut fmax = bis.fmax;
                match scan_window(l, s, a, b, l.precision) {
                    Ok(scan) => {
                        out.probes += scan.rows.len();
                        fmax = fmax.max(scan.fmax);
                    }
                    Err(TimingError::NoPassingPoint { .. }) => {
                        out.probes += ((b - a) / l.precision + 1) as usize;
                    }
                    Err(e) => return Err(e),
                }
                let score = goal_score(goal, fmax, l.strategies[s].lut_count);
                out.fmax = Some(fmax);
                out.score = Some(score);
                if best.is_none_or(|(_, _, b)| score > b) {
                    best = Some((s, fmax, score));
                }
            }
        }
        per_strategy.push(out);
    }
    let (strategy_id, achieved_fmax, score) = best.ok_or(TimingError::AllStrategiesFail)?;
    Ok(SearchResult {
        goal,
        achieved_fmax,
        strategy_id,
        lut_count: l.strategies[strategy_id].lut_count,
        score,
        probes: per_strategy.iter().map(|o| o.probes).sum(),
        per_strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monotone(lo: u32, hi: u32, path: f64) -> WnsLandscape {
        let wns = (lo..=hi).map(|f| 1000.0 / f as f64 - path).collect();
        WnsLandscape {
            lo,
            hi,
            precision: 1,
            search_window: (lo, hi),
            seed: 0,
            params: None,
            strategies: vec![StrategyProfile {
                name: "s".into(),
                lut_count: 100,
                wns,
            }],
        }
    }

    #[test]
    fn reference_frequency_cases() {
        assert!((reference_frequency(10.0, 2.0).unwrap() - 125.0).abs() < 1e-12);
        assert_eq!(reference_frequency(4.0, 0.0).unwrap(), 250.0);
        assert!((reference_frequency(10.0, -2.0).unwrap() - 1000.0 / 12.0).abs() < 1e-12);
        assert!(matches!(reference_frequency(2.0, 2.0), Err(TimingError::NonPositivePeriod { .. })));
        assert!(matches!(reference_frequency(0.0, -1.0), Err(TimingError::NonPositivePeriod { .. })));
    }

    #[test]
    fn icepole_like_reproduces_the_pitfall() {
        let l = WnsLandscape::icepole_like();
        let bis = binary_search_fmax(&l, 0, 269, 397, 1).unwrap();
        assert_eq!(bis.fmax, 346);
        let probed: Vec<u32> = bis.probes.iter().map(|p| p.freq).collect();
        assert_eq!(probed, vec![269, 397, 333, 365, 349, 341, 345, 347, 346]);
        let scan = exhaustive_scan(&l, 0, 333, 64, 1).unwrap();
        assert_eq!(scan.fmax, 389);
        assert_eq!(scan.rows.len(), 129);
        assert_eq!(minerva_search(&l, Goal::Tp).unwrap().achieved_fmax, 389);
    }

    #[test]
    fn bisection_is_exact_on_monotone_landscapes() {
        let l = monotone(100, 600, 3.1);
        let bis = binary_search_fmax(&l, 0, 100, 600, 1).unwrap();
        let scan = exhaustive_scan(&l, 0, 350, 250, 1).unwrap();
        assert_eq!(bis.fmax, scan.fmax);
        assert_eq!(bis.fmax, 322);
        let bound = ((500f64).log2().ceil() as usize) + 2;
        assert!(bis.probes.len() <= bound);
    }

    #[test]
    fn window_without_pass_is_an_error() {
        let l = monotone(100, 600, 3.1);
        assert!(matches!(exhaustive_scan(&l, 0, 500, 50, 1), Err(TimingError::NoPassingPoint { .. })));
        assert!(matches!(binary_search_fmax(&l, 0, 400, 600, 1), Err(TimingError::NoPassingPoint { .. })));
        assert!(matches!(exhaustive_scan(&l, 0, 120, 64, 1), Err(TimingError::OffGrid { .. })));
    }

    #[test]
    fn zero_amplitude_landscape_is_monotone() {
        let p = LandscapeParams {
            amplitude: 0.0,
            ..LandscapeParams::default()
        };
        let l = gen_landscape(&p, 3).unwrap();
        for s in &l.strategies {
            assert!(s.wns.windows(2).all(|w| w[1] < w[0]));
        }
        for s in 0..l.strategies.len() {
            let bis = binary_search_fmax(&l, s, l.lo, l.hi, 1).unwrap();
            let scan = scan_window(&l, s, l.lo, l.hi, 1).unwrap();
            assert_eq!(bis.fmax, scan.fmax);
        }
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let p = LandscapeParams::default();
        let a = gen_landscape(&p, 11).unwrap();
        assert_eq!(a, gen_landscape(&p, 11).unwrap());
        assert_ne!(a, gen_landscape(&p, 12).unwrap());
        assert_eq!(a.strategies.len(), 25);
        let flat = LandscapeParams { amplitude: 0.0, ..p.clone() };
        let b = gen_landscape(&flat, 11).unwrap();
        for (sa, sb) in a.strategies.iter().zip(&b.strategies) {
            assert!(sa.lut_count > 0);
            for (x, y) in sa.wns.iter().zip(&sb.wns) {
                assert!((x - y).abs() <= p.amplitude + 1e-12);
            }
        }
        let bad = LandscapeParams { amplitude: -1.0, ..p };
        assert!(matches!(gen_landscape(&bad, 1), Err(TimingError::InvalidParams(_))));
    }

    #[test]
    fn tpa_prefers_fewer_luts_and_tp_ties_go_low() {
        let mut l = monotone(100, 400, 3.0);
        let mut s2 = l.strategies[0].clone();
        s2.lut_count = 50;
        l.strategies.push(s2);
        let tp = minerva_search(&l, Goal::Tp).unwrap();
        assert_eq!(tp.strategy_id, 0);
        let tpa = minerva_search(&l, Goal::Tpa).unwrap();
        assert_eq!(tpa.strategy_id, 1);
        assert_eq!(tpa.score, 333.0 / 50.0);
    }

    #[test]
    fn save_load_round_trip() {
        let l = gen_landscape(&LandscapeParams { n_strategies: 3, ..LandscapeParams::default() }, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        l.save(dir.path()).unwrap();
        assert_eq!(WnsLandscape::load(dir.path()).unwrap(), l);
    }

    #[test]
    fn all_failing_strategies() {
        let l = monotone(400, 600, 3.1);
        assert!(matches!(minerva_search(&l, Goal::Tp), Err(TimingError::AllStrategiesFail)));
    }

    #[test]
    fn bundled_seed_defeats_bisection() {
        let l = gen_landscape(&LandscapeParams::default(), SUBOPTIMAL_SEED).unwrap();
        let bis = binary_search_fmax(&l, 0, l.lo, l.hi, 1).unwrap();
        let scan = scan_window(&l, 0, l.lo, l.hi, 1).unwrap();
        assert_eq!((bis.fmax, scan.fmax), (344, 352));
    }
}
