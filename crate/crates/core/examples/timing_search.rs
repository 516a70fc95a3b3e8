//! Maximum-frequency search: plain bisection versus a windowed scan, and the
//! multi-strategy search over a synthetic WNS landscape.

use pyramid::dataset::Goal;
use pyramid::timing::{binary_search_fmax, exhaustive_scan, gen_landscape, minerva_search, LandscapeParams, WnsLandscape, SUBOPTIMAL_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let l = WnsLandscape::icepole_like();
    let bis = binary_search_fmax(&l, 0, l.lo, l.hi, 1)?;
    for p in &bis.probes {
        println!("probe {:>3} MHz  wns {:+.3} ns  {}", p.freq, p.wns, if p.passes() { "pass" } else { "fail" });
    }
    let scan = exhaustive_scan(&l, 0, 333, 64, 1)?;
    println!("bisection {} MHz, scan {} MHz ({} points)", bis.fmax, scan.fmax, scan.rows.len());

    let synthetic = gen_landscape(&LandscapeParams::default(), SUBOPTIMAL_SEED)?;
    for goal in Goal::ALL {
        let r = minerva_search(&synthetic, goal)?;
        println!(
            "{goal}: strategy {} at {} MHz, {} LUTs, score {:.4}, {} probes",
            r.strategy_id, r.achieved_fmax, r.lut_count, r.score, r.probes
        );
    }
    Ok(())
}
