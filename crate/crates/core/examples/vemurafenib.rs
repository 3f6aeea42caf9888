//! Fits every model to the vemurafenib basket trial and prints the
//! posterior summaries.

use std::time::Instant;

use bupd::engines::{fit, McmcConfig, ModelKind, ModelSpec};
use bupd::numcore::RngStream;
use bupd::uip::TrialData;

fn main() -> bupd::Result<()> {
    let data = TrialData::new(
        ["NSCLC", "CRC-V", "CRC-VC", "CCA", "ECD/LCH", "ATC"].map(String::from).to_vec(),
        vec![19, 10, 26, 8, 14, 7],
        vec![8, 0, 1, 1, 6, 2],
    )?;
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20240501);
    let mcmc = McmcConfig::default();
    for kind in ModelKind::ALL {
        let spec = ModelSpec::new(kind).with_hypotheses(0.15, 0.35).with_total_borrowed(84.0);
        let start = Instant::now();
        let s = fit(&data, &spec, &mcmc, &mut RngStream::new(seed, 0))?;
        println!("{kind} ({:.0} ms)", start.elapsed().as_secs_f64() * 1e3);
        for t in &s.types {
            println!(
                "  {:8} {:5.1} ({:4.1}-{:4.1}) PP {:5.1}",
                t.label,
                100.0 * t.mean,
                100.0 * t.lower,
                100.0 * t.upper,
                100.0 * t.pp
            );
        }
        if let Some(b) = &s.borrowing {
            for (i, row) in b.iter().enumerate() {
                let cells: Vec<String> = row[i + 1..].iter().map(|v| format!("{v:4.1}")).collect();
                println!("  Mw {:8} {}", data.labels()[i], cells.join(" "));
            }
        }
        if let Some(m) = s.total_borrowed {
            println!("  M {m:.1} s {:?}", s.temperature);
        }
        for a in &s.acceptance {
            println!("  accept {} {:.3} (scale {:.3})", a.block, a.rate, a.scale);
        }
    }
    Ok(())
}
