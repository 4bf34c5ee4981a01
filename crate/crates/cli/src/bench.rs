//! The `bench` subcommand: reproduce one ablation table on seeded
//! synthetic scenarios, one report file per configuration cell plus a
//! summary with direction checks.

use std::fmt::Write as _;
use std::path::Path;

use textrack_core::ablation::{cells, run_cell, AblationMode};
use textrack_core::metrics::MetricsReport;
use textrack_core::synth::{generate, ScenarioSpec};
use textrack_core::{io, Error, Result};

pub fn run(spec_path: &Path, ablate: &str, seeds: u64, out: &Path) -> Result<()> {
    let base = io::load_scenario(spec_path)?;
    let mode = AblationMode::parse(ablate).ok_or_else(|| {
        Error::Validation(format!(
            "unknown ablation '{ablate}': expected scm, embedding or distances"
        ))
    })?;
    if seeds == 0 {
        return Err(Error::Validation("need at least one seed".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;

    let table = cells(mode);
    // reports[cell][seed]
    let mut reports: Vec<Vec<MetricsReport>> = vec![Vec::new(); table.len()];
    for seed in 1..=seeds {
        let spec = ScenarioSpec { seed, ..base.clone() };
        let scenario = generate(&spec)?;
        for (ci, cell) in table.iter().enumerate() {
            let (_, report) = run_cell(&scenario, &cell.config)?;
            let stem = format!("{}_{}_seed{}", mode.as_str(), cell.name, seed);
            io::write_report(&out.join(format!("{stem}.txt")), &report)?;
            io::write_report_json(&out.join(format!("{stem}.json")), &report)?;
            reports[ci].push(report);
        }
    }

    let summary = render_summary(mode, &table, &reports, seeds);
    io::write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn render_summary(
    mode: AblationMode,
    table: &[textrack_core::ablation::AblationCell],
    reports: &[Vec<MetricsReport>],
    seeds: u64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# ablation: {} ({} seeds)", mode.as_str(), seeds);
    let _ = writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6} {:>6} {:>8} {:>8}",
        "cell", "mota", "motp", "idf1", "mm", "pm", "ml", "idsw", "prec", "recall"
    );
    for (cell, cell_reports) in table.iter().zip(reports) {
        let n = cell_reports.len() as f64;
        let mean = |f: &dyn Fn(&MetricsReport) -> f64| {
            cell_reports.iter().map(|r| f(r)).sum::<f64>() / n
        };
        let count = |f: &dyn Fn(&MetricsReport) -> usize| {
            cell_reports.iter().map(|r| f(r)).sum::<usize>()
        };
        let _ = writeln!(
            out,
            "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>6} {:>6} {:>6} {:>6} {:>8.4} {:>8.4}",
            cell.name,
            mean(&|r| r.mota),
            mean(&|r| r.motp),
            mean(&|r| r.idf1),
            count(&|r| r.mm),
            count(&|r| r.pm),
            count(&|r| r.ml),
            count(&|r| r.id_switches),
            mean(&|r| r.precision),
            mean(&|r| r.recall),
        );
    }

    match mode {
        AblationMode::Scm => {
            let off = &reports[0];
            let on = &reports[1];
            let all = off.iter().zip(on).all(|(o, n)| {
                n.mota > o.mota && n.recall > o.recall && n.ml < o.ml
            });
            for (k, (o, n)) in off.iter().zip(on).enumerate() {
                let _ = writeln!(
                    out,
                    "seed {}: mota {:.4} -> {:.4}, recall {:.4} -> {:.4}, ml {} -> {}",
                    k + 1,
                    o.mota,
                    n.mota,
                    o.recall,
                    n.recall,
                    o.ml,
                    n.ml
                );
            }
            let _ = writeln!(
                out,
                "direction (mota up, recall up, ml down on every seed): {}",
                if all { "PASS" } else { "FAIL" }
            );
        }
        AblationMode::Embedding => {
            let geometry = &reports[0];
            let combined = &reports[table.len() - 1];
            let per_seed = geometry
                .iter()
                .zip(combined)
                .all(|(g, c)| c.id_switches <= g.id_switches);
            let agg_g: usize = geometry.iter().map(|r| r.id_switches).sum();
            let agg_c: usize = combined.iter().map(|r| r.id_switches).sum();
            let _ = writeln!(
                out,
                "id switches: geometry {agg_g} vs ve+se {agg_c} (aggregate)"
            );
            let _ = writeln!(
                out,
                "direction (ve+se <= geometry per seed, fewer in aggregate): {}",
                if per_seed && agg_c < agg_g { "PASS" } else { "FAIL" }
            );
        }
        AblationMode::Distances => {
            let agg = |ci: usize| reports[ci].iter().map(|r| r.idf1).sum::<f64>();
            // Rows are de, de+dm, de+dp, de+dp+dm; the monotone chain
            // adds terms one at a time: de -> de+dp -> de+dp+dm.
            let chain = [agg(0), agg(2), agg(3)];
            let _ = writeln!(
                out,
                "aggregate idf1: de {:.4} -> de+dp {:.4} -> de+dp+dm {:.4}",
                chain[0], chain[1], chain[2]
            );
            let monotone = chain[0] <= chain[1] && chain[1] <= chain[2];
            let _ = writeln!(
                out,
                "direction (aggregate idf1 non-decreasing along the chain): {}",
                if monotone { "PASS" } else { "FAIL" }
            );
        }
    }
    out
}
