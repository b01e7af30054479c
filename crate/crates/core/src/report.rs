//! Study report serialization (JSON for round trips, CSV for analysis
//! tools, Markdown for reading) and the response-data CSV format shared by
//! the simulate and estimate commands.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::experiment::{StudyColumn, StudyReport};
use crate::graph::{ExposureVector, TreatmentVector};

pub fn to_json(report: &StudyReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn from_json(text: &str) -> Result<StudyReport> {
    Ok(serde_json::from_str(text)?)
}

const CSV_HEADER: &str = "record,model,beta0,beta1,beta2,estimator,replication,estimate,\
true_ate,n_success,n_failed,n_nonconverged,mean_estimate,sd_estimate,skewness,mse,\
mse_ci_low,mse_ci_high,crlb,best,welch_p,treated_count,n_control_saturated,\
n_control_partial,n_treated_saturated,n_treated_partial";

const CSV_WIDTH: usize = 26;

fn push_row(out: &mut String, fields: &[String]) {
    debug_assert_eq!(fields.len(), CSV_WIDTH);
    // no field can contain a comma: every column is a number, a flag or a
    // kebab-case label
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Flattens a report into one CSV stream: a `summary` record per (effect
/// configuration, estimator) cell, then a `raw` record per replication of
/// each cell so histograms can be drawn without rerunning the study.
/// Run-level metadata (seed, graph, noise scale) lives in the JSON export.
pub fn to_csv(report: &StudyReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');

    for column in &report.columns {
        for cell in &column.cells {
            let mut row = vec![String::new(); CSV_WIDTH];
            row[0] = "summary".into();
            row[1] = report.model.to_string();
            row[2] = column.beta[0].to_string();
            row[3] = column.beta[1].to_string();
            row[4] = column.beta[2].to_string();
            row[5] = cell.estimator.to_string();
            row[8] = column.true_ate.to_string();
            row[9] = cell.n_success.to_string();
            row[10] = cell.n_failed.to_string();
            row[11] = cell.n_nonconverged.to_string();
            if let Some(stats) = &cell.stats {
                row[12] = stats.mean_estimate.to_string();
                row[13] = stats.sd_estimate.to_string();
                row[14] = stats.skewness.to_string();
                row[15] = stats.mse.to_string();
                row[16] = stats.mse_ci_low.to_string();
                row[17] = stats.mse_ci_high.to_string();
            }
            row[18] = opt(cell.crlb);
            row[19] = cell.best.to_string();
            row[20] = opt(cell.welch_p);
            row[21] = opt(column.treated_count);
            if let Some(sizes) = &column.class_sizes {
                row[22] = sizes.control_saturated.to_string();
                row[23] = sizes.control_partial.to_string();
                row[24] = sizes.treated_saturated.to_string();
                row[25] = sizes.treated_partial.to_string();
            }
            push_row(&mut out, &row);
        }
    }

    for column in &report.columns {
        for cell in &column.cells {
            for (rep, estimate) in cell.estimates.iter().enumerate() {
                let mut row = vec![String::new(); CSV_WIDTH];
                row[0] = "raw".into();
                row[1] = report.model.to_string();
                row[2] = column.beta[0].to_string();
                row[3] = column.beta[1].to_string();
                row[4] = column.beta[2].to_string();
                row[5] = cell.estimator.to_string();
                row[6] = rep.to_string();
                row[7] = opt(*estimate);
                push_row(&mut out, &row);
            }
        }
    }
    out
}

fn beta_label(beta: &[f64; 3]) -> String {
    format!("({}, {}, {})", beta[0], beta[1], beta[2])
}

fn markdown_cell(column: &StudyColumn, idx: usize, alpha: f64) -> String {
    let cell = &column.cells[idx];
    let mut text = match &cell.stats {
        Some(stats) => {
            let mse = format!("{:.5}", stats.mse);
            let starred = matches!(cell.welch_p, Some(p) if p < alpha);
            match (cell.best, starred) {
                (true, _) => format!("**{mse}**"),
                (false, true) => format!("{mse}*"),
                (false, false) => mse,
            }
        }
        None => "n/a".to_string(),
    };
    if cell.n_failed > 0 {
        let _ = write!(text, " ({} failed)", cell.n_failed);
    }
    text
}

/// Renders the MSE table: estimators as rows, effect configurations as
/// columns, the per-column best in bold and entries significantly above it
/// starred at the report's alpha.
pub fn to_markdown(report: &StudyReport) -> String {
    let mut out = String::new();
    out.push_str("# Study report\n\n");
    let _ = writeln!(
        out,
        "- graph: {} ({} nodes, {} edges)",
        report.graph.label, report.graph.n_nodes, report.graph.n_edges
    );
    let _ = writeln!(out, "- model: {}", report.model);
    let _ = writeln!(out, "- replications: {}", report.replications);
    let _ = writeln!(out, "- seed: {}", report.seed);
    let _ = writeln!(
        out,
        "- sigma: {}, tau: {}, treatment probability: {}",
        report.sigma, report.tau, report.treatment_probability
    );
    let _ = writeln!(
        out,
        "- assignment: {}",
        if report.rerandomize {
            "redrawn every replication"
        } else {
            "one draw per configuration"
        }
    );

    let _ = write!(out, "\n## {} responses\n\n", report.model);
    if let Some(first) = report.columns.first() {
        let mut header = String::from("| estimator |");
        let mut rule = String::from("| --- |");
        for column in &report.columns {
            let _ = write!(header, " {} |", beta_label(&column.beta));
            rule.push_str(" ---: |");
        }
        out.push_str(&header);
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');

        let mut truth_row = String::from("| true ATE |");
        for column in &report.columns {
            let _ = write!(truth_row, " {:.5} |", column.true_ate);
        }
        out.push_str(&truth_row);
        out.push('\n');

        for idx in 0..first.cells.len() {
            let mut row = format!("| {} |", first.cells[idx].estimator);
            for column in &report.columns {
                let _ = write!(row, " {} |", markdown_cell(column, idx, report.alpha));
            }
            out.push_str(&row);
            out.push('\n');
        }

        // theoretical references, one row per estimator that has any
        for idx in 0..first.cells.len() {
            if !report.columns.iter().any(|c| c.cells[idx].crlb.is_some()) {
                continue;
            }
            let mut row = format!("| bound ({}) |", first.cells[idx].estimator);
            for column in &report.columns {
                match column.cells[idx].crlb {
                    Some(v) => {
                        let _ = write!(row, " {v:.5} |");
                    }
                    None => row.push_str("  |"),
                }
            }
            out.push_str(&row);
            out.push('\n');
        }
    }

    let _ = write!(
        out,
        "\nEntries are MSEs across replications. Bold marks the column minimum; `*` marks \
         an MSE significantly above it (Welch test at level {}). `bound` rows give the \
         theoretical reference where the estimator matches the generating model: a variance \
         lower bound for the regression and likelihood fits, the exact sampling MSE for the \
         saturated difference in means.\n",
        report.alpha
    );
    out
}

const RESPONSE_HEADER: &str = "node_id,z,g,y";

/// Writes `(z, g, y)` as CSV. Values round-trip exactly: floats print in
/// shortest form that parses back to the same bits, and 0/1 responses
/// print as integers.
pub fn write_response_csv<W: Write>(
    mut w: W,
    z: &TreatmentVector,
    g: &ExposureVector,
    y: &[f64],
) -> Result<()> {
    if z.len() != g.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            got: g.len(),
        });
    }
    if z.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            got: y.len(),
        });
    }
    writeln!(w, "{RESPONSE_HEADER}")?;
    for (i, ((&zi, &gi), yi)) in z.as_slice().iter().zip(g.as_slice()).zip(y).enumerate() {
        writeln!(w, "{},{},{},{}", i, u8::from(zi), gi, yi)?;
    }
    Ok(())
}

fn csv_error(line: usize, reason: impl Into<String>) -> Error {
    Error::ResponseCsv {
        line,
        reason: reason.into(),
    }
}

/// Parses the CSV written by [`write_response_csv`]. The header is
/// mandatory and node ids must run 0, 1, 2, ... so the columns stay
/// aligned with the graph they came from.
pub fn read_response_csv(text: &str) -> Result<(TreatmentVector, ExposureVector, Vec<f64>)> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    match rows.next() {
        Some((line, header)) if header != RESPONSE_HEADER => {
            return Err(csv_error(
                line,
                format!("expected header {RESPONSE_HEADER:?}, got {header:?}"),
            ));
        }
        Some(_) => {}
        None => return Err(csv_error(1, format!("missing header {RESPONSE_HEADER:?}"))),
    }

    let mut zs = Vec::new();
    let mut gs = Vec::new();
    let mut ys = Vec::new();
    for (line, row) in rows {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(csv_error(
                line,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let node_id: usize = fields[0]
            .parse()
            .map_err(|_| csv_error(line, format!("invalid node_id {:?}", fields[0])))?;
        if node_id != zs.len() {
            return Err(csv_error(
                line,
                format!("node_id out of order: expected {}, got {node_id}", zs.len()),
            ));
        }
        zs.push(match fields[1] {
            "0" => false,
            "1" => true,
            other => return Err(csv_error(line, format!("z must be 0 or 1, got {other:?}"))),
        });
        let g: f64 = fields[2]
            .parse()
            .map_err(|_| csv_error(line, format!("invalid exposure {:?}", fields[2])))?;
        if !g.is_finite() || !(0.0..=1.0).contains(&g) {
            return Err(csv_error(line, format!("exposure must lie in [0, 1], got {g}")));
        }
        gs.push(g);
        let y: f64 = fields[3]
            .parse()
            .map_err(|_| csv_error(line, format!("invalid response {:?}", fields[3])))?;
        if !y.is_finite() {
            return Err(csv_error(line, format!("response must be finite, got {y}")));
        }
        ys.push(y);
    }

    Ok((
        TreatmentVector::new(zs),
        ExposureVector::new(gs).expect("range validated per row"),
        ys,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{ClassSizes, EstimatorKind};
    use crate::experiment::{CellStats, EstimatorCell, GraphSummary, StudyColumn, StudyReport};
    use crate::models::ModelKind;

    fn sample_report() -> StudyReport {
        let cell = |estimator, mse: f64, best: bool, welch_p: Option<f64>| EstimatorCell {
            estimator,
            n_success: 10,
            n_failed: 0,
            n_nonconverged: 0,
            stats: Some(CellStats {
                mean_estimate: 1.0,
                sd_estimate: 0.1,
                skewness: 0.0,
                mse,
                mse_ci_low: mse - 0.001,
                mse_ci_high: mse + 0.001,
            }),
            crlb: best.then_some(mse * 0.9),
            best,
            welch_p,
            estimates: (0..10).map(|i| Some(1.0 + 0.01 * i as f64)).collect(),
        };
        StudyReport {
            seed: 7,
            replications: 10,
            treatment_probability: 0.5,
            sigma: 1.0,
            tau: 0.85,
            alpha: 0.05,
            rerandomize: false,
            graph: GraphSummary {
                label: "erdos-renyi(nodes=20 mean_degree=3)".into(),
                n_nodes: 20,
                n_edges: 31,
            },
            model: ModelKind::Linear,
            columns: vec![StudyColumn {
                beta: [0.0, 1.0, 0.5],
                true_ate: 1.5,
                treated_count: Some(11),
                class_sizes: Some(ClassSizes {
                    control_saturated: 4,
                    control_partial: 5,
                    treated_saturated: 3,
                    treated_partial: 8,
                }),
                cells: vec![
                    EstimatorCell {
                        estimator: EstimatorKind::Sutva,
                        n_success: 8,
                        n_failed: 2,
                        n_nonconverged: 0,
                        stats: None,
                        crlb: None,
                        best: false,
                        welch_p: None,
                        estimates: (0..10)
                            .map(|i| (i < 8).then_some(1.0 + 0.1 * i as f64))
                            .collect(),
                    },
                    cell(EstimatorKind::LinearOls, 0.002, true, None),
                    cell(EstimatorKind::TauOls, 0.031, false, Some(0.003)),
                    cell(EstimatorKind::TauDim, 0.033, false, Some(0.21)),
                ],
            }],
        }
    }

    #[test]
    fn json_round_trips_exactly() {
        let report = sample_report();
        let text = to_json(&report).unwrap();
        assert_eq!(from_json(&text).unwrap(), report);
    }

    #[test]
    fn csv_has_summary_rows_then_raw_rows() {
        let report = sample_report();
        let csv = to_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        // header + one summary per cell + one raw per (cell, replication)
        assert_eq!(lines.len(), 1 + 4 + 4 * 10);
        assert_eq!(lines[0], CSV_HEADER);
        for line in &lines {
            assert_eq!(line.split(',').count(), CSV_WIDTH, "{line}");
        }
        // empty stats leave empty fields, class sizes land at the tail
        let sutva: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(
            &sutva[..12],
            &["summary", "linear", "0", "1", "0.5", "sutva", "", "", "1.5", "8", "2", "0"]
        );
        assert_eq!(sutva[12], "", "no stats, no mean");
        assert_eq!(sutva[19], "false");
        assert_eq!(&sutva[21..], &["11", "4", "5", "3", "8"]);
        let ols: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(ols[5], "linear-ols");
        assert_eq!(ols[12], "1", "mean estimate");
        assert_eq!(ols[15], "0.002");
        assert_eq!(ols[19], "true");
        // raw rows carry the replication index and estimate only
        let raw: Vec<&str> = lines[5].split(',').collect();
        assert_eq!(&raw[..8], &["raw", "linear", "0", "1", "0.5", "sutva", "0", "1"]);
        assert!(raw[8..].iter().all(|f| f.is_empty()));
        assert_eq!(lines[6].split(',').nth(7), Some("1.1"));
        // failed replications keep their slot with an empty estimate
        let failed: Vec<&str> = lines[13].split(',').collect();
        assert_eq!(failed[6], "8");
        assert_eq!(failed[7], "");
        let raw_count = lines.iter().filter(|l| l.starts_with("raw,")).count();
        assert_eq!(raw_count, report.replications * 4);
    }

    #[test]
    fn markdown_marks_best_and_significance() {
        let md = to_markdown(&sample_report());
        assert!(md.contains("## linear responses"), "{md}");
        assert!(md.contains("**0.00200**"), "{md}");
        assert!(md.contains("0.03100*"), "{md}");
        // p = 0.21 is not significant
        assert!(md.contains(" 0.03300 |"), "{md}");
        assert!(md.contains("n/a (2 failed)"), "{md}");
        assert!(md.contains("| true ATE | 1.50000 |"), "{md}");
        assert!(md.contains("| bound (linear-ols) | 0.00180 |"), "{md}");
        assert!(md.contains("treatment probability: 0.5"), "{md}");

        // a stricter alpha removes the star
        let mut strict = sample_report();
        strict.alpha = 0.001;
        let md = to_markdown(&strict);
        assert!(md.contains(" 0.03100 |"), "{md}");
        assert!(!md.contains("0.03100*"), "{md}");
        assert!(md.contains("level 0.001"), "{md}");
    }

    #[test]
    fn response_csv_round_trips_bit_exactly() {
        let z = TreatmentVector::new(vec![true, false, true]);
        let g = ExposureVector::new(vec![1.0 / 3.0, 0.0, std::f64::consts::FRAC_1_SQRT_2]).unwrap();
        let y = [1.0, -0.30000000000000004, 0.0];
        let mut buffer = Vec::new();
        write_response_csv(&mut buffer, &z, &g, &y).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        // binary-looking responses print as integers
        assert!(text.contains("0,1,0.3333333333333333,1\n"), "{text}");
        let (z2, g2, y2) = read_response_csv(&text).unwrap();
        assert_eq!(z.as_slice(), z2.as_slice());
        for i in 0..3 {
            assert_eq!(g.get(i).to_bits(), g2.get(i).to_bits());
            assert_eq!(y[i].to_bits(), y2[i].to_bits());
        }
    }

    #[test]
    fn response_csv_rejects_malformed_rows() {
        let err = read_response_csv("").unwrap_err();
        assert!(matches!(err, Error::ResponseCsv { line: 1, .. }));

        let err = read_response_csv("node,z,g,y\n").unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");

        let err = read_response_csv("node_id,z,g,y\n0,2,0.5,1\n").unwrap_err();
        assert!(matches!(err, Error::ResponseCsv { line: 2, .. }));
        assert!(err.to_string().contains("z must be 0 or 1"), "{err}");

        let err = read_response_csv("node_id,z,g,y\n1,1,0.5,1\n").unwrap_err();
        assert!(err.to_string().contains("out of order"), "{err}");

        let err = read_response_csv("node_id,z,g,y\n0,1,1.5,1\n").unwrap_err();
        assert!(err.to_string().contains("exposure"), "{err}");

        let err = read_response_csv("node_id,z,g,y\n0,1,0.5\n").unwrap_err();
        assert!(err.to_string().contains("4 fields"), "{err}");

        let err = read_response_csv("node_id,z,g,y\n0,1,0.5,nan\n").unwrap_err();
        assert!(err.to_string().contains("finite"), "{err}");
    }
}
