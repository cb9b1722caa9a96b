//! The logarithmic font-service launch-time model.
//!
//! Empirically, mean launch time scales with the logarithm of the number of
//! font files visible on the font path: relative to a measured baseline
//! source `b`, the predicted time against a source carrying `F_a` fonts is
//!
//! ```text
//! R_a = R_b * log(F_a) / log(F_b)
//! ```
//!
//! The ratio is invariant under the choice of logarithm base. The practical
//! punch line: a font path carrying 1000 fonts costs 3/2 of one carrying
//! 100, so paring fonts back is a cheap, high-leverage fix.
//!
//! [`table_report`] compares model predictions against measurements with a
//! signed percent error (negative = model underestimated), and
//! [`FontPathInventory`] tracks how many fonts each path element serves.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FontError {
    #[error("font count must exceed 1, got {0}")]
    BadFontCount(u64),
    #[error("baseline time must be positive and finite, got {0}")]
    BadBaselineTime(f64),
    #[error("model time must be positive and finite, got {0}")]
    BadModelTime(f64),
    #[error("measured time must be finite, got {0}")]
    BadMeasuredTime(f64),
    #[error("inventory element {path:?}: font count must be at least 1")]
    EmptyElement { path: String },
    #[error("duplicate inventory path {0:?}")]
    DuplicatePath(String),
    #[error("{0}")]
    Parse(String),
}

/// Baseline for the logarithmic model: a measured launch time against a
/// known font count. The count must exceed 1 (log 1 = 0 would zero the
/// denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FontModel {
    pub baseline_time: f64,
    pub baseline_fonts: u64,
}

impl FontModel {
    pub fn new(baseline_time: f64, baseline_fonts: u64) -> Result<Self, FontError> {
        if !(baseline_time > 0.0 && baseline_time.is_finite()) {
            return Err(FontError::BadBaselineTime(baseline_time));
        }
        if baseline_fonts <= 1 {
            return Err(FontError::BadFontCount(baseline_fonts));
        }
        Ok(FontModel {
            baseline_time,
            baseline_fonts,
        })
    }

    /// Predicted launch time against a source carrying `fonts` font files.
    pub fn predict(&self, fonts: u64) -> Result<f64, FontError> {
        if fonts <= 1 {
            return Err(FontError::BadFontCount(fonts));
        }
        Ok(self.baseline_time * (fonts as f64).ln() / (self.baseline_fonts as f64).ln())
    }
}

/// Signed percent error of a model prediction: `100 * (model - measured) /
/// model`. Negative means the model underestimated the measurement. Always
/// compute this from the unrounded model value; rounding first visibly
/// shifts the second decimal.
pub fn percent_error(model_time: f64, measured_time: f64) -> Result<f64, FontError> {
    if !(model_time > 0.0 && model_time.is_finite()) {
        return Err(FontError::BadModelTime(model_time));
    }
    if !measured_time.is_finite() {
        return Err(FontError::BadMeasuredTime(measured_time));
    }
    Ok(100.0 * (model_time - measured_time) / model_time)
}

/// One comparison row: a labeled font source with its count and measured
/// launch time.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub fonts: u64,
    pub measured: f64,
}

/// Header of the comparison table emitted by [`table_report`].
const TABLE_HEADER: &str = "Times       Fonts   Measured      Model    %Error";

/// Renders a fixed-width model-vs-measured comparison table.
///
/// Each row shows label, font count, measured time, predicted time (two
/// decimals), and signed percent error (two decimals). The row matching the
/// model baseline exactly (same count, same measured time) shows `N/A` — it
/// is the normalization point, so its error is vacuous. Rows that fail
/// validation are skipped and reported in the returned diagnostics; the
/// rest of the table still renders.
pub fn table_report(model: &FontModel, rows: &[TableRow]) -> (String, Vec<String>) {
    let mut out = String::new();
    let mut diagnostics = Vec::new();
    writeln!(out, "{TABLE_HEADER}").unwrap();
    for row in rows {
        let predicted = match model.predict(row.fonts) {
            Ok(p) => p,
            Err(e) => {
                diagnostics.push(format!("row {:?}: {e}", row.label));
                continue;
            }
        };
        if !row.measured.is_finite() {
            diagnostics.push(format!(
                "row {:?}: measured time must be finite, got {}",
                row.label, row.measured
            ));
            continue;
        }
        let is_baseline =
            row.fonts == model.baseline_fonts && row.measured == model.baseline_time;
        let error_cell = if is_baseline {
            format!("{:>10}", "N/A")
        } else {
            // Unwrap is safe: predict() output is positive and finite here.
            format!("{:>10.2}", percent_error(predicted, row.measured).unwrap())
        };
        writeln!(
            out,
            "{:<8}{:>9}{:>11.2}{:>11.2}{error_cell}",
            row.label, row.fonts, row.measured, predicted
        )
        .unwrap();
    }
    (out, diagnostics)
}

/// What kind of store backs a font-path element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FontKind {
    XFontServer,
    NfsMounted,
    Resident,
    BootFilesystem,
}

impl std::fmt::Display for FontKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FontKind::XFontServer => "x-font-server",
            FontKind::NfsMounted => "nfs-mounted",
            FontKind::Resident => "resident",
            FontKind::BootFilesystem => "boot-filesystem",
        })
    }
}

impl std::str::FromStr for FontKind {
    type Err = FontError;

    fn from_str(s: &str) -> Result<Self, FontError> {
        match s {
            "x-font-server" => Ok(FontKind::XFontServer),
            "nfs-mounted" => Ok(FontKind::NfsMounted),
            "resident" => Ok(FontKind::Resident),
            "boot-filesystem" => Ok(FontKind::BootFilesystem),
            other => Err(FontError::Parse(format!("unknown font kind {other:?}"))),
        }
    }
}

/// One font-path element: where it lives, how many fonts it serves.
#[derive(Debug, Clone, PartialEq)]
pub struct FontPathElement {
    pub path: String,
    pub fonts: u64,
    pub kind: FontKind,
}

/// The full font path of a display: an ordered list of elements with
/// unique path names and nonzero counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FontPathInventory {
    pub elements: Vec<FontPathElement>,
}

impl FontPathInventory {
    pub fn new(elements: Vec<FontPathElement>) -> Result<Self, FontError> {
        let mut seen = std::collections::HashSet::new();
        for element in &elements {
            if element.fonts < 1 {
                return Err(FontError::EmptyElement {
                    path: element.path.clone(),
                });
            }
            if !seen.insert(element.path.as_str()) {
                return Err(FontError::DuplicatePath(element.path.clone()));
            }
        }
        Ok(FontPathInventory { elements })
    }

    /// Total fonts across every element.
    pub fn total(&self) -> u64 {
        self.elements.iter().map(|e| e.fonts).sum()
    }
}

/// Total font count of an inventory; see [`FontPathInventory::total`].
pub fn inventory_total(inventory: &FontPathInventory) -> u64 {
    inventory.total()
}

/// Parses an inventory file: one `<path>\t<count>\t<kind>` line per element.
/// Blank lines and `#` comments are ignored.
pub fn parse_inventory(text: &str) -> Result<FontPathInventory, FontError> {
    let mut elements = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(FontError::Parse(format!(
                "line {}: expected `path\\tcount\\tkind`, got {line:?}",
                idx + 1
            )));
        }
        let fonts: u64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| FontError::Parse(format!("line {}: bad count: {e}", idx + 1)))?;
        let kind: FontKind = fields[2].trim().parse()?;
        elements.push(FontPathElement {
            path: fields[0].to_string(),
            fonts,
            kind,
        });
    }
    FontPathInventory::new(elements)
}

/// Parses comparison rows: one `<label>\t<fonts>\t<measured>` line per row.
/// Blank lines and `#` comments are ignored.
pub fn parse_rows(text: &str) -> Result<Vec<TableRow>, FontError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(FontError::Parse(format!(
                "line {}: expected `label\\tfonts\\tmeasured`, got {line:?}",
                idx + 1
            )));
        }
        let fonts: u64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| FontError::Parse(format!("line {}: bad fonts: {e}", idx + 1)))?;
        let measured: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| FontError::Parse(format!("line {}: bad measured: {e}", idx + 1)))?;
        rows.push(TableRow {
            label: fields[0].to_string(),
            fonts,
            measured,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// The classic four-row comparison: baseline Rz2 at 109 fonts / 9.41 s.
    fn classic_rows() -> Vec<TableRow> {
        vec![
            TableRow { label: "Rz2".into(), fonts: 109, measured: 9.41 },
            TableRow { label: "Rz1".into(), fonts: 4781, measured: 17.01 },
            TableRow { label: "Rfs1".into(), fonts: 8371, measured: 18.57 },
            TableRow { label: "Rfs2".into(), fonts: 7113, measured: 16.72 },
        ]
    }

    #[test]
    fn predict_reproduces_the_classic_model_column() {
        let model = FontModel::new(9.41, 109).unwrap();
        assert!((model.predict(4781).unwrap() - 16.99).abs() < 0.01);
        assert!((model.predict(8371).unwrap() - 18.12).abs() < 0.01);
        assert!((model.predict(7113).unwrap() - 17.79).abs() < 0.01);
    }

    #[test]
    fn predict_identity_at_baseline() {
        let model = FontModel::new(9.41, 109).unwrap();
        assert_eq!(model.predict(109).unwrap(), 9.41);
    }

    #[test]
    fn thousand_over_hundred_is_exactly_three_halves() {
        let model = FontModel::new(4.2, 77).unwrap();
        let ratio = model.predict(1000).unwrap() / model.predict(100).unwrap();
        // ln(1000)/ln(100) = 3/2; f64 evaluation lands within a few ulps.
        assert!((ratio - 1.5).abs() <= 1e-12, "ratio {ratio}");
    }

    #[test]
    fn percent_error_reproduces_the_classic_error_column() {
        let model = FontModel::new(9.41, 109).unwrap();
        let rz1 = percent_error(model.predict(4781).unwrap(), 17.01).unwrap();
        let rfs1 = percent_error(model.predict(8371).unwrap(), 18.57).unwrap();
        let rfs2 = percent_error(model.predict(7113).unwrap(), 16.72).unwrap();
        assert!((rz1 - -0.09).abs() < 0.02, "rz1 {rz1}");
        assert!((rfs1 - -2.50).abs() < 0.05, "rfs1 {rfs1}");
        assert!((rfs2 - 6.02).abs() < 0.05, "rfs2 {rfs2}");
    }

    #[test]
    fn percent_error_identity_is_zero() {
        assert_eq!(percent_error(9.41, 9.41).unwrap(), 0.0);
    }

    #[test]
    fn percent_error_rejects_nonpositive_model_time() {
        assert!(percent_error(0.0, 1.0).is_err());
        assert!(percent_error(-2.0, 1.0).is_err());
        assert!(percent_error(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn model_rejects_degenerate_baselines() {
        assert!(FontModel::new(9.41, 1).is_err());
        assert!(FontModel::new(9.41, 0).is_err());
        assert!(FontModel::new(0.0, 109).is_err());
        assert!(FontModel::new(-1.0, 109).is_err());
        let model = FontModel::new(9.41, 109).unwrap();
        assert!(model.predict(1).is_err());
        assert!(model.predict(0).is_err());
    }

    #[test]
    fn table_report_classic_four_rows() {
        let model = FontModel::new(9.41, 109).unwrap();
        let (table, diags) = table_report(&model, &classic_rows());
        assert!(diags.is_empty());
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], TABLE_HEADER);
        assert!(lines[1].starts_with("Rz2"));
        assert!(lines[1].ends_with("N/A"), "baseline row: {}", lines[1]);
        assert!(lines[1].contains("9.41"));
        assert!(lines[2].contains("16.99") && lines[2].ends_with("-0.09"));
        assert!(lines[3].contains("18.12") && lines[3].ends_with("-2.50"));
        assert!(lines[4].contains("17.79") && lines[4].ends_with("6.02"));
    }

    #[test]
    fn table_report_empty_rows_is_header_only() {
        let model = FontModel::new(9.41, 109).unwrap();
        let (table, diags) = table_report(&model, &[]);
        assert_eq!(table, format!("{TABLE_HEADER}\n"));
        assert!(diags.is_empty());
    }

    #[test]
    fn table_report_skips_bad_rows_but_keeps_good_ones() {
        let model = FontModel::new(9.41, 109).unwrap();
        let rows = vec![
            TableRow { label: "bad".into(), fonts: 1, measured: 5.0 },
            TableRow { label: "good".into(), fonts: 4781, measured: 17.01 },
        ];
        let (table, diags) = table_report(&model, &rows);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].contains("bad"));
        assert!(table.contains("good"));
        assert!(!table.contains("bad"));
    }

    /// The six font sources on the investigated display's path.
    fn classic_inventory() -> FontPathInventory {
        FontPathInventory::new(vec![
            FontPathElement { path: "tcp/fs001.acme.com:7000".into(), fonts: 8371, kind: FontKind::XFontServer },
            FontPathElement { path: "tcp/fs002.acme.com:7000".into(), fonts: 7113, kind: FontKind::XFontServer },
            FontPathElement { path: "/xterms/teknc305/boot/".into(), fonts: 96, kind: FontKind::BootFilesystem },
            FontPathElement { path: "resident/".into(), fonts: 13, kind: FontKind::Resident },
            FontPathElement { path: "tcp/zeus.acme.com:7100".into(), fonts: 4781, kind: FontKind::NfsMounted },
            FontPathElement { path: "tcp/kepler.acme.com:7100".into(), fonts: 6237, kind: FontKind::NfsMounted },
        ])
        .unwrap()
    }

    #[test]
    fn inventory_totals() {
        let inv = classic_inventory();
        assert_eq!(inventory_total(&inv), 26611);

        let servers_only = FontPathInventory::new(
            inv.elements
                .iter()
                .filter(|e| e.kind == FontKind::XFontServer)
                .cloned()
                .collect(),
        )
        .unwrap();
        // The two X font servers alone already exceed 15,000 fonts.
        assert_eq!(servers_only.total(), 15484);

        let single = FontPathInventory::new(vec![FontPathElement {
            path: "resident/".into(),
            fonts: 13,
            kind: FontKind::Resident,
        }])
        .unwrap();
        assert_eq!(single.total(), 13);
    }

    #[test]
    fn inventory_validation() {
        assert!(matches!(
            FontPathInventory::new(vec![FontPathElement {
                path: "x".into(),
                fonts: 0,
                kind: FontKind::Resident,
            }]),
            Err(FontError::EmptyElement { .. })
        ));
        assert!(matches!(
            FontPathInventory::new(vec![
                FontPathElement { path: "x".into(), fonts: 1, kind: FontKind::Resident },
                FontPathElement { path: "x".into(), fonts: 2, kind: FontKind::Resident },
            ]),
            Err(FontError::DuplicatePath(_))
        ));
    }

    #[test]
    fn inventory_file_round_trip() {
        let text = "\
# font path of the investigated display
tcp/fs001.acme.com:7000\t8371\tx-font-server
resident/\t13\tresident
";
        let inv = parse_inventory(text).unwrap();
        assert_eq!(inv.elements.len(), 2);
        assert_eq!(inv.total(), 8384);
        assert!(parse_inventory("oops\t1\n").is_err());
        assert!(parse_inventory("p\tmany\tresident\n").is_err());
        assert!(parse_inventory("p\t3\tmarble\n").is_err());
    }

    #[test]
    fn rows_file_parses() {
        let rows = parse_rows("Rz2\t109\t9.41\nRz1\t4781\t17.01\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].fonts, 4781);
        assert!(parse_rows("Rz2 109 9.41\n").is_err());
    }

    proptest! {
        /// The prediction is invariant under logarithm base: computing with
        /// log10 or log2 instead of ln agrees to 1e-9 relative.
        #[test]
        fn base_invariance(
            baseline_time in 0.1f64..1e3,
            baseline_fonts in 2u64..100_000,
            fonts in 2u64..100_000,
        ) {
            let model = FontModel::new(baseline_time, baseline_fonts).unwrap();
            let natural = model.predict(fonts).unwrap();
            let ten = baseline_time * (fonts as f64).log10() / (baseline_fonts as f64).log10();
            let two = baseline_time * (fonts as f64).log2() / (baseline_fonts as f64).log2();
            prop_assert!((natural - ten).abs() <= 1e-9 * natural.abs().max(1.0));
            prop_assert!((natural - two).abs() <= 1e-9 * natural.abs().max(1.0));
        }

        /// Strictly more fonts means a strictly longer prediction.
        #[test]
        fn monotone_in_font_count(
            baseline_fonts in 2u64..100_000,
            fonts in 2u64..99_999,
        ) {
            let model = FontModel::new(5.0, baseline_fonts).unwrap();
            prop_assert!(model.predict(fonts + 1).unwrap() > model.predict(fonts).unwrap());
        }

        /// Doubling the baseline time doubles every prediction.
        #[test]
        fn linear_in_baseline_time(
            baseline_time in 0.1f64..1e3,
            fonts in 2u64..100_000,
        ) {
            let one = FontModel::new(baseline_time, 109).unwrap().predict(fonts).unwrap();
            let two = FontModel::new(2.0 * baseline_time, 109).unwrap().predict(fonts).unwrap();
            prop_assert!((two - 2.0 * one).abs() <= 1e-9 * two.abs().max(1.0));
        }

        /// Sign contract: the error is negative exactly when the model
        /// undershoots the measurement.
        #[test]
        fn error_sign_matches_under_over(
            model_time in 0.1f64..1e3,
            measured in 0.0f64..1e3,
        ) {
            let err = percent_error(model_time, measured).unwrap();
            if model_time < measured {
                prop_assert!(err < 0.0);
            } else if model_time > measured {
                prop_assert!(err > 0.0);
            } else {
                prop_assert_eq!(err, 0.0);
            }
        }
    }
}
