//! Generates standalone matplotlib scripts from sweep CSVs.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::sweep::read_rows;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    /// On-grid error against M, one curve per method and M rule.
    Fig1,
    /// Constant C against N, one curve per method and M rule.
    Fig3,
    /// Off-grid error against M, one curve per method and grid size.
    Fig6,
}

impl PlotStyle {
    pub fn name(self) -> &'static str {
        match self {
            PlotStyle::Fig1 => "fig1",
            PlotStyle::Fig3 => "fig3",
            PlotStyle::Fig6 => "fig6",
        }
    }

    fn axes(self) -> (&'static str, &'static str, &'static [&'static str]) {
        match self {
            PlotStyle::Fig1 => ("M", "E_tau", &["method", "m_rule"]),
            PlotStyle::Fig3 => ("N", "C", &["method", "m_rule"]),
            PlotStyle::Fig6 => ("M", "E_tau_tilde", &["method", "K"]),
        }
    }
}

impl fmt::Display for PlotStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fig1" => Ok(PlotStyle::Fig1),
            "fig3" => Ok(PlotStyle::Fig3),
            "fig6" => Ok(PlotStyle::Fig6),
            other => Err(Error::Config(format!("unknown plot style '{other}'"))),
        }
    }
}

fn py_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn script(style: PlotStyle, csv_path: &Path, domain: &str, function: &str, d: usize, png: &str) -> String {
    let (x, y, keys) = style.axes();
    let keys: Vec<String> = keys.iter().map(|k| py_str(k)).collect();
    format!(
        r#"import csv
import math
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

CSV = {csv}
DOMAIN, FUNCTION, D = {domain}, {function}, "{d}"
X, Y, KEYS = {x}, {y}, [{keys}]

with open(CSV, newline="", encoding="utf-8") as fh:
    rows = [r for r in csv.DictReader(fh)
            if r["domain"] == DOMAIN and r["function"] == FUNCTION and r["d"] == D]
means = [r for r in rows if r["trial"] == "mean"]
if means:
    rows = means

curves = defaultdict(lambda: defaultdict(list))
for r in rows:
    if not r[Y]:
        continue
    value = float(r[Y])
    if not math.isfinite(value):
        continue
    label = " ".join(r[k] for k in KEYS)
    curves[label][float(r[X])].append(value)

fig, ax = plt.subplots(figsize=(5, 4))
for label in sorted(curves):
    xs = sorted(curves[label])
    ys = [sum(curves[label][v]) / len(curves[label][v]) for v in xs]
    ax.semilogy(xs, ys, marker="o", markersize=3, label=label)
ax.set_xlabel(X)
ax.set_ylabel(Y)
ax.set_title(f"{{DOMAIN}}, {{FUNCTION}}, d={{D}}")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig({png}, dpi=150)
"#,
        csv = py_str(&csv_path.to_string_lossy()),
        domain = py_str(domain),
        function = py_str(function),
        x = py_str(x),
        y = py_str(y),
        keys = keys.join(", "),
        png = py_str(png),
    )
}

/// Writes one script per (domain, function, d) panel into `out_dir`.
pub fn emit_plots(csv_path: &Path, style: PlotStyle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_rows(csv_path)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{} contains no result rows", csv_path.display())));
    }
    let panels: BTreeSet<(String, String, usize)> = rows
        .iter()
        .map(|r| (r.domain.clone(), r.function.clone(), r.d))
        .collect();
    std::fs::create_dir_all(out_dir)?;
    let csv_abs = std::fs::canonicalize(csv_path)?;
    let mut written = Vec::new();
    for (domain, function, d) in panels {
        let stem = format!("{}_{}_{}_d{d}", style.name(), sanitize(&domain), sanitize(&function));
        let png = out_dir.join(format!("{stem}.png"));
        let path = out_dir.join(format!("{stem}.py"));
        std::fs::write(
            &path,
            script(style, &csv_abs, &domain, &function, d, &png.to_string_lossy()),
        )?;
        written.push(path);
    }
    Ok(written)
}
