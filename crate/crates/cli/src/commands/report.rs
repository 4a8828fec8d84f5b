use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;
use crate::output::Outputs;
use crate::Context;

const SECTIONS: [(&str, &str); 6] = [
    ("oracle.csv", "Simulation truths"),
    ("wald.csv", "Wald estimates and complier shares"),
    ("estimates.csv", "OLS and 2SLS estimates"),
    ("balance.csv", "Covariate balance by instrument"),
    ("att.csv", "Dynamic effects of the parity transition"),
    ("set_diagnostics.csv", "Matched-set diagnostics"),
];

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let bad = |e: csv::Error| CliError::Schema(format!("{}: {e}", path.display()));
    let header = rdr.headers().map_err(bad)?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(bad))
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

fn markdown(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", header.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(s, "| {} |", r.join(" | "));
    }
    s
}

/// Renders every known table found in the output directory into
/// `report.md`, cells verbatim.
pub fn run(ctx: &Context) -> Result<(), CliError> {
    let mut doc = String::from("# ivpanel report\n");
    let mut found = 0;
    for (file, title) in SECTIONS {
        let path = ctx.out.join(file);
        if !path.exists() {
            continue;
        }
        let (header, rows) = read_table(&path)?;
        found += 1;
        let _ = write!(doc, "\n## {title}\n\nSource: `{file}`\n\n");
        if rows.is_empty() {
            doc.push_str("No rows.\n");
        } else {
            doc.push_str(&markdown(&header, &rows));
        }
    }
    if found == 0 {
        return Err(CliError::Config(format!("no result tables in {}", ctx.out.display())));
    }
    let mut out = Outputs::new(&ctx.out)?;
    out.write("report.md", doc.as_bytes())?;
    out.finish("report", None, &ctx.config_sha256, None)
}
