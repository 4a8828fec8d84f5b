pub mod did;
pub mod iv;
pub mod report;
pub mod simulate;

use ivpanel_core::design::{read_csv, Dataset};

use crate::error::CliError;
use crate::output::sha256_hex;
use crate::Context;

/// Reads `[input] path` with the declared schema; returns the data and the
/// hash of the input bytes.
fn load_input(ctx: &Context) -> Result<(Dataset, String), CliError> {
    let path = ctx.config.input_path(&ctx.config_dir)?;
    let bytes = std::fs::read(&path).map_err(CliError::io(&path))?;
    let ds = read_csv(bytes.as_slice(), &ctx.config.schema()?)?;
    log::info!("read {} rows x {} columns from {}", ds.nrows(), ds.ncols(), path.display());
    Ok((ds, sha256_hex(&bytes)))
}

/// Fails with every referenced column absent from the input.
fn check_columns<'a>(ds: &Dataset, referenced: impl IntoIterator<Item = &'a String>) -> Result<(), CliError> {
    let mut missing: Vec<&str> = Vec::new();
    for c in referenced {
        if !ds.has_column(c) && !missing.contains(&c.as_str()) {
            missing.push(c);
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Schema(format!(
            "columns not in input: {}; input has: {}",
            missing.join(", "),
            ds.names().join(", ")
        )))
    }
}
