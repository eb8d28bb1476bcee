pub mod correlators;
pub mod decoherence;
pub mod langevin;
pub mod lattice_check;
pub mod mpp;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::CliError;

pub fn create_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

pub fn writer(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    let file = File::create(&path)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}
