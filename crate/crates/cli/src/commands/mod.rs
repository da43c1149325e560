pub mod annotate;
pub mod curriculum;
pub mod embed;
pub mod evalcmd;
pub mod experiment;
pub mod fewshot;
pub mod prepare;
pub mod report;
pub mod score;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use cicl_core::{Error, Result};

pub(crate) fn open_reader(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

pub(crate) fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", path.display())))
}

pub(crate) fn finish<W: Write>(mut w: BufWriter<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}
