//! CSV and JSON writers. Floats are serialized with 17 significant digits so
//! files round-trip bit-exactly; CSV rows are emitted in deterministic order.

use anyhow::Result;
use std::io::Write;

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub struct CsvWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }
}

/// Open the output target: a file when a path is given, stdout otherwise.
pub fn open_out(path: Option<&str>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(std::io::BufWriter::new(std::fs::File::create(p)?))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}
