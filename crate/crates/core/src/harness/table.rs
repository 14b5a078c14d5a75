//! CSV form of sweep results.
//!
//! Floats are written in their shortest round-trip representation, so every
//! value reparses to the identical `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CellResult;
use crate::solvers::SolverKind;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "solver,n,m,l,k,sigma,pc,delta,rho,trials,successes,mean_mu,mean_iterations,mean_wall_ms";

#[derive(Serialize, Deserialize)]
struct Row {
    solver: SolverKind,
    n: usize,
    m: usize,
    l: usize,
    k: usize,
    sigma: f64,
    pc: f64,
    delta: f64,
    rho: f64,
    trials: usize,
    successes: usize,
    mean_mu: f64,
    mean_iterations: f64,
    mean_wall_ms: f64,
}

impl From<&CellResult> for Row {
    fn from(c: &CellResult) -> Self {
        Self {
            solver: c.solver,
            n: c.n,
            m: c.m,
            l: c.l,
            k: c.k,
            sigma: c.sigma,
            pc: c.pc,
            delta: c.delta,
            rho: c.rho,
            trials: c.trials,
            successes: c.successes,
            mean_mu: c.mean_mu,
            mean_iterations: c.mean_iterations,
            mean_wall_ms: c.mean_wall_ms,
        }
    }
}

impl From<Row> for CellResult {
    fn from(r: Row) -> Self {
        Self {
            solver: r.solver,
            n: r.n,
            m: r.m,
            l: r.l,
            k: r.k,
            sigma: r.sigma,
            pc: r.pc,
            delta: r.delta,
            rho: r.rho,
            trials: r.trials,
            successes: r.successes,
            mean_mu: r.mean_mu,
            mean_iterations: r.mean_iterations,
            mean_wall_ms: r.mean_wall_ms,
            failures: Vec::new(),
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

pub fn write_csv_to<W: Write>(results: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for r in results {
        w.serialize(Row::from(r)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<CellResult>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers().map_err(csv_error)?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {CSV_HEADER:?}"),
        });
    }
    let mut out = Vec::new();
    for (idx, row) in rd.deserialize::<Row>().enumerate() {
        let row = row.map_err(csv_error)?;
        if row.successes > row.trials {
            return Err(Error::Parse {
                line: idx + 2,
                message: format!("{} successes out of {} trials", row.successes, row.trials),
            });
        }
        out.push(row.into());
    }
    Ok(out)
}

pub fn write_csv(results: &[CellResult], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(results, std::io::BufWriter::new(file))
}

pub fn read_csv(path: &Path) -> Result<Vec<CellResult>> {
    read_csv_from(std::io::BufReader::new(std::fs::File::open(path)?))
}
