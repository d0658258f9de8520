use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid_model::{GridGraph, NodeId};
use crate::moments::VoltageSamples;

/// Header of node ids, then one row of ε values per sample.
pub fn write_samples<W: Write>(samples: &VoltageSamples, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(samples.nodes().iter().map(|n| n.0.to_string()))?;
    for row in samples.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(input: R) -> Result<VoltageSamples> {
    let mut r = csv::Reader::from_reader(input);
    let nodes = r
        .headers()?
        .iter()
        .map(|h| {
            h.trim()
                .parse::<u32>()
                .map(NodeId)
                .map_err(|_| Error::Parse(format!("bad node id '{h}' in header")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = VoltageSamples::new(nodes);
    let mut row = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        row.clear();
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("sample row {}: bad value '{field}'", i + 1)))?;
            row.push(v);
        }
        samples
            .push_row(&row)
            .map_err(|e| Error::Parse(format!("sample row {}: {e}", i + 1)))?;
    }
    Ok(samples)
}

/// Reorder columns to the grid's load order. Every load must be present;
/// extra columns (e.g. substations) are dropped.
pub fn align_samples(samples: &VoltageSamples, grid: &GridGraph) -> Result<VoltageSamples> {
    if samples.nodes() == grid.loads() {
        return Ok(samples.clone());
    }
    if let Some(extra) = samples
        .nodes()
        .iter()
        .find(|id| grid.load_index(**id).is_none())
    {
        return Err(Error::Validation(format!(
            "sample column {extra} is not a load node of the grid"
        )));
    }
    let cols = grid
        .loads()
        .iter()
        .map(|id| {
            samples.nodes().iter().position(|n| n == id).ok_or_else(|| {
                Error::Validation(format!("sample file has no column for load node {id}"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = VoltageSamples::new(grid.loads().to_vec());
    let mut buf = vec![0.0; cols.len()];
    for row in samples.rows() {
        for (b, &c) in buf.iter_mut().zip(&cols) {
            *b = row[c];
        }
        out.push_row(&buf)?;
    }
    Ok(out)
}
