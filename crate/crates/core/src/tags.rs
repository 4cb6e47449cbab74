//! Detector time tags and their CSV form `channel,time_ps,window,cycle`.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Detector {
    S1,
    S2,
    AS1,
    AS2,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::S1, Detector::S2, Detector::AS1, Detector::AS2];

    pub fn is_stokes(self) -> bool {
        matches!(self, Detector::S1 | Detector::S2)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One detection event. `time_ps` is absolute from the start of the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TagRecord {
    pub channel: Detector,
    pub time_ps: i64,
    pub window: u32,
    pub cycle: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagStream {
    pub records: Vec<TagRecord>,
}

impl TagStream {
    pub fn new(mut records: Vec<TagRecord>) -> Self {
        sort_records(&mut records);
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, d: Detector) -> usize {
        self.records.iter().filter(|r| r.channel == d).count()
    }

    /// Largest cycle index present, plus one.
    pub fn cycles(&self) -> u32 {
        self.records.iter().map(|r| r.cycle + 1).max().unwrap_or(0)
    }

    /// Contiguous sub-slices, one per cycle, in cycle order.
    pub fn by_cycle(&self) -> Vec<&[TagRecord]> {
        self.records
            .chunk_by(|a, b| a.cycle == b.cycle)
            .collect()
    }

    /// Shift every timestamp by `dt_ps`.
    pub fn translated(&self, dt_ps: i64) -> TagStream {
        let records = self
            .records
            .iter()
            .map(|r| TagRecord { time_ps: r.time_ps + dt_ps, ..*r })
            .collect();
        TagStream { records }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(r).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<TagStream> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        if header.iter().collect::<Vec<_>>() != ["channel", "time_ps", "window", "cycle"] {
            return Err(Error::Parse { line: 1, msg: "expected header channel,time_ps,window,cycle".into() });
        }
        let mut records = Vec::new();
        for (i, row) in rd.deserialize::<TagRecord>().enumerate() {
            records.push(row.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?);
        }
        Ok(TagStream::new(records))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TagStream> {
        TagStream::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Cycle, then time, then channel.
pub fn sort_records(records: &mut [TagRecord]) {
    records.sort_unstable_by_key(|r| (r.cycle, r.time_ps, r.channel, r.window));
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse { line, msg: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip() {
        let s = TagStream::new(vec![
            TagRecord { channel: Detector::AS2, time_ps: 50, window: 0, cycle: 0 },
            TagRecord { channel: Detector::S1, time_ps: 10, window: 0, cycle: 0 },
            TagRecord { channel: Detector::S2, time_ps: 9_000_000, window: 3, cycle: 1 },
        ]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("channel,time_ps,window,cycle\nS1,10,0,0\n"));
        assert_eq!(TagStream::read_csv(&buf[..]).unwrap(), s);
        assert_eq!(s.by_cycle().len(), 2);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = "channel,time_ps,window,cycle\nS1,10,0,0\nX9,1,0,0\n";
        match TagStream::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(TagStream::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
