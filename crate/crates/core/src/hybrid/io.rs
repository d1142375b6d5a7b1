//! Arc serialisation as CSV.
//!
//! Metadata lines start with `#`; the first non-comment line names the
//! columns `t,j,<labels>`. A jump shows up as two consecutive rows sharing
//! `t` with `j` differing by one.

use std::io::{Read, Write};

use thiserror::Error;

use super::arc::{HybridArc, Segment};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed arc csv: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvMeta {
    pub scenario: String,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; omitted when `None`.
    pub timestamp: Option<u64>,
    pub extra: Vec<(String, String)>,
}

impl CsvMeta {
    pub fn new(scenario: impl Into<String>) -> Self {
        Self {
            scenario: scenario.into(),
            ..Self::default()
        }
    }

    pub fn stamped(mut self) -> Self {
        self.timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        self
    }
}

pub fn write_arc_csv<W: Write>(
    mut w: W,
    arc: &HybridArc,
    labels: &[String],
    meta: &CsvMeta,
) -> Result<(), CsvError> {
    if labels.len() != arc.dim {
        return Err(CsvError::Format(format!(
            "{} labels for a {}-dimensional arc",
            labels.len(),
            arc.dim
        )));
    }
    writeln!(w, "# scenario: {}", meta.scenario)?;
    if let Some(e) = meta.epsilon {
        writeln!(w, "# epsilon: {e}")?;
    }
    if let Some(s) = meta.seed {
        writeln!(w, "# seed: {s}")?;
    }
    for (k, v) in &meta.extra {
        writeln!(w, "# {k}: {v}")?;
    }
    if let Some(ts) = meta.timestamp {
        writeln!(w, "# timestamp: {ts}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string(), "j".to_string()];
    header.extend(labels.iter().cloned());
    out.write_record(&header)?;
    let mut row = Vec::with_capacity(arc.dim + 2);
    for (p, x) in arc.samples() {
        row.clear();
        row.push(p.t.to_string());
        row.push(p.j.to_string());
        row.extend(x.iter().map(f64::to_string));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses an arc written by [`write_arc_csv`]; returns the column labels too.
pub fn read_arc_csv<R: Read>(r: R) -> Result<(HybridArc, Vec<String>), CsvError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "t" || &headers[1] != "j" {
        return Err(CsvError::Format("expected leading columns t,j".into()));
    }
    let labels: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut arc = HybridArc::new(labels.len());
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, CsvError> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| CsvError::Format(format!("bad number {:?}", &rec[i])))
        };
        let t = num(0)?;
        let j: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| CsvError::Format(format!("bad jump index {:?}", &rec[1])))?;
        let x = (2..rec.len()).map(num).collect::<Result<Vec<_>, _>>()?;
        match arc.segments.last_mut() {
            Some(seg) if seg.j == j => seg.push(t, x),
            Some(seg) if seg.j + 1 == j => arc.segments.push(Segment::new(j, t, x)),
            None if j == 0 => arc.segments.push(Segment::new(0, t, x)),
            _ => return Err(CsvError::Format(format!("jump index {j} out of sequence"))),
        }
    }
    arc.check_structure().map_err(CsvError::Format)?;
    Ok((arc, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{simulate, HybridSystem, Priority, SolverConfig};

    #[test]
    fn roundtrip_preserves_arc_and_jump_rows() {
        let sys = HybridSystem::continuous(1, |x, _, out| out[0] = -x[0])
            .with_jumps(|_, _| true, |x| vec![vec![x[0] / 2.0]])
            .with_schedule(&[0.5]);
        let cfg = SolverConfig::new(0.1, 1.0).with_priority(Priority::ScheduleDriven);
        let arc = simulate(&sys, &[1.0], &cfg).unwrap();
        let mut buf = Vec::new();
        let mut meta = CsvMeta::new("decay");
        meta.epsilon = Some(0.1);
        meta.seed = Some(3);
        write_arc_csv(&mut buf, &arc, &sys.labels, &meta).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# scenario: decay\n# epsilon: 0.1\n# seed: 3\nt,j,x_1\n"));
        assert!(text.contains("0.5,0,") && text.contains("0.5,1,"));
        let (back, labels) = read_arc_csv(buf.as_slice()).unwrap();
        assert_eq!(labels, sys.labels);
        assert_eq!(back, arc);
    }

    #[test]
    fn out_of_order_jumps_are_rejected() {
        let text = "t,j,x\n0,0,1\n1,2,1\n";
        assert!(read_arc_csv(text.as_bytes()).is_err());
    }
}
