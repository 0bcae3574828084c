//! File formats: binary and CSV waveform files, chain dumps, fit reports.
//!
//! Binary waveform file (`ALTW`), all integers `u32` little-endian:
//!
//! ```text
//! "ALTW" | version=1 | K | M | r | flags | M*K f64 echoes, row-major | [3*M f64 truth]
//! ```
//!
//! `flags` bit 0 marks a truth block (rows SWH, tau, P_u) and bit 1 allows a
//! short final noise block. Chain dumps (`ALTC`) use the same header layout
//! with `K` replaced by the column count, `M` by the row count and `r = 0`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::types::{EchoSequence, FitReport, ParamTrack};

const WAVE_MAGIC: &[u8; 4] = b"ALTW";
const CHAIN_MAGIC: &[u8; 4] = b"ALTC";
const VERSION: u32 = 1;
const FLAG_TRUTH: u32 = 1;
const FLAG_PAD: u32 = 2;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn fmt_err(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("file is truncated".into())
    } else {
        Error::Format(e.to_string())
    }
}

fn header<W: Write>(w: &mut W, magic: &[u8; 4], fields: [u32; 4]) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    for f in fields {
        w.write_u32::<LittleEndian>(f)?;
    }
    Ok(())
}

fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<[u32; 4]> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got).map_err(fmt_err)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.read_u32::<LittleEndian>().map_err(fmt_err)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut f = [0u32; 4];
    for v in f.iter_mut() {
        *v = r.read_u32::<LittleEndian>().map_err(fmt_err)?;
    }
    Ok(f)
}

fn as_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out).map_err(fmt_err)?;
    Ok(out)
}

pub fn write_altw_to<S: Real, W: Write>(w: &mut W, seq: &EchoSequence<S>) -> Result<()> {
    let mut flags = 0;
    if seq.truth.is_some() {
        flags |= FLAG_TRUTH;
    }
    if seq.pad_remainder {
        flags |= FLAG_PAD;
    }
    let fields = [
        as_u32(seq.num_gates(), "K")?,
        as_u32(seq.num_echoes(), "M")?,
        as_u32(seq.block_size, "r")?,
        flags,
    ];
    let io = |e: std::io::Error| Error::Format(e.to_string());
    header(w, WAVE_MAGIC, fields).map_err(io)?;
    for m in 0..seq.num_echoes() {
        for k in 0..seq.num_gates() {
            w.write_f64::<LittleEndian>(seq.echoes[(m, k)].as_f64()).map_err(io)?;
        }
    }
    if let Some(t) = &seq.truth {
        for i in 0..3 {
            for v in t.column(i) {
                w.write_f64::<LittleEndian>(v.as_f64()).map_err(io)?;
            }
        }
    }
    Ok(())
}

pub fn read_altw_from<S: Real, R: Read>(r: &mut R) -> Result<EchoSequence<S>> {
    let [k, m, block, flags] = read_header(r, WAVE_MAGIC)?;
    let (k, m) = (k as usize, m as usize);
    if flags & !(FLAG_TRUTH | FLAG_PAD) != 0 {
        return Err(Error::Format(format!("unknown flags {flags:#x}")));
    }
    let data = read_f64s(r, m * k)?;
    let echoes = DMatrix::from_row_iterator(m, k, data.into_iter().map(S::of_f64));
    let mut seq = EchoSequence::new(echoes, block as usize);
    seq.pad_remainder = flags & FLAG_PAD != 0;
    if flags & FLAG_TRUTH != 0 {
        let t: Vec<S> = read_f64s(r, 3 * m)?.into_iter().map(S::of_f64).collect();
        seq.truth = Some(ParamTrack::new(t[..m].to_vec(), t[m..2 * m].to_vec(), t[2 * m..].to_vec())?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(fmt_err)? != 0 {
        return Err(Error::Format("trailing bytes after the declared payload".into()));
    }
    Ok(seq)
}

pub fn write_altw<S: Real>(path: impl AsRef<Path>, seq: &EchoSequence<S>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_altw_to(&mut w, seq)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_altw<S: Real>(path: impl AsRef<Path>) -> Result<EchoSequence<S>> {
    let path = path.as_ref();
    read_altw_from(&mut open(path)?)
}

/// Writes echoes as CSV with a `gate_0..gate_{K-1}` header. Truth is not
/// stored.
pub fn write_csv<S: Real>(path: impl AsRef<Path>, seq: &EchoSequence<S>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record((0..seq.num_gates()).map(|k| format!("gate_{k}"))).map_err(csv_err)?;
    for m in 0..seq.num_echoes() {
        w.write_record(seq.echoes.row(m).iter().map(|v| format!("{:e}", v.as_f64())))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<S: Real>(path: impl AsRef<Path>, block_size: usize) -> Result<EchoSequence<S>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_reader(open(path)?);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let headers = r.headers().map_err(csv_err)?.clone();
    for (k, h) in headers.iter().enumerate() {
        if h.trim() != format!("gate_{k}") {
            return Err(Error::Format(format!("column {k} is {h:?}, expected gate_{k}")));
        }
    }
    let k = headers.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for (g, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!("row {rows}, gate {g}: cannot parse {field:?}"))
            })?;
            data.push(S::of_f64(v));
        }
        rows += 1;
    }
    Ok(EchoSequence::new(DMatrix::from_row_slice(rows, k, &data), block_size))
}

/// Dumps a `samples x parameters` chain matrix.
pub fn write_chain<S: Real>(path: impl AsRef<Path>, samples: &DMatrix<S>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e: std::io::Error| Error::io(path, e);
    let fields = [as_u32(samples.ncols(), "columns")?, as_u32(samples.nrows(), "rows")?, 0, 0];
    header(&mut w, CHAIN_MAGIC, fields).map_err(io)?;
    for s in 0..samples.nrows() {
        for p in 0..samples.ncols() {
            w.write_f64::<LittleEndian>(samples[(s, p)].as_f64()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_chain(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut r = open(path)?;
    let [cols, rows, _, _] = read_header(&mut r, CHAIN_MAGIC)?;
    let data = read_f64s(&mut r, rows as usize * cols as usize)?;
    Ok(DMatrix::from_row_slice(rows as usize, cols as usize, &data))
}

/// One row per echo: `m, swh, tau, pu, mu`.
pub fn write_report_csv<S: Real>(path: impl AsRef<Path>, report: &FitReport<S>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["m", "swh", "tau", "pu", "mu"]).map_err(csv_err)?;
    for m in 0..report.theta_hat.len() {
        let p = report.theta_hat.get(m);
        w.serialize((m, p[0].as_f64(), p[1].as_f64(), p[2].as_f64(), report.noise_hat.mu[m].as_f64()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads back the `swh, tau, pu` columns of a report CSV.
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<ParamTrack<f64>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_reader(open(path)?);
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    for rec in r.deserialize::<(usize, f64, f64, f64, f64)>() {
        let (_, swh, tau, pu, _) = rec.map_err(|e| Error::Format(e.to_string()))?;
        cols[0].push(swh);
        cols[1].push(tau);
        cols[2].push(pu);
    }
    let [swh, tau, pu] = cols;
    ParamTrack::new(swh, tau, pu)
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    algorithm: &'a str,
    stop_reason: String,
    iterations: usize,
    wall_time: f64,
    time_per_echo: f64,
    cost_trace: Vec<f64>,
    enl: Vec<f64>,
    flagged: &'a [usize],
    acceptance: Option<[f64; 3]>,
}

/// Run diagnostics as pretty-printed JSON.
pub fn diagnostics_json<S: Real>(report: &FitReport<S>) -> String {
    let d = Diagnostics {
        algorithm: &report.algorithm,
        stop_reason: report.stop_reason.to_string(),
        iterations: report.iterations,
        wall_time: report.wall_time,
        time_per_echo: report.time_per_echo(),
        cost_trace: report.cost_trace.iter().map(|v| v.as_f64()).collect(),
        enl: report.enl.iter().map(|v| v.as_f64()).collect(),
        flagged: &report.flagged,
        acceptance: report.acceptance,
    };
    serde_json::to_string_pretty(&d).expect("diagnostics serialise")
}

pub fn write_diagnostics<S: Real>(path: impl AsRef<Path>, report: &FitReport<S>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, diagnostics_json(report) + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use crate::types::{NoiseState, StopReason};

    fn sample_seq(m: usize, k: usize, truth: bool) -> EchoSequence<f64> {
        let mut seq =
            EchoSequence::new(DMatrix::from_fn(m, k, |i, j| (i * 1000 + j) as f64 * 0.125 - 3.0), 2);
        if truth {
            seq.truth = Some(ParamTrack::new(
                (0..m).map(|i| i as f64).collect(),
                (0..m).map(|i| 30.0 + i as f64).collect(),
                vec![1.5; m],
            )
            .unwrap());
        }
        seq
    }

    #[test]
    fn altw_layout_is_exact() {
        let seq = sample_seq(2, 3, true);
        let mut buf = Vec::new();
        write_altw_to(&mut buf, &seq).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 6 + 8 * 6);
        assert_eq!(&buf[..4], b"ALTW");
        let u = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
        assert_eq!([u(4), u(8), u(12), u(16), u(20)], [1, 3, 2, 2, 1]);
        // Row-major: second value is echo 0, gate 1.
        let second = f64::from_le_bytes(buf[32..40].try_into().unwrap());
        assert_eq!(second, seq.echoes[(0, 1)]);
        let tau0 = f64::from_le_bytes(buf[24 + 48 + 16..24 + 48 + 24].try_into().unwrap());
        assert_eq!(tau0, 30.0);
    }

    #[test]
    fn altw_rejects_bad_input() {
        let seq = sample_seq(2, 3, false);
        let mut buf = Vec::new();
        write_altw_to(&mut buf, &seq).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_altw_from::<f64, _>(&mut bad.as_slice()).unwrap_err().to_string().contains("magic"));
        let short = &buf[..buf.len() - 3];
        let err = read_altw_from::<f64, _>(&mut &short[..]).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
        let mut long = buf.clone();
        long.push(0);
        assert!(read_altw_from::<f64, _>(&mut long.as_slice()).is_err());
        let mut v2 = buf;
        v2[4] = 2;
        assert!(read_altw_from::<f64, _>(&mut v2.as_slice()).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let err = read_altw::<f64>("/nonexistent/dir/echoes.altw").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/echoes.altw"), "{err}");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let seq = sample_seq(4, 5, false);
        write_csv(&p, &seq).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("gate_0,gate_1,gate_2,gate_3,gate_4\n"));
        let back = read_csv::<f64>(&p, 2).unwrap();
        assert_eq!(back.echoes, seq.echoes);
    }

    #[test]
    fn chain_and_report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let chain = DMatrix::from_fn(7, 6, |i, j| i as f64 - 0.5 * j as f64);
        write_chain(dir.path().join("c.altc"), &chain).unwrap();
        assert_eq!(read_chain(dir.path().join("c.altc")).unwrap(), chain);

        let theta = sample_seq(3, 1, true).truth.unwrap();
        let report = FitReport {
            algorithm: "cd".into(),
            theta_hat: theta.clone(),
            noise_hat: NoiseState { mu: vec![0.01, 0.02, 0.03], lambda: DMatrix::from_element(1, 1, 1.0) },
            enl: vec![90.0],
            cost_trace: vec![3.0, 2.0],
            iterations: 1,
            stop_reason: StopReason::CostTol,
            wall_time: 0.3,
            flagged: vec![],
            acceptance: None,
        };
        let p = dir.path().join("r.csv");
        write_report_csv(&p, &report).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("m,swh,tau,pu,mu\n0,0.0,30.0,1.5,0.01\n"), "{text}");
        assert_eq!(read_report_csv(&p).unwrap(), theta);
        let json: serde_json::Value = serde_json::from_str(&diagnostics_json(&report)).unwrap();
        assert_eq!(json["stop_reason"], "cost_tol");
        assert_eq!(json["cost_trace"][1], 2.0);
    }

    proptest! {
        #[test]
        fn altw_round_trips(m in 1usize..6, k in 1usize..9, truth: bool, pad: bool,
                            vals in proptest::collection::vec(-1e6f64..1e6, 60)) {
            let mut seq = sample_seq(m, k, truth);
            for (i, v) in seq.echoes.iter_mut().enumerate() {
                *v = vals[i % vals.len()];
            }
            seq.pad_remainder = pad;
            let mut buf = Vec::new();
            write_altw_to(&mut buf, &seq).unwrap();
            let back: EchoSequence<f64> = read_altw_from(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
