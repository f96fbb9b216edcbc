//! Run logs: one row per update, plus periodic weight snapshots.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const RUNLOG_HEADER: &str = "# askewsgd-runlog v1";
pub const SNAPSHOT_HEADER: &str = "# askewsgd-snapshots v1";

/// Row `step = k` describes the iterate after `k` updates; `batch_loss` is the
/// minibatch loss seen by update `k` and `gamma` its step size. `train_loss`
/// is the full training loss at the weights the method evaluates (latent
/// weights for skewed and plain SGD, projected weights for BinaryConnect).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: u64,
    pub epoch: usize,
    pub episode: usize,
    pub epsilon: Option<f64>,
    pub gamma: f64,
    pub batch_loss: f64,
    pub train_loss: f64,
    pub eval_loss: Option<f64>,
    pub eval_accuracy: Option<f64>,
    pub feasibility_gap: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub clip_count: usize,
    pub max_velocity: f64,
    pub wall_time_s: f64,
}

pub const RUNLOG_COLUMNS: [&str; 14] = [
    "step",
    "epoch",
    "episode",
    "epsilon",
    "gamma",
    "batch_loss",
    "train_loss",
    "eval_loss",
    "eval_accuracy",
    "feasibility_gap",
    "kkt_residual",
    "clip_count",
    "max_velocity",
    "wall_time_s",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad number {s:?} in run log")))
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("bad field {s:?} in run log")))
}

impl RunRecord {
    fn fields(&self) -> [String; 14] {
        [
            self.step.to_string(),
            self.epoch.to_string(),
            self.episode.to_string(),
            opt(self.epsilon),
            self.gamma.to_string(),
            self.batch_loss.to_string(),
            self.train_loss.to_string(),
            opt(self.eval_loss),
            opt(self.eval_accuracy),
            opt(self.feasibility_gap),
            opt(self.kkt_residual),
            self.clip_count.to_string(),
            self.max_velocity.to_string(),
            self.wall_time_s.to_string(),
        ]
    }

    fn from_fields(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != RUNLOG_COLUMNS.len() {
            return Err(Error::Config(format!(
                "run log row has {} fields, expected {}",
                rec.len(),
                RUNLOG_COLUMNS.len()
            )));
        }
        Ok(Self {
            step: parse(&rec[0])?,
            epoch: parse(&rec[1])?,
            episode: parse(&rec[2])?,
            epsilon: parse_opt(&rec[3])?,
            gamma: parse(&rec[4])?,
            batch_loss: parse(&rec[5])?,
            train_loss: parse(&rec[6])?,
            eval_loss: parse_opt(&rec[7])?,
            eval_accuracy: parse_opt(&rec[8])?,
            feasibility_gap: parse_opt(&rec[9])?,
            kkt_residual: parse_opt(&rec[10])?,
            clip_count: parse(&rec[11])?,
            max_velocity: parse(&rec[12])?,
            wall_time_s: parse(&rec[13])?,
        })
    }
}

/// Weights after `step` updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub epoch: usize,
    pub episode: usize,
    pub epsilon: Option<f64>,
    pub w: Vec<f64>,
}

fn write_with_header(path: &Path, header: &str, body: Vec<u8>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    f.write_all(&body)?;
    f.flush()?;
    Ok(())
}

pub fn runlog_to_csv_bytes(records: &[RunRecord]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(RUNLOG_COLUMNS)?;
    for r in records {
        wtr.write_record(r.fields())?;
    }
    let body = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut out = format!("{RUNLOG_HEADER}\n").into_bytes();
    out.extend(body);
    Ok(out)
}

pub fn write_runlog_csv(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    std::fs::write(path, runlog_to_csv_bytes(records)?)?;
    Ok(())
}

pub fn read_runlog_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.splitn(2, '\n');
    let first = lines.next().unwrap_or_default();
    if first.trim() != RUNLOG_HEADER {
        return Err(Error::Config(format!(
            "unsupported run log schema line {first:?}"
        )));
    }
    let rest = lines.next().unwrap_or_default();
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RUNLOG_COLUMNS.iter().copied()) {
        return Err(Error::Config("run log columns do not match schema".into()));
    }
    rdr.records().map(|r| RunRecord::from_fields(&r?)).collect()
}

pub fn write_snapshots_csv(path: impl AsRef<Path>, snapshots: &[Snapshot]) -> Result<()> {
    let dim = snapshots.first().map(|s| s.w.len()).unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "step".to_string(),
        "epoch".into(),
        "episode".into(),
        "epsilon".into(),
    ];
    header.extend((0..dim).map(|i| format!("w{i}")));
    wtr.write_record(&header)?;
    for s in snapshots {
        let mut row = vec![
            s.step.to_string(),
            s.epoch.to_string(),
            s.episode.to_string(),
            opt(s.epsilon),
        ];
        row.extend(s.w.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    let body = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_with_header(path.as_ref(), SNAPSHOT_HEADER, body)
}

pub fn read_snapshots_csv(path: impl AsRef<Path>) -> Result<Vec<Snapshot>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.splitn(2, '\n');
    if lines.next().map(str::trim) != Some(SNAPSHOT_HEADER) {
        return Err(Error::Config("unsupported snapshot schema".into()));
    }
    let mut rdr = csv::Reader::from_reader(lines.next().unwrap_or_default().as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(Snapshot {
            step: parse(&rec[0])?,
            epoch: parse(&rec[1])?,
            episode: parse(&rec[2])?,
            epsilon: parse_opt(&rec[3])?,
            w: (4..rec.len())
                .map(|i| parse(&rec[i]))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

/// CSV bytes with the wall-time column blanked, for reproducibility checks.
pub fn strip_wall_time(csv_bytes: &[u8]) -> String {
    String::from_utf8_lossy(csv_bytes)
        .lines()
        .map(|line| match line.rfind(',') {
            Some(pos) if !line.starts_with('#') => &line[..pos],
            _ => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}
