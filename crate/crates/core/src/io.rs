//! JSON Lines and CSV readers with line-numbered validation errors.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::market::Trade;

/// Record-level invariant check applied after deserialization.
pub trait Validate {
    fn validate(&self) -> Result<(), String>;
}

/// A rejected input line (1-based numbering, blank lines counted).
#[derive(Debug, Clone, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    BadRecord {
        path: String,
        line: usize,
        message: String,
    },
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Read a JSONL file strictly: the first malformed or invalid record aborts
/// with its line number.
pub fn read_jsonl<T: DeserializeOwned + Validate>(path: &Path) -> Result<Vec<T>, IoError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| IoError::BadRecord {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        record.validate().map_err(|message| IoError::BadRecord {
            path: path.display().to_string(),
            line: idx + 1,
            message,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Read a JSONL file leniently: malformed records are collected as
/// line-numbered errors and skipped; valid records keep their line number
/// for cross-file referential reporting.
pub fn scan_jsonl<T: DeserializeOwned + Validate>(
    path: &Path,
) -> Result<(Vec<(usize, T)>, Vec<LineError>), IoError> {
    let reader = open(path)?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(record) => match record.validate() {
                Ok(()) => out.push((idx + 1, record)),
                Err(message) => errors.push(LineError {
                    line: idx + 1,
                    message,
                }),
            },
            Err(e) => errors.push(LineError {
                line: idx + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok((out, errors))
}

/// Lenient trade-log scan, dispatching on the file extension.
pub fn scan_trades(path: &Path) -> Result<(Vec<(usize, Trade)>, Vec<LineError>), IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let file = File::open(path).map_err(|source| IoError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let mut reader = csv::Reader::from_reader(BufReader::new(file));
            let mut out = Vec::new();
            let mut errors = Vec::new();
            for (idx, row) in reader.deserialize::<Trade>().enumerate() {
                let line = idx + 2;
                match row {
                    Ok(trade) => match trade.validate() {
                        Ok(()) => out.push((line, trade)),
                        Err(message) => errors.push(LineError { line, message }),
                    },
                    Err(e) => errors.push(LineError {
                        line,
                        message: e.to_string(),
                    }),
                }
            }
            Ok((out, errors))
        }
        _ => scan_jsonl(path),
    }
}

/// Write records as one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IoError> {
    let file = File::create(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("serialization is infallible for our records");
        writeln!(w, "{line}").map_err(|source| IoError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    w.flush().map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Read a trade log in the CSV variant (same columns as the JSONL form:
/// ts, market_id, wallet_id, side, price, size).
pub fn read_trades_csv(path: &Path) -> Result<Vec<Trade>, IoError> {
    let file = File::open(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut out = Vec::new();
    for (idx, row) in reader.deserialize::<Trade>().enumerate() {
        // +2: one for the header row, one for 1-based numbering.
        let line = idx + 2;
        let trade = row.map_err(|e| IoError::BadRecord {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        trade.validate().map_err(|message| IoError::BadRecord {
            path: path.display().to_string(),
            line,
            message,
        })?;
        out.push(trade);
    }
    Ok(out)
}

/// Read a trade log, dispatching on the file extension (`.csv` vs JSONL).
pub fn read_trades(path: &Path) -> Result<Vec<Trade>, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_trades_csv(path),
        _ => read_jsonl(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn jsonl_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trades.jsonl");
        let mut f = File::create(&path).unwrap();
        writeln!(
            f,
            r#"{{"ts":"2026-01-01T00:00:00Z","market_id":"m","wallet_id":"w","side":"BUY_YES","price":0.5,"size":1.0}}"#
        )
        .unwrap();
        writeln!(f).unwrap();
        writeln!(
            f,
            r#"{{"ts":"2026-01-01T00:00:10Z","market_id":"m","wallet_id":"w","side":"BUY_YES","price":1.2,"size":1.0}}"#
        )
        .unwrap();
        drop(f);

        let err = read_jsonl::<Trade>(&path).unwrap_err();
        match err {
            IoError::BadRecord { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("(0,1)"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }

        let (ok, errors) = scan_jsonl::<Trade>(&path).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(ok[0].0, 1);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 3);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trades.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "ts,market_id,wallet_id,side,price,size").unwrap();
        writeln!(f, "2026-01-01T00:00:00Z,m,w,BUY_YES,0.42,3.5").unwrap();
        writeln!(f, "2026-01-01T00:01:00Z,m,w,SELL_YES,0.43,1.5").unwrap();
        drop(f);

        let trades = read_trades(&path).unwrap();
        assert_eq!(trades.len(), 2);
        assert_eq!(trades[1].side, crate::market::Side::SellYes);
        assert!((trades[0].price - 0.42).abs() < 1e-15);
    }

    #[test]
    fn write_then_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let trades = vec![Trade {
            ts: crate::time::Ts::from_unix(60),
            market_id: "m".into(),
            wallet_id: "w".into(),
            side: crate::market::Side::BuyYes,
            price: 0.25,
            size: 4.0,
        }];
        write_jsonl(&path, &trades).unwrap();
        let back: Vec<Trade> = read_jsonl(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].ts, trades[0].ts);
    }
}
