//! Append-only JSONL store of series values, keyed by the SHA-256 of the
//! canonical key string.

use eisen_core::kronecker::KeStore;
use eisen_core::numerics::{float_from_hex, float_to_hex};
use eisen_core::{BigComplex, Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

#[derive(Serialize, Deserialize)]
struct Record {
    hash: String,
    key: String,
    re: String,
    im: String,
    err: f64,
    prec: u32,
    created_by: String,
}

pub fn key_hash(key: &str) -> String {
    let d = Sha256::digest(key.as_bytes());
    d.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct FileCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, BigComplex>>,
    file: Mutex<File>,
    pub skipped: usize,
}

impl FileCache {
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut skipped = 0;
        if path.exists() {
            let f = File::open(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
            for (lineno, line) in BufReader::new(f).lines().enumerate() {
                let Ok(line) = line else {
                    skipped += 1;
                    continue;
                };
                if line.trim().is_empty() {
                    continue;
                }
                match parse_record(&line) {
                    Some((h, v)) => {
                        entries.insert(h, v);
                    }
                    None => {
                        skipped += 1;
                        eprintln!("warning: {}:{}: skipping unreadable cache record", path.display(), lineno + 1);
                    }
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        Ok(FileCache { path: path.to_path_buf(), entries: RwLock::new(entries), file: Mutex::new(file), skipped })
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn parse_record(line: &str) -> Option<(String, BigComplex)> {
    let r: Record = serde_json::from_str(line).ok()?;
    if key_hash(&r.key) != r.hash || !(r.err >= 0.0) {
        return None;
    }
    let re = float_from_hex(&r.re, r.prec).ok()?;
    let im = float_from_hex(&r.im, r.prec).ok()?;
    let mut v = BigComplex::new(re, im);
    v.err = r.err;
    Some((r.hash, v))
}

impl KeStore for FileCache {
    fn get(&self, key: &str) -> Option<BigComplex> {
        self.entries.read().unwrap().get(&key_hash(key)).cloned()
    }

    fn put(&self, key: &str, value: &BigComplex) {
        let hash = key_hash(key);
        {
            let mut e = self.entries.write().unwrap();
            if e.contains_key(&hash) {
                return;
            }
            e.insert(hash.clone(), value.clone());
        }
        let rec = Record {
            hash,
            key: key.to_string(),
            re: float_to_hex(&value.re),
            im: float_to_hex(&value.im),
            err: value.err,
            prec: value.prec(),
            created_by: concat!("eisen ", env!("CARGO_PKG_VERSION")).into(),
        };
        let mut line = serde_json::to_string(&rec).expect("record serializes");
        line.push('\n');
        let mut f = self.file.lock().unwrap();
        if let Err(e) = f.write_all(line.as_bytes()) {
            eprintln!("warning: cache append to {} failed: {e}", self.path.display());
        }
    }
}
