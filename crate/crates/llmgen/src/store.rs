//! Crash-safe append-only pool writer with resume.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use pcvote_core::pool::{read_pool, to_json, PoolMetadata, Problem};

use crate::endpoint::{GenError, GenResult};

/// Writes the metadata line once, then one problem per line, syncing after
/// each. Reopening an existing file drops a torn last line and skips ids
/// already present.
pub struct PoolAppender {
    file: File,
    done: HashSet<String>,
}

impl PoolAppender {
    pub fn open(path: impl AsRef<Path>, metadata: &PoolMetadata) -> GenResult<Self> {
        let path = path.as_ref();
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;

        if text.trim().is_empty() {
            file.set_len(0)?;
            file.seek(SeekFrom::Start(0))?;
            writeln!(file, "{}", to_json(metadata))?;
            file.sync_data()?;
            return Ok(Self { file, done: HashSet::new() });
        }

        // keep everything through the last newline
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            file.set_len(complete as u64)?;
            file.sync_data()?;
        }
        let existing = read_pool(text[..complete].as_bytes())?;
        let old = &existing.metadata;
        if old.n != metadata.n || old.k != metadata.k || old.taus != metadata.taus || old.model != metadata.model {
            return Err(GenError::Config(format!(
                "{} was generated with different settings (model {}, n={}, taus {:?}, k={})",
                path.display(),
                old.model,
                old.n,
                old.taus,
                old.k
            )));
        }
        file.seek(SeekFrom::End(0))?;
        let done = existing.problems.into_iter().map(|p| p.id).collect();
        Ok(Self { file, done })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.done.contains(id)
    }

    pub fn completed(&self) -> usize {
        self.done.len()
    }

    pub fn append(&mut self, problem: &Problem) -> GenResult<()> {
        if !self.done.insert(problem.id.clone()) {
            return Err(GenError::Config(format!("problem `{}` already written", problem.id)));
        }
        let mut line = to_json(problem);
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pcvote_core::pool::load_pool;

    fn meta() -> PoolMetadata {
        PoolMetadata { model: "m".into(), benchmark: "b".into(), n: 1, taus: vec![0.5], k: 1, truncation: None }
    }

    fn problem(id: &str) -> Problem {
        Problem { id: id.into(), gold_cluster: None, samples: Vec::new(), partial: true }
    }

    #[test]
    fn resumes_after_torn_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        let mut w = PoolAppender::open(&path, &meta()).unwrap();
        w.append(&problem("a")).unwrap();
        drop(w);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"id\":\"b\",\"gold").unwrap();
        drop(f);

        let mut w = PoolAppender::open(&path, &meta()).unwrap();
        assert!(w.contains("a") && !w.contains("b"));
        w.append(&problem("b")).unwrap();
        assert!(w.append(&problem("b")).is_err());
        let pool = load_pool(&path).unwrap();
        assert_eq!(pool.problems.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);

        let mut other = meta();
        other.k = 2;
        assert!(PoolAppender::open(&path, &other).is_err());
    }
}
