use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::TurnTrace;

/// Per-session trace files, `{dir}/{session_id}.jsonl`, one record per turn.
///
/// Each save rewrites the whole file through a temporary sibling and a
/// rename, so readers only ever see complete traces.
#[derive(Debug, Clone)]
pub struct TraceStore {
    dir: PathBuf,
}

impl TraceStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TraceStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    pub fn save(&self, session_id: &str, traces: &[TurnTrace]) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let target = self.path_for(session_id);
        let tmp = self.dir.join(format!(".{session_id}.jsonl.tmp"));
        {
            let mut file = fs::File::create(&tmp)?;
            for trace in traces {
                serde_json::to_writer(&mut file, trace)?;
                file.write_all(b"\n")?;
            }
            file.sync_all()?;
        }
        fs::rename(&tmp, &target)
    }

    pub fn load(&self, session_id: &str) -> std::io::Result<Vec<TurnTrace>> {
        let text = fs::read_to_string(self.path_for(session_id))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
            .collect()
    }
}
