//! Atomic file output: write to a temp file (in `SYZ_TMPDIR` when set), then move it over the target.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

fn temp_path(path: &Path) -> PathBuf {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = format!(".{name}.tmp-{}-{n}", std::process::id());
    match std::env::var_os("SYZ_TMPDIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(file),
        _ => path.with_file_name(file),
    }
}

/// Rename, falling back to copy-then-rename when the scratch directory sits on another filesystem.
fn move_into_place(tmp: &Path, path: &Path) -> io::Result<()> {
    if fs::rename(tmp, path).is_ok() {
        return Ok(());
    }
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let local = path.with_file_name(format!(".{name}.copy-{}", std::process::id()));
    let result = fs::copy(tmp, &local).and_then(|_| fs::rename(&local, path));
    let _ = fs::remove_file(tmp);
    if result.is_err() {
        let _ = fs::remove_file(&local);
    }
    result
}

pub fn atomic_write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
{
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let tmp = temp_path(path);
    if let Some(dir) = tmp.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let result = (|| {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
        Ok::<(), io::Error>(())
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    move_into_place(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write_with(path, |w| w.write_all(bytes))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}
