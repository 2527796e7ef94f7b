//! Sweep files, Touchstone import, peak traces, scenario configs and
//! reports.

pub mod config;
pub mod report;
pub mod sweep_file;
pub mod touchstone;
pub mod trace_file;

pub use config::ScenarioConfig;
pub use report::{write_report, Report, ReportFormat};
pub use sweep_file::{load_sweep, save_sweep};
pub use touchstone::import_touchstone;
pub use trace_file::{format_trace, parse_trace};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    #[cfg(unix)]
    {
        // temp files are created owner-only; artifacts get ordinary modes
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
