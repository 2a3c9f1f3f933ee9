//! Write-once run directories: `<output_dir>/<command>/<tag>/`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// `YYYYMMDDTHHMMSSZ` for the current UTC time.
pub fn utc_timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format_utc(secs)
}

fn format_utc(secs: u64) -> String {
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    // civil-from-days (proleptic Gregorian)
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!(
        "{year:04}{month:02}{day:02}T{:02}{:02}{:02}Z",
        rem / 3600,
        rem / 60 % 60,
        rem % 60
    )
}

/// Creates the run directory. An explicit tag must not exist yet; a generated timestamp tag gets
/// a numeric suffix on collision.
pub fn create_run_dir(root: &Path, command: &str, tag: Option<&str>) -> Result<PathBuf, CliError> {
    let parent = root.join(command);
    std::fs::create_dir_all(&parent)?;
    match tag {
        Some(t) => {
            if t.is_empty() || t.contains(['/', '\\']) || t == "." || t == ".." {
                return Err(CliError::usage(format!("invalid tag {t:?}")));
            }
            let dir = parent.join(t);
            std::fs::create_dir(&dir).map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => CliError::usage(format!(
                    "{} already exists; outputs are write-once, pick another --tag",
                    dir.display()
                )),
                _ => e.into(),
            })?;
            Ok(dir)
        }
        None => {
            let base = utc_timestamp();
            for n in 1.. {
                let name = if n == 1 {
                    base.clone()
                } else {
                    format!("{base}-{n}")
                };
                let dir = parent.join(name);
                match std::fs::create_dir(&dir) {
                    Ok(()) => return Ok(dir),
                    Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            unreachable!()
        }
    }
}
