//! Optional render check through an external OpenSCAD binary.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RendererConfig {
    /// OpenSCAD binary; rendering is skipped when unset.
    pub renderer_path: Option<PathBuf>,
    pub timeout_s: u64,
    pub image_size: [u32; 2],
}

impl Default for RendererConfig {
    fn default() -> Self {
        RendererConfig {
            renderer_path: None,
            timeout_s: 120,
            image_size: [800, 600],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RenderOutcome {
    Ok { image: PathBuf },
    Skipped,
    Failed { diagnostics: String },
}

fn drain(mut r: impl Read + Send + 'static) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Renders `scad_path` to a PNG next to it. Never errors: problems come back
/// as `Failed` with whatever diagnostics were captured.
pub fn verify_render(scad_path: &Path, config: &RendererConfig) -> RenderOutcome {
    let Some(bin) = &config.renderer_path else {
        return RenderOutcome::Skipped;
    };
    let image = scad_path.with_extension("png");
    let [w, h] = config.image_size;
    let spawned = Command::new(bin)
        .arg("-o")
        .arg(&image)
        .arg(format!("--imgsize={w},{h}"))
        .arg(scad_path)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) => {
            return RenderOutcome::Failed {
                diagnostics: format!("could not start {}: {e}", bin.display()),
            }
        }
    };
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));
    let status = child.wait_timeout(Duration::from_secs(config.timeout_s));
    let timed_out = matches!(status, Ok(None));
    if timed_out {
        let _ = child.kill();
        let _ = child.wait();
    }
    let text = format!("{}{}", out.join().unwrap_or_default(), err.join().unwrap_or_default());
    match status {
        Ok(Some(s)) if s.success() => RenderOutcome::Ok { image },
        Ok(Some(s)) => RenderOutcome::Failed {
            diagnostics: format!("renderer exited with {s}\n{text}"),
        },
        Ok(None) => RenderOutcome::Failed {
            diagnostics: format!("renderer timed out after {} s\n{text}", config.timeout_s),
        },
        Err(e) => RenderOutcome::Failed {
            diagnostics: format!("waiting for renderer: {e}\n{text}"),
        },
    }
}
