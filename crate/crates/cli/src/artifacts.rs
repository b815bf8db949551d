//! Artifact files: atomic writes and loading of trained models.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use recourse_core::efare::Automaton;
use recourse_core::generator::PolicyModel;
use recourse_core::RecourseProblem;

pub const POLICY_FILE: &str = "wfare.json";
pub const AUTOMATON_FILE: &str = "wefare.json";

/// Writes `bytes` to a temporary sibling and renames it over `path`, so a
/// reader never observes a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

/// Renders a table through a csv-writing closure, then writes it atomically.
pub fn write_csv_with<F>(path: &Path, render: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> recourse_core::Result<()>,
{
    let mut buf = Vec::new();
    render(&mut buf)?;
    write_atomic(path, &buf)
}

pub fn load_policy(path: &Path, problem: &RecourseProblem) -> anyhow::Result<PolicyModel> {
    if !path.is_file() {
        bail!("model artifact not found: {}", path.display());
    }
    let text = fs::read_to_string(path)?;
    let model: PolicyModel =
        serde_json::from_str(&text).with_context(|| format!("parsing model artifact {}", path.display()))?;
    model.check_compatible(problem)?;
    Ok(model)
}

pub fn load_automaton(path: &Path, problem: &RecourseProblem) -> anyhow::Result<Automaton> {
    if !path.is_file() {
        bail!("automaton artifact not found: {}", path.display());
    }
    let text = fs::read_to_string(path)?;
    let automaton: Automaton =
        serde_json::from_str(&text).with_context(|| format!("parsing automaton artifact {}", path.display()))?;
    automaton.check_compatible(problem)?;
    Ok(automaton)
}

/// `<root>/<dataset>/<file>`.
pub fn dataset_artifact(root: &Path, dataset: &str, file: &str) -> PathBuf {
    root.join(dataset).join(file)
}
