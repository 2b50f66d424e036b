//! On-disk benchmark layout.
//!
//! ```text
//! <root>/manifest.json
//! <root>/tasks/<id>/config.json
//! <root>/tasks/<id>/cases/<case_id>/case.json
//! <root>/tasks/<id>/cases/<case_id>/payload.*
//! <root>/tasks/<id>/sequestered/<case_id>/label.json
//! <root>/tasks/<id>/sequestered/splits.json
//! ```
//!
//! Algorithms only ever get an [`AlgorithmView`], which refuses any path
//! below a `sequestered` directory. Labels and split membership are read
//! through [`SequesteredStore`] by the evaluation step.

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::case::{ArchiveItem, CasePayload, ReportPayload, Split, VisionPayload};
use super::grid::{ImageGrid, MaskGrid};
use super::prediction::ReferenceLabel;
use super::task::{TaskDefinition, TaskId};
use super::ModelError;

pub const SEQUESTERED_DIR: &str = "sequestered";

const IMAGE_FILE: &str = "payload.grid";
const TISSUE_FILE: &str = "payload.mask.grid";
const DESCRIPTION_FILE: &str = "payload.description.txt";
const REPORT_FILE: &str = "payload.json";
const CASE_FILE: &str = "case.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskManifestEntry {
    pub task_id: TaskId,
    pub few_shot: usize,
    pub validation: usize,
    pub test: usize,
}

/// Top-level record of a generated benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub seed: u64,
    pub scale: f64,
    pub feature_dim: usize,
    pub tasks: Vec<TaskManifestEntry>,
}

/// Split membership of one task's cases. Evaluation cases are divided into
/// the validation and test sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub few_shot: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitIndex {
    pub fn split_of(&self, case_id: &str) -> Option<Split> {
        if self.few_shot.iter().any(|c| c == case_id) {
            Some(Split::FewShot)
        } else if self
            .validation
            .iter()
            .chain(&self.test)
            .any(|c| c == case_id)
        {
            Some(Split::Evaluation)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.few_shot.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Algorithm-facing description of a case. Deliberately carries no split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseManifest {
    pub case_id: String,
    pub task_id: TaskId,
    pub files: Vec<String>,
}

/// A case as an algorithm sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmCase {
    pub case_id: String,
    pub payload: CasePayload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkLayout {
    root: PathBuf,
}

impl BenchmarkLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        BenchmarkLayout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn task_dir(&self, task: TaskId) -> PathBuf {
        self.root.join("tasks").join(task.get().to_string())
    }

    pub fn config_path(&self, task: TaskId) -> PathBuf {
        self.task_dir(task).join("config.json")
    }

    pub fn cases_dir(&self, task: TaskId) -> PathBuf {
        self.task_dir(task).join("cases")
    }

    pub fn case_dir(&self, task: TaskId, case_id: &str) -> PathBuf {
        self.cases_dir(task).join(case_id)
    }

    pub fn sequestered_dir(&self, task: TaskId) -> PathBuf {
        self.task_dir(task).join(SEQUESTERED_DIR)
    }

    pub fn label_path(&self, task: TaskId, case_id: &str) -> PathBuf {
        self.sequestered_dir(task).join(case_id).join("label.json")
    }

    pub fn splits_path(&self, task: TaskId) -> PathBuf {
        self.sequestered_dir(task).join("splits.json")
    }

    pub fn write_manifest(&self, manifest: &BenchmarkManifest) -> Result<(), ModelError> {
        write_json(&self.manifest_path(), manifest)
    }

    pub fn read_manifest(&self) -> Result<BenchmarkManifest, ModelError> {
        read_json(&self.manifest_path())
    }

    /// Writes one task: its config, every case payload, the sequestered
    /// labels and the split index.
    pub fn write_task(
        &self,
        task: &TaskDefinition,
        items: &[ArchiveItem],
        splits: &SplitIndex,
    ) -> Result<(), ModelError> {
        super::case::check_unique_case_ids(items.iter().map(|i| i.case_id.as_str()))?;
        if splits.len() != items.len() {
            return Err(ModelError::Layout(format!(
                "split index lists {} cases but {} items were given",
                splits.len(),
                items.len()
            )));
        }
        let config = self.config_path(task.task_id);
        create_parent(&config)?;
        fs::write(&config, task.config_document().to_json_bytes())
            .map_err(|e| ModelError::io(&config, e))?;
        for item in items {
            if item.task_id != task.task_id {
                return Err(ModelError::Layout(format!(
                    "case {} belongs to {}, not {}",
                    item.case_id, item.task_id, task.task_id
                )));
            }
            if splits.split_of(&item.case_id) != Some(item.split) {
                return Err(ModelError::Layout(format!(
                    "case {} split disagrees with the split index",
                    item.case_id
                )));
            }
            self.write_payload(task.task_id, &item.case_id, &item.payload)?;
            write_json(
                &self.label_path(task.task_id, &item.case_id),
                &item.reference,
            )?;
        }
        write_json(&self.splits_path(task.task_id), splits)
    }

    fn write_payload(
        &self,
        task: TaskId,
        case_id: &str,
        payload: &CasePayload,
    ) -> Result<(), ModelError> {
        let dir = self.case_dir(task, case_id);
        fs::create_dir_all(&dir).map_err(|e| ModelError::io(&dir, e))?;
        let mut files = Vec::new();
        let mut put = |name: &str, bytes: &[u8]| -> Result<(), ModelError> {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| ModelError::io(&path, e))?;
            files.push(name.to_string());
            Ok(())
        };
        match payload {
            CasePayload::VisionGrid(v) => write_vision(&mut put, v)?,
            CasePayload::VisionWithTaskDescription {
                vision,
                description,
            } => {
                write_vision(&mut put, vision)?;
                put(DESCRIPTION_FILE, description.as_bytes())?;
            }
            CasePayload::ReportText(r) => {
                let bytes = serde_json::to_vec_pretty(r).expect("report payload serializes");
                put(REPORT_FILE, &bytes)?;
            }
        }
        let manifest = CaseManifest {
            case_id: case_id.to_string(),
            task_id: task,
            files,
        };
        write_json(&dir.join(CASE_FILE), &manifest)
    }
}

fn write_vision(
    put: &mut impl FnMut(&str, &[u8]) -> Result<(), ModelError>,
    vision: &VisionPayload,
) -> Result<(), ModelError> {
    put(IMAGE_FILE, vision.image.to_text().as_bytes())?;
    if let Some(mask) = &vision.tissue_mask {
        put(TISSUE_FILE, mask.to_text().as_bytes())?;
    }
    Ok(())
}

/// Read-only access to the parts of a benchmark an algorithm may see.
#[derive(Debug, Clone)]
pub struct AlgorithmView {
    layout: BenchmarkLayout,
}

impl AlgorithmView {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        AlgorithmView {
            layout: BenchmarkLayout::new(root),
        }
    }

    /// Reads a file below the benchmark root, refusing sequestered paths.
    pub fn read_file(&self, relative: &Path) -> Result<Vec<u8>, ModelError> {
        let escapes = relative.components().any(|c| {
            matches!(
                c,
                Component::ParentDir | Component::RootDir | Component::Prefix(_)
            ) || c.as_os_str() == SEQUESTERED_DIR
        });
        let path = self.layout.root.join(relative);
        if escapes {
            return Err(ModelError::Sequestered(path));
        }
        fs::read(&path).map_err(|e| ModelError::io(&path, e))
    }

    pub fn task_config(&self, task: TaskId) -> Result<Vec<u8>, ModelError> {
        self.read_file(&relative_task(task).join("config.json"))
    }

    /// Case ids of a task in sorted order.
    pub fn case_ids(&self, task: TaskId) -> Result<Vec<String>, ModelError> {
        let dir = self.layout.cases_dir(task);
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| ModelError::io(&dir, e))? {
            let entry = entry.map_err(|e| ModelError::io(&dir, e))?;
            if entry.path().is_dir() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn case_manifest(&self, task: TaskId, case_id: &str) -> Result<CaseManifest, ModelError> {
        let rel = relative_task(task)
            .join("cases")
            .join(case_id)
            .join(CASE_FILE);
        let bytes = self.read_file(&rel)?;
        serde_json::from_slice(&bytes).map_err(|e| ModelError::json(self.layout.root.join(&rel), e))
    }

    /// Raw payload files of a case, by file name, for copying into a run
    /// workspace.
    pub fn case_files(
        &self,
        task: TaskId,
        case_id: &str,
    ) -> Result<Vec<(String, Vec<u8>)>, ModelError> {
        let manifest = self.case_manifest(task, case_id)?;
        let base = relative_task(task).join("cases").join(case_id);
        let mut out = vec![(
            CASE_FILE.to_string(),
            self.read_file(&base.join(CASE_FILE))?,
        )];
        for name in manifest.files {
            let bytes = self.read_file(&base.join(&name))?;
            out.push((name, bytes));
        }
        Ok(out)
    }

    pub fn load_case(&self, task: TaskId, case_id: &str) -> Result<AlgorithmCase, ModelError> {
        let files = self.case_files(task, case_id)?;
        let payload = payload_from_files(&files)?;
        Ok(AlgorithmCase {
            case_id: case_id.to_string(),
            payload,
        })
    }
}

/// Rebuilds a payload from the files written by [`BenchmarkLayout::write_task`].
pub fn payload_from_files(files: &[(String, Vec<u8>)]) -> Result<CasePayload, ModelError> {
    let find = |name: &str| {
        files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    };
    let text = |bytes: &[u8]| {
        String::from_utf8(bytes.to_vec())
            .map_err(|_| ModelError::InvalidPayload("payload file is not utf-8".into()))
    };
    if let Some(bytes) = find(REPORT_FILE) {
        let report: ReportPayload =
            serde_json::from_slice(bytes).map_err(|e| ModelError::json(REPORT_FILE, e))?;
        let payload = CasePayload::ReportText(report);
        payload.check()?;
        return Ok(payload);
    }
    let image_bytes = find(IMAGE_FILE)
        .ok_or_else(|| ModelError::InvalidPayload("case has no payload file".into()))?;
    let image = ImageGrid::parse_text(&text(image_bytes)?)?;
    let tissue_mask = match find(TISSUE_FILE) {
        Some(bytes) => Some(MaskGrid::parse_text(&text(bytes)?)?),
        None => None,
    };
    let vision = VisionPayload::new(image, tissue_mask)?;
    let payload = match find(DESCRIPTION_FILE) {
        Some(bytes) => CasePayload::VisionWithTaskDescription {
            vision,
            description: text(bytes)?,
        },
        None => CasePayload::VisionGrid(vision),
    };
    payload.check()?;
    Ok(payload)
}

/// Evaluation-side access to labels and split membership.
#[derive(Debug, Clone)]
pub struct SequesteredStore {
    layout: BenchmarkLayout,
}

impl SequesteredStore {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        SequesteredStore {
            layout: BenchmarkLayout::new(root),
        }
    }

    pub fn layout(&self) -> &BenchmarkLayout {
        &self.layout
    }

    pub fn splits(&self, task: TaskId) -> Result<SplitIndex, ModelError> {
        read_json(&self.layout.splits_path(task))
    }

    pub fn label(&self, task: TaskId, case_id: &str) -> Result<ReferenceLabel, ModelError> {
        read_json(&self.layout.label_path(task, case_id))
    }

    /// Loads a full archive item: payload, split and reference.
    pub fn load_item(
        &self,
        task: TaskId,
        case_id: &str,
        splits: &SplitIndex,
    ) -> Result<ArchiveItem, ModelError> {
        let split = splits.split_of(case_id).ok_or_else(|| {
            ModelError::Layout(format!("case {case_id} is not in the split index"))
        })?;
        let case = AlgorithmView::open(self.layout.root.clone()).load_case(task, case_id)?;
        let reference = self.label(task, case_id)?;
        ArchiveItem::new(case_id, task, split, case.payload, reference)
    }
}

fn relative_task(task: TaskId) -> PathBuf {
    PathBuf::from("tasks").join(task.get().to_string())
}

fn create_parent(path: &Path) -> Result<(), ModelError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ModelError::io(parent, e))?;
    }
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ModelError> {
    create_parent(path)?;
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| ModelError::json(path, e))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| ModelError::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelError> {
    let bytes = fs::read(path).map_err(|e| ModelError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| ModelError::json(path, e))
}
