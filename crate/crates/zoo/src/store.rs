//! On-disk zoo layout: one subdirectory per entry holding a structured-text
//! `meta` file and a `params` array container.

use crate::error::{Result, ZooError};
use crate::recipe::InjectionRecipe;
use bdf_model::cnn::ARCH_ID;
use bdf_model::SmallCnn;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZooLabel {
    Clean,
    Trojaned,
}

impl ZooLabel {
    pub fn tag(&self) -> &'static str {
        match self {
            ZooLabel::Clean => "clean",
            ZooLabel::Trojaned => "trojaned",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub model: SmallCnn<f32>,
    pub label: ZooLabel,
    /// Present exactly when the entry is trojaned.
    pub recipe: Option<InjectionRecipe>,
    pub seed: u64,
    pub clean_accuracy: f64,
    /// Ground-truth-recipe ASR on the test split; 0 for clean entries.
    pub asr: f64,
}

impl ZooEntry {
    pub fn trojaned(
        model: SmallCnn<f32>,
        recipe: InjectionRecipe,
        seed: u64,
        clean_accuracy: f64,
        asr: f64,
    ) -> Self {
        Self {
            model,
            label: ZooLabel::Trojaned,
            recipe: Some(recipe),
            seed,
            clean_accuracy,
            asr,
        }
    }

    pub fn clean(model: SmallCnn<f32>, seed: u64, clean_accuracy: f64) -> Self {
        Self {
            model,
            label: ZooLabel::Clean,
            recipe: None,
            seed,
            clean_accuracy,
            asr: 0.0,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .map_err(|e| bdf_core::CoreError::io(dir.display().to_string(), e))?;
        let (h, w, c) = (self.model.height, self.model.width, self.model.channels);
        let mut kv = vec![
            ("arch".to_string(), ARCH_ID.to_string()),
            ("classes".to_string(), self.model.classes.to_string()),
            ("height".to_string(), h.to_string()),
            ("width".to_string(), w.to_string()),
            ("channels".to_string(), c.to_string()),
            ("label".to_string(), self.label.tag().to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("metrics.accuracy".to_string(), format!("{:.6}", self.clean_accuracy)),
            ("metrics.asr".to_string(), format!("{:.6}", self.asr)),
        ];
        if let Some(recipe) = &self.recipe {
            kv.extend(recipe.to_kv());
        }
        bdf_core::config::write_kv_file(&dir.join("meta"), &kv)?;
        self.model.save_params(&dir.join("params"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta = bdf_core::config::read_kv_file(&dir.join("meta"))?;
        let get = |key: &str| -> Result<&String> {
            meta.get(key)
                .ok_or_else(|| ZooError::Config(format!("{}: missing `{key}`", dir.display())))
        };
        let arch = get("arch")?;
        if arch != ARCH_ID {
            return Err(ZooError::Config(format!(
                "{}: unsupported architecture `{arch}`",
                dir.display()
            )));
        }
        let parse = |key: &str| -> Result<usize> {
            get(key)?
                .parse::<usize>()
                .map_err(|_| ZooError::Config(format!("bad `{key}`")))
        };
        let (h, w, c) = (parse("height")?, parse("width")?, parse("channels")?);
        let classes = parse("classes")?;
        let seed = get("seed")?
            .parse::<u64>()
            .map_err(|_| ZooError::Config("bad seed".into()))?;
        let mut model = SmallCnn::<f32>::new(h, w, c, classes, 0);
        model.load_params(&dir.join("params"))?;
        let label = match get("label")?.as_str() {
            "clean" => ZooLabel::Clean,
            "trojaned" => ZooLabel::Trojaned,
            other => {
                return Err(ZooError::Config(format!(
                    "{}: unknown label `{other}`",
                    dir.display()
                )))
            }
        };
        let recipe = if label == ZooLabel::Trojaned {
            Some(InjectionRecipe::from_kv(&meta)?)
        } else {
            None
        };
        let clean_accuracy = get("metrics.accuracy")?
            .parse::<f64>()
            .map_err(|_| ZooError::Config("bad metrics.accuracy".into()))?;
        let asr = get("metrics.asr")?
            .parse::<f64>()
            .map_err(|_| ZooError::Config("bad metrics.asr".into()))?;
        Ok(Self {
            model,
            label,
            recipe,
            seed,
            clean_accuracy,
            asr,
        })
    }
}

/// Writes entries as `entry_000`, `entry_001`, ... in order.
pub fn persist_zoo(dir: &Path, entries: &[ZooEntry]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| bdf_core::CoreError::io(dir.display().to_string(), e))?;
    for (i, entry) in entries.iter().enumerate() {
        entry.save(&dir.join(format!("entry_{i:03}")))?;
    }
    Ok(())
}

/// Loads every `entry_*` subdirectory in deterministic sorted order.
pub fn load_zoo(dir: &Path) -> Result<Vec<ZooEntry>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| bdf_core::CoreError::io(dir.display().to_string(), e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("entry_"))
        .collect();
    names.sort();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        out.push(ZooEntry::load(&dir.join(name))?);
    }
    Ok(out)
}
