//! Declarative run configuration (TOML) and named presets.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ChannelBudget;
use crate::mutation::MutationConfig;
use crate::net::NetConfig;
use crate::proxy::{generate_dataset, DatasetConfig, ProxyDataset, TrainerConfig};
use crate::schedule::{HeadSpec, LayerSchedule, SinkCombine, TemporalPool};
use crate::search::{Evaluator, SearchConfig, SearchSetup, Strategy};

/// Network options not covered by the layer schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    pub bn_momentum: f64,
    pub combine: SinkCombine,
    pub temporal_pool: TemporalPool,
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection { bn_momentum: 0.99, combine: SinkCombine::Concat, temporal_pool: TemporalPool::Avg }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Falls back to `$MSNAS_OUTPUT_DIR`, then `./msnas-out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub strategy: Strategy,
    pub search: SearchConfig,
    pub mutation: MutationConfig,
    pub trainer: TrainerConfig,
    pub dataset: DatasetConfig,
    pub schedule: LayerSchedule,
    pub net: NetSection,
}

pub const OUTPUT_DIR_ENV: &str = "MSNAS_OUTPUT_DIR";
pub const PRESETS: [&str; 2] = ["desk", "compare"];

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Single-model work at the default desk scale: 16x16 clips of 16 frames.
    pub fn desk() -> Self {
        RunConfig {
            seed: 0,
            output_dir: None,
            strategy: Strategy::Guided,
            search: SearchConfig::default(),
            mutation: MutationConfig::default(),
            trainer: TrainerConfig::default(),
            dataset: DatasetConfig::default(),
            schedule: LayerSchedule::desk(),
            net: NetSection::default(),
        }
    }

    /// A cheaper proxy task sized so that a five-seed, three-strategy
    /// comparison fits in well under an hour on one core.
    pub fn compare() -> Self {
        let mut c = Self::desk();
        c.search.budget = ChannelBudget([8, 16, 16, 32]);
        c.schedule.d = [4, 8, 8, 16];
        c.schedule.input_width = [4, 8, 8, 16];
        c.dataset.size = 8;
        c.dataset.frames = 8;
        c.dataset.clips_per_class = 100;
        c.dataset.noise = 2.0;
        c.dataset.motion_noise = 0.3;
        c.trainer.iterations = 100;
        c.trainer.gate_lr_scale = 20.0;
        c.net.bn_momentum = 0.9;
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "compare" => Ok(Self::compare()),
            _ => Err(Error::UnknownName(format!("preset {name} (expected one of {})", PRESETS.join(", ")))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// TOML with the full-scale reference value noted next to each scaled-down knob.
    pub fn annotated_toml(&self) -> String {
        let mut out = String::from("# msnas run configuration\n");
        let mut section = String::new();
        for line in self.to_toml().lines() {
            let trimmed = line.trim();
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.to_string();
                if !out.ends_with("\n\n") {
                    out.push('\n');
                }
                out.push_str(line);
                out.push('\n');
                continue;
            }
            let key = trimmed.split('=').next().unwrap_or("").trim();
            match annotation(&section, key) {
                Some(note) if !key.is_empty() => out.push_str(&format!("{line}  # {note}\n")),
                _ => {
                    out.push_str(line);
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.mutation.validate()?;
        self.trainer.validate()?;
        self.dataset.validate()?;
        self.schedule.validate()?;
        if self.dataset.appearance_channels != self.schedule.appearance_channels
            || self.dataset.motion_channels != self.schedule.motion_channels
        {
            return Err(Error::Config("dataset and schedule disagree on input channels".into()));
        }
        if !(0.0..1.0).contains(&self.net.bn_momentum) {
            return Err(Error::Config("net.bn_momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Explicit directory, else the environment variable, else `msnas-out`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("msnas-out"))
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            schedule: self.schedule.clone(),
            head: HeadSpec {
                num_classes: self.dataset.num_classes(),
                combine: self.net.combine,
                temporal_pool: self.net.temporal_pool,
            },
            bn_momentum: self.net.bn_momentum,
            init_seed: self.seed,
        }
    }

    pub fn dataset(&self) -> Result<ProxyDataset> {
        generate_dataset(&self.dataset)
    }

    /// Generates the proxy dataset and wires up a search.
    pub fn setup(&self) -> Result<SearchSetup> {
        self.validate()?;
        let data = Arc::new(self.dataset()?);
        Ok(self.setup_with(data))
    }

    pub fn setup_with(&self, data: Arc<ProxyDataset>) -> SearchSetup {
        SearchSetup {
            search: self.search.clone(),
            mutation: self.mutation.clone(),
            schedule: self.schedule.clone(),
            evaluator: Evaluator::new(data, self.net_config(), self.trainer.clone()),
        }
    }
}

fn annotation(section: &str, key: &str) -> Option<&'static str> {
    Some(match (section, key) {
        ("search", "population_size") => "full-scale value: 20",
        ("search", "tournament_size") => "full-scale value: 5",
        ("search", "init_rounds") => "full-scale value: about 30 random initialisation rounds",
        ("search", "rounds") => "full-scale value: about 200 evolution rounds (good models within 40)",
        ("search", "workers") => "full-scale value: 10 parallel workers",
        ("search", "budget") => "full-scale value: [128, 256, 512, 512]",
        ("mutation", "threshold") => "full-scale value: uniform U(0,1) per edge",
        ("mutation", "max_ops_per_child") => "full-scale value: 0 to 4 node operators per child",
        ("mutation", "resolutions") => "full-scale value: r in {1, 2, 4, 8}",
        ("mutation", "init_edge_prob") => "full-scale value: 0.5",
        ("mutation", "random_edge_fraction") => "full-scale value: 1/3 of the edge slots",
        ("mutation", "reset_inherited_logits") => "not stated at full scale; inherited gates are kept",
        ("trainer", "iterations") => "full-scale value: 10k iterations per candidate",
        ("trainer", "batch_size") => "full-scale value: 512",
        ("trainer", "base_lr") => "full-scale value: 3.2 at batch 512",
        ("trainer", "warmup_fraction") => "full-scale value: 12k of 50k iterations",
        ("trainer", "momentum") => "full-scale value: momentum SGD (0.9 assumed)",
        ("trainer", "weight_decay") => "full-scale value: 1e-4",
        ("trainer", "label_smoothing") => "full-scale value: 0.2",
        ("trainer", "gate_lr_scale") => "no full-scale counterpart (1.0 there)",
        ("dataset", "frames") => "full-scale value: 32 frames per training clip",
        ("dataset", "size") => "full-scale value: 224",
        ("dataset", "val_fraction") => "full-scale value: unspecified validation subset",
        ("schedule", "m") => "full-scale value: [1.5, 2, 3, 1.5]",
        ("schedule", "d") => "full-scale value: [64, 128, 256, 512]",
        ("schedule", "input_width") => "full-scale value: [64, 128, 256, 512]",
        ("schedule", "expansion") => "full-scale value: 4",
        ("schedule", "stem_channels") => "full-scale value: 64",
        _ => return None,
    })
}
