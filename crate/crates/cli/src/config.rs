//! Settings shared by all subcommands. A config file (TOML or JSON) may set
//! any of them; command-line flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use sceneseq::sequence::ModalityOrder;
use sceneseq::{DatasetStyle, QuantizerConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub granularity: Option<f64>,
    pub range: Option<[f64; 2]>,
    pub dataset: Option<DatasetStyle>,
    pub center_reorder: Option<bool>,
    pub order: Option<String>,
    pub tau: Option<Vec<f64>>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub with_shapes: Option<bool>,
    pub n: Option<usize>,
    pub min_objects: Option<usize>,
    pub max_objects: Option<usize>,
    pub min_separation: Option<f64>,
    pub lenient: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl Settings {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_toml = path.extension().is_some_and(|e| e == "toml");
        Ok(if is_toml {
            toml::from_str(&text).context("parsing TOML config")?
        } else {
            serde_json::from_str(&text).context("parsing JSON config")?
        })
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &Settings) -> Self {
        overlay!(
            self, top, granularity, range, dataset, center_reorder, order, tau, jobs, seed, out,
            with_shapes, n, min_objects, max_objects, min_separation, lenient
        );
        self
    }

    /// Quantizer from `--granularity` / `--range`, falling back to the
    /// dataset default.
    pub fn quantizer(&self) -> anyhow::Result<QuantizerConfig> {
        let base = self.dataset.unwrap_or(DatasetStyle::Clevr).default_quantizer();
        if self.granularity.is_none() && self.range.is_none() {
            return Ok(base);
        }
        let g = self.granularity.unwrap_or(base.granularity());
        let [lo, hi] = self.range.unwrap_or([base.range_min(), base.range_max()]);
        Ok(QuantizerConfig::new(g, lo, hi)?)
    }

    pub fn modality_order(&self) -> anyhow::Result<ModalityOrder> {
        match self.order.as_deref() {
            None | Some("image-first") => Ok(ModalityOrder::ImageFirst),
            Some("scene-first") => Ok(ModalityOrder::SceneFirst),
            Some(other) => bail!("unknown order `{other}` (expected image-first or scene-first)"),
        }
    }

    pub fn with_shapes(&self) -> bool {
        self.with_shapes.unwrap_or(false) || self.dataset == Some(DatasetStyle::ObjaworldShapes)
    }
}

pub fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s
        .split_once(',')
        .or_else(|| s.split_once(':'))
        .ok_or_else(|| format!("expected MIN,MAX, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok([p(a)?, p(b)?])
}

pub fn parse_dataset(s: &str) -> Result<DatasetStyle, String> {
    s.parse::<DatasetStyle>().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: Settings = toml::from_str("granularity = 0.1\nseed = 3\ndataset = \"OBJAWORLD\"").unwrap();
        let flags = Settings {
            seed: Some(9),
            ..Default::default()
        };
        let s = file.overlay(&flags);
        assert_eq!(s.seed, Some(9));
        assert_eq!(s.granularity, Some(0.1));
        assert_eq!(s.dataset, Some(DatasetStyle::Objaworld));
        let q = s.quantizer().unwrap();
        assert_eq!((q.granularity(), q.range_min()), (0.1, -8.0));
    }

    #[test]
    fn range_forms() {
        assert_eq!(parse_range("-8,8").unwrap(), [-8.0, 8.0]);
        assert_eq!(parse_range("-10:10").unwrap(), [-10.0, 10.0]);
        assert!(parse_range("8").is_err());
    }
}
