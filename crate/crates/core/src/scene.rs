//! The structured 3D modality: scenes as ordered lists of typed objects.
//!
//! Five dataset styles share one object type. Which optional fields are
//! present decides the style of an object; a scene never mixes styles.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::QuantizerConfig;

pub type Vec3 = [f64; 3];

/// Number of shape-codebook IDs describing one object.
pub const SHAPE_CODES_PER_OBJECT: usize = 512;
/// Entries in the shape codebook.
pub const SHAPE_CODEBOOK_SIZE: u32 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DatasetStyle {
    #[serde(alias = "clevr")]
    Clevr,
    #[serde(alias = "objaworld")]
    Objaworld,
    #[serde(alias = "objaworld_shapes")]
    ObjaworldShapes,
    #[serde(alias = "objectron")]
    Objectron,
    #[serde(alias = "arkitscenes")]
    Arkitscenes,
}

impl DatasetStyle {
    pub const ALL: [DatasetStyle; 5] = [
        DatasetStyle::Clevr,
        DatasetStyle::Objaworld,
        DatasetStyle::ObjaworldShapes,
        DatasetStyle::Objectron,
        DatasetStyle::Arkitscenes,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetStyle::Clevr => "CLEVR",
            DatasetStyle::Objaworld => "OBJAWORLD",
            DatasetStyle::ObjaworldShapes => "OBJAWORLD_SHAPES",
            DatasetStyle::Objectron => "OBJECTRON",
            DatasetStyle::Arkitscenes => "ARKITSCENES",
        }
    }

    /// Objectron and ARKitScenes objects are indistinguishable by fields.
    pub fn is_camera_frame(self) -> bool {
        matches!(self, DatasetStyle::Objectron | DatasetStyle::Arkitscenes)
    }

    /// Default quantizer range for this style.
    pub fn default_quantizer(self) -> QuantizerConfig {
        if self.is_camera_frame() {
            QuantizerConfig::camera()
        } else {
            QuantizerConfig::clevr()
        }
    }
}

impl fmt::Display for DatasetStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        DatasetStyle::ALL
            .into_iter()
            .find(|d| d.as_str() == norm)
            .ok_or_else(|| Error::Schema(format!("unknown dataset style `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_codes: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_cam: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimensions: Option<Vec3>,
}

impl SceneObject {
    pub fn clevr(size: &str, color: &str, material: &str, shape: &str, location: Vec3) -> Self {
        SceneObject {
            size: Some(size.into()),
            color: Some(color.into()),
            material: Some(material.into()),
            shape: Some(shape.into()),
            location: Some(location),
            ..Default::default()
        }
    }

    pub fn objaworld(shape: &str, location: Vec3, pose: Vec3) -> Self {
        SceneObject {
            shape: Some(shape.into()),
            location: Some(location),
            pose: Some(pose),
            ..Default::default()
        }
    }

    pub fn with_shape_codes(codes: Vec<u32>, location: Vec3, pose: Vec3) -> Self {
        SceneObject {
            shape_codes: Some(codes),
            location: Some(location),
            pose: Some(pose),
            ..Default::default()
        }
    }

    pub fn camera(category: &str, center_cam: Vec3, dimensions: Vec3) -> Self {
        SceneObject {
            category: Some(category.into()),
            center_cam: Some(center_cam),
            dimensions: Some(dimensions),
            ..Default::default()
        }
    }

    /// Checks field presence and values, returning the object's style.
    /// Camera-frame objects report [`DatasetStyle::Objectron`].
    pub fn infer_style(&self) -> Result<DatasetStyle> {
        let identities = [
            self.shape.is_some(),
            self.shape_codes.is_some(),
            self.category.is_some(),
        ];
        if identities.iter().filter(|b| **b).count() != 1 {
            return Err(Error::Schema(
                "object needs exactly one of shape, shape_codes, category".into(),
            ));
        }
        for word in [&self.size, &self.color, &self.material, &self.shape, &self.category]
            .into_iter()
            .flatten()
        {
            check_word(word)?;
        }
        for v in [&self.location, &self.pose, &self.center_cam, &self.dimensions]
            .into_iter()
            .flatten()
        {
            if let Some(bad) = v.iter().find(|c| !c.is_finite()) {
                return Err(Error::NonFinite(*bad));
            }
        }

        let has_appearance =
            self.size.is_some() || self.color.is_some() || self.material.is_some();
        let style = if let Some(codes) = &self.shape_codes {
            if codes.len() != SHAPE_CODES_PER_OBJECT {
                return Err(Error::ShapeCodeLength(codes.len()));
            }
            if let Some(c) = codes.iter().find(|c| **c >= SHAPE_CODEBOOK_SIZE) {
                return Err(Error::Schema(format!("shape code {c} outside [0, 8191]")));
            }
            DatasetStyle::ObjaworldShapes
        } else if self.category.is_some() {
            DatasetStyle::Objectron
        } else if has_appearance {
            DatasetStyle::Clevr
        } else {
            DatasetStyle::Objaworld
        };

        let present = |name: &str| -> bool {
            match name {
                "size" => self.size.is_some(),
                "color" => self.color.is_some(),
                "material" => self.material.is_some(),
                "location" => self.location.is_some(),
                "pose" => self.pose.is_some(),
                "center_cam" => self.center_cam.is_some(),
                "dimensions" => self.dimensions.is_some(),
                _ => unreachable!(),
            }
        };
        let required: &[&str] = match style {
            DatasetStyle::Clevr => &["size", "color", "material", "location"],
            DatasetStyle::Objaworld | DatasetStyle::ObjaworldShapes => &["location", "pose"],
            _ => &["center_cam", "dimensions"],
        };
        for name in [
            "size",
            "color",
            "material",
            "location",
            "pose",
            "center_cam",
            "dimensions",
        ] {
            let want = required.contains(&name);
            if want != present(name) {
                return Err(Error::Schema(format!(
                    "{} object {} `{name}`",
                    style,
                    if want { "is missing" } else { "must not carry" }
                )));
            }
        }
        Ok(style)
    }

    /// Coordinate used for spatial matching.
    pub fn position(&self) -> Option<&Vec3> {
        self.location.as_ref().or(self.center_cam.as_ref())
    }
}

fn check_word(w: &str) -> Result<()> {
    if w.is_empty()
        || w.chars().any(char::is_whitespace)
        || w.starts_with('[')
        || w.starts_with('<')
    {
        return Err(Error::Schema(format!("`{w}` is not a single word token")));
    }
    Ok(())
}

fn style_family(s: DatasetStyle) -> DatasetStyle {
    if s.is_camera_frame() {
        DatasetStyle::Objectron
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    pub dataset_style: DatasetStyle,
    pub objects: Vec<SceneObject>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    #[serde(default)]
    dataset_style: Option<DatasetStyle>,
    objects: Vec<SceneObject>,
}

impl Scene {
    /// Validates every object against `style`.
    pub fn new(dataset_style: DatasetStyle, objects: Vec<SceneObject>) -> Result<Self> {
        let scene = Scene {
            dataset_style,
            objects,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn empty(dataset_style: DatasetStyle) -> Self {
        Scene {
            dataset_style,
            objects: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, obj) in self.objects.iter().enumerate() {
            let style = obj.infer_style()?;
            if style != style_family(self.dataset_style) {
                return Err(Error::StyleMix(format!(
                    "object {i} is {style} in a {} scene",
                    self.dataset_style
                )));
            }
        }
        Ok(())
    }

    /// Errors if any coordinate lies outside the quantizer range.
    pub fn check_range(&self, cfg: &QuantizerConfig) -> Result<()> {
        let (lo, hi) = (cfg.range_min(), cfg.range_max());
        for obj in &self.objects {
            for v in [&obj.location, &obj.pose, &obj.center_cam, &obj.dimensions]
                .into_iter()
                .flatten()
            {
                if let Some(c) = v.iter().find(|c| **c < lo || **c > hi) {
                    return Err(Error::Schema(format!(
                        "coordinate {c} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(doc: &str) -> Result<Self> {
        let doc: SceneDoc = serde_json::from_str(doc)?;
        Self::from_doc(doc)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        Self::from_doc(serde_json::from_value(value)?)
    }

    fn from_doc(doc: SceneDoc) -> Result<Self> {
        let mut inferred: Option<DatasetStyle> = None;
        for (i, obj) in doc.objects.iter().enumerate() {
            let style = obj.infer_style()?;
            match inferred {
                None => inferred = Some(style),
                Some(prev) if prev != style => {
                    return Err(Error::StyleMix(format!(
                        "object {i} is {style}, earlier objects are {prev}"
                    )))
                }
                _ => {}
            }
        }
        let style = match (doc.dataset_style, inferred) {
            (Some(declared), Some(found)) if style_family(declared) != found => {
                return Err(Error::StyleMix(format!(
                    "declared {declared} but objects are {found}"
                )))
            }
            (Some(declared), _) => declared,
            (None, Some(found)) => found,
            (None, None) => DatasetStyle::Clevr,
        };
        Ok(Scene {
            dataset_style: style,
            objects: doc.objects,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scene serializes")
    }
}

impl<'de> Deserialize<'de> for Scene {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SceneDoc::deserialize(d)?;
        Scene::from_doc(doc).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnswerType {
    Bool,
    Number,
    Shape,
    Color,
    Material,
    Size,
}

pub const CLEVR_SIZES: [&str; 2] = ["small", "large"];
pub const CLEVR_COLORS: [&str; 8] = [
    "gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow",
];
pub const CLEVR_MATERIALS: [&str; 2] = ["rubber", "metal"];
pub const CLEVR_SHAPES: [&str; 3] = ["cube", "sphere", "cylinder"];
const BOOL_ANSWERS: [&str; 2] = ["True", "False"];
const NUMBER_ANSWERS: [&str; 11] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10"];

impl AnswerType {
    pub const ALL: [AnswerType; 6] = [
        AnswerType::Bool,
        AnswerType::Number,
        AnswerType::Shape,
        AnswerType::Color,
        AnswerType::Material,
        AnswerType::Size,
    ];

    /// Closed answer set for a question type.
    pub fn answer_space(self) -> &'static [&'static str] {
        match self {
            AnswerType::Bool => &BOOL_ANSWERS,
            AnswerType::Number => &NUMBER_ANSWERS,
            AnswerType::Shape => &CLEVR_SHAPES,
            AnswerType::Color => &CLEVR_COLORS,
            AnswerType::Material => &CLEVR_MATERIALS,
            AnswerType::Size => &CLEVR_SIZES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: String,
    pub answer: String,
    pub answer_type: AnswerType,
}

impl QaItem {
    pub fn new(question: &str, answer: &str, answer_type: AnswerType) -> Result<Self> {
        let item = QaItem {
            question: question.into(),
            answer: answer.into(),
            answer_type,
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<()> {
        let words = self.answer.split_whitespace().count();
        if !(1..=2).contains(&words) {
            return Err(Error::Schema(format!(
                "answer must be 1-2 words, got {words}"
            )));
        }
        Ok(())
    }
}
