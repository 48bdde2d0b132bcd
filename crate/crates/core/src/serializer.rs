//! Scene <-> flat token string conversion.
//!
//! Object layouts per dataset style (each wrapped in `[OBJECT-START]` /
//! `[OBJECT-END]`, the scene wrapped in `[SCENE-START]` / `[SCENE-END]`):
//!
//! ```text
//! CLEVR        [SIZE] w [COLOR] w [MATERIAL] w [SHAPE] w [LOCATION] n n n
//! ObjaWorld    [SHAPE] w [LOCATION] n n n [POSE] n n n
//! with shapes  [SHAPE] <shape:c> x512 [LOCATION] n n n [POSE] n n n
//! camera-frame [CATEGORY] w [CENTER_CAM] n n n [DIMENSIONS] n n n
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quantizer::QuantizerConfig;
use crate::scene::{DatasetStyle, Scene, SceneObject, Vec3, SHAPE_CODEBOOK_SIZE, SHAPE_CODES_PER_OBJECT};
use crate::vocab::{self, Vocabulary};

/// Tokens per serialized object, by style.
pub fn object_token_count(style: DatasetStyle) -> usize {
    match style {
        DatasetStyle::Clevr => 14,
        DatasetStyle::Objaworld => 12,
        DatasetStyle::ObjaworldShapes => 10 + SHAPE_CODES_PER_OBJECT + 1,
        DatasetStyle::Objectron | DatasetStyle::Arkitscenes => 12,
    }
}

/// Ordered token strings, before ID assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenString(pub Vec<String>);

impl TokenString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn to_ids(&self, vocab: &Vocabulary) -> Result<Vec<u32>> {
        self.iter().map(|t| vocab.lookup(t)).collect()
    }

    /// Unknown IDs become `<unk:N>`, which no grammar accepts.
    pub fn from_ids(ids: &[u32], vocab: &Vocabulary) -> Self {
        TokenString(
            ids.iter()
                .map(|&id| vocab.id_to_token(id).unwrap_or_else(|_| format!("<unk:{id}>")))
                .collect(),
        )
    }
}

impl fmt::Display for TokenString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl FromStr for TokenString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(TokenString(s.split_whitespace().map(str::to_string).collect()))
    }
}

impl From<Vec<&str>> for TokenString {
    fn from(v: Vec<&str>) -> Self {
        TokenString(v.into_iter().map(str::to_string).collect())
    }
}

fn push_vec(out: &mut Vec<String>, v: &Vec3, cfg: &QuantizerConfig) -> Result<()> {
    for c in v {
        out.push(cfg.quantize(*c)?);
    }
    Ok(())
}

fn missing(field: &str) -> Error {
    Error::Schema(format!("object is missing `{field}`"))
}

/// Serializes one object (including its start/end markers).
pub fn serialize_object(
    obj: &SceneObject,
    style: DatasetStyle,
    cfg: &QuantizerConfig,
    out: &mut Vec<String>,
) -> Result<()> {
    out.push(vocab::OBJECT_START.into());
    let word = |f: &Option<String>, name: &str| f.clone().ok_or_else(|| missing(name));
    let vec = |f: &Option<Vec3>, name: &str| f.ok_or_else(|| missing(name));
    match style {
        DatasetStyle::Clevr => {
            for (marker, field, name) in [
                (vocab::SIZE, &obj.size, "size"),
                (vocab::COLOR, &obj.color, "color"),
                (vocab::MATERIAL, &obj.material, "material"),
                (vocab::SHAPE, &obj.shape, "shape"),
            ] {
                out.push(marker.into());
                out.push(word(field, name)?);
            }
            out.push(vocab::LOCATION.into());
            push_vec(out, &vec(&obj.location, "location")?, cfg)?;
        }
        DatasetStyle::Objaworld | DatasetStyle::ObjaworldShapes => {
            out.push(vocab::SHAPE.into());
            if style == DatasetStyle::Objaworld {
                out.push(word(&obj.shape, "shape")?);
            } else {
                let codes = obj.shape_codes.as_ref().ok_or_else(|| missing("shape_codes"))?;
                if codes.len() != SHAPE_CODES_PER_OBJECT {
                    return Err(Error::ShapeCodeLength(codes.len()));
                }
                out.extend(codes.iter().map(|c| vocab::shape_token(*c)));
            }
            out.push(vocab::LOCATION.into());
            push_vec(out, &vec(&obj.location, "location")?, cfg)?;
            out.push(vocab::POSE.into());
            push_vec(out, &vec(&obj.pose, "pose")?, cfg)?;
        }
        DatasetStyle::Objectron | DatasetStyle::Arkitscenes => {
            out.push(vocab::CATEGORY.into());
            out.push(word(&obj.category, "category")?);
            out.push(vocab::CENTER_CAM.into());
            push_vec(out, &vec(&obj.center_cam, "center_cam")?, cfg)?;
            out.push(vocab::DIMENSIONS.into());
            push_vec(out, &vec(&obj.dimensions, "dimensions")?, cfg)?;
        }
    }
    out.push(vocab::OBJECT_END.into());
    Ok(())
}

/// Serializes a scene; coordinates outside the quantizer range are clamped.
pub fn serialize_scene(scene: &Scene, cfg: &QuantizerConfig) -> Result<TokenString> {
    let mut out = Vec::with_capacity(2 + scene.len() * object_token_count(scene.dataset_style));
    out.push(vocab::SCENE_START.to_string());
    for obj in &scene.objects {
        serialize_object(obj, scene.dataset_style, cfg, &mut out)?;
    }
    out.push(vocab::SCENE_END.to_string());
    Ok(TokenString(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

/// A recoverable problem found by a lenient parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "token {}: {}", self.position, self.message)
    }
}

struct Cursor<'a> {
    toks: &'a [String],
    pos: usize,
    cfg: &'a QuantizerConfig,
}

fn is_marker(t: &str) -> bool {
    t.starts_with('[') && t.ends_with(']')
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Grammar {
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(String::as_str)
    }

    fn next(&mut self) -> Result<&'a str> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of sequence"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, marker: &str) -> Result<()> {
        let t = self.next()?;
        if t != marker {
            self.pos -= 1;
            return Err(self.err(format!("expected {marker}, found `{t}`")));
        }
        Ok(())
    }

    fn word(&mut self) -> Result<String> {
        let t = self.next()?;
        if is_marker(t) || t.starts_with('<') || self.cfg.is_token(t) {
            self.pos -= 1;
            return Err(self.err(format!("expected a word, found `{t}`")));
        }
        Ok(t.to_string())
    }

    fn number(&mut self) -> Result<f64> {
        let t = self.next()?;
        self.cfg.dequantize(t).map_err(|_| {
            self.pos -= 1;
            self.err(format!("expected a number token, found `{t}`"))
        })
    }

    fn vec3(&mut self) -> Result<Vec3> {
        Ok([self.number()?, self.number()?, self.number()?])
    }

    fn shape_code(&mut self) -> Result<u32> {
        let t = self.next()?;
        t.strip_prefix("<shape:")
            .and_then(|r| r.strip_suffix('>'))
            .and_then(|n| n.parse::<u32>().ok())
            .filter(|c| *c < SHAPE_CODEBOOK_SIZE && vocab::shape_token(*c) == t)
            .ok_or_else(|| {
                self.pos -= 1;
                self.err(format!("expected a shape code, found `{t}`"))
            })
    }

    /// Parses `[OBJECT-START] ... [OBJECT-END]`; the body decides the style.
    fn object(&mut self) -> Result<(SceneObject, DatasetStyle)> {
        self.expect(vocab::OBJECT_START)?;
        let head = self.peek().ok_or_else(|| self.err("unexpected end of sequence"))?;
        let (obj, style) = match head {
            vocab::SIZE => {
                self.expect(vocab::SIZE)?;
                let size = self.word()?;
                self.expect(vocab::COLOR)?;
                let color = self.word()?;
                self.expect(vocab::MATERIAL)?;
                let material = self.word()?;
                self.expect(vocab::SHAPE)?;
                let shape = self.word()?;
                self.expect(vocab::LOCATION)?;
                let loc = self.vec3()?;
                (
                    SceneObject::clevr(&size, &color, &material, &shape, loc),
                    DatasetStyle::Clevr,
                )
            }
            vocab::SHAPE => {
                self.expect(vocab::SHAPE)?;
                let first = self.peek().unwrap_or_default();
                let (mut obj, style) = if first.starts_with("<shape:") {
                    let codes = (0..SHAPE_CODES_PER_OBJECT)
                        .map(|_| self.shape_code())
                        .collect::<Result<Vec<_>>>()?;
                    (
                        SceneObject {
                            shape_codes: Some(codes),
                            ..Default::default()
                        },
                        DatasetStyle::ObjaworldShapes,
                    )
                } else {
                    (
                        SceneObject {
                            shape: Some(self.word()?),
                            ..Default::default()
                        },
                        DatasetStyle::Objaworld,
                    )
                };
                self.expect(vocab::LOCATION)?;
                obj.location = Some(self.vec3()?);
                self.expect(vocab::POSE)?;
                obj.pose = Some(self.vec3()?);
                (obj, style)
            }
            vocab::CATEGORY => {
                self.expect(vocab::CATEGORY)?;
                let cat = self.word()?;
                self.expect(vocab::CENTER_CAM)?;
                let center = self.vec3()?;
                self.expect(vocab::DIMENSIONS)?;
                let dims = self.vec3()?;
                (SceneObject::camera(&cat, center, dims), DatasetStyle::Objectron)
            }
            other => return Err(self.err(format!("unexpected `{other}` at object start"))),
        };
        self.expect(vocab::OBJECT_END)?;
        obj.infer_style().map_err(|e| self.err(e.to_string()))?;
        Ok((obj, style))
    }
}

fn resolve_style(found: Option<DatasetStyle>, hint: Option<DatasetStyle>) -> DatasetStyle {
    match (found, hint) {
        (Some(DatasetStyle::Objectron), Some(h)) if h.is_camera_frame() => h,
        (Some(f), _) => f,
        (None, Some(h)) => h,
        (None, None) => DatasetStyle::Clevr,
    }
}

/// Parses a token string back into a scene.
///
/// Camera-frame objects come back as Objectron and empty scenes as CLEVR
/// unless `hint` names the style.
pub fn parse_scene(
    ts: &TokenString,
    cfg: &QuantizerConfig,
    mode: ParseMode,
    hint: Option<DatasetStyle>,
) -> Result<(Scene, Vec<ParseDiagnostic>)> {
    match mode {
        ParseMode::Strict => parse_strict(&ts.0, cfg, hint).map(|s| (s, Vec::new())),
        ParseMode::Lenient => Ok(parse_lenient(&ts.0, cfg, hint)),
    }
}

/// Parses token IDs (e.g. model output) into a scene.
pub fn parse_ids(
    ids: &[u32],
    vocab: &Vocabulary,
    mode: ParseMode,
    hint: Option<DatasetStyle>,
) -> Result<(Scene, Vec<ParseDiagnostic>)> {
    parse_scene(&TokenString::from_ids(ids, vocab), vocab.quantizer(), mode, hint)
}

fn parse_strict(
    toks: &[String],
    cfg: &QuantizerConfig,
    hint: Option<DatasetStyle>,
) -> Result<Scene> {
    let mut cur = Cursor { toks, pos: 0, cfg };
    cur.expect(vocab::SCENE_START)?;
    let mut objects = Vec::new();
    let mut found: Option<DatasetStyle> = None;
    while cur.peek() != Some(vocab::SCENE_END) {
        let start = cur.pos;
        let (obj, style) = cur.object()?;
        if found.is_some_and(|f| f != style) {
            return Err(Error::Grammar {
                position: start,
                message: format!("{style} object in a {} scene", found.unwrap()),
            });
        }
        found = Some(style);
        objects.push(obj);
    }
    cur.expect(vocab::SCENE_END)?;
    if cur.pos != toks.len() {
        return Err(cur.err("trailing tokens after [SCENE-END]"));
    }
    Ok(Scene {
        dataset_style: resolve_style(found, hint),
        objects,
    })
}

fn parse_lenient(
    toks: &[String],
    cfg: &QuantizerConfig,
    hint: Option<DatasetStyle>,
) -> (Scene, Vec<ParseDiagnostic>) {
    let mut diags = Vec::new();
    let mut note = |position: usize, message: String| diags.push(ParseDiagnostic { position, message });
    let mut cur = Cursor { toks, pos: 0, cfg };
    if cur.peek() == Some(vocab::SCENE_START) {
        cur.pos += 1;
    } else {
        note(0, "missing [SCENE-START]".into());
    }
    let mut objects = Vec::new();
    let mut found: Option<DatasetStyle> = None;
    let mut closed = false;
    let mut truncated = false;
    while let Some(t) = cur.peek() {
        match t {
            vocab::SCENE_END => {
                cur.pos += 1;
                closed = true;
                break;
            }
            vocab::OBJECT_START => {
                let start = cur.pos;
                match cur.object() {
                    Ok((obj, style)) => {
                        if found.is_some_and(|f| f != style) {
                            note(start, format!("dropped {style} object in a {} scene", found.unwrap()));
                        } else {
                            found = Some(style);
                            objects.push(obj);
                        }
                    }
                    Err(e) => {
                        if cur.pos >= toks.len() {
                            note(start, format!("truncated object dropped: {e}"));
                            truncated = true;
                            break;
                        }
                        note(start, format!("malformed object skipped: {e}"));
                        cur.pos = start + 1;
                        while let Some(t) = cur.peek() {
                            if t == vocab::OBJECT_START || t == vocab::SCENE_END {
                                break;
                            }
                            cur.pos += 1;
                        }
                    }
                }
            }
            other => {
                let start = cur.pos;
                while let Some(t) = cur.peek() {
                    if t == vocab::OBJECT_START || t == vocab::SCENE_END {
                        break;
                    }
                    cur.pos += 1;
                }
                note(
                    start,
                    format!("skipped {} stray token(s) starting at `{other}`", cur.pos - start),
                );
            }
        }
    }
    if closed && cur.pos < toks.len() {
        note(cur.pos, format!("ignored {} token(s) after [SCENE-END]", toks.len() - cur.pos));
    } else if !closed && !truncated {
        note(toks.len(), "missing [SCENE-END]".into());
    }
    let scene = Scene {
        dataset_style: resolve_style(found, hint),
        objects,
    };
    (scene, diags)
}

/// Mean serialized length over a corpus.
pub fn mean_sequence_length(scenes: &[Scene], cfg: &QuantizerConfig) -> Result<f64> {
    if scenes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0usize;
    for s in scenes {
        total += serialize_scene(s, cfg)?.len();
    }
    Ok(total as f64 / scenes.len() as f64)
}

/// Splits a token the way a subword text tokenizer without number support
/// would: letter runs, digit runs and single punctuation characters.
pub fn fragment(token: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let class = |c: char| {
        if c.is_alphabetic() {
            0
        } else if c.is_ascii_digit() {
            1
        } else {
            2
        }
    };
    let chars: Vec<(usize, char)> = token.char_indices().collect();
    for (k, &(i, c)) in chars.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let prev = chars[k - 1].1;
        if class(c) != class(prev) || class(c) == 2 {
            out.push(&token[start..i]);
            start = i;
        }
    }
    if !token.is_empty() {
        out.push(&token[start..]);
    }
    out
}

/// Mean token count of a corpus under [`fragment`]ed serialization.
pub fn fragmenting_baseline_length(scenes: &[Scene], cfg: &QuantizerConfig) -> Result<f64> {
    if scenes.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0usize;
    for s in scenes {
        total += serialize_scene(s, cfg)?
            .iter()
            .map(|t| fragment(t).len())
            .sum::<usize>();
    }
    Ok(total as f64 / scenes.len() as f64)
}
