//! Unified token-ID space.
//!
//! IDs are laid out in contiguous blocks, in this order:
//!
//! | block    | contents                                                  |
//! |----------|-----------------------------------------------------------|
//! | base     | 256 byte tokens, registered words, then opaque text IDs   |
//! | specials | marker tokens such as `[SCENE-START]`                     |
//! | numeric  | one token per quantizer bin                               |
//! | image    | image codebook entries, `<img:N>`                         |
//! | shape    | shape codebook entries, `<shape:N>` (optional)            |
//!
//! The base block stands in for an external text tokenizer: it keeps that
//! tokenizer's ID count while only naming the words this toolkit emits.
//! Words outside the registry are spelled with byte tokens.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::quantizer::QuantizerConfig;
use crate::scene::{CLEVR_COLORS, CLEVR_MATERIALS, CLEVR_SHAPES, CLEVR_SIZES, SHAPE_CODEBOOK_SIZE};

pub const BASE_TEXT_SIZE: u32 = 128_000;
pub const IMAGE_CODEBOOK_SIZE: u32 = 1024;
pub const BYTE_TOKENS: u32 = 256;

pub const SCENE_START: &str = "[SCENE-START]";
pub const SCENE_END: &str = "[SCENE-END]";
pub const OBJECT_START: &str = "[OBJECT-START]";
pub const OBJECT_END: &str = "[OBJECT-END]";
pub const SIZE: &str = "[SIZE]";
pub const COLOR: &str = "[COLOR]";
pub const MATERIAL: &str = "[MATERIAL]";
pub const SHAPE: &str = "[SHAPE]";
pub const LOCATION: &str = "[LOCATION]";
pub const POSE: &str = "[POSE]";
pub const CATEGORY: &str = "[CATEGORY]";
pub const CENTER_CAM: &str = "[CENTER_CAM]";
pub const DIMENSIONS: &str = "[DIMENSIONS]";
pub const TEXT_START: &str = "[TEXT-START]";
pub const TEXT_END: &str = "[TEXT-END]";
pub const IMAGE_START: &str = "[IMAGE-START]";
pub const IMAGE_END: &str = "[IMAGE-END]";
pub const OUTPUT_SEP: &str = "[OUTPUT-SEP]";
pub const BOS: &str = "[BOS]";
pub const EOS: &str = "[EOS]";

/// Every marker the serializer and sequence builder emit.
pub const SPECIAL_TOKENS: [&str; 20] = [
    SCENE_START,
    SCENE_END,
    OBJECT_START,
    OBJECT_END,
    SIZE,
    COLOR,
    MATERIAL,
    SHAPE,
    LOCATION,
    POSE,
    CATEGORY,
    CENTER_CAM,
    DIMENSIONS,
    TEXT_START,
    TEXT_END,
    IMAGE_START,
    IMAGE_END,
    OUTPUT_SEP,
    BOS,
    EOS,
];

pub const OBJAWORLD_ASSETS: [&str; 7] = ["person", "bird", "bench", "lamppost", "sofa", "table", "chair"];
pub const CAMERA_CATEGORIES: [&str; 24] = [
    "bicycle", "books", "bottle", "camera", "cereal_box", "chair", "cup", "laptop", "shoe",
    "cabinet", "refrigerator", "shelves", "stove", "bed", "sink", "washer", "toilet", "bathtub",
    "oven", "dishwasher", "fireplace", "stool", "table", "tv_monitor",
];
const QA_WORDS: [&str; 13] = [
    "True", "False", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10",
];
const INSTRUCTION_WORDS: [&str; 27] = [
    "Change", "Transform", "Set", "Put", "Insert", "Add", "Remove", "Take", "out", "Move",
    "the", "a", "an", "object", "to", "have", "of", "left", "right", "front", "behind", "and",
    "color", "material", "size", "shape", "position",
];
const QUESTION_WORDS: [&str; 14] = [
    "What", "How", "many", "Is", "Are", "there", "is", "are", "same", "as", "any", "other",
    "things", "that",
];

/// Word registry shipped with the toolkit: CLEVR attributes, asset and
/// category names, QA answers and the words of the instruction templates.
pub fn default_words() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let groups: [&[&str]; 9] = [
        &CLEVR_SIZES,
        &CLEVR_COLORS,
        &CLEVR_MATERIALS,
        &CLEVR_SHAPES,
        &OBJAWORLD_ASSETS,
        &CAMERA_CATEGORIES,
        &QA_WORDS,
        &INSTRUCTION_WORDS,
        &QUESTION_WORDS,
    ];
    for w in groups.into_iter().flatten() {
        if !out.iter().any(|x| x == w) {
            out.push((*w).to_string());
        }
    }
    out
}

/// Which block an ID belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Byte,
    Word,
    Text,
    Special,
    Number,
    Image,
    Shape,
}

pub fn image_token(code: u32) -> String {
    format!("<img:{code}>")
}

pub fn shape_token(code: u32) -> String {
    format!("<shape:{code}>")
}

fn byte_token(b: u8) -> String {
    format!("<0x{b:02X}>")
}

fn parse_tagged(tok: &str, tag: &str) -> Option<u32> {
    let inner = tok.strip_prefix('<')?.strip_suffix('>')?.strip_prefix(tag)?;
    if inner.is_empty() || (inner.len() > 1 && inner.starts_with('0')) {
        return None;
    }
    inner.parse().ok()
}

fn parse_byte(tok: &str) -> Option<u8> {
    let hex = tok.strip_prefix("<0x")?.strip_suffix('>')?;
    if hex.len() != 2 || hex.bytes().any(|b| b.is_ascii_lowercase()) {
        return None;
    }
    u8::from_str_radix(hex, 16).ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    base_size: u32,
    words: Vec<String>,
    word_ids: HashMap<String, u32>,
    specials: Vec<String>,
    special_ids: HashMap<String, u32>,
    quantizer: QuantizerConfig,
    image_codes: u32,
    shape_codes: u32,
}

/// Builds a vocabulary over the default base block and word registry.
pub fn build_vocab(
    cfg: QuantizerConfig,
    specials: &[&str],
    image_codes: u32,
    with_shapes: bool,
) -> Result<Vocabulary> {
    VocabBuilder::new(cfg)
        .specials(specials.iter().map(|s| s.to_string()).collect())
        .image_codes(image_codes)
        .with_shapes(with_shapes)
        .build()
}

#[derive(Debug, Clone)]
pub struct VocabBuilder {
    base_size: u32,
    words: Vec<String>,
    specials: Vec<String>,
    quantizer: QuantizerConfig,
    image_codes: u32,
    shape_codes: u32,
}

impl VocabBuilder {
    pub fn new(quantizer: QuantizerConfig) -> Self {
        VocabBuilder {
            base_size: BASE_TEXT_SIZE,
            words: default_words(),
            specials: SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect(),
            quantizer,
            image_codes: IMAGE_CODEBOOK_SIZE,
            shape_codes: 0,
        }
    }

    pub fn base_size(mut self, n: u32) -> Self {
        self.base_size = n;
        self
    }

    pub fn words(mut self, words: Vec<String>) -> Self {
        self.words = words;
        self
    }

    pub fn specials(mut self, specials: Vec<String>) -> Self {
        self.specials = specials;
        self
    }

    pub fn image_codes(mut self, n: u32) -> Self {
        self.image_codes = n;
        self
    }

    pub fn with_shapes(mut self, on: bool) -> Self {
        self.shape_codes = if on { SHAPE_CODEBOOK_SIZE } else { 0 };
        self
    }

    pub fn build(self) -> Result<Vocabulary> {
        for required in SPECIAL_TOKENS {
            if !self.specials.iter().any(|s| s == required) {
                return Err(Error::InvalidConfig(format!(
                    "special token {required} is required"
                )));
            }
        }
        let mut special_ids = HashMap::new();
        for (i, s) in self.specials.iter().enumerate() {
            if !(s.starts_with('[') && s.ends_with(']')) {
                return Err(Error::InvalidConfig(format!(
                    "special token `{s}` must be bracketed"
                )));
            }
            if special_ids.insert(s.clone(), self.base_size + i as u32).is_some() {
                return Err(Error::DuplicateToken(s.clone()));
            }
        }
        if BYTE_TOKENS as usize + self.words.len() > self.base_size as usize {
            return Err(Error::InvalidConfig(format!(
                "{} words do not fit a base block of {}",
                self.words.len(),
                self.base_size
            )));
        }
        let mut word_ids = HashMap::new();
        for (i, w) in self.words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) || w.starts_with('<') {
                return Err(Error::InvalidConfig(format!("`{w}` is not a word token")));
            }
            if special_ids.contains_key(w) || self.quantizer.is_token(w) {
                return Err(Error::DuplicateToken(w.clone()));
            }
            if word_ids.insert(w.clone(), BYTE_TOKENS + i as u32).is_some() {
                return Err(Error::DuplicateToken(w.clone()));
            }
        }
        Ok(Vocabulary {
            base_size: self.base_size,
            words: self.words,
            word_ids,
            specials: self.specials,
            special_ids,
            quantizer: self.quantizer,
            image_codes: self.image_codes,
            shape_codes: self.shape_codes,
        })
    }
}

impl Vocabulary {
    /// Default layout: 128,000 base IDs, all markers, 1,024 image codes.
    pub fn new(quantizer: QuantizerConfig, with_shapes: bool) -> Self {
        VocabBuilder::new(quantizer)
            .with_shapes(with_shapes)
            .build()
            .expect("default vocabulary is consistent")
    }

    pub fn quantizer(&self) -> &QuantizerConfig {
        &self.quantizer
    }

    pub fn base_size(&self) -> u32 {
        self.base_size
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn image_codes(&self) -> u32 {
        self.image_codes
    }

    pub fn shape_codes(&self) -> u32 {
        self.shape_codes
    }

    fn numeric_start(&self) -> u32 {
        self.base_size + self.specials.len() as u32
    }

    fn image_start(&self) -> u32 {
        self.numeric_start() + self.quantizer.len() as u32
    }

    fn shape_start(&self) -> u32 {
        self.image_start() + self.image_codes
    }

    pub fn total_size(&self) -> u32 {
        self.shape_start() + self.shape_codes
    }

    pub fn block(&self, kind: TokenKind) -> Range<u32> {
        let words_end = BYTE_TOKENS + self.words.len() as u32;
        match kind {
            TokenKind::Byte => 0..BYTE_TOKENS,
            TokenKind::Word => BYTE_TOKENS..words_end,
            TokenKind::Text => words_end..self.base_size,
            TokenKind::Special => self.base_size..self.numeric_start(),
            TokenKind::Number => self.numeric_start()..self.image_start(),
            TokenKind::Image => self.image_start()..self.shape_start(),
            TokenKind::Shape => self.shape_start()..self.total_size(),
        }
    }

    pub fn kind_of(&self, id: u32) -> Option<TokenKind> {
        [
            TokenKind::Byte,
            TokenKind::Word,
            TokenKind::Text,
            TokenKind::Special,
            TokenKind::Number,
            TokenKind::Image,
            TokenKind::Shape,
        ]
        .into_iter()
        .find(|k| self.block(*k).contains(&id))
    }

    /// ID of a token in string form.
    pub fn lookup(&self, token: &str) -> Result<u32> {
        let unknown = || Error::UnknownToken(token.to_string());
        if let Some(id) = self.special_ids.get(token) {
            return Ok(*id);
        }
        if let Some(id) = self.word_ids.get(token) {
            return Ok(*id);
        }
        if let Ok(i) = self.quantizer.index_of(token) {
            return Ok(self.numeric_start() + i as u32);
        }
        if token.starts_with('<') {
            if let Some(b) = parse_byte(token) {
                return Ok(b as u32);
            }
            if let Some(c) = parse_tagged(token, "img:") {
                return self.lookup_image(c).map_err(|_| unknown());
            }
            if let Some(c) = parse_tagged(token, "shape:") {
                return self.lookup_shape(c).map_err(|_| unknown());
            }
            if let Some(n) = parse_tagged(token, "text:") {
                if self.block(TokenKind::Text).contains(&n) {
                    return Ok(n);
                }
            }
        }
        Err(unknown())
    }

    pub fn lookup_special(&self, token: &str) -> u32 {
        *self
            .special_ids
            .get(token)
            .unwrap_or_else(|| panic!("{token} is not a special token"))
    }

    pub fn lookup_image(&self, code: u32) -> Result<u32> {
        if code >= self.image_codes {
            return Err(Error::UnknownToken(image_token(code)));
        }
        Ok(self.image_start() + code)
    }

    pub fn lookup_shape(&self, code: u32) -> Result<u32> {
        if code >= self.shape_codes {
            return Err(Error::UnknownToken(shape_token(code)));
        }
        Ok(self.shape_start() + code)
    }

    /// String form of an ID; inverse of [`lookup`](Self::lookup).
    pub fn id_to_token(&self, id: u32) -> Result<String> {
        let kind = self
            .kind_of(id)
            .ok_or_else(|| Error::UnknownToken(format!("#{id}")))?;
        let offset = id - self.block(kind).start;
        Ok(match kind {
            TokenKind::Byte => byte_token(id as u8),
            TokenKind::Word => self.words[offset as usize].clone(),
            TokenKind::Text => format!("<text:{id}>"),
            TokenKind::Special => self.specials[offset as usize].clone(),
            TokenKind::Number => self.quantizer.token_at(offset as usize),
            TokenKind::Image => image_token(offset),
            TokenKind::Shape => shape_token(offset),
        })
    }

    /// Image codebook index of an ID in the image block.
    pub fn image_code(&self, id: u32) -> Option<u32> {
        self.block(TokenKind::Image)
            .contains(&id)
            .then(|| id - self.image_start())
    }

    /// Encodes text: registered words map to one ID, other words are spelled
    /// in UTF-8 byte tokens with `0x20` between two consecutive spelled words.
    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        let mut prev_spelled = false;
        for word in text.split_whitespace() {
            match self.word_ids.get(word) {
                Some(id) => {
                    out.push(*id);
                    prev_spelled = false;
                }
                None => {
                    if prev_spelled {
                        out.push(b' ' as u32);
                    }
                    out.extend(word.bytes().map(u32::from));
                    prev_spelled = true;
                }
            }
        }
        out
    }

    /// Inverse of [`encode_text`](Self::encode_text), up to whitespace
    /// normalization.
    pub fn decode_text(&self, ids: &[u32]) -> Result<String> {
        let mut words: Vec<String> = Vec::new();
        let mut buf: Vec<u8> = Vec::new();
        let flush = |buf: &mut Vec<u8>, words: &mut Vec<String>| -> Result<()> {
            if !buf.is_empty() {
                let w = String::from_utf8(std::mem::take(buf))
                    .map_err(|e| Error::Format(format!("invalid UTF-8 in text: {e}")))?;
                words.push(w);
            }
            Ok(())
        };
        for &id in ids {
            match self.kind_of(id) {
                Some(TokenKind::Byte) if id == b' ' as u32 => flush(&mut buf, &mut words)?,
                Some(TokenKind::Byte) => buf.push(id as u8),
                Some(TokenKind::Word) => {
                    flush(&mut buf, &mut words)?;
                    words.push(self.words[(id - BYTE_TOKENS) as usize].clone());
                }
                _ => return Err(Error::UnknownToken(self.id_to_token(id).unwrap_or_default())),
            }
        }
        flush(&mut buf, &mut words)?;
        Ok(words.join(" "))
    }

    /// Writes the line-oriented manifest: block headers with counts, then
    /// `ID<TAB>token` for every named token.
    pub fn write_manifest<W: Write>(&self, mut w: W) -> Result<()> {
        let q = self.quantizer;
        writeln!(w, "#vocab\t{}", self.total_size())?;
        writeln!(
            w,
            "#quantizer\t{}\t{}\t{}",
            q.granularity(),
            q.range_min(),
            q.range_max()
        )?;
        let header = |w: &mut W, name: &str, r: Range<u32>| -> std::io::Result<()> {
            writeln!(w, "#block\t{name}\t{}\t{}", r.start, r.end - r.start)
        };
        header(&mut w, "bytes", self.block(TokenKind::Byte))?;
        header(&mut w, "words", self.block(TokenKind::Word))?;
        for (i, word) in self.words.iter().enumerate() {
            writeln!(w, "{}\t{word}", BYTE_TOKENS + i as u32)?;
        }
        header(&mut w, "text", self.block(TokenKind::Text))?;
        header(&mut w, "specials", self.block(TokenKind::Special))?;
        for s in &self.specials {
            writeln!(w, "{}\t{s}", self.special_ids[s])?;
        }
        header(&mut w, "numeric", self.block(TokenKind::Number))?;
        for (i, t) in q.numeric_vocab().iter().enumerate() {
            writeln!(w, "{}\t{t}", self.numeric_start() + i as u32)?;
        }
        header(&mut w, "image", self.block(TokenKind::Image))?;
        header(&mut w, "shape", self.block(TokenKind::Shape))?;
        Ok(())
    }

    pub fn manifest_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_manifest(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("manifest is UTF-8")
    }

    /// Rebuilds a vocabulary from its manifest, checking every listed ID.
    pub fn read_manifest<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: String| Error::Format(format!("manifest: {msg}"));
        let mut quantizer = None;
        let mut blocks: HashMap<String, (u32, u32)> = HashMap::new();
        let mut current = String::new();
        let mut named: HashMap<String, Vec<(u32, String)>> = HashMap::new();
        let mut total = None;
        for line in r.lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "#vocab" => {
                    total = Some(
                        fields
                            .get(1)
                            .and_then(|v| v.parse::<u32>().ok())
                            .ok_or_else(|| bad(line.clone()))?,
                    )
                }
                "#quantizer" => {
                    let nums: Vec<f64> = fields[1..]
                        .iter()
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(line.clone()))?;
                    if nums.len() != 3 {
                        return Err(bad(line));
                    }
                    quantizer = Some(QuantizerConfig::new(nums[0], nums[1], nums[2])?);
                }
                "#block" => {
                    if fields.len() != 4 {
                        return Err(bad(line));
                    }
                    let start = fields[2].parse().map_err(|_| bad(line.clone()))?;
                    let count = fields[3].parse().map_err(|_| bad(line.clone()))?;
                    current = fields[1].to_string();
                    blocks.insert(current.clone(), (start, count));
                }
                _ => {
                    if fields.len() != 2 {
                        return Err(bad(line));
                    }
                    let id = fields[0].parse().map_err(|_| bad(line.clone()))?;
                    named
                        .entry(current.clone())
                        .or_default()
                        .push((id, fields[1].to_string()));
                }
            }
        }
        let quantizer = quantizer.ok_or_else(|| bad("missing #quantizer".into()))?;
        let block = |name: &str| {
            blocks
                .get(name)
                .copied()
                .ok_or_else(|| bad(format!("missing block {name}")))
        };
        let tokens_of = |name: &str| -> Vec<String> {
            named
                .get(name)
                .map(|v| v.iter().map(|(_, t)| t.clone()).collect())
                .unwrap_or_default()
        };
        let vocab = VocabBuilder::new(quantizer)
            .base_size(block("specials")?.0)
            .words(tokens_of("words"))
            .specials(tokens_of("specials"))
            .image_codes(block("image")?.1)
            .build()?;
        let vocab = Vocabulary {
            shape_codes: block("shape")?.1,
            ..vocab
        };
        for entries in named.values() {
            for (id, tok) in entries {
                if vocab.lookup(tok)? != *id {
                    return Err(bad(format!("{tok} listed as {id}")));
                }
            }
        }
        if total.is_some_and(|t| t != vocab.total_size()) {
            return Err(bad("total size disagrees with blocks".into()));
        }
        Ok(vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab(shapes: bool) -> Vocabulary {
        Vocabulary::new(QuantizerConfig::clevr(), shapes)
    }

    #[test]
    fn block_sizes_add_up() {
        let v = vocab(false);
        assert_eq!(v.total_size(), 128_000 + 20 + 321 + 1024);
        assert_eq!(v.block(TokenKind::Image).len(), 1024);
        assert_eq!(vocab(true).total_size() - v.total_size(), 8192);
    }

    #[test]
    fn shape_toggle_adds_one_codebook() {
        let q = QuantizerConfig::new(0.005, -1.0, 1.0).unwrap();
        let off = build_vocab(q, &SPECIAL_TOKENS, 1024, false).unwrap();
        let on = build_vocab(q, &SPECIAL_TOKENS, 1024, true).unwrap();
        assert_eq!(on.total_size() - off.total_size(), 8192);
    }

    #[test]
    fn degenerate_numeric_range() {
        let q = QuantizerConfig::new(0.05, 0.0, 0.0).unwrap();
        let v = build_vocab(q, &SPECIAL_TOKENS, 1024, false).unwrap();
        assert_eq!(v.block(TokenKind::Number).len(), 1);
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut specials = SPECIAL_TOKENS.to_vec();
        specials.push("[BOS]");
        assert!(matches!(
            build_vocab(QuantizerConfig::clevr(), &specials, 1024, false),
            Err(Error::DuplicateToken(_))
        ));
        // with integer granularity the word "3" collides with a number token
        let q = QuantizerConfig::new(1.0, -8.0, 8.0).unwrap();
        assert!(matches!(
            VocabBuilder::new(q).build(),
            Err(Error::DuplicateToken(_))
        ));
        assert!(matches!(
            build_vocab(QuantizerConfig::clevr(), &["[BOS]"], 1024, false),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn code_blocks_are_disjoint() {
        let v = vocab(true);
        assert_ne!(v.lookup_image(0).unwrap(), v.lookup_shape(0).unwrap());
        assert_eq!(v.lookup("<img:0>").unwrap(), v.lookup_image(0).unwrap());
        assert!(v.lookup("<img:1024>").is_err());
        assert!(vocab(false).lookup("<shape:0>").is_err());
    }

    #[test]
    fn markers_resolve_into_specials() {
        let v = vocab(false);
        let id = v.lookup("[SCENE-START]").unwrap();
        assert!(v.block(TokenKind::Special).contains(&id));
        assert_eq!(v.kind_of(v.lookup("-0.55").unwrap()), Some(TokenKind::Number));
        assert_eq!(v.kind_of(v.lookup("cube").unwrap()), Some(TokenKind::Word));
        assert!(matches!(v.lookup("[NOPE]"), Err(Error::UnknownToken(_))));
        assert!(v.lookup("0.050").is_err());
    }

    #[test]
    fn every_id_roundtrips() {
        let v = vocab(true);
        for id in 0..v.total_size() {
            let tok = v.id_to_token(id).unwrap();
            assert_eq!(v.lookup(&tok).unwrap(), id, "{tok}");
        }
        assert!(v.id_to_token(v.total_size()).is_err());
    }

    #[test]
    fn text_roundtrips() {
        let v = vocab(false);
        for text in [
            "Change the brown object to have purple color",
            "What size is the rubber sphere?",
            "zebra quokka",
            "über café sphere",
        ] {
            let ids = v.encode_text(text);
            assert_eq!(v.decode_text(&ids).unwrap(), text);
        }
        assert_eq!(v.encode_text("small").len(), 1);
    }

    #[test]
    fn manifest_reload_reproduces_ids() {
        for shapes in [false, true] {
            let v = vocab(shapes);
            let text = v.manifest_string();
            let back = Vocabulary::read_manifest(text.as_bytes()).unwrap();
            assert_eq!(back, v);
            assert_eq!(back.total_size(), v.total_size());
        }
    }

    #[test]
    fn corrupt_manifest_is_rejected() {
        let text = vocab(false).manifest_string().replace("128000\t[SCENE-START]", "128001\t[SCENE-START]");
        assert!(Vocabulary::read_manifest(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_text_roundtrips(words in proptest::collection::vec("[a-zA-Z0-9?,.é]{1,8}", 0..8)) {
            let v = vocab(false);
            let text = words.join(" ");
            prop_assert_eq!(v.decode_text(&v.encode_text(&text)).unwrap(), text);
        }
    }
}
