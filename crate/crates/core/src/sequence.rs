//! Task sequence assembly.
//!
//! Every sequence has the shape `[BOS] context [OUTPUT-SEP] target [EOS]`.
//! Context positions carry no loss by default; target positions (including
//! the closing `[EOS]`) are supervised, with the first tokens of a target
//! image payload up-weighted.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::image_order::{HopOrder, ReorderPlan};
use crate::scene::{DatasetStyle, Scene};
use crate::serializer::{parse_ids, serialize_scene, ParseMode};
use crate::vocab::{self, TokenKind, Vocabulary};

pub const IMAGE_TOKENS: usize = 256;
pub const DEFAULT_HEAD_WEIGHT: f64 = 10.0;
pub const DEFAULT_HEAD_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Context,
    Target,
}

/// Order of the image and scene blocks on both sides of `[OUTPUT-SEP]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModalityOrder {
    #[default]
    ImageFirst,
    SceneFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOptions {
    pub image_len: usize,
    pub center_reorder: bool,
    pub hop_order: HopOrder,
    pub order: ModalityOrder,
    pub image_head_weight: f64,
    pub head_len: usize,
    pub context_weight: f64,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions {
            image_len: IMAGE_TOKENS,
            center_reorder: false,
            hop_order: HopOrder::LeftFirst,
            order: ModalityOrder::ImageFirst,
            image_head_weight: DEFAULT_HEAD_WEIGHT,
            head_len: DEFAULT_HEAD_LEN,
            context_weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSequence {
    pub ids: Vec<u32>,
    pub roles: Vec<Role>,
    pub weights: Vec<f64>,
    /// Payload ranges (markers excluded) of images on the target side.
    pub image_targets: Vec<Range<usize>>,
}

impl TaskSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn target_range(&self) -> Range<usize> {
        let start = self
            .roles
            .iter()
            .position(|r| *r == Role::Target)
            .unwrap_or(self.len());
        start..self.len()
    }

    /// Checks framing, role placement and weight signs.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        let bad = |m: &str| Err(Error::Format(format!("task sequence: {m}")));
        if self.roles.len() != self.ids.len() || self.weights.len() != self.ids.len() {
            return bad("parallel arrays differ in length");
        }
        let bos = vocab.lookup_special(vocab::BOS);
        let eos = vocab.lookup_special(vocab::EOS);
        let sep = vocab.lookup_special(vocab::OUTPUT_SEP);
        if self.ids.first() != Some(&bos) || self.ids.last() != Some(&eos) {
            return bad("must start with [BOS] and end with [EOS]");
        }
        let seps: Vec<usize> = (0..self.len()).filter(|&i| self.ids[i] == sep).collect();
        if seps.len() != 1 {
            return bad("needs exactly one [OUTPUT-SEP]");
        }
        for (i, (role, w)) in self.roles.iter().zip(&self.weights).enumerate() {
            match role {
                Role::Target if i <= seps[0] => return bad("target before [OUTPUT-SEP]"),
                Role::Target if !(*w > 0.0) => return bad("target weight must be positive"),
                Role::Context if i > seps[0] => return bad("context after [OUTPUT-SEP]"),
                Role::Context if *w < 0.0 => return bad("negative context weight"),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Re-weights target positions: the first `head_len` tokens of each target
/// image payload get `image_head_weight`, every other target position 1.0.
/// Context weights are left as they are.
pub fn loss_weights(seq: &TaskSequence, image_head_weight: f64, head_len: usize) -> TaskSequence {
    assert!(image_head_weight > 0.0, "head weight must be positive");
    let mut out = seq.clone();
    for (w, role) in out.weights.iter_mut().zip(&out.roles) {
        if *role == Role::Target {
            *w = 1.0;
        }
    }
    for r in &out.image_targets {
        let end = (r.start + head_len).min(r.end);
        for w in &mut out.weights[r.start..end] {
            *w = image_head_weight;
        }
    }
    out
}

enum Block<'a> {
    Image(&'a [u32]),
    Scene(&'a Scene),
    Text(&'a str),
}

pub struct SequenceBuilder<'v> {
    vocab: &'v Vocabulary,
    opts: SequenceOptions,
    plan: Option<ReorderPlan>,
}

impl<'v> SequenceBuilder<'v> {
    pub fn new(vocab: &'v Vocabulary, opts: SequenceOptions) -> Self {
        let plan = opts
            .center_reorder
            .then(|| ReorderPlan::center(opts.image_len.max(1), opts.hop_order));
        SequenceBuilder { vocab, opts, plan }
    }

    pub fn options(&self) -> &SequenceOptions {
        &self.opts
    }

    pub fn vocab(&self) -> &Vocabulary {
        self.vocab
    }

    fn image_payload(&self, codes: &[u32]) -> Result<Vec<u32>> {
        if codes.len() != self.opts.image_len {
            return Err(Error::ImageLength {
                expected: self.opts.image_len,
                actual: codes.len(),
            });
        }
        let ids = codes
            .iter()
            .map(|&c| self.vocab.lookup_image(c))
            .collect::<Result<Vec<_>>>()?;
        match &self.plan {
            Some(plan) => plan.apply(&ids),
            None => Ok(ids),
        }
    }

    fn emit(&self, block: &Block, role: Role, seq: &mut TaskSequence) -> Result<()> {
        let special = |s: &str| self.vocab.lookup_special(s);
        let mut ids = Vec::new();
        let mut payload = None;
        match block {
            Block::Image(codes) => {
                ids.push(special(vocab::IMAGE_START));
                let body = self.image_payload(codes)?;
                let start = seq.len() + 1;
                payload = Some(start..start + body.len());
                ids.extend(body);
                ids.push(special(vocab::IMAGE_END));
            }
            Block::Scene(scene) => {
                ids = serialize_scene(scene, self.vocab.quantizer())?.to_ids(self.vocab)?;
            }
            Block::Text(text) => {
                ids.push(special(vocab::TEXT_START));
                ids.extend(self.vocab.encode_text(text));
                ids.push(special(vocab::TEXT_END));
            }
        }
        if role == Role::Target {
            seq.image_targets.extend(payload);
        }
        push(seq, &ids, role, self.weight(role));
        Ok(())
    }

    fn weight(&self, role: Role) -> f64 {
        match role {
            Role::Context => self.opts.context_weight,
            Role::Target => 1.0,
        }
    }

    fn assemble(&self, context: &[Block], target: &[Block]) -> Result<TaskSequence> {
        let mut seq = TaskSequence {
            ids: Vec::new(),
            roles: Vec::new(),
            weights: Vec::new(),
            image_targets: Vec::new(),
        };
        let special = |s: &str| self.vocab.lookup_special(s);
        push(&mut seq, &[special(vocab::BOS)], Role::Context, self.weight(Role::Context));
        for b in context {
            self.emit(b, Role::Context, &mut seq)?;
        }
        push(&mut seq, &[special(vocab::OUTPUT_SEP)], Role::Context, self.weight(Role::Context));
        for b in target {
            self.emit(b, Role::Target, &mut seq)?;
        }
        push(&mut seq, &[special(vocab::EOS)], Role::Target, 1.0);
        Ok(loss_weights(&seq, self.opts.image_head_weight, self.opts.head_len))
    }

    fn pair<'a>(&self, image: Block<'a>, scene: Block<'a>) -> [Block<'a>; 2] {
        match self.opts.order {
            ModalityOrder::ImageFirst => [image, scene],
            ModalityOrder::SceneFirst => [scene, image],
        }
    }

    /// Scene in, image out.
    pub fn build_rendering(&self, scene: &Scene, image: &[u32]) -> Result<TaskSequence> {
        self.assemble(&[Block::Scene(scene)], &[Block::Image(image)])
    }

    /// Image in, scene out.
    pub fn build_recognition(&self, image: &[u32], scene: &Scene) -> Result<TaskSequence> {
        self.assemble(&[Block::Image(image)], &[Block::Scene(scene)])
    }

    /// Image, scene and instruction in; edited image and scene out.
    pub fn build_instruction(
        &self,
        image: &[u32],
        scene: &Scene,
        instruction: &str,
        out_image: &[u32],
        out_scene: &Scene,
    ) -> Result<TaskSequence> {
        if instruction.trim().is_empty() {
            return Err(Error::Schema("instruction text is empty".into()));
        }
        let [a, b] = self.pair(Block::Image(image), Block::Scene(scene));
        let [c, d] = self.pair(Block::Image(out_image), Block::Scene(out_scene));
        self.assemble(&[a, b, Block::Text(instruction)], &[c, d])
    }

    /// Image, optional scene and question in; answer text out.
    pub fn build_qa(
        &self,
        image: &[u32],
        scene: &Scene,
        question: &str,
        answer: &str,
        include_scene: bool,
    ) -> Result<TaskSequence> {
        let words = answer.split_whitespace().count();
        if !(1..=2).contains(&words) {
            return Err(Error::Schema(format!("answer must be 1-2 words, got {words}")));
        }
        let context: Vec<Block> = if include_scene {
            let [a, b] = self.pair(Block::Image(image), Block::Scene(scene));
            vec![a, b, Block::Text(question)]
        } else {
            vec![Block::Image(image), Block::Text(question)]
        };
        self.assemble(&context, &[Block::Text(answer)])
    }

    /// Splits a built sequence back into its payloads. Image payloads come
    /// back in raster order.
    pub fn decompose(&self, ids: &[u32], style: Option<DatasetStyle>) -> Result<Decomposed> {
        decompose(ids, self.vocab, self.plan.as_ref(), style)
    }
}

fn push(seq: &mut TaskSequence, ids: &[u32], role: Role, weight: f64) {
    seq.ids.extend_from_slice(ids);
    seq.roles.extend(std::iter::repeat_n(role, ids.len()));
    seq.weights.extend(std::iter::repeat_n(weight, ids.len()));
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Image codebook indices.
    Image(Vec<u32>),
    Scene(Scene),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decomposed {
    pub context: Vec<Payload>,
    pub target: Vec<Payload>,
}

fn decompose(
    ids: &[u32],
    vocab: &Vocabulary,
    plan: Option<&ReorderPlan>,
    style: Option<DatasetStyle>,
) -> Result<Decomposed> {
    let special = |s: &str| vocab.lookup_special(s);
    let err = |pos: usize, m: &str| Error::Grammar {
        position: pos,
        message: m.to_string(),
    };
    if ids.first() != Some(&special(vocab::BOS)) || ids.last() != Some(&special(vocab::EOS)) {
        return Err(err(0, "sequence is not framed by [BOS] ... [EOS]"));
    }
    let body = &ids[1..ids.len() - 1];
    let mut out = Decomposed::default();
    let mut in_target = false;
    let mut i = 0;
    let find = |from: usize, marker: &str| -> Result<usize> {
        let m = special(marker);
        body[from..]
            .iter()
            .position(|&t| t == m)
            .map(|p| from + p)
            .ok_or_else(|| err(from + 1, &format!("unterminated block, missing {marker}")))
    };
    while i < body.len() {
        let t = body[i];
        let payload = if t == special(vocab::OUTPUT_SEP) {
            if in_target {
                return Err(err(i + 1, "second [OUTPUT-SEP]"));
            }
            in_target = true;
            i += 1;
            continue;
        } else if t == special(vocab::IMAGE_START) {
            let end = find(i, vocab::IMAGE_END)?;
            let codes = body[i + 1..end]
                .iter()
                .map(|&id| vocab.image_code(id).ok_or_else(|| err(i + 1, "non-image token in image block")))
                .collect::<Result<Vec<_>>>()?;
            i = end + 1;
            Payload::Image(match plan {
                Some(p) => p.invert(&codes)?,
                None => codes,
            })
        } else if t == special(vocab::SCENE_START) {
            let end = find(i, vocab::SCENE_END)?;
            let (scene, _) = parse_ids(&body[i..=end], vocab, ParseMode::Strict, style)?;
            i = end + 1;
            Payload::Scene(scene)
        } else if t == special(vocab::TEXT_START) {
            let end = find(i, vocab::TEXT_END)?;
            let text = vocab.decode_text(&body[i + 1..end])?;
            i = end + 1;
            Payload::Text(text)
        } else {
            let kind = vocab.kind_of(t);
            return Err(err(i + 1, &format!("unexpected {kind:?} token outside a block")));
        };
        if in_target {
            out.target.push(payload);
        } else {
            out.context.push(payload);
        }
    }
    if !in_target {
        return Err(err(ids.len(), "missing [OUTPUT-SEP]"));
    }
    Ok(out)
}

/// True for IDs that are markers rather than payload.
pub fn is_marker(vocab: &Vocabulary, id: u32) -> bool {
    vocab.kind_of(id) == Some(TokenKind::Special)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::QuantizerConfig;
    use crate::scene::SceneObject;

    fn vocab() -> Vocabulary {
        Vocabulary::new(QuantizerConfig::clevr(), false)
    }

    fn scene(n: usize) -> Scene {
        let objs = (0..n)
            .map(|i| SceneObject::clevr("small", "red", "rubber", "cube", [i as f64 * 0.5, 0.0, 0.35]))
            .collect();
        Scene::new(DatasetStyle::Clevr, objs).unwrap()
    }

    fn image(seed: u32) -> Vec<u32> {
        (0..256).map(|i| (i * 7 + seed) % 1024).collect()
    }

    #[test]
    fn rendering_layout() {
        let v = vocab();
        let b = SequenceBuilder::new(&v, SequenceOptions::default());
        let seq = b.build_rendering(&scene(7), &image(0)).unwrap();
        assert_eq!(seq.len(), 100 + 1 + 1 + 258 + 1);
        seq.validate(&v).unwrap();
        let sep = 1 + 100;
        assert!(seq.roles[..=sep].iter().all(|r| *r == Role::Context));
        assert!(seq.roles[sep + 1..].iter().all(|r| *r == Role::Target));
        assert_eq!(seq.image_targets, vec![sep + 2..sep + 2 + 256]);
        assert_eq!(&seq.weights[sep + 1..sep + 8], &[1.0, 10.0, 10.0, 10.0, 10.0, 10.0, 1.0]);
    }

    #[test]
    fn reordered_payload_matches_plan() {
        let v = vocab();
        let opts = SequenceOptions {
            center_reorder: true,
            ..Default::default()
        };
        let b = SequenceBuilder::new(&v, opts);
        let img = image(3);
        let seq = b.build_rendering(&scene(2), &img).unwrap();
        let r = seq.image_targets[0].clone();
        let expect: Vec<u32> = crate::image_order::center_plan(256)
            .apply(&img)
            .unwrap()
            .into_iter()
            .map(|c| v.lookup_image(c).unwrap())
            .collect();
        assert_eq!(&seq.ids[r], &expect[..]);
        let parts = b.decompose(&seq.ids, None).unwrap();
        assert_eq!(parts.target, vec![Payload::Image(img)]);
    }

    #[test]
    fn recognition_targets_scene() {
        let v = vocab();
        let b = SequenceBuilder::new(&v, SequenceOptions::default());
        let seq = b.build_recognition(&image(0), &Scene::empty(DatasetStyle::Clevr)).unwrap();
        let t = seq.target_range();
        // [SCENE-START] [SCENE-END] [EOS]
        assert_eq!(t.len(), 3);
        assert_eq!(seq.ids[1], v.lookup_special(vocab::IMAGE_START));
        assert_eq!(seq.ids[258], v.lookup_special(vocab::IMAGE_END));
        assert!(seq.weights.iter().all(|w| *w != 10.0));
    }

    #[test]
    fn image_length_checked() {
        let v = vocab();
        let b = SequenceBuilder::new(&v, SequenceOptions::default());
        assert!(matches!(
            b.build_rendering(&scene(1), &[0; 10]),
            Err(Error::ImageLength { expected: 256, actual: 10 })
        ));
        assert!(matches!(
            b.build_rendering(&scene(1), &[2000; 256]),
            Err(Error::UnknownToken(_))
        ));
    }

    #[test]
    fn instruction_orders_are_permutations() {
        let v = vocab();
        let first = SequenceBuilder::new(&v, SequenceOptions::default());
        let second = SequenceBuilder::new(
            &v,
            SequenceOptions {
                order: ModalityOrder::SceneFirst,
                ..Default::default()
            },
        );
        let args = (image(1), scene(3), "Change the red object to have blue color", image(2), scene(3));
        let a = first.build_instruction(&args.0, &args.1, args.2, &args.3, &args.4).unwrap();
        let b = second.build_instruction(&args.0, &args.1, args.2, &args.3, &args.4).unwrap();
        assert_eq!(a.ids[1], v.lookup_special(vocab::IMAGE_START));
        assert_eq!(b.ids[1], v.lookup_special(vocab::SCENE_START));
        let (mut x, mut y) = (a.ids.clone(), b.ids.clone());
        x.sort_unstable();
        y.sort_unstable();
        assert_eq!(x, y);
        assert!(first.build_instruction(&args.0, &args.1, " ", &args.3, &args.4).is_err());
    }

    #[test]
    fn qa_target_is_answer_block() {
        let v = vocab();
        let b = SequenceBuilder::new(&v, SequenceOptions::default());
        let with = b.build_qa(&image(0), &scene(2), "What size is the rubber cube?", "small", true).unwrap();
        let without = b.build_qa(&image(0), &scene(2), "What size is the rubber cube?", "small", false).unwrap();
        // [TEXT-START] small [TEXT-END] [EOS]
        assert_eq!(with.target_range().len(), 1 + 2 + 1);
        assert_eq!(with.len() - without.len(), 30);
        let parts = b.decompose(&without.ids, None).unwrap();
        assert_eq!(parts.context.len(), 2);
        assert_eq!(parts.target, vec![Payload::Text("small".into())]);
        assert!(b.build_qa(&image(0), &scene(2), "q", "one two three", true).is_err());
    }

    #[test]
    fn explicit_weights() {
        let v = vocab();
        let b = SequenceBuilder::new(&v, SequenceOptions::default());
        let seq = b.build_rendering(&scene(1), &image(0)).unwrap();
        let flat = loss_weights(&seq, 10.0, 0);
        assert!(flat.target_range().all(|i| flat.weights[i] == 1.0));
        let long = loss_weights(&seq, 3.0, 1000);
        let r = seq.image_targets[0].clone();
        assert!(r.clone().all(|i| long.weights[i] == 3.0));
        assert_eq!(long.weights[r.end], 1.0);
    }

    #[test]
    fn validate_catches_broken_framing() {
        let v = vocab();
        let b = SequenceBuilder::new(&v, SequenceOptions::default());
        let mut seq = b.build_rendering(&scene(1), &image(0)).unwrap();
        seq.ids.pop();
        assert!(seq.validate(&v).is_err());
        assert!(b.decompose(&seq.ids, None).is_err());
    }
}
