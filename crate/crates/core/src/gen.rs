//! Seeded synthetic scenes and templated scene edits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::QuantizerConfig;
use crate::scene::{
    DatasetStyle, Scene, SceneObject, CLEVR_COLORS, CLEVR_MATERIALS, CLEVR_SHAPES, CLEVR_SIZES,
    SHAPE_CODEBOOK_SIZE, SHAPE_CODES_PER_OBJECT,
};
use crate::vocab::OBJAWORLD_ASSETS;

/// Resting height of a CLEVR object of the given size.
pub fn clevr_height(size: &str) -> f64 {
    if size == "large" {
        0.70
    } else {
        0.35
    }
}

/// Resting height of an ObjaWorld asset.
pub fn asset_height(asset: &str) -> f64 {
    match asset {
        "person" => 0.85,
        "table" => 0.20,
        "sofa" => 0.30,
        "bench" => 0.25,
        "chair" => 0.45,
        "lamppost" => 1.50,
        "bird" => 0.10,
        _ => 0.50,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeSets {
    pub sizes: Vec<String>,
    pub colors: Vec<String>,
    pub materials: Vec<String>,
    pub shapes: Vec<String>,
    pub assets: Vec<String>,
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for AttributeSets {
    fn default() -> Self {
        AttributeSets {
            sizes: owned(&CLEVR_SIZES),
            colors: owned(&CLEVR_COLORS),
            materials: owned(&CLEVR_MATERIALS),
            shapes: owned(&CLEVR_SHAPES),
            assets: owned(&OBJAWORLD_ASSETS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub style: DatasetStyle,
    /// Inclusive bounds on the object count.
    pub n_objects_range: [usize; 2],
    pub attribute_sets: AttributeSets,
    /// Interval used for both x and y.
    pub position_range: [f64; 2],
    /// Minimum pairwise xy distance.
    pub min_separation: f64,
    /// Placement attempts per object before giving up.
    pub max_attempts: usize,
    pub quantizer: QuantizerConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            style: DatasetStyle::Clevr,
            n_objects_range: [3, 10],
            attribute_sets: AttributeSets::default(),
            position_range: [-3.0, 3.0],
            min_separation: 0.4,
            max_attempts: 1000,
            quantizer: QuantizerConfig::clevr(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        let [lo, hi] = self.n_objects_range;
        if lo > hi {
            return bad("n_objects_range min exceeds max");
        }
        if !(self.min_separation >= 0.0) {
            return bad("min_separation must be non-negative");
        }
        let [pmin, pmax] = self.position_range;
        if !(pmin <= pmax) || pmin < self.quantizer.range_min() || pmax > self.quantizer.range_max() {
            return bad("position_range must be ordered and inside the quantizer range");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        let s = &self.attribute_sets;
        let needed: &[&Vec<String>] = match self.style {
            DatasetStyle::Clevr => &[&s.sizes, &s.colors, &s.materials, &s.shapes],
            DatasetStyle::Objaworld => &[&s.assets],
            DatasetStyle::ObjaworldShapes => &[],
            _ => return bad("generator supports CLEVR and OBJAWORLD styles only"),
        };
        if needed.iter().any(|v| v.is_empty()) {
            return bad("attribute sets must be non-empty");
        }
        Ok(())
    }

    fn grid(&self) -> Result<(usize, usize)> {
        let [pmin, pmax] = self.position_range;
        let g = self.quantizer.granularity();
        // keep sampled values inside the interval
        let lo = self.quantizer.quantize_index((pmin / g).ceil() * g)?;
        let hi = self.quantizer.quantize_index((pmax / g).floor() * g)?;
        if lo > hi {
            return Err(Error::InvalidConfig("position_range holds no grid point".into()));
        }
        Ok((lo, hi))
    }
}

fn xy_far_enough(loc: &[f64; 3], others: &[SceneObject], skip: Option<usize>, min_sep: f64) -> bool {
    others.iter().enumerate().all(|(i, o)| {
        Some(i) == skip
            || o.location.is_none_or(|l| {
                let (dx, dy) = (l[0] - loc[0], l[1] - loc[1]);
                (dx * dx + dy * dy).sqrt() >= min_sep - 1e-9
            })
    })
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &'a [String]) -> &'a str {
    xs.choose(rng).expect("validated non-empty")
}

fn random_azimuth(rng: &mut ChaCha8Rng, q: &QuantizerConfig) -> Result<f64> {
    let g = q.granularity();
    let k = (std::f64::consts::PI / g).floor() as i64;
    let k = rng.gen_range(-k..=k);
    q.snap(k as f64 * g)
}

fn random_object(cfg: &GenConfig, rng: &mut ChaCha8Rng, xy: [f64; 2]) -> Result<SceneObject> {
    let s = &cfg.attribute_sets;
    let q = &cfg.quantizer;
    Ok(match cfg.style {
        DatasetStyle::Clevr => {
            let size = pick(rng, &s.sizes);
            let z = q.snap(clevr_height(size))?;
            SceneObject::clevr(
                size,
                pick(rng, &s.colors),
                pick(rng, &s.materials),
                pick(rng, &s.shapes),
                [xy[0], xy[1], z],
            )
        }
        DatasetStyle::Objaworld => {
            let asset = pick(rng, &s.assets);
            let z = q.snap(asset_height(asset))?;
            SceneObject::objaworld(asset, [xy[0], xy[1], z], [0.0, 0.0, random_azimuth(rng, q)?])
        }
        _ => {
            let codes = (0..SHAPE_CODES_PER_OBJECT)
                .map(|_| rng.gen_range(0..SHAPE_CODEBOOK_SIZE))
                .collect();
            let z = q.snap(0.5)?;
            SceneObject::with_shape_codes(codes, [xy[0], xy[1], z], [0.0, 0.0, random_azimuth(rng, q)?])
        }
    })
}

fn sample_xy(
    cfg: &GenConfig,
    rng: &mut ChaCha8Rng,
    grid: (usize, usize),
    placed: &[SceneObject],
) -> Option<[f64; 2]> {
    (0..cfg.max_attempts).find_map(|_| {
        let x: f64 = cfg.quantizer.value_at(rng.gen_range(grid.0..=grid.1));
        let y: f64 = cfg.quantizer.value_at(rng.gen_range(grid.0..=grid.1));
        xy_far_enough(&[x, y, 0.0], placed, None, cfg.min_separation).then_some([x, y])
    })
}

/// Scene number `index` of the stream seeded by `cfg.seed`. Each index uses
/// its own ChaCha stream, so scenes can be produced in any order.
pub fn generate_scene_at(cfg: &GenConfig, index: u64) -> Result<Scene> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let [lo, hi] = cfg.n_objects_range;
    let n = rng.gen_range(lo..=hi);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(n);
    for _ in 0..n {
        let xy = sample_xy(cfg, &mut rng, grid, &objects).ok_or(Error::PlacementInfeasible(n))?;
        let obj = random_object(cfg, &mut rng, xy)?;
        objects.push(obj);
    }
    Scene::new(cfg.style, objects)
}

pub fn generate_scene(cfg: &GenConfig) -> Result<Scene> {
    generate_scene_at(cfg, 0)
}

pub fn generate_corpus(cfg: &GenConfig, n: usize) -> Result<Vec<Scene>> {
    (0..n as u64).map(|i| generate_scene_at(cfg, i)).collect()
}

/// Attribute constraints naming an object. Unset fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectRef {
    pub size: Option<String>,
    pub color: Option<String>,
    pub material: Option<String>,
    pub shape: Option<String>,
}

impl ObjectRef {
    /// Reference using every attribute of `o`.
    pub fn of(o: &SceneObject) -> Self {
        ObjectRef {
            size: o.size.clone(),
            color: o.color.clone(),
            material: o.material.clone(),
            shape: o.shape.clone(),
        }
    }

    pub fn color(c: &str) -> Self {
        ObjectRef {
            color: Some(c.into()),
            ..Default::default()
        }
    }

    pub fn matches(&self, o: &SceneObject) -> bool {
        let eq = |want: &Option<String>, have: &Option<String>| want.is_none() || want == have;
        eq(&self.size, &o.size)
            && eq(&self.color, &o.color)
            && eq(&self.material, &o.material)
            && eq(&self.shape, &o.shape)
    }

    /// Words in size, color, material, shape order.
    pub fn describe(&self) -> String {
        [&self.size, &self.color, &self.material, &self.shape]
            .into_iter()
            .flatten()
            .cloned()
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn resolve(&self, scene: &Scene) -> Result<usize> {
        let hits: Vec<usize> = (0..scene.len())
            .filter(|&i| self.matches(&scene.objects[i]))
            .collect();
        match hits.as_slice() {
            [] => Err(Error::TargetNotFound(self.describe())),
            [i] => Ok(*i),
            _ => Err(Error::AmbiguousReference(self.describe(), hits.len())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Behind,
    Front,
}

impl Direction {
    /// Unit xy offset: left is -x, behind is +y.
    pub fn offset(self) -> [f64; 2] {
        match self {
            Direction::Left => [-1.0, 0.0],
            Direction::Right => [1.0, 0.0],
            Direction::Behind => [0.0, 1.0],
            Direction::Front => [0.0, -1.0],
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Behind => "behind",
            Direction::Front => "front",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditField {
    Size,
    Color,
    Material,
    Shape,
}

impl EditField {
    fn name(self) -> &'static str {
        match self {
            EditField::Size => "size",
            EditField::Color => "color",
            EditField::Material => "material",
            EditField::Shape => "shape",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditOp {
    ChangeAttr {
        target: ObjectRef,
        field: EditField,
        value: String,
    },
    /// Appends `object`, placed `distance` from `anchor` in `direction`.
    Add {
        object: SceneObject,
        anchor: ObjectRef,
        direction: Direction,
        distance: f64,
    },
    Remove {
        target: ObjectRef,
    },
    /// Shifts the target by `distance` along each listed direction.
    Move {
        target: ObjectRef,
        directions: Vec<Direction>,
        distance: f64,
    },
}

fn rest_height(style: DatasetStyle, o: &SceneObject) -> Option<f64> {
    match style {
        DatasetStyle::Clevr => o.size.as_deref().map(clevr_height),
        DatasetStyle::Objaworld => o.shape.as_deref().map(asset_height),
        _ => None,
    }
}

fn place(q: &QuantizerConfig, xy: [f64; 2], z: f64) -> Result<[f64; 3]> {
    let inside = |v: f64| v >= q.range_min() - 1e-9 && v <= q.range_max() + 1e-9;
    if !inside(xy[0]) || !inside(xy[1]) {
        return Err(Error::PlacementInfeasible(1));
    }
    Ok([q.snap(xy[0])?, q.snap(xy[1])?, z])
}

/// Applies `op` and returns the edited scene with its instruction text.
/// `cfg` supplies the quantizer grid and the separation rule for new positions.
pub fn edit_scene(scene: &Scene, op: &EditOp, cfg: &GenConfig) -> Result<(Scene, String)> {
    let q = &cfg.quantizer;
    let mut out = scene.clone();
    let text = match op {
        EditOp::ChangeAttr { target, field, value } => {
            let i = target.resolve(scene)?;
            let o = &mut out.objects[i];
            let slot = match field {
                EditField::Size => &mut o.size,
                EditField::Color => &mut o.color,
                EditField::Material => &mut o.material,
                EditField::Shape => &mut o.shape,
            };
            if slot.is_none() {
                return Err(Error::InvalidConfig(format!(
                    "objects in this scene have no {}",
                    field.name()
                )));
            }
            *slot = Some(value.clone());
            if let (Some(z), Some(loc)) = (rest_height(scene.dataset_style, o), o.location.as_mut()) {
                loc[2] = q.snap(z)?;
            }
            format!(
                "Change the {} object to have {} {}",
                target.describe(),
                value,
                field.name()
            )
        }
        EditOp::Add {
            object,
            anchor,
            direction,
            distance,
        } => {
            let a = anchor.resolve(scene)?;
            let base = scene.objects[a]
                .location
                .ok_or_else(|| Error::InvalidConfig("anchor has no location".into()))?;
            let [ox, oy] = direction.offset();
            let mut obj = object.clone();
            let z = match rest_height(scene.dataset_style, &obj) {
                Some(z) => q.snap(z)?,
                None => obj.location.map_or(base[2], |l| l[2]),
            };
            let loc = place(q, [base[0] + ox * distance, base[1] + oy * distance], z)?;
            if !xy_far_enough(&loc, &scene.objects, None, cfg.min_separation) {
                return Err(Error::PlacementInfeasible(scene.len() + 1));
            }
            obj.location = Some(loc);
            out.objects.push(obj);
            out.validate()?;
            format!(
                "Put a {} to the {} of {}",
                ObjectRef::of(object).describe(),
                direction.word(),
                anchor.describe()
            )
        }
        EditOp::Remove { target } => {
            let i = target.resolve(scene)?;
            out.objects.remove(i);
            format!("Remove the {} object", target.describe())
        }
        EditOp::Move {
            target,
            directions,
            distance,
        } => {
            if directions.is_empty() {
                return Err(Error::InvalidConfig("move needs at least one direction".into()));
            }
            let i = target.resolve(scene)?;
            let loc = scene.objects[i]
                .location
                .ok_or_else(|| Error::InvalidConfig("target has no location".into()))?;
            let (mut x, mut y) = (loc[0], loc[1]);
            for d in directions {
                let [ox, oy] = d.offset();
                x += ox * distance;
                y += oy * distance;
            }
            let moved = place(q, [x, y], loc[2])?;
            if !xy_far_enough(&moved, &scene.objects, Some(i), cfg.min_separation) {
                return Err(Error::PlacementInfeasible(scene.len()));
            }
            out.objects[i].location = Some(moved);
            let words: Vec<&str> = directions.iter().map(|d| d.word()).collect();
            format!(
                "Move the {} object to {}",
                target.describe(),
                words.join(" and ")
            )
        }
    };
    Ok((out, text))
}

/// Draws a random edit whose references resolve uniquely in `scene`.
pub fn sample_edit(scene: &Scene, cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Result<EditOp> {
    let unique: Vec<usize> = (0..scene.len())
        .filter(|&i| ObjectRef::of(&scene.objects[i]).resolve(scene).is_ok())
        .collect();
    if unique.is_empty() {
        return Err(Error::TargetNotFound("any uniquely described object".into()));
    }
    let s = &cfg.attribute_sets;
    let step = 2.0 * cfg.min_separation.max(cfg.quantizer.granularity());
    for _ in 0..cfg.max_attempts {
        let target = ObjectRef::of(&scene.objects[*unique.choose(rng).expect("non-empty")]);
        let op = match rng.gen_range(0..4) {
            0 => {
                let (field, values) = if scene.dataset_style == DatasetStyle::Clevr {
                    [
                        (EditField::Size, &s.sizes),
                        (EditField::Color, &s.colors),
                        (EditField::Material, &s.materials),
                        (EditField::Shape, &s.shapes),
                    ][rng.gen_range(0..4)]
                } else {
                    (EditField::Shape, &s.assets)
                };
                EditOp::ChangeAttr {
                    target,
                    field,
                    value: pick(rng, values).to_string(),
                }
            }
            1 => {
                let mut object = random_object(cfg, rng, [0.0, 0.0])?;
                object.location = None;
                EditOp::Add {
                    object,
                    anchor: target,
                    direction: *[Direction::Left, Direction::Right, Direction::Behind, Direction::Front]
                        .choose(rng)
                        .expect("non-empty"),
                    distance: step,
                }
            }
            2 => EditOp::Remove { target },
            _ => {
                let mut directions = vec![*[Direction::Left, Direction::Right].choose(rng).expect("x")];
                if rng.gen_bool(0.5) {
                    directions.push(*[Direction::Behind, Direction::Front].choose(rng).expect("y"));
                }
                EditOp::Move {
                    target,
                    directions,
                    distance: step,
                }
            }
        };
        if edit_scene(scene, &op, cfg).is_ok() {
            return Ok(op);
        }
    }
    Err(Error::PlacementInfeasible(scene.len()))
}
