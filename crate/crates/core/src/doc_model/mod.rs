//! Data model for visually rich documents and relational tables.
//!
//! A document is a nested set `{V, H}`: `V` holds the atomic elements (words
//! and image regions), `H` is a five-level layout tree
//! page -> column -> paragraph -> line -> word. Word leaves reference text
//! elements in `V` in reading order. Relational tables carry schema-ordered
//! attribute values that may be missing or multi-valued.

mod hocr;
mod json;
mod table;

pub use hocr::{parse_hocr, ParsedHocr};
pub use json::{parse_doc_json, serialize_document};
pub use table::load_table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned pixel rectangle, `x1 >= x0`, `y1 >= y0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x1 < x0 || y1 < y0 {
            return Err(Error::Document(format!(
                "degenerate bbox ({x0},{y0},{x1},{y1})"
            )));
        }
        Ok(BBox { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }
}

/// A word on the page: transcription plus its bounding box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextElement {
    pub text: String,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl TextElement {
    pub fn new(text: impl Into<String>, x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Document("text element with empty transcription".into()));
        }
        if w == 0 || h == 0 {
            return Err(Error::Document(format!(
                "text element {text:?} with zero-area bbox"
            )));
        }
        Ok(TextElement { text, x, y, w, h })
    }

    pub fn bbox(&self) -> BBox {
        BBox { x0: self.x, y0: self.y, x1: self.x + self.w, y1: self.y + self.h }
    }
}

/// Opaque reference to an image region: source file plus crop rectangle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRef {
    pub path: String,
    pub crop: BBox,
}

/// An image region on the page. Carried through the model but not embedded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageElement {
    pub pixel_ref: PixelRef,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl ImageElement {
    pub fn bbox(&self) -> BBox {
        BBox { x0: self.x, y0: self.y, x1: self.x + self.w, y1: self.y + self.h }
    }
}

/// Atomic element: the smallest visual unit in a document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Element {
    Text(TextElement),
    Image(ImageElement),
}

/// Word leaf; references one `Element::Text` in the document's element list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordNode {
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineNode {
    pub bbox: BBox,
    pub words: Vec<WordNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphNode {
    pub bbox: BBox,
    pub lines: Vec<LineNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNode {
    pub bbox: BBox,
    pub paragraphs: Vec<ParagraphNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageNode {
    pub bbox: BBox,
    pub columns: Vec<ColumnNode>,
}

/// Five-level layout hierarchy. The nesting of the node types enforces the
/// level count; enclosure and leaf ordering are checked by
/// [`Document::validate`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutTree {
    pub pages: Vec<PageNode>,
}

impl LayoutTree {
    /// Element indices of word leaves in reading order.
    pub fn word_elements(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for page in &self.pages {
            for col in &page.columns {
                for par in &col.paragraphs {
                    for line in &par.lines {
                        out.extend(line.words.iter().map(|w| w.element));
                    }
                }
            }
        }
        out
    }

    pub fn line_count(&self) -> usize {
        self.pages
            .iter()
            .flat_map(|p| &p.columns)
            .flat_map(|c| &c.paragraphs)
            .map(|par| par.lines.len())
            .sum()
    }
}

/// A visually rich document: atomic elements `V` plus layout tree `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub elements: Vec<Element>,
    pub layout: LayoutTree,
    pub image_ref: Option<String>,
}

impl Document {
    /// Checks the structural invariants: every layout node encloses its
    /// children, word leaves reference text elements bijectively, and leaf
    /// reading order equals text-element order in `V`.
    pub fn validate(&self) -> Result<()> {
        for (p, page) in self.layout.pages.iter().enumerate() {
            for (c, col) in page.columns.iter().enumerate() {
                if !page.bbox.contains(&col.bbox) {
                    return Err(Error::Document(format!(
                        "page {p} does not enclose column {c}"
                    )));
                }
                for (q, par) in col.paragraphs.iter().enumerate() {
                    if !col.bbox.contains(&par.bbox) {
                        return Err(Error::Document(format!(
                            "column {c} does not enclose paragraph {q} (page {p})"
                        )));
                    }
                    for (l, line) in par.lines.iter().enumerate() {
                        if !par.bbox.contains(&line.bbox) {
                            return Err(Error::Document(format!(
                                "paragraph {q} does not enclose line {l} (page {p})"
                            )));
                        }
                        for word in &line.words {
                            let bbox = match self.elements.get(word.element) {
                                Some(Element::Text(t)) => t.bbox(),
                                Some(Element::Image(_)) => {
                                    return Err(Error::Document(format!(
                                        "word leaf references image element {}",
                                        word.element
                                    )))
                                }
                                None => {
                                    return Err(Error::Document(format!(
                                        "word leaf references missing element {}",
                                        word.element
                                    )))
                                }
                            };
                            if !line.bbox.contains(&bbox) {
                                return Err(Error::Document(format!(
                                    "line {l} does not enclose word element {} (page {p})",
                                    word.element
                                )));
                            }
                        }
                    }
                }
            }
            // Image crops must stay within the bounds of some page.
            for el in &self.elements {
                if let Element::Image(img) = el {
                    if !self.layout.pages.iter().any(|pg| pg.bbox.contains(&img.pixel_ref.crop)) {
                        return Err(Error::Document(format!(
                            "image crop {:?} outside page bounds",
                            img.pixel_ref.crop
                        )));
                    }
                }
            }
        }
        let leaves = self.layout.word_elements();
        let text_indices: Vec<usize> = self
            .elements
            .iter()
            .enumerate()
            .filter_map(|(i, e)| matches!(e, Element::Text(_)).then_some(i))
            .collect();
        if leaves != text_indices {
            return Err(Error::Document(format!(
                "word leaves ({}) do not match text elements ({}) in reading order",
                leaves.len(),
                text_indices.len()
            )));
        }
        Ok(())
    }

    /// Number of words (text elements) in reading order.
    pub fn word_count(&self) -> usize {
        self.elements.iter().filter(|e| matches!(e, Element::Text(_))).count()
    }

    /// The `word_index`-th text element in reading order.
    pub fn word(&self, word_index: usize) -> Option<&TextElement> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Text(t) => Some(t),
                Element::Image(_) => None,
            })
            .nth(word_index)
    }

    /// Word-index ranges `[start, end)` per text line, in reading order.
    pub fn line_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut next = 0usize;
        for page in &self.layout.pages {
            for col in &page.columns {
                for par in &col.paragraphs {
                    for line in &par.lines {
                        out.push((next, next + line.words.len()));
                        next += line.words.len();
                    }
                }
            }
        }
        out
    }

    /// Words of the line containing `word_index`, as texts in reading order,
    /// together with the word's offset within that line.
    pub fn line_of(&self, word_index: usize) -> Option<(Vec<&str>, usize)> {
        let (start, end) = *self
            .line_ranges()
            .iter()
            .find(|(s, e)| (*s..*e).contains(&word_index))?;
        let words = (start..end)
            .map(|i| self.word(i).map(|t| t.text.as_str()))
            .collect::<Option<Vec<_>>>()?;
        Some((words, word_index - start))
    }
}

/// Ordered, unique attribute names of a relational table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<String>,
}

impl Schema {
    pub fn new(attributes: Vec<String>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Table("schema must have at least one attribute".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &attributes {
            if !seen.insert(a) {
                return Err(Error::Table(format!("duplicate attribute name {a:?}")));
            }
        }
        Ok(Schema { attributes })
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn attribute(&self, i: usize) -> &str {
        &self.attributes[i]
    }
}

/// One attribute value: absent, a single string, or an ordered list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttrValue {
    Missing,
    Single(String),
    Multi(Vec<String>),
}

impl AttrValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, AttrValue::Missing)
    }
}

/// A relational tuple with schema-ordered values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tuple {
    pub id: String,
    pub values: Vec<AttrValue>,
}

/// A relational table: schema plus tuples, ids unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub schema: Schema,
    pub tuples: Vec<Tuple>,
}

impl Table {
    pub fn new(schema: Schema, tuples: Vec<Tuple>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &tuples {
            if t.values.len() != schema.arity() {
                return Err(Error::Table(format!(
                    "tuple {:?} has {} values, schema arity is {}",
                    t.id,
                    t.values.len(),
                    schema.arity()
                )));
            }
            if !seen.insert(t.id.clone()) {
                return Err(Error::Table(format!("duplicate tuple id {:?}", t.id)));
            }
        }
        Ok(Table { schema, tuples })
    }

    pub fn tuple_by_id(&self, id: &str) -> Option<&Tuple> {
        self.tuples.iter().find(|t| t.id == id)
    }
}
