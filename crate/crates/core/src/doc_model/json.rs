//! Canonical document JSON: a nested page/column/paragraph/line/word layout
//! with explicit bboxes. This is the test-friendly interchange format; parsing
//! validates the same invariants as the hOCR path.
//!
//! Image regions are normalized to the first page whose bbox contains their
//! crop, on both parse and serialize, so serialization is a fixed point.

use serde::{Deserialize, Serialize};

use super::{
    BBox, ColumnNode, Document, Element, ImageElement, LayoutTree, LineNode, PageNode,
    ParagraphNode, PixelRef, TextElement, WordNode,
};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocJson {
    doc_id: String,
    image_ref: Option<String>,
    pages: Vec<PageJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PageJson {
    bbox: [u32; 4],
    columns: Vec<ColumnJson>,
    /// Image regions on this page; optional extension, omitted when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    images: Vec<ImageJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnJson {
    bbox: [u32; 4],
    paragraphs: Vec<ParagraphJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParagraphJson {
    bbox: [u32; 4],
    lines: Vec<LineJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineJson {
    bbox: [u32; 4],
    words: Vec<WordJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WordJson {
    bbox: [u32; 4],
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageJson {
    bbox: [u32; 4],
    path: String,
}

fn bbox(raw: [u32; 4]) -> Result<BBox> {
    BBox::new(raw[0], raw[1], raw[2], raw[3])
}

fn raw(b: &BBox) -> [u32; 4] {
    [b.x0, b.y0, b.x1, b.y1]
}

fn home_page(pages: &[BBox], crop: &BBox) -> Result<usize> {
    pages
        .iter()
        .position(|p| p.contains(crop))
        .ok_or_else(|| Error::Document(format!("image crop {crop:?} outside all pages")))
}

/// Parse canonical document JSON, validating all layout invariants.
pub fn parse_doc_json(json_bytes: &[u8]) -> Result<Document> {
    let mut deserializer = serde_json::Deserializer::from_slice(json_bytes);
    let parsed: DocJson = serde_path_to_error::deserialize(&mut deserializer)
        .map_err(|e| Error::Document(format!("at {}: {}", e.path(), e.inner())))?;

    let page_bboxes: Vec<BBox> =
        parsed.pages.iter().map(|p| bbox(p.bbox)).collect::<Result<_>>()?;

    // Images grouped by their normalized page, in declaration order.
    let mut images_by_page: Vec<Vec<ImageElement>> = vec![Vec::new(); parsed.pages.len()];
    for page in &parsed.pages {
        for image in &page.images {
            let crop = bbox(image.bbox)?;
            let home = home_page(&page_bboxes, &crop)?;
            images_by_page[home].push(ImageElement {
                pixel_ref: PixelRef { path: image.path.clone(), crop },
                x: crop.x0,
                y: crop.y0,
                w: crop.width(),
                h: crop.height(),
            });
        }
    }

    let mut elements = Vec::new();
    let mut pages = Vec::new();
    for (page_idx, page) in parsed.pages.into_iter().enumerate() {
        let mut columns = Vec::new();
        for col in page.columns {
            let col_bbox = bbox(col.bbox)?;
            let mut paragraphs = Vec::new();
            for par in col.paragraphs {
                let mut lines = Vec::new();
                for line in par.lines {
                    let mut words = Vec::new();
                    for word in line.words {
                        let b = bbox(word.bbox)?;
                        let element = elements.len();
                        elements.push(Element::Text(TextElement::new(
                            word.text,
                            b.x0,
                            b.y0,
                            b.width(),
                            b.height(),
                        )?));
                        words.push(WordNode { element });
                    }
                    lines.push(LineNode { bbox: bbox(line.bbox)?, words });
                }
                paragraphs.push(ParagraphNode { bbox: bbox(par.bbox)?, lines });
            }
            columns.push(ColumnNode { bbox: col_bbox, paragraphs });
        }
        pages.push(PageNode { bbox: page_bboxes[page_idx], columns });
        elements.extend(images_by_page[page_idx].drain(..).map(Element::Image));
    }
    let document = Document {
        doc_id: parsed.doc_id,
        elements,
        layout: LayoutTree { pages },
        image_ref: parsed.image_ref,
    };
    document.validate()?;
    Ok(document)
}

/// Serialize a document to canonical JSON (compact, stable field order).
pub fn serialize_document(doc: &Document) -> Result<String> {
    doc.validate()?;
    let page_bboxes: Vec<BBox> = doc.layout.pages.iter().map(|p| p.bbox).collect();
    let mut pages = Vec::new();
    for page in &doc.layout.pages {
        let mut columns = Vec::new();
        for col in &page.columns {
            let mut paragraphs = Vec::new();
            for par in &col.paragraphs {
                let mut lines = Vec::new();
                for line in &par.lines {
                    let words = line
                        .words
                        .iter()
                        .map(|w| match &doc.elements[w.element] {
                            Element::Text(t) => {
                                WordJson { bbox: raw(&t.bbox()), text: t.text.clone() }
                            }
                            Element::Image(_) => unreachable!("validated: leaves are text"),
                        })
                        .collect();
                    lines.push(LineJson { bbox: raw(&line.bbox), words });
                }
                paragraphs.push(ParagraphJson { bbox: raw(&par.bbox), lines });
            }
            columns.push(ColumnJson { bbox: raw(&col.bbox), paragraphs });
        }
        pages.push(PageJson { bbox: raw(&page.bbox), columns, images: Vec::new() });
    }
    for el in &doc.elements {
        if let Element::Image(img) = el {
            let home = home_page(&page_bboxes, &img.pixel_ref.crop)?;
            pages[home].images.push(ImageJson {
                bbox: raw(&img.pixel_ref.crop),
                path: img.pixel_ref.path.clone(),
            });
        }
    }
    let dto = DocJson { doc_id: doc.doc_id.clone(), image_ref: doc.image_ref.clone(), pages };
    Ok(serde_json::to_string(&dto)?)
}
