//! Shared fixtures for unit tests.

use crate::doc_model::{
    BBox, ColumnNode, Document, Element, LayoutTree, LineNode, PageNode, ParagraphNode,
    TextElement, WordNode,
};

/// One-page document with the given lines of words, synthetic geometry.
pub(crate) fn make_doc(doc_id: &str, lines: &[&[&str]]) -> Document {
    let mut elements = Vec::new();
    let mut line_nodes = Vec::new();
    for (li, words) in lines.iter().enumerate() {
        let y0 = 10 + (li as u32) * 30;
        let mut word_nodes = Vec::new();
        for (wi, text) in words.iter().enumerate() {
            let x0 = 10 + (wi as u32) * 60;
            let element = elements.len();
            elements
                .push(Element::Text(TextElement::new(text.to_string(), x0, y0, 50, 20).unwrap()));
            word_nodes.push(WordNode { element });
        }
        let x1 = 10 + (words.len() as u32) * 60;
        line_nodes.push(LineNode { bbox: BBox { x0: 10, y0, x1, y1: y0 + 20 }, words: word_nodes });
    }
    let bbox = line_nodes.iter().map(|l| l.bbox).reduce(|a, b| a.union(&b)).unwrap();
    let layout = LayoutTree {
        pages: vec![PageNode {
            bbox: BBox { x0: 0, y0: 0, x1: bbox.x1 + 10, y1: bbox.y1 + 10 },
            columns: vec![ColumnNode {
                bbox,
                paragraphs: vec![ParagraphNode { bbox, lines: line_nodes }],
            }],
        }],
    };
    let doc = Document { doc_id: doc_id.into(), elements, layout, image_ref: None };
    doc.validate().unwrap();
    doc
}
